use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [C64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

/// Two-sided coefficient sequence indexed `lo, lo+1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coeffs {
    pub lo: i64,
    #[serde(with = "crate::cplx::vec")]
    pub values: Vec<C64>,
}

impl Coeffs {
    pub fn new(lo: i64, values: Vec<C64>) -> Self {
        Coeffs { lo, values }
    }

    /// One-sided sequence starting at index 0.
    pub fn causal(values: Vec<C64>) -> Self {
        Coeffs { lo: 0, values }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    /// Coefficient at index `k`, zero outside the stored range.
    pub fn get(&self, k: i64) -> C64 {
        let i = k - self.lo;
        if i < 0 || i >= self.values.len() as i64 {
            ZERO
        } else {
            self.values[i as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.lo + i as i64, v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Coeffs {
        Coeffs::new(self.lo, self.values.iter().map(|&v| v * s).collect())
    }
}

/// `r_k = (1/M) Σ_m v_m e^{−ikλ_m}` for `k = lo..=hi`.
pub fn analyze(values: &[C64], lo: i64, hi: i64) -> Coeffs {
    let m = values.len();
    let mut buf = values.to_vec();
    fft_in_place(&mut buf, false);
    let inv = 1.0 / m as f64;
    let out = (lo..=hi)
        .map(|k| {
            let idx = k.rem_euclid(m as i64) as usize;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            buf[idx] * (sign * inv)
        })
        .collect();
    Coeffs::new(lo, out)
}

/// Coefficients of a real function for lags `−maxlag..=maxlag`, with
/// `r_{−k} = conj(r_k)` imposed exactly.
pub fn analyze_real(values: &[f64], maxlag: usize) -> Coeffs {
    let z: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
    let pos = analyze(&z, 0, maxlag as i64);
    let l = maxlag as i64;
    let mut out = vec![ZERO; 2 * maxlag + 1];
    out[maxlag] = C64::new(pos.values[0].re, 0.0);
    for k in 1..=maxlag {
        let v = pos.values[k];
        out[maxlag + k] = v;
        out[maxlag - k] = v.conj();
    }
    Coeffs::new(-l, out)
}

/// Grid values `Σ_k c_k e^{ikλ_m}`.
pub fn synthesize(c: &Coeffs, m: usize) -> Vec<C64> {
    let mut buf = vec![ZERO; m];
    for (k, v) in c.iter() {
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[k.rem_euclid(m as i64) as usize] += v * sign;
    }
    fft_in_place(&mut buf, true);
    buf
}

/// Grid quadrature of `(1/2π)∫ t dλ`.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Function of the density whose coefficients are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    OfF,
    OfInvF,
    OfLogF,
}

/// Fourier coefficients `r_{−maxlag..=maxlag}` of `f`, `1/f` or `ln f`.
pub fn fourier_coeffs(samples: &[f64], transform: Transform, maxlag: usize) -> Result<Coeffs> {
    if maxlag >= samples.len() / 2 {
        return Err(Error::input(format!(
            "maxlag {maxlag} aliases on a grid of {} points",
            samples.len()
        )));
    }
    let t: Vec<f64> = match transform {
        Transform::OfF => samples.to_vec(),
        Transform::OfInvF | Transform::OfLogF => {
            if let Some((m, &x)) = samples.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
                return Err(Error::MinimalityViolated(format!(
                    "sample {m} is {x}, not strictly positive"
                )));
            }
            if transform == Transform::OfInvF {
                samples.iter().map(|x| 1.0 / x).collect()
            } else {
                samples.iter().map(|x| x.ln()).collect()
            }
        }
    };
    Ok(analyze_real(&t, maxlag))
}
