//! Fourier frequencies and the periodogram over the lowest `N` of them.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};
use crate::series::mean;

/// Periodogram ordinates at `λ_j = 2πj/T`, `j = 1..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodogramSlice {
    t: usize,
    freqs: Vec<f64>,
    ordinates: Vec<f64>,
}

impl PeriodogramSlice {
    /// Sample size the periodogram was computed from.
    pub fn sample_size(&self) -> usize {
        self.t
    }

    pub fn bandwidth(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// Build from precomputed parts. Used by tests that feed synthetic
    /// ordinates to the estimators.
    pub fn from_parts(t: usize, ordinates: Vec<f64>) -> Result<Self> {
        let n = ordinates.len();
        if n == 0 || 2 * n >= t {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= N < T/2, got N={n}, T={t}"
            )));
        }
        if ordinates.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("ordinates must be finite and nonnegative".into()));
        }
        Ok(Self { t, freqs: fourier_frequencies(t, n), ordinates })
    }
}

/// `λ_j = 2πj/T` for `j = 1..=n`.
pub fn fourier_frequencies(t: usize, n: usize) -> Vec<f64> {
    (1..=n).map(|j| 2.0 * PI * j as f64 / t as f64).collect()
}

/// `N = floor(T^exponent)` clamped to `[P + 2, floor((T - 1) / 2)]`.
///
/// A regression with `P` even-power terms, an intercept and the memory
/// regressor needs at least `P + 2` frequencies.
pub fn bandwidth(t: usize, exponent: f64, p: usize) -> Result<usize> {
    if t < 8 {
        return Err(Error::InvalidDesign(format!("sample size {t} is below the minimum of 8")));
    }
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::InvalidDesign(format!(
            "bandwidth exponent must lie in (0, 1), got {exponent}"
        )));
    }
    let upper = (t - 1) / 2;
    let lower = p + 2;
    if upper < lower {
        return Err(Error::InvalidDesign(format!(
            "T={t} leaves {upper} usable frequencies but P={p} needs {lower}"
        )));
    }
    let raw = (t as f64).powf(exponent).floor() as usize;
    Ok(raw.clamp(lower, upper))
}

/// `I(λ_j) = |Σ_t (y(t) - ȳ) e^{-iλ_j t}|² / (2πT)` for `j = 1..=n`.
///
/// Direct `O(T·N)` evaluation against a table of unit roots.
pub fn periodogram(y: &[f64], n: usize) -> Result<PeriodogramSlice> {
    let t = y.len();
    if n == 0 || 2 * n >= t {
        return Err(Error::InvalidParameter(format!("need 1 <= N < T/2, got N={n}, T={t}")));
    }
    ensure_finite(y, "series")?;
    let ybar = mean(y);
    let centred: Vec<f64> = y.iter().map(|v| v - ybar).collect();

    let (cos_tab, sin_tab) = unit_roots(t);
    let norm = 1.0 / (2.0 * PI * t as f64);
    let mut ordinates = Vec::with_capacity(n);
    for j in 1..=n {
        let (mut re, mut im) = (0.0, 0.0);
        // Index runs over t-1 rather than t: a common phase, modulus unchanged.
        let mut k = 0usize;
        for &x in &centred {
            re += x * cos_tab[k];
            im -= x * sin_tab[k];
            k += j;
            if k >= t {
                k -= t;
            }
        }
        ordinates.push((re * re + im * im) * norm);
    }
    Ok(PeriodogramSlice { t, freqs: fourier_frequencies(t, n), ordinates })
}

fn unit_roots(t: usize) -> (Vec<f64>, Vec<f64>) {
    (0..t)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / t as f64;
            (a.cos(), a.sin())
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bandwidth_examples() {
        // floor(100^0.7) = floor(25.118..), floor(500^0.7) = floor(77.62..)
        assert_eq!(bandwidth(100, 0.7, 0).unwrap(), 25);
        assert_eq!(bandwidth(500, 0.7, 0).unwrap(), 77);
        assert_eq!(bandwidth(500, 0.7, 3).unwrap(), 77);
        assert!(bandwidth(8, 0.7, 2).is_err());
        assert_eq!(bandwidth(8, 0.7, 1).unwrap(), 3);
        assert_eq!(bandwidth(9, 0.1, 1).unwrap(), 3, "clamped up to P+2");
        assert!(bandwidth(7, 0.7, 0).is_err());
        assert!(bandwidth(100, 1.0, 0).is_err());
    }

    #[test]
    fn constant_series_is_flat_zero() {
        let p = periodogram(&[3.25; 64], 10).unwrap();
        assert!(p.ordinates().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fourier_cosine_concentrates() {
        let t = 100;
        let lam5 = 2.0 * PI * 5.0 / t as f64;
        let y: Vec<f64> = (1..=t).map(|s| (lam5 * s as f64).cos()).collect();
        let p = periodogram(&y, 49).unwrap();
        let peak = t as f64 / (8.0 * PI);
        assert!((p.ordinates()[4] - peak).abs() < 1e-8);
        for (j, &v) in p.ordinates().iter().enumerate() {
            if j != 4 {
                assert!(v <= 1e-10 * peak, "j={} v={v}", j + 1);
            }
        }
    }

    #[test]
    fn parseval_odd_length() {
        let t = 101;
        let y: Vec<f64> = (0..t).map(|i| ((i * i) % 17) as f64 * 0.3 - (i as f64 * 0.05).cos()).collect();
        let p = periodogram(&y, (t - 1) / 2).unwrap();
        let lhs: f64 = p.ordinates().iter().sum::<f64>() * 4.0 * PI / t as f64;
        let m = mean(&y);
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64;
        assert!((lhs - var).abs() < 1e-12 * var);
    }

    #[test]
    fn shift_invariance_is_exact_on_dyadic_data() {
        // Power-of-two length and dyadic values keep every addition and the
        // mean exact, so the centred series coincide bitwise.
        let t = 512;
        let y: Vec<f64> = (0..t).map(|i| ((i * 131 % 257) as f64 - 128.0) / 64.0).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 12.0).collect();
        assert_eq!(periodogram(&y, 60).unwrap(), periodogram(&shifted, 60).unwrap());
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(periodogram(&[1.0; 10], 5).is_err());
        assert!(periodogram(&[1.0; 10], 0).is_err());
        assert!(periodogram(&[1.0; 10], 4).is_ok());
    }

    proptest! {
        #[test]
        fn scale_equivariance(c in 0.01f64..100.0, y in prop::collection::vec(-5.0f64..5.0, 20..120)) {
            let n = (y.len() - 1) / 2;
            let base = periodogram(&y, n).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
            let sp = periodogram(&scaled, n).unwrap();
            let top = base.ordinates().iter().cloned().fold(0.0, f64::max);
            for (a, b) in base.ordinates().iter().zip(sp.ordinates()) {
                prop_assert!((b - c * c * a).abs() <= 1e-12 * c * c * top.max(1e-300));
            }
        }

        #[test]
        fn nonnegative_and_increasing_freqs(y in prop::collection::vec(-5.0f64..5.0, 10..80)) {
            let n = (y.len() - 1) / 2;
            let p = periodogram(&y, n).unwrap();
            prop_assert!(p.ordinates().iter().all(|v| *v >= 0.0 && v.is_finite()));
            prop_assert!(p.freqs().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(*p.freqs().last().unwrap() < PI);
        }
    }
}
