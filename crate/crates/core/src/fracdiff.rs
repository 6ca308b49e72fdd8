//! Fractional differencing `(1 - L)^d` with the truncated (type-II)
//! convention: only observed values enter the filter.

use crate::error::{ensure_finite, Error, Result};

/// Coefficients `α_0..α_{n-1}` of the binomial expansion of `(1 - z)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FracCoeffs {
    d: f64,
    coeffs: Vec<f64>,
}

impl FracCoeffs {
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }
}

/// `α_0 = 1`, `α_j = α_{j-1} (j - 1 - d) / j`.
///
/// The recursion stays finite for any `j`, unlike the Gamma-ratio form.
pub fn frac_diff_coeffs(d: f64, n: usize) -> Result<FracCoeffs> {
    if !d.is_finite() {
        return Err(Error::InvalidParameter(format!("memory parameter must be finite, got {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one coefficient".into()));
    }
    let mut coeffs = Vec::with_capacity(n);
    coeffs.push(1.0);
    for j in 1..n {
        let jf = j as f64;
        coeffs.push(coeffs[j - 1] * (jf - 1.0 - d) / jf);
    }
    Ok(FracCoeffs { d, coeffs })
}

/// `w(t) = Σ_{j=0}^{t-1} α_j^{(d)} y(t-j)` for `t = 1..T`.
///
/// Passing `-d` inverts a previous application with `d` exactly (up to
/// rounding): the filter matrix is unit lower-triangular Toeplitz.
pub fn apply_frac_filter(y: &[f64], d: f64) -> Result<Vec<f64>> {
    ensure_finite(y, "series")?;
    if y.is_empty() {
        return Err(Error::InvalidParameter("cannot filter an empty series".into()));
    }
    let alpha = frac_diff_coeffs(d, y.len())?;
    Ok(filter_with(alpha.as_slice(), y))
}

/// Direct convolution; `alpha.len()` must be at least `y.len()`.
pub(crate) fn filter_with(alpha: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    debug_assert!(alpha.len() >= n);
    let mut out = vec![0.0; n];
    // out[t] = Σ_{j=0}^{t} alpha[j] y[t-j]; accumulate column-wise so the
    // inner loop is a contiguous axpy.
    for (s, &ys) in y.iter().enumerate() {
        if ys == 0.0 {
            continue;
        }
        for (o, &a) in out[s..].iter_mut().zip(&alpha[..n - s]) {
            *o += a * ys;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coefficient_examples() {
        assert_eq!(frac_diff_coeffs(0.0, 4).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(frac_diff_coeffs(1.0, 3).unwrap().as_slice(), &[1.0, -1.0, 0.0]);
        // Hand application of the recursion: -0.5, (-0.5)(0.5)/2, (-0.125)(1.5)/3.
        assert_eq!(
            frac_diff_coeffs(0.5, 4).unwrap().as_slice(),
            &[1.0, -0.5, -0.125, -0.0625]
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(frac_diff_coeffs(f64::NAN, 3).is_err());
        assert!(frac_diff_coeffs(f64::INFINITY, 3).is_err());
        assert!(frac_diff_coeffs(0.2, 0).is_err());
        assert!(apply_frac_filter(&[], 0.2).is_err());
        assert!(apply_frac_filter(&[1.0, f64::NAN], 0.2).is_err());
    }

    #[test]
    fn coefficient_shape_for_unit_interval() {
        for &d in &[0.05, 0.3, 0.49, 0.8] {
            let a = frac_diff_coeffs(d, 2000).unwrap();
            let a = a.as_slice();
            assert_eq!(a[0], 1.0);
            for j in 1..a.len() {
                assert!(a[j] < 0.0, "d={d} j={j}");
                if j > 1 {
                    assert!(a[j].abs() < a[j - 1].abs());
                }
            }
        }
    }

    #[test]
    fn recursion_holds_to_rounding() {
        let a = frac_diff_coeffs(0.37, 500).unwrap();
        let a = a.as_slice();
        for j in 1..a.len() {
            let expect = a[j - 1] * (j as f64 - 1.0 - 0.37) / j as f64;
            assert!((a[j] - expect).abs() <= 4.0 * f64::EPSILON * expect.abs());
        }
    }

    #[test]
    fn filter_examples() {
        let y = [0.3, -1.2, 2.5, 0.7];
        assert_eq!(apply_frac_filter(&y, 0.0).unwrap(), y.to_vec());
        assert_eq!(apply_frac_filter(&[1.0, 2.0, 3.0], 1.0).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn round_trip_t200() {
        let y: Vec<f64> = (0..200).map(|i| (i * 37 % 101) as f64 / 50.0 - 1.0).collect();
        let w = apply_frac_filter(&y, 0.4).unwrap();
        let back = apply_frac_filter(&w, -0.4).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_difference_at_unit_order() {
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let w = apply_frac_filter(&y, 1.0).unwrap();
        assert_eq!(w[0], y[0]);
        for t in 1..y.len() {
            assert!((w[t] - (y[t] - y[t - 1])).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn round_trip_relative(d in -1.0f64..1.5, y in prop::collection::vec(-100.0f64..100.0, 1..300)) {
            let w = apply_frac_filter(&y, d).unwrap();
            let back = apply_frac_filter(&w, -d).unwrap();
            let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (a, b) in y.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn linear(d in -1.0f64..1.5, a in -3.0f64..3.0, b in -3.0f64..3.0,
                  pair in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..100)) {
            let (y1, y2): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
            let lhs = apply_frac_filter(&mix, d).unwrap();
            let f1 = apply_frac_filter(&y1, d).unwrap();
            let f2 = apply_frac_filter(&y2, d).unwrap();
            for t in 0..lhs.len() {
                let rhs = a * f1[t] + b * f2[t];
                prop_assert!((lhs[t] - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }
}
