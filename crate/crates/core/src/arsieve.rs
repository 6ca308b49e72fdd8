//! Autoregressive sieve: Levinson-Durbin, Burg, AIC order selection,
//! residual extraction and AR path simulation.
//!
//! Sign convention throughout: `φ(0) = 1` and the prediction error is
//! `ε(t) = Σ_{j=0}^{h} φ(j) w(t-j)`, so an AR(1) with autoregressive
//! parameter `a` has `φ(1) = -a`.

use crate::error::{ensure_finite, Error, Result};

/// Reflection coefficients this close to the unit circle are treated as
/// degenerate.
const UNIT_CIRCLE_GUARD: f64 = 1e-12;

/// A fitted (or population) AR(h) predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct ArFit {
    phi: Vec<f64>,
    sigma2: f64,
}

impl ArFit {
    /// Validates `φ(0) = 1`, `σ² > 0` and stability.
    pub fn new(phi: Vec<f64>, sigma2: f64) -> Result<Self> {
        if phi.first() != Some(&1.0) {
            return Err(Error::InvalidParameter("AR polynomial must have unit leading term".into()));
        }
        ensure_finite(&phi, "AR coefficients")?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("innovation variance must be positive, got {sigma2}")));
        }
        let fit = Self { phi, sigma2 };
        fit.reflection_coefficients()?;
        Ok(fit)
    }

    /// White noise with variance `sigma2`.
    pub fn white_noise(sigma2: f64) -> Result<Self> {
        Self::new(vec![1.0], sigma2)
    }

    pub fn order(&self) -> usize {
        self.phi.len() - 1
    }

    /// `φ(0..=h)` with `φ(0) = 1`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Step-down recursion from the polynomial back to its reflection
    /// coefficients `κ_1..κ_h`. Fails if any `|κ_k| ≥ 1`, i.e. if the
    /// polynomial has a root on or inside the unit circle.
    pub fn reflection_coefficients(&self) -> Result<Vec<f64>> {
        let h = self.order();
        let mut kappa = vec![0.0; h];
        let mut a = self.phi.clone();
        for k in (1..=h).rev() {
            let kk = a[k];
            if !(kk.abs() < 1.0) {
                return Err(Error::NotPositiveDefinite { order: k, reflection: kk });
            }
            kappa[k - 1] = kk;
            let scale = 1.0 - kk * kk;
            let prev: Vec<f64> = (0..k).map(|j| (a[j] - kk * a[k - j]) / scale).collect();
            a = prev;
        }
        Ok(kappa)
    }

    /// Autocovariances `γ(0..=max_lag)` of the AR process this fit describes,
    /// by the inverse Levinson recursion.
    pub fn implied_acvf(&self, max_lag: usize) -> Result<Vec<f64>> {
        let kappa = self.reflection_coefficients()?;
        let h = self.order();
        let gamma0 = kappa.iter().fold(self.sigma2, |v, k| v / (1.0 - k * k));
        let mut gamma = vec![0.0; max_lag.max(h) + 1];
        gamma[0] = gamma0;
        let mut a = vec![1.0];
        let mut var = gamma0;
        for k in 1..=h {
            let kk = kappa[k - 1];
            // From κ_k = -(γ(k) + Σ_{j<k} a(j) γ(k-j)) / var.
            let acc: f64 = (1..k).map(|j| a[j] * gamma[k - j]).sum();
            gamma[k] = -kk * var - acc;
            let mut next = a.clone();
            next.push(kk);
            for j in 1..k {
                next[j] = a[j] + kk * a[k - j];
            }
            a = next;
            var *= 1.0 - kk * kk;
        }
        for lag in h + 1..gamma.len() {
            gamma[lag] = -(1..=h).map(|j| self.phi[j] * gamma[lag - j]).sum::<f64>();
        }
        gamma.truncate(max_lag + 1);
        Ok(gamma)
    }
}

/// Residuals of an AR fit and their standardized form.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSet {
    raw: Vec<f64>,
    standardized: Vec<f64>,
    scale: f64,
}

impl ResidualSet {
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Centred residuals divided by [`scale`](Self::scale): mean 0, variance 1.
    pub fn standardized(&self) -> &[f64] {
        &self.standardized
    }

    /// `σ̄_h`, the in-sample standard deviation (divisor `T`) of the residuals.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Durbin-Levinson solution of the Yule-Walker equations for orders
/// `1..=h`, `h = acvf.len() - 1`.
pub fn levinson_durbin(acvf: &[f64]) -> Result<Vec<ArFit>> {
    ensure_finite(acvf, "autocovariances")?;
    let gamma0 = *acvf.first().ok_or_else(|| Error::InvalidParameter("empty autocovariance sequence".into()))?;
    if !(gamma0 > 0.0) {
        return Err(Error::NotPositiveDefinite { order: 0, reflection: f64::NAN });
    }
    let h = acvf.len() - 1;
    let mut fits = Vec::with_capacity(h);
    let mut a = vec![1.0];
    let mut var = gamma0;
    for k in 1..=h {
        let acc: f64 = (0..k).map(|j| a[j] * acvf[k - j]).sum();
        let kk = -acc / var;
        if !(kk.abs() < 1.0 - UNIT_CIRCLE_GUARD) {
            return Err(Error::NotPositiveDefinite { order: k, reflection: kk });
        }
        let mut next = a.clone();
        next.push(kk);
        for j in 1..k {
            next[j] = a[j] + kk * a[k - j];
        }
        a = next;
        var *= 1.0 - kk * kk;
        fits.push(ArFit { phi: a.clone(), sigma2: var });
    }
    Ok(fits)
}

/// Burg fits of orders `0..=h_max` from one forward/backward sweep.
///
/// Element `k` of the result is the order-`k` fit; order 0 is white noise
/// with variance `Σ w² / T`.
pub fn burg_sweep(w: &[f64], h_max: usize) -> Result<Vec<ArFit>> {
    ensure_finite(w, "series")?;
    let t = w.len();
    if t <= 2 * h_max {
        return Err(Error::InvalidParameter(format!(
            "Burg fit of order {h_max} needs more than {} observations, got {t}",
            2 * h_max
        )));
    }
    let energy: f64 = w.iter().map(|v| v * v).sum::<f64>() / t as f64;
    if !(energy > 0.0) {
        return Err(Error::DegenerateInput("series is identically zero".into()));
    }
    let mut f = w.to_vec();
    let mut b = w.to_vec();
    let mut a = vec![1.0];
    let mut var = energy;
    let mut fits = Vec::with_capacity(h_max + 1);
    fits.push(ArFit { phi: a.clone(), sigma2: var });
    for k in 1..=h_max {
        let (mut num, mut den) = (0.0, 0.0);
        for s in k..t {
            num += f[s] * b[s - 1];
            den += f[s] * f[s] + b[s - 1] * b[s - 1];
        }
        if !(den > 0.0) {
            return Err(Error::DegenerateInput(format!("prediction errors vanish at order {k}")));
        }
        let kk = -2.0 * num / den;
        if !(kk.abs() < 1.0 - UNIT_CIRCLE_GUARD) {
            return Err(Error::NotPositiveDefinite { order: k, reflection: kk });
        }
        // Descending so b[s-1] still holds the previous order's value.
        for s in (k..t).rev() {
            let fs = f[s];
            f[s] = fs + kk * b[s - 1];
            b[s] = b[s - 1] + kk * fs;
        }
        let mut next = a.clone();
        next.push(kk);
        for j in 1..k {
            next[j] = a[j] + kk * a[k - j];
        }
        a = next;
        var *= 1.0 - kk * kk;
        fits.push(ArFit { phi: a.clone(), sigma2: var });
    }
    Ok(fits)
}

/// Order-`h` Burg fit.
pub fn burg_fit(w: &[f64], h: usize) -> Result<ArFit> {
    let mut fits = burg_sweep(w, h)?;
    Ok(fits.pop().expect("sweep returns h + 1 fits"))
}

/// `AIC(h) = T ln σ̂_h² + 2h`, `h = 1..=h_max`, from a single Burg sweep.
/// Element `h - 1` of the result is `AIC(h)`.
pub fn aic_curve(w: &[f64], h_max: usize) -> Result<Vec<f64>> {
    if h_max == 0 {
        return Err(Error::InvalidParameter("maximum order must be at least 1".into()));
    }
    let fits = burg_sweep(w, h_max)?;
    Ok(aic_from_fits(w.len(), &fits))
}

fn aic_from_fits(t: usize, fits: &[ArFit]) -> Vec<f64> {
    fits[1..]
        .iter()
        .enumerate()
        .map(|(i, f)| t as f64 * f.sigma2.ln() + 2.0 * (i + 1) as f64)
        .collect()
}

/// AIC-minimising order in `1..=h_max`; ties go to the smaller order.
pub fn select_order_aic(w: &[f64], h_max: usize) -> Result<usize> {
    Ok(fit_aic(w, h_max)?.order())
}

/// Burg fit at the AIC-selected order.
pub fn fit_aic(w: &[f64], h_max: usize) -> Result<ArFit> {
    if h_max == 0 {
        return Err(Error::InvalidParameter("maximum order must be at least 1".into()));
    }
    let mut fits = burg_sweep(w, h_max)?;
    let aic = aic_from_fits(w.len(), &fits);
    let mut best = 0;
    for (i, v) in aic.iter().enumerate() {
        if *v < aic[best] {
            best = i;
        }
    }
    Ok(fits.swap_remove(best + 1))
}

/// Sieve ceiling `H_T = min(floor((ln T)²), floor(T/4))`, at least 1.
pub fn sieve_order_cap(t: usize) -> usize {
    let lt = (t.max(1) as f64).ln();
    let by_log = (lt * lt).floor() as usize;
    by_log.min(t / 4).max(1)
}

/// `ε̄(t) = Σ_{j=0}^{h} φ(j) w(t-j)` with the circular start-up
/// `w(1-j) = w(T-j+1)`, plus the standardized version.
pub fn ar_residuals(w: &[f64], fit: &ArFit) -> Result<ResidualSet> {
    let t = w.len();
    let h = fit.order();
    if h >= t {
        return Err(Error::InvalidParameter(format!("fit order {h} must be below series length {t}")));
    }
    let phi = fit.phi();
    let raw: Vec<f64> = (0..t)
        .map(|s| {
            phi.iter()
                .enumerate()
                .map(|(j, p)| p * w[(s + t - j) % t])
                .sum()
        })
        .collect();
    let m = raw.iter().sum::<f64>() / t as f64;
    let var = raw.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / t as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateInput("residuals have zero variance".into()));
    }
    let scale = var.sqrt();
    let standardized = raw.iter().map(|e| (e - m) / scale).collect();
    Ok(ResidualSet { raw, standardized, scale })
}

/// Solve `Σ_{j=0}^{h} φ(j) w*(t-j) = ε*(t)` forward from `init_block`,
/// which holds `w*(1-h), …, w*(0)` in chronological order.
pub fn simulate_ar_path(fit: &ArFit, innovations: &[f64], init_block: &[f64]) -> Result<Vec<f64>> {
    let h = fit.order();
    if init_block.len() != h {
        return Err(Error::InvalidParameter(format!(
            "initial block has length {}, expected the fit order {h}",
            init_block.len()
        )));
    }
    fit.reflection_coefficients()
        .map_err(|_| Error::InvalidParameter("cannot simulate from an unstable AR polynomial".into()))?;
    let phi = fit.phi();
    let mut buf = Vec::with_capacity(h + innovations.len());
    buf.extend_from_slice(init_block);
    for &e in innovations {
        let s = buf.len();
        let mut v = e;
        for j in 1..=h {
            v -= phi[j] * buf[s - j];
        }
        buf.push(v);
    }
    Ok(buf.split_off(h))
}
