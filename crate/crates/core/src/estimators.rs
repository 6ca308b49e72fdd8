//! Semiparametric memory-parameter estimators: log-periodogram regression
//! `LPR(P)` and local Whittle `SPLW(P)`, each with `P` even-power terms in
//! the frequency that absorb the curvature of the short-memory spectrum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{bandwidth, periodogram, PeriodogramSlice};

/// Largest supported number of even-power terms.
pub const MAX_POLY_ORDER: usize = 3;

/// Default `ν` in `N = floor(T^ν)`.
pub const DEFAULT_BANDWIDTH_EXPONENT: f64 = 0.7;

/// Search interval for the Whittle minimiser.
pub const WHITTLE_LOWER: f64 = -1.0;
pub const WHITTLE_UPPER: f64 = 1.5;
const WHITTLE_GRID_STEP: f64 = 0.01;
const WHITTLE_TOL: f64 = 1e-8;

/// Ordinates below this are floored before taking logs in the regression.
const LOG_FLOOR: f64 = 1e-300;

/// `ψ_P²` for `P = 0..=3`.
const PSI2: [f64; 4] = [1.0, 2.25, 3.52, 4.79];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lpr,
    Splw,
}

impl Family {
    /// `ω²`: `π²/24` for the regression, `1/4` for local Whittle.
    pub fn omega2(self) -> f64 {
        match self {
            Family::Lpr => PI * PI / 24.0,
            Family::Splw => 0.25,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Lpr => "LPR",
            Family::Splw => "SPLW",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lpr" => Ok(Family::Lpr),
            "splw" => Ok(Family::Splw),
            other => Err(Error::InvalidParameter(format!("unknown estimator family `{other}`"))),
        }
    }
}

/// Estimator family, number of even-power terms and bandwidth rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorSpec {
    family: Family,
    p: usize,
    bandwidth_exponent: f64,
}

impl EstimatorSpec {
    pub fn new(family: Family, p: usize) -> Result<Self> {
        if p > MAX_POLY_ORDER {
            return Err(Error::UnsupportedOrder(p));
        }
        Ok(Self { family, p, bandwidth_exponent: DEFAULT_BANDWIDTH_EXPONENT })
    }

    pub fn lpr(p: usize) -> Result<Self> {
        Self::new(Family::Lpr, p)
    }

    pub fn splw(p: usize) -> Result<Self> {
        Self::new(Family::Splw, p)
    }

    pub fn with_bandwidth_exponent(mut self, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth exponent must lie in (0, 1), got {exponent}"
            )));
        }
        self.bandwidth_exponent = exponent;
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn poly_order(&self) -> usize {
        self.p
    }

    pub fn bandwidth_exponent(&self) -> f64 {
        self.bandwidth_exponent
    }

    /// `N` for a sample of size `t`.
    pub fn bandwidth(&self, t: usize) -> Result<usize> {
        bandwidth(t, self.bandwidth_exponent, self.p)
    }

    /// `υ = ω ψ_P`, the asymptotic standard deviation of `√N (d̂ - d)`.
    pub fn upsilon(&self) -> f64 {
        (self.family.omega2() * PSI2[self.p]).sqrt()
    }

    pub fn estimate(&self, y: &[f64]) -> Result<EstimateResult> {
        match self.family {
            Family::Lpr => lpr_estimate(y, self),
            Family::Splw => splw_estimate(y, self),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostics {
    Regression {
        /// Residual variance of the log-periodogram regression.
        residual_variance: f64,
    },
    Whittle {
        /// Concentrated objective at the reported minimiser.
        objective: f64,
        /// Best objective value on the coarse grid.
        grid_objective: f64,
        /// The coarse grid minimum sat on the edge of the search interval.
        boundary: bool,
    },
    /// Produced by estimators outside this module.
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub d_hat: f64,
    /// Bandwidth: number of Fourier frequencies used.
    pub n: usize,
    /// `ω ψ_P / √N`.
    pub asymptotic_sd: f64,
    pub diagnostics: Diagnostics,
}

/// Anything that maps a series to an estimate of `d`. The bootstrap is
/// generic over this so it can be driven by test doubles.
pub trait MemoryEstimator: Sync {
    fn estimate(&self, y: &[f64]) -> Result<EstimateResult>;

    /// Number of even-power correction terms; selects the stopping-rule
    /// probability schedule.
    fn correction_terms(&self) -> usize {
        0
    }
}

impl MemoryEstimator for EstimatorSpec {
    fn estimate(&self, y: &[f64]) -> Result<EstimateResult> {
        EstimatorSpec::estimate(self, y)
    }

    fn correction_terms(&self) -> usize {
        self.p
    }
}

/// `ω ψ_P / √N`.
pub fn asymptotic_sd(spec: &EstimatorSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    Ok(spec.upsilon() / (n as f64).sqrt())
}

/// Log-periodogram regression `LPR(P)`.
pub fn lpr_estimate(y: &[f64], spec: &EstimatorSpec) -> Result<EstimateResult> {
    let n = spec.bandwidth(y.len())?;
    let pg = periodogram(y, n)?;
    let (d_hat, residual_variance) = lpr_from_periodogram(&pg, spec.poly_order())?;
    Ok(EstimateResult {
        d_hat,
        n,
        asymptotic_sd: asymptotic_sd(spec, n)?,
        diagnostics: Diagnostics::Regression { residual_variance },
    })
}

/// OLS of `ln I(λ_j)` on `{1, -2 ln λ_j, λ_j², …, λ_j^{2P}}`; returns the
/// coefficient on `-2 ln λ_j` and the residual variance.
pub fn lpr_from_periodogram(pg: &PeriodogramSlice, p: usize) -> Result<(f64, f64)> {
    if p > MAX_POLY_ORDER {
        return Err(Error::UnsupportedOrder(p));
    }
    let ords = pg.ordinates();
    if ords.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("all periodogram ordinates are zero".into()));
    }
    let n = ords.len();
    let k = p + 2;
    if n < k {
        return Err(Error::InvalidDesign(format!("{n} frequencies cannot identify {k} coefficients")));
    }
    let freqs = pg.freqs();
    let top = freqs[n - 1];
    // Powers of λ_j/λ_N span the same space as powers of λ_j and keep the
    // columns on a common scale.
    let x = DMatrix::from_fn(n, k, |j, c| match c {
        0 => 1.0,
        1 => -2.0 * freqs[j].ln(),
        _ => (freqs[j] / top).powi(2 * (c as i32 - 1)),
    });
    let rhs = DVector::from_iterator(n, ords.iter().map(|&v| v.max(LOG_FLOOR).ln()));
    let beta = least_squares(&x, &rhs)?;
    let resid = &rhs - &x * &beta;
    let dof = (n - k).max(1) as f64;
    Ok((beta[1], resid.norm_squared() / dof))
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    for c in 0..x.ncols() {
        let col = x.column(c).norm();
        if !(r[(c, c)].abs() > 1e-10 * col) {
            return Err(Error::Numerical(format!("regression design is rank deficient at column {c}")));
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
}

/// Local Whittle `SPLW(P)`.
pub fn splw_estimate(y: &[f64], spec: &EstimatorSpec) -> Result<EstimateResult> {
    let n = spec.bandwidth(y.len())?;
    let pg = periodogram(y, n)?;
    let fit = splw_from_periodogram(&pg, spec.poly_order())?;
    Ok(EstimateResult {
        d_hat: fit.d,
        n,
        asymptotic_sd: asymptotic_sd(spec, n)?,
        diagnostics: Diagnostics::Whittle {
            objective: fit.objective,
            grid_objective: fit.grid_objective,
            boundary: fit.boundary,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhittleFit {
    pub d: f64,
    /// Coefficients of the even-power terms in `(λ/λ_N)^{2p}` units.
    pub theta: Vec<f64>,
    pub objective: f64,
    pub grid_objective: f64,
    pub boundary: bool,
}

/// Minimise the concentrated local-polynomial Whittle objective.
///
/// The local spectrum is modelled as `G λ^{-2d} exp(Σ_p θ_p λ^{2p})`.
/// Concentrating out `G` gives
///
/// ```text
/// R(d, θ) = ln( N⁻¹ Σ_j λ_j^{2d} I_j exp(-Σ_p θ_p λ_j^{2p}) ) - 2d N⁻¹ Σ_j ln λ_j + Σ_p θ_p N⁻¹ Σ_j λ_j^{2p}
/// ```
///
/// which for `P = 0` is the classical local Whittle objective. `R` is a
/// log-sum-exp of affine functions plus a linear term, hence jointly convex
/// in `(d, θ)`, so the profile `min_θ R(d, θ)` is convex in `d`. The inner
/// minimisation starts from the least-squares fit of `ln(λ^{2d} I)` on the
/// even powers and is finished by Newton's method. The outer search is a
/// grid over `[-1, 1.5]` at step 0.01, golden-section refinement of the best
/// bracket to 1e-8, and a final Newton polish on the joint stationarity
/// conditions inside that bracket.
pub fn splw_from_periodogram(pg: &PeriodogramSlice, p: usize) -> Result<WhittleFit> {
    if p > MAX_POLY_ORDER {
        return Err(Error::UnsupportedOrder(p));
    }
    let problem = WhittleProblem::new(pg, p)?;
    problem.minimise()
}

/// Concentrated Whittle objective `R(d, θ)`; `theta.len()` must equal `p`.
pub fn whittle_objective(pg: &PeriodogramSlice, p: usize, d: f64, theta: &[f64]) -> Result<f64> {
    let problem = WhittleProblem::new(pg, p)?;
    if theta.len() != p {
        return Err(Error::InvalidParameter(format!("expected {p} polynomial coefficients")));
    }
    Ok(problem.value(d, theta))
}

struct WhittleProblem {
    ln_i: Vec<f64>,
    two_ell: Vec<f64>,
    /// Row-major `N × P` even powers of `λ_j/λ_N`.
    x: Vec<f64>,
    mean_ell: f64,
    mean_x: Vec<f64>,
    p: usize,
}

impl WhittleProblem {
    fn new(pg: &PeriodogramSlice, p: usize) -> Result<Self> {
        let ords = pg.ordinates();
        if ords.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateInput("all periodogram ordinates are zero".into()));
        }
        let n = ords.len();
        if n < p + 2 {
            return Err(Error::InvalidDesign(format!("{n} frequencies are too few for P={p}")));
        }
        let freqs = pg.freqs();
        let top = freqs[n - 1];
        let mut x = Vec::with_capacity(n * p);
        for &f in freqs {
            let r2 = (f / top).powi(2);
            let mut acc = 1.0;
            for _ in 0..p {
                acc *= r2;
                x.push(acc);
            }
        }
        let mut mean_x = vec![0.0; p];
        for j in 0..n {
            for q in 0..p {
                mean_x[q] += x[j * p + q] / n as f64;
            }
        }
        let mean_ell = freqs.iter().map(|f| f.ln()).sum::<f64>() / n as f64;
        Ok(Self {
            ln_i: ords.iter().map(|v| v.ln()).collect(),
            two_ell: freqs.iter().map(|f| 2.0 * f.ln()).collect(),
            x,
            mean_ell,
            mean_x,
            p,
        })
    }

    fn n(&self) -> usize {
        self.ln_i.len()
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.x[j * self.p..(j + 1) * self.p]
    }

    /// `u_j = 2d ln λ_j + ln I_j - θ·x_j` into `buf`; returns the maximum.
    fn exponents(&self, d: f64, theta: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        let mut top = f64::NEG_INFINITY;
        for j in 0..self.n() {
            let mut u = d * self.two_ell[j] + self.ln_i[j];
            for (x, t) in self.row(j).iter().zip(theta) {
                u -= x * t;
            }
            top = top.max(u);
            buf.push(u);
        }
        top
    }

    fn linear_part(&self, d: f64, theta: &[f64]) -> f64 {
        let lin: f64 = theta.iter().zip(&self.mean_x).map(|(a, b)| a * b).sum();
        -(self.n() as f64).ln() - 2.0 * d * self.mean_ell + lin
    }

    fn value(&self, d: f64, theta: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.n());
        let m = self.exponents(d, theta, &mut buf);
        let s: f64 = buf.iter().map(|v| (v - m).exp()).sum();
        m + s.ln() + self.linear_part(d, theta)
    }

    /// Value, gradient and Hessian. With `joint` the coordinates are
    /// `(d, θ_1, …, θ_P)`, otherwise `θ` alone; `dim` reports which.
    fn derivatives(&self, d: f64, theta: &[f64], joint: bool) -> Derivs {
        let off = joint as usize;
        let dim = self.p + off;
        let mut buf = Vec::with_capacity(self.n());
        let m = self.exponents(d, theta, &mut buf);
        let mut s = 0.0;
        let mut g = [0.0; K_MAX];
        let mut h = [[0.0; K_MAX]; K_MAX];
        let mut a = [0.0; K_MAX];
        for (j, u) in buf.iter().enumerate() {
            let w = (u - m).exp();
            s += w;
            if joint {
                a[0] = self.two_ell[j];
            }
            for (q, x) in self.row(j).iter().enumerate() {
                a[q + off] = -x;
            }
            for r in 0..dim {
                g[r] += w * a[r];
                for c in 0..=r {
                    h[r][c] += w * a[r] * a[c];
                }
            }
        }
        for r in 0..dim {
            g[r] /= s;
        }
        for r in 0..dim {
            for c in 0..=r {
                let v = h[r][c] / s - g[r] * g[c];
                h[r][c] = v;
                h[c][r] = v;
            }
        }
        if joint {
            g[0] -= 2.0 * self.mean_ell;
        }
        for q in 0..self.p {
            g[q + off] += self.mean_x[q];
        }
        Derivs { value: m + s.ln() + self.linear_part(d, theta), g, h, dim }
    }

    /// Least-squares start for `θ` at a given `d`.
    fn theta_start(&self, d: f64) -> Vec<f64> {
        if self.p == 0 {
            return Vec::new();
        }
        let rows: Vec<usize> = (0..self.n()).filter(|&j| self.ln_i[j].is_finite()).collect();
        if rows.len() < self.p + 1 {
            return vec![0.0; self.p];
        }
        let x = DMatrix::from_fn(rows.len(), self.p + 1, |r, c| {
            if c == 0 { 1.0 } else { self.row(rows[r])[c - 1] }
        });
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&j| d * self.two_ell[j] + self.ln_i[j]));
        match least_squares(&x, &y) {
            Ok(beta) => beta.iter().skip(1).copied().collect(),
            Err(_) => vec![0.0; self.p],
        }
    }

    /// `min_θ R(d, θ)` by damped Newton from `theta` (updated in place).
    fn profile(&self, d: f64, theta: &mut Vec<f64>) -> f64 {
        if self.p == 0 {
            return self.value(d, &[]);
        }
        let mut current = self.derivatives(d, theta, false);
        for _ in 0..50 {
            let Some(step) = newton_step(&current) else { break };
            // Newton decrement: predicted reduction of a full step.
            let decrement: f64 = -(0..self.p).map(|q| current.g[q] * step[q]).sum::<f64>();
            if !(decrement > 1e-20) {
                break;
            }
            if decrement < 1e-8 {
                // Quadratic convergence region: the full step is safe and a
                // function-value test could not resolve the reduction.
                for (t, s) in theta.iter_mut().zip(&step) {
                    *t += s;
                }
                current = self.derivatives(d, theta, false);
                continue;
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
                let ft = self.value(d, &trial);
                if ft <= current.value - 1e-4 * alpha * decrement {
                    accepted = Some(trial);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(trial) = accepted else { break };
            *theta = trial;
            current = self.derivatives(d, theta, false);
        }
        current.value
    }

    fn minimise(&self) -> Result<WhittleFit> {
        let steps = ((WHITTLE_UPPER - WHITTLE_LOWER) / WHITTLE_GRID_STEP).round() as usize;
        let grid_point = |i: usize| {
            if i == steps { WHITTLE_UPPER } else { WHITTLE_LOWER + i as f64 * WHITTLE_GRID_STEP }
        };

        // The profile `min_θ R(d, θ)` is convex in d (a partial minimum of a
        // log-sum-exp of affine functions), so the first grid minimiser is
        // the first index whose forward difference is non-negative.
        let mut cache: Vec<Option<(f64, Vec<f64>)>> = vec![None; steps + 1];
        let mut warm = self.theta_start(grid_point(steps / 2));
        let mut eval = |i: usize| -> f64 {
            if let Some((v, _)) = &cache[i] {
                return *v;
            }
            let mut th = warm.clone();
            let v = self.profile(grid_point(i), &mut th);
            let v = if v.is_finite() { v } else { f64::INFINITY };
            warm = th.clone();
            cache[i] = Some((v, th));
            v
        };
        let (mut lo_i, mut hi_i) = (0, steps);
        while lo_i < hi_i {
            let mid = (lo_i + hi_i) / 2;
            if eval(mid + 1) >= eval(mid) {
                hi_i = mid;
            } else {
                lo_i = mid + 1;
            }
        }
        let best = lo_i;
        let best_value = eval(best);
        for i in [best.saturating_sub(1), (best + 1).min(steps)] {
            eval(i);
        }
        if !best_value.is_finite() {
            return Err(Error::Numerical("Whittle objective is not finite on the grid".into()));
        }
        let values: Vec<f64> = cache.iter().map(|c| c.as_ref().map_or(f64::INFINITY, |c| c.0)).collect();
        let thetas: Vec<Vec<f64>> = cache.into_iter().map(|c| c.map_or_else(Vec::new, |c| c.1)).collect();
        let grid_objective = values[best];
        let boundary = best == 0 || best == steps;

        let lo = grid_point(best.saturating_sub(1));
        let hi = grid_point((best + 1).min(steps));
        let mut warm = thetas[best].clone();
        let (mut d, _) = golden_section(lo, hi, WHITTLE_TOL, |x| {
            let mut th = warm.clone();
            let v = self.profile(x, &mut th);
            warm = th;
            v
        });

        let mut theta = warm;
        self.profile(d, &mut theta);
        // Newton polish on the joint first-order conditions, kept inside the
        // golden bracket so the refinement cannot leave the grid minimum's
        // basin.
        for _ in 0..8 {
            let cur = self.derivatives(d, &theta, true);
            let Some(step) = newton_step(&cur) else { break };
            let nd = d + step[0];
            if !(nd >= lo && nd <= hi) {
                break;
            }
            d = nd;
            for (t, s) in theta.iter_mut().zip(&step[1..]) {
                *t += s;
            }
            if step[0].abs() < 1e-15 {
                break;
            }
        }
        let mut objective = self.profile(d, &mut theta);

        if !(objective <= grid_objective) {
            d = grid_point(best);
            theta = thetas[best].clone();
            objective = grid_objective;
        }
        Ok(WhittleFit { d, theta, objective, grid_objective, boundary })
    }
}

const K_MAX: usize = MAX_POLY_ORDER + 1;

struct Derivs {
    value: f64,
    g: [f64; K_MAX],
    h: [[f64; K_MAX]; K_MAX],
    dim: usize,
}

/// `-H⁻¹ g` by Cholesky; `None` if `H` is not numerically positive definite.
fn newton_step(d: &Derivs) -> Option<Vec<f64>> {
    let n = d.dim;
    let mut l = [[0.0; K_MAX]; K_MAX];
    for i in 0..n {
        for j in 0..=i {
            let mut s = d.h[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 1e-14 * d.h[i][i].abs().max(f64::MIN_POSITIVE)) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; K_MAX];
    for i in 0..n {
        let mut s = -d.g[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_section(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd { (c, fc) } else { (d, fd) }
}
