//! ARFIMA(1,d,0) processes `(1 - L)^d (1 - φL) y(t) = ε(t)`: exact
//! autocovariances, simulation by Durbin-Levinson recursion, and the exact
//! Gaussian maximum-likelihood estimator of `(d, φ)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_finite, Error, Result};
use crate::rng::Stream;
use crate::series::TimeSeries;

/// Default degrees of freedom for Student-t innovations.
pub const DEFAULT_T_DOF: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InnovationLaw {
    Gaussian,
    /// Student-t with the given degrees of freedom, rescaled to unit variance.
    StudentT { dof: f64 },
}

impl InnovationLaw {
    pub fn student_t(dof: f64) -> Result<Self> {
        if !(dof > 2.0) || !dof.is_finite() {
            return Err(Error::InvalidParameter(format!("Student-t needs dof > 2 for finite variance, got {dof}")));
        }
        Ok(InnovationLaw::StudentT { dof })
    }

    /// `n` unit-variance deviates.
    pub fn deviates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            InnovationLaw::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            InnovationLaw::StudentT { dof } => {
                let dist = StudentT::new(dof).expect("dof validated at construction");
                let scale = ((dof - 2.0) / dof).sqrt();
                (0..n).map(|_| scale * rng.sample(dist)).collect()
            }
        }
    }
}

impl fmt::Display for InnovationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnovationLaw::Gaussian => f.write_str("gaussian"),
            InnovationLaw::StudentT { dof } => write!(f, "student-t:{dof}"),
        }
    }
}

impl TryFrom<String> for InnovationLaw {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InnovationLaw> for String {
    fn from(law: InnovationLaw) -> String {
        law.to_string()
    }
}

impl FromStr for InnovationLaw {
    type Err = Error;

    /// `gaussian`, `student-t` (5 degrees of freedom) or `student-t:DOF`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "gaussian" || s == "normal" => Ok(InnovationLaw::Gaussian),
            None if s == "student-t" || s == "t" => InnovationLaw::student_t(DEFAULT_T_DOF),
            Some(("student-t" | "t", dof)) => {
                let dof: f64 = dof
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad degrees of freedom `{dof}`")))?;
                InnovationLaw::student_t(dof)
            }
            _ => Err(Error::InvalidParameter(format!("unknown innovation law `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArfimaParams {
    d: f64,
    phi: f64,
    sigma2: f64,
    law: InnovationLaw,
}

impl ArfimaParams {
    pub fn new(d: f64, phi: f64, sigma2: f64, law: InnovationLaw) -> Result<Self> {
        if !(d > -0.5 && d < 0.5) {
            return Err(Error::InvalidParameter(format!("d must lie in (-0.5, 0.5), got {d}")));
        }
        if !(phi.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("phi must lie in (-1, 1), got {phi}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("innovation variance must be positive, got {sigma2}")));
        }
        Ok(Self { d, phi, sigma2, law })
    }

    /// Unit-variance Gaussian innovations.
    pub fn gaussian(d: f64, phi: f64) -> Result<Self> {
        Self::new(d, phi, 1.0, InnovationLaw::Gaussian)
    }

    pub fn with_law(mut self, law: InnovationLaw) -> Self {
        self.law = law;
        self
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn law(&self) -> InnovationLaw {
        self.law
    }
}

/// `γ(0), …, γ(L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AcvfTable {
    values: Vec<f64>,
}

impl AcvfTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn lag(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Autocovariances of fractional noise `(1 - L)^{-d} ε`:
/// `γ(0) = σ² Γ(1-2d)/Γ(1-d)²`, `γ(k) = γ(k-1)(k-1+d)/(k-d)`.
pub fn fractional_noise_acvf(d: f64, sigma2: f64, max_lag: usize) -> Vec<f64> {
    let g0 = if d == 0.0 { sigma2 } else { sigma2 * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp() };
    let mut g = Vec::with_capacity(max_lag + 1);
    g.push(g0);
    for k in 1..=max_lag {
        let kf = k as f64;
        g.push(g[k - 1] * (kf - 1.0 + d) / (kf - d));
    }
    g
}

/// Exact autocovariances of the ARFIMA(1,d,0) process at lags `0..=max_lag`.
///
/// The AR(1) factor turns fractional-noise autocovariances `γ_u` into
/// `γ(k) = (1-φ²)⁻¹ Σ_{m∈ℤ} φ^{|m|} γ_u(k+m)`. Splitting the sum at `m = 0`
/// gives two first-order recursions: `A(k) = γ_u(k) + φ A(k+1)`, run
/// backwards from a lag where `φ^m` is negligible, and
/// `B(k) = φ (γ_u(|k-1|) + B(k-1))` with `B(0) = φ A(1)`, so that
/// `γ(k) = (A(k) + B(k)) / (1-φ²)`.
pub fn arfima_acvf(params: &ArfimaParams, max_lag: usize) -> Result<AcvfTable> {
    let ArfimaParams { d, phi, sigma2, .. } = *params;
    if phi == 0.0 {
        return Ok(AcvfTable { values: fractional_noise_acvf(d, sigma2, max_lag) });
    }
    // Tail of the backward sum is below γ_u(0)·|φ|^M/(1-|φ|).
    let a = phi.abs();
    let m = ((1e-18 * (1.0 - a)).ln() / a.ln()).ceil() as usize + 1;
    let top = max_lag + m + 1;
    let gu = fractional_noise_acvf(d, sigma2, top);
    let mut fwd = vec![0.0; top + 1];
    for k in (0..top).rev() {
        fwd[k] = gu[k] + phi * fwd[k + 1];
    }
    let scale = 1.0 / (1.0 - phi * phi);
    let mut values = Vec::with_capacity(max_lag + 1);
    let mut back = phi * fwd[1];
    values.push((fwd[0] + back) * scale);
    for k in 1..=max_lag {
        back = phi * (gu[k - 1] + back);
        values.push((fwd[k] + back) * scale);
    }
    ensure_finite(&values, "autocovariances").map_err(|_| Error::Numerical("autocovariances overflowed".into()))?;
    Ok(AcvfTable { values })
}

/// Streaming Durbin-Levinson sweep over a Toeplitz autocovariance sequence.
/// After `step(t)`, `coeffs()` holds the best linear predictor of `y(t+1)`
/// from `y(t), …, y(1)` and `variance()` its error variance.
struct Levinson<'a> {
    gamma: &'a [f64],
    coeffs: Vec<f64>,
    scratch: Vec<f64>,
    v: f64,
}

impl<'a> Levinson<'a> {
    fn new(gamma: &'a [f64]) -> Result<Self> {
        if !(gamma[0] > 0.0) {
            return Err(Error::NotPositiveDefinite { order: 0, reflection: f64::NAN });
        }
        let n = gamma.len();
        Ok(Self { gamma, coeffs: Vec::with_capacity(n), scratch: Vec::with_capacity(n), v: gamma[0] })
    }

    fn variance(&self) -> f64 {
        self.v
    }

    /// Predictor coefficients: `coeffs()[j-1]` multiplies `y(t+1-j)`.
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Extend the predictor from order `t-1` to `t`.
    fn step(&mut self) -> Result<()> {
        let t = self.coeffs.len() + 1;
        let g = self.gamma;
        let mut acc = g[t];
        for (j, c) in self.coeffs.iter().enumerate() {
            acc -= c * g[t - 1 - j];
        }
        let kappa = acc / self.v;
        if !(kappa.abs() < 1.0) {
            return Err(Error::NotPositiveDefinite { order: t, reflection: kappa });
        }
        self.scratch.clear();
        let prev = &self.coeffs;
        self.scratch.extend((0..prev.len()).map(|j| prev[j] - kappa * prev[prev.len() - 1 - j]));
        self.scratch.push(kappa);
        std::mem::swap(&mut self.coeffs, &mut self.scratch);
        self.v *= 1.0 - kappa * kappa;
        Ok(())
    }
}

/// Draws paths of length `T` from an ARFIMA(1,d,0) process. The ACVF is
/// computed once; each path runs the Durbin-Levinson recursion, driving the
/// one-step prediction errors with the innovation law's deviates.
#[derive(Clone, Debug)]
pub struct ArfimaSimulator {
    params: ArfimaParams,
    acvf: AcvfTable,
}

impl ArfimaSimulator {
    pub fn new(params: ArfimaParams, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        Ok(Self { params, acvf: arfima_acvf(&params, t - 1)? })
    }

    pub fn params(&self) -> &ArfimaParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.acvf.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn simulate(&self, stream: &Stream) -> Result<TimeSeries> {
        let mut rng = stream.rng();
        let z = self.params.law.deviates(self.len(), &mut rng);
        TimeSeries::with_known_mean(self.path_from(&z)?, 0.0)
    }

    /// Path driven by the given unit-variance deviates.
    pub fn path_from(&self, z: &[f64]) -> Result<Vec<f64>> {
        let t = self.len();
        if z.len() != t {
            return Err(Error::InvalidParameter(format!("need {t} deviates, got {}", z.len())));
        }
        let gamma = self.acvf.values();
        let mut lev = Levinson::new(gamma)?;
        let mut y = Vec::with_capacity(t);
        y.push(lev.variance().sqrt() * z[0]);
        for s in 1..t {
            lev.step()?;
            let pred: f64 = lev.coeffs().iter().zip(y.iter().rev()).map(|(c, v)| c * v).sum();
            y.push(pred + lev.variance().sqrt() * z[s]);
        }
        Ok(y)
    }
}

/// One ARFIMA(1,d,0) path of length `t`.
pub fn simulate_arfima(params: &ArfimaParams, t: usize, stream: &Stream) -> Result<TimeSeries> {
    ArfimaSimulator::new(*params, t)?.simulate(stream)
}

/// Gaussian log-likelihood at `(d, φ)` with `σ²` profiled out, and the
/// profiled `σ̂²`. Uses the centred series.
pub fn profiled_loglik(y: &TimeSeries, d: f64, phi: f64) -> Result<(f64, f64)> {
    let x = y.centred();
    let t = x.len();
    let params = ArfimaParams::gaussian(d, phi)?;
    let acvf = arfima_acvf(&params, t - 1)?;
    let mut lev = Levinson::new(acvf.values())?;
    let mut sum_sq = x[0] * x[0] / lev.variance();
    let mut log_det = lev.variance().ln();
    for s in 1..t {
        lev.step()?;
        let pred: f64 = lev.coeffs().iter().zip(x[..s].iter().rev()).map(|(c, v)| c * v).sum();
        let e = x[s] - pred;
        sum_sq += e * e / lev.variance();
        log_det += lev.variance().ln();
    }
    let tf = t as f64;
    let sigma2 = sum_sq / tf;
    let ll = -0.5 * tf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) - 0.5 * log_det;
    Ok((ll, sigma2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    /// Coarse grid spacing in both coordinates.
    pub grid_step: f64,
    /// Simplex diameter at which refinement stops.
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub d_bounds: (f64, f64),
    pub phi_bounds: (f64, f64),
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            grid_step: 0.02,
            tolerance: 1e-6,
            max_evaluations: 2000,
            d_bounds: (-0.49, 0.49),
            phi_bounds: (-0.99, 0.99),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleFit {
    pub d: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub loglik: f64,
    /// Best log-likelihood found on the coarse grid.
    pub grid_loglik: f64,
    pub evaluations: usize,
}

/// Exact Gaussian MLE of ARFIMA(1,d,0): coarse grid, then Nelder-Mead
/// started at the best grid point and confined to the search box.
pub fn mle_fit(y: &TimeSeries, options: &MleOptions) -> Result<MleFit> {
    if y.len() < 20 {
        return Err(Error::InvalidParameter(format!("MLE needs at least 20 observations, got {}", y.len())));
    }
    let (dl, du) = options.d_bounds;
    let (pl, pu) = options.phi_bounds;
    if !(-0.5 < dl && dl < du && du < 0.5 && -1.0 < pl && pl < pu && pu < 1.0) {
        return Err(Error::InvalidParameter("MLE search box must sit inside (-0.5, 0.5) x (-1, 1)".into()));
    }
    if !(options.grid_step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let mut evaluations = 0;
    let mut negll = |p: [f64; 2]| -> f64 {
        if !(p[0] >= dl && p[0] <= du && p[1] >= pl && p[1] <= pu) {
            return f64::INFINITY;
        }
        evaluations += 1;
        profiled_loglik(y, p[0], p[1]).map_or(f64::INFINITY, |(ll, _)| -ll)
    };

    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let n = ((hi - lo) / options.grid_step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * options.grid_step).collect()
    };
    let mut best = ([f64::NAN; 2], f64::INFINITY);
    for &d in &axis(dl, du) {
        for &phi in &axis(pl, pu) {
            let v = negll([d, phi]);
            if v < best.1 {
                best = ([d, phi], v);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(Error::MleNonConvergence { d: f64::NAN, phi: f64::NAN });
    }
    let grid_best = best;
    let h = options.grid_step / 2.0;
    let start = [
        grid_best.0,
        [grid_best.0[0] + if grid_best.0[0] + h <= du { h } else { -h }, grid_best.0[1]],
        [grid_best.0[0], grid_best.0[1] + if grid_best.0[1] + h <= pu { h } else { -h }],
    ];
    let budget = options.max_evaluations;
    let (p, v, converged) = nelder_mead(start, options.tolerance, budget, &mut negll);
    if !converged {
        return Err(Error::MleNonConvergence { d: grid_best.0[0], phi: grid_best.0[1] });
    }
    let p = if v <= grid_best.1 { p } else { grid_best.0 };
    let (loglik, sigma2) = profiled_loglik(y, p[0], p[1])?;
    Ok(MleFit { d: p[0], phi: p[1], sigma2, loglik, grid_loglik: -grid_best.1, evaluations })
}

/// Nelder-Mead in two dimensions with the standard coefficients. Stops when
/// every vertex lies within `tol` of the best one in each coordinate.
fn nelder_mead(
    start: [[f64; 2]; 3],
    tol: f64,
    budget: usize,
    f: &mut impl FnMut([f64; 2]) -> f64,
) -> ([f64; 2], f64, bool) {
    let mut simplex: Vec<([f64; 2], f64)> = start.iter().map(|&p| (p, f(p))).collect();
    let mut used = 3;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let spread = simplex[1..]
            .iter()
            .map(|(p, _)| (p[0] - best[0]).abs().max((p[1] - best[1]).abs()))
            .fold(0.0, f64::max);
        if spread <= tol {
            return (best, simplex[0].1, true);
        }
        if used >= budget {
            return (best, simplex[0].1, false);
        }
        let centroid = [(simplex[0].0[0] + simplex[1].0[0]) / 2.0, (simplex[0].0[1] + simplex[1].0[1]) / 2.0];
        let worst = simplex[2];
        let reflected = lerp(centroid, worst.0, -1.0);
        let fr = f(reflected);
        used += 1;
        if fr < simplex[0].1 {
            let expanded = lerp(centroid, worst.0, -2.0);
            let fe = f(expanded);
            used += 1;
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (reflected, fr) } else { worst };
            let contracted = lerp(centroid, target, 0.5);
            let fc = f(contracted);
            used += 1;
            if fc < ft {
                simplex[2] = (contracted, fc);
            } else {
                for i in 1..3 {
                    let p = lerp(simplex[0].0, simplex[i].0, 0.5);
                    simplex[i] = (p, f(p));
                    used += 1;
                }
            }
        }
    }
}
