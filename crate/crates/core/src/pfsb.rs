//! Pre-filtered sieve bootstrap: draw generation, bootstrap bias
//! correction, the iterated correction with stochastic stopping rules, and
//! highest-posterior-density style intervals from the draws.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::arsieve::{ar_residuals, fit_aic, sieve_order_cap, simulate_ar_path, ArFit, ResidualSet};
use crate::error::{Error, Result};
use crate::estimators::{EstimateResult, MemoryEstimator};
use crate::fracdiff::{apply_frac_filter, frac_diff_coeffs, filter_with};
use crate::rng::Stream;
use crate::series::{mean, TimeSeries};

/// Pre-filter values outside `[DETERMINISTIC_LOWER, DETERMINISTIC_UPPER)`
/// end the iteration.
pub const DETERMINISTIC_LOWER: f64 = -1.0;
pub const DETERMINISTIC_UPPER: f64 = 1.5;

/// Default iteration cap for the stochastic stopping rule.
pub const DEFAULT_MAX_ITER: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationMode {
    /// Gaussian innovations scaled by the residual standard deviation.
    Parametric,
    /// Innovations resampled with replacement from the standardized residuals.
    Nonparametric,
}

impl fmt::Display for InnovationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnovationMode::Parametric => "parametric",
            InnovationMode::Nonparametric => "nonparametric",
        })
    }
}

impl FromStr for InnovationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "parametric" | "parametric-gaussian" => Ok(InnovationMode::Parametric),
            "nonparametric" | "nonparametric-resample" => Ok(InnovationMode::Nonparametric),
            other => Err(Error::InvalidParameter(format!("unknown bootstrap mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfsbConfig {
    pub mode: InnovationMode,
    /// Number of bootstrap draws `B`.
    pub draws: usize,
    pub stream: Stream,
    /// Overrides the sieve ceiling `H_T` when set.
    pub max_order: Option<usize>,
}

impl PfsbConfig {
    pub fn new(mode: InnovationMode, draws: usize, stream: Stream) -> Result<Self> {
        if draws < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 bootstrap draws, got {draws}")));
        }
        Ok(Self { mode, draws, stream, max_order: None })
    }

    pub fn with_max_order(mut self, h: usize) -> Self {
        self.max_order = Some(h);
        self
    }

    pub fn with_stream(mut self, stream: Stream) -> Self {
        self.stream = stream;
        self
    }
}

/// Everything the draws share: the pre-filtered series, its AR fit and
/// residuals, and the inverse-filter coefficients. Depends on `(y, d_f)`
/// only, so it is built once per pre-filter value.
#[derive(Clone, Debug)]
pub struct SieveModel {
    d_f: f64,
    filtered: Vec<f64>,
    fit: ArFit,
    residuals: ResidualSet,
    inverse: Vec<f64>,
}

impl SieveModel {
    /// Pre-filter the centred series with `d_f` and fit an AR sieve by Burg
    /// with AIC order choice up to `H_T` (or `max_order`).
    pub fn prepare(y: &TimeSeries, d_f: f64, max_order: Option<usize>) -> Result<Self> {
        let filtered = prefilter(y, d_f)?;
        let cap = max_order.unwrap_or_else(|| sieve_order_cap(y.len()));
        let fit = fit_aic(&filtered, cap)?;
        Self::assemble(d_f, filtered, fit)
    }

    /// Use a given AR fit instead of the AIC choice.
    pub fn with_fit(y: &TimeSeries, d_f: f64, fit: ArFit) -> Result<Self> {
        let filtered = prefilter(y, d_f)?;
        Self::assemble(d_f, filtered, fit)
    }

    fn assemble(d_f: f64, filtered: Vec<f64>, fit: ArFit) -> Result<Self> {
        let residuals = ar_residuals(&filtered, &fit)?;
        let inverse = frac_diff_coeffs(-d_f, filtered.len())?.into_vec();
        Ok(Self { d_f, filtered, fit, residuals, inverse })
    }

    pub fn d_f(&self) -> f64 {
        self.d_f
    }

    pub fn filtered(&self) -> &[f64] {
        &self.filtered
    }

    pub fn fit(&self) -> &ArFit {
        &self.fit
    }

    pub fn residuals(&self) -> &ResidualSet {
        &self.residuals
    }

    /// One bootstrap replicate of the pre-filtered series, before the
    /// inverse filter.
    pub fn draw_filtered(&self, mode: InnovationMode, stream: &Stream) -> Result<Vec<f64>> {
        let t = self.filtered.len();
        let h = self.fit.order();
        let scale = self.residuals.scale();
        let mut rng = stream.rng();
        let innovations: Vec<f64> = match mode {
            InnovationMode::Parametric => (0..t).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect(),
            InnovationMode::Nonparametric => {
                let pool = self.residuals.standardized();
                (0..t).map(|_| scale * pool[rng.random_range(0..t)]).collect()
            }
        };
        // Start block ends at τ ~ U{h, …, T} (1-based): w^f(τ-h+1), …, w^f(τ).
        let init = if h == 0 {
            &self.filtered[..0]
        } else {
            let tau = rng.random_range(h..=t);
            &self.filtered[tau - h..tau]
        };
        simulate_ar_path(&self.fit, &innovations, init)
    }

    /// One bootstrap replicate `y*` of the original series.
    pub fn draw(&self, mode: InnovationMode, stream: &Stream) -> Result<Vec<f64>> {
        let w = self.draw_filtered(mode, stream)?;
        Ok(filter_with(&self.inverse, &w))
    }
}

/// `w^f` with its sample mean removed. A truncated filter with `d_f < 0`
/// partially integrates the series, so `w^f` need not average to zero even
/// when `y` does, and a zero-mean AR fit would read the level as memory.
fn prefilter(y: &TimeSeries, d_f: f64) -> Result<Vec<f64>> {
    let mut w = apply_frac_filter(&y.centred(), d_f)?;
    let m = mean(&w);
    w.iter_mut().for_each(|v| *v -= m);
    Ok(w)
}

/// One bootstrap series from a prepared sieve model.
pub fn pfsb_draw(model: &SieveModel, config: &PfsbConfig, index: u64) -> Result<Vec<f64>> {
    model.draw(config.mode, &config.stream.split(index))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapOutcome {
    /// Re-estimates `d̂*_b`, in draw order.
    pub draws: Vec<f64>,
    /// Pre-filter value.
    pub d_f: f64,
    /// The estimate being corrected.
    pub d_hat: f64,
    /// `mean(draws) - d_f`.
    pub bias_hat: f64,
    /// `d_hat - bias_hat`.
    pub d_tilde: f64,
    /// Draws whose first attempt failed and were regenerated.
    pub resampled: usize,
    /// Sieve order used.
    pub order: usize,
}

/// Bootstrap estimate of the bias of `estimator` at `d_f` and the corrected
/// value `d_hat - bias`.
///
/// Draw `b` uses `config.stream.split(b)`; a draw whose re-estimation fails
/// is regenerated once from `split(b).split(1)`.
pub fn bias_correct<E: MemoryEstimator + ?Sized>(
    y: &TimeSeries,
    estimator: &E,
    d_hat: f64,
    d_f: f64,
    config: &PfsbConfig,
) -> Result<BootstrapOutcome> {
    if !d_f.is_finite() || !d_hat.is_finite() {
        return Err(Error::InvalidParameter("estimate and pre-filter value must be finite".into()));
    }
    let model = SieveModel::prepare(y, d_f, config.max_order)?;
    let results: Vec<Result<(f64, bool)>> = (0..config.draws)
        .into_par_iter()
        .map(|b| {
            let s = config.stream.split(b as u64);
            match model.draw(config.mode, &s).and_then(|ys| estimator.estimate(&ys)) {
                Ok(r) => Ok((r.d_hat, false)),
                Err(first) => {
                    let retry = s.split(1);
                    model
                        .draw(config.mode, &retry)
                        .and_then(|ys| estimator.estimate(&ys))
                        .map(|r| (r.d_hat, true))
                        .map_err(|second| Error::BootstrapAbort {
                            index: b,
                            reason: format!("{first}; then {second}"),
                        })
                }
            }
        })
        .collect();
    let mut draws = Vec::with_capacity(config.draws);
    let mut resampled = 0;
    for r in results {
        let (v, retried) = r?;
        draws.push(v);
        resampled += retried as usize;
    }
    let bias_hat = mean(&draws) - d_f;
    Ok(BootstrapOutcome {
        draws,
        d_f,
        d_hat,
        bias_hat,
        d_tilde: d_hat - bias_hat,
        resampled,
        order: model.fit.order(),
    })
}

/// Continuation probability `p_k`. Estimators with no even-power terms use
/// `0.95, 0.9, 0.1·2^{1-k}`; the others `0.9, 0.1·2^{-k}`.
pub fn p_schedule(k: usize, correction_terms: usize) -> f64 {
    if correction_terms == 0 {
        match k {
            0 => 0.95,
            1 => 0.9,
            _ => 0.1 * 2f64.powi(1 - k as i32),
        }
    } else {
        match k {
            0 => 0.9,
            _ => 0.1 * 2f64.powi(-(k as i32)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub p: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Approximate variance of `d̃^(k)`.
    pub variance: f64,
}

/// Tolerances `τ1^(k)`, `τ2^(k)` for bandwidth `n`, `b` draws and asymptotic
/// scale `upsilon = ω ψ_P`. Pass `f64::INFINITY` for `b` to get the limit.
pub fn stopping_thresholds(k: usize, n: usize, b: f64, upsilon: f64, correction_terms: usize) -> Thresholds {
    let base = upsilon * upsilon / n as f64;
    let boot = base / b;
    let mut variance = base;
    for _ in 0..k {
        variance = 2.0 * variance + boot;
    }
    let p = p_schedule(k, correction_terms);
    let z = standard_normal().inverse_cdf(1.0 - p / 2.0);
    let tau1 = z * (variance + boot).sqrt();
    // At k = 0 the second criterion reuses its first-iteration variance.
    let power = 2f64.powi(k.max(1) as i32 - 1);
    let tau2 = z * (base * (1.0 + power * (1.0 + 1.0 / b))).sqrt();
    Thresholds { p, tau1, tau2, variance }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// `|d̃^(k+1) - d̃^(k)|` fell to `τ1` or below.
    Rule1,
    /// `|d̃^(0) - d̃^(k) - b̃^(k)|` fell to `τ2` or below.
    Rule2,
    /// The next pre-filter value left `[-1, 1.5)`.
    Deterministic,
    /// Hit the iteration cap of the stochastic rule.
    MaxIter,
    /// Completed a fixed number of iterations.
    Fixed,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Rule1 => "rule1",
            StopReason::Rule2 => "rule2",
            StopReason::Deterministic => "deterministic",
            StopReason::MaxIter => "max-iter",
            StopReason::Fixed => "fixed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoppingRule {
    /// Exactly `K` corrections (`BBA(K)`), unless the deterministic guard
    /// stops earlier.
    Fixed(usize),
    /// The two stochastic criteria, capped at `max_iter` corrections.
    Stochastic { max_iter: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `d̃^(k)`, the pre-filter value at this iteration.
    pub d_tilde: f64,
    /// `b̃^(k)`.
    pub bias: f64,
    /// `d̃^(k+1) = d̃^(k) - b̃^(k)`.
    pub next: f64,
    pub thresholds: Thresholds,
    /// `|d̃^(k+1) - d̃^(k)|`.
    pub criterion1: f64,
    /// `|d̃^(0) - d̃^(k) - b̃^(k)|`.
    pub criterion2: f64,
    pub outcome: BootstrapOutcome,
}

impl IterationRecord {
    /// Whether `next` lies outside the deterministic window.
    pub fn out_of_range(&self) -> bool {
        !(self.next >= DETERMINISTIC_LOWER && self.next < DETERMINISTIC_UPPER)
    }

    /// `None` to continue, or the stochastic rule that fired.
    pub fn stochastic_stop(&self) -> Option<StopReason> {
        if !(self.criterion1 > self.thresholds.tau1) {
            Some(StopReason::Rule1)
        } else if !(self.criterion2 > self.thresholds.tau2) {
            Some(StopReason::Rule2)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub estimate: EstimateResult,
    pub records: Vec<IterationRecord>,
    pub reason: StopReason,
    /// `d̃_T`.
    pub final_value: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Runs successive bias corrections `d̃^(k) → d̃^(k+1)` on one series and
/// answers stopping questions from the shared sequence, so fixed-count and
/// stochastic rules applied to the same series see the same draws.
/// Iteration `k` draws from `config.stream.split(k)`.
pub struct IterationEngine<'a, E: MemoryEstimator + ?Sized> {
    series: &'a TimeSeries,
    estimator: &'a E,
    config: PfsbConfig,
    estimate: EstimateResult,
    records: Vec<IterationRecord>,
}

impl<'a, E: MemoryEstimator + ?Sized> IterationEngine<'a, E> {
    pub fn new(series: &'a TimeSeries, estimator: &'a E, config: PfsbConfig) -> Result<Self> {
        let estimate = estimator.estimate(series.values())?;
        Ok(Self::with_estimate(series, estimator, config, estimate))
    }

    /// Start from an estimate already computed on `series`.
    pub fn with_estimate(series: &'a TimeSeries, estimator: &'a E, config: PfsbConfig, estimate: EstimateResult) -> Self {
        Self { series, estimator, config, estimate, records: Vec::new() }
    }

    pub fn estimate(&self) -> &EstimateResult {
        &self.estimate
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    /// Compute the next record. Returns `false` without doing anything once
    /// the deterministic guard has fired.
    pub fn advance(&mut self) -> Result<bool> {
        if self.records.last().is_some_and(|r| r.out_of_range()) {
            return Ok(false);
        }
        let k = self.records.len();
        let d0 = self.estimate.d_hat;
        let dk = self.records.last().map_or(d0, |r| r.next);
        let cfg = self.config.with_stream(self.config.stream.split(k as u64));
        let outcome = bias_correct(self.series, self.estimator, dk, dk, &cfg)?;
        let bias = outcome.bias_hat;
        let next = dk - bias;
        let upsilon = self.estimate.asymptotic_sd * (self.estimate.n as f64).sqrt();
        let thresholds = stopping_thresholds(
            k,
            self.estimate.n,
            self.config.draws as f64,
            upsilon,
            self.estimator.correction_terms(),
        );
        self.records.push(IterationRecord {
            k,
            d_tilde: dk,
            bias,
            next,
            thresholds,
            criterion1: (next - dk).abs(),
            criterion2: (d0 - dk - bias).abs(),
            outcome,
        });
        Ok(true)
    }

    /// The outcome under `rule`, if the records computed so far decide it.
    pub fn decision(&self, rule: StoppingRule) -> Option<Decision> {
        let done = |value, reason, iterations| Some(Decision { value, reason, iterations });
        match rule {
            StoppingRule::Fixed(k_max) => {
                for r in self.records.iter().take(k_max) {
                    if r.out_of_range() {
                        return done(r.d_tilde, StopReason::Deterministic, r.k + 1);
                    }
                }
                match k_max {
                    0 => done(self.estimate.d_hat, StopReason::Fixed, 0),
                    k if self.records.len() >= k => done(self.records[k - 1].next, StopReason::Fixed, k),
                    _ => None,
                }
            }
            StoppingRule::Stochastic { max_iter } => {
                for r in &self.records {
                    if r.out_of_range() {
                        return done(r.d_tilde, StopReason::Deterministic, r.k + 1);
                    }
                    if let Some(reason) = r.stochastic_stop() {
                        return done(r.d_tilde, reason, r.k + 1);
                    }
                    if r.k + 1 >= max_iter {
                        return done(r.next, StopReason::MaxIter, r.k + 1);
                    }
                }
                None
            }
        }
    }

    /// Advance until `rule` is decided.
    pub fn run(&mut self, rule: StoppingRule) -> Result<Decision> {
        if let StoppingRule::Stochastic { max_iter: 0 } = rule {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        loop {
            if let Some(d) = self.decision(rule) {
                return Ok(d);
            }
            if !self.advance()? {
                // An out-of-range record decides every rule, so this is a bug.
                return Err(Error::Numerical("iteration halted without a decision".into()));
            }
        }
    }

    /// Consume the engine into the trace for `rule`, dropping records
    /// beyond the stopping point.
    pub fn into_trace(self, rule: StoppingRule) -> Option<IterationTrace> {
        let d = self.decision(rule)?;
        let mut records = self.records;
        records.truncate(d.iterations);
        Some(IterationTrace { estimate: self.estimate, records, reason: d.reason, final_value: d.value })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub value: f64,
    pub reason: StopReason,
    /// Bias corrections computed up to the stop.
    pub iterations: usize,
}

/// Iterated bootstrap bias correction of `estimator` on `y`.
pub fn iterate_bias_correct<E: MemoryEstimator + ?Sized>(
    y: &TimeSeries,
    estimator: &E,
    config: &PfsbConfig,
    rule: StoppingRule,
) -> Result<IterationTrace> {
    let mut engine = IterationEngine::new(y, estimator, *config)?;
    engine.run(rule)?;
    Ok(engine.into_trace(rule).expect("run decided the rule"))
}

/// Shortest interval holding `ceil((1 - α_L - α_U) B)` of the mean-corrected
/// draws, reflected through `d_hat`: `(d̂ - q_hi, d̂ - q_lo)`.
pub fn hpd_interval(draws: &[f64], d_hat: f64, alpha_l: f64, alpha_u: f64) -> Result<(f64, f64)> {
    let b = draws.len();
    if b < 10 {
        return Err(Error::InvalidParameter(format!("need at least 10 draws, got {b}")));
    }
    let m = hpd_count(b, alpha_l, alpha_u)?;
    let centre = mean(draws);
    let mut c: Vec<f64> = draws.iter().map(|v| v - centre).collect();
    c.sort_by(f64::total_cmp);
    let mut best = 0;
    for i in 1..=b - m {
        if c[i + m - 1] - c[i] < c[best + m - 1] - c[best] {
            best = i;
        }
    }
    Ok((d_hat - c[best + m - 1], d_hat - c[best]))
}

/// `ceil((1 - α_L - α_U) B)`, guarding against rounding just above an integer.
pub fn hpd_count(b: usize, alpha_l: f64, alpha_u: f64) -> Result<usize> {
    if !(alpha_l >= 0.0 && alpha_u >= 0.0 && alpha_l + alpha_u < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail probabilities must be nonnegative and sum below 1, got {alpha_l} and {alpha_u}"
        )));
    }
    let raw = (1.0 - alpha_l - alpha_u) * b as f64;
    let m = (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize;
    if m > b {
        return Err(Error::InvalidParameter(format!("interval needs {m} of {b} draws")));
    }
    Ok(m)
}
