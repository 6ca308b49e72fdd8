use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use super::design::{replication_stream, Cell, McDesign};
use crate::arfima::{mle_fit, ArfimaParams, ArfimaSimulator, MleOptions};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::pfsb::{hpd_interval, IterationEngine, PfsbConfig, StopReason, StoppingRule};

/// Tail masses of the bootstrap HPD interval.
pub const HPD_ALPHA: (f64, f64) = (0.025, 0.025);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Correction {
    None,
    Bba(usize),
    Ssr,
}

impl Correction {
    pub fn label(&self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Bba(_) => "bba",
            Correction::Ssr => "ssr",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Correction::Bba(k) => *k,
            _ => 0,
        }
    }

    pub fn from_parts(label: &str, k: usize) -> Result<Self> {
        match label {
            "none" => Ok(Correction::None),
            "bba" => Ok(Correction::Bba(k)),
            "ssr" => Ok(Correction::Ssr),
            other => Err(Error::InvalidParameter(format!("unknown correction `{other}`"))),
        }
    }
}

/// Identifies one estimator row of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    /// `LPR`, `SPLW` or `MLE`.
    pub estimator: String,
    pub p: usize,
    pub correction: Correction,
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.estimator == "MLE" {
            return f.write_str("MLE");
        }
        write!(f, "{}({})", self.estimator, self.p)?;
        match self.correction {
            Correction::None => Ok(()),
            Correction::Bba(k) => write!(f, "-BBA({k})"),
            Correction::Ssr => f.write_str("-SSR"),
        }
    }
}

/// One replication's output for one row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Observation {
    /// `None` when the estimator or its correction failed.
    pub value: Option<f64>,
    /// The iteration ended on the deterministic guard.
    pub deterministic: bool,
    pub iterations: Option<usize>,
    pub hpd: Option<(f64, f64)>,
    pub asymptotic: Option<(f64, f64)>,
    pub error: Option<String>,
}

impl Observation {
    fn failed(e: &Error) -> Self {
        Self { error: Some(e.to_string()), ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statistic {
    Bias,
    Mse,
    Failures,
    HpdCoverage,
    HpdLength,
    AsyCoverage,
    AsyLength,
    DeterministicStops,
    BiasExclDeterministic,
    MseExclDeterministic,
    MeanIterations,
}

impl Statistic {
    pub const ALL: [Statistic; 11] = [
        Statistic::Bias,
        Statistic::Mse,
        Statistic::Failures,
        Statistic::HpdCoverage,
        Statistic::HpdLength,
        Statistic::AsyCoverage,
        Statistic::AsyLength,
        Statistic::DeterministicStops,
        Statistic::BiasExclDeterministic,
        Statistic::MseExclDeterministic,
        Statistic::MeanIterations,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Bias => "bias",
            Statistic::Mse => "mse",
            Statistic::Failures => "failures",
            Statistic::HpdCoverage => "hpd_coverage",
            Statistic::HpdLength => "hpd_length",
            Statistic::AsyCoverage => "asy_coverage",
            Statistic::AsyLength => "asy_length",
            Statistic::DeterministicStops => "deterministic_stops",
            Statistic::BiasExclDeterministic => "bias_excl_deterministic",
            Statistic::MseExclDeterministic => "mse_excl_deterministic",
            Statistic::MeanIterations => "mean_iterations",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .iter()
            .find(|st| st.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown statistic `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatValue {
    pub statistic: Statistic,
    pub value: f64,
    /// Replications entering the statistic.
    pub r_effective: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowResult {
    pub key: RowKey,
    pub stats: Vec<StatValue>,
}

impl RowResult {
    pub fn get(&self, statistic: Statistic) -> Option<f64> {
        self.stats.iter().find(|s| s.statistic == statistic).map(|s| s.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub rows: Vec<RowResult>,
    /// Summed task time of the cell's replications.
    pub elapsed: Duration,
}

impl CellResult {
    pub fn row(&self, key: &RowKey) -> Option<&RowResult> {
        self.rows.iter().find(|r| &r.key == key)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResults {
    pub seed: u64,
    pub replications: usize,
    pub cells: Vec<CellResult>,
    pub elapsed: Duration,
}

impl McResults {
    /// Mean of a statistic over the d values of the design, for each
    /// `(T, φ)`, as in tables that average coverage across memory levels.
    pub fn average_over_d(&self, key: &RowKey, statistic: Statistic) -> Vec<((usize, f64), f64)> {
        let mut out: Vec<((usize, f64), Vec<f64>)> = Vec::new();
        for c in &self.cells {
            let Some(v) = c.row(key).and_then(|r| r.get(statistic)) else { continue };
            let at = (c.cell.t, c.cell.phi);
            match out.iter_mut().find(|(k, _)| *k == at) {
                Some((_, vs)) => vs.push(v),
                None => out.push((at, vec![v])),
            }
        }
        out.into_iter().map(|(k, vs)| (k, vs.iter().sum::<f64>() / vs.len() as f64)).collect()
    }
}

/// Run every cell and replication on the current rayon pool.
pub fn run_design(design: &McDesign) -> Result<McResults> {
    design.validate()?;
    let start = Instant::now();
    let cells = design.cells();
    let simulators = cells
        .iter()
        .map(|c| {
            let params = ArfimaParams::new(c.d, c.phi, 1.0, design.law)?;
            ArfimaSimulator::new(params, c.t)
        })
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..design.replications).map(move |r| (c, r)))
        .collect();
    let outputs: Vec<Result<(Vec<(RowKey, Observation)>, Duration)>> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let t0 = Instant::now();
            let rows = replicate(design, &cells[c], &simulators[c], r)?;
            Ok((rows, t0.elapsed()))
        })
        .collect();

    let mut per_cell: Vec<Vec<Vec<(RowKey, Observation)>>> = vec![Vec::new(); cells.len()];
    let mut elapsed = vec![Duration::ZERO; cells.len()];
    for (&(c, _), out) in tasks.iter().zip(outputs) {
        let (rows, dt) = out?;
        per_cell[c].push(rows);
        elapsed[c] += dt;
    }
    let results = cells
        .iter()
        .zip(per_cell)
        .zip(elapsed)
        .map(|((cell, reps), elapsed)| CellResult { cell: *cell, rows: aggregate(cell.d, &reps), elapsed })
        .collect();
    Ok(McResults { seed: design.seed, replications: design.replications, cells: results, elapsed: start.elapsed() })
}

/// [`run_design`] on a dedicated pool of `threads` workers.
pub fn run_design_with_threads(design: &McDesign, threads: usize) -> Result<McResults> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| run_design(design))
}

/// All rows for replication `r` of `cell`: one simulated series shared by
/// every estimator. The series comes from `split(0)` of the replication
/// stream and estimator `i`'s bootstrap from `split(1 + i)`.
pub fn run_replication(design: &McDesign, cell: &Cell, r: usize) -> Result<Vec<(RowKey, Observation)>> {
    let params = ArfimaParams::new(cell.d, cell.phi, 1.0, design.law)?;
    replicate(design, cell, &ArfimaSimulator::new(params, cell.t)?, r)
}

fn replicate(design: &McDesign, cell: &Cell, sim: &ArfimaSimulator, r: usize) -> Result<Vec<(RowKey, Observation)>> {
    let stream = replication_stream(design.seed, cell.index, r);
    let series = sim.simulate(&stream.split(0))?;
    let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.975);
    let mut rows = Vec::new();

    for (i, entry) in design.estimators.iter().enumerate() {
        let spec = design.spec(entry)?;
        let name = entry.family.to_string();
        let key = |correction| RowKey { estimator: name.clone(), p: entry.p, correction };
        let mut corrected: Vec<Correction> = entry.bba.iter().map(|&k| Correction::Bba(k)).collect();
        if entry.ssr {
            corrected.push(Correction::Ssr);
        }

        let estimate = match spec.estimate(series.values()) {
            Ok(e) => e,
            Err(e) => {
                rows.push((key(Correction::None), Observation::failed(&e)));
                rows.extend(corrected.iter().map(|&c| (key(c), Observation::failed(&e))));
                continue;
            }
        };
        let mut raw = Observation {
            value: Some(estimate.d_hat),
            asymptotic: Some((estimate.d_hat - z * estimate.asymptotic_sd, estimate.d_hat + z * estimate.asymptotic_sd)),
            ..Observation::default()
        };
        if !design.hpd && corrected.is_empty() {
            rows.push((key(Correction::None), raw));
            continue;
        }

        let config = PfsbConfig::new(design.mode, design.bootstrap_draws, stream.split(1 + i as u64))?;
        let mut engine = IterationEngine::with_estimate(&series, &spec as &EstimatorSpec, config, estimate.clone());
        if design.hpd {
            let first = if engine.records().is_empty() { engine.advance().map(|_| ()) } else { Ok(()) };
            if first.is_ok() {
                let draws = &engine.records()[0].outcome.draws;
                raw.hpd = hpd_interval(draws, estimate.d_hat, HPD_ALPHA.0, HPD_ALPHA.1).ok();
            }
        }
        rows.push((key(Correction::None), raw));
        for c in corrected {
            let rule = match c {
                Correction::Bba(k) => StoppingRule::Fixed(k),
                _ => StoppingRule::Stochastic { max_iter: design.max_iter },
            };
            let obs = match engine.run(rule) {
                Ok(dec) => Observation {
                    value: Some(dec.value),
                    deterministic: dec.reason == StopReason::Deterministic,
                    iterations: Some(dec.iterations),
                    ..Observation::default()
                },
                Err(e) => Observation::failed(&e),
            };
            rows.push((key(c), obs));
        }
    }

    if design.mle {
        let options = MleOptions { grid_step: design.mle_grid_step, ..MleOptions::default() };
        let obs = match mle_fit(&series, &options) {
            Ok(fit) => Observation { value: Some(fit.d), ..Observation::default() },
            Err(e) => Observation::failed(&e),
        };
        rows.push((RowKey { estimator: "MLE".into(), p: 0, correction: Correction::None }, obs));
    }
    Ok(rows)
}

fn aggregate(d_true: f64, reps: &[Vec<(RowKey, Observation)>]) -> Vec<RowResult> {
    let Some(first) = reps.first() else { return Vec::new() };
    first
        .iter()
        .enumerate()
        .map(|(j, (key, _))| {
            let obs: Vec<&Observation> = reps.iter().map(|rows| &rows[j].1).collect();
            RowResult { key: key.clone(), stats: summarize(key, d_true, &obs) }
        })
        .collect()
}

/// Aggregate one row's observations. Failed replications are excluded and
/// counted; statistics over empty sets are NaN with `r_effective` 0.
pub fn summarize(key: &RowKey, d_true: f64, obs: &[&Observation]) -> Vec<StatValue> {
    let ok: Vec<&Observation> = obs.iter().copied().filter(|o| o.value.is_some()).collect();
    let errors: Vec<f64> = ok.iter().map(|o| o.value.unwrap() - d_true).collect();
    let stat = |statistic, value, r_effective| StatValue { statistic, value, r_effective };
    let mut out = vec![
        stat(Statistic::Bias, mean(&errors), errors.len()),
        stat(Statistic::Mse, mean(&errors.iter().map(|e| e * e).collect::<Vec<_>>()), errors.len()),
        stat(Statistic::Failures, (obs.len() - ok.len()) as f64, ok.len()),
    ];
    let covers = |iv: &(f64, f64)| if iv.0 <= d_true && d_true <= iv.1 { 1.0 } else { 0.0 };
    match key.correction {
        Correction::None => {
            let hpd: Vec<(f64, f64)> = ok.iter().filter_map(|o| o.hpd).collect();
            if ok.iter().any(|o| o.hpd.is_some()) || obs.iter().any(|o| o.hpd.is_some()) {
                out.push(stat(Statistic::HpdCoverage, mean(&hpd.iter().map(covers).collect::<Vec<_>>()), hpd.len()));
                out.push(stat(Statistic::HpdLength, mean(&hpd.iter().map(|iv| iv.1 - iv.0).collect::<Vec<_>>()), hpd.len()));
            }
            let asy: Vec<(f64, f64)> = ok.iter().filter_map(|o| o.asymptotic).collect();
            if !asy.is_empty() {
                out.push(stat(Statistic::AsyCoverage, mean(&asy.iter().map(covers).collect::<Vec<_>>()), asy.len()));
                out.push(stat(Statistic::AsyLength, mean(&asy.iter().map(|iv| iv.1 - iv.0).collect::<Vec<_>>()), asy.len()));
            }
        }
        Correction::Bba(_) | Correction::Ssr => {
            let det = ok.iter().filter(|o| o.deterministic).count();
            out.push(stat(Statistic::DeterministicStops, det as f64, ok.len()));
            let kept: Vec<f64> = ok.iter().filter(|o| !o.deterministic).map(|o| o.value.unwrap() - d_true).collect();
            out.push(stat(Statistic::BiasExclDeterministic, mean(&kept), kept.len()));
            out.push(stat(
                Statistic::MseExclDeterministic,
                mean(&kept.iter().map(|e| e * e).collect::<Vec<_>>()),
                kept.len(),
            ));
            if key.correction == Correction::Ssr {
                let its: Vec<f64> = ok.iter().filter_map(|o| o.iterations).map(|k| k as f64).collect();
                out.push(stat(Statistic::MeanIterations, mean(&its), its.len()));
            }
        }
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(c: Correction) -> RowKey {
        RowKey { estimator: "LPR".into(), p: 0, correction: c }
    }

    #[test]
    fn exact_estimator_gives_zero_bias_and_full_coverage() {
        let o = Observation {
            value: Some(0.3),
            hpd: Some((0.25, 0.35)),
            asymptotic: Some((0.2, 0.4)),
            ..Observation::default()
        };
        let obs = vec![&o; 5];
        let s = summarize(&key(Correction::None), 0.3, &obs);
        let get = |st| s.iter().find(|v| v.statistic == st).unwrap().value;
        assert_eq!(get(Statistic::Bias), 0.0);
        assert_eq!(get(Statistic::Mse), 0.0);
        assert_eq!(get(Statistic::HpdCoverage), 1.0);
        assert!((get(Statistic::HpdLength) - 0.1).abs() < 1e-15);
        assert_eq!(get(Statistic::AsyCoverage), 1.0);
        assert_eq!(get(Statistic::Failures), 0.0);
    }

    #[test]
    fn failures_are_excluded_and_counted() {
        let good = Observation { value: Some(0.5), ..Observation::default() };
        let det = Observation { value: Some(0.1), deterministic: true, iterations: Some(1), ..Observation::default() };
        let bad = Observation::failed(&Error::Numerical("x".into()));
        let obs = vec![&good, &det, &bad];
        let s = summarize(&key(Correction::Bba(1)), 0.0, &obs);
        let find = |st| *s.iter().find(|v| v.statistic == st).unwrap();
        assert_eq!(find(Statistic::Failures).value, 1.0);
        assert_eq!(find(Statistic::Bias).r_effective, 2);
        assert!((find(Statistic::Bias).value - 0.3).abs() < 1e-15);
        assert_eq!(find(Statistic::DeterministicStops).value, 1.0);
        assert_eq!(find(Statistic::BiasExclDeterministic).value, 0.5);
        assert_eq!(find(Statistic::BiasExclDeterministic).r_effective, 1);
        // MSE is never below the squared bias.
        assert!(find(Statistic::Mse).value >= find(Statistic::Bias).value.powi(2));
    }

    #[test]
    fn all_failed_gives_nan() {
        let bad = Observation::failed(&Error::Numerical("x".into()));
        let s = summarize(&key(Correction::Ssr), 0.0, &[&bad, &bad]);
        assert!(s[0].value.is_nan());
        assert_eq!(s[0].r_effective, 0);
        assert_eq!(s[2].value, 2.0);
    }

    #[test]
    fn row_labels() {
        assert_eq!(key(Correction::Bba(2)).to_string(), "LPR(0)-BBA(2)");
        assert_eq!(key(Correction::Ssr).to_string(), "LPR(0)-SSR");
        assert_eq!("hpd_length".parse::<Statistic>().unwrap(), Statistic::HpdLength);
    }
}
