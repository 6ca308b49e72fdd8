use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arfima::InnovationLaw;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Family, DEFAULT_BANDWIDTH_EXPONENT, MAX_POLY_ORDER};
use crate::pfsb::{InnovationMode, DEFAULT_MAX_ITER};
use crate::rng::Stream;

/// A Monte Carlo experiment: a grid of ARFIMA(1,d,0) cells, the estimators
/// and corrections to run on every replication, and the master seed.
///
/// Read from TOML:
///
/// ```toml
/// seed = 7
/// replications = 200
/// T = [500]
/// d = [0.0, 0.2]
/// phi = [0.6]
/// bootstrap_draws = 300
/// mode = "parametric"
/// law = "gaussian"
///
/// [[estimator]]
/// family = "lpr"
/// p = 1
/// bba = [1, 2]
/// ssr = true
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDesign {
    pub seed: u64,
    pub replications: usize,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    pub d: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default = "default_draws")]
    pub bootstrap_draws: usize,
    #[serde(default = "default_mode")]
    pub mode: InnovationMode,
    #[serde(default = "default_law")]
    pub law: InnovationLaw,
    #[serde(default = "default_exponent")]
    pub bandwidth_exponent: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Bootstrap HPD intervals for the uncorrected estimators.
    #[serde(default)]
    pub hpd: bool,
    /// Also fit the exact Gaussian MLE.
    #[serde(default)]
    pub mle: bool,
    #[serde(default = "default_mle_step")]
    pub mle_grid_step: f64,
    #[serde(default, rename = "estimator")]
    pub estimators: Vec<EstimatorEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorEntry {
    #[serde(alias = "LPR", alias = "SPLW")]
    pub family: Family,
    pub p: usize,
    /// Fixed iteration counts `K` for `BBA(K)` rows.
    #[serde(default)]
    pub bba: Vec<usize>,
    /// Add a row for the stochastic stopping rule.
    #[serde(default)]
    pub ssr: bool,
}

fn default_draws() -> usize {
    300
}

fn default_mode() -> InnovationMode {
    InnovationMode::Parametric
}

fn default_law() -> InnovationLaw {
    InnovationLaw::Gaussian
}

fn default_exponent() -> f64 {
    DEFAULT_BANDWIDTH_EXPONENT
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_mle_step() -> f64 {
    0.02
}

/// One `(T, d, φ)` combination and its position in the lexicographic
/// enumeration (T outermost, then d, then φ, each in design order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub t: usize,
    pub d: f64,
    pub phi: f64,
}

impl McDesign {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let design: McDesign = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        design.validate()?;
        Ok(design)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("design serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.t.is_empty() || self.d.is_empty() || self.phi.is_empty() {
            return bad("T, d and phi grids must be non-empty".into());
        }
        if let Some(t) = self.t.iter().find(|&&t| t < 20) {
            return bad(format!("sample size {t} is below 20"));
        }
        if let Some(d) = self.d.iter().find(|d| !(d.abs() < 0.5)) {
            return bad(format!("d = {d} is outside (-0.5, 0.5)"));
        }
        if let Some(p) = self.phi.iter().find(|p| !(p.abs() < 1.0)) {
            return bad(format!("phi = {p} is outside (-1, 1)"));
        }
        if self.estimators.is_empty() && !self.mle {
            return bad("no estimators requested".into());
        }
        if let Some(e) = self.estimators.iter().find(|e| e.p > MAX_POLY_ORDER) {
            return Err(Error::UnsupportedOrder(e.p));
        }
        if self.needs_bootstrap() && self.bootstrap_draws < 10 {
            return bad("bootstrap designs need at least 10 draws".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.bandwidth_exponent > 0.0 && self.bandwidth_exponent < 1.0) {
            return bad(format!("bandwidth exponent {} is outside (0, 1)", self.bandwidth_exponent));
        }
        if !(self.mle_grid_step > 0.0) {
            return bad("mle_grid_step must be positive".into());
        }
        for e in &self.estimators {
            if e.bba.contains(&0) {
                return bad("BBA(K) needs K >= 1".into());
            }
        }
        Ok(())
    }

    fn needs_bootstrap(&self) -> bool {
        self.hpd || self.estimators.iter().any(|e| e.ssr || !e.bba.is_empty())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.t.len() * self.d.len() * self.phi.len());
        for &t in &self.t {
            for &d in &self.d {
                for &phi in &self.phi {
                    cells.push(Cell { index: cells.len(), t, d, phi });
                }
            }
        }
        cells
    }

    pub fn spec(&self, entry: &EstimatorEntry) -> Result<EstimatorSpec> {
        EstimatorSpec::new(entry.family, entry.p)?.with_bandwidth_exponent(self.bandwidth_exponent)
    }
}

/// The stream for replication `r` of cell `cell`: a pure function of the
/// master seed and both indices. Each gets its own ChaCha stream id.
pub fn replication_stream(master: u64, cell: usize, r: usize) -> Stream {
    Stream::with_id(master, ((cell as u64) << 32) | r as u64)
}
