use crate::error::{ensure_finite, Result};

/// Ordered real-valued observations, optionally with a known process mean.
///
/// Estimators are invariant to the mean, so it only matters for the
/// bootstrap, which filters the centred series. When no mean is known the
/// sample mean is used.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    known_mean: Option<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite(&values, "series")?;
        Ok(Self { values, known_mean: None })
    }

    pub fn with_known_mean(values: Vec<f64>, mean: f64) -> Result<Self> {
        ensure_finite(&values, "series")?;
        ensure_finite(&[mean], "known mean")?;
        Ok(Self { values, known_mean: Some(mean) })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn known_mean(&self) -> Option<f64> {
        self.known_mean
    }

    /// The mean used for centring: the known mean if set, else the sample mean.
    pub fn centre(&self) -> f64 {
        self.known_mean.unwrap_or_else(|| mean(&self.values))
    }

    /// Values with [`centre`](Self::centre) subtracted.
    pub fn centred(&self) -> Vec<f64> {
        let c = self.centre();
        if c == 0.0 {
            return self.values.clone();
        }
        self.values.iter().map(|v| v - c).collect()
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centring_prefers_known_mean() {
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.centred(), vec![-1.0, 0.0, 1.0]);
        let k = TimeSeries::with_known_mean(vec![1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(k.centred(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_nan() {
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
    }
}
