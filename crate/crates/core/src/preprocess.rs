//! Powed RSS representation followed by unit-norm scaling.
//!
//! Both transforms are fitted on training data only; applying them to
//! another matrix reads nothing but the fitted [`PreprocessParams`].

use serde::{Deserialize, Serialize};

use crate::dataset::{RadioMap, NOT_DETECTED};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Divide each AP column by its training-set euclidean norm.
    #[default]
    PerFeature,
    /// Divide each fingerprint by its own euclidean norm.
    PerSample,
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "per_feature" => Ok(NormMode::PerFeature),
            "per_sample" => Ok(NormMode::PerSample),
            other => Err(Error::Config(format!(
                "unknown normalization mode '{other}' (per_feature | per_sample)"
            ))),
        }
    }
}

fn default_exponent() -> f64 {
    std::f64::consts::E
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    /// Weakest detected RSS in the training map, dBm (< 0).
    pub min_rss: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    pub mode: NormMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_norms: Option<Vec<f64>>,
}

impl PreprocessParams {
    /// Fits both stages on a training map.
    pub fn fit(train: &RadioMap, mode: NormMode) -> Result<Self> {
        let mut params = fit_powed(train)?;
        params.mode = mode;
        if mode == NormMode::PerFeature {
            let powed = apply_powed(&train.rss, &params);
            params.feature_norms = Some(fit_unit_norm(&powed)?);
        }
        Ok(params)
    }

    /// Applies both stages to a raw RSS matrix.
    pub fn transform(&self, rss: &DenseMatrix) -> Result<DenseMatrix> {
        apply_unit_norm(&apply_powed(rss, self), self)
    }
}

/// Finds the weakest detected RSS of the training map.
pub fn fit_powed(train: &RadioMap) -> Result<PreprocessParams> {
    let min_rss = train
        .rss
        .as_slice()
        .iter()
        .copied()
        .filter(|&v| v != NOT_DETECTED)
        .fold(f64::INFINITY, f64::min);
    if !min_rss.is_finite() {
        return Err(Error::NoSignal);
    }
    if min_rss >= 0.0 {
        return Err(Error::Config(format!(
            "weakest detected RSS must be negative, got {min_rss}"
        )));
    }
    Ok(PreprocessParams {
        min_rss,
        exponent: std::f64::consts::E,
        mode: NormMode::PerFeature,
        feature_norms: None,
    })
}

/// Powed value of a single reading; undetected maps to 0 and readings
/// weaker than the fitted minimum clip to 0.
#[inline]
pub fn powed(rss: f64, min_rss: f64, exponent: f64) -> f64 {
    if rss == NOT_DETECTED {
        return 0.0;
    }
    let base = ((rss - min_rss) / -min_rss).clamp(0.0, 1.0);
    base.powf(exponent)
}

pub fn apply_powed(rss: &DenseMatrix, params: &PreprocessParams) -> DenseMatrix {
    rss.map(|v| powed(v, params.min_rss, params.exponent))
}

/// Euclidean norm of every column.
pub fn fit_unit_norm(powed_train: &DenseMatrix) -> Result<Vec<f64>> {
    if powed_train.rows() == 0 {
        return Err(Error::Empty("training matrix for unit-norm fit".into()));
    }
    let mut sq = vec![0.0; powed_train.cols()];
    for row in powed_train.row_iter() {
        for (s, v) in sq.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

pub fn apply_unit_norm(powed: &DenseMatrix, params: &PreprocessParams) -> Result<DenseMatrix> {
    let mut out = powed.clone();
    match params.mode {
        NormMode::PerFeature => {
            let norms = params.feature_norms.as_ref().ok_or_else(|| {
                Error::Config("per-feature normalization without fitted norms".into())
            })?;
            if norms.len() != powed.cols() {
                return Err(Error::Shape(format!(
                    "{} feature norms for a matrix of width {}",
                    norms.len(),
                    powed.cols()
                )));
            }
            for r in 0..out.rows() {
                for (v, &n) in out.row_mut(r).iter_mut().zip(norms) {
                    if n > 0.0 {
                        *v /= n;
                    }
                }
            }
        }
        NormMode::PerSample => {
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    row.iter_mut().for_each(|v| *v /= n);
                }
            }
        }
    }
    Ok(out)
}
