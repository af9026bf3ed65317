//! Specialist log-log quadratic regressors mapping an ATR score to DMOS:
//!
//! `dmos = exp(c + b1 * u + b2 * u^2)` with `u = ln(atr)`.
//!
//! Coefficients are fitted by least squares on `ln(dmos)`; quality figures
//! are reported in linear DMOS space.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::atr::AtrScore;
use crate::error::{Error, Result};
use crate::stats::{regression_metrics, MetricReport, PairedSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Blur,
    Noise,
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Artifact::Blur => "blur",
            Artifact::Noise => "noise",
        })
    }
}

impl FromStr for Artifact {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blur" | "gblur" => Ok(Artifact::Blur),
            "noise" | "wn" => Ok(Artifact::Noise),
            other => Err(Error::invalid(format!("unknown artifact type `{other}`"))),
        }
    }
}

/// Which ATR aggregation a model consumes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScale {
    /// Fraction of active pixels, in `(0, 1]`.
    #[default]
    Fraction,
    /// Number of active pixels.
    Count,
}

impl ScoreScale {
    /// The regression input for `score`, clamped to one pixel when empty.
    pub fn input(self, score: &AtrScore) -> f64 {
        match self {
            ScoreScale::Fraction => score.clamped_value(),
            ScoreScale::Count => score.clamped_count(),
        }
    }
}

impl FromStr for ScoreScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fraction" => Ok(ScoreScale::Fraction),
            "count" => Ok(ScoreScale::Count),
            other => Err(Error::invalid(format!("unknown score scale `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub artifact: Artifact,
    pub c: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default)]
    pub scale: ScoreScale,
    #[serde(default)]
    pub metadata: ModelMetadata,
}

impl RegressionModel {
    pub fn new(artifact: Artifact, c: f64, b1: f64, b2: f64) -> Result<Self> {
        let model = Self {
            artifact,
            c,
            b1,
            b2,
            scale: ScoreScale::Fraction,
            metadata: ModelMetadata::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_scale(mut self, scale: ScoreScale) -> Self {
        self.scale = scale;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.b1.is_finite() && self.b2.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coefficients ({}, {}, {})",
                self.c, self.b1, self.b2
            )));
        }
        Ok(())
    }

    /// Published specialist for Gaussian blur. Its coefficients were fitted
    /// against active-pixel counts, so it is tagged [`ScoreScale::Count`].
    pub fn bundled_blur() -> Self {
        Self {
            artifact: Artifact::Blur,
            c: 4.7232,
            b1: 0.0027,
            b2: -0.0114,
            scale: ScoreScale::Count,
            metadata: ModelMetadata {
                source: Some("LIVE Release 2 gblur subset".into()),
                ..Default::default()
            },
        }
    }

    /// Published specialist for white noise, tagged [`ScoreScale::Count`].
    pub fn bundled_noise() -> Self {
        Self {
            artifact: Artifact::Noise,
            c: 0.0526,
            b1: 1.1162,
            b2: -0.0717,
            scale: ScoreScale::Count,
            metadata: ModelMetadata {
                source: Some("LIVE Release 2 wn subset".into()),
                ..Default::default()
            },
        }
    }

    pub fn bundled(artifact: Artifact) -> Self {
        match artifact {
            Artifact::Blur => Self::bundled_blur(),
            Artifact::Noise => Self::bundled_noise(),
        }
    }

    pub fn predict(&self, atr: f64) -> Result<f64> {
        predict_dmos(self, atr)
    }

    /// Predicts from a score, choosing fraction or count per the model's scale.
    pub fn predict_score(&self, score: &AtrScore) -> Result<f64> {
        predict_dmos(self, self.scale.input(score))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let model: Self =
            toml::from_str(text).map_err(|e| Error::invalid(format!("bad model document: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

pub fn predict_dmos(model: &RegressionModel, atr: f64) -> Result<f64> {
    if !(atr > 0.0) || !atr.is_finite() {
        return Err(Error::Domain(format!("ATR must be positive and finite, got {atr}")));
    }
    let u = atr.ln();
    Ok((model.c + model.b1 * u + model.b2 * u * u).exp())
}

/// Result of a fit, with the bookkeeping needed to audit it.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub model: RegressionModel,
    /// Indices of the input points that entered the fit.
    pub used: Vec<usize>,
    /// Indices dropped because their DMOS was not positive.
    pub excluded: Vec<usize>,
    /// R² of the polynomial against `ln(dmos)` on the used points.
    pub log_r_squared: f64,
    /// Ratio of largest to smallest pivot of the standardized normal matrix.
    pub condition: f64,
}

const PIVOT_TOLERANCE: f64 = 1e-10;

/// Least-squares fit of `ln(dmos)` on `[1, ln(atr), ln(atr)^2]`.
///
/// Records with `dmos <= 0` are skipped (see [`Fit::excluded`]). `ln(atr)` is
/// standardized before solving and the coefficients are mapped back.
pub fn fit_loglog_poly2(atr: &[f64], dmos: &[f64], artifact: Artifact) -> Result<Fit> {
    if atr.len() != dmos.len() {
        return Err(Error::invalid(format!(
            "atr and dmos differ in length: {} vs {}",
            atr.len(),
            dmos.len()
        )));
    }
    if let Some(i) = atr.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::Domain(format!(
            "ATR at index {i} is {}; clamp before fitting",
            atr[i]
        )));
    }
    if dmos.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite DMOS value"));
    }
    let (used, excluded): (Vec<usize>, Vec<usize>) = (0..atr.len()).partition(|&i| dmos[i] > 0.0);
    if used.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: used.len(),
        });
    }

    let u: Vec<f64> = used.iter().map(|&i| atr[i].ln()).collect();
    let y: Vec<f64> = used.iter().map(|&i| dmos[i].ln()).collect();
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let su = (u.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
    if !(su > 0.0) {
        return Err(Error::degenerate("all ATR values are equal; design is rank deficient"));
    }

    // Normal equations on z = (u - mu) / su, scaled by 1/n.
    let mut gram = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (&ui, &yi) in u.iter().zip(&y) {
        let z = (ui - mu) / su;
        let row = [1.0, z, z * z];
        for r in 0..3 {
            rhs[r] += row[r] * yi / n;
            for c in 0..3 {
                gram[r][c] += row[r] * row[c] / n;
            }
        }
    }
    let (a, condition) = solve_spd3(gram, rhs)?;

    // Map back: a0 + a1 z + a2 z^2 with z = (u - mu) / su.
    let s2 = su * su;
    let c = a[0] - a[1] * mu / su + a[2] * mu * mu / s2;
    let b1 = a[1] / su - 2.0 * a[2] * mu / s2;
    let b2 = a[2] / s2;
    let mut model = RegressionModel::new(artifact, c, b1, b2)?;
    model.metadata.sample_size = Some(used.len());

    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = u
        .iter()
        .zip(&y)
        .map(|(&ui, &yi)| (yi - (c + b1 * ui + b2 * ui * ui)).powi(2))
        .sum();
    let log_r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(Fit {
        model,
        used,
        excluded,
        log_r_squared,
        condition,
    })
}

/// Cholesky solve of a 3x3 symmetric positive definite system.
fn solve_spd3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<([f64; 3], f64)> {
    let mut l = [[0.0; 3]; 3];
    let mut pivots = [0.0; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > PIVOT_TOLERANCE * a[i][i].max(1.0)) {
                    return Err(Error::degenerate(
                        "fewer than three distinct ATR values; quadratic term is not identifiable",
                    ));
                }
                pivots[i] = d;
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut z = [0.0; 3];
    for i in 0..3 {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    let max = pivots.iter().cloned().fold(f64::MIN, f64::max);
    let min = pivots.iter().cloned().fold(f64::MAX, f64::min);
    Ok((x, max / min))
}

/// Linear-space quality of `model` on `(atr, dmos)`.
pub fn evaluate_fit(model: &RegressionModel, atr: &[f64], dmos: &[f64]) -> Result<MetricReport> {
    let predictions = atr
        .iter()
        .map(|&a| predict_dmos(model, a))
        .collect::<Result<Vec<_>>>()?;
    regression_metrics(&PairedSample::new(predictions, dmos.to_vec())?)
}
