//! No-reference image quality assessment from directional curvature.
//!
//! The pipeline computes horizontal and vertical second-difference maps,
//! compresses them with `ln(1 + |c|)`, and selects pixels whose curvature is
//! strong along one axis while suppressed along the other. The fraction of
//! such pixels, the Anisotropic Texture Richness (ATR), drives:
//!
//! * artifact classification (blur vs. white noise) from the scores of two
//!   specialist filter settings, and
//! * DMOS prediction through per-artifact log-log quadratic regressors.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod atr;
pub mod curvature;
pub mod error;
pub mod io;
pub mod map;
pub mod pipeline;
pub mod regression;
pub mod report;
pub mod stats;
pub mod synth;

pub use atr::{AtrScore, FilterParams, MaskPair, Mode};
pub use curvature::CurvatureBundle;
pub use error::{Error, Result};
pub use map::{BoolMap, GrayImage, RealMap};
pub use pipeline::{HybridPrediction, LabeledImage, Signature};
pub use regression::{Artifact, RegressionModel, ScoreScale};
pub use stats::MetricReport;
