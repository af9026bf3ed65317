//! Classify-then-quantify quality prediction, plus the calibration and
//! validation harnesses around it.
//!
//! Two fixed filter settings form a per-image signature. The blur specialist
//! (`alpha = 4.0, beta = 2.5`) loses response as texture is smoothed away; the
//! noise specialist (`alpha = 1.5, beta = 1.0`) loses response as noise inflates
//! the orthogonal curvature. Which of the two scores is larger identifies the
//! dominant artifact, and the matching regressor predicts DMOS.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atr::{score_bundle, AtrScore, FilterParams};
use crate::curvature::{analyze, CurvatureBundle};
use crate::error::{Error, Result};
use crate::map::GrayImage;
use crate::regression::{evaluate_fit, fit_loglog_poly2, Artifact, RegressionModel, ScoreScale};
use crate::stats::{mean_and_sample_sd, pearson, spearman, MetricReport};

/// Blur specialist filter.
pub const BLUR_FILTER: FilterParams = FilterParams::const_new(4.0, 2.5);
/// White-noise specialist filter.
pub const NOISE_FILTER: FilterParams = FilterParams::const_new(1.5, 1.0);

/// An image with its subjective score and dataset bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub image: GrayImage,
    pub dmos: f64,
    /// Ground-truth distortion class, `None` for references and unknown types.
    pub artifact: Option<Artifact>,
    /// Identifier of the undistorted source image.
    pub ref_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub atr_blur: AtrScore,
    pub atr_noise: AtrScore,
}

impl Signature {
    pub fn from_bundle(bundle: &CurvatureBundle) -> Result<Self> {
        Ok(Self {
            atr_blur: score_bundle(bundle, BLUR_FILTER)?.1,
            atr_noise: score_bundle(bundle, NOISE_FILTER)?.1,
        })
    }

    pub fn score(&self, artifact: Artifact) -> &AtrScore {
        match artifact {
            Artifact::Blur => &self.atr_blur,
            Artifact::Noise => &self.atr_noise,
        }
    }
}

/// One curvature analysis shared by both specialist filters.
pub fn compute_signature(img: &GrayImage) -> Result<Signature> {
    Signature::from_bundle(&analyze(img)?)
}

/// Blur when the noise specialist responds more strongly; ties go to noise.
pub fn classify_artifact(sig: &Signature) -> Artifact {
    if sig.atr_noise.value > sig.atr_blur.value {
        Artifact::Blur
    } else {
        Artifact::Noise
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridPrediction {
    pub artifact: Artifact,
    pub dmos_hat: f64,
    pub signature: Signature,
    /// Artifact tag of the regressor that produced `dmos_hat`.
    pub model_used: Artifact,
    /// The regressor's input after clamping.
    pub atr_input: f64,
    /// Set when the selected score was zero and had to be clamped.
    pub degenerate: bool,
}

fn check_models(blur_model: &RegressionModel, noise_model: &RegressionModel) -> Result<()> {
    if blur_model.artifact != Artifact::Blur || noise_model.artifact != Artifact::Noise {
        return Err(Error::invalid(format!(
            "expected (blur, noise) models, got ({}, {})",
            blur_model.artifact, noise_model.artifact
        )));
    }
    Ok(())
}

/// Applies the hybrid rule to an already computed signature.
pub fn predict_from_signature(
    signature: Signature,
    blur_model: &RegressionModel,
    noise_model: &RegressionModel,
) -> Result<HybridPrediction> {
    check_models(blur_model, noise_model)?;
    let artifact = classify_artifact(&signature);
    let model = match artifact {
        Artifact::Blur => blur_model,
        Artifact::Noise => noise_model,
    };
    let score = signature.score(artifact);
    let atr_input = model.scale.input(score);
    Ok(HybridPrediction {
        artifact,
        dmos_hat: model.predict(atr_input)?,
        signature,
        model_used: model.artifact,
        atr_input,
        degenerate: score.is_degenerate(),
    })
}

pub fn predict_quality(
    img: &GrayImage,
    blur_model: &RegressionModel,
    noise_model: &RegressionModel,
) -> Result<HybridPrediction> {
    check_models(blur_model, noise_model)?;
    predict_from_signature(compute_signature(img)?, blur_model, noise_model)
}

/// `0.5, 1.0, ..., 5.0`.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) * 0.5).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    /// Spearman correlation between ATR and DMOS; `None` when undefined
    /// (e.g. every record scored the same).
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best_params: FilterParams,
    pub best_rho: f64,
    pub best_abs_rho: f64,
    pub grid: Vec<GridCell>,
}

fn check_grid(values: &[f64], name: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Exhaustive search for the `(alpha, beta)` maximizing `|rho(ATR, DMOS)|`.
///
/// Each image is analyzed once; the bundles are reused by every cell. Equal
/// `|rho|` resolves to the lexicographically smallest `(alpha, beta)`.
pub fn grid_search_calibrate(
    records: &[LabeledImage],
    alpha_grid: &[f64],
    beta_grid: &[f64],
) -> Result<CalibrationResult> {
    check_grid(alpha_grid, "alpha")?;
    check_grid(beta_grid, "beta")?;
    if records.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: records.len(),
        });
    }
    let params: Vec<FilterParams> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| FilterParams::new(a, b)))
        .collect::<Result<_>>()?;
    let bundles = records
        .par_iter()
        .map(|r| analyze(&r.image))
        .collect::<Result<Vec<_>>>()?;
    let dmos: Vec<f64> = records.iter().map(|r| r.dmos).collect();

    let grid = params
        .par_iter()
        .map(|&p| {
            let atr = bundles
                .iter()
                .map(|b| score_bundle(b, p).map(|(_, s)| s.value))
                .collect::<Result<Vec<_>>>()?;
            let rho = match spearman(&atr, &dmos) {
                Ok(r) => Some(r),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(GridCell {
                alpha: p.alpha(),
                beta: p.beta(),
                rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<&GridCell> = None;
    for cell in &grid {
        let Some(rho) = cell.rho else { continue };
        best = match best {
            None => Some(cell),
            Some(b) => {
                let b_abs = b.rho.expect("best has rho").abs();
                let better = rho.abs() > b_abs
                    || (rho.abs() == b_abs && (cell.alpha, cell.beta) < (b.alpha, b.beta));
                Some(if better { cell } else { b })
            }
        };
    }
    let best = best.ok_or_else(|| Error::degenerate("Spearman correlation undefined in every grid cell"))?;
    let best_rho = best.rho.expect("best has rho");
    Ok(CalibrationResult {
        best_params: FilterParams::new(best.alpha, best.beta)?,
        best_rho,
        best_abs_rho: best_rho.abs(),
        grid,
    })
}

/// Settings for [`kfold_cross_validate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub seed: u64,
    /// Tag for the per-fold models.
    pub artifact: Artifact,
    pub scale: ScoreScale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_groups: Vec<String>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub model: RegressionModel,
    /// Training records dropped from the fit for non-positive DMOS.
    pub excluded_from_fit: usize,
    /// Predicted versus observed DMOS on the test records.
    pub metrics: MetricReport,
    /// Rank correlation of the raw ATR score with DMOS on the test records.
    pub score_spearman: Option<f64>,
    /// Linear correlation of the raw ATR score with DMOS on the test records.
    pub score_pearson: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub sd: f64,
    /// Folds contributing (undefined correlations are skipped).
    pub folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub score_spearman: Option<MeanSd>,
    pub score_pearson: Option<MeanSd>,
    pub r_squared: MeanSd,
    pub rmse: MeanSd,
    pub rmse_pct: MeanSd,
    pub mae: MeanSd,
    pub mae_pct: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub params: FilterParams,
    pub options: CvOptions,
    pub folds: Vec<FoldReport>,
    /// `(ref_id, fold)` for every reference group, sorted by `ref_id`.
    pub fold_assignment: Vec<(String, usize)>,
    pub summary: CvSummary,
}

fn summarize(values: &[f64]) -> Option<MeanSd> {
    mean_and_sample_sd(values).map(|(mean, sd)| MeanSd {
        mean,
        sd,
        folds: values.len(),
    })
}

fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Assigns reference groups to `k` folds: groups sorted by id, shuffled with
/// `seed`, then dealt round-robin. Returns `ref_id -> fold`.
pub fn assign_folds(ref_ids: &[&str], k: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    let mut groups: Vec<&str> = ref_ids.to_vec();
    groups.sort_unstable();
    groups.dedup();
    if groups.len() < k {
        return Err(Error::invalid(format!(
            "{} reference groups cannot fill {k} folds",
            groups.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g.to_string(), i % k))
        .collect())
}

/// Grouped K-fold validation of the ATR regressor for one filter setting.
///
/// Records sharing a `ref_id` always land in the same fold. The model is
/// refit on each training split and scored on the held-out split.
pub fn kfold_cross_validate(
    records: &[LabeledImage],
    k: usize,
    params: FilterParams,
    options: CvOptions,
) -> Result<CvReport> {
    let ids: Vec<&str> = records.iter().map(|r| r.ref_id.as_str()).collect();
    let assignment = assign_folds(&ids, k, options.seed)?;
    let scores = records
        .par_iter()
        .map(|r| score_bundle(&analyze(&r.image)?, params).map(|(_, s)| s))
        .collect::<Result<Vec<AtrScore>>>()?;
    let inputs: Vec<f64> = scores.iter().map(|s| options.scale.input(s)).collect();

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test_indices, train_indices): (Vec<usize>, Vec<usize>) =
            (0..records.len()).partition(|&i| assignment[&records[i].ref_id] == fold);
        let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let dmos: Vec<f64> = records.iter().map(|r| r.dmos).collect();
        let fit = fit_loglog_poly2(
            &pick(&train_indices, &inputs),
            &pick(&train_indices, &dmos),
            options.artifact,
        )?;
        let mut model = fit.model.with_scale(options.scale);
        model.metadata.source = Some(format!("cross-validation fold {fold}"));
        let test_inputs = pick(&test_indices, &inputs);
        let test_dmos = pick(&test_indices, &dmos);
        let metrics = evaluate_fit(&model, &test_inputs, &test_dmos)?;
        let raw: Vec<f64> = test_indices.iter().map(|&i| scores[i].value).collect();
        let test_groups = assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(g, _)| g.clone())
            .collect();
        folds.push(FoldReport {
            fold,
            test_groups,
            excluded_from_fit: fit.excluded.len(),
            score_spearman: optional(spearman(&raw, &test_dmos))?,
            score_pearson: optional(pearson(&raw, &test_dmos))?,
            train_indices,
            test_indices,
            model,
            metrics,
        });
    }

    let collect = |f: &dyn Fn(&FoldReport) -> Option<f64>| folds.iter().filter_map(f).collect::<Vec<f64>>();
    let must = |f: &dyn Fn(&FoldReport) -> Option<f64>| summarize(&collect(f)).expect("k >= 2 folds");
    let summary = CvSummary {
        score_spearman: summarize(&collect(&|f| f.score_spearman)),
        score_pearson: summarize(&collect(&|f| f.score_pearson)),
        r_squared: must(&|f| Some(f.metrics.r_squared)),
        rmse: must(&|f| Some(f.metrics.rmse)),
        rmse_pct: must(&|f| Some(f.metrics.rmse_pct)),
        mae: must(&|f| Some(f.metrics.mae)),
        mae_pct: must(&|f| Some(f.metrics.mae_pct)),
    };
    Ok(CvReport {
        k,
        params,
        options,
        folds,
        fold_assignment: assignment.into_iter().collect(),
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub index: usize,
    pub ref_id: String,
    pub truth: Artifact,
    pub prediction: HybridPrediction,
    pub dmos: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    /// Pooled predicted-versus-observed DMOS.
    pub metrics: MetricReport,
    /// Fraction of records whose artifact class was identified correctly.
    pub accuracy: f64,
    /// Rank correlation of the regressor input (selected ATR) with DMOS.
    pub score_spearman: Option<f64>,
    pub score_pearson: Option<f64>,
    pub n_blur: usize,
    pub n_noise: usize,
    pub degenerate: usize,
    pub rows: Vec<EvaluationRow>,
}

/// Runs the hybrid predictor over every blur- or noise-labeled record.
/// Records without an artifact label are skipped.
pub fn evaluate_end_to_end(
    records: &[LabeledImage],
    blur_model: &RegressionModel,
    noise_model: &RegressionModel,
) -> Result<EndToEndReport> {
    check_models(blur_model, noise_model)?;
    let labeled: Vec<(usize, &LabeledImage, Artifact)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.artifact.map(|a| (i, r, a)))
        .collect();
    let n_blur = labeled.iter().filter(|t| t.2 == Artifact::Blur).count();
    let n_noise = labeled.len() - n_blur;
    if n_blur == 0 || n_noise == 0 {
        return Err(Error::invalid(format!(
            "evaluation needs both artifact classes, got {n_blur} blur and {n_noise} noise records"
        )));
    }
    let rows = labeled
        .par_iter()
        .map(|&(index, r, truth)| {
            Ok(EvaluationRow {
                index,
                ref_id: r.ref_id.clone(),
                truth,
                prediction: predict_quality(&r.image, blur_model, noise_model)?,
                dmos: r.dmos,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<f64> = rows.iter().map(|r| r.prediction.dmos_hat).collect();
    let observed: Vec<f64> = rows.iter().map(|r| r.dmos).collect();
    let inputs: Vec<f64> = rows.iter().map(|r| r.prediction.atr_input).collect();
    let metrics = crate::stats::regression_metrics(&crate::stats::PairedSample::new(
        predicted,
        observed.clone(),
    )?)?;
    let correct = rows.iter().filter(|r| r.prediction.artifact == r.truth).count();
    Ok(EndToEndReport {
        metrics,
        accuracy: correct as f64 / rows.len() as f64,
        score_spearman: optional(spearman(&inputs, &observed))?,
        score_pearson: optional(pearson(&inputs, &observed))?,
        n_blur,
        n_noise,
        degenerate: rows.iter().filter(|r| r.prediction.degenerate).count(),
        rows,
    })
}
