use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use atr_core::atr::{saliency_artifacts, score_bundle};
use atr_core::curvature::analyze;
use atr_core::io::{load_dataset, load_image_grayscale, load_manifest, save_png, write_manifest, ManifestRecord};
use atr_core::pipeline::{
    classify_artifact, compute_signature, default_grid, evaluate_end_to_end, grid_search_calibrate,
    kfold_cross_validate, predict_quality, CvOptions, LabeledImage,
};
use atr_core::regression::{fit_loglog_poly2, Artifact, RegressionModel, ScoreScale};
use atr_core::report::ReportDocument;
use atr_core::synth::{degrade_suite, generated_references, Ladder};
use atr_core::{FilterParams, GrayImage};

mod table;

use table::Table;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

/// Curvature-based no-reference image quality toolkit.
#[derive(Parser, Debug)]
#[command(name = "atr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ATR score of one or more images for a filter setting.
    Score {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Blur- and noise-specialist scores of an image.
    Signature {
        image: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Dominant artifact (blur or noise) of an image.
    Classify {
        image: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Predicted DMOS of an image.
    Predict {
        image: PathBuf,
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Grid search for the filter setting best correlated with DMOS.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated alpha values [default: 0.5,1.0,...,5.0]
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        grid_alpha: Vec<f64>,
        /// Comma-separated beta values [default: 0.5,1.0,...,5.0]
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        grid_beta: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Grouped K-fold validation of the ATR regressor.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use only records with this label (all records when omitted).
        #[arg(long)]
        artifact: Option<Artifact>,
        #[arg(long, default_value = "fraction")]
        scale: ScoreScale,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit a regressor on a manifest and write it as a model file.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        artifact: Artifact,
        #[arg(long, default_value = "fraction")]
        scale: ScoreScale,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Hybrid classify-then-predict pipeline over a labeled manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write orientation masks and a colored overlay as PNG files.
    Saliency {
        image: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Generate a blur/noise degradation suite and its manifest.
    Synth {
        /// Reference images; use --generate for procedural references instead.
        images: Vec<PathBuf>,
        /// Number of procedural textured references.
        #[arg(long, conflicts_with = "images")]
        generate: Option<usize>,
        /// Side length of procedural references.
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        blur_sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = positive)]
        noise_sigmas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also emit the undistorted references.
        #[arg(long)]
        include_references: bool,
        /// Output directory; receives the PNG files and manifest.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct FilterArgs {
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    alpha: f64,
    #[arg(long, default_value_t = 2.5, value_parser = positive)]
    beta: f64,
}

impl FilterArgs {
    fn params(self) -> Result<FilterParams> {
        Ok(FilterParams::new(self.alpha, self.beta)?)
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file; give once per artifact. Missing artifacts use the bundled models.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<(RegressionModel, RegressionModel)> {
        let mut blur = None;
        let mut noise = None;
        for path in &self.models {
            let model = RegressionModel::load(path)?;
            let slot = match model.artifact {
                Artifact::Blur => &mut blur,
                Artifact::Noise => &mut noise,
            };
            if slot.replace(model).is_some() {
                return Err(usage(format!("more than one {} model given", slot.as_ref().unwrap().artifact)));
            }
        }
        Ok((
            blur.unwrap_or_else(RegressionModel::bundled_blur),
            noise.unwrap_or_else(RegressionModel::bundled_noise),
        ))
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Also write the JSON document to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    /// Human-readable table.
    Table,
    /// JSON document with tool version and parameters.
    Doc,
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

/// Argument combinations clap cannot check on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}

/// Prints the table or document and writes the document file if asked.
fn emit<P: Serialize, T: Serialize>(
    output: &OutputArgs,
    command: &str,
    params: &P,
    seed: Option<u64>,
    payload: &T,
    table: impl FnOnce() -> Table,
) -> Result<()> {
    let doc = ReportDocument::new(command, params, seed, payload)?;
    let json = doc.to_json();
    if let Some(path) = &output.out {
        std::fs::write(path, format!("{json}\n")).map_err(|e| atr_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    let mut stdout = std::io::stdout().lock();
    match output.format {
        Format::Doc => writeln!(stdout, "{json}")?,
        Format::Table => write!(stdout, "{}", table())?,
    }
    Ok(())
}

fn load_records(manifest: &Path, filter: impl Fn(&LabeledImage) -> bool) -> Result<Vec<LabeledImage>> {
    let records = load_manifest(manifest)?;
    Ok(load_dataset(&records)?.into_iter().filter(|r| filter(r)).collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score { images, filter, output } => {
            let params = filter.params()?;
            let mut rows = Vec::with_capacity(images.len());
            for path in &images {
                let img = load_image_grayscale(path)?;
                let (_, score) = score_bundle(&analyze(&img)?, params)?;
                rows.push(json!({
                    "image": path,
                    "atr": score.value,
                    "count": score.raw_count,
                    "pixels": score.pixels,
                    "degenerate": score.is_degenerate(),
                }));
            }
            let param_doc = json!({"alpha": params.alpha(), "beta": params.beta(), "mode": params.mode()});
            emit(&output, "score", &param_doc, None, &rows, || {
                let mut t = Table::new(["image", "atr", "count", "pixels", "degenerate"]);
                for (path, r) in images.iter().zip(&rows) {
                    t.row([
                        path.display().to_string(),
                        format!("{:.6}", r["atr"].as_f64().unwrap()),
                        r["count"].to_string(),
                        r["pixels"].to_string(),
                        r["degenerate"].to_string(),
                    ]);
                }
                t
            })
        }
        Command::Signature { image, output } => {
            let sig = compute_signature(&load_image_grayscale(&image)?)?;
            emit(&output, "signature", &json!({"image": image}), None, &sig, || {
                let mut t = Table::new(["filter", "alpha", "beta", "atr", "count", "degenerate"]);
                for (name, s) in [("blur", &sig.atr_blur), ("noise", &sig.atr_noise)] {
                    t.row([
                        name.to_string(),
                        s.params.alpha().to_string(),
                        s.params.beta().to_string(),
                        format!("{:.6}", s.value),
                        s.raw_count.to_string(),
                        s.is_degenerate().to_string(),
                    ]);
                }
                t
            })
        }
        Command::Classify { image, output } => {
            let sig = compute_signature(&load_image_grayscale(&image)?)?;
            let artifact = classify_artifact(&sig);
            let payload = json!({"artifact": artifact, "signature": sig});
            emit(&output, "classify", &json!({"image": image}), None, &payload, || {
                Table::bare(artifact.to_string())
            })
        }
        Command::Predict { image, models, output } => {
            let (blur, noise) = models.resolve()?;
            let p = predict_quality(&load_image_grayscale(&image)?, &blur, &noise)?;
            let params = json!({"image": image, "blur_model": blur, "noise_model": noise});
            emit(&output, "predict", &params, None, &p, || {
                let mut t = Table::new(["artifact", "dmos", "atr_blur", "atr_noise", "model_input", "degenerate"]);
                t.row([
                    p.artifact.to_string(),
                    format!("{:.4}", p.dmos_hat),
                    format!("{:.6}", p.signature.atr_blur.value),
                    format!("{:.6}", p.signature.atr_noise.value),
                    p.atr_input.to_string(),
                    p.degenerate.to_string(),
                ]);
                t
            })
        }
        Command::Calibrate { manifest, grid_alpha, grid_beta, output } => {
            let alphas = if grid_alpha.is_empty() { default_grid() } else { grid_alpha };
            let betas = if grid_beta.is_empty() { default_grid() } else { grid_beta };
            let records = load_records(&manifest, |_| true)?;
            let result = grid_search_calibrate(&records, &alphas, &betas)?;
            let params = json!({"manifest": manifest, "grid_alpha": alphas, "grid_beta": betas, "records": records.len()});
            emit(&output, "calibrate", &params, None, &result, || {
                let mut t = Table::new(["alpha", "beta", "rho", ""]);
                for cell in &result.grid {
                    let best = cell.alpha == result.best_params.alpha() && cell.beta == result.best_params.beta();
                    t.row([
                        cell.alpha.to_string(),
                        cell.beta.to_string(),
                        opt(cell.rho),
                        if best { "best".into() } else { String::new() },
                    ]);
                }
                t
            })
        }
        Command::Crossval { manifest, filter, k, seed, artifact, scale, output } => {
            let params = filter.params()?;
            let records = load_records(&manifest, |r| artifact.is_none() || r.artifact == artifact)?;
            let options = CvOptions {
                seed,
                artifact: artifact.unwrap_or(Artifact::Blur),
                scale,
            };
            let report = kfold_cross_validate(&records, k, params, options)?;
            let param_doc = json!({
                "manifest": manifest, "alpha": params.alpha(), "beta": params.beta(),
                "k": k, "artifact": artifact, "scale": scale, "records": records.len(),
            });
            emit(&output, "crossval", &param_doc, Some(seed), &report, || {
                let mut t = Table::new(["fold", "n_test", "atr_spearman", "atr_pearson", "r2", "rmse", "rmse_pct"]);
                for f in &report.folds {
                    t.row([
                        f.fold.to_string(),
                        f.test_indices.len().to_string(),
                        opt(f.score_spearman),
                        opt(f.score_pearson),
                        format!("{:.4}", f.metrics.r_squared),
                        format!("{:.4}", f.metrics.rmse),
                        format!("{:.2}", f.metrics.rmse_pct),
                    ]);
                }
                let s = &report.summary;
                let ms = |m: Option<atr_core::pipeline::MeanSd>| {
                    m.map_or_else(|| "undefined".into(), |m| format!("{:.4}±{:.4}", m.mean, m.sd))
                };
                t.row([
                    "mean±sd".into(),
                    String::new(),
                    ms(s.score_spearman),
                    ms(s.score_pearson),
                    ms(Some(s.r_squared)),
                    ms(Some(s.rmse)),
                    ms(Some(s.rmse_pct)),
                ]);
                t
            })
        }
        Command::Fit { manifest, filter, artifact, scale, out, format } => {
            let params = filter.params()?;
            let records = load_records(&manifest, |r| r.artifact == Some(artifact))?;
            let mut atr = Vec::with_capacity(records.len());
            for r in &records {
                atr.push(scale.input(&score_bundle(&analyze(&r.image)?, params)?.1));
            }
            let dmos: Vec<f64> = records.iter().map(|r| r.dmos).collect();
            let fit = fit_loglog_poly2(&atr, &dmos, artifact)?;
            let mut model = fit.model.with_scale(scale);
            model.metadata.source = Some(format!("{} at {params}", manifest.display()));
            model.save(&out)?;
            let output = OutputArgs { format, out: None };
            let param_doc = json!({"manifest": manifest, "alpha": params.alpha(), "beta": params.beta(),
                "artifact": artifact, "scale": scale, "out": out});
            let payload = json!({"model": model, "log_r_squared": fit.log_r_squared,
                "excluded": fit.excluded, "condition": fit.condition});
            emit(&output, "fit", &param_doc, None, &payload, || {
                let mut t = Table::new(["artifact", "c", "b1", "b2", "scale", "n", "excluded"]);
                t.row([
                    artifact.to_string(),
                    model.c.to_string(),
                    model.b1.to_string(),
                    model.b2.to_string(),
                    format!("{scale:?}").to_lowercase(),
                    fit.used.len().to_string(),
                    fit.excluded.len().to_string(),
                ]);
                t
            })
        }
        Command::Evaluate { manifest, models, output } => {
            let (blur, noise) = models.resolve()?;
            let records = load_records(&manifest, |_| true)?;
            let report = evaluate_end_to_end(&records, &blur, &noise)?;
            let params = json!({"manifest": manifest, "blur_model": blur, "noise_model": noise});
            emit(&output, "evaluate", &params, None, &report, || {
                let m = &report.metrics;
                let mut t = Table::new(["metric", "value"]);
                for (k, v) in [
                    ("records", format!("{} ({} blur, {} noise)", m.n, report.n_blur, report.n_noise)),
                    ("accuracy", format!("{:.4}", report.accuracy)),
                    ("atr_spearman", opt(report.score_spearman)),
                    ("atr_pearson", opt(report.score_pearson)),
                    ("pred_spearman", opt(m.spearman_rho)),
                    ("pred_pearson", opt(m.pearson_r)),
                    ("r_squared", format!("{:.4}", m.r_squared)),
                    ("rmse", format!("{:.4} ({:.2}% of range)", m.rmse, m.rmse_pct)),
                    ("mae", format!("{:.4} ({:.2}% of range)", m.mae, m.mae_pct)),
                    ("degenerate", report.degenerate.to_string()),
                ] {
                    t.row([k.to_string(), v]);
                }
                t
            })
        }
        Command::Saliency { image, filter, out, format } => {
            let params = filter.params()?;
            let img = load_image_grayscale(&image)?;
            let (mask, score) = score_bundle(&analyze(&img)?, params)?;
            let art = saliency_artifacts(&img, &mask)?;
            std::fs::create_dir_all(&out).map_err(|e| atr_core::Error::Io { path: out.clone(), source: e })?;
            let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let files = [
                (format!("{stem}_horz.png"), image::DynamicImage::from(art.horz)),
                (format!("{stem}_vert.png"), image::DynamicImage::from(art.vert)),
                (format!("{stem}_union.png"), image::DynamicImage::from(art.union)),
                (format!("{stem}_overlay.png"), image::DynamicImage::from(art.overlay)),
            ];
            let mut written = Vec::new();
            for (name, img) in &files {
                let path = out.join(name);
                save_png(img, &path)?;
                written.push(path);
            }
            let payload = json!({
                "atr": score.value, "horz_count": mask.horz_count, "vert_count": mask.vert_count,
                "union_count": mask.union_count, "pixels": score.pixels, "files": written,
            });
            let param_doc = json!({"image": image, "alpha": params.alpha(), "beta": params.beta(), "mode": params.mode()});
            let output = OutputArgs { format, out: None };
            emit(&output, "saliency", &param_doc, None, &payload, || {
                let mut t = Table::new(["file"]);
                for p in &written {
                    t.row([p.display().to_string()]);
                }
                t
            })
        }
        Command::Synth {
            images,
            generate,
            size,
            blur_sigmas,
            noise_sigmas,
            seed,
            include_references,
            out,
            format,
        } => {
            let references: Vec<(String, GrayImage)> = match generate {
                Some(n) => generated_references(n, size, size, seed)?,
                None if images.is_empty() => {
                    return Err(usage("synth needs reference images or --generate N".into()));
                }
                None => images
                    .iter()
                    .map(|p| {
                        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("ref").to_string();
                        Ok((id, load_image_grayscale(p)?))
                    })
                    .collect::<Result<_>>()?,
            };
            let mut ladder = Ladder::default();
            if !blur_sigmas.is_empty() {
                ladder.blur_sigmas = blur_sigmas;
            }
            if !noise_sigmas.is_empty() {
                ladder.noise_sigmas = noise_sigmas;
            }
            let suite = degrade_suite(&references, &ladder, seed, include_references)?;
            std::fs::create_dir_all(&out).map_err(|e| atr_core::Error::Io { path: out.clone(), source: e })?;
            let mut manifest = Vec::with_capacity(suite.len());
            for rec in &suite {
                let path = out.join(format!("{}.png", rec.stem()));
                save_png(&image::DynamicImage::from(rec.image.to_luma8()), &path)?;
                manifest.push(ManifestRecord {
                    image_path: path,
                    dmos: rec.dmos,
                    artifact_label: rec.artifact.into(),
                    ref_id: rec.ref_id.clone(),
                });
            }
            let manifest_path = out.join("manifest.csv");
            write_manifest(&manifest_path, &manifest)?;
            let param_doc = json!({
                "blur_sigmas": ladder.blur_sigmas, "noise_sigmas": ladder.noise_sigmas,
                "references": references.iter().map(|r| &r.0).collect::<Vec<_>>(),
                "include_references": include_references, "generate": generate, "size": size,
            });
            let payload = json!({"manifest": manifest_path, "images": suite.len()});
            let output = OutputArgs { format, out: None };
            emit(&output, "synth", &param_doc, Some(seed), &payload, || {
                Table::bare(format!("wrote {} images and {}", suite.len(), manifest_path.display()))
            })
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<atr_core::Error>() {
        Some(e) if e.is_io() => EXIT_IO,
        Some(_) => EXIT_DOMAIN,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_IO,
        None => EXIT_DOMAIN,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
