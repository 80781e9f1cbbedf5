//! Regression metrics in nm and scatter exports.
//!
//! The headline number is the overall RMSE: the Euclidean norm of the
//! per-layer RMSEs, equivalently the RMSE of the per-record error-vector
//! norm. A mean-predictor baseline (always predict the training-set mean)
//! anchors whether a model learned anything.
//!
//! ```
//! use eqeinv::eval::{overall_rmse, rmse_per_layer};
//!
//! let truths = vec![vec![100.0, 200.0]; 4];
//! let preds: Vec<Vec<f64>> = truths.iter().map(|t| vec![t[0] + 3.0, t[1] - 4.0]).collect();
//! let per_layer = rmse_per_layer(&preds, &truths)?;
//! assert!((per_layer[0] - 3.0).abs() < 1e-12);
//! assert!((per_layer[1] - 4.0).abs() < 1e-12);
//! assert!((overall_rmse(&per_layer) - 5.0).abs() < 1e-12);
//! # Ok::<(), eqeinv::eval::EvalError>(())
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sampling::ThicknessBox;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Per-layer and overall RMSE for one model, with the mean-predictor
/// baseline computed on the same records.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub layer_names: Vec<String>,
    pub per_layer_rmse_nm: Vec<f64>,
    pub overall_rmse_nm: f64,
    pub per_layer_baseline_rmse_nm: Vec<f64>,
    pub baseline_overall_rmse_nm: f64,
    pub count: usize,
}

impl MetricsReport {
    /// Layers whose RMSE beats the baseline.
    pub fn layers_beating_baseline(&self) -> usize {
        self.per_layer_rmse_nm
            .iter()
            .zip(&self.per_layer_baseline_rmse_nm)
            .filter(|(model, baseline)| model < baseline)
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "records evaluated: {}", self.count);
        let _ = writeln!(out, "{:<14} {:>12} {:>14}", "layer", "rmse_nm", "baseline_nm");
        for i in 0..self.layer_names.len() {
            let _ = writeln!(
                out,
                "{:<14} {:>12.3} {:>14.3}",
                self.layer_names[i], self.per_layer_rmse_nm[i], self.per_layer_baseline_rmse_nm[i]
            );
        }
        let _ = writeln!(
            out,
            "{:<14} {:>12.3} {:>14.3}",
            "overall", self.overall_rmse_nm, self.baseline_overall_rmse_nm
        );
        out
    }
}

fn check_matching(preds: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<usize, EvalError> {
    if preds.is_empty() || truths.is_empty() {
        return Err(EvalError::Empty("need at least one record".into()));
    }
    if preds.len() != truths.len() {
        return Err(EvalError::DimMismatch(format!(
            "{} predictions vs {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let dim = truths[0].len();
    for row in preds.iter().chain(truths) {
        if row.len() != dim {
            return Err(EvalError::DimMismatch(format!(
                "row of length {} in {dim}-layer data",
                row.len()
            )));
        }
    }
    Ok(dim)
}

/// Per layer i: sqrt(mean over records of (pred_i - truth_i)^2).
pub fn rmse_per_layer(preds: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    let dim = check_matching(preds, truths)?;
    let mut sums = vec![0.0; dim];
    for (p, t) in preds.iter().zip(truths) {
        for i in 0..dim {
            let e = p[i] - t[i];
            sums[i] += e * e;
        }
    }
    let n = preds.len() as f64;
    Ok(sums.into_iter().map(|s| (s / n).sqrt()).collect())
}

/// Euclidean norm of the per-layer RMSEs.
pub fn overall_rmse(per_layer: &[f64]) -> f64 {
    per_layer.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Column means of the training truths: the mean predictor's output.
pub fn column_means(truths: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    if truths.is_empty() {
        return Err(EvalError::Empty("mean predictor needs training records".into()));
    }
    let dim = truths[0].len();
    let mut means = vec![0.0; dim];
    for row in truths {
        if row.len() != dim {
            return Err(EvalError::DimMismatch("ragged truth rows".into()));
        }
        for i in 0..dim {
            means[i] += row[i];
        }
    }
    for m in &mut means {
        *m /= truths.len() as f64;
    }
    Ok(means)
}

/// RMSE of predicting the training-set per-layer mean for every test record.
pub fn baseline_mean_predictor(
    train_truths: &[Vec<f64>],
    test_truths: &[Vec<f64>],
) -> Result<Vec<f64>, EvalError> {
    let means = column_means(train_truths)?;
    let baseline_preds: Vec<Vec<f64>> = test_truths.iter().map(|_| means.clone()).collect();
    rmse_per_layer(&baseline_preds, test_truths)
}

/// Full report for a prediction run: model RMSEs plus the mean baseline.
pub fn compute_report(
    layer_names: &[String],
    preds_nm: &[Vec<f64>],
    truths_nm: &[Vec<f64>],
    train_truths_nm: &[Vec<f64>],
) -> Result<MetricsReport, EvalError> {
    let per_layer = rmse_per_layer(preds_nm, truths_nm)?;
    let baseline = baseline_mean_predictor(train_truths_nm, truths_nm)?;
    if layer_names.len() != per_layer.len() {
        return Err(EvalError::DimMismatch(format!(
            "{} layer names for {} layers",
            layer_names.len(),
            per_layer.len()
        )));
    }
    Ok(MetricsReport {
        layer_names: layer_names.to_vec(),
        overall_rmse_nm: overall_rmse(&per_layer),
        baseline_overall_rmse_nm: overall_rmse(&baseline),
        per_layer_rmse_nm: per_layer,
        per_layer_baseline_rmse_nm: baseline,
        count: preds_nm.len(),
    })
}

/// Write per-layer `truth_nm,pred_nm` CSVs and SVG scatter plots with the
/// identity line into `out_dir`. Axis ranges come from the box when given,
/// otherwise from the data; x and y always share the same range.
pub fn export_scatter(
    preds_nm: &[Vec<f64>],
    truths_nm: &[Vec<f64>],
    layer_names: &[String],
    box_: Option<&ThicknessBox>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    let dim = check_matching(preds_nm, truths_nm)?;
    if layer_names.len() != dim {
        return Err(EvalError::DimMismatch(format!(
            "{} layer names for {dim} layers",
            layer_names.len()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for (i, name) in layer_names.iter().enumerate() {
        let mut csv = String::from("truth_nm,pred_nm\n");
        for (p, t) in preds_nm.iter().zip(truths_nm) {
            let _ = writeln!(csv, "{},{}", t[i], p[i]);
        }
        let csv_path = out_dir.join(format!("scatter_{name}.csv"));
        std::fs::write(&csv_path, csv).map_err(|source| EvalError::Io {
            path: csv_path.clone(),
            source,
        })?;
        paths.push(csv_path);

        let (lo, hi) = match box_ {
            Some(b) if b.dim() == dim => (b.lower_nm()[i], b.upper_nm()[i]),
            _ => {
                let values = preds_nm.iter().chain(truths_nm).map(|row| row[i]);
                let lo = values.clone().fold(f64::INFINITY, f64::min);
                let hi = values.fold(f64::NEG_INFINITY, f64::max);
                let pad = 0.05 * (hi - lo).max(1.0);
                (lo - pad, hi + pad)
            }
        };
        let svg_path = out_dir.join(format!("scatter_{name}.svg"));
        std::fs::write(&svg_path, scatter_svg(name, preds_nm, truths_nm, i, lo, hi))
            .map_err(|source| EvalError::Io {
                path: svg_path.clone(),
                source,
            })?;
        paths.push(svg_path);
    }
    Ok(paths)
}

fn scatter_svg(name: &str, preds: &[Vec<f64>], truths: &[Vec<f64>], layer: usize, lo: f64, hi: f64) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 56.0;
    let plot = SIZE - 2.0 * MARGIN;
    let to_x = |v: f64| MARGIN + (v - lo) / (hi - lo) * plot;
    let to_y = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * plot;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot}\" height=\"{plot}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>",
        to_x(lo),
        to_y(lo),
        to_x(hi),
        to_y(hi)
    );
    for (p, t) in preds.iter().zip(truths) {
        let (x, y) = (to_x(t[layer]), to_y(p[layer]));
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.4\" fill=\"#1f6fb2\" fill-opacity=\"0.6\"/>");
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{name}: truth vs prediction (nm)</text>",
        SIZE / 2.0,
        MARGIN / 2.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">truth (nm)</text>",
        SIZE / 2.0,
        SIZE - MARGIN / 4.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 {} {})\">prediction (nm)</text>",
        MARGIN / 3.0,
        SIZE / 2.0,
        MARGIN / 3.0,
        SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}
