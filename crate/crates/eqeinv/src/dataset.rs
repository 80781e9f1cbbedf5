//! Dataset generation: sampled stacks to rasterized EQE images on disk.
//!
//! Each record pairs a thickness vector with its simulated EQE curve,
//! rasterized into a fixed-size axis-free image (the network input) and a
//! normalized target vector (thickness divided by the layer's upper bound).
//! Records are split train/val/test by sample index and persisted as one
//! packed image file plus target CSVs per split, all listed with SHA-256
//! checksums in a manifest.
//!
//! The rasterizer maps wavelength onto columns and EQE onto rows (row 0 is
//! EQE = 1), joining samples with line segments so every column is lit:
//!
//! ```
//! use eqeinv::dataset::rasterize;
//! use eqeinv::tmm::{default_wavelength_grid, EqeCurve};
//!
//! let grid = default_wavelength_grid();
//! let flat_half = EqeCurve::new(grid.clone(), vec![0.5; grid.len()], None)?;
//! let image = rasterize(&flat_half, 37, 28)?;
//! // (1 - 0.5) * 27 = 13.5 rounds toward the smaller row index.
//! assert!((0..37).all(|col| image.pixel(0, 13, col) == 1.0));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sampling::{SampleMethod, SampleSet, SamplingError, ThicknessBox};
use crate::tmm::{compute_eqe, EqeCurve, LayerStack, TmmError};

/// Default raster geometry: 37 columns (wavelength axis) by 28 rows (EQE axis).
pub const DEFAULT_WIDTH: usize = 37;
pub const DEFAULT_HEIGHT: usize = 28;

/// Magic bytes opening an image pack file.
pub const IMAGE_PACK_MAGIC: &[u8; 8] = b"EQEIMG1\0";

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {index} (thicknesses {thicknesses:?} nm): {source}")]
    Simulation {
        index: usize,
        thicknesses: Vec<f64>,
        #[source]
        source: TmmError,
    },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid dataset request: {0}")]
    BadConfig(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("checksum mismatch for {path}: manifest {expected}, file {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
}

/// Fixed-size multi-channel pixel grid encoding an EQE curve.
///
/// Channel-planar, row-major, intensities in `[0, 1]`: channel 0 is the
/// forward curve, channel 1 (when present) the reverse curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl RasterImage {
    pub fn pixel(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }
}

/// Nearest integer with ties toward the smaller value.
fn round_half_down(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// Rasterize an EQE curve into a `width x height` image, one channel per
/// curve. Wavelengths map linearly onto columns `0..width`, EQE onto rows
/// with row 0 = EQE 1 (top) and row `height - 1` = EQE 0; pixel indices round
/// to nearest with ties toward the smaller index. Consecutive samples are
/// joined with Bresenham segments so the trace has no gaps, and there are no
/// axes or labels.
pub fn rasterize(curve: &EqeCurve, width: usize, height: usize) -> Result<RasterImage, DatasetError> {
    if width < 2 || height < 2 {
        return Err(DatasetError::BadConfig(format!(
            "raster geometry must be at least 2x2, got {width}x{height}"
        )));
    }
    let channels = curve.channel_count();
    let mut image = RasterImage {
        width,
        height,
        channels,
        data: vec![0.0; width * height * channels],
    };
    let w = curve.wavelengths_nm();
    let (w_min, w_max) = (w[0], *w.last().unwrap());
    let col_of = |lambda: f64| round_half_down((lambda - w_min) / (w_max - w_min) * (width - 1) as f64);
    let row_of = |eqe: f64| round_half_down((1.0 - eqe) * (height - 1) as f64);

    let mut draw_channel = |channel: usize, values: &[f64]| {
        let plane = &mut image.data[channel * width * height..(channel + 1) * width * height];
        let mut prev: Option<(i64, i64)> = None;
        for (&lambda, &eqe) in w.iter().zip(values) {
            let point = (col_of(lambda), row_of(eqe));
            match prev {
                Some(p) => draw_segment(plane, width, p, point),
                None => plane[(point.1 * width as i64 + point.0) as usize] = 1.0,
            }
            prev = Some(point);
        }
    };
    draw_channel(0, curve.forward());
    if let Some(reverse) = curve.reverse() {
        draw_channel(1, reverse);
    }
    Ok(image)
}

/// Bresenham segment between two in-bounds pixels, endpoints included.
fn draw_segment(plane: &mut [f32], width: usize, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
    let (mut x, mut y) = (x0, y0);
    let mut err = dx + dy;
    loop {
        plane[(y * width as i64 + x) as usize] = 1.0;
        if x == x1 && y == y1 {
            break;
        }
        let doubled = 2 * err;
        if doubled >= dy {
            err += dy;
            x += sx;
        }
        if doubled <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Thicknesses divided componentwise by the box upper bounds.
pub fn normalize_targets(thicknesses_nm: &[f64], box_: &ThicknessBox) -> Result<Vec<f64>, DatasetError> {
    if thicknesses_nm.len() != box_.dim() {
        return Err(DatasetError::BadConfig(format!(
            "{} thicknesses for a {}-layer box",
            thicknesses_nm.len(),
            box_.dim()
        )));
    }
    Ok(thicknesses_nm
        .iter()
        .zip(box_.upper_nm())
        .map(|(&t, &hi)| t / hi)
        .collect())
}

/// Inverse of [`normalize_targets`].
pub fn denormalize_targets(fractions: &[f64], box_: &ThicknessBox) -> Result<Vec<f64>, DatasetError> {
    if fractions.len() != box_.dim() {
        return Err(DatasetError::BadConfig(format!(
            "{} fractions for a {}-layer box",
            fractions.len(),
            box_.dim()
        )));
    }
    Ok(fractions
        .iter()
        .zip(box_.upper_nm())
        .map(|(&f, &hi)| f * hi)
        .collect())
}

/// One generated sample, in memory.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub thicknesses_nm: Vec<f64>,
    pub normalized_targets: Vec<f64>,
    pub eqe: EqeCurve,
    pub image: RasterImage,
}

/// Generation request beyond the box and stack template.
#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub method: SampleMethod,
    pub seed_or_skip: u64,
    pub n_total: usize,
    /// Train/val/test fractions; must sum to 1.
    pub split_fractions: (f64, f64, f64),
    pub width: usize,
    pub height: usize,
    pub grid: Vec<f64>,
}

impl GenerateConfig {
    /// Split sizes: train and val round to nearest, test takes the remainder.
    pub fn split_counts(&self) -> Result<(usize, usize, usize), DatasetError> {
        let (ft, fv, fe) = self.split_fractions;
        if !(ft > 0.0 && fv > 0.0 && fe > 0.0) || (ft + fv + fe - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadConfig(format!(
                "split fractions must be positive and sum to 1, got ({ft}, {fv}, {fe})"
            )));
        }
        if self.n_total < 3 {
            return Err(DatasetError::BadConfig(format!(
                "need n_total >= 3 to fill three splits, got {}",
                self.n_total
            )));
        }
        let n = self.n_total;
        let n_train = (n as f64 * ft).round() as usize;
        let n_val = (n as f64 * fv).round() as usize;
        let n_test = n
            .checked_sub(n_train + n_val)
            .ok_or_else(|| DatasetError::BadConfig("split rounding exceeded n_total".into()))?;
        if n_train == 0 || n_val == 0 || n_test == 0 {
            return Err(DatasetError::BadConfig(format!(
                "every split needs at least one record, got {n_train}/{n_val}/{n_test}"
            )));
        }
        Ok((n_train, n_val, n_test))
    }
}

/// Everything needed to rebuild or validate a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub method: SampleMethod,
    pub seed_or_skip: u64,
    pub split_counts: (usize, usize, usize),
    pub box_: ThicknessBox,
    pub grid: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Provenance: material name per layer plus ambient media and geometry.
    pub layer_materials: Vec<String>,
    pub incident: String,
    pub exit: String,
    pub active_index: usize,
    pub dual_side: bool,
    /// file name -> lower-case hex SHA-256.
    pub checksums: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Generate a dataset: sample the box, solve every stack, rasterize, split
/// deterministically by sample index, and write the split files plus
/// manifest into `out_dir` (created if missing).
///
/// Records are simulated in parallel but ordered by sample index, so a rerun
/// with identical inputs writes byte-identical files. Any simulation failure
/// aborts before anything is written.
pub fn generate(
    box_: &ThicknessBox,
    stack_template: &LayerStack,
    cfg: &GenerateConfig,
    out_dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    if stack_template.layers().len() != box_.dim() {
        return Err(DatasetError::BadConfig(format!(
            "stack template has {} layers but the box has {}",
            stack_template.layers().len(),
            box_.dim()
        )));
    }
    let (n_train, n_val, n_test) = cfg.split_counts()?;
    let samples = SampleSet::generate(cfg.method, box_, cfg.n_total, cfg.seed_or_skip)?;

    let records: Vec<DatasetRecord> = samples
        .points_nm
        .par_iter()
        .enumerate()
        .map(|(index, thicknesses)| {
            let failed = |source: TmmError| DatasetError::Simulation {
                index,
                thicknesses: thicknesses.clone(),
                source,
            };
            let stack = stack_template.with_thicknesses(thicknesses).map_err(failed)?;
            let eqe = compute_eqe(&stack, &cfg.grid, stack.dual_side()).map_err(failed)?;
            let image = rasterize(&eqe, cfg.width, cfg.height)?;
            Ok(DatasetRecord {
                normalized_targets: normalize_targets(thicknesses, box_)?,
                thicknesses_nm: thicknesses.clone(),
                eqe,
                image,
            })
        })
        .collect::<Result<_, DatasetError>>()?;

    std::fs::create_dir_all(out_dir).map_err(|source| DatasetError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let channels = records[0].image.channels;
    let bounds = [0..n_train, n_train..n_train + n_val, n_train + n_val..cfg.n_total];

    // Assemble every payload before touching the filesystem, so a failure
    // mid-assembly leaves nothing behind.
    let mut payloads: Vec<(String, Vec<u8>)> = Vec::new();
    for (split, range) in SPLIT_NAMES.iter().zip(bounds) {
        let split_records = &records[range];
        payloads.push((
            format!("{split}_images.bin"),
            pack_images(split_records.iter().map(|r| &r.image), cfg.width, cfg.height, channels)?,
        ));
        payloads.push((
            format!("{split}_targets.csv"),
            vectors_csv(box_.names(), split_records.iter().map(|r| r.normalized_targets.as_slice()))
                .into_bytes(),
        ));
        payloads.push((
            format!("{split}_thicknesses_nm.csv"),
            vectors_csv(box_.names(), split_records.iter().map(|r| r.thicknesses_nm.as_slice()))
                .into_bytes(),
        ));
    }

    let mut checksums = BTreeMap::new();
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in &payloads {
        let path = out_dir.join(name);
        if let Err(source) = std::fs::write(&path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(DatasetError::Io { path, source });
        }
        written.push(path);
        checksums.insert(name.clone(), sha256_hex(bytes));
    }

    let manifest = DatasetManifest {
        method: cfg.method,
        seed_or_skip: cfg.seed_or_skip,
        split_counts: (n_train, n_val, n_test),
        box_: box_.clone(),
        grid: cfg.grid.clone(),
        width: cfg.width,
        height: cfg.height,
        channels,
        layer_materials: stack_template
            .layers()
            .iter()
            .map(|l| l.material.name().to_string())
            .collect(),
        incident: stack_template.incident_medium().name().to_string(),
        exit: stack_template.exit_medium().name().to_string(),
        active_index: stack_template.active_index(),
        dual_side: stack_template.dual_side(),
        checksums,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if let Err(source) = std::fs::write(&manifest_path, manifest.to_text()) {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        return Err(DatasetError::Io {
            path: manifest_path,
            source,
        });
    }
    Ok(manifest)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn vectors_csv<'a>(names: &[String], rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut text = names.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&join_floats(row));
        text.push('\n');
    }
    text
}

/// Serialize images into the pack format: magic, then count/width/height/
/// channels as little-endian u32, then all intensities as little-endian f32,
/// record-major and channel-planar.
pub fn pack_images<'a>(
    images: impl Iterator<Item = &'a RasterImage>,
    width: usize,
    height: usize,
    channels: usize,
) -> Result<Vec<u8>, DatasetError> {
    let images: Vec<&RasterImage> = images.collect();
    let mut bytes =
        Vec::with_capacity(24 + images.len() * width * height * channels * 4);
    bytes.extend_from_slice(IMAGE_PACK_MAGIC);
    for dim in [images.len(), width, height, channels] {
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for image in images {
        if image.width != width || image.height != height || image.channels != channels {
            return Err(DatasetError::BadConfig(format!(
                "image geometry {}x{}x{} does not match pack geometry {width}x{height}x{channels}",
                image.width, image.height, image.channels
            )));
        }
        for &v in &image.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

/// All images of one split, still packed contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePack {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImagePack {
    pub fn record(&self, index: usize) -> &[f32] {
        let len = self.width * self.height * self.channels;
        &self.data[index * len..(index + 1) * len]
    }

    pub fn to_image(&self, index: usize) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.record(index).to_vec(),
        }
    }
}

pub fn unpack_images(path: &Path, bytes: &[u8]) -> Result<ImagePack, DatasetError> {
    let format = |message: String| DatasetError::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 24 || &bytes[..8] != IMAGE_PACK_MAGIC {
        return Err(format("not an EQEIMG1 image pack".into()));
    }
    let field = |i: usize| {
        u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize
    };
    let (count, width, height, channels) = (field(0), field(1), field(2), field(3));
    let expected = 24 + count * width * height * channels * 4;
    if bytes.len() != expected {
        return Err(format(format!(
            "pack declares {count} records of {width}x{height}x{channels} ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let data = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ImagePack {
        count,
        width,
        height,
        channels,
        data,
    })
}

/// One split loaded back from disk.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub images: ImagePack,
    pub targets: Vec<Vec<f64>>,
    pub thicknesses_nm: Vec<Vec<f64>>,
}

/// Load a split, verifying its checksums against the manifest.
pub fn load_split(dir: &Path, manifest: &DatasetManifest, split: &str) -> Result<SplitData, DatasetError> {
    let read = |name: String| -> Result<Vec<u8>, DatasetError> {
        let path = dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|source| DatasetError::Io {
            path: path.clone(),
            source,
        })?;
        match manifest.checksums.get(&name) {
            Some(expected) => {
                let actual = sha256_hex(&bytes);
                if *expected != actual {
                    return Err(DatasetError::ChecksumMismatch {
                        path,
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
            None => {
                return Err(DatasetError::Format {
                    path,
                    message: "file is not listed in the manifest".into(),
                })
            }
        }
        Ok(bytes)
    };
    let images_name = format!("{split}_images.bin");
    let images = unpack_images(&dir.join(&images_name), &read(images_name.clone())?)?;
    let targets = parse_vectors_csv(&dir.join(format!("{split}_targets.csv")), &read(format!("{split}_targets.csv"))?)?;
    let thicknesses_nm = parse_vectors_csv(
        &dir.join(format!("{split}_thicknesses_nm.csv")),
        &read(format!("{split}_thicknesses_nm.csv"))?,
    )?;
    if targets.len() != images.count || thicknesses_nm.len() != images.count {
        return Err(DatasetError::Format {
            path: dir.join(images_name),
            message: format!(
                "split sizes disagree: {} images, {} targets, {} thickness rows",
                images.count,
                targets.len(),
                thicknesses_nm.len()
            ),
        });
    }
    Ok(SplitData {
        images,
        targets,
        thicknesses_nm,
    })
}

fn parse_vectors_csv(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<f64>>, DatasetError> {
    let format = |line: usize, message: String| DatasetError::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let text = std::str::from_utf8(bytes).map_err(|e| format(0, e.to_string()))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| format(1, "empty file".into()))?;
    let dim = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format(idx + 1, e.to_string()))?;
        if row.len() != dim {
            return Err(format(idx + 1, format!("expected {dim} fields, got {}", row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        push(&mut out, "format", "eqeinv-dataset-v1".into());
        push(&mut out, "method", self.method.to_string());
        push(&mut out, "seed_or_skip", self.seed_or_skip.to_string());
        push(
            &mut out,
            "split_counts",
            format!("{},{},{}", self.split_counts.0, self.split_counts.1, self.split_counts.2),
        );
        push(&mut out, "names", self.box_.names().join(","));
        push(&mut out, "lower_nm", join_floats(self.box_.lower_nm()));
        push(&mut out, "upper_nm", join_floats(self.box_.upper_nm()));
        push(&mut out, "grid", join_floats(&self.grid));
        push(&mut out, "width", self.width.to_string());
        push(&mut out, "height", self.height.to_string());
        push(&mut out, "channels", self.channels.to_string());
        push(&mut out, "layer_materials", self.layer_materials.join(","));
        push(&mut out, "incident", self.incident.clone());
        push(&mut out, "exit", self.exit.clone());
        push(&mut out, "active_index", self.active_index.to_string());
        push(&mut out, "dual_side", self.dual_side.to_string());
        for (name, hash) in &self.checksums {
            push(&mut out, &format!("sha256 {name}"), hash.clone());
        }
        out
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| DatasetError::Io {
            path: path.clone(),
            source,
        })?;
        Self::parse(&path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, DatasetError> {
        let format = |message: String| DatasetError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let mut checksums = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format(format!("expected key = value, got \"{line}\"")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(name) = key.strip_prefix("sha256 ") {
                checksums.insert(name.trim().to_string(), value.to_string());
            } else {
                fields.insert(key.to_string(), value.to_string());
            }
        }
        let get = |key: &str| {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| format(format!("missing key \"{key}\"")))
        };
        if get("format")? != "eqeinv-dataset-v1" {
            return Err(format("unsupported manifest format".into()));
        }
        let floats = |key: &str| -> Result<Vec<f64>, DatasetError> {
            get(key)?
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format(format!("{key}: {e}"))))
                .collect()
        };
        let counts: Vec<usize> = get("split_counts")?
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|e| format(format!("split_counts: {e}"))))
            .collect::<Result<_, _>>()?;
        if counts.len() != 3 {
            return Err(format("split_counts needs exactly 3 entries".into()));
        }
        let box_ = ThicknessBox::new(
            get("names")?.split(',').map(str::to_string).collect(),
            floats("lower_nm")?,
            floats("upper_nm")?,
        )
        .map_err(|e| format(e.to_string()))?;
        let parse_usize = |key: &str| -> Result<usize, DatasetError> {
            get(key)?.parse::<usize>().map_err(|e| format(format!("{key}: {e}")))
        };
        Ok(Self {
            method: get("method")?.parse().map_err(|e: SamplingError| format(e.to_string()))?,
            seed_or_skip: get("seed_or_skip")?
                .parse()
                .map_err(|e| format(format!("seed_or_skip: {e}")))?,
            split_counts: (counts[0], counts[1], counts[2]),
            box_,
            grid: floats("grid")?,
            width: parse_usize("width")?,
            height: parse_usize("height")?,
            channels: parse_usize("channels")?,
            layer_materials: get("layer_materials")?.split(',').map(str::to_string).collect(),
            incident: get("incident")?,
            exit: get("exit")?,
            active_index: parse_usize("active_index")?,
            dual_side: get("dual_side")? == "true",
            checksums,
        })
    }
}
