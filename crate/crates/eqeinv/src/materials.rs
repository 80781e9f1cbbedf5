//! Tabulated complex refractive-index (dispersion) data.
//!
//! Each material is a table of `(wavelength_nm, n, k)` rows loaded from CSV.
//! Tables must cover the simulation band ([`SIM_BAND_NM`]) and are
//! interpolated linearly between rows; requests outside the tabulated range
//! are an error rather than a clamp, so a too-short table can never silently
//! corrupt a spectrum.
//!
//! ```
//! use eqeinv::materials::parse_dispersion_csv;
//!
//! let csv = "wavelength_nm,n,k\n250,1.0,0.0\n500,1.0,0.0\n600,3.0,0.2\n900,3.0,0.2\n";
//! let glassy = parse_dispersion_csv(csv, "example")?;
//! let index = glassy.refractive_index_at(550.0)?; // midpoint of the 500-600 rows
//! assert_eq!(index.re, 2.0);
//! assert_eq!(index.im, 0.1);
//! assert!(glassy.refractive_index_at(249.0).is_err()); // no extrapolation
//! # Ok::<(), eqeinv::materials::MaterialError>(())
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Wavelength band simulated by the toolkit, in nm.
pub const SIM_BAND_NM: (f64, f64) = (300.0, 800.0);

/// Header line of the dispersion CSV format.
pub const CSV_HEADER: &str = "wavelength_nm,n,k";

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Validation failure on in-memory data (no file involved).
    #[error("material \"{name}\"{}: {message}", row_label(*.row))]
    Invalid {
        name: String,
        /// 0-based table row, when the failure is tied to one.
        row: Option<usize>,
        message: String,
    },
    #[error(
        "material \"{name}\" covers {have_min}-{have_max} nm but the simulation band \
         requires {need_min}-{need_max} nm (missing {missing})"
    )]
    BandNotCovered {
        name: String,
        have_min: f64,
        have_max: f64,
        need_min: f64,
        need_max: f64,
        missing: String,
    },
    #[error("wavelength {lambda_nm} nm outside table range [{min_nm}, {max_nm}] nm of material \"{name}\"")]
    OutOfRange {
        name: String,
        lambda_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
}

fn row_label(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" row {r}"),
        None => String::new(),
    }
}

/// Per-material table of complex refractive index versus wavelength.
///
/// Invariants enforced at construction: wavelengths strictly increasing,
/// finite and positive; `n > 0` and `k >= 0` everywhere; table covers the
/// simulation band. Values are immutable afterwards, so a dispersion can be
/// shared freely across worker threads (see [`SharedDispersion`]).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDispersion {
    name: String,
    wavelengths_nm: Vec<f64>,
    n: Vec<f64>,
    k: Vec<f64>,
}

/// Cheap handle used by layer stacks to share one table between many solves.
pub type SharedDispersion = Arc<MaterialDispersion>;

impl MaterialDispersion {
    /// Build a dispersion from parallel columns, validating every invariant.
    pub fn new(
        name: impl Into<String>,
        wavelengths_nm: Vec<f64>,
        n: Vec<f64>,
        k: Vec<f64>,
    ) -> Result<Self, MaterialError> {
        let name = name.into();
        let invalid = |row, message: String| MaterialError::Invalid {
            name: name.clone(),
            row,
            message,
        };
        if wavelengths_nm.is_empty() {
            return Err(invalid(None, "table has no rows".into()));
        }
        if n.len() != wavelengths_nm.len() || k.len() != wavelengths_nm.len() {
            return Err(invalid(
                None,
                format!(
                    "column lengths differ: {} wavelengths, {} n, {} k",
                    wavelengths_nm.len(),
                    n.len(),
                    k.len()
                ),
            ));
        }
        for (i, &w) in wavelengths_nm.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(invalid(Some(i), format!("wavelength {w} nm is not finite and positive")));
            }
            if i > 0 && w <= wavelengths_nm[i - 1] {
                return Err(invalid(
                    Some(i),
                    format!(
                        "wavelengths must be strictly increasing ({} nm follows {} nm)",
                        w,
                        wavelengths_nm[i - 1]
                    ),
                ));
            }
        }
        for (i, &v) in n.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(Some(i), format!("n = {v} must be finite and > 0")));
            }
        }
        for (i, &v) in k.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(Some(i), format!("k = {v} must be finite and >= 0")));
            }
        }
        let disp = Self {
            name,
            wavelengths_nm,
            n,
            k,
        };
        disp.check_band_coverage()?;
        Ok(disp)
    }

    fn check_band_coverage(&self) -> Result<(), MaterialError> {
        let (need_min, need_max) = SIM_BAND_NM;
        let have_min = self.min_wavelength_nm();
        let have_max = self.max_wavelength_nm();
        if have_min <= need_min && have_max >= need_max {
            return Ok(());
        }
        let mut missing = Vec::new();
        if have_min > need_min {
            missing.push(format!("{need_min}-{} nm", have_min.min(need_max)));
        }
        if have_max < need_max {
            missing.push(format!("{}-{need_max} nm", have_max.max(need_min)));
        }
        Err(MaterialError::BandNotCovered {
            name: self.name.clone(),
            have_min,
            have_max,
            need_min,
            need_max,
            missing: missing.join(" and "),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn n_values(&self) -> &[f64] {
        &self.n
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k
    }

    pub fn min_wavelength_nm(&self) -> f64 {
        self.wavelengths_nm[0]
    }

    pub fn max_wavelength_nm(&self) -> f64 {
        *self.wavelengths_nm.last().unwrap()
    }

    /// True when the extinction coefficient is zero at every tabulated row.
    pub fn is_lossless(&self) -> bool {
        self.k.iter().all(|&k| k == 0.0)
    }

    /// Complex refractive index `n + i k` at `lambda_nm`.
    ///
    /// Exact table values at grid points; linear interpolation of `n` and `k`
    /// independently between bracketing rows; an error outside the table.
    pub fn refractive_index_at(&self, lambda_nm: f64) -> Result<Complex64, MaterialError> {
        let w = &self.wavelengths_nm;
        if !lambda_nm.is_finite() || lambda_nm < w[0] || lambda_nm > *w.last().unwrap() {
            return Err(MaterialError::OutOfRange {
                name: self.name.clone(),
                lambda_nm,
                min_nm: w[0],
                max_nm: *w.last().unwrap(),
            });
        }
        match w.binary_search_by(|probe| probe.partial_cmp(&lambda_nm).unwrap()) {
            Ok(i) => Ok(Complex64::new(self.n[i], self.k[i])),
            Err(i) => {
                // w[i-1] < lambda < w[i]
                let (w0, w1) = (w[i - 1], w[i]);
                let t = (lambda_nm - w0) / (w1 - w0);
                let n = self.n[i - 1] + t * (self.n[i] - self.n[i - 1]);
                let k = self.k[i - 1] + t * (self.k[i] - self.k[i - 1]);
                Ok(Complex64::new(n, k))
            }
        }
    }

    /// Serialize to the dispersion CSV format.
    ///
    /// Values use Rust's shortest round-trip float formatting, so
    /// `load(save(d)) == d` field for field.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.wavelengths_nm.len() * 24 + 24);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.wavelengths_nm.len() {
            let _ = writeln!(out, "{},{},{}", self.wavelengths_nm[i], self.n[i], self.k[i]);
        }
        out
    }

    /// Write the table to `path` in the dispersion CSV format.
    pub fn save(&self, path: &Path) -> Result<(), MaterialError> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| MaterialError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Load every `*.csv` dispersion in a directory, keyed by material name.
pub fn load_materials_dir(
    dir: &Path,
) -> Result<std::collections::BTreeMap<String, SharedDispersion>, MaterialError> {
    let entries = std::fs::read_dir(dir).map_err(|source| MaterialError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = std::collections::BTreeMap::new();
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();
    for path in paths {
        let disp = load_dispersion(&path)?;
        out.insert(disp.name().to_string(), Arc::new(disp));
    }
    Ok(out)
}

/// Load and validate a dispersion CSV. The material name is the file stem.
pub fn load_dispersion(path: &Path) -> Result<MaterialDispersion, MaterialError> {
    let text = std::fs::read_to_string(path).map_err(|source| MaterialError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_dispersion_csv(&text, &name).map_err(|e| attach_path(e, path))
}

/// Parse dispersion CSV text. Row errors carry 1-based line numbers via the
/// `Invalid { row }` field (row r = line r + 2, accounting for the header).
pub fn parse_dispersion_csv(text: &str, name: &str) -> Result<MaterialDispersion, MaterialError> {
    let format = |line: usize, message: String| MaterialError::Format {
        path: PathBuf::new(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(format(
                1,
                format!("expected header \"{CSV_HEADER}\", found \"{}\"", header.trim()),
            ))
        }
        None => return Err(format(1, "empty file".into())),
    }
    let mut wavelengths = Vec::new();
    let mut n = Vec::new();
    let mut k = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format(
                line_no,
                format!("expected 3 comma-separated fields, found {}", fields.len()),
            ));
        }
        let parse = |field: &str, col: &str| -> Result<f64, MaterialError> {
            field
                .parse::<f64>()
                .map_err(|_| format(line_no, format!("cannot parse {col} value \"{field}\" as a number")))
        };
        wavelengths.push(parse(fields[0], "wavelength_nm")?);
        n.push(parse(fields[1], "n")?);
        k.push(parse(fields[2], "k")?);
    }
    match MaterialDispersion::new(name, wavelengths, n, k) {
        Ok(d) => Ok(d),
        // Re-anchor row-level validation failures to their source line.
        Err(MaterialError::Invalid {
            row: Some(r),
            message,
            ..
        }) => Err(format(r + 2, message)),
        Err(e) => Err(e),
    }
}

fn attach_path(err: MaterialError, path: &Path) -> MaterialError {
    match err {
        MaterialError::Format { line, message, .. } => MaterialError::Format {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    }
}

/// Synthetic dispersions used as fixtures and as stand-ins for the stack
/// presets. Real measured data is user-supplied; none of these model a
/// physical material beyond rough plausibility.
pub mod synthetic {
    use super::MaterialDispersion;
    use num_complex::Complex64;

    /// Photon energy in eV for a vacuum wavelength in nm.
    fn ev(lambda_nm: f64) -> f64 {
        1_239.841_984 / lambda_nm
    }

    fn grid(step_nm: f64) -> Vec<f64> {
        let mut w = Vec::new();
        let mut x = 250.0;
        while x < 900.0 + 1e-9 {
            w.push(x);
            x += step_nm;
        }
        w
    }

    fn from_epsilon(name: &str, step_nm: f64, eps: impl Fn(f64) -> Complex64) -> MaterialDispersion {
        let w = grid(step_nm);
        let mut n = Vec::with_capacity(w.len());
        let mut k = Vec::with_capacity(w.len());
        for &lambda in &w {
            let root = eps(lambda).sqrt();
            n.push(root.re);
            k.push(root.im.max(0.0));
        }
        MaterialDispersion::new(name, w, n, k).expect("synthetic dispersion is valid")
    }

    /// Constant index over 250-900 nm.
    pub fn constant(name: &str, n: f64, k: f64) -> MaterialDispersion {
        let w = vec![250.0, 575.0, 900.0];
        MaterialDispersion::new(name, w.clone(), vec![n; w.len()], vec![k; w.len()])
            .expect("constant dispersion is valid")
    }

    /// Linear ramp of n and k between the 250 nm and 900 nm endpoints.
    pub fn linear_ramp(name: &str, n_at_250: f64, n_at_900: f64, k_at_250: f64, k_at_900: f64) -> MaterialDispersion {
        let w = grid(10.0);
        let span = 900.0 - 250.0;
        let n = w.iter().map(|&x| n_at_250 + (x - 250.0) / span * (n_at_900 - n_at_250)).collect();
        let k = w.iter().map(|&x| k_at_250 + (x - 250.0) / span * (k_at_900 - k_at_250)).collect();
        MaterialDispersion::new(name, w, n, k).expect("ramp dispersion is valid")
    }

    /// Single Lorentz oscillator: eps(E) = eps_b + f e0^2 / (e0^2 - E^2 - i g E).
    pub fn lorentz_absorber(name: &str, eps_b: f64, strength: f64, e0_ev: f64, gamma_ev: f64) -> MaterialDispersion {
        from_epsilon(name, 2.0, |lambda| {
            let e = ev(lambda);
            let denom = Complex64::new(e0_ev * e0_ev - e * e, -gamma_ev * e);
            Complex64::new(eps_b, 0.0) + strength * e0_ev * e0_ev / denom
        })
    }

    /// Drude metal: eps(E) = eps_inf - wp^2 / (E^2 + i g E).
    pub fn drude_metal(name: &str, eps_inf: f64, plasma_ev: f64, gamma_ev: f64) -> MaterialDispersion {
        from_epsilon(name, 2.0, |lambda| {
            let e = ev(lambda);
            let denom = Complex64::new(e * e, gamma_ev * e);
            Complex64::new(eps_inf, 0.0) - plasma_ev * plasma_ev / denom
        })
    }

    /// The full set of named stand-in materials covering both stack presets.
    pub fn preset_materials() -> Vec<MaterialDispersion> {
        vec![
            constant("air", 1.0, 0.0),
            constant("glass", 1.5, 0.0),
            linear_ramp("ito", 2.1, 1.75, 0.04, 0.001),
            constant("nio", 2.3, 0.005),
            constant("sno2", 2.0, 0.0),
            constant("lif", 1.39, 0.0),
            lorentz_absorber("perovskite", 4.1, 1.4, 2.5, 0.4),
            lorentz_absorber("perovhmv2", 4.0, 1.3, 2.6, 0.35),
            lorentz_absorber("c60hm", 3.2, 0.8, 3.4, 0.45),
            linear_ramp("spiro_ometad", 1.85, 1.72, 0.02, 0.0),
            drude_metal("gold", 9.5, 9.0, 0.07),
        ]
    }
}
