//! Coherent transfer-matrix optics for planar layer stacks at normal incidence.
//!
//! Solves reflectance, transmittance and per-layer absorptance for a stack of
//! homogeneous thin films between two semi-infinite lossless media, and
//! derives EQE spectra as the absorptance of the photo-active layer (unity
//! internal quantum efficiency).
//!
//! The solver uses the recursive effective-reflection form of the transfer
//! matrix: interface Fresnel coefficients are folded from the exit side
//! toward the incident side, and layer fields are then rebuilt front to back.
//! Every propagation factor that appears is `exp(i delta)` with
//! `Im(delta) >= 0`, so absorbing layers only ever produce decaying
//! exponentials and thick lossy stacks cannot overflow. Any non-finite
//! intermediate is reported as an error, never propagated.
//!
//! A quarter-wave coating whose index is the geometric mean of its
//! surroundings cancels reflection at the design wavelength:
//!
//! ```
//! use eqeinv::materials::synthetic;
//! use eqeinv::tmm::{solve_stack, Direction, Layer, LayerStack};
//! use std::sync::Arc;
//!
//! let lambda = 550.0;
//! let air = Arc::new(synthetic::constant("air", 1.0, 0.0));
//! let coating = Arc::new(synthetic::constant("coating", 1.5, 0.0));
//! let substrate = Arc::new(synthetic::constant("substrate", 2.25, 0.0));
//! let stack = LayerStack::new(
//!     vec![Layer::new(coating, lambda / (4.0 * 1.5))],
//!     air,
//!     substrate,
//!     0,
//!     false,
//! )?;
//! let response = solve_stack(&stack, lambda, Direction::Forward)?;
//! assert!(response.reflectance < 1e-10); // quarter-wave antireflection
//! let total: f64 = response.reflectance
//!     + response.transmittance
//!     + response.absorptance_per_layer.iter().sum::<f64>();
//! assert!((total - 1.0).abs() < 1e-9);
//! # Ok::<(), eqeinv::tmm::TmmError>(())
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::materials::{MaterialError, SharedDispersion, SIM_BAND_NM};

/// Bound on the energy-conservation residual `|R + T + sum(A) - 1|`.
pub const ENERGY_TOL: f64 = 1e-9;

/// Slack allowed on raw response components before clamping into `[0, 1]`.
pub const COMPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TmmError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("invalid stack: {0}")]
    InvalidStack(String),
    #[error("non-finite value while solving at {lambda_nm} nm ({context}); inputs are numerically pathological")]
    NonFinite { lambda_nm: f64, context: String },
    #[error("energy conservation violated at {lambda_nm} nm: |R + T + sum(A) - 1| = {residual:e}")]
    EnergyViolation { lambda_nm: f64, residual: f64 },
    #[error("stack file {path}:{line}: {message}")]
    StackFile {
        path: String,
        line: usize,
        message: String,
    },
}

/// One film in a stack: a dispersion table plus a physical thickness.
#[derive(Debug, Clone)]
pub struct Layer {
    pub material: SharedDispersion,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(material: SharedDispersion, thickness_nm: f64) -> Self {
        Self {
            material,
            thickness_nm,
        }
    }
}

/// Direction of illumination. `Reverse` solves the mirrored stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Forward => write!(f, "forward"),
            Direction::Reverse => write!(f, "reverse"),
        }
    }
}

/// Ordered film stack between two semi-infinite ambient media.
///
/// "Forward" illumination enters through the first listed layer. The active
/// layer marks which film's absorptance defines the EQE.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<Layer>,
    incident: SharedDispersion,
    exit: SharedDispersion,
    active_index: usize,
    dual_side: bool,
}

impl LayerStack {
    pub fn new(
        layers: Vec<Layer>,
        incident: SharedDispersion,
        exit: SharedDispersion,
        active_index: usize,
        dual_side: bool,
    ) -> Result<Self, TmmError> {
        if layers.is_empty() {
            return Err(TmmError::InvalidStack("stack needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            let d = layer.thickness_nm;
            if !d.is_finite() || d <= 0.0 {
                return Err(TmmError::InvalidStack(format!(
                    "layer {i} (\"{}\") has thickness {d} nm; thicknesses must be finite and > 0",
                    layer.material.name()
                )));
            }
        }
        if active_index >= layers.len() {
            return Err(TmmError::InvalidStack(format!(
                "active layer index {active_index} out of bounds for {} layers",
                layers.len()
            )));
        }
        for (side, medium) in [("incident", &incident), ("exit", &exit)] {
            if !ambient_is_lossless(medium) {
                return Err(TmmError::InvalidStack(format!(
                    "{side} medium \"{}\" must be lossless (k = 0) across {}-{} nm",
                    medium.name(),
                    SIM_BAND_NM.0,
                    SIM_BAND_NM.1
                )));
            }
        }
        Ok(Self {
            layers,
            incident,
            exit,
            active_index,
            dual_side,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn thicknesses_nm(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.thickness_nm).collect()
    }

    pub fn incident_medium(&self) -> &SharedDispersion {
        &self.incident
    }

    pub fn exit_medium(&self) -> &SharedDispersion {
        &self.exit
    }

    pub fn active_index(&self) -> usize {
        self.active_index
    }

    pub fn dual_side(&self) -> bool {
        self.dual_side
    }

    /// Same stack with new thicknesses, one per layer.
    pub fn with_thicknesses(&self, thicknesses_nm: &[f64]) -> Result<Self, TmmError> {
        if thicknesses_nm.len() != self.layers.len() {
            return Err(TmmError::InvalidStack(format!(
                "{} thicknesses supplied for {} layers",
                thicknesses_nm.len(),
                self.layers.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .zip(thicknesses_nm)
            .map(|(l, &d)| Layer::new(Arc::clone(&l.material), d))
            .collect();
        Self::new(
            layers,
            Arc::clone(&self.incident),
            Arc::clone(&self.exit),
            self.active_index,
            self.dual_side,
        )
    }

    /// The stack as seen by light arriving from the exit side.
    fn mirrored(&self) -> Self {
        let mut layers = self.layers.clone();
        layers.reverse();
        Self {
            active_index: self.layers.len() - 1 - self.active_index,
            layers,
            incident: Arc::clone(&self.exit),
            exit: Arc::clone(&self.incident),
            dual_side: self.dual_side,
        }
    }
}

/// `k = 0` across the simulation band for a piecewise-linear table: zero at
/// both band edges and at every node strictly inside the band.
fn ambient_is_lossless(medium: &SharedDispersion) -> bool {
    let (lo, hi) = SIM_BAND_NM;
    for edge in [lo, hi] {
        match medium.refractive_index_at(edge) {
            Ok(idx) if idx.im == 0.0 => {}
            _ => return false,
        }
    }
    medium
        .wavelengths_nm()
        .iter()
        .zip(medium.k_values())
        .all(|(&w, &k)| w <= lo || w >= hi || k == 0.0)
}

/// Power balance of one stack at one wavelength. All components are clamped
/// into `[0, 1]` after a raw-value sanity check; for `Direction::Reverse`
/// the absorptance vector is re-indexed to the original layer order.
#[derive(Debug, Clone)]
pub struct OpticalResponse {
    pub wavelength_nm: f64,
    pub reflectance: f64,
    pub transmittance: f64,
    pub absorptance_per_layer: Vec<f64>,
}

/// EQE sampled on a wavelength grid over the simulation band.
#[derive(Debug, Clone, PartialEq)]
pub struct EqeCurve {
    wavelengths_nm: Vec<f64>,
    forward: Vec<f64>,
    reverse: Option<Vec<f64>>,
}

impl EqeCurve {
    pub fn new(
        wavelengths_nm: Vec<f64>,
        forward: Vec<f64>,
        reverse: Option<Vec<f64>>,
    ) -> Result<Self, TmmError> {
        let invalid = |msg: String| TmmError::InvalidStack(msg);
        let w = &wavelengths_nm;
        if w.len() < 2 {
            return Err(invalid("EQE grid needs at least 2 wavelengths".into()));
        }
        if w[0] != SIM_BAND_NM.0 || *w.last().unwrap() != SIM_BAND_NM.1 {
            return Err(invalid(format!(
                "EQE grid must start at {} nm and end at {} nm (got {} and {})",
                SIM_BAND_NM.0,
                SIM_BAND_NM.1,
                w[0],
                w.last().unwrap()
            )));
        }
        if w.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid("EQE grid must be strictly increasing".into()));
        }
        for values in std::iter::once(&forward).chain(reverse.iter()) {
            if values.len() != w.len() {
                return Err(invalid("EQE values and grid lengths differ".into()));
            }
            if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(invalid("EQE values must lie in [0, 1]".into()));
            }
        }
        Ok(Self {
            wavelengths_nm,
            forward,
            reverse,
        })
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn forward(&self) -> &[f64] {
        &self.forward
    }

    pub fn reverse(&self) -> Option<&[f64]> {
        self.reverse.as_deref()
    }

    /// Number of curves carried (1 or 2); matches raster channel count.
    pub fn channel_count(&self) -> usize {
         1 + usize::from(self.reverse.is_some())
    }
}

/// Default simulation grid: 300-800 nm inclusive in 5 nm steps (101 points).
pub fn default_wavelength_grid() -> Vec<f64> {
    (0..=100).map(|i| 300.0 + 5.0 * i as f64).collect()
}

struct StackOptics {
    /// Complex index per slab, 0 = incident medium, last = exit medium.
    indices: Vec<Complex64>,
    /// Phase thickness per finite layer.
    deltas: Vec<Complex64>,
}

fn stack_optics(stack: &LayerStack, lambda_nm: f64) -> Result<StackOptics, TmmError> {
    let mut indices = Vec::with_capacity(stack.layers.len() + 2);
    indices.push(stack.incident.refractive_index_at(lambda_nm)?);
    for layer in &stack.layers {
        indices.push(layer.material.refractive_index_at(lambda_nm)?);
    }
    indices.push(stack.exit.refractive_index_at(lambda_nm)?);
    let deltas = stack
        .layers
        .iter()
        .enumerate()
        .map(|(j, layer)| indices[j + 1] * (2.0 * PI * layer.thickness_nm / lambda_nm))
        .collect();
    Ok(StackOptics { indices, deltas })
}

/// Net time-averaged power flux through a plane with local forward/backward
/// field amplitudes `ef`, `eb` in a medium of index `n`, normalized later by
/// the incident-side flux.
fn flux(n: Complex64, ef: Complex64, eb: Complex64) -> f64 {
    (n * (ef + eb).conj() * (ef - eb)).re
}

/// Solve one wavelength. Reverse illumination solves the mirrored stack and
/// mirrors the absorptance vector back to original layer order.
pub fn solve_stack(
    stack: &LayerStack,
    lambda_nm: f64,
    direction: Direction,
) -> Result<OpticalResponse, TmmError> {
    match direction {
        Direction::Forward => solve_forward(stack, lambda_nm),
        Direction::Reverse => {
            let mut response = solve_forward(&stack.mirrored(), lambda_nm)?;
            response.absorptance_per_layer.reverse();
            Ok(response)
        }
    }
}

fn solve_forward(stack: &LayerStack, lambda_nm: f64) -> Result<OpticalResponse, TmmError> {
    let StackOptics { indices, deltas } = stack_optics(stack, lambda_nm)?;
    let n_layers = stack.layers.len();
    let nonfinite = |context: &str| TmmError::NonFinite {
        lambda_nm,
        context: context.to_string(),
    };

    // Fresnel coefficients at interface j (slab j | slab j+1), j = 0..=n.
    let mut refl = Vec::with_capacity(n_layers + 1);
    let mut trans = Vec::with_capacity(n_layers + 1);
    for j in 0..=n_layers {
        let (a, b) = (indices[j], indices[j + 1]);
        refl.push((a - b) / (a + b));
        trans.push(2.0 * a / (a + b));
    }

    // One-pass propagation factors; Im(delta) >= 0 keeps |phase| <= 1.
    let phase: Vec<Complex64> = deltas.iter().map(|d| (Complex64::I * d).exp()).collect();
    if phase.iter().any(|p| !p.is_finite()) {
        return Err(nonfinite("layer propagation factor"));
    }

    // Effective reflection at interface j seen from slab j, folded from the
    // exit side. Index j runs over interfaces 0..=n_layers.
    let mut eff = vec![Complex64::ZERO; n_layers + 1];
    eff[n_layers] = refl[n_layers];
    for j in (0..n_layers).rev() {
        let round_trip = eff[j + 1] * phase[j] * phase[j];
        eff[j] = (refl[j] + round_trip) / (1.0 + refl[j] * round_trip);
        if !eff[j].is_finite() {
            return Err(nonfinite("effective reflection recursion"));
        }
    }
    let r_total = eff[0];

    // Forward amplitude at the front of each layer, then on into the exit
    // medium; backward amplitudes follow from the effective reflections.
    let mut v_front = Vec::with_capacity(n_layers);
    let mut incoming = Complex64::ONE; // forward amplitude arriving at interface j
    for j in 0..n_layers {
        let cavity = 1.0 + refl[j] * eff[j + 1] * phase[j] * phase[j];
        let v = incoming * trans[j] / cavity;
        if !v.is_finite() {
            return Err(nonfinite("layer field amplitude"));
        }
        v_front.push(v);
        incoming = v * phase[j];
    }
    let t_total = incoming * trans[n_layers];
    if !r_total.is_finite() || !t_total.is_finite() {
        return Err(nonfinite("total amplitudes"));
    }

    let n_in = indices[0].re;
    let reflectance = r_total.norm_sqr();
    let transmittance = indices[n_layers + 1].re * t_total.norm_sqr() / n_in;

    let mut absorptance = Vec::with_capacity(n_layers);
    for j in 0..n_layers {
        let n = indices[j + 1];
        if n.im == 0.0 {
            // Lossless layers absorb exactly nothing; skip the flux
            // difference so roundoff cannot leak in.
            absorptance.push(0.0);
            continue;
        }
        let ef_front = v_front[j];
        let eb_front = v_front[j] * eff[j + 1] * phase[j] * phase[j];
        let ef_rear = v_front[j] * phase[j];
        let eb_rear = ef_rear * eff[j + 1];
        let a = (flux(n, ef_front, eb_front) - flux(n, ef_rear, eb_rear)) / n_in;
        if !a.is_finite() {
            return Err(nonfinite("layer absorptance"));
        }
        absorptance.push(a);
    }

    let sum: f64 = absorptance.iter().sum();
    let residual = (reflectance + transmittance + sum - 1.0).abs();
    if residual > ENERGY_TOL {
        return Err(TmmError::EnergyViolation { lambda_nm, residual });
    }
    let clamp = |v: f64, what: &str| -> Result<f64, TmmError> {
        if !(-COMPONENT_TOL..=1.0 + COMPONENT_TOL).contains(&v) {
            return Err(TmmError::NonFinite {
                lambda_nm,
                context: format!("{what} = {v} outside [0, 1] beyond tolerance"),
            });
        }
        Ok(v.clamp(0.0, 1.0))
    };
    Ok(OpticalResponse {
        wavelength_nm: lambda_nm,
        reflectance: clamp(reflectance, "reflectance")?,
        transmittance: clamp(transmittance, "transmittance")?,
        absorptance_per_layer: absorptance
            .into_iter()
            .map(|a| clamp(a, "absorptance"))
            .collect::<Result<_, _>>()?,
    })
}

/// EQE over a wavelength grid: active-layer absorptance per wavelength,
/// forward always, reverse when `dual_side` is requested. Wavelengths solve
/// in parallel; results are ordered by grid index, so output is
/// deterministic regardless of thread count.
pub fn compute_eqe(stack: &LayerStack, grid: &[f64], dual_side: bool) -> Result<EqeCurve, TmmError> {
    let active = stack.active_index;
    let forward: Vec<f64> = grid
        .par_iter()
        .map(|&lambda| solve_stack(stack, lambda, Direction::Forward).map(|r| r.absorptance_per_layer[active]))
        .collect::<Result<_, _>>()?;
    let reverse: Option<Vec<f64>> = if dual_side {
        Some(
            grid.par_iter()
                .map(|&lambda| {
                    solve_stack(stack, lambda, Direction::Reverse).map(|r| r.absorptance_per_layer[active])
                })
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    EqeCurve::new(grid.to_vec(), forward, reverse)
}

/// EQE for the stack's own dual-side setting on the default grid.
pub fn compute_default_eqe(stack: &LayerStack) -> Result<EqeCurve, TmmError> {
    compute_eqe(stack, &default_wavelength_grid(), stack.dual_side())
}

/// Parse a stack description file.
///
/// Line-oriented key = value text; `#` starts a comment. Keys:
///
/// ```text
/// incident  = air            # ambient medium on the illuminated side (default air)
/// exit      = air            # ambient medium behind the stack (default air)
/// active    = perovhmv2      # material name (must be unique) or 0-based layer index
/// dual_side = true           # solve reverse illumination too
/// layer     = ito 120        # material name + thickness in nm, one line per layer,
/// layer     = perovhmv2 500  # listed from the illuminated side inward
/// ```
///
/// Material names resolve through `lookup`, typically backed by a directory
/// of dispersion CSVs.
pub fn parse_stack_file(
    path: &Path,
    text: &str,
    lookup: &dyn Fn(&str) -> Option<SharedDispersion>,
) -> Result<LayerStack, TmmError> {
    let path_str = path.display().to_string();
    let err = |line: usize, message: String| TmmError::StackFile {
        path: path_str.clone(),
        line,
        message,
    };
    let resolve = |name: &str, line: usize| {
        lookup(name).ok_or_else(|| err(line, format!("unknown material \"{name}\"")))
    };

    let mut incident = None;
    let mut exit = None;
    let mut active_spec: Option<(String, usize)> = None;
    let mut dual_side = false;
    let mut layers: Vec<(Layer, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, "expected key = value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "incident" => incident = Some(resolve(value, line_no)?),
            "exit" => exit = Some(resolve(value, line_no)?),
            "active" => active_spec = Some((value.to_string(), line_no)),
            "dual_side" => {
                dual_side = value
                    .parse::<bool>()
                    .map_err(|_| err(line_no, format!("dual_side must be true or false, got \"{value}\"")))?
            }
            "layer" => {
                let mut parts = value.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| err(line_no, "layer needs a material name and a thickness".into()))?;
                let thickness = parts
                    .next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| err(line_no, format!("layer \"{name}\" needs a numeric thickness in nm")))?;
                if parts.next().is_some() {
                    return Err(err(line_no, "layer takes exactly: material thickness_nm".into()));
                }
                layers.push((Layer::new(resolve(name, line_no)?, thickness), line_no));
            }
            other => return Err(err(line_no, format!("unknown key \"{other}\""))),
        }
    }

    let air = |line| resolve("air", line);
    let incident = match incident {
        Some(m) => m,
        None => air(0).map_err(|_| err(0, "no incident medium given and no \"air\" material available".into()))?,
    };
    let exit = match exit {
        Some(m) => m,
        None => air(0).map_err(|_| err(0, "no exit medium given and no \"air\" material available".into()))?,
    };
    let (active_value, active_line) =
        active_spec.ok_or_else(|| err(0, "missing required key \"active\"".into()))?;
    let active_index = match active_value.parse::<usize>() {
        Ok(i) => i,
        Err(_) => {
            let matches: Vec<usize> = layers
                .iter()
                .enumerate()
                .filter(|(_, (l, _))| l.material.name() == active_value)
                .map(|(i, _)| i)
                .collect();
            match matches.as_slice() {
                [i] => *i,
                [] => return Err(err(active_line, format!("no layer uses material \"{active_value}\""))),
                _ => {
                    return Err(err(
                        active_line,
                        format!("material \"{active_value}\" appears in several layers; use a 0-based index"),
                    ))
                }
            }
        }
    };
    LayerStack::new(
        layers.into_iter().map(|(l, _)| l).collect(),
        incident,
        exit,
        active_index,
        dual_side,
    )
}

/// Load a stack description from disk, resolving materials via `lookup`.
pub fn load_stack_file(
    path: &Path,
    lookup: &dyn Fn(&str) -> Option<SharedDispersion>,
) -> Result<LayerStack, TmmError> {
    let text = std::fs::read_to_string(path).map_err(|e| TmmError::StackFile {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_stack_file(path, &text, lookup)
}
