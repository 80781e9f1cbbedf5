//! Thickness-vector sampling inside constraint boxes.
//!
//! Four generators fill the unit hypercube — seeded uniform random, Halton,
//! Sobol (Gray-code, Joe-Kuo direction numbers), and Latin hypercube — and
//! an affine map scales unit points into a per-layer thickness box. All four
//! are bitwise deterministic for a given `(method, seed_or_skip, n, dim)`,
//! on any platform, so sample sets can be regenerated instead of stored.
//!
//! ```
//! use eqeinv::sampling::{sample_unit, SampleMethod, SampleSet, ThicknessBox};
//!
//! let first = sample_unit(SampleMethod::Halton, 2, 1, 0)?;
//! assert_eq!(first[0], vec![0.5, 1.0 / 3.0]); // radical inverses in bases 2 and 3
//!
//! let box_ = ThicknessBox::transparent();
//! let samples = SampleSet::generate(SampleMethod::Sobol, &box_, 256, 1)?;
//! assert!(samples.points_nm.iter().all(|p| box_.contains(p)));
//! # Ok::<(), eqeinv::sampling::SamplingError>(())
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("{method} sampling supports at most {max} dimensions, requested {dim}")]
    DimTooLarge {
        method: SampleMethod,
        dim: usize,
        max: usize,
    },
    #[error("invalid sampling request: {0}")]
    BadRequest(String),
    #[error("point dimension {point_dim} does not match box dimension {box_dim}")]
    DimMismatch { point_dim: usize, box_dim: usize },
    #[error("invalid thickness box: {0}")]
    BadBox(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Unit-cube generator choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Random,
    Halton,
    Sobol,
    Lhs,
}

impl fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SampleMethod::Random => "random",
            SampleMethod::Halton => "halton",
            SampleMethod::Sobol => "sobol",
            SampleMethod::Lhs => "lhs",
        };
        write!(f, "{s}")
    }
}

impl FromStr for SampleMethod {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(SampleMethod::Random),
            "halton" => Ok(SampleMethod::Halton),
            "sobol" => Ok(SampleMethod::Sobol),
            "lhs" | "latin" | "latin_hypercube" => Ok(SampleMethod::Lhs),
            other => Err(SamplingError::BadRequest(format!(
                "unknown sampling method \"{other}\" (expected random, halton, sobol, or lhs)"
            ))),
        }
    }
}

/// Per-layer thickness bounds in nm.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessBox {
    names: Vec<String>,
    lower_nm: Vec<f64>,
    upper_nm: Vec<f64>,
}

impl ThicknessBox {
    pub fn new(
        names: Vec<String>,
        lower_nm: Vec<f64>,
        upper_nm: Vec<f64>,
    ) -> Result<Self, SamplingError> {
        if names.is_empty() || names.len() != lower_nm.len() || names.len() != upper_nm.len() {
            return Err(SamplingError::BadBox(format!(
                "need equal nonzero counts of names/lower/upper, got {}/{}/{}",
                names.len(),
                lower_nm.len(),
                upper_nm.len()
            )));
        }
        for i in 0..names.len() {
            let (lo, hi) = (lower_nm[i], upper_nm[i]);
            if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || lo >= hi {
                return Err(SamplingError::BadBox(format!(
                    "layer \"{}\" needs 0 < lower < upper, got [{lo}, {hi}] nm",
                    names[i]
                )));
            }
        }
        Ok(Self {
            names,
            lower_nm,
            upper_nm,
        })
    }

    /// 7-layer transparent stack bounds:
    /// ITO 54-350, NiO 5-50, PerovHMv2 60-965, C60HM 5-50, SnO2 5-50,
    /// ITO 54-350, LiF 50-300 nm. The bottom ITO shares the top ITO range.
    pub fn transparent() -> Self {
        Self::new(
            ["ito_top", "nio", "perovhmv2", "c60hm", "sno2", "ito_bottom", "lif"]
                .map(String::from)
                .to_vec(),
            vec![54.0, 5.0, 60.0, 5.0, 5.0, 54.0, 50.0],
            vec![350.0, 50.0, 965.0, 50.0, 50.0, 350.0, 300.0],
        )
        .expect("preset box is valid")
    }

    /// 5-layer opaque stack bounds:
    /// ITO 54-350, SnO2 10-100, Perovskite 60-965, Spiro-OMeTAD 200-370,
    /// Gold 7-80 nm.
    pub fn opaque() -> Self {
        Self::new(
            ["ito", "sno2", "perovskite", "spiro_ometad", "gold"]
                .map(String::from)
                .to_vec(),
            vec![54.0, 10.0, 60.0, 200.0, 7.0],
            vec![350.0, 100.0, 965.0, 370.0, 80.0],
        )
        .expect("preset box is valid")
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower_nm(&self) -> &[f64] {
        &self.lower_nm
    }

    pub fn upper_nm(&self) -> &[f64] {
        &self.upper_nm
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower_nm.iter().zip(&self.upper_nm))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }
}

/// A batch of thickness vectors plus the metadata needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub method: SampleMethod,
    pub seed_or_skip: u64,
    pub points_nm: Vec<Vec<f64>>,
    pub box_: ThicknessBox,
}

impl SampleSet {
    /// Draw `n` unit points and scale them into `box_`.
    pub fn generate(
        method: SampleMethod,
        box_: &ThicknessBox,
        n: usize,
        seed_or_skip: u64,
    ) -> Result<Self, SamplingError> {
        let unit = sample_unit(method, box_.dim(), n, seed_or_skip)?;
        let points_nm = scale_to_box(&unit, box_)?;
        Ok(Self {
            method,
            seed_or_skip,
            points_nm,
            box_: box_.clone(),
        })
    }

    /// Write points as CSV (header = layer names) plus a `.meta` sidecar
    /// recording method, seed/skip, count, and bounds.
    pub fn save(&self, csv_path: &Path) -> Result<(), SamplingError> {
        let io_err = |source| SamplingError::Io {
            path: csv_path.display().to_string(),
            source,
        };
        let mut text = self.box_.names.join(",");
        text.push('\n');
        for point in &self.points_nm {
            let row: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(csv_path, text).map_err(io_err)?;

        let meta_path = csv_path.with_extension("meta");
        let join = |values: &[f64]| {
            values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let meta = format!(
            "method = {}\nseed_or_skip = {}\nn = {}\nnames = {}\nlower_nm = {}\nupper_nm = {}\n",
            self.method,
            self.seed_or_skip,
            self.points_nm.len(),
            self.box_.names.join(","),
            join(&self.box_.lower_nm),
            join(&self.box_.upper_nm),
        );
        std::fs::write(&meta_path, meta).map_err(|source| SamplingError::Io {
            path: meta_path.display().to_string(),
            source,
        })
    }
}

/// Affine map of unit-cube points into the box: `lower + u * (upper - lower)`.
pub fn scale_to_box(
    unit_points: &[Vec<f64>],
    box_: &ThicknessBox,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    unit_points
        .iter()
        .map(|u| {
            if u.len() != box_.dim() {
                return Err(SamplingError::DimMismatch {
                    point_dim: u.len(),
                    box_dim: box_.dim(),
                });
            }
            Ok(u.iter()
                .zip(box_.lower_nm.iter().zip(&box_.upper_nm))
                .map(|(&x, (&lo, &hi))| lo + x * (hi - lo))
                .collect())
        })
        .collect()
}

/// Draw `n` points in `[0, 1)^dim`.
///
/// `seed_or_skip` seeds the PRNG for `random` and `lhs`, and skips leading
/// sequence elements for `halton` and `sobol` (Sobol index 0 is the all-zeros
/// point, so a skip of 1 starts at the conventional first point).
pub fn sample_unit(
    method: SampleMethod,
    dim: usize,
    n: usize,
    seed_or_skip: u64,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if dim == 0 || n == 0 {
        return Err(SamplingError::BadRequest(format!(
            "need dim >= 1 and n >= 1, got dim = {dim}, n = {n}"
        )));
    }
    match method {
        SampleMethod::Random => Ok(random_unit(dim, n, seed_or_skip)),
        SampleMethod::Halton => halton_unit(dim, n, seed_or_skip),
        SampleMethod::Sobol => sobol_unit(dim, n, seed_or_skip),
        SampleMethod::Lhs => Ok(lhs_unit(dim, n, seed_or_skip)),
    }
}

fn random_unit(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// One point per axis stratum in every dimension, stratum order shuffled and
/// the in-stratum offset jittered, both from the seeded stream.
fn lhs_unit(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, point) in points.iter_mut().enumerate() {
            point[d] = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

const HALTON_PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

fn halton_unit(dim: usize, n: usize, skip: u64) -> Result<Vec<Vec<f64>>, SamplingError> {
    if dim > HALTON_PRIMES.len() {
        return Err(SamplingError::DimTooLarge {
            method: SampleMethod::Halton,
            dim,
            max: HALTON_PRIMES.len(),
        });
    }
    Ok((0..n as u64)
        .map(|i| {
            let index = skip + i + 1;
            HALTON_PRIMES[..dim]
                .iter()
                .map(|&base| radical_inverse(index, base))
                .collect()
        })
        .collect())
}

/// Van der Corput radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

const SOBOL_BITS: u32 = 32;

/// Primitive-polynomial parameters `(s, a, m)` for Sobol dimensions 2..=13,
/// from the Joe-Kuo "new-joe-kuo-6.21201" table. Dimension 1 is the base-2
/// radical inverse and needs no row.
const SOBOL_JOE_KUO: [(u32, u32, &[u32]); 12] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
];

/// Maximum Sobol dimensionality supported by the embedded table.
pub const SOBOL_MAX_DIM: usize = SOBOL_JOE_KUO.len() + 1;

/// 32-bit direction numbers for one dimension (0-based).
fn sobol_direction_numbers(dimension: usize) -> Vec<u32> {
    let bits = SOBOL_BITS as usize;
    let mut v = vec![0u32; bits];
    if dimension == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = SOBOL_JOE_KUO[dimension - 1];
    let s = s as usize;
    for k in 0..bits.min(s) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..bits {
        let mut value = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                value ^= v[k - j];
            }
        }
        v[k] = value;
    }
    v
}

fn sobol_unit(dim: usize, n: usize, skip: u64) -> Result<Vec<Vec<f64>>, SamplingError> {
    if dim > SOBOL_MAX_DIM {
        return Err(SamplingError::DimTooLarge {
            method: SampleMethod::Sobol,
            dim,
            max: SOBOL_MAX_DIM,
        });
    }
    if skip.checked_add(n as u64).is_none() || skip + n as u64 > (1u64 << SOBOL_BITS) {
        return Err(SamplingError::BadRequest(format!(
            "sobol supports at most 2^{SOBOL_BITS} points; skip {skip} + n {n} exceeds that"
        )));
    }
    let directions: Vec<Vec<u32>> = (0..dim).map(sobol_direction_numbers).collect();

    // State at `skip` via the Gray code of the index, then one XOR per point.
    let gray = skip ^ (skip >> 1);
    let mut state: Vec<u32> = directions
        .iter()
        .map(|v| {
            let mut x = 0u32;
            for (bit, &dir) in v.iter().enumerate() {
                if (gray >> bit) & 1 == 1 {
                    x ^= dir;
                }
            }
            x
        })
        .collect();

    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    let mut points = Vec::with_capacity(n);
    for i in 0..n as u64 {
        points.push(state.iter().map(|&x| x as f64 * scale).collect());
        let change = (skip + i).trailing_ones() as usize;
        for (x, v) in state.iter_mut().zip(&directions) {
            *x ^= v[change];
        }
    }
    Ok(points)
}
