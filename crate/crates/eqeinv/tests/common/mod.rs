//! Shared test-support code: independent oracles and fixture builders used
//! by the integration and acceptance suites.

#![allow(dead_code)]

pub mod gradcheck;
pub mod optics_oracle;

use eqeinv::materials::{synthetic, SharedDispersion};
use eqeinv::sampling::ThicknessBox;
use eqeinv::tmm::{Layer, LayerStack};
use std::collections::BTreeMap;
use std::sync::Arc;

/// All synthetic preset materials, keyed by name.
pub fn preset_materials() -> BTreeMap<String, SharedDispersion> {
    synthetic::preset_materials()
        .into_iter()
        .map(|d| (d.name().to_string(), Arc::new(d) as SharedDispersion))
        .collect()
}

/// Transparent 7-layer stack at the given thicknesses (dual-side).
pub fn transparent_stack(thicknesses_nm: &[f64]) -> LayerStack {
    let materials = preset_materials();
    let layer_names = ["ito", "nio", "perovhmv2", "c60hm", "sno2", "ito", "lif"];
    let layers = layer_names
        .iter()
        .zip(thicknesses_nm)
        .map(|(name, &d)| Layer::new(Arc::clone(&materials[*name]), d))
        .collect();
    LayerStack::new(
        layers,
        Arc::clone(&materials["air"]),
        Arc::clone(&materials["air"]),
        2,
        true,
    )
    .expect("preset stack is valid")
}

/// Box midpoint: the canonical deterministic in-box thickness vector.
pub fn box_midpoint(box_: &ThicknessBox) -> Vec<f64> {
    box_.lower_nm()
        .iter()
        .zip(box_.upper_nm())
        .map(|(&lo, &hi)| 0.5 * (lo + hi))
        .collect()
}

/// Generate a Sobol transparent-preset dataset into `dir` and load all
/// three splits.
pub fn desk_dataset(
    dir: &std::path::Path,
    n_total: usize,
    fractions: (f64, f64, f64),
    seed_or_skip: u64,
) -> (
    eqeinv::dataset::DatasetManifest,
    eqeinv::dataset::SplitData,
    eqeinv::dataset::SplitData,
    eqeinv::dataset::SplitData,
) {
    use eqeinv::dataset::{generate, load_split, GenerateConfig};
    let box_ = ThicknessBox::transparent();
    let template = transparent_stack(&box_midpoint(&box_));
    let cfg = GenerateConfig {
        method: eqeinv::sampling::SampleMethod::Sobol,
        seed_or_skip,
        n_total,
        split_fractions: fractions,
        width: 37,
        height: 28,
        grid: eqeinv::tmm::default_wavelength_grid(),
    };
    let manifest = generate(&box_, &template, &cfg, dir).expect("dataset generation failed");
    let train = load_split(dir, &manifest, "train").unwrap();
    let val = load_split(dir, &manifest, "val").unwrap();
    let test = load_split(dir, &manifest, "test").unwrap();
    (manifest, train, val, test)
}
