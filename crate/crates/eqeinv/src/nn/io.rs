//! Model persistence.
//!
//! Layout: magic `PSCNN1\0`, a length-prefixed UTF-8 config block (network
//! geometry, architecture, and the thickness box for denormalization), every
//! state tensor as little-endian f64 in declaration order, and a trailing
//! CRC32 of all preceding bytes. Training history is not part of the file;
//! the trainer's caller persists it separately.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Architecture, Network, NetworkConfig, NnError, PoolKind, TrainedModel};
use crate::sampling::ThicknessBox;

pub const MODEL_MAGIC: &[u8] = b"PSCNN1\0";

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<(), NnError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    let config_text = config_to_text(&model.network.config, &model.box_);
    bytes.extend_from_slice(&(config_text.len() as u32).to_le_bytes());
    bytes.extend_from_slice(config_text.as_bytes());
    for layer in model.network.layers() {
        for tensor in layer.state_tensors_ref() {
            for &v in tensor {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let checksum = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    std::fs::write(path, bytes).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, NnError> {
    let bytes = std::fs::read(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |message: String| NnError::ModelFormat {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < MODEL_MAGIC.len() + 8 || !bytes.starts_with(MODEL_MAGIC) {
        return Err(bad("not a PSCNN1 model file".into()));
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(bad(format!(
            "checksum mismatch: stored {stored:08x}, computed {computed:08x}"
        )));
    }
    let mut offset = MODEL_MAGIC.len();
    let config_len = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
    offset += 4;
    if offset + config_len > body_len {
        return Err(bad("config block overruns file".into()));
    }
    let config_text = std::str::from_utf8(&bytes[offset..offset + config_len])
        .map_err(|e| bad(format!("config block is not UTF-8: {e}")))?;
    offset += config_len;
    let (config, box_) = config_from_text(config_text).map_err(bad)?;

    // Parameter values overwrite a seed-0 network of the right shape.
    let mut network = Network::init(&config, 0)?;
    for layer in network.layers_mut().iter_mut() {
        for tensor in layer.state_tensors() {
            let need = tensor.len() * 8;
            if offset + need > body_len {
                return Err(NnError::ModelFormat {
                    path: path.to_path_buf(),
                    message: "file truncated inside parameter tensors".into(),
                });
            }
            for v in tensor.iter_mut() {
                *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
                offset += 8;
            }
        }
    }
    if offset != body_len {
        return Err(bad(format!(
            "{} unexpected trailing bytes before checksum",
            body_len - offset
        )));
    }
    Ok(TrainedModel {
        network,
        box_,
        history: Vec::new(),
    })
}

fn config_to_text(config: &NetworkConfig, box_: &ThicknessBox) -> String {
    let mut out = String::new();
    let floats = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    match &config.arch {
        Architecture::First => out.push_str("arch = first\n"),
        Architecture::Block {
            section_depth,
            pools,
            filters,
        } => {
            out.push_str("arch = block\n");
            out.push_str(&format!("section_depth = {section_depth}\n"));
            out.push_str(&format!("pools = {},{},{}\n", pools[0], pools[1], pools[2]));
            out.push_str(&format!("filters = {},{},{}\n", filters[0], filters[1], filters[2]));
        }
    }
    out.push_str(&format!("input_height = {}\n", config.input_height));
    out.push_str(&format!("input_width = {}\n", config.input_width));
    out.push_str(&format!("input_channels = {}\n", config.input_channels));
    out.push_str(&format!("output_dim = {}\n", config.output_dim));
    out.push_str(&format!("box_names = {}\n", box_.names().join(",")));
    out.push_str(&format!("box_lower_nm = {}\n", floats(box_.lower_nm())));
    out.push_str(&format!("box_upper_nm = {}\n", floats(box_.upper_nm())));
    out
}

fn config_from_text(text: &str) -> Result<(NetworkConfig, ThicknessBox), String> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.trim(), v.trim());
        }
    }
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| format!("missing key \"{key}\""));
    let parse_usize = |key: &str| -> Result<usize, String> {
        get(key)?.parse().map_err(|e| format!("{key}: {e}"))
    };
    let arch = match get("arch")? {
        "first" => Architecture::First,
        "block" => {
            let pools_raw: Vec<&str> = get("pools")?.split(',').map(str::trim).collect();
            if pools_raw.len() != 3 {
                return Err("pools needs exactly 3 entries".into());
            }
            let mut pools = [PoolKind::Avg; 3];
            for (slot, raw) in pools.iter_mut().zip(&pools_raw) {
                *slot = match *raw {
                    "max" => PoolKind::Max,
                    "avg" => PoolKind::Avg,
                    other => return Err(format!("unknown pool kind \"{other}\"")),
                };
            }
            let filters_raw: Vec<usize> = get("filters")?
                .split(',')
                .map(|v| v.trim().parse().map_err(|e| format!("filters: {e}")))
                .collect::<Result<_, _>>()?;
            if filters_raw.len() != 3 {
                return Err("filters needs exactly 3 entries".into());
            }
            Architecture::Block {
                section_depth: parse_usize("section_depth")?,
                pools,
                filters: [filters_raw[0], filters_raw[1], filters_raw[2]],
            }
        }
        other => return Err(format!("unknown arch \"{other}\"")),
    };
    let floats = |key: &str| -> Result<Vec<f64>, String> {
        get(key)?
            .split(',')
            .map(|v| v.trim().parse().map_err(|e| format!("{key}: {e}")))
            .collect()
    };
    let box_ = ThicknessBox::new(
        get("box_names")?.split(',').map(str::to_string).collect(),
        floats("box_lower_nm")?,
        floats("box_upper_nm")?,
    )
    .map_err(|e| e.to_string())?;
    let config = NetworkConfig {
        input_height: parse_usize("input_height")?,
        input_width: parse_usize("input_width")?,
        input_channels: parse_usize("input_channels")?,
        output_dim: parse_usize("output_dim")?,
        arch,
    };
    Ok((config, box_))
}
