//! Layered configuration: built-in defaults, then a preset, then a TOML file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apple_picker::PickerConfig;
use serde::Deserialize;
use toml::Table;

pub const PRESETS: &[(&str, &str)] = &[
    ("betagal", include_str!("../presets/betagal.toml")),
    ("t20s", include_str!("../presets/t20s.toml")),
    ("ribosome70s", include_str!("../presets/ribosome70s.toml")),
    ("klh", include_str!("../presets/klh.toml")),
];

pub fn preset(name: &str) -> Result<Table> {
    let Some((_, text)) = PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)) else {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        bail!("unknown preset {name:?}; available: {}", names.join(", "));
    };
    Ok(text.parse()?)
}

/// Keys a config file may carry besides the picker parameters.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub ctf_sidecar: Option<PathBuf>,
    pub overlay: bool,
    pub out_dir: Option<PathBuf>,
    pub preset: Option<String>,
}

const RUN_KEYS: &[&str] = &["threads", "ctf_sidecar", "overlay", "out_dir", "preset"];

/// Shallow merge: keys in `top` replace keys in `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

/// Resolves defaults ← preset ← file. A `preset` named on the command line
/// wins over one named inside the file.
pub fn load(file: Option<&Path>, preset_flag: Option<&str>) -> Result<(PickerConfig, RunOptions)> {
    let file_table: Table = match file {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading config {}", p.display()))?
            .parse()
            .with_context(|| format!("parsing config {}", p.display()))?,
        None => Table::new(),
    };
    let (mut picker_keys, mut run_keys) = (Table::new(), Table::new());
    for (k, v) in file_table {
        if RUN_KEYS.contains(&k.as_str()) {
            run_keys.insert(k, v);
        } else {
            picker_keys.insert(k, v);
        }
    }
    let run: RunOptions = run_keys.try_into().context("config file")?;

    let mut table = Table::new();
    if let Some(name) = preset_flag.or(run.preset.as_deref()) {
        merge(&mut table, preset(name)?);
    }
    merge(&mut table, picker_keys);
    let config: PickerConfig = table.try_into().context("picker settings")?;
    Ok((config, run))
}
