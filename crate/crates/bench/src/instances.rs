//! Instance pools: generation from named seed substreams, or files.

use std::path::Path;

use anyhow::Context;
use qzero_core::rng::substream;
use qzero_core::sat::{
    emit_dimacs, generate_unique_instance, parse_dimacs, GeneratorOptions, InstanceRecord,
    SatInstance,
};

use crate::config::PoolConfig;

#[derive(Debug, Clone)]
pub struct NamedInstance {
    pub id: String,
    pub instance: SatInstance,
    /// Generator seed, when generated.
    pub seed: Option<u64>,
}

/// Seed of the `index`-th instance of pool `pool` under `root`.
pub fn instance_seed(root: u64, pool: &str, index: usize) -> u64 {
    substream(root, &format!("instance-gen/{pool}"), index as u64)
}

/// Load or generate the pool. Generated ids are `{pool}-{index}`; file ids
/// are the file stem.
pub fn load_pool(cfg: &PoolConfig, root: u64, pool: &str) -> anyhow::Result<Vec<NamedInstance>> {
    if !cfg.files.is_empty() {
        return cfg.files.iter().map(|p| read_instance(p)).collect();
    }
    (0..cfg.count)
        .map(|i| {
            let seed = instance_seed(root, pool, i);
            let instance = generate_unique_instance(cfg.n, cfg.m, seed, GeneratorOptions::default())
                .with_context(|| format!("generating {pool}-{i}"))?;
            Ok(NamedInstance {
                id: format!("{pool}-{i}"),
                instance,
                seed: Some(seed),
            })
        })
        .collect()
}

/// `.json` files hold an [`InstanceRecord`]; anything else is DIMACS.
pub fn read_instance(path: &Path) -> anyhow::Result<NamedInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    if path.extension().is_some_and(|e| e == "json") {
        let rec: InstanceRecord = serde_json::from_str(&text)?;
        Ok(NamedInstance {
            id,
            instance: rec.to_instance()?,
            seed: rec.seed,
        })
    } else {
        Ok(NamedInstance {
            id,
            instance: parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))?,
            seed: None,
        })
    }
}

/// Write `{id}.cnf` and `{id}.json` for every instance.
pub fn write_pool(dir: &Path, pool: &[NamedInstance]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for inst in pool {
        std::fs::write(dir.join(format!("{}.cnf", inst.id)), emit_dimacs(&inst.instance))?;
        let rec = InstanceRecord::from_instance(&inst.instance, inst.seed)?;
        std::fs::write(
            dir.join(format!("{}.json", inst.id)),
            serde_json::to_string_pretty(&rec)?,
        )?;
    }
    Ok(())
}

/// Pad a clause matrix with empty rows so that an `(n, m)` instance can be
/// fed to networks built for `(n, target_m)`.
pub fn pad_h_info(h_info: &[f64], n: usize, target_m: usize) -> anyhow::Result<Vec<f64>> {
    if n == 0 || h_info.len() % n != 0 {
        anyhow::bail!("clause matrix of length {} is not a multiple of n = {n}", h_info.len());
    }
    let m = h_info.len() / n;
    if m > target_m {
        anyhow::bail!("instance has {m} clauses, networks accept at most {target_m}");
    }
    let mut v = h_info.to_vec();
    v.resize(target_m * n, 0.0);
    Ok(v)
}
