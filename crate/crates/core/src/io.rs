//! Run configurations and snapshot directories.
//!
//! Every output directory holds `config.json` (the full [`RunConfig`]) next to
//! the run's artifacts. JSON files larger than 1 MiB are written gzipped with
//! a `.gz` suffix; readers accept either form. Output is a pure function of
//! the configuration, so repeating a run reproduces the directory byte for
//! byte.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{base_computable_class, Chain, ChainError, MarkerEntry, QState, ReEnumeration};
use crate::construction::{
    Action, ConstructionState, FollowerEntry, FollowerTable, Registry, StageBudget,
};
use crate::tree::{ClosureTree, Stage, StagedTree, TreeError, TreeSnapshot};

pub const GZIP_THRESHOLD: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: neither the file nor a gzipped copy exists")]
    Missing { path: PathBuf },
    #[error("{path}: {source}")]
    Tree { path: PathBuf, source: TreeError },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("{0}")]
    Layout(String),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

/// Parameters of one CLI run, written verbatim into its output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    BuildT2 {
        trees: usize,
        stages: u64,
        budget: StageBudget,
        registry: Registry,
        #[serde(default)]
        seed: u64,
    },
    BuildChain {
        stages: u64,
        enums: Vec<ReEnumeration>,
        #[serde(default = "default_embed_depth")]
        embed_depth: usize,
        #[serde(default)]
        seed: u64,
    },
    BaseClass {
        stages: u64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_embed_depth() -> usize {
    10
}

fn gz_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".gz");
    PathBuf::from(s)
}

/// Writes bytes, gzipping them to `<path>.gz` above the threshold. Returns
/// the path actually written.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<PathBuf, IoError> {
    if bytes.len() <= GZIP_THRESHOLD {
        fs::write(path, bytes).map_err(fs_err(path))?;
        return Ok(path.to_path_buf());
    }
    let gz = gz_path(path);
    let file = fs::File::create(&gz).map_err(fs_err(&gz))?;
    // fixed header fields keep the output reproducible
    let mut enc: GzEncoder<fs::File> = GzBuilder::new()
        .mtime(0)
        .write(file, Compression::default());
    enc.write_all(bytes).map_err(fs_err(&gz))?;
    enc.finish().map_err(fs_err(&gz))?;
    Ok(gz)
}

/// Reads `path`, or `<path>.gz` when only the compressed file exists. A path
/// that itself ends in `.gz` is decompressed.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    let gz = if path.extension().is_some_and(|e| e == "gz") {
        path.to_path_buf()
    } else if path.exists() {
        return fs::read(path).map_err(fs_err(path));
    } else {
        gz_path(path)
    };
    if !gz.exists() {
        return Err(IoError::Missing {
            path: path.to_path_buf(),
        });
    }
    let file = fs::File::open(&gz).map_err(fs_err(&gz))?;
    let mut out = Vec::new();
    GzDecoder::new(file)
        .read_to_end(&mut out)
        .map_err(fs_err(&gz))?;
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<PathBuf, IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// One JSON value per line.
pub fn write_jsonl<'a, T: Serialize + 'a, I: IntoIterator<Item = &'a T>>(
    path: &Path,
    items: I,
) -> Result<PathBuf, IoError> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, item).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        bytes.push(b'\n');
    }
    write_bytes(path, &bytes)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let bytes = read_bytes(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(bytes.as_slice()).lines() {
        let line = line.map_err(fs_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(out)
}

pub fn write_tree(path: &Path, tree: &StagedTree) -> Result<PathBuf, IoError> {
    write_json(path, &tree.to_snapshot())
}

pub fn read_tree(path: &Path) -> Result<StagedTree, IoError> {
    let snap: TreeSnapshot = read_json(path)?;
    StagedTree::from_snapshot(&snap).map_err(|source| IoError::Tree {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))
}

pub fn read_config(dir: &Path) -> Result<RunConfig, IoError> {
    read_json(&dir.join("config.json"))
}

pub fn write_construction(
    dir: &Path,
    config: &RunConfig,
    state: &ConstructionState,
) -> Result<(), IoError> {
    ensure_dir(dir)?;
    write_json(&dir.join("config.json"), config)?;
    for t in state.trees() {
        write_tree(&dir.join(format!("tree_{}.json", t.index())), t)?;
    }
    let d: Vec<u64> = state.diagonal_set().iter().copied().collect();
    write_json(&dir.join("d_set.json"), &d)?;
    write_json(&dir.join("followers.json"), &state.followers().entries)?;
    write_jsonl(&dir.join("actions.jsonl"), state.log())?;
    Ok(())
}

pub fn read_construction(dir: &Path) -> Result<ConstructionState, IoError> {
    let RunConfig::BuildT2 {
        trees: n_trees,
        stages,
        budget,
        registry,
        ..
    } = read_config(dir)?
    else {
        return Err(IoError::Layout(format!(
            "{}: not a build-t2 directory",
            dir.display()
        )));
    };
    let born = (stages as usize + 1).min(n_trees);
    let mut trees = Vec::with_capacity(born);
    for i in 0..born {
        trees.push(read_tree(&dir.join(format!("tree_{i}.json")))?);
    }
    let d: BTreeSet<u64> = read_json::<Vec<u64>>(&dir.join("d_set.json"))?
        .into_iter()
        .collect();
    let followers: Vec<FollowerEntry> = read_json(&dir.join("followers.json"))?;
    let log: Vec<Action> = read_jsonl(&dir.join("actions.jsonl"))?;
    Ok(ConstructionState::from_parts(
        n_trees,
        registry,
        budget,
        trees,
        d,
        FollowerTable::from_entries(followers),
        stages,
        log,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub level: usize,
    pub stage: Stage,
    pub coded_prefix: String,
    pub decoded: Vec<u64>,
    pub f_values: Vec<u64>,
}

pub fn write_chain(dir: &Path, config: &RunConfig, chain: &Chain) -> Result<(), IoError> {
    ensure_dir(dir)?;
    write_json(&dir.join("config.json"), config)?;
    write_tree(&dir.join("base.json"), &chain.base)?;
    for q in &chain.levels {
        let j = q.upsilon().index();
        write_tree(&dir.join(format!("level_{j}.json")), q.upsilon())?;
        write_json(&dir.join(format!("markers_{j}.json")), &q.marker_entries())?;
        let f = crate::chain::enum_fn_approx(q.enumeration(), q.stage());
        let report = DecodeReport {
            level: j,
            stage: q.stage(),
            coded_prefix: q.longest_coded_prefix().to_string(),
            decoded: q.decoded_values(),
            f_values: f.values,
        };
        write_json(&dir.join(format!("decode_{j}.json")), &report)?;
    }
    write_tree(&dir.join("union.json"), &chain.union_tree())?;
    Ok(())
}

pub fn read_chain(dir: &Path) -> Result<(Chain, usize), IoError> {
    let RunConfig::BuildChain {
        enums, embed_depth, ..
    } = read_config(dir)?
    else {
        return Err(IoError::Layout(format!(
            "{}: not a build-chain directory",
            dir.display()
        )));
    };
    let base = Arc::new(read_tree(&dir.join("base.json"))?);
    let mut lambda = Arc::new(ClosureTree::new(base.clone()));
    let mut levels = Vec::new();
    for (k, e) in enums.into_iter().enumerate() {
        let j = k + 1;
        let upsilon = read_tree(&dir.join(format!("level_{j}.json")))?;
        let markers: Vec<MarkerEntry> = read_json(&dir.join(format!("markers_{j}.json")))?;
        let next = Arc::new(ClosureTree::new(Arc::new(upsilon.clone())));
        levels.push(QState::from_parts(upsilon, &markers, lambda, e)?);
        lambda = next;
    }
    Ok((Chain { base, levels }, embed_depth))
}

pub fn write_base_class(dir: &Path, config: &RunConfig, stages: u64) -> Result<(), IoError> {
    ensure_dir(dir)?;
    write_json(&dir.join("config.json"), config)?;
    write_tree(&dir.join("tree_0.json"), &base_computable_class(stages))?;
    Ok(())
}

/// Tree snapshot files of a directory, sorted by name.
pub fn tree_files(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(fs_err(dir))? {
        let p = entry.map_err(fs_err(dir))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let stem = name.trim_end_matches(".gz");
        let is_tree = stem.ends_with(".json")
            && (stem.starts_with("tree_")
                || stem.starts_with("level_")
                || stem == "base.json"
                || stem == "union.json");
        if is_tree {
            out.push(if name.ends_with(".gz") {
                p.with_extension("")
            } else {
                p
            });
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::programs;

    #[test]
    fn large_files_are_gzipped_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let big: Vec<u64> = (0..300_000).collect();
        let p = dir.path().join("big.json");
        let written = write_json(&p, &big).unwrap();
        assert!(written.to_string_lossy().ends_with(".gz"));
        assert!(!p.exists());
        let back: Vec<u64> = read_json(&p).unwrap();
        assert_eq!(back, big);
        let again = dir.path().join("again.json");
        write_json(&again, &big).unwrap();
        assert_eq!(
            fs::read(gz_path(&p)).unwrap(),
            fs::read(gz_path(&again)).unwrap()
        );
    }

    #[test]
    fn construction_round_trip() {
        let registry = Registry::from_programs([
            ("c0".to_string(), programs::const_zero()),
            ("z".to_string(), programs::zero_after_query()),
        ]);
        let budget = StageBudget::default();
        let mut st = ConstructionState::new(2, registry.clone(), budget).unwrap();
        st.run(9).unwrap();
        let config = RunConfig::BuildT2 {
            trees: 2,
            stages: 9,
            budget,
            registry,
            seed: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        write_construction(dir.path(), &config, &st).unwrap();
        let back = read_construction(dir.path()).unwrap();
        assert_eq!(back.log(), st.log());
        assert_eq!(back.diagonal_set(), st.diagonal_set());
        assert_eq!(back.followers().entries, st.followers().entries);
        for (a, b) in back.trees().iter().zip(st.trees()) {
            assert_eq!(a.to_snapshot(), b.to_snapshot());
        }
    }

    #[test]
    fn config_json_shape() {
        let c = RunConfig::BaseClass { stages: 5, seed: 0 };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["command"], "base-class");
        let e: RunConfig = serde_json::from_str(
            r##"{"command":"build-chain","stages":4,"enums":[{"table":[[2,1],[1,3]]},{"program":"halt r1"}]}"##,
        )
        .unwrap();
        match e {
            RunConfig::BuildChain {
                enums, embed_depth, ..
            } => {
                assert_eq!(enums.len(), 2);
                assert_eq!(embed_depth, 10);
                assert!(matches!(enums[1], ReEnumeration::Program { .. }));
            }
            _ => panic!("wrong command"),
        }
    }
}
