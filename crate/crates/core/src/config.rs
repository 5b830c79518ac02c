//! Run configuration shared by the library entry points and the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphMode;
use crate::index::Bm25Params;
use crate::sic::{SicMode, DEFAULT_K};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub sic: f64,
    pub bm25: f64,
    pub graph: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { sic: 0.5, bm25: 0.4, graph: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub repo_root: Option<PathBuf>,
    pub mode: GraphMode,
    /// Similar issues retrieved per query.
    pub k: usize,
    pub max_results: usize,
    pub weights: Weights,
    pub bm25: Bm25Params,
    /// Ranked BM25 files considered before fusion.
    pub bm25_candidates: usize,
    /// Top BM25 files whose graph neighbors earn a bonus.
    pub expand_from: usize,
    pub sic_mode: SicMode,
    pub embedding_dimension: usize,
    pub richness_threshold: f64,
    /// Description length, in tokens, at which verbosity saturates.
    pub richness_verbosity_tokens: usize,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            repo_root: None,
            mode: GraphMode::Mixed,
            k: DEFAULT_K,
            max_results: 5,
            weights: Weights::default(),
            bm25: Bm25Params::default(),
            bm25_candidates: 20,
            expand_from: 3,
            sic_mode: SicMode::Embed,
            embedding_dimension: 256,
            richness_threshold: 0.5,
            richness_verbosity_tokens: 50,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let w = self.weights;
        if [w.sic, w.bm25, w.graph].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        for (name, v) in [
            ("k", self.k),
            ("max_results", self.max_results),
            ("bm25_candidates", self.bm25_candidates),
            ("embedding_dimension", self.embedding_dimension),
            ("richness_verbosity_tokens", self.richness_verbosity_tokens),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.bm25.k1 >= 0.0 && (0.0..=1.0).contains(&self.bm25.b)) {
            return Err(Error::Config("bm25 needs k1 >= 0 and 0 <= b <= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.richness_threshold) {
            return Err(Error::Config("richness_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
