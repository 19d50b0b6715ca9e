//! Run configuration: defaults, then a `key = value` file, then flags.

use std::path::Path;

use lotus_core::ot::LowRankGwConfig;
use lotus_core::similarity::SimilarityConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Upper bound on ICA components; a dataset with fewer columns uses
    /// all of them.
    pub ica_k: usize,
    pub gw_rank: usize,
    /// Regularization of the entropic solver (`distance --solver entropic`).
    pub gw_eps: f64,
    pub subsample_cap: usize,
    /// Trials per search.
    pub budget: usize,
    pub rope: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            ica_k: 20,
            gw_rank: 10,
            gw_eps: 1e-2,
            subsample_cap: 1000,
            budget: 50,
            rope: 0.01,
        }
    }
}

/// Values given on the command line; `None` keeps the lower layer.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ica_k: Option<usize>,
    pub gw_rank: Option<usize>,
    pub gw_eps: Option<f64>,
    pub subsample_cap: Option<usize>,
    pub budget: Option<usize>,
    pub rope: Option<f64>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Applies `key = value` lines. `#` starts a comment; unknown keys are
    /// errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim().trim_matches('"'));
            match key {
                "seed" => self.seed = parse(key, value)?,
                "ica_k" => self.ica_k = parse(key, value)?,
                "gw_rank" => self.gw_rank = parse(key, value)?,
                "gw_eps" => self.gw_eps = parse(key, value)?,
                "subsample_cap" => self.subsample_cap = parse(key, value)?,
                "budget" => self.budget = parse(key, value)?,
                "rope" => self.rope = parse(key, value)?,
                other => return Err(Error::Config(format!("line {}: unknown key {other}", i + 1))),
            }
        }
        Ok(())
    }

    /// Defaults, then `LOTUS_SEED`, then the file, then the flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Ok(s) = std::env::var("LOTUS_SEED") {
            cfg.seed = parse("LOTUS_SEED", s.trim())?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            cfg.apply_text(&text)?;
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = flags.$f { cfg.$f = v; })*};
        }
        take!(seed, ica_k, gw_rank, gw_eps, subsample_cap, budget, rope);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ica_k", self.ica_k),
            ("gw_rank", self.gw_rank),
            ("subsample_cap", self.subsample_cap),
            ("budget", self.budget),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.gw_rank < 2 {
            return Err(Error::Config("gw_rank must be at least 2".into()));
        }
        if self.subsample_cap < 2 {
            return Err(Error::Config("subsample_cap must be at least 2".into()));
        }
        if !(self.gw_eps > 0.0) {
            return Err(Error::Config(format!("gw_eps must be positive, got {}", self.gw_eps)));
        }
        if !(0.0..=0.5).contains(&self.rope) {
            return Err(Error::Config(format!("rope must lie in [0, 0.5], got {}", self.rope)));
        }
        Ok(())
    }

    pub fn similarity(&self) -> SimilarityConfig {
        let base = SimilarityConfig::default();
        SimilarityConfig {
            subsample_cap: self.subsample_cap,
            ica_k: Some(self.ica_k),
            gw: LowRankGwConfig {
                rank: self.gw_rank,
                ..base.gw
            },
            ..base
        }
    }
}
