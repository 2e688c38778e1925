use std::path::{Path, PathBuf};

use igcf::data::{
    attach_genres, ingest, subsample_users, DataFormat, GenreFormat, InteractionDataset, SatisfactionRule,
    SurrogateConfig, SurrogateCorpus,
};
use igcf::eval::{ExperimentSpec, PolicySpec};
use igcf::regret_lab::{LabPolicy, RegretExperiment};
use igcf::{Error, Result};
use serde::{Deserialize, Serialize};

/// Where interactions come from. Without `path` the built-in surrogate
/// corpus is generated from `surrogate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub format: DataFormat,
    pub genres: Option<PathBuf>,
    pub genre_format: GenreFormat,
    pub surrogate: SurrogateConfig,
    /// Fraction of users kept (uniformly at random, seeded).
    pub subsample: f64,
    /// Upper clamp on watch-ratio `θ`; ignored for rating data.
    pub watch_ratio_cap: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: DataFormat::MovielensDat,
            genres: None,
            genre_format: GenreFormat::MovielensDat,
            surrogate: SurrogateConfig::default(),
            subsample: 1.0,
            watch_ratio_cap: None,
        }
    }
}

/// The whole run configuration, echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub dataset: DatasetConfig,
    pub experiment: ExperimentSpec,
    pub regret: RegretExperiment,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("igcf-out"),
            dataset: DatasetConfig::default(),
            experiment: ExperimentSpec::default(),
            regret: RegretExperiment::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub policies: Option<String>,
    pub horizon: Option<usize>,
    pub slate_size: Option<usize>,
    pub subsample: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies overrides; `--policies` is read as evaluation policy tags or
    /// lab policy tags depending on `lab`.
    pub fn apply(&mut self, o: &Overrides, lab: bool) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.experiment.seed = self.seed;
        self.experiment.pretrain.seed = self.seed;
        self.regret.seed = self.seed;
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(list) = &o.policies {
            let tags = list.split(',').map(str::trim).filter(|t| !t.is_empty());
            if lab {
                self.regret.policies = tags.map(LabPolicy::from_tag).collect::<Result<_>>()?;
            } else {
                self.experiment.policies = tags.map(PolicySpec::from_tag).collect::<Result<_>>()?;
            }
        }
        if let Some(t) = o.horizon {
            self.experiment.horizon = t;
            self.regret.horizon = t;
        }
        if let Some(k) = o.slate_size {
            self.experiment.slate_size = k;
        }
        if let Some(f) = o.subsample {
            self.dataset.subsample = f;
        }
        if !(self.dataset.subsample > 0.0 && self.dataset.subsample <= 1.0) {
            return Err(Error::Config(format!(
                "subsample fraction must lie in (0, 1], got {}",
                self.dataset.subsample
            )));
        }
        Ok(())
    }

    /// Input files referenced by the configuration.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.dataset.path.iter().chain(&self.dataset.genres).cloned().collect()
    }

    pub fn load_dataset(&self) -> Result<InteractionDataset> {
        let d = &self.dataset;
        let mut ds = match &d.path {
            Some(path) => {
                if !path.exists() {
                    return Err(Error::Config(format!("dataset {} does not exist", path.display())));
                }
                let mut ds = ingest(path, d.format)?;
                if let Some(g) = &d.genres {
                    if !g.exists() {
                        return Err(Error::Config(format!("genre file {} does not exist", g.display())));
                    }
                    attach_genres(&mut ds, g, d.genre_format)?;
                }
                ds
            }
            None => SurrogateCorpus::generate(&d.surrogate).dataset,
        };
        if let Some(c) = d.watch_ratio_cap {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("watch-ratio cap must be positive, got {c}")));
            }
            if let SatisfactionRule::WatchRatioAtLeast { cap, .. } = &mut ds.satisfaction {
                *cap = Some(c);
            }
        }
        if d.subsample < 1.0 {
            ds = subsample_users(&ds, d.subsample, self.seed);
        }
        log::info!(
            "dataset: {} users, {} items, {} records",
            ds.num_users,
            ds.num_items,
            ds.len()
        );
        Ok(ds)
    }
}
