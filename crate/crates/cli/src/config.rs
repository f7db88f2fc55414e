//! TOML run configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use pivotrepr::corpus::{load_corpus, Corpus, CorpusKind};
use pivotrepr::evalharness::{ExperimentConfig, Method};
use pivotrepr::synthgen::GeneratorConfig;
use pivotrepr::{Error, Result};
use serde::Deserialize;

/// Input files of one source -> target setup. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupPaths {
    pub source: String,
    pub target: String,
    pub source_labeled: PathBuf,
    pub source_unlabeled: PathBuf,
    pub target_unlabeled: PathBuf,
    pub target_test: Option<PathBuf>,
}

impl SetupPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.source_labeled,
            &mut self.source_unlabeled,
            &mut self.target_unlabeled,
        ] {
            *p = base.join(&*p);
        }
        if let Some(p) = &mut self.target_test {
            *p = base.join(&*p);
        }
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.source_labeled,
            &self.source_unlabeled,
            &self.target_unlabeled,
        ]
        .into_iter()
        .chain(&self.target_test)
    }

    pub fn load(&self) -> Result<SetupCorpora> {
        let target_test = match &self.target_test {
            Some(p) => Some(load_corpus(p, CorpusKind::Labeled, &self.target)?),
            None => None,
        };
        Ok(SetupCorpora {
            source_labeled: load_corpus(&self.source_labeled, CorpusKind::Labeled, &self.source)?,
            source_unlabeled: load_corpus(
                &self.source_unlabeled,
                CorpusKind::Unlabeled,
                &self.source,
            )?,
            target_unlabeled: load_corpus(
                &self.target_unlabeled,
                CorpusKind::Unlabeled,
                &self.target,
            )?,
            target_test,
        })
    }
}

pub struct SetupCorpora {
    pub source_labeled: Corpus,
    pub source_unlabeled: Corpus,
    pub target_unlabeled: Corpus,
    pub target_test: Option<Corpus>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Methods run by `experiment`, in output order.
    pub methods: Vec<Method>,
    /// Significance level of the per-fold McNemar tests.
    pub alpha: f64,
    /// Pivot count for `pivots` and `train-repr`; defaults to the first grid entry.
    pub num_pivots: Option<usize>,
    /// Hidden size for `train-repr --method ae_scl`; defaults to the first grid entry.
    pub hidden_dim: Option<usize>,
    /// Projection rank for `train-repr --method scl_mi`; defaults to the first grid entry.
    pub svd_dim: Option<usize>,
    pub setups: Vec<SetupPaths>,
    pub experiment: ExperimentConfig,
    pub synth: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            methods: Method::ALL.to_vec(),
            alpha: 0.05,
            num_pivots: None,
            hidden_dim: None,
            svd_dim: None,
            setups: Vec::new(),
            experiment: ExperimentConfig::default(),
            synth: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or returns defaults) and applies the seed override. The
    /// resolved seed is copied into the experiment and generator sections.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
        let mut config = match path {
            None => RunConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let mut config: RunConfig = toml::from_str(&text)
                    .map_err(|e| Error::invalid(format!("{}: {}", path.display(), e.message())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for s in &mut config.setups {
                    s.resolve(base);
                }
                config
            }
        };
        let seed = seed.or(config.seed).unwrap_or(0);
        config.seed = Some(seed);
        config.experiment.seed = seed;
        config.synth.seed = seed;
        if !(config.alpha > 0.0 && config.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha {} not in (0, 1]",
                config.alpha
            )));
        }
        Ok(config)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The single setup used by the step-by-step subcommands.
    pub fn first_setup(&self) -> Result<&SetupPaths> {
        self.setups
            .first()
            .ok_or_else(|| Error::invalid("config lists no [[setups]]"))
    }

    /// Fails with an I/O error naming the first referenced input that is missing.
    pub fn check_inputs_exist(&self) -> Result<()> {
        for p in self.setups.iter().flat_map(SetupPaths::paths) {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        Ok(())
    }
}

pub fn first_or(value: Option<usize>, grid: &[usize], what: &str) -> Result<usize> {
    value
        .or_else(|| grid.first().copied())
        .ok_or_else(|| Error::invalid(format!("no {what} configured")))
}
