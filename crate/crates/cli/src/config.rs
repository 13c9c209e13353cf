//! Flat `key = value` config files. Every key is the snake_case spelling of
//! a command-line flag (`--learning-rate` is `learning_rate`); a flag given
//! on the command line always wins over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    pub scale: Option<usize>,
    pub train: Option<usize>,
    pub eval: Option<usize>,
    pub occupants: Option<usize>,

    pub data: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub kl_weight: Option<f64>,
    pub episodes_per_epoch: Option<usize>,
    pub max_sequence_len: Option<usize>,
    pub batch_size: Option<usize>,

    pub model: Option<PathBuf>,
    pub pair: Option<PathBuf>,
    pub budget: Option<usize>,
    pub pool_size: Option<usize>,
    pub dream_samples: Option<usize>,
    pub rule: Option<String>,
    pub gp_max_points: Option<usize>,

    pub scales: Option<Vec<usize>>,
    pub budgets: Option<Vec<usize>>,
    pub methods: Option<Vec<String>>,
    pub reps: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("bad config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let cfg = FileConfig::parse("seed = 4\nepochs = 3\nlearning_rate = 0.002\nbudgets = [1, 5]\nrule = \"random\"\n").unwrap();
        assert_eq!(cfg.seed, Some(4));
        assert_eq!(cfg.epochs, Some(3));
        assert_eq!(cfg.learning_rate, Some(0.002));
        assert_eq!(cfg.budgets, Some(vec![1, 5]));
        assert_eq!(cfg.rule.as_deref(), Some("random"));
        assert_eq!(cfg.scale, None);
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(matches!(FileConfig::parse("epoch = 3\n"), Err(CliError::Usage(_))));
        assert!(FileConfig::parse("[train]\nepochs = 3\n").is_err());
        assert!(FileConfig::parse("epochs = \"many\"\n").is_err());
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(FileConfig::parse("").unwrap(), FileConfig::default());
    }
}
