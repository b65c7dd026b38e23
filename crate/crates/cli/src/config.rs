use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use procalign::calibration::SplitFractions;
use procalign::synth::NoiseModel;
use serde::{Deserialize, Serialize};

use crate::usage;

/// JSON run configuration. Every field can also be given on the command
/// line; flags take precedence. Relative paths are resolved against the
/// directory of the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub event_log: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub threshold_grid: Option<Vec<f64>>,
    pub epsilon_grid: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub fractions: Option<SplitFractions>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_traces: Option<usize>,
    pub max_len: Option<usize>,
    pub noise: Option<NoiseModel>,
    pub repetitions: Option<u64>,
    pub discover: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.event_log,
            &mut config.trace,
            &mut config.dataset,
            &mut config.net,
            &mut config.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Flag value if given, else the config value, else an error naming both.
pub fn required<T: Clone>(flag: Option<T>, config: &Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| usage(format!("missing --{name} (or `{}` in the config)", name.replace('-', "_"))))
}

pub fn input_file(path: PathBuf) -> anyhow::Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!("input file {} does not exist", path.display())))
    }
}

pub fn check_epsilon(epsilon: f64) -> anyhow::Result<f64> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(epsilon)
    } else {
        Err(usage(format!("epsilon {epsilon} outside (0, 1]")))
    }
}

pub fn check_epsilon_grid(grid: Vec<f64>) -> anyhow::Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(usage("epsilon grid is empty"));
    }
    for &e in &grid {
        check_epsilon(e)?;
    }
    Ok(grid)
}

pub fn check_threshold_grid(grid: Vec<f64>) -> anyhow::Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(usage("threshold grid is empty"));
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(usage(format!("dependency threshold {t} outside [0, 1)")));
    }
    Ok(grid)
}

pub fn check_fractions(fractions: SplitFractions) -> anyhow::Result<SplitFractions> {
    fractions.validate().map_err(|e| usage(e.to_string()))?;
    Ok(fractions)
}

pub fn parse_fractions(raw: &[f64]) -> anyhow::Result<SplitFractions> {
    match raw {
        &[train, val, test] => Ok(SplitFractions { train, val, test }),
        _ => Err(usage(format!("--fractions takes three values, got {}", raw.len()))),
    }
}

pub fn output_dir(flag: Option<PathBuf>, config: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = flag.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let path = dir.join("run.json");
        fs::write(&path, r#"{"net": "model.pnml", "epsilon": 0.2, "fractions": {"train": 0.5, "val": 0.25, "test": 0.25}}"#).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.net, Some(dir.join("model.pnml")));
        assert_eq!(c.epsilon, Some(0.2));
        assert_eq!(c.fractions.unwrap().val, 0.25);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epsilonn": 0.1}"#).is_err());
    }

    #[test]
    fn flags_win_over_config() {
        assert_eq!(required(Some(0.3), &Some(0.1), "epsilon").unwrap(), 0.3);
        assert_eq!(required(None, &Some(0.1), "epsilon").unwrap(), 0.1);
        assert!(required::<f64>(None, &None, "epsilon").is_err());
    }

    #[test]
    fn validation() {
        assert!(check_epsilon(0.0).is_err());
        assert!(check_epsilon(1.0).is_ok());
        assert!(check_threshold_grid(vec![0.8, 1.0]).is_err());
        assert!(check_fractions(parse_fractions(&[0.5, 0.5, 0.5]).unwrap()).is_err());
        assert!(parse_fractions(&[0.5, 0.5]).is_err());
    }
}
