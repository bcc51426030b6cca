//! Experiment configuration: a versioned TOML document on top of the
//! per-problem defaults. Everything the file leaves out falls back to
//! the problem's stock settings, and command-line flags win over both.

use almgp::active::{StopMetric, Strategy};
use almgp::mlp::MlpArch;
use almgp::problems::{Problem, ProblemName};
use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

/// Raw file contents. Only `version` and `problem` are mandatory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub problem: String,
    pub repetitions: Option<usize>,
    pub base_seed: Option<u64>,
    pub strategies: Option<Vec<Strategy>>,
    pub output_dir: Option<PathBuf>,
    /// Track held-out RMSE in the optimizer's stopping rule. Leaks the
    /// test set into training; off everywhere except the borehole setup.
    pub rmse_stop_in_optimizer: Option<bool>,
    #[serde(default)]
    pub al: AlOverride,
    #[serde(default)]
    pub opt: OptOverride,
    pub arch: Option<ArchOverride>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlOverride {
    pub screen_size: Option<usize>,
    pub batch_size: Option<usize>,
    pub budget: Option<usize>,
    pub stop_metric: Option<StopMetric>,
    pub tol: Option<f64>,
    pub warm_start: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptOverride {
    pub history_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_iters_per_step: Option<usize>,
    pub max_total_iters: Option<usize>,
    pub early_stop_tol: Option<f64>,
    pub wolfe_c1: Option<f64>,
    pub wolfe_c2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchOverride {
    pub layers: Vec<usize>,
}

/// Flag-level overrides; applied last.
#[derive(Debug, Default)]
pub struct CliOverrides {
    pub repetitions: Option<usize>,
    pub base_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
}

/// Fully resolved experiment: problem defaults + file + flags.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub problem: Problem,
    pub repetitions: usize,
    pub base_seed: u64,
    pub strategies: Vec<Strategy>,
    pub output_dir: PathBuf,
}

impl Experiment {
    pub fn load(path: &Path, cli: &CliOverrides) -> Result<Experiment> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: ConfigFile = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Experiment::resolve(file, cli)
    }

    pub fn resolve(file: ConfigFile, cli: &CliOverrides) -> Result<Experiment> {
        if file.version != CONFIG_VERSION {
            bail!(
                "config version {} not supported (expected {CONFIG_VERSION})",
                file.version
            );
        }
        let name: ProblemName = file.problem.parse()?;
        let mut problem = Problem::get(name);

        let al = &mut problem.al;
        set(&mut al.screen_size, file.al.screen_size);
        set(&mut al.batch_size, file.al.batch_size);
        set(&mut al.budget, file.al.budget);
        set(&mut al.stop_metric, file.al.stop_metric);
        set(&mut al.tol, file.al.tol);
        set(&mut al.warm_start, file.al.warm_start);

        let opt = &mut problem.opt;
        set(&mut opt.history_size, file.opt.history_size);
        set(&mut opt.learning_rate, file.opt.learning_rate);
        set(&mut opt.max_iters_per_step, file.opt.max_iters_per_step);
        set(&mut opt.max_total_iters, file.opt.max_total_iters);
        set(&mut opt.early_stop_tol, file.opt.early_stop_tol);
        set(&mut opt.wolfe_c1, file.opt.wolfe_c1);
        set(&mut opt.wolfe_c2, file.opt.wolfe_c2);

        set(&mut problem.rmse_stop_in_optimizer, file.rmse_stop_in_optimizer);

        if let Some(arch) = file.arch {
            let arch = MlpArch::new(arch.layers)?;
            if arch.input_dim() != problem.input_dim {
                bail!(
                    "architecture input width {} does not match {} (input dimension {})",
                    arch.input_dim(),
                    name,
                    problem.input_dim
                );
            }
            problem.arch = arch;
        }

        let mut strategies = if cli.strategies.is_empty() {
            file.strategies
                .unwrap_or_else(|| vec![Strategy::Alc, Strategy::Random])
        } else {
            cli.strategies.clone()
        };
        strategies.dedup();
        if strategies.is_empty() {
            bail!("no strategies selected");
        }

        let output_dir = cli
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("runs").join(name.to_string()));
        let output_dir = match std::env::var_os("ALMGP_OUTPUT_ROOT") {
            Some(root) => PathBuf::from(root).join(output_dir),
            None => output_dir,
        };

        let repetitions = cli.repetitions.or(file.repetitions).unwrap_or(10);
        if repetitions == 0 {
            bail!("repetitions must be at least 1");
        }

        Ok(Experiment {
            problem,
            repetitions,
            base_seed: cli.base_seed.or(file.base_seed).unwrap_or(0),
            strategies,
            output_dir,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(problem: &str) -> ConfigFile {
        toml::from_str(&format!("version = 1\nproblem = \"{problem}\"")).unwrap()
    }

    #[test]
    fn minimal_config_gets_problem_defaults() {
        let exp = Experiment::resolve(minimal("trig1d"), &CliOverrides::default()).unwrap();
        assert_eq!(exp.repetitions, 10);
        assert_eq!(exp.base_seed, 0);
        assert_eq!(exp.strategies, vec![Strategy::Alc, Strategy::Random]);
        assert_eq!(exp.problem.al.budget, 50);
        assert_eq!(exp.problem.opt.learning_rate, 0.001);
        assert_eq!(exp.output_dir, PathBuf::from("runs/trig1d"));
    }

    #[test]
    fn file_sections_override_defaults() {
        let file: ConfigFile = toml::from_str(
            r#"
            version = 1
            problem = "synthetic2d"
            repetitions = 3
            base_seed = 7
            strategies = ["random"]
            output_dir = "out/x"

            [al]
            budget = 12
            stop_metric = "off"

            [opt]
            learning_rate = 0.5

            [arch]
            layers = [2, 4, 2]
            "#,
        )
        .unwrap();
        let exp = Experiment::resolve(file, &CliOverrides::default()).unwrap();
        assert_eq!(exp.repetitions, 3);
        assert_eq!(exp.base_seed, 7);
        assert_eq!(exp.strategies, vec![Strategy::Random]);
        assert_eq!(exp.problem.al.budget, 12);
        assert_eq!(exp.problem.al.stop_metric, StopMetric::Off);
        assert_eq!(exp.problem.al.batch_size, 1); // untouched default
        assert_eq!(exp.problem.opt.learning_rate, 0.5);
        assert_eq!(exp.problem.arch.sizes(), &[2, 4, 2]);
    }

    #[test]
    fn cli_flags_beat_file_values() {
        let file: ConfigFile =
            toml::from_str("version = 1\nproblem = \"trig1d\"\nrepetitions = 3\nbase_seed = 7")
                .unwrap();
        let cli = CliOverrides {
            repetitions: Some(2),
            base_seed: Some(99),
            output_dir: Some(PathBuf::from("elsewhere")),
            strategies: vec![Strategy::Alc],
        };
        let exp = Experiment::resolve(file, &cli).unwrap();
        assert_eq!(exp.repetitions, 2);
        assert_eq!(exp.base_seed, 99);
        assert_eq!(exp.strategies, vec![Strategy::Alc]);
        assert_eq!(exp.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn rejects_wrong_version_unknown_keys_and_bad_arch() {
        let mut file = minimal("trig1d");
        file.version = 2;
        assert!(Experiment::resolve(file, &CliOverrides::default()).is_err());

        assert!(toml::from_str::<ConfigFile>("version = 1\nproblem = \"trig1d\"\ntypo = 1")
            .is_err());

        let file: ConfigFile = toml::from_str(
            "version = 1\nproblem = \"trig1d\"\n[arch]\nlayers = [3, 4, 2]",
        )
        .unwrap();
        let err = Experiment::resolve(file, &CliOverrides::default()).unwrap_err();
        assert!(err.to_string().contains("input width"));
    }
}
