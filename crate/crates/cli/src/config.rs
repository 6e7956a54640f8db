//! Flat `key = value` run configuration.
//!
//! Values come from three layers: built-in defaults for the chosen
//! experiment, an optional config file, then command-line overrides. Later
//! layers win. Every key is checked against the experiment's key table, so
//! typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use imcmc_core::lgssm::{InitScheme, LgssmModel};
use imcmc_core::proposals::{DEFAULT_D_MAX, DEFAULT_D_MIN};
use imcmc_core::Centering;

use crate::clock::ClockMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Multimodal,
    Hmm,
    OracleCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Multimodal => "multimodal",
            Experiment::Hmm => "hmm",
            Experiment::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multimodal" => Ok(Experiment::Multimodal),
            "hmm" => Ok(Experiment::Hmm),
            "oracle-check" => Ok(Experiment::OracleCheck),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{at}unknown key `{key}` for experiment `{experiment}`")]
    UnknownKey {
        key: String,
        experiment: Experiment,
        at: Location,
    },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{at}key `{key}`: {message}")]
    Invalid {
        key: String,
        message: String,
        at: Location,
    },
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Default,
    File { origin: String, line: usize },
    Flag,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Default => f.write_str("default: "),
            Location::File { origin, line } => write!(f, "{origin}:{line}: "),
            Location::Flag => f.write_str("command line: "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: String,
    pub at: Location,
}

/// Keys accepted by an experiment with their defaults (`None` = required).
pub fn key_table(experiment: Experiment) -> Vec<(&'static str, Option<String>)> {
    let s = |v: &str| Some(v.to_string());
    let mut keys = vec![
        ("experiment", s(experiment.name())),
        ("seed", s("1")),
        ("parallel", s("false")),
    ];
    let d_min = Some(format!("{DEFAULT_D_MIN:e}"));
    let d_max = Some(format!("{DEFAULT_D_MAX:e}"));
    match experiment {
        Experiment::Multimodal => keys.extend([
            ("out", None),
            ("chains", s("50")),
            ("sweeps", s("5000")),
            ("cadence", s("50")),
            ("clock", s("cpu")),
            ("work_unit_seconds", s("1e-7")),
            ("d_min", d_min),
            ("d_max", d_max),
            ("centering", s("current")),
            ("mixture_variance", s("1")),
            ("snapshots", s("0,1000,5000")),
            ("init_box", s("-15,10,0,10")),
        ]),
        Experiment::Hmm => {
            let m = LgssmModel::default();
            keys.extend([
                ("out", None),
                ("chains", s("50")),
                ("sweeps", s("2000")),
                ("independent_sweeps", None),
                ("cadence", s("50")),
                ("clock", s("cpu")),
                ("work_unit_seconds", s("1e-7")),
                ("d_min", d_min),
                ("d_max", d_max),
                ("centering", s("current")),
                ("self_step", s("1")),
                ("independent_step", s("1")),
                ("a_true", Some(m.a_true.to_string())),
                ("b", Some(m.b.to_string())),
                ("sigma2_w", Some(m.sigma2_w.to_string())),
                ("sigma2_v", Some(m.sigma2_v.to_string())),
                ("s1_mean", Some(m.s1_mean.to_string())),
                ("s1_var", Some(m.s1_var.to_string())),
                ("theta_mean", Some(m.theta_mean.to_string())),
                ("theta_var", Some(m.theta_var.to_string())),
                ("n", Some(m.n.to_string())),
                ("dataset_seed", None),
                ("reference_chains", s("2000")),
                ("reference_sweeps", s("2000")),
                ("init", s("prior")),
                ("grid_points", s("1024")),
                ("concurrent", s("true")),
            ]);
        }
        Experiment::OracleCheck => keys.extend([
            ("out", s("")),
            ("chains", s("2")),
            ("sweeps", s("100000")),
            ("values", s("3")),
            ("components", s("1")),
        ]),
    }
    keys
}

/// Unresolved key-value layers.
#[derive(Debug, Clone)]
pub struct RawConfig {
    experiment: Experiment,
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn new(experiment: Experiment) -> Self {
        RawConfig {
            experiment,
            entries: BTreeMap::new(),
        }
    }

    fn check_key(&self, key: &str, at: &Location) -> Result<(), ConfigError> {
        if key_table(self.experiment).iter().any(|(k, _)| *k == key) {
            Ok(())
        } else {
            Err(ConfigError::UnknownKey {
                key: key.to_string(),
                experiment: self.experiment,
                at: at.clone(),
            })
        }
    }

    /// Merges `text` in config-file syntax. `origin` labels error messages.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    origin: origin.into(),
                    line,
                    message: format!("expected `key = value`, found `{body}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    origin: origin.into(),
                    line,
                    message: "empty key".into(),
                });
            }
            let at = Location::File {
                origin: origin.into(),
                line,
            };
            self.check_key(key, &at)?;
            self.entries.insert(key.to_string(), Entry { value: value.to_string(), at });
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.merge_text(&text, &path.display().to_string())
    }

    /// Command-line override; wins over file values.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        self.check_key(key, &Location::Flag)?;
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.into(),
                at: Location::Flag,
            },
        );
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: "--set".into(),
            line: 1,
            message: format!("expected `key=value`, found `{pair}`"),
        })?;
        self.set(k.trim(), v.trim())
    }

    /// Fills defaults and type-checks every value.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (key, default) in key_table(self.experiment) {
            let entry = match (self.entries.get(key), default) {
                (Some(e), _) => e.clone(),
                (None, Some(v)) => Entry {
                    value: v,
                    at: Location::Default,
                },
                (None, None) => continue,
            };
            entries.insert(key.to_string(), entry);
        }
        RunConfig::from_entries(self.experiment, entries)
    }
}

struct Values<'a>(&'a BTreeMap<String, Entry>);

impl Values<'_> {
    fn entry(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.0.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn invalid(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            message,
            at: self.0.get(key).map(|e| e.at.clone()).unwrap_or(Location::Default),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let e = self.entry(key)?;
        e.value
            .parse()
            .map_err(|err: T::Err| self.invalid(key, format!("cannot parse `{}`: {err}", e.value)))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if self.0.contains_key(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn positive_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("must be a positive number, got {v}")))
        }
    }

    fn finite_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("must be finite, got {v}")))
        }
    }

    /// Integer `>= min`; parsed signed so negative input gets a clear error.
    fn count(&self, key: &str, label: &str, min: i128) -> Result<u64, ConfigError> {
        let v: i128 = self.get(key)?;
        if v < min || v > u64::MAX as i128 {
            return Err(self.invalid(key, format!("{label} must be at least {min}, got {v}")));
        }
        Ok(v as u64)
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let e = self.entry(key)?;
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|err: T::Err| self.invalid(key, format!("cannot parse `{s}`: {err}")))
            })
            .collect()
    }
}

/// Interacting proposal settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub centering: Centering,
    /// Self-proposal standard deviation (component-wise sampler only).
    pub self_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalConfig {
    pub mixture_variance: f64,
    pub snapshots: Vec<u64>,
    /// `[x_lo, x_hi, y_lo, y_hi]` of the uniform initial square.
    pub init_box: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmConfig {
    pub model: LgssmModel,
    pub dataset_seed: u64,
    pub reference_chains: usize,
    pub reference_sweeps: u64,
    pub independent_sweeps: u64,
    pub independent_step: f64,
    pub init: InitScheme,
    pub grid_points: usize,
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub values: usize,
    pub components: usize,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub chains: usize,
    pub sweeps: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub parallel: bool,
    pub cadence: u64,
    pub clock: ClockMode,
    pub work_unit_seconds: f64,
    pub proposal: ProposalConfig,
    pub multimodal: Option<MultimodalConfig>,
    pub hmm: Option<HmmConfig>,
    pub oracle: Option<OracleConfig>,
    /// Resolved `key = value` pairs, in key order.
    pub resolved: BTreeMap<String, String>,
}

impl RunConfig {
    fn from_entries(experiment: Experiment, entries: BTreeMap<String, Entry>) -> Result<Self, ConfigError> {
        let v = Values(&entries);
        let declared: Experiment = v.get("experiment")?;
        if declared != experiment {
            return Err(v.invalid(
                "experiment",
                format!("config is for `{declared}` but `{experiment}` was requested"),
            ));
        }
        let chains = v.count("chains", "chains (N)", 1)? as usize;
        let sweeps = v.count("sweeps", "sweeps", 1)?;
        let seed: u64 = v.get("seed")?;
        let parallel: bool = v.get("parallel")?;
        let out = match v.entry("out")?.value.as_str() {
            "" => None,
            path => Some(PathBuf::from(path)),
        };
        let has = |k: &str| entries.contains_key(k);
        let cadence = if has("cadence") { v.count("cadence", "cadence (M)", 1)? } else { 1 };
        let clock = if has("clock") { v.get("clock")? } else { ClockMode::Cpu };
        let work_unit_seconds = if has("work_unit_seconds") { v.positive_f64("work_unit_seconds")? } else { 1e-7 };
        let proposal = if has("d_min") {
            let (d_min, d_max) = (v.positive_f64("d_min")?, v.positive_f64("d_max")?);
            if d_min > d_max {
                return Err(v.invalid("d_min", format!("d_min ({d_min}) exceeds d_max ({d_max})")));
            }
            ProposalConfig {
                d_min,
                d_max,
                centering: v.get("centering")?,
                self_step: if has("self_step") { v.positive_f64("self_step")? } else { 1.0 },
            }
        } else {
            ProposalConfig {
                d_min: DEFAULT_D_MIN,
                d_max: DEFAULT_D_MAX,
                centering: Centering::Current,
                self_step: 1.0,
            }
        };

        let mut cfg = RunConfig {
            experiment,
            chains,
            sweeps,
            seed,
            out,
            parallel,
            cadence,
            clock,
            work_unit_seconds,
            proposal,
            multimodal: None,
            hmm: None,
            oracle: None,
            resolved: entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect(),
        };

        match experiment {
            Experiment::Multimodal => {
                let b: Vec<f64> = v.list("init_box")?;
                if b.len() != 4 || !(b[0] < b[1] && b[2] < b[3]) || b.iter().any(|x| !x.is_finite()) {
                    return Err(v.invalid("init_box", "expected x_lo,x_hi,y_lo,y_hi with lo < hi".into()));
                }
                cfg.multimodal = Some(MultimodalConfig {
                    mixture_variance: v.positive_f64("mixture_variance")?,
                    snapshots: v.list("snapshots")?,
                    init_box: [b[0], b[1], b[2], b[3]],
                });
            }
            Experiment::Hmm => {
                let model = LgssmModel {
                    a_true: v.finite_f64("a_true")?,
                    b: v.finite_f64("b")?,
                    sigma2_w: v.positive_f64("sigma2_w")?,
                    sigma2_v: v.positive_f64("sigma2_v")?,
                    s1_mean: v.finite_f64("s1_mean")?,
                    s1_var: v.positive_f64("s1_var")?,
                    theta_mean: v.finite_f64("theta_mean")?,
                    theta_var: v.positive_f64("theta_var")?,
                    n: v.count("n", "n", 1)? as usize,
                };
                let independent_sweeps = match v.optional::<i128>("independent_sweeps")? {
                    Some(_) => v.count("independent_sweeps", "independent_sweeps", 1)?,
                    None => sweeps.saturating_mul(chains as u64),
                };
                cfg.hmm = Some(HmmConfig {
                    model,
                    dataset_seed: v.optional("dataset_seed")?.unwrap_or(seed),
                    reference_chains: v.count("reference_chains", "reference_chains", 2)? as usize,
                    reference_sweeps: v.count("reference_sweeps", "reference_sweeps", 1)?,
                    independent_sweeps,
                    independent_step: v.positive_f64("independent_step")?,
                    init: v.get("init")?,
                    grid_points: v.count("grid_points", "grid_points", 2)? as usize,
                    concurrent: v.get("concurrent")?,
                });
                let h = cfg.hmm.as_ref().unwrap();
                cfg.resolved
                    .insert("independent_sweeps".into(), h.independent_sweeps.to_string());
                cfg.resolved.insert("dataset_seed".into(), h.dataset_seed.to_string());
            }
            Experiment::OracleCheck => {
                cfg.oracle = Some(OracleConfig {
                    values: v.count("values", "values (M)", 2)? as usize,
                    components: v.count("components", "components (n)", 1)? as usize,
                });
            }
        }
        if matches!(experiment, Experiment::Multimodal | Experiment::Hmm) && cfg.out.is_none() {
            return Err(ConfigError::Missing("out".into()));
        }
        Ok(cfg)
    }

    /// `key = value` lines for the run manifest.
    pub fn manifest_lines(&self) -> Vec<String> {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hmm_with(text: &str) -> Result<RunConfig, ConfigError> {
        let mut raw = RawConfig::new(Experiment::Hmm);
        raw.merge_text(text, "test.conf")?;
        raw.resolve()
    }

    #[test]
    fn empty_file_and_flags_give_defaults() {
        let mut raw = RawConfig::new(Experiment::Multimodal);
        raw.merge_text("", "empty").unwrap();
        raw.set("out", "/tmp/x").unwrap();
        raw.set("seed", "7").unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.chains, 50);
        assert_eq!(cfg.sweeps, 5000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.multimodal.unwrap().snapshots, vec![0, 1000, 5000]);
        assert_eq!(cfg.proposal.centering, Centering::Current);
    }

    #[test]
    fn flag_beats_file() {
        let mut raw = RawConfig::new(Experiment::Hmm);
        raw.merge_text("chains = 10\nout = a\n", "f").unwrap();
        raw.set("chains", "12").unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.chains, 12);
        assert_eq!(cfg.hmm.unwrap().independent_sweeps, 2000 * 12);
    }

    #[test]
    fn negative_chain_count_names_n() {
        let err = hmm_with("out = a\nchains = -3").unwrap_err().to_string();
        assert!(err.contains("chains (N)"), "{err}");
        assert!(err.contains("test.conf:2"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = hmm_with("out = a\n\n  chians = 3 # typo").unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey { key, .. } if key == "chians"));
        assert!(err.to_string().contains("test.conf:3"));
        // keys of other experiments are not accepted either
        assert!(hmm_with("out = a\nsnapshots = 1").is_err());
    }

    #[test]
    fn syntax_and_type_errors() {
        let err = hmm_with("out = a\njust words").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = hmm_with("out = a\nsigma2_w = -1").unwrap_err().to_string();
        assert!(err.contains("sigma2_w"), "{err}");
        let err = hmm_with("out = a\nseed = abc").unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        let err = hmm_with("out = a\ncentering = sideways").unwrap_err().to_string();
        assert!(err.contains("centering"), "{err}");
    }

    #[test]
    fn missing_output_directory() {
        let err = hmm_with("").unwrap_err();
        assert!(matches!(err, ConfigError::Missing(k) if k == "out"));
        let mut raw = RawConfig::new(Experiment::OracleCheck);
        raw.merge_text("", "f").unwrap();
        assert!(raw.resolve().unwrap().out.is_none());
    }

    #[test]
    fn experiment_key_must_agree() {
        let err = hmm_with("out = a\nexperiment = multimodal").unwrap_err().to_string();
        assert!(err.contains("experiment"), "{err}");
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = hmm_with("# header\n out=a \n\tn = 4   # horizon\ncentering = proposer").unwrap();
        let hmm = cfg.hmm.clone().unwrap();
        assert_eq!(hmm.model.n, 4);
        assert_eq!(hmm.dataset_seed, cfg.seed);
        assert_eq!(cfg.proposal.centering, Centering::Proposer);
        assert!(cfg.manifest_lines().contains(&"n = 4".to_string()));
    }

    #[test]
    fn set_pair_parses() {
        let mut raw = RawConfig::new(Experiment::OracleCheck);
        raw.set_pair("values = 4").unwrap();
        assert_eq!(raw.resolve().unwrap().oracle.unwrap().values, 4);
        assert!(raw.set_pair("values4").is_err());
    }
}
