//! Strict run-configuration files: `[section]` headers over `key = value`
//! lines, `#` or `;` full-line comments, whitespace-separated lists.
//! Unknown sections, unknown keys, and duplicate keys are errors, so a
//! typo cannot silently fall back to a default.

use std::collections::BTreeMap;

use epigame::dbmf::{CuringProfile, DegreeDistribution};
use epigame::game::SolveParams;
use epigame::netsim::SimConfig;
use epigame::weighting::WeightingSpec;

use crate::{map_lib, CliError};

/// Every section and key the grammar accepts. A config may hold more
/// sections than one subcommand reads; each subcommand picks what it
/// needs and ignores the rest.
const SCHEMA: &[(&str, &[&str])] = &[
    ("network", &["regular", "degrees", "probs"]),
    ("curing", &["delta"]),
    ("costs", &["c"]),
    ("weighting", &["kind", "alpha"]),
    (
        "solver",
        &["tol_v", "tol_fp", "max_rounds", "verify_eps", "verify_grid"],
    ),
    (
        "sim",
        &[
            "n",
            "t_max",
            "burn_in",
            "seed",
            "replicas",
            "nu",
            "initial_infected_fraction",
            "max_retries",
        ],
    ),
    ("regular", &["d", "c_grid"]),
    ("check", &["seed", "instances", "grid", "samples", "z"]),
];

fn schema_keys(section: &str) -> Option<&'static [&'static str]> {
    SCHEMA
        .iter()
        .find(|(name, _)| *name == section)
        .map(|(_, keys)| *keys)
}

/// FNV-1a over the raw config bytes; stamped into every output so a
/// result file can be matched to the exact configuration that made it.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug)]
pub struct RunConfig {
    entries: BTreeMap<(String, String), String>,
    hash: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| bad(line_no, "unterminated section header"))?
                    .trim();
                if schema_keys(name).is_none() {
                    return Err(bad(line_no, &format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(bad(line_no, "empty key or value"));
            }
            let section = section
                .as_deref()
                .ok_or_else(|| bad(line_no, "key before any [section] header"))?;
            let allowed = schema_keys(section).expect("section was validated");
            if !allowed.contains(&key) {
                return Err(bad(line_no, &format!("unknown key `{key}` in [{section}]")));
            }
            let slot = (section.to_string(), key.to_string());
            if entries.contains_key(&slot) {
                return Err(bad(
                    line_no,
                    &format!("duplicate key `{key}` in [{section}]"),
                ));
            }
            entries.insert(slot, value.to_string());
        }
        Ok(Self {
            entries,
            hash: fnv1a64(text.as_bytes()),
        })
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    fn scalar<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse `{raw}`"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, CliError> {
        self.scalar(section, key)?
            .ok_or_else(|| CliError::Config(format!("missing `{key}` in [{section}]")))
    }

    fn list<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<Vec<T>>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        CliError::Config(format!("[{section}] {key}: cannot parse `{tok}`"))
                    })
                })
                .collect::<Result<Vec<T>, CliError>>()
                .map(Some),
        }
    }

    /// Broadcasts a scalar-or-list value to one entry per degree class.
    fn per_class(
        &self,
        section: &str,
        key: &str,
        classes: usize,
    ) -> Result<Option<Vec<f64>>, CliError> {
        let Some(values) = self.list::<f64>(section, key)? else {
            return Ok(None);
        };
        if values.len() == 1 {
            return Ok(Some(vec![values[0]; classes]));
        }
        if values.len() == classes {
            return Ok(Some(values));
        }
        Err(CliError::Config(format!(
            "[{section}] {key}: got {} values for {classes} degree classes",
            values.len()
        )))
    }

    pub fn network(&self) -> Result<DegreeDistribution<f64>, CliError> {
        let regular = self.scalar::<u32>("network", "regular")?;
        let degrees = self.list::<u32>("network", "degrees")?;
        let probs = self.list::<f64>("network", "probs")?;
        match (regular, degrees, probs) {
            (Some(d), None, None) => DegreeDistribution::regular(d).map_err(map_lib),
            (None, Some(degrees), Some(probs)) => {
                DegreeDistribution::new(degrees, probs).map_err(map_lib)
            }
            (None, None, None) => Err(CliError::Config(
                "missing [network]: give `regular = d` or `degrees`/`probs`".into(),
            )),
            (Some(_), _, _) => Err(CliError::Config(
                "[network] regular excludes degrees/probs".into(),
            )),
            _ => Err(CliError::Config(
                "[network] needs both degrees and probs".into(),
            )),
        }
    }

    pub fn curing(&self, classes: usize) -> Result<CuringProfile<f64>, CliError> {
        let rates = self
            .per_class("curing", "delta", classes)?
            .ok_or_else(|| CliError::Config("missing `delta` in [curing]".into()))?;
        CuringProfile::new(rates).map_err(map_lib)
    }

    pub fn costs(&self, classes: usize) -> Result<Vec<f64>, CliError> {
        self.per_class("costs", "c", classes)?
            .ok_or_else(|| CliError::Config("missing `c` in [costs]".into()))
    }

    /// Per-class weightings; an absent [weighting] section means the
    /// identity (costs weigh true probabilities).
    pub fn weightings(&self, classes: usize) -> Result<Vec<WeightingSpec<f64>>, CliError> {
        let kind = self.get("weighting", "kind");
        let alpha = self.per_class("weighting", "alpha", classes)?;
        match (kind, alpha) {
            (None, None) => Ok(vec![WeightingSpec::Identity; classes]),
            (None, Some(_)) => Err(CliError::Config(
                "[weighting] alpha given without kind".into(),
            )),
            (Some("identity"), None) => Ok(vec![WeightingSpec::Identity; classes]),
            (Some("identity"), Some(_)) => Err(CliError::Config(
                "[weighting] identity takes no alpha".into(),
            )),
            (Some("prelec"), Some(alphas)) => alphas
                .into_iter()
                .map(|a| WeightingSpec::prelec(a).map_err(map_lib))
                .collect(),
            (Some("prelec"), None) => {
                Err(CliError::Config("[weighting] prelec needs alpha".into()))
            }
            (Some(other), _) => Err(CliError::Config(format!(
                "[weighting] unknown kind `{other}` (identity or prelec)"
            ))),
        }
    }

    pub fn solver(&self) -> Result<SolverSettings, CliError> {
        let defaults = SolveParams::<f64>::defaults();
        Ok(SolverSettings {
            params: SolveParams {
                tol_v: self.scalar("solver", "tol_v")?.unwrap_or(defaults.tol_v),
                tol_fp: self.scalar("solver", "tol_fp")?.unwrap_or(defaults.tol_fp),
                max_rounds: self
                    .scalar("solver", "max_rounds")?
                    .unwrap_or(defaults.max_rounds),
            },
            verify_eps: self.scalar("solver", "verify_eps")?.unwrap_or(1e-7),
            verify_grid: self.scalar("solver", "verify_grid")?.unwrap_or(1025),
        })
    }

    pub fn sim(&self) -> Result<SimSettings, CliError> {
        let defaults = SimConfig::default();
        Ok(SimSettings {
            cfg: SimConfig {
                nu: self.scalar("sim", "nu")?.unwrap_or(defaults.nu),
                t_max: self.scalar("sim", "t_max")?.unwrap_or(defaults.t_max),
                burn_in: self.scalar("sim", "burn_in")?.unwrap_or(defaults.burn_in),
                initial_infected_fraction: self
                    .scalar("sim", "initial_infected_fraction")?
                    .unwrap_or(defaults.initial_infected_fraction),
                max_retries: self
                    .scalar("sim", "max_retries")?
                    .unwrap_or(defaults.max_retries),
            },
            n: self.required("sim", "n")?,
            replicas: self.scalar("sim", "replicas")?.unwrap_or(8),
            seed: self.required("sim", "seed")?,
        })
    }

    pub fn regular_block(&self) -> Result<(u32, Vec<f64>), CliError> {
        let d = self.required("regular", "d")?;
        let grid = self
            .list::<f64>("regular", "c_grid")?
            .ok_or_else(|| CliError::Config("missing `c_grid` in [regular]".into()))?;
        Ok((d, grid))
    }

    pub fn check_block(&self) -> Result<CheckSettings, CliError> {
        Ok(CheckSettings {
            seed: self.required("check", "seed")?,
            instances: self.scalar("check", "instances")?.unwrap_or(20),
            grid: self.scalar("check", "grid")?.unwrap_or(1000),
            samples: self.scalar("check", "samples")?.unwrap_or(200),
            z: self.scalar("check", "z")?,
        })
    }
}

fn bad(line_no: usize, msg: &str) -> CliError {
    CliError::Config(format!("config line {line_no}: {msg}"))
}

pub struct SolverSettings {
    pub params: SolveParams<f64>,
    pub verify_eps: f64,
    pub verify_grid: usize,
}

pub struct SimSettings {
    pub cfg: SimConfig,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
}

pub struct CheckSettings {
    pub seed: u64,
    pub instances: usize,
    pub grid: usize,
    pub samples: usize,
    pub z: Option<f64>,
}
