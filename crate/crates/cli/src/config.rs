//! Flat `key = value` run configuration.
//!
//! The format is line oriented: `#` starts a comment, blank lines are
//! ignored, every other line must be `key = value`. Unknown and duplicate
//! keys are rejected by name. Spacings can be given in meters (`d_m`,
//! `dp_m`) or carrier wavelengths (`d_lambdas`, `dp_lambdas`), one form per
//! field; the echoed canonical form always uses meters.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use share_core::eval::{Algorithm, FlopParams, ScenarioGen};
use share_core::{ArrayConfig, CombinerBank, CombinerPolicy, GridSpec, ShareParams, SourceTruth};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("config field '{field}': {msg}")]
    Constraint { field: String, msg: String },
}

/// Which combiner policy the config selected (the random policy draws its
/// rows from the run seed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    FirstK,
    Random,
}

/// One fully validated run description; every subcommand derives its
/// working objects from this.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: usize,
    pub m0: usize,
    pub fc_hz: f64,
    pub d_m: f64,
    pub dp_m: f64,
    pub k: usize,
    pub policy: PolicyKind,
    pub sources: Vec<(f64, f64)>,
    pub num_random_sources: usize,
    pub source_theta_min_deg: f64,
    pub source_theta_max_deg: f64,
    pub source_r_min_m: f64,
    pub source_r_max_m: f64,
    pub n: usize,
    pub snr_db: f64,
    pub noiseless: bool,
    pub seed: u64,
    pub grid_theta_min_deg: f64,
    pub grid_theta_max_deg: f64,
    pub grid_g_theta: usize,
    pub grid_r_min_m: f64,
    pub grid_r_max_m: f64,
    pub grid_g_r: usize,
    pub coarse_g_theta: usize,
    pub delta_theta_deg: f64,
    pub g_delta: usize,
    pub guard_bins: usize,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub beam_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fc_hz = 60.48e9;
        let lambda = share_core::SPEED_OF_LIGHT / fc_hz;
        Self {
            p: 4,
            m0: 16,
            fc_hz,
            d_m: 0.5 * lambda,
            dp_m: 16.0 * lambda,
            k: 16,
            policy: PolicyKind::FirstK,
            sources: vec![(43.3, 4.8), (43.8, 4.6)],
            num_random_sources: 0,
            source_theta_min_deg: -60.0,
            source_theta_max_deg: 60.0,
            source_r_min_m: 1.0,
            source_r_max_m: 10.0,
            n: 32,
            snr_db: 10.0,
            noiseless: false,
            seed: 1,
            grid_theta_min_deg: -60.0,
            grid_theta_max_deg: 60.0,
            grid_g_theta: 121,
            grid_r_min_m: 1.0,
            grid_r_max_m: 9.0,
            grid_g_r: 64,
            coarse_g_theta: 41,
            delta_theta_deg: 3.0,
            g_delta: 14,
            guard_bins: 1,
            algorithms: vec![Algorithm::Share, Algorithm::Omp2d, Algorithm::Music2d],
            trials: 100,
            beam_points: 2401,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "p",
    "m0",
    "fc_hz",
    "d_m",
    "d_lambdas",
    "dp_m",
    "dp_lambdas",
    "k",
    "policy",
    "sources",
    "num_random_sources",
    "source_theta_min_deg",
    "source_theta_max_deg",
    "source_r_min_m",
    "source_r_max_m",
    "n",
    "snr_db",
    "noiseless",
    "seed",
    "grid_theta_min_deg",
    "grid_theta_max_deg",
    "grid_g_theta",
    "grid_r_min_m",
    "grid_r_max_m",
    "grid_g_r",
    "coarse_g_theta",
    "delta_theta_deg",
    "g_delta",
    "guard_bins",
    "algorithms",
    "trials",
    "beam_points",
];

struct RawConfig {
    entries: HashMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: HashMap<String, (usize, String)> = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    msg: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line: line_no, key });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line: line_no, key });
            }
            entries.insert(key, (line_no, value));
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("invalid value '{value}' for key '{key}'"),
    })
}

fn take_parsed<T: std::str::FromStr>(
    raw: &mut RawConfig,
    key: &str,
    default: T,
) -> Result<T, ConfigError> {
    match raw.take(key) {
        Some((line, value)) => parse_value(key, line, &value),
        None => Ok(default),
    }
}

fn parse_sources(line: usize, value: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|item| {
            let item = item.trim();
            let Some((th, r)) = item.split_once(':') else {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("source '{item}' must be 'theta_deg:range_m'"),
                });
            };
            Ok((
                parse_value::<f64>("sources", line, th.trim())?,
                parse_value::<f64>("sources", line, r.trim())?,
            ))
        })
        .collect()
}

fn parse_algorithms(line: usize, value: &str) -> Result<Vec<Algorithm>, ConfigError> {
    value
        .split(',')
        .map(|item| {
            item.trim().parse::<Algorithm>().map_err(|_| ConfigError::Parse {
                line,
                msg: format!("unknown algorithm '{}' (expected share, omp2d or music2d)", item.trim()),
            })
        })
        .collect()
}

/// Parses and fully validates a config document; missing keys fall back to
/// the standard benchmark defaults.
pub fn parse_config_text(text: &str) -> Result<RunConfig, ConfigError> {
    let defaults = RunConfig::default();
    let mut raw = RawConfig::parse(text)?;

    let p = take_parsed(&mut raw, "p", defaults.p)?;
    let m0 = take_parsed(&mut raw, "m0", defaults.m0)?;
    let fc_hz = take_parsed(&mut raw, "fc_hz", defaults.fc_hz)?;
    if !(fc_hz > 0.0) {
        return Err(ConfigError::Constraint {
            field: "fc_hz".into(),
            msg: format!("carrier frequency must be > 0 (got {fc_hz})"),
        });
    }
    let lambda = share_core::SPEED_OF_LIGHT / fc_hz;

    let d_m = resolve_spacing(&mut raw, "d_m", "d_lambdas", lambda, defaults.d_m)?;
    let dp_m = resolve_spacing(&mut raw, "dp_m", "dp_lambdas", lambda, defaults.dp_m)?;

    let k = take_parsed(&mut raw, "k", defaults.k)?;
    let policy = match raw.take("policy") {
        None => defaults.policy,
        Some((line, value)) => match value.as_str() {
            "first-k" => PolicyKind::FirstK,
            "random" => PolicyKind::Random,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("unknown policy '{other}' (expected 'first-k' or 'random')"),
                })
            }
        },
    };

    let sources = match raw.take("sources") {
        Some((line, value)) => parse_sources(line, &value)?,
        None => defaults.sources.clone(),
    };
    let algorithms = match raw.take("algorithms") {
        Some((line, value)) => parse_algorithms(line, &value)?,
        None => defaults.algorithms.clone(),
    };

    let cfg = RunConfig {
        p,
        m0,
        fc_hz,
        d_m,
        dp_m,
        k,
        policy,
        sources,
        num_random_sources: take_parsed(&mut raw, "num_random_sources", defaults.num_random_sources)?,
        source_theta_min_deg: take_parsed(&mut raw, "source_theta_min_deg", defaults.source_theta_min_deg)?,
        source_theta_max_deg: take_parsed(&mut raw, "source_theta_max_deg", defaults.source_theta_max_deg)?,
        source_r_min_m: take_parsed(&mut raw, "source_r_min_m", defaults.source_r_min_m)?,
        source_r_max_m: take_parsed(&mut raw, "source_r_max_m", defaults.source_r_max_m)?,
        n: take_parsed(&mut raw, "n", defaults.n)?,
        snr_db: take_parsed(&mut raw, "snr_db", defaults.snr_db)?,
        noiseless: take_parsed(&mut raw, "noiseless", defaults.noiseless)?,
        seed: take_parsed(&mut raw, "seed", defaults.seed)?,
        grid_theta_min_deg: take_parsed(&mut raw, "grid_theta_min_deg", defaults.grid_theta_min_deg)?,
        grid_theta_max_deg: take_parsed(&mut raw, "grid_theta_max_deg", defaults.grid_theta_max_deg)?,
        grid_g_theta: take_parsed(&mut raw, "grid_g_theta", defaults.grid_g_theta)?,
        grid_r_min_m: take_parsed(&mut raw, "grid_r_min_m", defaults.grid_r_min_m)?,
        grid_r_max_m: take_parsed(&mut raw, "grid_r_max_m", defaults.grid_r_max_m)?,
        grid_g_r: take_parsed(&mut raw, "grid_g_r", defaults.grid_g_r)?,
        coarse_g_theta: take_parsed(&mut raw, "coarse_g_theta", defaults.coarse_g_theta)?,
        delta_theta_deg: take_parsed(&mut raw, "delta_theta_deg", defaults.delta_theta_deg)?,
        g_delta: take_parsed(&mut raw, "g_delta", defaults.g_delta)?,
        guard_bins: take_parsed(&mut raw, "guard_bins", defaults.guard_bins)?,
        algorithms,
        trials: take_parsed(&mut raw, "trials", defaults.trials)?,
        beam_points: take_parsed(&mut raw, "beam_points", defaults.beam_points)?,
    };

    debug_assert!(raw.entries.is_empty(), "unconsumed known keys: {:?}", raw.entries);
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_spacing(
    raw: &mut RawConfig,
    meters_key: &str,
    lambdas_key: &str,
    lambda: f64,
    default_m: f64,
) -> Result<f64, ConfigError> {
    let meters = raw.take(meters_key);
    let lambdas = raw.take(lambdas_key);
    match (meters, lambdas) {
        (Some(_), Some(_)) => Err(ConfigError::Constraint {
            field: meters_key.into(),
            msg: format!("give either {meters_key} or {lambdas_key}, not both"),
        }),
        (Some((line, value)), None) => parse_value::<f64>(meters_key, line, &value),
        (None, Some((line, value))) => {
            Ok(parse_value::<f64>(lambdas_key, line, &value)? * lambda)
        }
        (None, None) => Ok(default_m),
    }
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_text(&text)
}

impl RunConfig {
    /// Cross-field validation by constructing every derived object once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let cfg = self.array()?;
        if self.k > self.m0 {
            return Err(ConfigError::Constraint {
                field: "k".into(),
                msg: format!("K <= M0 required (got K={}, M0={})", self.k, self.m0),
            });
        }
        self.bank()?;
        self.global_grid()?;
        self.coarse_grid()?;
        if self.g_delta < 2 {
            return Err(ConfigError::Constraint {
                field: "g_delta".into(),
                msg: "G_delta must be >= 2".into(),
            });
        }
        if !(self.delta_theta_deg > 0.0) {
            return Err(ConfigError::Constraint {
                field: "delta_theta_deg".into(),
                msg: "window half-width must be > 0".into(),
            });
        }
        if self.trials < 1 {
            return Err(ConfigError::Constraint {
                field: "trials".into(),
                msg: "need at least one trial".into(),
            });
        }
        if self.n < 1 {
            return Err(ConfigError::Constraint {
                field: "n".into(),
                msg: "need at least one snapshot".into(),
            });
        }
        if self.algorithms.is_empty() {
            return Err(ConfigError::Constraint {
                field: "algorithms".into(),
                msg: "select at least one algorithm".into(),
            });
        }
        let l = self.num_sources();
        if l == 0 {
            return Err(ConfigError::Constraint {
                field: "sources".into(),
                msg: "give at least one source or set num_random_sources".into(),
            });
        }
        if l > cfg.num_elements() {
            return Err(ConfigError::Constraint {
                field: "sources".into(),
                msg: format!("L={} exceeds M={} elements", l, cfg.num_elements()),
            });
        }
        if self.num_random_sources == 0 {
            for &(th, r) in &self.sources {
                SourceTruth::new(th, r).map_err(|e| ConfigError::Constraint {
                    field: "sources".into(),
                    msg: e.to_string(),
                })?;
            }
        } else {
            if !(self.source_theta_min_deg < self.source_theta_max_deg) {
                return Err(ConfigError::Constraint {
                    field: "source_theta_min_deg".into(),
                    msg: "random source angle interval is empty".into(),
                });
            }
            if !(0.0 < self.source_r_min_m && self.source_r_min_m < self.source_r_max_m) {
                return Err(ConfigError::Constraint {
                    field: "source_r_min_m".into(),
                    msg: "random source range interval is invalid".into(),
                });
            }
        }
        if self.beam_points < 2 {
            return Err(ConfigError::Constraint {
                field: "beam_points".into(),
                msg: "beampattern needs at least 2 points".into(),
            });
        }
        Ok(())
    }

    pub fn array(&self) -> Result<ArrayConfig, ConfigError> {
        ArrayConfig::new(self.p, self.m0, self.d_m, self.dp_m, self.fc_hz).map_err(|e| {
            ConfigError::Constraint {
                field: "p/m0/d/dp/fc".into(),
                msg: e.to_string(),
            }
        })
    }

    pub fn bank(&self) -> Result<CombinerBank, ConfigError> {
        let policy = match self.policy {
            PolicyKind::FirstK => CombinerPolicy::FirstK,
            PolicyKind::Random => CombinerPolicy::Random { seed: self.seed },
        };
        share_core::compression::dft_combiner_bank(self.m0, self.k, self.p, policy).map_err(|e| {
            ConfigError::Constraint {
                field: "k".into(),
                msg: e.to_string(),
            }
        })
    }

    pub fn global_grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(
            self.grid_theta_min_deg,
            self.grid_theta_max_deg,
            self.grid_g_theta,
            self.grid_r_min_m,
            self.grid_r_max_m,
            self.grid_g_r,
        )
        .map_err(|e| ConfigError::Constraint {
            field: "grid".into(),
            msg: e.to_string(),
        })
    }

    /// Stage-1 grid: the global angle interval sampled with
    /// `coarse_g_theta` points (range part carried over unused).
    pub fn coarse_grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(
            self.grid_theta_min_deg,
            self.grid_theta_max_deg,
            self.coarse_g_theta,
            self.grid_r_min_m,
            self.grid_r_max_m,
            self.grid_g_r,
        )
        .map_err(|e| ConfigError::Constraint {
            field: "coarse_g_theta".into(),
            msg: e.to_string(),
        })
    }

    pub fn share_params(&self) -> Result<ShareParams, ConfigError> {
        Ok(ShareParams {
            coarse_grid: self.coarse_grid()?,
            guard_bins: self.guard_bins,
            delta_theta_deg: self.delta_theta_deg,
            g_delta: self.g_delta,
            range_grid: self.global_grid()?,
            l: self.num_sources(),
        })
    }

    pub fn scenario_gen(&self) -> ScenarioGen {
        if self.num_random_sources > 0 {
            ScenarioGen::Random {
                l: self.num_random_sources,
                theta_min_deg: self.source_theta_min_deg,
                theta_max_deg: self.source_theta_max_deg,
                r_min_m: self.source_r_min_m,
                r_max_m: self.source_r_max_m,
            }
        } else {
            ScenarioGen::Fixed(
                self.sources
                    .iter()
                    .map(|&(th, r)| SourceTruth { theta_deg: th, r_m: r })
                    .collect(),
            )
        }
    }

    pub fn num_sources(&self) -> usize {
        if self.num_random_sources > 0 {
            self.num_random_sources
        } else {
            self.sources.len()
        }
    }

    /// SNR actually applied: `+inf` when `noiseless` is set.
    pub fn effective_snr_db(&self) -> f64 {
        if self.noiseless {
            f64::INFINITY
        } else {
            self.snr_db
        }
    }

    pub fn flop_params(&self) -> FlopParams {
        FlopParams {
            m: self.p * self.m0,
            p: self.p,
            m0: self.m0,
            k: self.k,
            n: self.n,
            l: self.num_sources(),
            g_theta: self.grid_g_theta,
            g_r: self.grid_g_r,
            g_theta_c: self.coarse_g_theta,
            g_delta: self.g_delta,
        }
    }

    /// Canonical `key = value` rendering; parsing it back reproduces this
    /// config exactly (floats print in shortest round-trip form).
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let sources = self
            .sources
            .iter()
            .map(|(th, r)| format!("{th}:{r}"))
            .collect::<Vec<_>>()
            .join(",");
        let algorithms = self
            .algorithms
            .iter()
            .map(|a| a.tag())
            .collect::<Vec<_>>()
            .join(",");
        let policy = match self.policy {
            PolicyKind::FirstK => "first-k",
            PolicyKind::Random => "random",
        };
        let _ = writeln!(out, "p = {}", self.p);
        let _ = writeln!(out, "m0 = {}", self.m0);
        let _ = writeln!(out, "fc_hz = {}", self.fc_hz);
        let _ = writeln!(out, "d_m = {}", self.d_m);
        let _ = writeln!(out, "dp_m = {}", self.dp_m);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "policy = {policy}");
        let _ = writeln!(out, "sources = {sources}");
        let _ = writeln!(out, "num_random_sources = {}", self.num_random_sources);
        let _ = writeln!(out, "source_theta_min_deg = {}", self.source_theta_min_deg);
        let _ = writeln!(out, "source_theta_max_deg = {}", self.source_theta_max_deg);
        let _ = writeln!(out, "source_r_min_m = {}", self.source_r_min_m);
        let _ = writeln!(out, "source_r_max_m = {}", self.source_r_max_m);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "snr_db = {}", self.snr_db);
        let _ = writeln!(out, "noiseless = {}", self.noiseless);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "grid_theta_min_deg = {}", self.grid_theta_min_deg);
        let _ = writeln!(out, "grid_theta_max_deg = {}", self.grid_theta_max_deg);
        let _ = writeln!(out, "grid_g_theta = {}", self.grid_g_theta);
        let _ = writeln!(out, "grid_r_min_m = {}", self.grid_r_min_m);
        let _ = writeln!(out, "grid_r_max_m = {}", self.grid_r_max_m);
        let _ = writeln!(out, "grid_g_r = {}", self.grid_g_r);
        let _ = writeln!(out, "coarse_g_theta = {}", self.coarse_g_theta);
        let _ = writeln!(out, "delta_theta_deg = {}", self.delta_theta_deg);
        let _ = writeln!(out, "g_delta = {}", self.g_delta);
        let _ = writeln!(out, "guard_bins = {}", self.guard_bins);
        let _ = writeln!(out, "algorithms = {algorithms}");
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "beam_points = {}", self.beam_points);
        out
    }
}
