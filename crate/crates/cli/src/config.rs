//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    Fig2a,
    Fig2b,
    Regret,
    Noback,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2a => "fig2a",
            ExperimentKind::Fig2b => "fig2b",
            ExperimentKind::Regret => "regret_curve",
            ExperimentKind::Noback => "noback_demo",
            ExperimentKind::Oracle => "oracle_suite",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "fig2a" => ExperimentKind::Fig2a,
            "fig2b" => ExperimentKind::Fig2b,
            "regret" | "regret_curve" => ExperimentKind::Regret,
            "noback" | "noback_demo" => ExperimentKind::Noback,
            "oracle" | "oracle_suite" => ExperimentKind::Oracle,
            other => return Err(ConfigError::Invalid(format!("unknown experiment `{other}`"))),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Consumption {
    Iid,
    Markov { stickiness: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: Vec<usize>,
    /// `m = floor(m_factor * n)` unless `m` is fixed.
    pub m_factor: f64,
    pub m: Option<usize>,
    pub denom: u32,
    pub z_min: u32,
    pub z_max: u32,
    /// Explicit grid numerators instead of random draws; must match every `n`.
    pub p: Option<Vec<u32>>,
    pub theta: f64,
    pub h: Vec<f64>,
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
    /// Exploration rounds; derived from the instance when absent.
    pub w: Option<u32>,
    pub r: u32,
    pub consumption: Consumption,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            n: vec![10, 15, 20, 25, 30],
            m_factor: 0.4,
            m: None,
            denom: 20,
            z_min: 8,
            z_max: 16,
            p: None,
            theta: 0.5,
            h: vec![0.4, 0.6, 0.8],
            horizon: 10_000,
            replications: 10,
            seed: 1,
            w: None,
            r: 2,
            consumption: Consumption::Iid,
        };
        match kind {
            ExperimentKind::Fig2a | ExperimentKind::Fig2b => base,
            ExperimentKind::Regret => ExperimentConfig {
                n: vec![4],
                m: Some(2),
                p: Some(vec![8, 10, 12, 14]),
                h: vec![1.0],
                horizon: 1_000_000,
                replications: 50,
                ..base
            },
            ExperimentKind::Noback => ExperimentConfig {
                n: vec![5, 10, 15, 20],
                h: vec![1.0],
                horizon: 0,
                replications: 100,
                ..base
            },
            ExperimentKind::Oracle => ExperimentConfig {
                n: vec![3, 4, 5, 6, 7, 8],
                denom: 10,
                z_min: 1,
                z_max: 10,
                h: vec![1.0],
                horizon: 0,
                replications: 200,
                ..base
            },
        }
    }

    /// Parses `text` on top of the defaults for `kind`. An `experiment` key, if
    /// present, must agree with `kind`.
    pub fn parse(text: &str, kind: ExperimentKind) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(kind);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or_default().trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|msg| ConfigError::Syntax { line, msg })?;
        }
        if cfg.experiment != kind {
            return Err(ConfigError::Invalid(format!(
                "config is for `{}` but `{kind}` was requested",
                cfg.experiment
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: ConfigError| e.to_string())?,
            "n" => self.n = list(value)?,
            "m_factor" => self.m_factor = scalar(value)?,
            "m" => self.m = Some(scalar(value)?),
            "denom" => self.denom = scalar(value)?,
            "z_min" => self.z_min = scalar(value)?,
            "z_max" => self.z_max = scalar(value)?,
            "p" => self.p = Some(list(value)?),
            "theta" => self.theta = scalar(value)?,
            "h" => self.h = list(value)?,
            "T" => self.horizon = scalar(value)?,
            "replications" => self.replications = scalar(value)?,
            "seed" => self.seed = scalar(value)?,
            "w" => self.w = Some(scalar(value)?),
            "r" => self.r = scalar(value)?,
            "consumption" => {
                self.consumption = match value {
                    "iid" => Consumption::Iid,
                    "markov" => Consumption::Markov { stickiness: 0.9 },
                    other => return Err(format!("unknown consumption `{other}`")),
                }
            }
            "stickiness" => match &mut self.consumption {
                Consumption::Markov { stickiness } => *stickiness = scalar(value)?,
                Consumption::Iid => return Err("`stickiness` needs `consumption = markov` first".into()),
            },
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("`n` needs at least one positive value".into());
        }
        for &n in &self.n {
            if self.channels(n) == 0 {
                return bad(format!("channel rule gives m = 0 for n = {n}"));
            }
        }
        if !(self.denom > 0 && self.z_min <= self.z_max && self.z_max <= self.denom) {
            return bad(format!(
                "grid {}..={} over {} is not inside [0, 1]",
                self.z_min, self.z_max, self.denom
            ));
        }
        if let Some(p) = &self.p {
            if self.n.iter().any(|&n| n != p.len()) {
                return bad("explicit `p` must have one entry per user for every `n`".into());
            }
            if p.iter().any(|&z| z > self.denom) {
                return bad("explicit `p` exceeds the grid denominator".into());
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta {} not in (0, 1)", self.theta));
        }
        if self.h.is_empty() || self.h.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return bad("every `h` must lie in (0, 1]".into());
        }
        if self.replications == 0 {
            return bad("`replications` must be positive".into());
        }
        let simulates = matches!(
            self.experiment,
            ExperimentKind::Fig2a | ExperimentKind::Fig2b | ExperimentKind::Regret
        );
        if simulates && self.horizon == 0 {
            return bad("`T` must be positive".into());
        }
        if self.r < 2 || self.w == Some(0) {
            return bad("need r >= 2 and w >= 1".into());
        }
        if let Consumption::Markov { stickiness } = self.consumption {
            if !(0.0..1.0).contains(&stickiness) {
                return bad(format!("stickiness {stickiness} not in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn channels(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| (self.m_factor * n as f64 + 1e-9).floor() as usize)
    }

    /// Canonical `key = value` rendering; parsing it yields the same config.
    pub fn render(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("experiment", self.experiment.to_string());
        kv.insert("n", join(self.n.iter().map(|x| x.to_string()).collect()));
        kv.insert("m_factor", self.m_factor.to_string());
        if let Some(m) = self.m {
            kv.insert("m", m.to_string());
        }
        kv.insert("denom", self.denom.to_string());
        kv.insert("z_min", self.z_min.to_string());
        kv.insert("z_max", self.z_max.to_string());
        if let Some(p) = &self.p {
            kv.insert("p", join(p.iter().map(|x| x.to_string()).collect()));
        }
        kv.insert("theta", self.theta.to_string());
        kv.insert("h", join(self.h.iter().map(|x| x.to_string()).collect()));
        kv.insert("T", self.horizon.to_string());
        kv.insert("replications", self.replications.to_string());
        kv.insert("seed", self.seed.to_string());
        if let Some(w) = self.w {
            kv.insert("w", w.to_string());
        }
        kv.insert("r", self.r.to_string());
        match self.consumption {
            Consumption::Iid => {
                kv.insert("consumption", "iid".into());
            }
            Consumption::Markov { stickiness } => {
                kv.insert("consumption", "markov".into());
                kv.insert("stickiness", stickiness.to_string());
            }
        }
        // `stickiness` must follow `consumption` when read back
        let mut out = String::new();
        for (k, v) in &kv {
            if *k != "stickiness" {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        if let Some(s) = kv.get("stickiness") {
            out.push_str(&format!("stickiness = {s}\n"));
        }
        out
    }
}

fn scalar<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',').map(|x| scalar(x.trim())).collect()
}
