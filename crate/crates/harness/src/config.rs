//! `key=value` experiment files. Blank lines and `#` comments are ignored.

use std::path::{Path, PathBuf};

use rbf_pum::system::RunConfig;
use rbf_pum::{PumError, Result};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Fixed parameters; the swept one is overwritten per point.
    pub base: RunConfig,
    /// Sweep values; the experiment's defaults when absent.
    pub values: Option<Vec<f64>>,
    /// Nodes per patch tried by the timing comparison.
    pub n_values: Vec<usize>,
    /// Error the timing comparison has to reach.
    pub target: f64,
    pub repeats: usize,
    /// Shape parameter to retry with when the local matrices are too
    /// ill-conditioned at the requested one.
    pub eps_fallback: Option<f64>,
    /// When off, timing columns are written as zero so that output is
    /// byte-for-byte reproducible.
    pub timings: bool,
    /// Nothing in the pipeline is randomized; kept so configs can record it.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "alg-conv".into(),
            base: RunConfig::default(),
            values: None,
            n_values: Vec::new(),
            target: 1e-4,
            repeats: 3,
            eps_fallback: None,
            timings: true,
            seed: 0,
            out: None,
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(PumError::Parse {
        line,
        message: message.into(),
    })
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    match v.parse() {
        Ok(x) => Ok(x),
        Err(_) => err(line, format!("`{key}` expects a number, got `{v}`")),
    }
}

/// Accepts plain numbers and simple fractions such as `1/3` or `2.02/7`.
pub fn parse_value(v: &str) -> Option<f64> {
    match v.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => v.trim().parse().ok(),
    }
}

fn value(line: usize, key: &str, v: &str) -> Result<f64> {
    match parse_value(v) {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("`{key}` expects a number, got `{v}`")),
    }
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => err(line, format!("`{key}` expects on/off, got `{v}`")),
    }
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    let xs = v
        .split(',')
        .map(|s| value(line, key, s))
        .collect::<Result<Vec<_>>>()?;
    if xs.is_empty() {
        return err(line, format!("`{key}` is empty"));
    }
    let up = xs.windows(2).all(|w| w[1] > w[0]);
    let down = xs.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return err(line, format!("`{key}` must be strictly monotone"));
    }
    Ok(xs)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, v)) = content.split_once('=') else {
                return err(line, format!("expected key=value, got `{content}`"));
            };
            cfg.set(line, key.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let b = &mut self.base;
        match key {
            "experiment" => self.experiment = v.into(),
            "domain" => b.domain = v.into(),
            "method" => b.method = v.into(),
            "solution" | "problem" => b.problem = v.into(),
            "kernel" => b.kernel = v.into(),
            "eps" => b.eps = Some(value(line, key, v)?),
            "H" | "box_size" => b.box_size = value(line, key, v)?,
            "n" => b.n = num(line, key, v)?,
            "delta" => b.delta = value(line, key, v)?,
            "beta" => b.beta = value(line, key, v)?,
            "probes" => b.probes = num(line, key, v)?,
            "spacing" => b.spacing = Some(value(line, key, v)?),
            "backend" => b.backend = v.into(),
            "precision" => b.precision = v.into(),
            "stability" => b.stability = flag(line, key, v)?,
            "values" => self.values = Some(list(line, key, v)?),
            "n_values" => {
                self.n_values = v
                    .split(',')
                    .map(|s| num(line, key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "target" => self.target = value(line, key, v)?,
            "repeats" => self.repeats = num::<usize>(line, key, v)?.max(1),
            "eps_fallback" => self.eps_fallback = Some(value(line, key, v)?),
            "timings" => self.timings = flag(line, key, v)?,
            "seed" => self.seed = num(line, key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return err(line, format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_fractions() {
        let cfg = ExperimentConfig::parse(
            "# algebraic study\nexperiment = alg-conv\nsolution=u2\nn=55 # order 7\nvalues=0.5,0.4,1/3\nstability=on\n\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, "alg-conv");
        assert_eq!(cfg.base.problem, "u2");
        assert_eq!(cfg.base.n, 55);
        assert!(cfg.base.stability);
        assert_eq!(cfg.values.unwrap(), vec![0.5, 0.4, 1.0 / 3.0]);
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [("n=5\nwhat", 2), ("values=1,2,2", 1), ("H=abc", 1), ("colour=red", 1)] {
            match ExperimentConfig::parse(text) {
                Err(PumError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
