//! Experiment registry. Each study is a strategy behind [`Experiment`],
//! looked up by name from the command line or a config file.

use std::f64::consts::PI;

use rbf_pum::system::{run_with, RunConfig};
use rbf_pum::{PumError, Result};

use crate::config::ExperimentConfig;
use crate::fit::{algebraic_rate, floor_limited, spectral_rate};
use crate::report::{FitKind, Flag, Matched, Report, Row, Series};

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, cfg: &ExperimentConfig) -> Result<Report>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    BoxSize,
    Nodes,
    Beta,
    Eps,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::BoxSize => "H",
            Variable::Nodes => "n",
            Variable::Beta => "beta",
            Variable::Eps => "eps",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig, v: f64) {
        match self {
            Variable::BoxSize => cfg.box_size = v,
            Variable::Nodes => cfg.n = v.round() as usize,
            Variable::Beta => cfg.beta = v,
            Variable::Eps => cfg.eps = Some(v),
        }
    }
}

/// Runs one sweep point; failures become NaN rows.
pub fn run_point(cfg: &RunConfig, param: f64, eps_fallback: Option<f64>) -> Row {
    let attempt = |cfg: &RunConfig, flag: Flag| -> Result<Row> {
        let comps = cfg.components()?;
        let rep = run_with(&comps, cfg)?;
        let d = comps.domain.dim() as f64;
        let vol = if d == 2.0 { PI * rep.radius.powi(2) } else { 4.0 / 3.0 * PI * rep.radius.powi(3) };
        let flag = if flag == Flag::Ok && floor_limited(rep.error_inf, rep.stab_norm) {
            Flag::Floor
        } else {
            flag
        };
        Ok(Row::from_report(param, &rep, (vol / cfg.n as f64).powf(1.0 / d), flag))
    };
    match attempt(cfg, Flag::Ok) {
        Ok(row) => row,
        Err(PumError::Conditioning { .. }) if eps_fallback.is_some() => {
            let eps = eps_fallback.unwrap();
            let retry = RunConfig {
                eps: Some(eps),
                ..cfg.clone()
            };
            attempt(&retry, Flag::EpsFallback(eps)).unwrap_or_else(|e| Row::failed(param, &e))
        }
        Err(e) => Row::failed(param, &e),
    }
}

/// One parameter swept with everything else fixed.
pub struct Sweep {
    pub name: &'static str,
    pub about: &'static str,
    pub variable: Variable,
    pub defaults: &'static [f64],
    pub fit: FitKind,
    /// Always estimate the stability norm, whatever the config says.
    pub stability: bool,
}

impl Sweep {
    pub fn series(&self, cfg: &ExperimentConfig, base: &RunConfig) -> Series {
        let values = cfg.values.clone().unwrap_or_else(|| self.defaults.to_vec());
        let rows: Vec<Row> = values
            .iter()
            .map(|&v| {
                let mut c = base.clone();
                c.stability |= self.stability;
                self.variable.apply(&mut c, v);
                run_point(&c, v, cfg.eps_fallback)
            })
            .collect();
        let used: Vec<&Row> = rows.iter().filter(|r| r.fit_ok()).collect();
        let e: Vec<f64> = used.iter().map(|r| r.error_inf).collect();
        let fit = match self.fit {
            FitKind::Algebraic => algebraic_rate(&used.iter().map(|r| r.param).collect::<Vec<_>>(), &e),
            FitKind::Spectral => spectral_rate(&used.iter().map(|r| r.spacing).collect::<Vec<_>>(), &e),
            FitKind::None => None,
        };
        Series {
            label: format!("{} {} n={}", base.method, base.problem, base.n),
            rows,
            fit,
        }
    }
}

impl Experiment for Sweep {
    fn name(&self) -> &'static str {
        self.name
    }
    fn about(&self) -> &'static str {
        self.about
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Report> {
        cfg.base.components()?;
        let series = self.series(cfg, &cfg.base);
        let mut notes = Vec::new();
        let norms: Vec<f64> = series.rows.iter().filter_map(|r| r.stab_norm).collect();
        if self.stability && norms.len() > 1 {
            let hi = norms.iter().cloned().fold(0.0, f64::max);
            let lo = norms.iter().cloned().fold(f64::INFINITY, f64::min);
            notes.push(format!("stability norm max/min = {:.3}", hi / lo));
        }
        Ok(Report {
            experiment: self.name.into(),
            variable: self.variable.name(),
            fit_kind: self.fit,
            series: vec![series],
            matched: Vec::new(),
            notes,
        })
    }
}

/// Least squares against collocation at matched accuracy: for each method
/// and each `n`, `H` is refined until the error reaches the target, and
/// the cheapest configuration that gets there is timed again.
pub struct TimingComparison;

pub const TIMING_METHODS: [&str; 2] = ["least-squares", "collocation"];

impl Experiment for TimingComparison {
    fn name(&self) -> &'static str {
        "timing"
    }
    fn about(&self) -> &'static str {
        "time to reach a target error, least squares against collocation"
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Report> {
        cfg.base.components()?;
        let values = cfg
            .values
            .clone()
            .unwrap_or_else(|| vec![0.8, 0.5, 0.4, 1.0 / 3.0, 0.25, 0.2, 1.0 / 6.0]);
        let ns = if cfg.n_values.is_empty() { vec![cfg.base.n] } else { cfg.n_values.clone() };
        let mut series = Vec::new();
        let mut matched = Vec::new();
        for method in TIMING_METHODS {
            let mut best: Option<(RunConfig, Row)> = None;
            for &n in &ns {
                let base = RunConfig {
                    method: method.into(),
                    n,
                    stability: false,
                    ..cfg.base.clone()
                };
                let mut rows = Vec::new();
                for &h in &values {
                    let c = RunConfig {
                        box_size: h,
                        ..base.clone()
                    };
                    let row = run_point(&c, h, None);
                    let hit = row.error_inf <= cfg.target;
                    if hit && best.as_ref().map_or(true, |(_, b)| row.solve_time() < b.solve_time()) {
                        best = Some((c, row.clone()));
                    }
                    rows.push(row);
                    if hit {
                        break;
                    }
                }
                series.push(Series {
                    label: format!("{method} n={n}"),
                    rows,
                    fit: None,
                });
            }
            matched.push(best.map(|(c, row)| {
                let mut seconds = row.solve_time();
                for _ in 1..cfg.repeats {
                    let again = run_point(&c, c.box_size, None);
                    if again.flag != Flag::Failed {
                        seconds = seconds.min(again.solve_time());
                    }
                }
                Matched {
                    method: method.into(),
                    n: c.n,
                    box_size: c.box_size,
                    error_inf: row.error_inf,
                    seconds,
                }
            }));
        }
        let mut notes = Vec::new();
        if let [Some(ls), Some(col)] = &matched[..] {
            notes.push(format!(
                "collocation/least-squares time ratio at error <= {:e}: {:.2}",
                cfg.target,
                col.seconds / ls.seconds
            ));
        } else {
            notes.push(format!("a method did not reach the target error {:e}", cfg.target));
        }
        Ok(Report {
            experiment: "timing".into(),
            variable: "H",
            fit_kind: FitKind::None,
            series,
            matched,
            notes,
        })
    }
}

pub const EXPERIMENT_NAMES: &[&str] = &["alg-conv", "spec-conv", "stab-H", "stab-beta", "stab-eps", "timing"];

pub fn experiment_by_name(name: &str) -> Result<Box<dyn Experiment>> {
    let sweep = |name, about, variable, defaults, fit, stability| -> Box<dyn Experiment> {
        Box::new(Sweep {
            name,
            about,
            variable,
            defaults,
            fit,
            stability,
        })
    };
    Ok(match name {
        "alg-conv" => sweep(
            "alg-conv",
            "error against patch size H at fixed n",
            Variable::BoxSize,
            &[0.5, 0.4, 1.0 / 3.0, 0.25, 0.2],
            FitKind::Algebraic,
            false,
        ),
        "spec-conv" => sweep(
            "spec-conv",
            "error against node spacing at fixed H",
            Variable::Nodes,
            &[10.0, 15.0, 21.0, 28.0, 36.0, 45.0, 55.0],
            FitKind::Spectral,
            false,
        ),
        "stab-H" => sweep(
            "stab-H",
            "stability norm against patch size H",
            Variable::BoxSize,
            &[0.8, 0.4, 0.2],
            FitKind::None,
            true,
        ),
        "stab-beta" => sweep(
            "stab-beta",
            "stability norm against oversampling",
            Variable::Beta,
            &[1.1, 1.2, 1.5, 2.0, 3.0],
            FitKind::None,
            true,
        ),
        "stab-eps" => sweep(
            "stab-eps",
            "stability norm against the shape parameter",
            Variable::Eps,
            &[0.5, 1.0, 2.0, 4.0, 8.0],
            FitKind::None,
            true,
        ),
        "timing" => Box::new(TimingComparison),
        _ => {
            return Err(PumError::Unknown {
                kind: "experiment",
                name: name.into(),
                available: EXPERIMENT_NAMES.join(", "),
            })
        }
    })
}
