use std::fmt;
use std::path::{Path, PathBuf};

use rbf_pum::system::RunReport;
use rbf_pum::{PumError, Result};

use crate::fit::LineFit;
use crate::svg::{Curve, Plot};

pub const CSV_HEADER: [&str; 10] = [
    "param", "error_inf", "N", "M", "P", "stab_norm", "t_setup", "t_assemble", "t_solve", "flag",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flag {
    Ok,
    /// Error at the rounding floor the stability norm amplifies.
    Floor,
    Failed,
    /// Solved with the fallback shape parameter.
    EpsFallback(f64),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Ok => write!(f, "ok"),
            Flag::Floor => write!(f, "floor"),
            Flag::Failed => write!(f, "failed"),
            Flag::EpsFallback(e) => write!(f, "eps={e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub param: f64,
    pub error_inf: f64,
    pub nodes: usize,
    pub rows: usize,
    pub patches: usize,
    pub stab_norm: Option<f64>,
    pub t_setup: f64,
    pub t_assemble: f64,
    pub t_solve: f64,
    pub flag: Flag,
    /// Mean node spacing `(|B_ρ|/n)^(1/d)`, the `h` of spectral fits.
    pub spacing: f64,
    pub orthogonality: Option<f64>,
    pub orthogonality_rounded: Option<f64>,
    pub message: Option<String>,
}

impl Row {
    pub fn from_report(param: f64, r: &RunReport, spacing: f64, flag: Flag) -> Row {
        Row {
            param,
            error_inf: r.error_inf,
            nodes: r.nodes,
            rows: r.rows,
            patches: r.patches,
            stab_norm: r.stab_norm,
            t_setup: r.timings.setup,
            t_assemble: r.timings.assemble,
            t_solve: r.timings.solve,
            flag,
            spacing,
            orthogonality: r.orthogonality,
            orthogonality_rounded: r.orthogonality_rounded,
            message: None,
        }
    }

    pub fn failed(param: f64, e: &PumError) -> Row {
        Row {
            param,
            error_inf: f64::NAN,
            nodes: 0,
            rows: 0,
            patches: 0,
            stab_norm: None,
            t_setup: f64::NAN,
            t_assemble: f64::NAN,
            t_solve: f64::NAN,
            flag: Flag::Failed,
            spacing: f64::NAN,
            orthogonality: None,
            orthogonality_rounded: None,
            message: Some(e.to_string()),
        }
    }

    /// Wall-clock of producing the solution: setup, assembly and solve.
    pub fn solve_time(&self) -> f64 {
        self.t_setup + self.t_assemble + self.t_solve
    }

    /// Usable for rate fits.
    pub fn fit_ok(&self) -> bool {
        matches!(self.flag, Flag::Ok | Flag::EpsFallback(_)) && self.error_inf > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    /// `e ~ Hᵖ`
    Algebraic,
    /// `e ~ exp(-γ/h)`
    Spectral,
    None,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub rows: Vec<Row>,
    pub fit: Option<LineFit>,
}

impl Series {
    /// Points that went into the fit were all `fit_ok`; the others are
    /// listed here.
    pub fn excluded(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| !r.fit_ok()).map(|r| r.param).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Matched {
    pub method: String,
    pub n: usize,
    pub box_size: f64,
    pub error_inf: f64,
    /// Best of the repeats, in seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: String,
    pub variable: &'static str,
    pub fit_kind: FitKind,
    pub series: Vec<Series>,
    /// Timing comparison only: the cheapest run reaching the target per method.
    pub matched: Vec<Option<Matched>>,
    pub notes: Vec<String>,
}

fn cell(v: f64) -> String {
    format!("{v}")
}

impl Report {
    pub fn csv(&self, series: usize, timings: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| PumError::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(io)?;
        let t = |v: f64| if timings { cell(v) } else { "0".into() };
        for r in &self.series[series].rows {
            w.write_record([
                cell(r.param),
                cell(r.error_inf),
                r.nodes.to_string(),
                r.rows.to_string(),
                r.patches.to_string(),
                r.stab_norm.map(cell).unwrap_or_else(|| "NaN".into()),
                t(r.t_setup),
                t(r.t_assemble),
                t(r.t_solve),
                r.flag.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| PumError::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
    }

    fn file_stem(&self, series: usize) -> String {
        if self.series.len() == 1 {
            self.experiment.clone()
        } else {
            let label: String = self.series[series]
                .label
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                .collect();
            format!("{}-{label}", self.experiment)
        }
    }

    pub fn plot(&self) -> Plot {
        let (x_label, x_log) = match self.variable {
            "H" => ("patch box size H", true),
            "n" => ("1/h", false),
            "beta" => ("oversampling beta = M/N", false),
            "eps" => ("shape parameter eps", true),
            v => (v, true),
        };
        let stab = self.experiment.starts_with("stab");
        let mut curves = Vec::new();
        for s in &self.series {
            let pick = |r: &Row| -> (f64, f64) {
                let x = if self.variable == "n" { 1.0 / r.spacing } else { r.param };
                (x, r.error_inf)
            };
            if self.experiment == "timing" {
                curves.push(Curve {
                    label: s.label.clone(),
                    points: s.rows.iter().map(|r| (r.error_inf, r.solve_time())).collect(),
                });
                continue;
            }
            if stab {
                curves.push(Curve {
                    label: format!("{} norm", s.label),
                    points: s.rows.iter().map(|r| (r.param, r.stab_norm.unwrap_or(f64::NAN))).collect(),
                });
            }
            curves.push(Curve {
                label: format!("{} error", s.label),
                points: s.rows.iter().map(pick).collect(),
            });
        }
        if self.experiment == "timing" {
            return Plot {
                title: "time to solution against accuracy".into(),
                x_label: "max error".into(),
                y_label: "setup + assembly + solve [s]".into(),
                x_log: true,
                y_log: true,
                curves,
            };
        }
        Plot {
            title: self.experiment.clone(),
            x_label: x_label.into(),
            y_label: if stab { "stability norm / max error" } else { "max error" }.into(),
            x_log,
            y_log: true,
            curves,
        }
    }

    /// Writes one CSV per series and an SVG plot; returns the paths.
    pub fn write(&self, dir: &Path, timings: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for k in 0..self.series.len() {
            let p = dir.join(format!("{}.csv", self.file_stem(k)));
            std::fs::write(&p, self.csv(k, timings)?)?;
            out.push(p);
        }
        let p = dir.join(format!("{}.svg", self.experiment));
        std::fs::write(&p, self.plot().render())?;
        out.push(p);
        Ok(out)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for series in &self.series {
            s.push_str(&format!("[{}]\n", series.label));
            for r in &series.rows {
                let stab = r.stab_norm.map(|v| format!("  norm={v:.4e}")).unwrap_or_default();
                let orth = r.orthogonality.map(|v| format!("  orth={v:.2e}")).unwrap_or_default();
                s.push_str(&format!(
                    "  {}={:<10.5} err={:.4e}  N={} M={} P={}{stab}{orth}  t={:.2}s  {}\n",
                    self.variable,
                    r.param,
                    r.error_inf,
                    r.nodes,
                    r.rows,
                    r.patches,
                    r.solve_time(),
                    r.flag
                ));
                if let Some(m) = &r.message {
                    s.push_str(&format!("    {m}\n"));
                }
            }
            if let Some(f) = series.fit {
                let what = match self.fit_kind {
                    FitKind::Algebraic => "slope p",
                    FitKind::Spectral => "rate gamma",
                    FitKind::None => "fit",
                };
                s.push_str(&format!("  {what} = {:.3} (rms residual {:.3})\n", f.slope, f.residual));
            }
            let ex = series.excluded();
            if !ex.is_empty() && self.fit_kind != FitKind::None {
                s.push_str(&format!("  excluded from fit: {ex:?}\n"));
            }
        }
        for m in self.matched.iter().flatten() {
            s.push_str(&format!(
                "matched: {} n={} H={:.4} err={:.3e} time={:.3}s\n",
                m.method, m.n, m.box_size, m.error_inf, m.seconds
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}
