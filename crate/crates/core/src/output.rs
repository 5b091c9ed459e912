//! Flat-file artifacts: CSV with `#` metadata lines, mirrored JSON, and
//! plotting-script emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::background::BackgroundBudget;
use crate::config::{Conventions, ExperimentConfig};
use crate::error::{Error, Result};
use crate::langevin::{MonteCarloSummary, Trajectory};
use crate::noise::{ExclusionCurve, NoiseBudget, T1Point};
use crate::spectral::Psd;
use crate::trap::TrapProfile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn parse(field: &str) -> Cell {
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Num(v),
            _ => Cell::Text(field.to_string()),
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub version: String,
    pub thermal_convention: String,
    pub force_convention: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(config_hash: impl Into<String>, conventions: Conventions) -> Self {
        Metadata {
            config_hash: config_hash.into(),
            version: VERSION.to_string(),
            thermal_convention: conventions.thermal.tag().to_string(),
            force_convention: conventions.force.tag().to_string(),
            extra: BTreeMap::new(),
        }
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Metadata::new(cfg.config_hash(), cfg.conventions)
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    /// Shortest exact scientific form.
    pub fn with_num(self, key: &str, value: f64) -> Self {
        self.with(key, format!("{value:e}"))
    }

    fn lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("config_hash".to_string(), self.config_hash.clone()),
            ("version".to_string(), self.version.clone()),
            ("thermal_convention".to_string(), self.thermal_convention.clone()),
            ("force_convention".to_string(), self.force_convention.clone()),
        ];
        out.extend(self.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(metadata: Metadata, columns: &[&str]) -> Self {
        Table {
            metadata,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.into_iter().map(Cell::as_f64).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut text = String::new();
        for (k, v) in self.metadata.lines() {
            let _ = writeln!(text, "# {k}: {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        text.push_str(&String::from_utf8_lossy(&body));
        Ok(text)
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut meta = BTreeMap::new();
        let mut body = String::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.trim().split_once(':').ok_or_else(|| Error::Malformed {
                    line: n + 1,
                    key: "metadata".into(),
                    text: line.to_string(),
                })?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut take = |k: &str| meta.remove(k).unwrap_or_default();
        let metadata = Metadata {
            config_hash: take("config_hash"),
            version: take("version"),
            thermal_convention: take("thermal_convention"),
            force_convention: take("force_convention"),
            extra: BTreeMap::new(),
        };
        let metadata = Metadata {
            extra: meta,
            ..metadata
        };
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(Cell::parse).collect()))
            .collect::<Result<Vec<Vec<Cell>>>>()?;
        Ok(Table {
            metadata,
            columns,
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Table> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `<stem>.csv` and `<stem>.json` under `dir` and returns both paths.
pub fn write_outputs(dir: &Path, stem: &str, table: &Table) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::validation("table", format!("`{stem}` has no rows")));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, table.to_csv()?)?;
    fs::write(&json_path, table.to_json()?)?;
    Ok(vec![csv_path, json_path])
}

pub fn read_csv(path: &Path) -> Result<Table> {
    Table::from_csv(&fs::read_to_string(path)?)
}

/// Per-source PSD rows compare S_ff; the limit rows compare g.
pub fn budget_table(b: &NoiseBudget, meta: Metadata) -> Table {
    let meta = meta
        .with_num("lambda_m", b.lambda)
        .with_num("t1_s", b.t1)
        .with_num("gtilde_s", b.gtilde)
        .with_num("delta_f_s_N", b.delta_f_s)
        .with("notes", b.notes.join(" | "));
    let mut t = Table::new(
        meta,
        &[
            "source",
            "S_ff_N2_per_Hz",
            "g_contribution",
            "reference_value",
            "ratio",
            "compared",
        ],
    );
    let find = |name: &str| b.rows.iter().find(|r| r.name == name);
    let psd_rows = [
        ("thermal", b.g_thermal),
        ("backaction+imprecision", b.g_measurement),
        ("spin-induced", b.g_background),
    ];
    for (name, g) in psd_rows {
        if let Some(r) = find(name) {
            t.push(vec![
                name.into(),
                r.computed.into(),
                g.into(),
                r.reference.into(),
                r.ratio.into(),
                "S_ff".into(),
            ]);
        }
    }
    let s_total = b.s_fluctuation + b.s_background;
    for name in ["g_limit", "g_limit_chain", "g_limit_thermal"] {
        if let Some(r) = find(name) {
            let s = if name == "g_limit_thermal" {
                b.s_thermal
            } else {
                s_total
            };
            t.push(vec![
                name.into(),
                s.into(),
                r.computed.into(),
                r.reference.into(),
                r.ratio.into(),
                "g".into(),
            ]);
        }
    }
    t
}

/// `g_limit` is the worst-case value when the curve carries one.
pub fn exclusion_table(c: &ExclusionCurve, meta: Metadata) -> Table {
    let meta = meta
        .with_num("t1_s", c.t1)
        .with_num("delta_f_s_N", c.delta_f_s)
        .with("delta_f_origin", &c.delta_f_origin);
    let mut t = Table::new(
        meta,
        &["lambda_m", "m_a_eV", "g_limit", "worst_case_flag", "g_limit_nominal"],
    );
    for r in &c.rows {
        let g = r.g_worst.unwrap_or(r.g_limit);
        t.push(vec![
            r.lambda.into(),
            r.mass_ev.into(),
            g.into(),
            r.g_worst.is_some().into(),
            r.g_limit.into(),
        ]);
    }
    t
}

pub fn t1_table(points: &[T1Point], meta: Metadata) -> Table {
    let mut t = Table::new(meta, &["t1_s", "fluctuation", "background", "total"]);
    for p in points {
        t.push(vec![
            p.t1.into(),
            p.fluctuation.into(),
            p.background.into(),
            p.total.into(),
        ]);
    }
    t
}

pub fn background_table(b: &BackgroundBudget, meta: Metadata) -> Table {
    let meta = meta
        .with_num("zeta_s_m3", b.zeta_s)
        .with_num("f_s_N", b.f_s)
        .with_num("total_delta_zeta_m3", b.total_delta_zeta)
        .with_num("total_delta_f_N", b.total_delta_f);
    let mut t = Table::new(
        meta,
        &[
            "parameter",
            "size_m",
            "sigma_m",
            "dzeta_dp_m2",
            "delta_zeta_m3",
            "delta_f_N",
        ],
    );
    for r in &b.rows {
        t.push(vec![
            r.param.label().into(),
            r.size.into(),
            r.sigma.into(),
            r.derivative.into(),
            r.delta_zeta.into(),
            r.delta_f.into(),
        ]);
    }
    t
}

pub fn trap_table(p: &TrapProfile, meta: Metadata) -> Table {
    let meta = meta
        .with_num("z_eq_m", p.z_eq)
        .with_num("gap_eq_m", p.gap_eq)
        .with_num("omega_z_rad_s", p.omega_z)
        .with_num("depth_J", p.depth);
    let mut t = Table::new(meta, &["z_m", "energy_J", "slope_N"]);
    for i in 0..p.z.len() {
        t.push(vec![p.z[i].into(), p.energy[i].into(), p.slope[i].into()]);
    }
    t
}

pub fn gtilde_table(points: &[(f64, f64)], meta: Metadata) -> Table {
    let mut t = Table::new(meta, &["omega_rad_s", "gtilde_s"]);
    for &(w, g) in points {
        t.push(vec![w.into(), g.into()]);
    }
    t
}

pub fn trajectory_table(tr: &Trajectory, meta: Metadata) -> Table {
    let meta = meta.with("seed", tr.seed).with_num("sample_dt_s", tr.sample_dt);
    let mut t = Table::new(meta, &["t_s", "z_m", "v_m_per_s"]);
    for i in 0..tr.t.len() {
        t.push(vec![tr.t[i].into(), tr.z[i].into(), tr.v[i].into()]);
    }
    t
}

pub fn psd_table(p: &Psd, meta: Metadata) -> Table {
    let meta = meta
        .with("segments", p.segments)
        .with_num("resolution_Hz", p.resolution);
    let mut t = Table::new(meta, &["frequency_Hz", "S_zz_m2_per_Hz"]);
    for (f, s) in p.frequency.iter().zip(&p.density) {
        t.push(vec![(*f).into(), (*s).into()]);
    }
    t
}

pub fn montecarlo_table(m: &MonteCarloSummary, meta: Metadata) -> Table {
    let meta = meta
        .with_num("mean_N", m.mean)
        .with_num("std_N", m.std)
        .with_num("std_error_N", m.std_error);
    let mut t = Table::new(meta, &["seed", "amplitude_N", "std_error_N", "mean_square_m2"]);
    for o in &m.outcomes {
        t.push(vec![
            (o.seed as f64).into(),
            o.estimate.amplitude.into(),
            o.estimate.std_error.into(),
            o.mean_square.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Exclusion,
    T1,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotStyle {
    pub title: Option<String>,
    pub color: Option<String>,
    pub output: Option<String>,
}

fn py_str(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| "\"\"".into())
}

/// A standalone matplotlib script that reads only the given CSV files.
pub fn emit_plot_script(kind: PlotKind, files: &[PathBuf], style: &PlotStyle) -> Result<String> {
    if files.is_empty() {
        return Err(Error::validation("files", "no curve files given"));
    }
    for f in files {
        if !f.is_file() {
            return Err(Error::validation("files", format!("{} does not exist", f.display())));
        }
    }
    let (default_title, default_color, default_out) = match kind {
        PlotKind::Exclusion => ("Projected exclusion", "red", "exclusion.png"),
        PlotKind::T1 => ("Limit versus T1", "blue", "t1.png"),
    };
    let title = style.title.as_deref().unwrap_or(default_title);
    let color = style.color.as_deref().unwrap_or(default_color);
    let out = style.output.as_deref().unwrap_or(default_out);
    let paths: Vec<String> = files.iter().map(|f| py_str(&f.display().to_string())).collect();

    let mut s = String::new();
    s.push_str("import csv\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("def load(path):\n    with open(path) as fh:\n        rows = list(csv.DictReader(line for line in fh if not line.startswith(\"#\")))\n    return rows\n\n");
    let _ = writeln!(s, "FILES = [{}]", paths.join(", "));
    s.push_str("fig, ax = plt.subplots(figsize=(6, 4.5))\n");
    match kind {
        PlotKind::Exclusion => {
            s.push_str("for path in FILES:\n    rows = load(path)\n");
            s.push_str("    x = [float(r[\"lambda_m\"]) for r in rows]\n");
            s.push_str("    y = [float(r[\"g_limit\"]) for r in rows]\n");
            let _ = writeln!(s, "    ax.plot(x, y, color={}, label=path)", py_str(color));
            s.push_str("ax.set_xscale(\"log\")\nax.set_yscale(\"log\")\n");
            s.push_str("ax.set_xlabel(\"lambda (m)\")\nax.set_ylabel(\"g_s g_p\")\n");
        }
        PlotKind::T1 => {
            s.push_str("for path in FILES:\n    rows = load(path)\n");
            s.push_str("    x = [float(r[\"t1_s\"]) for r in rows]\n");
            s.push_str(
                "    ax.plot(x, [float(r[\"fluctuation\"]) for r in rows], color=\"orange\", label=\"fluctuation\")\n",
            );
            s.push_str(
                "    ax.plot(x, [float(r[\"background\"]) for r in rows], color=\"green\", label=\"background\")\n",
            );
            let _ = writeln!(
                s,
                "    ax.plot(x, [float(r[\"total\"]) for r in rows], color={}, label=\"total\")",
                py_str(color)
            );
            s.push_str("ax.set_xscale(\"log\")\n");
            s.push_str("ax.set_xlabel(\"T1 (s)\")\nax.set_ylabel(\"g_s g_p\")\n");
        }
    }
    let _ = writeln!(s, "ax.set_title({})", py_str(title));
    s.push_str("ax.legend()\nfig.tight_layout()\n");
    let _ = writeln!(s, "fig.savefig({})", py_str(out));
    Ok(s)
}
