//! `alp` command dispatch. [`run`] parses argv, computes, writes artifacts
//! and returns what happened; `main` only prints and exits.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use alpforce_core::background::{
    force_per_volume, optimize_geometry, project_to_null, propagate_uncertainty, sensitivity_sweep, GeometryParam,
    OptimizeOptions, ShapeBounds,
};
use alpforce_core::langevin::{estimate_psd, monte_carlo, seed_range, simulate, SimulationConfig};
use alpforce_core::modulation::gtilde;
use alpforce_core::noise::{
    background_force_uncertainty, crossover_t1, exclusion_curve, g_limit_vs_t1, log_grid, noise_budget, reference,
    schedule_for,
};
use alpforce_core::output::{
    background_table, budget_table, emit_plot_script, exclusion_table, gtilde_table, montecarlo_table, psd_table,
    t1_table, trajectory_table, trap_table, write_outputs, Cell, Metadata, PlotKind, PlotStyle, Table,
};
use alpforce_core::spin_mass::{zeta_sm, zeta_sm_bruteforce};
use alpforce_core::trap::{resonance_and_depth, TrapModel};
use alpforce_core::validate::run_all;
use alpforce_core::{load_config, Convention, Error, ExperimentConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// One line, plain text or JSON.
    pub summary: String,
}

#[derive(Parser, Debug)]
#[command(name = "alp", version, about = "ALP spin-mass force sensitivity toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Config file (`key = value [unit]` lines).
    #[arg(long, global = true, env = "ALP_CONFIG")]
    config: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "alp-out")]
    out: PathBuf,
    #[arg(long, global = true)]
    thermal_convention: Option<String>,
    #[arg(long, global = true)]
    force_convention: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Noise budget and coupling limit at one range.
    Budget {
        #[arg(long, default_value_t = 2.0)]
        lambda_um: f64,
        /// Spin relaxation time, s (default: config `t1`).
        #[arg(long)]
        t1: Option<f64>,
        /// Also write the limit components versus T1 and a plotting script.
        #[arg(long)]
        t1_curve: bool,
    },
    /// Geometry tolerance budget for the background force.
    BudgetGeometry {
        /// Use the configured geometry instead of its nearest null.
        #[arg(long)]
        at_configured: bool,
        /// Parameter label to sweep (L1, L2, R_s1, R_s2, d, R).
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        sweep_half_um: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
    },
    /// Simplex search for a background null.
    Optimize {
        #[arg(long, default_value_t = 2.0)]
        half_width_um: f64,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        evaluations: usize,
        #[arg(long, default_value_t = 1e-23)]
        target: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Coupling limit versus range.
    Exclusion {
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda_min_um: f64,
        #[arg(long, default_value_t = 50.0)]
        lambda_max_um: f64,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        worst_case: bool,
        /// Background uncertainty from the tabulated budget RSS.
        #[arg(long)]
        tabulated: bool,
        /// Also write a plotting script.
        #[arg(long)]
        plot: bool,
    },
    /// Trap equilibrium, resonance and depth.
    Trap {
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long, default_value_t = 2.0)]
        span_um: f64,
    },
    /// Modulation spectrum G̃(ω).
    Gtilde {
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        min_ratio: f64,
        #[arg(long, default_value_t = 10.0)]
        max_ratio: f64,
    },
    /// Spin-mass effective volume.
    ZetaSm {
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0, 10.0])]
        lambda_um: Vec<f64>,
        /// Add the quadrature over the finite source body.
        #[arg(long)]
        bruteforce: bool,
    },
    /// One Langevin trajectory and its spectrum.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_psd: bool,
    },
    /// Ensemble of Langevin runs with signal recovery.
    Montecarlo {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 32)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long, default_value_t = 10)]
        blocks: usize,
    },
    /// Every oracle-equivalence suite.
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value_t = 600.0)]
    duration: f64,
    /// Damping raised to the inflated validation value.
    #[arg(long)]
    inflated: bool,
    /// Coupling product g_s·g_p of the injected spin-mass force.
    #[arg(long, default_value_t = 0.0)]
    g: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda_um: f64,
    #[arg(long, default_value_t = 64)]
    steps_per_period: usize,
    #[arg(long, default_value_t = 1)]
    decimation: usize,
}

impl SimArgs {
    fn config(&self, seed: u64) -> SimulationConfig {
        let sim = SimulationConfig {
            steps_per_period: self.steps_per_period,
            duration: self.duration,
            seed,
            spin_mass: self.g != 0.0,
            g_product: self.g,
            lambda: self.lambda_um * 1e-6,
            decimation: self.decimation,
            ..SimulationConfig::default()
        };
        if self.inflated {
            sim.inflated()
        } else {
            sim
        }
    }
}

struct Outcome {
    artifacts: Vec<PathBuf>,
    warnings: Vec<String>,
    text: String,
    json: serde_json::Value,
    failed: bool,
}

impl Outcome {
    fn new(text: String, json: serde_json::Value) -> Self {
        Outcome {
            artifacts: Vec::new(),
            warnings: Vec::new(),
            text,
            json,
            failed: false,
        }
    }
}

pub fn run<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return CommandResult {
                exit_code: code,
                artifacts: Vec::new(),
                warnings: Vec::new(),
                summary: e.render().to_string(),
            };
        }
    };
    let json = cli.global.json;
    match execute(&cli) {
        Ok(o) => CommandResult {
            exit_code: if o.failed { 1 } else { 0 },
            summary: if json { o.json.to_string() } else { o.text },
            artifacts: o.artifacts,
            warnings: o.warnings,
        },
        Err(e) => CommandResult {
            exit_code: 1,
            artifacts: Vec::new(),
            warnings: Vec::new(),
            summary: if json {
                json!({ "error": e.to_string() }).to_string()
            } else {
                format!("error: {e}")
            },
        },
    }
}

fn load(global: &GlobalArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &global.config {
        Some(path) => load_config(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    let parse = |key: &str, v: &Option<String>, current: Convention| match v {
        Some(text) => {
            Convention::parse(text).ok_or_else(|| Error::validation(key, format!("unknown convention `{text}`")))
        }
        None => Ok(current),
    };
    cfg.conventions.thermal = parse(
        "thermal_convention",
        &global.thermal_convention,
        cfg.conventions.thermal,
    )?;
    cfg.conventions.force = parse("force_convention", &global.force_convention, cfg.conventions.force)?;
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &mut Outcome, dir: &Path, stem: &str, table: &Table) -> Result<(), Error> {
    out.artifacts.extend(write_outputs(dir, stem, table)?);
    Ok(())
}

fn emit_script(out: &mut Outcome, dir: &Path, kind: PlotKind, csv: PathBuf, name: &str) -> Result<(), Error> {
    let script = emit_plot_script(kind, &[csv], &PlotStyle::default())?;
    let path = dir.join(name);
    fs::write(&path, script)?;
    out.artifacts.push(path);
    Ok(())
}

fn tabulated_delta_f(cfg: &ExperimentConfig) -> f64 {
    force_per_volume(
        cfg.source.effective_spin_density(),
        cfg.sphere.susceptibility,
        cfg.trap.field_gradient,
        cfg.conventions.force,
    )
    .abs()
        * reference::BUDGET_RSS
}

fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let cfg = load(&cli.global)?;
    let dir = cli.global.out.as_path();
    let meta = || Metadata::for_config(&cfg);
    match &cli.command {
        Command::Budget {
            lambda_um,
            t1,
            t1_curve,
        } => {
            let lambda = lambda_um * 1e-6;
            let t1 = t1.unwrap_or(cfg.modulation.t1);
            let delta_f = background_force_uncertainty(&cfg)?;
            let b = noise_budget(&cfg, lambda, t1, delta_f)?;
            let mut o = Outcome::new(
                format!(
                    "budget: g_limit {:.3e} (chain {:.3e}, thermal-only {:.3e}) at lambda {lambda:.2e} m, T1 {t1} s",
                    b.g_total, b.g_tabulated_chain, b.g_thermal
                ),
                json!({ "command": "budget", "lambda_m": lambda, "t1_s": t1, "g_limit": b.g_total,
                        "g_limit_chain": b.g_tabulated_chain, "g_limit_thermal": b.g_thermal }),
            );
            o.warnings.extend(schedule_for(&cfg, t1)?.warnings());
            o.warnings.extend(b.notes.iter().cloned());
            emit(&mut o, dir, "budget", &budget_table(&b, meta()))?;
            if *t1_curve {
                let grid = log_grid(1e-4, 1e2, 61)?;
                let points = g_limit_vs_t1(&cfg, lambda, &grid, delta_f)?;
                let cross = crossover_t1(&cfg, lambda, delta_f)?;
                emit(
                    &mut o,
                    dir,
                    "t1",
                    &t1_table(&points, meta().with_num("crossover_t1_s", cross)),
                )?;
                emit_script(&mut o, dir, PlotKind::T1, dir.join("t1.csv"), "plot_t1.py")?;
            }
            Ok(o)
        }
        Command::BudgetGeometry {
            at_configured,
            sweep,
            sweep_half_um,
            steps,
        } => {
            let geometry = if *at_configured {
                cfg.source
            } else {
                project_to_null(&cfg.source, cfg.sphere.radius, &cfg.trap)?
            };
            let b = propagate_uncertainty(&geometry, &cfg.sphere, &cfg.trap, cfg.conventions.force)?;
            let mut o = Outcome::new(
                format!(
                    "budget-geometry: zeta_s {:.3e} m3, RSS delta_zeta {:.3e} m3, delta_F {:.3e} N",
                    b.zeta_s, b.total_delta_zeta, b.total_delta_f
                ),
                json!({ "command": "budget-geometry", "zeta_s": b.zeta_s,
                        "total_delta_zeta": b.total_delta_zeta, "total_delta_f": b.total_delta_f }),
            );
            emit(&mut o, dir, "budget_geometry", &background_table(&b, meta()))?;
            if let Some(label) = sweep {
                let param = GeometryParam::parse(label)
                    .ok_or_else(|| Error::validation("sweep", format!("unknown parameter `{label}`")))?;
                let h = sweep_half_um * 1e-6;
                let rows = sensitivity_sweep(
                    &geometry,
                    &cfg.sphere,
                    &cfg.trap,
                    param,
                    (-h, h),
                    *steps,
                    cfg.conventions.force,
                )?;
                let mut t = Table::new(meta().with("parameter", param.label()), &["delta_m", "delta_f_N"]);
                for (d, f) in rows {
                    t.push(vec![d.into(), f.into()]);
                }
                emit(&mut o, dir, "sweep", &t)?;
            }
            Ok(o)
        }
        Command::Optimize {
            half_width_um,
            restarts,
            evaluations,
            target,
            seed,
        } => {
            let opts = OptimizeOptions {
                target: *target,
                restarts: *restarts,
                evaluations_per_restart: *evaluations,
                seed: *seed,
                ..OptimizeOptions::default()
            };
            let bounds = ShapeBounds::around(&cfg.source, half_width_um * 1e-6);
            let r = optimize_geometry(&cfg.source, cfg.sphere.radius, &cfg.trap, bounds, &opts)?;
            let mut o = Outcome::new(
                format!(
                    "optimize: |zeta_s| {:.3e} -> {:.3e} m3 (target {:.1e}, converged {})",
                    r.initial_zeta_s.abs(),
                    r.achieved,
                    r.target,
                    r.converged
                ),
                json!({ "command": "optimize", "initial_zeta_s": r.initial_zeta_s, "zeta_s": r.zeta_s,
                        "achieved": r.achieved, "target": r.target, "converged": r.converged }),
            );
            if !r.converged {
                o.warnings.push(format!("target {:.1e} m3 not reached", r.target));
            }
            let mut t = Table::new(
                meta().with_num("zeta_s_m3", r.zeta_s).with("converged", r.converged),
                &["parameter", "initial_m", "optimized_m"],
            );
            for (i, label) in ["L1", "L2", "R_s1", "R_s2"].iter().enumerate() {
                t.push(vec![(*label).into(), r.initial[i].into(), r.optimized[i].into()]);
            }
            emit(&mut o, dir, "optimize", &t)?;
            Ok(o)
        }
        Command::Exclusion {
            points,
            lambda_min_um,
            lambda_max_um,
            t1,
            worst_case,
            tabulated,
            plot,
        } => {
            let t1 = t1.unwrap_or(cfg.modulation.t1);
            let lambdas = log_grid(lambda_min_um * 1e-6, lambda_max_um * 1e-6, *points)?;
            let (delta_f, origin) = if *tabulated {
                (tabulated_delta_f(&cfg), "tabulated-rss")
            } else {
                (background_force_uncertainty(&cfg)?, "computed")
            };
            let c = exclusion_curve(&cfg, &lambdas, t1, delta_f, origin, *worst_case)?;
            let best = c
                .rows
                .iter()
                .map(|r| r.g_worst.unwrap_or(r.g_limit))
                .fold(f64::INFINITY, f64::min);
            let mut o = Outcome::new(
                format!(
                    "exclusion: {} points, best g_limit {best:.3e}, delta_F from {origin}",
                    c.rows.len()
                ),
                json!({ "command": "exclusion", "points": c.rows.len(), "best_g_limit": best, "delta_f_origin": origin }),
            );
            emit(&mut o, dir, "exclusion", &exclusion_table(&c, meta()))?;
            if *plot {
                emit_script(
                    &mut o,
                    dir,
                    PlotKind::Exclusion,
                    dir.join("exclusion.csv"),
                    "plot_exclusion.py",
                )?;
            }
            Ok(o)
        }
        Command::Trap { points, span_um } => {
            let model = TrapModel::from_config(&cfg)?;
            let p = resonance_and_depth(&model, *points, span_um * 1e-6)?;
            let kt = cfg.constants.k_b * cfg.environment.temperature;
            let mut o = Outcome::new(
                format!(
                    "trap: gap {:.4e} m, omega_z {:.4} rad/s, depth {:.3e} J ({:.3e} kT)",
                    p.gap_eq,
                    p.omega_z,
                    p.depth,
                    p.depth / kt
                ),
                json!({ "command": "trap", "gap_eq": p.gap_eq, "omega_z": p.omega_z, "depth": p.depth }),
            );
            if p.depth < 100.0 * kt {
                o.warnings
                    .push(format!("trap depth {:.1} kT is below 100 kT", p.depth / kt));
            }
            emit(&mut o, dir, "trap", &trap_table(&p, meta()))?;
            Ok(o)
        }
        Command::Gtilde {
            points,
            t1,
            min_ratio,
            max_ratio,
        } => {
            let t1 = t1.unwrap_or(cfg.modulation.t1);
            let wz = cfg.trap.omega_z;
            let tau0 = std::f64::consts::PI / wz;
            let grid = log_grid(min_ratio * wz, max_ratio * wz, *points)?;
            let rows: Vec<(f64, f64)> = grid.iter().map(|&w| (w, gtilde(w, t1, tau0))).collect();
            let at = gtilde(wz, t1, tau0);
            let mut o = Outcome::new(
                format!("gtilde: {} points, G(omega_z) {at:.4} s at T1 {t1} s", rows.len()),
                json!({ "command": "gtilde", "points": rows.len(), "gtilde_at_omega_z": at, "t1_s": t1 }),
            );
            emit(&mut o, dir, "gtilde", &gtilde_table(&rows, meta().with_num("t1_s", t1)))?;
            Ok(o)
        }
        Command::ZetaSm { lambda_um, bruteforce } => {
            let mut columns = vec!["lambda_m", "zeta_sm_m3"];
            if *bruteforce {
                columns.extend(["zeta_sm_bruteforce_m3", "bruteforce_error_m3"]);
            }
            let mut t = Table::new(meta(), &columns);
            for &l in lambda_um {
                let lambda = l * 1e-6;
                let mut row: Vec<Cell> = vec![lambda.into(), zeta_sm(cfg.sphere.radius, cfg.source.gap, lambda).into()];
                if *bruteforce {
                    let e = zeta_sm_bruteforce(&cfg.sphere, &cfg.source, lambda)?;
                    row.extend([e.value.into(), e.error.into()]);
                }
                t.push(row);
            }
            let mut o = Outcome::new(
                format!("zeta-sm: {} ranges", t.rows.len()),
                json!({ "command": "zeta-sm", "rows": t.rows.len() }),
            );
            emit(&mut o, dir, "zeta_sm", &t)?;
            Ok(o)
        }
        Command::Simulate { sim, seed, no_psd } => {
            let sc = sim.config(*seed);
            let tr = simulate(&sc, &cfg)?;
            let ms = tr.z.iter().map(|z| z * z).sum::<f64>() / tr.z.len() as f64;
            let mut o = Outcome::new(
                format!(
                    "simulate: {} samples, <z^2> {ms:.3e} m2 (equipartition {:.3e})",
                    tr.z.len(),
                    tr.oscillator.equilibrium_variance()
                ),
                json!({ "command": "simulate", "samples": tr.z.len(), "mean_square": ms,
                        "equilibrium_variance": tr.oscillator.equilibrium_variance() }),
            );
            emit(&mut o, dir, "trajectory", &trajectory_table(&tr, meta()))?;
            if !no_psd {
                let mut seg = 1usize << 20;
                while seg > 8 && tr.z.len() < 5 * seg {
                    seg /= 2;
                }
                match estimate_psd(&tr, seg) {
                    Ok(p) => emit(&mut o, dir, "psd", &psd_table(&p, meta()))?,
                    Err(e) => o.warnings.push(format!("psd skipped: {e}")),
                }
            }
            Ok(o)
        }
        Command::Montecarlo {
            sim,
            seeds,
            base_seed,
            blocks,
        } => {
            let sc = sim.config(*base_seed);
            let m = monte_carlo(&sc, &cfg, &seed_range(*base_seed, *seeds), *blocks)?;
            let mut o = Outcome::new(
                format!(
                    "montecarlo: {} seeds, amplitude {:.4e} +/- {:.2e} N",
                    m.seeds, m.mean, m.std_error
                ),
                json!({ "command": "montecarlo", "seeds": m.seeds, "mean": m.mean,
                        "std": m.std, "std_error": m.std_error }),
            );
            emit(&mut o, dir, "montecarlo", &montecarlo_table(&m, meta()))?;
            Ok(o)
        }
        Command::Validate { seed } => {
            let r = run_all(&cfg, *seed)?;
            let mut t = Table::new(
                meta().with("seed", seed),
                &[
                    "suite",
                    "check",
                    "closed_form",
                    "oracle",
                    "rel_error",
                    "tolerance",
                    "passed",
                ],
            );
            for s in &r.suites {
                for c in &s.checks {
                    t.push(vec![
                        s.name.as_str().into(),
                        c.label.as_str().into(),
                        c.closed_form.into(),
                        c.oracle.into(),
                        c.rel_error.into(),
                        s.tolerance.into(),
                        (c.rel_error <= s.tolerance).into(),
                    ]);
                }
            }
            let status: Vec<String> = r
                .suites
                .iter()
                .map(|s| {
                    format!(
                        "{} {} (max {:.2e})",
                        s.name,
                        if s.passed { "PASS" } else { "FAIL" },
                        s.max_rel_error
                    )
                })
                .collect();
            let mut o = Outcome::new(
                format!("validate: {}", status.join(", ")),
                json!({ "command": "validate", "passed": r.passed,
                        "suites": r.suites.iter().map(|s| json!({ "name": s.name, "passed": s.passed,
                            "max_rel_error": s.max_rel_error, "tolerance": s.tolerance })).collect::<Vec<_>>() }),
            );
            for s in r.suites.iter().filter(|s| !s.passed) {
                o.warnings.push(format!(
                    "suite {} failed: max relative error {:.3e} > {:.1e}",
                    s.name, s.max_rel_error, s.tolerance
                ));
            }
            o.failed = !r.passed;
            emit(&mut o, dir, "validate", &t)?;
            Ok(o)
        }
    }
}
