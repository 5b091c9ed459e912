//! Force-noise budget, coupling detection limits and exclusion curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{project_to_null, propagate_uncertainty};
use crate::config::{lambda_to_mass_ev, Convention, ExperimentConfig};
use crate::constants::CODATA;
use crate::error::{ensure_positive, Error, Result};
use crate::modulation::{gtilde, pulse_schedule, ModulationSchedule};
use crate::spin_mass::{force_per_coupling, zeta_sm};

/// Reference levels the budget is compared against.
pub mod reference {
    /// N²/Hz
    pub const THERMAL_PSD: f64 = 5.14e-43;
    /// N²/Hz
    pub const MEASUREMENT_PSD: f64 = 9.36e-49;
    /// N²/Hz
    pub const BACKGROUND_PSD: f64 = 2.59e-41;
    pub const G_LIMIT: f64 = 4.3e-22;
    pub const G_LIMIT_THERMAL: f64 = 9.1e-24;
    /// Quadrature sum of the tabulated effective-volume tolerances, m³.
    pub const BUDGET_RSS: f64 = 13.8e-22;
}

/// Mechanical susceptibility modulus 1/√((ω_z²-ω²)² + γ²ω²), s².
pub fn susceptibility(omega: f64, omega_z: f64, gamma: f64) -> f64 {
    let d = omega_z * omega_z - omega * omega;
    1.0 / (d * d + gamma * gamma * omega * omega).sqrt()
}

/// Thermal force PSD, N²/Hz: 4mγk_BT as written, 2mγk_BT table-matched.
pub fn thermal_psd(mass: f64, gamma: f64, temperature: f64, convention: Convention) -> f64 {
    let full = 4.0 * mass * gamma * CODATA.k_b * temperature;
    match convention {
        Convention::AsWritten => full,
        Convention::TableMatched => 0.5 * full,
    }
}

/// Backaction plus imprecision at their optimum on resonance, N²/Hz.
pub fn quantum_limited_psd(mass: f64, omega_z: f64, gamma: f64, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::validation("measurement_efficiency", "must lie in (0, 1]"));
    }
    Ok(2.0 * mass * CODATA.hbar / (susceptibility(omega_z, omega_z, gamma) * efficiency.sqrt()))
}

/// Minimum detectable coupling: √((S_flu + S_s)/G̃) per unit force-per-coupling.
pub fn g_limit(s_flu: f64, s_s: f64, gtilde_value: f64, force_per_coupling: f64) -> f64 {
    ((s_flu + s_s) / gtilde_value).sqrt() / force_per_coupling
}

/// Noise sources entering the displacement spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementNoise {
    pub mass: f64,
    pub omega_z: f64,
    pub gamma: f64,
    /// m²/Hz
    pub imprecision: f64,
    /// N²/Hz
    pub backaction: f64,
    /// N²/Hz
    pub thermal: f64,
    /// Residual spin-induced force amplitude, N.
    pub f_s: f64,
    /// Spin-mass force amplitude, N.
    pub f_sm: f64,
}

impl DisplacementNoise {
    /// Splits the measurement optimum equally between backaction and imprecision.
    pub fn at_optimum(mass: f64, omega_z: f64, gamma: f64, thermal: f64, measurement: f64) -> Self {
        let chi = susceptibility(omega_z, omega_z, gamma);
        DisplacementNoise {
            mass,
            omega_z,
            gamma,
            imprecision: 0.5 * measurement * chi * chi / (mass * mass),
            backaction: 0.5 * measurement,
            thermal,
            f_s: 0.0,
            f_sm: 0.0,
        }
    }
}

/// Detected displacement PSD at ω, m²/Hz.
pub fn total_displacement_psd(omega: f64, noise: &DisplacementNoise, schedule: &ModulationSchedule) -> f64 {
    let chi = susceptibility(omega, noise.omega_z, noise.gamma);
    let g = if noise.f_s != 0.0 || noise.f_sm != 0.0 {
        gtilde(omega, schedule.t1, schedule.tau0)
    } else {
        0.0
    };
    let force = noise.backaction + noise.thermal + (noise.f_s * noise.f_s + noise.f_sm * noise.f_sm) * g;
    noise.imprecision + chi * chi / (noise.mass * noise.mass) * force
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub lambda: f64,
    pub t1: f64,
    pub thermal_convention: Convention,
    pub force_convention: Convention,
    /// N²/Hz
    pub s_thermal: f64,
    pub s_measurement: f64,
    pub s_fluctuation: f64,
    pub s_background: f64,
    /// s
    pub gtilde: f64,
    /// Background force uncertainty, N.
    pub delta_f_s: f64,
    /// N per unit coupling product.
    pub force_per_coupling: f64,
    pub g_thermal: f64,
    pub g_measurement: f64,
    pub g_background: f64,
    pub g_total: f64,
    /// Limit with the tabulated budget RSS in place of the computed one.
    pub g_tabulated_chain: f64,
    pub rows: Vec<BudgetEntry>,
    pub notes: Vec<String>,
}

impl NoiseBudget {
    /// Every PSD and G̃ multiplied by `c`; the limits are unchanged.
    pub fn rescaled(&self, c: f64) -> NoiseBudget {
        let mut b = self.clone();
        b.s_thermal *= c;
        b.s_measurement *= c;
        b.s_fluctuation *= c;
        b.s_background *= c;
        b.gtilde *= c;
        b.g_thermal = g_limit(b.s_thermal, 0.0, b.gtilde, b.force_per_coupling);
        b.g_measurement = g_limit(b.s_measurement, 0.0, b.gtilde, b.force_per_coupling);
        b.g_background = g_limit(0.0, b.s_background, b.gtilde, b.force_per_coupling);
        b.g_total = g_limit(b.s_fluctuation, b.s_background, b.gtilde, b.force_per_coupling);
        b
    }
}

fn entry(name: &str, computed: f64, reference: f64) -> BudgetEntry {
    BudgetEntry {
        name: name.to_string(),
        computed,
        reference,
        ratio: computed / reference,
    }
}

pub fn schedule_for(cfg: &ExperimentConfig, t1: f64) -> Result<ModulationSchedule> {
    pulse_schedule(
        cfg.trap.omega_z,
        cfg.environment.measurement_time,
        cfg.trap.b_ext,
        cfg.modulation.b1,
    )?
    .with_t1(t1)
}

/// ΔF_s from the geometry tolerances, evaluated at the nearest null of the
/// configured source, N.
pub fn background_force_uncertainty(cfg: &ExperimentConfig) -> Result<f64> {
    let null = project_to_null(&cfg.source, cfg.sphere.radius, &cfg.trap)?;
    Ok(propagate_uncertainty(&null, &cfg.sphere, &cfg.trap, cfg.conventions.force)?.total_delta_f)
}

/// Force per effective volume under the configured convention, N/m³.
fn background_prefactor(cfg: &ExperimentConfig) -> f64 {
    crate::background::force_per_volume(
        cfg.source.effective_spin_density(),
        cfg.sphere.susceptibility,
        cfg.trap.field_gradient,
        cfg.conventions.force,
    )
    .abs()
}

pub fn fluctuation_psd(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let s = &cfg.sphere;
    let t = &cfg.trap;
    let th = thermal_psd(s.mass, t.gamma, cfg.environment.temperature, cfg.conventions.thermal);
    let qm = quantum_limited_psd(s.mass, t.omega_z, t.gamma, cfg.environment.efficiency)?;
    Ok((th, qm))
}

/// Full budget at range `lambda` and relaxation time `t1` with background
/// force uncertainty `delta_f_s`.
pub fn noise_budget(cfg: &ExperimentConfig, lambda: f64, t1: f64, delta_f_s: f64) -> Result<NoiseBudget> {
    ensure_positive("lambda", lambda)?;
    let schedule = schedule_for(cfg, t1)?;
    let (th, qm) = fluctuation_psd(cfg)?;
    let g = gtilde(cfg.trap.omega_z, t1, schedule.tau0);
    let k = force_per_coupling(&cfg.sphere, &cfg.source, lambda);
    let s_s = delta_f_s * delta_f_s * g;
    let flu = th + qm;
    let tabulated_f = background_prefactor(cfg) * reference::BUDGET_RSS;
    let g_total = g_limit(flu, s_s, g, k);
    let g_chain = g_limit(flu, tabulated_f * tabulated_f * g, g, k);
    let g_thermal = g_limit(th, 0.0, g, k);
    let rows = vec![
        entry("thermal", th, reference::THERMAL_PSD),
        entry("backaction+imprecision", qm, reference::MEASUREMENT_PSD),
        entry("spin-induced", s_s, reference::BACKGROUND_PSD),
        entry("g_limit", g_total, reference::G_LIMIT),
        entry("g_limit_chain", g_chain, reference::G_LIMIT),
        entry("g_limit_thermal", g_thermal, reference::G_LIMIT_THERMAL),
    ];
    let notes = vec![
        format!(
            "spin-induced PSD (ΔF_s)²·G̃ = {s_s:.3e} N²/Hz differs from the tabulated {:.2e} by {:.0}x; G̃ cancels in the limit",
            reference::BACKGROUND_PSD,
            s_s / reference::BACKGROUND_PSD
        ),
        format!(
            "limit with the tabulated budget RSS ({:.1e} m³): {g_chain:.3e}; with the computed budget: {g_total:.3e}; tabulated {:.1e}",
            reference::BUDGET_RSS,
            reference::G_LIMIT
        ),
    ];
    Ok(NoiseBudget {
        lambda,
        t1,
        thermal_convention: cfg.conventions.thermal,
        force_convention: cfg.conventions.force,
        s_thermal: th,
        s_measurement: qm,
        s_fluctuation: flu,
        s_background: s_s,
        gtilde: g,
        delta_f_s,
        force_per_coupling: k,
        g_thermal,
        g_measurement: g_limit(qm, 0.0, g, k),
        g_background: delta_f_s / k,
        g_total,
        g_tabulated_chain: g_chain,
        rows,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Point {
    pub t1: f64,
    pub fluctuation: f64,
    pub background: f64,
    pub total: f64,
}

/// Limit components versus T₁: fluctuation-limited, background-limited and total.
pub fn g_limit_vs_t1(cfg: &ExperimentConfig, lambda: f64, t1_grid: &[f64], delta_f_s: f64) -> Result<Vec<T1Point>> {
    if t1_grid.is_empty() || t1_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t1_grid[0] > 0.0) {
        return Err(Error::validation("t1", "grid must be positive and ascending"));
    }
    let (th, qm) = fluctuation_psd(cfg)?;
    let k = force_per_coupling(&cfg.sphere, &cfg.source, lambda);
    let tau0 = std::f64::consts::PI / cfg.trap.omega_z;
    Ok(t1_grid
        .iter()
        .map(|&t1| {
            let g = gtilde(cfg.trap.omega_z, t1, tau0);
            T1Point {
                t1,
                fluctuation: g_limit(th + qm, 0.0, g, k),
                background: delta_f_s / k,
                total: g_limit(th + qm, delta_f_s * delta_f_s * g, g, k),
            }
        })
        .collect())
}

/// T₁ at which the fluctuation and background components are equal.
pub fn crossover_t1(cfg: &ExperimentConfig, lambda: f64, delta_f_s: f64) -> Result<f64> {
    let diff = |ln_t1: f64| -> Result<f64> {
        let p = g_limit_vs_t1(cfg, lambda, &[ln_t1.exp()], delta_f_s)?[0];
        Ok(p.fluctuation.ln() - p.background.ln())
    };
    let (mut a, mut b) = ((1e-9f64).ln(), (1e4f64).ln());
    let fa = diff(a)?;
    if fa.signum() == diff(b)?.signum() {
        return Err(Error::domain(
            "crossover_t1",
            "components do not cross in [1 ns, 10^4 s]",
        ));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (diff(m)? > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Smallest ζ_sm over R ± σ_R, d ± σ_d by a grid and three zoomed refinements.
pub fn min_zeta_sm_in_box(radius: f64, gap: f64, sigma_r: f64, sigma_d: f64, lambda: f64) -> (f64, f64, f64) {
    let n = 21;
    let (mut r_lo, mut r_hi) = ((radius - sigma_r).max(1e-12), radius + sigma_r);
    let (mut d_lo, mut d_hi) = ((gap - sigma_d).max(1e-12), gap + sigma_d);
    let mut best = (radius, gap, zeta_sm(radius, gap, lambda));
    for _ in 0..4 {
        for i in 0..n {
            for j in 0..n {
                let r = r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64;
                let d = d_lo + (d_hi - d_lo) * j as f64 / (n - 1) as f64;
                let z = zeta_sm(r, d, lambda);
                if z < best.2 {
                    best = (r, d, z);
                }
            }
        }
        let (hr, hd) = ((r_hi - r_lo) / (n - 1) as f64, (d_hi - d_lo) / (n - 1) as f64);
        r_lo = (best.0 - hr).max(r_lo);
        r_hi = (best.0 + hr).min(r_hi);
        d_lo = (best.1 - hd).max(d_lo);
        d_hi = (best.1 + hd).min(d_hi);
    }
    best
}

/// Upper bound of the limit: background at its uncertainty, signal at the
/// smallest ζ_sm the radius and gap tolerances allow.
pub fn worst_case_g_limit(budget: &NoiseBudget, cfg: &ExperimentConfig) -> f64 {
    let s = &cfg.source.sigma;
    let nominal = zeta_sm(cfg.sphere.radius, cfg.source.gap, budget.lambda);
    let (_, _, worst) = min_zeta_sm_in_box(cfg.sphere.radius, cfg.source.gap, s.sphere_radius, s.gap, budget.lambda);
    budget.g_total * nominal / worst
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    ensure_positive("lambda_min", lo)?;
    if !(hi > lo) || points < 2 {
        return Err(Error::validation("points", "need hi > lo and at least 2 points"));
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRow {
    pub lambda: f64,
    pub mass_ev: f64,
    pub g_limit: f64,
    pub g_worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCurve {
    pub t1: f64,
    pub delta_f_s: f64,
    /// Where ΔF_s came from.
    pub delta_f_origin: String,
    pub worst_case: bool,
    pub rows: Vec<ExclusionRow>,
}

/// Limit over a λ grid inside [0.1, 100] μm, rows ordered by λ.
pub fn exclusion_curve(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    t1: f64,
    delta_f_s: f64,
    delta_f_origin: &str,
    worst_case: bool,
) -> Result<ExclusionCurve> {
    if let Some(bad) = lambdas.iter().find(|&&l| !(0.1e-6..=100e-6).contains(&l)) {
        return Err(Error::validation("lambda", format!("{bad:e} m outside [1e-7, 1e-4] m")));
    }
    let mut rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let b = noise_budget(cfg, lambda, t1, delta_f_s)?;
            Ok(ExclusionRow {
                lambda,
                mass_ev: lambda_to_mass_ev(lambda),
                g_limit: b.g_total,
                g_worst: worst_case.then(|| worst_case_g_limit(&b, cfg)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(ExclusionCurve {
        t1,
        delta_f_s,
        delta_f_origin: delta_f_origin.to_string(),
        worst_case,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    fn budget(lambda: f64, t1: f64) -> NoiseBudget {
        let c = cfg();
        noise_budget(&c, lambda, t1, background_force_uncertainty(&c).unwrap()).unwrap()
    }

    #[test]
    fn susceptibility_shape() {
        let (wz, g) = (148.9, 2.0 * std::f64::consts::PI * 1e-6);
        assert!((susceptibility(wz, wz, g) * g * wz - 1.0).abs() < 1e-12);
        assert!((susceptibility(0.0, wz, g) * wz * wz - 1.0).abs() < 1e-12);
        let wide = 1.0;
        let peak = susceptibility(wz, wz, wide).powi(2);
        for w in [wz - 0.5 * wide, wz + 0.5 * wide] {
            let r = susceptibility(w, wz, wide).powi(2) / peak;
            assert!((r - 0.5).abs() < 0.01, "{r}");
        }
    }

    #[test]
    fn thermal_conventions() {
        let c = cfg();
        let m = c.sphere.mass;
        let aw = thermal_psd(m, c.trap.gamma, 0.020, Convention::AsWritten);
        let tm = thermal_psd(m, c.trap.gamma, 0.020, Convention::TableMatched);
        assert!((aw / 1.04e-42 - 1.0).abs() < 0.01, "{aw}");
        assert!((aw / reference::THERMAL_PSD - 2.0).abs() < 0.1);
        assert!((tm / reference::THERMAL_PSD - 1.0).abs() < 0.02);
        assert_eq!(thermal_psd(m, c.trap.gamma, 0.0, Convention::AsWritten), 0.0);
    }

    #[test]
    fn measurement_optimum() {
        let g = 2.0 * std::f64::consts::PI * 1e-6;
        let s = quantum_limited_psd(1.5e-13, 148.9, g, 0.001).unwrap();
        assert!((s / 9.36e-49 - 1.0).abs() < 0.02, "{s}");
        let ideal = quantum_limited_psd(1.5e-13, 148.9, g, 1.0).unwrap();
        assert!((s / ideal - 1000f64.sqrt()).abs() < 1e-9);
        let th = thermal_psd(1.5e-13, g, 0.020, Convention::TableMatched);
        assert!(s / th < 1e-5);
        assert!(quantum_limited_psd(1.5e-13, 148.9, g, 0.0).is_err());
        assert!(quantum_limited_psd(1.5e-13, 148.9, g, 1.5).is_err());
    }

    #[test]
    fn displacement_psd_terms() {
        let c = cfg();
        let sched = schedule_for(&c, 1.0).unwrap();
        let (m, wz, g) = (c.sphere.mass, c.trap.omega_z, c.trap.gamma);
        let mut n = DisplacementNoise::at_optimum(m, wz, g, 0.0, 0.0);
        n.imprecision = 1e-30;
        assert_eq!(
            total_displacement_psd(10.0, &n, &sched),
            total_displacement_psd(500.0, &n, &sched)
        );
        let th = DisplacementNoise {
            imprecision: 0.0,
            ..DisplacementNoise::at_optimum(m, wz, g, 5e-43, 0.0)
        };
        let expected = susceptibility(wz, wz, g).powi(2) * 5e-43 / (m * m);
        assert!((total_displacement_psd(wz, &th, &sched) / expected - 1.0).abs() < 1e-12);
        let opt = DisplacementNoise::at_optimum(m, wz, g, 0.0, 1e-48);
        let chi = susceptibility(wz, wz, g);
        let as_force = total_displacement_psd(wz, &opt, &sched) * m * m / (chi * chi);
        assert!((as_force / 1e-48 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_chain_at_two_microns() {
        let b = budget(2e-6, 1.0);
        assert!(
            b.g_total / reference::G_LIMIT < 2.0 && b.g_total / reference::G_LIMIT > 0.5,
            "{}",
            b.g_total
        );
        assert!((b.g_total / 4.7e-22 - 1.0).abs() < 0.03, "{}", b.g_total);
        assert!(
            (b.g_tabulated_chain / 6.3e-22 - 1.0).abs() < 0.03,
            "{}",
            b.g_tabulated_chain
        );
        assert!((b.g_thermal / 5.67e-24 - 1.0).abs() < 0.02, "{}", b.g_thermal);
        assert!(b.g_thermal / reference::G_LIMIT_THERMAL > 0.5);
        assert!((b.s_fluctuation - b.s_thermal - b.s_measurement).abs() <= 1e-15 * b.s_fluctuation);
        assert_eq!(b.rows.len(), 6);
        assert!(b.notes.iter().any(|n| n.contains("G̃ cancels")));
    }

    #[test]
    fn quadrupled_noise_doubles_limit() {
        let a = g_limit(1e-43, 2e-43, 2.5, 80.0);
        let b = g_limit(4e-43, 8e-43, 2.5, 80.0);
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn limit_round_trips_through_extraction() {
        let c = cfg();
        let b = budget(2e-6, 1.0);
        let sched = schedule_for(&c, 1.0).unwrap();
        let s_sm = crate::spin_mass::s_ff_sm(c.trap.omega_z, &c.sphere, &c.source, 2e-6, b.g_total, &sched);
        assert!((s_sm / (b.s_fluctuation + b.s_background) - 1.0).abs() < 1e-10);
        let g = crate::spin_mass::extract_coupling(s_sm, b.gtilde, &c.sphere, &c.source, 2e-6);
        assert!((g / b.g_total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn t1_components() {
        let c = cfg();
        let df = background_force_uncertainty(&c).unwrap();
        let grid = log_grid(0.1, 10.0, 41).unwrap();
        let pts = g_limit_vs_t1(&c, 2e-6, &grid, df).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.t1.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.fluctuation.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() < 0.02, "{slope}");
        assert!(pts
            .iter()
            .all(|p| (p.background / pts[0].background - 1.0).abs() < 1e-3));
        let x = crossover_t1(&c, 2e-6, df).unwrap();
        let at = g_limit_vs_t1(&c, 2e-6, &[x], df).unwrap()[0];
        assert!((at.fluctuation / at.background - 1.0).abs() < 1e-6);
        assert!(g_limit_vs_t1(&c, 2e-6, &[1.0, 0.5], df).is_err());
    }

    #[test]
    fn global_rescaling_leaves_limits() {
        let b = budget(2e-6, 1.0);
        for c in [1e-3, 0.5, 2.0, 37.0] {
            let r = b.rescaled(c);
            assert!((r.g_total / b.g_total - 1.0).abs() < 1e-12);
            assert!((r.g_background / b.g_background - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_case_box() {
        let c = cfg();
        let b = budget(2e-6, 1.0);
        let w = worst_case_g_limit(&b, &c);
        assert!(w >= b.g_total);
        let (r, d, z) = min_zeta_sm_in_box(3.2e-6, 1.46e-6, 0.1e-6, 1e-9, 2e-6);
        assert!((r - 3.1e-6).abs() < 1e-12 && (d - 1.461e-6).abs() < 1e-15);
        assert!((z / zeta_sm(3.2e-6, 1.46e-6, 2e-6) - 0.9412).abs() < 1e-3);
        assert!((w / b.g_total - 1.0 / 0.9412).abs() < 1e-3);
        let mut exact = c;
        exact.source.sigma = crate::config::GeometrySigma::zero();
        assert_eq!(worst_case_g_limit(&b, &exact), b.g_total);
        let mut wide = c;
        wide.source.sigma.gap *= 1000.0;
        let wi = worst_case_g_limit(&b, &wide);
        let expected = w * ((1e-6 - 1e-9) / 2e-6f64).exp();
        assert!((wi / expected - 1.0).abs() < 1e-3, "{wi} {expected}");
    }

    #[test]
    fn exclusion_endpoints_and_shape() {
        let c = cfg();
        let df = background_force_uncertainty(&c).unwrap();
        let grid = log_grid(0.5e-6, 50e-6, 60).unwrap();
        let curve = exclusion_curve(&c, &grid, 1.0, df, "computed", true).unwrap();
        let first = curve.rows.first().unwrap();
        let last = curve.rows.last().unwrap();
        assert!((first.mass_ev / 0.395 - 1.0).abs() < 0.02);
        assert!((last.mass_ev / 3.95e-3 - 1.0).abs() < 0.02);
        assert!(curve.rows.windows(2).all(|w| w[0].lambda < w[1].lambda));
        assert!(curve.rows.iter().all(|r| r.g_limit > 0.0 && r.g_limit.is_finite()));
        assert!(curve.rows.iter().all(|r| r.g_worst.unwrap() >= r.g_limit));
        assert!(curve.rows[0].g_limit > curve.rows[10].g_limit);
        let at = exclusion_curve(&c, &[28.2e-6], 1.0, df, "computed", false).unwrap();
        assert!(at.rows[0].g_limit < 1e-19);
        assert!(at.rows[0].g_worst.is_none());
        assert!(exclusion_curve(&c, &[0.05e-6], 1.0, df, "computed", false).is_err());
    }

    proptest! {
        #[test]
        fn limit_scales_as_root_noise(s in 1e-45f64..1e-40, k in 1.0f64..1e3, c in 0.01f64..100.0) {
            let a = g_limit(s, 0.0, 2.5, k);
            let b = g_limit(c * c * s, 0.0, 2.5, k);
            prop_assert!((b / a / c - 1.0).abs() < 1e-12);
        }
    }
}
