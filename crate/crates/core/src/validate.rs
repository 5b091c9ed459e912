//! Oracle-equivalence suites: each closed form against an independent
//! numeric route.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::{zeta_s, zeta_s_dipole_oracle};
use crate::config::{ExperimentConfig, SpinSourceGeometry};
use crate::error::Result;
use crate::modulation::{gtilde, gtilde_numeric};
use crate::spin_mass::{zeta_sm, zeta_sm_bruteforce};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub label: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub checks: Vec<OracleCheck>,
}

impl SuiteReport {
    fn new(name: &str, tolerance: f64, checks: Vec<OracleCheck>) -> Self {
        let max_rel_error = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
        SuiteReport {
            name: name.to_string(),
            tolerance,
            max_rel_error,
            passed: checks.iter().all(|c| c.rel_error <= tolerance),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

fn check(label: String, closed_form: f64, oracle: f64) -> OracleCheck {
    OracleCheck {
        label,
        closed_form,
        oracle,
        rel_error: ((closed_form - oracle) / oracle).abs(),
    }
}

/// 50 frequencies in [0.1, 10]·ω_z at each T₁ ∈ {1 ms, 0.1 s, 1 s, 10 s}.
pub fn gtilde_suite(omega_z: f64) -> Result<SuiteReport> {
    let tau0 = std::f64::consts::PI / omega_z;
    let mut checks = Vec::with_capacity(200);
    for t1 in [1e-3, 0.1, 1.0, 10.0] {
        for i in 0..50 {
            let w = omega_z * (0.1 + 9.9 * i as f64 / 49.0);
            checks.push(check(
                format!("T1={t1} s, w={w:.4} rad/s"),
                gtilde(w, t1, tau0),
                gtilde_numeric(w, t1, tau0)?,
            ));
        }
    }
    Ok(SuiteReport::new("gtilde", 0.005, checks))
}

/// Slab closed form against nested quadrature over the configured source body.
pub fn zeta_sm_suite(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<SuiteReport> {
    let checks = lambdas
        .iter()
        .map(|&l| {
            let oracle = zeta_sm_bruteforce(&cfg.sphere, &cfg.source, l)?.value;
            Ok(check(
                format!("lambda={:.1} um", l * 1e6),
                zeta_sm(cfg.sphere.radius, cfg.source.gap, l),
                oracle,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::new("zeta_sm", 0.01, checks))
}

/// Random two-cylinder geometries around the configured source.
pub fn random_geometries(base: &SpinSourceGeometry, count: usize, seed: u64) -> Vec<SpinSourceGeometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let outer_height = rng.gen_range(40e-6..80e-6);
            let inner_height = rng.gen_range(20e-6..outer_height - 5e-6);
            let outer_radius = rng.gen_range(300e-6..600e-6);
            let inner_radius = rng.gen_range(0.8 * outer_radius..outer_radius - 10e-6);
            SpinSourceGeometry {
                outer_height,
                inner_height,
                outer_radius,
                inner_radius,
                gap: rng.gen_range(0.5e-6..5e-6),
                ..*base
            }
        })
        .collect()
}

/// Cylinder-bracket ζ_s against point-dipole integration.
pub fn zeta_s_suite(cfg: &ExperimentConfig, count: usize, seed: u64) -> Result<SuiteReport> {
    let checks = random_geometries(&cfg.source, count, seed)
        .iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(check(
                format!("geometry {i}"),
                zeta_s(g, cfg.sphere.radius, &cfg.trap)?,
                zeta_s_dipole_oracle(g, cfg.sphere.radius, &cfg.trap)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::new("zeta_s", 0.005, checks))
}

pub fn run_all(cfg: &ExperimentConfig, seed: u64) -> Result<ValidationReport> {
    let suites = vec![
        gtilde_suite(cfg.trap.omega_z)?,
        zeta_sm_suite(cfg, &[0.5e-6, 2e-6, 10e-6])?,
        zeta_s_suite(cfg, 5, seed)?,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(ValidationReport { suites, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gtilde_grid_agrees() {
        let r = gtilde_suite(148.9).unwrap();
        assert_eq!(r.checks.len(), 200);
        assert!(r.passed, "{}", r.max_rel_error);
    }

    #[test]
    fn zeta_sm_short_ranges_agree() {
        let r = zeta_sm_suite(&ExperimentConfig::default(), &[0.5e-6, 2e-6]).unwrap();
        assert!(r.passed, "{}", r.max_rel_error);
    }

    #[test]
    fn zeta_sm_long_range_sees_the_finite_floor() {
        let cfg = ExperimentConfig::default();
        let r = zeta_sm_suite(&cfg, &[10e-6]).unwrap();
        let c = &r.checks[0];
        let thickness = cfg.source.outer_height - cfg.source.inner_height;
        let slab = -(-thickness / 10e-6f64).exp_m1();
        assert!((c.oracle / c.closed_form / slab - 1.0).abs() < 0.02);
        assert!(!r.passed);
    }

    #[test]
    fn random_geometries_are_valid_and_seeded() {
        let base = SpinSourceGeometry::default();
        let a = random_geometries(&base, 5, 11);
        assert_eq!(a, random_geometries(&base, 5, 11));
        for g in &a {
            g.validate().unwrap();
            assert!(g.inner_height < g.outer_height && g.inner_radius < g.outer_radius);
        }
    }

    #[test]
    fn zeta_s_dipole_route_agrees() {
        let r = zeta_s_suite(&ExperimentConfig::default(), 2, 5).unwrap();
        assert!(r.passed, "{:?}", r.checks);
    }
}
