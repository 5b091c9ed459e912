//! Monopole-dipole (spin-mass) interaction between the polarized source and
//! the unpolarized microsphere.

use std::cell::Cell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::config::{MicrosphereSpec, SpinSourceGeometry};
use crate::constants::CODATA;
use crate::error::{ensure_positive, Error, Result};
use crate::modulation::{gtilde, ModulationSchedule};
use crate::quad::{self, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinMassResult {
    pub lambda: f64,
    /// m³
    pub zeta_sm: f64,
    /// Peak force per unit coupling product, N.
    pub force_per_coupling: f64,
    pub g_product: f64,
    /// N
    pub f_sm_amplitude: f64,
    /// N²/Hz at ω_z
    pub s_ff_sm_at_resonance: f64,
}

/// x cosh x - sinh x, times e^{-shift}, without overflow.
fn shell_factor(x: f64, shift: f64) -> f64 {
    if x < 0.5 {
        let x2 = x * x;
        // x^{2k+1}·2k/(2k+1)!
        let series =
            x * x2 * (1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 * (1.0 / 840.0 + x2 * (1.0 / 45360.0 + x2 / 3991680.0))));
        series * (-shift).exp()
    } else {
        0.5 * ((x - 1.0) * (x - shift).exp() + (x + 1.0) * (-x - shift).exp())
    }
}

/// Yukawa radial kernel (1/(λr) + 1/r²) e^{-r/λ}.
fn yukawa_gradient(r: f64, lambda: f64) -> f64 {
    (1.0 / (lambda * r) + 1.0 / (r * r)) * (-r / lambda).exp()
}

/// Potential energy of one polarized electron and one nucleon, J.
pub fn potential_v(cos_angle: f64, r: f64, lambda: f64, g_product: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain("potential_v", format!("singular at r = {r}")));
    }
    ensure_positive("lambda", lambda)?;
    if cos_angle.abs() > 1.0 {
        return Err(Error::validation("cos_angle", "must lie in [-1, 1]"));
    }
    Ok(CODATA.spin_mass_prefactor() * g_product * cos_angle * yukawa_gradient(r, lambda))
}

/// Sphere-integrated field kernel at distance `ell` from the sphere center, m³·m⁻².
pub fn sphere_form_factor(radius: f64, ell: f64, lambda: f64) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    if !(ell > radius) {
        return Err(Error::domain(
            "sphere_form_factor",
            format!("ell = {ell} inside radius {radius}"),
        ));
    }
    let x = radius / lambda;
    let bracket = 1.0 / (lambda * ell) + 1.0 / (ell * ell);
    Ok(4.0 * PI * lambda.powi(3) * shell_factor(x, ell / lambda) * bracket)
}

/// Effective volume for a sphere of radius R a gap d above a half-space, m³.
pub fn zeta_sm(radius: f64, gap: f64, lambda: f64) -> f64 {
    let x = radius / lambda;
    8.0 * PI * PI * lambda.powi(3) * shell_factor(x, (radius + gap) / lambda)
}

/// Second vertical derivative of e^{-ℓ/λ}/ℓ at horizontal offset ρ, height u,
/// multiplied by e^{shift/λ}.
fn vertical_kernel(rho: f64, u: f64, lambda: f64, shift: f64) -> f64 {
    let l2 = rho * rho + u * u;
    let l = l2.sqrt();
    let e = (-(l - shift) / lambda).exp();
    let d1 = -(1.0 / (lambda * l) + 1.0 / l2) * e;
    let d2 = (1.0 / (lambda * lambda * l) + 2.0 / (lambda * l2) + 2.0 / (l2 * l)) * e;
    d2 * u * u / l2 + d1 * (1.0 / l - u * u / (l2 * l))
}

/// Source body below/around the sphere as (ρ range, u range) blocks, u measured
/// downward from the sphere center.
fn source_blocks(sphere: &MicrosphereSpec, source: &SpinSourceGeometry) -> [((f64, f64), (f64, f64)); 2] {
    let hc = source.center_height(sphere.radius);
    [
        (
            (0.0, source.inner_radius),
            (hc + source.inner_height, hc + source.outer_height),
        ),
        (
            (source.inner_radius, source.outer_radius),
            (hc, hc + source.outer_height),
        ),
    ]
}

/// Nested quadrature of the vertical force kernel over the actual source body,
/// scaled by the exact sphere factor. Returns the effective volume with its
/// estimated absolute error.
pub fn zeta_sm_bruteforce(sphere: &MicrosphereSpec, source: &SpinSourceGeometry, lambda: f64) -> Result<Estimate> {
    ensure_positive("lambda", lambda)?;
    let x = sphere.radius / lambda;
    // factor e^{-(R+d)/λ} out of the integrand
    let u0 = sphere.radius + source.gap;
    let prefactor = 4.0 * PI * lambda.powi(3) * shell_factor(x, u0 / lambda) * 2.0 * PI;
    let rel = 1e-7;
    let worst_inner = Cell::new(0.0f64);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for ((r_lo, r_hi), (u_lo, u_hi)) in source_blocks(sphere, source) {
        let rho_breaks: Vec<f64> = quad::graded_breaks(lambda, r_hi - r_lo)
            .into_iter()
            .map(|b| b + r_lo)
            .collect();
        let outer = |rho: f64| {
            let mut u_breaks = vec![u_lo];
            if u_lo < 0.0 && u_hi > 0.0 {
                u_breaks.push(0.0);
            }
            let start = u_breaks.last().copied().unwrap();
            let mut step = lambda;
            while start + step < u_hi {
                u_breaks.push(start + step);
                step *= 4.0;
            }
            u_breaks.push(u_hi);
            let inner = quad::integrate_pieces(|u| vertical_kernel(rho, u, lambda, u0), &u_breaks, 1.0, f64::MAX)
                .expect("unbounded tolerance");
            worst_inner.set(worst_inner.get().max(rho * inner.error));
            rho * inner.value
        };
        let est = quad::integrate_pieces(outer, &rho_breaks, 1.0, f64::MAX)?;
        value += est.value;
        error += est.error + worst_inner.replace(0.0) * (r_hi - r_lo);
        evaluations += est.evaluations;
    }
    let rel_achieved = error / value.abs();
    if rel_achieved > rel {
        return Err(Error::Numeric {
            what: "zeta_sm_bruteforce",
            achieved: rel_achieved,
            target: rel,
        });
    }
    Ok(Estimate {
        value: prefactor * value,
        error: (prefactor * value).abs() * rel_achieved,
        evaluations,
    })
}

/// Six-dimensional Monte Carlo over sphere and source points, importance
/// sampled with exponential depth and gamma-distributed lateral offset.
/// Only the groove floor is sampled. Returns (mean, standard error).
pub fn zeta_sm_montecarlo(
    sphere: &MicrosphereSpec,
    source: &SpinSourceGeometry,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    ensure_positive("lambda", lambda)?;
    if samples < 2 {
        return Err(Error::validation("samples", "need at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lateral = Gamma::new(2.0, lambda).expect("positive shape");
    let r = sphere.radius;
    let hc = source.center_height(r);
    let floor_top = -source.inner_height;
    let thickness = source.outer_height - source.inner_height;
    let depth_norm = -(-thickness / lambda).exp_m1();
    let vol = sphere.volume();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let (px, py, pz) = loop {
            let p: [f64; 3] = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= r * r {
                break (p[0], p[1], hc + p[2]);
            }
        };
        // truncated exponential depth into the floor
        let v: f64 = rng.gen();
        let depth = -lambda * (1.0 - v * depth_norm).ln();
        let rho = lateral.sample(&mut rng);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let (sx, sy) = (px + rho * phi.cos(), py + rho * phi.sin());
        let w = if sx * sx + sy * sy <= source.inner_radius * source.inner_radius {
            let u = pz - floor_top + depth;
            let pdf =
                (-depth / lambda).exp() / (lambda * depth_norm) * (-rho / lambda).exp() / (2.0 * PI * lambda * lambda);
            vol * vertical_kernel(rho, u, lambda, 0.0) / pdf
        } else {
            0.0
        };
        sum += w;
        sum2 += w * w;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Peak spin-mass force per unit coupling product at full polarization, N.
pub fn force_per_coupling(sphere: &MicrosphereSpec, source: &SpinSourceGeometry, lambda: f64) -> f64 {
    source.effective_spin_density()
        * CODATA.spin_mass_prefactor()
        * sphere.nucleon_density
        * zeta_sm(sphere.radius, source.gap, lambda)
}

pub fn f_sm_amplitude(sphere: &MicrosphereSpec, source: &SpinSourceGeometry, lambda: f64, g_product: f64) -> f64 {
    g_product * force_per_coupling(sphere, source, lambda)
}

/// Single-sided force PSD F_sm²·G̃(ω), N²/Hz.
pub fn s_ff_sm(
    omega: f64,
    sphere: &MicrosphereSpec,
    source: &SpinSourceGeometry,
    lambda: f64,
    g_product: f64,
    schedule: &ModulationSchedule,
) -> f64 {
    f_sm_amplitude(sphere, source, lambda, g_product).powi(2) * gtilde(omega, schedule.t1, schedule.tau0)
}

/// Coupling product implied by a measured spin-mass PSD.
pub fn extract_coupling(
    s_ff: f64,
    gtilde_value: f64,
    sphere: &MicrosphereSpec,
    source: &SpinSourceGeometry,
    lambda: f64,
) -> f64 {
    (s_ff / gtilde_value).sqrt() / force_per_coupling(sphere, source, lambda)
}

pub fn evaluate(
    sphere: &MicrosphereSpec,
    source: &SpinSourceGeometry,
    lambda: f64,
    g_product: f64,
    schedule: &ModulationSchedule,
) -> SpinMassResult {
    let k = force_per_coupling(sphere, source, lambda);
    SpinMassResult {
        lambda,
        zeta_sm: zeta_sm(sphere.radius, source.gap, lambda),
        force_per_coupling: k,
        g_product,
        f_sm_amplitude: g_product * k,
        s_ff_sm_at_resonance: s_ff_sm(schedule.omega_z, sphere, source, lambda, g_product, schedule),
    }
}
