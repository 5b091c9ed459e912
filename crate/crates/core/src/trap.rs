//! One-dimensional magneto-gravitational trap: gravity, diamagnetic field
//! energy over the sphere volume and sphere-plate Casimir attraction.
//!
//! `z` is the vertical displacement of the sphere center from its nominal
//! position, where the surface gap to the groove floor equals `gap`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::axis_bracket;
use crate::config::{ExperimentConfig, FieldModel, MicrosphereSpec, SpinSourceGeometry, TrapConfig};
use crate::constants::CODATA;
use crate::error::{Error, Result};

/// Smallest surface gap the potential is evaluated at, m.
pub const MIN_GAP: f64 = 50e-9;

/// Proximity-force Casimir energy of a sphere over a plate, J.
pub fn casimir_potential(gap: f64, radius: f64, reduction: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::domain(
            "casimir_potential",
            format!("gap must be positive, got {gap:e}"),
        ));
    }
    Ok(-casimir_coefficient(radius, reduction) / (gap * gap))
}

/// A in V = -A/gap².
fn casimir_coefficient(radius: f64, reduction: f64) -> f64 {
    let c = &CODATA;
    c.hbar * c.c * std::f64::consts::PI.powi(2) / 1440.0 * 2.0 * std::f64::consts::PI * radius * reduction
}

/// Attractive Casimir force magnitude at a gap, N.
pub fn casimir_force(gap: f64, radius: f64, reduction: f64) -> Result<f64> {
    Ok(2.0 * casimir_potential(gap, radius, reduction)?.abs() / gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapModel {
    pub sphere: MicrosphereSpec,
    /// Surface gap at z = 0, m.
    pub gap: f64,
    pub field: FieldModel,
    pub gravity: f64,
    pub casimir_reduction: f64,
    pub casimir: bool,
    /// Adds the source's own on-axis field to the levitating field.
    pub spin_field: Option<SpinSourceGeometry>,
    /// Allowed z range, m.
    pub window: (f64, f64),
}

impl TrapModel {
    /// Uses the configured field model, or calibrates one to the gap and ω_z.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let field = match cfg.trap.field_model {
            Some(m) => m,
            None => calibrate_field(&cfg.sphere, cfg.source.gap, &cfg.trap)?,
        };
        Ok(TrapModel {
            sphere: cfg.sphere,
            gap: cfg.source.gap,
            field,
            gravity: cfg.trap.gravity,
            casimir_reduction: cfg.trap.casimir_reduction,
            casimir: true,
            spin_field: None,
            window: (MIN_GAP - cfg.source.gap, 1e-3),
        })
    }

    fn diamagnetic_prefactor(&self) -> f64 {
        self.sphere.susceptibility * self.sphere.volume() / CODATA.mu_0
    }

    fn check(&self, z: f64) -> Result<()> {
        if z < self.window.0 || z > self.window.1 || !z.is_finite() {
            return Err(Error::domain(
                "trap_potential",
                format!("z = {z:e} m outside [{:e}, {:e}]", self.window.0, self.window.1),
            ));
        }
        Ok(())
    }

    fn spin_terms(&self, z: f64) -> (f64, f64) {
        match &self.spin_field {
            None => (0.0, 0.0),
            Some(g) => {
                let h = g.center_height(self.sphere.radius) + z;
                let (f1, d1) = axis_bracket(h, g.outer_radius, g.outer_height);
                let (f2, d2) = axis_bracket(h, g.inner_radius, g.inner_height);
                let k = 0.5 * CODATA.mu_0 * g.effective_spin_density() * CODATA.mu_b;
                (k * (f1 - f2), k * (d1 - d2))
            }
        }
    }

    /// E_p(z), J.
    pub fn potential(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        let r2 = self.sphere.radius * self.sphere.radius;
        let (b, b1, b2) = self.field.at(z);
        let mut field = b * b + (b1 * b1 + b * b2) * r2 / 5.0 + 3.0 * b2 * b2 * r2 * r2 / 140.0;
        let (bs, _) = self.spin_terms(z);
        field += 2.0 * b * bs + bs * bs;
        let mut e = self.sphere.mass * self.gravity * z + 0.5 * self.diamagnetic_prefactor() * field;
        if self.casimir {
            e += casimir_potential(self.gap + z, self.sphere.radius, self.casimir_reduction)?;
        }
        Ok(e)
    }

    /// dE_p/dz, N.
    pub fn slope(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        let r2 = self.sphere.radius * self.sphere.radius;
        let (b, b1, b2) = self.field.at(z);
        let (bs, dbs) = self.spin_terms(z);
        let field = b * b1 + 0.3 * b1 * b2 * r2 + b1 * bs + b * dbs + bs * dbs;
        let mut d = self.sphere.mass * self.gravity + self.diamagnetic_prefactor() * field;
        if self.casimir {
            let gap = self.gap + z;
            d += 2.0 * casimir_coefficient(self.sphere.radius, self.casimir_reduction) / (gap * gap * gap);
        }
        Ok(d)
    }

    /// d²E_p/dz² by central differences of the slope with Richardson refinement, N/m.
    pub fn stiffness(&self, z: f64, step: f64) -> Result<f64> {
        let d = |h: f64| -> Result<f64> { Ok((self.slope(z + h)? - self.slope(z - h)?) / (2.0 * h)) };
        Ok((4.0 * d(0.5 * step)? - d(step)?) / 3.0)
    }

    fn scan_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.window;
        let g_lo = self.gap + lo;
        let g_hi = self.gap + hi;
        let n = 4000;
        let ratio = (g_hi / g_lo).ln() / n as f64;
        (0..=n)
            .map(|i| {
                if i == n {
                    hi
                } else {
                    (g_lo * (ratio * i as f64).exp() - self.gap).max(lo)
                }
            })
            .collect()
    }

    fn bisect(&self, mut a: f64, mut b: f64) -> Result<f64> {
        let fa = self.slope(a)?;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            let fm = self.slope(m)?;
            if fm == 0.0 {
                return Ok(m);
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Solves for the field slope and curvature that place the equilibrium at
/// z = 0 with stiffness m·ω_z², holding the field value B_ext + B_pm.
pub fn calibrate_field(sphere: &MicrosphereSpec, gap: f64, trap: &TrapConfig) -> Result<FieldModel> {
    let b0 = trap.field_at_sphere();
    let k = sphere.susceptibility * sphere.volume() / CODATA.mu_0;
    if k == 0.0 || b0 == 0.0 {
        return Err(Error::domain(
            "calibrate_field",
            "needs a diamagnetic sphere in a nonzero field",
        ));
    }
    let a = casimir_coefficient(sphere.radius, trap.casimir_reduction);
    let r2 = sphere.radius * sphere.radius;
    let balance = sphere.mass * trap.gravity + 2.0 * a / (gap * gap * gap);
    let stiffness = sphere.mass * trap.omega_z * trap.omega_z + 6.0 * a / (gap * gap * gap * gap);
    let mut slope = trap.field_gradient;
    let mut curvature = 0.0;
    for _ in 0..100 {
        let next_c = (stiffness / k - slope * slope - 0.3 * curvature * curvature * r2) / b0;
        let next_s = -balance / (k * (b0 + 0.3 * next_c * r2));
        let done = (next_c - curvature).abs() <= 1e-15 * next_c.abs() && (next_s - slope).abs() <= 1e-15 * next_s.abs();
        curvature = next_c;
        slope = next_s;
        if done {
            break;
        }
    }
    if !(slope.is_finite() && curvature.is_finite()) {
        return Err(Error::domain("calibrate_field", "calibration diverged"));
    }
    Ok(FieldModel {
        value: b0,
        slope,
        curvature,
    })
}

/// Local minimum of E_p with the lowest energy in the window.
pub fn find_equilibrium(model: &TrapModel) -> Result<f64> {
    let grid = model.scan_grid();
    let slopes = grid.iter().map(|&z| model.slope(z)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..grid.len() - 1 {
        if slopes[i] < 0.0 && slopes[i + 1] >= 0.0 {
            let z = model.bisect(grid[i], grid[i + 1])?;
            let e = model.potential(z)?;
            if best.map_or(true, |(_, eb)| e < eb) {
                best = Some((z, e));
            }
        }
    }
    let (z, _) = best.ok_or(Error::NoEquilibrium {
        lo: model.window.0,
        hi: model.window.1,
    })?;
    let residual = model.slope(z)?.abs();
    if residual >= 1e-20 {
        return Err(Error::Numeric {
            what: "find_equilibrium",
            achieved: residual,
            target: 1e-20,
        });
    }
    Ok(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapProfile {
    pub z: Vec<f64>,
    pub energy: Vec<f64>,
    pub slope: Vec<f64>,
    pub z_eq: f64,
    /// Surface gap at equilibrium, m.
    pub gap_eq: f64,
    pub omega_z: f64,
    /// Smallest barrier to escape from z_eq inside the window, J.
    pub depth: f64,
    pub field: FieldModel,
}

/// Highest energy on [a, b] relative to `e0`, refined at interior maxima.
fn barrier(model: &TrapModel, grid: &[f64], a: f64, b: f64, e0: f64) -> Result<f64> {
    let mut pts: Vec<f64> = grid.iter().copied().filter(|&z| z > a && z < b).collect();
    pts.insert(0, a);
    pts.push(b);
    let mut top = f64::NEG_INFINITY;
    for w in pts.windows(2) {
        let (sa, sb) = (model.slope(w[0])?, model.slope(w[1])?);
        if sa > 0.0 && sb <= 0.0 {
            top = top.max(model.potential(model.bisect(w[0], w[1])?)?);
        }
    }
    top = top.max(model.potential(a)?).max(model.potential(b)?);
    Ok(top - e0)
}

/// Equilibrium, ω_z = √(E_p''/m), escape depth, and a profile on `points`
/// samples from the window floor to `span` above equilibrium.
pub fn resonance_and_depth(model: &TrapModel, points: usize, span: f64) -> Result<TrapProfile> {
    let z_eq = find_equilibrium(model)?;
    let k = model.stiffness(z_eq, 1e-9)?;
    if !(k > 0.0) {
        return Err(Error::domain("resonance_and_depth", "equilibrium is not a minimum"));
    }
    let omega_z = (k / model.sphere.mass).sqrt();
    let grid = model.scan_grid();
    let e0 = model.potential(z_eq)?;
    let down = barrier(model, &grid, model.window.0, z_eq, e0)?;
    let up = barrier(model, &grid, z_eq, model.window.1, e0)?;
    let lo = model.window.0;
    let hi = (z_eq + span).min(model.window.1);
    let n = points.max(2);
    let z: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let rows = z
        .par_iter()
        .map(|&zi| Ok((model.potential(zi)?, model.slope(zi)?)))
        .collect::<Result<Vec<_>>>()?;
    let (energy, slope) = rows.into_iter().unzip();
    Ok(TrapProfile {
        z,
        energy,
        slope,
        z_eq,
        gap_eq: model.gap + z_eq,
        omega_z,
        depth: down.min(up).max(0.0),
        field: model.field,
    })
}
