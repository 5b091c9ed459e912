//! Spin polarization under periodic π-pulse flipping and the spectrum of
//! the resulting force modulation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::CODATA;
use crate::error::{ensure_positive, Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSchedule {
    pub omega_z: f64,
    /// Interval between adjacent π pulses, π/ω_z.
    pub tau0: f64,
    pub t1: f64,
    pub total_time: f64,
    /// Hz
    pub mw_frequency: f64,
    pub pi_pulse_length: f64,
    pub b1: f64,
}

/// Builds the flip schedule for a resonance at `omega_z`. T₁ defaults to 1 s.
pub fn pulse_schedule(omega_z: f64, total_time: f64, b_ext: f64, b1: f64) -> Result<ModulationSchedule> {
    ensure_positive("omega_z", omega_z)?;
    ensure_positive("total_time", total_time)?;
    ensure_positive("b_ext", b_ext)?;
    ensure_positive("b1", b1)?;
    Ok(ModulationSchedule {
        omega_z,
        tau0: PI / omega_z,
        t1: 1.0,
        total_time,
        mw_frequency: CODATA.gamma_e * b_ext,
        pi_pulse_length: 1.0 / (2.0 * CODATA.gamma_e * b1),
        b1,
    })
}

impl ModulationSchedule {
    pub fn with_t1(mut self, t1: f64) -> Result<Self> {
        ensure_positive("t1", t1)?;
        self.t1 = t1;
        Ok(self)
    }

    pub fn pulse_count(&self) -> usize {
        (self.total_time / self.tau0).floor() as usize
    }

    /// Pulse instants k·τ0 for k = 1..=pulse_count.
    pub fn pulse_times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.pulse_count()).map(move |k| k as f64 * self.tau0)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.pi_pulse_length > self.tau0 / 100.0 {
            out.push(format!(
                "pi pulse length {:.3e} s exceeds 1% of the flip interval {:.3e} s",
                self.pi_pulse_length, self.tau0
            ));
        }
        out
    }

    /// e^{-τ0/T1}; underflows cleanly to 0 for τ0 ≫ T1.
    fn decay(&self) -> f64 {
        (-self.tau0 / self.t1).exp()
    }

    /// Square-wave amplitude 2/(1+e^{-τ0/T1}).
    pub fn amplitude(&self) -> f64 {
        2.0 / (1.0 + self.decay())
    }

    /// Ideal flipped polarization sign: +1 until the first pulse at τ0.
    pub fn drive_sign(&self, t: f64) -> f64 {
        if ((t / self.tau0).floor() as i64).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Thermal two-level polarization tanh(μ_B B / k_B T).
pub fn polarization_fraction(b: f64, temperature: f64) -> Result<f64> {
    ensure_positive("temperature", temperature)?;
    if !(b >= 0.0) {
        return Err(Error::validation("b", "field must be non-negative"));
    }
    Ok((CODATA.mu_b * b / (CODATA.k_b * temperature)).tanh())
}

/// Steady-state sawtooth P(τ) = 1 - 2e^{-τ/T1}/(1+e^{-τ0/T1}), τ ∈ (0, τ0]
/// measured from the last pulse. At a pulse instant the pre-pulse value is returned.
pub fn autocorrelation_p(t: f64, schedule: &ModulationSchedule) -> f64 {
    let tau0 = schedule.tau0;
    let tau = if t <= 0.0 {
        0.0
    } else {
        t - tau0 * ((t / tau0).ceil() - 1.0)
    };
    1.0 - 2.0 * (-tau / schedule.t1).exp() / (1.0 + schedule.decay())
}

/// ξ(t) = A·sgn(cos ω_z t): square wave with amplitude 2/(1+e^{-τ0/T1}).
pub fn modulation_xi(t: f64, schedule: &ModulationSchedule) -> f64 {
    let k = ((t + 0.5 * schedule.tau0) / schedule.tau0).floor() as i64;
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    schedule.amplitude() * sign
}

/// Closed-form single-sided spectrum of the modulated spin correlation, in s.
pub fn gtilde(omega: f64, t1: f64, tau0: f64) -> f64 {
    let e = (-tau0 / t1).exp();
    let eh = (-0.5 * tau0 / t1).exp();
    let one_minus_e = -(-tau0 / t1).exp_m1();
    let wt = omega * t1;
    let lorentz = 1.0 + wt * wt;
    let (s_half, c_half) = (0.5 * omega * tau0).sin_cos();
    let ring = one_minus_e * one_minus_e + 4.0 * e * c_half * c_half;
    let first = 2.0 * t1 / lorentz;
    let second = 4.0 * eh * (t1 * (1.0 + e) * c_half - omega * t1 * t1 * one_minus_e * s_half) / (lorentz * ring);
    4.0 / (1.0 + e) * (first - second)
}

/// Numeric transform 4∫₀^{20T₁} A e^{-t/T₁} sgn(cos ω_z t) cos(ωt) dt,
/// integrated piecewise between sign changes.
pub fn gtilde_numeric(omega: f64, t1: f64, tau0: f64) -> Result<f64> {
    ensure_positive("t1", t1)?;
    ensure_positive("tau0", tau0)?;
    let horizon = 20.0 * t1;
    let amp = 2.0 / (1.0 + (-tau0 / t1).exp());
    let mut total = 0.0;
    let mut err = 0.0;
    let mut a = 0.0;
    let mut b = 0.5 * tau0;
    let mut sign = 1.0;
    while a < horizon {
        let hi = b.min(horizon);
        let est = quad::integrate(|t| (-t / t1).exp() * (omega * t).cos(), a, hi, 1.0, 1.0)?;
        total += sign * est.value;
        err += est.error;
        a = hi;
        b += tau0;
        sign = -sign;
    }
    let value = 4.0 * amp * total;
    let achieved = 4.0 * amp * err;
    let target = 1e-8 * value.abs() + 1e-12 * t1;
    if achieved > target {
        return Err(Error::Numeric {
            what: "gtilde_numeric",
            achieved,
            target,
        });
    }
    Ok(value)
}

/// Net polarization of a two-level ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub p_up: f64,
    pub p_down: f64,
}

impl SpinState {
    pub fn polarized() -> Self {
        SpinState { p_up: 1.0, p_down: 0.0 }
    }

    pub fn from_polarization(p: f64) -> Self {
        let p = p.clamp(-1.0, 1.0);
        SpinState {
            p_up: 0.5 * (1.0 + p),
            p_down: 0.5 * (1.0 - p),
        }
    }

    pub fn polarization(&self) -> f64 {
        self.p_up - self.p_down
    }

    /// Lattice relaxation toward spin-up over `dt`.
    pub fn relax(&mut self, dt: f64, t1: f64) {
        let flip = -(-dt / t1).exp_m1();
        self.p_up += self.p_down * flip;
        self.p_down *= 1.0 - flip;
    }

    /// Ideal π pulse.
    pub fn flip(&mut self) {
        std::mem::swap(&mut self.p_up, &mut self.p_down);
    }
}
