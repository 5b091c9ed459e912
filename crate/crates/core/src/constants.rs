//! CODATA 2018 values plus the few derived combinations used across the crate.

use serde::{Deserialize, Serialize};

/// Elementary charge, used only for eV conversions.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// J s
    pub hbar: f64,
    /// m/s
    pub c: f64,
    /// J/K
    pub k_b: f64,
    /// T m/A
    pub mu_0: f64,
    /// J/T
    pub mu_b: f64,
    /// kg
    pub m_e: f64,
    /// Hz/T, frequency convention
    pub gamma_e: f64,
    /// kg, atomic mass unit
    pub nucleon_mass: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    c: 299_792_458.0,
    k_b: 1.380_649e-23,
    mu_0: 1.256_637_062_12e-6,
    mu_b: 9.274_010_078_3e-24,
    m_e: 9.109_383_701_5e-31,
    gamma_e: 28.024e9,
    nucleon_mass: 1.660_539_066_60e-27,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA
    }
}

impl PhysicalConstants {
    /// ħc expressed in eV·m.
    pub fn hbar_c_ev_m(&self) -> f64 {
        self.hbar * self.c / ELEMENTARY_CHARGE
    }

    /// Prefactor ħ²/(8π m_e) of the monopole-dipole potential, J·m².
    pub fn spin_mass_prefactor(&self) -> f64 {
        self.hbar * self.hbar / (8.0 * std::f64::consts::PI * self.m_e)
    }

    pub(crate) fn all_positive(&self) -> bool {
        [
            self.hbar,
            self.c,
            self.k_b,
            self.mu_0,
            self.mu_b,
            self.m_e,
            self.gamma_e,
            self.nucleon_mass,
        ]
        .iter()
        .all(|v| *v > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codata_is_positive() {
        assert!(CODATA.all_positive());
    }

    #[test]
    fn hbar_c_in_ev_nm() {
        let hc = CODATA.hbar_c_ev_m() * 1e9;
        assert!((hc - 197.327).abs() < 1e-3, "{hc}");
    }
}
