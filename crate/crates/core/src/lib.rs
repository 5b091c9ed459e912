//! Sensitivity modelling for a levitated diamagnetic microsphere probing
//! ALP-mediated spin-mass forces from a polarized two-cylinder source.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod config;
pub mod constants;
pub mod error;
pub mod langevin;
pub mod modulation;
pub mod noise;
pub mod output;
pub mod quad;
pub mod spectral;
pub mod spin_mass;
pub mod trap;
pub mod validate;

pub use config::{
    derive_microsphere, lambda_mass_convert, load_config, AlpCoupling, Convention, Conventions, ConvertFrom,
    EnvironmentConfig, ExperimentConfig, FieldModel, GeometrySigma, MicrosphereSpec, ModulationSettings,
    SpinSourceGeometry, TrapConfig,
};
pub use constants::{PhysicalConstants, CODATA};
pub use error::{Error, Result};
pub use modulation::{pulse_schedule, ModulationSchedule, SpinState};
