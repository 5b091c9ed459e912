//! Time-domain integration of the trapped oscillator with thermal noise and
//! square-wave modulated spin forces, plus resonant amplitude recovery.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::constants::CODATA;
use crate::error::{Error, Result};
use crate::noise::thermal_psd;
use crate::spectral::{welch, Psd};
use crate::spin_mass::force_per_coupling;

/// Damping multiplier for desk-scale runs.
pub const INFLATED_GAMMA: f64 = 1e4;

/// Fundamental amplitude of a unit square wave.
pub const SQUARE_FUNDAMENTAL: f64 = 4.0 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Drawn from the thermal distribution at the effective temperature.
    Equilibrium,
    At {
        z: f64,
        v: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Integration steps per trap period; even and at least 50.
    pub steps_per_period: usize,
    /// s
    pub duration: f64,
    pub seed: u64,
    pub thermal: bool,
    pub spin_mass: bool,
    pub spin_background: bool,
    pub g_product: f64,
    /// Range of the injected spin-mass force, m.
    pub lambda: f64,
    /// Modulated background force amplitude, N.
    pub background_force: f64,
    /// Static background force, N.
    pub background_offset: f64,
    pub gamma_inflation: f64,
    pub decimation: usize,
    pub initial: InitialState,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            steps_per_period: 64,
            duration: 600.0,
            seed: 0,
            thermal: true,
            spin_mass: false,
            spin_background: false,
            g_product: 0.0,
            lambda: 2e-6,
            background_force: 0.0,
            background_offset: 0.0,
            gamma_inflation: 1.0,
            decimation: 1,
            initial: InitialState::Equilibrium,
        }
    }
}

impl SimulationConfig {
    pub fn inflated(mut self) -> Self {
        self.gamma_inflation = INFLATED_GAMMA;
        self
    }

    pub fn validate(&self, omega_z: f64) -> Result<()> {
        if self.steps_per_period < 50 || self.steps_per_period % 2 != 0 {
            return Err(Error::validation("steps_per_period", "must be even and at least 50"));
        }
        let period = 2.0 * PI / omega_z;
        if !(self.duration >= 100.0 * period) || !self.duration.is_finite() {
            return Err(Error::validation(
                "duration",
                format!("must cover at least 100 periods ({:.3} s)", 100.0 * period),
            ));
        }
        if self.decimation == 0 {
            return Err(Error::validation("decimation", "must be at least 1"));
        }
        if !(self.gamma_inflation > 0.0) {
            return Err(Error::validation("gamma_inflation", "must be positive"));
        }
        if self.spin_mass && !(self.lambda > 0.0) {
            return Err(Error::validation("lambda", "must be positive"));
        }
        Ok(())
    }
}

/// Oscillator parameters resolved from the experiment and run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub mass: f64,
    pub omega_z: f64,
    /// Spring frequency used by the integrator so that the discrete orbit
    /// oscillates at exactly ω_z.
    pub omega_spring: f64,
    pub gamma: f64,
    /// Single-sided thermal force PSD, N²/Hz.
    pub thermal_psd: f64,
    /// Temperature whose equipartition matches the thermal PSD, K.
    pub effective_temperature: f64,
    pub dt: f64,
    pub f_sm: f64,
    pub f_s: f64,
    pub f_offset: f64,
}

impl Oscillator {
    pub fn new(sim: &SimulationConfig, cfg: &ExperimentConfig) -> Result<Self> {
        cfg.trap.validate()?;
        sim.validate(cfg.trap.omega_z)?;
        let m = cfg.sphere.mass;
        let w = cfg.trap.omega_z;
        let gamma = cfg.trap.gamma * sim.gamma_inflation;
        let dt = 2.0 * PI / w / sim.steps_per_period as f64;
        let s_th = if sim.thermal {
            thermal_psd(m, gamma, cfg.environment.temperature, cfg.conventions.thermal)
        } else {
            0.0
        };
        let f_sm = if sim.spin_mass {
            sim.g_product * force_per_coupling(&cfg.sphere, &cfg.source, sim.lambda)
        } else {
            0.0
        };
        let (f_s, f_offset) = if sim.spin_background {
            (sim.background_force, sim.background_offset)
        } else {
            (0.0, 0.0)
        };
        Ok(Oscillator {
            mass: m,
            omega_z: w,
            omega_spring: 2.0 / dt * (0.5 * w * dt).sin(),
            gamma,
            thermal_psd: s_th,
            effective_temperature: s_th / (4.0 * m * gamma * CODATA.k_b),
            dt,
            f_sm,
            f_s,
            f_offset,
        })
    }

    /// Equipartition variance k_B T_eff/(mω²), m².
    pub fn equilibrium_variance(&self) -> f64 {
        CODATA.k_b * self.effective_temperature / (self.mass * self.omega_z * self.omega_z)
    }

    fn energy(&self, z: f64, v: f64) -> f64 {
        0.5 * self.mass * (v * v + self.omega_spring * self.omega_spring * z * z)
    }
}

/// Square-wave sign at step `n` with flips every half period; flip instants
/// carry the mean of the two sides.
fn drive_sign(n: usize, half: usize) -> f64 {
    if n == 0 {
        return 0.5;
    }
    if n % half == 0 {
        return 0.0;
    }
    if (n / half) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Integrates with BAOAB splitting (exact Ornstein-Uhlenbeck velocity step),
/// calling `observe(step, z, v)` for steps 0..=n.
pub fn integrate<F>(sim: &SimulationConfig, osc: &Oscillator, mut observe: F) -> Result<(f64, f64)>
where
    F: FnMut(usize, f64, f64),
{
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let kt = CODATA.k_b * osc.effective_temperature;
    let m = osc.mass;
    let (mut z, mut v) = match sim.initial {
        InitialState::Equilibrium => {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (a * (kt / (m * osc.omega_spring.powi(2))).sqrt(), b * (kt / m).sqrt())
        }
        InitialState::At { z, v } => (z, v),
    };
    let steps = (sim.duration / osc.dt).floor() as usize;
    let half = sim.steps_per_period / 2;
    let c = (-osc.gamma * osc.dt).exp();
    let sigma_v = ((1.0 - c * c) * kt / m).sqrt();
    let w2 = osc.omega_spring * osc.omega_spring;
    let h = 0.5 * osc.dt;
    let modulated = osc.f_sm + osc.f_s;
    let force = |n: usize| (modulated * drive_sign(n, half) + osc.f_offset) / m;
    let drive_amp =
        (SQUARE_FUNDAMENTAL * modulated.abs() / (m * osc.gamma * osc.omega_z)).max(osc.f_offset.abs() / (m * w2));
    let limit = 1e6
        * kt.max(osc.energy(z, v))
            .max(osc.energy(drive_amp, 0.0))
            .max(f64::MIN_POSITIVE);
    observe(0, z, v);
    let mut a_n = force(0);
    for n in 0..steps {
        v += h * (a_n - w2 * z);
        z += h * v;
        if sigma_v > 0.0 {
            let xi: f64 = StandardNormal.sample(&mut rng);
            v = c * v + sigma_v * xi;
        } else {
            v *= c;
        }
        z += h * v;
        a_n = force(n + 1);
        v += h * (a_n - w2 * z);
        observe(n + 1, z, v);
        if (n + 1) % sim.steps_per_period == 0 {
            let e = osc.energy(z, v);
            if !(e <= limit) {
                return Err(Error::Unstable {
                    t: (n + 1) as f64 * osc.dt,
                    energy: e,
                });
            }
        }
    }
    Ok((z, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    /// Sample spacing, s.
    pub sample_dt: f64,
    pub seed: u64,
    pub config_hash: String,
    pub oscillator: Oscillator,
    pub samples_per_period: usize,
}

pub fn simulate(sim: &SimulationConfig, cfg: &ExperimentConfig) -> Result<Trajectory> {
    let osc = Oscillator::new(sim, cfg)?;
    let steps = (sim.duration / osc.dt).floor() as usize;
    let cap = steps / sim.decimation + 1;
    let (mut t, mut z, mut v) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    integrate(sim, &osc, |n, zn, vn| {
        if n % sim.decimation == 0 {
            t.push(n as f64 * osc.dt);
            z.push(zn);
            v.push(vn);
        }
    })?;
    let samples_per_period = if sim.steps_per_period % sim.decimation == 0 {
        sim.steps_per_period / sim.decimation
    } else {
        0
    };
    Ok(Trajectory {
        t,
        z,
        v,
        sample_dt: osc.dt * sim.decimation as f64,
        seed: sim.seed,
        config_hash: cfg.config_hash(),
        oscillator: osc,
        samples_per_period,
    })
}

/// Welch displacement PSD of a trajectory, m²/Hz.
pub fn estimate_psd(traj: &Trajectory, segment_len: usize) -> Result<Psd> {
    welch(&traj.z, 1.0 / traj.sample_dt, segment_len)
}

/// Per-period complex envelope a_k = (2/N)Σ z e^{-iω_z t}.
#[derive(Debug, Clone)]
struct Envelope {
    phasors: Vec<Complex<f64>>,
    acc: Complex<f64>,
    index: usize,
    values: Vec<Complex<f64>>,
}

impl Envelope {
    fn new(samples_per_period: usize) -> Self {
        let n = samples_per_period as f64;
        Envelope {
            phasors: (0..samples_per_period)
                .map(|i| Complex::from_polar(2.0 / n, -2.0 * PI * i as f64 / n))
                .collect(),
            acc: Complex::new(0.0, 0.0),
            index: 0,
            values: Vec::new(),
        }
    }

    fn push(&mut self, z: f64) {
        self.acc += self.phasors[self.index] * z;
        self.index += 1;
        if self.index == self.phasors.len() {
            self.values.push(self.acc);
            self.acc = Complex::new(0.0, 0.0);
            self.index = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEstimate {
    /// Recovered square-wave force amplitude, N.
    pub amplitude: f64,
    /// Standard error from the spread of block estimates, N.
    pub std_error: f64,
    pub blocks: Vec<f64>,
}

/// In-phase force amplitude from the envelope equation ȧ + (γ/2)a = F̃/(2imω),
/// evaluated independently on `blocks` consecutive stretches.
fn envelope_estimate(a: &[Complex<f64>], osc: &Oscillator, blocks: usize) -> Result<SignalEstimate> {
    let per = a.len() / blocks.max(1);
    if blocks == 0 || per < 3 {
        return Err(Error::validation("blocks", "need at least 3 periods per block"));
    }
    let period = 2.0 * PI / osc.omega_z;
    let scale = Complex::new(0.0, 2.0 * osc.mass * osc.omega_z);
    let estimates: Vec<f64> = a
        .chunks_exact(per)
        .take(blocks)
        .map(|blk| {
            let span = (blk.len() - 1) as f64 * period;
            let inner: Complex<f64> = blk[1..blk.len() - 1].iter().sum();
            let integral = (inner + 0.5 * (blk[0] + blk[blk.len() - 1])) * period;
            let f = scale * ((blk[blk.len() - 1] - blk[0]) / span + 0.5 * osc.gamma * integral / span);
            (Complex::<f64>::i() * f).re / SQUARE_FUNDAMENTAL
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(SignalEstimate {
        amplitude: mean,
        std_error: (var / n).sqrt(),
        blocks: estimates,
    })
}

/// Resonant demodulation of a stored trajectory against the flip schedule.
pub fn recover_signal(traj: &Trajectory, blocks: usize) -> Result<SignalEstimate> {
    if traj.samples_per_period == 0 {
        return Err(Error::validation("decimation", "must divide the steps per period"));
    }
    let mut env = Envelope::new(traj.samples_per_period);
    for &z in &traj.z[..traj.z.len() - 1] {
        env.push(z);
    }
    envelope_estimate(&env.values, &traj.oscillator, blocks)
}

/// (π/4)√(S/T): standard deviation of the recovered amplitude for white
/// force noise of single-sided PSD `s_ff` over `duration`.
pub fn expected_amplitude_noise(s_ff: f64, duration: f64) -> f64 {
    (s_ff / duration).sqrt() / SQUARE_FUNDAMENTAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub estimate: SignalEstimate,
    /// Time average of z², m².
    pub mean_square: f64,
}

/// One run without storing the trajectory.
pub fn run_seed(sim: &SimulationConfig, cfg: &ExperimentConfig, blocks: usize) -> Result<SeedOutcome> {
    let osc = Oscillator::new(sim, cfg)?;
    let mut env = Envelope::new(sim.steps_per_period);
    let mut sum2 = 0.0;
    let mut count = 0usize;
    let steps = (sim.duration / osc.dt).floor() as usize;
    integrate(sim, &osc, |n, z, _| {
        if n < steps {
            env.push(z);
            sum2 += z * z;
            count += 1;
        }
    })?;
    Ok(SeedOutcome {
        seed: sim.seed,
        estimate: envelope_estimate(&env.values, &osc, blocks)?,
        mean_square: sum2 / count as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    pub mean_square: f64,
    pub histogram: Vec<HistogramBin>,
    pub outcomes: Vec<SeedOutcome>,
}

pub fn seed_range(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// Independent runs over `seeds`, evaluated concurrently and reported in seed order.
pub fn monte_carlo(
    sim: &SimulationConfig,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    blocks: usize,
) -> Result<MonteCarloSummary> {
    if seeds.len() < 2 {
        return Err(Error::validation("seeds", "need at least 2 seeds"));
    }
    let outcomes = seeds
        .par_iter()
        .map(|&seed| run_seed(&SimulationConfig { seed, ..*sim }, cfg, blocks))
        .collect::<Result<Vec<_>>>()?;
    let amps: Vec<f64> = outcomes.iter().map(|o| o.estimate.amplitude).collect();
    let n = amps.len() as f64;
    let mean = amps.iter().sum::<f64>() / n;
    let std = (amps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(MonteCarloSummary {
        seeds: seeds.len(),
        mean,
        std,
        std_error: std / n.sqrt(),
        mean_square: outcomes.iter().map(|o| o.mean_square).sum::<f64>() / n,
        histogram: histogram(&amps, 20),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Convention;

    fn cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.conventions.thermal = Convention::AsWritten;
        c
    }

    #[test]
    fn ring_down_at_half_gamma() {
        let c = cfg();
        let sim = SimulationConfig {
            thermal: false,
            duration: 60.0,
            initial: InitialState::At { z: 1e-9, v: 0.0 },
            ..SimulationConfig::default()
        }
        .inflated();
        let traj = simulate(&sim, &c).unwrap();
        let gamma = traj.oscillator.gamma;
        let n = traj.samples_per_period;
        let amp = |k: usize| traj.z[k * n..(k + 1) * n].iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let k = traj.z.len() / n - 2;
        let rate = (amp(1) / amp(k)).ln() / ((k - 1) as f64 * n as f64 * traj.sample_dt);
        assert!((rate / (0.5 * gamma) - 1.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let c = cfg();
        let sim = SimulationConfig {
            duration: 5.0,
            seed: 9,
            ..SimulationConfig::default()
        };
        let a = simulate(&sim, &c).unwrap();
        let b = simulate(&sim, &c).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.v, b.v);
        let other = simulate(&SimulationConfig { seed: 10, ..sim }, &c).unwrap();
        assert_ne!(a.z, other.z);
        assert_eq!(a.config_hash, c.config_hash());
        assert_eq!(a.z.len(), (5.0 / a.oscillator.dt).floor() as usize + 1);
    }

    #[test]
    fn decimation_sets_length() {
        let c = cfg();
        let sim = SimulationConfig {
            duration: 5.0,
            decimation: 8,
            ..SimulationConfig::default()
        };
        let traj = simulate(&sim, &c).unwrap();
        let steps = (5.0 / traj.oscillator.dt).floor() as usize;
        assert_eq!(traj.z.len(), steps / 8 + 1);
        assert_eq!(traj.samples_per_period, 8);
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let c = cfg();
        let short = SimulationConfig {
            duration: 1.0,
            ..SimulationConfig::default()
        };
        assert!(simulate(&short, &c).is_err());
        let coarse = SimulationConfig {
            steps_per_period: 20,
            ..SimulationConfig::default()
        };
        assert!(simulate(&coarse, &c).is_err());
        assert!(monte_carlo(&SimulationConfig::default(), &c, &[1], 10).is_err());
    }

    #[test]
    fn runaway_energy_is_reported() {
        let c = cfg();
        let sim = SimulationConfig {
            thermal: false,
            spin_background: true,
            background_force: 1e-30,
            duration: 10.0,
            initial: InitialState::At { z: 0.0, v: 0.0 },
            ..SimulationConfig::default()
        };
        let mut osc = Oscillator::new(&sim, &c).unwrap();
        osc.gamma = -0.5;
        assert!(matches!(
            integrate(&sim, &osc, |_, _, _| {}),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn thermal_equipartition() {
        let c = cfg();
        let sim = SimulationConfig {
            duration: 300.0,
            ..SimulationConfig::default()
        }
        .inflated();
        let mc = monte_carlo(&sim, &c, &seed_range(100, 96), 10).unwrap();
        let osc = Oscillator::new(&sim, &c).unwrap();
        let expected = osc.equilibrium_variance();
        assert!((expected / 8.3e-17 - 1.0).abs() < 0.01);
        assert!(
            (mc.mean_square / expected - 1.0).abs() < 0.05,
            "{} {}",
            mc.mean_square,
            expected
        );
    }

    #[test]
    fn table_matched_runs_at_half_temperature() {
        let mut c = cfg();
        c.conventions.thermal = Convention::TableMatched;
        let osc = Oscillator::new(&SimulationConfig::default(), &c).unwrap();
        assert!((osc.effective_temperature / c.environment.temperature - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strong_signal_is_recovered() {
        let c = cfg();
        let f = 1e-19;
        let k = force_per_coupling(&c.sphere, &c.source, 2e-6);
        let sim = SimulationConfig {
            duration: 300.0,
            spin_mass: true,
            g_product: f / k,
            ..SimulationConfig::default()
        }
        .inflated();
        let mc = monte_carlo(&sim, &c, &seed_range(1, 16), 10).unwrap();
        assert!((mc.mean / f - 1.0).abs() < 0.03, "{}", mc.mean);
        let osc = Oscillator::new(&sim, &c).unwrap();
        let predicted = expected_amplitude_noise(osc.thermal_psd, sim.duration);
        assert!((mc.std / predicted - 1.0).abs() < 0.4, "{} {}", mc.std, predicted);
    }

    #[test]
    fn noiseless_signal_is_exact() {
        let c = cfg();
        let sim = SimulationConfig {
            thermal: false,
            spin_background: true,
            background_force: 2e-20,
            background_offset: 5e-18,
            duration: 120.0,
            initial: InitialState::At { z: 0.0, v: 0.0 },
            ..SimulationConfig::default()
        }
        .inflated();
        let traj = simulate(&sim, &c).unwrap();
        let est = recover_signal(&traj, 10).unwrap();
        assert!((est.amplitude / 2e-20 - 1.0).abs() < 0.005, "{}", est.amplitude);
        let streamed = run_seed(&sim, &c, 10).unwrap();
        assert!((streamed.estimate.amplitude / est.amplitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_have_no_spread() {
        let c = cfg();
        let sim = SimulationConfig {
            duration: 10.0,
            ..SimulationConfig::default()
        };
        let mc = monte_carlo(&sim, &c, &[4, 4], 5).unwrap();
        assert_eq!(mc.std, 0.0);
        assert_eq!(mc.histogram.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn longer_runs_average_down() {
        let c = cfg();
        let base = SimulationConfig {
            duration: 20.0,
            ..SimulationConfig::default()
        };
        let seeds = seed_range(500, 100);
        let short = monte_carlo(&base, &c, &seeds, 5).unwrap();
        let long = monte_carlo(&SimulationConfig { duration: 40.0, ..base }, &c, &seeds, 5).unwrap();
        let ratio = short.std / long.std;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
        let osc = Oscillator::new(&base, &c).unwrap();
        let predicted = expected_amplitude_noise(osc.thermal_psd, base.duration);
        assert!((short.std / predicted - 1.0).abs() < 0.2, "{} {}", short.std, predicted);
    }

    #[test]
    fn limit_level_signal_has_unit_snr() {
        // a force at the thermal-only limit, rescaled to a 1 s record
        let c = cfg();
        let osc = Oscillator::new(&SimulationConfig::default(), &c).unwrap();
        let sched = crate::noise::schedule_for(&c, 1.0).unwrap();
        let g = crate::modulation::gtilde(c.trap.omega_z, 1.0, sched.tau0);
        let f = (osc.thermal_psd / g).sqrt();
        let k = force_per_coupling(&c.sphere, &c.source, 2e-6);
        let sim = SimulationConfig {
            duration: 10.0,
            spin_mass: true,
            g_product: f / k,
            ..SimulationConfig::default()
        };
        let mc = monte_carlo(&sim, &c, &seed_range(7000, 100), 5).unwrap();
        let snr = f / (mc.std * sim.duration.sqrt());
        assert!(snr > 0.5 && snr < 2.0, "{snr}");
    }
}
