//! Averaged-periodogram spectral estimation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-sided spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Hz
    pub frequency: Vec<f64>,
    /// units²/Hz
    pub density: Vec<f64>,
    /// Bin spacing, Hz.
    pub resolution: f64,
    pub segments: usize,
    pub segment_len: usize,
    pub sample_rate: f64,
}

impl Psd {
    /// ∫ density df over [f_lo, f_hi] by the rectangle rule on bins.
    pub fn band_power(&self, f_lo: f64, f_hi: f64) -> f64 {
        self.frequency
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .map(|(_, d)| d * self.resolution)
            .sum()
    }

    pub fn peak_frequency(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.frequency[i]
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Welch estimate with a periodic Hann window, 50% overlap and per-segment
/// mean removal. Needs at least 8 segments.
pub fn welch(x: &[f64], sample_rate: f64, segment_len: usize) -> Result<Psd> {
    if !(sample_rate > 0.0) {
        return Err(Error::validation("sample_rate", "must be positive"));
    }
    if segment_len < 8 {
        return Err(Error::validation("segment_len", "must be at least 8 samples"));
    }
    let hop = segment_len / 2;
    let segments = if x.len() >= segment_len {
        (x.len() - segment_len) / hop + 1
    } else {
        0
    };
    if segments < 8 {
        return Err(Error::validation(
            "segment_len",
            format!("{} samples give {segments} segments of {segment_len}; need 8", x.len()),
        ));
    }
    let w = hann(segment_len);
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    for s in 0..segments {
        let seg = &x[s * hop..s * hop + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for (b, (v, wn)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
            *b = Complex::new((v - mean) * wn, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }
    let scale = 2.0 / (sample_rate * w2 * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = k == 0 || (segment_len % 2 == 0 && k == bins - 1);
            a * if edge { 0.5 * scale } else { scale }
        })
        .collect();
    let resolution = sample_rate / segment_len as f64;
    Ok(Psd {
        frequency: (0..bins).map(|k| k as f64 * resolution).collect(),
        density,
        resolution,
        segments,
        segment_len,
        sample_rate,
    })
}

fn dirichlet(nu: f64, len: usize, sample_rate: f64) -> f64 {
    let x = PI * nu / sample_rate;
    let s = x.sin();
    if s.abs() < 1e-12 {
        len as f64
    } else {
        (len as f64 * x).sin() / s
    }
}

/// |W(ν)|² of the periodic Hann window, large-length form.
pub fn hann_kernel(nu: f64, len: usize, sample_rate: f64) -> f64 {
    let d = sample_rate / len as f64;
    let w = 0.5 * dirichlet(nu, len, sample_rate)
        + 0.25 * dirichlet(nu - d, len, sample_rate)
        + 0.25 * dirichlet(nu + d, len, sample_rate);
    w * w
}

/// Expected Welch density at `freqs` for a process with single-sided PSD
/// `s1(f)`: the true spectrum smeared by the window kernel over ±`half_bins`.
pub fn expected_welch<F>(s1: F, sample_rate: f64, segment_len: usize, freqs: &[f64], half_bins: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let d = sample_rate / segment_len as f64;
    let w2: f64 = hann(segment_len).iter().map(|v| v * v).sum();
    let sub = 32;
    let h = d / sub as f64;
    let n = (half_bins * sub) as i64;
    freqs
        .iter()
        .map(|&fk| {
            let mut acc = 0.0;
            for j in -n..=n {
                let f = fk + j as f64 * h;
                if f <= 0.0 {
                    continue;
                }
                let wt = if j == -n || j == n { 0.5 } else { 1.0 };
                acc += wt * s1(f) * hann_kernel(fk - f, segment_len, sample_rate);
            }
            acc * h / (sample_rate * w2)
        })
        .collect()
}
