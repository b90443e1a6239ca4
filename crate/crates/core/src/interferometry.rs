//! Unbalanced (Franson-type) analyser interferometer and visibility metrics.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{to_frequency, to_time, SampledEnvelope, LEAKAGE_LIMIT};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Delayed arm of an unbalanced interferometer built from two identical splitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerArm {
    /// ps
    pub delay: f64,
    /// rad
    pub phase: f64,
    /// Splitter amplitude coupled into the delayed arm; the direct arm gets `sqrt(1 - r^2)`.
    pub splitting: f64,
}

impl InterferometerArm {
    pub fn balanced(delay: f64, phase: f64) -> Self {
        Self {
            delay,
            phase,
            splitting: FRAC_1_SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delay.is_finite() || !self.phase.is_finite() {
            return Err(Error::InvalidParameter("arm delay and phase must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.splitting) {
            return Err(Error::InvalidParameter(format!(
                "splitting amplitude must lie in [0, 1], got {}",
                self.splitting
            )));
        }
        Ok(())
    }

    /// Transmitted amplitude `sqrt(1 - r^2)`.
    pub fn transmission(&self) -> f64 {
        (1.0 - self.splitting * self.splitting).sqrt()
    }
}

/// `a(t - delay)` via a spectral phase ramp; errors if the copy would wrap.
pub fn delayed(env: &SampledEnvelope, delay: f64) -> Result<SampledEnvelope> {
    if delay == 0.0 {
        return Ok(env.clone());
    }
    let g = *env.grid();
    if delay.abs() >= g.window() {
        return Err(Error::WindowOverflow(format!(
            "delay {delay} ps exceeds the {:.1} ps window",
            g.window()
        )));
    }
    // Samples that would leave the window and re-enter on the other side.
    let peak = env.peak_amplitude();
    let leaving = env
        .samples()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = g.time(*k);
            if delay > 0.0 {
                t + delay > g.t_end()
            } else {
                t + delay < g.t0()
            }
        })
        .map(|(_, a)| a.norm())
        .fold(0.0, f64::max);
    if peak > 0.0 && leaving / peak > LEAKAGE_LIMIT {
        return Err(Error::WindowOverflow(format!(
            "copy delayed by {delay} ps leaves the window (edge/peak = {:.3e})",
            leaving / peak
        )));
    }
    let mut spec = to_frequency(env);
    spec.apply_filter(|w| Complex64::from_polar(1.0, -w * delay));
    Ok(to_time(&spec))
}

/// Single output port of a balanced analyser: `(a(t) + e^{i phase} a(t - delay)) / 2`.
pub fn recombine(env: &SampledEnvelope, delay: f64, phase: f64) -> Result<SampledEnvelope> {
    recombine_arm(env, &InterferometerArm::balanced(delay, phase))
}

/// Output port for an arbitrary splitting ratio: `t^2 a(t) + r^2 e^{i phase} a(t - delay)`.
pub fn recombine_arm(env: &SampledEnvelope, arm: &InterferometerArm) -> Result<SampledEnvelope> {
    arm.validate()?;
    let shifted = delayed(env, arm.delay)?;
    let direct = arm.transmission().powi(2);
    let late = Complex64::from_polar(arm.splitting * arm.splitting, arm.phase);
    let mut out = env.clone();
    let s = shifted.samples();
    par::for_each_indexed(out.samples_mut(), |k, a| *a = *a * direct + late * s[k]);
    Ok(out)
}

/// Constructive and destructive analyser outputs and the central-peak visibility.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceResult {
    pub constructive: SampledEnvelope,
    pub destructive: SampledEnvelope,
    /// Central window, ps.
    pub window: (f64, f64),
    /// Midpoint of the outer peaks, ps.
    pub center: f64,
    /// Outer and central peak positions, ps.
    pub peaks: [f64; 3],
    pub analyzer_phase: f64,
    pub energy_constructive: f64,
    pub energy_destructive: f64,
    /// Central-window energy visibility.
    pub visibility: f64,
    /// Visibility from central peak heights.
    pub peak_visibility: f64,
}

/// Fraction of the maximum above which a lobe counts as a peak.
pub const PEAK_THRESHOLD: f64 = 0.1;

/// Peak positions of the lobes rising above `PEAK_THRESHOLD` of the maximum.
pub fn find_peaks(intensity: &[f64], times: &[f64]) -> Vec<f64> {
    let max = intensity.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let level = PEAK_THRESHOLD * max;
    let mut peaks = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in intensity.iter().enumerate() {
        if v > level {
            match best {
                Some((_, b)) if b >= v => {}
                _ => best = Some((k, v)),
            }
        } else if let Some((i, _)) = best.take() {
            peaks.push(times[i]);
        }
    }
    if let Some((i, _)) = best {
        peaks.push(times[i]);
    }
    peaks
}

/// Central window `[t_c - |m_dt|/2, t_c + |m_dt|/2]` of a three-peak pattern.
fn three_peak_window(sum: &[f64], times: &[f64], m_dt: f64) -> Result<([f64; 3], f64, (f64, f64))> {
    let peaks = find_peaks(sum, times);
    if peaks.len() < 3 {
        return Err(Error::PeakDetection(format!(
            "expected three peaks above {PEAK_THRESHOLD} of maximum, found {}",
            peaks.len()
        )));
    }
    let (first, last) = (peaks[0], peaks[peaks.len() - 1]);
    let center = 0.5 * (first + last);
    let mid = peaks
        .iter()
        .copied()
        .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
        .unwrap_or(center);
    let half = 0.5 * m_dt.abs();
    Ok(([first, mid, last], center, (center - half, center + half)))
}

fn window_energy(env: &SampledEnvelope, window: (f64, f64)) -> f64 {
    let g = *env.grid();
    par::sum_indexed(env.samples(), |k, a| {
        let t = g.time(k);
        if t >= window.0 && t <= window.1 {
            a.norm_sqr()
        } else {
            0.0
        }
    }) * g.dt()
}

fn window_peak(env: &SampledEnvelope, window: (f64, f64)) -> f64 {
    let g = *env.grid();
    env.samples()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = g.time(*k);
            t >= window.0 && t <= window.1
        })
        .map(|(_, a)| a.norm_sqr())
        .fold(0.0, f64::max)
}

fn contrast(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi + lo > 0.0 {
        ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Analyser phase that interferes constructively with bin phase `psi`.
///
/// An inverted image (`m_dt < 0`) swaps the bins, so the phase changes sign.
pub fn matched_analyzer_phase(m_dt: f64, psi: f64) -> f64 {
    if m_dt < 0.0 {
        -psi
    } else {
        psi
    }
}

/// Recombines `image` with delay `|m_dt|` at the matched and opposite analyser
/// phases and evaluates the central-peak visibility.
pub fn visibility_experiment(image: &SampledEnvelope, m_dt: f64, psi: f64) -> Result<InterferenceResult> {
    visibility_at(image, m_dt, matched_analyzer_phase(m_dt, psi))
}

/// As [`visibility_experiment`] with an explicit analyser phase for the
/// constructive setting.
pub fn visibility_at(image: &SampledEnvelope, m_dt: f64, phase: f64) -> Result<InterferenceResult> {
    if !(m_dt.is_finite() && m_dt != 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bin separation must be finite and nonzero, got {m_dt}"
        )));
    }
    let delay = m_dt.abs();
    let (c, d) = par::join(
        || recombine(image, delay, phase),
        || recombine(image, delay, phase + PI),
    );
    let (c, d) = (c?, d?);
    let times = image.grid().times();
    let sum: Vec<f64> = c
        .samples()
        .iter()
        .zip(d.samples())
        .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
        .collect();
    let (peaks, center, window) = three_peak_window(&sum, &times, m_dt)?;
    let (ec, ed) = (window_energy(&c, window), window_energy(&d, window));
    let (pc, pd) = (window_peak(&c, window), window_peak(&d, window));
    Ok(InterferenceResult {
        constructive: c,
        destructive: d,
        window,
        center,
        peaks,
        analyzer_phase: phase,
        energy_constructive: ec,
        energy_destructive: ed,
        visibility: contrast(ec, ed),
        peak_visibility: contrast(pc, pd),
    })
}

/// Central-window energy for each analyser phase, in input order.
///
/// The window is located once from the phase-independent sum of the two ports.
pub fn central_energy_sweep(
    image: &SampledEnvelope,
    m_dt: f64,
    phases: &[f64],
    exec: Exec,
) -> Result<(Vec<f64>, (f64, f64))> {
    let probe = visibility_experiment(image, m_dt, 0.0)?;
    let window = probe.window;
    let shifted = delayed(image, m_dt.abs())?;
    let energies = par::map_collect(exec, phases, |&phi| {
        let late = Complex64::from_polar(0.5, phi);
        let g = *image.grid();
        let s = shifted.samples();
        image
            .samples()
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let t = g.time(*k);
                t >= window.0 && t <= window.1
            })
            .map(|(k, a)| (0.5 * a + late * s[k]).norm_sqr())
            .sum::<f64>()
            * g.dt()
    });
    Ok((energies, window))
}

/// Visibility `(max - min) / (max + min)` of a set of energies.
pub fn sweep_visibility(energies: &[f64]) -> f64 {
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    contrast(hi, lo)
}

/// Skewness (normalised third central moment) of the intensity profile.
pub fn asymmetry(env: &SampledEnvelope) -> Result<f64> {
    let g = *env.grid();
    let s = env.samples();
    let m0 = par::sum_indexed(s, |_, a| a.norm_sqr());
    if !(m0 > 0.0) {
        return Err(Error::Degenerate("all-zero envelope".into()));
    }
    let mean = par::sum_indexed(s, |k, a| g.time(k) * a.norm_sqr()) / m0;
    let moment = |p: i32| par::sum_indexed(s, |k, a| (g.time(k) - mean).powi(p) * a.norm_sqr()) / m0;
    let (m2, m3) = (moment(2), moment(3));
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("zero-width intensity profile".into()));
    }
    Ok(m3 / m2.powf(1.5))
}
