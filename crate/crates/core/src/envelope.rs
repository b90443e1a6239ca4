//! Sampled complex envelopes on a uniform time grid and their spectra.
//!
//! Units throughout: time in ps, angular frequency offset in rad/ps, envelope
//! samples in ps^-1/2 so that `sum |a|^2 dt` is a dimensionless energy.
//!
//! The transform pair is
//!
//! ```text
//! A(w) = 1/sqrt(2 pi) * integral a(t) exp(-i w t) dt
//! a(t) = 1/sqrt(2 pi) * integral A(w) exp(+i w t) dw
//! ```
//!
//! discretised so that `sum |A|^2 dw == sum |a|^2 dt` exactly (Parseval).
//! Spectra are stored with the zero-offset bin at index `n / 2`.

use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Largest allowed boundary amplitude relative to the peak.
pub const LEAKAGE_LIMIT: f64 = 1e-8;

/// Samples inspected at each end of the window by the leakage check.
const EDGE_SAMPLES: usize = 4;

/// Uniform sampling of the co-moving time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_samples: usize,
    dt: f64,
    t0: f64,
}

impl TimeGrid {
    pub fn new(n_samples: usize, dt: f64, t0: f64) -> Result<Self> {
        if n_samples < 2 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be a power of two >= 2, got {n_samples}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidGrid("t0 must be finite".into()));
        }
        Ok(Self { n_samples, dt, t0 })
    }

    /// Grid whose sample `n / 2` sits at `t = 0`.
    pub fn centered(n_samples: usize, dt: f64) -> Result<Self> {
        Self::new(n_samples, dt, -(n_samples as f64 / 2.0) * dt)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.time(k)).collect()
    }

    /// Window length `n * dt`.
    pub fn window(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    /// Angular frequency step, rad/ps.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.window()
    }

    /// Angular frequency of centered spectral bin `k`.
    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 - (self.n_samples / 2) as f64) * self.d_omega()
    }

    /// Nyquist angular frequency `pi / dt`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Index of the sample closest to `t` (clamped to the grid).
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt).round();
        k.clamp(0.0, (self.n_samples - 1) as f64) as usize
    }
}

/// Complex field envelope on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnvelope {
    grid: TimeGrid,
    samples: Vec<Complex64>,
    carrier_nm: Option<f64>,
}

impl SampledEnvelope {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::InvalidGrid(format!(
                "{} samples supplied for a {}-point grid",
                samples.len(),
                grid.n_samples()
            )));
        }
        Ok(Self {
            grid,
            samples,
            carrier_nm: None,
        })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64 + Sync + Send) -> Self {
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.n_samples()];
        par::for_each_indexed(&mut samples, |k, a| *a = f(grid.time(k)));
        Self {
            grid,
            samples,
            carrier_nm: None,
        }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n_samples()],
            carrier_nm: None,
        }
    }

    pub fn with_carrier(mut self, carrier_nm: f64) -> Self {
        self.carrier_nm = Some(carrier_nm);
        self
    }

    pub fn set_carrier(&mut self, carrier_nm: Option<f64>) {
        self.carrier_nm = carrier_nm;
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn carrier_nm(&self) -> Option<f64> {
        self.carrier_nm
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Same envelope scaled by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        par::for_each_indexed(&mut out.samples, |_, a| *a *= factor);
        out
    }

    /// Largest boundary amplitude relative to the peak amplitude.
    pub fn boundary_ratio(&self) -> f64 {
        edge_ratio(&self.samples)
    }

    /// Fails with [`Error::WrapAround`] if energy reaches the window edge.
    pub fn check_boundary(&self, stage: &str) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > LEAKAGE_LIMIT {
            return Err(Error::WrapAround {
                stage: stage.to_string(),
                ratio,
            });
        }
        Ok(())
    }
}

/// Spectrum on the grid-conjugate angular frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    grid: TimeGrid,
    samples: Vec<Complex64>,
    carrier_nm: Option<f64>,
}

impl SpectralEnvelope {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.grid.omega(k)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| self.grid.omega(k)).collect()
    }

    pub fn d_omega(&self) -> f64 {
        self.grid.d_omega()
    }

    pub fn energy(&self) -> f64 {
        par::sum_indexed(&self.samples, |_, a| a.norm_sqr()) * self.grid.d_omega()
    }

    /// Multiplies bin `k` by `h(omega_k)`.
    pub fn apply_filter(&mut self, h: impl Fn(f64) -> Complex64 + Sync + Send) {
        let grid = self.grid;
        par::for_each_indexed(&mut self.samples, |k, a| *a *= h(grid.omega(k)));
    }

    /// Largest spectral-edge amplitude relative to the spectral peak.
    pub fn edge_ratio(&self) -> f64 {
        edge_ratio(&self.samples)
    }
}

fn edge_ratio(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let m = EDGE_SAMPLES.min(samples.len() / 2);
    let head = samples[..m].iter();
    let tail = samples[samples.len() - m..].iter();
    head.chain(tail).map(|a| a.norm()).fold(0.0, f64::max) / peak
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Forward transform to the carrier-relative angular frequency axis.
pub fn to_frequency(env: &SampledEnvelope) -> SpectralEnvelope {
    let grid = env.grid;
    let n = grid.n_samples();
    let mut buf = env.samples.clone();
    plan(n, true).process(&mut buf);
    buf.rotate_right(n / 2);
    let scale = grid.dt() / (2.0 * PI).sqrt();
    let t0 = grid.t0();
    par::for_each_indexed(&mut buf, |k, a| {
        *a *= Complex64::from_polar(scale, -grid.omega(k) * t0);
    });
    SpectralEnvelope {
        grid,
        samples: buf,
        carrier_nm: env.carrier_nm,
    }
}

/// Inverse of [`to_frequency`].
pub fn to_time(spec: &SpectralEnvelope) -> SampledEnvelope {
    let grid = spec.grid;
    let n = grid.n_samples();
    let scale = grid.d_omega() / (2.0 * PI).sqrt();
    let t0 = grid.t0();
    let mut buf = spec.samples.clone();
    par::for_each_indexed(&mut buf, |k, a| {
        *a *= Complex64::from_polar(scale, grid.omega(k) * t0);
    });
    buf.rotate_left(n / 2);
    plan(n, false).process(&mut buf);
    SampledEnvelope {
        grid,
        samples: buf,
        carrier_nm: spec.carrier_nm,
    }
}

/// `amplitude * exp(-2 ln2 ((t - center) / t_fwhm)^2)`; `t_fwhm` is the intensity FWHM.
pub fn gaussian_pulse(
    grid: TimeGrid,
    t_fwhm: f64,
    center: f64,
    amplitude: Complex64,
) -> Result<SampledEnvelope> {
    if !(t_fwhm > 0.0) || !t_fwhm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_fwhm must be positive, got {t_fwhm}"
        )));
    }
    let lo = center - 2.0 * t_fwhm;
    let hi = center + 2.0 * t_fwhm;
    if lo < grid.t0() || hi > grid.t_end() {
        return Err(Error::WindowOverflow(format!(
            "pulse extent [{lo}, {hi}] ps exceeds window [{}, {}] ps",
            grid.t0(),
            grid.t_end()
        )));
    }
    Ok(SampledEnvelope::from_fn(grid, move |t| {
        amplitude * gaussian_profile(t - center, t_fwhm)
    }))
}

fn gaussian_profile(t: f64, t_fwhm: f64) -> f64 {
    let x = t / t_fwhm;
    (-2.0 * LN_2 * x * x).exp()
}

/// Two Gaussian bins of FWHM `tau` at `-delta_t/2` and `+delta_t/2`, the later one
/// carrying the relative phase `psi`; each bin has amplitude 1/2.
pub fn time_bin_pulse(grid: TimeGrid, tau: f64, delta_t: f64, psi: f64) -> Result<SampledEnvelope> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(delta_t >= 0.0) || !delta_t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta_t must be non-negative, got {delta_t}"
        )));
    }
    let half = delta_t / 2.0;
    let lo = -half - 2.0 * tau;
    let hi = half + 2.0 * tau;
    if lo < grid.t0() || hi > grid.t_end() {
        return Err(Error::WindowOverflow(format!(
            "time-bin extent [{lo}, {hi}] ps exceeds window [{}, {}] ps",
            grid.t0(),
            grid.t_end()
        )));
    }
    let late = Complex64::from_polar(0.5, psi);
    Ok(SampledEnvelope::from_fn(grid, move |t| {
        0.5 * gaussian_profile(t + half, tau) + late * gaussian_profile(t - half, tau)
    }))
}

/// `sum |a|^2 dt`.
pub fn energy(env: &SampledEnvelope) -> f64 {
    par::sum_indexed(&env.samples, |_, a| a.norm_sqr()) * env.grid.dt()
}

fn require_nonzero(env: &SampledEnvelope) -> Result<f64> {
    let e = energy(env);
    if !(e > 0.0) {
        return Err(Error::Degenerate("all-zero envelope".into()));
    }
    Ok(e)
}

/// Normalised inner product `sum conj(a) b dt / sqrt(E_a E_b)`.
pub fn overlap(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::InvalidGrid("overlap of envelopes on different grids".into()));
    }
    let ea = require_nonzero(a)?;
    let eb = require_nonzero(b)?;
    let bs = &b.samples;
    let re = par::sum_indexed(&a.samples, |k, x| (x.conj() * bs[k]).re);
    let im = par::sum_indexed(&a.samples, |k, x| (x.conj() * bs[k]).im);
    Ok(Complex64::new(re, im) * a.grid.dt() / (ea * eb).sqrt())
}

/// Overlap of the real amplitude profiles `|a|` and `|b|`; insensitive to phase.
pub fn intensity_overlap(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<f64> {
    let abs = |e: &SampledEnvelope| {
        let mut m = e.clone();
        par::for_each_indexed(&mut m.samples, |_, x| *x = Complex64::new(x.norm(), 0.0));
        m
    };
    Ok(overlap(&abs(a), &abs(b))?.re)
}

/// Half-maximum crossings `(left, right)` of the lobe containing the global peak,
/// located by linear interpolation between bracketing samples.
pub fn half_max_crossings(env: &SampledEnvelope) -> Result<(f64, f64)> {
    require_nonzero(env)?;
    let intensity = env.intensity();
    let (peak_k, peak) = intensity
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    let half = peak / 2.0;
    let grid = env.grid;

    let mut k = peak_k;
    while k > 0 && intensity[k - 1] >= half {
        k -= 1;
    }
    if k == 0 {
        return Err(Error::WindowOverflow("dominant lobe reaches the window start".into()));
    }
    // intensity[k - 1] < half <= intensity[k]
    let (lo, hi) = (intensity[k - 1], intensity[k]);
    let left = grid.time(k - 1) + (half - lo) / (hi - lo) * grid.dt();

    let n = intensity.len();
    let mut k = peak_k;
    while k + 1 < n && intensity[k + 1] >= half {
        k += 1;
    }
    if k + 1 == n {
        return Err(Error::WindowOverflow("dominant lobe reaches the window end".into()));
    }
    let (hi, lo) = (intensity[k], intensity[k + 1]);
    let right = grid.time(k) + (hi - half) / (hi - lo) * grid.dt();
    Ok((left, right))
}

/// Intensity FWHM of the dominant lobe, ps.
pub fn fwhm(env: &SampledEnvelope) -> Result<f64> {
    let (l, r) = half_max_crossings(env)?;
    Ok(r - l)
}

/// Intensity-weighted mean time, ps.
pub fn centroid(env: &SampledEnvelope) -> Result<f64> {
    let e = require_nonzero(env)?;
    let g = env.grid;
    Ok(par::sum_indexed(&env.samples, |k, a| g.time(k) * a.norm_sqr()) * g.dt() / e)
}

/// RMS intensity width about the centroid, ps.
pub fn rms_width(env: &SampledEnvelope) -> Result<f64> {
    let e = require_nonzero(env)?;
    let c = centroid(env)?;
    let g = env.grid;
    let m2 = par::sum_indexed(&env.samples, |k, a| {
        let d = g.time(k) - c;
        d * d * a.norm_sqr()
    }) * g.dt()
        / e;
    Ok(m2.sqrt())
}

/// Energy outside `|t - centroid| > half_width` divided by the energy inside.
pub fn wing_to_center_ratio(env: &SampledEnvelope, half_width: f64) -> Result<f64> {
    let c = centroid(env)?;
    let g = env.grid;
    let inner = par::sum_indexed(&env.samples, |k, a| {
        if (g.time(k) - c).abs() <= half_width {
            a.norm_sqr()
        } else {
            0.0
        }
    });
    let outer = par::sum_indexed(&env.samples, |k, a| {
        if (g.time(k) - c).abs() > half_width {
            a.norm_sqr()
        } else {
            0.0
        }
    });
    if !(inner > 0.0) {
        return Err(Error::Degenerate("no energy inside the central region".into()));
    }
    Ok(outer / inner)
}

/// Unwraps a phase sequence so consecutive differences lie in `(-pi, pi]`.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phase {
        if let Some(q) = prev {
            let mut d = p - q;
            d -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
            if d == -PI {
                d = PI;
            }
            offset += d - (p - q);
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Least-squares fit `phase(t) ~ c0 + c1 t + c2 t^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPhaseFit {
    pub c0: f64,
    /// rad/ps
    pub c1: f64,
    /// rad/ps^2
    pub c2: f64,
    /// RMS residual of the fit, rad.
    pub rms_residual: f64,
    /// RMS deviation of the unwrapped phase from its mean, rad.
    pub rms_deviation: f64,
    /// Fit window, ps.
    pub window: (f64, f64),
    pub samples_used: usize,
}

/// Minimum number of samples a phase fit needs.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Fits the unwrapped phase over the dominant lobe's FWHM extent scaled by
/// `window_fwhm_fraction`, using only samples above 1% of peak intensity.
pub fn phase_fit_quadratic(
    env: &SampledEnvelope,
    window_fwhm_fraction: f64,
) -> Result<QuadraticPhaseFit> {
    if !(window_fwhm_fraction > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window fraction must be positive, got {window_fwhm_fraction}"
        )));
    }
    let (l, r) = half_max_crossings(env)?;
    let center = 0.5 * (l + r);
    let half = 0.5 * (r - l) * window_fwhm_fraction;
    phase_fit_window(env, (center - half, center + half))
}

/// Quadratic phase fit over an explicit time window.
pub fn phase_fit_window(env: &SampledEnvelope, window: (f64, f64)) -> Result<QuadraticPhaseFit> {
    let g = env.grid;
    let peak = env.samples.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    let floor = 0.01 * peak;
    let (ts, raw): (Vec<f64>, Vec<f64>) = env
        .samples
        .iter()
        .enumerate()
        .filter(|(k, a)| {
            let t = g.time(*k);
            t >= window.0 && t <= window.1 && a.norm_sqr() >= floor && peak > 0.0
        })
        .map(|(k, a)| (g.time(k), a.arg()))
        .unzip();
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSupport {
            found: ts.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let phase = unwrap_phase(&raw);

    // Centred, scaled abscissa keeps the normal equations well conditioned.
    let tc = 0.5 * (window.0 + window.1);
    let h = (0.5 * (window.1 - window.0)).max(g.dt());
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (t, p) in ts.iter().zip(&phase) {
        let u = (t - tc) / h;
        let row = Vector3::new(1.0, u, u * u);
        ata += row * row.transpose();
        atb += row * *p;
    }
    let coef = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Degenerate("singular phase-fit normal equations".into()))?;
    let (p0, p1, p2) = (coef[0], coef[1], coef[2]);

    let n = ts.len() as f64;
    let mut ss = 0.0;
    for (t, p) in ts.iter().zip(&phase) {
        let u = (t - tc) / h;
        let d = p - (p0 + p1 * u + p2 * u * u);
        ss += d * d;
    }
    let mean = phase.iter().sum::<f64>() / n;
    let dev = phase.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;

    Ok(QuadraticPhaseFit {
        c0: p0 - p1 * tc / h + p2 * tc * tc / (h * h),
        c1: p1 / h - 2.0 * p2 * tc / (h * h),
        c2: p2 / (h * h),
        rms_residual: (ss / n).sqrt(),
        rms_deviation: dev.sqrt(),
        window,
        samples_used: ts.len(),
    })
}

/// Spectral intensity FWHM of an envelope, rad/ps.
pub fn spectral_fwhm(env: &SampledEnvelope) -> Result<f64> {
    let spec = to_frequency(env);
    let g = *spec.grid();
    // Reuse the time-domain crossing search on a grid with spacing d_omega.
    let axis = TimeGrid::new(g.n_samples(), g.d_omega(), g.omega(0))?;
    let as_time = SampledEnvelope::new(axis, spec.samples)?;
    fwhm(&as_time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> TimeGrid {
        TimeGrid::centered(4096, 0.05).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(TimeGrid::new(1000, 0.1, 0.0).is_err());
        assert!(TimeGrid::new(1024, 0.0, 0.0).is_err());
        assert!(TimeGrid::new(1024, -1.0, 0.0).is_err());
        let g = TimeGrid::centered(1024, 0.1).unwrap();
        assert_eq!(g.time(512), 0.0);
        assert_relative_eq!(g.omega(512), 0.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let env = time_bin_pulse(grid(), 5.0, 15.0, 0.7).unwrap();
        let back = to_time(&to_frequency(&env));
        let peak = env.peak_amplitude();
        for (a, b) in env.samples().iter().zip(back.samples()) {
            assert!((a - b).norm() <= 1e-12 * peak);
        }
    }

    #[test]
    fn parseval_holds() {
        let env = time_bin_pulse(grid(), 3.0, 10.0, 1.3).unwrap();
        let spec = to_frequency(&env);
        assert_relative_eq!(energy(&env), spec.energy(), max_relative = 1e-12);
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let g = TimeGrid::centered(256, 0.1).unwrap();
        let mut env = SampledEnvelope::zeros(g);
        env.samples_mut()[100] = Complex64::new(1.0, 0.0);
        let spec = to_frequency(&env);
        let m0 = spec.samples()[0].norm();
        assert!(spec.samples().iter().all(|a| (a.norm() - m0).abs() < 1e-14));
    }

    #[test]
    fn transform_limited_spectral_width() {
        // 4 ln2 / 5 ps
        let env = gaussian_pulse(grid(), 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let w = spectral_fwhm(&env).unwrap();
        assert_relative_eq!(w, 4.0 * LN_2 / 5.0, max_relative = 1e-3);
    }

    #[test]
    fn gaussian_half_max_at_half_fwhm() {
        let g = TimeGrid::centered(4096, 0.05).unwrap();
        let env = gaussian_pulse(g, 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let k = g.index_of(2.5);
        assert_relative_eq!(env.intensity()[k], 0.5, max_relative = 1e-12);
        assert!((fwhm(&env).unwrap() - 5.0).abs() <= g.dt());
    }

    #[test]
    fn gaussian_translation() {
        let g = grid();
        let a = gaussian_pulse(g, 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let b = gaussian_pulse(g, 5.0, 10.0, Complex64::new(1.0, 0.0)).unwrap();
        let shift = (10.0 / g.dt()).round() as usize;
        for k in 0..g.n_samples() - shift {
            assert!((a.samples()[k] - b.samples()[k + shift]).norm() < 1e-15);
        }
    }

    #[test]
    fn gaussian_window_overflow() {
        let g = TimeGrid::centered(64, 0.1).unwrap();
        assert!(matches!(
            gaussian_pulse(g, 5.0, 0.0, Complex64::new(1.0, 0.0)),
            Err(Error::WindowOverflow(_))
        ));
        assert!(gaussian_pulse(g, 0.0, 0.0, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn time_bin_coincident_bins_is_single_gaussian() {
        let g = grid();
        let tb = time_bin_pulse(g, 5.0, 0.0, 0.0).unwrap();
        let ga = gaussian_pulse(g, 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        for (a, b) in tb.samples().iter().zip(ga.samples()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn time_bin_magnitude_is_even_for_any_phase() {
        let g = grid();
        for psi in [0.0, 0.4, PI, 2.5] {
            let env = time_bin_pulse(g, 5.0, 15.0, psi).unwrap();
            let n = g.n_samples();
            for k in 1..n {
                let d = env.samples()[k].norm() - env.samples()[n - k].norm();
                assert!(d.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn time_bin_pattern_width_is_delta_t_plus_tau() {
        // tau = 5 ps, delta_t = 15 ps gives t_i = 20 ps: the outer half-maximum
        // points of the two bins sit at +-(delta_t + tau) / 2.
        let g = grid();
        let env = time_bin_pulse(g, 5.0, 15.0, 0.0).unwrap();
        let i = env.intensity();
        let k = g.index_of(10.0);
        // Only the near bin contributes at the outer edge.
        assert_relative_eq!(i[k], 0.25 * 0.5, max_relative = 1e-6);
    }

    #[test]
    fn overlap_self_and_phase() {
        let env = time_bin_pulse(grid(), 5.0, 12.0, 0.3).unwrap();
        let o = overlap(&env, &env).unwrap();
        assert_relative_eq!(o.re, 1.0, max_relative = 1e-14);
        assert!(o.im.abs() < 1e-15);
        let rotated = env.scaled(Complex64::from_polar(1.0, 0.8));
        let o = overlap(&env, &rotated).unwrap();
        assert_relative_eq!(o.norm(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(o.arg(), 0.8, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_metrics() {
        let z = SampledEnvelope::zeros(grid());
        assert!(matches!(fwhm(&z), Err(Error::Degenerate(_))));
        assert!(matches!(overlap(&z, &z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn energy_of_unit_gaussian_matches_quadrature() {
        // Composite Simpson on [-60, 60] ps with 120001 nodes as an independent
        // oracle: E = 5.32233509715613 (scipy quad agrees).
        let f = |t: f64| (-4.0 * LN_2 * (t / 5.0) * (t / 5.0)).exp();
        let n = 120_000;
        let (a, b) = (-60.0, 60.0);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        let oracle = s * h / 3.0;
        assert_relative_eq!(oracle, 5.322_335_097_156_13, max_relative = 1e-9);
        let env = gaussian_pulse(grid(), 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(energy(&env), oracle, max_relative = 1e-10);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let truth: Vec<f64> = (0..200).map(|k| 0.005 * (k * k) as f64).collect();
        let wrapped: Vec<f64> = truth
            .iter()
            .map(|p| Complex64::from_polar(1.0, *p).arg())
            .collect();
        let un = unwrap_phase(&wrapped);
        let off = truth[0] - un[0];
        for (a, b) in truth.iter().zip(&un) {
            assert!((a - b - off).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_fit_on_real_envelope_is_flat() {
        let env = gaussian_pulse(grid(), 5.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        let fit = phase_fit_quadratic(&env, 1.0).unwrap();
        assert!(fit.c2.abs() < 1e-6);
    }

    #[test]
    fn phase_fit_recovers_constructed_chirp() {
        let g = grid();
        let env = SampledEnvelope::from_fn(g, |t| {
            Complex64::from_polar(gaussian_profile(t, 5.0), t * t / 20.0)
        });
        let fit = phase_fit_quadratic(&env, 1.0).unwrap();
        assert!((fit.c2 - 0.05).abs() < 1e-4);
        assert!(fit.rms_residual < 1e-9);
    }

    #[test]
    fn phase_fit_needs_support() {
        let g = TimeGrid::centered(1024, 1.0).unwrap();
        let env = gaussian_pulse(g, 3.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            phase_fit_quadratic(&env, 1.0),
            Err(Error::InsufficientSupport { .. })
        ));
    }

    #[test]
    fn boundary_check_flags_edge_energy() {
        let g = TimeGrid::centered(256, 0.1).unwrap();
        let mut env = SampledEnvelope::zeros(g);
        env.samples_mut()[128] = Complex64::new(1.0, 0.0);
        assert!(env.check_boundary("x").is_ok());
        env.samples_mut()[0] = Complex64::new(1e-3, 0.0);
        assert!(matches!(env.check_boundary("x"), Err(Error::WrapAround { .. })));
    }
}
