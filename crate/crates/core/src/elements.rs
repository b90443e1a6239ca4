//! Dispersive propagation, pump synthesis and the pumped three-wave-mixing time lens.
//!
//! Sign conventions. A dispersive element multiplies the spectrum by
//! `T exp(i gdd w^2 / 2 + i tod w^3 / 6)`. In the far field this leaves the
//! temporal phase `-t^2 / (2 gdd)`, so a pump seed dispersed by `C` carries
//! `phi_p(t) -> -t^2 / (2 C)`. Down-conversion imprints `exp(-i phi_p)` and
//! up-conversion `exp(+i phi_p)`. An ideal lens uses the infinite-bandwidth
//! limit of that pump phase, so with pump chirp `C`:
//!
//! * down-conversion imprints `+t^2 / (2 C)`,
//! * up-conversion imprints `-t^2 / (2 C)`.
//!
//! With this choice a down-conversion lens of pump chirp `D_f` images according
//! to `1/D1 + 1/D2 = 1/D_f`.

use std::f64::consts::{FRAC_PI_2, LN_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{gaussian_pulse, to_frequency, to_time, SampledEnvelope, TimeGrid, LEAKAGE_LIMIT};
use crate::error::{Error, Result};
use crate::par;

/// Relative tolerance for carrier wavelength bookkeeping.
pub const CARRIER_TOLERANCE: f64 = 1e-3;

/// A length of dispersive medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveElement {
    /// Group delay dispersion, ps^2.
    pub gdd: f64,
    /// Third-order dispersion, ps^3.
    pub tod: f64,
    /// Amplitude transmission in (0, 1].
    pub transmission: f64,
}

impl DispersiveElement {
    pub fn new(gdd: f64) -> Self {
        Self {
            gdd,
            tod: 0.0,
            transmission: 1.0,
        }
    }

    pub fn with_tod(mut self, tod: f64) -> Self {
        self.tod = tod;
        self
    }

    /// Sets `tod = ratio * gdd`; `ratio` is beta3/beta2 in ps.
    pub fn with_tod_ratio(mut self, ratio: f64) -> Self {
        self.tod = ratio * self.gdd;
        self
    }

    pub fn with_transmission(mut self, transmission: f64) -> Self {
        self.transmission = transmission;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gdd.is_finite() || !self.tod.is_finite() {
            return Err(Error::InvalidParameter("dispersion must be finite".into()));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmission must lie in (0, 1], got {}",
                self.transmission
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.gdd == 0.0 && self.tod == 0.0 && self.transmission == 1.0
    }

    /// Spectral transfer function at angular frequency offset `omega`.
    pub fn transfer(&self, omega: f64) -> Complex64 {
        let w2 = omega * omega;
        Complex64::from_polar(
            self.transmission,
            0.5 * self.gdd * w2 + self.tod * w2 * omega / 6.0,
        )
    }
}

/// Propagates an envelope through a dispersive element.
pub fn apply_dispersion(env: &SampledEnvelope, elem: &DispersiveElement) -> Result<SampledEnvelope> {
    disperse(env, elem, "dispersion")
}

pub(crate) fn disperse(
    env: &SampledEnvelope,
    elem: &DispersiveElement,
    stage: &str,
) -> Result<SampledEnvelope> {
    elem.validate()?;
    if elem.is_identity() {
        return Ok(env.clone());
    }
    let mut spec = to_frequency(env);
    let ratio = spec.edge_ratio();
    if ratio > LEAKAGE_LIMIT {
        return Err(Error::Aliasing {
            stage: stage.to_string(),
            ratio,
        });
    }
    spec.apply_filter(|w| elem.transfer(w));
    let out = to_time(&spec);
    out.check_boundary(stage)?;
    Ok(out)
}

/// Frequency conversion direction of a three-wave-mixing lens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conversion {
    /// Difference-frequency generation, `w_out = w_in - w_pump`.
    Down,
    /// Sum-frequency generation, `w_out = w_in + w_pump`.
    Up,
}

impl Conversion {
    /// Sign of the pump phase imprinted on the output.
    fn phase_sign(self) -> f64 {
        match self {
            Conversion::Down => -1.0,
            Conversion::Up => 1.0,
        }
    }

    pub fn conjugate(self) -> Self {
        match self {
            Conversion::Down => Conversion::Up,
            Conversion::Up => Conversion::Down,
        }
    }

    pub fn output_wavelength(self, input_nm: f64, pump_nm: f64) -> Result<f64> {
        if !(input_nm > 0.0) || !(pump_nm > 0.0) {
            return Err(Error::InvalidParameter(
                "carrier wavelengths must be positive".into(),
            ));
        }
        let inv = match self {
            Conversion::Up => 1.0 / input_nm + 1.0 / pump_nm,
            Conversion::Down => 1.0 / input_nm - 1.0 / pump_nm,
        };
        if !(inv > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot down-convert {input_nm} nm with a {pump_nm} nm pump"
            )));
        }
        Ok(1.0 / inv)
    }
}

/// Carrier wavelengths around a lens, nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Carriers {
    pub input_nm: f64,
    pub pump_nm: f64,
    pub output_nm: f64,
}

/// Whether a lens is driven by an ideal quadratic phase or a dispersed Gaussian seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PumpSpec {
    Ideal,
    /// Transform-limited Gaussian seed of the given intensity FWHM, ps.
    Seed { fwhm: f64 },
}

/// A pumped frequency-conversion time lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeLens {
    pub direction: Conversion,
    /// GDD applied to the pump seed, ps^2.
    pub focal_gdd: f64,
    pub pump: PumpSpec,
    pub carriers: Option<Carriers>,
}

impl TimeLens {
    pub fn new(direction: Conversion, focal_gdd: f64) -> Self {
        Self {
            direction,
            focal_gdd,
            pump: PumpSpec::Ideal,
            carriers: None,
        }
    }

    pub fn with_pump(mut self, pump: PumpSpec) -> Self {
        self.pump = pump;
        self
    }

    /// Attaches carrier bookkeeping; the output wavelength follows from energy conservation.
    pub fn with_carriers(mut self, input_nm: f64, pump_nm: f64) -> Result<Self> {
        let output_nm = self.direction.output_wavelength(input_nm, pump_nm)?;
        self.carriers = Some(Carriers {
            input_nm,
            pump_nm,
            output_nm,
        });
        Ok(self)
    }

    /// Checks a quoted output wavelength against the computed one.
    pub fn check_output_carrier(&self, quoted_nm: f64) -> Result<()> {
        let c = self
            .carriers
            .ok_or_else(|| Error::InvalidParameter("lens has no carrier bookkeeping".into()))?;
        if ((c.output_nm - quoted_nm) / quoted_nm).abs() > CARRIER_TOLERANCE {
            return Err(Error::CarrierMismatch {
                expected: c.output_nm,
                found: quoted_nm,
            });
        }
        Ok(())
    }

    /// Temporal phase curvature imprinted by the ideal lens, rad/ps^2.
    pub fn ideal_curvature(&self) -> f64 {
        // exp(sign * i * phi_p) with phi_p = -t^2 / (2 C)
        -self.direction.phase_sign() / (2.0 * self.focal_gdd)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.focal_gdd.is_finite() || self.focal_gdd == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lens focal GDD must be finite and nonzero, got {}",
                self.focal_gdd
            )));
        }
        if let PumpSpec::Seed { fwhm } = self.pump {
            if !(fwhm > 0.0) || !fwhm.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "pump seed FWHM must be positive, got {fwhm}"
                )));
            }
        }
        Ok(())
    }

    /// Synthesises this lens's pump on `grid`; `None` for an ideal lens.
    pub fn synthesize_pump(&self, grid: TimeGrid) -> Result<Option<PumpWaveform>> {
        match self.pump {
            PumpSpec::Ideal => Ok(None),
            PumpSpec::Seed { fwhm } => synthesize_pump(grid, fwhm, self.focal_gdd).map(Some),
        }
    }
}

/// Classical pump field, peak-normalised to unit amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpWaveform {
    pub envelope: SampledEnvelope,
    pub chirp_gdd: f64,
    pub seed_fwhm: f64,
}

/// Gaussian seed of FWHM `seed_fwhm` dispersed by `chirp_gdd`, normalised to unit peak.
pub fn synthesize_pump(grid: TimeGrid, seed_fwhm: f64, chirp_gdd: f64) -> Result<PumpWaveform> {
    let seed = gaussian_pulse(grid, seed_fwhm, 0.0, Complex64::new(1.0, 0.0))?;
    let stretched = disperse(&seed, &DispersiveElement::new(chirp_gdd), "pump").map_err(|e| match e {
        Error::WrapAround { ratio, .. } => Error::WindowOverflow(format!(
            "pump stretched by {chirp_gdd} ps^2 reaches the window edge (edge/peak = {ratio:.3e})"
        )),
        other => other,
    })?;
    let peak = stretched.peak_amplitude();
    Ok(PumpWaveform {
        envelope: stretched.scaled(Complex64::new(1.0 / peak, 0.0)),
        chirp_gdd,
        seed_fwhm,
    })
}

/// Rabi-type conversion amplitude for a pump at `relative_amplitude` of its peak.
pub fn conversion_efficiency(relative_amplitude: f64) -> f64 {
    (FRAC_PI_2 * relative_amplitude.clamp(0.0, 1.0)).sin()
}

/// Applies a time lens: `out(t) = i eta(t) exp(+-i phi_p(t)) in(t)`.
///
/// `pump = None` selects the ideal lens (unit conversion everywhere, exact
/// quadratic phase from `lens.focal_gdd`).
pub fn apply_time_lens(
    env: &SampledEnvelope,
    lens: &TimeLens,
    pump: Option<&PumpWaveform>,
) -> Result<SampledEnvelope> {
    lens.validate()?;
    if let (Some(c), Some(found)) = (lens.carriers, env.carrier_nm()) {
        if ((found - c.input_nm) / c.input_nm).abs() > CARRIER_TOLERANCE {
            return Err(Error::CarrierMismatch {
                expected: c.input_nm,
                found,
            });
        }
    }
    let grid = *env.grid();
    let sign = lens.direction.phase_sign();
    let mut out = env.clone();
    match pump {
        None => {
            let curvature = lens.ideal_curvature();
            par::for_each_indexed(out.samples_mut(), |k, a| {
                let t = grid.time(k);
                *a *= Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, curvature * t * t);
            });
        }
        Some(p) => {
            if *p.envelope.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let peak = p.envelope.peak_amplitude();
            if !(peak > 0.0) {
                return Err(Error::Degenerate("pump has zero amplitude".into()));
            }
            let field = p.envelope.samples();
            par::for_each_indexed(out.samples_mut(), |k, a| {
                let e = field[k];
                let mag = e.norm();
                let unit = if mag > 0.0 {
                    e / mag
                } else {
                    Complex64::new(1.0, 0.0)
                };
                let phasor = if sign > 0.0 { unit } else { unit.conj() };
                *a *= Complex64::new(0.0, conversion_efficiency(mag / peak)) * phasor;
            });
        }
    }
    out.set_carrier(lens.carriers.map(|c| c.output_nm).or(env.carrier_nm()));
    Ok(out)
}

/// Analytic intensity FWHM of a transform-limited Gaussian of FWHM `t_fwhm`
/// after dispersion `gdd`.
pub fn chirped_gaussian_fwhm(t_fwhm: f64, gdd: f64) -> f64 {
    let s = 4.0 * LN_2 * gdd / (t_fwhm * t_fwhm);
    t_fwhm * (1.0 + s * s).sqrt()
}

/// Exact temporal phase curvature (rad/ps^2) of a Gaussian seed of FWHM
/// `t_fwhm` after dispersion `gdd`; tends to `-1 / (2 gdd)` for large chirp.
pub fn chirped_gaussian_curvature(t_fwhm: f64, gdd: f64) -> f64 {
    // seed exp(-a t^2) with a = 2 ln2 / t_fwhm^2
    let inv_a = t_fwhm * t_fwhm / (2.0 * LN_2);
    -2.0 * gdd / (inv_a * inv_a + 4.0 * gdd * gdd)
}
