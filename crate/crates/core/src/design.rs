//! Dispersion lower bounds and bandwidth requirements for the three imaging
//! configurations.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::check_far_field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    FarField,
    Telescope,
    FieldLens,
}

impl Configuration {
    pub fn as_str(self) -> &'static str {
        match self {
            Configuration::FarField => "far-field",
            Configuration::Telescope => "telescope",
            Configuration::FieldLens => "field-lens",
        }
    }
}

impl std::str::FromStr for Configuration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "far-field" => Ok(Configuration::FarField),
            "telescope" => Ok(Configuration::Telescope),
            "field-lens" => Ok(Configuration::FieldLens),
            other => Err(format!(
                "unknown configuration '{other}' (expected far-field, telescope or field-lens)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    /// Input FWHM, ps.
    pub t_i: f64,
    /// Available pump bandwidth, rad/ps.
    pub bandwidth: f64,
    /// Magnification magnitude.
    pub magnification: f64,
    pub configuration: Configuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Factor turning a far-field bound into a recommended value.
    pub far_field_multiplier: f64,
    /// `D1` bounds above this fraction of `t_i^2` are flagged as outside the
    /// small-dispersion regime.
    pub small_dispersion_fraction: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            far_field_multiplier: 10.0,
            small_dispersion_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Hard lower bound.
    AtLeast,
    /// Far-field bound; the recommendation applies the multiplier.
    MuchGreater,
}

impl BoundKind {
    pub fn symbol(self) -> &'static str {
        match self {
            BoundKind::AtLeast => "≥",
            BoundKind::MuchGreater => "≫",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthKind {
    /// Must exceed the value.
    Exceeds,
    /// Equal to the pump bandwidth.
    Pump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub name: String,
    pub bound_kind: BoundKind,
    /// Raw lower bound, ps^2.
    pub bound: f64,
    /// Suggested value, ps^2: the bound, times the multiplier for far-field entries.
    pub recommended: f64,
    pub multiplier: Option<f64>,
    pub bandwidth_kind: BandwidthKind,
    /// rad/ps
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub request: DesignRequest,
    pub entries: Vec<DesignEntry>,
    /// Far-field `D2` bound for the same request, ps^2.
    pub far_field_d2_bound: f64,
    /// Far-field `D2` bound over this configuration's `D2` bound.
    pub far_field_penalty: f64,
    /// `|delta_theta| / pi` at this configuration's `D_f` bound (recommended value for far-field).
    pub far_field_margin: f64,
    pub small_dispersion_violated: bool,
    pub notes: Vec<String>,
}

impl DesignReport {
    pub fn entry(&self, name: &str) -> Option<&DesignEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn validate(req: &DesignRequest, opts: &DesignOptions) -> Result<()> {
    for (name, v) in [
        ("t_i", req.t_i),
        ("bandwidth", req.bandwidth),
        ("M", req.magnification),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidRequest(format!("{name} must be positive, got {v}")));
        }
    }
    if !(opts.far_field_multiplier >= 1.0) || !opts.far_field_multiplier.is_finite() {
        return Err(Error::InvalidRequest(format!(
            "far-field multiplier must be >= 1, got {}",
            opts.far_field_multiplier
        )));
    }
    Ok(())
}

/// Far-field bounds `(D1, D_f, D2)`, ps^2.
pub fn far_field_bounds(m: f64, t_i: f64) -> (f64, f64, f64) {
    let base = PI * t_i * t_i / 8.0;
    (base * (m + 1.0), base * m, base * m * m)
}

/// Requirements table for `req` with default options.
pub fn requirements(req: &DesignRequest) -> Result<DesignReport> {
    requirements_with(req, &DesignOptions::default())
}

pub fn requirements_with(req: &DesignRequest, opts: &DesignOptions) -> Result<DesignReport> {
    validate(req, opts)?;
    let (m, t_i, dv) = (req.magnification, req.t_i, req.bandwidth);
    let tl_in = 4.0 * LN_2 / t_i;
    let tl_out = 4.0 * LN_2 / (m * t_i);
    let hard = |name: &str, bound: f64, bw_kind: BandwidthKind, bw: f64| DesignEntry {
        name: name.to_string(),
        bound_kind: BoundKind::AtLeast,
        bound,
        recommended: bound,
        multiplier: None,
        bandwidth_kind: bw_kind,
        bandwidth: bw,
    };
    let mult = opts.far_field_multiplier;
    let far = |name: &str, bound: f64, bw: f64| DesignEntry {
        name: name.to_string(),
        bound_kind: BoundKind::MuchGreater,
        bound,
        recommended: bound * mult,
        multiplier: Some(mult),
        bandwidth_kind: BandwidthKind::Exceeds,
        bandwidth: bw,
    };
    use BandwidthKind::{Exceeds, Pump};

    let (ff_d1, ff_df, ff_d2) = far_field_bounds(m, t_i);
    let mut notes = Vec::new();
    let entries = match req.configuration {
        Configuration::FarField => vec![
            far("D1", ff_d1, tl_in),
            far("D_f", ff_df, tl_in),
            far("D2", ff_d2, tl_out),
        ],
        Configuration::Telescope => {
            notes.push(format!(
                "D2 bandwidth listed as the pump bandwidth; the image after D3 only spans 4ln2/(M t_i) = {tl_out} rad/ps"
            ));
            vec![
                hard("D1", t_i / dv, Exceeds, tl_in),
                hard("D_f1", t_i / dv, Pump, dv),
                hard("D2", (m + 1.0) * t_i / dv, Pump, dv),
                hard("D_f2", m * t_i / dv, Pump, dv),
                hard("D3", m * t_i / dv, Exceeds, tl_out),
            ]
        }
        Configuration::FieldLens => vec![
            hard("D1", (m + 1.0) * t_i / (m * dv), Exceeds, tl_in),
            hard("D_f", t_i / dv, Pump, dv),
            hard("D2", (m + 1.0) * t_i / dv, Pump, dv),
            hard("D_r", m * t_i / dv, Pump, dv),
        ],
    };

    let d1 = entries[0].bound;
    let d2 = entries.iter().find(|e| e.name == "D2").map(|e| e.bound).unwrap_or(ff_d2);
    let d_f = match req.configuration {
        Configuration::FarField => entries[1].recommended,
        _ => entries[1].bound,
    };
    let margin = check_far_field(m, t_i, d_f, 0.0).margin;
    let small_violated = d1 >= opts.small_dispersion_fraction * t_i * t_i;
    if small_violated {
        notes.push(format!(
            "D1 bound {d1} ps^2 is not small against t_i^2 = {} ps^2; the bounds assume |D1| << t_i^2",
            t_i * t_i
        ));
    }
    if m < 1.0 {
        notes.push(format!("M = {m} < 1: the system compresses the input"));
    }
    if req.configuration != Configuration::FarField {
        notes.push(format!(
            "without correction the far-field condition requires D2 >> {ff_d2} ps^2"
        ));
    }
    Ok(DesignReport {
        request: *req,
        entries,
        far_field_d2_bound: ff_d2,
        far_field_penalty: ff_d2 / d2,
        far_field_margin: margin,
        small_dispersion_violated: small_violated,
        notes,
    })
}

/// Pump bandwidth `t_i / |D_f|` needed to image an input of width `t_i`, rad/ps.
pub fn pump_bandwidth(t_i: f64, d_f: f64) -> Result<f64> {
    if d_f == 0.0 || !d_f.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "focal GDD must be finite and nonzero, got {d_f}"
        )));
    }
    if !(t_i > 0.0) {
        return Err(Error::InvalidParameter(format!("t_i must be positive, got {t_i}")));
    }
    Ok(t_i / d_f.abs())
}
