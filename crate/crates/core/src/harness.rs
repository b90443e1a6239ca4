//! Scenario execution, reports and artifact files.
//!
//! Every number in a JSON report is written as `{"value": v, "unit": u}`;
//! dimensionless quantities use an empty unit string. Floats are printed in
//! their shortest round-trip form, so identical scenarios produce
//! byte-identical artifacts.

use std::f64::consts::LN_2;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::design::{requirements_with, DesignOptions, DesignReport, DesignRequest};
use crate::elements::{Conversion, PumpSpec};
use crate::envelope::{
    centroid, energy, fwhm, gaussian_pulse, intensity_overlap, overlap, phase_fit_quadratic, rms_width,
    time_bin_pulse, SampledEnvelope, TimeGrid,
};
use crate::error::Error;
use crate::interferometry::{
    asymmetry, central_energy_sweep, matched_analyzer_phase, visibility_at, InterferenceResult,
};
use crate::par::{self, Exec};
use crate::scenario::{
    parameter_unit, parse_scenario, parse_scenario_with, FreeParameter, InputSpec, Scenario, ScenarioError,
    SweepMetric, TopologySpec,
};
use crate::systems::{
    check_far_field, magnified_copy, plan_grid, residual_span, run_system, Element, Footprint, StageTrace,
    SystemTopology, TopologyKind,
};

/// Failure class of a harness run; each maps to a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Syntax,
    Semantic,
    Numerical,
    Parameter,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Syntax => 3,
            ErrorCategory::Semantic => 4,
            ErrorCategory::Numerical => 5,
            ErrorCategory::Parameter => 6,
            ErrorCategory::Io => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Syntax => "syntax",
            ErrorCategory::Semantic => "semantic",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Parameter => "parameter",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessError {
    pub category: ErrorCategory,
    pub message: String,
    /// `(line, column, message)` for scenario problems.
    pub diagnostics: Vec<(usize, usize, String)>,
}

impl HarnessError {
    pub fn new(category: ErrorCategory, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }

    /// Single-line machine-readable form.
    pub fn to_json(&self) -> String {
        let diags: Vec<Value> = self
            .diagnostics
            .iter()
            .map(|(l, c, m)| json!({"line": l, "column": c, "message": m}))
            .collect();
        json!({
            "error": {
                "category": self.category.as_str(),
                "exit_code": self.exit_code(),
                "message": self.message,
                "diagnostics": diags,
            }
        })
        .to_string()
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category.as_str(), self.message)
    }
}

impl std::error::Error for HarnessError {}

impl From<ScenarioError> for HarnessError {
    fn from(e: ScenarioError) -> Self {
        let category = if e.has_syntax_errors() {
            ErrorCategory::Syntax
        } else {
            ErrorCategory::Semantic
        };
        Self {
            category,
            message: e.to_string(),
            diagnostics: e
                .diagnostics
                .iter()
                .map(|d| (d.line, d.column, d.to_string()))
                .collect(),
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        let category = match e {
            Error::InvalidGrid(_)
            | Error::WindowOverflow(_)
            | Error::WrapAround { .. }
            | Error::Aliasing { .. }
            | Error::Degenerate(_)
            | Error::InsufficientSupport { .. }
            | Error::PeakDetection(_) => ErrorCategory::Numerical,
            Error::InvalidParameter(_)
            | Error::DegenerateMagnification(_)
            | Error::CarrierMismatch { .. }
            | Error::GridMismatch
            | Error::TopologyInvariant(_)
            | Error::InvalidRequest(_) => ErrorCategory::Parameter,
        };
        Self::new(category, e.to_string())
    }
}

pub type HarnessResult<T> = Result<T, HarnessError>;

fn semantic(message: impl Into<String>) -> HarnessError {
    HarnessError::new(ErrorCategory::Semantic, message)
}

/// Shortest round-trip decimal form of a finite float.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float serialises")
    } else {
        x.to_string()
    }
}

fn q(value: f64, unit: &str) -> Value {
    json!({"value": value, "unit": unit})
}

/// `t_ps,re,im,intensity` rows.
pub fn envelope_csv(env: &SampledEnvelope) -> String {
    let g = env.grid();
    let mut out = String::with_capacity(env.samples().len() * 64);
    out.push_str("t_ps,re,im,intensity\n");
    for (k, a) in env.samples().iter().enumerate() {
        out.push_str(&format_f64(g.time(k)));
        out.push(',');
        out.push_str(&format_f64(a.re));
        out.push(',');
        out.push_str(&format_f64(a.im));
        out.push(',');
        out.push_str(&format_f64(a.norm_sqr()));
        out.push('\n');
    }
    out
}

/// Parses a waveform CSV written by [`envelope_csv`].
pub fn read_envelope_csv(text: &str) -> HarnessResult<SampledEnvelope> {
    let bad = |m: String| HarnessError::new(ErrorCategory::Io, m);
    let mut lines = text.lines();
    if lines.next() != Some("t_ps,re,im,intensity") {
        return Err(bad("waveform CSV header must be t_ps,re,im,intensity".into()));
    }
    let mut ts = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        if cols.len() != 4 {
            return Err(bad(format!("row {}: expected 4 columns", i + 2)));
        }
        ts.push(cols[0]);
        samples.push(Complex64::new(cols[1], cols[2]));
    }
    if ts.len() < 2 {
        return Err(bad("waveform CSV has fewer than two rows".into()));
    }
    let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    let grid = TimeGrid::new(ts.len(), dt, ts[0])?;
    Ok(SampledEnvelope::new(grid, samples)?)
}

/// An in-memory artifact waiting to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Writes every artifact into `dir`; on failure removes the ones already written.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> HarnessResult<Vec<PathBuf>> {
    let io = |e: std::io::Error, what: &Path| {
        HarnessError::new(ErrorCategory::Io, format!("{}: {e}", what.display()))
    };
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let mut written = Vec::new();
    for a in artifacts {
        let path = dir.join(&a.name);
        if let Err(e) = fs::write(&path, &a.contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(io(e, &path));
        }
        written.push(path);
    }
    Ok(written)
}

/// Assembles the element chain described by a scenario.
pub fn build_topology(spec: &TopologySpec, carrier: Option<f64>) -> HarnessResult<SystemTopology> {
    let mut topo = match spec.free {
        FreeParameter::FocalGdd(v) | FreeParameter::D1(v) => SystemTopology::build(spec.kind, spec.magnification, v)?,
        FreeParameter::MaxDispersion(v) => SystemTopology::with_max_dispersion(spec.kind, spec.magnification, v)?,
    };
    topo = topo.with_pump(spec.pump);
    if let Some(r) = spec.tod_ratio {
        let names: Vec<String> = dispersion_names(&topo);
        for n in names {
            topo.set_tod_ratio(&n, r)?;
        }
    }
    for (name, r) in &spec.tod_ratios {
        topo.set_tod_ratio(name, *r)?;
    }
    for (name, t) in &spec.transmissions {
        topo.set_transmission(name, *t)?;
    }
    if let (Some(c), Some(p)) = (carrier, spec.pump_wavelength) {
        topo = topo.with_carriers(c, p)?;
    }
    topo.validate()?;
    Ok(topo)
}

fn dispersion_names(topo: &SystemTopology) -> Vec<String> {
    topo.stages
        .iter()
        .filter(|s| matches!(s.element, Element::Dispersion(_)))
        .map(|s| s.name.clone())
        .collect()
}

fn input_footprint(input: &InputSpec) -> Footprint {
    match *input {
        InputSpec::Gaussian { t_fwhm, center } => {
            let mut f = Footprint::gaussian(t_fwhm);
            f.extent += 2.0 * center.abs();
            f
        }
        InputSpec::TimeBin { tau, delta_t, .. } => Footprint::time_bin(tau, delta_t),
    }
}

fn input_envelope(input: &InputSpec, grid: TimeGrid) -> HarnessResult<SampledEnvelope> {
    Ok(match *input {
        InputSpec::Gaussian { t_fwhm, center } => gaussian_pulse(grid, t_fwhm, center, Complex64::new(1.0, 0.0))?,
        InputSpec::TimeBin { tau, delta_t, psi } => time_bin_pulse(grid, tau, delta_t, psi)?,
    })
}

/// Analytic input profile, for the magnified-copy reference.
fn input_profile(input: InputSpec) -> impl Fn(f64) -> Complex64 + Sync + Send {
    move |t| {
        let g = |x: f64, w: f64| (-2.0 * LN_2 * (x / w).powi(2)).exp();
        match input {
            InputSpec::Gaussian { t_fwhm, center } => Complex64::new(g(t - center, t_fwhm), 0.0),
            InputSpec::TimeBin { tau, delta_t, psi } => {
                0.5 * g(t + delta_t / 2.0, tau) + Complex64::from_polar(0.5, psi) * g(t - delta_t / 2.0, tau)
            }
        }
    }
}

fn wants_visibility(s: &Scenario) -> bool {
    matches!(s.input, Some(InputSpec::TimeBin { .. })) && s.analysis.visibility.unwrap_or(true)
}

/// A completed simulation, before anything is written.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub topology: SystemTopology,
    pub grid: TimeGrid,
    pub trace: StageTrace,
    pub interference: Option<InterferenceResult>,
}

/// Runs the scenario's system and, for time-bin inputs, the analyser.
pub fn simulate(s: &Scenario) -> HarnessResult<Simulation> {
    let input = s.input.as_ref().ok_or_else(|| semantic("simulation needs an [input] section"))?;
    let spec = s
        .topology
        .as_ref()
        .ok_or_else(|| semantic("simulation needs a [topology] section"))?;
    let topology = build_topology(spec, s.carrier)?;
    let m = topology.magnification;
    let extra = match *input {
        InputSpec::TimeBin { delta_t, .. } if wants_visibility(s) => (m * delta_t).abs(),
        _ => 0.0,
    };
    let grid = plan_grid(input_footprint(input), &topology, extra, &s.grid)?;
    let mut env = input_envelope(input, grid)?;
    if let Some(c) = s.carrier {
        env = env.with_carrier(c);
    }
    let trace = run_system(&env, &topology)?;
    let interference = match *input {
        InputSpec::TimeBin { delta_t, psi, .. } if wants_visibility(s) => {
            let m_dt = m * delta_t;
            let phase = s.analysis.analyzer_phase.unwrap_or_else(|| matched_analyzer_phase(m_dt, psi));
            Some(visibility_at(trace.output(), m_dt, phase)?)
        }
        _ => None,
    };
    Ok(Simulation {
        topology,
        grid,
        trace,
        interference,
    })
}

fn stage_file(label: &str, element: &str) -> String {
    format!("stage_{label}_{element}.csv")
}

fn stage_metrics(env: &SampledEnvelope, fit_fraction: f64) -> Value {
    let mut m = Map::new();
    m.insert("energy".into(), q(energy(env), "au"));
    m.insert("peak_intensity".into(), q(env.peak_amplitude().powi(2), "au"));
    if let Some(c) = env.carrier_nm() {
        m.insert("carrier".into(), q(c, "nm"));
    }
    match (fwhm(env), centroid(env), rms_width(env)) {
        (Ok(w), Ok(c), Ok(r)) => {
            m.insert("fwhm".into(), q(w, "ps"));
            m.insert("centroid".into(), q(c, "ps"));
            m.insert("rms_width".into(), q(r, "ps"));
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
            m.insert("metrics_error".into(), Value::String(e.to_string()));
        }
    }
    match phase_fit_quadratic(env, fit_fraction) {
        Ok(f) => {
            m.insert(
                "phase_fit".into(),
                json!({
                    "c0": q(f.c0, "rad"),
                    "c1": q(f.c1, "rad/ps"),
                    "c2": q(f.c2, "rad/ps^2"),
                    "rms_residual": q(f.rms_residual, "rad"),
                    "rms_deviation": q(f.rms_deviation, "rad"),
                    "window_start": q(f.window.0, "ps"),
                    "window_end": q(f.window.1, "ps"),
                    "samples_used": q(f.samples_used as f64, "samples"),
                }),
            );
        }
        Err(e) => {
            m.insert("phase_fit_error".into(), Value::String(e.to_string()));
        }
    }
    Value::Object(m)
}

fn topology_json(t: &SystemTopology) -> Value {
    let elements: Vec<Value> = t
        .stages
        .iter()
        .map(|s| match &s.element {
            Element::Dispersion(d) => json!({
                "name": s.name,
                "type": "dispersion",
                "gdd": q(d.gdd, "ps^2"),
                "tod": q(d.tod, "ps^3"),
                "transmission": q(d.transmission, ""),
            }),
            Element::Lens(l) => {
                let mut v = json!({
                    "name": s.name,
                    "type": "time-lens",
                    "direction": match l.direction { Conversion::Down => "down", Conversion::Up => "up" },
                    "focal_gdd": q(l.focal_gdd, "ps^2"),
                    "curvature": q(l.ideal_curvature(), "rad/ps^2"),
                });
                match l.pump {
                    PumpSpec::Ideal => v["pump"] = json!({"kind": "ideal"}),
                    PumpSpec::Seed { fwhm } => v["pump"] = json!({"kind": "seed", "fwhm": q(fwhm, "ps")}),
                }
                if let Some(c) = l.carriers {
                    v["carriers"] = json!({
                        "input": q(c.input_nm, "nm"),
                        "pump": q(c.pump_nm, "nm"),
                        "output": q(c.output_nm, "nm"),
                    });
                }
                v
            }
        })
        .collect();
    json!({
        "kind": t.kind.as_str(),
        "magnification": q(t.magnification.abs(), ""),
        "magnification_signed": q(t.magnification, ""),
        "image": if t.magnification < 0.0 { "inverted" } else { "erect" },
        "elements": elements,
    })
}

fn design_json(r: &DesignReport) -> Value {
    let entries: Vec<Value> = r
        .entries
        .iter()
        .map(|e| {
            let mut v = json!({
                "name": e.name,
                "relation": e.bound_kind.symbol(),
                "bound": q(e.bound, "ps^2"),
                "recommended": q(e.recommended, "ps^2"),
                "bandwidth": q(e.bandwidth, "rad/ps"),
                "bandwidth_relation": match e.bandwidth_kind {
                    crate::design::BandwidthKind::Exceeds => ">",
                    crate::design::BandwidthKind::Pump => "=",
                },
            });
            if let Some(m) = e.multiplier {
                v["multiplier"] = q(m, "");
            }
            v
        })
        .collect();
    json!({
        "configuration": r.request.configuration.as_str(),
        "request": {
            "t_i": q(r.request.t_i, "ps"),
            "bandwidth": q(r.request.bandwidth, "rad/ps"),
            "magnification": q(r.request.magnification, ""),
        },
        "entries": entries,
        "far_field_d2_bound": q(r.far_field_d2_bound, "ps^2"),
        "far_field_penalty": q(r.far_field_penalty, ""),
        "far_field_margin": q(r.far_field_margin, ""),
        "small_dispersion_violated": r.small_dispersion_violated,
        "notes": r.notes,
    })
}

fn design_report(s: &Scenario) -> HarnessResult<Option<DesignReport>> {
    let Some(d) = s.design else { return Ok(None) };
    let req = DesignRequest {
        t_i: d.t_i,
        bandwidth: d.bandwidth,
        magnification: d.magnification,
        configuration: d.configuration,
    };
    let opts = DesignOptions {
        far_field_multiplier: d.multiplier,
        ..DesignOptions::default()
    };
    Ok(Some(requirements_with(&req, &opts)?))
}

/// Report and artifacts of `simulate`.
pub fn simulation_artifacts(s: &Scenario, sim: &Simulation) -> HarnessResult<Vec<Artifact>> {
    let input = s.input.expect("validated by simulate");
    let mut artifacts = Vec::new();
    let mut files = Vec::new();
    let fit = s.analysis.phase_fit_fraction;
    let last = sim.trace.entries.len() - 1;

    let stage_reports: Vec<Value> = par::map_collect(Exec::default(), &sim.trace.entries, |e| {
        stage_metrics(&e.envelope, fit)
    });
    let mut stages = Vec::new();
    for (k, (entry, metrics)) in sim.trace.entries.iter().zip(stage_reports).enumerate() {
        let mut v = json!({"label": entry.label, "element": entry.element, "metrics": metrics});
        if s.output.write_stages || k == 0 || k == last {
            let name = stage_file(&entry.label, &entry.element);
            artifacts.push(Artifact {
                name: name.clone(),
                contents: envelope_csv(&entry.envelope),
            });
            v["file"] = Value::String(name.clone());
            files.push(name);
        }
        stages.push(v);
    }

    let m = sim.topology.magnification;
    let out = sim.trace.output();
    let reference = magnified_copy(sim.grid, m, input_profile(input));
    let mut image = Map::new();
    image.insert("overlap".into(), q(overlap(out, &reference)?.norm(), ""));
    image.insert("intensity_overlap".into(), q(intensity_overlap(out, &reference)?, ""));
    if let (Ok(wo), Ok(wi)) = (fwhm(out), fwhm(sim.trace.input())) {
        image.insert("measured_magnification".into(), q(wo / wi, ""));
    }
    image.insert("skewness".into(), q(asymmetry(out)?, ""));
    image.insert("energy_ratio".into(), q(energy(out) / energy(sim.trace.input()), ""));

    let mut report = json!({
        "topology": topology_json(&sim.topology),
        "grid": {
            "n_samples": q(sim.grid.n_samples() as f64, "samples"),
            "dt": q(sim.grid.dt(), "ps"),
            "t0": q(sim.grid.t0(), "ps"),
            "window": q(sim.grid.window(), "ps"),
        },
        "input": match input {
            InputSpec::Gaussian { t_fwhm, center } => json!({
                "kind": "gaussian", "t_fwhm": q(t_fwhm, "ps"), "center": q(center, "ps"),
            }),
            InputSpec::TimeBin { tau, delta_t, psi } => json!({
                "kind": "time-bin", "tau": q(tau, "ps"), "delta_t": q(delta_t, "ps"),
                "psi": q(psi, "rad"), "t_i": q(tau + delta_t, "ps"),
            }),
        },
        "stages": stages,
        "image": Value::Object(image),
    });

    if sim.topology.kind != TopologyKind::Telescope {
        let d_f = sim
            .topology
            .lenses()
            .next()
            .map(|(_, l)| l.focal_gdd)
            .expect("imaging lens present");
        let t_i = input.width();
        let ff = check_far_field(m, t_i, d_f, s.analysis.far_field_threshold);
        report["far_field"] = json!({
            "residual_span": q(residual_span(m, t_i, d_f), "rad"),
            "residual_curvature": q(1.0 / (2.0 * m * d_f), "rad/ps^2"),
            "margin": q(ff.margin, ""),
            "threshold": q(ff.threshold_ratio, ""),
            "pass": ff.pass,
        });
    }

    if let Some(r) = &sim.interference {
        artifacts.push(Artifact {
            name: "interference_constructive.csv".into(),
            contents: envelope_csv(&r.constructive),
        });
        artifacts.push(Artifact {
            name: "interference_destructive.csv".into(),
            contents: envelope_csv(&r.destructive),
        });
        files.push("interference_constructive.csv".into());
        files.push("interference_destructive.csv".into());
        report["visibility"] = json!({
            "energy": q(r.visibility, ""),
            "peak": q(r.peak_visibility, ""),
            "analyzer_phase": q(r.analyzer_phase, "rad"),
            "delay": q((m * match input { InputSpec::TimeBin { delta_t, .. } => delta_t, _ => 0.0 }).abs(), "ps"),
            "window_start": q(r.window.0, "ps"),
            "window_end": q(r.window.1, "ps"),
            "center": q(r.center, "ps"),
            "peaks": r.peaks.iter().map(|p| q(*p, "ps")).collect::<Vec<_>>(),
            "energy_constructive": q(r.energy_constructive, "au"),
            "energy_destructive": q(r.energy_destructive, "au"),
        });
    }

    if let Some(d) = design_report(s)? {
        report["design"] = design_json(&d);
    }
    files.push("report.json".into());
    report["files"] = json!(files);
    artifacts.push(Artifact {
        name: "report.json".into(),
        contents: pretty(&report),
    });
    Ok(artifacts)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

/// `design.json` for a scenario with a `[design]` section.
pub fn design_artifacts(s: &Scenario) -> HarnessResult<Vec<Artifact>> {
    let report = design_report(s)?.ok_or_else(|| semantic("design needs a [design] section"))?;
    Ok(vec![Artifact {
        name: "design.json".into(),
        contents: pretty(&design_json(&report)),
    }])
}

/// Half-open range `[start, end)` split into `count` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.end - self.start) / self.count as f64;
        (0..self.count).map(|k| self.start + step * k as f64).collect()
    }
}

impl std::str::FromStr for SweepRange {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let usage = |m: String| HarnessError::new(ErrorCategory::Usage, m);
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(usage(format!("range '{s}' must be start:end:count")));
        };
        let start: f64 = a.parse().map_err(|_| usage(format!("bad range start '{a}'")))?;
        let end: f64 = b.parse().map_err(|_| usage(format!("bad range end '{b}'")))?;
        let count: usize = n.parse().map_err(|_| usage(format!("bad range count '{n}'")))?;
        if count == 0 || !start.is_finite() || !end.is_finite() {
            return Err(usage(format!("range '{s}' needs finite bounds and count >= 1")));
        }
        Ok(SweepRange { start, end, count })
    }
}

fn default_metric(s: &Scenario, param: &str) -> SweepMetric {
    if let Some(m) = s.analysis.sweep_metric {
        return m;
    }
    if param == "analysis.analyzer_phase" {
        SweepMetric::CentralEnergy
    } else if wants_visibility(s) {
        SweepMetric::Visibility
    } else {
        SweepMetric::Fwhm
    }
}

fn metric_value(s: &Scenario, sim: &Simulation, metric: SweepMetric) -> HarnessResult<f64> {
    let out = sim.trace.output();
    let need = |what: &str| semantic(format!("metric {} needs {what}", metric.as_str()));
    Ok(match metric {
        SweepMetric::CentralEnergy => sim.interference.as_ref().ok_or_else(|| need("a time-bin input"))?.energy_constructive,
        SweepMetric::Visibility => sim.interference.as_ref().ok_or_else(|| need("a time-bin input"))?.visibility,
        SweepMetric::Fwhm => fwhm(out)?,
        SweepMetric::Energy => energy(out),
        SweepMetric::Skewness => asymmetry(out)?,
        SweepMetric::C2 => phase_fit_quadratic(out, s.analysis.phase_fit_fraction)?.c2,
    })
}

/// Sweep result rows in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: String,
    pub unit: &'static str,
    pub metric: SweepMetric,
    pub rows: Vec<(f64, f64)>,
}

impl SweepTable {
    pub fn csv(&self) -> String {
        let mut col = self.parameter.replace('.', "_");
        if !self.unit.is_empty() {
            col.push('_');
            col.push_str(&self.unit.replace('^', "").replace('/', "_per_"));
        }
        let mut out = format!("{col},{}\n", self.metric.column());
        for (p, v) in &self.rows {
            out.push_str(&format_f64(*p));
            out.push(',');
            out.push_str(&format_f64(*v));
            out.push('\n');
        }
        out
    }
}

/// Evaluates the scenario's sweep metric at each value of `param`.
pub fn sweep(text: &str, param: &str, range: SweepRange, exec: Exec) -> HarnessResult<SweepTable> {
    let unit = parameter_unit(param).ok_or_else(|| semantic(format!("'{param}' is not a numeric scenario parameter")))?;
    let base = parse_scenario(text)?;
    let metric = default_metric(&base, param);
    let values = range.values();

    // The analyser phase does not change the image: simulate once.
    if param == "analysis.analyzer_phase" && metric == SweepMetric::CentralEnergy {
        let sim = simulate(&base)?;
        let Some(InputSpec::TimeBin { delta_t, .. }) = base.input else {
            return Err(semantic("analyser sweeps need a time-bin input"));
        };
        let m_dt = sim.topology.magnification * delta_t;
        let (energies, _) = central_energy_sweep(sim.trace.output(), m_dt, &values, exec)?;
        return Ok(SweepTable {
            parameter: param.to_string(),
            unit,
            metric,
            rows: values.into_iter().zip(energies).collect(),
        });
    }

    let results = par::map_collect(exec, &values, |&v| -> HarnessResult<f64> {
        let s = parse_scenario_with(text, &[(param, v)])?;
        let sim = simulate(&s)?;
        metric_value(&s, &sim, metric)
    });
    let mut rows = Vec::with_capacity(values.len());
    for (v, r) in values.iter().zip(results) {
        let y = r.map_err(|mut e| {
            e.message = format!("at {param} = {}: {}", format_f64(*v), e.message);
            e
        })?;
        rows.push((*v, y));
    }
    Ok(SweepTable {
        parameter: param.to_string(),
        unit,
        metric,
        rows,
    })
}

/// A harness subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate,
    Design,
    Sweep { param: String, range: SweepRange },
}

/// Where a run wrote its artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn to_json(&self, command: &str) -> String {
        let files: Vec<String> = self.files.iter().map(|p| p.display().to_string()).collect();
        json!({"status": "ok", "command": command, "out_dir": self.out_dir.display().to_string(), "files": files})
            .to_string()
    }
}

/// Output directory precedence: explicit flag, then the scenario's
/// `[output] dir`, then `env_default`, then `timelens-out`.
pub fn resolve_out_dir(flag: Option<&Path>, scenario: &Scenario, env_default: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| env_default.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("timelens-out"))
}

/// Parses, runs and writes one subcommand.
pub fn execute(
    command: &Command,
    text: &str,
    out_flag: Option<&Path>,
    env_out: Option<&str>,
) -> HarnessResult<RunSummary> {
    let scenario = parse_scenario(text)?;
    let out_dir = resolve_out_dir(out_flag, &scenario, env_out);
    let artifacts = match command {
        Command::Simulate => {
            let sim = simulate(&scenario)?;
            simulation_artifacts(&scenario, &sim)?
        }
        Command::Design => design_artifacts(&scenario)?,
        Command::Sweep { param, range } => {
            let table = sweep(text, param, *range, Exec::default())?;
            vec![Artifact {
                name: "sweep.csv".into(),
                contents: table.csv(),
            }]
        }
    };
    let files = write_artifacts(&out_dir, &artifacts)?;
    Ok(RunSummary { out_dir, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIELD: &str = "\
[input]
kind = gaussian
t_fwhm = 5 ps
[topology]
kind = field-lens
magnification = -20
d_f = 5 ps^2
";

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-7, -3.25, 123456.789, 5.0, 0.0] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.1), "0.1");
    }

    #[test]
    fn csv_round_trip() {
        let g = TimeGrid::centered(64, 0.5).unwrap();
        let env = gaussian_pulse(g, 3.0, 1.0, Complex64::new(0.3, -0.7)).unwrap();
        let back = read_envelope_csv(&envelope_csv(&env)).unwrap();
        assert_eq!(back.samples(), env.samples());
        assert_eq!(back.grid().n_samples(), 64);
        assert!((back.grid().dt() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_range_is_half_open() {
        let r: SweepRange = "0:1:4".parse().unwrap();
        assert_eq!(r.values(), vec![0.0, 0.25, 0.5, 0.75]);
        assert!("0:1".parse::<SweepRange>().is_err());
        assert!("0:1:0".parse::<SweepRange>().is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let mut s = parse_scenario(FIELD).unwrap();
        assert_eq!(resolve_out_dir(None, &s, None), PathBuf::from("timelens-out"));
        assert_eq!(resolve_out_dir(None, &s, Some("env")), PathBuf::from("env"));
        s.output.dir = Some("scen".into());
        assert_eq!(resolve_out_dir(None, &s, Some("env")), PathBuf::from("scen"));
        assert_eq!(resolve_out_dir(Some(Path::new("flag")), &s, Some("env")), PathBuf::from("flag"));
    }

    #[test]
    fn error_categories_map_to_distinct_codes() {
        use ErrorCategory::*;
        let codes: Vec<i32> = [Usage, Syntax, Semantic, Numerical, Parameter, Io]
            .iter()
            .map(|c| c.exit_code())
            .collect();
        let mut dedup = codes.clone();
        dedup.dedup();
        assert_eq!(codes, dedup);
        assert!(codes.iter().all(|c| *c != 0 && *c != 1));
        let e: HarnessError = Error::WrapAround { stage: "D2".into(), ratio: 1.0 }.into();
        assert_eq!(e.category, Numerical);
        let line: Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(line["error"]["category"], "numerical");
    }

    #[test]
    fn simulate_field_lens_report() {
        let s = parse_scenario(FIELD).unwrap();
        let sim = simulate(&s).unwrap();
        assert_eq!(sim.trace.entries.len(), 5);
        let arts = simulation_artifacts(&s, &sim).unwrap();
        let report: Value = serde_json::from_str(&arts.last().unwrap().contents).unwrap();
        assert!(report["image"]["overlap"]["value"].as_f64().unwrap() > 0.999);
        assert_eq!(report["topology"]["magnification"]["value"], 20.0);
        assert_eq!(report["far_field"]["pass"], false);
        assert!(report.get("visibility").is_none());
        assert_eq!(arts.len(), 6);
    }

    #[test]
    fn missing_sections_are_semantic() {
        let s = parse_scenario("[design]\nconfiguration = far-field\nt_i = 5 ps\nbandwidth = 1 rad/ps\nmagnification = 20\n").unwrap();
        assert_eq!(simulate(&s).unwrap_err().category, ErrorCategory::Semantic);
        let s = parse_scenario(FIELD).unwrap();
        assert_eq!(design_artifacts(&s).unwrap_err().category, ErrorCategory::Semantic);
    }

    #[test]
    fn write_failure_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let arts = vec![
            Artifact { name: "a.csv".into(), contents: "x".into() },
            Artifact { name: "missing/b.csv".into(), contents: "y".into() },
        ];
        let err = write_artifacts(dir.path(), &arts).unwrap_err();
        assert_eq!(err.category, ErrorCategory::Io);
        assert!(!dir.path().join("a.csv").exists());
    }
}
