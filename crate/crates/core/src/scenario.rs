//! Declarative scenario files.
//!
//! ```text
//! # comment
//! [input]
//! kind = time-bin
//! tau = 5 ps
//! delta_t = 15 ps
//!
//! [topology]
//! kind = field-lens
//! magnification = -20
//! max_dispersion = 1000 ps^2
//! pump_fwhm = 2.5 ps
//! ```
//!
//! Every line is blank, a comment, a `[section]` header or `key = value [unit]`.
//! Dimensioned values must carry a unit; they are converted to ps, ps^2,
//! ps^3, rad, rad/ps or nm. Unknown sections and keys are rejected. All
//! problems are collected and reported together with their line numbers.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::design::Configuration;
use crate::elements::PumpSpec;
use crate::systems::{GridOptions, TopologyKind, DEFAULT_FAR_FIELD_THRESHOLD, DEFAULT_MARGIN};

/// Physical dimension of a scenario value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Time,
    Gdd,
    Tod,
    Angle,
    AngularFrequency,
    Wavelength,
    Dimensionless,
}

impl Dim {
    /// Canonical unit string.
    pub fn unit(self) -> &'static str {
        match self {
            Dim::Time => "ps",
            Dim::Gdd => "ps^2",
            Dim::Tod => "ps^3",
            Dim::Angle => "rad",
            Dim::AngularFrequency => "rad/ps",
            Dim::Wavelength => "nm",
            Dim::Dimensionless => "",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (Dim::Time, "ps") => 1.0,
            (Dim::Time, "fs") => 1e-3,
            (Dim::Time, "ns") => 1e3,
            (Dim::Gdd, "ps^2" | "ps2") => 1.0,
            (Dim::Gdd, "fs^2" | "fs2") => 1e-6,
            (Dim::Tod, "ps^3" | "ps3") => 1.0,
            (Dim::Tod, "fs^3" | "fs3") => 1e-9,
            (Dim::Angle, "rad") => 1.0,
            (Dim::Angle, "mrad") => 1e-3,
            (Dim::Angle, "deg") => PI / 180.0,
            (Dim::AngularFrequency, "rad/ps") => 1.0,
            (Dim::AngularFrequency, "rad/s") => 1e-12,
            (Dim::AngularFrequency, "rad/fs") => 1e3,
            (Dim::Wavelength, "nm") => 1.0,
            (Dim::Wavelength, "um") => 1e3,
            _ => return None,
        };
        Some(s)
    }

    fn accepted(self) -> &'static str {
        match self {
            Dim::Time => "ps, fs, ns",
            Dim::Gdd => "ps^2, fs^2",
            Dim::Tod => "ps^3, fs^3",
            Dim::Angle => "rad, mrad, deg",
            Dim::AngularFrequency => "rad/ps, rad/s, rad/fs",
            Dim::Wavelength => "nm, um",
            Dim::Dimensionless => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Quantity(Dim),
    Integer,
    Bool,
    Word(&'static [&'static str]),
    Text,
}

const INPUT_KINDS: &[&str] = &["gaussian", "time-bin"];
const TOPOLOGY_KINDS: &[&str] = &["single-lens", "field-lens", "telescope"];
const PUMP_KINDS: &[&str] = &["ideal", "seed"];
const CONFIGURATIONS: &[&str] = &["far-field", "telescope", "field-lens"];
const METRICS: &[&str] = &["central-energy", "visibility", "fwhm", "energy", "skewness", "c2"];

/// Keys ending in `.` take an element-name suffix, e.g. `tod_ratio.D2`.
const SCHEMA: &[(&str, &str, Kind)] = &[
    ("input", "kind", Kind::Word(INPUT_KINDS)),
    ("input", "t_fwhm", Kind::Quantity(Dim::Time)),
    ("input", "tau", Kind::Quantity(Dim::Time)),
    ("input", "delta_t", Kind::Quantity(Dim::Time)),
    ("input", "psi", Kind::Quantity(Dim::Angle)),
    ("input", "center", Kind::Quantity(Dim::Time)),
    ("input", "carrier", Kind::Quantity(Dim::Wavelength)),
    ("topology", "kind", Kind::Word(TOPOLOGY_KINDS)),
    ("topology", "magnification", Kind::Quantity(Dim::Dimensionless)),
    ("topology", "d_f", Kind::Quantity(Dim::Gdd)),
    ("topology", "d1", Kind::Quantity(Dim::Gdd)),
    ("topology", "max_dispersion", Kind::Quantity(Dim::Gdd)),
    ("topology", "pump", Kind::Word(PUMP_KINDS)),
    ("topology", "pump_fwhm", Kind::Quantity(Dim::Time)),
    ("topology", "pump_wavelength", Kind::Quantity(Dim::Wavelength)),
    ("topology", "tod_ratio", Kind::Quantity(Dim::Time)),
    ("topology", "tod_ratio.", Kind::Quantity(Dim::Time)),
    ("topology", "transmission.", Kind::Quantity(Dim::Dimensionless)),
    ("grid", "n_samples", Kind::Integer),
    ("grid", "margin", Kind::Quantity(Dim::Dimensionless)),
    ("grid", "window", Kind::Quantity(Dim::Time)),
    ("grid", "dt", Kind::Quantity(Dim::Time)),
    ("analysis", "visibility", Kind::Bool),
    ("analysis", "analyzer_phase", Kind::Quantity(Dim::Angle)),
    ("analysis", "phase_fit_fraction", Kind::Quantity(Dim::Dimensionless)),
    ("analysis", "far_field_threshold", Kind::Quantity(Dim::Dimensionless)),
    ("analysis", "sweep_metric", Kind::Word(METRICS)),
    ("design", "configuration", Kind::Word(CONFIGURATIONS)),
    ("design", "t_i", Kind::Quantity(Dim::Time)),
    ("design", "bandwidth", Kind::Quantity(Dim::AngularFrequency)),
    ("design", "magnification", Kind::Quantity(Dim::Dimensionless)),
    ("design", "multiplier", Kind::Quantity(Dim::Dimensionless)),
    ("output", "dir", Kind::Text),
    ("output", "write_stages", Kind::Bool),
];

const SECTIONS: &[&str] = &["input", "topology", "grid", "analysis", "design", "output"];

fn lookup(section: &str, key: &str) -> Option<Kind> {
    SCHEMA.iter().find_map(|(s, k, kind)| {
        let hit = *s == section
            && if let Some(prefix) = k.strip_suffix('.') {
                key.strip_prefix(prefix)
                    .and_then(|rest| rest.strip_prefix('.'))
                    .is_some_and(|name| !name.is_empty())
            } else {
                *k == key
            };
        hit.then_some(*kind)
    })
}

/// Canonical unit of a `section.key` parameter, for sweeps and headers.
pub fn parameter_unit(path: &str) -> Option<&'static str> {
    let (section, key) = path.split_once('.')?;
    match lookup(section, key)? {
        Kind::Quantity(d) => Some(d.unit()),
        Kind::Integer => Some(""),
        _ => None,
    }
}

/// A problem found while reading a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// 1-based line, 0 for command-line overrides and file-level problems.
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "semantic error",
        };
        if self.line == 0 {
            write!(f, "{what}: {}", self.message)
        } else {
            write!(f, "line {}:{}: {what}: {}", self.line, self.column, self.message)
        }
    }
}

/// Every diagnostic of a rejected scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ScenarioError {
    /// True if any problem is a syntax error.
    pub fn has_syntax_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.kind == DiagnosticKind::Syntax)
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.diagnostics.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", lines.join("; "))
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Integer(u64),
    Bool(bool),
    Word(String),
    Text(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    column: usize,
    value: Value,
}

type Table = BTreeMap<String, BTreeMap<String, Entry>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSpec {
    Gaussian { t_fwhm: f64, center: f64 },
    TimeBin { tau: f64, delta_t: f64, psi: f64 },
}

impl InputSpec {
    /// Overall input width: FWHM, or `delta_t + tau` for two bins.
    pub fn width(&self) -> f64 {
        match *self {
            InputSpec::Gaussian { t_fwhm, .. } => t_fwhm,
            InputSpec::TimeBin { tau, delta_t, .. } => delta_t + tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreeParameter {
    FocalGdd(f64),
    D1(f64),
    MaxDispersion(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    /// Signed magnification.
    pub magnification: f64,
    pub free: FreeParameter,
    pub pump: PumpSpec,
    pub pump_wavelength: Option<f64>,
    /// `beta3 / beta2` applied to every dispersive element, ps.
    pub tod_ratio: Option<f64>,
    /// Per-element overrides of `tod_ratio`, ps.
    pub tod_ratios: BTreeMap<String, f64>,
    pub transmissions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    CentralEnergy,
    Visibility,
    Fwhm,
    Energy,
    Skewness,
    C2,
}

impl SweepMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMetric::CentralEnergy => "central-energy",
            SweepMetric::Visibility => "visibility",
            SweepMetric::Fwhm => "fwhm",
            SweepMetric::Energy => "energy",
            SweepMetric::Skewness => "skewness",
            SweepMetric::C2 => "c2",
        }
    }

    /// CSV column name including the unit.
    pub fn column(self) -> &'static str {
        match self {
            SweepMetric::CentralEnergy => "central_energy_au",
            SweepMetric::Visibility => "visibility",
            SweepMetric::Fwhm => "fwhm_ps",
            SweepMetric::Energy => "energy_au",
            SweepMetric::Skewness => "skewness",
            SweepMetric::C2 => "c2_rad_per_ps2",
        }
    }

    fn parse(s: &str) -> Self {
        match s {
            "central-energy" => SweepMetric::CentralEnergy,
            "visibility" => SweepMetric::Visibility,
            "fwhm" => SweepMetric::Fwhm,
            "energy" => SweepMetric::Energy,
            "skewness" => SweepMetric::Skewness,
            _ => SweepMetric::C2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub visibility: Option<bool>,
    pub analyzer_phase: Option<f64>,
    pub phase_fit_fraction: f64,
    pub far_field_threshold: f64,
    pub sweep_metric: Option<SweepMetric>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            visibility: None,
            analyzer_phase: None,
            phase_fit_fraction: 1.0,
            far_field_threshold: DEFAULT_FAR_FIELD_THRESHOLD,
            sweep_metric: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub configuration: Configuration,
    pub t_i: f64,
    pub bandwidth: f64,
    pub magnification: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub write_stages: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            write_stages: true,
        }
    }
}

/// A validated scenario; sections absent from the file are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub input: Option<InputSpec>,
    /// Input carrier wavelength, nm.
    pub carrier: Option<f64>,
    pub topology: Option<TopologySpec>,
    pub grid: GridOptions,
    pub analysis: AnalysisSpec,
    pub design: Option<DesignSpec>,
    pub output: OutputSpec,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_with(text, &[])
}

/// Parses `text`, then applies `section.key = value` overrides (values in
/// canonical units) before validation.
pub fn parse_scenario_with(text: &str, overrides: &[(&str, f64)]) -> Result<Scenario, ScenarioError> {
    let mut diags = Vec::new();
    let mut table = read_table(text, &mut diags);
    for (path, v) in overrides {
        apply_override(&mut table, path, *v, &mut diags);
    }
    if !diags.is_empty() {
        return Err(ScenarioError { diagnostics: diags });
    }
    let scenario = Validator { table: &table, diags: &mut diags }.run();
    if diags.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError { diagnostics: diags })
    }
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line,
        column,
        kind: DiagnosticKind::Syntax,
        message: message.into(),
    }
}

fn semantic(line: usize, column: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line,
        column,
        kind: DiagnosticKind::Semantic,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !s.starts_with('.')
        && !s.ends_with('.')
}

fn read_table(text: &str, diags: &mut Vec<Diagnostic>) -> Table {
    let mut table = Table::new();
    let mut section: Option<String> = None;
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len() + 1;
        if let Some(rest) = trimmed.strip_prefix('[') {
            seen_header = true;
            let name = match rest.strip_suffix(']') {
                Some(name) => name.trim(),
                None => {
                    // Recover the intended section so later lines are still checked.
                    diags.push(syntax(line_no, indent + trimmed.len(), "section header is missing ']'"));
                    rest.trim()
                }
            };
            if !SECTIONS.contains(&name) {
                diags.push(semantic(
                    line_no,
                    indent + 1,
                    format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", ")),
                ));
                section = None;
                continue;
            }
            if table.contains_key(name) {
                diags.push(semantic(line_no, indent, format!("section [{name}] appears twice")));
            }
            table.entry(name.to_string()).or_default();
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = line.find('=') else {
            diags.push(syntax(line_no, indent, "expected 'key = value' or '[section]'"));
            continue;
        };
        let key = line[..eq].trim();
        let value_col = eq + 2 + (line[eq + 1..].len() - line[eq + 1..].trim_start().len());
        if !is_identifier(key) {
            diags.push(syntax(line_no, indent, format!("invalid key '{key}'")));
            continue;
        }
        let Some(sec) = section.clone() else {
            if !seen_header {
                diags.push(semantic(line_no, indent, format!("key '{key}' appears before any section")));
            }
            continue;
        };
        let Some(kind) = lookup(&sec, key) else {
            diags.push(semantic(line_no, indent, format!("unknown key '{key}' in [{sec}]")));
            continue;
        };
        let raw_value = line[eq + 1..].trim();
        match parse_value(raw_value, kind) {
            Ok(value) => {
                let entries = table.entry(sec.clone()).or_default();
                if let Some(prev) = entries.get(key) {
                    diags.push(semantic(
                        line_no,
                        indent,
                        format!("duplicate key '{key}' (first set on line {})", prev.line),
                    ));
                    continue;
                }
                entries.insert(
                    key.to_string(),
                    Entry {
                        line: line_no,
                        column: value_col,
                        value,
                    },
                );
            }
            Err((k, msg)) => diags.push(Diagnostic {
                line: line_no,
                column: value_col,
                kind: k,
                message: format!("{key}: {msg}"),
            }),
        }
    }
    table
}

fn parse_value(raw: &str, kind: Kind) -> Result<Value, (DiagnosticKind, String)> {
    use DiagnosticKind::{Semantic, Syntax};
    if raw.is_empty() {
        return Err((Syntax, "missing value".into()));
    }
    match kind {
        Kind::Text => {
            let inner = raw
                .strip_prefix('"')
                .and_then(|r| r.strip_suffix('"'))
                .ok_or((Syntax, "expected a quoted string".to_string()))?;
            if inner.contains('"') {
                return Err((Syntax, "unexpected '\"' inside string".into()));
            }
            Ok(Value::Text(inner.to_string()))
        }
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            other => Err((Semantic, format!("expected true or false, got '{other}'"))),
        },
        Kind::Word(options) => {
            if options.contains(&raw) {
                Ok(Value::Word(raw.to_string()))
            } else {
                Err((Semantic, format!("expected one of {}, got '{raw}'", options.join(", "))))
            }
        }
        Kind::Integer => raw
            .parse::<u64>()
            .map(Value::Integer)
            .map_err(|_| (Syntax, format!("expected a non-negative integer, got '{raw}'"))),
        Kind::Quantity(dim) => {
            let mut parts = raw.split_whitespace();
            let number = parts.next().unwrap_or_default();
            let unit = parts.next();
            if parts.next().is_some() {
                return Err((Syntax, format!("unexpected trailing text in '{raw}'")));
            }
            let v: f64 = number
                .parse()
                .map_err(|_| (Syntax, format!("expected a number, got '{number}'")))?;
            if !v.is_finite() {
                return Err((Semantic, format!("value must be finite, got '{number}'")));
            }
            let scale = match (dim, unit) {
                (Dim::Dimensionless, None) => 1.0,
                (Dim::Dimensionless, Some(u)) => {
                    return Err((Semantic, format!("unit mismatch: expected a plain number, got unit '{u}'")))
                }
                (d, None) => {
                    return Err((Semantic, format!("missing unit (expected one of {})", d.accepted())))
                }
                (d, Some(u)) => d.scale(u).ok_or((
                    Semantic,
                    format!("unit mismatch: '{u}' is not one of {}", d.accepted()),
                ))?,
            };
            Ok(Value::Number(v * scale))
        }
    }
}

fn apply_override(table: &mut Table, path: &str, v: f64, diags: &mut Vec<Diagnostic>) {
    let Some((section, key)) = path.split_once('.') else {
        diags.push(semantic(0, 0, format!("parameter '{path}' must be written as section.key")));
        return;
    };
    let value = match lookup(section, key) {
        Some(Kind::Quantity(_)) => Value::Number(v),
        Some(Kind::Integer) if v >= 0.0 && v.fract() == 0.0 => Value::Integer(v as u64),
        Some(Kind::Integer) => {
            diags.push(semantic(0, 0, format!("parameter '{path}' needs integer values, got {v}")));
            return;
        }
        Some(_) => {
            diags.push(semantic(0, 0, format!("parameter '{path}' is not numeric")));
            return;
        }
        None => {
            diags.push(semantic(0, 0, format!("unknown parameter '{path}'")));
            return;
        }
    };
    table.entry(section.to_string()).or_default().insert(
        key.to_string(),
        Entry {
            line: 0,
            column: 0,
            value,
        },
    );
}

struct Validator<'a> {
    table: &'a Table,
    diags: &'a mut Vec<Diagnostic>,
}

impl Validator<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.table.get(section).and_then(|s| s.get(key))
    }

    fn header_line(&self, section: &str) -> usize {
        self.table
            .get(section)
            .and_then(|s| s.values().map(|e| e.line).filter(|l| *l > 0).min())
            .unwrap_or(0)
    }

    fn number(&self, section: &str, key: &str) -> Option<f64> {
        match self.entry(section, key)?.value {
            Value::Number(v) => Some(v),
            _ => None,
        }
    }

    fn word(&self, section: &str, key: &str) -> Option<&str> {
        match &self.entry(section, key)?.value {
            Value::Word(w) => Some(w.as_str()),
            _ => None,
        }
    }

    fn flag(&self, section: &str, key: &str) -> Option<bool> {
        match self.entry(section, key)?.value {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    fn at(&mut self, section: &str, key: &str, message: String) {
        let (line, column) = self
            .entry(section, key)
            .map(|e| (e.line, e.column))
            .unwrap_or((self.header_line(section), 1));
        self.diags.push(semantic(line, column, message));
    }

    fn require(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = self.number(section, key);
        if v.is_none() {
            let line = self.header_line(section);
            self.diags
                .push(semantic(line, 1, format!("missing field '{key}' in [{section}]")));
        }
        v
    }

    fn positive(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = self.require(section, key)?;
        if v <= 0.0 {
            self.at(section, key, format!("{key} must be positive, got {v}"));
            return None;
        }
        Some(v)
    }

    fn forbid(&mut self, section: &str, key: &str, why: &str) {
        if self.entry(section, key).is_some() {
            self.at(section, key, format!("'{key}' is not used {why}"));
        }
    }

    fn run(mut self) -> Scenario {
        let input = self.table.contains_key("input").then(|| self.input()).flatten();
        let carrier = self.number("input", "carrier");
        if let Some(c) = carrier {
            if c <= 0.0 {
                self.at("input", "carrier", format!("carrier must be positive, got {c}"));
            }
        }
        let topology = self.table.contains_key("topology").then(|| self.topology()).flatten();
        if topology.as_ref().is_some_and(|t| t.pump_wavelength.is_some()) && carrier.is_none() {
            self.at(
                "topology",
                "pump_wavelength",
                "pump_wavelength needs the input carrier ([input] carrier)".into(),
            );
        }
        let grid = self.grid();
        let analysis = self.analysis();
        let design = self.table.contains_key("design").then(|| self.design()).flatten();
        let output = OutputSpec {
            dir: match self.entry("output", "dir").map(|e| &e.value) {
                Some(Value::Text(s)) => Some(s.clone()),
                _ => None,
            },
            write_stages: self.flag("output", "write_stages").unwrap_or(true),
        };
        Scenario {
            input,
            carrier,
            topology,
            grid,
            analysis,
            design,
            output,
        }
    }

    fn input(&mut self) -> Option<InputSpec> {
        let Some(kind) = self.word("input", "kind").map(str::to_owned) else {
            let line = self.header_line("input");
            self.diags.push(semantic(line, 1, "missing field 'kind' in [input]"));
            return None;
        };
        if kind == "gaussian" {
            for k in ["tau", "delta_t", "psi"] {
                self.forbid("input", k, "by a gaussian input");
            }
            let t_fwhm = self.positive("input", "t_fwhm");
            let center = self.number("input", "center").unwrap_or(0.0);
            Some(InputSpec::Gaussian {
                t_fwhm: t_fwhm?,
                center,
            })
        } else {
            for k in ["t_fwhm", "center"] {
                self.forbid("input", k, "by a time-bin input");
            }
            let tau = self.positive("input", "tau");
            let delta_t = self.positive("input", "delta_t");
            let psi = self.number("input", "psi").unwrap_or(0.0);
            Some(InputSpec::TimeBin {
                tau: tau?,
                delta_t: delta_t?,
                psi,
            })
        }
    }

    fn topology(&mut self) -> Option<TopologySpec> {
        let kind = match self.word("topology", "kind") {
            Some(w) => w.parse::<TopologyKind>().ok(),
            None => {
                let line = self.header_line("topology");
                self.diags.push(semantic(line, 1, "missing field 'kind' in [topology]"));
                None
            }
        };
        let m = self.require("topology", "magnification");
        if let (Some(m), Some(kind)) = (m, kind) {
            if m == 0.0 {
                self.at(
                    "topology",
                    "magnification",
                    "degenerate magnification M = 0: no image is formed".into(),
                );
            } else if m == 1.0 && kind != TopologyKind::Telescope {
                self.at(
                    "topology",
                    "magnification",
                    "degenerate magnification M = 1: the imaging condition forces D1 = 0".into(),
                );
            }
        }
        let given: Vec<&str> = ["d_f", "d1", "max_dispersion"]
            .into_iter()
            .filter(|k| self.entry("topology", k).is_some())
            .collect();
        let free = match (kind, given.as_slice()) {
            (_, []) => {
                let line = self.header_line("topology");
                self.diags.push(semantic(
                    line,
                    1,
                    "missing field: one of 'd_f', 'd1' or 'max_dispersion' in [topology]",
                ));
                None
            }
            (_, [_, second, ..]) => {
                self.at(
                    "topology",
                    second,
                    format!("only one of {} may be given", given.join(", ")),
                );
                None
            }
            (Some(TopologyKind::Telescope), ["d_f"]) => {
                self.at("topology", "d_f", "a telescope is specified by 'd1', not 'd_f'".into());
                None
            }
            (Some(TopologyKind::SingleLens | TopologyKind::FieldLens), ["d1"]) => {
                self.at("topology", "d1", "single- and field-lens systems are specified by 'd_f'".into());
                None
            }
            (_, [key]) => {
                let v = self.number("topology", key).unwrap_or(0.0);
                if v == 0.0 || (*key == "max_dispersion" && v < 0.0) {
                    self.at("topology", key, format!("{key} must be nonzero, got {v}"));
                    None
                } else {
                    Some(match *key {
                        "d_f" => FreeParameter::FocalGdd(v),
                        "d1" => FreeParameter::D1(v),
                        _ => FreeParameter::MaxDispersion(v),
                    })
                }
            }
        };
        let pump_fwhm = self.number("topology", "pump_fwhm");
        let pump = match (self.word("topology", "pump"), pump_fwhm) {
            (Some("ideal"), Some(_)) => {
                self.at("topology", "pump_fwhm", "pump_fwhm given for an ideal pump".into());
                None
            }
            (Some("ideal"), None) | (None, None) => Some(PumpSpec::Ideal),
            (_, Some(f)) if f > 0.0 => Some(PumpSpec::Seed { fwhm: f }),
            (_, Some(f)) => {
                self.at("topology", "pump_fwhm", format!("pump_fwhm must be positive, got {f}"));
                None
            }
            (Some(_), None) => {
                let line = self.header_line("topology");
                self.diags
                    .push(semantic(line, 1, "missing field 'pump_fwhm' for a seeded pump"));
                None
            }
        };
        let pump_wavelength = self.number("topology", "pump_wavelength");
        if let Some(p) = pump_wavelength {
            if p <= 0.0 {
                self.at("topology", "pump_wavelength", format!("pump_wavelength must be positive, got {p}"));
            }
        }
        let valid_names: &[&str] = match kind {
            Some(TopologyKind::Telescope) => &["D1", "D2", "D3"],
            _ => &["D1", "D2"],
        };
        let mut tod_ratios = BTreeMap::new();
        let mut transmissions = BTreeMap::new();
        let keys: Vec<(String, f64)> = self
            .table
            .get("topology")
            .map(|s| {
                s.iter()
                    .filter_map(|(k, e)| match e.value {
                        Value::Number(v) if k.contains('.') => Some((k.clone(), v)),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        for (key, v) in keys {
            let (prefix, name) = key.split_once('.').unwrap_or_default();
            if kind.is_some() && !valid_names.contains(&name) {
                self.at(
                    "topology",
                    &key,
                    format!("no dispersive element '{name}' (expected one of {})", valid_names.join(", ")),
                );
                continue;
            }
            if prefix == "transmission" {
                if !(v > 0.0 && v <= 1.0) {
                    self.at("topology", &key, format!("transmission must lie in (0, 1], got {v}"));
                    continue;
                }
                transmissions.insert(name.to_string(), v);
            } else {
                tod_ratios.insert(name.to_string(), v);
            }
        }
        Some(TopologySpec {
            kind: kind?,
            magnification: m?,
            free: free?,
            pump: pump?,
            pump_wavelength,
            tod_ratio: self.number("topology", "tod_ratio"),
            tod_ratios,
            transmissions,
        })
    }

    fn grid(&mut self) -> GridOptions {
        let mut opts = GridOptions::default();
        if let Some(e) = self.entry("grid", "n_samples") {
            if let Value::Integer(n) = e.value {
                if n < 2 || !n.is_power_of_two() {
                    self.at("grid", "n_samples", format!("n_samples must be a power of two >= 2, got {n}"));
                } else {
                    opts.n_samples = Some(n as usize);
                }
            }
        }
        if let Some(m) = self.number("grid", "margin") {
            if m < 1.0 {
                self.at("grid", "margin", format!("margin must be >= 1, got {m}"));
            }
            opts.margin = m;
        } else {
            opts.margin = DEFAULT_MARGIN;
        }
        for key in ["window", "dt"] {
            if let Some(v) = self.number("grid", key) {
                if v <= 0.0 {
                    self.at("grid", key, format!("{key} must be positive, got {v}"));
                }
            }
        }
        opts.window = self.number("grid", "window");
        opts.dt = self.number("grid", "dt");
        opts
    }

    fn analysis(&mut self) -> AnalysisSpec {
        let mut a = AnalysisSpec {
            visibility: self.flag("analysis", "visibility"),
            analyzer_phase: self.number("analysis", "analyzer_phase"),
            sweep_metric: self.word("analysis", "sweep_metric").map(SweepMetric::parse),
            ..AnalysisSpec::default()
        };
        if let Some(f) = self.number("analysis", "phase_fit_fraction") {
            if f <= 0.0 {
                self.at("analysis", "phase_fit_fraction", format!("phase_fit_fraction must be positive, got {f}"));
            }
            a.phase_fit_fraction = f;
        }
        if let Some(t) = self.number("analysis", "far_field_threshold") {
            if t <= 0.0 {
                self.at("analysis", "far_field_threshold", format!("far_field_threshold must be positive, got {t}"));
            }
            a.far_field_threshold = t;
        }
        a
    }

    fn design(&mut self) -> Option<DesignSpec> {
        let configuration = match self.word("design", "configuration") {
            Some(w) => w.parse::<Configuration>().ok(),
            None => {
                let line = self.header_line("design");
                self.diags
                    .push(semantic(line, 1, "missing field 'configuration' in [design]"));
                None
            }
        };
        let t_i = self.positive("design", "t_i");
        let bandwidth = self.positive("design", "bandwidth");
        let magnification = self.positive("design", "magnification");
        let multiplier = self.number("design", "multiplier").unwrap_or(10.0);
        if multiplier < 1.0 {
            self.at("design", "multiplier", format!("multiplier must be >= 1, got {multiplier}"));
        }
        Some(DesignSpec {
            configuration: configuration?,
            t_i: t_i?,
            bandwidth: bandwidth?,
            magnification: magnification?,
            multiplier,
        })
    }
}
