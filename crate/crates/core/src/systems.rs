//! Single-lens, field-lens and telescope imaging systems.
//!
//! Magnification is signed: with positive `D1`, `D2` and `D_f` the single-lens
//! image is inverted (`M < 0`). User-facing output reports `|M|`.
//!
//! Lens parameters in a [`SystemTopology`] are stored as pump chirps (see
//! [`crate::elements`]). For the single-lens and field-lens systems the first
//! lens is a down-conversion lens with chirp `D_f` and the field lens an
//! up-conversion lens with chirp `D_r = M D_f`. The telescope solver reports
//! its focal dispersions in the convention where a lens imprints
//! `-t^2 / (2 D_f)`; the chain realises them as a down-conversion lens with
//! chirp `-D_f1` followed by an up-conversion lens with chirp `D_f2`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::elements::{apply_time_lens, chirped_gaussian_fwhm, disperse, Conversion, DispersiveElement, PumpSpec, TimeLens};
use crate::envelope::{to_frequency, SampledEnvelope, TimeGrid, LEAKAGE_LIMIT};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Relative tolerance for the imaging-condition checks.
pub const CONDITION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    SingleLens,
    FieldLens,
    Telescope,
}

impl TopologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::SingleLens => "single-lens",
            TopologyKind::FieldLens => "field-lens",
            TopologyKind::Telescope => "telescope",
        }
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single-lens" => Ok(TopologyKind::SingleLens),
            "field-lens" => Ok(TopologyKind::FieldLens),
            "telescope" => Ok(TopologyKind::Telescope),
            other => Err(format!(
                "unknown topology '{other}' (expected single-lens, field-lens or telescope)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Element {
    Dispersion(DispersiveElement),
    Lens(TimeLens),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub element: Element,
}

/// Ordered element chain with its magnification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTopology {
    pub kind: TopologyKind,
    pub magnification: f64,
    pub stages: Vec<Stage>,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// `(D1, D2)` with `1/D1 + 1/D2 = 1/D_f` and `-D2/D1 = M`.
pub fn solve_single_lens(m: f64, d_f: f64) -> Result<(f64, f64)> {
    check_finite("M", m)?;
    check_finite("D_f", d_f)?;
    if m == 0.0 || m == 1.0 {
        return Err(Error::DegenerateMagnification(m));
    }
    if d_f == 0.0 {
        return Err(Error::InvalidParameter("D_f must be nonzero".into()));
    }
    let d1 = d_f * (m - 1.0) / m;
    Ok((d1, -m * d1))
}

/// `(D1, D2, D_r)`: single-lens solution plus the field-lens pump chirp `D_r = M D_f`.
pub fn solve_field_lens(m: f64, d_f: f64) -> Result<(f64, f64, f64)> {
    let (d1, d2) = solve_single_lens(m, d_f)?;
    Ok((d1, d2, m * d_f))
}

/// Telescope dispersions, ps^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelescopeDispersions {
    pub d1: f64,
    pub d_f1: f64,
    pub d2: f64,
    pub d_f2: f64,
    pub d3: f64,
}

/// `D_f1 = -D1`, `D3 = -D_f2 = -M D1`, `D2 = D1 + D3`.
pub fn solve_telescope(m: f64, d1: f64) -> Result<TelescopeDispersions> {
    check_finite("M", m)?;
    check_finite("D1", d1)?;
    if m == 0.0 {
        return Err(Error::DegenerateMagnification(m));
    }
    if d1 == 0.0 {
        return Err(Error::InvalidParameter("telescope D1 must be nonzero".into()));
    }
    let d3 = -m * d1;
    Ok(TelescopeDispersions {
        d1,
        d_f1: -d1,
        d2: d1 + d3,
        d_f2: m * d1,
        d3,
    })
}

/// Residual image phase `t^2 / (2 M D_f)`, rad.
pub fn residual_phase(m: f64, d_f: f64, t: f64) -> f64 {
    t * t / (2.0 * m * d_f)
}

/// Residual phase variation across the image, `M t_i^2 / (8 D_f)`, rad.
pub fn residual_span(m: f64, t_i: f64, d_f: f64) -> f64 {
    m * t_i * t_i / (8.0 * d_f)
}

/// Outcome of the far-field (Fraunhofer) test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldCheck {
    pub pass: bool,
    /// `|delta_theta| / pi`
    pub margin: f64,
    pub delta_theta: f64,
    pub threshold_ratio: f64,
}

/// Default fraction of pi below which the residual phase counts as negligible.
pub const DEFAULT_FAR_FIELD_THRESHOLD: f64 = 0.1;

pub fn check_far_field(m: f64, t_i: f64, d_f: f64, threshold_ratio: f64) -> FarFieldCheck {
    let delta_theta = residual_span(m, t_i, d_f);
    let margin = delta_theta.abs() / PI;
    FarFieldCheck {
        pass: margin <= threshold_ratio,
        margin,
        delta_theta,
        threshold_ratio,
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONDITION_TOLERANCE * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl SystemTopology {
    /// `D1 -> lens(D_f, down) -> D2`.
    pub fn single_lens(m: f64, d_f: f64) -> Result<Self> {
        let (d1, d2) = solve_single_lens(m, d_f)?;
        Ok(Self {
            kind: TopologyKind::SingleLens,
            magnification: m,
            stages: vec![
                dispersion("D1", d1),
                lens("L1", Conversion::Down, d_f),
                dispersion("D2", d2),
            ],
        })
    }

    /// Single-lens system followed by an up-conversion field lens with chirp `M D_f`.
    pub fn field_lens(m: f64, d_f: f64) -> Result<Self> {
        let (d1, d2, d_r) = solve_field_lens(m, d_f)?;
        Ok(Self {
            kind: TopologyKind::FieldLens,
            magnification: m,
            stages: vec![
                dispersion("D1", d1),
                lens("L1", Conversion::Down, d_f),
                dispersion("D2", d2),
                lens("Lr", Conversion::Up, d_r),
            ],
        })
    }

    pub fn telescope(m: f64, d1: f64) -> Result<Self> {
        let t = solve_telescope(m, d1)?;
        Ok(Self {
            kind: TopologyKind::Telescope,
            magnification: m,
            stages: vec![
                dispersion("D1", t.d1),
                lens("L1", Conversion::Down, -t.d_f1),
                dispersion("D2", t.d2),
                lens("L2", Conversion::Up, t.d_f2),
                dispersion("D3", t.d3),
            ],
        })
    }

    /// Builds a topology whose largest |GDD| (signal path and pump chirps) equals `max_gdd`.
    pub fn with_max_dispersion(kind: TopologyKind, m: f64, max_gdd: f64) -> Result<Self> {
        if !(max_gdd > 0.0) || !max_gdd.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "maximum dispersion must be positive, got {max_gdd}"
            )));
        }
        let unit = Self::build(kind, m, 1.0)?;
        Self::build(kind, m, max_gdd / unit.max_dispersion())
    }

    /// `free` is `D_f` for single/field-lens systems and `D1` for the telescope.
    pub fn build(kind: TopologyKind, m: f64, free: f64) -> Result<Self> {
        match kind {
            TopologyKind::SingleLens => Self::single_lens(m, free),
            TopologyKind::FieldLens => Self::field_lens(m, free),
            TopologyKind::Telescope => Self::telescope(m, free),
        }
    }

    pub fn max_dispersion(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s.element {
                Element::Dispersion(d) => d.gdd.abs(),
                Element::Lens(l) => l.focal_gdd.abs(),
            })
            .fold(0.0, f64::max)
    }

    pub fn dispersion(&self, name: &str) -> Option<&DispersiveElement> {
        self.stages.iter().find_map(|s| match &s.element {
            Element::Dispersion(d) if s.name == name => Some(d),
            _ => None,
        })
    }

    pub fn dispersion_mut(&mut self, name: &str) -> Option<&mut DispersiveElement> {
        self.stages.iter_mut().find_map(|s| match &mut s.element {
            Element::Dispersion(d) if s.name == name => Some(d),
            _ => None,
        })
    }

    pub fn lenses(&self) -> impl Iterator<Item = (&str, &TimeLens)> {
        self.stages.iter().filter_map(|s| match &s.element {
            Element::Lens(l) => Some((s.name.as_str(), l)),
            _ => None,
        })
    }

    fn lens_named(&self, name: &str) -> Option<&TimeLens> {
        self.lenses().find(|(n, _)| *n == name).map(|(_, l)| l)
    }

    /// Sets `tod = ratio * gdd` on the named dispersive element.
    pub fn set_tod_ratio(&mut self, name: &str, ratio: f64) -> Result<()> {
        let d = self
            .dispersion_mut(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no dispersive element named {name}")))?;
        d.tod = ratio * d.gdd;
        Ok(())
    }

    pub fn set_transmission(&mut self, name: &str, transmission: f64) -> Result<()> {
        let d = self
            .dispersion_mut(name)
            .ok_or_else(|| Error::InvalidParameter(format!("no dispersive element named {name}")))?;
        d.transmission = transmission;
        d.validate()
    }

    /// Drives every lens with the same pump specification.
    pub fn with_pump(mut self, pump: PumpSpec) -> Self {
        for s in &mut self.stages {
            if let Element::Lens(l) = &mut s.element {
                l.pump = pump;
            }
        }
        self
    }

    /// Assigns carrier wavelengths along the chain starting from the signal carrier.
    pub fn with_carriers(mut self, signal_nm: f64, pump_nm: f64) -> Result<Self> {
        let mut current = signal_nm;
        for s in &mut self.stages {
            if let Element::Lens(l) = &mut s.element {
                *l = l.with_carriers(current, pump_nm)?;
                current = l.carriers.map(|c| c.output_nm).unwrap_or(current);
            }
        }
        Ok(self)
    }

    /// Carrier wavelength after each stage, starting with the input.
    pub fn carriers(&self, signal_nm: Option<f64>) -> Vec<Option<f64>> {
        let mut out = vec![signal_nm];
        let mut current = signal_nm;
        for s in &self.stages {
            if let Element::Lens(l) = &s.element {
                if let Some(c) = l.carriers {
                    current = Some(c.output_nm);
                }
            }
            out.push(current);
        }
        out
    }

    /// Checks the imaging conditions for this topology's kind.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::TopologyInvariant(msg));
        let m = self.magnification;
        for s in &self.stages {
            match &s.element {
                Element::Dispersion(d) => d.validate()?,
                Element::Lens(l) => l.validate()?,
            }
        }
        let need_d = |n: &str| {
            self.dispersion(n)
                .map(|d| d.gdd)
                .ok_or_else(|| Error::TopologyInvariant(format!("missing element {n}")))
        };
        let need_l = |n: &str| {
            self.lens_named(n)
                .copied()
                .ok_or_else(|| Error::TopologyInvariant(format!("missing lens {n}")))
        };
        match self.kind {
            TopologyKind::SingleLens | TopologyKind::FieldLens => {
                let (d1, d2) = (need_d("D1")?, need_d("D2")?);
                let l1 = need_l("L1")?;
                let d_f = l1.focal_gdd;
                if l1.direction != Conversion::Down {
                    return fail("imaging lens must down-convert".into());
                }
                let lhs = 1.0 / d1 + 1.0 / d2;
                if !rel_close(lhs, 1.0 / d_f) {
                    return fail(format!("1/D1 + 1/D2 = {lhs} but 1/D_f = {}", 1.0 / d_f));
                }
                if !rel_close(-d2 / d1, m) {
                    return fail(format!("-D2/D1 = {} but M = {m}", -d2 / d1));
                }
                if self.kind == TopologyKind::FieldLens {
                    let lr = need_l("Lr")?;
                    if lr.direction != Conversion::Up {
                        return fail("field lens must up-convert".into());
                    }
                    if !rel_close(lr.focal_gdd, m * d_f) {
                        return fail(format!("D_r = {} but M D_f = {}", lr.focal_gdd, m * d_f));
                    }
                }
            }
            TopologyKind::Telescope => {
                let (d1, d2, d3) = (need_d("D1")?, need_d("D2")?, need_d("D3")?);
                let (l1, l2) = (need_l("L1")?, need_l("L2")?);
                let d_f1 = -l1.focal_gdd;
                let d_f2 = l2.focal_gdd;
                if l1.direction != Conversion::Down || l2.direction != Conversion::Up {
                    return fail("telescope lenses must be down- then up-conversion".into());
                }
                if !rel_close(d1, -d_f1) {
                    return fail(format!("D1 = {d1} but -D_f1 = {}", -d_f1));
                }
                if !rel_close(d3, -d_f2) || !rel_close(d3, -m * d1) {
                    return fail(format!("D3 = {d3}, -D_f2 = {}, -M D1 = {}", -d_f2, -m * d1));
                }
                if !rel_close(d2, d1 + d3) {
                    return fail(format!("D2 = {d2} but D1 + D3 = {}", d1 + d3));
                }
            }
        }
        Ok(())
    }
}

fn dispersion(name: &str, gdd: f64) -> Stage {
    Stage {
        name: name.to_string(),
        element: Element::Dispersion(DispersiveElement::new(gdd)),
    }
}

fn lens(name: &str, direction: Conversion, focal_gdd: f64) -> Stage {
    Stage {
        name: name.to_string(),
        element: Element::Lens(TimeLens::new(direction, focal_gdd)),
    }
}

/// One recorded envelope of a [`StageTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// `a0` for the input, then `a1`, `a2`, ...
    pub label: String,
    /// Element that produced this envelope (`input` for `a0`).
    pub element: String,
    pub envelope: SampledEnvelope,
}

/// Every intermediate envelope of a system run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub entries: Vec<TraceEntry>,
}

impl StageTrace {
    pub fn input(&self) -> &SampledEnvelope {
        &self.entries[0].envelope
    }

    pub fn output(&self) -> &SampledEnvelope {
        &self.entries[self.entries.len() - 1].envelope
    }

    /// Envelope right after the named element.
    pub fn after(&self, element: &str) -> Option<&SampledEnvelope> {
        self.entries
            .iter()
            .find(|e| e.element == element)
            .map(|e| &e.envelope)
    }
}

/// Propagates `input` through every stage of `topology`.
pub fn run_system(input: &SampledEnvelope, topology: &SystemTopology) -> Result<StageTrace> {
    topology.validate()?;
    input.check_boundary("input")?;
    let grid = *input.grid();

    let lenses: Vec<&TimeLens> = topology.lenses().map(|(_, l)| l).collect();
    let pumps = par::map_collect(Exec::default(), &lenses, |l| l.synthesize_pump(grid));
    let mut pumps = pumps.into_iter();

    let mut entries = vec![TraceEntry {
        label: "a0".into(),
        element: "input".into(),
        envelope: input.clone(),
    }];
    let mut current = input.clone();
    for (k, stage) in topology.stages.iter().enumerate() {
        current = match &stage.element {
            Element::Dispersion(d) => disperse(&current, d, &stage.name)?,
            Element::Lens(l) => {
                let pump = pumps.next().expect("one pump per lens")?;
                let out = apply_time_lens(&current, l, pump.as_ref())?;
                out.check_boundary(&stage.name)?;
                out
            }
        };
        entries.push(TraceEntry {
            label: format!("a{}", k + 1),
            element: stage.name.clone(),
            envelope: current.clone(),
        });
    }
    let ratio = to_frequency(&current).edge_ratio();
    if ratio > LEAKAGE_LIMIT {
        return Err(Error::Aliasing {
            stage: "output".into(),
            ratio,
        });
    }
    Ok(StageTrace { entries })
}

/// The ideal image `(1/sqrt|M|) a0(t/M)` of an analytic input profile.
pub fn magnified_copy(
    grid: TimeGrid,
    m: f64,
    input: impl Fn(f64) -> num_complex::Complex64 + Sync + Send,
) -> SampledEnvelope {
    let scale = 1.0 / m.abs().sqrt();
    SampledEnvelope::from_fn(grid, move |t| input(t / m) * scale)
}

/// Width and bandwidth scale of an input waveform, used to size the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    /// Overall temporal extent (FWHM scale), ps.
    pub extent: f64,
    /// Angular spectral FWHM, rad/ps.
    pub bandwidth: f64,
}

impl Footprint {
    pub fn gaussian(t_fwhm: f64) -> Self {
        Self {
            extent: t_fwhm,
            bandwidth: 4.0 * LN_2 / t_fwhm,
        }
    }

    pub fn time_bin(tau: f64, delta_t: f64) -> Self {
        Self {
            extent: delta_t + tau,
            bandwidth: 4.0 * LN_2 / tau,
        }
    }
}

pub const DEFAULT_N_SAMPLES: usize = 1 << 15;
/// Required window and spectral span, in multiples of the estimated FWHM extents.
pub const DEFAULT_MARGIN: f64 = 8.0;
/// Window multiple of a stretched pump's FWHM that keeps its tails below the leakage limit.
const PUMP_TAIL_FACTOR: f64 = 8.0;

/// Grid sizing controls; unset fields are chosen automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub n_samples: Option<usize>,
    pub margin: f64,
    pub window: Option<f64>,
    pub dt: Option<f64>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            n_samples: None,
            margin: DEFAULT_MARGIN,
            window: None,
            dt: None,
        }
    }
}

/// Estimated largest temporal extent and bandwidth along the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEstimate {
    pub signal_extent: f64,
    pub pump_extent: f64,
    pub bandwidth: f64,
}

/// Propagates the input's (extent, bandwidth) box through the chain's
/// time-frequency ray matrix. A dispersion `D` maps `t -> t - D w`, a lens of
/// curvature `k` maps `w -> w + 2 k t`; third-order terms add
/// `|T| bw^2 / 2` to the extent. A seeded lens multiplies the signal by the
/// pump field, so its seed bandwidth enters as a new source at that plane.
pub fn estimate_footprint(input: Footprint, topology: &SystemTopology) -> GridEstimate {
    struct Source {
        extent: f64,
        bandwidth: f64,
        m: [f64; 4],
    }
    impl Source {
        fn extent(&self) -> f64 {
            self.m[0].abs() * self.extent + self.m[1].abs() * self.bandwidth
        }
        fn bandwidth(&self) -> f64 {
            self.m[2].abs() * self.extent + self.m[3].abs() * self.bandwidth
        }
    }
    let mut sources = vec![Source {
        extent: input.extent,
        bandwidth: input.bandwidth,
        m: [1.0, 0.0, 0.0, 1.0],
    }];
    let mut tod_spread = 0.0;
    let (mut max_ext, mut max_bw, mut pump_ext) = (input.extent, input.bandwidth, 0.0_f64);
    for s in &topology.stages {
        match &s.element {
            Element::Dispersion(el) => {
                let bw: f64 = sources.iter().map(Source::bandwidth).sum();
                tod_spread += 0.5 * el.tod.abs() * bw * bw;
                for src in &mut sources {
                    src.m[0] -= el.gdd * src.m[2];
                    src.m[1] -= el.gdd * src.m[3];
                }
            }
            Element::Lens(l) => {
                let k2 = 2.0 * l.ideal_curvature();
                for src in &mut sources {
                    src.m[2] += k2 * src.m[0];
                    src.m[3] += k2 * src.m[1];
                }
                if let PumpSpec::Seed { fwhm } = l.pump {
                    pump_ext = pump_ext.max(chirped_gaussian_fwhm(fwhm, l.focal_gdd));
                    sources.push(Source {
                        extent: 0.0,
                        bandwidth: 4.0 * LN_2 / fwhm,
                        m: [1.0, 0.0, 0.0, 1.0],
                    });
                }
            }
        }
        let ext: f64 = sources.iter().map(Source::extent).sum();
        let bw: f64 = sources.iter().map(Source::bandwidth).sum();
        max_ext = max_ext.max(ext + tod_spread);
        max_bw = max_bw.max(bw);
    }
    GridEstimate {
        signal_extent: max_ext,
        pump_extent: pump_ext,
        bandwidth: max_bw,
    }
}

/// Chooses a centred grid wide enough for every intermediate waveform.
///
/// `extra_extent` widens the signal extent, e.g. for an analyser delay.
pub fn plan_grid(
    input: Footprint,
    topology: &SystemTopology,
    extra_extent: f64,
    opts: &GridOptions,
) -> Result<TimeGrid> {
    if !(opts.margin >= 1.0) {
        return Err(Error::InvalidGrid(format!("margin must be >= 1, got {}", opts.margin)));
    }
    let est = estimate_footprint(input, topology);
    let needed_window = (opts.margin * (est.signal_extent + extra_extent.abs()))
        .max(PUMP_TAIL_FACTOR * est.pump_extent);
    let window = opts.window.unwrap_or(needed_window);
    let dt_max = 2.0 * PI / (opts.margin * est.bandwidth);

    if let Some(dt) = opts.dt {
        let n = opts
            .n_samples
            .unwrap_or_else(|| ((window / dt).ceil() as usize).next_power_of_two());
        return TimeGrid::centered(n, dt);
    }
    let mut n = opts.n_samples.unwrap_or(DEFAULT_N_SAMPLES);
    if window / n as f64 > dt_max {
        if opts.n_samples.is_some() {
            return Err(Error::InvalidGrid(format!(
                "{n} samples over {window:.1} ps gives dt = {:.4} ps; bandwidth needs dt <= {dt_max:.4} ps",
                window / n as f64
            )));
        }
        n = ((window / dt_max).ceil() as usize).next_power_of_two();
    }
    TimeGrid::centered(n, window / n as f64)
}
