//! Pipeline behind the command-line tool: build, verify, export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::catalog::{make_oracle, FunctionOracle, OrderBound};
use crate::config::{Config, Endpoint, FaultKind, FaultSpec, Mode, ZeroSetSpec};
use crate::error::Result;
use crate::extension::{
    build_complement, build_cozero, BuildOptions, Construction, Role, SmoothEvaluator, UnitOracle,
    ZeroSet,
};
use crate::open_set::{Location, OpenSet};
use crate::verify::{self, ReportEntry, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Samples on `[lo, hi]` for the `a·b = 0` part of the complement check.
pub const COMPLEMENT_PRODUCT_SAMPLES: usize = 500;
/// Cells of `[lo, hi]` each of which must meet `coz(a + b)`.
pub const COMPLEMENT_CELLS: usize = 100;
/// Interior samples used by the first-derivative consistency check.
pub const FD_CONSISTENCY_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Include `generated_at` in the report.
    pub timestamp: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timestamp: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub in_u: bool,
    #[serde(rename = "L")]
    pub length: f64,
    pub case: Option<String>,
    pub p: Option<usize>,
    pub saturated_at: Option<usize>,
    pub truncation_error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub role: String,
    pub function: String,
    pub k: String,
    pub max_depth: usize,
    pub max_order: usize,
    pub fault_injection: Option<String>,
    pub components: usize,
    pub component_list: Vec<ComponentReport>,
    pub truncation_error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub mode: Mode,
    pub status: Status,
    pub summary: Option<BuildSummary>,
    pub warnings: Vec<String>,
    pub checks: Vec<ReportEntry>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().all(ReportEntry::passed) {
            EXIT_OK
        } else {
            EXIT_FAIL
        }
    }
}

/// Everything built for one run.
pub struct Artifacts {
    /// The multiplier of the main construction.
    pub g: SmoothEvaluator,
    /// `h`, or the cozero / complement witness.
    pub h: SmoothEvaluator,
    pub report: Report,
}

fn summarize(c: &Construction, role: Role, fault: Option<&FaultSpec>) -> BuildSummary {
    let list: Vec<ComponentReport> = c
        .summary()
        .into_iter()
        .map(|s| ComponentReport {
            lo: Endpoint(s.lo),
            hi: Endpoint(s.hi),
            in_u: s.in_u,
            length: s.length,
            case: s.case.map(|c| c.to_string()),
            p: s.p,
            saturated_at: s.saturated_at,
            truncation_error_bound: s.truncation_error_bound,
        })
        .collect();
    BuildSummary {
        role: role.as_str().into(),
        function: c.f.label(),
        k: c.k().to_string(),
        max_depth: c.options.max_depth,
        max_order: c.options.max_order,
        fault_injection: fault.map(|f| format!("{:?}({})", f.kind(), f.magnitude())),
        components: list.len(),
        truncation_error_bound: list
            .iter()
            .map(|c| c.truncation_error_bound)
            .fold(0.0, f64::max),
        component_list: list,
    }
}

/// Returns the `(g, h)` pair for a construction with an optional fault applied.
fn evaluators(
    c: Construction,
    role: Role,
    fault: Option<&FaultSpec>,
) -> (SmoothEvaluator, SmoothEvaluator) {
    match fault.map(|f| (f.kind(), f.magnitude())) {
        None => {
            let c = Arc::new(c);
            (
                SmoothEvaluator::new(Role::G, c.clone()),
                SmoothEvaluator::new(role, c),
            )
        }
        Some((FaultKind::KnotPerturb, m)) => {
            let perturbed = Arc::new(c.with_perturbed_knots(m));
            (
                SmoothEvaluator::new(Role::G, Arc::new(c)),
                SmoothEvaluator::new(role, perturbed),
            )
        }
        Some((FaultKind::DeflateConstants, m)) => {
            let c = Arc::new(c.deflated(m));
            (
                SmoothEvaluator::new(Role::G, c.clone()),
                SmoothEvaluator::new(role, c),
            )
        }
    }
}

/// The construction checks shared by every mode.
pub fn construction_checks(
    g: &SmoothEvaluator,
    h: &SmoothEvaluator,
    config: &Config,
) -> Vec<ReportEntry> {
    let orders = config.checks.orders;
    let depths = &config.checks.depths;
    let mut out = vec![
        verify::check_knot_values(g),
        verify::check_extension_identity(g, h, config.checks.samples),
        verify::check_product_bound(h),
    ];
    out.extend((1..=orders).map(|r| verify::check_quotient_bound(h, r)));
    out.extend((1..=orders).map(|r| verify::check_boundary_vanishing(g, r, depths)));
    out.extend((1..=orders).map(|r| verify::check_boundary_vanishing(h, r, depths)));
    out.push(verify::check_fd_consistency(g, FD_CONSISTENCY_SAMPLES));
    out.push(verify::check_fd_consistency(h, FD_CONSISTENCY_SAMPLES));
    out
}

/// `ℝ ∖ U` as closed intervals.
pub fn closed_complement(u: &OpenSet) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for c in u.components() {
        if cursor < c.lo || (cursor == c.lo && cursor.is_finite()) {
            out.push((cursor, c.lo));
        }
        cursor = c.hi;
    }
    if cursor < f64::INFINITY {
        out.push((cursor, f64::INFINITY));
    }
    out
}

/// `[min boundary - 1, max boundary + 1]`, or `[-1, 1]` without finite boundary points.
fn window_around(sets: &[&OpenSet]) -> (f64, f64) {
    let pts: Vec<f64> = sets.iter().flat_map(|s| s.boundary()).collect();
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo - 1.0, hi + 1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Builds, verifies and returns everything for `config`. Writes no files.
pub fn execute(config: &Config, opts: &RunOptions) -> Result<Artifacts> {
    let u = config.open_set()?;
    let build = BuildOptions {
        max_depth: config.max_depth,
        max_order: config.max_order,
    };
    let fault = config.fault_injection.as_ref();
    let ws = config.checks.witness_samples;
    let mut warnings = Vec::new();

    let (g, h, checks, summary) = match config.mode {
        Mode::Extend => {
            let oracle: Arc<dyn FunctionOracle> = Arc::new(make_oracle(
                config.function.id(),
                &config.function.params(),
                u.clone(),
            )?);
            let c = Construction::build(&u, oracle, config.k.0, build)?;
            let summary = summarize(&c, Role::H, fault);
            let (g, h) = evaluators(c, Role::H, fault);
            let checks = construction_checks(&g, &h, config);
            (g, h, checks, Some(summary))
        }
        Mode::Cozero => {
            let c = Construction::build(&u, Arc::new(UnitOracle), OrderBound::Infinite, build)?;
            let summary = summarize(&c, Role::Cozero, fault);
            let (g, a) = evaluators(c, Role::Cozero, fault);
            let mut checks = vec![verify::check_cozero(
                &a,
                &verify::sample_open_set(&u, ws),
                &verify::sample_complement(&u, ws),
            )];
            checks.extend(construction_checks(&g, &a, config));
            (g, a, checks, Some(summary))
        }
        Mode::Complement => {
            let b = build_cozero(&u, build)?;
            let bf = |x: f64| b.eval(x);
            let zero_set = match &config.zero_set {
                None => ZeroSet::Declared(closed_complement(&u)),
                Some(ZeroSetSpec::Declared(list)) => {
                    ZeroSet::Declared(list.iter().map(|(a, b)| (a.0, b.0)).collect())
                }
                Some(ZeroSetSpec::Detect { detect }) => ZeroSet::Detected {
                    lo: detect.lo,
                    hi: detect.hi,
                    points: detect.points,
                },
            };
            let comp = build_complement(&bf, &zero_set, build)?;
            warnings.extend(comp.warning.clone());
            let mut checks = vec![verify::check_cozero(
                &b,
                &verify::sample_open_set(&u, ws),
                &verify::sample_complement(&u, ws),
            )];
            let (g, a, summary) = match comp.a.construction() {
                Some(c) => {
                    let summary = summarize(c, Role::Cozero, fault);
                    let (g, a) = evaluators(c.as_ref().clone(), Role::Cozero, fault);
                    (g, a, Some(summary))
                }
                None => (SmoothEvaluator::zero(), SmoothEvaluator::zero(), None),
            };
            let (lo, hi) = window_around(&[&u, &comp.interior]);
            checks.push(verify::check_complement(
                &a,
                &bf,
                lo,
                hi,
                COMPLEMENT_PRODUCT_SAMPLES,
                COMPLEMENT_CELLS,
            ));
            if a.role() != Role::Zero {
                checks.push(verify::check_cozero(
                    &a,
                    &verify::sample_open_set(&comp.interior, ws),
                    &verify::sample_complement(&comp.interior, ws),
                ));
                checks.extend(construction_checks(&g, &a, config));
            }
            (g, a, checks, summary)
        }
    };
    let status = if checks.iter().all(ReportEntry::passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    let report = Report {
        generated_at: opts
            .timestamp
            .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        mode: config.mode,
        status,
        summary,
        warnings,
        checks,
    };
    Ok(Artifacts { g, h, report })
}

#[derive(Debug, Serialize)]
struct CsvRow {
    x: f64,
    #[serde(rename = "in_V")]
    in_v: u8,
    g: f64,
    h: f64,
    f: Option<f64>,
    component_index: Option<usize>,
    knot_index: Option<usize>,
}

/// Abscissae for the exported curves: a uniform grid over each component's
/// window plus every knot and three points per segment, so the geometric
/// approach to each boundary point is visible.
pub fn sample_grid(c: &Construction) -> Vec<f64> {
    const UNIFORM: usize = 64;
    const CSV_DEPTH: usize = 48;
    let mut xs = c.v.boundary();
    for comp in &c.components {
        let ladder = &comp.ladder;
        let (lo, hi) = match (
            ladder.interval.lo.is_finite(),
            ladder.interval.hi.is_finite(),
        ) {
            (true, true) => (ladder.interval.lo, ladder.interval.hi),
            (false, true) => (ladder.interval.hi - 4.0, ladder.interval.hi),
            (true, false) => (ladder.interval.lo, ladder.interval.lo + 4.0),
            (false, false) => (-2.0, 2.0),
        };
        xs.extend((1..UNIFORM).map(|j| lo + (hi - lo) * j as f64 / UNIFORM as f64));
        let depth = ladder.max_depth.min(CSV_DEPTH);
        for side in ladder.sides() {
            for n in 1..=depth {
                let k0 = ladder.knot_unchecked(side, n);
                xs.push(k0);
                if n < depth {
                    let k1 = ladder.knot_unchecked(side, n + 1);
                    xs.extend([0.25, 0.5, 0.75].map(|t| k0 + t * (k1 - k0)));
                }
            }
        }
    }
    xs.retain(|x| x.is_finite());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Writes `x, in_V, g, h, f, component_index, knot_index` rows.
pub fn write_samples_csv(path: &Path, g: &SmoothEvaluator, h: &SmoothEvaluator) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let construction = h.construction().or(g.construction());
    let xs = match construction {
        Some(c) => sample_grid(c),
        None => (0..=64).map(|j| -1.0 + 2.0 * j as f64 / 64.0).collect(),
    };
    for x in xs {
        let loc = construction.map_or(Location::Outside, |c| c.locate(x));
        let (component, knot) = match loc {
            Location::Outside => (None, None),
            Location::Whole { component } | Location::Constant { component, .. } => {
                (Some(component), None)
            }
            Location::Segment {
                component, index, ..
            } => (Some(component), Some(index)),
            Location::Truncated { component, .. } => (
                Some(component),
                construction.map(|c| c.ladder(component).max_depth),
            ),
        };
        w.serialize(CsvRow {
            x,
            in_v: u8::from(component.is_some()),
            g: g.eval(x),
            h: h.eval(x),
            f: h.f_value(x),
            component_index: component,
            knot_index: knot,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Runs `config` end to end, writing the configured outputs. Returns the report
/// and the process exit code (0 all pass, 2 any failure).
pub fn run(config: &Config, opts: &RunOptions) -> Result<(Report, i32)> {
    let artifacts = execute(config, opts)?;
    if let Some(path) = &config.outputs.samples_csv {
        write_samples_csv(path, &artifacts.g, &artifacts.h)?;
    }
    if let Some(path) = &config.outputs.report_json {
        write_report(path, &artifacts.report)?;
    }
    let code = artifacts.report.exit_code();
    Ok((artifacts.report, code))
}
