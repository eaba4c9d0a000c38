//! The six subcommands. Each reads its block of the resolved configuration,
//! writes its artifacts under the output directory and returns a one-line
//! summary for stdout.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use gendim::dynamics::{
    csv_header, default_initial_condition, integrate_rk4, integrate_rk4_streaming, steps_for, transient_skip,
    unstable_fixed_point, FlowSpec, FnField, VectorField,
};
use gendim::mfa::{local_dimensions_at_samples, spectrum, DimensionSpectrum, NeighborIndex, RadiusGrid};
use gendim::poincare::{
    build_return_map, collect_crossings, roof_statistics, section_thickness, write_crossings_csv, ReturnMapData,
    SectionSpec,
};
use gendim::synth::{
    analytic_dq_cascade, analytic_dq_flow_formula, analytic_dq_singular, build_suspension_cloud, sample_cascade,
    sample_singular_density, CascadeSpec, Roof, SingularDensitySpec, SuspensionSampleSpec,
};
use gendim::unimodal::{classify, fit_unimodal, lyapunov_over_seeds, schwarzian_scan, write_map_csv, IntervalMap};
use gendim::{Error, PointCloud, Weights};
use serde_json::{json, Value};

use crate::config::{FlowConfig, FlowKind, GridConfig, InputFormat, IntegrationConfig, RunConfig};
use crate::report::{null, sha256_hex, Case, Check, CmdResult, Outputs, TestReport};

/// Tabular output format of the primary artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Outputs,
    pub format: Format,
}

/// Grid points of the written map table.
const MAP_TABLE_POINTS: usize = 501;
const SCHWARZIAN_POINTS: usize = 200;
const LYAPUNOV_BURN_IN: usize = 1000;
/// Section clouds are transversal samples of distinct returns.
const SECTION_THEILER: usize = 1;

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k)
}

/// `(-y, x, 0)`.
fn circle_field() -> FnField<impl Fn(&[f64], &mut [f64]) + Sync> {
    FnField::new(3, |x: &[f64], out: &mut [f64]| {
        out[0] = -x[1];
        out[1] = x[0];
        out[2] = 0.0;
    })
}

struct Flow {
    spec: Option<FlowSpec>,
    field: Box<dyn VectorField>,
    x0: [f64; 3],
}

impl Flow {
    fn new(cfg: &FlowConfig, seed: u64) -> CmdResult<Self> {
        let spec = cfg.flow_spec()?;
        let (field, default_x0): (Box<dyn VectorField>, [f64; 3]) = match (&spec, cfg.field) {
            (Some(s), _) => (Box::new(s.resolve()?), default_initial_condition(s, seed)?),
            (None, FlowKind::Circle) => (Box::new(circle_field()), [1.0, 0.0, 0.0]),
            (None, _) => unreachable!("only the circle has no core spec"),
        };
        let x0 = cfg.initial.unwrap_or(default_x0);
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()).into());
        }
        Ok(Self { spec, field, x0 })
    }

    fn describe(&self, cfg: &FlowConfig) -> Value {
        json!({
            "field": cfg.field,
            "params": self.spec.as_ref().map(|s| json!(s.params)).unwrap_or(null()),
            "initial": self.x0,
        })
    }
}

// ---- simulate ----

pub fn simulate(ctx: &Ctx) -> CmdResult<String> {
    let cfg = &ctx.cfg.simulate;
    cfg.integration.validate()?;
    let flow = Flow::new(&cfg.flow, ctx.cfg.seed)?;
    let IntegrationConfig { h, duration, transient } = cfg.integration;
    let n = steps_for(transient + duration, h);
    let skip = steps_for(transient, h);
    let mut rows = 0usize;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut last = flow.x0.to_vec();
    ctx.out.write_csv("trajectory.csv", |w| {
        writeln!(w, "{}", csv_header(3))?;
        last = integrate_rk4_streaming(flow.field.as_ref(), &flow.x0, h, n, |k, x| {
            if k >= skip {
                gendim::dynamics::write_csv_row(&mut *w, k as f64 * h, x)?;
                rows += 1;
                for d in 0..3 {
                    lo[d] = lo[d].min(x[d]);
                    hi[d] = hi[d].max(x[d]);
                }
            }
            Ok(())
        })?;
        Ok(())
    })?;
    let fixed_point = match &flow.spec {
        Some(s) if s.field_id.is_rossler() => Some(unstable_fixed_point(s)?),
        _ => None,
    };
    let result = json!({
        "flow": flow.describe(&cfg.flow),
        "h": h,
        "transient": transient,
        "duration": duration,
        "steps": n,
        "rows": rows,
        "bounding_box": { "min": lo, "max": hi },
        "final_state": last,
        "fixed_point": fixed_point,
    });
    ctx.out.write_json("simulate.json", &result)?;
    Ok(format!(
        "simulate: {rows} rows written to {}",
        ctx.out.path("trajectory.csv").display()
    ))
}

// ---- section ----

fn run_section(flow: &Flow, integ: &IntegrationConfig, h: f64, sec: SectionSpec) -> CmdResult<ReturnMapData> {
    let n = steps_for(integ.transient + integ.duration, h);
    let skip = steps_for(integ.transient, h);
    let crossings = collect_crossings(flow.field.as_ref(), &flow.x0, h, n, skip, sec)?;
    Ok(build_return_map(crossings, h)?)
}

fn section_summary(data: &ReturnMapData) -> CmdResult<Value> {
    let roof = roof_statistics(data)?;
    Ok(json!({
        "h": data.h_used,
        "crossings": data.crossings.len(),
        "pairs": data.pairs.len(),
        "roof": roof,
        "kappa": data.kappa(),
        "thickness": section_thickness(data)?,
    }))
}

/// `n` evenly spaced interior starting points.
fn seed_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
}

pub fn section(ctx: &Ctx) -> CmdResult<String> {
    let cfg = &ctx.cfg.section;
    cfg.integration.validate()?;
    let sec = cfg.surface.spec();
    if sec.coordinate_index >= 3 {
        return Err(Error::Config(format!(
            "surface coordinate_index {} out of range",
            sec.coordinate_index
        ))
        .into());
    }
    let flow = Flow::new(&cfg.flow, ctx.cfg.seed)?;
    let data = run_section(&flow, &cfg.integration, cfg.integration.h, sec)?;
    ctx.out.write_csv("return_map.csv", |w| data.write_csv(w))?;
    ctx.out
        .write_csv("crossings.csv", |w| write_crossings_csv(&data.crossings, w))?;
    let mut result = json!({
        "flow": flow.describe(&cfg.flow),
        "section": section_summary(&data)?,
    });
    let mut line = format!(
        "section: {} crossings, roof min {:.6}",
        data.crossings.len(),
        roof_statistics(&data)?.min
    );

    if let Some(h2) = cfg.h_compare {
        if !(h2 > 0.0 && h2.is_finite()) {
            return Err(Error::Config(format!("h_compare = {h2} must be positive")).into());
        }
        let other = run_section(&flow, &cfg.integration, h2, sec)?;
        ctx.out.write_csv("return_map_compare.csv", |w| other.write_csv(w))?;
        let ratio = section_thickness(&other)? / section_thickness(&data)?;
        result["compare"] = section_summary(&other)?;
        result["thickness_ratio"] = json!(ratio);
        line += &format!(", thickness ratio {ratio:.4}");
    }

    if cfg.fit_map {
        if cfg.lyapunov_seeds == 0 || cfg.lyapunov_iterates == 0 {
            return Err(Error::Config("lyapunov_seeds and lyapunov_iterates must be positive".into()).into());
        }
        let map = fit_unimodal(&data.coordinate_pairs(0))?;
        let (lo, hi) = map.domain();
        let lyap = lyapunov_over_seeds(
            &map,
            &seed_points(lo, hi, cfg.lyapunov_seeds),
            cfg.lyapunov_iterates,
            LYAPUNOV_BURN_IN,
        )?;
        let scan = schwarzian_scan(&map, SCHWARZIAN_POINTS)?;
        let class = classify(&map, &lyap);
        ctx.out
            .write_csv("map.csv", |w| write_map_csv(&map, MAP_TABLE_POINTS, w))?;
        line += &format!(
            ", lambda {:.4}, S<0 on {:.1}%, {:?}",
            lyap.lambda,
            100.0 * scan.negative_fraction,
            class.case
        );
        result["map"] = json!({
            "domain": [lo, hi],
            "critical_point": map.critical_point(),
            "fit_residual": map.fit_residual(),
            "lyapunov": lyap,
            "schwarzian_negative_fraction": scan.negative_fraction,
            "schwarzian_points": scan.grid.len(),
            "classification": class,
        });
    }
    ctx.out.write_json("section.json", &result)?;
    Ok(line)
}

// ---- dq ----

/// Coordinate names of a CSV cloud (header minus any `weight` column).
fn csv_coordinate_names(text: &str) -> CmdResult<Vec<String>> {
    let header = BufReader::new(text.as_bytes())
        .lines()
        .map_while(std::result::Result::ok)
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .ok_or_else(|| Error::Validation("csv input has no header".into()))?;
    Ok(header
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| s != "weight")
        .collect())
}

fn subsample(cloud: &PointCloud, stride: usize) -> CmdResult<PointCloud> {
    if stride == 1 {
        return Ok(cloud.clone());
    }
    let keep: Vec<usize> = (0..cloud.len()).step_by(stride).collect();
    let coords: Vec<f64> = keep.iter().flat_map(|&i| cloud.point(i).to_vec()).collect();
    Ok(match cloud.weights() {
        Weights::Uniform => PointCloud::uniform(cloud.dim(), coords, cloud.label())?,
        Weights::Explicit(w) => {
            PointCloud::with_raw_weights(cloud.dim(), coords, keep.iter().map(|&i| w[i]).collect(), cloud.label())?
        }
    })
}

fn load_cloud(path: &Path, format: InputFormat, columns: Option<&[String]>) -> CmdResult<(PointCloud, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read input {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let json = match format {
        InputFormat::Json => true,
        InputFormat::Csv => false,
        InputFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")),
    };
    let label = path.display().to_string();
    let cloud = if json {
        if columns.is_some() {
            return Err(Error::Config("`columns` applies to CSV input only".into()).into());
        }
        PointCloud::read_json(bytes.as_slice())?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Validation("csv input is not UTF-8".into()))?;
        let cloud = PointCloud::read_csv(text.as_bytes(), label)?;
        match columns {
            None => cloud,
            Some(cols) => {
                let names = csv_coordinate_names(&text)?;
                let axes = cols
                    .iter()
                    .map(|c| {
                        names
                            .iter()
                            .position(|n| n == c)
                            .ok_or_else(|| Error::Config(format!("column `{c}` not in {names:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                cloud.project(&axes)?
            }
        }
    };
    Ok((cloud, digest))
}

fn dq_summary(sp: &DimensionSpectrum) -> String {
    sp.entries
        .iter()
        .map(|e| match e.dq() {
            Some(d) => format!("D{}={d:.4}", e.q),
            None => format!("D{}=n/a", e.q),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn dq(ctx: &mut Ctx) -> CmdResult<String> {
    let cfg = ctx.cfg.dq.clone();
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::MissingParameter("dq.input".into()))?;
    if cfg.stride == 0 {
        return Err(Error::Config("dq.stride must be at least 1".into()).into());
    }
    if cfg.q.is_empty() || cfg.q.iter().any(|q| !q.is_finite()) {
        return Err(Error::Config("dq.q must be a nonempty list of finite orders".into()).into());
    }
    let (cloud, digest) = load_cloud(input, cfg.input_format, cfg.columns.as_deref())?;
    ctx.out.provenance.input_sha256 = Some(digest);
    let cloud = subsample(&cloud, cfg.stride)?;
    let index = NeighborIndex::build(&cloud);
    let grid = cfg.grid.build(&cloud, &index, cfg.theiler)?;
    let sp = spectrum(&index, &cfg.q, &grid, cfg.theiler)?;
    if sp.entries.iter().all(|e| e.fit.is_none()) {
        let why = sp
            .entries
            .iter()
            .filter_map(|e| e.failure.clone())
            .next()
            .unwrap_or_default();
        return Err(Error::EstimationFailure(format!("no order could be fitted: {why}")).into());
    }
    match ctx.format {
        Format::Csv => {
            ctx.out.write_csv("spectrum.csv", |w| sp.write_csv(w))?;
        }
        Format::Json => {
            let result = json!({
                "points": cloud.len(),
                "dim": cloud.dim(),
                "grid": grid.r_values(),
                "entries": sp.entries,
                "monotonicity_violation": sp.monotonicity_violation(),
            });
            ctx.out.write_json("spectrum.json", &result)?;
        }
    }
    ctx.out.write_csv("curves.csv", |w| sp.write_curves_csv(w))?;
    Ok(format!("dq: {} points, {}", cloud.len(), dq_summary(&sp)))
}

// ---- property tests ----

fn test_spectrum(cloud: &PointCloud, qs: &[f64], grid: &GridConfig, theiler: usize) -> CmdResult<DimensionSpectrum> {
    let index = NeighborIndex::build(cloud);
    let grid = grid.build(cloud, &index, theiler)?;
    Ok(spectrum(&index, qs, &grid, theiler)?)
}

fn estimate(sp: &DimensionSpectrum, q: f64) -> f64 {
    sp.dq(q).unwrap_or(f64::NAN)
}

fn spectrum_details(sp: &DimensionSpectrum) -> Value {
    json!(sp
        .entries
        .iter()
        .map(|e| json!({ "q": e.q, "fit": e.fit, "failure": e.failure, "dropped_radii": e.dropped_radii }))
        .collect::<Vec<_>>())
}

fn check_orders(
    qs: &[f64],
    tolerance: impl Fn(f64) -> f64,
    measured: impl Fn(f64) -> f64,
    expected: impl Fn(f64) -> f64,
) -> Vec<Check> {
    qs.iter()
        .map(|&q| Check::within(format!("D{q}"), measured(q), expected(q), tolerance(q)))
        .collect()
}

fn finish_test(ctx: &Ctx, name: &str, report: TestReport) -> CmdResult<String> {
    match ctx.format {
        Format::Json => {
            ctx.out.write_json(&format!("{name}.json"), &report)?;
        }
        Format::Csv => {
            ctx.out.write_csv(&format!("{name}.csv"), |w| {
                writeln!(w, "case,check,value,expected,tolerance,margin,pass")?;
                for c in &report.cases {
                    for k in &c.checks {
                        writeln!(
                            w,
                            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                            c.name, k.name, k.value, k.expected, k.tolerance, k.margin, k.pass
                        )?;
                    }
                }
                Ok(())
            })?;
        }
    }
    let summary = report.summary();
    println!("{summary}");
    report.into_result()?;
    Ok(format!("{name}: all cases pass"))
}

fn validate_qs(qs: &[f64], what: &str) -> CmdResult {
    if qs.is_empty() || qs.iter().any(|q| !q.is_finite()) {
        return Err(Error::Config(format!("{what} must be a nonempty list of finite orders")).into());
    }
    Ok(())
}

pub fn suspension_test(ctx: &Ctx) -> CmdResult<String> {
    let cfg = &ctx.cfg.suspension_test;
    validate_qs(&cfg.q, "suspension_test.q")?;
    if cfg.base_factor == 0 {
        return Err(Error::Config("suspension_test.base_factor must be positive".into()).into());
    }
    let seed = ctx.cfg.seed;
    let suspend = |base: &PointCloud, roof: Roof, k: u64| -> CmdResult<DimensionSpectrum> {
        let cloud = build_suspension_cloud(&SuspensionSampleSpec {
            base_cloud: base.clone(),
            roof,
            n_samples: cfg.n_samples,
            seed: sub_seed(seed, k),
        })?;
        test_spectrum(&cloud, &cfg.q, &cfg.grid, cfg.theiler)
    };
    let tol = |_| cfg.tolerance;

    // a point base suspends to a segment of dimension one
    let point = PointCloud::uniform(1, vec![0.0], "point")?;
    let segment = suspend(&point, Roof::Constant(1.0), 1)?;
    let case_point = Case::new(
        "point_base_segment",
        check_orders(&cfg.q, tol, |q| estimate(&segment, q), |_| 1.0),
        spectrum_details(&segment),
    );

    let cascade = CascadeSpec {
        p: cfg.p,
        depth: cfg.depth,
        n_samples: cfg.base_factor * cfg.n_samples,
        seed: sub_seed(seed, 2),
    };
    cascade.validate().map_err(|e| Error::Config(e.to_string()))?;
    let base = sample_cascade(&cascade)?;
    let unit = suspend(&base, Roof::Constant(1.0), 3)?;
    let case_unit = Case::new(
        "cascade_unit_roof",
        check_orders(
            &cfg.q,
            tol,
            |q| estimate(&unit, q),
            |q| analytic_dq_cascade(cfg.p, q) + 1.0,
        ),
        spectrum_details(&unit),
    );
    let roof = Roof::from_fn(&base, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).sin());
    let varying = suspend(&base, roof, 3)?;
    let case_varying = Case::new(
        "cascade_varying_roof",
        check_orders(&cfg.q, tol, |q| estimate(&varying, q), |q| estimate(&unit, q)),
        spectrum_details(&varying),
    );
    finish_test(
        ctx,
        "suspension_test",
        TestReport::new(vec![case_point, case_unit, case_varying]),
    )
}

pub fn singular_test(ctx: &Ctx) -> CmdResult<String> {
    let cfg = &ctx.cfg.singular_test;
    validate_qs(&cfg.q, "singular_test.q")?;
    validate_qs(&cfg.flow_q, "singular_test.flow_q")?;
    let seed = ctx.cfg.seed;
    let spec = cfg.density_spec()?;
    let sample = |spec: &SingularDensitySpec, n: usize, k: u64| sample_singular_density(spec, n, sub_seed(seed, k));

    let cloud = sample(&spec, cfg.n_samples, 1)?;
    let sp = test_spectrum(&cloud, &cfg.q, &cfg.grid, cfg.theiler)?;
    let case_base = Case::new(
        "singular_base",
        check_orders(
            &cfg.q,
            |q| {
                if q < 0.0 {
                    cfg.negative_q_tolerance
                } else {
                    cfg.tolerance
                }
            },
            |q| estimate(&sp, q),
            |q| analytic_dq_singular(&spec, q),
        ),
        spectrum_details(&sp),
    );

    let mut plain = SingularDensitySpec::uniform(cfg.interval[0], cfg.interval[1]);
    plain.psi0 = cfg.psi0;
    plain.validate().map_err(|e| Error::Config(e.to_string()))?;
    let cloud = sample(&plain, cfg.n_samples, 2)?;
    let sp = test_spectrum(&cloud, &cfg.q, &cfg.grid, cfg.theiler)?;
    let case_plain = Case::new(
        "uniform_psi0_only",
        check_orders(&cfg.q, |_| cfg.uniform_tolerance, |q| estimate(&sp, q), |_| 1.0),
        spectrum_details(&sp),
    );

    let base = sample(&spec, 10 * cfg.flow_n_samples, 3)?;
    let cloud = build_suspension_cloud(&SuspensionSampleSpec {
        base_cloud: base,
        roof: Roof::Constant(1.0),
        n_samples: cfg.flow_n_samples,
        seed: sub_seed(seed, 4),
    })?;
    let sp = test_spectrum(&cloud, &cfg.flow_q, &cfg.flow_grid, cfg.theiler)?;
    let alpha = spec.alpha();
    let case_flow = Case::new(
        "flow_level",
        check_orders(
            &cfg.flow_q,
            |q| {
                if q == 0.0 {
                    cfg.flow_q0_tolerance
                } else {
                    cfg.flow_tolerance
                }
            },
            |q| estimate(&sp, q),
            |q| {
                if q == 0.0 {
                    2.0
                } else {
                    analytic_dq_flow_formula(alpha, q)
                }
            },
        ),
        spectrum_details(&sp),
    );
    finish_test(
        ctx,
        "singular_test",
        TestReport::new(vec![case_base, case_plain, case_flow]),
    )
}

pub fn lorenz_check(ctx: &Ctx) -> CmdResult<String> {
    let cfg = &ctx.cfg.lorenz_check;
    cfg.integration.validate()?;
    if cfg.stride == 0 || cfg.n_centers == 0 {
        return Err(Error::Config("lorenz_check.stride and n_centers must be positive".into()).into());
    }
    if cfg.section_duration.is_nan() || cfg.section_duration <= 0.0 {
        return Err(Error::Config("lorenz_check.section_duration must be positive".into()).into());
    }
    let flow_cfg = FlowConfig {
        field: FlowKind::LorenzClassical,
        params: cfg.params.clone(),
        initial: None,
    };
    let flow = Flow::new(&flow_cfg, ctx.cfg.seed)?;
    let IntegrationConfig { h, duration, transient } = cfg.integration;

    let traj = integrate_rk4(flow.field.as_ref(), &flow.x0, h, steps_for(transient + duration, h))?;
    let cloud = transient_skip(&traj, transient)?.to_cloud(cfg.stride)?;
    let index = NeighborIndex::build(&cloud);
    let grid = cfg.grid.build(&cloud, &index, cfg.theiler)?;
    let qs = [1.0, 2.0, 4.0];
    let flow_sp = spectrum(&index, &qs, &grid, cfg.theiler)?;

    let n_centers = cfg.n_centers.min(cloud.len());
    let step = cloud.len() / n_centers;
    let centers: Vec<usize> = (0..n_centers).map(|k| k * step).collect();
    let local = local_dimensions_at_samples(&index, &centers, &grid, cfg.theiler);
    let estimates: Vec<f64> = local.iter().filter_map(|r| r.as_ref().ok().map(|s| s.d_est)).collect();
    let failed = local.len() - estimates.len();
    let mean = if estimates.is_empty() {
        f64::NAN
    } else {
        estimates.iter().sum::<f64>() / estimates.len() as f64
    };
    // centres without an estimate count as low
    let low = estimates.iter().filter(|d| **d < cfg.local_low_threshold).count() + failed;
    let low_fraction = low as f64 / local.len() as f64;

    let sec = cfg.surface.spec();
    let crossings = collect_crossings(
        flow.field.as_ref(),
        &flow.x0,
        h,
        steps_for(transient + cfg.section_duration, h),
        steps_for(transient, h),
        sec,
    )?;
    if crossings.is_empty() {
        return Err(Error::InsufficientData("no section crossings".into()).into());
    }
    let dim = crossings[0].point.len();
    let pts: Vec<f64> = crossings.iter().flat_map(|c| c.point.clone()).collect();
    let section_cloud = PointCloud::uniform(dim, pts, "section")?;
    let section_sp = spectrum(
        &NeighborIndex::build(&section_cloud),
        &[1.0],
        &RadiusGrid::for_cloud(&section_cloud)?,
        SECTION_THEILER,
    )?;
    let d1_diff = estimate(&flow_sp, 1.0) - estimate(&section_sp, 1.0);

    let local_case = Case::new(
        "local_dimension",
        vec![
            Check::at_least("mean", mean, cfg.local_min_mean),
            Check::at_most(
                format!("fraction below {}", cfg.local_low_threshold),
                low_fraction,
                cfg.local_low_max_fraction,
            ),
        ],
        json!({ "centers": local.len(), "failed": failed }),
    );
    let dq_case = Case::new(
        "flow_spectrum",
        vec![
            Check::at_least("D2", estimate(&flow_sp, 2.0), cfg.dq_min),
            Check::at_least("D4", estimate(&flow_sp, 4.0), cfg.dq_min),
        ],
        spectrum_details(&flow_sp),
    );
    let d1_case = Case::new(
        "information_dimension_drop",
        vec![Check::within(
            "D1 flow - D1 section",
            d1_diff,
            1.0,
            cfg.d1_difference_tolerance,
        )],
        json!({ "crossings": crossings.len(), "section": spectrum_details(&section_sp) }),
    );
    finish_test(ctx, "lorenz_check", TestReport::new(vec![local_case, dq_case, d1_case]))
}
