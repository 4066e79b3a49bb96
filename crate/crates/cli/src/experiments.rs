//! The named experiments. Each returns its files in memory; nothing here
//! touches the file system.

use std::collections::BTreeMap;
use std::sync::Arc;

use fraclobc_core::barrier::{
    build_barrier, f_of_beta, f_zero, supersolution_report, BarrierReport, ExponentConfig, Side,
};
use fraclobc_core::evolve::{
    eigen_for_solver, lobc_threshold_estimate, mass, ode_blowup, run_with, sine_bump,
    snapshot_table, zdot_inequality_check, OdeWitness, SolverConfig, Trajectory,
};
use fraclobc_core::fraclap::getoor_constant;
use fraclobc_core::regularize::{
    double_regularize, inf_conv, inf_conv_composed, lipschitz_bound, second_diff_extremes,
    sup_conv_space, RegParams, SpaceTimeFunction,
};
use fraclobc_core::spectral::{
    eigen_family, family_sup_gaps, family_table, nested_resolution, principal_eigenpair,
};
use fraclobc_core::table::Table;
use fraclobc_core::{Domain, FracLapOperator, Grid, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::CliError;

const EIGEN_TOL: f64 = 1e-10;
/// `η = 4h` for the mass weight
const ETA_STEPS: usize = 4;
/// bump amplitude of the attached run that calibrates `C5`
const CALIBRATION_AMPLITUDE: f64 = 0.05;
const CALIBRATION_T: f64 = 0.5;

/// Files produced by an experiment, keyed by path relative to the output
/// directory, plus any violated properties.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: BTreeMap<String, Vec<u8>>,
    pub violations: Vec<String>,
}

impl Outcome {
    fn csv(&mut self, path: impl Into<String>, t: &Table) {
        self.files.insert(path.into(), t.to_csv().into_bytes());
    }

    fn json(&mut self, path: impl Into<String>, v: &impl Serialize) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(v).map_err(|e| CliError::Operational(e.to_string()))?;
        text.push('\n');
        self.files.insert(path.into(), text.into_bytes());
        Ok(())
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(msg());
        }
    }
}

fn core<T>(context: &str, r: fraclobc_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Core {
        context: context.to_owned(),
        source,
    })
}

fn opt(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.experiment {
        Experiment::LocalExistence => local_existence(cfg),
        Experiment::LobcSweep => lobc_sweep(cfg),
        Experiment::EigenStability => eigen_stability(cfg),
        Experiment::BarrierReport => barrier_report(cfg),
        Experiment::ConvolutionProps => convolution_props(cfg),
        Experiment::FdiffValidation => fdiff_validation(cfg),
    }
}

/// Operator, mass weight and principal eigenpair on the unit interval.
struct Setup {
    grid: Arc<Grid>,
    op: FracLapOperator,
    weight: fraclobc_core::spectral::EigenPair,
    full: fraclobc_core::spectral::EigenPair,
    phi: GridFunction,
}

impl Setup {
    fn new(s: f64, n: usize) -> Result<Self, CliError> {
        let domain = Domain::unit();
        let grid = Arc::new(core("grid", Grid::new(domain, n))?);
        let op = core(
            "operator assembly",
            FracLapOperator::assemble(grid.clone(), s),
        )?;
        let weight = core(
            "mass weight eigenpair",
            eigen_for_solver(&domain, s, n, ETA_STEPS, EIGEN_TOL),
        )?;
        let full = core("principal eigenpair", principal_eigenpair(&op, EIGEN_TOL))?;
        let phi = core("mass weight", weight.resample_to(&grid))?;
        Ok(Self {
            grid,
            op,
            weight,
            full,
            phi,
        })
    }

    fn solver(&self, cfg: &ExperimentConfig, t_end: f64) -> Result<SolverConfig, CliError> {
        Ok(SolverConfig {
            cfl_safety: cfg.number("cfl")?,
            lobc_threshold: cfg.number("lobc_threshold")?,
            record_every: cfg.count("record_every")?,
            ..SolverConfig::new(cfg.s, cfg.p, cfg.n, t_end)
        })
    }

    fn bump(&self, amplitude: f64, gamma: f64) -> Result<GridFunction, CliError> {
        core("initial data", sine_bump(&self.grid, amplitude, gamma))
    }

    fn z(&self, u: &GridFunction) -> f64 {
        mass(u.values(), self.phi.values(), self.grid.h())
    }

    fn run(&self, u0: &GridFunction, solver: &SolverConfig) -> Result<Trajectory, CliError> {
        core(
            "time integration",
            run_with(u0, solver, &self.weight, &self.op),
        )
    }
}

fn max_trace(tr: &Trajectory) -> f64 {
    tr.monitors
        .iter()
        .map(|m| m.trace_left.abs().max(m.trace_right.abs()))
        .fold(0.0, f64::max)
}

fn local_existence(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let setup = Setup::new(cfg.s, cfg.n)?;
    let solver = SolverConfig {
        snapshot_every: cfg.count("snapshot_every")?,
        ..setup.solver(cfg, cfg.t)?
    };
    let u0 = setup.bump(cfg.number("amplitude")?, cfg.number("gamma")?)?;
    let tr = setup.run(&u0, &solver)?;

    let mut out = Outcome::default();
    out.csv("monitors.csv", &tr.monitor_table());
    let mut index = Table::new(["index", "t"]);
    for (k, (t, u)) in tr.snapshots.iter().enumerate() {
        index.push(vec![k as f64, *t]);
        out.csv(format!("snapshots/snapshot_{k:04}.csv"), &snapshot_table(u));
    }
    out.csv("snapshots.csv", &index);
    out.json(
        "summary.json",
        &json!({
            "window": cfg.window,
            "z0": setup.z(&u0),
            "u0_sup": tr.u0_sup,
            "lambda1": setup.full.lambda1,
            "lobc_threshold": solver.lobc_threshold * tr.u0_sup,
            "max_trace": max_trace(&tr),
            "lobc_time": tr.lobc_time,
            "collapse_time": tr.collapse_time,
            "steps": tr.steps,
            "records": tr.monitors.len(),
            "snapshots": tr.snapshots.len(),
        }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct SweepPoint {
    scale: f64,
    amplitude: f64,
    z0: f64,
    u0_sup: f64,
    /// `lobc_threshold · ‖u0‖∞`, the level the traces are compared with
    trace_threshold: f64,
    lobc_time: Option<f64>,
    collapse_time: Option<f64>,
    steps: usize,
    /// blow-up envelope of `y' = (C5/2) y^p` from `z0`, when `z0` exceeds the
    /// level at which the linear term is absorbed
    witness: Option<OdeWitness>,
}

fn lobc_sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let setup = Setup::new(cfg.s, cfg.n)?;
    let amplitude = cfg.number("amplitude")?;
    let gamma = cfg.number("gamma")?;
    let scales = cfg.list("scales")?;
    let solver = setup.solver(cfg, cfg.t)?;

    let calibration = setup.run(
        &setup.bump(CALIBRATION_AMPLITUDE, gamma)?,
        &setup.solver(cfg, cfg.t.min(CALIBRATION_T))?,
    )?;
    let c5 = match zdot_inequality_check(&calibration, &setup.full, cfg.p) {
        Ok(rep) if !rep.degenerate && rep.c5 > 0.0 => Some(rep.c5),
        Ok(_)
        | Err(fraclobc_core::Error::InsufficientData { .. })
        | Err(fraclobc_core::Error::DivergentIntegral { .. }) => None,
        Err(e) => return core("mass inequality calibration", Err(e)),
    };
    let threshold = match c5 {
        Some(c) => Some(core(
            "threshold",
            lobc_threshold_estimate(&setup.full, cfg.p, c, cfg.t, 0.0),
        )?),
        None => None,
    };

    let runs: Vec<(f64, GridFunction, Trajectory)> = scales
        .par_iter()
        .map(|&scale| {
            let u0 = setup.bump(scale * amplitude, gamma)?;
            let tr = setup.run(&u0, &solver)?;
            Ok((scale, u0, tr))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Outcome::default();
    let mut table = Table::new(["scale", "z0", "lobc_time", "collapse_time"]);
    let mut points = Vec::with_capacity(runs.len());
    for (scale, u0, tr) in &runs {
        let z0 = setup.z(u0);
        table.push(vec![*scale, z0, opt(tr.lobc_time), opt(tr.collapse_time)]);
        out.csv(format!("scale_{scale:?}/monitors.csv"), &tr.monitor_table());
        let witness = match c5 {
            Some(c) if z0 > (2.0 * setup.full.lambda1 / c).powf(1.0 / (cfg.p - 1.0)) => {
                Some(core("ODE witness", ode_blowup(0.5 * c, cfg.p, z0, 0.0))?)
            }
            _ => None,
        };
        points.push(SweepPoint {
            scale: *scale,
            amplitude: scale * amplitude,
            z0,
            u0_sup: tr.u0_sup,
            trace_threshold: solver.lobc_threshold * tr.u0_sup,
            lobc_time: tr.lobc_time,
            collapse_time: tr.collapse_time,
            steps: tr.steps,
            witness,
        });
    }
    out.csv("lobc_sweep.csv", &table);
    out.json(
        "witness.json",
        &json!({
            "window": cfg.window,
            "lambda1": setup.full.lambda1,
            "c5": c5,
            "threshold_z": threshold,
            "lobc_threshold": solver.lobc_threshold,
            "points": points,
        }),
    )?;
    Ok(out)
}

fn eigen_stability(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let domain = Domain::unit();
    let etas = cfg.list("etas")?;
    let collar = cfg.number("collar")?;
    let n = core(
        "nested resolution",
        nested_resolution(&domain, &etas, cfg.n),
    )?;
    let family = core(
        "eigenpair family",
        eigen_family(&domain, cfg.s, &etas, n, EIGEN_TOL),
    )?;
    let table = core("spectral table", family_table(&family, cfg.p, collar))?;

    let mut out = Outcome::default();
    let lambdas: Vec<f64> = family.iter().map(|p| p.lambda1).collect();
    out.require(lambdas.windows(2).all(|w| w[1] < w[0]), || {
        format!("lambda1 is not strictly monotone in eta: {lambdas:?}")
    });
    let mut gaps = None;
    if etas.last() == Some(&0.0) {
        let g = core("sup gaps", family_sup_gaps(&family))?;
        let mut t = Table::new(["eta", "sup_gap"]);
        for (e, d) in etas.iter().zip(&g) {
            t.push(vec![*e, *d]);
        }
        out.csv("sup_gaps.csv", &t);
        out.require(g.windows(2).all(|w| w[1] < w[0]), || {
            format!("sup gaps do not decrease: {g:?}")
        });
        gaps = Some(g);

        let parent = family.last().expect("family is nonempty").grid().clone();
        let mut header = vec!["x".to_owned()];
        header.extend(etas.iter().map(|e| format!("phi_eta_{e:?}")));
        let cols: Vec<GridFunction> = family
            .iter()
            .map(|p| p.resample_to(&parent))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Core {
                context: "eigenfunction resampling".into(),
                source: e,
            })?;
        let mut t = Table::new(header);
        for (i, x) in parent.nodes().iter().enumerate() {
            let mut row = vec![*x];
            row.extend(cols.iter().map(|c| c.values()[i]));
            t.push(row);
        }
        out.csv("eigenfunctions.csv", &t);
    }
    let c3 = table.column("hopf_c3").expect("spectral column");
    out.require(c3.iter().all(|&c| c > 0.0), || {
        format!("Hopf constant not positive: {c3:?}")
    });
    out.csv("spectral.csv", &table);
    out.json(
        "summary.json",
        &json!({
            "window": cfg.window,
            "n": n,
            "etas": etas,
            "lambda1": lambdas,
            "sup_gaps": gaps,
            "c3_min": c3.iter().copied().fold(f64::INFINITY, f64::min),
        }),
    )?;
    Ok(out)
}

fn barrier_report(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let domain = Domain::unit();
    let exps = core(
        "exponents",
        ExponentConfig::new(cfg.s, cfg.p, cfg.number("beta")?, cfg.number("alpha")?),
    )?;
    let m = cfg.number("M")?;
    let reports: Vec<BarrierReport> = [domain.a(), domain.b()]
        .par_iter()
        .map(|&y| {
            let bar = core("barrier construction", build_barrier(exps, domain, y, m))?;
            core("supersolution check", supersolution_report(&bar))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Outcome::default();
    let mut slack = Table::new([
        "y",
        "far",
        "d",
        "x",
        "laplacian",
        "gradient_term",
        "slack",
        "scaled_slack",
        "dominates",
    ]);
    for (y, rep) in [domain.a(), domain.b()].iter().zip(&reports) {
        for smp in &rep.samples {
            slack.push(vec![
                *y,
                f64::from(u8::from(smp.side == Side::Far)),
                smp.d,
                smp.x,
                smp.laplacian,
                smp.gradient_term,
                smp.slack,
                smp.scaled_slack,
                f64::from(u8::from(smp.dominates)),
            ]);
        }
        out.require(rep.min_slack > 0.0, || {
            format!("y = {y}: min slack {:e}", rep.min_slack)
        });
        out.require(rep.samples.iter().all(|s| s.dominates), || {
            format!("y = {y}: barrier below M d^beta")
        });
    }
    out.json("barrier.json", &reports[0])?;
    out.json("barrier_right.json", &reports[1])?;
    out.csv("barrier_slack.csv", &slack);

    let k = cfg.count("f_samples")?;
    let betas: Vec<f64> = (0..k)
        .map(|i| 2.0 * cfg.s * (i as f64 + 0.5) / k as f64)
        .collect();
    let values: Vec<f64> = betas
        .par_iter()
        .map(|&b| core("F(beta)", f_of_beta(cfg.s, b)))
        .collect::<Result<_, _>>()?;
    let mut f = Table::new(["beta", "F"]);
    for (b, v) in betas.iter().zip(&values) {
        f.push(vec![*b, *v]);
    }
    out.csv("f_beta.csv", &f);
    let zero = core("zero of F", f_zero(cfg.s, 0.5 * cfg.s, 1.5 * cfg.s, 1e-10))?;
    out.json(
        "summary.json",
        &json!({ "window": cfg.window, "f_zero": zero, "M": m }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct PropertyCheck {
    fixture: &'static str,
    property: &'static str,
    value: f64,
    bound: f64,
    holds: bool,
}

fn convolution_fixtures(
    n: usize,
    seed: u64,
) -> Result<Vec<(&'static str, SpaceTimeFunction)>, CliError> {
    let times = |m: usize| {
        (0..m)
            .map(|k| k as f64 / (m - 1) as f64)
            .collect::<Vec<_>>()
    };
    let g = Arc::new(core("grid", Grid::new(Domain::unit(), n))?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rough: Vec<f64> = (0..n * 9).map(|_| rng.random_range(-2.0..2.0)).collect();
    Ok(vec![
        (
            "smooth",
            core(
                "fixture",
                SpaceTimeFunction::from_fn(g.clone(), times(11), |x, t| {
                    2.0 * (7.0 * x + 3.0 * t).sin() + x * t
                }),
            )?,
        ),
        (
            "hat",
            core(
                "fixture",
                SpaceTimeFunction::from_fn(g.clone(), times(11), |x, t| {
                    3.0 * (1.0 - (2.0 * x - 1.0).abs()) * (1.0 + t)
                }),
            )?,
        ),
        (
            "rough",
            core("fixture", SpaceTimeFunction::new(g, times(9), rough))?,
        ),
    ])
}

fn convolution_props(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (eps, kappa, delta) = (
        cfg.number("eps")?,
        cfg.number("kappa")?,
        cfg.number("delta")?,
    );
    let params = RegParams::new(eps, kappa, delta)
        .map_err(|e| CliError::Config(ConfigError::new("overrides.eps", e.to_string())))?;
    let fixtures = convolution_fixtures(cfg.n, cfg.seed)?;
    let checks: Vec<Vec<PropertyCheck>> = fixtures
        .par_iter()
        .map(|(name, f)| convolution_checks(name, f, eps, kappa, delta, params))
        .collect::<Result<_, _>>()?;
    let checks: Vec<PropertyCheck> = checks.into_iter().flatten().collect();

    let mut out = Outcome::default();
    for c in checks.iter().filter(|c| !c.holds) {
        out.violations.push(format!(
            "{} on {}: {:e} exceeds {:e}",
            c.property, c.fixture, c.value, c.bound
        ));
    }
    out.json(
        "convolution_props.json",
        &json!({ "eps": eps, "kappa": kappa, "delta": delta, "seed": cfg.seed, "n": cfg.n, "checks": checks }),
    )?;
    Ok(out)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn convolution_checks(
    name: &'static str,
    f: &SpaceTimeFunction,
    eps: f64,
    kappa: f64,
    delta: f64,
    params: RegParams,
) -> Result<Vec<PropertyCheck>, CliError> {
    let check = |property, value: f64, bound: f64| PropertyCheck {
        fixture: name,
        property,
        value,
        bound,
        holds: value <= bound,
    };
    let norm = f.sup_norm();
    let h = f.grid().h();
    let dt = f.times()[1] - f.times()[0];
    let u = core("inf-convolution", inf_conv(f, eps, kappa))?;
    let up = core("sup-convolution", sup_conv_space(f, eps))?;
    let mut out = Vec::new();

    let above = u
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, v)| a - v)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(check("inf_conv_below", above, 1e-14));
    let below = up
        .values()
        .iter()
        .zip(f.values())
        .map(|(b, v)| v - b)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(check("sup_conv_above", below, 1e-14));
    let range = (f.min() - u.min()).max(up.max() - f.max());
    out.push(check("range_preserved", range, 1e-14));

    let scale = norm.max(1.0);
    out.push(check(
        "space_lipschitz",
        u.space_lipschitz(),
        lipschitz_bound(scale, eps, h) + 1e-12,
    ));
    out.push(check(
        "time_lipschitz",
        u.time_lipschitz(),
        lipschitz_bound(scale, kappa, dt) + 1e-12,
    ));

    let mut sd = f64::NEG_INFINITY;
    for k in 0..u.m() {
        sd = sd.max(core("second differences", second_diff_extremes(&u, k))?.1);
    }
    out.push(check("semiconcavity", sd, (1.0 + 1e-9) / eps));

    let composed = core(
        "composed inf-convolution",
        inf_conv_composed(f, eps, kappa, delta),
    )?;
    let direct = core("inf-convolution", inf_conv(f, eps + delta, kappa))?;
    out.push(check(
        "semigroup_gap",
        max_abs_diff(composed.values(), direct.values()),
        1e-12 * scale,
    ));

    let w = core("double regularization", double_regularize(f, params))?;
    let excess = w
        .values()
        .iter()
        .zip(u.values())
        .map(|(x, y)| x - y)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(check("double_below_inf_conv", excess, 1e-14));
    Ok(out)
}

fn getoor_error(s: f64, n: usize) -> Result<(f64, f64), CliError> {
    let exact = getoor_constant(s);
    let g = Arc::new(core("grid", Grid::new(Domain::symmetric(), n))?);
    let op = core("operator assembly", FracLapOperator::assemble(g.clone(), s))?;
    let f = core(
        "test function",
        GridFunction::from_fn(g.clone(), |x| (1.0 - x * x).max(0.0).powf(s)),
    )?;
    let af = core("operator apply", op.apply(&f))?;
    let (lo, hi) = (n / 10, n - n / 10);
    let err = af.values()[lo..hi]
        .iter()
        .map(|v| (v - exact).abs() / exact)
        .fold(0.0, f64::max);
    Ok((g.h(), err))
}

fn fdiff_validation(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let orders = cfg.list("orders")?;
    let sizes = [cfg.n / 2, cfg.n];
    let jobs: Vec<(f64, usize)> = orders
        .iter()
        .flat_map(|&s| sizes.iter().map(move |&n| (s, n)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(s, n)| getoor_error(s, n))
        .collect::<Result<_, _>>()?;

    let mut out = Outcome::default();
    let mut t = Table::new(["s", "n", "h", "max_rel_error"]);
    for ((s, n), (h, e)) in jobs.iter().zip(&results) {
        t.push(vec![*s, *n as f64, *h, *e]);
    }
    for (k, s) in orders.iter().enumerate() {
        let (coarse, fine) = (results[2 * k].1, results[2 * k + 1].1);
        out.require(fine < coarse, || {
            format!("s = {s}: error grew under refinement ({coarse:e} -> {fine:e})")
        });
    }
    out.csv("fdiff_validation.csv", &t);
    Ok(out)
}

/// Compact summary printed after a run.
pub fn headline(cfg: &ExperimentConfig, out: &Outcome) -> Value {
    json!({
        "experiment": cfg.experiment,
        "out_dir": cfg.out_dir,
        "files": out.files.len(),
        "violations": out.violations,
    })
}
