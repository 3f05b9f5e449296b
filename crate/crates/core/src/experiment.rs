//! Orchestration of configured experiments and their CSV outputs.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::config::{fmt_f64, DtSpec, ExperimentConfig, Mode, ReferenceKind};
use crate::cross_section::Problem;
use crate::csv::{write_csv, CsvTable};
use crate::diagnostics::condition::condition_number;
use crate::diagnostics::{
    ap_distance_f_rho, rho_distance, total_mass, ConditionMethod, ConditionTarget, DtRule,
    StabilityMonitor,
};
use crate::error::{Error, Result};
use crate::field::{DensityField, KineticField, ParityPair};
use crate::krylov::{pcg_solve, FnOperator, KrylovOptions, KrylovReport};
use crate::operators::{
    assemble_parity_rhs, dense_assemble, DenseKind, EvenOperator, EvenStencil, SchemeScalars,
    DEFAULT_DENSE_CAP,
};
use crate::reference::{diffusion_reference_step, explicit_max_dt, explicit_step};
use crate::stepper::{advance, step_sizes, Observer, SimulationState};

/// Floor applied to `σ` in diffusion references.
pub const DIFFUSION_SIGMA_FLOOR: f64 = 1e-6;

/// Upper bound on explicit reference steps before the run is refused.
const MAX_EXPLICIT_STEPS: usize = 5_000_000;

/// Files written by an experiment together with scalar results.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, f64)>,
}

impl Outcome {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Process exit code for an experiment result: 0 success, 1 solver failure,
/// 2 configuration error, 3 I/O error.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => match e.root() {
            Error::Config { .. } => 2,
            Error::Io(_) => 3,
            _ => 1,
        },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.mode {
        Mode::Run => run_mode(cfg),
        Mode::Condition => condition_mode(cfg),
        Mode::Bench => bench_mode(cfg),
        Mode::ApSweep => ap_sweep_mode(cfg),
    }
}

fn table(cfg: &ExperimentConfig, columns: &[&str]) -> CsvTable {
    let mut t = CsvTable::new(columns);
    t.meta("version", crate::VERSION);
    for (k, v) in cfg.echo() {
        t.meta(k, v);
    }
    t
}

fn out_path(cfg: &ExperimentConfig, stem: &str) -> PathBuf {
    cfg.dir.join(format!("{}_{stem}.csv", cfg.prefix))
}

fn save(outcome: &mut Outcome, path: PathBuf, t: &CsvTable) -> Result<()> {
    write_csv(&path, t)?;
    outcome.files.push(path);
    Ok(())
}

/// Steps reaching each stop in turn: `(h, Some(i))` marks arrival at stop `i`.
pub fn schedule(stops: &[f64], dt: f64) -> Vec<(f64, Option<usize>)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    for (i, &s) in stops.iter().enumerate() {
        let hs = step_sizes(s - t, dt);
        if hs.is_empty() {
            out.push((0.0, Some(i)));
        }
        let n = hs.len();
        for (k, h) in hs.into_iter().enumerate() {
            out.push((h, (k + 1 == n).then_some(i)));
        }
        t = t.max(s);
    }
    out
}

/// Reference solution advanced alongside the kinetic run.
enum Reference {
    None,
    Explicit { f: KineticField, t: f64, eps: f64 },
    Diffusion(DensityField),
}

impl Reference {
    fn new(kind: ReferenceKind, f0: &KineticField, problem: &Problem, eps: f64) -> Result<Self> {
        Ok(match kind {
            ReferenceKind::None | ReferenceKind::Auto => Self::None,
            ReferenceKind::Explicit => Self::Explicit {
                f: f0.clone(),
                t: 0.0,
                eps,
            },
            ReferenceKind::Diffusion => Self::Diffusion(f0.density(&problem.quadrature)?),
        })
    }

    fn advance(&mut self, problem: &Problem, h: f64, t_target: f64) -> Result<()> {
        match self {
            Self::None => {}
            Self::Diffusion(rho) => {
                if h > 0.0 {
                    *rho = diffusion_reference_step(rho, problem, h, DIFFUSION_SIGMA_FLOOR)?;
                }
            }
            Self::Explicit { f, t, eps } => {
                let span = t_target - *t;
                // Only advanced on arrival at a stop; NaN marks intermediate steps.
                if span.is_nan() || span <= 0.0 {
                    return Ok(());
                }
                let dt = explicit_max_dt(problem, *eps);
                let steps = step_sizes(span, dt);
                if steps.len() > MAX_EXPLICIT_STEPS {
                    return Err(Error::invalid(format!(
                        "explicit reference needs {} steps; use the diffusion reference",
                        steps.len()
                    )));
                }
                for h in steps {
                    *f = explicit_step(f, problem, *eps, h)?;
                }
                *t = t_target;
            }
        }
        Ok(())
    }

    fn density(&self, problem: &Problem) -> Result<Option<DensityField>> {
        Ok(match self {
            Self::None => None,
            Self::Explicit { f, .. } => Some(f.density(&problem.quadrature)?),
            Self::Diffusion(rho) => Some(rho.clone()),
        })
    }
}

fn profile_table(
    cfg: &ExperimentConfig,
    problem: &Problem,
    rho: &DensityField,
    reference: Option<&DensityField>,
) -> CsvTable {
    let planar = problem.mesh.is_planar();
    let mut cols = vec!["x"];
    if planar {
        cols.push("y");
    }
    cols.push("rho");
    if reference.is_some() {
        cols.push("rho_reference");
    }
    let mut t = table(cfg, &cols);
    for c in 0..problem.n_cells() {
        let (x, y) = problem.mesh.center(c);
        let mut row = vec![x];
        if planar {
            row.push(y);
        }
        row.push(rho.values()[c]);
        if let Some(r) = reference {
            row.push(r.values()[c]);
        }
        t.push(row);
    }
    t
}

fn run_mode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let f0 = cfg.initial_field(&problem)?;
    let dt = cfg.resolved_dt()?;
    let solver = cfg.solver_config(cfg.epsilon, dt);
    solver.validate(&problem)?;
    let stops = if cfg.times.is_empty() {
        vec![cfg.t_max]
    } else {
        cfg.times.clone()
    };
    let ref_kind = cfg.reference_for(cfg.epsilon);
    let mut reference = Reference::new(ref_kind, &f0, &problem, cfg.epsilon)?;
    let mut state = SimulationState::new(&f0, &problem, solver.scheme)?;
    let mut monitor = StabilityMonitor::default();
    monitor.start(&f0, &problem)?;
    let mut steps = table(
        cfg,
        &[
            "step",
            "t",
            "dt",
            "iterations",
            "residual",
            "matvecs",
            "norm",
            "mass",
        ],
    );
    let mut outcome = Outcome::default();
    for (h, stop) in schedule(&stops, dt) {
        if h > 0.0 {
            advance(&mut state, &problem, &solver, h)?;
            if let Some(i) = stop {
                state.t = stops[i];
            }
            let report = state.reports.last().cloned().unwrap_or_default();
            monitor.observe(&state, &problem, &report);
            if let Some(e) = monitor.error() {
                return Err(Error::invalid(e.to_string()));
            }
            let rec = monitor
                .records
                .last()
                .copied()
                .unwrap_or_else(|| unreachable!());
            steps.push(vec![
                state.step as f64,
                state.t,
                h,
                report.iterations as f64,
                report.final_residual(),
                report.matvec_count as f64,
                rec.norm,
                rec.mass,
            ]);
        }
        if let Some(i) = stop {
            reference.advance(&problem, h, stops[i])?;
            let rho = state.density(&problem)?;
            let rho_ref = reference.density(&problem)?;
            let mut t = profile_table(cfg, &problem, &rho, rho_ref.as_ref());
            t.meta("t", fmt_f64(stops[i])).meta("dt", fmt_f64(dt));
            t.meta("reference", format!("{ref_kind:?}").to_lowercase());
            if let Some(r) = &rho_ref {
                let d = rho_distance(&rho, r, &problem.mesh)?;
                t.meta("rho_distance", fmt_f64(d));
                outcome
                    .summary
                    .push((format!("rho_distance_t{}", fmt_f64(stops[i])), d));
            }
            save(
                &mut outcome,
                out_path(cfg, &format!("rho_t{}", fmt_f64(stops[i]))),
                &t,
            )?;
        } else {
            reference.advance(&problem, h, f64::NAN)?;
        }
    }
    steps.meta("stability_flags", monitor.flags());
    steps.meta("mass_drift", fmt_f64(monitor.mass_drift()));
    outcome.summary.push(("steps".into(), state.step as f64));
    outcome
        .summary
        .push(("stability_flags".into(), monitor.flags() as f64));
    outcome
        .summary
        .push(("mass_drift".into(), monitor.mass_drift()));
    save(&mut outcome, out_path(cfg, "steps"), &steps)?;
    Ok(outcome)
}

/// Dimension up to which `condition_method = auto` uses the dense solver.
const AUTO_DENSE_DIM: usize = 1024;

fn condition_mode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rules: Vec<DtRule> = match cfg.dt {
        DtSpec::Sweep => DtRule::candidates().to_vec(),
        DtSpec::Rule(r) => vec![r],
    };
    let mut t = table(
        cfg,
        &[
            "nx",
            "nv",
            "epsilon",
            "dt",
            "rule",
            "target",
            "lambda_min",
            "lambda_max",
            "kappa",
            "method",
            "residual_bound",
        ],
    );
    t.meta("legend.target", "0=A+B;1=B^-1A+I");
    t.meta("legend.method", "0=dense;1=iterative");
    let labels: Vec<String> = rules.iter().map(|r| r.label()).collect();
    t.meta(
        "legend.rule",
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{i}={l}"))
            .collect::<Vec<_>>()
            .join(";"),
    );
    for &nx in &cfg.sweep_nx {
        for &nv in &cfg.sweep_nv {
            let problem = cfg.problem_with(nx, nv)?;
            let dim = problem.n_cells() * problem.n_half();
            let method = cfg.condition_method.unwrap_or(if dim <= AUTO_DENSE_DIM {
                ConditionMethod::Dense
            } else {
                ConditionMethod::Iterative
            });
            for (ri, rule) in rules.iter().enumerate() {
                let s = SchemeScalars::new(cfg.epsilon, rule.dt(problem.mesh.dx()))?;
                for (ti, target) in [ConditionTarget::APlusB, ConditionTarget::Preconditioned]
                    .into_iter()
                    .enumerate()
                {
                    let r = condition_number(&problem, &s, target, method)?;
                    t.push(vec![
                        nx as f64,
                        nv as f64,
                        cfg.epsilon,
                        s.dt(),
                        ri as f64,
                        ti as f64,
                        r.lambda_min,
                        r.lambda_max,
                        r.kappa,
                        if method == ConditionMethod::Dense {
                            0.0
                        } else {
                            1.0
                        },
                        r.residual_bound,
                    ]);
                }
            }
        }
    }
    let mut outcome = Outcome::default();
    outcome.summary.push(("rows".into(), t.rows.len() as f64));
    save(&mut outcome, out_path(cfg, "condition"), &t)?;
    Ok(outcome)
}

/// Timings of one even-parity solve by dense LU and by PCG.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub nx: usize,
    pub nv: usize,
    pub epsilon: f64,
    pub dt: f64,
    pub dense: Duration,
    pub pcg: Duration,
    pub pcg_iterations: usize,
    /// Relative difference between the two solutions in the weighted norm.
    pub difference: f64,
}

impl BenchRecord {
    pub fn ratio(&self) -> f64 {
        self.dense.as_secs_f64() / self.pcg.as_secs_f64().max(1e-12)
    }
}

/// Right-hand side of the first backward-Euler step from `f0`.
pub fn parity_rhs(f0: &KineticField, problem: &Problem, s: &SchemeScalars) -> Result<Vec<f64>> {
    let pair = ParityPair::from_full(f0, &problem.quadrature)?;
    Ok(assemble_parity_rhs(&pair, problem, s)?.into_values())
}

/// Minimum over `reps` of the time for one PCG solve of `(A + B) x = b`.
pub fn time_pcg_solve(
    problem: &Problem,
    s: &SchemeScalars,
    b: &[f64],
    opts: &KrylovOptions,
    reps: usize,
) -> Result<(Duration, Vec<f64>, KrylovReport)> {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let op = EvenOperator::new(problem, s, EvenStencil::Compact)?;
        let w = op.inner_weights();
        let n = op.dim();
        let a = FnOperator::new(n, |x: &[f64], y: &mut [f64]| op.apply_system(x, y));
        let m = FnOperator::new(n, |x: &[f64], y: &mut [f64]| op.apply_b_inverse(x, y));
        let (x, report) = pcg_solve(&a, &m, b, None, &w, opts)?;
        best = best.min(start.elapsed());
        if !report.converged {
            return Err(Error::NotConverged(format!(
                "benchmark PCG: {} iterations, residual {:e}",
                report.iterations,
                report.final_residual()
            )));
        }
        last = Some((x, report));
    }
    let (x, report) = last.unwrap_or_else(|| unreachable!());
    Ok((best, x, report))
}

/// Time to assemble `A + B` densely, factor it by LU and solve once.
pub fn time_dense_solve(
    problem: &Problem,
    s: &SchemeScalars,
    b: &[f64],
) -> Result<(Duration, Vec<f64>)> {
    let start = Instant::now();
    let a: DMatrix<f64> = dense_assemble(
        DenseKind::EvenA(EvenStencil::Compact),
        problem,
        s,
        DEFAULT_DENSE_CAP,
    )? + dense_assemble(DenseKind::ShiftHalf, problem, s, DEFAULT_DENSE_CAP)?;
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::Singular("dense LU of A + B".into()))?;
    Ok((start.elapsed(), x.as_slice().to_vec()))
}

pub fn bench_point(
    problem: &Problem,
    f0: &KineticField,
    s: &SchemeScalars,
    opts: &KrylovOptions,
    reps: usize,
) -> Result<BenchRecord> {
    let b = parity_rhs(f0, problem, s)?;
    let (pcg, x_cg, report) = time_pcg_solve(problem, s, &b, opts, reps)?;
    let (dense, x_lu) = time_dense_solve(problem, s, &b)?;
    let w = EvenOperator::new(problem, s, EvenStencil::Compact)?.inner_weights();
    let num: f64 = x_cg
        .iter()
        .zip(&x_lu)
        .zip(&w)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum();
    let den: f64 = x_lu.iter().zip(&w).map(|(a, w)| w * a * a).sum();
    Ok(BenchRecord {
        nx: problem.mesh.nx(),
        nv: problem.n_nodes(),
        epsilon: s.epsilon(),
        dt: s.dt(),
        dense,
        pcg,
        pcg_iterations: report.iterations,
        difference: (num / den.max(f64::MIN_POSITIVE)).sqrt(),
    })
}

fn bench_mode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut t = table(
        cfg,
        &[
            "nx",
            "nv",
            "epsilon",
            "dt",
            "t_dense",
            "t_pcg",
            "ratio",
            "pcg_iterations",
            "difference",
        ],
    );
    let opts = KrylovOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        restart: cfg.restart,
    };
    let mut outcome = Outcome::default();
    for &nx in &cfg.sweep_nx {
        let problem = cfg.problem_with(nx, cfg.nv)?;
        let f0 = cfg.initial_field(&problem)?;
        let dt = cfg.dt_for(problem.mesh.dx())?;
        for &eps in &cfg.epsilons {
            let s = SchemeScalars::new(eps, dt)?;
            let r = bench_point(&problem, &f0, &s, &opts, 3)?;
            t.push(vec![
                nx as f64,
                cfg.nv as f64,
                eps,
                dt,
                r.dense.as_secs_f64(),
                r.pcg.as_secs_f64(),
                r.ratio(),
                r.pcg_iterations as f64,
                r.difference,
            ]);
            outcome
                .summary
                .push((format!("ratio_nx{nx}_eps{}", fmt_f64(eps)), r.ratio()));
        }
    }
    save(&mut outcome, out_path(cfg, "bench"), &t)?;
    Ok(outcome)
}

/// Per-step asymptotic-preserving distances of one ladder member.
#[derive(Debug, Clone, PartialEq)]
pub struct ApSeries {
    pub epsilon: f64,
    /// `(t, ‖f − ρ‖, ‖ρ_kinetic − ρ_diffusion‖)`.
    pub rows: Vec<(f64, f64, f64)>,
    /// Largest relative deviation of the kinetic mass from its initial value.
    pub mass_drift: f64,
}

impl ApSeries {
    pub fn final_ap_distance(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.1)
    }

    pub fn final_rho_distance(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.2)
    }
}

/// Runs the kinetic solver at `epsilon` and a diffusion solve in lockstep.
pub fn ap_series(cfg: &ExperimentConfig, problem: &Problem, epsilon: f64) -> Result<ApSeries> {
    let f0 = cfg.initial_field(problem)?;
    let dt = cfg.resolved_dt()?;
    let solver = cfg.solver_config(epsilon, dt);
    let mut state = SimulationState::new(&f0, problem, solver.scheme)?;
    let mut rho_d = f0.density(&problem.quadrature)?;
    let mut rows = vec![(0.0, ap_distance_f_rho(&f0, problem)?, 0.0)];
    let m0 = total_mass(&rho_d, &problem.mesh)?;
    let mut mass_drift: f64 = 0.0;
    for h in step_sizes(cfg.t_max, dt) {
        advance(&mut state, problem, &solver, h)?;
        rho_d = diffusion_reference_step(&rho_d, problem, h, DIFFUSION_SIGMA_FLOOR)?;
        let f = state.full_field(problem)?;
        let rho = f.density(&problem.quadrature)?;
        mass_drift = mass_drift
            .max((total_mass(&rho, &problem.mesh)? - m0).abs() / m0.abs().max(f64::MIN_POSITIVE));
        rows.push((
            state.t,
            ap_distance_f_rho(&f, problem)?,
            rho_distance(&rho, &rho_d, &problem.mesh)?,
        ));
    }
    Ok(ApSeries {
        epsilon,
        rows,
        mass_drift,
    })
}

fn diffusion_run(cfg: &ExperimentConfig, problem: &Problem, dt: f64) -> Result<DensityField> {
    let mut rho = cfg.initial_field(problem)?.density(&problem.quadrature)?;
    for h in step_sizes(cfg.t_max, dt) {
        rho = diffusion_reference_step(&rho, problem, h, DIFFUSION_SIGMA_FLOOR)?;
    }
    Ok(rho)
}

/// Error estimate of the diffusion reference on the configured grid: the
/// distance at `t_max` between runs at `(Δx, Δt)` and `(Δx/2, Δt/2)`, the
/// fine solution restricted by averaging the cells of each coarse cell.
pub fn diffusion_self_convergence(cfg: &ExperimentConfig) -> Result<f64> {
    let coarse = cfg.problem()?;
    let dt = cfg.resolved_dt()?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.nx = 2 * cfg.nx;
    fine_cfg.ny = 2 * cfg.ny;
    let fine = fine_cfg.problem()?;
    let rho_c = diffusion_run(cfg, &coarse, dt)?;
    let rho_f = diffusion_run(&fine_cfg, &fine, dt / 2.0)?;
    let m = &coarse.mesh;
    let fm = &fine.mesh;
    let restricted: Vec<f64> = (0..m.n_cells())
        .map(|c| {
            let (i, j) = m.coords(c);
            if m.is_planar() {
                let mut sum = 0.0;
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    sum += rho_f.values()[fm.index(2 * i + di, 2 * j + dj)];
                }
                sum / 4.0
            } else {
                0.5 * (rho_f.values()[2 * i] + rho_f.values()[2 * i + 1])
            }
        })
        .collect();
    rho_distance(&rho_c, &DensityField::new(restricted), m)
}

fn ap_sweep_mode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    // Ladder members are independent.
    let results: Vec<Result<ApSeries>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .epsilons
            .iter()
            .map(|&eps| {
                let problem = &problem;
                scope.spawn(move || ap_series(cfg, problem, eps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::invalid("ladder worker panicked")))
            })
            .collect()
    });
    let mut outcome = Outcome::default();
    let mut summary = table(cfg, &["epsilon", "ap_distance", "rho_distance"]);
    for series in results {
        let series = series?;
        let mut t = table(cfg, &["t", "ap_distance", "rho_distance"]);
        t.meta("epsilon", fmt_f64(series.epsilon));
        for &(time, ap, rd) in &series.rows {
            t.push(vec![time, ap, rd]);
        }
        save(
            &mut outcome,
            out_path(cfg, &format!("ap_eps{}", fmt_f64(series.epsilon))),
            &t,
        )?;
        summary.push(vec![
            series.epsilon,
            series.final_ap_distance(),
            series.final_rho_distance(),
        ]);
        outcome.summary.push((
            format!("ap_distance_eps{}", fmt_f64(series.epsilon)),
            series.final_ap_distance(),
        ));
    }
    save(&mut outcome, out_path(cfg, "ap_summary"), &summary)?;
    Ok(outcome)
}
