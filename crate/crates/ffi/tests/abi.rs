//! Behaviour of the C entry points, called through their Rust symbols.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use proptest::prelude::*;
use rtsolve::presets::preset;
use rtsolve::run_simulation;
use rtsolve_ffi::*;

fn last_error() -> String {
    let n = unsafe { rts_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n];
    unsafe { rts_last_error_message(buf.as_mut_ptr(), n) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn from_preset(name: &str, eps: f64) -> (RtsStatus, *mut RtsSimulation) {
    let name = CString::new(name).unwrap();
    let mut sim = ptr::null_mut();
    let st = unsafe { rts_simulation_from_preset(name.as_ptr(), eps, &mut sim) };
    (st, sim)
}

fn density(sim: *const RtsSimulation) -> Vec<f64> {
    let n = unsafe { rts_simulation_cell_count(sim) };
    let mut out = vec![0.0; n];
    assert_eq!(
        unsafe { rts_simulation_density(sim, out.as_mut_ptr(), n) },
        RtsStatus::Ok
    );
    out
}

#[test]
fn preset_run_matches_library_run() {
    let (st, sim) = from_preset("example1", 1e-2);
    assert_eq!(st, RtsStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { rts_simulation_cell_count(sim) }, 200);
    assert_eq!(unsafe { rts_simulation_advance(sim, 0.05) }, RtsStatus::Ok);
    assert_eq!(unsafe { rts_simulation_time(sim) }, 0.05);
    let rho = density(sim);

    let cfg = preset("example1", Some(1e-2), None, None).unwrap();
    let p = cfg.problem().unwrap();
    let f0 = cfg.initial_field(&p).unwrap();
    let solver = cfg.solver_config(1e-2, cfg.resolved_dt().unwrap());
    let expected = run_simulation(&f0, &p, &solver, 0.05, &mut [])
        .unwrap()
        .density(&p)
        .unwrap();
    for (a, b) in rho.iter().zip(expected.values()) {
        assert_eq!(a, b);
    }
    let steps = rtsolve::stepper::step_sizes(0.05, solver.dt).len();
    assert_eq!(unsafe { rts_simulation_step_count(sim) }, steps);

    let mut report = RtsSolveReport::default();
    assert_eq!(
        unsafe { rts_simulation_last_report(sim, &mut report) },
        RtsStatus::Ok
    );
    assert_eq!(report.converged, 1);
    assert!(report.iterations > 0 && report.final_residual <= solver.tol);
    unsafe { rts_simulation_free(sim) };
}

#[test]
fn single_steps_advance_time_by_dt() {
    let (_, sim) = from_preset("example2", f64::NAN);
    unsafe {
        assert_eq!(rts_simulation_step(sim), RtsStatus::Ok);
        let t1 = rts_simulation_time(sim);
        assert_eq!(rts_simulation_step(sim), RtsStatus::Ok);
        assert!((rts_simulation_time(sim) - 2.0 * t1).abs() < 1e-15);
        assert_eq!(rts_simulation_step_count(sim), 2);
        rts_simulation_free(sim);
    }
}

#[test]
fn config_text_and_file_build_the_same_simulation() {
    let text = "[grid]\nnx = 20\nnv = 4\n[physics]\nepsilon = 0.5\n\
                [solver]\ndt = dx\nt_max = 0.1\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    let ctext = CString::new(text).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(
            rts_simulation_from_config_text(ctext.as_ptr(), &mut a),
            RtsStatus::Ok
        );
        assert_eq!(
            rts_simulation_from_config_file(cpath.as_ptr(), &mut b),
            RtsStatus::Ok
        );
        rts_simulation_advance(a, 0.1);
        rts_simulation_advance(b, 0.1);
    }
    assert_eq!(density(a), density(b));
    unsafe {
        rts_simulation_free(a);
        rts_simulation_free(b);
    }
}

#[test]
fn errors_map_to_status_codes_with_messages() {
    let (st, sim) = from_preset("example9", f64::NAN);
    assert_eq!(st, RtsStatus::ConfigError);
    assert!(sim.is_null());
    assert!(last_error().contains("did you mean"), "{}", last_error());

    let (st, _) = from_preset("example1", -1.0);
    assert_eq!(st, RtsStatus::InvalidArgument);

    let mut sim = ptr::null_mut();
    let missing = CString::new("/nonexistent/rtsolve.toml").unwrap();
    let st = unsafe { rts_simulation_from_config_file(missing.as_ptr(), &mut sim) };
    assert_eq!(st, RtsStatus::IoError);

    let bad = CString::new("[grid]\nnx = 20\nnv = 4\n[physics]\nepsilon = 1\n[solver]\ndt = dx\n")
        .unwrap();
    let st = unsafe { rts_simulation_from_config_text(bad.as_ptr(), &mut sim) };
    assert_eq!(st, RtsStatus::ConfigError);
    assert!(last_error().contains("t_max"));

    unsafe {
        assert_eq!(rts_simulation_step(ptr::null_mut()), RtsStatus::NullPointer);
        assert!(rts_simulation_time(ptr::null()).is_nan());
        assert_eq!(rts_simulation_cell_count(ptr::null()), 0);
        assert_eq!(
            rts_simulation_from_preset(ptr::null(), 1.0, &mut sim),
            RtsStatus::NullPointer
        );
        assert_eq!(
            rts_simulation_from_preset(missing.as_ptr(), 1.0, ptr::null_mut()),
            RtsStatus::NullPointer
        );
        rts_simulation_free(ptr::null_mut());
    }
}

#[test]
fn non_convergence_is_a_solver_failure() {
    let text = "[grid]\nnx = 40\nnv = 8\n[physics]\nepsilon = 1e-2\nsigma = striped\n\
                [solver]\ndt = dx\nt_max = 0.1\nmax_iter = 1\ntol = 1e-14\n";
    let c = CString::new(text).unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(
            rts_simulation_from_config_text(c.as_ptr(), &mut sim),
            RtsStatus::Ok
        );
        let before = density(sim);
        assert_eq!(rts_simulation_step(sim), RtsStatus::SolverFailure);
        assert!(last_error().contains("converge"), "{}", last_error());
        assert_eq!(rts_simulation_time(sim), 0.0);
        assert_eq!(density(sim), before);
        rts_simulation_free(sim);
    }
}

#[test]
fn buffers_are_checked() {
    let (_, sim) = from_preset("example1", f64::NAN);
    unsafe {
        let mut small = vec![0.0; 10];
        assert_eq!(
            rts_simulation_density(sim, small.as_mut_ptr(), 10),
            RtsStatus::BufferTooSmall
        );
        assert_eq!(
            rts_simulation_density(sim, ptr::null_mut(), 200),
            RtsStatus::NullPointer
        );

        let nv = rts_simulation_node_count(sim);
        let (mut nodes, mut weights) = (vec![0.0; nv], vec![0.0; nv]);
        assert_eq!(
            rts_simulation_quadrature(sim, nodes.as_mut_ptr(), weights.as_mut_ptr(), nv),
            RtsStatus::Ok
        );
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(nodes.iter().all(|m| m.abs() < 1.0));
        let mut report = RtsSolveReport {
            iterations: 9,
            ..Default::default()
        };
        assert_eq!(rts_simulation_last_report(sim, &mut report), RtsStatus::Ok);
        assert_eq!(report, RtsSolveReport::default());
        rts_simulation_free(sim);
    }
}

#[test]
fn preconditioning_lowers_the_condition_number() {
    let text = "[grid]\nnx = 40\nnv = 8\n[physics]\nepsilon = 1e-3\n\
                [solver]\ndt = dx\nt_max = 0.1\n";
    let c = CString::new(text).unwrap();
    let mut sim = ptr::null_mut();
    let (mut plain, mut pre) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            rts_simulation_from_config_text(c.as_ptr(), &mut sim),
            RtsStatus::Ok
        );
        assert_eq!(
            rts_simulation_condition_number(sim, 0, &mut plain),
            RtsStatus::Ok
        );
        assert_eq!(
            rts_simulation_condition_number(sim, 1, &mut pre),
            RtsStatus::Ok
        );
        rts_simulation_free(sim);
    }
    assert!(pre >= 1.0 && plain > 100.0 * pre, "{plain} {pre}");
}

#[test]
fn error_message_is_truncated_and_cleared() {
    let _ = from_preset("nope", f64::NAN);
    let full = last_error();
    let mut buf = [1 as c_char; 8];
    let n = unsafe { rts_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full.len() + 1);
    let short = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(short, &full[..7]);
    let (_, sim) = from_preset("example1", f64::NAN);
    assert_eq!(last_error(), "");
    unsafe { rts_simulation_free(sim) };
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(rts_version()) }.to_str().unwrap();
    assert_eq!(v, rtsolve::VERSION);
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/rtsolve.h");
    for f in [
        "rts_simulation_from_config_file",
        "rts_simulation_from_config_text",
        "rts_simulation_from_preset",
        "rts_simulation_free",
        "rts_simulation_step",
        "rts_simulation_advance",
        "rts_simulation_time",
        "rts_simulation_step_count",
        "rts_simulation_cell_count",
        "rts_simulation_node_count",
        "rts_simulation_density",
        "rts_simulation_quadrature",
        "rts_simulation_last_report",
        "rts_simulation_condition_number",
        "rts_last_error_message",
        "rts_version",
        "typedef struct RtsSimulation RtsSimulation",
        "RTS_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(header.contains(f), "missing {f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Splitting an advance into pieces lands on the same time and mass.
    #[test]
    fn advance_is_additive_in_time(cut in 0.01f64..0.09) {
        let (_, a) = from_preset("example1", 0.1);
        let (_, b) = from_preset("example1", 0.1);
        unsafe {
            prop_assert_eq!(rts_simulation_advance(a, 0.1), RtsStatus::Ok);
            prop_assert_eq!(rts_simulation_advance(b, cut), RtsStatus::Ok);
            prop_assert_eq!(rts_simulation_advance(b, 0.1), RtsStatus::Ok);
            prop_assert_eq!(rts_simulation_time(b), 0.1);
            prop_assert_eq!(rts_simulation_advance(b, 0.05), RtsStatus::InvalidArgument);
        }
        let (ra, rb) = (density(a), density(b));
        let (ma, mb): (f64, f64) = (ra.iter().sum(), rb.iter().sum());
        prop_assert!((ma - mb).abs() <= 1e-12 * ma.abs());
        unsafe {
            rts_simulation_free(a);
            rts_simulation_free(b);
        }
    }
}
