use std::sync::Arc;

use fraclobc_core::evolve::{
    eigen_for_solver, run, sine_bump, snapshot_table, step_with_dt, zdot_inequality_check,
    SolverConfig, MONITOR_COLUMNS,
};
use fraclobc_core::regularize::{
    double_regularize, supersolution_residual, RegParams, SpaceTimeFunction,
};
use fraclobc_core::table::Table;
use fraclobc_core::{FracLapOperator, Grid};

fn setup(n: usize, amp: f64, t_end: f64) -> (SolverConfig, fraclobc_core::GridFunction) {
    let cfg = SolverConfig {
        record_every: 25,
        snapshot_every: 10,
        ..SolverConfig::new(0.75, 2.0, n, t_end)
    };
    let g = Arc::new(Grid::new(cfg.domain, n).unwrap());
    let u0 = sine_bump(&g, amp, 1.0).unwrap();
    (cfg, u0)
}

#[test]
fn monitor_and_snapshot_csv_schema() {
    let (cfg, u0) = setup(96, 2.0, 0.05);
    let eig = eigen_for_solver(&cfg.domain, cfg.s, cfg.n, 4, 1e-10).unwrap();
    let tr = run(&u0, &cfg, &eig).unwrap();
    let csv = tr.monitor_table().to_csv();
    assert!(csv.starts_with(&(MONITOR_COLUMNS.join(",") + "\n")));
    assert!(!csv.contains('\r'));
    let back = Table::parse_csv(&csv).unwrap();
    assert_eq!(back.rows.len(), tr.monitors.len());
    assert_eq!(
        back.column("z").unwrap(),
        tr.monitors.iter().map(|m| m.z).collect::<Vec<_>>()
    );
    let snap = snapshot_table(tr.final_state());
    assert_eq!(snap.header, ["x", "u"]);
    assert_eq!(snap.rows.len(), 96);
    assert!(tr.snapshots.len() > 2);
    // deterministic
    let again = run(&u0, &cfg, &eig).unwrap();
    assert_eq!(again.monitor_table().to_csv(), csv);
}

#[test]
fn mass_inequality_chain_on_nonlinear_run() {
    let (cfg, u0) = setup(128, 3.0, 0.3);
    let eig = eigen_for_solver(&cfg.domain, cfg.s, cfg.n, 4, 1e-10).unwrap();
    let tr = run(&u0, &cfg, &eig).unwrap();
    let rep = zdot_inequality_check(&tr, &eig, cfg.p).unwrap();
    assert!(!rep.degenerate);
    assert!(rep.holder_holds && rep.poincare_holds);
    assert!(rep.c5 > 0.0 && rep.coverage >= 0.95);
    // ż >= -λ^η z + ∫G^pφ holds for the scheme up to the step-difference error
    let zmax = tr.monitors.iter().map(|m| m.z).fold(0.0, f64::max);
    assert!(rep.energy_defect > -1e-3 * zmax, "{}", rep.energy_defect);
}

/// Minimum residual of the regularized discrete solution on the middle half
/// of the interval, away from the first and last recorded times.
fn regularized_residual(n: usize) -> f64 {
    let s = 0.75;
    let cfg = SolverConfig::new(s, 2.0, n, 0.1);
    let g = Arc::new(Grid::new(cfg.domain, n).unwrap());
    let op = FracLapOperator::assemble(g.clone(), s).unwrap();
    let steps = (0.1 * op.max_diag() / 0.5).ceil() as usize;
    let dt = 0.1 / steps as f64;
    let stride = steps / 40;
    let mut u = sine_bump(&g, 1.0, 1.0).unwrap();
    let mut times = vec![0.0];
    let mut vals = u.values().to_vec();
    for k in 1..=steps {
        u = step_with_dt(&u, &op, &cfg, dt).unwrap();
        if k % stride == 0 {
            times.push(k as f64 * dt);
            vals.extend_from_slice(u.values());
        }
    }
    let f = SpaceTimeFunction::new(g, times, vals).unwrap();
    let w = double_regularize(&f, RegParams::new(2e-3, 2e-3, 1e-3).unwrap()).unwrap();
    let r = supersolution_residual(&w, &op, 2.0).unwrap();
    let mut m = f64::INFINITY;
    for k in 3..r.m() - 3 {
        for i in n / 4..3 * n / 4 {
            m = m.min(r.at(k, i));
        }
    }
    m
}

#[test]
fn regularized_trajectory_is_nearly_supersolution() {
    let slack: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| (-regularized_residual(n)).max(0.0))
        .collect();
    assert!(slack[0] < 0.05, "{slack:?}");
    for w in slack.windows(2) {
        assert!(w[1] <= w[0], "{slack:?}");
    }
    assert_eq!(slack[2], 0.0, "{slack:?}");
}
