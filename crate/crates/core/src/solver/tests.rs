use super::integrator::{Integrator, Power, Source};
use super::*;
use crate::model::{Domain, InitSpec};

fn ball(p1: f64, p2: f64, q: f64, amp: f64, width: f64) -> SystemParams {
    SystemParams {
        p1,
        p2,
        q1: q,
        q2: q,
        n: 1,
        domain: Domain::Ball { radius: 1.0 },
        boundary: Boundary::Dirichlet,
        init: InitSpec {
            kind: InitKind::Gaussian,
            amplitude_u: amp,
            amplitude_v: amp,
            width,
        },
    }
}

fn homogeneous(p1: f64, p2: f64, a: f64) -> SystemParams {
    SystemParams {
        p1,
        p2,
        q1: 1.5,
        q2: 1.5,
        n: 1,
        domain: Domain::TruncatedSpace { radius: 1.0 },
        boundary: Boundary::Neumann,
        init: InitSpec {
            kind: InitKind::Constant,
            amplitude_u: a,
            amplitude_v: a,
            width: 1.0,
        },
    }
}

fn exps(p: &SystemParams) -> Exponents {
    crate::model::compute_exponents(p).unwrap()
}

#[test]
fn power_specializations_agree_with_powf() {
    for e in [2.0, 3.0, 1.5, 2.5, 0.5, 1.2, 6.0 / 11.0] {
        let pw = Power::new(e);
        for x in [0.0, 0.3, 1.0, 7.5, 1e3] {
            let want = f64::powf(x, e);
            assert!(
                (pw.eval(x) - want).abs() <= 1e-14 * want.max(1.0),
                "{e} {x}"
            );
        }
    }
    assert_eq!(Power::new(2.0), Power::Int(2));
    assert_eq!(Power::new(1.5), Power::HalfInt(1));
}

#[test]
fn zero_state_is_an_equilibrium() {
    let p = ball(2.0, 3.0, 1.2, 0.0, 0.3);
    let grid = RadialGrid::new(21, 1.0).unwrap();
    let state = FieldState::zeros(0.0, 21);
    let (next, dt) = step(&state, &grid, &p, &exps(&p), &SolverConfig::default()).unwrap();
    assert!(dt > 0.0);
    assert_eq!(next.u, state.u);
    assert_eq!(next.v, state.v);
}

#[test]
fn constant_data_step_is_the_ode_euler_update() {
    let p = homogeneous(2.0, 2.0, 1.7);
    let grid = RadialGrid::new(3, 1.0).unwrap();
    let state = FieldState {
        t: 0.0,
        u: vec![1.7; 3],
        v: vec![1.7; 3],
    };
    let (next, dt) = step(&state, &grid, &p, &exps(&p), &SolverConfig::default()).unwrap();
    let want = 1.7 + dt * (1.7 * 1.7);
    assert!(next.u.iter().chain(&next.v).all(|x| *x == want));
    // The reaction cap binds: relative growth dt·a^{p-1} = cap.
    assert!((dt * 1.7 - 0.05).abs() < 1e-15);
}

#[test]
fn gaussian_step_respects_both_caps() {
    let p = ball(2.0, 3.0, 1.2, 20.0, 0.3);
    let grid = RadialGrid::new(201, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let e = exps(&p);
    let mut state = FieldState {
        t: 0.0,
        u: p.init.sample(&grid, p.boundary).0,
        v: p.init.sample(&grid, p.boundary).1,
    };
    let max = |f: &[f64]| f.iter().copied().fold(0.0, f64::max);
    for _ in 0..200 {
        let before = max(&state.u) + max(&state.v);
        let (next, dt) = step(&state, &grid, &p, &e, &cfg).unwrap();
        assert!(dt <= cfg.safety * grid.h() * grid.h() / 2.0 * (1.0 + 1e-15));
        let after = max(&next.u) + max(&next.v);
        assert!(after <= before * (1.0 + cfg.reaction_cap) * (1.0 + 1e-12));
        assert!(next.u.iter().chain(&next.v).all(|x| *x >= 0.0));
        assert_eq!(*next.u.last().unwrap(), 0.0);
        state = next;
    }
}

#[test]
fn ode_run_crosses_threshold_at_closed_form_time() {
    // u' = u², u(0) = 1: u = 1/(1 − t) reaches 1e6 at t = 1 − 1e-6.
    let p = homogeneous(2.0, 2.0, 1.0);
    let grid = RadialGrid::new(3, 1.0).unwrap();
    let cfg = SolverConfig {
        reaction_cap: 1e-4,
        m_stop: 1e6,
        ..SolverConfig::default()
    };
    let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    assert_eq!(run.stop_reason, StopReason::Threshold);
    let t_end = *run.series.t.last().unwrap();
    assert!((t_end - (1.0 - 1e-6)).abs() <= 2e-4, "{t_end}");
}

#[test]
fn ode_blowup_time_converges_under_refinement() {
    // u' = u³ from 1: T = 1/2.
    let p = homogeneous(3.0, 3.0, 1.0);
    let grid = RadialGrid::new(3, 1.0).unwrap();
    let mut errs = Vec::new();
    for cap in [1e-2, 1e-3, 1e-4] {
        let cfg = SolverConfig {
            reaction_cap: cap,
            m_stop: 1e8,
            ..SolverConfig::default()
        };
        let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
        errs.push((run.series.t.last().unwrap() - 0.5).abs());
    }
    assert!(
        errs[0] > 5.0 * errs[1] && errs[1] > 5.0 * errs[2],
        "{errs:?}"
    );
    assert!(errs[2] < 1e-4);
}

#[test]
fn ode_trajectory_matches_closed_form() {
    // a(1 − (p−1)a^{p−1}t)^{−1/(p−1)} with p = 2, a = 0.5 while u ≤ 200.
    let (pw, a) = (2.0, 0.5);
    let p = homogeneous(pw, pw, a);
    let grid = RadialGrid::new(3, 1.0).unwrap();
    let cfg = SolverConfig {
        reaction_cap: 1e-6,
        m_stop: 200.0,
        record_every: 1000,
        ..SolverConfig::default()
    };
    let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    for (t, u) in run.series.t.iter().zip(&run.series.max_u) {
        let exact = a * (1.0 - (pw - 1.0) * a.powf(pw - 1.0) * t).powf(-1.0 / (pw - 1.0));
        assert!((u - exact).abs() <= 1e-3 * exact, "t = {t}: {u} vs {exact}");
    }
}

#[test]
fn zero_data_runs_to_t_max() {
    let p = ball(2.0, 3.0, 1.2, 0.0, 0.3);
    let grid = RadialGrid::new(11, 1.0).unwrap();
    let cfg = SolverConfig {
        t_max: 0.01,
        ..SolverConfig::default()
    };
    let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    assert_eq!(run.stop_reason, StopReason::TMax);
    assert!(run
        .series
        .m_u
        .iter()
        .chain(&run.series.m_v)
        .all(|m| *m == 0.0));
    assert_eq!(*run.series.t.last().unwrap(), 0.01);
    assert!(run.final_state().u.iter().all(|x| *x == 0.0));
}

#[test]
fn series_invariants_hold_on_a_pde_run() {
    let p = ball(2.0, 3.0, 1.2, 20.0, 0.3);
    let grid = RadialGrid::new(101, 1.0).unwrap();
    let cfg = SolverConfig {
        m_stop: 1e8,
        record_every: 1,
        ..SolverConfig::default()
    };
    let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    assert_eq!(run.stop_reason, StopReason::Threshold);
    let s = &run.series;
    assert!(s.t.windows(2).all(|w| w[1] > w[0]));
    assert!(s.m_u.windows(2).all(|w| w[1] >= w[0]));
    assert!(s.m_v.windows(2).all(|w| w[1] >= w[0]));
    assert!(s.max_u.iter().zip(&s.m_u).all(|(a, m)| a <= m));
    // Sampled every step, so per-step growth of M is visible directly.
    let limit = (1.0 + cfg.reaction_cap) * (1.0 + 1e-9);
    assert!(s.m_u.windows(2).all(|w| w[1] <= limit * w[0]));
    assert!(s.m_v.windows(2).all(|w| w[1] <= limit * w[0]));
    // Doubling frames come in consecutive-step triplets.
    let lags: Vec<(u32, u32, u64)> = run
        .snapshots
        .iter()
        .filter_map(|s| match s.kind {
            SnapshotKind::Doubling { level, lag } => Some((level, lag, s.step)),
            _ => None,
        })
        .collect();
    assert!(lags.len() >= 3 * 8);
    for w in lags.chunks(3) {
        assert_eq!((w[0].1, w[1].1, w[2].1), (2, 1, 0));
        assert_eq!(w[0].2 + 1, w[1].2);
        assert_eq!(w[1].2 + 1, w[2].2);
    }
    for snap in &run.snapshots {
        assert!(snap
            .state
            .u
            .iter()
            .chain(&snap.state.v)
            .all(|x| *x >= 0.0 && x.is_finite()));
        assert_eq!(*snap.state.u.last().unwrap(), 0.0);
    }
}

#[test]
fn symmetric_system_equals_scalar_run() {
    let p = ball(2.0, 2.0, 1.2, 20.0, 0.3);
    let grid = RadialGrid::new(101, 1.0).unwrap();
    let cfg = SolverConfig {
        m_stop: 1e6,
        ..SolverConfig::default()
    };
    let sys = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    let sca = run_scalar(2.0, 1.2, &p, &grid, &cfg).unwrap();
    assert_eq!(sys.series.len(), sca.series.len());
    for (a, b) in sys.series.m_u.iter().zip(&sca.series.m_u) {
        assert!((a - b).abs() <= 1e-10 * a);
    }
    for snap in &sys.snapshots {
        let scale = snap.state.u.iter().copied().fold(0.0, f64::max);
        for (u, v) in snap.state.u.iter().zip(&snap.state.v) {
            assert!((u - v).abs() <= 1e-10 * scale);
        }
    }
    for (a, b) in sys.snapshots.iter().zip(&sca.snapshots) {
        for (x, y) in a.state.u.iter().zip(&b.state.u) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }
}

#[test]
fn zero_scalar_data_stays_zero() {
    let p = ball(2.0, 2.0, 1.2, 0.0, 0.3);
    let grid = RadialGrid::new(11, 1.0).unwrap();
    let cfg = SolverConfig {
        t_max: 0.001,
        ..SolverConfig::default()
    };
    let run = run_scalar(2.0, 1.2, &p, &grid, &cfg).unwrap();
    assert!(run.final_state().u.iter().all(|x| *x == 0.0));
}

#[test]
fn larger_data_stays_larger() {
    let grid = RadialGrid::new(81, 1.0).unwrap();
    let cfg = SolverConfig::default();
    for (lo, hi) in [(5.0, 6.0), (10.0, 10.5), (2.0, 8.0)] {
        let small = ball(2.0, 3.0, 1.2, lo, 0.3);
        let large = ball(2.0, 3.0, 1.2, hi, 0.3);
        for t in [0.002, 0.004, 0.006] {
            let a = integrate_to(&small, &grid, &cfg, t).unwrap();
            let b = integrate_to(&large, &grid, &cfg, t).unwrap();
            assert!(a.u.iter().zip(&b.u).all(|(x, y)| x <= y));
            assert!(a.v.iter().zip(&b.v).all(|(x, y)| x <= y));
        }
    }
}

#[test]
fn transform_of_zero_data_is_zero() {
    let p = ball(3.0, 3.0, 2.0, 0.0, 0.3);
    let grid = RadialGrid::new(11, 1.0).unwrap();
    let cfg = SolverConfig {
        t_max: 0.001,
        ..SolverConfig::default()
    };
    let run = transform_oracle(3.0, &p, &grid, &cfg, &[0.0; 11]).unwrap();
    assert!(log1p_profile(&run.final_state().u)
        .iter()
        .all(|x| *x == 0.0));
}

#[test]
fn transform_starts_from_the_same_profile() {
    let p = ball(3.0, 3.0, 2.0, 2.0, 0.3);
    let grid = RadialGrid::new(51, 1.0).unwrap();
    let u0 = p.init.sample(&grid, p.boundary).0;
    let cfg = SolverConfig {
        t_max: 1e-6,
        ..SolverConfig::default()
    };
    let run = transform_oracle(3.0, &p, &grid, &cfg, &u0).unwrap();
    let back = log1p_profile(&run.snapshots[0].state.u);
    for (a, b) in back.iter().zip(&u0) {
        assert!((a - b).abs() <= 1e-15 * b.max(1.0));
    }
    let mapped = log1p_snapshots(&run.snapshots);
    assert_eq!(mapped.len(), run.snapshots.len());
    assert_eq!(mapped[0].state.u, back);
    assert_eq!(mapped[0].step, run.snapshots[0].step);
}

#[test]
fn transform_agrees_with_direct_run_on_a_coarse_grid() {
    let p = ball(3.0, 3.0, 2.0, 5.0, 0.3);
    let grid = RadialGrid::new(201, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let cmp = compare_with_transform(3.0, &p, &grid, &cfg, 6.0, 50).unwrap();
    assert!(cmp.checks > 10);
    assert!(cmp.max_u > 5.5);
    assert!(cmp.sup_diff < 2e-3, "{cmp:?}");
}

#[test]
fn truncated_space_detects_contamination() {
    let p = SystemParams {
        domain: Domain::TruncatedSpace { radius: 1.7 },
        init: InitSpec {
            kind: InitKind::Gaussian,
            amplitude_u: 1.0,
            amplitude_v: 1.0,
            width: 0.3,
        },
        ..ball(2.0, 3.0, 1.2, 1.0, 0.3)
    };
    p.validate().unwrap();
    let grid = RadialGrid::new(61, 1.7).unwrap();
    let cfg = SolverConfig {
        t_max: 5.0,
        ..SolverConfig::default()
    };
    // Small data diffuses outwards and reaches the truncation.
    let run = run_to_blowup(&p, &exps(&p), &grid, &cfg).unwrap();
    assert_eq!(run.stop_reason, StopReason::TruncationContaminated);
}

#[test]
fn rejects_bad_configuration() {
    let p = ball(2.0, 3.0, 1.2, 20.0, 0.3);
    let grid = RadialGrid::new(11, 1.0).unwrap();
    let bad = SolverConfig {
        m_stop: 10.0,
        ..SolverConfig::default()
    };
    assert!(matches!(
        run_to_blowup(&p, &exps(&p), &grid, &bad),
        Err(SolverError::Config(_))
    ));
    let wrong_grid = RadialGrid::new(11, 2.0).unwrap();
    assert!(run_to_blowup(&p, &exps(&p), &wrong_grid, &SolverConfig::default()).is_err());
    let bad = SolverConfig {
        safety: 1.5,
        ..SolverConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn integrator_reports_its_diffusive_step() {
    let p = ball(2.0, 3.0, 1.2, 1.0, 0.3);
    let grid = RadialGrid::new(11, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let it = Integrator::new(
        &grid,
        3,
        Boundary::Dirichlet,
        Source::Scalar {
            p: Power::new(2.0),
            q: Power::new(1.2),
        },
        &cfg,
        (0.5, 0.5),
        FieldState::zeros(0.0, 11),
    )
    .unwrap();
    assert_eq!(it.dt_diffusive(), diffusive_dt(&grid, 3, &cfg));
    let _ = p;
}
