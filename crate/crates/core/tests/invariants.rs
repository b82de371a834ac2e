//! Solution invariants checked through the public pipeline on small grids.

use blowlab::pipeline::{simulate, summarize};
use blowlab::{RunConfig, StopReason};
use proptest::prelude::*;

fn small(p1: f64, p2: f64, q1: f64, q2: f64) -> RunConfig {
    let mut cfg = RunConfig::with_powers(p1, p2, q1, q2);
    cfg.grid.nodes = 61;
    cfg.time.m_stop = 1e3;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_stay_positive_and_sup_norms_grow(
        p1 in 1.5f64..3.5,
        p2 in 1.5f64..3.5,
        q1 in 1.05f64..2.0,
        q2 in 1.05f64..2.0,
    ) {
        let run = simulate(&small(p1, p2, q1, q2)).unwrap();
        prop_assert_eq!(run.result.stop_reason, StopReason::Threshold);
        let s = &run.result.series;
        prop_assert!(s.t.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(s.m_u.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(s.m_v.windows(2).all(|w| w[1] >= w[0]));
        for snap in &run.result.snapshots {
            prop_assert!(snap.state.u.iter().chain(&snap.state.v).all(|x| *x >= 0.0 && x.is_finite()));
        }
    }

    #[test]
    fn symmetric_systems_keep_u_equal_to_v(p in 1.5f64..3.5, q in 1.05f64..2.0) {
        let run = simulate(&small(p, p, q, q)).unwrap();
        for snap in &run.result.snapshots {
            prop_assert_eq!(&snap.state.u, &snap.state.v);
        }
        prop_assert_eq!(&run.result.series.m_u, &run.result.series.m_v);
    }
}

#[test]
fn refining_the_grid_moves_the_threshold_time_little() {
    let t_stop = |nodes: usize| {
        let mut cfg = small(2.0, 3.0, 1.2, 1.2);
        cfg.grid.nodes = nodes;
        cfg.time.m_stop = 1e6;
        let run = simulate(&cfg).unwrap();
        assert_eq!(run.result.stop_reason, StopReason::Threshold);
        *run.result.series.t.last().unwrap()
    };
    let (coarse, fine) = (t_stop(201), t_stop(401));
    assert!((coarse - fine).abs() / fine < 0.05, "{coarse} vs {fine}");
}

#[test]
fn manifest_replay_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(2.0, 2.5, 1.3, 1.4);
    let run = simulate(&cfg).unwrap();
    let summary = summarize(&run.result.series, &run.exps, run.resolved.fit);
    blowlab::pipeline::write_run(dir.path(), &run, &summary, false).unwrap();
    let replayed = blowlab::pipeline::load_config(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(replayed, run.resolved.echo);
    assert_eq!(simulate(&replayed).unwrap().result, run.result);
}
