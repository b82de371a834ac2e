//! Fixtures shared by the benchmarks.

use blowlab::io::RunConfig;
use blowlab::SupNormSeries;

/// Smooth radial profile on `nodes` points.
pub fn profile(nodes: usize) -> (blowlab::RadialGrid, Vec<f64>) {
    let grid = blowlab::RadialGrid::new(nodes, 1.0).expect("nodes ≥ 3");
    let f = grid
        .coords()
        .map(|r| 20.0 * (-(r / 0.3).powi(2)).exp())
        .collect();
    (grid, f)
}

/// `M = (1−t)^{-α}` on every channel, sampled geometrically in `1−t`.
pub fn power_law_series(alpha: f64, samples: usize) -> SupNormSeries {
    let mut s = SupNormSeries::default();
    for k in 0..samples {
        let tau = 10f64.powf(-6.0 * k as f64 / (samples - 1) as f64);
        let m = tau.powf(-alpha);
        s.push(1.0 - tau, m, m, m, m, m, m, 0.0);
    }
    s
}

/// The two-component run used for rate checks, shortened by `m_stop`.
pub fn system_config(nodes: usize, m_stop: f64) -> RunConfig {
    let mut c = RunConfig::with_powers(2.0, 3.0, 1.2, 1.2);
    c.grid.nodes = nodes;
    c.time.m_stop = m_stop;
    c.init.width = Some(0.3);
    c
}
