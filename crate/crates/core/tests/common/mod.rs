#![allow(dead_code)]

use std::path::PathBuf;

use holosim::scenario::{load_scenario, parse_scenario, Scenario};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn two_pair_scenario() -> Scenario {
    load_scenario(scenario_dir().join("two_pair.json")).expect("bundled scenario loads")
}

pub fn sweep_scenario() -> Scenario {
    load_scenario(scenario_dir().join("capacity_sweep.json")).expect("bundled scenario loads")
}

/// Minimal scenario with one Tx and one Rx, both directional.
pub fn single_pair(rows: usize, cols: usize, tx: [f64; 3], rx: [f64; 3]) -> Scenario {
    parse_scenario(
        &format!(
            r#"{{
                "frequency_hz": 1e10,
                "surface": {{"rows": {rows}, "cols": {cols}, "dy_m": 0.012, "dz_m": 0.012}},
                "tx_nodes": [{{"position_m": [{}, {}, {}], "beam": {{"type": "directional"}}}}],
                "rx_users": [{{"position_m": [{}, {}, {}]}}],
                "pairs": [[1, 1]],
                "noise_variance_w": 1e-12,
                "seed": 3
            }}"#,
            tx[0], tx[1], tx[2], rx[0], rx[1], rx[2]
        ),
        "inline",
    )
    .expect("inline scenario is valid")
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

pub fn wrap_pi(x: f64) -> f64 {
    let y =
        (x + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
    if y <= -std::f64::consts::PI {
        y + 2.0 * std::f64::consts::PI
    } else {
        y
    }
}

/// Brute-force power allocation: dynamic programming over a grid of
/// `units` equal power quanta. Returns the best capacity on the grid.
pub fn grid_capacity(nu: &[f64], p_total: f64, noise: f64, units: usize) -> f64 {
    let dp_step = p_total / units as f64;
    let mut best = vec![0.0f64; units + 1];
    for &v in nu {
        let gain: Vec<f64> = (0..=units)
            .map(|u| (1.0 + v * v * u as f64 * dp_step / noise).log2())
            .collect();
        let prev = best.clone();
        for total in 0..=units {
            best[total] = (0..=total)
                .map(|u| prev[total - u] + gain[u])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    best[units]
}

/// Random complex matrix with entries uniform on the unit square.
pub fn random_matrix(
    rng: &mut impl rand::Rng,
    rows: usize,
    cols: usize,
) -> nalgebra::DMatrix<num_complex::Complex64> {
    nalgebra::DMatrix::from_fn(rows, cols, |_, _| {
        num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// One directional Tx, one Rx and a single element at the origin with the
/// given frequency, pitch, element exponent, gains `[tx, element, rx]` and
/// Tx power. The element is `dy` by `0.8 dy`.
#[allow(clippy::too_many_arguments)]
pub fn single_element(
    freq: f64,
    dy: f64,
    tx: [f64; 3],
    rx: [f64; 3],
    q_el: f64,
    g: [f64; 3],
    p_t: f64,
) -> Scenario {
    parse_scenario(
        &serde_json::json!({
            "frequency_hz": freq,
            "surface": {"rows": 1, "cols": 1, "dy_m": dy, "dz_m": dy * 0.8,
                        "element_gain": g[1], "element_pattern_exponent": q_el},
            "tx_nodes": [{"position_m": tx, "beam": {"type": "directional", "pattern_exponent": 1.3},
                          "gain": g[0], "power_w": p_t}],
            "rx_users": [{"position_m": rx, "gain": g[2], "pattern_exponent": 0.7}],
            "pairs": [[1, 1]],
            "noise_variance_w": 1e-12,
            "seed": 5
        })
        .to_string(),
        "inline",
    )
    .expect("single-element scenario is valid")
}

/// Friis cascade through the element at the origin of [`single_element`],
/// written out step by step. Both nodes aim at the element, so their own
/// patterns are 1; the element pattern is `cos^(2 q)` of the angle from
/// the surface normal.
#[allow(clippy::too_many_arguments)]
pub fn cascade_power(
    freq: f64,
    dy: f64,
    tx: [f64; 3],
    rx: [f64; 3],
    q_el: f64,
    g: [f64; 3],
    p_t: f64,
    gamma: f64,
) -> f64 {
    let pi = std::f64::consts::PI;
    let lambda = holosim::SPEED_OF_LIGHT / freq;
    let norm = |p: [f64; 3]| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let (d_t, d_r) = (norm(tx), norm(rx));
    let f_in = (tx[0] / d_t).powf(2.0 * q_el);
    let f_out = (rx[0] / d_r).powf(2.0 * q_el);
    let p_in = g[0] * p_t / (4.0 * pi * d_t * d_t) * f_in * dy * (dy * 0.8);
    let p_out = p_in * gamma * gamma;
    p_out * g[1] * f_out * g[2] * (lambda / (4.0 * pi * d_r)).powi(2)
}
