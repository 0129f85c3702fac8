//! Shannon capacity of the effective channel: SVD, water-filling and
//! sweeps over SNR and beam sets.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beams::BeamSpec;
use crate::channel::{channel_matrix, SurfaceProfile};
use crate::error::{Error, Result};
use crate::scenario::{NodePosition, RxUser, Scenario, TxNode};

/// Water-filling solution. `powers[k]` belongs to `singular_values[k]` as
/// passed in (not re-sorted).
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    pub water_level: f64,
    pub powers: Vec<f64>,
    pub active: Vec<usize>,
}

/// Exact active-set water-filling over singular values `nu`.
pub fn water_fill(nu: &[f64], p_total: f64, noise_variance: f64) -> Result<PowerAllocation> {
    if !(p_total > 0.0 && p_total.is_finite()) {
        return Err(Error::invalid("p_total", "must be positive"));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid("noise_variance", "must be positive"));
    }
    if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("singular_values", "must be finite and >= 0"));
    }
    let mut order: Vec<usize> = (0..nu.len()).filter(|&k| nu[k] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::NoChannel("every singular value is zero".into()));
    }
    order.sort_by(|&a, &b| nu[b].total_cmp(&nu[a]).then(a.cmp(&b)));
    let floor = |k: usize| noise_variance / (nu[k] * nu[k]);

    let mut active = order.len();
    let level = loop {
        let sum: f64 = order[..active].iter().map(|&k| floor(k)).sum();
        let mu = (p_total + sum) / active as f64;
        if mu > floor(order[active - 1]) || active == 1 {
            break mu;
        }
        active -= 1;
    };
    let mut powers = vec![0.0; nu.len()];
    for &k in &order[..active] {
        powers[k] = (level - floor(k)).max(0.0);
    }
    let mut active_set: Vec<usize> = order[..active].to_vec();
    active_set.sort_unstable();
    Ok(PowerAllocation {
        water_level: level,
        powers,
        active: active_set,
    })
}

/// `sum log2(1 + nu_k^2 p_k / noise)`.
pub fn capacity_of_allocation(nu: &[f64], powers: &[f64], noise_variance: f64) -> f64 {
    nu.iter()
        .zip(powers)
        .map(|(v, p)| (1.0 + v * v * p / noise_variance).log2())
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityReport {
    pub capacity_bps_hz: f64,
    pub singular_values: Vec<f64>,
    pub cond_number: f64,
    pub allocation: Option<PowerAllocation>,
}

pub fn singular_values(h: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::invalid("H", "channel matrix has non-finite entries"));
    }
    if h.is_empty() {
        return Err(Error::EmptyInput("channel matrix is empty".into()));
    }
    let mut s: Vec<f64> = h.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Capacity with optimal power allocation. An all-zero channel carries
/// nothing and reports zero rather than failing.
pub fn capacity(
    h: &DMatrix<Complex64>,
    p_total: f64,
    noise_variance: f64,
) -> Result<CapacityReport> {
    let nu = singular_values(h)?;
    if nu.iter().all(|&v| v == 0.0) {
        return Ok(CapacityReport {
            capacity_bps_hz: 0.0,
            singular_values: nu,
            cond_number: f64::INFINITY,
            allocation: None,
        });
    }
    let alloc = water_fill(&nu, p_total, noise_variance)?;
    Ok(CapacityReport {
        capacity_bps_hz: capacity_of_allocation(&nu, &alloc.powers, noise_variance),
        cond_number: cond_from(&nu),
        singular_values: nu,
        allocation: Some(alloc),
    })
}

fn cond_from(nu: &[f64]) -> f64 {
    let max = nu[0];
    let min = nu[nu.len() - 1];
    // Relative rank tolerance in the LAPACK style.
    let tol = max * nu.len() as f64 * f64::EPSILON;
    if min <= tol {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `nu_max / nu_min`; infinite when rank-deficient.
pub fn condition_number(h: &DMatrix<Complex64>) -> Result<f64> {
    let nu = singular_values(h)?;
    if nu[0] == 0.0 {
        return Err(Error::NoChannel("zero channel matrix".into()));
    }
    Ok(cond_from(&nu))
}

/// Placement rule for sweeps with a varying number of pairs: Tx nodes and
/// Rx users on lines parallel to y, centred on the surface normal, with
/// the outermost node at the given range from the surface centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayLayout {
    pub tx_spacing_wavelengths: f64,
    pub rx_spacing_wavelengths: f64,
    pub tx_range_m: f64,
    pub rx_range_m: f64,
}

impl ArrayLayout {
    pub(crate) fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("tx_spacing_wavelengths", self.tx_spacing_wavelengths),
            ("rx_spacing_wavelengths", self.rx_spacing_wavelengths),
            ("tx_range_m", self.tx_range_m),
            ("rx_range_m", self.rx_range_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name.to_string(), "must be positive".to_string()));
            }
        }
        out
    }

    fn line(n: usize, spacing: f64, range: f64) -> Result<Vec<NodePosition>> {
        let half = (n as f64 - 1.0) / 2.0 * spacing;
        if half >= range {
            return Err(Error::DegenerateGeometry(format!(
                "{n} nodes at {spacing} m spacing do not fit within range {range} m"
            )));
        }
        let x = (range * range - half * half).sqrt();
        Ok((0..n)
            .map(|i| NodePosition::new(x, (i as f64 - (n as f64 - 1.0) / 2.0) * spacing, 0.0))
            .collect())
    }

    /// Copy of `base` with `n` Tx/Rx pairs placed by this rule; node
    /// gains, powers and patterns come from the first node of each kind.
    pub fn scenario(&self, base: &Scenario, n: usize) -> Result<Scenario> {
        if n == 0 {
            return Err(Error::invalid("pairs", "need at least one pair"));
        }
        let lambda = base.wavelength();
        let txs = Self::line(n, self.tx_spacing_wavelengths * lambda, self.tx_range_m)?;
        let rxs = Self::line(n, self.rx_spacing_wavelengths * lambda, self.rx_range_m)?;
        let tx0 = &base.tx_nodes[0];
        let rx0 = &base.rx_users[0];
        let mut s = base.clone();
        s.tx_nodes = txs
            .into_iter()
            .map(|position| TxNode {
                position,
                ..tx0.clone()
            })
            .collect();
        s.rx_users = rxs
            .into_iter()
            .map(|position| RxUser {
                position,
                ..rx0.clone()
            })
            .collect();
        s.pairs = (1..=n)
            .map(|i| crate::scenario::Pair {
                tx: i,
                rx: i,
                weight: 1.0,
            })
            .collect();
        Ok(s)
    }
}

/// One beam set of a sweep; its length is the number of pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSetEntry {
    pub label: String,
    pub beams: Vec<BeamSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub pairs: usize,
    pub beam_set: String,
    pub capacity_bps_hz: f64,
    pub cond_number: f64,
}

/// Capacity versus SNR for every beam set, with a mirror-like surface
/// (`A = 1, phi = 0`). Each channel is divided by its Frobenius norm and
/// the SNR is `P_total / noise` with unit noise.
pub fn capacity_sweep(
    scenario: &Scenario,
    sets: &[BeamSetEntry],
    snr_db: &[f64],
) -> Result<Vec<CapacityRow>> {
    if snr_db.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("snr", "grid must be finite"));
    }
    let profile = SurfaceProfile::uniform(scenario.geometry.rows, scenario.geometry.cols);
    let mut rows = Vec::new();
    for set in sets {
        let n = set.beams.len();
        let s = match &scenario.layout {
            Some(layout) => layout.scenario(scenario, n)?,
            None => {
                if n > scenario.n_tx() || n > scenario.n_rx() {
                    return Err(Error::invalid(
                        "pairs",
                        format!("{n} pairs requested but the scenario has no layout block"),
                    ));
                }
                let mut s = scenario.clone();
                s.tx_nodes.truncate(n);
                s.rx_users.truncate(n);
                s.pairs.retain(|p| p.tx <= n && p.rx <= n);
                s
            }
        };
        let h = channel_matrix(&s, &profile, &set.beams)?.h;
        let norm = h.norm();
        if norm == 0.0 {
            return Err(Error::NoChannel(format!(
                "beam set {} has no channel",
                set.label
            )));
        }
        let h = h.unscale(norm);
        let cond = condition_number(&h)?;
        for &snr in snr_db {
            let report = capacity(&h, 10f64.powf(snr / 10.0), 1.0)?;
            rows.push(CapacityRow {
                snr_db: snr,
                pairs: n,
                beam_set: set.label.clone(),
                capacity_bps_hz: report.capacity_bps_hz,
                cond_number: cond,
            });
        }
    }
    Ok(rows)
}
