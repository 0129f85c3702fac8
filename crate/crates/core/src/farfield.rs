//! Far-field cut of an aperture field in the x-y plane, main-lobe
//! extraction and pairwise isolation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{channel_response, SurfaceProfile};
use crate::error::{Error, Result};
use crate::hologram::ComplexFieldGrid;
use crate::scenario::{Scenario, SurfaceGeometry};

/// Pattern samples on a strictly increasing angle grid. `psi` is measured
/// from the surface normal, positive toward +y.
#[derive(Clone, Debug, PartialEq)]
pub struct FarfieldCut {
    pub angles_deg: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FarfieldCut {
    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Magnitude normalised to a 0 dB peak.
    pub fn normalized_db(&self) -> Vec<f64> {
        let peak = self.peak_magnitude();
        self.values
            .iter()
            .map(|v| 20.0 * (v.norm() / peak).log10())
            .collect()
    }

    /// Normalised level at the sample closest to `angle_deg`.
    pub fn level_db_at(&self, angle_deg: f64) -> f64 {
        let i = self
            .angles_deg
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - angle_deg).abs().total_cmp(&(b.1 - angle_deg).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        20.0 * (self.values[i].norm() / self.peak_magnitude()).log10()
    }

    /// Sum of |E|^2 times the angular step; a grid-convergence proxy.
    pub fn energy(&self) -> f64 {
        if self.angles_deg.len() < 2 {
            return 0.0;
        }
        let step = self.angles_deg[1] - self.angles_deg[0];
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * step
    }

    /// CSV rows `angle_deg,mag_db,phase_rad`.
    pub fn rows(&self) -> Vec<[f64; 3]> {
        self.angles_deg
            .iter()
            .zip(self.normalized_db())
            .zip(&self.values)
            .map(|((a, db), v)| [*a, db, v.arg()])
            .collect()
    }
}

/// Uniform angle grid `min..=max` (degrees). The sample count is fixed by
/// rounding so repeated calls give identical grids.
pub fn angle_grid(min_deg: f64, max_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg.is_finite()) {
        return Err(Error::invalid("step", "must be positive"));
    }
    if max_deg <= min_deg
        || max_deg.is_nan()
        || min_deg.is_nan()
        || min_deg < -90.0
        || max_deg > 90.0
    {
        return Err(Error::invalid(
            "angle range",
            "need -90 <= min < max <= 90 degrees",
        ));
    }
    let n = ((max_deg - min_deg) / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min_deg + i as f64 * step_deg).collect())
}

/// `E(psi) = sum aperture * element_amp(psi) * exp(+j k y sin psi)`.
pub fn farfield_cut(
    aperture: &ComplexFieldGrid,
    geometry: &SurfaceGeometry,
    wavenumber: f64,
    angles_deg: &[f64],
) -> Result<FarfieldCut> {
    if aperture.values.is_empty() {
        return Err(Error::EmptyInput("aperture has no elements".into()));
    }
    if angles_deg.is_empty() {
        return Err(Error::EmptyInput("angle grid is empty".into()));
    }
    if aperture.rows != geometry.rows || aperture.cols != geometry.cols {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} aperture", geometry.rows, geometry.cols),
            actual: format!("{}x{} aperture", aperture.rows, aperture.cols),
        });
    }
    if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("angles", "grid must be strictly increasing"));
    }
    let ys: Vec<f64> = geometry.elements().map(|(_, _, p)| p.y).collect();
    let values = angles_deg
        .par_iter()
        .map(|&deg| {
            let psi = deg.to_radians();
            let s = psi.sin();
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, y) in aperture.values.iter().zip(&ys) {
                acc += a * Complex64::from_polar(1.0, wavenumber * y * s);
            }
            acc * geometry.element_amplitude(psi.abs())
        })
        .collect();
    Ok(FarfieldCut {
        angles_deg: angles_deg.to_vec(),
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MainLobe {
    pub angle_deg: f64,
    /// Absolute peak level, `20 log10 |E|`.
    pub peak_db: f64,
    /// Width between the -3 dB crossings; `None` when the lobe runs off
    /// either end of the cut.
    pub width_3db_deg: Option<f64>,
}

/// Global maximum, refined by a parabola through the three samples around
/// it (in dB).
pub fn main_lobe(cut: &FarfieldCut) -> Result<MainLobe> {
    let n = cut.values.len();
    if n == 0 {
        return Err(Error::EmptyInput("far-field cut is empty".into()));
    }
    let mags: Vec<f64> = cut.values.iter().map(|v| v.norm()).collect();
    let (imax, &vmax) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if vmax <= 0.0 || vmax.is_nan() {
        return Err(Error::AmbiguousPeak("pattern is identically zero".into()));
    }
    let near: Vec<usize> = (0..n).filter(|&i| mags[i] >= vmax * (1.0 - 1e-9)).collect();
    let contiguous = near.windows(2).all(|w| w[1] == w[0] + 1);
    if !contiguous || near.len() > 2 {
        return Err(Error::AmbiguousPeak(format!(
            "{} samples within 1e-9 of the maximum",
            near.len()
        )));
    }

    let db: Vec<f64> = mags.iter().map(|m| 20.0 * m.log10()).collect();
    let (mut angle, mut peak) = (cut.angles_deg[imax], db[imax]);
    if imax > 0 && imax + 1 < n && db[imax - 1].is_finite() && db[imax + 1].is_finite() {
        let (a, b, c) = (db[imax - 1], db[imax], db[imax + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            let offset = 0.5 * (a - c) / denom;
            let h = 0.5 * (cut.angles_deg[imax + 1] - cut.angles_deg[imax - 1]);
            angle += offset * h;
            peak = b - 0.25 * (a - c) * offset;
        }
    }

    let level = db[imax] - 3.0;
    let crossing = |i: usize, j: usize| {
        let t = (db[i] - level) / (db[i] - db[j]);
        cut.angles_deg[i] + t * (cut.angles_deg[j] - cut.angles_deg[i])
    };
    let left = (0..imax)
        .rev()
        .find(|&i| db[i] < level)
        .map(|i| crossing(i + 1, i));
    let right = (imax + 1..n)
        .find(|&i| db[i] < level)
        .map(|i| crossing(i - 1, i));
    let width = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };
    Ok(MainLobe {
        angle_deg: angle,
        peak_db: peak,
        width_3db_deg: width,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolationRow {
    pub rx: usize,
    pub paired_tx: usize,
    pub paired_power_w: f64,
    pub cross_power_w: f64,
    /// `None` when no other Tx is active.
    pub isolation_db: Option<f64>,
}

/// Received power at every Rx with one Tx active at a time, and the
/// paired-to-cross ratio per Rx.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolationTable {
    /// `powers_w[r][t]`: power at Rx `r + 1` when only Tx `t + 1` radiates.
    pub powers_w: Vec<Vec<f64>>,
    pub rows: Vec<IsolationRow>,
}

pub fn isolation(scenario: &Scenario, profile: &SurfaceProfile) -> Result<IsolationTable> {
    let mut powers_w = vec![vec![0.0; scenario.n_tx()]; scenario.n_rx()];
    for (r, row) in powers_w.iter_mut().enumerate() {
        for (t, p) in row.iter_mut().enumerate() {
            let h = channel_response(scenario, profile, t + 1, r + 1)?;
            *p = h.norm_sqr() * scenario.tx_nodes[t].power_w;
        }
    }
    let paired: Vec<usize> = scenario.pairs.iter().map(|p| p.tx).collect();
    let rows = scenario
        .pairs
        .iter()
        .map(|p| {
            let own = powers_w[p.rx - 1][p.tx - 1];
            let others: Vec<usize> = paired.iter().copied().filter(|&t| t != p.tx).collect();
            let cross: f64 = others.iter().map(|&t| powers_w[p.rx - 1][t - 1]).sum();
            IsolationRow {
                rx: p.rx,
                paired_tx: p.tx,
                paired_power_w: own,
                cross_power_w: cross,
                isolation_db: if others.is_empty() {
                    None
                } else {
                    Some(10.0 * (own / cross).log10())
                },
            }
        })
        .collect();
    Ok(IsolationTable { powers_w, rows })
}
