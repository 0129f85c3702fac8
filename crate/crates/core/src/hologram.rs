//! Holographic synthesis of phase-only surface profiles.
//!
//! Each Tx node illuminates the surface with a reference wave; each target
//! direction is an outgoing plane-wave object wave. The recorded hologram
//! is the sum over pairs of `object / reference`, of which only the phase
//! is kept. Re-illuminating with one reference reconstructs its object
//! wave plus cross terms from the other pairs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SurfaceProfile;
use crate::error::{Error, Result};
use crate::scenario::{direction_angles, NodeFrame, NodePosition, Scenario, SurfaceGeometry};

/// Whether the recording divides by the full reference wave or only by
/// its phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingAmplitude {
    #[default]
    Full,
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridTag {
    Reference(usize),
    Object(usize),
    Hologram,
    Reconstruction,
}

/// Complex value per surface element, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFieldGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Complex64>,
    pub tag: GridTag,
}

impl ComplexFieldGrid {
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[(m - 1) * self.cols + (n - 1)]
    }
}

/// Phase map that focuses Tx `n_t` back onto itself: path length plus the
/// vortex winding.
pub fn single_node_compensation(scenario: &Scenario, n_t: usize) -> Result<SurfaceProfile> {
    let tx = scenario.tx(n_t)?;
    let k = scenario.wavenumber();
    let l = tx.beam.mode as f64;
    let g = &scenario.geometry;
    let mut phases = Vec::with_capacity(g.len());
    for (_, _, p) in g.elements() {
        let d = positive_distance(p, tx.position)?;
        phases.push(k * d + l * p.z.atan2(p.y));
    }
    SurfaceProfile::from_phases(g.rows, g.cols, &phases)
}

fn positive_distance(a: NodePosition, b: NodePosition) -> Result<f64> {
    let d = a.distance_to(b);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(
            "node coincides with a surface element".into(),
        ))
    }
}

/// Field of Tx `n_t` on the surface. The azimuthal vortex phase is
/// `-l * atan2(z, y)` in surface coordinates; the beam pattern supplies
/// magnitude only.
pub fn reference_wave(scenario: &Scenario, n_t: usize) -> Result<ComplexFieldGrid> {
    let tx = scenario.tx(n_t)?;
    let frame = NodeFrame::toward_surface_center(tx.position)?;
    let k = scenario.wavenumber();
    let l = tx.beam.mode as f64;
    let g = &scenario.geometry;
    let mut values = Vec::with_capacity(g.len());
    for (_, _, p) in g.elements() {
        let (theta, dphi, d) = frame.local_angles(p)?;
        let mag = tx.beam.complex_gain(theta, dphi).norm() / d;
        values.push(Complex64::from_polar(mag, -k * d - l * p.z.atan2(p.y)));
    }
    Ok(ComplexFieldGrid {
        rows: g.rows,
        cols: g.cols,
        values,
        tag: GridTag::Reference(n_t),
    })
}

/// Unit-magnitude plane wave leaving the surface toward (theta, phi).
pub fn object_wave(
    geometry: &SurfaceGeometry,
    wavenumber: f64,
    theta: f64,
    phi: f64,
) -> ComplexFieldGrid {
    let (s, cp, sp) = (theta.sin(), phi.cos(), phi.sin());
    let values = geometry
        .elements()
        .map(|(_, _, p)| Complex64::from_polar(1.0, -wavenumber * (p.y * s * cp + p.z * s * sp)))
        .collect();
    ComplexFieldGrid {
        rows: geometry.rows,
        cols: geometry.cols,
        values,
        tag: GridTag::Object(0),
    }
}

/// One recorded pair: Tx index, outgoing direction and amplitude weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTarget {
    pub tx: usize,
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

/// Targets implied by the scenario's pair map: each Tx is steered toward
/// the direction of its paired Rx seen from the surface centre.
pub fn pair_targets(scenario: &Scenario) -> Result<Vec<PairTarget>> {
    scenario
        .pairs
        .iter()
        .map(|p| {
            let rx = scenario.rx(p.rx)?;
            let (theta, phi) = direction_angles(NodePosition::ORIGIN, rx.position)?;
            Ok(PairTarget {
                tx: p.tx,
                theta,
                phi,
                weight: p.weight,
            })
        })
        .collect()
}

/// Accumulated hologram before phase-only normalisation.
pub fn record_field(scenario: &Scenario, targets: &[PairTarget]) -> Result<ComplexFieldGrid> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("no pair targets to record".into()));
    }
    let mut seen = vec![false; scenario.n_tx() + 1];
    for t in targets {
        scenario.tx(t.tx)?;
        if std::mem::replace(&mut seen[t.tx], true) {
            return Err(Error::invalid(
                "pairs",
                format!("Tx {} is recorded more than once", t.tx),
            ));
        }
    }
    let g = &scenario.geometry;
    let k = scenario.wavenumber();
    let mut total = vec![Complex64::new(0.0, 0.0); g.len()];
    for t in targets {
        let reference = reference_wave(scenario, t.tx)?;
        let object = object_wave(g, k, t.theta, t.phi);
        for (i, (m, n, p)) in g.elements().enumerate() {
            let u_ref = reference.values[i];
            let mag = u_ref.norm();
            if !(mag > 0.0 && mag.is_finite()) {
                return Err(Error::SingularRecording {
                    m,
                    n,
                    y: p.y,
                    z: p.z,
                });
            }
            let denom = match scenario.recording_amplitude {
                RecordingAmplitude::Full => u_ref,
                RecordingAmplitude::Unit => u_ref / mag,
            };
            total[i] += t.weight * object.values[i] / denom;
        }
    }
    Ok(ComplexFieldGrid {
        rows: g.rows,
        cols: g.cols,
        values: total,
        tag: GridTag::Hologram,
    })
}

/// Phase-only hologram: `exp(j * arg(sum_pairs O_pair))`.
pub fn record(scenario: &Scenario, targets: &[PairTarget]) -> Result<SurfaceProfile> {
    let total = record_field(scenario, targets)?;
    let values = total
        .values
        .iter()
        .map(|v| Complex64::from_polar(1.0, v.arg()))
        .collect();
    SurfaceProfile::from_values(total.rows, total.cols, values)
}

/// Records every pair of the scenario.
pub fn design(scenario: &Scenario) -> Result<SurfaceProfile> {
    record(scenario, &pair_targets(scenario)?)
}

/// Outgoing aperture field `profile * reference`.
pub fn reconstruct(
    profile: &SurfaceProfile,
    reference: &ComplexFieldGrid,
) -> Result<ComplexFieldGrid> {
    if profile.rows != reference.rows || profile.cols != reference.cols {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} grid", profile.rows, profile.cols),
            actual: format!("{}x{} grid", reference.rows, reference.cols),
        });
    }
    let values = profile
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| a * b)
        .collect();
    Ok(ComplexFieldGrid {
        rows: profile.rows,
        cols: profile.cols,
        values,
        tag: GridTag::Reconstruction,
    })
}

/// Aperture field of the surface when only Tx `n_t` transmits.
pub fn excite(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    n_t: usize,
) -> Result<ComplexFieldGrid> {
    reconstruct(profile, &reference_wave(scenario, n_t)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizerSpec {
    pub bits: u32,
    pub amplitude_loss_db: f64,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self {
            bits: 2,
            amplitude_loss_db: 0.0,
        }
    }
}

impl QuantizerSpec {
    pub fn new(bits: u32, amplitude_loss_db: f64) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::invalid("bits", "must lie in 1..=16"));
        }
        if !(amplitude_loss_db >= 0.0 && amplitude_loss_db.is_finite()) {
            return Err(Error::invalid("amplitude_loss_db", "must be >= 0"));
        }
        Ok(Self {
            bits,
            amplitude_loss_db,
        })
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.levels() as f64
    }

    /// Index of the nearest phase centre; exact ties go up.
    pub fn index_of(&self, phase: f64) -> usize {
        let wrapped = phase.rem_euclid(2.0 * PI);
        let ratio = wrapped / self.step();
        // Absorb rounding in the degree-to-radian conversion so a nominal
        // tie is treated as one.
        let idx = (ratio + 0.5 + 1e-9).floor() as usize;
        idx % self.levels()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedProfile {
    pub profile: SurfaceProfile,
    pub indices: Vec<usize>,
    pub spec: QuantizerSpec,
}

/// Snaps every phase to `2^bits` equally spaced centres starting at 0 and
/// applies the configured amplitude loss.
pub fn quantize(profile: &SurfaceProfile, spec: QuantizerSpec) -> QuantizedProfile {
    let loss = 10f64.powf(-spec.amplitude_loss_db / 20.0);
    let mut indices = Vec::with_capacity(profile.values.len());
    let values = profile
        .values
        .iter()
        .map(|v| {
            let idx = spec.index_of(v.arg());
            indices.push(idx);
            Complex64::from_polar(v.norm() * loss, idx as f64 * spec.step())
        })
        .collect();
    QuantizedProfile {
        profile: SurfaceProfile {
            rows: profile.rows,
            cols: profile.cols,
            values,
        },
        indices,
        spec,
    }
}
