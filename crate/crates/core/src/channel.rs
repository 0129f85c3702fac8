//! Cascade line-of-sight channel: Tx -> surface element -> Rx.
//!
//! Fields carry the square root of every power pattern so that the
//! received power of a single-element field equals the Friis cascade power
//! exactly. Channel responses are dimensionless: `|h|^2` is the power an
//! Rx collects per watt radiated by the Tx.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beams::BeamSpec;
use crate::error::{Error, Result};
use crate::scenario::{direction_angles, hex_digest, NodeFrame, NodePosition, RxUser, Scenario};
use crate::FREE_SPACE_IMPEDANCE;

/// How pattern factors enter the field expression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldConvention {
    /// Amplitude patterns (square roots of the power patterns).
    #[default]
    PowerConsistent,
    /// Power patterns to the first power inside the field, kept for
    /// comparison only; breaks the field/power roundtrip.
    AsPrinted,
}

/// Per-element complex reflection coefficients, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceProfile {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Complex64>,
}

impl SurfaceProfile {
    /// `A = 1, phi = 0` everywhere: a plain mirror.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![Complex64::new(1.0, 0.0); rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", rows * cols),
                actual: format!("{} values", values.len()),
            });
        }
        let profile = Self { rows, cols, values };
        profile.check_passive()?;
        Ok(profile)
    }

    /// Unit-amplitude profile from phases (radians).
    pub fn from_phases(rows: usize, cols: usize, phases: &[f64]) -> Result<Self> {
        let values = phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        Self::from_values(rows, cols, values)
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[(m - 1) * self.cols + (n - 1)]
    }

    pub fn phases(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.arg()).collect()
    }

    pub fn check_passive(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::invalid(
                    format!("profile[{}][{}]", i / self.cols + 1, i % self.cols + 1),
                    "reflection coefficient is not finite",
                ));
            }
            if v.norm() > 1.0 + 1e-12 {
                return Err(Error::invalid(
                    format!("profile[{}][{}]", i / self.cols + 1, i % self.cols + 1),
                    format!("|gamma| = {} exceeds 1 on a passive surface", v.norm()),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn check_against(&self, scenario: &Scenario) -> Result<()> {
        let g = &scenario.geometry;
        if self.rows != g.rows || self.cols != g.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} profile", g.rows, g.cols),
                actual: format!("{}x{} profile", self.rows, self.cols),
            });
        }
        Ok(())
    }

    /// SHA-256 over the little-endian bytes of every coefficient.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(self.values.len() * 16 + 16);
        bytes.extend_from_slice(&(self.rows as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.values {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        hex_digest(&bytes)
    }
}

/// `N_R x N_T` matrix of channel responses; entry `(r, t)` is
/// `h^{t+1, r+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    pub h: DMatrix<Complex64>,
    pub scenario_hash: String,
    pub beam_set: Vec<String>,
    pub profile_hash: String,
}

impl ChannelMatrix {
    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    /// CSV with header `rx_index,tx_index,re,im`, 1-based indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rx_index,tx_index,re,im\n");
        for r in 0..self.n_rx() {
            for t in 0..self.n_tx() {
                let v = self.h[(r, t)];
                let _ = writeln!(out, "{},{},{},{}", r + 1, t + 1, v.re, v.im);
            }
        }
        out
    }
}

/// Geometry of one Tx -> element -> Rx path, everything except the
/// reflection coefficient.
struct PathTerms {
    d_t: f64,
    d_r: f64,
    tx_gain: Complex64,
    elem_in: f64,
    elem_out: f64,
    rx_amp: f64,
}

fn path_terms(
    scenario: &Scenario,
    beam: &BeamSpec,
    frames: (&NodeFrame, &NodeFrame),
    tx_pos: NodePosition,
    rx: &RxUser,
    element: NodePosition,
) -> Result<PathTerms> {
    let (tx_frame, rx_frame) = frames;
    let rx_pos = rx.position;
    let (theta_t, phi_t, d_t) = tx_frame.local_angles(element)?;
    let (theta_r, _, d_r) = rx_frame.local_angles(element)?;
    let (theta_in, _) = direction_angles(element, tx_pos)?;
    let (theta_out, _) = direction_angles(element, rx_pos)?;
    let g = &scenario.geometry;
    Ok(PathTerms {
        d_t,
        d_r,
        tx_gain: beam.complex_gain(theta_t, phi_t),
        elem_in: g.element_amplitude(theta_in),
        elem_out: g.element_amplitude(theta_out),
        rx_amp: rx.amplitude(theta_r),
    })
}

fn cascade_field(
    scenario: &Scenario,
    terms: &PathTerms,
    gamma: Complex64,
    tx_gain_factor: f64,
    power_w: f64,
) -> Complex64 {
    let g = &scenario.geometry;
    let k = scenario.wavenumber();
    let scale =
        (2.0 * FREE_SPACE_IMPEDANCE * tx_gain_factor * g.element_gain * power_w * g.dy * g.dz)
            .sqrt()
            / (4.0 * PI * terms.d_t * terms.d_r);
    let patterns = match scenario.field_convention {
        FieldConvention::PowerConsistent => {
            terms.tx_gain * (terms.elem_in * terms.elem_out * terms.rx_amp)
        }
        FieldConvention::AsPrinted => {
            let mag = terms.tx_gain.norm();
            let phase = if mag > 0.0 {
                terms.tx_gain / mag
            } else {
                Complex64::new(0.0, 0.0)
            };
            phase * (mag * mag * (terms.elem_in * terms.elem_out * terms.rx_amp).powi(2))
        }
    };
    scale * gamma * patterns * Complex64::from_polar(1.0, -k * (terms.d_t + terms.d_r))
}

/// Power captured by element (m, n) from Tx `n_t`, before reflection.
pub fn incident_power(scenario: &Scenario, n_t: usize, m: usize, n: usize) -> Result<f64> {
    let tx = scenario.tx(n_t)?;
    let element = scenario.geometry.element_position(m, n)?;
    let frame = NodeFrame::toward_surface_center(tx.position)?;
    let (theta_t, phi_t, d) = frame.local_angles(element)?;
    let (theta_in, _) = direction_angles(element, tx.position)?;
    let g = &scenario.geometry;
    let f_t = tx.beam.power_pattern(theta_t, phi_t);
    let f_e = g.element_amplitude(theta_in).powi(2);
    Ok(tx.gain * tx.power_w / (4.0 * PI * d * d) * f_t * f_e * g.dy * g.dz)
}

/// Field at Rx `n_r` produced by element (m, n) under illumination from
/// Tx `n_t` radiating its configured power, V/m.
pub fn element_cascade_field(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    n_t: usize,
    n_r: usize,
    m: usize,
    n: usize,
) -> Result<Complex64> {
    profile.check_against(scenario)?;
    let tx = scenario.tx(n_t)?;
    let rx = scenario.rx(n_r)?;
    let element = scenario.geometry.element_position(m, n)?;
    let tx_frame = NodeFrame::toward_surface_center(tx.position)?;
    let rx_frame = NodeFrame::toward_surface_center(rx.position)?;
    let terms = path_terms(
        scenario,
        &tx.beam,
        (&tx_frame, &rx_frame),
        tx.position,
        rx,
        element,
    )?;
    Ok(cascade_field(
        scenario,
        &terms,
        profile.get(m, n),
        tx.gain,
        tx.power_w,
    ))
}

/// Effective aperture of Rx `n_r`, m^2.
pub fn effective_aperture(scenario: &Scenario, n_r: usize) -> Result<f64> {
    let lambda = scenario.wavelength();
    Ok(scenario.rx(n_r)?.gain * lambda * lambda / (4.0 * PI))
}

/// Power delivered to Rx `n_r` by a total incident field.
pub fn received_power(scenario: &Scenario, n_r: usize, field: Complex64) -> Result<f64> {
    Ok(field.norm_sqr() * effective_aperture(scenario, n_r)? / (2.0 * FREE_SPACE_IMPEDANCE))
}

fn response_with_beam(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    beam: &BeamSpec,
    n_t: usize,
    n_r: usize,
) -> Result<Complex64> {
    profile.check_against(scenario)?;
    let tx = scenario.tx(n_t)?;
    let rx = scenario.rx(n_r)?;
    let tx_frame = NodeFrame::toward_surface_center(tx.position)?;
    let rx_frame = NodeFrame::toward_surface_center(rx.position)?;
    let g = &scenario.geometry;
    let idx: Vec<(usize, usize)> = (1..=g.rows)
        .flat_map(|m| (1..=g.cols).map(move |n| (m, n)))
        .collect();
    // Per-element terms in parallel, summed in row-major order.
    let terms: Vec<Complex64> = idx
        .par_iter()
        .map(|&(m, n)| {
            let element = g.position_unchecked(m, n);
            let t = path_terms(
                scenario,
                beam,
                (&tx_frame, &rx_frame),
                tx.position,
                rx,
                element,
            )?;
            Ok(cascade_field(
                scenario,
                &t,
                profile.values[g.flat(m, n)],
                tx.gain,
                1.0,
            ))
        })
        .collect::<Result<_>>()?;
    let total: Complex64 = terms.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
    let aperture = effective_aperture(scenario, n_r)?;
    Ok(total * (aperture / (2.0 * FREE_SPACE_IMPEDANCE)).sqrt())
}

/// Dimensionless response `h^{n_t, n_r}` through the whole surface, for a
/// Tx radiating one watt.
pub fn channel_response(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    n_t: usize,
    n_r: usize,
) -> Result<Complex64> {
    let beam = &scenario.tx(n_t)?.beam;
    response_with_beam(scenario, profile, beam, n_t, n_r)
}

/// Full `N_R x N_T` matrix with `beams[t]` active on Tx `t + 1`.
pub fn channel_matrix(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    beams: &[BeamSpec],
) -> Result<ChannelMatrix> {
    if beams.len() != scenario.n_tx() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} beams", scenario.n_tx()),
            actual: format!("{} beams", beams.len()),
        });
    }
    let (nr, nt) = (scenario.n_rx(), scenario.n_tx());
    let mut h = DMatrix::from_element(nr, nt, Complex64::new(0.0, 0.0));
    for r in 0..nr {
        for t in 0..nt {
            h[(r, t)] = response_with_beam(scenario, profile, &beams[t], t + 1, r + 1)?;
        }
    }
    Ok(ChannelMatrix {
        h,
        scenario_hash: scenario.content_hash(),
        beam_set: beams.iter().map(beam_label).collect(),
        profile_hash: profile.content_hash(),
    })
}

/// Matrix with each node's configured beam.
pub fn scenario_channel(scenario: &Scenario, profile: &SurfaceProfile) -> Result<ChannelMatrix> {
    let beams: Vec<BeamSpec> = scenario.tx_nodes.iter().map(|t| t.beam.clone()).collect();
    channel_matrix(scenario, profile, &beams)
}

pub fn beam_label(beam: &BeamSpec) -> String {
    if beam.kind.is_vortex() {
        format!("{}(l={})", beam.kind.label(), beam.mode)
    } else {
        beam.kind.label().to_string()
    }
}

/// `y = G_r H P x + z`, with `P` per-Tx amplitude scalings and `G_r`
/// per-Rx gains.
pub fn apply_channel(
    h: &DMatrix<Complex64>,
    x: &[Complex64],
    tx_amplitudes: &[f64],
    rx_gains: &[f64],
    noise: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (nr, nt) = h.shape();
    let check = |what: &str, len: usize, want: usize| {
        if len == want {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{want} {what}"),
                actual: format!("{len} {what}"),
            })
        }
    };
    check("transmit symbols", x.len(), nt)?;
    check("transmit amplitudes", tx_amplitudes.len(), nt)?;
    check("receive gains", rx_gains.len(), nr)?;
    check("noise samples", noise.len(), nr)?;
    Ok((0..nr)
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..nt {
                acc += h[(r, t)] * tx_amplitudes[t] * x[t];
            }
            rx_gains[r] * acc + noise[r]
        })
        .collect())
}

/// Circularly-symmetric complex Gaussian samples from a ChaCha20 substream.
///
/// The master seed picks the key and `stream` picks an independent
/// substream, so adding users or SNR points never shifts existing draws.
pub struct NoiseSource {
    rng: ChaCha20Rng,
}

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// One sample with `E|z|^2 = variance` (Box-Muller).
    pub fn sample(&mut self, variance: f64) -> Complex64 {
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let r = (-variance * u1.ln()).sqrt();
        Complex64::from_polar(r, 2.0 * PI * u2)
    }

    pub fn fill(&mut self, variance: f64, out: &mut [Complex64]) {
        for z in out {
            *z = self.sample(variance);
        }
    }

    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let word: u64 = self.rng.random();
            for b in 0..64 {
                if out.len() == n {
                    break;
                }
                out.push(((word >> b) & 1) as u8);
            }
        }
        out
    }
}
