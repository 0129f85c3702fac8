//! Symbol-rate Monte-Carlo link over the simulated pair channels.
//!
//! Each user sees its paired Tx through one complex gain and every other
//! paired Tx as interference carrying that Tx's own data. The receiver
//! equalises by the desired gain, so the SNR axis is the post-channel
//! desired-signal SNR (Es/N0).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{scenario_channel, NoiseSource, SurfaceProfile};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// BER threshold under which hard-decision FEC decodes quasi error-free.
pub const FEC_LIMIT: f64 = 3.8e-3;

/// Fewest bits per SNR point accepted by [`run_link`].
pub const MIN_BITS_PER_POINT: usize = 100_000;

const STREAM_DATA: u64 = 1 << 40;
const STREAM_NOISE: u64 = 2 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
        }
    }

    /// Constellation indexed by the symbol's bits read MSB first.
    ///
    /// QPSK: `I = (1 - 2 b0)/sqrt2`, `Q = (1 - 2 b1)/sqrt2`, so `00` maps to
    /// `(1 + j)/sqrt2`. 16-QAM: `I` from `(b0, b2)` and `Q` from `(b1, b3)`
    /// with `00 -> +1, 01 -> +3, 10 -> -1, 11 -> -3`, scaled by `1/sqrt10`.
    pub fn constellation(self) -> Vec<Complex64> {
        match self {
            Modulation::Qpsk => (0..4)
                .map(|i| {
                    let (b0, b1) = ((i >> 1) & 1, i & 1);
                    Complex64::new(level2(b0), level2(b1)) / 2f64.sqrt()
                })
                .collect(),
            Modulation::Qam16 => (0..16)
                .map(|i| {
                    let (b0, b1, b2, b3) = ((i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1);
                    Complex64::new(level4(b0, b2), level4(b1, b3)) / 10f64.sqrt()
                })
                .collect(),
        }
    }
}

fn level2(b: usize) -> f64 {
    1.0 - 2.0 * b as f64
}

fn level4(sign: usize, outer: usize) -> f64 {
    level2(sign) * (1.0 + 2.0 * outer as f64)
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Modulation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Modulation::Qam16),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// Maps bits (0/1, MSB of each symbol first) to symbols.
pub fn modulate(bits: &[u8], scheme: Modulation) -> Result<Vec<Complex64>> {
    let k = scheme.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(Error::DimensionMismatch {
            expected: format!("a multiple of {k} bits"),
            actual: format!("{} bits", bits.len()),
        });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("bits", "values must be 0 or 1"));
    }
    let points = scheme.constellation();
    Ok(bits
        .chunks_exact(k)
        .map(|c| points[c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)])
        .collect())
}

/// Index of the nearest constellation point; ties go to the lower index.
pub fn decide(symbol: Complex64, points: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (symbol - p).norm_sqr();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Hard-decision minimum-distance demodulation.
pub fn demodulate(symbols: &[Complex64], scheme: Modulation) -> Vec<u8> {
    let k = scheme.bits_per_symbol();
    let points = scheme.constellation();
    let mut out = Vec::with_capacity(symbols.len() * k);
    for &s in symbols {
        let idx = decide(s, &points);
        for b in (0..k).rev() {
            out.push(((idx >> b) & 1) as u8);
        }
    }
    out
}

/// Data-aided RMS error vector magnitude, percent.
pub fn evm(received: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if received.is_empty() {
        return Err(Error::EmptyInput("no symbols for EVM".into()));
    }
    if received.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} symbols", reference.len()),
            actual: format!("{} symbols", received.len()),
        });
    }
    let err: f64 = received
        .iter()
        .zip(reference)
        .map(|(r, s)| (r - s).norm_sqr())
        .sum();
    let sig: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if sig == 0.0 {
        return Err(Error::EmptyInput(
            "reference symbols carry no energy".into(),
        ));
    }
    Ok(100.0 * (err / sig).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointStats {
    pub bit_errors: usize,
    pub bits: usize,
    pub symbols: usize,
    pub ber: f64,
    pub evm_pct: f64,
    pub sinr_db: f64,
}

fn data_stream(tx: usize, snr_index: usize) -> u64 {
    STREAM_DATA | ((tx as u64) << 20) | snr_index as u64
}

fn noise_stream(rx: usize, snr_index: usize) -> u64 {
    STREAM_NOISE | ((rx as u64) << 20) | snr_index as u64
}

/// Bits of Tx `tx` at SNR point `snr_index`; shared by every receiver that
/// hears this Tx.
pub fn tx_bits(seed: u64, tx: usize, snr_index: usize, n: usize) -> Vec<u8> {
    NoiseSource::new(seed, data_stream(tx, snr_index)).bits(n)
}

/// One SNR point for one user. `interferers` holds `(tx, h_cross / h_desired)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_point(
    scheme: Modulation,
    bits: usize,
    es_n0_db: f64,
    seed: u64,
    user: usize,
    desired_tx: usize,
    interferers: &[(usize, Complex64)],
    snr_index: usize,
) -> Result<PointStats> {
    let k = scheme.bits_per_symbol();
    if bits == 0 || !bits.is_multiple_of(k) {
        return Err(Error::invalid(
            "bits",
            format!("must be a positive multiple of {k}"),
        ));
    }
    let own_bits = tx_bits(seed, desired_tx, snr_index, bits);
    let own = modulate(&own_bits, scheme)?;
    let mut received = own.clone();
    let mut interference_power = 0.0;
    for &(tx, ratio) in interferers {
        let other = modulate(&tx_bits(seed, tx, snr_index, bits), scheme)?;
        for (r, s) in received.iter_mut().zip(&other) {
            *r += ratio * s;
        }
        interference_power += ratio.norm_sqr();
    }
    let noise_var = 10f64.powf(-es_n0_db / 10.0);
    let mut noise = NoiseSource::new(seed, noise_stream(user, snr_index));
    for r in received.iter_mut() {
        *r += noise.sample(noise_var);
    }
    let decided = demodulate(&received, scheme);
    let bit_errors = decided
        .iter()
        .zip(&own_bits)
        .filter(|(a, b)| a != b)
        .count();
    Ok(PointStats {
        bit_errors,
        bits,
        symbols: own.len(),
        ber: bit_errors as f64 / bits as f64,
        evm_pct: evm(&received, &own)?,
        sinr_db: -10.0 * (interference_power + noise_var).log10(),
    })
}

/// Interference-free link at Es/N0 `es_n0_db`.
pub fn simulate_awgn(
    scheme: Modulation,
    bits: usize,
    es_n0_db: f64,
    seed: u64,
    snr_index: usize,
) -> Result<PointStats> {
    simulate_point(scheme, bits, es_n0_db, seed, 1, 1, &[], snr_index)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkPoint {
    pub user: usize,
    pub snr_db: f64,
    pub ber: f64,
    pub evm_pct: f64,
    pub sinr_db: f64,
    pub bits: usize,
    pub symbols: usize,
    pub bit_errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserSummary {
    pub user: usize,
    pub paired_tx: usize,
    /// First grid SNR whose BER is at or below [`FEC_LIMIT`].
    pub fec_crossing_snr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkReport {
    pub scheme: Modulation,
    pub seed: u64,
    pub bits_per_point: usize,
    pub fec_limit: f64,
    pub users: Vec<UserSummary>,
    pub points: Vec<LinkPoint>,
}

impl LinkReport {
    pub fn curve(&self, user: usize) -> Vec<&LinkPoint> {
        self.points.iter().filter(|p| p.user == user).collect()
    }
}

/// Link run over an explicit channel matrix (`h[(r, t)]`, Rx by Tx) with
/// per-Tx radiated powers.
pub fn run_link_matrix(
    h: &DMatrix<Complex64>,
    tx_powers_w: &[f64],
    pairs: &[(usize, usize)],
    scheme: Modulation,
    snr_grid_db: &[f64],
    bits_per_point: usize,
    seed: u64,
) -> Result<LinkReport> {
    if bits_per_point < MIN_BITS_PER_POINT {
        return Err(Error::InsufficientBits {
            got: bits_per_point,
            required: MIN_BITS_PER_POINT,
        });
    }
    let k = scheme.bits_per_symbol();
    if !bits_per_point.is_multiple_of(k) {
        return Err(Error::invalid(
            "bits",
            format!("must be a multiple of {k} for {}", scheme.name()),
        ));
    }
    if snr_grid_db.is_empty() {
        return Err(Error::EmptyInput("SNR grid is empty".into()));
    }
    if snr_grid_db.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("snr", "grid must be finite"));
    }
    if pairs.is_empty() {
        return Err(Error::NonBijectivePairs("no pairs to simulate".into()));
    }
    if tx_powers_w.len() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} Tx powers", h.ncols()),
            actual: format!("{} Tx powers", tx_powers_w.len()),
        });
    }
    for &(t, r) in pairs {
        if t == 0 || t > h.ncols() || r == 0 || r > h.nrows() {
            return Err(Error::NonBijectivePairs(format!(
                "pair ({t}, {r}) outside the {}x{} channel",
                h.nrows(),
                h.ncols()
            )));
        }
    }

    let mut jobs = Vec::new();
    for &(t, r) in pairs {
        let desired = h[(r - 1, t - 1)] * tx_powers_w[t - 1].sqrt();
        if desired.norm() == 0.0 {
            return Err(Error::NoChannel(format!(
                "Rx {r} receives nothing from Tx {t}"
            )));
        }
        let interferers: Vec<(usize, Complex64)> = pairs
            .iter()
            .filter(|(o, _)| *o != t)
            .map(|&(o, _)| (o, h[(r - 1, o - 1)] * tx_powers_w[o - 1].sqrt() / desired))
            .collect();
        for (j, &snr) in snr_grid_db.iter().enumerate() {
            jobs.push((r, t, j, snr, interferers.clone()));
        }
    }
    let points = jobs
        .par_iter()
        .map(|(r, t, j, snr, inter)| {
            let s = simulate_point(scheme, bits_per_point, *snr, seed, *r, *t, inter, *j)?;
            Ok(LinkPoint {
                user: *r,
                snr_db: *snr,
                ber: s.ber,
                evm_pct: s.evm_pct,
                sinr_db: s.sinr_db,
                bits: s.bits,
                symbols: s.symbols,
                bit_errors: s.bit_errors,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let users = pairs
        .iter()
        .map(|&(t, r)| UserSummary {
            user: r,
            paired_tx: t,
            fec_crossing_snr_db: points
                .iter()
                .filter(|p| p.user == r)
                .find(|p| p.ber <= FEC_LIMIT)
                .map(|p| p.snr_db),
        })
        .collect();
    Ok(LinkReport {
        scheme,
        seed,
        bits_per_point,
        fec_limit: FEC_LIMIT,
        users,
        points,
    })
}

/// Monte-Carlo BER/EVM of every pair of `scenario` through `profile`.
pub fn run_link(
    scenario: &Scenario,
    profile: &SurfaceProfile,
    scheme: Modulation,
    snr_grid_db: &[f64],
    bits_per_point: usize,
) -> Result<LinkReport> {
    if bits_per_point < MIN_BITS_PER_POINT {
        return Err(Error::InsufficientBits {
            got: bits_per_point,
            required: MIN_BITS_PER_POINT,
        });
    }
    let h = scenario_channel(scenario, profile)?.h;
    let powers: Vec<f64> = scenario.tx_nodes.iter().map(|t| t.power_w).collect();
    let pairs: Vec<(usize, usize)> = scenario.pairs.iter().map(|p| (p.tx, p.rx)).collect();
    run_link_matrix(
        &h,
        &powers,
        &pairs,
        scheme,
        snr_grid_db,
        bits_per_point,
        scenario.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_zero_bits_map_to_first_quadrant() {
        let s = modulate(&[0, 0], Modulation::Qpsk).unwrap();
        assert!((s[0] - Complex64::new(1.0, 1.0) / 2f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn constellations_have_unit_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let c = m.constellation();
            let e = c.iter().map(|p| p.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_decides_lower_index() {
        let pts = Modulation::Qpsk.constellation();
        let mid = (pts[0] + pts[1]) / 2.0;
        assert_eq!(decide(mid, &pts), 0);
    }

    #[test]
    fn odd_bit_count_is_rejected() {
        assert!(modulate(&[0, 1, 1], Modulation::Qpsk).is_err());
    }

    #[test]
    fn too_few_bits_are_rejected() {
        let h = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let err = run_link_matrix(&h, &[1.0], &[(1, 1)], Modulation::Qpsk, &[10.0], 1000, 1);
        assert!(matches!(
            err,
            Err(Error::InsufficientBits {
                required: MIN_BITS_PER_POINT,
                ..
            })
        ));
    }
}
