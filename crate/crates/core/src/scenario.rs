//! Scenario data model: surface grid, Tx nodes, Rx users, pair map and
//! the JSON file format they are loaded from.
//!
//! Frame: the surface lies in the y-z plane centred on the origin with its
//! normal along +x. Tx nodes and Rx users sit in front of it (x > 0).
//! All quantities are SI internally; the file format accepts user
//! directions in degrees and converts them on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beams::{BeamKind, BeamSpec};
use crate::capacity::ArrayLayout;
use crate::channel::FieldConvention;
use crate::error::{Error, Result};
use crate::hologram::RecordingAmplitude;
use crate::SPEED_OF_LIGHT;

/// A point in the surface frame, metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl NodePosition {
    pub const ORIGIN: NodePosition = NodePosition {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Position at `range` along the direction (theta from +x, phi from +y
    /// toward +z).
    pub fn from_direction(theta: f64, phi: f64, range: f64) -> Self {
        Self::new(
            range * theta.cos(),
            range * theta.sin() * phi.cos(),
            range * theta.sin() * phi.sin(),
        )
    }

    pub fn offset_to(self, other: NodePosition) -> [f64; 3] {
        [other.x - self.x, other.y - self.y, other.z - self.z]
    }

    pub fn distance_to(self, other: NodePosition) -> f64 {
        let [dx, dy, dz] = self.offset_to(other);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(self) -> f64 {
        self.distance_to(Self::ORIGIN)
    }
}

/// Rectangular grid of `rows x cols` elements in the y-z plane.
///
/// Rows run along y and columns along z. `element_gain` and
/// `element_pattern_exponent` describe every unit cell (g_{m,n} and the
/// cos^q element pattern).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGeometry {
    pub rows: usize,
    pub cols: usize,
    pub dy: f64,
    pub dz: f64,
    pub element_gain: f64,
    pub element_pattern_exponent: f64,
}

impl SurfaceGeometry {
    pub fn new(rows: usize, cols: usize, dy: f64, dz: f64) -> Result<Self> {
        if rows == 0 {
            return Err(Error::invalid("surface.rows", "must be at least 1"));
        }
        if cols == 0 {
            return Err(Error::invalid("surface.cols", "must be at least 1"));
        }
        if !(dy > 0.0 && dy.is_finite()) {
            return Err(Error::invalid("surface.dy_m", "must be positive"));
        }
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(Error::invalid("surface.dz_m", "must be positive"));
        }
        Ok(Self {
            rows,
            cols,
            dy,
            dz,
            element_gain: 1.0,
            element_pattern_exponent: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical extent (y, z) in metres.
    pub fn extent(&self) -> (f64, f64) {
        (self.rows as f64 * self.dy, self.cols as f64 * self.dz)
    }

    pub fn check_index(&self, m: usize, n: usize) -> Result<()> {
        if m < 1 || m > self.rows {
            return Err(Error::invalid(
                "m",
                format!("row {m} outside 1..={}", self.rows),
            ));
        }
        if n < 1 || n > self.cols {
            return Err(Error::invalid(
                "n",
                format!("column {n} outside 1..={}", self.cols),
            ));
        }
        Ok(())
    }

    /// Centre of element (m, n), 1-based.
    pub fn element_position(&self, m: usize, n: usize) -> Result<NodePosition> {
        self.check_index(m, n)?;
        Ok(self.position_unchecked(m, n))
    }

    pub(crate) fn position_unchecked(&self, m: usize, n: usize) -> NodePosition {
        let y = (m as f64 - (self.rows as f64 + 1.0) / 2.0) * self.dy;
        let z = (n as f64 - (self.cols as f64 + 1.0) / 2.0) * self.dz;
        NodePosition::new(0.0, y, z)
    }

    /// Row-major flat index of 1-based (m, n).
    pub(crate) fn flat(&self, m: usize, n: usize) -> usize {
        (m - 1) * self.cols + (n - 1)
    }

    /// `(m, n, position)` in row-major order; the summation order used
    /// everywhere a surface-wide sum is taken.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize, NodePosition)> + '_ {
        (1..=self.rows)
            .flat_map(move |m| (1..=self.cols).map(move |n| (m, n, self.position_unchecked(m, n))))
    }

    /// Amplitude of the element pattern toward elevation `theta` (from the
    /// surface normal); the square root of the power pattern.
    pub fn element_amplitude(&self, theta: f64) -> f64 {
        directional_amplitude(theta, self.element_pattern_exponent)
    }
}

/// `cos^q(theta)` in front, zero behind.
pub(crate) fn directional_amplitude(theta: f64, exponent: f64) -> f64 {
    if theta > std::f64::consts::FRAC_PI_2 {
        return 0.0;
    }
    let c = theta.cos().max(0.0);
    if exponent == 0.0 {
        1.0
    } else {
        c.powf(exponent)
    }
}

/// Elevation from +x and azimuth in the y-z plane from +y toward +z of the
/// direction `from -> to`.
pub fn direction_angles(from: NodePosition, to: NodePosition) -> Result<(f64, f64)> {
    let [dx, dy, dz] = from.offset_to(to);
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::DegenerateGeometry(
            "direction between coincident points".into(),
        ));
    }
    let theta = (dx / r).clamp(-1.0, 1.0).acos();
    Ok((theta, wrap_azimuth(dz.atan2(dy))))
}

/// Maps an atan2 result onto (-pi, pi].
pub(crate) fn wrap_azimuth(phi: f64) -> f64 {
    if phi <= -std::f64::consts::PI {
        phi + 2.0 * std::f64::consts::PI
    } else {
        phi
    }
}

/// Local frame of a node whose antenna boresight points at the surface
/// centre. Azimuth is measured from the projection of +y onto the
/// transverse plane (or +z when the boresight is along y).
#[derive(Clone, Copy, Debug)]
pub struct NodeFrame {
    origin: NodePosition,
    boresight: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
}

impl NodeFrame {
    pub fn toward_surface_center(node: NodePosition) -> Result<Self> {
        let r = node.norm();
        if r == 0.0 {
            return Err(Error::DegenerateGeometry(
                "node located at the surface centre".into(),
            ));
        }
        let b = [-node.x / r, -node.y / r, -node.z / r];
        let mut u = project_out([0.0, 1.0, 0.0], b);
        if norm3(u) < 1e-9 {
            u = project_out([0.0, 0.0, 1.0], b);
        }
        let nu = norm3(u);
        let u = [u[0] / nu, u[1] / nu, u[2] / nu];
        let v = cross(u, b);
        Ok(Self {
            origin: node,
            boresight: b,
            u,
            v,
        })
    }

    /// (theta off boresight, azimuth around it, distance) of `target`.
    pub fn local_angles(&self, target: NodePosition) -> Result<(f64, f64, f64)> {
        let d = self.origin.offset_to(target);
        let r = norm3(d);
        if r == 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "node at ({}, {}, {}) coincides with a surface element",
                target.x, target.y, target.z
            )));
        }
        let cb = dot(d, self.boresight) / r;
        let theta = cb.clamp(-1.0, 1.0).acos();
        let phi = wrap_azimuth(dot(d, self.v).atan2(dot(d, self.u)));
        Ok((theta, phi, r))
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn project_out(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let k = dot(a, b);
    [a[0] - k * b[0], a[1] - k * b[1], a[2] - k * b[2]]
}

#[derive(Clone, Debug, PartialEq)]
pub struct TxNode {
    pub position: NodePosition,
    pub beam: BeamSpec,
    pub gain: f64,
    pub power_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RxUser {
    pub position: NodePosition,
    pub gain: f64,
    pub pattern_exponent: f64,
}

impl RxUser {
    pub fn amplitude(&self, theta: f64) -> f64 {
        directional_amplitude(theta, self.pattern_exponent)
    }
}

/// One Tx -> Rx link of the one-to-one pair map (1-based indices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub tx: usize,
    pub rx: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub frequency_hz: f64,
    pub geometry: SurfaceGeometry,
    pub tx_nodes: Vec<TxNode>,
    pub rx_users: Vec<RxUser>,
    pub pairs: Vec<Pair>,
    pub noise_variance_w: f64,
    pub seed: u64,
    pub field_convention: FieldConvention,
    pub recording_amplitude: RecordingAmplitude,
    pub layout: Option<ArrayLayout>,
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    pub fn n_tx(&self) -> usize {
        self.tx_nodes.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_users.len()
    }

    pub fn tx(&self, n_t: usize) -> Result<&TxNode> {
        if n_t == 0 || n_t > self.tx_nodes.len() {
            return Err(Error::invalid(
                "n_t",
                format!("Tx index {n_t} outside 1..={}", self.tx_nodes.len()),
            ));
        }
        Ok(&self.tx_nodes[n_t - 1])
    }

    pub fn rx(&self, n_r: usize) -> Result<&RxUser> {
        if n_r == 0 || n_r > self.rx_users.len() {
            return Err(Error::invalid(
                "n_r",
                format!("Rx index {n_r} outside 1..={}", self.rx_users.len()),
            ));
        }
        Ok(&self.rx_users[n_r - 1])
    }

    /// Distance from Tx `n_t` to element (m, n).
    pub fn tx_distance(&self, n_t: usize, m: usize, n: usize) -> Result<f64> {
        let p = self.geometry.element_position(m, n)?;
        positive_distance(self.tx(n_t)?.position, p)
    }

    /// Distance from element (m, n) to Rx `n_r`.
    pub fn rx_distance(&self, n_r: usize, m: usize, n: usize) -> Result<f64> {
        let p = self.geometry.element_position(m, n)?;
        positive_distance(p, self.rx(n_r)?.position)
    }

    /// The Rx paired with `n_t`, if any.
    pub fn paired_rx(&self, n_t: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.tx == n_t).map(|p| p.rx)
    }

    pub fn paired_tx(&self, n_r: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.rx == n_r).map(|p| p.tx)
    }

    /// Replaces every Tx beam, keeping positions and powers.
    pub fn with_beams(&self, beams: &[BeamSpec]) -> Result<Scenario> {
        if beams.len() != self.tx_nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} beams", self.tx_nodes.len()),
                actual: format!("{} beams", beams.len()),
            });
        }
        let mut s = self.clone();
        for (node, beam) in s.tx_nodes.iter_mut().zip(beams) {
            node.beam = beam.clone();
        }
        Ok(s)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            frequency_hz: self.frequency_hz,
            surface: SurfaceFile {
                rows: self.geometry.rows as i64,
                cols: self.geometry.cols as i64,
                dy_m: self.geometry.dy,
                dz_m: self.geometry.dz,
                element_gain: Some(self.geometry.element_gain),
                element_pattern_exponent: Some(self.geometry.element_pattern_exponent),
            },
            tx_nodes: self
                .tx_nodes
                .iter()
                .map(|t| TxNodeFile {
                    position_m: t.position.to_array(),
                    beam: BeamFile {
                        kind: t.beam.kind,
                        mode: Some(t.beam.mode),
                        radius_wavelengths: Some(t.beam.radius_wavelengths),
                        pattern_exponent: Some(t.beam.pattern_exponent),
                    },
                    gain: Some(t.gain),
                    power_w: Some(t.power_w),
                })
                .collect(),
            rx_users: self
                .rx_users
                .iter()
                .map(|r| RxUserFile {
                    position_m: Some(r.position.to_array()),
                    direction_deg: None,
                    range_m: None,
                    gain: Some(r.gain),
                    pattern_exponent: Some(r.pattern_exponent),
                })
                .collect(),
            pairs: self.pairs.iter().map(|p| [p.tx, p.rx]).collect(),
            pair_weights: Some(self.pairs.iter().map(|p| p.weight).collect()),
            noise_variance_w: self.noise_variance_w,
            seed: self.seed,
            field_convention: Some(self.field_convention),
            recording_amplitude: Some(self.recording_amplitude),
            layout: self.layout,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file()).expect("scenario serializes");
        hex_digest(canonical.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn positive_distance(a: NodePosition, b: NodePosition) -> Result<f64> {
    let d = a.distance_to(b);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(format!(
            "node at ({}, {}, {}) coincides with a surface element",
            a.x, a.y, a.z
        )))
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub frequency_hz: f64,
    pub surface: SurfaceFile,
    pub tx_nodes: Vec<TxNodeFile>,
    pub rx_users: Vec<RxUserFile>,
    pub pairs: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_weights: Option<Vec<f64>>,
    pub noise_variance_w: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_convention: Option<FieldConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recording_amplitude: Option<RecordingAmplitude>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<ArrayLayout>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub rows: i64,
    pub cols: i64,
    pub dy_m: f64,
    pub dz_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_pattern_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxNodeFile {
    pub position_m: [f64; 3],
    pub beam: BeamFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamFile {
    #[serde(rename = "type")]
    pub kind: BeamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_wavelengths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_exponent: Option<f64>,
}

/// An Rx user is placed either by `position_m` or by `direction_deg`
/// (`[theta, phi]`, degrees) plus `range_m` from the surface centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxUserFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_exponent: Option<f64>,
}

pub const DEFAULT_RADIUS_WAVELENGTHS: f64 = 0.65;

/// A single invariant violation with the JSON path of the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Every violated invariant, in file order. Empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: String, reason: &str| {
            out.push(Violation {
                field,
                reason: reason.to_string(),
            })
        };
        if !positive(self.frequency_hz) {
            bad("frequency_hz".into(), "must be positive");
        }
        let s = &self.surface;
        if s.rows < 1 {
            bad("surface.rows".into(), "must be at least 1");
        }
        if s.cols < 1 {
            bad("surface.cols".into(), "must be at least 1");
        }
        if !positive(s.dy_m) {
            bad("surface.dy_m".into(), "must be positive");
        }
        if !positive(s.dz_m) {
            bad("surface.dz_m".into(), "must be positive");
        }
        if let Some(g) = s.element_gain {
            if !positive(g) {
                bad("surface.element_gain".into(), "must be positive");
            }
        }
        if let Some(q) = s.element_pattern_exponent {
            if !(q >= 0.0 && q.is_finite()) {
                bad("surface.element_pattern_exponent".into(), "must be >= 0");
            }
        }

        if self.tx_nodes.is_empty() {
            bad("tx_nodes".into(), "at least one Tx node is required");
        }
        for (i, t) in self.tx_nodes.iter().enumerate() {
            let p = format!("tx_nodes[{i}]");
            if t.position_m.iter().any(|v| !v.is_finite()) {
                bad(format!("{p}.position_m"), "coordinates must be finite");
            } else if t.position_m[0] <= 0.0 {
                bad(
                    format!("{p}.position_m"),
                    "x must be positive (in front of the surface)",
                );
            }
            let b = &t.beam;
            match b.kind {
                BeamKind::Directional => {
                    if b.mode.unwrap_or(0) != 0 {
                        bad(format!("{p}.beam.mode"), "directional beams carry mode 0");
                    }
                }
                BeamKind::BesselVortex | BeamKind::CircularArray => {
                    if let Some(r) = b.radius_wavelengths {
                        if !positive(r) {
                            bad(format!("{p}.beam.radius_wavelengths"), "must be positive");
                        }
                    }
                    if b.kind == BeamKind::CircularArray && b.mode.unwrap_or(0).abs() > 3 {
                        bad(
                            format!("{p}.beam.mode"),
                            "the 8-element circular array supports |mode| <= 3",
                        );
                    }
                }
            }
            if let Some(q) = b.pattern_exponent {
                if !(q >= 0.0 && q.is_finite()) {
                    bad(format!("{p}.beam.pattern_exponent"), "must be >= 0");
                }
            }
            if let Some(g) = t.gain {
                if !positive(g) {
                    bad(format!("{p}.gain"), "must be positive");
                }
            }
            if let Some(w) = t.power_w {
                if !positive(w) {
                    bad(format!("{p}.power_w"), "must be positive");
                }
            }
        }

        if self.rx_users.is_empty() {
            bad("rx_users".into(), "at least one Rx user is required");
        }
        for (i, r) in self.rx_users.iter().enumerate() {
            let p = format!("rx_users[{i}]");
            match (r.position_m, r.direction_deg) {
                (Some(pos), None) => {
                    if pos.iter().any(|v| !v.is_finite()) {
                        bad(format!("{p}.position_m"), "coordinates must be finite");
                    } else if pos[0] <= 0.0 {
                        bad(
                            format!("{p}.position_m"),
                            "x must be positive (in front of the surface)",
                        );
                    }
                    if r.range_m.is_some() {
                        bad(format!("{p}.range_m"), "only valid with direction_deg");
                    }
                }
                (None, Some([theta, _])) => {
                    if !(0.0..90.0).contains(&theta) {
                        bad(format!("{p}.direction_deg"), "theta must lie in [0, 90)");
                    }
                    match r.range_m {
                        Some(d) if positive(d) => {}
                        _ => bad(
                            format!("{p}.range_m"),
                            "a positive range is required with direction_deg",
                        ),
                    }
                }
                (Some(_), Some(_)) => bad(
                    p.clone(),
                    "give either position_m or direction_deg, not both",
                ),
                (None, None) => bad(p.clone(), "position_m or direction_deg is required"),
            }
            if let Some(g) = r.gain {
                if !positive(g) {
                    bad(format!("{p}.gain"), "must be positive");
                }
            }
            if let Some(q) = r.pattern_exponent {
                if !(q >= 0.0 && q.is_finite()) {
                    bad(format!("{p}.pattern_exponent"), "must be >= 0");
                }
            }
        }

        for (i, [t, r]) in self.pairs.iter().enumerate() {
            if *t < 1 || *t > self.tx_nodes.len() {
                bad(format!("pairs[{i}][0]"), "Tx index out of range");
            }
            if *r < 1 || *r > self.rx_users.len() {
                bad(format!("pairs[{i}][1]"), "Rx index out of range");
            }
        }
        if let Some(w) = &self.pair_weights {
            if w.len() != self.pairs.len() {
                bad("pair_weights".into(), "needs one weight per pair");
            }
            for (i, v) in w.iter().enumerate() {
                if !positive(*v) {
                    bad(format!("pair_weights[{i}]"), "must be positive");
                }
            }
        }
        if !positive(self.noise_variance_w) {
            bad("noise_variance_w".into(), "must be positive");
        }
        if let Some(layout) = &self.layout {
            for (field, reason) in layout.violations() {
                bad(format!("layout.{field}"), &reason);
            }
        }
        out
    }

    fn check_pairs(&self) -> Result<()> {
        let need = self.tx_nodes.len().min(self.rx_users.len());
        let mut seen_tx = vec![false; self.tx_nodes.len() + 1];
        let mut seen_rx = vec![false; self.rx_users.len() + 1];
        for [t, r] in &self.pairs {
            if std::mem::replace(&mut seen_tx[*t], true) {
                return Err(Error::NonBijectivePairs(format!(
                    "Tx {t} appears in more than one pair"
                )));
            }
            if std::mem::replace(&mut seen_rx[*r], true) {
                return Err(Error::NonBijectivePairs(format!(
                    "Rx {r} appears in more than one pair"
                )));
            }
        }
        if self.pairs.len() != need {
            return Err(Error::NonBijectivePairs(format!(
                "{} pairs given, {need} required (one per node on the smaller side)",
                self.pairs.len()
            )));
        }
        Ok(())
    }

    /// Validates and converts into a [`Scenario`].
    pub fn into_scenario(self) -> Result<Scenario> {
        if let Some(v) = self.violations().into_iter().next() {
            return Err(Error::InvalidInput {
                field: v.field,
                reason: v.reason,
            });
        }
        self.check_pairs()?;

        let wavelength = SPEED_OF_LIGHT / self.frequency_hz;
        let mut geometry = SurfaceGeometry::new(
            self.surface.rows as usize,
            self.surface.cols as usize,
            self.surface.dy_m,
            self.surface.dz_m,
        )?;
        geometry.element_gain = self.surface.element_gain.unwrap_or(1.0);
        geometry.element_pattern_exponent = self.surface.element_pattern_exponent.unwrap_or(1.0);

        let tx_nodes = self
            .tx_nodes
            .iter()
            .map(|t| {
                let b = &t.beam;
                let q = b.pattern_exponent.unwrap_or(1.0);
                let beam = match b.kind {
                    BeamKind::Directional => BeamSpec::directional(q),
                    kind => BeamSpec::vortex(
                        kind,
                        b.mode.unwrap_or(0),
                        b.radius_wavelengths.unwrap_or(DEFAULT_RADIUS_WAVELENGTHS),
                        q,
                        wavelength,
                    ),
                };
                TxNode {
                    position: NodePosition::from_array(t.position_m),
                    beam,
                    gain: t.gain.unwrap_or(1.0),
                    power_w: t.power_w.unwrap_or(1.0),
                }
            })
            .collect();

        let rx_users = self
            .rx_users
            .iter()
            .map(|r| {
                let position = match (r.position_m, r.direction_deg) {
                    (Some(p), _) => NodePosition::from_array(p),
                    (None, Some([theta, phi])) => NodePosition::from_direction(
                        theta.to_radians(),
                        phi.to_radians(),
                        r.range_m.unwrap_or(1.0),
                    ),
                    (None, None) => unreachable!("validated above"),
                };
                RxUser {
                    position,
                    gain: r.gain.unwrap_or(1.0),
                    pattern_exponent: r.pattern_exponent.unwrap_or(1.0),
                }
            })
            .collect();

        let weights = self
            .pair_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.pairs.len()]);
        let pairs = self
            .pairs
            .iter()
            .zip(weights)
            .map(|([tx, rx], weight)| Pair {
                tx: *tx,
                rx: *rx,
                weight,
            })
            .collect();

        Ok(Scenario {
            frequency_hz: self.frequency_hz,
            geometry,
            tx_nodes,
            rx_users,
            pairs,
            noise_variance_w: self.noise_variance_w,
            seed: self.seed,
            field_convention: self.field_convention.unwrap_or_default(),
            recording_amplitude: self.recording_amplitude.unwrap_or_default(),
            layout: self.layout,
        })
    }
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    ScenarioFile::parse(text, origin)?.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid36() -> SurfaceGeometry {
        SurfaceGeometry::new(36, 36, 0.012, 0.012).unwrap()
    }

    #[test]
    fn single_element_sits_at_origin() {
        let g = SurfaceGeometry::new(1, 1, 0.01, 0.01).unwrap();
        assert_eq!(g.element_position(1, 1).unwrap(), NodePosition::ORIGIN);
    }

    #[test]
    fn element_18_18_of_36() {
        let p = grid36().element_position(18, 18).unwrap();
        assert!((p.y + 0.006).abs() < 1e-15);
        assert!((p.z + 0.006).abs() < 1e-15);
        assert_eq!(p.x, 0.0);
    }

    #[test]
    fn extent_of_prototype_surface() {
        let (ey, ez) = grid36().extent();
        assert!((ey - 0.432).abs() < 1e-12);
        assert!((ez - 0.432).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let g = grid36();
        assert!(g.element_position(0, 1).is_err());
        assert!(g.element_position(37, 1).is_err());
        assert!(g.element_position(1, 37).is_err());
    }

    #[test]
    fn grid_is_centred_and_point_symmetric() {
        let g = SurfaceGeometry::new(5, 4, 0.01, 0.013).unwrap();
        let (mut sy, mut sz) = (0.0, 0.0);
        for (m, n, p) in g.elements() {
            sy += p.y;
            sz += p.z;
            let q = g.element_position(g.rows + 1 - m, g.cols + 1 - n).unwrap();
            assert!((p.y + q.y).abs() < 1e-15 && (p.z + q.z).abs() < 1e-15);
        }
        assert!(sy.abs() < 1e-12 && sz.abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let tx = NodePosition::new(0.0, -0.25, 0.3);
        let d = tx.distance_to(NodePosition::ORIGIN);
        assert!((d - 0.390_512_483_795_332_9).abs() < 1e-12);
        let d1 = NodePosition::new(1.0, 0.0, 0.0).distance_to(NodePosition::ORIGIN);
        assert_eq!(d1, 1.0);
        let a = NodePosition::new(0.3, 0.25, 0.0).distance_to(NodePosition::ORIGIN);
        let b = NodePosition::new(0.3, -0.25, 0.0).distance_to(NodePosition::ORIGIN);
        assert_eq!(a, b);
    }

    #[test]
    fn direction_examples() {
        let o = NodePosition::ORIGIN;
        let (t, _) = direction_angles(o, NodePosition::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(t, 0.0);
        let (t, p) = direction_angles(o, NodePosition::new(0.0, 1.0, 0.0)).unwrap();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-15 && p == 0.0);
        let (t, p) = direction_angles(o, NodePosition::new(1.0, 1.0, 0.0)).unwrap();
        assert!((t - std::f64::consts::FRAC_PI_4).abs() < 1e-15 && p == 0.0);
        let (_, p) = direction_angles(o, NodePosition::new(1.0, -1.0, -0.0)).unwrap();
        assert_eq!(p, std::f64::consts::PI);
        assert!(direction_angles(o, o).is_err());
    }

    #[test]
    fn node_frame_on_axis_matches_surface_azimuth() {
        let f = NodeFrame::toward_surface_center(NodePosition::new(0.5, 0.0, 0.0)).unwrap();
        let (theta, phi, r) = f.local_angles(NodePosition::new(0.0, 0.1, 0.1)).unwrap();
        assert!((phi - (0.1f64).atan2(0.1)).abs() < 1e-14);
        assert!((r - (0.25f64 + 0.02).sqrt()).abs() < 1e-14);
        assert!((theta - (0.02f64.sqrt() / 0.5).atan()).abs() < 1e-14);
    }
}
