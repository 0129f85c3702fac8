//! Radiation patterns of the Tx sources: directional antennas, Bessel
//! vortex beams and the 8-element circular-array vortex source.
//!
//! Angles are local to the node: `theta` off boresight, `dphi` around it.

pub mod bessel;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bessel::bessel_j;

use crate::scenario::directional_amplitude;

/// Number of patches on the circular-array source.
pub const ARRAY_ELEMENTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamKind {
    Directional,
    BesselVortex,
    CircularArray,
}

impl BeamKind {
    pub fn is_vortex(self) -> bool {
        !matches!(self, BeamKind::Directional)
    }

    pub fn label(self) -> &'static str {
        match self {
            BeamKind::Directional => "directional",
            BeamKind::BesselVortex => "bessel_vortex",
            BeamKind::CircularArray => "circular_array",
        }
    }
}

/// A node's radiation model. `gamma` scales the raw pattern so that its
/// peak magnitude over the front half-space is exactly one.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSpec {
    pub kind: BeamKind,
    pub mode: i32,
    pub radius_wavelengths: f64,
    pub wavenumber: f64,
    pub pattern_exponent: f64,
    pub gamma: f64,
}

impl BeamSpec {
    /// `cos^q(theta)` antenna; carries no orbital angular momentum.
    pub fn directional(pattern_exponent: f64) -> Self {
        Self {
            kind: BeamKind::Directional,
            mode: 0,
            radius_wavelengths: 0.0,
            wavenumber: 0.0,
            pattern_exponent,
            gamma: 1.0,
        }
    }

    pub fn bessel(mode: i32, radius_wavelengths: f64, wavelength: f64) -> Self {
        Self::vortex(
            BeamKind::BesselVortex,
            mode,
            radius_wavelengths,
            1.0,
            wavelength,
        )
    }

    pub fn circular_array(
        mode: i32,
        radius_wavelengths: f64,
        pattern_exponent: f64,
        wavelength: f64,
    ) -> Self {
        Self::vortex(
            BeamKind::CircularArray,
            mode,
            radius_wavelengths,
            pattern_exponent,
            wavelength,
        )
    }

    pub fn vortex(
        kind: BeamKind,
        mode: i32,
        radius_wavelengths: f64,
        pattern_exponent: f64,
        wavelength: f64,
    ) -> Self {
        if kind == BeamKind::Directional {
            return Self::directional(pattern_exponent);
        }
        let mut spec = Self {
            kind,
            mode,
            radius_wavelengths,
            wavenumber: 2.0 * PI / wavelength,
            pattern_exponent,
            gamma: 1.0,
        };
        let peak = spec.peak_raw_magnitude();
        spec.gamma = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        spec
    }

    /// Generator radius in metres.
    pub fn radius_m(&self) -> f64 {
        self.radius_wavelengths * 2.0 * PI / self.wavenumber
    }

    /// Unnormalised pattern.
    fn raw_gain(&self, theta: f64, dphi: f64) -> Complex64 {
        if theta > FRAC_PI_2 {
            return Complex64::new(0.0, 0.0);
        }
        match self.kind {
            BeamKind::Directional => {
                Complex64::new(directional_amplitude(theta, self.pattern_exponent), 0.0)
            }
            BeamKind::BesselVortex => {
                let x = self.wavenumber * self.radius_m() * theta.sin();
                bessel_j(self.mode, x) * Complex64::from_polar(1.0, -(self.mode as f64) * dphi)
            }
            BeamKind::CircularArray => circular_array_gain(
                self.mode,
                self.radius_m(),
                self.wavenumber,
                self.pattern_exponent,
                theta,
                dphi,
            ),
        }
    }

    /// Normalised complex amplitude toward (theta, dphi); zero behind the
    /// node (`theta > pi/2`).
    pub fn complex_gain(&self, theta: f64, dphi: f64) -> Complex64 {
        self.gamma * self.raw_gain(theta, dphi)
    }

    /// `|complex_gain|^2`, in [0, 1].
    pub fn power_pattern(&self, theta: f64, dphi: f64) -> f64 {
        self.complex_gain(theta, dphi).norm_sqr()
    }

    /// Largest raw magnitude over the front half-space. Bessel patterns are
    /// azimuthally symmetric in magnitude so a 1-D search suffices; the
    /// array factor needs both angles.
    fn peak_raw_magnitude(&self) -> f64 {
        match self.kind {
            BeamKind::Directional => 1.0,
            BeamKind::BesselVortex => {
                let f = |t: f64| self.raw_gain(t, 0.0).norm();
                let (t, v) = scan_max(f, 0.0, FRAC_PI_2, 4000);
                let step = FRAC_PI_2 / 4000.0;
                let (_, refined) = golden_max(f, (t - step).max(0.0), (t + step).min(FRAC_PI_2));
                v.max(refined)
            }
            BeamKind::CircularArray => {
                let nt = 360;
                let np = 144;
                let mut best = (0.0, 0.0, -1.0);
                for i in 0..=nt {
                    let t = FRAC_PI_2 * i as f64 / nt as f64;
                    for j in 0..np {
                        let p = -PI + 2.0 * PI * j as f64 / np as f64;
                        let v = self.raw_gain(t, p).norm();
                        if v > best.2 {
                            best = (t, p, v);
                        }
                    }
                }
                let (mut t, mut p, mut v) = best;
                let mut ht = FRAC_PI_2 / nt as f64;
                let mut hp = 2.0 * PI / np as f64;
                for _ in 0..6 {
                    let (tt, vt) = golden_max(
                        |x| self.raw_gain(x, p).norm(),
                        (t - ht).max(0.0),
                        (t + ht).min(FRAC_PI_2),
                    );
                    if vt > v {
                        t = tt;
                        v = vt;
                    }
                    let (pp, vp) = golden_max(|x| self.raw_gain(t, x).norm(), p - hp, p + hp);
                    if vp > v {
                        p = pp;
                        v = vp;
                    }
                    ht *= 0.5;
                    hp *= 0.5;
                }
                v
            }
        }
    }
}

/// Array factor of the 8-patch ring fed with a `-l * 2pi/8` progressive
/// phase, each patch weighted by a `cos^q` pattern. Normalised to one
/// on boresight for `l = 0`.
pub fn circular_array_gain(
    mode: i32,
    radius_m: f64,
    wavenumber: f64,
    pattern_exponent: f64,
    theta: f64,
    dphi: f64,
) -> Complex64 {
    if theta > FRAC_PI_2 {
        return Complex64::new(0.0, 0.0);
    }
    let krs = wavenumber * radius_m * theta.sin();
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..ARRAY_ELEMENTS {
        let alpha = 2.0 * PI * p as f64 / ARRAY_ELEMENTS as f64;
        acc += Complex64::from_polar(1.0, krs * (dphi - alpha).cos() - mode as f64 * alpha);
    }
    acc / ARRAY_ELEMENTS as f64 * directional_amplitude(theta, pattern_exponent)
}

fn scan_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> (f64, f64) {
    let mut best = (lo, f(lo));
    for i in 1..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
