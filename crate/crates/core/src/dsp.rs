//! Butterworth band-pass design and zero-phase application.
//!
//! Design path: analog Butterworth low-pass prototype → low-pass to band-pass
//! transform at the pre-warped band edges → bilinear transform → one biquad
//! per conjugate pole pair, each with zeros at z = 1 and z = -1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Theta,
    Alpha,
    Beta,
}

impl BandName {
    pub const ALL: [BandName; 3] = [BandName::Theta, BandName::Alpha, BandName::Beta];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
        }
    }

    /// Standard EEG band edges in Hz.
    pub fn spec(self) -> BandSpec {
        match self {
            BandName::Theta => THETA,
            BandName::Alpha => ALPHA,
            BandName::Beta => BETA,
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "theta" => Ok(BandName::Theta),
            "alpha" => Ok(BandName::Alpha),
            "beta" => Ok(BandName::Beta),
            other => Err(Error::Filter(format!("unknown band `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub low_hz: f64,
    pub high_hz: f64,
}

pub const THETA: BandSpec = BandSpec {
    name: BandName::Theta,
    low_hz: 4.0,
    high_hz: 8.0,
};
pub const ALPHA: BandSpec = BandSpec {
    name: BandName::Alpha,
    low_hz: 8.0,
    high_hz: 14.0,
};
pub const BETA: BandSpec = BandSpec {
    name: BandName::Beta,
    low_hz: 14.0,
    high_hz: 30.0,
};

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_FS: f64 = 250.0;

impl BandSpec {
    pub fn center_hz(&self) -> f64 {
        (self.low_hz * self.high_hz).sqrt()
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Filter(format!("sampling rate {fs} must be positive")));
        }
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz) {
            return Err(Error::Filter(format!(
                "band edges must satisfy 0 < low < high, got {}..{}",
                self.low_hz, self.high_hz
            )));
        }
        if self.high_hz >= fs / 2.0 {
            return Err(Error::Filter(format!(
                "band edge {} Hz is at or above Nyquist ({} Hz)",
                self.high_hz,
                fs / 2.0
            )));
        }
        Ok(())
    }
}

/// Second-order section, `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Direct form II transposed over `x` in place, starting from state `s`.
    fn run(&self, x: &mut [f64], mut s: [f64; 2]) {
        for v in x.iter_mut() {
            let xin = *v;
            let y = self.b0 * xin + s[0];
            s[0] = self.b1 * xin - self.a1 * y + s[1];
            s[1] = self.b2 * xin - self.a2 * y;
            *v = y;
        }
    }

    /// State that makes a constant input of 1 produce its steady-state output.
    fn step_state(&self) -> ([f64; 2], f64) {
        let gain = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let s1 = self.b2 - self.a2 * gain;
        let s0 = self.b1 - self.a1 * gain + s1;
        ([s0, s1], gain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCascade {
    pub sections: Vec<Biquad>,
    /// Total filter order (number of poles).
    pub order: usize,
    pub band: Option<BandSpec>,
    pub fs: f64,
}

impl FilterCascade {
    pub fn identity(fs: f64) -> Self {
        Self {
            sections: vec![Biquad::IDENTITY],
            order: 2,
            band: None,
            fs,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Edge padding used by [`apply_zero_phase`].
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Single-pass causal filtering from steady state at the first sample.
    pub fn apply_causal(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut scale = first;
        for s in &self.sections {
            let (state, gain) = s.step_state();
            s.run(x, [state[0] * scale, state[1] * scale]);
            scale *= gain;
        }
    }
}

/// Designs an order-`order` Butterworth band-pass (`order / 2` biquads).
pub fn design_bandpass(band: &BandSpec, fs: f64, order: usize) -> Result<FilterCascade> {
    band.validate(fs)?;
    if order == 0 || order % 2 != 0 || order > 8 {
        return Err(Error::Filter(format!(
            "band-pass order must be one of 2, 4, 6, 8, got {order}"
        )));
    }
    let n = order / 2;
    let k = 2.0 * fs;
    let w_lo = k * (PI * band.low_hz / fs).tan();
    let w_hi = k * (PI * band.high_hz / fs).tan();
    let bw = w_hi - w_lo;
    let w0 = (w_lo * w_hi).sqrt();
    // digital frequency where the band-pass gain peaks
    let omega0 = 2.0 * (w0 / k).atan();

    let mut sections = Vec::with_capacity(n);
    for i in 0..n {
        let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        if p.im < -1e-12 {
            continue; // handled with its conjugate
        }
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        let s_poles = [half + disc, half - disc];
        let z_poles = s_poles.map(|s| (k + s) / (k - s));
        if p.im.abs() <= 1e-12 {
            // real prototype pole: its two band-pass poles form one section
            sections.push(section_from_poles(z_poles[0], z_poles[1]));
        } else {
            for z in z_poles {
                sections.push(section_from_poles(z, z.conj()));
            }
        }
    }
    debug_assert_eq!(sections.len(), n);
    for s in &mut sections {
        let g = s.response(omega0).norm();
        s.b0 /= g;
        s.b2 /= g;
    }
    let cascade = FilterCascade {
        sections,
        order,
        band: Some(*band),
        fs,
    };
    if !cascade.is_stable() {
        return Err(Error::Filter("design produced an unstable section".into()));
    }
    Ok(cascade)
}

fn section_from_poles(p1: Complex64, p2: Complex64) -> Biquad {
    Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: -1.0,
        a1: -(p1 + p2).re,
        a2: (p1 * p2).re,
    }
}

/// |H(e^{jω})| of the cascade at `freq_hz`.
pub fn frequency_response(f: &FilterCascade, freq_hz: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / f.fs;
    f.sections.iter().map(|s| s.response(omega).norm()).product()
}

/// Forward-backward filtering with odd-reflection edge padding of
/// `3·order` samples on each side. Net phase is zero and net magnitude
/// response is `|H|²`.
pub fn apply_zero_phase(x: &[f64], f: &FilterCascade) -> Result<Vec<f64>> {
    let pad = f.pad_len();
    if x.len() <= pad {
        return Err(Error::TooShort {
            len: x.len(),
            min: pad,
        });
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (x[0], x[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    f.apply_causal(&mut ext);
    ext.reverse();
    f.apply_causal(&mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Zero-phase filtering of an `f32` channel, computed in `f64`.
pub fn apply_zero_phase_f32(x: &[f32], f: &FilterCascade) -> Result<Vec<f32>> {
    let wide: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    Ok(apply_zero_phase(&wide, f)?.into_iter().map(|v| v as f32).collect())
}
