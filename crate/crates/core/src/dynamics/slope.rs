//! Road grade profiles indexed by path or road coordinate.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest grade magnitude accepted for shipped profiles (rad).
pub const MAX_GRADE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeKind {
    Flat,
    Rolling,
    Steep,
    Custom,
}

impl std::str::FromStr for SlopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "rolling" => Ok(Self::Rolling),
            "steep" => Ok(Self::Steep),
            "custom" | "file" => Ok(Self::Custom),
            _ => Err(Error::InvalidSpec(format!("unknown slope kind '{s}'"))),
        }
    }
}

impl std::fmt::Display for SlopeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Flat => "flat",
            Self::Rolling => "rolling",
            Self::Steep => "steep",
            Self::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Grade as a function of coordinate: `θ(s) = A·sin(2πs/λ + φ)` for the
/// sine kinds, piecewise linear for custom tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub kind: SlopeKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default)]
    pub phase: f64,
    /// `(s, θ)` knots of a custom profile, strictly increasing in `s`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<(f64, f64)>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

fn default_wavelength() -> f64 {
    1.0
}

impl SlopeProfile {
    pub fn flat() -> Self {
        Self::sine(SlopeKind::Flat, 0.0, 1.0)
    }

    pub fn rolling() -> Self {
        Self::sine(SlopeKind::Rolling, 0.03, 400.0)
    }

    pub fn steep() -> Self {
        Self::sine(SlopeKind::Steep, 0.08, 900.0)
    }

    fn sine(kind: SlopeKind, amplitude: f64, wavelength: f64) -> Self {
        Self { kind, amplitude, wavelength, phase: 0.0, points: Vec::new(), cumulative: Vec::new() }
    }

    pub fn of_kind(kind: SlopeKind) -> Result<Self> {
        match kind {
            SlopeKind::Flat => Ok(Self::flat()),
            SlopeKind::Rolling => Ok(Self::rolling()),
            SlopeKind::Steep => Ok(Self::steep()),
            SlopeKind::Custom => Err(Error::InvalidSpec("custom profiles need a table".into())),
        }
    }

    /// Piecewise-linear profile from `(s, θ)` knots.
    pub fn custom(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidSpec("custom slope needs ≥ 2 increasing knots".into()));
        }
        if points.iter().any(|p| !p.1.is_finite() || p.1.abs() > MAX_GRADE) {
            return Err(Error::InvalidSpec(format!("custom grade exceeds {MAX_GRADE} rad")));
        }
        let mut p = Self { points, ..Self::sine(SlopeKind::Custom, 0.0, 1.0) };
        p.prepare();
        Ok(p)
    }

    /// Reads a `s_m,theta_rad` CSV with a header row.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|x| x.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidSpec(format!("bad slope row {rec:?}")))
            };
            pts.push((parse(0)?, parse(1)?));
        }
        Self::custom(pts)
    }

    /// Recomputes cached elevation knots; needed after deserializing a custom profile.
    pub fn prepare(&mut self) {
        self.cumulative.clear();
        if self.kind != SlopeKind::Custom {
            return;
        }
        let mut h = 0.0;
        self.cumulative.push(0.0);
        for w in self.points.windows(2) {
            h += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            self.cumulative.push(h);
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SlopeKind::Flat => Ok(()),
            SlopeKind::Custom => Self::custom(self.points.clone()).map(|_| ()),
            _ => {
                if !(self.wavelength > 0.0) {
                    return Err(Error::InvalidSpec("wavelength must be positive".into()));
                }
                if !(self.amplitude.abs() <= MAX_GRADE) {
                    return Err(Error::InvalidSpec(format!(
                        "amplitude {} exceeds {MAX_GRADE} rad",
                        self.amplitude
                    )));
                }
                Ok(())
            }
        }
    }

    /// Grade at coordinate `s` (rad).
    pub fn theta(&self, s: f64) -> f64 {
        match self.kind {
            SlopeKind::Flat => 0.0,
            SlopeKind::Rolling | SlopeKind::Steep => {
                self.amplitude * (2.0 * PI * s / self.wavelength + self.phase).sin()
            }
            SlopeKind::Custom => {
                let (i, f) = self.segment(s);
                let (a, b) = (self.points[i].1, self.points[i + 1].1);
                a + f * (b - a)
            }
        }
    }

    /// Elevation `h(s) = ∫₀ˢ θ` with `h(0) = 0` (small-angle).
    pub fn elevation(&self, s: f64) -> f64 {
        match self.kind {
            SlopeKind::Flat => 0.0,
            SlopeKind::Rolling | SlopeKind::Steep => {
                let k = 2.0 * PI / self.wavelength;
                self.amplitude / k * (self.phase.cos() - (k * s + self.phase).cos())
            }
            SlopeKind::Custom => {
                if self.cumulative.len() != self.points.len() {
                    let mut p = self.clone();
                    p.prepare();
                    return p.elevation(s);
                }
                let p = &self.points;
                let n = p.len();
                if s <= p[0].0 {
                    return p[0].1 * (s - p[0].0);
                }
                if s >= p[n - 1].0 {
                    return self.cumulative[n - 1] + p[n - 1].1 * (s - p[n - 1].0);
                }
                let (i, _) = self.segment(s);
                self.cumulative[i] + 0.5 * (p[i].1 + self.theta(s)) * (s - p[i].0)
            }
        }
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let p = &self.points;
        let n = p.len();
        if s <= p[0].0 {
            return (0, 0.0);
        }
        if s >= p[n - 1].0 {
            return (n - 2, 1.0);
        }
        let i = p.partition_point(|q| q.0 <= s) - 1;
        (i, (s - p[i].0) / (p[i + 1].0 - p[i].0))
    }

    /// Lipschitz bound of θ for the sine kinds.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            SlopeKind::Rolling | SlopeKind::Steep => 2.0 * PI * self.amplitude.abs() / self.wavelength,
            SlopeKind::Flat => 0.0,
            SlopeKind::Custom => self
                .points
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `(s, θ, h)` samples for plotting.
    pub fn sample(&self, s_end: f64, ds: f64) -> Vec<(f64, f64, f64)> {
        let n = (s_end / ds).ceil() as usize;
        (0..=n)
            .map(|i| (i as f64 * ds).min(s_end))
            .map(|s| (s, self.theta(s), self.elevation(s)))
            .collect()
    }
}

/// Builds a sine profile of the given kind.
pub fn make_slope_profile(kind: SlopeKind, amplitude: f64, wavelength: f64) -> Result<SlopeProfile> {
    let p = match kind {
        SlopeKind::Flat => SlopeProfile::flat(),
        SlopeKind::Custom => {
            return Err(Error::InvalidSpec("use SlopeProfile::custom for tables".into()))
        }
        _ => SlopeProfile::sine(kind, amplitude, wavelength),
    };
    p.validate()?;
    Ok(p)
}

/// Per-step grade along reference coordinates; frozen for one solve.
pub fn predict_slope(profile: &SlopeProfile, l_ref: &[f64]) -> Vec<f64> {
    l_ref.iter().map(|&l| profile.theta(l)).collect()
}
