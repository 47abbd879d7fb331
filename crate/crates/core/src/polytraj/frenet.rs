//! Reference lines and the Frenet ↔ global mapping.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::quintic::Quintic;
use crate::error::{Error, Result};

/// Natural cubic spline through `(u_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Spline {
    u: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(u: &[f64], y: &[f64]) -> Self {
        let n = u.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut sup = vec![0.0; k];
            for i in 0..k {
                let h0 = u[i + 1] - u[i];
                let h1 = u[i + 2] - u[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let w = (u[i + 1] - u[i]) / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut x = vec![0.0; k];
            x[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&x);
        }
        Self { u: u.to_vec(), y: y.to_vec(), m }
    }

    /// Value and first three derivatives.
    fn eval(&self, s: f64) -> [f64; 4] {
        let n = self.u.len();
        let i = if s <= self.u[0] {
            0
        } else if s >= self.u[n - 1] {
            n - 2
        } else {
            (self.u.partition_point(|x| *x <= s) - 1).min(n - 2)
        };
        let h = self.u[i + 1] - self.u[i];
        let a = self.u[i + 1] - s;
        let b = s - self.u[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let f = m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let d2 = m0 * a / h + m1 * b / h;
        let d3 = (m1 - m0) / h;
        [f, d1, d2, d3]
    }
}

/// Position and derivatives of the reference curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub pos: [f64; 2],
    /// `dr/ds`.
    pub d1: [f64; 2],
    /// `d²r/ds²`.
    pub d2: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub heading: f64,
    pub curvature: f64,
}

impl Frame {
    /// Derivative of the unit normal with respect to `s`.
    pub fn normal_rate(&self) -> [f64; 2] {
        let (x1, y1) = (self.d1[0], self.d1[1]);
        let (x2, y2) = (self.d2[0], self.d2[1]);
        let g = (x1 * x1 + y1 * y1).sqrt();
        let dot = x1 * x2 + y1 * y2;
        [-y2 / g + y1 * dot / (g * g * g), x2 / g - x1 * dot / (g * g * g)]
    }
}

/// Smooth reference line parameterised by chord length, with lane centres
/// given as lateral offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    sx: Spline,
    sy: Spline,
    pub lane_offsets: Vec<f64>,
}

impl ReferenceLine {
    pub fn from_waypoints(points: &[[f64; 2]], lane_offsets: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidSpec("reference line needs two or more waypoints".into()));
        }
        let mut u = vec![0.0];
        for w in points.windows(2) {
            let ds = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            if !(ds > 1e-9) {
                return Err(Error::InvalidSpec("repeated waypoint in reference line".into()));
            }
            u.push(u.last().unwrap() + ds);
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        Ok(Self { sx: Spline::new(&u, &xs), sy: Spline::new(&u, &ys), lane_offsets })
    }

    /// Straight line along +x from the origin.
    pub fn straight(length: f64, lane_offsets: Vec<f64>) -> Self {
        Self::from_waypoints(&[[0.0, 0.0], [length, 0.0]], lane_offsets)
            .expect("two distinct points")
    }

    /// Reads `x,y` waypoint rows with a header.
    pub fn from_csv(path: &Path, lane_offsets: Vec<f64>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut pts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|x| x.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidSpec(format!("bad waypoint row {rec:?}")))
            };
            pts.push([get(0)?, get(1)?]);
        }
        Self::from_waypoints(&pts, lane_offsets)
    }

    pub fn length(&self) -> f64 {
        *self.sx.u.last().unwrap()
    }

    fn check(&self, s: f64) -> Result<()> {
        let len = self.length();
        if !(s >= -1e-9 && s <= len + 1e-9) {
            return Err(Error::Range { value: s, lo: 0.0, hi: len });
        }
        Ok(())
    }

    /// Curve geometry at `s`, extrapolating the end cubic outside the range.
    pub fn frame_unchecked(&self, s: f64) -> Frame {
        let fx = self.sx.eval(s);
        let fy = self.sy.eval(s);
        let g = (fx[1] * fx[1] + fy[1] * fy[1]).sqrt();
        let tangent = [fx[1] / g, fy[1] / g];
        Frame {
            pos: [fx[0], fy[0]],
            d1: [fx[1], fy[1]],
            d2: [fx[2], fy[2]],
            tangent,
            normal: [-tangent[1], tangent[0]],
            heading: fy[1].atan2(fx[1]),
            curvature: (fx[1] * fy[2] - fy[1] * fx[2]) / (g * g * g),
        }
    }

    pub fn frame(&self, s: f64) -> Result<Frame> {
        self.check(s)?;
        Ok(self.frame_unchecked(s))
    }

    pub fn to_global(&self, s: f64, d: f64) -> Result<[f64; 2]> {
        let f = self.frame(s)?;
        Ok([f.pos[0] + d * f.normal[0], f.pos[1] + d * f.normal[1]])
    }

    /// Closest-point projection of a global position to `(s, d)`.
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        let len = self.length();
        let n_coarse = ((len / 0.5).ceil() as usize).clamp(16, 20_000);
        let dist2 = |s: f64| {
            let f = self.frame_unchecked(s);
            (p[0] - f.pos[0]).powi(2) + (p[1] - f.pos[1]).powi(2)
        };
        let mut s = (0..=n_coarse)
            .map(|i| len * i as f64 / n_coarse as f64)
            .map(|s| (s, dist2(s)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
            .0;
        for _ in 0..50 {
            let fx = self.sx.eval(s);
            let fy = self.sy.eval(s);
            let (ex, ey) = (p[0] - fx[0], p[1] - fy[0]);
            let g1 = -(ex * fx[1] + ey * fy[1]);
            let g2 = fx[1] * fx[1] + fy[1] * fy[1] - (ex * fx[2] + ey * fy[2]);
            let step = if g2 > 1e-12 { g1 / g2 } else { g1 };
            let next = (s - step).clamp(0.0, len);
            let done = (next - s).abs() < 1e-13 * len.max(1.0);
            s = next;
            if done {
                break;
            }
        }
        let f = self.frame_unchecked(s);
        let d = (p[0] - f.pos[0]) * f.normal[0] + (p[1] - f.pos[1]) * f.normal[1];
        (s, d)
    }
}

/// Global pose along a Frenet trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub curvature: f64,
    /// Path speed `|ṗ|`.
    pub speed: f64,
}

/// Global position and velocity of a Frenet trajectory at time `t`.
pub fn frenet_kinematics(
    s_seg: &Quintic<f64>,
    d_seg: &Quintic<f64>,
    reference: &ReferenceLine,
    t: f64,
) -> ([f64; 2], [f64; 2]) {
    let (s, sd) = (s_seg.pos(t), s_seg.vel(t));
    let (d, dd) = (d_seg.pos(t), d_seg.vel(t));
    let f = reference.frame_unchecked(s);
    let nr = f.normal_rate();
    let pos = [f.pos[0] + d * f.normal[0], f.pos[1] + d * f.normal[1]];
    let vel = [
        sd * (f.d1[0] + d * nr[0]) + dd * f.normal[0],
        sd * (f.d1[1] + d * nr[1]) + dd * f.normal[1],
    ];
    (pos, vel)
}

/// Samples `n` poses at spacing `dt`. Yaw comes from the analytic velocity;
/// curvature uses a central difference of that velocity.
pub fn frenet_to_global(
    s_seg: &Quintic<f64>,
    d_seg: &Quintic<f64>,
    reference: &ReferenceLine,
    n: usize,
    dt: f64,
) -> Result<Vec<GlobalPose>> {
    const H: f64 = 1e-4;
    (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            reference.check(s_seg.pos(t))?;
            let (p, v) = frenet_kinematics(s_seg, d_seg, reference, t);
            let (_, vp) = frenet_kinematics(s_seg, d_seg, reference, t + H);
            let (_, vm) = frenet_kinematics(s_seg, d_seg, reference, t - H);
            let acc = [(vp[0] - vm[0]) / (2.0 * H), (vp[1] - vm[1]) / (2.0 * H)];
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            let curvature = if speed > 1e-6 {
                (v[0] * acc[1] - v[1] * acc[0]) / (speed * speed * speed)
            } else {
                0.0
            };
            Ok(GlobalPose { x: p[0], y: p[1], yaw: v[1].atan2(v[0]), curvature, speed })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::KinState;
    use approx::assert_relative_eq;

    fn seg(p0: f64, v0: f64, p1: f64, v1: f64, t: f64) -> Quintic<f64> {
        Quintic::fit(KinState::new(p0, v0, 0.0), KinState::new(p1, v1, 0.0), t).unwrap()
    }

    #[test]
    fn straight_line_identity() {
        let r = ReferenceLine::straight(500.0, vec![0.0]);
        let s = seg(0.0, 10.0, 50.0, 10.0, 5.0);
        let d0 = seg(0.0, 0.0, 0.0, 0.0, 5.0);
        for p in frenet_to_global(&s, &d0, &r, 50, 0.1).unwrap().iter().enumerate() {
            assert_relative_eq!(p.1.x, p.0 as f64, epsilon = 1e-9);
            assert_relative_eq!(p.1.y, 0.0, epsilon = 1e-12);
            assert_relative_eq!(p.1.yaw, 0.0, epsilon = 1e-12);
        }
        let d2 = seg(2.0, 0.0, 2.0, 0.0, 5.0);
        for p in frenet_to_global(&s, &d2, &r, 50, 0.1).unwrap() {
            assert_relative_eq!(p.y, 2.0, epsilon = 1e-12);
            assert_relative_eq!(p.yaw, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_range() {
        let r = ReferenceLine::straight(100.0, vec![0.0]);
        assert!(matches!(r.to_global(150.0, 0.0), Err(Error::Range { .. })));
        let s = seg(0.0, 30.0, 150.0, 30.0, 5.0);
        let d = seg(0.0, 0.0, 0.0, 0.0, 5.0);
        assert!(frenet_to_global(&s, &d, &r, 50, 0.1).is_err());
    }

    #[test]
    fn arc_curvature_and_round_trip() {
        let radius = 200.0;
        let pts: Vec<[f64; 2]> = (0..=60)
            .map(|i| {
                let a = i as f64 * 0.02;
                [radius * a.sin(), radius * (1.0 - a.cos())]
            })
            .collect();
        let r = ReferenceLine::from_waypoints(&pts, vec![0.0]).unwrap();
        let f = r.frame(100.0).unwrap();
        assert_relative_eq!(f.curvature, 1.0 / radius, max_relative = 1e-3);
        for &(s, d) in &[(10.0, 1.5), (100.0, -3.0), (200.0, 4.0)] {
            let p = r.to_global(s, d).unwrap();
            let (s2, d2) = r.project(p);
            let q = r.to_global(s2, d2).unwrap();
            assert!(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() < 1e-6);
            assert_relative_eq!(s2, s, epsilon = 1e-6);
            assert_relative_eq!(d2, d, epsilon = 1e-6);
        }
    }

    #[test]
    fn analytic_speed_matches_differences() {
        let pts: Vec<[f64; 2]> = (0..=40).map(|i| [i as f64 * 10.0, 5.0 * (i as f64 * 0.1).sin()]).collect();
        let r = ReferenceLine::from_waypoints(&pts, vec![0.0]).unwrap();
        let s = seg(20.0, 15.0, 100.0, 17.0, 5.0);
        let d = seg(0.0, 0.0, 3.5, 0.0, 5.0);
        let h = 1e-5;
        for t in [0.5, 2.0, 4.5] {
            let (_, v) = frenet_kinematics(&s, &d, &r, t);
            let (pp, _) = frenet_kinematics(&s, &d, &r, t + h);
            let (pm, _) = frenet_kinematics(&s, &d, &r, t - h);
            assert_relative_eq!(v[0], (pp[0] - pm[0]) / (2.0 * h), epsilon = 1e-5);
            assert_relative_eq!(v[1], (pp[1] - pm[1]) / (2.0 * h), epsilon = 1e-5);
        }
    }
}
