//! Frenet candidates and their path-coordinate view.

use super::feasibility::Verdict;
use super::frenet::{frenet_kinematics, frenet_to_global, GlobalPose, ReferenceLine};
use super::quintic::Quintic;
use crate::dynamics::{SlopeProfile, VehicleParams};
use crate::error::Result;
use crate::trajectory::Trajectory;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Geometric path traced by a pair of Frenet quintics, parameterised by the
/// candidate's own time `τ`.
#[derive(Debug, Clone, Copy)]
pub struct PathMap<'a> {
    pub s_seg: &'a Quintic<f64>,
    pub d_seg: &'a Quintic<f64>,
    pub reference: &'a ReferenceLine,
}

impl<'a> PathMap<'a> {
    pub fn position(&self, tau: f64) -> [f64; 2] {
        frenet_kinematics(self.s_seg, self.d_seg, self.reference, tau).0
    }

    /// Path speed `|dp/dτ|`.
    pub fn speed(&self, tau: f64) -> f64 {
        let v = frenet_kinematics(self.s_seg, self.d_seg, self.reference, tau).1;
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }

    /// Arclength between two parameter values (composite Gauss–Legendre).
    pub fn arclength(&self, t0: f64, t1: f64) -> f64 {
        let pieces = ((t1 - t0).abs() / 0.1).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let a = t0 + i as f64 * dt;
                let (m, h) = (a + 0.5 * dt, 0.5 * dt);
                GL_X.iter().zip(GL_W).map(|(x, w)| w * self.speed(m + h * x)).sum::<f64>() * h
            })
            .sum()
    }

    /// Cumulative arclength at `τ_k = k·dt` for `k < n`.
    pub fn cumulative(&self, n: usize, dt: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..n {
            acc += self.arclength((k - 1) as f64 * dt, k as f64 * dt);
            out.push(acc);
        }
        out
    }

    /// Parameter `τ` at which the arclength reaches `l`, given the cumulative
    /// table from [`PathMap::cumulative`].
    pub fn tau_at(&self, l: f64, cumulative: &[f64], dt: f64) -> f64 {
        let n = cumulative.len();
        let k = cumulative.partition_point(|c| *c <= l).saturating_sub(1).min(n - 1);
        let t0 = k as f64 * dt;
        let base = cumulative[k];
        let mut tau = t0 + (l - base) / self.speed(t0).max(1e-6);
        for _ in 0..30 {
            let r = base + self.arclength(t0, tau) - l;
            let step = r / self.speed(tau).max(1e-6);
            tau -= step;
            if step.abs() < 1e-13 {
                break;
            }
        }
        tau
    }

    /// Speed, tangential acceleration and jerk along the path at `τ`.
    pub fn rates(&self, tau: f64) -> (f64, f64, f64) {
        const H1: f64 = 1e-4;
        const H2: f64 = 1e-3;
        let acc = |t: f64| (self.speed(t + H1) - self.speed(t - H1)) / (2.0 * H1);
        let a = acc(tau);
        let j = (acc(tau + H2) - acc(tau - H2)) / (2.0 * H2);
        (self.speed(tau), a, j)
    }
}

/// One sampled Frenet trajectory with all its views.
#[derive(Debug, Clone)]
pub struct FrenetCandidate {
    pub s_seg: Quintic<f64>,
    pub d_seg: Quintic<f64>,
    /// Index of the target lane.
    pub lane: usize,
    pub v_target: f64,
    pub poses: Vec<GlobalPose>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    /// Path-coordinate trajectory starting at `l = 0`.
    pub path: Trajectory<f64>,
    pub verdict: Verdict,
}

/// Path-coordinate trajectory of a Frenet pair: exact arclength for `l`,
/// analytic path speed, and finely differenced acceleration and jerk.
/// Grade is looked up by road coordinate `s`.
pub fn to_path_trajectory(
    s_seg: &Quintic<f64>,
    d_seg: &Quintic<f64>,
    reference: &ReferenceLine,
    slope: &SlopeProfile,
    params: &VehicleParams<f64>,
    n: usize,
    dt: f64,
    t0: f64,
) -> Trajectory<f64> {
    let map = PathMap { s_seg, d_seg, reference };
    let l = map.cumulative(n, dt);
    let (mut v, mut a, mut j) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let (vk, ak, jk) = map.rates(k as f64 * dt);
        v.push(vk);
        a.push(ak);
        j.push(jk);
    }
    let theta = (0..n).map(|k| slope.theta(s_seg.pos(k as f64 * dt))).collect();
    Trajectory::from_kinematics(dt, t0, l, v, a, j, theta, None, params)
}

#[allow(clippy::too_many_arguments)]
pub fn build_candidate(
    s_seg: Quintic<f64>,
    d_seg: Quintic<f64>,
    lane: usize,
    v_target: f64,
    reference: &ReferenceLine,
    slope: &SlopeProfile,
    params: &VehicleParams<f64>,
    n: usize,
    dt: f64,
    t0: f64,
) -> Result<FrenetCandidate> {
    let poses = frenet_to_global(&s_seg, &d_seg, reference, n, dt)?;
    let path = to_path_trajectory(&s_seg, &d_seg, reference, slope, params, n, dt, t0);
    let s = (0..n).map(|k| s_seg.pos(k as f64 * dt)).collect();
    let d = (0..n).map(|k| d_seg.pos(k as f64 * dt)).collect();
    Ok(FrenetCandidate { s_seg, d_seg, lane, v_target, poses, s, d, path, verdict: Verdict::Feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{resistance_accel, KinState};
    use approx::assert_relative_eq;

    fn seg(p0: f64, v0: f64, p1: f64, v1: f64) -> Quintic<f64> {
        Quintic::fit(KinState::new(p0, v0, 0.0), KinState::new(p1, v1, 0.0), 4.9).unwrap()
    }

    #[test]
    fn cruise_is_steady_state() {
        let p = VehicleParams::truck();
        let r = ReferenceLine::straight(1000.0, vec![0.0]);
        let z = to_path_trajectory(
            &seg(0.0, 20.0, 98.0, 20.0),
            &seg(0.0, 0.0, 0.0, 0.0),
            &r,
            &SlopeProfile::flat(),
            &p,
            50,
            0.1,
            0.0,
        );
        let ar = resistance_accel(20.0, 0.0, &p);
        let f = p.fuel.rate(20.0, ar);
        for k in 0..50 {
            assert_relative_eq!(z.l[k], 2.0 * k as f64, epsilon = 1e-9);
            assert!(z.a[k].abs() < 1e-7);
            assert_relative_eq!(z.a_t[k], ar, epsilon = 1e-7);
            assert_eq!(z.a_b[k], 0.0);
            assert_relative_eq!(z.f_r[k], f, max_relative = 1e-7);
        }
    }

    #[test]
    fn decelerating_segment_brakes() {
        let p = VehicleParams::sedan();
        let r = ReferenceLine::straight(1000.0, vec![0.0]);
        let z = to_path_trajectory(
            &seg(0.0, 20.0, 60.0, 5.0),
            &seg(0.0, 0.0, 0.0, 0.0),
            &r,
            &SlopeProfile::flat(),
            &p,
            50,
            0.1,
            0.0,
        );
        let k = z.a.iter().enumerate().fold(0, |b, (i, a)| if *a < z.a[b] { i } else { b });
        assert!(z.a[k] + z.a_r[k] < 0.0);
        assert_eq!(z.a_t[k], 0.0);
        assert!(z.a_b[k] > 0.0);
        for k in 0..50 {
            assert_eq!(z.f_r[k], p.fuel.rate(z.v[k], z.a_t[k]));
        }
    }

    #[test]
    fn lane_change_arclength_inverse() {
        let r = ReferenceLine::straight(1000.0, vec![0.0, 3.5]);
        let (s, d) = (seg(0.0, 18.0, 90.0, 19.0), seg(0.0, 0.0, 3.5, 0.0));
        let map = PathMap { s_seg: &s, d_seg: &d, reference: &r };
        let cum = map.cumulative(50, 0.1);
        assert!(cum.windows(2).all(|w| w[1] > w[0]));
        for &tau in &[0.0, 0.73, 2.5, 4.88] {
            let l = map.arclength(0.0, tau);
            assert_relative_eq!(map.tau_at(l, &cum, 0.1), tau, epsilon = 1e-9);
        }
        // Lateral motion makes the path longer than the road distance.
        assert!(cum[49] > s.pos(4.9));
    }
}
