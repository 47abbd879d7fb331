use serde::{Deserialize, Serialize};

use crate::dynamics::{KinState, VehicleParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Fifth-order polynomial `p(t) = Σ cᵢ tⁱ` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Quintic<T: Scalar = f64> {
    pub coeffs: [T; 6],
    pub duration: T,
}

impl<T: Scalar> Quintic<T> {
    /// Unique quintic through `(p, ṗ, p̈)` at both ends.
    pub fn fit(x0: KinState<T>, x1: KinState<T>, duration: T) -> Result<Self> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let l = T::lit;
        let tt = duration;
        let (t2, t3) = (tt * tt, tt * tt * tt);
        let (t4, t5) = (t3 * tt, t3 * t2);
        let dp = x1.l - x0.l;
        let c3 = (l(20.0) * dp - (l(8.0) * x1.v + l(12.0) * x0.v) * tt - (l(3.0) * x0.a - x1.a) * t2)
            / (l(2.0) * t3);
        let c4 = (l(-30.0) * dp + (l(14.0) * x1.v + l(16.0) * x0.v) * tt
            + (l(3.0) * x0.a - l(2.0) * x1.a) * t2)
            / (l(2.0) * t4);
        let c5 = (l(12.0) * dp - l(6.0) * (x1.v + x0.v) * tt + (x1.a - x0.a) * t2) / (l(2.0) * t5);
        Ok(Self { coeffs: [x0.l, x0.v, x0.a / l(2.0), c3, c4, c5], duration })
    }

    pub fn pos(&self, t: T) -> T {
        let c = &self.coeffs;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))))
    }

    pub fn vel(&self, t: T) -> T {
        let c = &self.coeffs;
        let l = T::lit;
        c[1] + t * (l(2.0) * c[2] + t * (l(3.0) * c[3] + t * (l(4.0) * c[4] + t * l(5.0) * c[5])))
    }

    pub fn acc(&self, t: T) -> T {
        let c = &self.coeffs;
        let l = T::lit;
        l(2.0) * c[2] + t * (l(6.0) * c[3] + t * (l(12.0) * c[4] + t * l(20.0) * c[5]))
    }

    pub fn jerk(&self, t: T) -> T {
        let c = &self.coeffs;
        let l = T::lit;
        l(6.0) * c[3] + t * (l(24.0) * c[4] + t * l(60.0) * c[5])
    }

    pub fn state(&self, t: T) -> KinState<T> {
        KinState::new(self.pos(t), self.vel(t), self.acc(t))
    }

    /// Coefficients of the derivative polynomial.
    /// Samples `n` points at `k·dt` into a trajectory with the natural
    /// throttle/brake split; `theta` is the grade per sample.
    pub fn to_trajectory(&self, n: usize, dt: T, t0: T, theta: Vec<T>, params: &VehicleParams<T>) -> Trajectory<T> {
        let ts: Vec<T> = (0..n).map(|k| dt * T::lit(k as f64)).collect();
        Trajectory::from_kinematics(
            dt,
            t0,
            ts.iter().map(|t| self.pos(*t)).collect(),
            ts.iter().map(|t| self.vel(*t)).collect(),
            ts.iter().map(|t| self.acc(*t)).collect(),
            ts.iter().map(|t| self.jerk(*t)).collect(),
            theta,
            None,
            params,
        )
    }

    pub fn derivative_coeffs(&self) -> [T; 5] {
        let c = &self.coeffs;
        [c[1], T::lit(2.0) * c[2], T::lit(3.0) * c[3], T::lit(4.0) * c[4], T::lit(5.0) * c[5]]
    }
}

/// One segment per end sample, in grid order.
pub fn sample_1d_candidates<T: Scalar>(
    start: KinState<T>,
    ends: &[KinState<T>],
    duration: T,
) -> Result<Vec<Quintic<T>>> {
    ends.iter().map(|e| Quintic::fit(start, *e, duration)).collect()
}

/// End states keeping the start speed in reach: constant-acceleration
/// distance to each target speed, zero end acceleration.
pub fn speed_grid_ends<T: Scalar>(start: KinState<T>, speeds: &[T], duration: T) -> Vec<KinState<T>> {
    speeds
        .iter()
        .map(|&v| KinState::new(start.l + (start.v + v) / T::lit(2.0) * duration, v, T::zero()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimum_jerk_step() {
        // Solving the 6×6 boundary system by hand gives 10t³ − 15t⁴ + 6t⁵.
        let q = Quintic::fit(KinState::new(0.0, 0.0, 0.0), KinState::new(1.0, 0.0, 0.0), 1.0).unwrap();
        let expect = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (c, e) in q.coeffs.iter().zip(expect) {
            assert_relative_eq!(*c, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_and_uniform() {
        let q: Quintic<f64> = Quintic::fit(KinState::new(5.0, 0.0, 0.0), KinState::new(5.0, 0.0, 0.0), 3.0).unwrap();
        assert!(q.coeffs[1..].iter().all(|c| c.abs() < 1e-15));
        assert_eq!(q.pos(1.7), 5.0);
        let q: Quintic<f64> = Quintic::fit(KinState::new(0.0, 10.0, 0.0), KinState::new(50.0, 10.0, 0.0), 5.0).unwrap();
        assert!(q.coeffs[2..].iter().all(|c| c.abs() < 1e-12));
        assert_relative_eq!(q.pos(2.5), 25.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_duration() {
        let x = KinState::new(0.0, 0.0, 0.0);
        assert!(Quintic::fit(x, x, 0.0).is_err());
        assert!(Quintic::fit(x, x, -1.0).is_err());
    }

    #[test]
    fn grid_candidates() {
        let start = KinState::new(0.0, 20.0, 0.0);
        let speeds: Vec<f64> = (0..11).map(|i| 17.5 + 0.5 * i as f64).collect();
        let ends = speed_grid_ends(start, &speeds, 5.0);
        let cands = sample_1d_candidates(start, &ends, 5.0).unwrap();
        assert_eq!(cands.len(), 11);
        for (c, v) in cands.iter().zip(&speeds) {
            assert_relative_eq!(c.vel(5.0), *v, epsilon = 1e-9);
        }
        let cc = &cands[5];
        assert!(cc.coeffs[2..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn f32_fit() {
        let q = Quintic::<f32>::fit(KinState::new(0.0, 1.0, 0.0), KinState::new(3.0, 0.5, -0.1), 2.0).unwrap();
        assert!((q.pos(2.0) - 3.0).abs() < 1e-4);
        assert!((q.vel(2.0) - 0.5).abs() < 1e-4);
    }
}
