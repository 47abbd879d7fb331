//! Time-indexed longitudinal trajectory on the path coordinate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{resistance_accel, VehicleParams};
use crate::scalar::Scalar;

/// Observation states and controls sampled every `dt`.
///
/// Column `k` describes the instant `t[k]`; `j[k]` is the jerk applied over
/// `[t[k], t[k+1])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Trajectory<T: Scalar = f64> {
    pub dt: T,
    pub t: Vec<T>,
    pub l: Vec<T>,
    pub v: Vec<T>,
    pub a: Vec<T>,
    pub j: Vec<T>,
    pub theta: Vec<T>,
    pub a_r: Vec<T>,
    pub a_t: Vec<T>,
    pub a_b: Vec<T>,
    pub f_r: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn with_capacity(dt: T, n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            dt,
            t: v(),
            l: v(),
            v: v(),
            a: v(),
            j: v(),
            theta: v(),
            a_r: v(),
            a_t: v(),
            a_b: v(),
            f_r: v(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Builds the derived columns from kinematics, grade and brake.
    ///
    /// When `a_b` is `None` the throttle/brake split is `a_t = max(0, a+a_r)`,
    /// `a_b = max(0, −(a+a_r))`. With an explicit brake the traction is
    /// `a + a_r + a_b`, floored at zero.
    #[allow(clippy::too_many_arguments)]
    pub fn from_kinematics(
        dt: T,
        t0: T,
        l: Vec<T>,
        v: Vec<T>,
        a: Vec<T>,
        j: Vec<T>,
        theta: Vec<T>,
        a_b: Option<Vec<T>>,
        params: &VehicleParams<T>,
    ) -> Self {
        let n = l.len();
        let t = (0..n).map(|k| t0 + dt * T::lit(k as f64)).collect();
        let a_r: Vec<T> = (0..n).map(|k| resistance_accel(v[k], theta[k], params)).collect();
        let (a_t, a_b): (Vec<T>, Vec<T>) = match a_b {
            None => (0..n)
                .map(|k| {
                    let need = a[k] + a_r[k];
                    (need.max(T::zero()), (-need).max(T::zero()))
                })
                .unzip(),
            Some(b) => (0..n).map(|k| ((a[k] + a_r[k] + b[k]).max(T::zero()), b[k])).unzip(),
        };
        let f_r = (0..n).map(|k| params.fuel.rate(v[k], a_t[k])).collect();
        Self { dt, t, l, v, a, j, theta, a_r, a_t, a_b, f_r }
    }

    /// Appends column `k` of `other`.
    pub fn push_from(&mut self, other: &Self, k: usize) {
        self.t.push(other.t[k]);
        self.l.push(other.l[k]);
        self.v.push(other.v[k]);
        self.a.push(other.a[k]);
        self.j.push(other.j[k]);
        self.theta.push(other.theta[k]);
        self.a_r.push(other.a_r[k]);
        self.a_t.push(other.a_t[k]);
        self.a_b.push(other.a_b[k]);
        self.f_r.push(other.f_r[k]);
    }

    /// Fuel used over the intervals `[t_k, t_k + dt)` (mL).
    pub fn total_fuel(&self) -> T {
        self.f_r.iter().map(|&f| f * self.dt).sum()
    }

    /// Copy with the path coordinate shifted by `dl`.
    pub fn shifted(&self, dl: T) -> Self {
        let mut out = self.clone();
        out.l.iter_mut().for_each(|l| *l += dl);
        out
    }

    /// Sub-trajectory of columns `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let c = |xs: &Vec<T>| xs[range.clone()].to_vec();
        Self {
            dt: self.dt,
            t: c(&self.t),
            l: c(&self.l),
            v: c(&self.v),
            a: c(&self.a),
            j: c(&self.j),
            theta: c(&self.theta),
            a_r: c(&self.a_r),
            a_t: c(&self.a_t),
            a_b: c(&self.a_b),
            f_r: c(&self.f_r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steady_state_split() {
        let p = VehicleParams::<f64>::truck();
        let n = 5;
        let tr = Trajectory::from_kinematics(
            0.1,
            0.0,
            (0..n).map(|k| 2.0 * k as f64).collect(),
            vec![20.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            None,
            &p,
        );
        let ar = resistance_accel(20.0, 0.0, &p);
        assert!(tr.a_t.iter().all(|x| (*x - ar).abs() < 1e-15));
        assert!(tr.a_b.iter().all(|x| *x == 0.0));
        assert_relative_eq!(tr.total_fuel(), 0.5 * p.fuel.rate(20.0, ar), max_relative = 1e-12);
    }

    #[test]
    fn braking_split() {
        let p = VehicleParams::<f64>::sedan();
        let tr = Trajectory::from_kinematics(0.1, 0.0, vec![0.0], vec![10.0], vec![-2.0], vec![0.0], vec![0.0], None, &p);
        assert_eq!(tr.a_t[0], 0.0);
        assert!(tr.a_b[0] > 0.0);
    }
}
