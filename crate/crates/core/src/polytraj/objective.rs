use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Speed floor in the per-metre fuel term (m/s).
pub const EPS_V: f64 = 0.1;

/// Objective weights `[w_v, w_a, w_b, w_j, w_f]` and desired speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Weights<T: Scalar = f64> {
    pub w_v: T,
    pub w_a: T,
    pub w_b: T,
    pub w_j: T,
    pub w_f: T,
    pub v_d: T,
}

impl<T: Scalar> Weights<T> {
    pub fn new(w: [f64; 5], v_d: f64) -> Self {
        Self {
            w_v: T::lit(w[0]),
            w_a: T::lit(w[1]),
            w_b: T::lit(w[2]),
            w_j: T::lit(w[3]),
            w_f: T::lit(w[4]),
            v_d: T::lit(v_d),
        }
    }

    pub fn as_array(&self) -> [T; 5] {
        [self.w_v, self.w_a, self.w_b, self.w_j, self.w_f]
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|w| *w >= T::zero() && w.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        let a = self.as_array().map(|x| x.to_f64_lossy());
        Weights::new(a, self.v_d.to_f64_lossy())
    }
}

/// Stage cost of one sample, before multiplying by `dt`.
#[inline]
pub fn stage_cost<T: Scalar>(v: T, a: T, b: T, j: T, f_r: T, v_ref: T, w: &Weights<T>) -> T {
    let dv = v - v_ref;
    w.w_v * dv * dv + w.w_a * a * a + w.w_b * b * b + w.w_j * j * j
        + w.w_f * f_r / v.max(T::lit(EPS_V))
}

/// Discrete weighted objective over every sample of the trajectory.
pub fn evaluate_objective<T: Scalar>(z: &Trajectory<T>, w: &Weights<T>) -> T {
    (0..z.len())
        .map(|k| stage_cost(z.v[k], z.a[k], z.a_b[k], z.j[k], z.f_r[k], w.v_d, w))
        .sum::<T>()
        * z.dt
}

/// Index of the lowest-cost feasible entry; the earliest index wins ties.
pub fn select_index<T: Scalar>(costs: &[Option<T>]) -> Result<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, c) in costs.iter().enumerate() {
        if let Some(c) = c {
            if best.is_none_or(|(_, b)| *c < b) {
                best = Some((i, *c));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoFeasibleCandidate(costs.len()))
}

/// Picks the feasible trajectory with the smallest objective.
pub fn select_candidate<'a, T: Scalar>(
    cands: &'a [(Trajectory<T>, bool)],
    w: &Weights<T>,
) -> Result<(usize, &'a Trajectory<T>)> {
    let costs: Vec<Option<T>> =
        cands.iter().map(|(z, ok)| ok.then(|| evaluate_objective(z, w))).collect();
    let i = select_index(&costs)?;
    Ok((i, &cands[i].0))
}
