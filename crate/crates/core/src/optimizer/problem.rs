//! Direct transcription of the trajectory refinement problem.
//!
//! Decision variables per step are `[l, v, a, j, b]` (path distance, speed,
//! apparent acceleration, jerk, brake). Consecutive steps are tied by the
//! exact constant-jerk integrator, traction is bounded through a row per
//! step, and the boundary rows depend on the constraint kind.

use serde::{Deserialize, Serialize};

use super::ipm::{Nlp, Solution, SolveStats};
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::polytraj::{Weights, EPS_V};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Variables per time step.
pub const NV: usize = 5;
const L: usize = 0;
const V: usize = 1;
const A: usize = 2;
const J: usize = 3;
const B: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecKind {
    Bvp,
    AccB,
    AccR,
    AccV,
    FrenetHomotopy,
}

impl SpecKind {
    fn end_rows(self) -> usize {
        match self {
            SpecKind::FrenetHomotopy => 3,
            _ => 1,
        }
    }
}

/// Boundary and path constraints layered on top of the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec<T: Scalar = f64> {
    pub kind: SpecKind,
    /// Lower and upper bounds on `l` for steps `k ≥ 1` (gap or obstacle
    /// projections); empty means unbounded.
    pub l_lo: Vec<T>,
    pub l_hi: Vec<T>,
    /// Terminal window on `l`; `None` pins it to the reference.
    pub end_l: Option<(T, T)>,
    /// Per-step speed to track with `w_v`; empty means the constant `v_d`.
    pub v_ref: Vec<T>,
}

impl<T: Scalar> ConstraintSpec<T> {
    /// Start fixed, final distance fixed, final speed and acceleration free.
    pub fn bvp() -> Self {
        Self { kind: SpecKind::Bvp, l_lo: vec![], l_hi: vec![], end_l: None, v_ref: vec![] }
    }

    /// Both ends pinned to the reference, with optional obstacle windows.
    pub fn frenet_homotopy(l_lo: Vec<T>, l_hi: Vec<T>) -> Self {
        Self { kind: SpecKind::FrenetHomotopy, l_lo, l_hi, end_l: None, v_ref: vec![] }
    }
}

/// The refinement NLP around one reference trajectory.
#[derive(Debug, Clone)]
pub struct EmatoProblem<T: Scalar = f64> {
    pub n_t: usize,
    pub dt: T,
    pub t0: T,
    pub theta: Vec<T>,
    pub params: VehicleParams<T>,
    pub weights: Weights<T>,
    pub spec: ConstraintSpec<T>,
    /// Warm start, `NV` entries per step.
    pub warm: Vec<T>,
    /// Grade part of the resistance per step.
    grade: Vec<T>,
}

/// Assembles the problem; the warm start is the reference itself.
pub fn build_problem<T: Scalar>(
    reference: &Trajectory<T>,
    theta: &[T],
    spec: ConstraintSpec<T>,
    weights: Weights<T>,
    params: &VehicleParams<T>,
) -> Result<EmatoProblem<T>> {
    let n = reference.len();
    if n < 2 {
        return Err(Error::Alignment(format!("reference has {n} samples")));
    }
    let lens = [reference.v.len(), reference.a.len(), reference.j.len(), reference.a_b.len(), theta.len()];
    if lens.iter().any(|&m| m != n) {
        return Err(Error::Alignment(format!("reference length {n}, got {lens:?}")));
    }
    for (name, v) in [("l_lo", &spec.l_lo), ("l_hi", &spec.l_hi), ("v_ref", &spec.v_ref)] {
        if !v.is_empty() && v.len() != n {
            return Err(Error::Alignment(format!("{name} has {} samples, expected {n}", v.len())));
        }
    }
    if !weights.is_valid() {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    let mut warm = Vec::with_capacity(NV * n);
    for k in 0..n {
        warm.extend([reference.l[k], reference.v[k], reference.a[k], reference.j[k], reference.a_b[k]]);
    }
    Ok(EmatoProblem {
        n_t: n,
        dt: reference.dt,
        t0: reference.t.first().copied().unwrap_or_else(T::zero),
        theta: theta.to_vec(),
        params: *params,
        weights,
        grade: theta.iter().map(|th| params.grade_accel(*th)).collect(),
        spec,
        warm,
    })
}

impl<T: Scalar> EmatoProblem<T> {
    #[inline]
    fn idx(k: usize, c: usize) -> usize {
        NV * k + c
    }

    fn row_defect(&self, k: usize) -> usize {
        3 + 3 * k
    }

    fn row_traction(&self, k: usize) -> usize {
        3 + 3 * (self.n_t - 1) + k
    }

    fn row_end(&self) -> usize {
        3 + 3 * (self.n_t - 1) + self.n_t
    }

    fn v_ref(&self, k: usize) -> T {
        if self.spec.v_ref.is_empty() {
            self.weights.v_d
        } else {
            self.spec.v_ref[k]
        }
    }

    /// Traction acceleration at step `k` of `x`.
    #[inline]
    pub fn traction(&self, x: &[T], k: usize) -> T {
        let i = NV * k;
        x[i + A] + self.params.k1() * x[i + V] * x[i + V] + self.grade[k] + x[i + B]
    }

    /// Reference final state `(l, v, a)`.
    fn warm_end(&self) -> [T; 3] {
        let i = NV * (self.n_t - 1);
        [self.warm[i + L], self.warm[i + V], self.warm[i + A]]
    }

    /// Fuel-per-speed term `f(v, a_t)/max(v, ε)` and its derivatives
    /// `(h, h_v, h_at, h_vv, h_v_at)` with `a_t` depending on `v` via drag.
    fn fuel_term(&self, v: T, at: T) -> (T, T, T, T, T) {
        let fc = &self.params.fuel;
        let k1 = self.params.k1();
        let two = T::lit(2.0);
        let f = fc.rate(v, at);
        let c = fc.traction_gain(v);
        let dc = fc.dc(v);
        // Total derivatives along the traction row.
        let fv = fc.dp(v) + dc * at + c * two * k1 * v;
        let fvv = fc.ddp(v) + fc.ddc() * at + two * dc * two * k1 * v + c * two * k1;
        let fva = dc;
        let eps = T::lit(EPS_V);
        if v > eps {
            let iv = T::one() / v;
            (
                f * iv,
                fv * iv - f * iv * iv,
                c * iv,
                fvv * iv - two * fv * iv * iv + two * f * iv * iv * iv,
                fva * iv - c * iv * iv,
            )
        } else {
            let ie = T::one() / eps;
            (f * ie, fv * ie, c * ie, fvv * ie, fva * ie)
        }
    }

    /// Trajectory view of a solution vector.
    pub fn trajectory(&self, x: &[T]) -> Trajectory<T> {
        let col = |c: usize| (0..self.n_t).map(|k| x[Self::idx(k, c)]).collect::<Vec<T>>();
        Trajectory::from_kinematics(
            self.dt,
            self.t0,
            col(L),
            col(V),
            col(A),
            col(J),
            self.theta.clone(),
            Some(col(B)),
            &self.params,
        )
    }

    /// Largest dynamics defect of `x`.
    pub fn max_defect(&self, x: &[T]) -> T {
        let mut c = vec![T::zero(); self.m()];
        self.constraints(x, &mut c);
        (0..self.n_t - 1)
            .flat_map(|k| (0..3).map(move |r| (k, r)))
            .map(|(k, r)| c[self.row_defect(k) + r].abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> Nlp<T> for EmatoProblem<T> {
    fn n(&self) -> usize {
        NV * self.n_t
    }

    fn m(&self) -> usize {
        3 + 3 * (self.n_t - 1) + self.n_t + self.spec.kind.end_rows()
    }

    fn var_bounds(&self, lo: &mut [T], hi: &mut [T]) {
        let lim = &self.params.limits;
        let inf = T::infinity();
        for k in 0..self.n_t {
            let i = NV * k;
            let (l_lo, l_hi) = if k == 0 {
                (-inf, inf)
            } else {
                (
                    self.spec.l_lo.get(k).copied().unwrap_or(-inf),
                    self.spec.l_hi.get(k).copied().unwrap_or(inf),
                )
            };
            lo[i + L] = l_lo;
            hi[i + L] = l_hi;
            lo[i + V] = T::zero();
            hi[i + V] = lim.v_max;
            lo[i + A] = -lim.a_b_max;
            hi[i + A] = lim.a_v_max;
            lo[i + J] = -lim.j_max;
            hi[i + J] = lim.j_max;
            lo[i + B] = T::zero();
            hi[i + B] = lim.a_b_max;
        }
    }

    fn con_bounds(&self, lo: &mut [T], hi: &mut [T]) {
        lo.iter_mut().for_each(|v| *v = T::zero());
        hi.iter_mut().for_each(|v| *v = T::zero());
        lo[..3].copy_from_slice(&self.warm[..3]);
        hi[..3].copy_from_slice(&self.warm[..3]);
        for k in 0..self.n_t {
            let r = self.row_traction(k);
            hi[r] = self.params.limits.a_t_max;
        }
        let e = self.row_end();
        let end = self.warm_end();
        match self.spec.kind {
            SpecKind::FrenetHomotopy => {
                lo[e..e + 3].copy_from_slice(&end);
                hi[e..e + 3].copy_from_slice(&end);
            }
            _ => {
                let (a, b) = self.spec.end_l.unwrap_or((end[0], end[0]));
                lo[e] = a;
                hi[e] = b;
            }
        }
    }

    fn initial_point(&self, x: &mut [T]) {
        x.copy_from_slice(&self.warm);
    }

    fn objective(&self, x: &[T]) -> T {
        let w = &self.weights;
        let mut acc = T::zero();
        for k in 0..self.n_t {
            let i = NV * k;
            let (v, a, j, b) = (x[i + V], x[i + A], x[i + J], x[i + B]);
            let dv = v - self.v_ref(k);
            let mut s = w.w_v * dv * dv + w.w_a * a * a + w.w_b * b * b + w.w_j * j * j;
            if w.w_f != T::zero() {
                s += w.w_f * self.fuel_term(v, self.traction(x, k)).0;
            }
            acc += s;
        }
        acc * self.dt
    }

    fn gradient(&self, x: &[T], g: &mut [T]) {
        let w = &self.weights;
        let two = T::lit(2.0);
        let dt = self.dt;
        g.iter_mut().for_each(|v| *v = T::zero());
        for k in 0..self.n_t {
            let i = NV * k;
            let (v, a, j, b) = (x[i + V], x[i + A], x[i + J], x[i + B]);
            g[i + V] = two * w.w_v * (v - self.v_ref(k));
            g[i + A] = two * w.w_a * a;
            g[i + J] = two * w.w_j * j;
            g[i + B] = two * w.w_b * b;
            if w.w_f != T::zero() {
                let (_, hv, ha, _, _) = self.fuel_term(v, self.traction(x, k));
                g[i + V] += w.w_f * hv;
                g[i + A] += w.w_f * ha;
                g[i + B] += w.w_f * ha;
            }
            for c in 0..NV {
                g[i + c] *= dt;
            }
        }
    }

    fn constraints(&self, x: &[T], c: &mut [T]) {
        let dt = self.dt;
        let (h2, h3) = (dt * dt / T::lit(2.0), dt * dt * dt / T::lit(6.0));
        c[0] = x[L];
        c[1] = x[V];
        c[2] = x[A];
        for k in 0..self.n_t - 1 {
            let (i, n) = (NV * k, NV * (k + 1));
            let r = self.row_defect(k);
            let (l, v, a, j) = (x[i + L], x[i + V], x[i + A], x[i + J]);
            c[r] = x[n + L] - (l + v * dt + a * h2 + j * h3);
            c[r + 1] = x[n + V] - (v + a * dt + j * h2);
            c[r + 2] = x[n + A] - (a + j * dt);
        }
        for k in 0..self.n_t {
            c[self.row_traction(k)] = self.traction(x, k);
        }
        let e = self.row_end();
        let last = NV * (self.n_t - 1);
        c[e] = x[last + L];
        if self.spec.kind == SpecKind::FrenetHomotopy {
            c[e + 1] = x[last + V];
            c[e + 2] = x[last + A];
        }
    }

    fn jac_structure(&self) -> Vec<(usize, usize)> {
        let mut s = vec![(0, L), (1, V), (2, A)];
        for k in 0..self.n_t - 1 {
            let (i, n) = (NV * k, NV * (k + 1));
            let r = self.row_defect(k);
            s.extend([(r, i + L), (r, i + V), (r, i + A), (r, i + J), (r, n + L)]);
            s.extend([(r + 1, i + V), (r + 1, i + A), (r + 1, i + J), (r + 1, n + V)]);
            s.extend([(r + 2, i + A), (r + 2, i + J), (r + 2, n + A)]);
        }
        for k in 0..self.n_t {
            let (i, r) = (NV * k, self.row_traction(k));
            s.extend([(r, i + V), (r, i + A), (r, i + B)]);
        }
        let (e, last) = (self.row_end(), NV * (self.n_t - 1));
        s.push((e, last + L));
        if self.spec.kind == SpecKind::FrenetHomotopy {
            s.extend([(e + 1, last + V), (e + 2, last + A)]);
        }
        s
    }

    fn jac_values(&self, x: &[T], vals: &mut [T]) {
        let dt = self.dt;
        let (h2, h3) = (dt * dt / T::lit(2.0), dt * dt * dt / T::lit(6.0));
        let one = T::one();
        let mut p = 0;
        let mut put = |v: T| {
            vals[p] = v;
            p += 1;
        };
        put(one);
        put(one);
        put(one);
        for _ in 0..self.n_t - 1 {
            for v in [-one, -dt, -h2, -h3, one, -one, -dt, -h2, one, -one, -dt, one] {
                put(v);
            }
        }
        let two_k1 = T::lit(2.0) * self.params.k1();
        for k in 0..self.n_t {
            put(two_k1 * x[NV * k + V]);
            put(one);
            put(one);
        }
        put(one);
        if self.spec.kind == SpecKind::FrenetHomotopy {
            put(one);
            put(one);
        }
    }

    fn hess_structure(&self) -> Vec<(usize, usize)> {
        let mut s = Vec::with_capacity(6 * self.n_t);
        for k in 0..self.n_t {
            let i = NV * k;
            s.extend([
                (i + V, i + V),
                (i + A, i + V),
                (i + A, i + A),
                (i + J, i + J),
                (i + B, i + V),
                (i + B, i + B),
            ]);
        }
        s
    }

    fn hess_values(&self, x: &[T], obj_factor: T, lambda: &[T], vals: &mut [T]) {
        let w = &self.weights;
        let two = T::lit(2.0);
        let sdt = obj_factor * self.dt;
        let two_k1 = two * self.params.k1();
        for k in 0..self.n_t {
            let i = NV * k;
            let (mut hvv, mut hva) = (two * w.w_v, T::zero());
            if w.w_f != T::zero() {
                let (_, _, _, fvv, fva) = self.fuel_term(x[i + V], self.traction(x, k));
                hvv += w.w_f * fvv;
                hva = w.w_f * fva;
            }
            let o = 6 * k;
            vals[o] = sdt * hvv + lambda[self.row_traction(k)] * two_k1;
            vals[o + 1] = sdt * hva;
            vals[o + 2] = sdt * two * w.w_a;
            vals[o + 3] = sdt * two * w.w_j;
            vals[o + 4] = sdt * hva;
            vals[o + 5] = sdt * two * w.w_b;
        }
    }

    fn var_family(&self, i: usize) -> &'static str {
        match i % NV {
            L => match self.spec.kind {
                SpecKind::AccB | SpecKind::AccR | SpecKind::AccV => "gap bounds",
                SpecKind::FrenetHomotopy => "obstacle bounds",
                SpecKind::Bvp => "distance bounds",
            },
            V => "speed bounds",
            A => "acceleration bounds",
            J => "jerk bounds",
            _ => "brake bounds",
        }
    }

    fn con_family(&self, r: usize) -> &'static str {
        if r < 3 {
            "initial state"
        } else if r < self.row_traction(0) {
            "dynamics defects"
        } else if r < self.row_end() {
            "traction bounds"
        } else if matches!(self.spec.kind, SpecKind::AccB | SpecKind::AccR | SpecKind::AccV) {
            "terminal gap"
        } else {
            "terminal state"
        }
    }
}

/// JSON image of a problem and, optionally, its solution. Infinite bounds
/// are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDump {
    pub kind: SpecKind,
    pub n_t: usize,
    pub dt: f64,
    pub n: usize,
    pub m: usize,
    pub var_lo: Vec<Option<f64>>,
    pub var_hi: Vec<Option<f64>>,
    pub con_lo: Vec<Option<f64>>,
    pub con_hi: Vec<Option<f64>>,
    pub warm_start: Vec<f64>,
    pub solution: Option<Vec<f64>>,
    pub stats: Option<SolveStats>,
}

impl<T: Scalar> EmatoProblem<T> {
    pub fn dump(&self, sol: Option<&Solution<T>>) -> ProblemDump {
        let (n, m) = (self.n(), self.m());
        let (mut xl, mut xu) = (vec![T::zero(); n], vec![T::zero(); n]);
        let (mut gl, mut gu) = (vec![T::zero(); m], vec![T::zero(); m]);
        self.var_bounds(&mut xl, &mut xu);
        self.con_bounds(&mut gl, &mut gu);
        let opt = |v: Vec<T>| v.into_iter().map(|x| x.is_finite().then(|| x.to_f64_lossy())).collect();
        let plain = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect();
        ProblemDump {
            kind: self.spec.kind,
            n_t: self.n_t,
            dt: self.dt.to_f64_lossy(),
            n,
            m,
            var_lo: opt(xl),
            var_hi: opt(xu),
            con_lo: opt(gl),
            con_hi: opt(gu),
            warm_start: plain(&self.warm),
            solution: sol.map(|s| plain(&s.x)),
            stats: sol.map(|s| s.stats.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytraj::evaluate_objective;
    use approx::assert_relative_eq;

    fn cruise(v: f64, n: usize) -> Trajectory<f64> {
        let p = VehicleParams::truck();
        Trajectory::from_kinematics(
            0.1,
            0.0,
            (0..n).map(|k| k as f64 * 0.1 * v).collect(),
            vec![v; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            None,
            &p,
        )
    }

    #[test]
    fn objective_matches_polytraj() {
        let z = cruise(18.0, 50);
        let w = Weights::new([0.3, 1.0, 1.0, 0.1, 35.0], 20.0);
        let pr = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &VehicleParams::truck()).unwrap();
        assert_relative_eq!(pr.objective(&pr.warm), evaluate_objective(&z, &w), max_relative = 1e-12);
        assert!(pr.max_defect(&pr.warm) < 1e-12);
    }

    #[test]
    fn dimensions_depend_on_kind_only() {
        let z = cruise(18.0, 50);
        let w = Weights::new([0.0, 1.0, 1.0, 1.0, 1.0], 20.0);
        let p = VehicleParams::truck();
        let a = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &p).unwrap();
        let b = build_problem(&cruise(25.0, 50), &z.theta, ConstraintSpec::bvp(), w, &p).unwrap();
        assert_eq!((a.n(), a.m()), (250, 3 + 147 + 50 + 1));
        assert_eq!(a.jac_structure(), b.jac_structure());
        let h = build_problem(&z, &z.theta, ConstraintSpec::frenet_homotopy(vec![], vec![]), w, &p).unwrap();
        assert_eq!(h.m(), a.m() + 2);
    }

    #[test]
    fn dump_round_trip() {
        let z = cruise(18.0, 50);
        let w = Weights::new([0.0, 1.0, 1.0, 1.0, 1.0], 20.0);
        let p = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &VehicleParams::truck()).unwrap();
        let d = p.dump(None);
        assert_eq!(d.var_lo[0], None);
        assert_eq!(d.var_hi[1], Some(27.0));
        let back: ProblemDump = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn misaligned_inputs() {
        let z = cruise(18.0, 50);
        let w = Weights::new([0.0; 5], 20.0);
        let p = VehicleParams::truck();
        assert!(matches!(build_problem(&z, &z.theta[..10], ConstraintSpec::bvp(), w, &p), Err(Error::Alignment(_))));
        let spec = ConstraintSpec { v_ref: vec![1.0; 3], ..ConstraintSpec::bvp() };
        assert!(matches!(build_problem(&z, &z.theta, spec, w, &p), Err(Error::Alignment(_))));
    }
}
