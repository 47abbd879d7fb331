//! Finite-difference validation of supplied derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ipm::Nlp;
use super::problem::{build_problem, ConstraintSpec, EmatoProblem, NV};
use crate::dynamics::{KinState, VehicleParams};
use crate::error::Result;
use crate::polytraj::{Quintic, Weights};

/// Largest scaled discrepancies `|d − d_fd| / max(1, |d|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub gradient: f64,
    pub jacobian: f64,
    /// Lagrangian Hessian against differences of the exact gradient.
    pub hessian: f64,
    pub tol: f64,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.gradient.max(self.jacobian).max(self.hessian)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tol
    }
}

fn rel(exact: f64, fd: f64) -> f64 {
    (exact - fd).abs() / exact.abs().max(1.0)
}

/// Compares derivatives of `p` at `x` with central differences.
pub fn check_gradients<P: Nlp<f64>>(p: &P, x: &[f64], lambda: &[f64]) -> GradReport {
    let (n, m) = (p.n(), p.m());
    let h = 1e-5;
    let mut g = vec![0.0; n];
    p.gradient(x, &mut g);

    let jac = p.jac_structure();
    let mut jv = vec![0.0; jac.len()];
    p.jac_values(x, &mut jv);
    let mut dense_j = vec![0.0; m * n];
    for (k, &(r, c)) in jac.iter().enumerate() {
        dense_j[r * n + c] += jv[k];
    }

    let hs = p.hess_structure();
    let mut hv = vec![0.0; hs.len()];
    p.hess_values(x, 1.0, lambda, &mut hv);
    let mut dense_h = vec![0.0; n * n];
    for (k, &(i, j)) in hs.iter().enumerate() {
        dense_h[i * n + j] += hv[k];
        if i != j {
            dense_h[j * n + i] += hv[k];
        }
    }

    // Gradient of the Lagrangian, assembled from the exact first derivatives.
    let lag_grad = |xp: &[f64]| {
        let mut gl = vec![0.0; n];
        p.gradient(xp, &mut gl);
        let mut v = vec![0.0; jac.len()];
        p.jac_values(xp, &mut v);
        for (k, &(r, c)) in jac.iter().enumerate() {
            gl[c] += v[k] * lambda[r];
        }
        gl
    };

    let mut report = GradReport { gradient: 0.0, jacobian: 0.0, hessian: 0.0, tol: 1e-5 };
    let mut xp = x.to_vec();
    let (mut cp, mut cm) = (vec![0.0; m], vec![0.0; m]);
    for i in 0..n {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let fp = p.objective(&xp);
        p.constraints(&xp, &mut cp);
        let gp = lag_grad(&xp);
        xp[i] = x[i] - step;
        let fm = p.objective(&xp);
        p.constraints(&xp, &mut cm);
        let gm = lag_grad(&xp);
        xp[i] = x[i];

        report.gradient = report.gradient.max(rel(g[i], (fp - fm) / (2.0 * step)));
        for r in 0..m {
            let fd = (cp[r] - cm[r]) / (2.0 * step);
            report.jacobian = report.jacobian.max(rel(dense_j[r * n + i], fd));
        }
        for j in 0..n {
            let fd = (gp[j] - gm[j]) / (2.0 * step);
            report.hessian = report.hessian.max(rel(dense_h[j * n + i], fd));
        }
    }
    report
}

/// A point inside the variable box of `p`, with speeds kept above the fuel
/// guard so the objective is smooth around it.
pub fn random_point(p: &EmatoProblem<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lim = &p.params.limits;
    let mut x = p.warm.clone();
    for k in 0..p.n_t {
        let i = NV * k;
        x[i] += rng.gen_range(-1.0..1.0);
        x[i + 1] = rng.gen_range(1.0..lim.v_max);
        x[i + 2] = rng.gen_range(-lim.a_b_max..lim.a_v_max);
        x[i + 3] = rng.gen_range(-lim.j_max..lim.j_max);
        x[i + 4] = rng.gen_range(0.0..lim.a_b_max);
    }
    x
}

/// A BVP around a random quintic with random grade and weights.
pub fn random_bvp(params: &VehicleParams<f64>, seed: u64) -> Result<EmatoProblem<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 50;
    let dt = 0.1;
    let v0 = rng.gen_range(5.0..25.0);
    let v1 = rng.gen_range(5.0..25.0);
    let dur = (n - 1) as f64 * dt;
    let q = Quintic::fit(
        KinState::new(0.0, v0, rng.gen_range(-0.5..0.5)),
        KinState::new(0.5 * (v0 + v1) * dur, v1, 0.0),
        dur,
    )?;
    let (amp, phase) = (rng.gen_range(0.0..0.08), rng.gen_range(0.0..std::f64::consts::TAU));
    let theta: Vec<f64> = (0..n).map(|k| amp * (phase + 0.3 * k as f64).sin()).collect();
    let z = q.to_trajectory(n, dt, 0.0, theta.clone(), params);
    let w = Weights::new(
        [rng.gen_range(0.0..1.0), rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..40.0)],
        rng.gen_range(10.0..25.0),
    );
    build_problem(&z, &theta, ConstraintSpec::bvp(), w, params)
}

/// Random multipliers for the Hessian check.
pub fn random_multipliers(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_bvps_pass() {
        for params in [VehicleParams::truck(), VehicleParams::sedan()] {
            for seed in 0..5 {
                let p = random_bvp(&params, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let x = random_point(&p, &mut rng);
                let lam = random_multipliers(p.m(), &mut rng);
                let r = check_gradients(&p, &x, &lam);
                assert!(r.passed(), "seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn near_speed_guard() {
        let mut p = random_bvp(&VehicleParams::truck(), 7).unwrap();
        p.weights.w_f = 30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in [0.05, 0.12] {
            let mut x = random_point(&p, &mut rng);
            for k in 0..p.n_t {
                x[NV * k + 1] = v;
            }
            let r = check_gradients(&p, &x, &vec![0.0; p.m()]);
            assert!(r.passed() && r.gradient.is_finite(), "v={v}: {r:?}");
        }
    }

    #[test]
    fn zero_weights_zero_gradient() {
        let mut p = random_bvp(&VehicleParams::sedan(), 3).unwrap();
        p.weights = Weights::new([0.0; 5], 20.0);
        let mut g = vec![1.0; p.n()];
        let x = random_point(&p, &mut ChaCha8Rng::seed_from_u64(2));
        p.gradient(&x, &mut g);
        assert!(g.iter().all(|v| *v == 0.0));
    }
}
