//! Primal-dual interior-point method for sparse, banded NLPs.
//!
//! Inequality rows receive slack variables, bounds are handled by a log
//! barrier, and each Newton step solves the regularised KKT system with a
//! banded `LDLᵀ`. Globalisation uses an ℓ₁ merit function with Armijo
//! backtracking; the barrier parameter follows the monotone Fiacco–McCormick
//! rule.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::band::{BandLdl, BandMatrix};
use crate::scalar::{norm_inf, Scalar};

/// Smooth NLP `min f(x)  s.t.  g_l ≤ g(x) ≤ g_u,  x_l ≤ x ≤ x_u`.
pub trait Nlp<T: Scalar> {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn var_bounds(&self, lo: &mut [T], hi: &mut [T]);
    fn con_bounds(&self, lo: &mut [T], hi: &mut [T]);
    fn initial_point(&self, x: &mut [T]);
    fn objective(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T], g: &mut [T]);
    fn constraints(&self, x: &[T], c: &mut [T]);
    /// `(row, col)` pairs of the constraint Jacobian.
    fn jac_structure(&self) -> Vec<(usize, usize)>;
    fn jac_values(&self, x: &[T], vals: &mut [T]);
    /// `(row, col)` pairs with `row ≥ col` of the Lagrangian Hessian.
    fn hess_structure(&self) -> Vec<(usize, usize)>;
    fn hess_values(&self, x: &[T], obj_factor: T, lambda: &[T], vals: &mut [T]);

    fn var_family(&self, _i: usize) -> &'static str {
        "variable bounds"
    }

    fn con_family(&self, _i: usize) -> &'static str {
        "constraints"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: Status,
    pub iterations: usize,
    pub wall_time: f64,
    pub objective: f64,
    pub max_violation: f64,
    /// Most violated constraint family when the solve did not succeed.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Solution<T: Scalar> {
    pub x: Vec<T>,
    pub lambda: Vec<T>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    pub bound_push: f64,
    pub bound_relax: f64,
    /// Return the warm start untouched when it already satisfies the KKT
    /// conditions.
    pub warm_check: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-6,
            tol_opt: 1e-5,
            max_iter: 200,
            mu_init: 0.1,
            bound_push: 1e-2,
            bound_relax: 1e-8,
            warm_check: true,
        }
    }
}

/// Position of every primal, slack and dual entry in the banded KKT matrix.
struct Layout {
    pos_var: Vec<usize>,
    pos_slack: Vec<usize>,
    pos_row: Vec<usize>,
    dim: usize,
    bw: usize,
}

impl Layout {
    /// Variables in natural order; each row (preceded by its slack) goes
    /// right after the last variable it touches.
    fn new(n: usize, slack_of: &[Option<usize>], jac: &[(usize, usize)], hess: &[(usize, usize)]) -> Self {
        let m = slack_of.len();
        let mut key = vec![0usize; m];
        for &(r, c) in jac {
            key[r] = key[r].max(c);
        }
        let mut rows_at: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
        for r in 0..m {
            rows_at[key[r].min(n.saturating_sub(1))].push(r);
        }
        let ns = slack_of.iter().flatten().count();
        let mut pos_var = vec![0usize; n];
        let mut pos_slack = vec![0usize; ns];
        let mut pos_row = vec![0usize; m];
        let mut p = 0;
        for i in 0..n {
            pos_var[i] = p;
            p += 1;
            for &r in &rows_at[i] {
                if let Some(s) = slack_of[r] {
                    pos_slack[s] = p;
                    p += 1;
                }
                pos_row[r] = p;
                p += 1;
            }
        }
        let mut bw: usize = 1;
        for &(i, j) in hess {
            bw = bw.max(pos_var[i].abs_diff(pos_var[j]));
        }
        for &(r, c) in jac {
            bw = bw.max(pos_row[r].abs_diff(pos_var[c]));
        }
        Self { pos_var, pos_slack, pos_row, dim: p, bw }
    }
}

/// Solver workspace tied to one problem instance.
struct Ipm<'a, T: Scalar, P: Nlp<T>> {
    p: &'a P,
    o: IpmOptions,
    n: usize,
    m: usize,
    ns: usize,
    slack_of: Vec<Option<usize>>,
    row_of_slack: Vec<usize>,
    /// Equality target for rows without slack.
    target: Vec<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    orig_lo: Vec<T>,
    orig_hi: Vec<T>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
    layout: Layout,
    kkt: BandMatrix<T>,
    obj_scale: T,
    con_lo: Vec<T>,
    con_hi: Vec<T>,
}

fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

impl<'a, T: Scalar, P: Nlp<T>> Ipm<'a, T, P> {
    fn ny(&self) -> usize {
        self.n + self.ns
    }

    fn residual(&self, y: &[T], g: &mut [T], c: &mut [T]) {
        self.p.constraints(&y[..self.n], g);
        for r in 0..self.m {
            c[r] = match self.slack_of[r] {
                Some(s) => g[r] - y[self.n + s],
                None => g[r] - self.target[r],
            };
        }
    }

    /// Original-units violation of rows and bounds at `x`.
    fn violation(&self, x: &[T], g: &mut [T]) -> (T, usize, bool) {
        self.p.constraints(x, g);
        let mut worst = T::zero();
        let mut arg = 0usize;
        let mut is_row = true;
        for r in 0..self.m {
            let v = (self.con_lo[r] - g[r]).max(g[r] - self.con_hi[r]).max(T::zero());
            if v > worst {
                worst = v;
                arg = r;
                is_row = true;
            }
        }
        for i in 0..self.n {
            let v = (self.orig_lo[i] - x[i]).max(x[i] - self.orig_hi[i]).max(T::zero());
            if v > worst {
                worst = v;
                arg = i;
                is_row = false;
            }
        }
        (worst, arg, is_row)
    }

    fn family(&self, arg: usize, is_row: bool) -> String {
        if is_row {
            self.p.con_family(arg).to_string()
        } else {
            self.p.var_family(arg).to_string()
        }
    }

    /// `Aᵀλ` over primal and slack components.
    fn at_lambda(&self, jv: &[T], lambda: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (k, &(r, c)) in self.jac.iter().enumerate() {
            out[c] += jv[k] * lambda[r];
        }
        for (s, &r) in self.row_of_slack.iter().enumerate() {
            out[self.n + s] -= lambda[r];
        }
    }

    fn assemble(&mut self, hv: Option<&[T]>, jv: &[T], diag: &[T], delta_c: T) {
        let lay = &self.layout;
        self.kkt.clear();
        if let Some(hv) = hv {
            for (k, &(i, j)) in self.hess.iter().enumerate() {
                self.kkt.add(lay.pos_var[i], lay.pos_var[j], hv[k]);
            }
        }
        for i in 0..self.n {
            self.kkt.add(lay.pos_var[i], lay.pos_var[i], diag[i]);
        }
        for s in 0..self.ns {
            self.kkt.add(lay.pos_slack[s], lay.pos_slack[s], diag[self.n + s]);
        }
        for (k, &(r, c)) in self.jac.iter().enumerate() {
            self.kkt.add(lay.pos_row[r], lay.pos_var[c], jv[k]);
        }
        for r in 0..self.m {
            if let Some(s) = self.slack_of[r] {
                self.kkt.add(lay.pos_row[r], lay.pos_slack[s], -T::one());
            }
            self.kkt.add(lay.pos_row[r], lay.pos_row[r], -delta_c);
        }
    }

    /// Solves with the factor plus two refinement sweeps against `self.kkt`.
    fn solve_refined(&self, ldl: &BandLdl<T>, rhs: &[T], out: &mut [T]) {
        out.copy_from_slice(rhs);
        ldl.solve(out);
        let mut r = vec![T::zero(); rhs.len()];
        for _ in 0..2 {
            self.kkt.mul_vec(out, &mut r);
            for i in 0..r.len() {
                r[i] = rhs[i] - r[i];
            }
            ldl.solve(&mut r);
            for i in 0..r.len() {
                out[i] += r[i];
            }
        }
    }

    fn scatter(&self, dy: &[T], dl: &[T], rhs: &mut [T]) {
        let lay = &self.layout;
        for i in 0..self.n {
            rhs[lay.pos_var[i]] = dy[i];
        }
        for s in 0..self.ns {
            rhs[lay.pos_slack[s]] = dy[self.n + s];
        }
        for r in 0..self.m {
            rhs[lay.pos_row[r]] = dl[r];
        }
    }

    fn gather(&self, sol: &[T], dy: &mut [T], dl: &mut [T]) {
        let lay = &self.layout;
        for i in 0..self.n {
            dy[i] = sol[lay.pos_var[i]];
        }
        for s in 0..self.ns {
            dy[self.n + s] = sol[lay.pos_slack[s]];
        }
        for r in 0..self.m {
            dl[r] = sol[lay.pos_row[r]];
        }
    }

    /// Least-squares multipliers minimising `‖∇f + Aᵀλ‖` in the `D⁻¹` norm.
    fn ls_multipliers(&mut self, grad_y: &[T], jv: &[T], dweights: &[T]) -> Option<Vec<T>> {
        self.assemble(None, jv, dweights, T::zero());
        let (ldl, inertia) = BandLdl::factor(&self.kkt, lit(1e-14));
        if inertia.zero > 0 {
            return None;
        }
        let mut rhs = vec![T::zero(); self.layout.dim];
        let neg: Vec<T> = grad_y.iter().map(|g| -*g).collect();
        self.scatter(&neg, &vec![T::zero(); self.m], &mut rhs);
        let mut sol = vec![T::zero(); self.layout.dim];
        self.solve_refined(&ldl, &rhs, &mut sol);
        let mut dy = vec![T::zero(); self.ny()];
        let mut lambda = vec![T::zero(); self.m];
        self.gather(&sol, &mut dy, &mut lambda);
        Some(lambda)
    }
}

/// Solves the NLP from the problem's initial point.
pub fn solve<T: Scalar, P: Nlp<T>>(p: &P, opts: &IpmOptions) -> Solution<T> {
    let start = Instant::now();
    let mut sol = solve_inner(p, opts);
    sol.stats.wall_time = start.elapsed().as_secs_f64();
    sol
}

fn solve_inner<T: Scalar, P: Nlp<T>>(p: &P, o: &IpmOptions) -> Solution<T> {
    let (n, m) = (p.n(), p.m());
    let mut xl = vec![T::zero(); n];
    let mut xu = vec![T::zero(); n];
    p.var_bounds(&mut xl, &mut xu);
    let mut gl = vec![T::zero(); m];
    let mut gu = vec![T::zero(); m];
    p.con_bounds(&mut gl, &mut gu);
    let mut x0 = vec![T::zero(); n];
    p.initial_point(&mut x0);

    let fail = |family: String, x: Vec<T>| Solution {
        lambda: vec![T::zero(); m],
        stats: SolveStats {
            status: Status::Infeasible,
            iterations: 0,
            wall_time: 0.0,
            objective: p.objective(&x).to_f64_lossy(),
            max_violation: f64::INFINITY,
            diagnostic: Some(family),
        },
        x,
    };
    let tol_f: T = lit(o.tol_feas);
    for i in 0..n {
        if xl[i] > xu[i] + tol_f {
            return fail(p.var_family(i).to_string(), x0);
        }
    }
    for r in 0..m {
        if gl[r] > gu[r] + tol_f {
            return fail(p.con_family(r).to_string(), x0);
        }
    }

    // Row classification and slack bounds.
    let mut slack_of = vec![None; m];
    let mut row_of_slack = Vec::new();
    let mut target = vec![T::zero(); m];
    let mut slo = Vec::new();
    let mut shi = Vec::new();
    for r in 0..m {
        let width = gu[r] - gl[r];
        if gl[r].is_finite() && width.abs() <= lit::<T>(1e-12) * T::one().max(gl[r].abs()) {
            target[r] = gl[r];
        } else {
            slack_of[r] = Some(row_of_slack.len());
            row_of_slack.push(r);
            slo.push(gl[r]);
            shi.push(gu[r]);
        }
    }
    let ns = row_of_slack.len();
    let relax = |b: T, down: bool| {
        if !b.is_finite() {
            return b;
        }
        let d = lit::<T>(o.bound_relax) * T::one().max(b.abs());
        if down { b - d } else { b + d }
    };
    let mut lo: Vec<T> = xl.iter().chain(&slo).map(|b| relax(*b, true)).collect();
    let mut hi: Vec<T> = xu.iter().chain(&shi).map(|b| relax(*b, false)).collect();
    for i in 0..lo.len() {
        if lo[i] > hi[i] {
            let mid = (lo[i] + hi[i]) / lit(2.0);
            lo[i] = mid;
            hi[i] = mid;
        }
    }

    let jac = p.jac_structure();
    let hess = p.hess_structure();
    let layout = Layout::new(n, &slack_of, &jac, &hess);
    let kkt = BandMatrix::zeros(layout.dim, layout.bw);
    let mut ipm = Ipm {
        p,
        o: *o,
        n,
        m,
        ns,
        slack_of,
        row_of_slack,
        target,
        lo,
        hi,
        orig_lo: xl.clone(),
        orig_hi: xu.clone(),
        jac,
        hess,
        layout,
        kkt,
        obj_scale: T::one(),
        con_lo: gl.clone(),
        con_hi: gu.clone(),
    };
    run(&mut ipm, x0)
}

fn run<T: Scalar, P: Nlp<T>>(s: &mut Ipm<'_, T, P>, x0: Vec<T>) -> Solution<T> {
    let (n, m, ny) = (s.n, s.m, s.ny());
    let o = s.o;
    let nnz_j = s.jac.len();
    let nnz_h = s.hess.len();
    let mut g = vec![T::zero(); m];
    let mut c = vec![T::zero(); m];
    let mut jv = vec![T::zero(); nnz_j];
    let mut hv = vec![T::zero(); nnz_h];
    let mut gradf = vec![T::zero(); n];
    let mut grad_y = vec![T::zero(); ny];
    let mut atl = vec![T::zero(); ny];

    // Projected warm start, no interior push.
    let mut y = vec![T::zero(); ny];
    for i in 0..n {
        y[i] = x0[i].max(s.orig_lo[i]).min(s.orig_hi[i]);
    }
    s.p.constraints(&y[..n], &mut g);
    for (k, &r) in s.row_of_slack.iter().enumerate() {
        y[n + k] = g[r].max(s.con_lo[r]).min(s.con_hi[r]);
    }

    s.p.gradient(&y[..n], &mut gradf);
    let gmax = norm_inf(&gradf);
    s.obj_scale = if gmax > lit(100.0) { lit::<T>(100.0) / gmax } else { T::one() };
    let sf = s.obj_scale;

    let warm_x: Vec<T> = y[..n].to_vec();
    let (warm_viol, _, _) = s.violation(&warm_x, &mut g);
    let warm_feasible = warm_viol <= lit(o.tol_feas);
    let warm_obj = s.p.objective(&warm_x);

    if o.warm_check && warm_feasible {
        if let Some(lambda) = warm_kkt(s, &y, &mut jv, &mut gradf) {
            return finish(s, warm_x, lambda, Status::Solved, 0, None);
        }
    }

    // Interior push.
    for i in 0..ny {
        let (l, u) = (s.lo[i], s.hi[i]);
        if l == u {
            y[i] = l;
            continue;
        }
        let k1: T = lit(o.bound_push);
        let pl = if u.is_finite() && l.is_finite() {
            (k1 * T::one().max(l.abs())).min(k1 * (u - l))
        } else {
            k1 * T::one().max(l.abs())
        };
        let pu = if u.is_finite() && l.is_finite() {
            (k1 * T::one().max(u.abs())).min(k1 * (u - l))
        } else {
            k1 * T::one().max(u.abs())
        };
        if l.is_finite() {
            y[i] = y[i].max(l + pl);
        }
        if u.is_finite() {
            y[i] = y[i].min(u - pu);
        }
    }

    let has_l: Vec<bool> = (0..ny).map(|i| s.lo[i].is_finite() && s.lo[i] < s.hi[i]).collect();
    let has_u: Vec<bool> = (0..ny).map(|i| s.hi[i].is_finite() && s.lo[i] < s.hi[i]).collect();
    let mut mu: T = lit(o.mu_init);
    let mut zl: Vec<T> = (0..ny).map(|i| if has_l[i] { mu / (y[i] - s.lo[i]) } else { T::zero() }).collect();
    let mut zu: Vec<T> = (0..ny).map(|i| if has_u[i] { mu / (s.hi[i] - y[i]) } else { T::zero() }).collect();

    // Multiplier initialisation.
    s.p.gradient(&y[..n], &mut gradf);
    s.p.jac_values(&y[..n], &mut jv);
    for i in 0..ny {
        grad_y[i] = if i < n { sf * gradf[i] } else { T::zero() } - zl[i] + zu[i];
    }
    let ones = vec![T::one(); ny];
    let mut lambda = s.ls_multipliers(&grad_y, &jv, &ones).unwrap_or_else(|| vec![T::zero(); m]);
    if norm_inf(&lambda) > lit(1e3) {
        lambda.iter_mut().for_each(|l| *l = T::zero());
    }

    let tol_opt: T = lit(o.tol_opt);
    let tol_feas: T = lit(o.tol_feas);
    let kappa_eps: T = lit(10.0);
    let mut nu: T = T::one();
    let mut delta_w_last = T::zero();
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    let mut dy = vec![T::zero(); ny];
    let mut dl = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); s.layout.dim];
    let mut solv = vec![T::zero(); s.layout.dim];
    let mut sigma = vec![T::zero(); ny];
    let mut diag = vec![T::zero(); ny];
    let mut grad_phi = vec![T::zero(); ny];
    let mut y_trial = vec![T::zero(); ny];
    let mut c_trial = vec![T::zero(); m];
    let mut stall = 0usize;
    // Extra primal regularisation after a failed line search.
    let mut boost = T::zero();

    for iter in 0..o.max_iter {
        s.p.gradient(&y[..n], &mut gradf);
        s.p.jac_values(&y[..n], &mut jv);
        s.residual(&y, &mut g, &mut c);
        s.at_lambda(&jv, &lambda, &mut atl);

        // Optimality measures.
        let mut dual = T::zero();
        let mut compl0 = T::zero();
        let mut compl_mu = T::zero();
        for i in 0..ny {
            let gi = if i < n { sf * gradf[i] } else { T::zero() };
            dual = dual.max((gi + atl[i] - zl[i] + zu[i]).abs());
            if has_l[i] {
                let q = (y[i] - s.lo[i]) * zl[i];
                compl0 = compl0.max(q.abs());
                compl_mu = compl_mu.max((q - mu).abs());
            }
            if has_u[i] {
                let q = (s.hi[i] - y[i]) * zu[i];
                compl0 = compl0.max(q.abs());
                compl_mu = compl_mu.max((q - mu).abs());
            }
        }
        let primal = norm_inf(&c);
        let s_max: T = lit(100.0);
        let zsum: T = zl.iter().chain(&zu).map(|z| z.abs()).sum();
        let lsum: T = lambda.iter().map(|l| l.abs()).sum();
        let denom = lit::<T>((m + 2 * ny).max(1) as f64);
        let s_d = s_max.max((lsum + zsum) / denom) / s_max;
        let s_c = s_max.max(zsum / lit::<T>((2 * ny).max(1) as f64)) / s_max;

        let x_now = &y[..n];
        if primal <= tol_feas {
            let f = s.p.objective(x_now);
            if best.as_ref().is_none_or(|b| f < b.0) {
                best = Some((f, x_now.to_vec(), lambda.clone()));
            }
        }
        if primal <= tol_feas && dual / s_d <= tol_opt && compl0 / s_c <= tol_opt {
            let lam = lambda.iter().map(|l| *l / sf).collect();
            return finish_checked(s, y[..n].to_vec(), lam, iter, warm_feasible, warm_obj, &warm_x);
        }

        // Barrier update.
        let mut e_mu = (dual / s_d).max(primal).max(compl_mu / s_c);
        while e_mu <= kappa_eps * mu && mu > tol_opt / lit(10.0) {
            let next = (lit::<T>(0.2) * mu).min(mu.powf(lit(1.5))).max(tol_opt / lit(10.0));
            if next >= mu {
                break;
            }
            mu = next;
            compl_mu = T::zero();
            for i in 0..ny {
                if has_l[i] {
                    compl_mu = compl_mu.max(((y[i] - s.lo[i]) * zl[i] - mu).abs());
                }
                if has_u[i] {
                    compl_mu = compl_mu.max(((s.hi[i] - y[i]) * zu[i] - mu).abs());
                }
            }
            e_mu = (dual / s_d).max(primal).max(compl_mu / s_c);
        }

        // Barrier gradient and Σ.
        for i in 0..ny {
            let gi = if i < n { sf * gradf[i] } else { T::zero() };
            let mut gp = gi;
            let mut sg = T::zero();
            if has_l[i] {
                let d = y[i] - s.lo[i];
                gp -= mu / d;
                sg += zl[i] / d;
            }
            if has_u[i] {
                let d = s.hi[i] - y[i];
                gp += mu / d;
                sg += zu[i] / d;
            }
            grad_phi[i] = gp;
            sigma[i] = sg;
        }
        s.p.hess_values(&y[..n], sf, &lambda, &mut hv);

        // Factor with inertia correction.
        let mut delta_w = boost;
        let mut delta_c = T::zero();
        let mut tries = 0;
        let ldl = loop {
            for i in 0..ny {
                diag[i] = sigma[i] + delta_w;
            }
            let hv_ref: &[T] = &hv;
            s.assemble(Some(hv_ref), &jv, &diag, delta_c);
            let (ldl, inertia) = BandLdl::factor(&s.kkt, lit(1e-13));
            if inertia.pos == ny && inertia.neg == m && inertia.zero == 0 {
                break Some(ldl);
            }
            if inertia.zero > 0 && delta_c == T::zero() {
                delta_c = lit::<T>(1e-8) * mu.powf(lit(0.25));
            }
            delta_w = if delta_w == T::zero() {
                if delta_w_last == T::zero() {
                    lit(1e-4)
                } else {
                    (delta_w_last / lit(3.0)).max(lit(1e-20))
                }
            } else if delta_w_last == T::zero() {
                delta_w * lit(100.0)
            } else {
                delta_w * lit(8.0)
            };
            tries += 1;
            if tries > 60 || delta_w > lit(1e40) {
                break None;
            }
        };
        let Some(ldl) = ldl else { break };
        if delta_w > T::zero() {
            delta_w_last = delta_w;
        }

        // Newton direction.
        for i in 0..ny {
            dy[i] = -(grad_phi[i] + atl[i]);
        }
        for r in 0..m {
            dl[r] = -c[r];
        }
        s.scatter(&dy, &dl, &mut rhs);
        s.solve_refined(&ldl, &rhs, &mut solv);
        s.gather(&solv, &mut dy, &mut dl);

        // Fraction to the boundary.
        let tau = lit::<T>(0.99).max(T::one() - mu);
        let mut alpha_max = T::one();
        for i in 0..ny {
            if has_l[i] && dy[i] < T::zero() {
                alpha_max = alpha_max.min(-tau * (y[i] - s.lo[i]) / dy[i]);
            }
            if has_u[i] && dy[i] > T::zero() {
                alpha_max = alpha_max.min(tau * (s.hi[i] - y[i]) / dy[i]);
            }
        }
        let mut dzl = vec![T::zero(); ny];
        let mut dzu = vec![T::zero(); ny];
        let mut alpha_z = T::one();
        for i in 0..ny {
            if has_l[i] {
                let d = y[i] - s.lo[i];
                dzl[i] = mu / d - zl[i] - zl[i] / d * dy[i];
                if dzl[i] < T::zero() {
                    alpha_z = alpha_z.min(-tau * zl[i] / dzl[i]);
                }
            }
            if has_u[i] {
                let d = s.hi[i] - y[i];
                dzu[i] = mu / d - zu[i] + zu[i] / d * dy[i];
                if dzu[i] < T::zero() {
                    alpha_z = alpha_z.min(-tau * zu[i] / dzu[i]);
                }
            }
        }

        // Merit line search.
        let c1: T = c.iter().map(|v| v.abs()).sum();
        let gdy: T = (0..ny).map(|i| grad_phi[i] * dy[i]).sum();
        let mut hdy = vec![T::zero(); s.layout.dim];
        let mut dyk = vec![T::zero(); s.layout.dim];
        s.scatter(&dy, &vec![T::zero(); m], &mut dyk);
        s.kkt.mul_vec(&dyk, &mut hdy);
        let curv: T = (0..n)
            .map(|i| dy[i] * hdy[s.layout.pos_var[i]])
            .chain((0..s.ns).map(|k| dy[n + k] * hdy[s.layout.pos_slack[k]]))
            .sum();
        if c1 > T::zero() {
            let sigma_c = if curv > T::zero() { lit::<T>(0.5) * curv } else { T::zero() };
            let need = (gdy + sigma_c) / (lit::<T>(0.9) * c1);
            if nu < need {
                nu = need + T::one();
            }
        }
        let merit = |yv: &[T], cv: &[T]| -> T {
            let mut phi = sf * s.p.objective(&yv[..n]);
            for i in 0..ny {
                if has_l[i] {
                    phi -= mu * (yv[i] - s.lo[i]).ln();
                }
                if has_u[i] {
                    phi -= mu * (s.hi[i] - yv[i]).ln();
                }
            }
            phi + nu * cv.iter().map(|v| v.abs()).sum::<T>()
        };
        let m0 = merit(&y, &c);
        let ddir = gdy - nu * c1;
        let mut alpha = alpha_max;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..ny {
                y_trial[i] = y[i] + alpha * dy[i];
            }
            s.residual(&y_trial, &mut g, &mut c_trial);
            let m1 = merit(&y_trial, &c_trial);
            if m1.is_finite() && (m1 <= m0 + lit::<T>(1e-4) * alpha * ddir.min(T::zero())
                || (ddir.abs() <= lit::<T>(1e-14) * T::one().max(m0.abs()) && m1 <= m0 + lit::<T>(1e-12) * T::one().max(m0.abs())))
            {
                accepted = true;
                break;
            }
            alpha = alpha / lit(2.0);
            if alpha < lit(1e-14) {
                break;
            }
        }
        if !accepted {
            stall += 1;
            if stall > 10 {
                break;
            }
            boost = (boost * lit(100.0)).max(lit(1e-2));
            continue;
        }
        stall = 0;
        boost = if boost > lit(1e-2) { boost / lit(100.0) } else { T::zero() };
        y.copy_from_slice(&y_trial);
        for r in 0..m {
            lambda[r] += alpha * dl[r];
        }
        let kappa_sigma: T = lit(1e10);
        for i in 0..ny {
            if has_l[i] {
                let d = y[i] - s.lo[i];
                zl[i] = (zl[i] + alpha_z * dzl[i]).max(mu / (kappa_sigma * d)).min(kappa_sigma * mu / d);
            }
            if has_u[i] {
                let d = s.hi[i] - y[i];
                zu[i] = (zu[i] + alpha_z * dzu[i]).max(mu / (kappa_sigma * d)).min(kappa_sigma * mu / d);
            }
        }
    }

    // No convergence: best feasible iterate, else report the violated family.
    let iters = o.max_iter;
    match best {
        Some((_, x, lam)) => {
            let lam = lam.iter().map(|l| *l / sf).collect();
            let mut sol = finish(s, x, lam, Status::MaxIter, iters, None);
            if warm_feasible && sol.stats.objective > warm_obj.to_f64_lossy() + 1e-8 {
                sol = finish(s, warm_x, vec![T::zero(); m], Status::MaxIter, iters, None);
            }
            sol
        }
        None if warm_feasible => finish(s, warm_x, vec![T::zero(); m], Status::MaxIter, iters, None),
        None => {
            let x = y[..n].to_vec();
            let (_, arg, is_row) = s.violation(&x, &mut g);
            let fam = s.family(arg, is_row);
            finish(s, x, lambda, Status::Infeasible, iters, Some(fam))
        }
    }
}

/// KKT test at the projected warm start using least-squares multipliers.
fn warm_kkt<T: Scalar, P: Nlp<T>>(
    s: &mut Ipm<'_, T, P>,
    y: &[T],
    jv: &mut [T],
    gradf: &mut [T],
) -> Option<Vec<T>> {
    let (n, ny) = (s.n, s.ny());
    let sf = s.obj_scale;
    s.p.gradient(&y[..n], gradf);
    s.p.jac_values(&y[..n], jv);
    let at_tol: T = lit(1e-9);
    let mut side = vec![0i8; ny];
    let mut dw = vec![T::one(); ny];
    for i in 0..ny {
        let (l, u) = if i < n {
            (s.orig_lo[i], s.orig_hi[i])
        } else {
            let r = s.row_of_slack[i - n];
            (s.con_lo[r], s.con_hi[r])
        };
        if l.is_finite() && y[i] - l <= at_tol * T::one().max(l.abs()) {
            side[i] = -1;
            dw[i] = lit(1e12);
        } else if u.is_finite() && u - y[i] <= at_tol * T::one().max(u.abs()) {
            side[i] = 1;
            dw[i] = lit(1e12);
        }
    }
    let grad_y: Vec<T> = (0..ny).map(|i| if i < n { sf * gradf[i] } else { T::zero() }).collect();
    let lambda = s.ls_multipliers(&grad_y, jv, &dw)?;
    let mut atl = vec![T::zero(); ny];
    s.at_lambda(jv, &lambda, &mut atl);
    let tol: T = lit(s.o.tol_opt);
    for i in 0..ny {
        let r = grad_y[i] + atl[i];
        let ok = match side[i] {
            0 => r.abs() <= tol,
            -1 => r >= -tol,
            _ => r <= tol,
        };
        if !ok {
            return None;
        }
    }
    Some(lambda.iter().map(|l| *l / sf).collect())
}

fn finish_checked<T: Scalar, P: Nlp<T>>(
    s: &Ipm<'_, T, P>,
    x: Vec<T>,
    lambda: Vec<T>,
    iters: usize,
    warm_feasible: bool,
    warm_obj: T,
    warm_x: &[T],
) -> Solution<T> {
    let sol = finish(s, x, lambda, Status::Solved, iters, None);
    if warm_feasible && sol.stats.objective > warm_obj.to_f64_lossy() + 1e-8 {
        let mut w = finish(s, warm_x.to_vec(), vec![T::zero(); s.m], Status::Solved, iters, None);
        w.stats.iterations = iters;
        return w;
    }
    sol
}

fn finish<T: Scalar, P: Nlp<T>>(
    s: &Ipm<'_, T, P>,
    mut x: Vec<T>,
    lambda: Vec<T>,
    status: Status,
    iterations: usize,
    diagnostic: Option<String>,
) -> Solution<T> {
    for i in 0..s.n {
        x[i] = x[i].max(s.orig_lo[i]).min(s.orig_hi[i]);
    }
    let mut g = vec![T::zero(); s.m];
    let (viol, _, _) = s.violation(&x, &mut g);
    Solution {
        stats: SolveStats {
            status,
            iterations,
            wall_time: 0.0,
            objective: s.p.objective(&x).to_f64_lossy(),
            max_violation: viol.to_f64_lossy(),
            diagnostic,
        },
        x,
        lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// min (x0-1)² + (x1-2)² s.t. x0 + x1 = 2, x0 ≥ 0, x1 ≤ 1.2, x0² + x1² ≤ 4.
    struct Toy;

    impl Nlp<f64> for Toy {
        fn n(&self) -> usize {
            2
        }
        fn m(&self) -> usize {
            2
        }
        fn var_bounds(&self, lo: &mut [f64], hi: &mut [f64]) {
            lo.copy_from_slice(&[0.0, f64::NEG_INFINITY]);
            hi.copy_from_slice(&[f64::INFINITY, 1.2]);
        }
        fn con_bounds(&self, lo: &mut [f64], hi: &mut [f64]) {
            lo.copy_from_slice(&[2.0, f64::NEG_INFINITY]);
            hi.copy_from_slice(&[2.0, 4.0]);
        }
        fn initial_point(&self, x: &mut [f64]) {
            x.copy_from_slice(&[3.0, -1.0]);
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * (x[0] - 1.0);
            g[1] = 2.0 * (x[1] - 2.0);
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] + x[1];
            c[1] = x[0] * x[0] + x[1] * x[1];
        }
        fn jac_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        }
        fn jac_values(&self, x: &[f64], v: &mut [f64]) {
            v.copy_from_slice(&[1.0, 1.0, 2.0 * x[0], 2.0 * x[1]]);
        }
        fn hess_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 1)]
        }
        fn hess_values(&self, _x: &[f64], of: f64, l: &[f64], v: &mut [f64]) {
            v[0] = 2.0 * of + 2.0 * l[1];
            v[1] = 2.0 * of + 2.0 * l[1];
        }
    }

    #[test]
    fn toy_problem() {
        let sol = solve(&Toy, &IpmOptions::default());
        assert_eq!(sol.stats.status, Status::Solved, "{:?}", sol.stats);
        // Unconstrained optimum on the line is (0.5, 1.5); x1 ≤ 1.2 binds.
        assert_relative_eq!(sol.x[0], 0.8, epsilon = 1e-5);
        assert_relative_eq!(sol.x[1], 1.2, epsilon = 1e-5);
    }

    struct Crossed;

    impl Nlp<f64> for Crossed {
        fn n(&self) -> usize {
            1
        }
        fn m(&self) -> usize {
            0
        }
        fn var_bounds(&self, lo: &mut [f64], hi: &mut [f64]) {
            lo[0] = 1.0;
            hi[0] = 0.0;
        }
        fn con_bounds(&self, _: &mut [f64], _: &mut [f64]) {}
        fn initial_point(&self, x: &mut [f64]) {
            x[0] = 0.5;
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn gradient(&self, _: &[f64], g: &mut [f64]) {
            g[0] = 1.0;
        }
        fn constraints(&self, _: &[f64], _: &mut [f64]) {}
        fn jac_structure(&self) -> Vec<(usize, usize)> {
            vec![]
        }
        fn jac_values(&self, _: &[f64], _: &mut [f64]) {}
        fn hess_structure(&self) -> Vec<(usize, usize)> {
            vec![]
        }
        fn hess_values(&self, _: &[f64], _: f64, _: &[f64], _: &mut [f64]) {}
        fn var_family(&self, _: usize) -> &'static str {
            "gap"
        }
    }

    #[test]
    fn crossing_bounds_are_infeasible() {
        let sol = solve(&Crossed, &IpmOptions::default());
        assert_eq!(sol.stats.status, Status::Infeasible);
        assert_eq!(sol.stats.diagnostic.as_deref(), Some("gap"));
    }
}
