//! Validation suites: derivatives, fuel units and quintic boundaries.

use emato::dynamics::{KinState, VehicleParams};
use emato::optimizer::gradcheck::{random_multipliers, random_point};
use emato::optimizer::{check_gradients, random_bvp, Nlp};
use emato::polytraj::Quintic;
use emato::powertrain::fuel::rate_from_power;
use emato::powertrain::{
    build_engine_map, engine_state, fuel_rate_exact, optimize_gear_policy, Lattice, MapSpec, Transmission,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Gradients,
    Units,
    Quintic,
}

impl std::str::FromStr for CheckKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "gradients" => Ok(Self::Gradients),
            "units" => Ok(Self::Units),
            "quintic" => Ok(Self::Quintic),
            _ => Err(CliError::Config(format!("unknown check '{s}' (gradients, units or quintic)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst error seen against the pass threshold.
    pub worst: f64,
    pub threshold: f64,
    pub cases: usize,
}

pub const GRADIENT_TOL: f64 = 1e-5;
pub const UNIT_TOL: f64 = 1e-9;
pub const QUINTIC_TOL: f64 = 1e-9;

/// Five random BVPs per vehicle against central differences.
pub fn gradients(per_vehicle: u64) -> CliResult<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for params in [VehicleParams::truck(), VehicleParams::sedan()] {
        for seed in 0..per_vehicle {
            let p = random_bvp(&params, seed).map_err(CliError::from_run)?;
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = random_point(&p, &mut rng);
            let lam = random_multipliers(p.m(), &mut rng);
            worst = worst.max(check_gradients(&p, &x, &lam).max_error());
            cases += 1;
        }
    }
    Ok(CheckReport { name: "gradients", passed: worst <= GRADIENT_TOL, worst, threshold: GRADIENT_TOL, cases })
}

/// Fuel rate at every ECO policy cell against power times BSFC over the
/// unit constant.
pub fn units() -> CliResult<CheckReport> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let setups = [
        (MapSpec::truck(), Transmission::truck(), VehicleParams::truck()),
        (MapSpec::sedan(), Transmission::sedan(), VehicleParams::sedan()),
    ];
    for (spec, tx, params) in setups {
        let map = build_engine_map(&spec).map_err(CliError::from_run)?;
        let rho = params.fuel.rho_g;
        worst = worst.max(rel(params.fuel.unit_const(), rho * 3.6e6));
        let lattice = Lattice::uniform(params.limits.v_max, 1.0, params.limits.a_t_max, 0.1);
        let policy = optimize_gear_policy(&map, &tx, &lattice, &params).map_err(CliError::from_run)?;
        for (v, a_t, g) in policy.feasible_cells() {
            if v <= 0.0 {
                continue;
            }
            let (w, t) = engine_state(v, a_t, g, &tx, &params, &map).map_err(CliError::from_run)?;
            let got = fuel_rate_exact(v, a_t, g, &map, &tx, &params).map_err(CliError::from_run)?;
            let want = rate_from_power(w * t, map.bsfc(w, t), rho);
            worst = worst.max(rel(got, want));
            cases += 1;
        }
    }
    Ok(CheckReport { name: "units", passed: worst <= UNIT_TOL, worst, threshold: UNIT_TOL, cases })
}

/// Random boundary pairs: the fitted quintic must reproduce both ends.
pub fn quintic(trials: usize, seed: u64) -> CliResult<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let draw = |rng: &mut ChaCha8Rng| {
        KinState::new(rng.gen_range(-100.0..100.0), rng.gen_range(0.0..30.0), rng.gen_range(-3.0..3.0))
    };
    for _ in 0..trials {
        let (x0, x1) = (draw(&mut rng), draw(&mut rng));
        let dur = rng.gen_range(1.0..10.0);
        let q = Quintic::fit(x0, x1, dur).map_err(CliError::from_run)?;
        for (t, x) in [(0.0, x0), (dur, x1)] {
            worst = worst
                .max(abs_rel(q.pos(t), x.l))
                .max(abs_rel(q.vel(t), x.v))
                .max(abs_rel(q.acc(t), x.a));
        }
    }
    Ok(CheckReport { name: "quintic", passed: worst <= QUINTIC_TOL, worst, threshold: QUINTIC_TOL, cases: trials })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Absolute error for values near zero, relative otherwise.
fn abs_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn cmd_check(kind: CheckKind) -> CliResult<CheckReport> {
    match kind {
        CheckKind::Gradients => gradients(5),
        CheckKind::Units => units(),
        CheckKind::Quintic => quintic(1000, 11),
    }
}
