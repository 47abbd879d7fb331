//! Transmission kinematics, exact fuel rate through the engine map, and the
//! offline ECO gear policy.

use serde::{Deserialize, Serialize};

use super::engine_map::EngineMap;
use super::fuel::rate_from_power;
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};

/// Driveline constants, not part of the printed vehicle tables; the
/// defaults are plausible values for a light truck and a sedan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub gear_ratios: Vec<f64>,
    pub final_drive: f64,
    pub efficiency: f64,
    pub wheel_radius: f64,
}

impl Transmission {
    pub fn truck() -> Self {
        Self {
            gear_ratios: vec![5.0, 3.2, 2.1, 1.5, 1.15, 1.0, 0.8],
            final_drive: 4.1,
            efficiency: 0.95,
            wheel_radius: 0.4,
        }
    }

    pub fn sedan() -> Self {
        Self {
            gear_ratios: vec![3.6, 2.1, 1.4, 1.0, 0.8, 0.65],
            final_drive: 3.9,
            efficiency: 0.92,
            wheel_radius: 0.31,
        }
    }

    pub fn n_gears(&self) -> usize {
        self.gear_ratios.len()
    }

    /// Overall ratio `i_g·i_f` for a gear index.
    pub fn total_ratio(&self, gear: usize) -> Result<f64> {
        self.gear_ratios
            .get(gear)
            .map(|g| g * self.final_drive)
            .ok_or_else(|| Error::InvalidArgument(format!("gear {gear} out of range")))
    }

    fn validate(&self) -> Result<()> {
        let ok = !self.gear_ratios.is_empty()
            && self.gear_ratios.iter().all(|g| g.is_finite() && *g > 0.0)
            && self.final_drive > 0.0
            && self.efficiency > 0.0
            && self.efficiency <= 1.0
            && self.wheel_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPowertrain(format!("bad transmission constants {self:?}")))
        }
    }
}

/// Engine speed and torque for a wheel-side operating point.
pub fn engine_state(
    v: f64,
    a_t: f64,
    gear: usize,
    tx: &Transmission,
    params: &VehicleParams<f64>,
    map: &EngineMap,
) -> Result<(f64, f64)> {
    if v < 0.0 {
        return Err(Error::InvalidArgument(format!("negative speed {v}")));
    }
    let it = tx.total_ratio(gear)?;
    let torque = a_t * params.mass * tx.wheel_radius / (it * tx.efficiency);
    let omega = v * it / tx.wheel_radius;
    map.check_envelope(omega, torque)?;
    Ok((omega, torque))
}

/// Fuel rate (mL/s) through the engine map.
pub fn fuel_rate_exact(
    v: f64,
    a_t: f64,
    gear: usize,
    map: &EngineMap,
    tx: &Transmission,
    params: &VehicleParams<f64>,
) -> Result<f64> {
    let (omega, torque) = engine_state(v, a_t, gear, tx, params, map)?;
    let p = map.power(omega, torque);
    let b = map.bsfc(omega, torque);
    Ok(rate_from_power(p, b, params.fuel.rho_g).max(0.0))
}

/// Operating-point lattice for the gear policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub v: Vec<f64>,
    pub a_t: Vec<f64>,
}

impl Lattice {
    pub fn uniform(v_max: f64, dv: f64, at_max: f64, dat: f64) -> Self {
        let nv = (v_max / dv).round() as usize;
        let na = (at_max / dat).round() as usize;
        Self {
            v: (0..=nv).map(|i| i as f64 * dv).collect(),
            a_t: (0..=na).map(|i| i as f64 * dat).collect(),
        }
    }
}

/// Gear choice per lattice cell, `None` where no gear fits the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GearPolicy {
    pub transmission: Transmission,
    pub lattice: Lattice,
    /// Speed-major table: `[iv * n_at + ia]`.
    pub table: Vec<Option<usize>>,
}

impl GearPolicy {
    pub fn gear_at(&self, iv: usize, ia: usize) -> Option<usize> {
        self.table[iv * self.lattice.a_t.len() + ia]
    }

    /// Cells with an assigned gear: `(v, a_t, gear)`.
    pub fn feasible_cells(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let na = self.lattice.a_t.len();
        self.table.iter().enumerate().filter_map(move |(k, g)| {
            g.map(|g| (self.lattice.v[k / na], self.lattice.a_t[k % na], g))
        })
    }

    /// Renders the table as rows of gear digits (speed down, traction across).
    pub fn render(&self) -> String {
        let na = self.lattice.a_t.len();
        let mut out = String::new();
        for (iv, v) in self.lattice.v.iter().enumerate() {
            out.push_str(&format!("{v:5.1} "));
            for ia in 0..na {
                out.push(match self.gear_at(iv, ia) {
                    Some(g) => char::from_digit((g + 1) as u32 % 36, 36).unwrap_or('?'),
                    None => '.',
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Picks the fuel-minimal feasible gear for every lattice cell.
pub fn optimize_gear_policy(
    map: &EngineMap,
    tx: &Transmission,
    lattice: &Lattice,
    params: &VehicleParams<f64>,
) -> Result<GearPolicy> {
    tx.validate()?;
    if lattice.v.is_empty() || lattice.a_t.is_empty() {
        return Err(Error::InvalidArgument("empty lattice".into()));
    }
    let lim = &params.limits;
    let in_box = lattice.v.iter().all(|v| (0.0..=lim.v_max + 1e-9).contains(v))
        && lattice.a_t.iter().all(|a| (0.0..=lim.a_t_max + 1e-9).contains(a));
    if !in_box {
        return Err(Error::InvalidArgument("lattice outside the operating box".into()));
    }
    let mut table = Vec::with_capacity(lattice.v.len() * lattice.a_t.len());
    for &v in &lattice.v {
        for &a in &lattice.a_t {
            let mut best: Option<(usize, f64)> = None;
            for gear in 0..tx.n_gears() {
                if let Ok(f) = fuel_rate_exact(v, a, gear, map, tx, params) {
                    if best.is_none_or(|(_, fb)| f < fb) {
                        best = Some((gear, f));
                    }
                }
            }
            table.push(best.map(|(g, _)| g));
        }
    }
    if table.iter().all(Option::is_none) {
        return Err(Error::InvalidPowertrain("no feasible gear anywhere on the lattice".into()));
    }
    Ok(GearPolicy { transmission: tx.clone(), lattice: lattice.clone(), table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powertrain::engine_map::{build_engine_map, MapSpec};
    use approx::assert_relative_eq;

    fn setup() -> (EngineMap, Transmission, VehicleParams<f64>) {
        (build_engine_map(&MapSpec::truck()).unwrap(), Transmission::truck(), VehicleParams::truck())
    }

    #[test]
    fn engine_state_arithmetic() {
        let (map, _, p) = setup();
        let tx = Transmission { gear_ratios: vec![2.0], final_drive: 4.0, efficiency: 0.95, wheel_radius: 0.4 };
        let (w, t) = engine_state(10.0, 0.5, 0, &tx, &p, &map).unwrap();
        assert_relative_eq!(t, 4800.0 * 0.5 * 0.4 / (8.0 * 0.95), max_relative = 1e-14);
        assert_relative_eq!(w, 10.0 * 8.0 / 0.4, max_relative = 1e-14);
        assert_eq!(engine_state(0.0, 1.0, 0, &tx, &p, &map).unwrap().0, 0.0);
        assert_eq!(engine_state(5.0, 0.0, 0, &tx, &p, &map).unwrap().1, 0.0);
    }

    #[test]
    fn envelope_violation() {
        let (map, tx, p) = setup();
        // Top gear cannot deliver 3 m/s² of traction.
        assert!(matches!(
            engine_state(5.0, 3.0, 6, &tx, &p, &map),
            Err(Error::Envelope { .. })
        ));
        // First gear over-revs at highway speed.
        assert!(engine_state(25.0, 0.1, 0, &tx, &p, &map).is_err());
    }

    #[test]
    fn fuel_matches_unit_identity() {
        let (map, tx, p) = setup();
        let (w, t) = engine_state(15.0, 0.8, 4, &tx, &p, &map).unwrap();
        let f = fuel_rate_exact(15.0, 0.8, 4, &map, &tx, &p).unwrap();
        let oracle = w * t * map.bsfc(w, t) / (3.6e6 * 0.85);
        assert_relative_eq!(f, oracle, max_relative = 1e-9);
        assert_eq!(fuel_rate_exact(0.0, 0.0, 0, &map, &tx, &p).unwrap(), 0.0);
    }

    #[test]
    fn gear_changes_fuel() {
        let (map, tx, p) = setup();
        let f3 = fuel_rate_exact(12.0, 0.5, 3, &map, &tx, &p).unwrap();
        let f5 = fuel_rate_exact(12.0, 0.5, 5, &map, &tx, &p).unwrap();
        assert!((f3 - f5).abs() > 1e-3);
    }

    #[test]
    fn single_gear_policy_is_constant() {
        let (map, _, p) = setup();
        let tx = Transmission { gear_ratios: vec![1.0], ..Transmission::truck() };
        let gp = optimize_gear_policy(&map, &tx, &Lattice::uniform(27.0, 1.0, 1.0, 0.1), &p).unwrap();
        assert!(gp.table.iter().flatten().all(|g| *g == 0));
    }

    #[test]
    fn envelope_forces_first_gear() {
        let (map, _, p) = setup();
        let tx = Transmission { gear_ratios: vec![5.0, 1.5], ..Transmission::truck() };
        // At 2 m/s and 3 m/s² the tall gear would need about 986 N·m.
        let feasible: Vec<usize> = (0..tx.n_gears())
            .filter(|&g| engine_state(2.0, 3.0, g, &tx, &p, &map).is_ok())
            .collect();
        assert_eq!(feasible, vec![0]);
        let lattice = Lattice { v: vec![2.0], a_t: vec![3.0] };
        let gp = optimize_gear_policy(&map, &tx, &lattice, &p).unwrap();
        assert_eq!(gp.table, vec![Some(0)]);
    }

    #[test]
    fn policy_is_optimal_and_monotone() {
        let (map, tx, p) = setup();
        let lattice = Lattice::uniform(27.0, 1.0, 3.0, 0.1);
        let gp = optimize_gear_policy(&map, &tx, &lattice, &p).unwrap();
        for (v, a, g) in gp.feasible_cells() {
            let f = fuel_rate_exact(v, a, g, &map, &tx, &p).unwrap();
            for other in 0..tx.n_gears() {
                if let Ok(fo) = fuel_rate_exact(v, a, other, &map, &tx, &p) {
                    assert!(fo >= f, "gear {other} beats {g} at ({v}, {a})");
                }
            }
        }
        let (nv, na) = (lattice.v.len(), lattice.a_t.len());
        for iv in 1..nv {
            for ia in 1..na {
                let Some(g) = gp.gear_at(iv, ia) else { continue };
                if iv + 1 < nv {
                    if let Some(up) = gp.gear_at(iv + 1, ia) {
                        assert!(up >= g, "gear drops with speed at v={}", lattice.v[iv]);
                    }
                }
                if ia + 1 < na {
                    if let Some(up) = gp.gear_at(iv, ia + 1) {
                        assert!(up <= g, "gear rises with traction at v={}", lattice.v[iv]);
                    }
                }
            }
        }
    }
}
