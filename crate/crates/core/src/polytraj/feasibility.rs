use serde::{Deserialize, Serialize};

use super::frenet::GlobalPose;
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Collision,
    Overjerky,
    Overcurvy,
    Limits,
}

impl Verdict {
    pub fn is_feasible(self) -> bool {
        self == Verdict::Feasible
    }
}

/// Safety radius and curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r_safe: f64,
    pub kappa_max: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { r_safe: 3.0, kappa_max: 0.2 }
    }
}

/// Predicted centre positions of one traffic agent, one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrediction {
    pub positions: Vec<[f64; 2]>,
}

/// Distance from `p` to the nearest agent at step `k`.
pub fn clearance(p: [f64; 2], agents: &[AgentPrediction], k: usize) -> f64 {
    agents
        .iter()
        .map(|a| {
            let q = a.positions[k];
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// First violated rule along the candidate, scanning steps in time order.
pub fn feasibility_check(
    poses: &[GlobalPose],
    path: &Trajectory<f64>,
    params: &VehicleParams<f64>,
    agents: &[AgentPrediction],
    geometry: &Geometry,
) -> Result<Verdict> {
    let n = poses.len();
    if path.len() != n || agents.iter().any(|a| a.positions.len() != n) {
        return Err(Error::Alignment(format!(
            "candidate has {n} poses, path {} samples, predictions {:?}",
            path.len(),
            agents.iter().map(|a| a.positions.len()).collect::<Vec<_>>()
        )));
    }
    let lim = &params.limits;
    let tol = 1e-9;
    for k in 0..n {
        let (v, a) = (path.v[k], path.a[k]);
        if v < -tol || v > lim.v_max + tol || a > lim.a_v_max + tol || a < -lim.a_b_max - tol {
            return Ok(Verdict::Limits);
        }
        if path.j[k].abs() > lim.j_max + tol {
            return Ok(Verdict::Overjerky);
        }
        if poses[k].curvature.abs() > geometry.kappa_max {
            return Ok(Verdict::Overcurvy);
        }
        if clearance([poses[k].x, poses[k].y], agents, k) < geometry.r_safe {
            return Ok(Verdict::Collision);
        }
    }
    Ok(Verdict::Feasible)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, v: f64, j: f64) -> (Vec<GlobalPose>, Trajectory<f64>) {
        let p = VehicleParams::truck();
        let poses = (0..n)
            .map(|k| GlobalPose { x: v * 0.1 * k as f64, y: 0.0, yaw: 0.0, curvature: 0.0, speed: v })
            .collect();
        let tr = Trajectory::from_kinematics(
            0.1,
            0.0,
            (0..n).map(|k| v * 0.1 * k as f64).collect(),
            vec![v; n],
            vec![0.0; n],
            vec![j; n],
            vec![0.0; n],
            None,
            &p,
        );
        (poses, tr)
    }

    #[test]
    fn verdicts() {
        let p = VehicleParams::truck();
        let g = Geometry::default();
        let (poses, tr) = straight(50, 10.0, 0.0);
        assert_eq!(feasibility_check(&poses, &tr, &p, &[], &g).unwrap(), Verdict::Feasible);
        let wall = AgentPrediction { positions: vec![[1.0, 0.0]; 50] };
        assert_eq!(feasibility_check(&poses, &tr, &p, &[wall], &g).unwrap(), Verdict::Collision);
        let (poses, tr) = straight(50, 10.0, 5.0 * 1.01);
        assert_eq!(feasibility_check(&poses, &tr, &p, &[], &g).unwrap(), Verdict::Overjerky);
        let (mut poses, tr) = straight(50, 10.0, 0.0);
        poses[10].curvature = 0.25;
        assert_eq!(feasibility_check(&poses, &tr, &p, &[], &g).unwrap(), Verdict::Overcurvy);
        let (poses, tr) = straight(50, 30.0, 0.0);
        assert_eq!(feasibility_check(&poses, &tr, &p, &[], &g).unwrap(), Verdict::Limits);
    }

    #[test]
    fn misaligned_prediction() {
        let p = VehicleParams::truck();
        let (poses, tr) = straight(50, 10.0, 0.0);
        let short = AgentPrediction { positions: vec![[100.0, 0.0]; 10] };
        assert!(matches!(
            feasibility_check(&poses, &tr, &p, &[short], &Geometry::default()),
            Err(Error::Alignment(_))
        ));
    }
}
