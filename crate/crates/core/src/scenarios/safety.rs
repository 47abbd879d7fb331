//! Post-hoc check that a time-reallocated trajectory keeps its reference's margin.

use serde::{Deserialize, Serialize};

use crate::polytraj::feasibility::clearance;
use crate::polytraj::AgentPrediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "verdict")]
pub enum SafetyVerdict {
    Accept { xi: f64 },
    Reject { xi: f64, clearance: f64 },
}

impl SafetyVerdict {
    pub fn accepted(&self) -> bool {
        matches!(self, SafetyVerdict::Accept { .. })
    }

    pub fn xi(&self) -> f64 {
        match *self {
            SafetyVerdict::Accept { xi } | SafetyVerdict::Reject { xi, .. } => xi,
        }
    }
}

/// Largest waypoint displacement between two equally timed position lists.
pub fn max_shift(opt: &[[f64; 2]], reference: &[[f64; 2]]) -> f64 {
    opt.iter()
        .zip(reference)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// Accepts `opt` iff `ξ + r_safe` stays within the reference's smallest
/// predicted clearance over the horizon.
pub fn homotopy_safety_check(
    opt: &[[f64; 2]],
    reference: &[[f64; 2]],
    agents: &[AgentPrediction],
    r_safe: f64,
) -> SafetyVerdict {
    let xi = max_shift(opt, reference);
    let n = reference.len().min(agents.iter().map(|a| a.positions.len()).min().unwrap_or(usize::MAX));
    let c = (0..n).map(|k| clearance(reference[k], agents, k)).fold(f64::INFINITY, f64::min);
    if xi + r_safe <= c {
        SafetyVerdict::Accept { xi }
    } else {
        SafetyVerdict::Reject { xi, clearance: c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, v: f64) -> Vec<[f64; 2]> {
        (0..n).map(|k| [v * 0.1 * k as f64, 0.0]).collect()
    }

    #[test]
    fn identity_accepts() {
        let r = line(50, 15.0);
        let far = AgentPrediction { positions: r.iter().map(|p| [p[0] + 30.0, 0.0]).collect() };
        let v = homotopy_safety_check(&r, &r, &[far], 3.0);
        assert_eq!(v, SafetyVerdict::Accept { xi: 0.0 });
    }

    #[test]
    fn empty_traffic_accepts() {
        let r = line(50, 15.0);
        let o: Vec<[f64; 2]> = r.iter().map(|p| [p[0] - 40.0, 0.0]).collect();
        assert!(homotopy_safety_check(&o, &r, &[], 3.0).accepted());
    }

    #[test]
    fn shifted_back_onto_follower_rejects() {
        // Follower 5 m behind the reference at step 20; the refined plan
        // lags by 6 m, so 6 + 3 exceeds the 5 m clearance.
        let r = line(50, 15.0);
        let mut fol: Vec<[f64; 2]> = r.iter().map(|p| [p[0] - 50.0, 0.0]).collect();
        fol[20] = [r[20][0] - 5.0, 0.0];
        let o: Vec<[f64; 2]> = r.iter().map(|p| [p[0] - 6.0, 0.0]).collect();
        let v = homotopy_safety_check(&o, &r, &[AgentPrediction { positions: fol }], 3.0);
        assert_eq!(v, SafetyVerdict::Reject { xi: 6.0, clearance: 5.0 });
        assert!(!v.accepted());
    }
}
