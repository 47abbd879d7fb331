//! Car-following constraint sets.

use serde::{Deserialize, Serialize};

use super::problem::{ConstraintSpec, SpecKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spacing policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccParams {
    /// Time headway (s).
    pub t_h: f64,
    /// Standstill gap (m).
    pub gap_min: f64,
    /// Largest admissible gap (m).
    pub gap_max: f64,
    /// Half width of the relaxed terminal window (m).
    pub gap_relax: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self { t_h: 1.5, gap_min: 50.0, gap_max: 300.0, gap_relax: 10.0 }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.t_h, self.gap_min, self.gap_max, self.gap_relax].iter().all(|x| x.is_finite());
        if !finite || self.t_h < 0.0 || self.gap_min < 0.0 || self.gap_relax < 0.0 {
            return Err(Error::InvalidSpec(format!("bad ACC parameters {self:?}")));
        }
        if self.gap_min >= self.gap_max {
            return Err(Error::InvalidSpec(format!(
                "minimum gap {} must be below maximum gap {}",
                self.gap_min, self.gap_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccVariant {
    /// Terminal gap pinned to the spacing policy.
    B,
    /// Terminal gap within `±gap_relax` of the policy.
    R,
    /// Only the gap corridor, with leader speed tracking.
    V,
}

/// Leader path position and speed over the horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LeadPrediction {
    pub l: Vec<f64>,
    pub v: Vec<f64>,
}

/// Desired gap `T_h·v_l + Δl_s`.
pub fn acc_spacing(v_l: f64, t_h: f64, gap_min: f64) -> f64 {
    t_h * v_l + gap_min
}

/// Gap corridor and terminal window for one ACC variant.
pub fn acc_constraints<T: Scalar>(
    variant: AccVariant,
    pred: &LeadPrediction,
    acc: &AccParams,
) -> Result<ConstraintSpec<T>> {
    acc.validate()?;
    let n = pred.l.len();
    if n < 2 || pred.v.len() != n {
        return Err(Error::Alignment(format!("lead prediction has {n} positions and {} speeds", pred.v.len())));
    }
    Ok(gap_spec(variant, pred, acc))
}

/// Same as [`acc_constraints`] without parameter validation, so that empty
/// corridors reach the solver and are reported there.
pub fn gap_spec<T: Scalar>(variant: AccVariant, pred: &LeadPrediction, acc: &AccParams) -> ConstraintSpec<T> {
    let n = pred.l.len();
    let l_lo = pred.l.iter().map(|l| T::lit(l - acc.gap_max)).collect();
    let l_hi = pred.l.iter().map(|l| T::lit(l - acc.gap_min)).collect();
    let (lt, vt) = (pred.l[n - 1], pred.v[n - 1]);
    let d = acc_spacing(vt, acc.t_h, acc.gap_min);
    let (gap_lo, gap_hi, kind) = match variant {
        AccVariant::B => (d, d, SpecKind::AccB),
        AccVariant::R => (d - acc.gap_relax, d + acc.gap_relax, SpecKind::AccR),
        AccVariant::V => (acc.gap_min, acc.gap_max, SpecKind::AccV),
    };
    let v_ref = match variant {
        AccVariant::V => pred.v.iter().map(|v| T::lit(*v)).collect(),
        _ => vec![],
    };
    ConstraintSpec { kind, l_lo, l_hi, end_l: Some((T::lit(lt - gap_hi), T::lit(lt - gap_lo))), v_ref }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(v: f64) -> LeadPrediction {
        LeadPrediction { l: (0..50).map(|k| 100.0 + k as f64 * 0.1 * v).collect(), v: vec![v; 50] }
    }

    #[test]
    fn spacing_examples() {
        assert_eq!(acc_spacing(20.0, 1.5, 50.0), 80.0);
        assert_eq!(acc_spacing(0.0, 1.5, 50.0), 50.0);
        assert_eq!(acc_spacing(27.0, 1.5, 50.0), 90.5);
    }

    #[test]
    fn terminal_windows() {
        let p = pred(20.0);
        let lt = p.l[49];
        let acc = AccParams::default();
        let b: ConstraintSpec<f64> = acc_constraints(AccVariant::B, &p, &acc).unwrap();
        let (lo, hi) = b.end_l.unwrap();
        assert!((lt - lo - 80.0).abs() < 1e-12 && (lt - hi - 80.0).abs() < 1e-12);
        let r: ConstraintSpec<f64> = acc_constraints(AccVariant::R, &p, &acc).unwrap();
        let (lo, hi) = r.end_l.unwrap();
        assert!((lt - hi - 70.0).abs() < 1e-12 && (lt - lo - 90.0).abs() < 1e-12);
        let v: ConstraintSpec<f64> = acc_constraints(AccVariant::V, &p, &acc).unwrap();
        let (lo, hi) = v.end_l.unwrap();
        assert!((lt - hi - 50.0).abs() < 1e-12 && (lt - lo - 300.0).abs() < 1e-12);
        assert_eq!(v.v_ref, p.v);
        for k in 0..50 {
            assert_eq!(v.l_hi[k], p.l[k] - 50.0);
            assert_eq!(v.l_lo[k], p.l[k] - 300.0);
        }
    }

    #[test]
    fn empty_corridor_rejected() {
        let acc = AccParams { gap_max: 40.0, ..AccParams::default() };
        assert!(matches!(
            acc_constraints::<f64>(AccVariant::B, &pred(20.0), &acc),
            Err(Error::InvalidSpec(_))
        ));
    }
}
