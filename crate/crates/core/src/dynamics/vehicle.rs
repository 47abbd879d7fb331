use serde::{Deserialize, Serialize};

use crate::powertrain::FuelCoeffs;
use crate::scalar::Scalar;

/// Dynamic limits of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Limits<T: Scalar = f64> {
    pub v_max: T,
    pub a_v_max: T,
    pub a_b_max: T,
    pub a_t_max: T,
    pub j_max: T,
}

/// Physical constants, limits and fuel model of one vehicle.
///
/// The resistance constants `k1..k3` are derived on demand so they can
/// never disagree with the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct VehicleParams<T: Scalar = f64> {
    /// Equivalent mass (kg).
    pub mass: T,
    /// Frontal area (m²).
    pub area: T,
    /// Air density (kg/m³).
    pub rho: T,
    pub drag_coeff: T,
    pub rolling_coeff: T,
    pub gravity: T,
    pub limits: Limits<T>,
    pub fuel: FuelCoeffs<T>,
}

impl<T: Scalar> VehicleParams<T> {
    pub fn sedan() -> Self {
        Self {
            mass: T::lit(1200.0),
            area: T::lit(2.5),
            rho: T::lit(1.184),
            drag_coeff: T::lit(0.32),
            rolling_coeff: T::lit(0.015),
            gravity: T::lit(9.81),
            limits: Limits::from_f64(27.0, 2.0, 5.0, 3.0, 10.0),
            fuel: FuelCoeffs::sedan(),
        }
    }

    pub fn truck() -> Self {
        Self {
            mass: T::lit(4800.0),
            area: T::lit(2.5),
            rho: T::lit(1.184),
            drag_coeff: T::lit(0.6),
            rolling_coeff: T::lit(0.006),
            gravity: T::lit(9.81),
            limits: Limits::from_f64(27.0, 2.0, 5.0, 3.0, 5.0),
            fuel: FuelCoeffs::truck(),
        }
    }

    pub fn k1(&self) -> T {
        self.drag_coeff * self.rho * self.area / (T::lit(2.0) * self.mass)
    }

    pub fn k2(&self) -> T {
        self.rolling_coeff * self.gravity
    }

    pub fn k3(&self) -> T {
        self.gravity
    }

    /// Grade-only part of the resistance, `k2·cosθ + k3·sinθ`.
    pub fn grade_accel(&self, theta: T) -> T {
        self.k2() * theta.cos() + self.k3() * theta.sin()
    }

    pub fn cast<U: Scalar>(&self) -> VehicleParams<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        VehicleParams {
            mass: c(self.mass),
            area: c(self.area),
            rho: c(self.rho),
            drag_coeff: c(self.drag_coeff),
            rolling_coeff: c(self.rolling_coeff),
            gravity: c(self.gravity),
            limits: Limits {
                v_max: c(self.limits.v_max),
                a_v_max: c(self.limits.a_v_max),
                a_b_max: c(self.limits.a_b_max),
                a_t_max: c(self.limits.a_t_max),
                j_max: c(self.limits.j_max),
            },
            fuel: self.fuel.cast(),
        }
    }

    /// True if every physical constant and limit is strictly positive.
    pub fn is_valid(&self) -> bool {
        let l = &self.limits;
        [self.mass, self.area, self.rho, self.drag_coeff, self.rolling_coeff, self.gravity]
            .into_iter()
            .chain([l.v_max, l.a_v_max, l.a_b_max, l.a_t_max, l.j_max])
            .all(|x| x.is_finite() && x > T::zero())
    }
}

impl<T: Scalar> Limits<T> {
    pub fn from_f64(v_max: f64, a_v_max: f64, a_b_max: f64, a_t_max: f64, j_max: f64) -> Self {
        Self {
            v_max: T::lit(v_max),
            a_v_max: T::lit(a_v_max),
            a_b_max: T::lit(a_b_max),
            a_t_max: T::lit(a_t_max),
            j_max: T::lit(j_max),
        }
    }
}

/// Drag, rolling and grade resistance as an acceleration.
pub fn resistance_accel<T: Scalar>(v: T, theta: T, params: &VehicleParams<T>) -> T {
    params.k1() * v * v + params.grade_accel(theta)
}

/// Traction acceleration from apparent, resistance and brake terms.
pub fn traction_accel<T: Scalar>(a_v: T, a_r: T, a_b: T) -> T {
    a_v + a_r + a_b
}

/// Path distance, speed and apparent acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct KinState<T: Scalar = f64> {
    pub l: T,
    pub v: T,
    pub a: T,
}

impl<T: Scalar> KinState<T> {
    pub fn new(l: T, v: T, a: T) -> Self {
        Self { l, v, a }
    }
}

/// Exact constant-jerk step. If the speed would turn negative the vehicle
/// stops where `v` reaches zero and the returned flag is set.
pub fn integrate_state<T: Scalar>(x: KinState<T>, j: T, dt: T) -> (KinState<T>, bool) {
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let v_at = |t: T| x.v + x.a * t + j * t * t / two;
    let l_at = |t: T| x.l + x.v * t + x.a * t * t / two + j * t * t * t / six;
    let v1 = v_at(dt);
    if v1 >= T::zero() {
        return (KinState { l: l_at(dt), v: v1, a: x.a + j * dt }, false);
    }
    let t_stop = first_stop(x.v, x.a, j, dt);
    (KinState { l: l_at(t_stop), v: T::zero(), a: T::zero() }, true)
}

/// Earliest `t ∈ [0, dt]` where `v + a t + j t²/2` reaches zero.
fn first_stop<T: Scalar>(v: T, a: T, j: T, dt: T) -> T {
    let mut roots = Vec::with_capacity(2);
    if j.abs() < T::epsilon() {
        if a < T::zero() {
            roots.push(-v / a);
        }
    } else {
        let disc = a * a - T::lit(2.0) * j * v;
        if disc >= T::zero() {
            let s = disc.sqrt();
            roots.push((-a - s) / j);
            roots.push((-a + s) / j);
        }
    }
    roots
        .into_iter()
        .filter(|t| *t >= T::zero() && *t <= dt)
        .fold(dt, T::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derived_constants() {
        let p = VehicleParams::<f64>::truck();
        assert_relative_eq!(p.k1(), 0.6 * 1.184 * 2.5 / (2.0 * 4800.0));
        assert_relative_eq!(p.k2(), 0.006 * 9.81);
        assert_eq!(p.k3(), 9.81);
        assert!(p.is_valid() && VehicleParams::<f64>::sedan().is_valid());
    }

    #[test]
    fn resistance_examples() {
        let s = VehicleParams::<f64>::sedan();
        let t = VehicleParams::<f64>::truck();
        assert_relative_eq!(resistance_accel(0.0, 0.0, &s), 0.14715, max_relative = 1e-12);
        assert_relative_eq!(resistance_accel(20.0, 0.0, &t), 0.13286, max_relative = 1e-12);
        assert_relative_eq!(resistance_accel(0.0, 0.05, &s), 0.637_261_751_362_473_8, max_relative = 1e-12);
    }

    #[test]
    fn traction_examples() {
        assert_relative_eq!(traction_accel(0.0, 0.147, 0.0), 0.147);
        assert_relative_eq!(traction_accel(-0.5, 0.2, 0.3), 0.0, epsilon = 1e-15);
        assert_relative_eq!(traction_accel(1.0, 0.133, 0.0), 1.133);
    }

    #[test]
    fn integrate_examples() {
        let (x, c) = integrate_state(KinState::new(0.0, 10.0, 0.0), 0.0, 0.1);
        assert!(!c);
        assert_relative_eq!(x.l, 1.0);
        assert_relative_eq!(x.v, 10.0);
        let (x, _) = integrate_state(KinState::new(0.0, 10.0, 0.0), 1.0, 0.1);
        assert_relative_eq!(x.l, 1.0 + 1e-3 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(x.v, 10.005, max_relative = 1e-12);
        assert_relative_eq!(x.a, 0.1, max_relative = 1e-12);
        let (x, c) = integrate_state(KinState::new(0.0, 0.01, -1.0), 0.0, 0.1);
        assert!(c);
        assert_eq!(x.v, 0.0);
        assert_relative_eq!(x.l, 0.5 * 0.01 * 0.01, max_relative = 1e-9);
    }
}
