//! Differentiable fuel-rate model: a quartic speed polynomial plus a
//! quadratic-in-speed traction term.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Diesel density in g/mL.
pub const DIESEL_DENSITY: f64 = 0.85;

/// Coefficients of `f = P(v) + C(v)·a_t` in mL/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct FuelCoeffs<T: Scalar = f64> {
    pub o: [T; 5],
    pub c: [T; 3],
    /// Fuel density (g/mL).
    pub rho_g: T,
}

impl<T: Scalar> FuelCoeffs<T> {
    pub fn new(o: [T; 5], c: [T; 3]) -> Self {
        Self { o, c, rho_g: T::lit(DIESEL_DENSITY) }
    }

    /// Tabulated sedan coefficients.
    pub fn sedan() -> Self {
        Self::from_f64(
            [1.4627e-1, 1.0254e-2, -9.2812e-4, 2.154e-5, -4.2427e-7],
            [0.07224, 0.09681, 1.0750e-3],
        )
    }

    /// Tabulated truck coefficients, verbatim (including the large `o4`).
    pub fn truck() -> Self {
        Self::from_f64(
            [3.351e-1, 9.0901e-3, 3.7574e-8, 3.4935e-8, 2.4230e-4],
            [1.6550e-1, 3.6070e-1, 2.4223e-4],
        )
    }

    pub fn from_f64(o: [f64; 5], c: [f64; 3]) -> Self {
        Self::new(o.map(T::lit), c.map(T::lit))
    }

    pub fn cast<U: Scalar>(&self) -> FuelCoeffs<U> {
        FuelCoeffs {
            o: self.o.map(|x| U::lit(x.to_f64_lossy())),
            c: self.c.map(|x| U::lit(x.to_f64_lossy())),
            rho_g: U::lit(self.rho_g.to_f64_lossy()),
        }
    }

    /// Conversion constant from W·g/kWh to mL/s.
    pub fn unit_const(&self) -> T {
        self.rho_g * T::lit(1000.0 * 3600.0)
    }

    /// Speed polynomial `P(v)`.
    #[inline]
    pub fn p(&self, v: T) -> T {
        let o = &self.o;
        o[0] + v * (o[1] + v * (o[2] + v * (o[3] + v * o[4])))
    }

    #[inline]
    pub fn dp(&self, v: T) -> T {
        let o = &self.o;
        o[1] + v * (T::lit(2.0) * o[2] + v * (T::lit(3.0) * o[3] + v * T::lit(4.0) * o[4]))
    }

    #[inline]
    pub fn ddp(&self, v: T) -> T {
        let o = &self.o;
        T::lit(2.0) * o[2] + v * (T::lit(6.0) * o[3] + v * T::lit(12.0) * o[4])
    }

    /// Traction sensitivity `C(v) = ∂f/∂a_t`.
    #[inline]
    pub fn traction_gain(&self, v: T) -> T {
        self.c[0] + v * (self.c[1] + v * self.c[2])
    }

    #[inline]
    pub fn dc(&self, v: T) -> T {
        self.c[1] + T::lit(2.0) * self.c[2] * v
    }

    #[inline]
    pub fn ddc(&self) -> T {
        T::lit(2.0) * self.c[2]
    }

    /// Model fuel rate (mL/s).
    #[inline]
    pub fn rate(&self, v: T, a_t: T) -> T {
        self.p(v) + self.traction_gain(v) * a_t
    }

    /// `∂f/∂v` at fixed traction.
    #[inline]
    pub fn d_dv(&self, v: T, a_t: T) -> T {
        self.dp(v) + self.dc(v) * a_t
    }

    /// `∂f/∂a_t`.
    #[inline]
    pub fn d_dat(&self, v: T) -> T {
        self.traction_gain(v)
    }

    /// Smallest value of `C(v)` over a uniform grid on `[0, v_max]`.
    pub fn min_traction_gain(&self, v_max: T, n: usize) -> T {
        (0..=n)
            .map(|i| self.traction_gain(v_max * T::lit(i as f64 / n as f64)))
            .fold(T::infinity(), T::min)
    }
}

/// Fuel rate from engine power (W) and BSFC (g/kWh), in mL/s.
pub fn rate_from_power(power_w: f64, bsfc: f64, rho_g: f64) -> f64 {
    power_w * bsfc / (rho_g * 1000.0 * 3600.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn origin_is_o0() {
        let f = FuelCoeffs::<f64>::truck();
        assert_eq!(f.rate(0.0, 0.0), 0.3351);
    }

    #[test]
    fn sedan_golden_value() {
        // Evaluated term by term, independently of the Horner form.
        let (v, a) = (20.0_f64, 0.5_f64);
        let expected = 1.4627e-1 + 1.0254e-2 * v - 9.2812e-4 * v.powi(2) + 2.154e-5 * v.powi(3)
            - 4.2427e-7 * v.powi(4)
            + (0.07224 + 0.09681 * v + 1.0750e-3 * v * v) * a;
        assert_relative_eq!(expected, 1.303_758_8, max_relative = 1e-7);
        assert_relative_eq!(FuelCoeffs::<f64>::sedan().rate(v, a), expected, max_relative = 1e-14);
    }

    #[test]
    fn unit_oracle() {
        // 50 kW at 200 g/kWh is 10 kg/h, i.e. 10000/0.85 mL per hour.
        let expected = 10_000.0 / 0.85 / 3600.0;
        assert_relative_eq!(rate_from_power(50_000.0, 200.0, 0.85), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 3.268, max_relative = 1e-3);
    }

    #[test]
    fn partials_match_central_differences() {
        for f in [FuelCoeffs::<f64>::sedan(), FuelCoeffs::truck()] {
            for &(v, a) in &[(3.0, 0.2), (12.5, 1.1), (26.0, 2.9)] {
                let h = 1e-5;
                let fd_v = (f.rate(v + h, a) - f.rate(v - h, a)) / (2.0 * h);
                let fd_a = (f.rate(v, a + h) - f.rate(v, a - h)) / (2.0 * h);
                assert_relative_eq!(f.d_dv(v, a), fd_v, max_relative = 1e-7);
                assert_relative_eq!(f.d_dat(v), fd_a, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn increasing_in_traction() {
        for f in [FuelCoeffs::<f64>::sedan(), FuelCoeffs::truck()] {
            assert!(f.min_traction_gain(27.0, 2700) > 0.0);
        }
    }

    #[test]
    fn f32_agrees_with_f64() {
        let f64c = FuelCoeffs::<f64>::sedan();
        let f32c: FuelCoeffs<f32> = f64c.cast();
        assert_relative_eq!(f32c.rate(15.0, 1.0) as f64, f64c.rate(15.0, 1.0), max_relative = 1e-5);
    }
}
