//! Synthetic engine map: power and BSFC surfaces on a speed × torque grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAP_FORMAT_VERSION: u32 = 1;

/// Parameters of the Willans-style synthetic map.
///
/// Indicated BSFC is a quadratic bowl around `(omega_star, torque_star)`;
/// friction torque grows linearly with speed, so brake BSFC rises sharply
/// at light load the way a real diesel map does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapSpec {
    pub n_speed: usize,
    pub n_torque: usize,
    /// Rated engine speed (rad/s).
    pub omega_max: f64,
    /// Peak torque (N·m).
    pub torque_peak: f64,
    /// Rated power (W); the envelope is `min(torque_peak, power_max/ω)`.
    pub power_max: f64,
    /// Lowest BSFC on the grid after scaling (g/kWh).
    pub bsfc_min: f64,
    pub omega_star: f64,
    pub torque_star: f64,
    /// Curvature of the indicated-efficiency bowl along speed.
    pub k_omega: f64,
    /// Curvature of the indicated-efficiency bowl along torque.
    pub k_torque: f64,
    /// Friction torque at zero speed as a fraction of peak torque.
    pub friction: f64,
    /// First torque node as a fraction of peak torque.
    pub torque_floor: f64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self::truck()
    }
}

impl MapSpec {
    /// Light-truck diesel: 700 N·m, 160 kW, 2800 rpm.
    pub fn truck() -> Self {
        let omega_max = 2800.0 * std::f64::consts::PI / 30.0;
        Self {
            n_speed: 16,
            n_torque: 16,
            omega_max,
            torque_peak: 700.0,
            power_max: 160e3,
            bsfc_min: 195.0,
            omega_star: 110.0,
            torque_star: 560.0,
            k_omega: 0.2,
            k_torque: 0.1,
            friction: 0.02,
            torque_floor: 0.01,
        }
    }

    /// Small gasoline-like engine for the sedan: 250 N·m, 110 kW, 6000 rpm.
    pub fn sedan() -> Self {
        let omega_max = 6000.0 * std::f64::consts::PI / 30.0;
        Self {
            n_speed: 16,
            n_torque: 16,
            omega_max,
            torque_peak: 250.0,
            power_max: 110e3,
            bsfc_min: 235.0,
            omega_star: 230.0,
            torque_star: 200.0,
            k_omega: 0.2,
            k_torque: 0.1,
            friction: 0.02,
            torque_floor: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_speed < 8 || self.n_torque < 8 {
            return Err(Error::InvalidSpec(format!(
                "grid {}x{} smaller than 8x8",
                self.n_speed, self.n_torque
            )));
        }
        let positive = [
            ("omega_max", self.omega_max),
            ("torque_peak", self.torque_peak),
            ("power_max", self.power_max),
            ("bsfc_min", self.bsfc_min),
            ("omega_star", self.omega_star),
            ("torque_star", self.torque_star),
            ("k_omega", self.k_omega),
            ("k_torque", self.k_torque),
            ("friction", self.friction),
            ("torque_floor", self.torque_floor),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {x}")));
            }
        }
        if self.torque_floor >= 1.0 {
            return Err(Error::InvalidSpec("torque_floor must be below 1".into()));
        }
        Ok(())
    }

    fn raw_bsfc(&self, omega: f64, torque: f64) -> f64 {
        let tf = self.friction * self.torque_peak * (0.5 + omega / self.omega_max);
        let dw = (omega - self.omega_star) / self.omega_max;
        let dt = (torque - self.torque_star) / self.torque_peak;
        let indicated = 1.0 + self.k_omega * dw * dw + self.k_torque * dt * dt;
        indicated * (torque + tf) / torque
    }
}

/// Tabulated engine map. Surfaces are stored speed-major: `[i_speed * n_torque + i_torque]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineMap {
    pub version: u32,
    pub speed_grid: Vec<f64>,
    pub torque_grid: Vec<f64>,
    pub power_surface: Vec<f64>,
    pub bsfc_surface: Vec<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub torque_peak: f64,
    pub power_max: f64,
}

pub fn build_engine_map(spec: &MapSpec) -> Result<EngineMap> {
    spec.validate()?;
    let speed_grid = linspace(0.0, spec.omega_max, spec.n_speed);
    let torque_grid = linspace(spec.torque_floor * spec.torque_peak, spec.torque_peak, spec.n_torque);
    let mut power = Vec::with_capacity(spec.n_speed * spec.n_torque);
    let mut bsfc = Vec::with_capacity(spec.n_speed * spec.n_torque);
    for &w in &speed_grid {
        for &t in &torque_grid {
            power.push(w * t);
            bsfc.push(spec.raw_bsfc(w, t));
        }
    }
    let lowest = bsfc.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = spec.bsfc_min / lowest;
    bsfc.iter_mut().for_each(|b| *b *= scale);
    EngineMap::from_tables(
        speed_grid,
        torque_grid,
        power,
        bsfc,
        spec.torque_peak,
        spec.power_max,
    )
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0]) && xs.iter().all(|x| x.is_finite())
}

/// Bracketing cell index and fraction, clamped to the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|g| *g <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

impl EngineMap {
    pub fn from_tables(
        speed_grid: Vec<f64>,
        torque_grid: Vec<f64>,
        power_surface: Vec<f64>,
        bsfc_surface: Vec<f64>,
        torque_peak: f64,
        power_max: f64,
    ) -> Result<Self> {
        if speed_grid.len() < 2 || torque_grid.len() < 2 {
            return Err(Error::InvalidSpec("grids need at least two nodes".into()));
        }
        if !strictly_increasing(&speed_grid) || !strictly_increasing(&torque_grid) {
            return Err(Error::InvalidSpec("grid samples must be strictly increasing".into()));
        }
        let cells = speed_grid.len() * torque_grid.len();
        if power_surface.len() != cells || bsfc_surface.len() != cells {
            return Err(Error::InvalidSpec(format!("surfaces must have {cells} entries")));
        }
        if bsfc_surface.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidSpec("bsfc surface must be finite and positive".into()));
        }
        Ok(Self {
            version: MAP_FORMAT_VERSION,
            omega_min: speed_grid[0],
            omega_max: *speed_grid.last().unwrap(),
            speed_grid,
            torque_grid,
            power_surface,
            bsfc_surface,
            torque_peak,
            power_max,
        })
    }

    fn bilinear(&self, surface: &[f64], omega: f64, torque: f64) -> f64 {
        let nt = self.torque_grid.len();
        let (i, fw) = locate(&self.speed_grid, omega);
        let (j, ft) = locate(&self.torque_grid, torque);
        let q = |a: usize, b: usize| surface[a * nt + b];
        (1.0 - fw) * ((1.0 - ft) * q(i, j) + ft * q(i, j + 1))
            + fw * ((1.0 - ft) * q(i + 1, j) + ft * q(i + 1, j + 1))
    }

    /// BSFC (g/kWh), bilinear inside the grid and clamped outside.
    pub fn bsfc(&self, omega: f64, torque: f64) -> f64 {
        self.bilinear(&self.bsfc_surface, omega, torque)
    }

    /// Engine power (W). Below the first torque node the tabulated power is
    /// scaled linearly in torque so that zero torque means zero power.
    pub fn power(&self, omega: f64, torque: f64) -> f64 {
        let t0 = self.torque_grid[0];
        if torque < t0 {
            return self.bilinear(&self.power_surface, omega, t0) * (torque / t0);
        }
        self.bilinear(&self.power_surface, omega, torque)
    }

    /// Full-load torque available at `omega`.
    pub fn max_torque(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return self.torque_peak;
        }
        self.torque_peak.min(self.power_max / omega)
    }

    pub fn in_envelope(&self, omega: f64, torque: f64) -> bool {
        omega >= self.omega_min
            && omega <= self.omega_max
            && torque >= 0.0
            && torque <= self.max_torque(omega) * (1.0 + 1e-12)
    }

    pub fn check_envelope(&self, omega: f64, torque: f64) -> Result<()> {
        if self.in_envelope(omega, torque) {
            Ok(())
        } else {
            Err(Error::Envelope { omega, torque })
        }
    }

    /// Grid node with the lowest BSFC: `(omega, torque, bsfc)`.
    pub fn min_bsfc(&self) -> (f64, f64, f64) {
        let nt = self.torque_grid.len();
        let (k, b) = self
            .bsfc_surface
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &b)| if b < acc.1 { (k, b) } else { acc });
        (self.speed_grid[k / nt], self.torque_grid[k % nt], b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: EngineMap = serde_json::from_str(s)?;
        if m.version != MAP_FORMAT_VERSION {
            return Err(Error::InvalidSpec(format!("unsupported map version {}", m.version)));
        }
        Self::from_tables(
            m.speed_grid,
            m.torque_grid,
            m.power_surface,
            m.bsfc_surface,
            m.torque_peak,
            m.power_max,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn map() -> EngineMap {
        build_engine_map(&MapSpec::truck()).unwrap()
    }

    #[test]
    fn minimum_is_stated_value_and_interior() {
        let m = map();
        let (w, t, b) = m.min_bsfc();
        assert!((b - 195.0).abs() <= 0.5);
        assert!(w > m.speed_grid[0] && w < m.omega_max);
        assert!(t > m.torque_grid[0] && t < *m.torque_grid.last().unwrap());
        let ties = m.bsfc_surface.iter().filter(|&&x| (x - b).abs() < 1e-9).count();
        assert_eq!(ties, 1);
    }

    #[test]
    fn node_query_is_identity() {
        let m = map();
        let nt = m.torque_grid.len();
        for (i, j) in [(3, 4), (0, 0), (15, 15), (7, 11)] {
            let w = m.speed_grid[i];
            let t = m.torque_grid[j];
            assert_eq!(m.bsfc(w, t), m.bsfc_surface[i * nt + j]);
        }
    }

    #[test]
    fn midpoint_is_mean_of_corners() {
        let m = map();
        let nt = m.torque_grid.len();
        let (i, j) = (5, 6);
        let w = 0.5 * (m.speed_grid[i] + m.speed_grid[i + 1]);
        let t = 0.5 * (m.torque_grid[j] + m.torque_grid[j + 1]);
        let corners = m.bsfc_surface[i * nt + j]
            + m.bsfc_surface[i * nt + j + 1]
            + m.bsfc_surface[(i + 1) * nt + j]
            + m.bsfc_surface[(i + 1) * nt + j + 1];
        assert_relative_eq!(m.bsfc(w, t), corners / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn power_is_speed_times_torque() {
        let m = map();
        for &(w, t) in &[(50.0, 100.0), (123.4, 567.8), (250.0, 300.0), (10.0, 3.0)] {
            assert_relative_eq!(m.power(w, t), w * t, max_relative = 0.01);
        }
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        let spec = MapSpec { n_speed: 4, ..MapSpec::truck() };
        assert!(matches!(build_engine_map(&spec), Err(Error::InvalidSpec(_))));
        let m = map();
        let mut grid = m.speed_grid.clone();
        grid.swap(2, 3);
        let r = EngineMap::from_tables(
            grid,
            m.torque_grid.clone(),
            m.power_surface.clone(),
            m.bsfc_surface.clone(),
            700.0,
            160e3,
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = map();
        let back = EngineMap::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
