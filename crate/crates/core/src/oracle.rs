//! Axisymmetric reference solutions.
//!
//! The geometry is rotationally symmetric, so `A_z` depends on the radius
//! only and the 2D problem collapses to the 1D weak form
//!
//! ```text
//! int (1/mu) A' v' rho drho + j omega int sigma A v rho drho = int J v rho drho
//! ```
//!
//! on `[0, r2]` with `A(r2) = 0`. No condition is imposed at `rho = 0`; the
//! weight vanishes there. P1 elements on a fine radial grid give a reference
//! energy that the 2D solver must converge to. For `sigma = 0` Ampere's law
//! gives the energy in closed form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::Region;
use crate::model::{ModelParams, ParameterDistributions};
use crate::quadrature::gauss_legendre;
use crate::MU0;

/// Default number of radial intervals for reference values.
pub const REFERENCE_INTERVALS: usize = 100_000;

/// Tube grading shared with the 2D mesh family: level-0 ratio `q` over `n0` cells.
const TUBE_GRADING: f64 = 1.2;
const TUBE_BASE_CELLS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    /// Node radii `0 = rho_0 < ... < rho_M = r2`.
    pub nodes: Vec<f64>,
    /// Region of interval `[rho_i, rho_{i+1}]`.
    pub regions: Vec<Region>,
}

impl RadialGrid {
    /// `intervals` split 1 : 2 : 2 over wire, air and tube, uniform in the
    /// first two and graded toward `r1` in the tube like the 2D meshes.
    pub fn new(params: &ModelParams, intervals: usize) -> Result<Self> {
        let n_wire = (intervals / 5).max(1);
        let n_air = (2 * intervals / 5).max(1);
        let n_tube = intervals.saturating_sub(n_wire + n_air).max(1);
        Self::with_counts(params, n_wire, n_air, n_tube)
    }

    pub fn with_counts(params: &ModelParams, n_wire: usize, n_air: usize, n_tube: usize) -> Result<Self> {
        params.validate()?;
        if n_wire == 0 || n_air == 0 || n_tube == 0 {
            return Err(Error::config("every region needs at least one radial interval"));
        }
        let mut nodes = Vec::with_capacity(n_wire + n_air + n_tube + 1);
        let mut regions = Vec::with_capacity(n_wire + n_air + n_tube);
        nodes.extend((0..n_wire).map(|i| params.r0 * i as f64 / n_wire as f64));
        nodes.extend((0..n_air).map(|i| params.r0 + (params.r1 - params.r0) * i as f64 / n_air as f64));
        let (q, n0) = (TUBE_GRADING, TUBE_BASE_CELLS);
        let width = params.r2 - params.r1;
        nodes.extend((0..n_tube).map(|i| {
            let t = i as f64 / n_tube as f64;
            params.r1 + width * (q.powf(n0 * t) - 1.0) / (q.powf(n0) - 1.0)
        }));
        nodes.push(params.r2);
        regions.extend(std::iter::repeat_n(Region::Wire, n_wire));
        regions.extend(std::iter::repeat_n(Region::Air, n_air));
        regions.extend(std::iter::repeat_n(Region::Tube, n_tube));
        let grid = RadialGrid { nodes, regions };
        debug_assert!(grid.nodes.windows(2).all(|w| w[0] < w[1]));
        Ok(grid)
    }

    pub fn intervals(&self) -> usize {
        self.regions.len()
    }

    /// Widest tube interval.
    pub fn max_tube_width(&self) -> f64 {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Region::Tube)
            .map(|(i, _)| self.nodes[i + 1] - self.nodes[i])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    /// Nodal `A(rho_i)`, with `A(r2) = 0`.
    pub values: Vec<Complex64>,
}

impl RadialSolution {
    /// `A'` on interval `i`.
    pub fn derivative(&self, i: usize) -> Complex64 {
        let h = self.grid.nodes[i + 1] - self.grid.nodes[i];
        (self.values[i + 1] - self.values[i]) / h
    }

    /// Current enclosed by the midpoint circle of interval `i` from Ampere's
    /// law, `-A' 2 pi rho_mid / mu`.
    pub fn enclosed_current(&self, i: usize, params: &ModelParams) -> Complex64 {
        let mid = 0.5 * (self.grid.nodes[i] + self.grid.nodes[i + 1]);
        let mu = MU0 * self.grid.regions[i].relative_mu(params);
        -self.derivative(i) * (2.0 * std::f64::consts::PI * mid / mu)
    }
}

/// P1 solution of the axisymmetric problem.
pub fn radial_solve(params: &ModelParams, grid: &RadialGrid) -> Result<RadialSolution> {
    params.validate()?;
    let delta = params.skin_depth();
    if grid.max_tube_width() > delta / 10.0 {
        return Err(Error::config(format!(
            "radial grid too coarse: tube interval {:e} m exceeds a tenth of the skin depth {delta:e} m",
            grid.max_tube_width()
        )));
    }
    let m = grid.intervals();
    // Unknowns at nodes 0..m-1; node m carries A = 0.
    let mut diag = vec![Complex64::default(); m];
    let mut off = vec![Complex64::default(); m.saturating_sub(1)];
    let mut rhs = vec![Complex64::default(); m];
    let source = params.source_density();
    for i in 0..m {
        let (a, b) = (grid.nodes[i], grid.nodes[i + 1]);
        let h = b - a;
        let region = grid.regions[i];
        let nu = 1.0 / (MU0 * region.relative_mu(params));
        let k = nu * (a + b) / (2.0 * h);
        let ws = params.omega * region.sigma(params) * h / 12.0;
        let m_aa = Complex64::new(k, ws * (3.0 * a + b));
        let m_ab = Complex64::new(-k, ws * (a + b));
        let m_bb = Complex64::new(k, ws * (a + 3.0 * b));
        diag[i] += m_aa;
        if i + 1 < m {
            diag[i + 1] += m_bb;
            off[i] += m_ab;
        }
        if region == Region::Wire {
            rhs[i] += source * h * (2.0 * a + b) / 6.0;
            if i + 1 < m {
                rhs[i + 1] += source * h * (a + 2.0 * b) / 6.0;
            }
        }
    }
    let mut values = solve_symmetric_tridiagonal(&diag, &off, &rhs)?;
    values.push(Complex64::default());
    Ok(RadialSolution { grid: grid.clone(), values })
}

/// Thomas algorithm for a complex symmetric tridiagonal system.
fn solve_symmetric_tridiagonal(diag: &[Complex64], off: &[Complex64], rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![Complex64::default(); n];
    let mut d = vec![Complex64::default(); n];
    for i in 0..n {
        let lower = if i > 0 { off[i - 1] } else { Complex64::default() };
        let denom = diag[i] - lower * if i > 0 { c[i - 1] } else { Complex64::default() };
        if denom.norm() == 0.0 || !denom.is_finite() {
            return Err(Error::Solver { message: format!("zero pivot in radial solve at row {i}"), residual: f64::NAN });
        }
        c[i] = if i + 1 < n { off[i] / denom } else { Complex64::default() };
        d[i] = (rhs[i] - lower * if i > 0 { d[i - 1] } else { Complex64::default() }) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Energy of a radial solution: `sum_i pi rho_mid h |A'|^2 / mu`.
pub fn radial_energy_of(sol: &RadialSolution, params: &ModelParams) -> f64 {
    (0..sol.grid.intervals())
        .map(|i| {
            let (a, b) = (sol.grid.nodes[i], sol.grid.nodes[i + 1]);
            let mu = MU0 * sol.grid.regions[i].relative_mu(params);
            std::f64::consts::PI * 0.5 * (a + b) * (b - a) * sol.derivative(i).norm_sqr() / mu
        })
        .sum()
}

pub fn radial_energy(params: &ModelParams, grid: &RadialGrid) -> Result<f64> {
    Ok(radial_energy_of(&radial_solve(params, grid)?, params))
}

/// Reference energy on the default `REFERENCE_INTERVALS` grid.
pub fn reference_energy(params: &ModelParams) -> Result<f64> {
    radial_energy(params, &RadialGrid::new(params, REFERENCE_INTERVALS)?)
}

/// Energy for `sigma = 0` from `H_phi = I0 rho / (2 pi r0^2)` in the wire and
/// `I0 / (2 pi rho)` outside:
/// `mu0 I0^2 / (16 pi) + mu0 I0^2 ln(r1/r0) / (4 pi) + mu_III mu0 I0^2 ln(r2/r1) / (4 pi)`.
/// Any conductivity in `params` is ignored.
pub fn closed_form_energy_sigma0(params: &ModelParams) -> f64 {
    let pi = std::f64::consts::PI;
    let c = MU0 * params.current * params.current;
    params.mu_wire * c / (16.0 * pi)
        + params.mu_air * c * (params.r1 / params.r0).ln() / (4.0 * pi)
        + params.mu_tube * c * (params.r2 / params.r1).ln() / (4.0 * pi)
}

/// Tensor Gauss-Legendre estimate of `E[W]` over the uniform input box with
/// `order` nodes per non-degenerate direction and `intervals` radial cells
/// per solve. Degenerate directions use their nominal value only.
pub fn reference_mean(fixed: &ModelParams, dists: &ParameterDistributions, order: usize, intervals: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::config("quadrature order must be positive"));
    }
    dists.validate(fixed)?;
    let (x, w) = gauss_legendre(order);
    let rule = |d: &crate::model::UniformParam| -> Vec<(f64, f64)> {
        if d.is_degenerate() {
            vec![(d.nominal, 1.0)]
        } else {
            x.iter().zip(&w).map(|(&x, &w)| (d.nominal + d.half_width * x, 0.5 * w)).collect()
        }
    };
    let (r1s, currents, mus) = (rule(&dists.r1), rule(&dists.current), rule(&dists.mu_tube));
    let total = (r1s.len() * currents.len() * mus.len()) as u64;
    let terms = crate::map_indices(0..total, |k| -> Result<f64> {
        let k = k as usize;
        let (a, rest) = (k / (currents.len() * mus.len()), k % (currents.len() * mus.len()));
        let (b, c) = (rest / mus.len(), rest % mus.len());
        let p = ModelParams { r1: r1s[a].0, current: currents[b].0, mu_tube: mus[c].0, ..*fixed };
        let grid = RadialGrid::new(&p, intervals)?;
        Ok(r1s[a].1 * currents[b].1 * mus[c].1 * radial_energy(&p, &grid)?)
    });
    let mut sum = 0.0;
    for t in terms {
        sum += t?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_params() -> ModelParams {
        ModelParams { sigma: 0.0, ..ModelParams::default() }
    }

    #[test]
    fn wire_term_value() {
        // mu0 I0^2 / (16 pi) = 4 pi 1e-7 * 1e4 / (16 pi) = 2.5e-4 J/m; the log terms vanish as r0 = r1 = r2.
        let p = static_params();
        let q = ModelParams { r1: p.r0 * (1.0 + 1e-15), r2: p.r0 * (1.0 + 2e-15), ..p };
        assert!((closed_form_energy_sigma0(&q) - 2.5e-4).abs() < 1e-15);
        let r = ModelParams { mu_tube: 1.0, r1: p.r0 * (1.0 + 1e-9), r2: p.r0 * (1.0 + 2e-9), ..p };
        assert!((closed_form_energy_sigma0(&r) - 2.5e-4).abs() < 1e-11);
    }

    #[test]
    fn closed_form_scales_with_current_squared() {
        let p = static_params();
        let q = ModelParams { current: 3.0 * p.current, ..p };
        assert!((closed_form_energy_sigma0(&q) / closed_form_energy_sigma0(&p) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn zero_current() {
        let p = ModelParams { current: 0.0, ..ModelParams::default() };
        let grid = RadialGrid::new(&p, 10_000).unwrap();
        let sol = radial_solve(&p, &grid).unwrap();
        assert!(sol.values.iter().all(|v| *v == Complex64::default()));
        assert_eq!(radial_energy(&p, &grid).unwrap(), 0.0);
    }

    #[test]
    fn static_solution_is_real() {
        let p = static_params();
        let sol = radial_solve(&p, &RadialGrid::new(&p, 10_000).unwrap()).unwrap();
        assert!(sol.values.iter().all(|v| v.im.abs() <= 1e-14 * v.norm().max(1e-300)));
    }

    #[test]
    fn ampere_flux_in_air_gap() {
        let p = static_params();
        let sol = radial_solve(&p, &RadialGrid::new(&p, 10_000).unwrap()).unwrap();
        for (i, r) in sol.grid.regions.iter().enumerate() {
            if *r == Region::Air {
                let flux = sol.enclosed_current(i, &p);
                assert!((flux.re - p.current).abs() <= 1e-4 * p.current, "interval {i}: {flux}");
            }
        }
    }

    #[test]
    fn static_energy_matches_closed_form() {
        let p = static_params();
        let w = radial_energy(&p, &RadialGrid::new(&p, 100_000).unwrap()).unwrap();
        let exact = closed_form_energy_sigma0(&p);
        assert!((w - exact).abs() / exact <= 1e-6, "w = {w}, exact = {exact}");
    }

    #[test]
    fn eddy_energy_is_grid_converged() {
        let p = ModelParams::default();
        let a = radial_energy(&p, &RadialGrid::new(&p, 100_000).unwrap()).unwrap();
        let b = radial_energy(&p, &RadialGrid::new(&p, 200_000).unwrap()).unwrap();
        assert!((a - b).abs() / b < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = ModelParams::default();
        assert!(matches!(radial_solve(&p, &RadialGrid::new(&p, 50).unwrap()), Err(Error::Config(_))));
    }

    #[test]
    fn collapsed_reference_mean_is_nominal_energy() {
        let fixed = ModelParams::default();
        let dists = ParameterDistributions::default().collapsed();
        let mean = reference_mean(&fixed, &dists, 4, 20_000).unwrap();
        let nominal = radial_energy(&fixed.nominal(&dists), &RadialGrid::new(&fixed, 20_000).unwrap()).unwrap();
        assert_eq!(mean, nominal);
    }

    #[test]
    fn current_direction_is_integrated_exactly() {
        // W is quadratic in I0: E[W] = W(I0_bar) (1 + (dI0^2 / 3) / I0_bar^2).
        let fixed = ModelParams::default();
        let mut dists = ParameterDistributions::default().collapsed();
        dists.current.half_width = 10.0;
        let mean = reference_mean(&fixed, &dists, 2, 20_000).unwrap();
        let w_bar = radial_energy(&fixed.nominal(&dists), &RadialGrid::new(&fixed, 20_000).unwrap()).unwrap();
        let expected = w_bar * (1.0 + (100.0 / 3.0) / 1.0e4);
        assert!((mean - expected).abs() / expected < 1e-12, "{mean} vs {expected}");
    }
}
