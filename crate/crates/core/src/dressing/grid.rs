//! Uniform space-time grids and finite-difference stencils.
//!
//! x-derivatives use fourth-order centered stencils (up to the fourth
//! derivative), t-derivatives second-order centered ones. Stencil exactness
//! on polynomials is pinned by tests; residual convergence studies measure
//! the orders on real fields.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid too small for the stencil: need at least {need} points along {axis}, have {have}")]
    GridTooSmall { axis: &'static str, need: usize, have: usize },
    #[error("field value not finite at (x={x}, t={t})")]
    NonFinite { x: f64, t: f64 },
}

/// Sampled real scalar field on a uniform rectangular grid.
///
/// Values are stored row-major in t: index `[it * nx + ix]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    pub x0: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn new(nx: usize, nt: usize, x0: f64, dx: f64, t0: f64, dt: f64) -> Self {
        assert!(dx > 0.0 && dt > 0.0, "grid spacings must be positive");
        Field2D { nx, nt, dx, dt, x0, t0, values: vec![0.0; nx * nt] }
    }

    /// Sample a closure over the grid, checking finiteness.
    pub fn sample<F: FnMut(f64, f64) -> f64>(
        nx: usize,
        nt: usize,
        x0: f64,
        dx: f64,
        t0: f64,
        dt: f64,
        mut f: F,
    ) -> Result<Self, GridError> {
        let mut out = Field2D::new(nx, nt, x0, dx, t0, dt);
        for it in 0..nt {
            let t = out.t(it);
            for ix in 0..nx {
                let x = out.x(ix);
                let v = f(x, t);
                if !v.is_finite() {
                    return Err(GridError::NonFinite { x, t });
                }
                out.values[it * nx + ix] = v;
            }
        }
        Ok(out)
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    pub fn t(&self, it: usize) -> f64 {
        self.t0 + it as f64 * self.dt
    }

    pub fn get(&self, ix: usize, it: usize) -> f64 {
        self.values[it * self.nx + ix]
    }

    pub fn set(&mut self, ix: usize, it: usize, v: f64) {
        self.values[it * self.nx + ix] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fourth-order centered first derivative in x (radius 2).
pub fn dx1(f: &Field2D, ix: usize, it: usize) -> f64 {
    let g = |o: isize| f.get((ix as isize + o) as usize, it);
    (g(-2) - 8.0 * g(-1) + 8.0 * g(1) - g(2)) / (12.0 * f.dx)
}

/// Fourth-order centered second derivative in x (radius 2).
pub fn dx2(f: &Field2D, ix: usize, it: usize) -> f64 {
    let g = |o: isize| f.get((ix as isize + o) as usize, it);
    (-g(-2) + 16.0 * g(-1) - 30.0 * g(0) + 16.0 * g(1) - g(2)) / (12.0 * f.dx * f.dx)
}

/// Fourth-order centered third derivative in x (radius 3).
pub fn dx3(f: &Field2D, ix: usize, it: usize) -> f64 {
    let g = |o: isize| f.get((ix as isize + o) as usize, it);
    (g(-3) - 8.0 * g(-2) + 13.0 * g(-1) - 13.0 * g(1) + 8.0 * g(2) - g(3))
        / (8.0 * f.dx.powi(3))
}

/// Fourth-order centered fourth derivative in x (radius 3).
pub fn dx4(f: &Field2D, ix: usize, it: usize) -> f64 {
    let g = |o: isize| f.get((ix as isize + o) as usize, it);
    (-g(-3) + 12.0 * g(-2) - 39.0 * g(-1) + 56.0 * g(0) - 39.0 * g(1) + 12.0 * g(2) - g(3))
        / (6.0 * f.dx.powi(4))
}

/// Second-order centered first derivative in t (radius 1).
pub fn dt1(f: &Field2D, ix: usize, it: usize) -> f64 {
    (f.get(ix, it + 1) - f.get(ix, it - 1)) / (2.0 * f.dt)
}

/// Second-order centered second derivative in t (radius 1).
pub fn dt2(f: &Field2D, ix: usize, it: usize) -> f64 {
    (f.get(ix, it + 1) - 2.0 * f.get(ix, it) + f.get(ix, it - 1)) / (f.dt * f.dt)
}

/// Mixed derivative: fourth order in x, second order in t.
pub fn dxdt(f: &Field2D, ix: usize, it: usize) -> f64 {
    let row = |jt: usize| {
        let g = |o: isize| f.get((ix as isize + o) as usize, jt);
        (g(-2) - 8.0 * g(-1) + 8.0 * g(1) - g(2)) / (12.0 * f.dx)
    };
    (row(it + 1) - row(it - 1)) / (2.0 * f.dt)
}

pub fn require_interior(f: &Field2D, x_margin: usize, t_margin: usize) -> Result<(), GridError> {
    if f.nx < 2 * x_margin + 1 {
        return Err(GridError::GridTooSmall { axis: "x", need: 2 * x_margin + 1, have: f.nx });
    }
    if f.nt < 2 * t_margin + 1 {
        return Err(GridError::GridTooSmall { axis: "t", need: 2 * t_margin + 1, have: f.nt });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_field(p: impl Fn(f64, f64) -> f64) -> Field2D {
        Field2D::sample(21, 9, -1.0, 0.1, 0.0, 0.05, |x, t| p(x, t)).unwrap()
    }

    #[test]
    fn stencils_are_exact_on_polynomials() {
        // x^4 + x^3 t: fourth-order stencils must reproduce derivatives of
        // degree-4 polynomials to rounding
        let f = poly_field(|x, t| x.powi(4) + x.powi(3) * t);
        let (ix, it) = (10, 4);
        let (x, t) = (f.x(ix), f.t(it));
        assert!((dx1(&f, ix, it) - (4.0 * x.powi(3) + 3.0 * x * x * t)).abs() < 1e-12);
        assert!((dx2(&f, ix, it) - (12.0 * x * x + 6.0 * x * t)).abs() < 1e-11);
        assert!((dx3(&f, ix, it) - (24.0 * x + 6.0 * t)).abs() < 1e-10);
        assert!((dx4(&f, ix, it) - 24.0).abs() < 1e-9);
        assert!((dxdt(&f, ix, it) - 3.0 * x * x).abs() < 1e-11);
        // t-stencils are exact on quadratics in t
        let g = poly_field(|x, t| t * t + x * t);
        let (x, _) = (g.x(ix), g.t(it));
        assert!((dt1(&g, ix, it) - (2.0 * g.t(it) + x)).abs() < 1e-12);
        assert!((dt2(&g, ix, it) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn stencil_convergence_orders_on_smooth_fields() {
        // measured orders on sin(x): slopes of max error under halving
        let err_at = |n: usize| {
            let f = Field2D::sample(n, 3, -1.0, 2.0 / (n - 1) as f64, 0.0, 0.1, |x, _| x.sin())
                .unwrap();
            let mut emax: f64 = 0.0;
            for ix in 3..n - 3 {
                let x = f.x(ix);
                emax = emax.max((dx3(&f, ix, 1) - (-x.cos())).abs());
            }
            emax
        };
        let (e1, e2) = (err_at(65), err_at(129));
        let slope = (e1 / e2).log2();
        assert!((slope - 4.0).abs() < 0.5, "third-derivative slope {slope}");
    }

    #[test]
    fn sampling_rejects_non_finite_values() {
        let r = Field2D::sample(5, 3, 0.0, 0.5, 0.0, 0.5, |x, _| 1.0 / x);
        assert!(matches!(r, Err(GridError::NonFinite { .. })));
    }

    #[test]
    fn interior_bounds_checked() {
        let f = Field2D::new(5, 3, 0.0, 0.1, 0.0, 0.1);
        assert!(require_interior(&f, 3, 1).is_err());
        assert!(require_interior(&f, 2, 1).is_ok());
    }
}
