//! Uniform periodic cubic B-spline interpolation in one and two variables.
//!
//! Interpolation collocates the spline at the grid points, which needs a
//! cyclic tridiagonal solve with stencil (1/6, 4/6, 1/6). The result is C^2,
//! so first partial derivatives of sampled data are smooth.

use crate::error::{Result, TubeError};

/// Solve the cyclic tridiagonal system with constant bands
/// `sub * x[i-1] + diag * x[i] + sup * x[i+1] = rhs[i]` (indices mod n).
fn solve_cyclic_const(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3, "cyclic solve needs at least 3 unknowns");
    let gamma = -diag;
    // Modified non-cyclic system (Sherman-Morrison splitting).
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - sub * sup / gamma;
    let thomas = |b: &[f64], rhs: &[f64]| -> Vec<f64> {
        let mut c_star = vec![0.0; n];
        let mut d_star = vec![0.0; n];
        c_star[0] = sup / b[0];
        d_star[0] = rhs[0] / b[0];
        for i in 1..n {
            let m = b[i] - sub * c_star[i - 1];
            c_star[i] = sup / m;
            d_star[i] = (rhs[i] - sub * d_star[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d_star[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d_star[i] - c_star[i] * x[i + 1];
        }
        x
    };
    let x = thomas(&b, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sub;
    let z = thomas(&b, &u);
    let fact = (x[0] + sup * x[n - 1] / gamma) / (1.0 + z[0] + sup * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect()
}

/// Cubic B-spline basis values at local parameter t in [0, 1], ordered for
/// coefficients at offsets -1, 0, 1, 2 from the interval's left knot.
#[inline]
fn basis(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let omt = 1.0 - t;
    [
        omt * omt * omt / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

#[inline]
fn basis_deriv(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let omt = 1.0 - t;
    [
        -0.5 * omt * omt,
        0.5 * (3.0 * t2 - 4.0 * t),
        0.5 * (-3.0 * t2 + 2.0 * t + 1.0),
        0.5 * t2,
    ]
}

/// Periodic cubic spline through values on a uniform grid.
///
/// The grid covers one period: samples sit at `x0 + j * dx` for
/// `j = 0..n - 1` and the function repeats with period `n * dx`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline1 {
    x0: f64,
    dx: f64,
    coeffs: Vec<f64>,
}

impl PeriodicSpline1 {
    pub fn fit(x0: f64, dx: f64, values: &[f64]) -> Result<Self> {
        if values.len() < 4 {
            return Err(TubeError::InsufficientPoints { got: values.len(), need: 4 });
        }
        let coeffs = solve_cyclic_const(1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, values);
        Ok(PeriodicSpline1 { x0, dx, coeffs })
    }

    pub fn period(&self) -> f64 {
        self.dx * self.coeffs.len() as f64
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.coeffs.len();
        let u = (x - self.x0) / self.dx;
        let u = u.rem_euclid(n as f64);
        let mut j = u.floor() as usize;
        if j >= n {
            j = n - 1;
        }
        (j, u - j as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        let (j, t) = self.locate(x);
        let w = basis(t);
        let mut acc = 0.0;
        for (m, &wm) in w.iter().enumerate() {
            let idx = (j + n + m - 1) % n;
            acc += wm * self.coeffs[idx];
        }
        acc
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        let (j, t) = self.locate(x);
        let w = basis_deriv(t);
        let mut acc = 0.0;
        for (m, &wm) in w.iter().enumerate() {
            let idx = (j + n + m - 1) % n;
            acc += wm * self.coeffs[idx];
        }
        acc / self.dx
    }
}

/// Doubly periodic bicubic spline on a uniform rectangle grid.
///
/// `values[i * ny + j]` is the sample at `(x0 + i * dx, y0 + j * dy)`; the
/// surface repeats with periods `nx * dx` and `ny * dy`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline2 {
    x0: f64,
    dx: f64,
    y0: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    coeffs: Vec<f64>,
}

impl PeriodicSpline2 {
    pub fn fit(
        x0: f64,
        dx: f64,
        nx: usize,
        y0: f64,
        dy: f64,
        ny: usize,
        values: &[f64],
    ) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(TubeError::InsufficientPoints { got: nx.min(ny), need: 4 });
        }
        assert_eq!(values.len(), nx * ny);
        // Collocate along y for each grid row, then along x for each column.
        let mut stage = vec![0.0; nx * ny];
        for i in 0..nx {
            let row: Vec<f64> = (0..ny).map(|j| values[i * ny + j]).collect();
            let c = solve_cyclic_const(1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, &row);
            stage[i * ny..(i + 1) * ny].copy_from_slice(&c);
        }
        let mut coeffs = vec![0.0; nx * ny];
        let mut col = vec![0.0; nx];
        for j in 0..ny {
            for i in 0..nx {
                col[i] = stage[i * ny + j];
            }
            let c = solve_cyclic_const(1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, &col);
            for i in 0..nx {
                coeffs[i * ny + j] = c[i];
            }
        }
        Ok(PeriodicSpline2 { x0, dx, y0, dy, nx, ny, coeffs })
    }

    #[inline]
    fn locate(u: f64, n: usize) -> (usize, f64) {
        let u = u.rem_euclid(n as f64);
        let mut j = u.floor() as usize;
        if j >= n {
            j = n - 1;
        }
        (j, u - j as f64)
    }

    fn tensor_eval(&self, x: f64, y: f64, wx: &dyn Fn(f64) -> [f64; 4], wy: &dyn Fn(f64) -> [f64; 4]) -> f64 {
        let (i, tx) = Self::locate((x - self.x0) / self.dx, self.nx);
        let (j, ty) = Self::locate((y - self.y0) / self.dy, self.ny);
        let bx = wx(tx);
        let by = wy(ty);
        let mut acc = 0.0;
        for (m, &bxm) in bx.iter().enumerate() {
            let ii = (i + self.nx + m - 1) % self.nx;
            let mut row = 0.0;
            for (k, &byk) in by.iter().enumerate() {
                let jj = (j + self.ny + k - 1) % self.ny;
                row += byk * self.coeffs[ii * self.ny + jj];
            }
            acc += bxm * row;
        }
        acc
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.tensor_eval(x, y, &basis, &basis)
    }

    pub fn deriv_x(&self, x: f64, y: f64) -> f64 {
        self.tensor_eval(x, y, &basis_deriv, &basis) / self.dx
    }

    pub fn deriv_y(&self, x: f64, y: f64) -> f64 {
        self.tensor_eval(x, y, &basis, &basis_deriv) / self.dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn interpolates_grid_values_exactly() {
        let n = 16;
        let dx = 2.0 * PI / n as f64;
        let vals: Vec<f64> = (0..n).map(|j| (j as f64 * dx).sin() + 0.5).collect();
        let sp = PeriodicSpline1::fit(0.0, dx, &vals).unwrap();
        for (j, &v) in vals.iter().enumerate() {
            assert_relative_eq!(sp.value(j as f64 * dx), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn approximates_smooth_periodic_function_and_derivative() {
        let n = 64;
        let dx = 2.0 * PI / n as f64;
        let vals: Vec<f64> = (0..n).map(|j| (j as f64 * dx).sin()).collect();
        let sp = PeriodicSpline1::fit(0.0, dx, &vals).unwrap();
        for k in 0..200 {
            let x = 2.0 * PI * k as f64 / 200.0 + 0.013;
            assert_relative_eq!(sp.value(x), x.sin(), epsilon = 3e-6);
            assert_relative_eq!(sp.deriv(x), x.cos(), epsilon = 3e-4);
        }
    }

    #[test]
    fn wraps_around_the_period() {
        let n = 32;
        let dx = 1.0 / n as f64;
        let vals: Vec<f64> = (0..n).map(|j| (2.0 * PI * j as f64 * dx).cos()).collect();
        let sp = PeriodicSpline1::fit(0.0, dx, &vals).unwrap();
        assert_relative_eq!(sp.value(-0.3), sp.value(0.7), epsilon = 1e-12);
        assert_relative_eq!(sp.value(2.4), sp.value(0.4), epsilon = 1e-12);
    }

    #[test]
    fn bicubic_reproduces_product_of_waves() {
        let (nx, ny) = (48, 40);
        let lx = 3.0;
        let dx = lx / nx as f64;
        let dy = 2.0 * PI / ny as f64;
        let f = |x: f64, y: f64| (2.0 * PI * x / lx).sin() * y.cos();
        let vals: Vec<f64> = (0..nx)
            .flat_map(|i| (0..ny).map(move |j| f(i as f64 * dx, j as f64 * dy)))
            .collect();
        let sp = PeriodicSpline2::fit(0.0, dx, nx, 0.0, dy, ny, &vals).unwrap();
        for k in 0..60 {
            let x = lx * (k as f64 + 0.37) / 60.0;
            let y = 2.0 * PI * (k as f64 * 0.61).fract();
            assert_relative_eq!(sp.value(x, y), f(x, y), epsilon = 2e-5);
            let fx = (2.0 * PI / lx) * (2.0 * PI * x / lx).cos() * y.cos();
            let fy = -(2.0 * PI * x / lx).sin() * y.sin();
            assert_relative_eq!(sp.deriv_x(x, y), fx, epsilon = 2e-3);
            assert_relative_eq!(sp.deriv_y(x, y), fy, epsilon = 2e-3);
        }
    }
}
