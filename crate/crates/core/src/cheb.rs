//! Piecewise Chebyshev interpolation for smooth functions that are expensive
//! to evaluate (nested quadratures). Cells are bisected until the interpolant
//! matches the function at off-node test points.

use std::f64::consts::PI;

const DEGREE: usize = 16;
const MAX_DEPTH: usize = 14;

#[derive(Debug, Clone)]
struct Cell {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Cell {
    fn fit(a: f64, b: f64, values: &[f64]) -> Cell {
        let n = values.len() - 1;
        let mut coeffs = vec![0.0; n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, &v) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * v * (PI * (j * k) as f64 / n as f64).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Cell { a, b, coeffs }
    }

    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.to_unit(x))
    }

    fn derivative(&self, x: f64) -> f64 {
        let n = self.coeffs.len() - 1;
        let mut d = vec![0.0; n + 1];
        for k in (1..=n).rev() {
            let next = if k < n { d[k + 1] } else { 0.0 };
            d[k - 1] = next + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        d.truncate(n);
        clenshaw(&d, self.to_unit(x)) * 2.0 / (self.b - self.a)
    }
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

fn node(a: f64, b: f64, j: usize, n: usize) -> f64 {
    let t = (PI * j as f64 / n as f64).cos();
    0.5 * (a + b) + 0.5 * (b - a) * t
}

/// Piecewise Chebyshev interpolant on `[edges[0], edges.last()]`.
#[derive(Debug, Clone)]
pub struct ChebTable {
    cells: Vec<Cell>,
}

impl ChebTable {
    /// Interpolate `f` with cells aligned to `edges` (kinks of `f` belong
    /// there). Fails with the first error `f` returns.
    pub fn build<F, E>(f: F, edges: &[f64], tol: f64) -> Result<Self, E>
    where
        F: Fn(f64) -> Result<f64, E>,
    {
        let mut cells = Vec::new();
        for w in edges.windows(2) {
            if w[1] > w[0] {
                fit_cell(&f, w[0], w[1], tol, 0, &mut cells)?;
            }
        }
        Ok(ChebTable { cells })
    }

    pub fn lo(&self) -> f64 {
        self.cells.first().map_or(0.0, |c| c.a)
    }

    pub fn hi(&self) -> f64 {
        self.cells.last().map_or(0.0, |c| c.b)
    }

    /// Cell edges, useful as quadrature breakpoints.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.cells.iter().map(|c| c.a).collect();
        if let Some(c) = self.cells.last() {
            e.push(c.b);
        }
        e
    }

    fn cell(&self, x: f64) -> &Cell {
        let i = self.cells.partition_point(|c| c.b < x);
        &self.cells[i.min(self.cells.len() - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.cell(x).eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.cell(x).derivative(x)
    }
}

fn fit_cell<F, E>(f: &F, a: f64, b: f64, tol: f64, depth: usize, out: &mut Vec<Cell>) -> Result<(), E>
where
    F: Fn(f64) -> Result<f64, E>,
{
    let values = (0..=DEGREE)
        .map(|j| f(node(a, b, j, DEGREE)))
        .collect::<Result<Vec<_>, E>>()?;
    let cell = Cell::fit(a, b, &values);
    let mut worst: f64 = 0.0;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for j in [0, 3, 8, 12, 15] {
        // halfway between nodes j and j+1
        let t = (PI * (j as f64 + 0.5) / DEGREE as f64).cos();
        let x = 0.5 * (a + b) - 0.5 * (b - a) * t;
        worst = worst.max((cell.eval(x) - f(x)?).abs());
    }
    if worst <= tol * scale || depth >= MAX_DEPTH {
        out.push(cell);
        return Ok(());
    }
    let mid = 0.5 * (a + b);
    fit_cell(f, a, mid, tol, depth + 1, out)?;
    fit_cell(f, mid, b, tol, depth + 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<f64, Infallible> {
        move |x| Ok(f(x))
    }

    #[test]
    fn smooth_function_and_derivative() {
        let t = ChebTable::build(ok(|x: f64| (3.0 * x).sin() + x * x), &[0.0, 2.0], 1e-12).unwrap();
        for i in 0..=50 {
            let x = 2.0 * i as f64 / 50.0;
            assert!((t.eval(x) - ((3.0 * x).sin() + x * x)).abs() < 1e-11);
            assert!((t.derivative(x) - (3.0 * (3.0 * x).cos() + 2.0 * x)).abs() < 1e-8);
        }
    }

    #[test]
    fn near_singular_function_gets_refined() {
        let f = |x: f64| -(1.0 - x).ln();
        let t = ChebTable::build(ok(f), &[0.0, 0.99], 1e-11).unwrap();
        assert!(t.cells.len() > 1);
        for i in 0..=99 {
            let x = 0.99 * i as f64 / 99.0;
            assert!((t.eval(x) - f(x)).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn kinks_on_edges_are_exact() {
        let f = |x: f64| (x - 1.0).abs();
        let t = ChebTable::build(ok(f), &[0.0, 1.0, 2.0], 1e-12).unwrap();
        assert_eq!(t.cells.len(), 2);
        assert!((t.eval(0.3) - 0.7).abs() < 1e-13);
        assert!((t.eval(1.7) - 0.7).abs() < 1e-13);
        assert_eq!(t.edges(), vec![0.0, 1.0, 2.0]);
    }
}
