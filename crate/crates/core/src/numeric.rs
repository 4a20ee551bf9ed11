//! Small numeric building blocks: composite Simpson quadrature, a cumulative
//! CDF table for densities given in log space, and a 3x3 linear solver used
//! by the weighted least-squares fits.

use crate::error::{Error, Result};

/// Composite Simpson rule on `[a, b]` with `n` subintervals (`n` rounded up
/// to the next even number).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(b >= a, "simpson: b < a");
    if a == b {
        return 0.0;
    }
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// Exponential tail `w(y) = coeff * exp(-rate * (y - start))` for `y >= start`.
///
/// Used to close the upper end of a density that is an exact power law in x
/// (exponential in y = ln x) above some threshold.
#[derive(Debug, Clone, Copy)]
pub struct ExpTail {
    pub start: f64,
    pub rate: f64,
    pub coeff: f64,
}

impl ExpTail {
    fn mass(&self) -> f64 {
        self.coeff / self.rate
    }

    /// Integral of the tail from `start` to `y`.
    fn partial(&self, y: f64) -> f64 {
        self.coeff / self.rate * (1.0 - (-self.rate * (y - self.start)).exp())
    }
}

/// Normalized CDF table for an unnormalized density `w(y)` on `[y_lo, y_hi]`,
/// optionally followed by an analytic exponential tail above `y_hi`.
///
/// The table is built once with per-interval Simpson panels; lookups
/// interpolate linearly between nodes.
pub struct NumericCdf {
    ys: Vec<f64>,
    cum: Vec<f64>,
    /// Density values at the nodes, for sub-interval interpolation.
    ws: Vec<f64>,
    tail: Option<ExpTail>,
    total: f64,
}

impl NumericCdf {
    pub fn build<F: Fn(f64) -> f64>(w: F, y_lo: f64, y_hi: f64, n: usize, tail: Option<ExpTail>) -> Result<Self> {
        if !(y_hi > y_lo) || !y_lo.is_finite() || !y_hi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "NumericCdf domain [{y_lo}, {y_hi}] is not a finite increasing interval"
            )));
        }
        let n = n.max(16);
        let h = (y_hi - y_lo) / n as f64;
        let mut ys = Vec::with_capacity(n + 1);
        let mut cum = Vec::with_capacity(n + 1);
        let mut ws = Vec::with_capacity(n + 1);
        ys.push(y_lo);
        cum.push(0.0);
        ws.push(w(y_lo));
        let mut acc = 0.0;
        for i in 0..n {
            let a = y_lo + h * i as f64;
            let b = a + h;
            // one Simpson panel per interval
            acc += (w(a) + 4.0 * w(0.5 * (a + b)) + w(b)) * h / 6.0;
            ys.push(b);
            cum.push(acc);
            ws.push(w(b));
        }
        let tail_mass = tail.as_ref().map(|t| t.mass()).unwrap_or(0.0);
        let total = acc + tail_mass;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParams(format!(
                "NumericCdf total mass {total} is not positive and finite"
            )));
        }
        Ok(Self { ys, cum, ws, tail, total })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// CDF evaluated at a point in log space.
    pub fn cdf_y(&self, y: f64) -> f64 {
        let lo = self.ys[0];
        let hi = *self.ys.last().unwrap();
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return match &self.tail {
                Some(t) => (self.cum.last().unwrap() + t.partial(y)) / self.total,
                None => 1.0,
            };
        }
        let idx = match self.ys.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return self.cum[i] / self.total,
            Err(i) => i - 1,
        };
        let (y0, y1) = (self.ys[idx], self.ys[idx + 1]);
        let (w0, w1) = (self.ws[idx], self.ws[idx + 1]);
        // trapezoid over the partial interval with the density linearly
        // interpolated between the stored node values
        let t = (y - y0) / (y1 - y0);
        let wy = w0 + (w1 - w0) * t;
        (self.cum[idx] + 0.5 * (w0 + wy) * (y - y0)) / self.total
    }

    /// CDF evaluated at a point in x space (`x > 0`).
    pub fn cdf_x(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.cdf_y(x.ln())
        }
    }
}

/// Solve a 3x3 linear system `a * x = b` by Gaussian elimination with
/// partial pivoting.
pub fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::DegenerateRegression("singular normal equations".into()));
        }
        m.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = m[row][3];
        for k in (row + 1)..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomial_exact() {
        // Simpson is exact for cubics.
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 8);
        assert_relative_eq!(v, 4.0 - 4.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn simpson_exponential() {
        let v = simpson(|x| (-x).exp(), 0.0, 10.0, 2000);
        assert_relative_eq!(v, 1.0 - (-10.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn cdf_pure_exponential_with_tail() {
        // density e^{-y} on [0, inf): numeric on [0,2], analytic tail above.
        let tail = ExpTail { start: 2.0, rate: 1.0, coeff: (-2.0f64).exp() };
        let cdf = NumericCdf::build(|y| (-y).exp(), 0.0, 2.0, 512, Some(tail)).unwrap();
        assert_relative_eq!(cdf.total_mass(), 1.0, epsilon = 1e-9);
        for y in [0.1, 0.9, 1.7, 2.5, 5.0] {
            assert_relative_eq!(cdf.cdf_y(y), 1.0 - (-y as f64).exp(), epsilon = 1e-7);
        }
    }

    #[test]
    fn solve3_known_system() {
        let a = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let b = [8.0, -11.0, -3.0];
        let x = solve3(a, b).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve3_singular_is_error() {
        let a = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]];
        assert!(solve3(a, [1.0, 2.0, 3.0]).is_err());
    }
}
