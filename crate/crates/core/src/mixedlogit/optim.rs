//! Small dense BFGS minimiser with a backtracking line search, and
//! finite-difference Hessians of an analytic gradient.

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Objective change regarded as stalled.
    pub f_tol: f64,
    /// Gradient size accepted when progress has stalled (flat directions
    /// such as a variance collapsing to zero).
    pub stall_grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2_000,
            grad_tol: 1e-8,
            f_tol: 1e-10,
            stall_grad_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimises `f`, which returns the value and gradient at a point.
pub fn minimize_bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let k = x0.len();
    let identity = |k: usize| {
        let mut h = vec![vec![0.0; k]; k];
        (0..k).for_each(|i| h[i][i] = 1.0);
        h
    };
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut h = identity(k);
    let mut stalled = 0;

    for iter in 0..opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            return BfgsResult {
                x,
                f: fx,
                grad: g,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 || !slope.is_finite() {
            h = identity(k);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            let flat = inf_norm(&g) < opts.stall_grad_tol;
            return BfgsResult {
                x,
                f: fx,
                grad: g,
                iterations: iter,
                converged: flat,
            };
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..k {
                for j in 0..k {
                    h[i][j] +=
                        (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        let df = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if df < opts.f_tol {
            stalled += 1;
            if stalled >= 5 && inf_norm(&g) < opts.stall_grad_tol {
                return BfgsResult {
                    x,
                    f: fx,
                    grad: g,
                    iterations: iter + 1,
                    converged: true,
                };
            }
        } else {
            stalled = 0;
        }
    }
    let converged = inf_norm(&g) < opts.grad_tol;
    BfgsResult {
        x,
        f: fx,
        grad: g,
        iterations: opts.max_iter,
        converged,
    }
}

/// Hessian from central differences of `grad`, step `1e-5 * (1 + |x_i|)`,
/// symmetrised.
#[allow(clippy::needless_range_loop)]
pub fn fd_hessian<G>(mut grad: G, x: &[f64]) -> Vec<Vec<f64>>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let k = x.len();
    let mut hess = vec![vec![0.0; k]; k];
    for j in 0..k {
        let h = 1e-5 * (1.0 + x[j].abs());
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[j] += h;
        down[j] -= h;
        let (gu, gd) = (grad(&up), grad(&down));
        for i in 0..k {
            hess[i][j] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..k {
        for j in 0..i {
            let avg = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = avg;
            hess[j][i] = avg;
        }
    }
    hess
}
