//! One-dimensional quadrature: Gauss–Legendre, adaptive Gauss–Kronrod,
//! Filon panels for e^{iωu} times a smooth amplitude, and the exponential
//! integral of imaginary argument.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance {tol:e} (estimate {err:e})")]
    NoConvergence { tol: f64, err: f64 },
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule on [a, b].
pub fn gl_fixed<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> C64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| f(c + h * x) * *w).sum::<C64>() * h
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7–K15 panel: (Kronrod value, |Kronrod − Gauss|).
pub fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss–Kronrod with global bisection until the summed error
/// estimate is below `tol` (absolute).
pub fn adaptive<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> Result<(C64, f64), QuadError> {
    adaptive_from(&f, &[a, b], tol, max_panels)
}

/// As [`adaptive`], starting from the given breakpoints.
pub fn adaptive_from<F: Fn(f64) -> C64>(f: &F, breaks: &[f64], tol: f64, max_panels: usize) -> Result<(C64, f64), QuadError> {
    let mut panels: Vec<(f64, f64, C64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol {
            let val = panels.iter().map(|p| p.2).sum();
            return Ok((val, err));
        }
        if panels.len() >= max_panels {
            return Err(QuadError::NoConvergence { tol, err });
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (a, b, _, _) = panels.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
}

/// Moments ∫_{−1}^{1} v^k e^{iκv} dv for k < m.
fn moments(kappa: f64, m: usize) -> Vec<C64> {
    let mut mu = vec![C64::new(0.0, 0.0); m];
    if kappa.abs() > 2.0 * m as f64 {
        let ik = C64::new(0.0, kappa);
        let (ep, em) = (C64::from_polar(1.0, kappa), C64::from_polar(1.0, -kappa));
        mu[0] = (ep - em) / ik;
        for k in 1..m {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            mu[k] = (ep - em * sign) / ik - mu[k - 1] * (k as f64) / ik;
        }
    } else {
        for (k, slot) in mu.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..200 {
                if (k + j) % 2 == 0 {
                    acc += term * (2.0 / (k + j + 1) as f64);
                }
                term *= C64::new(0.0, kappa) / (j + 1) as f64;
                if term.norm() < 1e-18 && j > 4 {
                    break;
                }
            }
            *slot = acc;
        }
    }
    mu
}

/// Filon–Chebyshev rule of order m: weights w_j with
/// ∫_{−1}^{1} B(v) e^{iκv} dv ≈ Σ w_j B(v_j), v_j Chebyshev nodes.
pub struct FilonRule {
    pub nodes: Vec<f64>,
}

impl FilonRule {
    pub fn new(m: usize) -> Self {
        let nodes = (0..m).map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos()).collect();
        FilonRule { nodes }
    }

    pub fn weights(&self, kappa: f64) -> Vec<C64> {
        let m = self.nodes.len();
        let mu = moments(kappa, m);
        // Solve Vᵀ w = μ with V_{jk} = v_j^k by Gaussian elimination.
        let mut a = vec![vec![C64::new(0.0, 0.0); m + 1]; m];
        for k in 0..m {
            for j in 0..m {
                a[k][j] = C64::new(self.nodes[j].powi(k as i32), 0.0);
            }
            a[k][m] = mu[k];
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&x, &y| a[x][col].norm().partial_cmp(&a[y][col].norm()).unwrap()).unwrap();
            a.swap(col, piv);
            for row in 0..m {
                if row != col {
                    let factor = a[row][col] / a[col][col];
                    for c in col..=m {
                        let t = a[col][c];
                        a[row][c] -= factor * t;
                    }
                }
            }
        }
        (0..m).map(|j| a[j][m] / a[j][j]).collect()
    }

    /// ∫_{c−h}^{c+h} B(u) e^{iω(u−c)} du.
    pub fn panel<F: Fn(f64) -> C64>(&self, b: F, c: f64, h: f64, omega: f64) -> C64 {
        let w = self.weights(omega * h);
        self.nodes.iter().zip(w).map(|(v, w)| b(c + h * v) * w).sum::<C64>() * h
    }
}

/// E₁(z) for Re z ≥ 0, z ≠ 0.
pub fn e1(z: C64) -> C64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if z.norm() < 2.0 {
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 1..200 {
            term *= -z / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        -EULER - z.ln() + sum
    } else {
        // modified Lentz on the continued fraction e^{−z}/(z+1−1/(z+3−4/(z+5−…)))
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = C64::new(1.0 / tiny, 0.0);
        let mut d = C64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = C64::new(1.0, 0.0) / (d * an + b);
            c = b + C64::new(an, 0.0) / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// T_k = ∫_R^∞ e^{−ixη} η^{−k} dη for k = 1..=kmax, R > 0.
pub fn power_tails(x: f64, r: f64, kmax: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(kmax);
    let ph = C64::from_polar(1.0, -x * r);
    if x == 0.0 {
        out.push(C64::new(f64::INFINITY, 0.0));
        for k in 2..=kmax {
            out.push(C64::new(r.powi(1 - k as i32) / (k as f64 - 1.0), 0.0));
        }
        return out;
    }
    let t1 = if x > 0.0 { e1(C64::new(0.0, x * r)) } else { e1(C64::new(0.0, -x * r)).conj() };
    out.push(t1);
    for k in 2..=kmax {
        let km = k as f64 - 1.0;
        let prev = out[k - 2];
        out.push(ph * r.powi(1 - k as i32) / km - C64::new(0.0, x / km) * prev);
    }
    out
}
