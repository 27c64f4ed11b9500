//! One-dimensional kernels: K_σ (closed form and quadrature of its
//! defining integral), K_s, K_(s,t) and the damped Fresnel tail.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{adaptive_from, power_tails, FilonRule, QuadError};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("σ = 0 is not allowed")]
    SigmaZero,
    #[error("s must be nonzero")]
    ZeroS,
    #[error("K_(s,t) needs st > 0, got s={s}, t={t}")]
    MixedSigns { s: f64, t: f64 },
    #[error("tolerance must be positive")]
    Tolerance,
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// Which branch of the closed form produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaCase {
    Sin,
    Sinh,
    NegLeft,
    NegRight,
    QuarterLimit,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub param: Vec<f64>,
    pub arg: f64,
    pub value: C64,
    pub method: Method,
    pub err_est: f64,
    pub case: Option<SigmaCase>,
}

/// Closed form of K_σ(x) = (1/2π)∫ e^{−ixη}/(σ − η² + iη) dη.
///
/// For σ < 0, x > 0 the value is −(1/a)e^{−(a−1)x/2}: the residue at the
/// lower root gives a minus sign, and it is the only choice continuous at
/// x = 0, where the left branch equals −1/a.
pub fn eval_k_sigma(sigma: f64, x: f64) -> Result<KernelSample, KernelError> {
    if sigma == 0.0 {
        return Err(KernelError::SigmaZero);
    }
    let a = (4.0 * sigma - 1.0).abs().sqrt();
    let (value, case) = if sigma == 0.25 {
        if x < 0.0 {
            (-x * (x / 2.0).exp(), SigmaCase::QuarterLimit)
        } else {
            (0.0, SigmaCase::Zero)
        }
    } else if sigma > 0.25 {
        if x < 0.0 {
            (-2.0 * (x / 2.0).exp() * (a * x / 2.0).sin() / a, SigmaCase::Sin)
        } else {
            (0.0, SigmaCase::Zero)
        }
    } else if sigma > 0.0 {
        if x < 0.0 {
            (-2.0 * (x / 2.0).exp() * (a * x / 2.0).sinh() / a, SigmaCase::Sinh)
        } else {
            (0.0, SigmaCase::Zero)
        }
    } else if x < 0.0 {
        (-((1.0 + a) * x / 2.0).exp() / a, SigmaCase::NegLeft)
    } else {
        (-(-(a - 1.0) * x / 2.0).exp() / a, SigmaCase::NegRight)
    };
    Ok(KernelSample {
        param: vec![sigma],
        arg: x,
        value: C64::new(value, 0.0),
        method: Method::ClosedForm,
        err_est: 0.0,
        case: Some(case),
    })
}

/// Quadrature of the defining integral of K_σ. The finite part [−R, R]
/// is adaptive Gauss–Kronrod; beyond R the integrand is replaced by
/// −η⁻² − iη⁻³ − (σ−1)η⁻⁴ whose oscillatory tails are exact exponential
/// integrals. The neglected O(η⁻⁵) remainder is added to the error.
pub fn eval_k_sigma_quadrature(sigma: f64, x: f64, tol: f64) -> Result<KernelSample, KernelError> {
    if sigma == 0.0 {
        return Err(KernelError::SigmaZero);
    }
    if tol <= 0.0 {
        return Err(KernelError::Tolerance);
    }
    let h = |eta: f64| C64::new(1.0, 0.0) / C64::new(sigma - eta * eta, eta);
    let r = 200.0_f64.max(40.0 * sigma.abs().sqrt());
    let width = 0.25_f64.min(1.0 / x.abs().max(1e-9));
    let panels = (2.0 * r / width).ceil() as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| -r + 2.0 * r * i as f64 / panels as f64).collect();
    let f = |eta: f64| h(eta) * C64::from_polar(1.0, -x * eta);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mid, mid_err) = adaptive_from(&f, &breaks, 0.25 * tol * two_pi, 50 * panels + 1000)?;
    let t = power_tails(x, r, 4);
    let c = [C64::new(-1.0, 0.0), C64::new(0.0, -1.0), C64::new(1.0 - sigma, 0.0)];
    let tail: C64 = c.iter().zip(&t[1..]).map(|(c, t)| c * t).sum();
    let asym = |e: f64| c[0] / (e * e) + c[1] / (e * e * e) + c[2] / (e * e * e * e);
    let remainder = 2.0 * (h(r) - asym(r)).norm() * r / 4.0;
    let value = (mid + C64::new(2.0 * tail.re, 0.0)) / two_pi;
    Ok(KernelSample {
        param: vec![sigma],
        arg: x,
        value,
        method: Method::Quadrature,
        err_est: (mid_err + remainder) / two_pi,
        case: None,
    })
}

/// J(α, β; U) = ∫_0^U e^{−u} e^{i(αu + βu²)} du by Filon panels.
/// Returns (value, error estimate from two interpolation orders).
fn damped_fresnel(alpha: f64, beta: f64, upper: f64) -> (C64, f64) {
    if upper <= 0.0 {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let width = 1.0_f64.min(0.5 / beta.abs().sqrt());
    let panels = (upper / width).ceil() as usize;
    let hh = 0.5 * upper / panels as f64;
    let lo = FilonRule::new(10);
    let hi = FilonRule::new(14);
    let mut acc = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for p in 0..panels {
        let c = (2 * p + 1) as f64 * hh;
        let omega = alpha + 2.0 * beta * c;
        let amp = |u: f64| C64::from_polar((-u).exp(), beta * (u - c) * (u - c));
        let phase = C64::from_polar(1.0, alpha * c + beta * c * c);
        let v_lo = lo.panel(amp, c, hh, omega);
        let v_hi = hi.panel(amp, c, hh, omega);
        acc += phase * v_hi;
        err += (v_hi - v_lo).norm();
    }
    (acc, err)
}

/// ∫_{bη<0} e^{iyη + iaη² + bη} dη, truncated where e^{bη} < tol/10
/// relative to the 1/|b| scale. Empty truncation windows give 0.
pub fn damped_chirp(y: f64, a: f64, b: f64, tol: f64) -> Result<(C64, f64), KernelError> {
    if b == 0.0 {
        return Err(KernelError::ZeroS);
    }
    if tol <= 0.0 {
        return Err(KernelError::Tolerance);
    }
    let upper = (10.0 / (tol * b.abs())).ln();
    let alpha = -b.signum() * y / b.abs();
    let beta = a / (b * b);
    let (j, e) = damped_fresnel(alpha, beta, upper);
    Ok((j / b.abs(), (e + (-upper.max(0.0)).exp()) / b.abs()))
}

/// K_s(y) = ∫ e^{iyη} e^{isη²} 1(sη < 0) e^{sη} dη.
pub fn eval_k_s(s: f64, y: f64, tol: f64) -> Result<KernelSample, KernelError> {
    if s == 0.0 {
        return Err(KernelError::ZeroS);
    }
    let (value, err_est) = damped_chirp(y, s, s, tol)?;
    Ok(KernelSample { param: vec![s], arg: y, value, method: Method::Quadrature, err_est, case: None })
}

/// K_(s,t)(y) = ∫ e^{iyη} e^{i(s−t)η²} 1((s+t)η < 0) e^{(s+t)η} dη, st > 0.
pub fn eval_k_st(s: f64, t: f64, y: f64, tol: f64) -> Result<KernelSample, KernelError> {
    if s * t <= 0.0 {
        return Err(KernelError::MixedSigns { s, t });
    }
    let (value, err_est) = damped_chirp(y, s - t, s + t, tol)?;
    Ok(KernelSample { param: vec![s, t], arg: y, value, method: Method::Quadrature, err_est, case: None })
}

/// ∫_{−∞}^{y} e^{iξ²/s} e^{ξ} dξ.
pub fn oscillatory_tail(y: f64, s: f64, tol: f64) -> Result<(C64, f64), KernelError> {
    if s == 0.0 {
        return Err(KernelError::ZeroS);
    }
    if tol <= 0.0 {
        return Err(KernelError::Tolerance);
    }
    // ξ = y − u
    let upper = (10.0 * y.exp() / tol).ln();
    let (j, e) = damped_fresnel(-2.0 * y / s, 1.0 / s, upper);
    let pre = C64::from_polar(y.exp(), y * y / s);
    Ok((pre * j, y.exp() * (e + (-upper.max(0.0)).exp())))
}

/// Least-squares constant C in |v| ≈ C·w over samples, on log scale.
pub fn fit_constant(values: &[f64], weights: &[f64]) -> f64 {
    let logs: Vec<f64> = values.iter().zip(weights).filter(|(v, _)| **v > 0.0).map(|(v, w)| (v / w).ln()).collect();
    if logs.is_empty() {
        return 0.0;
    }
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}
