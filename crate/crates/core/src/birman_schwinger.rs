//! Potentials, the factor W = V/|V|^{1/2}, the sandwiched operator
//! M_{W₁}∘S_ν∘M_{W₂}, its L² norm by power iteration, and the W♯/W♭
//! splitting behind the decay in |ν|.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Exponent, Field, GridError, GridSpec};
use crate::multipliers::{MultiplierError, MultiplierPlan};
use crate::report::{data_hash, Check, EstimateReport, Record};
use crate::symbols::{potential_pair_check, NuVector};

pub const MAX_POWER_ITERATIONS: usize = 200;

/// Relative disagreement between the two power-iteration starts above
/// which a norm estimate is flagged.
pub const START_AGREEMENT: f64 = 0.02;

#[derive(Debug, Error, PartialEq)]
pub enum BsError {
    #[error("(a, b) = ({a}, {b}) is not an admissible potential pair for n = {n}: {reason}")]
    Pair { a: Exponent, b: Exponent, n: usize, reason: String },
    #[error("potential has mass outside its time window [{0}, {1}]")]
    Window(f64, f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("empty ν list")]
    EmptySweep,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
}

/// Sampled V(t, x) with its support radius and exponent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub v: Field,
    pub radius: f64,
    pub a: Exponent,
    pub b: Exponent,
    /// Time window [S, T] holding the support.
    pub window: (f64, f64),
}

impl Potential {
    pub fn new(v: Field, radius: f64, a: Exponent, b: Exponent, window: (f64, f64)) -> Result<Self, BsError> {
        let n = v.spec.n;
        let check = potential_pair_check(a, b, n);
        if !check.admissible {
            return Err(BsError::Pair { a, b, n, reason: check.reason });
        }
        if radius <= 0.0 {
            return Err(BsError::NonPositive("radius"));
        }
        let m = v.spec.space_len();
        for k in 0..v.spec.pts_time {
            let t = v.spec.t(k);
            if (t < window.0 || t > window.1) && v.data[k * m..(k + 1) * m].iter().any(|z| z.norm() > 0.0) {
                return Err(BsError::Window(window.0, window.1));
            }
        }
        Ok(Potential { v, radius, a, b, window })
    }

    /// ‖V‖_{L^a L^b}.
    pub fn ab_norm(&self) -> f64 {
        self.v.mixed_norm(self.a, self.b).unwrap_or(f64::NAN)
    }

    /// sup over axes of Σ_s ‖1_{>R}V‖_{L^∞(ℝ×H_s)} Δs.
    pub fn decay_diagnostic(&self) -> f64 {
        let outside = outside_ball(&self.v, self.radius);
        (0..self.v.spec.n).map(|a| line_sup_integral(&outside, a)).fold(0.0, f64::max)
    }

    /// Stable identifier of the sampled data.
    pub fn hash(&self) -> String {
        data_hash(&self.v.data)
    }
}

/// sin² bump on [S, T], zero outside.
pub fn time_bump(t: f64, window: (f64, f64)) -> f64 {
    let (s, e) = window;
    if t <= s || t >= e {
        0.0
    } else {
        (std::f64::consts::PI * (t - s) / (e - s)).sin().powi(2)
    }
}

/// amp·bump(t)·e^{−|x|²/w²}.
pub fn gaussian_potential(spec: GridSpec, amp: f64, width: f64, window: (f64, f64)) -> Field {
    Field::from_fn(spec, |t, x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        C64::new(amp * time_bump(t, window) * (-r2 / (width * width)).exp(), 0.0)
    })
}

/// amp·bump(t)·|x|^{−α}e^{−|x|²}; the origin sample is the cell average of
/// |x|^{−α} (finite for α < n).
pub fn cusp_potential(spec: GridSpec, amp: f64, alpha: f64, window: (f64, f64)) -> Field {
    let n = spec.n;
    let h = spec.dx() / 2.0;
    // cell average of |x|^{−α} over [−h, h]ⁿ by a midpoint sum on a fine
    // sub-lattice, accurate to well under a percent for α ≤ 1
    let sub = 64usize;
    let mut acc = 0.0;
    let total = sub.pow(n as u32);
    for i in 0..total {
        let mut r2 = 0.0;
        let mut rem = i;
        for _ in 0..n {
            let c = -h + (rem % sub) as f64 * 2.0 * h / sub as f64 + h / sub as f64;
            r2 += c * c;
            rem /= sub;
        }
        acc += r2.sqrt().powf(-alpha);
    }
    let origin = acc / total as f64;
    Field::from_fn(spec, move |t, x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let core = if r2 < 1e-24 { origin } else { r2.sqrt().powf(-alpha) };
        C64::new(amp * time_bump(t, window) * core * (-r2).exp(), 0.0)
    })
}

fn outside_ball(f: &Field, radius: f64) -> Field {
    let sp = f.spec;
    let m = sp.space_len();
    let mut out = f.clone();
    for j in 0..m {
        let p = sp.point(j);
        let r2: f64 = p[..sp.n].iter().map(|v| v * v).sum();
        if r2 <= radius * radius {
            for k in 0..sp.pts_time {
                out.data[k * m + j] = C64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// Per-plane maxima of |f| over ℝ × H_s for planes perpendicular to `axis`.
pub fn line_sups(f: &Field, axis: usize) -> Vec<f64> {
    let sp = f.spec;
    let m = sp.space_len();
    let mut sup = vec![0.0f64; sp.pts_space];
    for (i, z) in f.data.iter().enumerate() {
        let k = sp.space_index(i % m)[axis];
        sup[k] = sup[k].max(z.norm());
    }
    sup
}

/// Σ_s ‖f‖_{L^∞(ℝ×H_s)} Δs along `axis`.
pub fn line_sup_integral(f: &Field, axis: usize) -> f64 {
    line_sups(f, axis).iter().sum::<f64>() * f.spec.dx()
}

/// W = V/|V|^{1/2}, zero where V vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorW {
    pub w: Field,
}

impl FactorW {
    /// |W| as a factor of its own.
    pub fn modulus(&self) -> FactorW {
        FactorW { w: self.w.map(|z| C64::new(z.norm(), 0.0)) }
    }

    pub fn conj(&self) -> FactorW {
        FactorW { w: self.w.map(|z| z.conj()) }
    }

    /// x ↦ −x.
    pub fn reflect(&self) -> FactorW {
        FactorW { w: self.w.reflect_space() }
    }

    /// |W|² as a field.
    pub fn square_modulus(&self) -> Field {
        self.w.map(|z| C64::new(z.norm_sqr(), 0.0))
    }
}

pub fn build_w(v: &Field) -> FactorW {
    FactorW {
        w: v.map(|z| {
            let m = z.norm();
            if m == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                z / m.sqrt()
            }
        }),
    }
}

/// A = M_{W₁}∘S_ν∘M_{W₂} on one lattice.
#[derive(Debug, Clone)]
pub struct BsOperator {
    pub w1: FactorW,
    pub w2: FactorW,
    pub plan: MultiplierPlan,
}

impl BsOperator {
    pub fn new(w1: FactorW, w2: FactorW, nu: &NuVector) -> Result<Self, BsError> {
        if !w1.w.spec.same_lattice(&w2.w.spec) {
            return Err(GridError::GridMismatch.into());
        }
        let plan = MultiplierPlan::conjugated(w1.w.spec, nu)?;
        Ok(BsOperator { w1, w2, plan })
    }

    pub fn apply(&self, v: &Field) -> Result<Field, BsError> {
        let u = self.plan.apply_inverse(&self.w2.w.mul(v))?;
        Ok(self.w1.w.mul(&u))
    }

    /// A* = M_{W̄₂}∘S_ν*∘M_{W̄₁}.
    pub fn apply_adjoint(&self, v: &Field) -> Result<Field, BsError> {
        let floor = self.plan.floor;
        let g = self.w1.w.map(|z| z.conj()).mul(v);
        let u = self.plan.apply_with(&g, |tau, xi| {
            let p = self.plan.symbol(tau, xi);
            if p.norm() < floor {
                C64::new(0.0, 0.0)
            } else {
                p.inv().conj()
            }
        })?;
        Ok(self.w2.w.map(|z| z.conj()).mul(&u))
    }
}

/// apply_BS(v) = W₁·S_ν(W₂·v).
pub fn apply_bs(v: &Field, w1: &FactorW, w2: &FactorW, nu: &NuVector) -> Result<Field, BsError> {
    BsOperator::new(w1.clone(), w2.clone(), nu)?.apply(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNorm {
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Estimate from the second, independent start.
    pub second: f64,
    /// The two starts agree within START_AGREEMENT.
    pub agree: bool,
}

/// √(top eigenvalue of A*A) by power iteration from one seeded start.
pub fn power_iteration(op: &BsOperator, tol: f64, seed: u64) -> Result<(f64, usize, bool), BsError> {
    let spec = op.w1.w.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<C64> = (0..spec.len())
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut x = Field::from_data(spec, crate::grid::Rep::Physical, data)?;
    let mut prev = 0.0;
    for it in 1..=MAX_POWER_ITERATIONS {
        let nx = x.l2_samples();
        if nx == 0.0 {
            return Ok((0.0, it, true));
        }
        x.scale(C64::new(1.0 / nx, 0.0));
        let ax = op.apply(&x)?;
        let lambda = ax.l2_samples().powi(2);
        if lambda == 0.0 {
            return Ok((0.0, it, true));
        }
        if it > 3 && (lambda - prev).abs() <= tol * lambda {
            return Ok((lambda.sqrt(), it, true));
        }
        prev = lambda;
        x = op.apply_adjoint(&ax)?;
    }
    Ok((prev.sqrt(), MAX_POWER_ITERATIONS, false))
}

/// L² operator norm of M_{W₁}∘S_ν∘M_{W₂} from two independent starts.
pub fn op_norm(w1: &FactorW, w2: &FactorW, nu: &NuVector, tol: f64, seed: u64) -> Result<OpNorm, BsError> {
    if tol <= 0.0 {
        return Err(BsError::NonPositive("tol"));
    }
    let op = BsOperator::new(w1.clone(), w2.clone(), nu)?;
    let (a, it, conv) = power_iteration(&op, tol, seed)?;
    let (b, _, _) = power_iteration(&op, tol, seed.wrapping_add(0x5151))?;
    let agree = a == b || (a - b).abs() <= START_AGREEMENT * a.max(b);
    Ok(OpNorm { estimate: a.max(b), iterations: it, converged: conv, second: b, agree })
}

/// W♯ = 1_{≤R}1_{|W|≤λ}W + 1_{>R}W and W♭ = W − W♯, with |x| ≤ R the ball.
pub fn split_w(w: &FactorW, lambda: f64, radius: f64) -> (FactorW, FactorW) {
    let sp = w.w.spec;
    let m = sp.space_len();
    let mut sharp = w.w.clone();
    let mut flat = Field::zeros(sp);
    for (i, z) in w.w.data.iter().enumerate() {
        let p = sp.point(i % m);
        let r2: f64 = p[..sp.n].iter().map(|v| v * v).sum();
        if r2 <= radius * radius && z.norm() > lambda {
            sharp.data[i] = C64::new(0.0, 0.0);
            flat.data[i] = *z;
        }
    }
    (FactorW { w: sharp }, FactorW { w: flat })
}

/// Both sides of (∫‖|W♯|²‖_{L^∞(H_s)} ds)^{1/2} ≤ λ(2R)^{1/2} + (∫‖1_{>R}|W|²‖ ds)^{1/2}
/// along `axis`. On the lattice 2R is replaced by the measure of the planes
/// meeting [−R, R].
pub fn sharp_line_bound(w: &FactorW, lambda: f64, radius: f64, axis: usize) -> (f64, f64) {
    let (sharp, _) = split_w(w, lambda, radius);
    let sp = w.w.spec;
    let lhs = line_sup_integral(&sharp.square_modulus(), axis).sqrt();
    let planes = (0..sp.pts_space).filter(|&k| sp.x(k).abs() <= radius).count() as f64 * sp.dx();
    let tail = line_sup_integral(&outside_ball(&w.square_modulus(), radius), axis).sqrt();
    (lhs, lambda * planes.sqrt() + tail)
}

/// Endpoint splitting with W replaced inside the ball by its values at the
/// right ends of `m` equal time cells over `window`. Returns (W♯, W♭, ε)
/// with ε = sup_t ‖1_{≤R}(W − piecewise W)‖_{Lⁿ}.
pub fn piecewise_split(
    w: &FactorW,
    lambda: f64,
    radius: f64,
    window: (f64, f64),
    m: usize,
) -> (FactorW, FactorW, f64) {
    let sp = w.w.spec;
    let ms = sp.space_len();
    let cells = m.max(1);
    let h = (window.1 - window.0) / cells as f64;
    let inside: Vec<bool> = (0..ms)
        .map(|j| sp.point(j)[..sp.n].iter().map(|v| v * v).sum::<f64>() <= radius * radius)
        .collect();
    let mut sharp = w.w.clone();
    let mut eps: f64 = 0.0;
    let nexp = sp.n as f64;
    for k in 0..sp.pts_time {
        let t = sp.t(k);
        let frozen = if t > window.0 && t <= window.1 {
            let c = (((t - window.0) / h).ceil() as usize).clamp(1, cells);
            Some(sp.t_index(window.0 + c as f64 * h))
        } else {
            None
        };
        let mut err = 0.0;
        for j in 0..ms {
            if !inside[j] {
                continue;
            }
            let pw = frozen.map(|kk| w.w.data[kk * ms + j]).unwrap_or(C64::new(0.0, 0.0));
            err += (w.w.data[k * ms + j] - pw).norm().powf(nexp);
            sharp.data[k * ms + j] = if pw.norm() <= lambda { pw } else { C64::new(0.0, 0.0) };
        }
        eps = eps.max((err * sp.space_cell()).powf(1.0 / nexp));
    }
    let flat = FactorW { w: w.w.sub(&sharp.clone()) };
    (FactorW { w: sharp }, flat, eps)
}

/// Smallest power-of-two partition with piecewise error at most `eps`.
pub fn partition_for(w: &FactorW, radius: f64, window: (f64, f64), eps: f64, max_cells: usize) -> Option<usize> {
    let mut m = 1;
    while m <= max_cells {
        if piecewise_split(w, f64::INFINITY, radius, window, m).2 <= eps {
            return Some(m);
        }
        m *= 2;
    }
    None
}

/// Norms of W S_ν |W| over a ν list with λ² = |ν|^{1/2}; the check is
/// last ≤ first/2.
pub fn bs_decay_sweep(pot: &Potential, nus: &[f64], tol: f64, seed: u64) -> Result<EstimateReport, BsError> {
    let mut rep = EstimateReport::new("bs-decay");
    rep.grids.push(pot.v.spec);
    rep.param("nu", nus.to_vec());
    rep.param("tol", tol);
    rep.param("seed", seed);
    rep.param("radius", pot.radius);
    rep.param("a", pot.a.to_string());
    rep.param("b", pot.b.to_string());
    rep.param("potential_hash", pot.hash());
    let w = build_w(&pot.v);
    let wm = w.modulus();
    let n = pot.v.spec.n;
    let mut norms = Vec::new();
    for &m in nus {
        let nu = NuVector::along_last(n, m).map_err(|_| BsError::NonPositive("nu"))?;
        let est = op_norm(&w, &wm, &nu, tol, seed)?;
        let lambda = m.powf(0.25);
        let (_, flat) = split_w(&w, lambda, pot.radius);
        let flat_norm = flat.square_modulus().mixed_norm(pot.a, pot.b)?.sqrt();
        norms.push(est.estimate);
        rep.records.push(
            Record::new(format!("nu={m}"), Some(seed))
                .with("nu", m)
                .with("lambda", lambda)
                .with("norm_estimate", est.estimate)
                .with("iterations", est.iterations as u64)
                .with("converged", est.converged)
                .with("starts_agree", est.agree)
                .with("flat_ab_norm", flat_norm),
        );
    }
    rep.note("decay_diagnostic", pot.decay_diagnostic());
    rep.note("ab_norm", pot.ab_norm());
    if let (Some(first), Some(last)) = (norms.first(), norms.last()) {
        if norms.len() > 1 {
            rep.check(Check::at_most("last/first", last / first, 0.5));
        }
    }
    rep.finish();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn window() -> (f64, f64) {
        (-1.5, 1.5)
    }

    fn spec2(nt: usize, nx: usize) -> GridSpec {
        GridSpec::new(2, 2.0, 4.0, nt, nx).unwrap()
    }

    fn gauss_w(spec: GridSpec) -> FactorW {
        build_w(&gaussian_potential(spec, -3.0, 1.0, window()))
    }

    #[test]
    fn factorization_is_exact() {
        let spec = spec2(16, 16);
        let v = Field::from_fn(spec, |t, x| C64::new(time_bump(t, window()) * (x[0] - x[1]), 0.5 * x[0] * t));
        let w = build_w(&v);
        let back = w.w.map(|z| z * z.norm());
        assert!(back.sub(&v).max_abs() <= 1e-12 * v.max_abs());
        let ab = (Exponent::int(2), Exponent::int(2));
        let lhs = w.square_modulus().mixed_norm(ab.0, ab.1).unwrap();
        let rhs = v.map(|z| C64::new(z.norm(), 0.0)).mixed_norm(ab.0, ab.1).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        assert_eq!(build_w(&Field::zeros(spec)).w.max_abs(), 0.0);
        let c = build_w(&Field::from_fn(spec, |_, _| C64::new(-4.0, 0.0)));
        assert!(c.w.data.iter().all(|z| (z - C64::new(-2.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn w_time_modulus_bound() {
        // ‖W(t)−W(s)‖_{Lⁿ} ≤ 3‖V(t)−V(s)‖_{L^{n/2}}^{1/2}
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=3 {
            let spec = GridSpec::new(n, 2.0, 3.0, 8, 8).unwrap();
            let data: Vec<C64> =
                (0..spec.len()).map(|_| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
            let v = Field::from_data(spec, crate::grid::Rep::Physical, data).unwrap();
            let w = build_w(&v);
            let ms = spec.space_len();
            let nf = n as f64;
            for k in 0..spec.pts_time {
                for l in 0..spec.pts_time {
                    let dw: f64 = (0..ms).map(|j| (w.w.data[k * ms + j] - w.w.data[l * ms + j]).norm().powf(nf)).sum();
                    let dv: f64 =
                        (0..ms).map(|j| (v.data[k * ms + j] - v.data[l * ms + j]).norm().powf(nf / 2.0)).sum();
                    let lhs = (dw * spec.space_cell()).powf(1.0 / nf);
                    let rhs = 3.0 * (dv * spec.space_cell()).powf(2.0 / nf).sqrt();
                    assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn potential_validation() {
        let spec = spec2(16, 16);
        let v = gaussian_potential(spec, 1.0, 1.0, window());
        assert!(Potential::new(v.clone(), 2.0, Exponent::int(2), Exponent::int(2), window()).is_ok());
        assert!(matches!(
            Potential::new(v.clone(), 2.0, Exponent::INF, Exponent::int(1), window()),
            Err(BsError::Pair { .. })
        ));
        assert_eq!(
            Potential::new(v, 2.0, Exponent::int(2), Exponent::int(2), (-0.5, 0.5)),
            Err(BsError::Window(-0.5, 0.5))
        );
    }

    #[test]
    fn zero_weights_give_zero() {
        let spec = spec2(8, 8);
        let z = FactorW { w: Field::zeros(spec) };
        let nu = NuVector::along_last(2, 4.0).unwrap();
        assert_eq!(op_norm(&z, &z, &nu, 1e-6, 1).unwrap().estimate, 0.0);
        let v = Field::from_fn(spec, |t, x| C64::new(t + x[0], x[1]));
        assert_eq!(apply_bs(&v, &z, &gauss_w(spec), &nu).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn constant_weights_act_diagonally() {
        let spec = spec2(8, 8);
        let nu = NuVector::along_last(2, 3.0).unwrap();
        let plan = MultiplierPlan::conjugated(spec, &nu).unwrap();
        let (tau, xi) = (plan.tau(1), plan.xi(spec.space_flat(&[2, 3])));
        let v = Field::from_fn(spec, |t, x| C64::from_polar(1.0, tau * t + xi[0] * x[0] + xi[1] * x[1]));
        let w1 = FactorW { w: Field::from_fn(spec, |_, _| C64::new(0.0, 2.0)) };
        let w2 = FactorW { w: Field::from_fn(spec, |_, _| C64::new(1.5, 0.0)) };
        let got = apply_bs(&v, &w1, &w2, &nu).unwrap();
        let mut want = v.clone();
        want.scale(C64::new(0.0, 3.0) / plan.symbol(tau, &xi));
        assert!(got.sub(&want).l2() < 1e-12 * want.l2());
    }

    type Mat = DMatrix<nalgebra::Complex<f64>>;

    fn nc(z: C64) -> nalgebra::Complex<f64> {
        nalgebra::Complex::new(z.re, z.im)
    }

    /// diag(W₁)·Φ·diag(1/p_ν)·Φ*·diag(W₂) with Φ the orthonormal plane waves
    /// e^{i(τt + ξ·x)} of the twisted lattice, built entry by entry.
    fn dense(op: &BsOperator) -> Mat {
        let spec = op.w1.w.spec;
        let (nt, ms) = (spec.pts_time, spec.space_len());
        let n = spec.len();
        let norm = 1.0 / (n as f64).sqrt();
        let mut phi = Mat::zeros(n, n);
        let mut inv = vec![nalgebra::Complex::new(0.0, 0.0); n];
        for kt in 0..nt {
            for js in 0..ms {
                let tau = op.plan.tau(kt);
                let xi = op.plan.xi(js);
                let col = kt * ms + js;
                let p = op.plan.symbol(tau, &xi);
                if p.norm() >= op.plan.floor {
                    inv[col] = nc(p.inv());
                }
                for k in 0..nt {
                    for j in 0..ms {
                        let x = spec.point(j);
                        let ph = tau * spec.t(k) + (0..spec.n).map(|a| xi[a] * x[a]).sum::<f64>();
                        phi[(k * ms + j, col)] = nc(C64::from_polar(norm, ph));
                    }
                }
            }
        }
        let d = |f: &Field| Mat::from_diagonal(&nalgebra::DVector::from_iterator(n, f.data.iter().map(|z| nc(*z))));
        d(&op.w1.w) * &phi * Mat::from_diagonal(&nalgebra::DVector::from_vec(inv)) * phi.adjoint() * d(&op.w2.w)
    }

    #[test]
    fn apply_matches_dense_composition() {
        let spec = spec2(8, 8);
        let w = gauss_w(spec);
        let nu = NuVector::along_last(2, 2.0).unwrap();
        let op = BsOperator::new(w.clone(), w.modulus(), &nu).unwrap();
        let mat = dense(&op);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<C64> =
            (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let v = Field::from_data(spec, crate::grid::Rep::Physical, data).unwrap();
        let y = &mat * nalgebra::DVector::from_iterator(spec.len(), v.data.iter().map(|z| nc(*z)));
        let got = op.apply(&v).unwrap();
        let err: f64 = got.data.iter().zip(y.iter()).map(|(a, b)| (a.re - b.re).powi(2) + (a.im - b.im).powi(2)).sum();
        assert!(err.sqrt() <= 1e-10 * got.l2_samples(), "{}", err.sqrt());
    }

    #[test]
    fn adjoint_is_the_conjugate_transpose() {
        let spec = spec2(8, 8);
        let w = gauss_w(spec);
        let nu = NuVector::along_last(2, 5.0).unwrap();
        let op = BsOperator::new(w.clone(), w.modulus(), &nu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rand_field = || {
            let d: Vec<C64> = (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            Field::from_data(spec, crate::grid::Rep::Physical, d).unwrap()
        };
        let (x, y) = (rand_field(), rand_field());
        let lhs = op.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&op.apply_adjoint(&y).unwrap());
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1e-3));
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        for (spec, m) in [(GridSpec::new(1, 2.0, 4.0, 16, 16).unwrap(), 3.0), (GridSpec::new(2, 2.0, 4.0, 8, 8).unwrap(), 2.0)] {
            let w = build_w(&gaussian_potential(spec, -3.0, 1.0, window()));
            let nu = NuVector::along_last(spec.n, m).unwrap();
            let op = BsOperator::new(w.clone(), w.modulus(), &nu).unwrap();
            let top = dense(&op).singular_values().max();
            let est = op_norm(&w, &w.modulus(), &nu, 1e-10, 11).unwrap();
            assert!(est.agree);
            assert!((est.estimate / top - 1.0).abs() < 0.01, "{} vs {top}", est.estimate);
        }
    }

    #[test]
    fn norm_dominates_rayleigh_quotients_and_matches_adjoint_configuration() {
        let spec = spec2(16, 16);
        let w = gauss_w(spec);
        let nu = NuVector::along_last(2, 4.0).unwrap();
        let est = op_norm(&w, &w.modulus(), &nu, 1e-9, 2).unwrap();
        let op = BsOperator::new(w.clone(), w.modulus(), &nu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let d: Vec<C64> = (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let v = Field::from_data(spec, crate::grid::Rep::Physical, d).unwrap();
            assert!(op.apply(&v).unwrap().l2() <= est.estimate * v.l2() * (1.0 + 1e-9));
        }
        // A* = R M_{R W̄₂} S_ν M_{R W̄₁} R
        let adj = op_norm(&w.modulus().conj().reflect(), &w.conj().reflect(), &nu, 1e-9, 2).unwrap();
        assert!((adj.estimate / est.estimate - 1.0).abs() < 1e-3);
    }

    #[test]
    fn split_extremes_and_line_bound() {
        let spec = spec2(16, 32);
        let w = gauss_w(spec);
        let (sharp, flat) = split_w(&w, f64::INFINITY, 1.0);
        assert_eq!(flat.w.max_abs(), 0.0);
        assert_eq!(sharp.w, w.w);
        let (sharp, _) = split_w(&w, 0.0, 1.0);
        assert_eq!(sharp.w, outside_ball(&w.w, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let d: Vec<C64> = (0..spec.len()).map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect();
            let w = FactorW { w: Field::from_data(spec, crate::grid::Rep::Physical, d).unwrap() };
            let lambda = rng.gen_range(0.1..3.0);
            let radius = rng.gen_range(0.5..3.0);
            for axis in 0..2 {
                let (lhs, rhs) = sharp_line_bound(&w, lambda, radius, axis);
                assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
            }
            let (s, f) = split_w(&w, lambda, radius);
            let mut sum = s.w.clone();
            sum.add_assign(&f.w);
            assert_eq!(sum, w.w);
        }
    }

    #[test]
    fn piecewise_split_refines() {
        let spec = GridSpec::new(3, 2.0, 3.0, 32, 8).unwrap();
        let w = build_w(&gaussian_potential(spec, 2.0, 1.0, window()));
        let e4 = piecewise_split(&w, f64::INFINITY, 2.0, window(), 4).2;
        let e16 = piecewise_split(&w, f64::INFINITY, 2.0, window(), 16).2;
        assert!(e16 < e4, "{e16} {e4}");
        let m = partition_for(&w, 2.0, window(), e4, 64).unwrap();
        assert!(m <= 4);
        let (s, f, _) = piecewise_split(&w, 0.5, 2.0, window(), 8);
        let mut sum = s.w.clone();
        sum.add_assign(&f.w);
        assert!(sum.sub(&w.w).max_abs() < 1e-14);
    }

    #[test]
    fn decay_sweep_reports() {
        let spec = GridSpec::new(2, 2.0, 4.0, 16, 16).unwrap();
        let v = gaussian_potential(spec, -2.0, 1.0, window());
        let pot = Potential::new(v, 2.0, Exponent::int(2), Exponent::int(2), window()).unwrap();
        let rep = bs_decay_sweep(&pot, &[4.0, 64.0], 1e-6, 1).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert!(rep.verdict.passed(), "{}", rep.to_json());
        let empty = bs_decay_sweep(&pot, &[], 1e-6, 1).unwrap();
        assert!(empty.records.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sandwich_holder_bound(seed in 0u64..1000, ia in 0usize..3) {
            // ‖Wu‖_{q,r} ≤ ‖|W|²‖_{a,b}^{1/2}‖u‖₂ for the linked pair
            let spec = GridSpec::new(2, 2.0, 3.0, 8, 8).unwrap();
            let pairs = [(Exponent::int(2), Exponent::int(2)), (Exponent::int(4), Exponent::new(4, 3)), (Exponent::new(4, 3), Exponent::int(4))];
            let (a, b) = pairs[ia];
            let linked = potential_pair_check(a, b, 2).linked.unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mk = |rng: &mut ChaCha8Rng| {
                let d: Vec<C64> = (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                Field::from_data(spec, crate::grid::Rep::Physical, d).unwrap()
            };
            let w = FactorW { w: mk(&mut rng) };
            let u = mk(&mut rng);
            let lhs = w.w.mul(&u).mixed_norm(linked.q, linked.r).unwrap();
            let rhs = w.square_modulus().mixed_norm(a, b).unwrap().sqrt() * u.l2();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
