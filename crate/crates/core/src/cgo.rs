//! Complex-geometrical-optics solutions u = e^φ(u♯ + u♭) with
//! φ = i|ν|²t + ν·x. Everything is computed in the conjugated variables:
//! u♯ solves (i∂ₜ + Δ + 2ν·∇)u♯ = 0, v solves (Id − M_W S_ν M_{|W|})v = Wu♯
//! by a Neumann series, and u♭ = S_ν(|W|v).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::birman_schwinger::{build_w, op_norm, BsError, BsOperator, FactorW, Potential};
use crate::grid::{Field, GridError, GridSpec, Rep};
use crate::multipliers::{apply_l_nu, MultiplierError, MultiplierPlan, Offsets};
use crate::report::{Check, EstimateReport, Record};
use crate::symbols::NuVector;

pub const MAX_NEUMANN_TERMS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum CgoError {
    #[error("Birman-Schwinger norm estimate {rho} exceeds {max}; |ν| is too small for this potential")]
    NotContractive { rho: f64, max: f64 },
    #[error("Neumann series did not reach the tolerance within {0} terms")]
    NoConvergence(usize),
    #[error("ν must be axis-aligned")]
    NotAligned,
    #[error("wave packet has {got} samples, expected {expected}")]
    PacketSize { expected: usize, got: usize },
    #[error("wave packet is zero")]
    ZeroPacket,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
}

/// ψ sampled on the frequency lattice of the hyperplane ν̂·ξ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub spec: GridSpec,
    /// Axis of ν̂.
    pub axis: usize,
    /// Samples over the remaining axes in increasing order, row-major.
    pub psi: Vec<C64>,
}

impl WavePacket {
    pub fn new(spec: GridSpec, axis: usize, psi: Vec<C64>) -> Result<Self, CgoError> {
        let expected = spec.pts_space.pow(spec.n as u32 - 1);
        if psi.len() != expected {
            return Err(CgoError::PacketSize { expected, got: psi.len() });
        }
        if axis >= spec.n {
            return Err(GridError::Axis(axis).into());
        }
        if psi.iter().all(|z| z.norm() == 0.0) {
            return Err(CgoError::ZeroPacket);
        }
        Ok(WavePacket { spec, axis, psi })
    }

    pub fn from_fn<F: Fn(&[f64; 3]) -> C64>(spec: GridSpec, axis: usize, f: F) -> Result<Self, CgoError> {
        let len = spec.pts_space.pow(spec.n as u32 - 1);
        let proto = WavePacket { spec, axis, psi: Vec::new() };
        let psi = (0..len).map(|i| f(&proto.freq(i))).collect();
        Self::new(spec, axis, psi)
    }

    /// e^{−|ξ−c|²/(2w²)} on the hyperplane; the ν̂ component of c is ignored.
    pub fn gaussian(spec: GridSpec, axis: usize, center: [f64; 3], width: f64) -> Result<Self, CgoError> {
        if width <= 0.0 {
            return Err(CgoError::NonPositive("width"));
        }
        Self::from_fn(spec, axis, |xi| {
            let d2: f64 = (0..spec.n).filter(|&a| a != axis).map(|a| (xi[a] - center[a]).powi(2)).sum();
            C64::new((-d2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    /// The lattice mode with hyperplane indices `m`, scaled so that u♯ is
    /// exactly e^{i(x·ξ₀ − t|ξ₀|²)}.
    pub fn single_mode(spec: GridSpec, axis: usize, m: &[usize]) -> Result<Self, CgoError> {
        let len = spec.pts_space.pow(spec.n as u32 - 1);
        let flat = m.iter().fold(0, |acc, &i| acc * spec.pts_space + i);
        let mut psi = vec![C64::new(0.0, 0.0); len];
        let n1 = (spec.n - 1) as i32;
        psi[flat] = C64::new((2.0 * std::f64::consts::PI).powi(n1).sqrt() / spec.dxi().powi(n1), 0.0);
        Self::new(spec, axis, psi)
    }

    fn hyper_axes(&self) -> Vec<usize> {
        (0..self.spec.n).filter(|&a| a != self.axis).collect()
    }

    /// Full frequency vector of sample `i` (zero along ν̂).
    pub fn freq(&self, i: usize) -> [f64; 3] {
        let axes = self.hyper_axes();
        let mut xi = [0.0; 3];
        let mut rem = i;
        for &a in axes.iter().rev() {
            xi[a] = self.spec.xi(rem % self.spec.pts_space);
            rem /= self.spec.pts_space;
        }
        xi
    }

    /// ‖ψ‖_{L²(H_ν̂)}.
    pub fn norm(&self) -> f64 {
        let cell = self.spec.dxi().powi(self.spec.n as i32 - 1);
        (self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    pub fn scaled(&self, c: f64) -> WavePacket {
        WavePacket { psi: self.psi.iter().map(|z| z * c).collect(), ..self.clone() }
    }
}

/// u♯(t,x) = (2π)^{−(n−1)/2} ∫_{H_ν̂} e^{ix·ξ − it|ξ|²} ψ(ξ) dσ as a lattice sum,
/// evaluated exactly at the sample points.
pub fn wave_packet_usharp(psi: &WavePacket) -> Field {
    let sp = psi.spec;
    let n = sp.n;
    let np = sp.pts_space;
    let axes = psi.hyper_axes();
    let n1 = (n - 1) as i32;
    let pre = sp.dxi().powi(n1) / (2.0 * std::f64::consts::PI).powi(n1).sqrt();
    // e^{iξ_m x_k}, the same table on every hyperplane axis
    let table: Vec<C64> = (0..np)
        .flat_map(|k| (0..np).map(move |m| C64::from_polar(1.0, sp.xi(m) * sp.x(k))))
        .collect();
    let freqs: Vec<f64> = (0..psi.psi.len()).map(|i| psi.freq(i).iter().map(|v| v * v).sum()).collect();
    let ms = sp.space_len();
    let hyper_len = psi.psi.len();
    let mut data = vec![C64::new(0.0, 0.0); sp.len()];
    for kt in 0..sp.pts_time {
        let t = sp.t(kt);
        let mut vals: Vec<C64> =
            psi.psi.iter().zip(&freqs).map(|(p, f2)| p * C64::from_polar(pre, -t * f2)).collect();
        // contract one hyperplane axis at a time: index order is row-major
        // over `axes`, so axis position d has stride np^(len−1−d)
        for d in 0..axes.len() {
            let stride = np.pow((axes.len() - 1 - d) as u32);
            let mut next = vec![C64::new(0.0, 0.0); hyper_len];
            for (i, out) in next.iter_mut().enumerate() {
                let k = (i / stride) % np;
                let base = i - k * stride;
                *out = (0..np).map(|m| table[k * np + m] * vals[base + m * stride]).sum();
            }
            vals = next;
        }
        for j in 0..ms {
            let idx = sp.space_index(j);
            let h = axes.iter().fold(0, |acc, &a| acc * np + idx[a]);
            data[kt * ms + j] = vals[h];
        }
    }
    Field { spec: sp, rep: Rep::Physical, data }
}

/// u♯ lies on the untwisted lattice: every sampled mode has |ξ|² on the
/// τ lattice strictly inside its Nyquist range.
pub fn usharp_on_lattice(psi: &WavePacket, cut: f64) -> bool {
    let sp = psi.spec;
    let max = psi.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    psi.psi.iter().enumerate().all(|(i, z)| {
        if z.norm() <= cut * max {
            return true;
        }
        let k = psi.freq(i).iter().map(|v| v * v).sum::<f64>() / sp.dtau();
        (k - k.round()).abs() < 1e-9 && k.round() < (sp.pts_time / 2) as f64
    })
}

/// sup_t ‖u♯(t,·)‖_{L²(H_ν̂)} over the lattice hyperplane through the origin
/// index of the ν̂ axis.
pub fn usharp_hyperplane_sup(u: &Field, axis: usize) -> f64 {
    let sp = u.spec;
    let ms = sp.space_len();
    let cell = sp.dx().powi(sp.n as i32 - 1);
    (0..sp.pts_time)
        .map(|k| {
            let s: f64 = (0..ms)
                .filter(|&j| sp.space_index(j)[axis] == 0)
                .map(|j| u.data[k * ms + j].norm_sqr())
                .sum();
            (s * cell).sqrt()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgoConfig {
    /// Relative fixed-point residual target.
    pub tol: f64,
    /// Largest accepted norm estimate for M_W S_ν M_{|W|}.
    pub rho_max: f64,
    /// Power-iteration tolerance.
    pub power_tol: f64,
    pub seed: u64,
}

impl Default for CgoConfig {
    fn default() -> Self {
        CgoConfig { tol: 1e-8, rho_max: 0.9, power_tol: 1e-6, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannStats {
    pub rho: f64,
    pub terms: usize,
    /// ‖Wu♯‖₂.
    pub rhs_norm: f64,
    /// Norms of the successive terms (BS)^k(Wu♯).
    pub term_norms: Vec<f64>,
    /// ‖(Id − BS)v − Wu♯‖₂ / ‖Wu♯‖₂, computed by substitution.
    pub residual: f64,
    /// Bound on ‖v − v_exact‖₂/‖Wu♯‖₂ from the geometric tail.
    pub tail_bound: f64,
}

/// Partial Neumann sum for (Id − M_W S_ν M_{|W|})v = Wu♯. Stops once the
/// next term is below tol·(1−ρ̂)‖Wu♯‖, which bounds both the residual and
/// the distance to the exact solution by tol.
pub fn solve_v_neumann(
    w: &FactorW,
    usharp: &Field,
    nu: &NuVector,
    cfg: &CgoConfig,
) -> Result<(Field, NeumannStats), CgoError> {
    if cfg.tol <= 0.0 {
        return Err(CgoError::NonPositive("tol"));
    }
    let rhs = w.w.mul(usharp);
    let rhs_norm = rhs.l2();
    let op = BsOperator::new(w.clone(), w.modulus(), nu)?;
    if rhs_norm == 0.0 {
        let stats =
            NeumannStats { rho: 0.0, terms: 0, rhs_norm, term_norms: vec![], residual: 0.0, tail_bound: 0.0 };
        return Ok((Field::zeros(w.w.spec), stats));
    }
    let rho = op_norm(w, &w.modulus(), nu, cfg.power_tol, cfg.seed)?.estimate;
    if rho > cfg.rho_max || rho >= 1.0 {
        return Err(CgoError::NotContractive { rho, max: cfg.rho_max });
    }
    let mut v = rhs.clone();
    let mut term = rhs.clone();
    let mut term_norms = vec![rhs_norm];
    let stop = cfg.tol * (1.0 - rho) * rhs_norm;
    loop {
        term = op.apply(&term)?;
        let tn = term.l2();
        term_norms.push(tn);
        if tn <= stop {
            break;
        }
        if term_norms.len() > MAX_NEUMANN_TERMS {
            return Err(CgoError::NoConvergence(MAX_NEUMANN_TERMS));
        }
        v.add_assign(&term);
    }
    let residual = fixed_point_residual(&op, &v, &rhs)?;
    let terms = term_norms.len() - 1;
    let tail_bound = term_norms[terms] / ((1.0 - rho) * rhs_norm);
    Ok((v, NeumannStats { rho, terms, rhs_norm, term_norms, residual, tail_bound }))
}

/// ‖(Id − A)v − g‖₂/‖g‖₂.
pub fn fixed_point_residual(op: &BsOperator, v: &Field, g: &Field) -> Result<f64, CgoError> {
    let av = op.apply(v)?;
    Ok(v.sub(&av).sub(g).l2() / g.l2())
}

/// u♭ = S_ν(|W|v).
pub fn build_uflat(w: &FactorW, v: &Field, nu: &NuVector) -> Result<Field, CgoError> {
    let plan = MultiplierPlan::conjugated(w.w.spec, nu)?;
    Ok(plan.apply_inverse(&w.modulus().w.mul(v))?)
}

/// ‖(i∂ₜ + Δ + 2ν·∇ − V)u♭ − Vu♯‖₂ / ‖Vu♯‖₂ with spectral derivatives on
/// the S_ν lattice.
pub fn remainder_equation_residual(v: &Field, usharp: &Field, uflat: &Field, nu: &NuVector) -> Result<f64, CgoError> {
    let plan = MultiplierPlan::conjugated(v.spec, nu)?;
    let vu = v.mul(usharp);
    let lhs = apply_l_nu(&plan, uflat, nu)?.sub(&v.mul(uflat));
    Ok(lhs.sub(&vu).l2() / vu.l2())
}

/// ‖(i∂ₜ + Δ + 2ν·∇ − V)(u♯ + u♭)‖₂ / ‖Vu♯‖₂, the equation for
/// e^{−φ}u; u♯ is differentiated on the untwisted lattice, u♭ on the S_ν
/// lattice. Meaningful only when u♯ lies on the lattice.
pub fn full_residual(v: &Field, usharp: &Field, uflat: &Field, nu: &NuVector) -> Result<f64, CgoError> {
    let twisted = MultiplierPlan::conjugated(v.spec, nu)?;
    let plain = twisted.clone().with_offsets(Offsets::NONE);
    let mut lu = apply_l_nu(&plain, usharp, nu)?;
    lu.add_assign(&apply_l_nu(&twisted, uflat, nu)?);
    let mut total = usharp.clone();
    total.add_assign(uflat);
    Ok(lu.sub(&v.mul(&total)).l2() / v.mul(usharp).l2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoSolution {
    pub nu: NuVector,
    pub psi: WavePacket,
    pub usharp: Field,
    pub v: Field,
    pub uflat: Field,
    pub stats: NeumannStats,
    /// Remainder-equation residual (relative).
    pub equation_residual: f64,
    /// Residual of the whole conjugated equation, when u♯ is on the lattice.
    pub full_residual: Option<f64>,
    /// Weight of |W|v on modes where the symbol is below the floor.
    pub dropped_weight: f64,
}

impl CgoSolution {
    /// ‖W̃u♭‖₂/‖ψ‖₂.
    pub fn remainder_ratio(&self, wt: &FactorW) -> f64 {
        wt.w.mul(&self.uflat).l2() / self.psi.norm()
    }

    /// ‖W̃u♯‖₂/‖ψ‖₂.
    pub fn leading_ratio(&self, wt: &FactorW) -> f64 {
        wt.w.mul(&self.usharp).l2() / self.psi.norm()
    }
}

/// Solve for u♭ given V and ψ at ν (axis-aligned, along ψ's axis).
pub fn build_cgo(v: &Field, psi: &WavePacket, nu: &NuVector, cfg: &CgoConfig) -> Result<CgoSolution, CgoError> {
    match nu.aligned_axis() {
        Some((a, _)) if a == psi.axis => {}
        _ => return Err(CgoError::NotAligned),
    }
    if !psi.spec.same_lattice(&v.spec) {
        return Err(GridError::GridMismatch.into());
    }
    let w = build_w(v);
    let usharp = wave_packet_usharp(psi);
    let (vv, stats) = solve_v_neumann(&w, &usharp, nu, cfg)?;
    let uflat = build_uflat(&w, &vv, nu)?;
    let (equation_residual, dropped_weight) = if stats.rhs_norm == 0.0 {
        (0.0, 0.0)
    } else {
        let plan = MultiplierPlan::conjugated(v.spec, nu)?;
        (
            remainder_equation_residual(v, &usharp, &uflat, nu)?,
            plan.dropped_weight(&w.modulus().w.mul(&vv))?,
        )
    };
    let full = if stats.rhs_norm > 0.0 && usharp_on_lattice(psi, 1e-14) {
        Some(full_residual(v, &usharp, &uflat, nu)?)
    } else {
        None
    };
    Ok(CgoSolution {
        nu: nu.clone(),
        psi: psi.clone(),
        usharp,
        v: vv,
        uflat,
        stats,
        equation_residual,
        full_residual: full,
        dropped_weight,
    })
}

/// Continuous extension of V from [0, T] used at the endpoint pair: V(0,·)
/// and V(T,·) ramp linearly to zero over length `ramp` outside [0, T].
pub fn endpoint_extension(v: &Field, t_end: f64, ramp: f64) -> Field {
    let sp = v.spec;
    let ms = sp.space_len();
    let (k0, k1) = (sp.t_index(0.0), sp.t_index(t_end));
    let mut out = v.clone();
    for k in 0..sp.pts_time {
        let t = sp.t(k);
        let (src, fac) = if t < 0.0 {
            (k0, (1.0 + t / ramp).max(0.0))
        } else if t > t_end {
            (k1, (1.0 - (t - t_end) / ramp).max(0.0))
        } else {
            continue;
        };
        for j in 0..ms {
            out.data[k * ms + j] = v.data[src * ms + j] * fac;
        }
    }
    out
}

/// ‖Wu♭‖₂/‖ψ‖₂ and ‖Wu♯‖₂/‖ψ‖₂ over a ν list along ψ's axis; the check is
/// last ≤ first/2.
pub fn remainder_decay_sweep(
    pot: &Potential,
    psi: &WavePacket,
    nus: &[f64],
    cfg: &CgoConfig,
) -> Result<EstimateReport, CgoError> {
    let mut rep = EstimateReport::new("cgo-remainder");
    rep.grids.push(pot.v.spec);
    rep.param("nu", nus.to_vec());
    rep.param("axis", psi.axis as u64);
    rep.param("tol", cfg.tol);
    rep.param("rho_max", cfg.rho_max);
    rep.param("seed", cfg.seed);
    rep.param("potential_hash", pot.hash());
    let w = build_w(&pot.v);
    let mut ratios = Vec::new();
    for &m in nus {
        let nu = NuVector::along(pot.v.spec.n, psi.axis, m).map_err(|_| CgoError::NonPositive("nu"))?;
        let sol = build_cgo(&pot.v, psi, &nu, cfg)?;
        let r = sol.remainder_ratio(&w);
        ratios.push(r);
        let mut rec = Record::new(format!("nu={m}"), Some(cfg.seed))
            .with("nu", m)
            .with("rho", sol.stats.rho)
            .with("terms", sol.stats.terms as u64)
            .with("fixed_point_residual", sol.stats.residual)
            .with("equation_residual", sol.equation_residual)
            .with("remainder_ratio", r)
            .with("leading_ratio", sol.leading_ratio(&w));
        if let Some(f) = sol.full_residual {
            rec = rec.with("full_residual", f);
        }
        rep.records.push(rec);
    }
    if ratios.len() > 1 && ratios[0] > 0.0 {
        rep.check(Check::at_most("last/first", ratios[ratios.len() - 1] / ratios[0], 0.5));
    }
    if !rep.records.is_empty() {
        let worst = rep.max_of("fixed_point_residual").unwrap_or(0.0);
        rep.check(Check::at_most("fixed_point_residual", worst, cfg.tol));
    }
    rep.finish();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birman_schwinger::{gaussian_potential, time_bump};
    use crate::grid::Exponent;
    use proptest::prelude::*;

    /// dτ = dξ², so |ξ|² of every lattice mode lies on the τ lattice.
    fn commensurate(n: usize, nt: usize, nx: usize) -> GridSpec {
        let bs = 4.0;
        GridSpec::new(n, bs * bs / std::f64::consts::PI, bs, nt, nx).unwrap()
    }

    fn window() -> (f64, f64) {
        (-1.5, 1.5)
    }

    #[test]
    fn single_mode_is_a_plane_wave() {
        for n in 2..=3 {
            let spec = commensurate(n, 16, 8);
            let m = vec![1usize; n - 1];
            let psi = WavePacket::single_mode(spec, n - 1, &m).unwrap();
            let u = wave_packet_usharp(&psi);
            let xi0 = spec.xi(1);
            let want = Field::from_fn(spec, |t, x| {
                let dot: f64 = x[..n - 1].iter().map(|v| v * xi0).sum();
                C64::from_polar(1.0, dot - t * xi0 * xi0 * (n - 1) as f64)
            });
            assert!(u.sub(&want).max_abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn usharp_solves_the_free_conjugated_equation() {
        let spec = commensurate(2, 32, 16);
        let nu = NuVector::along_last(2, 8.0).unwrap();
        // support on |m|² < 16 keeps every mode inside the τ range
        let psi = WavePacket::from_fn(spec, 1, |xi| {
            let m = (xi[0] / spec.dxi()).round();
            if m.abs() <= 3.0 {
                C64::new(1.0 / (1.0 + m * m), 0.3 * m)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .unwrap();
        assert!(usharp_on_lattice(&psi, 0.0));
        let u = wave_packet_usharp(&psi);
        let plan = MultiplierPlan::conjugated(spec, &nu).unwrap().with_offsets(Offsets::NONE);
        let lu = apply_l_nu(&plan, &u, &nu).unwrap();
        assert!(lu.l2() <= 1e-10 * u.l2(), "{}", lu.l2() / u.l2());
        let sup = usharp_hyperplane_sup(&u, 1);
        assert!(sup <= psi.norm() * (1.0 + 1e-12), "{sup} {}", psi.norm());
        // Plancherel on the lattice hyperplane is an equality
        assert!((sup / psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_potential_gives_zero_remainder() {
        let spec = commensurate(2, 16, 8);
        let psi = WavePacket::gaussian(spec, 1, [0.0; 3], 1.0).unwrap();
        let nu = NuVector::along_last(2, 4.0).unwrap();
        let sol = build_cgo(&Field::zeros(spec), &psi, &nu, &CgoConfig::default()).unwrap();
        assert_eq!(sol.v.max_abs(), 0.0);
        assert_eq!(sol.uflat.max_abs(), 0.0);
        let w = build_w(&gaussian_potential(spec, 1.0, 1.0, window()));
        assert_eq!(build_uflat(&w, &Field::zeros(spec), &nu).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn neumann_solution_and_residuals() {
        let spec = commensurate(2, 64, 32);
        let v = gaussian_potential(spec, -6.0, 1.0, window());
        let psi = WavePacket::gaussian(spec, 1, [0.0; 3], 0.5).unwrap();
        let nu = NuVector::along_last(2, 32.0).unwrap();
        let cfg = CgoConfig::default();
        let sol = build_cgo(&v, &psi, &nu, &cfg).unwrap();
        assert!(sol.stats.rho < 0.9);
        assert!(sol.stats.terms > 1);
        assert!(sol.stats.residual <= cfg.tol, "{}", sol.stats.residual);
        assert!(sol.stats.tail_bound <= cfg.tol);
        // consecutive partial sums differ by the next term, bounded by ρ̂ times the previous
        for pair in sol.stats.term_norms.windows(2) {
            assert!(pair[1] <= sol.stats.rho * pair[0] * (1.0 + 1e-9));
        }
        // a-priori chain ‖v‖ ≤ ‖Wu♯‖/(1−ρ̂)
        assert!(sol.v.l2() <= sol.stats.rhs_norm / (1.0 - sol.stats.rho));
        assert!(sol.dropped_weight == 0.0);
        assert!(sol.equation_residual < 1e-7, "{}", sol.equation_residual);
        let full = sol.full_residual.expect("commensurate grid");
        assert!(full < 1e-7, "{full}");
    }

    #[test]
    fn small_nu_is_rejected() {
        let spec = commensurate(2, 16, 16);
        let v = gaussian_potential(spec, -200.0, 1.0, window());
        let psi = WavePacket::gaussian(spec, 1, [0.0; 3], 1.0).unwrap();
        let nu = NuVector::along_last(2, 0.5).unwrap();
        assert!(matches!(build_cgo(&v, &psi, &nu, &CgoConfig::default()), Err(CgoError::NotContractive { .. })));
        let off = NuVector::along(2, 0, 8.0).unwrap();
        assert_eq!(build_cgo(&v, &psi, &off, &CgoConfig::default()), Err(CgoError::NotAligned));
    }

    #[test]
    fn endpoint_extension_is_continuous() {
        let spec = GridSpec::new(3, 4.0, 2.0, 64, 8).unwrap();
        let t_end = 2.0;
        let v = Field::from_fn(spec, |t, x| {
            if (0.0..=t_end).contains(&t) {
                C64::new(1.0 + t + x[0] * x[0], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let ext = endpoint_extension(&v, t_end, t_end / 4.0);
        let ms = spec.space_len();
        let jump = (1..spec.pts_time)
            .map(|k| (0..ms).map(|j| (ext.data[k * ms + j] - ext.data[(k - 1) * ms + j]).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        // steepest slope is the ramp from max |V(T)| = 1 + 2 + 4 over length 1/2
        assert!(jump <= 7.0 / 0.5 * spec.dt() + 1e-12, "{jump}");
        for k in 0..spec.pts_time {
            let t = spec.t(k);
            if t < -0.5 - 1e-12 || t > t_end + 0.5 + 1e-12 {
                assert_eq!(ext.time_slice(k).iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
            }
        }
    }

    #[test]
    fn remainder_decays_and_leading_part_is_bounded() {
        let spec = commensurate(2, 32, 16);
        let v = gaussian_potential(spec, -4.0, 1.0, window());
        let pot = Potential::new(v, 2.0, Exponent::int(2), Exponent::int(2), window()).unwrap();
        let psi = WavePacket::gaussian(spec, 1, [0.0; 3], 0.5).unwrap();
        let rep = remainder_decay_sweep(&pot, &psi, &[16.0, 32.0, 64.0], &CgoConfig::default()).unwrap();
        assert!(rep.verdict.passed(), "{}", rep.to_json());
        let lead: Vec<f64> = rep.records.iter().map(|r| r.num("leading_ratio").unwrap()).collect();
        assert!(lead.iter().all(|&l| (l / lead[0] - 1.0).abs() < 1e-12));
        let zero = Potential { v: Field::zeros(spec), ..pot };
        let rep0 = remainder_decay_sweep(&zero, &psi, &[16.0, 32.0], &CgoConfig::default()).unwrap();
        assert!(rep0.records.iter().all(|r| r.num("remainder_ratio") == Some(0.0)));
    }

    #[test]
    fn bump_support() {
        assert_eq!(time_bump(-2.0, window()), 0.0);
        assert!((time_bump(0.0, window()) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn construction_is_linear_in_psi(c in 0.1f64..10.0, cx in -1.0f64..1.0) {
            let spec = commensurate(2, 16, 8);
            let v = gaussian_potential(spec, -3.0, 1.0, window());
            let psi = WavePacket::gaussian(spec, 1, [cx, 0.0, 0.0], 0.7).unwrap();
            let nu = NuVector::along_last(2, 16.0).unwrap();
            let cfg = CgoConfig { tol: 1e-12, ..CgoConfig::default() };
            let a = build_cgo(&v, &psi, &nu, &cfg).unwrap();
            let b = build_cgo(&v, &psi.scaled(c), &nu, &cfg).unwrap();
            let mut scaled = a.uflat.clone();
            scaled.scale(C64::new(c, 0.0));
            prop_assert!(b.uflat.sub(&scaled).l2() <= 1e-10 * scaled.l2());
        }
    }
}
