//! Born-regime recovery of V̂ from initial-to-final-state data. For
//! (τ, ξ) with ξ ≠ 0 the probes e^{iη·x} and e^{iκ·x} with
//! η = −½(1 + τ/|ξ|²)ξ and κ = ½(1 − τ/|ξ|²)ξ give
//! i∫(U_T^V − U_T^0)e^{iη·x}·conj(e^{iκ·x − i|κ|²T}) ≈ ∫_Σ V e^{−iτt − iξ·x}.

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::{itf_map, EvolveSettings, ForwardError, SpaceTimeV};
use crate::grid::{GridSpec, Slice};
use crate::quad::gauss_legendre;

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructionError {
    #[error("ξ = 0 has no parametrization; F̂ there follows by continuity")]
    ZeroXi,
    #[error("frequency {0:?} is not on the probe lattice")]
    OffLattice(Vec<f64>),
    #[error("frequency radius must be positive")]
    Radius,
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

/// One recovered value of ∫_Σ V e^{−iτt − iξ·x}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSample {
    pub tau: f64,
    pub xi: Vec<f64>,
    /// A direction orthogonal to ξ (unused by Born probes, kept for the CGO link).
    pub nu: Vec<f64>,
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub amplitude: C64,
    /// Quadrature of the true transform, when the potential is known.
    pub truth: Option<C64>,
    pub born_regime: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// (ν̂, η, κ) with ν̂·ξ = 0, |η|² − |κ|² = τ and κ − η = ξ.
pub fn freq_parametrization(tau: f64, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ReconstructionError> {
    let r2 = norm2(xi);
    if r2 == 0.0 {
        return Err(ReconstructionError::ZeroXi);
    }
    let eta: Vec<f64> = xi.iter().map(|x| -0.5 * (1.0 + tau / r2) * x).collect();
    let kappa: Vec<f64> = xi.iter().map(|x| 0.5 * (1.0 - tau / r2) * x).collect();
    Ok((orthogonal_unit(xi), eta, kappa))
}

/// A unit vector orthogonal to ξ: e_a minus its ξ component, with a the
/// axis where |ξ_a| is smallest; for n = 1 there is none and e_1 is returned.
fn orthogonal_unit(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let mut e = vec![0.0; n];
    if n == 1 {
        e[0] = 1.0;
        return e;
    }
    let a = (0..n).min_by(|&i, &j| xi[i].abs().total_cmp(&xi[j].abs())).unwrap();
    e[a] = 1.0;
    let r2 = norm2(xi);
    let c = xi[a] / r2;
    let v: Vec<f64> = (0..n).map(|i| e[i] - c * xi[i]).collect();
    let nv = norm2(&v).sqrt();
    v.iter().map(|x| x / nv).collect()
}

/// The same parametrization in exact rational arithmetic.
pub fn parametrize_exact(
    tau: Ratio<i64>,
    xi: &[Ratio<i64>],
) -> Result<(Vec<Ratio<i64>>, Vec<Ratio<i64>>), ReconstructionError> {
    let r2: Ratio<i64> = xi.iter().map(|x| x * x).sum();
    if r2 == Ratio::from_integer(0) {
        return Err(ReconstructionError::ZeroXi);
    }
    let half = Ratio::new(1, 2);
    let one = Ratio::from_integer(1);
    let eta = xi.iter().map(|x| -half * (one + tau / r2) * x).collect();
    let kappa = xi.iter().map(|x| half * (one - tau / r2) * x).collect();
    Ok((eta, kappa))
}

/// e^{ik·x} on the lattice; k must be a lattice frequency so that the wave
/// is periodic and an exact eigenfunction of the free step.
pub fn plane_wave(spec: GridSpec, k: &[f64]) -> Result<Slice, ReconstructionError> {
    let dxi = spec.dxi();
    let nyq = (spec.pts_space / 2) as f64;
    if k.iter().any(|&c| ((c / dxi) - (c / dxi).round()).abs() > 1e-9 || (c / dxi).round().abs() >= nyq) {
        return Err(ReconstructionError::OffLattice(k.to_vec()));
    }
    let k = k.to_vec();
    Ok(Slice::from_fn(spec, move |x| C64::from_polar(1.0, x.iter().zip(&k).map(|(a, b)| a * b).sum())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornConfig {
    pub t_end: f64,
    pub steps: usize,
    /// Largest sup|V|·T treated as the Born regime.
    pub born_threshold: f64,
}

impl Default for BornConfig {
    fn default() -> Self {
        BornConfig { t_end: 1.0, steps: 64, born_threshold: 0.5 }
    }
}

impl BornConfig {
    fn settings(&self) -> EvolveSettings {
        EvolveSettings::new(self.t_end, self.steps)
    }
}

/// sup|V|·T over 33 equispaced times in [0, T].
pub fn born_indicator(v: &SpaceTimeV, spec: &GridSpec, t_end: f64) -> f64 {
    let sup = (0..=32)
        .map(|k| v.at(t_end * k as f64 / 32.0, spec).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    sup * t_end
}

/// Born samples for a list of (η, κ) probe pairs; one forward solve per
/// distinct η.
pub fn born_pairs(
    v: &SpaceTimeV,
    spec: GridSpec,
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &BornConfig,
) -> Result<Vec<C64>, ReconstructionError> {
    let mut etas: Vec<Vec<f64>> = Vec::new();
    let mut which = Vec::with_capacity(pairs.len());
    for (eta, _) in pairs {
        let pos = etas.iter().position(|e| e.iter().zip(eta).all(|(a, b)| (a - b).abs() < 1e-12));
        which.push(pos.unwrap_or_else(|| {
            etas.push(eta.clone());
            etas.len() - 1
        }));
    }
    let probes = etas.iter().map(|e| plane_wave(spec, e)).collect::<Result<Vec<_>, _>>()?;
    let out = if pairs.is_empty() { Vec::new() } else { itf_map(v, &probes, &cfg.settings())? };
    let i = C64::new(0.0, 1.0);
    let t = cfg.t_end;
    pairs
        .par_iter()
        .zip(&which)
        .map(|((eta, kappa), &w)| {
            let free = probes[w].scaled(C64::from_polar(1.0, -norm2(eta) * t));
            let g = plane_wave(spec, kappa)?.scaled(C64::from_polar(1.0, -norm2(kappa) * t));
            Ok(i * out[w].output.sub(&free).inner(&g))
        })
        .collect()
}

/// Born estimate of ∫_Σ V e^{−iτt − iξ·x} from two probes.
pub fn born_sample(
    v: &SpaceTimeV,
    spec: GridSpec,
    eta: &[f64],
    kappa: &[f64],
    cfg: &BornConfig,
) -> Result<C64, ReconstructionError> {
    Ok(born_pairs(v, spec, &[(eta.to_vec(), kappa.to_vec())], cfg)?[0])
}

/// ∫_0^T Σ_x V e^{−iτt − iξ·x} Δx by 8-point Gauss–Legendre on 16 panels.
pub fn true_transform(v: &SpaceTimeV, spec: &GridSpec, tau: f64, xi: &[f64], t_end: f64) -> C64 {
    let (nodes, weights) = gauss_legendre(8);
    let panels = 16;
    let h = t_end / panels as f64;
    let phase: Vec<C64> = (0..spec.space_len())
        .map(|j| {
            let p = spec.point(j);
            C64::from_polar(1.0, -(0..spec.n).map(|a| xi[a] * p[a]).sum::<f64>())
        })
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        for (x, w) in nodes.iter().zip(&weights) {
            let t = (p as f64 + 0.5) * h + 0.5 * h * x;
            let s: C64 = v.at(t, spec).iter().zip(&phase).map(|(a, b)| a * b).sum();
            acc += s * C64::from_polar(0.5 * h * w, -tau * t);
        }
    }
    acc * spec.space_cell()
}

/// Lattice frequencies on the even sublattice (spacing 2Δξ) with
/// 0 < |ξ| ≤ radius, so that η = −ξ/2 and κ = ξ/2 are lattice frequencies.
pub fn even_box(spec: &GridSpec, radius: f64) -> Vec<Vec<f64>> {
    let step = 2.0 * spec.dxi();
    let m = (radius / step).floor() as i64;
    let n = spec.n;
    let mut out = Vec::new();
    let total = (2 * m + 1).pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut xi = vec![0.0; n];
        for a in (0..n).rev() {
            xi[a] = ((rem % (2 * m + 1) as i64) - m) as f64 * step;
            rem /= (2 * m + 1) as i64;
        }
        let r2 = norm2(&xi);
        if r2 > 0.0 && r2 <= radius * radius * (1.0 + 1e-12) {
            out.push(xi);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub samples: Vec<FreqSample>,
    /// Time average (1/T)∫_0^T V dt from the τ = 0 samples, as the period-L
    /// Fourier series on the even sublattice.
    pub v_est: Slice,
    /// Relative ℓ² error of the sampled transform against the truth.
    pub rel_error: Option<f64>,
    /// sup|V|·T.
    pub born_indicator: f64,
    pub born_regime: bool,
}

/// Recover the τ = 0 transform on the even-sublattice disc |ξ| ≤ radius
/// plus the origin; the origin uses the ξ → 0 limit of the
/// parametrization, η = κ = 0. With `compare`, the truth is computed from
/// the same potential by quadrature.
pub fn reconstruct_potential(
    v: &SpaceTimeV,
    spec: GridSpec,
    radius: f64,
    cfg: &BornConfig,
    compare: bool,
) -> Result<Reconstruction, ReconstructionError> {
    if radius <= 0.0 {
        return Err(ReconstructionError::Radius);
    }
    let n = spec.n;
    let indicator = born_indicator(v, &spec, cfg.t_end);
    let born = indicator <= cfg.born_threshold;
    let mut xis = vec![vec![0.0; n]];
    xis.extend(even_box(&spec, radius));
    let mut params = Vec::with_capacity(xis.len());
    for xi in &xis {
        params.push(if norm2(xi) == 0.0 {
            let mut e = vec![0.0; n];
            e[n - 1] = 1.0;
            (e, vec![0.0; n], vec![0.0; n])
        } else {
            freq_parametrization(0.0, xi)?
        });
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = params.iter().map(|(_, e, k)| (e.clone(), k.clone())).collect();
    let amps = born_pairs(v, spec, &pairs, cfg)?;
    let truths: Vec<Option<C64>> = xis
        .par_iter()
        .map(|xi| compare.then(|| true_transform(v, &spec, 0.0, xi, cfg.t_end)))
        .collect();
    let samples: Vec<FreqSample> = xis
        .into_iter()
        .zip(params)
        .zip(amps.iter().zip(truths))
        .map(|((xi, (nu, eta, kappa)), (&amplitude, truth))| FreqSample {
            tau: 0.0,
            xi,
            nu,
            eta,
            kappa,
            amplitude,
            truth,
            born_regime: born,
        })
        .collect();
    let rel_error = compare.then(|| {
        let (num, den) = samples.iter().fold((0.0, 0.0), |(a, b), s| {
            let t = s.truth.unwrap();
            (a + (s.amplitude - t).norm_sqr(), b + t.norm_sqr())
        });
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    });
    // period-L series: V̄(x) = L^{−n} Σ c_ξ e^{iξ·x} / T
    let period = spec.box_space;
    let norm = 1.0 / (period.powi(n as i32) * cfg.t_end);
    let v_est = Slice::from_fn(spec, |x| {
        samples
            .iter()
            .map(|s| s.amplitude * C64::from_polar(norm, s.xi.iter().zip(x).map(|(a, b)| a * b).sum()))
            .sum()
    });
    Ok(Reconstruction { samples, v_est, rel_error, born_indicator: indicator, born_regime: born })
}
