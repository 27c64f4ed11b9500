//! Families showing that the Ẋ^{1/2} norm does not control the dual
//! Strichartz norm: a log log time trace g, the ρ-families
//! û_ρ(τ, ξ) = ĝ_ρ(τ − |ξ|²) f̂_ρ(ξ), weighted frequency norms, the
//! embedding-ratio sweep, and the |ν|^{1/4} local smoothing check.
//!
//! Family members live on ρ-adapted grids (space box ∝ 1/ρ, time box
//! ∝ 1/ρ²), so the mixed norm is measured on the window where the pointwise
//! lower bound lives. Their weighted norms use the product structure of
//! û_ρ and the fine spectrum of g.

use std::f64::consts::{E, PI};

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{dft_nd, signed, Direction, Exponent, Field, GridError, GridSpec, Rep, Slice};
use crate::quad::gauss_legendre;
use crate::report::{spread, Check, EstimateReport, Record};
use crate::symbols::{eval_p, eval_p_nu, NuVector};

#[derive(Debug, Error, PartialEq)]
pub enum CounterexampleError {
    #[error("time step {dt} does not resolve δ_min = {delta_min}")]
    Resolution { dt: f64, delta_min: f64 },
    #[error("frequency {needed} exceeds the lattice range {available}")]
    FreqRange { needed: f64, available: f64 },
    #[error("pair (q′, r′) = ({q}, {r}) violates 2/q′ = n/2 − n/r′ for n = {n}")]
    NotAdmissible { q: Exponent, r: Exponent, n: usize },
    #[error("invalid weight parameter: {0}")]
    Weight(&'static str),
    #[error("input vanishes identically")]
    ZeroInput,
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Inner radius of the cutoff: χ = 1 on |z| ≤ 1/(2e).
pub const CHI_INNER: f64 = 1.0 / (2.0 * E);
/// Outer radius of the cutoff: χ = 0 on |z| ≥ 1/e.
pub const CHI_OUTER: f64 = 1.0 / E;

/// Smooth radial cutoff, 1 inside CHI_INNER and 0 outside CHI_OUTER.
pub fn chi(r: f64) -> f64 {
    let r = r.abs();
    if r <= CHI_INNER {
        return 1.0;
    }
    if r >= CHI_OUTER {
        return 0.0;
    }
    let x = (CHI_OUTER - r) / (CHI_OUTER - CHI_INNER);
    let psi = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    psi(x) / (psi(x) + psi(1.0 - x))
}

/// χ(z) log log(1/|z|) restricted to z = (t, 0).
pub fn loglog_profile(t: f64) -> f64 {
    let a = t.abs();
    if a == 0.0 || a >= CHI_OUTER {
        return 0.0;
    }
    chi(a) * (1.0 / a).ln().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TraceKind {
    /// χ(t) log log(1/|t|), unbounded at t = 0.
    LogLog,
    /// e^{−t²/2w²}, the bounded control.
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Points of the 1-D lattice on [−half_width, half_width).
    pub pts: usize,
    pub half_width: f64,
    /// Smallest δ at which the lower bound must be visible.
    pub delta_min: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams { pts: 1 << 16, half_width: 2.0, delta_min: 1e-3 }
    }
}

/// A time profile g sampled by cell averages on a fine periodic lattice,
/// with its unitary spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub kind: TraceKind,
    pub params: TraceParams,
    pub dt: f64,
    pub samples: Vec<f64>,
    /// Frequencies s_k of the spectrum.
    pub freqs: Vec<f64>,
    /// |ĝ(s_k)|² ds: the spectral mass of each bin.
    pub power: Vec<f64>,
    /// ‖⟨s⟩^{1/2} ĝ‖₂.
    pub h_half: f64,
}

/// The log log trace; see [`TimeTrace`].
pub type LogLogTrace = TimeTrace;

/// Composite Gauss–Legendre integral of a real function.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / panels as f64;
    let (x, w) = rule;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            x.iter().zip(w).map(|(xi, wi)| wi * f(lo + 0.5 * h * (xi + 1.0))).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// ∫_lo^hi of the log log profile for 0 ≤ lo < hi, in the variable ln t.
fn loglog_integral_pos(lo: f64, hi: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let hi = hi.min(CHI_OUTER);
    if lo >= hi {
        return 0.0;
    }
    // The smooth step lives on [CHI_INNER, CHI_OUTER]; integrate it in t.
    let mut total = 0.0;
    if hi > CHI_INNER {
        let a = lo.max(CHI_INNER);
        let panels = ((32.0 * (hi - a) / (CHI_OUTER - CHI_INNER)).ceil() as usize).max(1);
        total += integrate(loglog_profile, a, hi, panels, rule);
    }
    let top = hi.min(CHI_INNER);
    if lo < top {
        let vhi = top.ln();
        let vlo = if lo > 0.0 { lo.ln().max(vhi - 60.0) } else { vhi - 60.0 };
        let panels = ((2.0 * (vhi - vlo)).ceil() as usize).max(1);
        total += integrate(|v| loglog_profile(v.exp()) * v.exp(), vlo, vhi, panels, rule);
    }
    total
}

impl TimeTrace {
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            TraceKind::LogLog => loglog_profile(t),
            TraceKind::Gaussian { width } => (-t * t / (2.0 * width * width)).exp(),
        }
    }

    /// Mean of g over [a, b].
    pub fn cell_average(&self, a: f64, b: f64) -> f64 {
        let rule = gauss_legendre(8);
        let total = match self.kind {
            TraceKind::LogLog => {
                if a >= 0.0 {
                    loglog_integral_pos(a, b, &rule)
                } else if b <= 0.0 {
                    loglog_integral_pos(-b, -a, &rule)
                } else {
                    loglog_integral_pos(0.0, -a, &rule) + loglog_integral_pos(0.0, b, &rule)
                }
            }
            TraceKind::Gaussian { .. } => integrate(|t| self.value(t), a, b, 1, &rule),
        };
        total / (b - a)
    }

    /// ∫ w(s) |ĝ(s)|² ds over the lattice spectrum.
    pub fn spectral_integral(&self, w: impl Fn(f64) -> f64) -> f64 {
        self.freqs.iter().zip(&self.power).map(|(&s, &p)| w(s) * p).sum()
    }

    pub fn l2(&self) -> f64 {
        self.spectral_integral(|_| 1.0).sqrt()
    }
}

fn trace_on_lattice(kind: TraceKind, params: TraceParams) -> Result<TimeTrace, CounterexampleError> {
    if params.pts < 8 || !params.pts.is_power_of_two() {
        return Err(CounterexampleError::Parameter("trace pts must be a power of two ≥ 8"));
    }
    if !(params.half_width > CHI_OUTER) {
        return Err(CounterexampleError::Parameter("trace half_width must exceed the cutoff radius"));
    }
    let dt = 2.0 * params.half_width / params.pts as f64;
    if !(params.delta_min > 0.0) || dt > params.delta_min {
        return Err(CounterexampleError::Resolution { dt, delta_min: params.delta_min });
    }
    let mut tr = TimeTrace { kind, params, dt, samples: Vec::new(), freqs: Vec::new(), power: Vec::new(), h_half: 0.0 };
    tr.samples = (0..params.pts)
        .into_par_iter()
        .map(|k| {
            let t = -params.half_width + k as f64 * dt;
            tr.cell_average(t - 0.5 * dt, t + 0.5 * dt)
        })
        .collect();
    let mut c: Vec<C64> = tr.samples.iter().map(|&g| C64::new(g, 0.0)).collect();
    dft_nd(&mut c, &[params.pts], Direction::Forward);
    let ds = PI / params.half_width;
    tr.freqs = (0..params.pts).map(|k| signed(k, params.pts) as f64 * ds).collect();
    tr.power = c.iter().map(|z| z.norm_sqr() * dt).collect();
    tr.h_half = tr.spectral_integral(|s| (1.0 + s * s).sqrt()).sqrt();
    Ok(tr)
}

/// Sample χ(t) log log(1/|t|) and compute its H^{1/2} norm with ⟨s⟩^{1/2}.
pub fn build_loglog_trace(params: TraceParams) -> Result<TimeTrace, CounterexampleError> {
    trace_on_lattice(TraceKind::LogLog, params)
}

pub fn gaussian_trace(width: f64, params: TraceParams) -> Result<TimeTrace, CounterexampleError> {
    if !(width > 0.0) {
        return Err(CounterexampleError::Parameter("control width must be positive"));
    }
    trace_on_lattice(TraceKind::Gaussian { width }, params)
}

/// Frequency weights for Bourgain-type norms, with p = τ − |ξ|² + iξₙ
/// (or p_ν when a ν is supplied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Weight {
    /// |p|^s.
    Homogeneous { s: f64 },
    /// |Re p + iρ|^{1/2}.
    Shifted { rho: f64 },
    /// ⟨Re p⟩^b.
    Inhomogeneous { b: f64 },
}

impl Weight {
    fn validate(&self) -> Result<(), CounterexampleError> {
        match *self {
            Weight::Homogeneous { s } if !(s >= 0.0) => Err(CounterexampleError::Weight("s must be nonnegative")),
            Weight::Shifted { rho } if !(rho > 0.0) => Err(CounterexampleError::Weight("ρ must be positive")),
            Weight::Inhomogeneous { b } if !b.is_finite() => Err(CounterexampleError::Weight("b must be finite")),
            _ => Ok(()),
        }
    }

    /// Squared weight at the symbol value p.
    pub fn square(&self, p: C64) -> f64 {
        match *self {
            Weight::Homogeneous { s } => p.norm().powf(2.0 * s),
            Weight::Shifted { rho } => C64::new(p.re, rho).norm(),
            Weight::Inhomogeneous { b } => (1.0 + p.re * p.re).powf(b),
        }
    }
}

/// ‖w(p) û‖₂ over the lattice spectrum of `u`.
pub fn bourgain_norm(u: &Field, weight: &Weight, nu: Option<&NuVector>) -> Result<f64, CounterexampleError> {
    weight.validate()?;
    let spec = u.spec;
    let uh = match u.rep {
        Rep::Physical => u.transform(Direction::Forward),
        Rep::Frequency => u.clone(),
    };
    let m = spec.space_len();
    // Collected before summing so the result does not depend on the thread count.
    let sum: f64 = uh
        .data
        .par_chunks(m)
        .enumerate()
        .map(|(k, row)| {
            let tau = spec.tau(k);
            row.iter()
                .enumerate()
                .filter(|(_, z)| z.norm_sqr() > 0.0)
                .map(|(j, z)| {
                    let xi = spec.freq(j);
                    let p = match nu {
                        Some(nu) => eval_p_nu(tau, &xi[..spec.n], nu),
                        None => eval_p(tau, &xi[..spec.n]),
                    };
                    weight.square(p) * z.norm_sqr()
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((sum * spec.cell()).sqrt())
}

/// Which ρ-family: the frequency ball centred at 2ρeₙ with g(ρt), or
/// the ball at the origin with g(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Shifted,
    Centered,
}

impl Family {
    pub fn id(self) -> &'static str {
        match self {
            Family::Shifted => "shifted",
            Family::Centered => "centered",
        }
    }

    /// Centre of the unit ball in units of ρ along eₙ.
    fn center(self) -> f64 {
        match self {
            Family::Shifted => 2.0,
            Family::Centered => 0.0,
        }
    }

    /// λ in g_ρ(t) = g(λt).
    pub fn time_scale(self, rho: f64) -> f64 {
        match self {
            Family::Shifted => rho,
            Family::Centered => 1.0,
        }
    }

    /// (|x| bound, |t| bound, log log size) of the pointwise lower bound.
    pub fn lower_bound_region(self, rho: f64) -> (f64, f64, f64) {
        match self {
            Family::Shifted => (1.0 / (6.0 * rho), 1.0 / (18.0 * rho * rho), (18.0 * rho).ln().ln()),
            Family::Centered => (1.0 / (2.0 * rho), 1.0 / (2.0 * rho * rho), (2.0 * rho * rho).ln().ln()),
        }
    }
}

/// Lattice of a family member at ρ = 1; member grids shrink the space box
/// by ρ and the time box by ρ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberGrid {
    pub box_time: f64,
    pub box_space: f64,
    pub pts_time: usize,
    pub pts_space: usize,
}

impl Default for MemberGrid {
    fn default() -> Self {
        MemberGrid { box_time: 2.0, box_space: 32.0, pts_time: 128, pts_space: 128 }
    }
}

impl MemberGrid {
    pub fn spec(&self, n: usize, rho: f64) -> Result<GridSpec, CounterexampleError> {
        Ok(GridSpec::new(n, self.box_time / (rho * rho), self.box_space / rho, self.pts_time, self.pts_space)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoFamilyMember {
    pub rho: f64,
    pub family: Family,
    /// f̂_ρ on the spatial frequency lattice (continuum normalization).
    pub f_hat: Slice,
    /// g_ρ(t) = g(λt) cell-averaged on the member's time lattice.
    pub g_rho: Vec<f64>,
    pub u: Field,
}

/// Fraction of the cell around base-lattice frequency `eta` inside the unit
/// ball centred at c·eₙ.
fn ball_fraction(eta: &[f64], c: f64, h: f64) -> f64 {
    const SUB: usize = 8;
    let n = eta.len();
    let total = SUB.pow(n as u32);
    let mut inside = 0;
    for s in 0..total {
        let mut r2 = 0.0;
        let mut rest = s;
        for a in 0..n {
            let off = ((rest % SUB) as f64 + 0.5) / SUB as f64 - 0.5;
            rest /= SUB;
            let d = eta[a] + off * h - if a == n - 1 { c } else { 0.0 };
            r2 += d * d;
        }
        if r2 < 1.0 {
            inside += 1;
        }
    }
    inside as f64 / total as f64
}

/// (2π)^{−n/2} ∫ e^{ix·ξ + it|ξ|²} f̂(ξ) dξ on the lattice of `f_hat`.
pub fn free_evolution(f_hat: &Slice, t: f64) -> Slice {
    let spec = f_hat.spec;
    let n = spec.n;
    let mut s = Slice::zeros(spec);
    s.rep = Rep::Frequency;
    for (j, z) in s.data.iter_mut().enumerate() {
        let f = f_hat.data[j];
        if f.norm_sqr() == 0.0 {
            continue;
        }
        let xi = spec.freq(j);
        let idx = spec.space_index(j);
        let parity: usize = idx[..n].iter().sum();
        let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
        let r2: f64 = xi[..n].iter().map(|x| x * x).sum();
        *z = f * C64::from_polar(sign, t * r2);
    }
    s.transform_in_place(Direction::Inverse);
    let scale = (2.0 * PI).powf(-(n as f64) / 2.0) * spec.dxi().powi(n as i32) * (spec.space_len() as f64).sqrt();
    s.scaled(C64::new(scale, 0.0))
}

/// Assemble u_ρ(t, x) = g_ρ(t) (2π)^{−n/2} ∫ e^{ix·ξ + it|ξ|²} f̂_ρ(ξ) dξ on
/// the ρ-adapted grid.
pub fn build_u_rho(
    rho: f64,
    trace: &TimeTrace,
    n: usize,
    family: Family,
    grid: &MemberGrid,
) -> Result<RhoFamilyMember, CounterexampleError> {
    if !(rho > 0.0) {
        return Err(CounterexampleError::Parameter("ρ must be positive"));
    }
    let spec = grid.spec(n, rho)?;
    let reach = (family.center() + 1.0) * rho;
    let available = (spec.pts_space / 2 - 1) as f64 * spec.dxi();
    if reach > available {
        return Err(CounterexampleError::FreqRange { needed: reach, available });
    }
    // Frequencies in units of ρ come from the base lattice directly, so
    // every member carries the same samples.
    let h = PI / grid.box_space;
    let amp = rho.powf(-(n as f64) / 2.0);
    let mut f_hat = Slice::zeros(spec);
    f_hat.rep = Rep::Frequency;
    for (j, z) in f_hat.data.iter_mut().enumerate() {
        let idx = spec.space_index(j);
        let eta: Vec<f64> = idx[..n].iter().map(|&i| signed(i, spec.pts_space) as f64 * h).collect();
        *z = C64::new(amp * ball_fraction(&eta, family.center(), h), 0.0);
    }
    let lambda = family.time_scale(rho);
    let dt = spec.dt();
    let g_rho: Vec<f64> = (0..spec.pts_time)
        .map(|k| {
            let t = spec.t(k);
            trace.cell_average(lambda * (t - 0.5 * dt), lambda * (t + 0.5 * dt))
        })
        .collect();
    let m = spec.space_len();
    let mut data = vec![C64::new(0.0, 0.0); spec.len()];
    data.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
        if g_rho[k] == 0.0 {
            return;
        }
        let free = free_evolution(&f_hat, spec.t(k));
        for (o, z) in row.iter_mut().zip(&free.data) {
            *o = z * g_rho[k];
        }
    });
    let u = Field::from_data(spec, Rep::Physical, data)?;
    Ok(RhoFamilyMember { rho, family, f_hat, g_rho, u })
}

impl RhoFamilyMember {
    /// ‖f̂_ρ‖₂.
    pub fn f_norm(&self) -> f64 {
        (self.f_hat.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.f_hat.spec.dxi().powi(self.f_hat.spec.n as i32))
            .sqrt()
    }

    /// ‖w(p) û_ρ‖₂ from the product structure: Re p is the frequency of
    /// g_ρ and Im p = ξₙ, so the norm factors through ∫ w |ĝ_ρ|² dσ.
    pub fn weighted_norm(&self, trace: &TimeTrace, weight: &Weight) -> Result<f64, CounterexampleError> {
        weight.validate()?;
        let spec = self.f_hat.spec;
        let n = spec.n;
        let lambda = self.family.time_scale(self.rho);
        // Spectral mass of f̂ per value of ξₙ.
        let mut rows = vec![0.0; spec.pts_space];
        for (j, z) in self.f_hat.data.iter().enumerate() {
            rows[spec.space_index(j)[n - 1]] += z.norm_sqr();
        }
        let cell = spec.dxi().powi(n as i32);
        let total: f64 = rows
            .par_iter()
            .enumerate()
            .filter(|(_, &mass)| mass > 0.0)
            .map(|(i, &mass)| {
                let xin = spec.xi(i);
                let g = trace.spectral_integral(|s| weight.square(C64::new(lambda * s, xin))) / lambda;
                mass * cell * g
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        Ok(total.sqrt())
    }

    /// Smallest |u_ρ| / (ρ^{n/2} L) over the lattice points of the region
    /// where |u_ρ| is bounded below by a multiple of ρ^{n/2} L.
    pub fn lower_bound_constant(&self) -> f64 {
        let spec = self.u.spec;
        let (xr, tr, l) = self.family.lower_bound_region(self.rho);
        let scale = self.rho.powf(spec.n as f64 / 2.0) * l;
        let m = spec.space_len();
        let mut c = f64::INFINITY;
        for k in 0..spec.pts_time {
            if spec.t(k).abs() > tr {
                continue;
            }
            for j in 0..m {
                let p = spec.point(j);
                if p[..spec.n].iter().map(|x| x * x).sum::<f64>().sqrt() <= xr {
                    c = c.min(self.u.data[k * m + j].norm() / scale);
                }
            }
        }
        c
    }
}

/// 2/q′ = n/2 − n/r′, checked exactly.
pub fn check_dual_pair(q: Exponent, r: Exponent, n: usize) -> Result<(), CounterexampleError> {
    let nn = Ratio::from_integer(n as i64);
    if Ratio::from_integer(2) * q.inv() == nn / 2 - nn * r.inv() {
        Ok(())
    } else {
        Err(CounterexampleError::NotAdmissible { q, r, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSweep {
    pub rhos: Vec<f64>,
    pub n: usize,
    /// The dual exponents (q′, r′).
    pub q: Exponent,
    pub r: Exponent,
    pub grid: MemberGrid,
    pub trace: TraceParams,
    /// Width of the Gaussian control trace.
    pub control_width: f64,
    /// Required ratio(last)/ratio(first).
    pub threshold: f64,
    /// Allowed factor between |p|^{1/2} and |Re p + iρ|^{1/2} norms.
    pub comparability: f64,
    /// Allowed spread of the control ratios.
    pub control_spread: f64,
    /// Allowed relative deviation of the shifted-weight norm from ‖g‖_{H^{1/2}}‖f‖.
    pub scaling_tol: f64,
}

impl Default for EmbeddingSweep {
    fn default() -> Self {
        EmbeddingSweep {
            rhos: vec![4.0, 16.0, 64.0, 256.0, 1024.0],
            n: 2,
            q: Exponent::int(4),
            r: Exponent::int(4),
            grid: MemberGrid::default(),
            trace: TraceParams::default(),
            control_width: 0.1,
            threshold: 1.15,
            comparability: 2.0,
            control_spread: 2.0,
            scaling_tol: 0.1,
        }
    }
}

struct Row {
    rho: f64,
    mixed: f64,
    bourgain: f64,
    alt: f64,
    f_norm: f64,
    c: f64,
}

fn family_rows(
    cfg: &EmbeddingSweep,
    trace: &TimeTrace,
    family: Family,
    weight: impl Fn(f64) -> Weight + Sync,
    alt: impl Fn(f64) -> Weight + Sync,
) -> Result<Vec<Row>, CounterexampleError> {
    cfg.rhos
        .par_iter()
        .map(|&rho| {
            let mem = build_u_rho(rho, trace, cfg.n, family, &cfg.grid)?;
            Ok(Row {
                rho,
                mixed: mem.u.mixed_norm(cfg.q, cfg.r)?,
                bourgain: mem.weighted_norm(trace, &weight(rho))?,
                alt: mem.weighted_norm(trace, &alt(rho))?,
                f_norm: mem.f_norm(),
                c: mem.lower_bound_constant(),
            })
        })
        .collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// ratio(ρ) = ‖u_ρ‖_{L^{q′}L^{r′}} / ‖weight·û_ρ‖ for the shifted family
/// (weight |p|^{1/2}), the centred family (weight ⟨Re p⟩^{1/2}) and the
/// shifted family with a Gaussian trace as control.
pub fn embedding_ratio_sweep(cfg: &EmbeddingSweep) -> Result<EstimateReport, CounterexampleError> {
    check_dual_pair(cfg.q, cfg.r, cfg.n)?;
    let mut rep = EstimateReport::new("counterexample");
    rep.param("rho", cfg.rhos.clone());
    rep.param("n", cfg.n as u64);
    rep.param("q_dual", cfg.q.to_string());
    rep.param("r_dual", cfg.r.to_string());
    rep.param("member_grid", serde_json::to_value(cfg.grid).expect("grid serializes"));
    rep.param("trace", serde_json::to_value(cfg.trace).expect("params serialize"));
    rep.param("control_width", cfg.control_width);
    rep.param("threshold", cfg.threshold);
    for &rho in &cfg.rhos {
        rep.grids.push(cfg.grid.spec(cfg.n, rho)?);
    }
    let g = build_loglog_trace(cfg.trace)?;
    let control = gaussian_trace(cfg.control_width, cfg.trace)?;
    let half = Weight::Homogeneous { s: 0.5 };
    let inhom = Weight::Inhomogeneous { b: 0.5 };
    let shifted = family_rows(cfg, &g, Family::Shifted, |_| half, |rho| Weight::Shifted { rho })?;
    let centered = family_rows(cfg, &g, Family::Centered, |_| inhom, |_| inhom)?;
    let ctrl = family_rows(cfg, &control, Family::Shifted, |_| half, |rho| Weight::Shifted { rho })?;
    let ball = unit_ball_l2(cfg.n);
    rep.note("g_h_half", g.h_half);
    rep.note("control_h_half", control.h_half);
    rep.note("unit_ball_l2", ball);

    let mut ratios = |label: &str, rows: &[Row], tr: &TimeTrace| -> Vec<f64> {
        rows.iter()
            .map(|r| {
                let ratio = r.mixed / r.bourgain;
                rep.records.push(
                    Record::new(format!("{label} rho={}", r.rho), None)
                        .with("rho", r.rho)
                        .with("mixed_norm", r.mixed)
                        .with("bourgain_norm", r.bourgain)
                        .with("ratio", ratio)
                        .with("family", label)
                        .with("alt_norm", r.alt)
                        .with("f_norm", r.f_norm)
                        .with("scaling_target", tr.h_half * r.f_norm)
                        .with("lower_bound_c", r.c),
                );
                ratio
            })
            .collect()
    };
    let rs = ratios("shifted", &shifted, &g);
    let rc = ratios("centered", &centered, &g);
    let rg = ratios("control", &ctrl, &control);

    if rs.len() > 1 {
        for (name, v) in [("shifted", &rs), ("centered", &rc)] {
            rep.check(Check::holds(&format!("{name} ratio strictly increasing"), strictly_increasing(v)));
            rep.check(Check::at_least(&format!("{name} last/first"), v[v.len() - 1] / v[0], cfg.threshold));
        }
        rep.check(Check::at_most("control spread", spread(&rg), cfg.control_spread));
    }
    let comp = shifted
        .iter()
        .map(|r| (r.bourgain / r.alt).max(r.alt / r.bourgain))
        .fold(1.0, f64::max);
    rep.check(Check::at_most("|p| vs shifted weight factor", comp, cfg.comparability));
    let dev = shifted
        .iter()
        .chain(&centered)
        .map(|r| (r.alt / (g.h_half * ball) - 1.0).abs())
        .fold(0.0, f64::max);
    rep.check(Check::at_most("weight norm vs ‖g‖_H½‖1_<1‖", dev, cfg.scaling_tol));
    let cs: Vec<f64> = shifted.iter().map(|r| r.c).collect();
    rep.note("lower_bound_c_spread", spread(&cs));
    rep.finish();
    Ok(rep)
}

/// ‖1_{<1}‖₂ in ℝⁿ: the square root of the unit ball volume.
pub fn unit_ball_l2(n: usize) -> f64 {
    match n {
        1 => 2f64.sqrt(),
        2 => PI.sqrt(),
        3 => (4.0 * PI / 3.0).sqrt(),
        _ => f64::NAN,
    }
}

/// ‖u‖_{L²((0,T)×B_R)} over the lattice points with 0 ≤ t < T, |x| < R.
pub fn local_l2(u: &Field, t_end: f64, radius: f64) -> f64 {
    let spec = u.spec;
    let m = spec.space_len();
    let inside: Vec<bool> =
        (0..m).map(|j| spec.point(j)[..spec.n].iter().map(|x| x * x).sum::<f64>() < radius * radius).collect();
    let mut sum = 0.0;
    for k in 0..spec.pts_time {
        let t = spec.t(k);
        if t < 0.0 || t >= t_end {
            continue;
        }
        sum += u.time_slice(k).iter().zip(&inside).filter(|(_, &i)| i).map(|(z, _)| z.norm_sqr()).sum::<f64>();
    }
    (sum * spec.cell()).sqrt()
}

/// |ν|^{1/4} ‖u‖_{L²((0,T)×B_R)} / (T^{1/4} R^{1/4} ‖u‖_{Ẋ^{1/2}_ν}).
pub fn local_smoothing_ratio(u: &Field, nu: &NuVector, t_end: f64, radius: f64) -> Result<f64, CounterexampleError> {
    let x = bourgain_norm(u, &Weight::Homogeneous { s: 0.5 }, Some(nu))?;
    if x == 0.0 {
        return Err(CounterexampleError::ZeroInput);
    }
    Ok(nu.norm().powf(0.25) * local_l2(u, t_end, radius) / ((t_end * radius).powf(0.25) * x))
}

/// Largest local smoothing ratio over the samples for each |ν| along eₙ;
/// the verdict bounds the spread of these maxima.
pub fn local_smoothing_check(
    samples: &[Field],
    nus: &[f64],
    t_end: f64,
    radius: f64,
    max_spread: f64,
) -> Result<EstimateReport, CounterexampleError> {
    if !(t_end > 0.0) || !(radius > 0.0) {
        return Err(CounterexampleError::Parameter("T and R must be positive"));
    }
    if samples.iter().any(|u| u.max_abs() == 0.0) {
        return Err(CounterexampleError::ZeroInput);
    }
    let mut rep = EstimateReport::new("local-smoothing");
    rep.param("nu", nus.to_vec());
    rep.param("t_end", t_end);
    rep.param("radius", radius);
    rep.param("samples", samples.len() as u64);
    if let Some(u) = samples.first() {
        rep.grids.push(u.spec);
    }
    let mut maxima = Vec::new();
    for &m in nus {
        let nu = NuVector::along_last(samples.first().map_or(1, |u| u.spec.n), m)
            .map_err(|_| CounterexampleError::Parameter("ν must be positive"))?;
        let ratios = samples
            .par_iter()
            .map(|u| local_smoothing_ratio(u, &nu, t_end, radius))
            .collect::<Result<Vec<_>, _>>()?;
        let (arg, max) = ratios
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        if ratios.is_empty() {
            continue;
        }
        maxima.push(max);
        rep.records.push(
            Record::new(format!("nu={m}"), None)
                .with("nu", m)
                .with("max_ratio", max)
                .with("argmax", arg as u64)
                .with("min_ratio", ratios.iter().cloned().fold(f64::INFINITY, f64::min)),
        );
    }
    if !maxima.is_empty() {
        rep.note("fitted_constant", maxima.iter().cloned().fold(0.0, f64::max));
        rep.check(Check::at_most("spread of maxima", spread(&maxima), max_spread));
    }
    rep.finish();
    Ok(rep)
}
