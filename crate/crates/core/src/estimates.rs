//! Ratio harness for the S_ν estimates: the |ν|-compensated hyperplane
//! (gain) ratio, the Strichartz ratio for admissible pairs, and the
//! dispersive ratio of U_s, with sweeps that assemble them into reports.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::grid::{Exponent, ExponentPair, Field, GridError, GridSpec, Slice};
use crate::multipliers::{apply_free, apply_u_s, MultiplierError, MultiplierPlan};
use crate::report::{sample_seed, spread, Check, EstimateReport, Record};
use crate::symbols::{check_admissible, NuVector};

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("input vanishes identically")]
    ZeroInput,
    #[error("ν must be axis-aligned")]
    NotAligned,
    #[error("pair ({q}, {r}) is not admissible for n = {n}")]
    NotAdmissible { q: Exponent, r: Exponent, n: usize },
    #[error("s must be nonzero")]
    ZeroS,
    #[error("{total} lattice points exceed the budget of {budget}")]
    Budget { total: usize, budget: usize },
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Gaussian wave packet e^{−(t−c_t)²/2w_t² − |x−c|²/2w²} e^{i(τ₀t + ξ₀·x)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub center_t: f64,
    pub center: [f64; 3],
    pub width_t: f64,
    pub width: [f64; 3],
    pub tau0: f64,
    pub xi0: [f64; 3],
}

impl Packet {
    pub fn eval(&self, t: f64, x: &[f64]) -> C64 {
        let mut e = -(t - self.center_t).powi(2) / (2.0 * self.width_t * self.width_t);
        let mut ph = self.tau0 * t;
        for a in 0..x.len() {
            e -= (x[a] - self.center[a]).powi(2) / (2.0 * self.width[a] * self.width[a]);
            ph += self.xi0[a] * x[a];
        }
        C64::from_polar(e.exp(), ph)
    }

    pub fn sample(&self, spec: GridSpec) -> Field {
        Field::from_fn(spec, |t, x| self.eval(t, x))
    }

    /// The packet f(s, y) = g(−4|ν|²s, 2|ν|y) for ν = |ν|eₙ, where g is
    /// `self` in the normalized variables of S.
    pub fn nu_frame(&self, m: f64) -> Packet {
        let (ct, cx) = (4.0 * m * m, 2.0 * m);
        Packet {
            center_t: -self.center_t / ct,
            center: self.center.map(|c| c / cx),
            width_t: self.width_t / ct,
            width: self.width.map(|w| w / cx),
            tau0: -self.tau0 * ct,
            xi0: self.xi0.map(|k| k * cx),
        }
    }
}

/// Lattice in ν-natural units: time shrunk by 4|ν|², space by 2|ν|.
pub fn natural_grid(base: GridSpec, m: f64) -> GridSpec {
    GridSpec { box_time: base.box_time / (4.0 * m * m), box_space: base.box_space / (2.0 * m), ..base }
}

/// Ranges for the randomized packet family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub count: usize,
    pub width_min: f64,
    pub width_max: f64,
    pub center_max: f64,
    pub freq_max: f64,
    /// Every `hard_every`-th member sits on the characteristic set.
    pub hard_every: usize,
    /// Characteristic set of the normalized symbol (τ = |ξ|², ξₙ = 0) when
    /// true, of p_ν (τ = −|ξ|², ξ_ν = 0) when false.
    pub normalized: bool,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            count: 12,
            width_min: 0.7,
            width_max: 2.0,
            center_max: 1.0,
            freq_max: 1.2,
            hard_every: 3,
            normalized: true,
        }
    }
}

/// Randomized Gaussian packets with log-uniform widths; every
/// `hard_every`-th one is modulated onto the characteristic set with the
/// ν-axis (last-axis) width stretched. Returns (seed, packet) pairs.
pub fn standard_family(n: usize, fam: &FamilySpec, seed: u64) -> Vec<(u64, Packet)> {
    (0..fam.count)
        .map(|i| {
            let s = sample_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (lo, hi) = (fam.width_min.ln(), fam.width_max.ln());
            let mut logw = || rng.gen_range(lo..=hi).exp();
            let width_t = logw();
            let mut width = [1.0; 3];
            for w in width.iter_mut().take(n) {
                *w = logw();
            }
            let mut center = [0.0; 3];
            let mut xi0 = [0.0; 3];
            for a in 0..n {
                center[a] = rng.gen_range(-fam.center_max..=fam.center_max);
                xi0[a] = rng.gen_range(-fam.freq_max..=fam.freq_max);
            }
            let center_t = rng.gen_range(-fam.center_max..=fam.center_max);
            let hard = fam.hard_every > 0 && i % fam.hard_every == fam.hard_every - 1;
            let r2: f64;
            let tau0 = if hard {
                xi0[n - 1] = 0.0;
                width[n - 1] = fam.width_max;
                r2 = xi0.iter().map(|k| k * k).sum();
                if fam.normalized {
                    r2
                } else {
                    -r2
                }
            } else {
                rng.gen_range(-fam.freq_max..=fam.freq_max)
            };
            (s, Packet { center_t, center, width_t, width, tau0, xi0 })
        })
        .collect()
}

/// |ν|·sup_s‖S_ν f‖_{L²(ℝ×H_s)} / ∫‖f‖_{L²(ℝ×H_s)} ds over the lattice
/// planes perpendicular to ν.
pub fn gain_ratio(f: &Field, nu: &NuVector) -> Result<f64, EstimateError> {
    let (axis, _) = nu.aligned_axis().ok_or(EstimateError::NotAligned)?;
    let plan = MultiplierPlan::conjugated(f.spec, nu)?;
    let denom: f64 = f.hyperplane_profile(axis).iter().sum::<f64>() * f.spec.dx();
    if denom == 0.0 {
        return Err(EstimateError::ZeroInput);
    }
    let u = plan.apply_inverse(f)?;
    let sup = u.hyperplane_profile(axis).into_iter().fold(0.0, f64::max);
    Ok(nu.norm() * sup / denom)
}

/// ‖S_ν f‖_{q′,r′} / ‖f‖_{q,r} for each admissible pair, sharing one
/// application of S_ν.
pub fn strichartz_ratios(f: &Field, pairs: &[ExponentPair], nu: &NuVector) -> Result<Vec<f64>, EstimateError> {
    for p in pairs {
        if !check_admissible(p.q, p.r, p.n).admissible {
            return Err(EstimateError::NotAdmissible { q: p.q, r: p.r, n: p.n });
        }
    }
    let u = MultiplierPlan::conjugated(f.spec, nu)?.apply_inverse(f)?;
    pairs
        .iter()
        .map(|p| {
            let den = f.mixed_norm(p.q, p.r)?;
            if den == 0.0 {
                return Err(EstimateError::ZeroInput);
            }
            Ok(u.mixed_norm(p.q.conjugate(), p.r.conjugate())? / den)
        })
        .collect()
}

pub fn strichartz_ratio(f: &Field, pair: &ExponentPair, nu: &NuVector) -> Result<f64, EstimateError> {
    Ok(strichartz_ratios(f, std::slice::from_ref(pair), nu)?[0])
}

/// |s|^{n/2}‖U_sφ‖_∞/‖φ‖₁.
pub fn dispersive_ratio(phi: &Slice, s: f64) -> Result<f64, EstimateError> {
    if s == 0.0 {
        return Err(EstimateError::ZeroS);
    }
    let l1 = phi.l1();
    if l1 == 0.0 {
        return Err(EstimateError::ZeroInput);
    }
    let u = apply_u_s(phi, s)?;
    Ok(s.abs().powf(phi.spec.n as f64 / 2.0) * u.linf() / l1)
}

/// The same ratio for the free factor e^{is|ξ|²} alone.
pub fn free_dispersive_ratio(phi: &Slice, s: f64) -> Result<f64, EstimateError> {
    if s == 0.0 {
        return Err(EstimateError::ZeroS);
    }
    let l1 = phi.l1();
    if l1 == 0.0 {
        return Err(EstimateError::ZeroInput);
    }
    Ok(s.abs().powf(phi.spec.n as f64 / 2.0) * apply_free(phi, s).linf() / l1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Strichartz,
    Gain,
    Dispersive,
}

impl EstimateKind {
    pub fn id(self) -> &'static str {
        match self {
            EstimateKind::Strichartz => "strichartz",
            EstimateKind::Gain => "gain",
            EstimateKind::Dispersive => "dispersive",
        }
    }
}

/// Where the sweep places its lattice for each ν.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    /// One lattice for every ν; the family lives on it directly.
    Fixed,
    /// The lattice and family are given in the normalized variables of S
    /// and carried to each ν by σ = −4|ν|²τ, η = 2|ν|ξ.
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: EstimateKind,
    pub grid: GridSpec,
    pub grid_mode: GridMode,
    pub nus: Vec<f64>,
    /// (q, r) pairs for Strichartz sweeps.
    pub pairs: Vec<(Exponent, Exponent)>,
    /// Times s for dispersive sweeps.
    pub times: Vec<f64>,
    pub family: FamilySpec,
    pub seed: u64,
    /// Ceiling on max/min over ν of the per-ν worst ratio.
    pub spread_ceiling: f64,
    /// Ceiling on the largest ratio.
    pub ceiling: f64,
    pub max_points: usize,
}

impl SweepConfig {
    pub fn new(kind: EstimateKind, grid: GridSpec) -> Self {
        SweepConfig {
            kind,
            grid,
            grid_mode: GridMode::Fixed,
            nus: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            pairs: Vec::new(),
            times: Vec::new(),
            family: FamilySpec::default(),
            seed: 0,
            spread_ceiling: 10.0,
            ceiling: 1e6,
            max_points: crate::grid::DEFAULT_MAX_POINTS,
        }
    }
}

/// Run one estimate sweep. Deterministic in the configuration.
pub fn run_sweep(cfg: &SweepConfig) -> Result<EstimateReport, EstimateError> {
    if cfg.grid.len() > cfg.max_points {
        return Err(EstimateError::Budget { total: cfg.grid.len(), budget: cfg.max_points });
    }
    let mut rep = EstimateReport::new(cfg.kind.id());
    rep.param("grid_mode", serde_json::to_value(cfg.grid_mode).unwrap_or_default());
    rep.param("nu", cfg.nus.clone());
    rep.param("seed", cfg.seed);
    rep.param("family", serde_json::to_value(&cfg.family).unwrap_or_default());
    match cfg.kind {
        EstimateKind::Strichartz => strichartz_sweep(cfg, &mut rep)?,
        EstimateKind::Gain => gain_sweep(cfg, &mut rep)?,
        EstimateKind::Dispersive => dispersive_sweep(cfg, &mut rep)?,
    }
    rep.finish();
    Ok(rep)
}

fn nu_grid(cfg: &SweepConfig, m: f64) -> GridSpec {
    match cfg.grid_mode {
        GridMode::Fixed => cfg.grid,
        GridMode::Natural => natural_grid(cfg.grid, m),
    }
}

fn nu_packet(cfg: &SweepConfig, p: &Packet, m: f64) -> Packet {
    match cfg.grid_mode {
        GridMode::Fixed => p.clone(),
        GridMode::Natural => p.nu_frame(m),
    }
}

/// Per-ν worst ratio, recorded as a spread check and a ceiling check.
fn uniformity_checks(rep: &mut EstimateReport, label: &str, nus: &[f64], worst: &[f64], cfg: &SweepConfig) {
    let sp = spread(worst);
    let max = worst.iter().cloned().fold(0.0, f64::max);
    rep.note(&format!("{label}worst_per_nu"), worst.to_vec());
    rep.note(&format!("{label}spread"), sp);
    rep.check(Check::at_most(&format!("{label}spread over nu"), sp, cfg.spread_ceiling));
    rep.check(Check::at_most(&format!("{label}max ratio"), max, cfg.ceiling));
    let _ = nus;
}

fn strichartz_sweep(cfg: &SweepConfig, rep: &mut EstimateReport) -> Result<(), EstimateError> {
    let n = cfg.grid.n;
    let pairs: Vec<ExponentPair> = cfg.pairs.iter().map(|&(q, r)| ExponentPair::new(q, r, n)).collect();
    rep.param("pairs", pairs.iter().map(|p| format!("({}, {})", p.q, p.r)).collect::<Vec<_>>());
    let family = standard_family(n, &cfg.family, cfg.seed);
    let mut worst = vec![vec![0.0f64; cfg.nus.len()]; pairs.len()];
    for (iv, &m) in cfg.nus.iter().enumerate() {
        let nu = NuVector::along_last(n, m).map_err(|_| EstimateError::ZeroInput)?;
        let spec = nu_grid(cfg, m);
        rep.grids.push(spec);
        let rows: Vec<Result<(u64, Vec<f64>, f64), EstimateError>> = family
            .par_iter()
            .map(|(seed, p)| {
                let f = nu_packet(cfg, p, m).sample(spec);
                Ok((*seed, strichartz_ratios(&f, &pairs, &nu)?, f.boundary_mass(0.1)))
            })
            .collect();
        for row in rows {
            let (seed, ratios, edge) = row?;
            for (ip, r) in ratios.iter().enumerate() {
                worst[ip][iv] = worst[ip][iv].max(*r);
                rep.records.push(
                    Record::new(format!("nu={m} pair=({}, {})", pairs[ip].q, pairs[ip].r), Some(seed))
                        .with("nu", m)
                        .with("q", pairs[ip].q.value())
                        .with("r", pairs[ip].r.value())
                        .with("ratio", *r)
                        .with("boundary_mass", edge),
                );
            }
        }
    }
    for (ip, p) in pairs.iter().enumerate() {
        uniformity_checks(rep, &format!("({}, {}) ", p.q, p.r), &cfg.nus, &worst[ip], cfg);
    }
    Ok(())
}

fn gain_sweep(cfg: &SweepConfig, rep: &mut EstimateReport) -> Result<(), EstimateError> {
    let n = cfg.grid.n;
    let family = standard_family(n, &cfg.family, cfg.seed);
    let mut worst = vec![0.0f64; cfg.nus.len()];
    for (iv, &m) in cfg.nus.iter().enumerate() {
        let nu = NuVector::along_last(n, m).map_err(|_| EstimateError::ZeroInput)?;
        let spec = nu_grid(cfg, m);
        rep.grids.push(spec);
        let rows: Vec<Result<(u64, f64, f64), EstimateError>> = family
            .par_iter()
            .map(|(seed, p)| {
                let f = nu_packet(cfg, p, m).sample(spec);
                Ok((*seed, gain_ratio(&f, &nu)?, f.boundary_mass(0.1)))
            })
            .collect();
        for row in rows {
            let (seed, r, edge) = row?;
            worst[iv] = worst[iv].max(r);
            rep.records.push(
                Record::new(format!("nu={m}"), Some(seed)).with("nu", m).with("ratio", r).with("boundary_mass", edge),
            );
        }
    }
    uniformity_checks(rep, "", &cfg.nus, &worst, cfg);
    Ok(())
}

fn dispersive_sweep(cfg: &SweepConfig, rep: &mut EstimateReport) -> Result<(), EstimateError> {
    let n = cfg.grid.n;
    rep.param("times", cfg.times.clone());
    rep.grids.push(cfg.grid);
    let family = standard_family(n, &cfg.family, cfg.seed);
    let mut all = Vec::new();
    for (seed, p) in &family {
        let phi = Slice::from_fn(cfg.grid, |x| p.eval(0.0, x));
        for &s in &cfg.times {
            let r = dispersive_ratio(&phi, s)?;
            all.push(r);
            rep.records.push(Record::new(format!("s={s}"), Some(*seed)).with("s", s).with("ratio", r));
        }
    }
    let max = all.iter().cloned().fold(0.0, f64::max);
    rep.note("max_ratio", max);
    // the bound carries the constant (4π)^{−n/2} for the free propagator
    rep.note("free_constant", (4.0 * PI).powf(-(n as f64) / 2.0));
    rep.check(Check::at_most("max ratio", max, cfg.ceiling));
    Ok(())
}

/// Summary line used by reports and the CLI.
pub fn describe(rep: &EstimateReport) -> serde_json::Value {
    json!({ "estimate": rep.estimate, "verdict": rep.verdict, "records": rep.records.len() })
}
