//! Physical solutions of i∂ₜu = −Δu + Vu on the spatial lattice by Strang
//! splitting, the initial-to-final-state map U_T, and the integral identity
//! i∫(U¹_T − U²_T)f ḡ = ∫_Σ (V₁ − V₂)u₁v̄₂.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{dft_nd, Direction, Field, GridError, GridSpec, Rep, Slice};
use crate::quad::gauss_legendre;
use crate::report::data_hash;

/// Edge fraction and mass threshold for the aliasing warning.
pub const EDGE_FRACTION: f64 = 0.1;
pub const ALIASING_MASS: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ForwardError {
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("final time must be positive")]
    Time,
    #[error("no probes given")]
    NoProbes,
    #[error(transparent)]
    Grid(#[from] GridError),
}

type PotentialFn = Arc<dyn Fn(f64, &[f64]) -> C64 + Send + Sync>;

/// A time-dependent potential as seen by the solver.
#[derive(Clone)]
pub enum SpaceTimeV {
    Zero,
    /// Lattice samples, linear in time between time nodes, zero outside
    /// the time box.
    Sampled(Field),
    Analytic { name: String, f: PotentialFn },
}

impl fmt::Debug for SpaceTimeV {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTimeV::Zero => write!(f, "Zero"),
            SpaceTimeV::Sampled(v) => write!(f, "Sampled({})", data_hash(&v.data)),
            SpaceTimeV::Analytic { name, .. } => write!(f, "Analytic({name})"),
        }
    }
}

impl SpaceTimeV {
    pub fn analytic<F: Fn(f64, &[f64]) -> C64 + Send + Sync + 'static>(name: &str, f: F) -> Self {
        SpaceTimeV::Analytic { name: name.into(), f: Arc::new(f) }
    }

    /// Provenance string.
    pub fn hash(&self) -> String {
        match self {
            SpaceTimeV::Zero => "zero".into(),
            SpaceTimeV::Sampled(v) => data_hash(&v.data),
            SpaceTimeV::Analytic { name, .. } => name.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SpaceTimeV::Zero)
    }

    /// Values on the spatial lattice of `spec` at time t.
    pub fn at(&self, t: f64, spec: &GridSpec) -> Vec<C64> {
        let ms = spec.space_len();
        match self {
            SpaceTimeV::Zero => vec![C64::new(0.0, 0.0); ms],
            SpaceTimeV::Analytic { f, .. } => (0..ms).map(|j| f(t, &spec.point(j)[..spec.n])).collect(),
            SpaceTimeV::Sampled(v) => {
                let sp = v.spec;
                let s = (t + sp.box_time) / sp.dt();
                if s < 0.0 || s > (sp.pts_time - 1) as f64 {
                    return vec![C64::new(0.0, 0.0); ms];
                }
                let k = (s.floor() as usize).min(sp.pts_time - 2);
                let th = s - k as f64;
                (0..ms).map(|j| v.data[k * ms + j] * (1.0 - th) + v.data[(k + 1) * ms + j] * th).collect()
            }
        }
    }

    /// Average over [t0, t1] by 4-point Gauss–Legendre.
    pub fn cell_average(&self, t0: f64, t1: f64, spec: &GridSpec) -> Vec<C64> {
        let (x, w) = gauss_legendre(4);
        let mut acc = vec![C64::new(0.0, 0.0); spec.space_len()];
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xi;
            for (a, v) in acc.iter_mut().zip(self.at(t, spec)) {
                *a += v * (0.5 * wi);
            }
        }
        acc
    }
}

/// How V enters one split step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// V at the step midpoint; for potentials continuous in time.
    #[default]
    Midpoint,
    /// V averaged over the step; for potentials only integrable in time.
    CellAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveSettings {
    pub t_end: f64,
    pub steps: usize,
    pub sampling: Sampling,
}

impl EvolveSettings {
    pub fn new(t_end: f64, steps: usize) -> Self {
        EvolveSettings { t_end, steps, sampling: Sampling::Midpoint }
    }

    fn validate(&self) -> Result<(), ForwardError> {
        if self.steps == 0 {
            return Err(ForwardError::NoSteps);
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(ForwardError::Time);
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: GridSpec,
    /// t_j = j·T/steps, j = 0..=steps.
    pub times: Vec<f64>,
    pub slices: Vec<Slice>,
    pub mass: Vec<f64>,
    /// max_j |‖u(t_j)‖ − ‖u(0)‖| / ‖u(0)‖.
    pub mass_drift: f64,
    /// Largest edge-band mass fraction over the trajectory.
    pub boundary_mass: f64,
    /// Set when the edge band carries more than ALIASING_MASS.
    pub aliasing_warning: bool,
}

impl Trajectory {
    fn from_slices(spec: GridSpec, times: Vec<f64>, slices: Vec<Slice>) -> Self {
        let mass: Vec<f64> = slices.iter().map(|s| s.l2()).collect();
        let m0 = mass[0];
        let mass_drift = if m0 == 0.0 { 0.0 } else { mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max) };
        let boundary_mass = slices.iter().map(|s| s.boundary_mass(EDGE_FRACTION)).fold(0.0, f64::max);
        Trajectory { spec, times, slices, mass, mass_drift, boundary_mass, aliasing_warning: boundary_mass > ALIASING_MASS }
    }

    pub fn final_state(&self) -> &Slice {
        self.slices.last().expect("trajectory has at least one slice")
    }

    /// The first `pts` slices as a space-time field whose time lattice is
    /// t_j − T/2·(pts·dt)/T, i.e. the box is centred on the middle slice.
    /// `pts` must be a power of two of at least 8 not exceeding the number
    /// of slices.
    pub fn to_field(&self, pts: usize) -> Result<Field, GridError> {
        let dt = self.times.get(1).copied().unwrap_or(1.0) - self.times[0];
        let spec = GridSpec { pts_time: pts, box_time: 0.5 * pts as f64 * dt, ..self.spec };
        spec.validate(usize::MAX)?;
        if pts > self.slices.len() {
            return Err(GridError::Size { expected: pts, got: self.slices.len() });
        }
        let data = self.slices[..pts].iter().flat_map(|s| s.data.iter().copied()).collect();
        Field::from_data(spec, Rep::Physical, data)
    }
}

/// Precomputed free half of the splitting.
struct FreeStep {
    phase: Vec<C64>,
    shape: Vec<usize>,
}

impl FreeStep {
    /// e^{−i|ξ|²dt}, the exact lattice propagator over dt.
    fn new(spec: &GridSpec, dt: f64) -> Self {
        let phase = (0..spec.space_len())
            .map(|j| C64::from_polar(1.0, -dt * spec.freq(j).iter().map(|x| x * x).sum::<f64>()))
            .collect();
        FreeStep { phase, shape: vec![spec.pts_space; spec.n] }
    }

    fn apply(&self, data: &mut [C64]) {
        dft_nd(data, &self.shape, Direction::Forward);
        data.iter_mut().zip(&self.phase).for_each(|(v, p)| *v *= p);
        dft_nd(data, &self.shape, Direction::Inverse);
    }
}

/// Per-step half-potential factors e^{−iṼ dt/2} and the free step, with Ṽ
/// sampled per `Sampling`; shared by every probe of one solve.
struct Schedule {
    spec: GridSpec,
    half: Option<Vec<Vec<C64>>>,
    free: FreeStep,
}

impl Schedule {
    fn new(v: &SpaceTimeV, spec: GridSpec, t0: f64, dt: f64, settings: &EvolveSettings, conj: bool) -> Self {
        let i = C64::new(0.0, 1.0);
        let half = (!v.is_zero()).then(|| {
            (0..settings.steps)
                .into_par_iter()
                .map(|j| {
                    let ta = t0 + j as f64 * dt;
                    let vv = match settings.sampling {
                        Sampling::Midpoint => v.at(ta + 0.5 * dt, &spec),
                        Sampling::CellAverage => v.cell_average(ta.min(ta + dt), ta.max(ta + dt), &spec),
                    };
                    vv.iter().map(|z| (-i * if conj { z.conj() } else { *z } * (0.5 * dt)).exp()).collect()
                })
                .collect()
        });
        Schedule { spec, half, free: FreeStep::new(&spec, dt) }
    }

    fn steps(&self, fallback: usize) -> usize {
        self.half.as_ref().map_or(fallback, |h| h.len())
    }

    /// All slices when `keep` is set, otherwise the input and the final slice.
    fn march(&self, f: &Slice, steps: usize, keep: bool) -> Vec<Slice> {
        let mut u = f.data.clone();
        let mut out = vec![f.clone()];
        let mul = |u: &mut [C64], h: &[C64]| u.iter_mut().zip(h).for_each(|(a, b)| *a *= b);
        for j in 0..self.steps(steps) {
            if let Some(half) = &self.half {
                mul(&mut u, &half[j]);
                self.free.apply(&mut u);
                mul(&mut u, &half[j]);
            } else {
                self.free.apply(&mut u);
            }
            if keep {
                out.push(Slice { spec: self.spec, rep: Rep::Physical, data: u.clone() });
            }
        }
        if !keep {
            out.push(Slice { spec: self.spec, rep: Rep::Physical, data: u });
        }
        out
    }
}

/// u on [0, T] from u(0) = f.
pub fn evolve(v: &SpaceTimeV, f: &Slice, settings: &EvolveSettings) -> Result<Trajectory, ForwardError> {
    settings.validate()?;
    let slices = Schedule::new(v, f.spec, 0.0, settings.dt(), settings, false).march(f, settings.steps, true);
    let times = (0..=settings.steps).map(|j| j as f64 * settings.dt()).collect();
    Ok(Trajectory::from_slices(f.spec, times, slices))
}

/// The final-value problem i∂ₜv = −Δv + V̄v, v(T) = g, solved backward in
/// time; slices are returned in increasing time.
pub fn evolve_final(v: &SpaceTimeV, g: &Slice, settings: &EvolveSettings) -> Result<Trajectory, ForwardError> {
    settings.validate()?;
    let sched = Schedule::new(v, g.spec, settings.t_end, -settings.dt(), settings, true);
    let mut slices = sched.march(g, settings.steps, true);
    slices.reverse();
    let times = (0..=settings.steps).map(|j| j as f64 * settings.dt()).collect();
    Ok(Trajectory::from_slices(g.spec, times, slices))
}

/// One input/output pair of U_T.
#[derive(Debug, Clone, PartialEq)]
pub struct ItfSample {
    pub input: Slice,
    pub output: Slice,
    pub potential_hash: String,
    pub settings: EvolveSettings,
}

/// U_T applied to each probe; probes run in parallel, results keep order.
pub fn itf_map(v: &SpaceTimeV, probes: &[Slice], settings: &EvolveSettings) -> Result<Vec<ItfSample>, ForwardError> {
    if probes.is_empty() {
        return Err(ForwardError::NoProbes);
    }
    settings.validate()?;
    let hash = v.hash();
    let spec = probes[0].spec;
    if probes.iter().any(|p| !p.spec.same_lattice(&spec)) {
        return Err(GridError::GridMismatch.into());
    }
    let sched = Schedule::new(v, spec, 0.0, settings.dt(), settings, false);
    probes
        .par_iter()
        .map(|f| {
            let slices = sched.march(f, settings.steps, false);
            Ok(ItfSample {
                input: f.clone(),
                output: slices.last().unwrap().clone(),
                potential_hash: hash.clone(),
                settings: *settings,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// i∫(U¹_T − U²_T)f ḡ.
    pub lhs: C64,
    /// ∫_Σ(V₁ − V₂)u₁v̄₂ by the trapezoid rule over the step nodes.
    pub rhs: C64,
    pub residual: f64,
    /// ‖V₁ − V₂‖_{L¹_t L^∞_x}·‖f‖₂‖g‖₂, a bound on |rhs|.
    pub scale: f64,
    /// residual / max(|lhs|, scale); zero when both vanish.
    pub normalized: f64,
}

/// Both sides of the integral identity from three independent solves:
/// u₁ and u₂ forward from f, v₂ backward from g with V̄₂.
pub fn integral_identity_check(
    v1: &SpaceTimeV,
    v2: &SpaceTimeV,
    f: &Slice,
    g: &Slice,
    settings: &EvolveSettings,
) -> Result<IdentityCheck, ForwardError> {
    if !f.spec.same_lattice(&g.spec) {
        return Err(GridError::GridMismatch.into());
    }
    let u1 = evolve(v1, f, settings)?;
    let u2 = evolve(v2, f, settings)?;
    let w2 = evolve_final(v2, g, settings)?;
    let i = C64::new(0.0, 1.0);
    let lhs = i * u1.final_state().sub(u2.final_state()).inner(g);
    let spec = f.spec;
    let dt = settings.dt();
    let mut rhs = C64::new(0.0, 0.0);
    let mut vnorm = 0.0;
    for (j, &t) in u1.times.iter().enumerate() {
        let w = if j == 0 || j == settings.steps { 0.5 * dt } else { dt };
        let a = v1.at(t, &spec);
        let b = v2.at(t, &spec);
        let mut s = C64::new(0.0, 0.0);
        let mut sup: f64 = 0.0;
        for k in 0..spec.space_len() {
            let dv = a[k] - b[k];
            sup = sup.max(dv.norm());
            s += dv * u1.slices[j].data[k] * w2.slices[j].data[k].conj();
        }
        rhs += s * spec.space_cell() * w;
        vnorm += sup * w;
    }
    let residual = (lhs - rhs).norm();
    let scale = vnorm * f.l2() * g.l2();
    let denom = lhs.norm().max(scale);
    let normalized = if denom == 0.0 { 0.0 } else { residual / denom };
    Ok(IdentityCheck { lhs, rhs, residual, scale, normalized })
}
