//! The Fourier multipliers S = 1/p and S_ν = 1/p_ν, the one-time
//! propagators U_s and U_t*U_s, and the time-slice (propagator) form of S
//! with its dyadic pieces.
//!
//! Multipliers act on a twisted lattice: the frequency samples are shifted
//! by a fraction of the spacing, which the DFT realizes by a phase ramp in
//! physical space. The shift keeps the lattice off the characteristic set
//! (ξₙ = 0 for S; τ = 0 and the hyperplane ν·ξ = 0 for S_ν). Modes whose
//! symbol still falls below the floor are zeroed and counted.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{dft_nd, signed, Direction, Field, GridError, GridSpec, Rep, Slice};
use crate::quad::gauss_legendre;
use crate::symbols::{eval_p, eval_p_nu, NuVector};

/// Relative symbol floor below which modes are dropped.
pub const FLOOR_REL: f64 = 1e-12;

/// Innermost dyadic shell resolved by the propagator form; everything in
/// (0, 2^SHELL_MIN] is one panel.
pub const SHELL_MIN: i32 = -12;

const GL_ORDER: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum MultiplierError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("ν has {nu} components but the grid has n = {n}")]
    Dimension { nu: usize, n: usize },
    #[error("s must be nonzero")]
    ZeroS,
    #[error("U_t*U_s needs st > 0, got s = {s}, t = {t}")]
    MixedSigns { s: f64, t: f64 },
}

/// Frequency-lattice offsets as fractions of the lattice spacing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Offsets {
    pub tau: f64,
    pub xi: [f64; 3],
}

impl Offsets {
    pub const NONE: Offsets = Offsets { tau: 0.0, xi: [0.0; 3] };

    fn is_zero_space(&self) -> bool {
        self.xi.iter().all(|&d| d == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierPlan {
    pub spec: GridSpec,
    pub nu: Option<NuVector>,
    pub offsets: Offsets,
    /// Absolute floor: FLOOR_REL times the largest |symbol| on the lattice.
    pub floor: f64,
    /// Lattice modes with |symbol| < floor.
    pub dropped: usize,
}

impl MultiplierPlan {
    /// Plan for S, with ξₙ shifted by half a spacing.
    pub fn normalized(spec: GridSpec) -> Self {
        let mut off = Offsets::NONE;
        off.xi[spec.n - 1] = 0.5;
        Self::build(spec, None, off)
    }

    /// Plan for S_ν, with τ shifted by half a spacing and, for axis-aligned
    /// ν, the ν axis shifted by half a spacing as well.
    pub fn conjugated(spec: GridSpec, nu: &NuVector) -> Result<Self, MultiplierError> {
        if nu.dim() != spec.n {
            return Err(MultiplierError::Dimension { nu: nu.dim(), n: spec.n });
        }
        let mut off = Offsets { tau: 0.5, xi: [0.0; 3] };
        if let Some((a, _)) = nu.aligned_axis() {
            off.xi[a] = 0.5;
        }
        Ok(Self::build(spec, Some(nu.clone()), off))
    }

    pub fn with_offsets(self, offsets: Offsets) -> Self {
        Self::build(self.spec, self.nu, offsets)
    }

    fn build(spec: GridSpec, nu: Option<NuVector>, offsets: Offsets) -> Self {
        let mut plan = MultiplierPlan { spec, nu, offsets, floor: 0.0, dropped: 0 };
        let m = spec.space_len();
        let scale = (0..spec.pts_time)
            .into_par_iter()
            .map(|k| {
                let tau = plan.tau(k);
                (0..m).map(|j| plan.symbol(tau, &plan.xi(j)).norm()).fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        plan.floor = FLOOR_REL * scale.max(f64::MIN_POSITIVE);
        plan.dropped = (0..spec.pts_time)
            .into_par_iter()
            .map(|k| {
                let tau = plan.tau(k);
                (0..m).filter(|&j| plan.symbol(tau, &plan.xi(j)).norm() < plan.floor).count()
            })
            .sum();
        plan
    }

    /// Time frequency of bin `k` on the twisted lattice.
    pub fn tau(&self, k: usize) -> f64 {
        (signed(k, self.spec.pts_time) as f64 + self.offsets.tau) * self.spec.dtau()
    }

    /// Spatial frequency of flat bin `j` on the twisted lattice.
    pub fn xi(&self, j: usize) -> [f64; 3] {
        let idx = self.spec.space_index(j);
        let mut xi = [0.0; 3];
        for a in 0..self.spec.n {
            xi[a] = (signed(idx[a], self.spec.pts_space) as f64 + self.offsets.xi[a]) * self.spec.dxi();
        }
        xi
    }

    /// p_ν for conjugated plans, p otherwise.
    pub fn symbol(&self, tau: f64, xi: &[f64; 3]) -> C64 {
        let xi = &xi[..self.spec.n];
        match &self.nu {
            Some(nu) => eval_p_nu(tau, xi, nu),
            None => eval_p(tau, xi),
        }
    }

    /// Apply the multiplier `m(τ, ξ)` on this plan's lattice.
    pub fn apply_with<F>(&self, f: &Field, m: F) -> Result<Field, MultiplierError>
    where
        F: Fn(f64, &[f64; 3]) -> C64 + Sync,
    {
        if f.rep != Rep::Physical {
            return Err(GridError::Rep(f.rep).into());
        }
        if !f.spec.same_lattice(&self.spec) {
            return Err(GridError::GridMismatch.into());
        }
        let sp = self.spec;
        let ms = sp.space_len();
        let tw_t = ramp(sp.pts_time, self.offsets.tau);
        let tw_x: Vec<Vec<C64>> = (0..sp.n).map(|a| ramp(sp.pts_space, self.offsets.xi[a])).collect();
        let tw_space: Vec<C64> =
            (0..ms).map(|j| space_phase(&sp, j, &tw_x)).collect();
        let mut data = f.data.clone();
        twist(&mut data, ms, &tw_t, &tw_space, false);
        dft_nd(&mut data, &sp.shape(), Direction::Forward);
        data.par_chunks_mut(ms).enumerate().for_each(|(k, row)| {
            let tau = self.tau(k);
            for (j, v) in row.iter_mut().enumerate() {
                *v *= m(tau, &self.xi(j));
            }
        });
        dft_nd(&mut data, &sp.shape(), Direction::Inverse);
        twist(&mut data, ms, &tw_t, &tw_space, true);
        Ok(Field { spec: sp, rep: Rep::Physical, data })
    }

    /// Division by the symbol; modes below the floor are zeroed.
    pub fn apply_inverse(&self, f: &Field) -> Result<Field, MultiplierError> {
        let floor = self.floor;
        self.apply_with(f, |tau, xi| {
            let p = self.symbol(tau, xi);
            if p.norm() < floor {
                C64::new(0.0, 0.0)
            } else {
                p.inv()
            }
        })
    }

    /// Multiplication by the symbol (the differential operator itself).
    pub fn apply_symbol(&self, f: &Field) -> Result<Field, MultiplierError> {
        self.apply_with(f, |tau, xi| self.symbol(tau, xi))
    }

    /// Largest value of |f̂| over dropped modes relative to max |f̂|; zero
    /// means `f` does not see the characteristic set.
    pub fn dropped_weight(&self, f: &Field) -> Result<f64, MultiplierError> {
        let spectrum = self.spectrum(f)?;
        let ms = self.spec.space_len();
        let max = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for (i, z) in spectrum.iter().enumerate() {
            let p = self.symbol(self.tau(i / ms), &self.xi(i % ms));
            if p.norm() < self.floor {
                worst = worst.max(z.norm() / max);
            }
        }
        Ok(worst)
    }

    /// Twisted-lattice spectrum of `f`: entry (k, j) is the coefficient of
    /// the mode at (tau(k), xi(j)).
    pub fn spectrum(&self, f: &Field) -> Result<Vec<C64>, MultiplierError> {
        if f.rep != Rep::Physical {
            return Err(GridError::Rep(f.rep).into());
        }
        let sp = self.spec;
        let ms = sp.space_len();
        let tw_t = ramp(sp.pts_time, self.offsets.tau);
        let tw_x: Vec<Vec<C64>> = (0..sp.n).map(|a| ramp(sp.pts_space, self.offsets.xi[a])).collect();
        let tw_space: Vec<C64> = (0..ms).map(|j| space_phase(&sp, j, &tw_x)).collect();
        let mut data = f.data.clone();
        twist(&mut data, ms, &tw_t, &tw_space, false);
        dft_nd(&mut data, &sp.shape(), Direction::Forward);
        Ok(data)
    }
}

/// e^{−2πi δ k / N}, the phase that moves bin m to frequency m + δ.
fn ramp(len: usize, delta: f64) -> Vec<C64> {
    (0..len)
        .map(|k| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * delta * k as f64 / len as f64))
        .collect()
}

fn space_phase(sp: &GridSpec, j: usize, tw_x: &[Vec<C64>]) -> C64 {
    let idx = sp.space_index(j);
    (0..sp.n).map(|a| tw_x[a][idx[a]]).product()
}

fn twist(data: &mut [C64], ms: usize, tw_t: &[C64], tw_space: &[C64], undo: bool) {
    data.par_chunks_mut(ms).enumerate().for_each(|(k, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let ph = tw_t[k] * tw_space[j];
            *v *= if undo { ph.conj() } else { ph };
        }
    });
}

/// S f on the normalized plan.
pub fn apply_s(f: &Field) -> Result<Field, MultiplierError> {
    MultiplierPlan::normalized(f.spec).apply_inverse(f)
}

/// S_ν f on the conjugated plan for ν.
pub fn apply_s_nu(f: &Field, nu: &NuVector) -> Result<Field, MultiplierError> {
    MultiplierPlan::conjugated(f.spec, nu)?.apply_inverse(f)
}

/// (i∂ₜ + Δ + 2ν·∇)u with every derivative taken spectrally on the plan's
/// lattice and the terms summed separately.
pub fn apply_l_nu(plan: &MultiplierPlan, u: &Field, nu: &NuVector) -> Result<Field, MultiplierError> {
    let i = C64::new(0.0, 1.0);
    // i∂ₜ ↦ i·(iτ) = −τ
    let mut out = plan.apply_with(u, |tau, _| C64::new(-tau, 0.0))?;
    for a in 0..plan.spec.n {
        let second = plan.apply_with(u, |_, xi| C64::new(-xi[a] * xi[a], 0.0))?;
        out.add_assign(&second);
        if nu.comps()[a] != 0.0 {
            let mut first = plan.apply_with(u, |_, xi| i * xi[a])?;
            first.scale(C64::new(2.0 * nu.comps()[a], 0.0));
            out.add_assign(&first);
        }
    }
    Ok(out)
}

/// (−i∂ₜ + Δ + ∂ₙ)u spectrally, the operator inverted by S.
pub fn apply_l(plan: &MultiplierPlan, u: &Field) -> Result<Field, MultiplierError> {
    let i = C64::new(0.0, 1.0);
    let n = plan.spec.n;
    let mut out = plan.apply_with(u, |tau, _| C64::new(tau, 0.0))?;
    for a in 0..n {
        out.add_assign(&plan.apply_with(u, |_, xi| C64::new(-xi[a] * xi[a], 0.0))?);
    }
    out.add_assign(&plan.apply_with(u, |_, xi| i * xi[n - 1])?);
    Ok(out)
}

/// Spatial multiplier on a slice, with ξ shifted by `xi_off` spacings.
pub fn slice_apply<F>(phi: &Slice, xi_off: [f64; 3], m: F) -> Slice
where
    F: Fn(&[f64; 3]) -> C64 + Sync,
{
    let sp = phi.spec;
    let ms = sp.space_len();
    let twisted = !Offsets { tau: 0.0, xi: xi_off }.is_zero_space();
    let tw_x: Vec<Vec<C64>> = (0..sp.n).map(|a| ramp(sp.pts_space, xi_off[a])).collect();
    let tw: Vec<C64> = (0..ms).map(|j| space_phase(&sp, j, &tw_x)).collect();
    let mut data = phi.data.clone();
    if twisted {
        data.iter_mut().zip(&tw).for_each(|(v, p)| *v *= p);
    }
    dft_nd(&mut data, &vec![sp.pts_space; sp.n], Direction::Forward);
    data.par_iter_mut().enumerate().for_each(|(j, v)| {
        let idx = sp.space_index(j);
        let mut xi = [0.0; 3];
        for a in 0..sp.n {
            xi[a] = (signed(idx[a], sp.pts_space) as f64 + xi_off[a]) * sp.dxi();
        }
        *v *= m(&xi);
    });
    dft_nd(&mut data, &vec![sp.pts_space; sp.n], Direction::Inverse);
    if twisted {
        data.iter_mut().zip(&tw).for_each(|(v, p)| *v *= p.conj());
    }
    Slice { spec: sp, rep: Rep::Physical, data }
}

fn half_last(n: usize) -> [f64; 3] {
    let mut off = [0.0; 3];
    off[n - 1] = 0.5;
    off
}

/// U_s multiplier i·sign(s)·e^{is|ξ|²}·1(sξₙ < 0)·e^{sξₙ}.
pub fn u_s_symbol(s: f64, xi: &[f64]) -> C64 {
    let xn = *xi.last().unwrap_or(&0.0);
    if s * xn >= 0.0 {
        return C64::new(0.0, 0.0);
    }
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    C64::new(0.0, s.signum()) * C64::from_polar((s * xn).exp(), s * r2)
}

/// U_s φ on the lattice with ξₙ shifted by half a spacing.
pub fn apply_u_s(phi: &Slice, s: f64) -> Result<Slice, MultiplierError> {
    if s == 0.0 {
        return Err(MultiplierError::ZeroS);
    }
    let n = phi.spec.n;
    Ok(slice_apply(phi, half_last(n), |xi| u_s_symbol(s, &xi[..n])))
}

/// The free factor e^{is|ξ|²} alone, on the unshifted lattice.
pub fn apply_free(phi: &Slice, s: f64) -> Slice {
    slice_apply(phi, [0.0; 3], |xi| C64::from_polar(1.0, s * xi.iter().map(|x| x * x).sum::<f64>()))
}

/// U_t*U_s multiplier 1(st > 0)·e^{i(s−t)|ξ|²}·1((s+t)ξₙ < 0)·e^{(s+t)ξₙ}.
pub fn ut_star_us_symbol(s: f64, t: f64, xi: &[f64]) -> C64 {
    let xn = *xi.last().unwrap_or(&0.0);
    if s * t <= 0.0 || (s + t) * xn >= 0.0 {
        return C64::new(0.0, 0.0);
    }
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    C64::from_polar(((s + t) * xn).exp(), (s - t) * r2)
}

pub fn apply_ut_star_us(phi: &Slice, s: f64, t: f64) -> Result<Slice, MultiplierError> {
    if s * t <= 0.0 {
        return Err(MultiplierError::MixedSigns { s, t });
    }
    let n = phi.spec.n;
    Ok(slice_apply(phi, half_last(n), |xi| ut_star_us_symbol(s, t, &xi[..n])))
}

/// Quadrature nodes (s, w) for ∫ over `0 < |s| ≤ t_max` restricted to the
/// shells selected by `shell`: `Some(j)` keeps 2^{j−1} < |s| ≤ 2^j, `None`
/// keeps everything. Shell SHELL_MIN also holds everything below it, so
/// lower shells are empty. Panels are at most `4/omega` wide.
pub fn s_nodes(t_max: f64, omega: f64, shell: Option<i32>) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(GL_ORDER);
    let j_max = t_max.log2().ceil() as i32;
    let mut intervals = Vec::new();
    match shell {
        None => {
            intervals.push((0.0, 2f64.powi(SHELL_MIN).min(t_max)));
            for j in SHELL_MIN + 1..=j_max {
                intervals.push((2f64.powi(j - 1), 2f64.powi(j)));
            }
        }
        Some(j) if j == SHELL_MIN => intervals.push((0.0, 2f64.powi(j))),
        Some(j) if j > SHELL_MIN => intervals.push((2f64.powi(j - 1), 2f64.powi(j))),
        Some(_) => {}
    }
    let width = 4.0 / omega.max(1e-300);
    let mut nodes = Vec::new();
    for (a, b) in intervals {
        let b = b.min(t_max);
        if b <= a {
            continue;
        }
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let s = c + 0.5 * h * x;
                nodes.push((s, 0.5 * h * w));
                nodes.push((-s, 0.5 * h * w));
            }
        }
    }
    nodes
}

/// Relative amplitude below which spectral modes are skipped by the
/// propagator form.
pub const SPECTRUM_CUT: f64 = 1e-14;

/// Σ_nodes w e^{−iτs} U_s(ξ) on the modes of `f` above SPECTRUM_CUT.
fn propagate(f: &Field, shell: Option<i32>) -> Result<Field, MultiplierError> {
    let plan = MultiplierPlan::normalized(f.spec);
    let spectrum = plan.spectrum(f)?;
    let sp = f.spec;
    let ms = sp.space_len();
    let n = sp.n;
    let max = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Field::zeros(sp));
    }
    let keep: Vec<usize> = (0..spectrum.len()).filter(|&i| spectrum[i].norm() > SPECTRUM_CUT * max).collect();
    let omega = keep
        .iter()
        .map(|&i| {
            let xi = plan.xi(i % ms);
            let r2: f64 = xi[..n].iter().map(|x| x * x).sum();
            (plan.tau(i / ms) - r2).abs() + xi[n - 1].abs()
        })
        .fold(1.0, f64::max);
    let nodes = s_nodes(sp.box_time, omega, shell);
    let mult: Vec<C64> = keep
        .par_iter()
        .map(|&i| {
            let tau = plan.tau(i / ms);
            let xi = plan.xi(i % ms);
            nodes.iter().map(|&(s, w)| C64::from_polar(w, -tau * s) * u_s_symbol(s, &xi[..n])).sum()
        })
        .collect();
    plan.apply_with(f, |tau, xi| {
        // modes outside `keep` carry no weight; look the multiplier up
        let k = bin(tau, sp.dtau(), plan.offsets.tau, sp.pts_time);
        let j = (0..n).fold(0, |acc, a| {
            acc * sp.pts_space + bin(xi[a], sp.dxi(), plan.offsets.xi[a], sp.pts_space)
        });
        match keep.binary_search(&(k * ms + j)) {
            Ok(p) => mult[p],
            Err(_) => C64::new(0.0, 0.0),
        }
    })
}

fn bin(freq: f64, spacing: f64, off: f64, len: usize) -> usize {
    let m = (freq / spacing - off).round() as i64;
    m.rem_euclid(len as i64) as usize
}

/// S f through Sf(t) = ∫ U_s f(t − s) ds over |s| ≤ box_time, Gauss–Legendre
/// panels on dyadic shells.
pub fn apply_s_via_propagator(f: &Field) -> Result<Field, MultiplierError> {
    propagate(f, None)
}

/// The piece of the propagator form with 2^{j−1} < |s| ≤ 2^j.
pub fn apply_s_dyadic(f: &Field, j: i32) -> Result<Field, MultiplierError> {
    if j < SHELL_MIN || 2f64.powi(j - 1) >= f.spec.box_time {
        return Ok(Field::zeros(f.spec));
    }
    propagate(f, Some(j))
}

/// Largest shell index with quadrature support.
pub fn top_shell(spec: &GridSpec) -> i32 {
    spec.box_time.log2().ceil() as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::ScalingMap;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize, bt: f64, bx: f64, nt: usize, nx: usize) -> GridSpec {
        GridSpec::new(n, bt, bx, nt, nx).unwrap()
    }

    fn rel(a: &Field, b: &Field) -> f64 {
        a.sub(b).l2() / b.l2()
    }

    /// Gaussian packet in time and space with spatial modulation `k`.
    fn packet(sp: GridSpec, w: f64, k: [f64; 3], c: [f64; 3]) -> Field {
        Field::from_fn(sp, |t, x| {
            let mut r2 = t * t / 4.0;
            let mut ph = 0.0;
            for a in 0..x.len() {
                r2 += (x[a] - c[a]).powi(2) / (w * w);
                ph += k[a] * x[a];
            }
            C64::from_polar((-r2).exp(), ph)
        })
    }

    #[test]
    fn zero_maps_to_zero() {
        let sp = spec(2, 4.0, 4.0, 16, 16);
        let z = Field::zeros(sp);
        assert_eq!(apply_s(&z).unwrap().max_abs(), 0.0);
        let nu = NuVector::along_last(2, 4.0).unwrap();
        assert_eq!(apply_s_nu(&z, &nu).unwrap().max_abs(), 0.0);
        assert_eq!(apply_s_via_propagator(&z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn single_mode_is_scaled_by_inverse_symbol() {
        let sp = spec(2, 3.0, 5.0, 16, 16);
        let nu = NuVector::along(2, 0, 4.0).unwrap();
        let plan = MultiplierPlan::conjugated(sp, &nu).unwrap();
        // mode at twisted bins (k, j) = (3, (2, 5))
        let (tau, xi) = (plan.tau(3), plan.xi(sp.space_flat(&[2, 5])));
        let f = Field::from_fn(sp, |t, x| C64::from_polar(1.0, tau * t + xi[0] * x[0] + xi[1] * x[1]));
        let got = plan.apply_inverse(&f).unwrap();
        let mut want = f.clone();
        want.scale(plan.symbol(tau, &xi).inv());
        assert!(rel(&got, &want) < 1e-12);

        let norm = MultiplierPlan::normalized(sp);
        let (tau, xi) = (norm.tau(5), norm.xi(sp.space_flat(&[1, 14])));
        let f = Field::from_fn(sp, |t, x| C64::from_polar(1.0, tau * t + xi[0] * x[0] + xi[1] * x[1]));
        let mut want = f.clone();
        want.scale(eval_p(tau, &xi[..2]).inv());
        assert!(rel(&apply_s(&f).unwrap(), &want) < 1e-12);
    }

    #[test]
    fn symbol_times_s_reproduces_input_spectrum() {
        let sp = spec(2, 6.0, 6.0, 16, 32);
        let f = packet(sp, 1.2, [0.0, 1.5, 0.0], [0.3, -0.2, 0.0]);
        let plan = MultiplierPlan::normalized(sp);
        let sf = plan.apply_inverse(&f).unwrap();
        let a = plan.spectrum(&sf).unwrap();
        let b = plan.spectrum(&f).unwrap();
        let ms = sp.space_len();
        let mut worst: f64 = 0.0;
        for i in 0..a.len() {
            let p = plan.symbol(plan.tau(i / ms), &plan.xi(i % ms));
            worst = worst.max((p * a[i] - b[i]).norm());
        }
        assert_eq!(plan.dropped, 0);
        assert!(worst < 1e-10 * f.l2_samples(), "{worst}");
    }

    #[test]
    fn pde_residual_of_s_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=2 {
            for &m in &[4.0, 16.0, 64.0] {
                let sp = spec(n, 4.0, 4.0, 32, 32);
                let nu = NuVector::along_last(n, m).unwrap();
                let c = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0];
                let k = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0];
                let f = packet(sp, 0.8, k, c);
                let plan = MultiplierPlan::conjugated(sp, &nu).unwrap();
                assert_eq!(plan.dropped, 0);
                let u = plan.apply_inverse(&f).unwrap();
                let r = apply_l_nu(&plan, &u, &nu).unwrap();
                assert!(rel(&r, &f) < 1e-8, "n={n} ν={m}: {}", rel(&r, &f));
            }
        }
    }

    #[test]
    fn l_inverts_s() {
        let sp = spec(2, 4.0, 4.0, 16, 16);
        let f = packet(sp, 0.9, [0.5, 2.0, 0.0], [0.0; 3]);
        let plan = MultiplierPlan::normalized(sp);
        let u = plan.apply_inverse(&f).unwrap();
        assert!(rel(&apply_l(&plan, &u).unwrap(), &f) < 1e-10);
    }

    /// Count lattice points with |symbol| < floor by a direct loop.
    fn count_near(plan: &MultiplierPlan) -> usize {
        let sp = plan.spec;
        let mut count = 0;
        for k in 0..sp.pts_time {
            let mt = signed(k, sp.pts_time) as f64 + plan.offsets.tau;
            for j in 0..sp.space_len() {
                let idx = sp.space_index(j);
                let xi: Vec<f64> = (0..sp.n)
                    .map(|a| (signed(idx[a], sp.pts_space) as f64 + plan.offsets.xi[a]) * sp.dxi())
                    .collect();
                let p = match &plan.nu {
                    Some(nu) => eval_p_nu(mt * sp.dtau(), &xi, nu),
                    None => eval_p(mt * sp.dtau(), &xi),
                };
                if p.norm() < plan.floor {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn dropped_modes_are_accounted() {
        // box_time = box_space²/π puts τ = −|ξ|² on the τ lattice
        let sp = spec(2, 4.0 / std::f64::consts::PI, 2.0, 16, 16);
        let nu = NuVector::along_last(2, 3.0).unwrap();
        let plan = MultiplierPlan::conjugated(sp, &nu).unwrap().with_offsets(Offsets::NONE);
        assert_eq!(plan.dropped, 5);
        assert_eq!(plan.dropped, count_near(&plan));
        let twisted = MultiplierPlan::conjugated(sp, &nu).unwrap();
        assert_eq!(twisted.dropped, 0);
        assert_eq!(twisted.dropped, count_near(&twisted));
        let norm = MultiplierPlan::normalized(sp).with_offsets(Offsets::NONE);
        assert!(norm.dropped >= 1);
        assert_eq!(norm.dropped, count_near(&norm));
    }

    #[test]
    fn translation_covariance() {
        let sp = spec(2, 4.0, 4.0, 16, 32);
        let f = packet(sp, 0.8, [1.0, -1.5, 0.0], [0.0; 3]);
        let shift = |g: &Field, dk: usize, dj: usize| {
            let mut out = Field::zeros(sp);
            let m = sp.space_len();
            for k in 0..sp.pts_time {
                for j in 0..m {
                    let idx = sp.space_index(j);
                    let to = sp.space_flat(&[(idx[0] + dj) % sp.pts_space, idx[1]]);
                    out.data[((k + dk) % sp.pts_time) * m + to] = g.data[k * m + j];
                }
            }
            out
        };
        // integer shift along an untwisted axis commutes exactly
        let a = apply_s(&shift(&f, 0, 3)).unwrap();
        let b = shift(&apply_s(&f).unwrap(), 0, 3);
        assert!(rel(&a, &b) < 1e-10);
        let a = apply_s(&shift(&f, 2, 0)).unwrap();
        let b = shift(&apply_s(&f).unwrap(), 2, 0);
        assert!(rel(&a, &b) < 1e-10);
    }

    #[test]
    fn scaling_transport_links_s_nu_to_s() {
        let n = 2;
        let m = 2.0;
        let nu = NuVector::along_last(n, m).unwrap();
        let map = ScalingMap::new(nu.clone());
        assert!(map.orthogonality_defect() < 1e-15);
        let sp_nu = spec(n, 1.0, 3.0, 32, 32);
        let sp = spec(n, 4.0 * m * m * 1.0, 2.0 * m * 3.0, 32, 32);
        let f = packet(sp_nu, 0.7, [0.5, 1.0, 0.0], [0.2, 0.1, 0.0]);
        let s_nu = apply_s_nu(&f, &nu).unwrap();
        // g(t, x) = f(−t/4|ν|², x/2|ν|) sampled by index reversal in time;
        // the twisted time axis is anti-periodic, so index 0 flips sign
        let nt = sp.pts_time;
        let ms = sp.space_len();
        let reverse = |src: &Field, spec_to: GridSpec| {
            let mut out = Field::zeros(spec_to);
            for k in 0..nt {
                let from = (nt - k) % nt;
                let sign = if k == 0 { -1.0 } else { 1.0 };
                for j in 0..ms {
                    out.data[k * ms + j] = src.data[from * ms + j] * sign;
                }
            }
            out
        };
        let g = reverse(&f, sp);
        let plan = MultiplierPlan::normalized(sp).with_offsets(Offsets { tau: 0.5, xi: [0.0, 0.5, 0.0] });
        let sg = plan.apply_inverse(&g).unwrap();
        let mut back = reverse(&sg, sp_nu);
        back.scale(C64::new(1.0 / (4.0 * m * m), 0.0));
        assert!(rel(&back, &s_nu) < 1e-3, "{}", rel(&back, &s_nu));
    }

    #[test]
    fn u_s_is_a_contraction_and_reflects() {
        let sp = spec(2, 1.0, 6.0, 8, 32);
        let phi = Slice::from_fn(sp, |x| C64::from_polar((-(x[0] * x[0] + x[1] * x[1])).exp(), x[1]));
        for &s in &[-3.0, -0.1, 0.2, 5.0] {
            assert!(apply_u_s(&phi, s).unwrap().l2() <= phi.l2() * (1.0 + 1e-12));
        }
        // U_{−t}* g = R U_t R g with R g(x) = g(−x); the ξₙ-twisted axis is
        // anti-periodic, so the reflected index 0 flips sign
        let n = sp.pts_space;
        let refl = |p: &Slice| {
            let mut out = p.clone();
            for j in 0..sp.space_len() {
                let idx = sp.space_index(j);
                let r = sp.space_flat(&[(n - idx[0]) % n, (n - idx[1]) % n]);
                let sign = if idx[1] == 0 { -1.0 } else { 1.0 };
                out.data[j] = p.data[r] * sign;
            }
            out
        };
        for &t in &[-1.5, 0.4, 2.0] {
            let adj = slice_apply(&phi, half_last(2), |xi| u_s_symbol(-t, &xi[..2]).conj());
            let via = refl(&apply_u_s(&refl(&phi), t).unwrap());
            assert!(adj.sub(&via).l2() < 1e-12 * phi.l2());
        }
    }

    #[test]
    fn ut_star_us_matches_composition() {
        let xi = [0.4, -0.9];
        for &(s, t) in &[(1.0, 2.0), (-0.5, -3.0), (0.3, 0.3)] {
            let a = u_s_symbol(t, &xi).conj() * u_s_symbol(s, &xi);
            assert!((a - ut_star_us_symbol(s, t, &xi)).norm() < 1e-15);
        }
        assert_eq!(ut_star_us_symbol(1.0, -1.0, &xi), C64::new(0.0, 0.0));
        let sp = spec(1, 1.0, 8.0, 8, 64);
        let phi = Slice::from_fn(sp, |x| C64::new((-x[0] * x[0]).exp(), 0.0));
        assert!(apply_ut_star_us(&phi, 1.0, -2.0).is_err());
        let comp = apply_u_s(&apply_u_s(&phi, 1.5).unwrap(), 1.5).unwrap();
        assert!(comp.l2() <= phi.l2());
    }

    #[test]
    fn free_factor_matches_gaussian_evolution() {
        // e^{is|ξ|²} applied to e^{−x²/2}: e^{−x²/(2(1−2is))}/(1−2is)^{1/2}
        let sp = spec(1, 1.0, 40.0, 8, 1024);
        let phi = Slice::from_fn(sp, |x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        let s = 1.7;
        let got = apply_free(&phi, s);
        let a = C64::new(1.0, -2.0 * s);
        let want = Slice::from_fn(sp, |x| (-(x[0] * x[0]) / (2.0 * a)).exp() / a.sqrt());
        assert!(got.sub(&want).linf() < 1e-10);
    }

    #[test]
    fn propagator_form_agrees_with_multiplier() {
        for n in 1..=2 {
            let sp = spec(n, 16.0, 12.0, 64, 64 / n);
            let mut k = [0.0; 3];
            k[n - 1] = 3.0;
            let f = packet(sp, 3.0, k, [0.0; 3]);
            let a = apply_s(&f).unwrap();
            let b = apply_s_via_propagator(&f).unwrap();
            assert!(rel(&b, &a) < 1e-4, "n={n}: {}", rel(&b, &a));
        }
    }

    #[test]
    fn dyadic_pieces_telescope() {
        let sp = spec(1, 16.0, 12.0, 64, 64);
        let f = packet(sp, 3.0, [-3.0, 0.0, 0.0], [0.0; 3]);
        let total = apply_s_via_propagator(&f).unwrap();
        let mut sum = Field::zeros(sp);
        for j in SHELL_MIN..=top_shell(&sp) {
            sum.add_assign(&apply_s_dyadic(&f, j).unwrap());
        }
        assert!(rel(&sum, &total) < 1e-3, "{}", rel(&sum, &total));
        assert_eq!(apply_s_dyadic(&f, top_shell(&sp) + 2).unwrap().max_abs(), 0.0);
        assert_eq!(apply_s_dyadic(&f, SHELL_MIN - 1).unwrap().max_abs(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn s_nu_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, m in 1.0f64..40.0) {
            let sp = spec(1, 2.0, 3.0, 16, 16);
            let nu = NuVector::along_last(1, m).unwrap();
            let f = packet(sp, 0.6, [1.0, 0.0, 0.0], [0.0; 3]);
            let g = packet(sp, 0.9, [-0.5, 0.0, 0.0], [0.4, 0.0, 0.0]);
            let mut lin = f.clone();
            lin.scale(C64::new(a, 0.0));
            let mut gb = g.clone();
            gb.scale(C64::new(0.0, b));
            lin.add_assign(&gb);
            let lhs = apply_s_nu(&lin, &nu).unwrap();
            let mut rhs = apply_s_nu(&f, &nu).unwrap();
            rhs.scale(C64::new(a, 0.0));
            let mut sg = apply_s_nu(&g, &nu).unwrap();
            sg.scale(C64::new(0.0, b));
            rhs.add_assign(&sg);
            prop_assert!(lhs.sub(&rhs).l2() <= 1e-10 * (1.0 + rhs.l2()));
        }
    }
}
