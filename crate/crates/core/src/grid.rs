//! Periodic space-time lattice, unitary DFT, and the Lebesgue norms used
//! throughout.
//!
//! Samples sit at `t_k = -box_time + k dt` and likewise in every spatial
//! axis, row-major in `(t, x_1, ..., x_n)`. Frequency samples use the
//! usual FFT ordering.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of lattice points of one field.
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("spatial dimension {0} outside 1..=3")]
    Dimension(usize),
    #[error("{axis}: {pts} points, need a power of two >= 8")]
    Points { axis: &'static str, pts: usize },
    #[error("{0} must be positive and finite")]
    Box(&'static str),
    #[error("{total} lattice points exceed the budget of {budget}")]
    Budget { total: usize, budget: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    Size { expected: usize, got: usize },
    #[error("field is in {0:?} representation")]
    Rep(Rep),
    #[error("grids differ")]
    GridMismatch,
    #[error("field contains NaN")]
    NaN,
    #[error("axis {0} out of range")]
    Axis(usize),
    #[error("bad field container: {0}")]
    Container(String),
    #[error("bad exponent: {0}")]
    Exponent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub box_time: f64,
    pub box_space: f64,
    pub pts_time: usize,
    pub pts_space: usize,
}

impl GridSpec {
    pub fn new(
        n: usize,
        box_time: f64,
        box_space: f64,
        pts_time: usize,
        pts_space: usize,
    ) -> Result<Self, GridError> {
        let g = GridSpec { n, box_time, box_space, pts_time, pts_space };
        g.validate(DEFAULT_MAX_POINTS)?;
        Ok(g)
    }

    pub fn validate(&self, budget: usize) -> Result<(), GridError> {
        if !(1..=3).contains(&self.n) {
            return Err(GridError::Dimension(self.n));
        }
        for (axis, pts) in [("pts_time", self.pts_time), ("pts_space", self.pts_space)] {
            if pts < 8 || !pts.is_power_of_two() {
                return Err(GridError::Points { axis, pts });
            }
        }
        if !(self.box_time > 0.0 && self.box_time.is_finite()) {
            return Err(GridError::Box("box_time"));
        }
        if !(self.box_space > 0.0 && self.box_space.is_finite()) {
            return Err(GridError::Box("box_space"));
        }
        let total = self.len();
        if total > budget {
            return Err(GridError::Budget { total, budget });
        }
        Ok(())
    }

    /// Axis lengths, time first.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.pts_time];
        s.extend(std::iter::repeat(self.pts_space).take(self.n));
        s
    }

    pub fn len(&self) -> usize {
        self.pts_time * self.space_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space_len(&self) -> usize {
        self.pts_space.pow(self.n as u32)
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.box_time / self.pts_time as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.box_space / self.pts_space as f64
    }

    pub fn dtau(&self) -> f64 {
        std::f64::consts::PI / self.box_time
    }

    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.box_space
    }

    pub fn cell(&self) -> f64 {
        self.dt() * self.space_cell()
    }

    pub fn space_cell(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    pub fn t(&self, k: usize) -> f64 {
        -self.box_time + k as f64 * self.dt()
    }

    pub fn x(&self, k: usize) -> f64 {
        -self.box_space + k as f64 * self.dx()
    }

    /// Index of the lattice point nearest to `x` along a spatial axis.
    pub fn x_index(&self, x: f64) -> usize {
        let k = ((x + self.box_space) / self.dx()).round();
        (k.max(0.0) as usize).min(self.pts_space - 1)
    }

    pub fn t_index(&self, t: f64) -> usize {
        let k = ((t + self.box_time) / self.dt()).round();
        (k.max(0.0) as usize).min(self.pts_time - 1)
    }

    /// Time frequency of FFT bin `k`.
    pub fn tau(&self, k: usize) -> f64 {
        signed(k, self.pts_time) as f64 * self.dtau()
    }

    pub fn xi(&self, k: usize) -> f64 {
        signed(k, self.pts_space) as f64 * self.dxi()
    }

    /// Spatial multi-index of a flat spatial offset.
    pub fn space_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.n).rev() {
            idx[a] = flat % self.pts_space;
            flat /= self.pts_space;
        }
        idx
    }

    pub fn space_flat(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.n).fold(0, |acc, &i| acc * self.pts_space + i)
    }

    /// Spatial point of a flat spatial offset (unused axes are zero).
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.space_index(flat);
        let mut p = [0.0; 3];
        for a in 0..self.n {
            p[a] = self.x(idx[a]);
        }
        p
    }

    /// Frequency vector of a flat spatial offset.
    pub fn freq(&self, flat: usize) -> [f64; 3] {
        let idx = self.space_index(flat);
        let mut p = [0.0; 3];
        for a in 0..self.n {
            p[a] = self.xi(idx[a]);
        }
        p
    }

    /// Same lattice without the time axis kept meaningful: a spatial slice
    /// is a field with `pts_time` ignored.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && self.pts_time == other.pts_time
            && self.pts_space == other.pts_space
            && (self.box_time - other.box_time).abs() <= 1e-14 * self.box_time
            && (self.box_space - other.box_space).abs() <= 1e-14 * self.box_space
    }
}

/// FFT bin to signed integer frequency.
pub fn signed(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rep {
    Physical,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub spec: GridSpec,
    pub rep: Rep,
    pub data: Vec<C64>,
}

impl Field {
    pub fn zeros(spec: GridSpec) -> Self {
        Field { spec, rep: Rep::Physical, data: vec![C64::new(0.0, 0.0); spec.len()] }
    }

    pub fn from_data(spec: GridSpec, rep: Rep, data: Vec<C64>) -> Result<Self, GridError> {
        if data.len() != spec.len() {
            return Err(GridError::Size { expected: spec.len(), got: data.len() });
        }
        Ok(Field { spec, rep, data })
    }

    /// Physical field sampled from `f(t, x)`.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> C64 + Sync,
    {
        let m = spec.space_len();
        let mut data = vec![C64::new(0.0, 0.0); spec.len()];
        data.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
            let t = spec.t(k);
            for (j, v) in row.iter_mut().enumerate() {
                let p = spec.point(j);
                *v = f(t, &p[..spec.n]);
            }
        });
        Field { spec, rep: Rep::Physical, data }
    }

    pub fn time_slice(&self, k: usize) -> &[C64] {
        let m = self.spec.space_len();
        &self.data[k * m..(k + 1) * m]
    }

    pub fn time_slice_mut(&mut self, k: usize) -> &mut [C64] {
        let m = self.spec.space_len();
        &mut self.data[k * m..(k + 1) * m]
    }

    pub fn transform(&self, dir: Direction) -> Field {
        let mut out = self.clone();
        out.transform_in_place(dir);
        out
    }

    pub fn transform_in_place(&mut self, dir: Direction) {
        let shape = self.spec.shape();
        dft_nd(&mut self.data, &shape, dir);
        self.rep = match dir {
            Direction::Forward => Rep::Frequency,
            Direction::Inverse => Rep::Physical,
        };
    }

    fn require_physical(&self) -> Result<(), GridError> {
        if self.rep != Rep::Physical {
            return Err(GridError::Rep(self.rep));
        }
        if self.data.iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
            return Err(GridError::NaN);
        }
        Ok(())
    }

    /// Unweighted Euclidean norm of the samples.
    pub fn l2_samples(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Quadrature L² norm over the box.
    pub fn l2(&self) -> f64 {
        self.l2_samples() * self.spec.cell().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mixed_norm(&self, q: Exponent, r: Exponent) -> Result<f64, GridError> {
        self.require_physical()?;
        let m = self.spec.space_len();
        let dxn = self.spec.space_cell();
        let inner: Vec<f64> =
            self.data.par_chunks(m).map(|row| lebesgue(row.iter().map(|z| z.norm()), r, dxn)).collect();
        Ok(lebesgue(inner.into_iter(), q, self.spec.dt()))
    }

    /// L² norm over time and the lattice slice of spatial `axis` nearest `s`.
    pub fn hyperplane_norm(&self, axis: usize, s: f64) -> Result<f64, GridError> {
        self.require_physical()?;
        if axis >= self.spec.n {
            return Err(GridError::Axis(axis));
        }
        let k = self.spec.x_index(s);
        Ok(self.hyperplane_norm_index(axis, k))
    }

    pub fn hyperplane_norm_index(&self, axis: usize, k: usize) -> f64 {
        let sp = &self.spec;
        let w = sp.dt() * sp.dx().powi(sp.n as i32 - 1);
        let m = sp.space_len();
        let mut acc = 0.0;
        for j in 0..m {
            if sp.space_index(j)[axis] != k {
                continue;
            }
            for t in 0..sp.pts_time {
                acc += self.data[t * m + j].norm_sqr();
            }
        }
        (acc * w).sqrt()
    }

    /// All hyperplane norms along `axis`, one per lattice plane.
    pub fn hyperplane_profile(&self, axis: usize) -> Vec<f64> {
        let sp = &self.spec;
        let w = sp.dt() * sp.dx().powi(sp.n as i32 - 1);
        let m = sp.space_len();
        let mut acc = vec![0.0; sp.pts_space];
        for (i, z) in self.data.iter().enumerate() {
            acc[sp.space_index(i % m)[axis]] += z.norm_sqr();
        }
        acc.into_iter().map(|a| (a * w).sqrt()).collect()
    }

    /// Fraction of L² mass within `frac` of the box edge in any axis
    /// (time included).
    pub fn boundary_mass(&self, frac: f64) -> f64 {
        let sp = &self.spec;
        let m = sp.space_len();
        let near = |k: usize, n: usize| {
            let band = ((n as f64) * frac / 2.0).ceil() as usize;
            k < band || k + band >= n
        };
        let mut edge = 0.0;
        let mut total = 0.0;
        for (i, z) in self.data.iter().enumerate() {
            let w = z.norm_sqr();
            total += w;
            let idx = sp.space_index(i % m);
            if near(i / m, sp.pts_time) || (0..sp.n).any(|a| near(idx[a], sp.pts_space)) {
                edge += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }

    /// Pointwise image under `f`.
    pub fn map<F: Fn(C64) -> C64 + Sync>(&self, f: F) -> Field {
        Field { spec: self.spec, rep: self.rep, data: self.data.par_iter().map(|z| f(*z)).collect() }
    }

    /// x ↦ −x on every spatial axis (periodic index reflection).
    pub fn reflect_space(&self) -> Field {
        let sp = &self.spec;
        let m = sp.space_len();
        let np = sp.pts_space;
        let src: Vec<usize> = (0..m)
            .map(|j| {
                let idx = sp.space_index(j);
                let mut r = [0; 3];
                for a in 0..sp.n {
                    r[a] = (np - idx[a]) % np;
                }
                sp.space_flat(&r[..sp.n])
            })
            .collect();
        let mut out = self.clone();
        for k in 0..sp.pts_time {
            for j in 0..m {
                out.data[k * m + j] = self.data[k * m + src[j]];
            }
        }
        out
    }

    pub fn scale(&mut self, c: C64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    pub fn add_assign(&mut self, other: &Field) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += *b);
    }

    pub fn sub(&self, other: &Field) -> Field {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Field { spec: self.spec, rep: self.rep, data }
    }

    pub fn mul(&self, other: &Field) -> Field {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Field { spec: self.spec, rep: self.rep, data }
    }

    pub fn inner(&self, other: &Field) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum::<C64>() * self.spec.cell()
    }

    /// Binary container: magic, n, pts, boxes, rep, then little-endian
    /// interleaved re/im doubles.
    pub fn write_container<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"CGOF")?;
        w.write_all(&(self.spec.n as u32).to_le_bytes())?;
        w.write_all(&(self.spec.pts_time as u32).to_le_bytes())?;
        w.write_all(&(self.spec.pts_space as u32).to_le_bytes())?;
        w.write_all(&self.spec.box_time.to_le_bytes())?;
        w.write_all(&self.spec.box_space.to_le_bytes())?;
        w.write_all(&[match self.rep {
            Rep::Physical => 0u8,
            Rep::Frequency => 1u8,
        }])?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_container<R: Read>(mut r: R) -> Result<Field, GridError> {
        let bad = |e: std::io::Error| GridError::Container(e.to_string());
        let mut head = [0u8; 4 + 12 + 16 + 1];
        r.read_exact(&mut head).map_err(bad)?;
        if &head[..4] != b"CGOF" {
            return Err(GridError::Container("magic".into()));
        }
        let u = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as usize;
        let f = |i: usize| f64::from_le_bytes(head[i..i + 8].try_into().unwrap());
        let spec = GridSpec { n: u(4), pts_time: u(8), pts_space: u(12), box_time: f(16), box_space: f(24) };
        spec.validate(usize::MAX)?;
        let rep = match head[32] {
            0 => Rep::Physical,
            1 => Rep::Frequency,
            b => return Err(GridError::Container(format!("rep byte {b}"))),
        };
        let mut payload = vec![0u8; spec.len() * 16];
        r.read_exact(&mut payload).map_err(bad)?;
        let data = payload
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Field { spec, rep, data })
    }

    /// CSV of one time slice: spatial coordinates, re, im.
    pub fn slice_csv(&self, k: usize) -> String {
        let sp = &self.spec;
        let names = ["x1", "x2", "x3"];
        let mut s = String::from("t,");
        for name in names.iter().take(sp.n) {
            s.push_str(name);
            s.push(',');
        }
        s.push_str("re,im\n");
        let t = sp.t(k);
        for (j, z) in self.time_slice(k).iter().enumerate() {
            let p = sp.point(j);
            s.push_str(&format!("{t:.12e},"));
            for c in p.iter().take(sp.n) {
                s.push_str(&format!("{c:.12e},"));
            }
            s.push_str(&format!("{:.17e},{:.17e}\n", z.re, z.im));
        }
        s
    }
}

/// A function of space only, on the spatial part of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub spec: GridSpec,
    pub rep: Rep,
    pub data: Vec<C64>,
}

impl Slice {
    pub fn zeros(spec: GridSpec) -> Self {
        Slice { spec, rep: Rep::Physical, data: vec![C64::new(0.0, 0.0); spec.space_len()] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> C64>(spec: GridSpec, f: F) -> Self {
        let data = (0..spec.space_len()).map(|j| f(&spec.point(j)[..spec.n])).collect();
        Slice { spec, rep: Rep::Physical, data }
    }

    pub fn transform(&self, dir: Direction) -> Slice {
        let mut out = self.clone();
        out.transform_in_place(dir);
        out
    }

    pub fn transform_in_place(&mut self, dir: Direction) {
        let shape = vec![self.spec.pts_space; self.spec.n];
        dft_nd(&mut self.data, &shape, dir);
        self.rep = match dir {
            Direction::Forward => Rep::Frequency,
            Direction::Inverse => Rep::Physical,
        };
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum::<f64>() * self.spec.space_cell()
    }

    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spec.space_cell()).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn inner(&self, other: &Slice) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum::<C64>() * self.spec.space_cell()
    }

    pub fn sub(&self, other: &Slice) -> Slice {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Slice { spec: self.spec, rep: self.rep, data }
    }

    pub fn scaled(&self, c: C64) -> Slice {
        Slice { spec: self.spec, rep: self.rep, data: self.data.iter().map(|z| z * c).collect() }
    }

    /// Fraction of L² mass within `frac` of the box edge.
    pub fn boundary_mass(&self, frac: f64) -> f64 {
        let sp = &self.spec;
        let band = ((sp.pts_space as f64) * frac / 2.0).ceil() as usize;
        let mut edge = 0.0;
        let mut total = 0.0;
        for (j, z) in self.data.iter().enumerate() {
            let idx = sp.space_index(j);
            let w = z.norm_sqr();
            total += w;
            if (0..sp.n).any(|a| idx[a] < band || idx[a] + band >= sp.pts_space) {
                edge += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }
}

fn lebesgue<I: Iterator<Item = f64>>(vals: I, p: Exponent, w: f64) -> f64 {
    if p.is_infinite() {
        return vals.fold(0.0, f64::max);
    }
    let pf = p.value();
    if pf == 1.0 {
        return vals.sum::<f64>() * w;
    }
    if pf == 2.0 {
        return (vals.map(|v| v * v).sum::<f64>() * w).sqrt();
    }
    // scale by the max to keep large exponents finite
    let v: Vec<f64> = vals.collect();
    let m = v.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * (v.iter().map(|x| (x / m).powf(pf)).sum::<f64>() * w).powf(1.0 / pf)
}

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Cached FFT plan for this worker.
pub fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let fwd = dir == Direction::Forward;
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if let Some(f) = p.1.get(&(len, fwd)) {
            return f.clone();
        }
        let f = p.0.plan_fft(len, if fwd { FftDirection::Forward } else { FftDirection::Inverse });
        p.1.insert((len, fwd), f.clone());
        f
    })
}

/// Unitary multi-dimensional DFT of a row-major array.
pub fn dft_nd(data: &mut [C64], shape: &[usize], dir: Direction) {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len(), "shape does not match data length");
    let mut stride = 1;
    for &len in shape.iter().rev() {
        dft_axis(data, len, stride, dir);
        stride *= len;
    }
    let norm = 1.0 / (total as f64).sqrt();
    data.par_iter_mut().for_each(|z| *z *= norm);
}

fn dft_axis(data: &mut [C64], len: usize, stride: usize, dir: Direction) {
    let fft = plan(len, dir);
    if stride == 1 {
        data.par_chunks_mut(len * 64.max(1)).for_each(|c| fft.process(c));
        return;
    }
    let block = len * stride;
    let mut buf = vec![C64::new(0.0, 0.0); block];
    for chunk in data.chunks_mut(block) {
        // gather lines contiguously
        buf.par_chunks_mut(len).enumerate().for_each(|(j, line)| {
            for (k, v) in line.iter_mut().enumerate() {
                *v = chunk[k * stride + j];
            }
        });
        buf.par_chunks_mut(len * 16).for_each(|c| fft.process(c));
        chunk.par_chunks_mut(stride).enumerate().for_each(|(k, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = buf[j * len + k];
            }
        });
    }
}

/// Lebesgue exponent in [1, ∞], stored as its exact reciprocal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exponent {
    inv: Ratio<i64>,
}

impl Exponent {
    pub const INF: Exponent = Exponent { inv: Ratio::new_raw(0, 1) };

    /// The exponent `num/den`.
    pub fn new(num: i64, den: i64) -> Self {
        Exponent { inv: Ratio::new(den, num) }
    }

    pub fn int(q: i64) -> Self {
        Exponent::new(q, 1)
    }

    pub fn from_inv(inv: Ratio<i64>) -> Self {
        Exponent { inv }
    }

    pub fn inv(&self) -> Ratio<i64> {
        self.inv
    }

    pub fn is_infinite(&self) -> bool {
        *self.inv.numer() == 0
    }

    pub fn value(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            *self.inv.denom() as f64 / *self.inv.numer() as f64
        }
    }

    /// Hölder conjugate.
    pub fn conjugate(&self) -> Self {
        Exponent { inv: Ratio::from_integer(1) - self.inv }
    }

    pub fn in_range(&self) -> bool {
        self.inv >= Ratio::from_integer(0) && self.inv <= Ratio::from_integer(1)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            return write!(f, "inf");
        }
        let q = self.inv.recip();
        if *q.denom() == 1 {
            write!(f, "{}", q.numer())
        } else {
            write!(f, "{}/{}", q.numer(), q.denom())
        }
    }
}

impl FromStr for Exponent {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Exponent::INF);
        }
        let bad = || GridError::Exponent(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim().parse::<i64>().map_err(|_| bad())?, b.trim().parse::<i64>().map_err(|_| bad())?),
            None => (s.parse::<i64>().map_err(|_| bad())?, 1),
        };
        if num <= 0 || den <= 0 {
            return Err(bad());
        }
        let e = Exponent::new(num, den);
        if !e.in_range() {
            return Err(bad());
        }
        Ok(e)
    }
}

/// A mixed-norm pair (q, r) for dimension n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub q: Exponent,
    pub r: Exponent,
    pub n: usize,
    pub dual: bool,
}

impl ExponentPair {
    pub fn new(q: Exponent, r: Exponent, n: usize) -> Self {
        ExponentPair { q, r, n, dual: false }
    }

    pub fn conjugate(&self) -> Self {
        ExponentPair { q: self.q.conjugate(), r: self.r.conjugate(), n: self.n, dual: !self.dual }
    }
}
