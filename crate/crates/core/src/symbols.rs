//! The symbols p(τ,ξ) = τ − |ξ|² + iξₙ and p_ν(τ,ξ) = −τ − |ξ|² + 2iν·ξ,
//! the scaling map between them, and admissible exponent arithmetic.

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Exponent, ExponentPair};

#[derive(Debug, Error, PartialEq)]
pub enum SymbolError {
    #[error("ν must be nonzero and finite")]
    ZeroNu,
    #[error("ν has {0} components, expected 1..=3")]
    Dimension(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuVector {
    comps: Vec<f64>,
}

impl NuVector {
    pub fn new(comps: Vec<f64>) -> Result<Self, SymbolError> {
        if comps.is_empty() || comps.len() > 3 {
            return Err(SymbolError::Dimension(comps.len()));
        }
        let norm = comps.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(SymbolError::ZeroNu);
        }
        Ok(NuVector { comps })
    }

    /// |ν| times the last unit vector of ℝⁿ.
    pub fn along_last(n: usize, size: f64) -> Result<Self, SymbolError> {
        let mut c = vec![0.0; n];
        if n > 0 {
            c[n - 1] = size;
        }
        NuVector::new(c)
    }

    pub fn along(n: usize, axis: usize, size: f64) -> Result<Self, SymbolError> {
        let mut c = vec![0.0; n];
        c[axis] = size;
        NuVector::new(c)
    }

    pub fn comps(&self) -> &[f64] {
        &self.comps
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn unit(&self) -> Vec<f64> {
        let m = self.norm();
        self.comps.iter().map(|c| c / m).collect()
    }

    /// Axis and sign when ν is a multiple of a coordinate vector.
    pub fn aligned_axis(&self) -> Option<(usize, f64)> {
        let nz: Vec<usize> = (0..self.dim()).filter(|&i| self.comps[i] != 0.0).collect();
        match nz.as_slice() {
            [a] => Some((*a, self.comps[*a].signum())),
            _ => None,
        }
    }

    pub fn neg(&self) -> Self {
        NuVector { comps: self.comps.iter().map(|c| -c).collect() }
    }

    pub fn dot(&self, xi: &[f64]) -> f64 {
        self.comps.iter().zip(xi).map(|(a, b)| a * b).sum()
    }
}

/// p(τ, ξ) = τ − |ξ|² + iξₙ.
pub fn eval_p(tau: f64, xi: &[f64]) -> C64 {
    let s: f64 = xi.iter().map(|x| x * x).sum();
    C64::new(tau - s, *xi.last().unwrap_or(&0.0))
}

/// p_ν(τ, ξ) = −τ − |ξ|² + 2iν·ξ.
pub fn eval_p_nu(tau: f64, xi: &[f64], nu: &NuVector) -> C64 {
    let s: f64 = xi.iter().map(|x| x * x).sum();
    C64::new(-tau - s, 2.0 * nu.dot(xi))
}

/// σ = −4|ν|²τ, η = 2|ν|Qξ with ν = |ν|Qeₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMap {
    pub nu: NuVector,
    /// Row-major n×n orthogonal matrix.
    pub q: Vec<f64>,
}

impl ScalingMap {
    pub fn new(nu: NuVector) -> Self {
        let n = nu.dim();
        let mut q = vec![0.0; n * n];
        if let Some((a, sign)) = nu.aligned_axis() {
            // signed permutation: eₙ ↦ sign·e_a, e_a ↦ eₙ
            for i in 0..n {
                let col = if i == a {
                    n - 1
                } else if i == n - 1 {
                    a
                } else {
                    i
                };
                q[i * n + col] = 1.0;
            }
            for i in 0..n {
                q[i * n + n - 1] *= sign;
            }
        } else {
            // Householder reflection with v = eₙ − ν̂
            let mut v = nu.unit();
            v.iter_mut().for_each(|c| *c = -*c);
            v[n - 1] += 1.0;
            let vv: f64 = v.iter().map(|c| c * c).sum();
            for i in 0..n {
                for j in 0..n {
                    q[i * n + j] = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / vv;
                }
            }
        }
        ScalingMap { nu, q }
    }

    pub fn n(&self) -> usize {
        self.nu.dim()
    }

    pub fn apply_q(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.q[i * n + j] * xi[j]).sum()).collect()
    }

    pub fn apply_qt(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.q[j * n + i] * y[j]).sum()).collect()
    }

    /// (τ, ξ) ↦ (σ, η).
    pub fn forward(&self, tau: f64, xi: &[f64]) -> (f64, Vec<f64>) {
        let m = self.nu.norm();
        let eta = self.apply_q(xi).into_iter().map(|c| 2.0 * m * c).collect();
        (-4.0 * m * m * tau, eta)
    }

    /// ‖QᵀQ − I‖_max.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.q[k * n + i] * self.q[k * n + j]).sum();
                worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub endpoint: bool,
    pub reason: String,
    /// The conjugate pair (q′, r′) when admissible.
    pub dual: Option<ExponentPair>,
}

fn half() -> Ratio<i64> {
    Ratio::new(1, 2)
}

fn one() -> Ratio<i64> {
    Ratio::from_integer(1)
}

/// Decide 2 − 2/q = n/r − n/2 with (q, r) ∈ [1,2]² and (n,q,r) ≠ (2,2,1).
pub fn check_admissible(q: Exponent, r: Exponent, n: usize) -> Admissibility {
    let nn = Ratio::from_integer(n as i64);
    let (a, b) = (q.inv(), r.inv());
    let reject = |why: &str| Admissibility { admissible: false, endpoint: false, reason: why.into(), dual: None };
    if a < half() || a > one() || b < half() || b > one() {
        return reject("exponents outside [1,2]");
    }
    if n == 2 && a == half() && b == one() {
        return reject("excluded triple (2,2,1)");
    }
    let two = Ratio::from_integer(2);
    if two - two * a != nn * b - nn * half() {
        return reject("2 - 2/q != n/r - n/2");
    }
    let dual = ExponentPair { q: q.conjugate(), r: r.conjugate(), n, dual: true };
    debug_assert!(two * dual.q.inv() == nn * half() - nn * dual.r.inv());
    Admissibility {
        admissible: true,
        endpoint: n >= 3 && a == half(),
        reason: "admissible".into(),
        dual: Some(dual),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub admissible: bool,
    pub endpoint: bool,
    pub reason: String,
    /// (q, r) with 1/q − 1/q′ = 1/a and 1/r − 1/r′ = 1/b.
    pub linked: Option<ExponentPair>,
}

/// Decide 2 − 2/a = n/b with (n,a,b) ≠ (2,∞,1).
pub fn potential_pair_check(a: Exponent, b: Exponent, n: usize) -> PotentialPair {
    let nn = Ratio::from_integer(n as i64);
    let reject = |why: &str| PotentialPair { admissible: false, endpoint: false, reason: why.into(), linked: None };
    if !a.in_range() || !b.in_range() {
        return reject("exponents outside [1,∞]");
    }
    if n == 2 && a.is_infinite() && b.inv() == one() {
        return reject("excluded triple (2,∞,1)");
    }
    let two = Ratio::from_integer(2);
    if two - two * a.inv() != nn * b.inv() {
        return reject("2 - 2/a != n/b");
    }
    let q = Exponent::from_inv((one() + a.inv()) / two);
    let r = Exponent::from_inv((one() + b.inv()) / two);
    let linked = ExponentPair::new(q, r, n);
    debug_assert!(check_admissible(q, r, n).admissible);
    PotentialPair { admissible: true, endpoint: n >= 3 && a.is_infinite(), reason: "admissible".into(), linked: Some(linked) }
}

/// The admissible pairs swept by default for dimension n.
pub fn standard_pairs(n: usize) -> Vec<ExponentPair> {
    let mk = |q: Exponent, r: Exponent| ExponentPair::new(q, r, n);
    match n {
        1 => vec![mk(Exponent::int(1), Exponent::int(2)), mk(Exponent::new(8, 7), Exponent::new(4, 3))],
        2 => vec![
            mk(Exponent::int(1), Exponent::int(2)),
            mk(Exponent::new(6, 5), Exponent::new(3, 2)),
            mk(Exponent::new(4, 3), Exponent::new(4, 3)),
        ],
        _ => vec![
            mk(Exponent::int(1), Exponent::int(2)),
            mk(Exponent::new(4, 3), Exponent::new(3, 2)),
            mk(Exponent::int(2), Exponent::new(6, 5)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p_values() {
        assert_eq!(eval_p(0.0, &[0.0]), C64::new(0.0, 0.0));
        assert_eq!(eval_p(1.0, &[0.0, 0.0]), C64::new(1.0, 0.0));
        assert_eq!(eval_p(2.0, &[1.0, 1.0]), C64::new(0.0, 1.0));
        let nu = NuVector::new(vec![3.0, -1.0]).unwrap();
        assert_eq!(eval_p_nu(0.0, &[0.0, 0.0], &nu), C64::new(0.0, 0.0));
        assert_eq!(eval_p_nu(-1.0, &[0.0, 0.0], &nu), C64::new(1.0, 0.0));
    }

    #[test]
    fn zero_nu_rejected() {
        assert_eq!(NuVector::new(vec![0.0, 0.0]), Err(SymbolError::ZeroNu));
    }

    #[test]
    fn admissible_examples() {
        let v = check_admissible(Exponent::int(2), Exponent::new(6, 5), 3);
        assert!(v.admissible && v.endpoint);
        assert!(!check_admissible(Exponent::int(2), Exponent::int(1), 2).admissible);
        let v = check_admissible(Exponent::int(1), Exponent::int(2), 2);
        assert!(v.admissible);
        let d = v.dual.unwrap();
        assert!(d.q.is_infinite());
        assert_eq!(d.r, Exponent::int(2));
        assert!(!check_admissible(Exponent::new(3, 2), Exponent::int(2), 2).admissible);
    }

    #[test]
    fn potential_examples() {
        let p = potential_pair_check(Exponent::INF, Exponent::new(3, 2), 3);
        assert!(p.admissible && p.endpoint);
        let l = p.linked.unwrap();
        assert_eq!((l.q, l.r), (Exponent::int(2), Exponent::new(6, 5)));
        assert!(!potential_pair_check(Exponent::INF, Exponent::int(1), 2).admissible);
        let p = potential_pair_check(Exponent::int(2), Exponent::int(2), 2);
        assert!(p.admissible);
        let l = p.linked.unwrap();
        assert_eq!((l.q, l.r), (Exponent::new(4, 3), Exponent::new(4, 3)));
    }

    #[test]
    fn standard_pairs_are_admissible() {
        for n in 1..=3 {
            for p in standard_pairs(n) {
                assert!(check_admissible(p.q, p.r, n).admissible, "{n} {} {}", p.q, p.r);
            }
        }
    }

    #[test]
    fn householder_and_permutation_are_orthogonal() {
        for comps in [vec![0.0, 0.0, 2.0], vec![0.0, -3.0, 0.0], vec![1.0, 2.0, -0.5], vec![5.0, 0.0]] {
            let s = ScalingMap::new(NuVector::new(comps.clone()).unwrap());
            assert!(s.orthogonality_defect() < 1e-12);
            let n = comps.len();
            let mut en = vec![0.0; n];
            en[n - 1] = 1.0;
            let col = s.apply_q(&en);
            let u = s.nu.unit();
            for i in 0..n {
                assert!((col[i] - u[i]).abs() < 1e-12);
            }
        }
    }

    fn nu_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop_oneof![
            prop::collection::vec(-50.0..50.0f64, 1..=3),
            (1usize..=3, 0usize..3, 0.5..60.0f64, prop::bool::ANY).prop_map(|(n, a, m, neg)| {
                let mut c = vec![0.0; n];
                c[a % n] = if neg { -m } else { m };
                c
            }),
        ]
        .prop_filter("nonzero", |c| c.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn scaling_identity(comps in nu_strategy(), tau in -10.0..10.0f64, raw in prop::collection::vec(-5.0..5.0f64, 3)) {
            let nu = NuVector::new(comps).unwrap();
            let n = nu.dim();
            let xi = &raw[..n];
            let s = ScalingMap::new(nu.clone());
            let (sigma, eta) = s.forward(tau, xi);
            let lhs = eval_p_nu(sigma, &eta, &nu);
            let rhs = eval_p(tau, xi) * (4.0 * nu.norm().powi(2));
            let scale = 4.0 * nu.norm().powi(2) * (1.0 + tau.abs() + xi.iter().map(|x| x * x).sum::<f64>());
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }

        #[test]
        fn nu_negation_conjugates(comps in nu_strategy(), tau in -10.0..10.0f64, raw in prop::collection::vec(-5.0..5.0f64, 3)) {
            let nu = NuVector::new(comps).unwrap();
            let xi = &raw[..nu.dim()];
            prop_assert_eq!(eval_p_nu(tau, xi, &nu.neg()), eval_p_nu(tau, xi, &nu).conj());
        }

        #[test]
        fn dual_relation_exact(n in 1usize..=3, num in 1i64..=40, den in 1i64..=40) {
            let q = Exponent::new(num.max(den), den.min(num));
            // solve for r from q and test whichever is in range
            let two = Ratio::from_integer(2);
            let nn = Ratio::from_integer(n as i64);
            let b = (two - two * q.inv() + nn / two) / nn;
            if b > Ratio::from_integer(0) {
                let r = Exponent::from_inv(b);
                let v = check_admissible(q, r, n);
                if let Some(d) = v.dual {
                    prop_assert_eq!(two * d.q.inv(), nn / two - nn * d.r.inv());
                }
            }
        }
    }
}
