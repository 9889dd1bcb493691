//! Graded Clifford algebras, the exterior-algebra representation and
//! KO-group bookkeeping.
//!
//! Conventions: `Cl(r,s)` has `r` self-adjoint generators squaring to +1 and
//! `s` skew-adjoint generators squaring to -1. The stable class of `Cl(r,s)`
//! is `(r - s) mod 8`; for the complex algebra `Cl_n` it is `n mod 2`.

use crate::linalg::{self, c, CMat, ZERO};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffordClass {
    pub field: Field,
    pub r: usize,
    /// Unused for complex classes.
    pub s: usize,
}

impl CliffordClass {
    pub fn real(r: usize, s: usize) -> Self {
        CliffordClass { field: Field::Real, r, s }
    }

    pub fn complex(n: usize) -> Self {
        CliffordClass { field: Field::Complex, r: n, s: 0 }
    }

    pub fn algebra_dim(&self) -> usize {
        1 << (self.r + self.s)
    }

    /// `(r - s) mod 8` for real classes, `n mod 2` for complex ones.
    pub fn stable_class(&self) -> usize {
        match self.field {
            Field::Real => (self.r as i64 - self.s as i64).rem_euclid(8) as usize,
            Field::Complex => self.r % 2,
        }
    }

    pub fn stable_eq(&self, other: &CliffordClass) -> bool {
        self.field == other.field && self.stable_class() == other.stable_class()
    }
}

impl fmt::Display for CliffordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Field::Real => write!(f, "Cℓ_{{{},{}}}", self.r, self.s),
            Field::Complex => {
                let sub: String = self.r.to_string().chars().map(|d| char::from_u32(0x2080 + d.to_digit(10).unwrap()).unwrap()).collect();
                write!(f, "ℂℓ{sub}")
            }
        }
    }
}

/// Canonical representative `Cl(k,0)` or `Cl_k` of the stable class.
pub fn stable_reduce(cl: CliffordClass) -> CliffordClass {
    match cl.field {
        Field::Real => CliffordClass::real(cl.stable_class(), 0),
        Field::Complex => CliffordClass::complex(cl.stable_class()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupTag {
    Z,
    Z2,
    TwoZ,
    Zero,
}

impl GroupTag {
    pub fn symbol(&self) -> &'static str {
        match self {
            GroupTag::Z => "Z",
            GroupTag::Z2 => "Z2",
            GroupTag::TwoZ => "(2)Z",
            GroupTag::Zero => "0",
        }
    }

    /// Whether `value` is an element of the group in its integer encoding.
    pub fn contains(&self, value: i64) -> bool {
        match self {
            GroupTag::Z => true,
            GroupTag::Z2 => value == 0 || value == 1,
            GroupTag::TwoZ => value % 2 == 0,
            GroupTag::Zero => value == 0,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `KO_k(R)` with `k` reduced mod 8.
pub fn ko_group(k: i64) -> GroupTag {
    match k.rem_euclid(8) {
        0 => GroupTag::Z,
        1 | 2 => GroupTag::Z2,
        4 => GroupTag::TwoZ,
        _ => GroupTag::Zero,
    }
}

/// `K_k(C)`: Z in even degree, 0 in odd degree.
pub fn k_group(k: i64) -> GroupTag {
    if k.rem_euclid(2) == 0 {
        GroupTag::Z
    } else {
        GroupTag::Zero
    }
}

pub fn group_for(field: Field, k: i64) -> GroupTag {
    match field {
        Field::Real => ko_group(k),
        Field::Complex => k_group(k),
    }
}

/// Group of the index pairing of a degree-`n` class with the
/// `d`-dimensional lattice: `KO_{n-d}` (or `K_{n-d}`).
pub fn abs_index_group(field: Field, n: usize, d: usize) -> GroupTag {
    group_for(field, n as i64 - d as i64)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `KO_n` of the lattice algebra with trivial action:
/// `sum_k C(d,k) KO_{n-k}`, merged by group tag in first-appearance order.
pub fn ko_lattice_decomposition(field: Field, n: i64, d: usize) -> Vec<(GroupTag, usize)> {
    let mut out: Vec<(GroupTag, usize)> = Vec::new();
    for k in 0..=d {
        let g = group_for(field, n - k as i64);
        let m = binomial(d, k);
        match out.iter_mut().find(|(t, _)| *t == g) {
            Some(e) => e.1 += m,
            None => out.push((g, m)),
        }
    }
    out
}

/// Generators of a graded Clifford module together with the grading.
#[derive(Clone, Debug)]
pub struct GradedMatrixRep {
    pub field: Field,
    pub generators: Vec<CMat>,
    /// +1: self-adjoint with square +1; -1: skew-adjoint with square -1.
    pub signs: Vec<i8>,
    pub grading: CMat,
}

impl GradedMatrixRep {
    pub fn class(&self) -> CliffordClass {
        match self.field {
            Field::Real => {
                let r = self.signs.iter().filter(|&&s| s > 0).count();
                CliffordClass::real(r, self.signs.len() - r)
            }
            Field::Complex => CliffordClass::complex(self.generators.len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.grading.nrows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    GradingInvolution,
    Oddness,
    Anticommutation,
    SquareSign,
    Adjointness,
    ProjectionCommutation,
    ProjectionEvenness,
    HamiltonianCommutation,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub relation: Relation,
    pub generators: Vec<usize>,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RepReport {
    pub violations: Vec<Violation>,
    pub max_residual: f64,
}

impl RepReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn record(&mut self, relation: Relation, generators: Vec<usize>, residual: f64, tol: f64) {
        self.max_residual = self.max_residual.max(residual);
        if !(residual < tol) {
            self.violations.push(Violation { relation, generators, residual });
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliffordError {
    #[error("dimension mismatch: generator {index} is {found}x{found}, grading is {expected}x{expected}")]
    DimensionMismatch { index: usize, found: usize, expected: usize },
    #[error("generator {0} is not square")]
    NotSquare(usize),
    #[error("sign list has {signs} entries for {generators} generators")]
    SignCount { signs: usize, generators: usize },
}

pub const DEFAULT_REP_TOL: f64 = 1e-10;

/// Checks every defining relation of a graded representation.
pub fn check_graded_rep(rep: &GradedMatrixRep) -> Result<RepReport, CliffordError> {
    check_graded_rep_tol(rep, DEFAULT_REP_TOL)
}

pub fn check_graded_rep_tol(rep: &GradedMatrixRep, tol: f64) -> Result<RepReport, CliffordError> {
    let n = rep.grading.nrows();
    if rep.signs.len() != rep.generators.len() {
        return Err(CliffordError::SignCount { signs: rep.signs.len(), generators: rep.generators.len() });
    }
    for (k, g) in rep.generators.iter().enumerate() {
        if g.nrows() != g.ncols() {
            return Err(CliffordError::NotSquare(k));
        }
        if g.nrows() != n {
            return Err(CliffordError::DimensionMismatch { index: k, found: g.nrows(), expected: n });
        }
    }
    let mut report = RepReport::default();
    let gam = rep.grading.as_ref();
    report.record(Relation::GradingInvolution, vec![], linalg::square_res(gam, 1.0), tol);
    report.record(
        Relation::Adjointness,
        vec![],
        linalg::max_abs((gam - gam.adjoint()).as_ref()),
        tol,
    );
    for (k, g) in rep.generators.iter().enumerate() {
        let g = g.as_ref();
        report.record(Relation::Oddness, vec![k], linalg::anticomm_res(g, gam), tol);
        let sgn = rep.signs[k] as f64;
        report.record(Relation::SquareSign, vec![k], linalg::square_res(g, sgn), tol);
        let adj_res = if sgn > 0.0 {
            linalg::max_abs((g - g.adjoint()).as_ref())
        } else {
            linalg::max_abs((g + g.adjoint()).as_ref())
        };
        report.record(Relation::Adjointness, vec![k], adj_res, tol);
        for (l, h) in rep.generators.iter().enumerate().skip(k + 1) {
            report.record(Relation::Anticommutation, vec![k, l], linalg::anticomm_res(g, h.as_ref()), tol);
        }
    }
    Ok(report)
}

/// Left (`rho`, Cl(0,d)) and right (`gamma`, Cl(d,0)) actions on the
/// exterior algebra of R^d, basis = subsets of {1..d} in colex order
/// (equivalently bitmask order).
#[derive(Clone, Debug)]
pub struct ExteriorRep {
    pub d: usize,
    pub left: GradedMatrixRep,
    pub right: GradedMatrixRep,
    pub grading: CMat,
}

impl ExteriorRep {
    pub fn rho(&self, j: usize) -> &CMat {
        &self.left.generators[j]
    }

    pub fn gamma(&self, j: usize) -> &CMat {
        &self.right.generators[j]
    }
}

/// `e_j ∧` on the bitmask basis; `j` is zero-based.
fn wedge(d: usize, j: usize) -> CMat {
    let n = 1usize << d;
    let mut m = linalg::zeros(n, n);
    for s in 0..n {
        if s & (1 << j) == 0 {
            let below = (s & ((1 << j) - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            m[(s | (1 << j), s)] = c(sign, 0.0);
        }
    }
    m
}

pub fn exterior_rep(d: usize) -> ExteriorRep {
    let n = 1usize << d;
    let mut rhos = Vec::with_capacity(d);
    let mut gammas = Vec::with_capacity(d);
    for j in 0..d {
        let w = wedge(d, j);
        let contraction = w.transpose().to_owned();
        rhos.push(&w - &contraction);
        gammas.push(&w + &contraction);
    }
    // (-1)^d rho^1 ... rho^d gamma^d ... gamma^1
    let mut g = linalg::eye(n);
    for r in &rhos {
        g = &g * r;
    }
    for gm in gammas.iter().rev() {
        g = &g * gm;
    }
    if d % 2 == 1 {
        g = linalg::scale(g.as_ref(), c(-1.0, 0.0));
    }
    let left = GradedMatrixRep { field: Field::Real, generators: rhos, signs: vec![-1; d], grading: g.clone() };
    let right = GradedMatrixRep { field: Field::Real, generators: gammas, signs: vec![1; d], grading: g.clone() };
    ExteriorRep { d, left, right, grading: g }
}

/// Outcome of the Atiyah–Bott–Shapiro reduction of a finite graded module.
#[derive(Clone, Debug, Serialize)]
pub struct AbsClass {
    pub group: GroupTag,
    pub value: i64,
    /// Multiplicities of the two inequivalent irreducibles of the ungraded
    /// algebra (only in the Z / (2)Z / complex-Z cases).
    pub mult_plus: Option<i64>,
    pub mult_minus: Option<i64>,
    pub dim: usize,
    pub irrep_dim: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum AbsError {
    #[error("module dimension {dim} is not a multiple of the irreducible dimension {irrep}")]
    NotAModule { dim: usize, irrep: usize },
    #[error("volume element trace {0} is not an integer multiple of the irreducible dimension")]
    NonIntegralTrace(f64),
    #[error("volume element does not square to a scalar (residual {0:.3e})")]
    VolumeElement(f64),
}

/// ABS class of a graded module. The grading is appended as an extra
/// self-adjoint generator, turning the graded `Cl(r,s)` module into an
/// ungraded `Cl(r+1,s)` module; its class in `KO_{r-s}` (or `K_n`) is read
/// off from the dimension or from the trace of the central volume element.
pub fn abs_class(rep: &GradedMatrixRep) -> Result<AbsClass, AbsError> {
    let dim = rep.dim();
    let ngen = rep.generators.len();
    let big_n = ngen + 1;
    let (group, k) = match rep.field {
        Field::Real => {
            let cl = rep.class();
            let k = cl.stable_class();
            (ko_group(k as i64), k)
        }
        Field::Complex => (k_group(ngen as i64), ngen % 2),
    };
    let volume = || -> Result<f64, AbsError> {
        let mut w = rep.grading.clone();
        for g in &rep.generators {
            w = &w * g;
        }
        let sq = &w * &w;
        let id = linalg::eye(dim);
        let plus = linalg::max_abs((&sq - &id).as_ref());
        let minus = linalg::max_abs((&sq + &id).as_ref());
        let tr = if plus < 1e-6 {
            linalg::trace(w.as_ref())
        } else if minus < 1e-6 && rep.field == Field::Complex {
            linalg::trace(w.as_ref()) * c(0.0, 1.0)
        } else {
            return Err(AbsError::VolumeElement(plus.min(minus)));
        };
        Ok(tr.re)
    };
    let mut out = AbsClass { group, value: 0, mult_plus: None, mult_minus: None, dim, irrep_dim: 0 };
    let split = |tr: f64, irrep: usize, out: &mut AbsClass| -> Result<i64, AbsError> {
        if dim % irrep != 0 {
            return Err(AbsError::NotAModule { dim, irrep });
        }
        let q = tr / irrep as f64;
        if (q - q.round()).abs() > 1e-6 {
            return Err(AbsError::NonIntegralTrace(tr));
        }
        let total = (dim / irrep) as i64;
        let diff = q.round() as i64;
        out.mult_plus = Some((total + diff) / 2);
        out.mult_minus = Some((total - diff) / 2);
        out.irrep_dim = irrep;
        Ok(diff)
    };
    match rep.field {
        Field::Complex => {
            if big_n % 2 == 1 {
                let irrep = 1usize << ((big_n - 1) / 2);
                out.value = split(volume()?, irrep, &mut out)?;
            }
        }
        Field::Real => match k {
            0 => {
                let irrep = 1usize << ((big_n - 1) / 2);
                out.value = split(volume()?, irrep, &mut out)?;
            }
            4 => {
                let irrep = 1usize << ((big_n + 1) / 2);
                out.value = 2 * split(volume()?, irrep, &mut out)?;
            }
            1 | 2 => {
                let irrep = if k == 1 { 1usize << (big_n / 2) } else { 1usize << ((big_n + 1) / 2) };
                if dim % irrep != 0 {
                    return Err(AbsError::NotAModule { dim, irrep });
                }
                out.irrep_dim = irrep;
                out.value = ((dim / irrep) % 2) as i64;
            }
            _ => {}
        },
    }
    Ok(out)
}

/// Standard irreducible-free test module: `m` copies of the exterior
/// representation, useful as a known-trivial input.
pub fn direct_sum(rep: &GradedMatrixRep, copies: usize) -> GradedMatrixRep {
    let id = linalg::eye(copies);
    GradedMatrixRep {
        field: rep.field,
        generators: rep.generators.iter().map(|g| linalg::kron(id.as_ref(), g.as_ref())).collect(),
        signs: rep.signs.clone(),
        grading: linalg::kron(id.as_ref(), rep.grading.as_ref()),
    }
}

#[allow(dead_code)]
fn zero_like(n: usize) -> CMat {
    Mat::from_fn(n, n, |_, _| ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1_matrices() {
        let e = exterior_rep(1);
        let rho = linalg::from_real(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let gamma = linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(linalg::max_abs((e.rho(0) - &rho).as_ref()) == 0.0);
        assert!(linalg::max_abs((e.gamma(0) - &gamma).as_ref()) == 0.0);
        let g = linalg::diag_real(&[1.0, -1.0]);
        assert!(linalg::max_abs((&e.grading - &g).as_ref()) == 0.0);
    }

    #[test]
    fn d3_products() {
        let e = exterior_rep(3);
        let gg = &(e.gamma(0) * e.gamma(1)) * e.gamma(2);
        let rr = &(e.rho(0) * e.rho(1)) * e.rho(2);
        let id = linalg::eye(8);
        assert!(linalg::max_abs((&(&gg * &gg) + &id).as_ref()) < 1e-14);
        assert!(linalg::max_abs((&(&rr * &rr) - &id).as_ref()) < 1e-14);
    }

    #[test]
    fn stable_examples() {
        assert_eq!(stable_reduce(CliffordClass::real(1, 1)), CliffordClass::real(0, 0));
        assert_eq!(stable_reduce(CliffordClass::real(8, 0)), CliffordClass::real(0, 0));
        assert_eq!(stable_reduce(CliffordClass::real(3, 5)), CliffordClass::real(6, 0));
    }

    #[test]
    fn ko_table() {
        use GroupTag::*;
        let expect = [Z, Z2, Z2, Zero, TwoZ, Zero, Zero, Zero];
        for (k, g) in expect.iter().enumerate() {
            assert_eq!(ko_group(k as i64), *g);
        }
        assert_eq!(ko_group(-1), Zero);
        assert_eq!(abs_index_group(Field::Real, 4, 2), Z2);
        assert_eq!(abs_index_group(Field::Real, 3, 3), Z);
        assert_eq!(abs_index_group(Field::Real, 0, 0), Z);
    }

    #[test]
    fn lattice_decomposition_examples() {
        use GroupTag::*;
        assert_eq!(ko_lattice_decomposition(Field::Real, 4, 2), vec![(TwoZ, 1), (Zero, 2), (Z2, 1)]);
        assert_eq!(ko_lattice_decomposition(Field::Real, 0, 0), vec![(Z, 1)]);
        assert_eq!(ko_lattice_decomposition(Field::Real, 0, 1), vec![(Z, 1), (Zero, 1)]);
    }

    #[test]
    fn duplicate_generator_flagged() {
        let e = exterior_rep(2);
        let rep = GradedMatrixRep {
            field: Field::Real,
            generators: vec![e.gamma(0).clone(), e.gamma(0).clone()],
            signs: vec![1, 1],
            grading: e.grading.clone(),
        };
        let r = check_graded_rep(&rep).unwrap();
        assert!(r.violations.iter().any(|v| v.relation == Relation::Anticommutation));
    }

    #[test]
    fn identity_grading_breaks_oddness() {
        let e = exterior_rep(2);
        let mut rep = e.left.clone();
        rep.grading = linalg::eye(4);
        let r = check_graded_rep(&rep).unwrap();
        let odd = r.violations.iter().filter(|v| v.relation == Relation::Oddness).count();
        assert_eq!(odd, 2);
    }

    #[test]
    fn abs_of_irreducible_cl_0_1() {
        // Lambda R^1 with rho: graded Cl(0,1) module; KO_{-1} = 0.
        let e = exterior_rep(1);
        let a = abs_class(&e.left).unwrap();
        assert_eq!(a.group, GroupTag::Zero);
        // with gamma: graded Cl(1,0) module of dim 2, KO_1 = Z2, irreducible -> 1
        let a = abs_class(&e.right).unwrap();
        assert_eq!(a.group, GroupTag::Z2);
        assert_eq!(a.value, 1);
    }
}
