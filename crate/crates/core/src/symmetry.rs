//! CT-symmetry data: which of T, C, S are present, the signs of their
//! squares, concrete (anti)unitary realizations and compatibility checks.

use crate::clifford::CliffordClass;
use crate::linalg::{self, c, CMat, ONE, ZERO};
use crate::model::TruncatedOperator;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    #[default]
    Conjugation,
    SpatialInvolution,
    Explicit,
}

/// Presence and square signs of the CT generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct SymmetrySpec {
    /// Sign of `R_T^2` when time reversal is present.
    pub t: Option<i8>,
    /// Sign of `R_C^2` when charge conjugation is present.
    pub c: Option<i8>,
    pub s: bool,
    #[serde(default)]
    pub realization: Realization,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SymmetryError {
    #[error("inconsistent symmetry spec: {0}")]
    Inconsistent(String),
    #[error("internal rank {0} is odd but the block realization needs it even")]
    OddRank(usize),
    #[error("dimension mismatch: operator acts on {ops}, Hamiltonian has internal rank {model}")]
    DimensionMismatch { ops: usize, model: usize },
    #[error("normalization impossible within the internal space: R_T R_C and R_C R_T differ by a non-scalar (residual {0:.3e})")]
    Normalization(f64),
    #[error("operator {name} squares to {found:?}, expected {expected}")]
    SquareSign { name: &'static str, expected: i8, found: Option<i8> },
    #[error("operator {0} is not unitary")]
    NotUnitary(&'static str),
}

impl SymmetrySpec {
    pub fn none() -> Self {
        SymmetrySpec::default()
    }

    pub fn t(sign: i8) -> Self {
        SymmetrySpec { t: Some(sign), ..Default::default() }
    }

    pub fn c(sign: i8) -> Self {
        SymmetrySpec { c: Some(sign), ..Default::default() }
    }

    pub fn chiral() -> Self {
        SymmetrySpec { s: true, ..Default::default() }
    }

    pub fn ct(sign_c: i8, sign_t: i8) -> Self {
        SymmetrySpec { t: Some(sign_t), c: Some(sign_c), s: true, ..Default::default() }
    }

    /// The ten valid specs in the row order of the periodic table.
    pub fn all() -> [SymmetrySpec; 10] {
        [
            Self::t(1),
            Self::ct(1, 1),
            Self::c(1),
            Self::ct(1, -1),
            Self::t(-1),
            Self::ct(-1, -1),
            Self::c(-1),
            Self::ct(-1, 1),
            Self::none(),
            Self::chiral(),
        ]
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        for (name, s) in [("T", self.t), ("C", self.c)] {
            if let Some(v) = s {
                if v != 1 && v != -1 {
                    return Err(SymmetryError::Inconsistent(format!("sign of {name} must be +1 or -1, got {v}")));
                }
            }
        }
        match (self.t.is_some(), self.c.is_some(), self.s) {
            (true, true, false) => Err(SymmetryError::Inconsistent("T and C present require S = CT".into())),
            (true, false, true) | (false, true, true) => {
                Err(SymmetryError::Inconsistent("S together with only one of T, C does not close a group".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_complex(&self) -> bool {
        self.t.is_none() && self.c.is_none()
    }

    /// Even in the sense of the class construction: no generator reverses H.
    pub fn is_even(&self) -> bool {
        self.c.is_none() && !self.s
    }

    /// Cartan label, for human-readable output only.
    pub fn cartan(&self) -> &'static str {
        match (self.t, self.c, self.s) {
            (None, None, false) => "A",
            (None, None, true) => "AIII",
            (Some(1), None, _) => "AI",
            (Some(1), Some(1), _) => "BDI",
            (None, Some(1), _) => "D",
            (Some(-1), Some(1), _) => "DIII",
            (Some(-1), None, _) => "AII",
            (Some(-1), Some(-1), _) => "CII",
            (None, Some(-1), _) => "C",
            (Some(1), Some(-1), _) => "CI",
            _ => "?",
        }
    }
}

impl fmt::Display for SymmetrySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |s: i8| if s > 0 { "+1" } else { "-1" };
        let mut parts = Vec::new();
        if let Some(s) = self.t {
            parts.push(format!("T:{}", sign(s)));
        }
        if let Some(s) = self.c {
            parts.push(format!("C:{}", sign(s)));
        }
        if self.s && self.t.is_none() {
            parts.push("S".to_string());
        }
        if parts.is_empty() {
            f.write_str("{}")
        } else {
            write!(f, "{{{}}}", parts.join(", "))
        }
    }
}

/// Table lookup from symmetry data to the graded Clifford algebra.
pub fn classify(spec: &SymmetrySpec) -> Result<CliffordClass, SymmetryError> {
    spec.validate()?;
    let r = match (spec.c, spec.t) {
        (None, None) => return Ok(CliffordClass::complex(if spec.s { 1 } else { 0 })),
        (None, Some(1)) => 0,
        (Some(1), Some(1)) => 1,
        (Some(1), None) => 2,
        (Some(1), Some(-1)) => 3,
        (None, Some(-1)) => 4,
        (Some(-1), Some(-1)) => 5,
        (Some(-1), None) => 6,
        (Some(-1), Some(1)) => 7,
        _ => unreachable!("validated"),
    };
    Ok(CliffordClass::real(r, 0))
}

/// The operator `psi -> U conj(psi)` on the internal space.
#[derive(Clone, Debug)]
pub struct Antiunitary {
    pub u: CMat,
    pub sign: i8,
}

impl Antiunitary {
    /// `(U K)^2 = U conj(U)`.
    pub fn square(&self) -> CMat {
        &self.u * linalg::conj(self.u.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryOperators {
    pub spec: SymmetrySpec,
    pub t: Option<Antiunitary>,
    pub c: Option<Antiunitary>,
    /// Unitary chiral operator (set by `normalize` when T and C are present).
    pub s: Option<CMat>,
    /// Lattice reflection `x -> -x` accompanies every operator.
    pub flip: bool,
}

impl SymmetryOperators {
    pub fn dim(&self) -> usize {
        self.t
            .as_ref()
            .map(|a| a.u.nrows())
            .or_else(|| self.c.as_ref().map(|a| a.u.nrows()))
            .or_else(|| self.s.as_ref().map(|s| s.nrows()))
            .unwrap_or(0)
    }

    pub fn trivial(dim: usize) -> Self {
        let _ = dim;
        SymmetryOperators { spec: SymmetrySpec::none(), t: None, c: None, s: None, flip: false }
    }

    /// Sign of the square of each present generator, computed from the matrices.
    pub fn square_signs(&self) -> (Option<i8>, Option<i8>, Option<i8>) {
        let sign_of = |m: &CMat| -> Option<i8> {
            let id = linalg::eye(m.nrows());
            if linalg::max_abs((m - &id).as_ref()) < 1e-12 {
                Some(1)
            } else if linalg::max_abs((m + &id).as_ref()) < 1e-12 {
                Some(-1)
            } else {
                None
            }
        };
        (
            self.t.as_ref().and_then(|a| sign_of(&a.square())),
            self.c.as_ref().and_then(|a| sign_of(&a.square())),
            self.s.as_ref().and_then(|s| sign_of(&(s * s))),
        )
    }

    /// `R_T R_C` and `R_C R_T` as linear matrices, when both are present.
    pub fn tc_products(&self) -> Option<(CMat, CMat)> {
        let (t, c) = (self.t.as_ref()?, self.c.as_ref()?);
        Some((&t.u * linalg::conj(c.u.as_ref()), &c.u * linalg::conj(t.u.as_ref())))
    }

    pub fn commute_residual(&self) -> f64 {
        self.tc_products().map(|(a, b)| linalg::max_abs((&a - &b).as_ref())).unwrap_or(0.0)
    }

    /// Internal-space generators with the sign `c(g)` of `g H = c(g) H g`:
    /// `(matrix, antilinear, c)`.
    pub fn generators(&self) -> Vec<(&'static str, CMat, bool, f64)> {
        let mut out = Vec::new();
        if let Some(t) = &self.t {
            out.push(("T", t.u.clone(), true, 1.0));
        }
        if let Some(cc) = &self.c {
            out.push(("C", cc.u.clone(), true, -1.0));
        }
        if let Some(s) = &self.s {
            out.push(("S", s.clone(), false, -1.0));
        }
        out
    }

    /// Group average `(1/|G|) sum_g c(g) R_g W R_g^*` on one internal block.
    pub fn symmetrize_block(&self, w: &CMat) -> CMat {
        let mut acc = w.clone();
        let mut count = 1.0;
        for (_, u, anti, cg) in self.generators() {
            let src = if anti { linalg::conj(w.as_ref()) } else { w.clone() };
            let term = &(&u * &src) * u.adjoint();
            acc = &acc + &linalg::scale(term.as_ref(), c(cg, 0.0));
            count += 1.0;
        }
        linalg::scale(acc.as_ref(), c(1.0 / count, 0.0))
    }
}

/// `J_eta = [[0, 1], [eta, 0]]`.
fn j_eta(eta: f64) -> CMat {
    linalg::from_real(&[&[0.0, 1.0], &[eta, 0.0]])
}

/// Standard realization on `C^2 (x) C^n`, i.e. internal rank `2n`.
pub fn realize(spec: &SymmetrySpec, n: usize) -> Result<SymmetryOperators, SymmetryError> {
    spec.validate()?;
    if spec.realization == Realization::Explicit {
        return Err(SymmetryError::Inconsistent("explicit realizations carry their own matrices".into()));
    }
    let id = linalg::eye(n);
    let kr = |a: CMat, b: &CMat| linalg::kron(a.as_ref(), b.as_ref());
    let flip = spec.realization == Realization::SpatialInvolution;
    let mut ops = SymmetryOperators { spec: *spec, t: None, c: None, s: None, flip };
    match (spec.t, spec.c) {
        (None, None) => {
            if spec.s {
                ops.s = Some(kr(linalg::diag_real(&[1.0, -1.0]), &id));
            }
        }
        (Some(st), None) => {
            ops.t = Some(Antiunitary { u: kr(j_eta(st as f64), &id), sign: st });
        }
        (None, Some(sc)) => {
            let ij = linalg::scale(j_eta(sc as f64).as_ref(), c(0.0, 1.0));
            ops.c = Some(Antiunitary { u: kr(ij, &id), sign: sc });
        }
        (Some(st), Some(sc)) => {
            ops.t = Some(Antiunitary { u: kr(j_eta(st as f64), &id), sign: st });
            if st != sc {
                let ij = linalg::scale(j_eta(sc as f64).as_ref(), c(0.0, 1.0));
                ops.c = Some(Antiunitary { u: kr(ij, &id), sign: sc });
            } else {
                if n % 2 == 1 {
                    return Err(SymmetryError::OddRank(2 * n));
                }
                let h = n / 2;
                let d: Vec<f64> = (0..n).map(|k| if k < h { 1.0 } else { -1.0 }).collect();
                ops.c = Some(Antiunitary { u: kr(j_eta(sc as f64), &linalg::diag_real(&d)), sign: sc });
            }
        }
    }
    normalize(ops)
}

/// Operators from user-supplied matrices; checked for unitarity and squares.
pub fn explicit(
    spec: &SymmetrySpec,
    t: Option<CMat>,
    cc: Option<CMat>,
    s: Option<CMat>,
) -> Result<SymmetryOperators, SymmetryError> {
    spec.validate()?;
    let unitary = |m: &CMat, name: &'static str| -> Result<(), SymmetryError> {
        let id = linalg::eye(m.nrows());
        if m.nrows() != m.ncols() || linalg::max_abs((&(m.adjoint() * m) - &id).as_ref()) > 1e-10 {
            return Err(SymmetryError::NotUnitary(name));
        }
        Ok(())
    };
    let mut ops = SymmetryOperators { spec: *spec, t: None, c: None, s: None, flip: false };
    match (spec.t, t) {
        (Some(sign), Some(u)) => {
            unitary(&u, "T")?;
            ops.t = Some(Antiunitary { u, sign });
        }
        (None, None) => {}
        _ => return Err(SymmetryError::Inconsistent("T matrix does not match the spec".into())),
    }
    match (spec.c, cc) {
        (Some(sign), Some(u)) => {
            unitary(&u, "C")?;
            ops.c = Some(Antiunitary { u, sign });
        }
        (None, None) => {}
        _ => return Err(SymmetryError::Inconsistent("C matrix does not match the spec".into())),
    }
    if spec.is_complex() && spec.s {
        let m = s.ok_or_else(|| SymmetryError::Inconsistent("S matrix missing".into()))?;
        unitary(&m, "S")?;
        ops.s = Some(m);
    }
    let (st, sc, _) = ops.square_signs();
    if let Some(a) = &ops.t {
        if st != Some(a.sign) {
            return Err(SymmetryError::SquareSign { name: "T", expected: a.sign, found: st });
        }
    }
    if let Some(a) = &ops.c {
        if sc != Some(a.sign) {
            return Err(SymmetryError::SquareSign { name: "C", expected: a.sign, found: sc });
        }
    }
    normalize(ops)
}

/// Make `R_T` and `R_C` commute by rephasing `R_C`, then set `R_S = R_C R_T`.
///
/// `R_T R_C = w R_C R_T` with `w` a scalar phase `e^{i theta}` is the only
/// case reachable by a phase; `R_C -> e^{i theta/2} R_C` removes it without
/// changing `R_C^2`. Anything else is reported.
pub fn normalize(mut ops: SymmetryOperators) -> Result<SymmetryOperators, SymmetryError> {
    let Some((tc, ct)) = ops.tc_products() else {
        return Ok(ops);
    };
    let n = tc.nrows();
    // w = (R_T R_C)(R_C R_T)^{-1}; R_C R_T is unitary.
    let w = &tc * ct.adjoint();
    let phase = w[(0, 0)];
    let res = linalg::max_abs((&w - &linalg::scale(linalg::eye(n).as_ref(), phase)).as_ref());
    if res > 1e-10 || (phase.norm() - 1.0).abs() > 1e-10 {
        return Err(SymmetryError::Normalization(res));
    }
    let half = c(0.0, phase.arg() / 2.0).exp();
    if (half - ONE).norm() > 1e-14 {
        let cc = ops.c.as_mut().expect("C present");
        cc.u = linalg::scale(cc.u.as_ref(), half);
    }
    let (_, ct) = ops.tc_products().expect("both present");
    ops.s = Some(ct);
    Ok(ops)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    /// `(generator, residual)` of `||R_g H R_g^* - c(g) H||_max`.
    pub residuals: Vec<(String, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

pub const DEFAULT_COMPAT_TOL: f64 = 1e-10;

/// `(1 (x) U) op(H) (1 (x) U)^*` with `op` conjugation for antilinear `U`
/// and the site reflection applied when `flip` is set.
pub fn conjugate_local(h: &TruncatedOperator, u: &CMat, antilinear: bool, flip: bool) -> CMat {
    let nint = u.nrows();
    let nsites = h.sites.len();
    let m = &h.matrix;
    let perm: Vec<usize> = if flip { (0..nsites).map(|i| h.reflected(i)).collect() } else { (0..nsites).collect() };
    let mut out = linalg::zeros(m.nrows(), m.ncols());
    let ua = u.adjoint().to_owned();
    let mut blk = linalg::zeros(nint, nint);
    for i in 0..nsites {
        for j in 0..nsites {
            let (pi, pj) = (perm[i], perm[j]);
            let mut nz = false;
            for a in 0..nint {
                for b in 0..nint {
                    let v = m[(pi * nint + a, pj * nint + b)];
                    let v = if antilinear { v.conj() } else { v };
                    if v != ZERO {
                        nz = true;
                    }
                    blk[(a, b)] = v;
                }
            }
            if !nz {
                continue;
            }
            let r = &(u * &blk) * &ua;
            for a in 0..nint {
                for b in 0..nint {
                    out[(i * nint + a, j * nint + b)] = r[(a, b)];
                }
            }
        }
    }
    out
}

pub fn verify_compatibility(h: &TruncatedOperator, ops: &SymmetryOperators) -> Result<CompatibilityReport, SymmetryError> {
    verify_compatibility_tol(h, ops, DEFAULT_COMPAT_TOL)
}

pub fn verify_compatibility_tol(
    h: &TruncatedOperator,
    ops: &SymmetryOperators,
    tol: f64,
) -> Result<CompatibilityReport, SymmetryError> {
    let mut residuals = Vec::new();
    for (name, u, anti, cg) in ops.generators() {
        if u.nrows() != h.n_int {
            return Err(SymmetryError::DimensionMismatch { ops: u.nrows(), model: h.n_int });
        }
        let conj = conjugate_local(h, &u, anti, ops.flip);
        let target = linalg::scale(h.matrix.as_ref(), c(cg, 0.0));
        residuals.push((name.to_string(), linalg::max_abs((&conj - &target).as_ref())));
    }
    let pass = residuals.iter().all(|(_, r)| *r < tol);
    Ok(CompatibilityReport { residuals, tolerance: tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::Field;

    #[test]
    fn table_rows() {
        assert_eq!(classify(&SymmetrySpec::t(-1)).unwrap(), CliffordClass::real(4, 0));
        assert_eq!(classify(&SymmetrySpec::chiral()).unwrap(), CliffordClass::complex(1));
        assert_eq!(classify(&SymmetrySpec::ct(-1, 1)).unwrap(), CliffordClass::real(7, 0));
        assert_eq!(classify(&SymmetrySpec::ct(1, -1)).unwrap(), CliffordClass::real(3, 0));
    }

    #[test]
    fn classify_injective() {
        let mut seen = std::collections::HashSet::new();
        for s in SymmetrySpec::all() {
            let cl = classify(&s).unwrap();
            assert!(seen.insert((cl.field == Field::Real, cl.stable_class())));
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn invalid_specs() {
        let bad = SymmetrySpec { t: Some(1), c: None, s: true, realization: Realization::Conjugation };
        assert!(classify(&bad).is_err());
        let bad = SymmetrySpec { t: Some(1), c: Some(1), s: false, realization: Realization::Conjugation };
        assert!(classify(&bad).is_err());
        let bad = SymmetrySpec { t: Some(2), ..Default::default() };
        assert!(classify(&bad).is_err());
    }

    #[test]
    fn odd_time_reversal_n1() {
        let ops = realize(&SymmetrySpec::t(-1), 1).unwrap();
        let u = &ops.t.as_ref().unwrap().u;
        assert_eq!(linalg::max_abs((u - &linalg::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]])).as_ref()), 0.0);
        assert_eq!(ops.square_signs().0, Some(-1));
    }

    #[test]
    fn chiral_n1() {
        let ops = realize(&SymmetrySpec::chiral(), 1).unwrap();
        let s = ops.s.unwrap();
        assert_eq!(linalg::max_abs((&s - &linalg::diag_real(&[1.0, -1.0])).as_ref()), 0.0);
    }

    #[test]
    fn ct_pair_n1() {
        let ops = realize(&SymmetrySpec::ct(1, -1), 1).unwrap();
        let cu = &ops.c.as_ref().unwrap().u;
        let expect = linalg::scale(linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).as_ref(), c(0.0, 1.0));
        assert!(linalg::max_abs((cu - &expect).as_ref()) < 1e-15);
        assert_eq!(ops.square_signs(), (Some(-1), Some(1), Some(-1)));
        assert!(ops.commute_residual() < 1e-15);
    }

    #[test]
    fn all_realizations_square_correctly() {
        for s in SymmetrySpec::all() {
            let ops = realize(&s, 2).unwrap();
            let (st, sc, _) = ops.square_signs();
            assert_eq!(st, s.t);
            assert_eq!(sc, s.c);
            assert!(ops.commute_residual() < 1e-14);
        }
        assert_eq!(realize(&SymmetrySpec::ct(1, 1), 1).unwrap_err(), SymmetryError::OddRank(2));
    }

    #[test]
    fn anticommuting_pair_is_normalized() {
        // R_T = J_{-1} K, R_C = (sigma_z) K anticommute: (J sz) = -(sz J)
        let t = j_eta(-1.0);
        let cz = linalg::diag_real(&[1.0, -1.0]);
        let spec = SymmetrySpec::ct(1, -1);
        let ops = SymmetryOperators {
            spec,
            t: Some(Antiunitary { u: t, sign: -1 }),
            c: Some(Antiunitary { u: cz, sign: 1 }),
            s: None,
            flip: false,
        };
        assert!(ops.commute_residual() > 1.0);
        let n = normalize(ops).unwrap();
        assert!(n.commute_residual() < 1e-14);
        assert_eq!(n.square_signs().0, Some(-1));
        assert_eq!(n.square_signs().1, Some(1));
    }

    #[test]
    fn single_generator_normalize_is_identity() {
        let ops = realize(&SymmetrySpec::t(1), 1).unwrap();
        let before = ops.t.as_ref().unwrap().u.clone();
        let after = normalize(ops).unwrap();
        assert_eq!(linalg::max_abs((&before - &after.t.unwrap().u).as_ref()), 0.0);
    }
}
