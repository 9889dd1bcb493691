//! Concrete symmetry-class data: the Clifford generators acting on copies of
//! the truncated space, the grading and the (doubled) Fermi projection.

use crate::clifford::{check_graded_rep_tol, CliffordClass, Field, GradedMatrixRep, Relation, RepReport};
use crate::linalg::{self, c, CMat};
use crate::model::{Fermi, ModelError, TruncatedOperator};
use crate::symmetry::{classify, SymmetryError, SymmetryOperators, SymmetrySpec};

pub const DEFAULT_CLASS_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum ClassError {
    #[error("even_class needs a group inside {{1, T}}, got {0}")]
    NotEven(SymmetrySpec),
    #[error("odd_class needs C or S in the group, got {0}")]
    NotOdd(SymmetrySpec),
    #[error("operators do not match the spec: {0}")]
    Operators(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

/// Generators, grading and projection on the ambient space
/// (copies of the truncated space, realified for real classes).
#[derive(Clone, Debug)]
pub struct SymmetryClassData {
    pub spec: SymmetrySpec,
    pub field: Field,
    pub generators: Vec<CMat>,
    pub signs: Vec<i8>,
    pub grading: CMat,
    /// Orthonormal basis of the range of the projection.
    pub basis: CMat,
    /// The operator the projection is a spectral projection of (`H`, or
    /// `H (x) rho` in the odd case).
    pub hamiltonian: CMat,
    /// Signature of all left generators, including the one obtained from
    /// the right `Cl(0,1)` action in the odd case.
    pub class: CliffordClass,
    /// Signature of the displayed generator family alone.
    pub family_class: CliffordClass,
    pub copies: usize,
    /// Lattice site of every ambient row.
    pub site_of_row: Vec<usize>,
}

impl SymmetryClassData {
    pub fn dim(&self) -> usize {
        self.grading.nrows()
    }

    /// `basis` is block diagonal with `copies` equal blocks.
    pub fn projection(&self) -> CMat {
        let k = self.copies;
        let b = self.basis.as_ref().submatrix(0, 0, self.basis.nrows() / k, self.basis.ncols() / k);
        linalg::kron(linalg::eye(k).as_ref(), (b * b.adjoint()).as_ref())
    }

    pub fn rep(&self) -> GradedMatrixRep {
        GradedMatrixRep {
            field: self.field,
            generators: self.generators.clone(),
            signs: self.signs.clone(),
            grading: self.grading.clone(),
        }
    }
}

fn sign_of_square(g: &CMat) -> i8 {
    if linalg::square_res(g.as_ref(), 1.0) <= linalg::square_res(g.as_ref(), -1.0) {
        1
    } else {
        -1
    }
}

fn class_of(field: Field, signs: &[i8]) -> CliffordClass {
    match field {
        Field::Complex => CliffordClass::complex(signs.len()),
        Field::Real => {
            let r = signs.iter().filter(|&&s| s > 0).count();
            CliffordClass::real(r, signs.len() - r)
        }
    }
}

/// `1_sites (x) U` as a dense matrix.
fn local(ht: &TruncatedOperator, u: &CMat) -> CMat {
    linalg::kron(linalg::eye(ht.sites.len()).as_ref(), u.as_ref())
}

fn realified_sites(ht: &TruncatedOperator) -> Vec<usize> {
    (0..2 * ht.dim()).map(|r| (r / 2) / ht.n_int).collect()
}

fn copies_of(sites: &[usize], k: usize) -> Vec<usize> {
    (0..k).flat_map(|_| sites.iter().copied()).collect()
}

fn tensor_sites(sites: &[usize], k: usize) -> Vec<usize> {
    sites.iter().flat_map(|&s| std::iter::repeat_n(s, k)).collect()
}

/// `1 - 2P` from the occupied basis, Hermitian-cleaned.
fn flat_from(fermi: &Fermi) -> CMat {
    let p = fermi.projection();
    let id = linalg::eye(p.nrows());
    linalg::herm_part((&id - &linalg::scale(p.as_ref(), c(2.0, 0.0))).as_ref())
}

/// Real orthonormal basis `[Re v, Im v]`-style of the realified range.
fn realified_basis(v: &CMat) -> CMat {
    // columns psi and i psi of the complex basis, realified
    let iv = linalg::scale(v.as_ref(), c(0.0, 1.0));
    let a = linalg::realify_vec(v.as_ref());
    let b = linalg::realify_vec(iv.as_ref());
    let mut out = linalg::zeros(a.nrows(), 2 * v.ncols());
    for j in 0..v.ncols() {
        for i in 0..a.nrows() {
            out[(i, 2 * j)] = a[(i, j)];
            out[(i, 2 * j + 1)] = b[(i, j)];
        }
    }
    out
}

/// Class data for groups inside `{1, T}`.
pub fn even_class(ht: &TruncatedOperator, fermi: &Fermi, ops: &SymmetryOperators) -> Result<SymmetryClassData, ClassError> {
    let spec = ops.spec;
    if !spec.is_even() {
        return Err(ClassError::NotEven(spec));
    }
    let h = ht.matrix.clone();
    let flat = flat_from(fermi);
    match spec.t {
        None => {
            let grading = linalg::scale(flat.as_ref(), c(-1.0, 0.0));
            let n = ht.dim();
            Ok(SymmetryClassData {
                spec,
                field: Field::Complex,
                generators: vec![],
                signs: vec![],
                grading,
                basis: fermi.basis.clone(),
                hamiltonian: h,
                class: CliffordClass::complex(0),
                family_class: CliffordClass::complex(0),
                copies: 1,
                site_of_row: (0..n).map(|r| r / ht.n_int).collect(),
            })
        }
        Some(1) => {
            // real form: +1 eigenspace of the realified time reversal
            let ut = &ops.t.as_ref().ok_or_else(|| ClassError::Operators("T missing".into()))?.u;
            let rt = linalg::realify_anti(ut.as_ref());
            let site_basis = linalg::eigenspace(rt.as_ref(), 1.0, 1e-6);
            if site_basis.ncols() != ht.n_int {
                return Err(ClassError::Operators("real form of T has the wrong dimension".into()));
            }
            let b = local(ht, &site_basis);
            let proj = |m: &CMat| linalg::herm_part((&(b.adjoint() * m) * &b).as_ref());
            let hr = proj(&linalg::realify(h.as_ref()));
            let pr = proj(&linalg::realify(fermi.projection().as_ref()));
            let basis = linalg::eigenspace(pr.as_ref(), 1.0, 1e-6);
            let id = linalg::eye(pr.nrows());
            let grading = &linalg::scale(pr.as_ref(), c(2.0, 0.0)) - &id;
            let n = ht.sites.len() * ht.n_int;
            Ok(SymmetryClassData {
                spec,
                field: Field::Real,
                generators: vec![],
                signs: vec![],
                grading,
                basis,
                hamiltonian: hr,
                class: CliffordClass::real(0, 0),
                family_class: CliffordClass::real(0, 0),
                copies: 1,
                site_of_row: (0..n).map(|r| r / ht.n_int).collect(),
            })
        }
        Some(_) => {
            let ut = &ops.t.as_ref().ok_or_else(|| ClassError::Operators("T missing".into()))?.u;
            let r = linalg::realify_anti(local(ht, ut).as_ref());
            let n2 = r.nrows();
            let id = linalg::eye(n2);
            let j = linalg::realify(linalg::scale(linalg::eye(ht.dim()).as_ref(), c(0.0, 1.0)).as_ref());
            let jr = &j * &r;
            let off = |x: &CMat| {
                let neg = linalg::scale(x.as_ref(), c(-1.0, 0.0));
                linalg::blocks(&[vec![None, Some(neg)], vec![Some(x.clone()), None]])
            };
            let sym = linalg::blocks(&[vec![None, Some(id.clone())], vec![Some(id.clone()), None]]);
            let generators = vec![sym, off(&j), off(&r), off(&jr)];
            let s = linalg::realify(flat.as_ref());
            let grading = linalg::block_diag(&[s.clone(), linalg::scale(s.as_ref(), c(-1.0, 0.0))]);
            let hr = linalg::realify(h.as_ref());
            let vb = realified_basis(&fermi.basis);
            let signs: Vec<i8> = generators.iter().map(sign_of_square).collect();
            let class = class_of(Field::Real, &signs);
            Ok(SymmetryClassData {
                spec,
                field: Field::Real,
                generators,
                signs,
                grading,
                basis: linalg::block_diag(&[vb.clone(), vb]),
                hamiltonian: linalg::block_diag(&[hr.clone(), hr]),
                class,
                family_class: class,
                copies: 2,
                site_of_row: copies_of(&realified_sites(ht), 2),
            })
        }
    }
}

fn kron_pattern(p: &[[f64; 4]; 4], a: &CMat) -> CMat {
    let pm = CMat::from_fn(4, 4, |i, j| c(p[i][j], 0.0));
    linalg::kron(pm.as_ref(), a.as_ref())
}

/// Class data for groups containing C or S: the doubled operator
/// `H (x) rho` on `W (x) R^2`, its even Fermi projection and the generator
/// family on `k` copies (`k = 4` real, `k = 2` chiral complex).
pub fn odd_class(ht: &TruncatedOperator, fermi: &Fermi, ops: &SymmetryOperators) -> Result<SymmetryClassData, ClassError> {
    let spec = ops.spec;
    if spec.is_even() {
        return Err(ClassError::NotOdd(spec));
    }
    let complex = spec.is_complex();
    let field = if complex { Field::Complex } else { Field::Real };
    let flat = flat_from(fermi);

    // base space W with H, sgn H and the relevant symmetry operators
    let (h_w, flat_w, sites_w) = if complex {
        (ht.matrix.clone(), flat, (0..ht.dim()).map(|r| r / ht.n_int).collect::<Vec<_>>())
    } else {
        (linalg::realify(ht.matrix.as_ref()), linalg::realify(flat.as_ref()), realified_sites(ht))
    };
    let r_c = ops.c.as_ref().map(|a| linalg::realify_anti(local(ht, &a.u).as_ref()));
    let r_s = ops.s.as_ref().map(|s| if complex { local(ht, s) } else { linalg::realify(local(ht, s).as_ref()) });

    let square_sign = |m: &CMat| sign_of_square(m);
    // grading source g
    let g = match (spec.t.is_some(), &r_c, &r_s) {
        (false, None, Some(s)) => {
            if square_sign(s) > 0 {
                s.clone()
            } else {
                linalg::scale(s.as_ref(), c(0.0, 1.0))
            }
        }
        (false, Some(rc), _) => rc.clone(),
        (true, Some(rc), Some(rs)) => {
            if spec.c == spec.t {
                rc.clone()
            } else {
                rs.clone()
            }
        }
        _ => return Err(ClassError::Operators("C or S operator missing".into())),
    };
    // stabilize when g^2 = -1
    let stab = square_sign(&g) < 0;
    let eps2 = linalg::from_real(&[&[0.0, -1.0], &[1.0, 0.0]]);
    let id2 = linalg::eye(2);
    let lift = |m: &CMat| if stab { linalg::kron(m.as_ref(), id2.as_ref()) } else { m.clone() };
    let gamma_b = if stab { linalg::kron(g.as_ref(), eps2.as_ref()) } else { g.clone() };
    let h_b = lift(&h_w);
    let flat_b = lift(&flat_w);
    let r_c = r_c.map(|m| lift(&m));
    let r_s = r_s.map(|m| lift(&m));
    let sites_b = if stab { tensor_sites(&sites_w, 2) } else { sites_w };

    // Cl(0,1) factor: rho = L, grading gamma01
    let l_mat = linalg::from_real(&[&[0.0, -1.0], &[1.0, 0.0]]);
    let g01 = linalg::diag_real(&[1.0, -1.0]);
    let hat_rho = |a: &CMat| linalg::kron((a * &gamma_b).as_ref(), l_mat.as_ref());
    let grading_v = linalg::kron(gamma_b.as_ref(), g01.as_ref());
    let h_tilde = hat_rho(&h_b);
    let sites_v = tensor_sites(&sites_b, 2);
    // sgn(H~) = sgn(H) Gamma_b (x) L
    let sgn_tilde = hat_rho(&flat_b);
    let nv = sgn_tilde.nrows();
    let p_tilde = linalg::scale((&linalg::eye(nv) - &sgn_tilde).as_ref(), c(0.5, 0.0));
    let basis_v = linalg::eigenspace(p_tilde.as_ref(), 1.0, 1e-6);
    let eps_v = linalg::kron(gamma_b.as_ref(), (&g01 * &l_mat).as_ref());

    let (family, k): (Vec<CMat>, usize) = if complex {
        let a = hat_rho(r_s.as_ref().expect("S"));
        let p1 = linalg::diag_real(&[1.0, -1.0]);
        let p2 = linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        (vec![linalg::kron(p1.as_ref(), a.as_ref()), linalg::kron(p2.as_ref(), a.as_ref())], 2)
    } else {
        let b = hat_rho(r_c.as_ref().expect("C"));
        let g3 = kron_pattern(&[[0., 0., 1., 0.], [0., 0., 0., -1.], [-1., 0., 0., 0.], [0., 1., 0., 0.]], &b);
        let g4 = kron_pattern(&[[0., 0., 0., 1.], [0., 0., 1., 0.], [0., -1., 0., 0.], [-1., 0., 0., 0.]], &b);
        let anti = [[0., 0., 0., -1.], [0., 0., 1., 0.], [0., 1., 0., 0.], [-1., 0., 0., 0.]];
        let gens = match spec.t {
            None => {
                // u = Gamma_b is even, self-adjoint, unitary and anticommutes with H
                let u_hat = hat_rho(&gamma_b);
                let g5 = kron_pattern(&[[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., -1., 0.], [0., 0., 0., -1.]], &u_hat);
                vec![g3, g4, g5]
            }
            Some(_) if spec.c == spec.t => {
                let a = hat_rho(r_s.as_ref().expect("S"));
                let g1 = kron_pattern(&[[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., -1., 0.], [0., 0., 0., -1.]], &a);
                let g2 = kron_pattern(&anti, &a);
                vec![g1, g2, g3, g4]
            }
            Some(_) => {
                // R_C^2 = -R_T^2: the grading comes from R_CT (always stabilized
                // here since R_CT^2 = -1). Built from the quaternionic triple
                // {i, R_T, i R_T} tensored with rho, and E (x) rho, E the
                // stabilization unit.
                let ut = &ops.t.as_ref().expect("T").u;
                let r_t = lift(&linalg::realify_anti(local(ht, ut).as_ref()));
                let j = lift(&linalg::realify(linalg::scale(linalg::eye(ht.dim()).as_ref(), c(0.0, 1.0)).as_ref()));
                let e = linalg::kron(linalg::eye(h_w.nrows()).as_ref(), eps2.as_ref());
                let with_l = |x: &CMat| linalg::kron(x.as_ref(), l_mat.as_ref());
                let sz = linalg::diag_real(&[1.0, -1.0]);
                let iy = linalg::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]]);
                let k2 = |p: &CMat, x: &CMat| linalg::kron(p.as_ref(), with_l(x).as_ref());
                let gens = vec![k2(&sz, &j), k2(&sz, &r_t), k2(&sz, &(&j * &r_t)), k2(&iy, &e)];
                return finish(spec, field, gens, 2, &eps_v, &grading_v, &basis_v, &h_tilde, &sites_v);
            }
        };
        (gens, 4)
    };
    finish(spec, field, family, k, &eps_v, &grading_v, &basis_v, &h_tilde, &sites_v)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: SymmetrySpec,
    field: Field,
    family: Vec<CMat>,
    k: usize,
    eps_v: &CMat,
    grading_v: &CMat,
    basis_v: &CMat,
    h_tilde: &CMat,
    sites_v: &[usize],
) -> Result<SymmetryClassData, ClassError> {
    let idk = linalg::eye(k);
    let sum = |m: &CMat| linalg::kron(idk.as_ref(), m.as_ref());
    let family_signs: Vec<i8> = family.iter().map(sign_of_square).collect();
    let family_class = class_of(field, &family_signs);
    let mut generators = family;
    generators.push(sum(eps_v));
    let signs: Vec<i8> = generators.iter().map(sign_of_square).collect();
    let class = class_of(field, &signs);
    Ok(SymmetryClassData {
        spec,
        field,
        generators,
        signs,
        grading: sum(grading_v),
        basis: sum(basis_v),
        hamiltonian: sum(h_tilde),
        class,
        family_class,
        copies: k,
        site_of_row: copies_of(sites_v, k),
    })
}

/// Dispatches on the spec.
pub fn symmetry_class(ht: &TruncatedOperator, fermi: &Fermi, ops: &SymmetryOperators) -> Result<SymmetryClassData, ClassError> {
    if ops.spec.is_even() {
        even_class(ht, fermi, ops)
    } else {
        odd_class(ht, fermi, ops)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ClassReport {
    pub relations: RepReport,
    pub class: String,
    pub expected: String,
    pub class_matches: bool,
}

impl ClassReport {
    pub fn is_valid(&self) -> bool {
        self.relations.is_valid() && self.class_matches
    }
}

/// All module relations: Clifford relations and grading, plus commutation
/// of every generator with the projection and the Hamiltonian and evenness
/// of the projection.
pub fn verify_class(data: &SymmetryClassData) -> ClassReport {
    verify_class_tol(data, DEFAULT_CLASS_TOL)
}

pub fn verify_class_tol(data: &SymmetryClassData, tol: f64) -> ClassReport {
    let mut report = check_graded_rep_tol(&data.rep(), tol).unwrap_or_else(|e| {
        let mut r = RepReport::default();
        r.record(Relation::Oddness, vec![], f64::INFINITY, tol);
        let _ = e;
        r
    });
    let p = data.projection();
    let pref = p.as_ref();
    for (k, g) in data.generators.iter().enumerate() {
        report.record(Relation::ProjectionCommutation, vec![k], linalg::comm_res(g.as_ref(), pref), tol);
        let hres = linalg::comm_res(g.as_ref(), data.hamiltonian.as_ref());
        report.record(Relation::HamiltonianCommutation, vec![k], hres, tol);
    }
    report.record(Relation::ProjectionEvenness, vec![], linalg::comm_res(data.grading.as_ref(), pref), tol);
    let expected = classify(&data.spec).ok();
    let class_matches = expected.map(|e| e.stable_eq(&data.class)).unwrap_or(false);
    ClassReport {
        relations: report,
        class: data.class.to_string(),
        expected: expected.map(|e| e.to_string()).unwrap_or_default(),
        class_matches,
    }
}
