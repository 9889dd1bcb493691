//! Index pairings on finite boxes.
//!
//! The position operator is compressed by the Fermi projection (or by the
//! projection of the doubled operator) and tensored with the exterior algebra
//! of R^d; the graded kernel of the result is reduced to a Clifford index.
//! A finite box always has index zero, the "missing" half of the kernel sits
//! at the boundary. Kernels are therefore split by localization: only the
//! part concentrated around the offset `x0` is counted.
//!
//! All pipeline routes compress the direction field `(X - x0)/|X - x0|`
//! rather than `X - x0`. Both define the same K-homology class; the
//! bounded one separates the kernel from the rest of the spectrum by orders
//! of magnitude more on a box, because edge states no longer carry large
//! singular values of their own.

use crate::class::{symmetry_class, ClassError, SymmetryClassData};
use crate::clifford::{abs_class, abs_index_group, exterior_rep, AbsError, CliffordClass, ExteriorRep, Field, GradedMatrixRep, GroupTag};
use crate::linalg::{self, c, CMat, I, ZERO};
use crate::model::{self, LatticeModel, ModelError, TruncatedOperator};
use crate::symmetry::{classify, Realization, SymmetryError, SymmetrySpec};
use serde::Serialize;
use std::f64::consts::PI;

pub const KERNEL_FLOOR: f64 = 1e-9;
pub const KERNEL_RATIO: f64 = 1e3;
pub const KERNEL_REL_CUT: f64 = 1e-3;
/// A value above the cut followed by a jump of this factor is treated as
/// an unresolved kernel.
pub const ISOLATION: f64 = 10.0;
/// Bulk gaps below this count as `mu` inside the spectrum.
pub const BULK_GAP_TOL: f64 = 1e-6;
/// Largest matrix the generic Clifford-module route will diagonalize.
pub const GENERIC_MAX: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelPolicy {
    pub floor: f64,
    pub ratio: f64,
    pub rel_cut: f64,
}

impl Default for KernelPolicy {
    fn default() -> Self {
        KernelPolicy { floor: KERNEL_FLOOR, ratio: KERNEL_RATIO, rel_cut: KERNEL_REL_CUT }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingOptions {
    /// Offset of the position operator; `(1/2, ..., 1/2)` when `None`.
    pub offset: Option<Vec<f64>>,
    pub policy: KernelPolicy,
    /// Kernel vectors count as bulk when their weight inside
    /// `|x - x0|_inf <= center * L` exceeds 1/2.
    pub center: f64,
    /// Central-box fraction for the Chern trace.
    pub chern_fraction: f64,
    pub check_chern: bool,
    pub generic_max: usize,
    /// Force the generic route even where a reduced one exists.
    pub force_generic: bool,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions {
            offset: None,
            policy: KernelPolicy::default(),
            center: 0.5,
            chern_fraction: 0.5,
            check_chern: true,
            generic_max: GENERIC_MAX,
            force_generic: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PairingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Abs(#[from] AbsError),
    #[error("offset {0:?} must have d non-integer coordinates")]
    Offset(Vec<f64>),
    #[error("indeterminate kernel: {0}; try a larger L")]
    Indeterminate(String),
    #[error("no numerical route for {class} in d={d}: {reason}")]
    Unsupported { class: String, d: usize, reason: String },
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
    #[error("Chern trace {chern:.4} disagrees with the index {index}")]
    ChernMismatch { chern: f64, index: i64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("L={l}: {source}")]
    AtL {
        l: usize,
        #[source]
        source: Box<PairingError>,
    },
}

impl PairingError {
    pub fn code(&self) -> &'static str {
        match self {
            PairingError::Model(e) => e.code(),
            PairingError::Class(ClassError::Model(e)) => e.code(),
            PairingError::Class(_) | PairingError::Symmetry(_) => "schema",
            PairingError::Abs(_) | PairingError::Inconsistent(_) | PairingError::Dimension(_) => "inconsistent",
            PairingError::Offset(_) => "schema",
            PairingError::Indeterminate(_) => "indeterminate",
            PairingError::Unsupported { .. } => "unsupported",
            PairingError::ChernMismatch { .. } => "chern_mismatch",
            PairingError::AtL { source, .. } => source.code(),
        }
    }

    pub fn at(self, l: usize) -> Self {
        match self {
            e @ PairingError::AtL { .. } => e,
            e => PairingError::AtL { l, source: Box::new(e) },
        }
    }
}

// ---------------------------------------------------------------------------
// positions and the Dirac operator

pub fn default_offset(d: usize) -> Vec<f64> {
    vec![0.5; d]
}

fn check_offset(x0: &[f64], d: usize) -> Result<(), PairingError> {
    if x0.len() != d || x0.iter().any(|v| !v.is_finite() || (v - v.round()).abs() < 1e-9) {
        return Err(PairingError::Offset(x0.to_vec()));
    }
    Ok(())
}

/// `x - x0` for every site.
fn shifted(sites: &[Vec<i64>], x0: &[f64]) -> Vec<Vec<f64>> {
    sites.iter().map(|s| s.iter().zip(x0).map(|(&v, o)| v as f64 - o).collect()).collect()
}

/// Unit vector `(x - x0)/|x - x0|` of every site.
pub fn directions(sites: &[Vec<i64>], x0: &[f64]) -> Vec<Vec<f64>> {
    shifted(sites, x0)
        .into_iter()
        .map(|v| {
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / n).collect()
        })
        .collect()
}

/// 1 on sites with `|x - x0|_inf <= frac * L`, else 0.
pub fn center_mask(sites: &[Vec<i64>], x0: &[f64], l: usize, frac: f64) -> Vec<f64> {
    let r = frac * l as f64;
    shifted(sites, x0)
        .iter()
        .map(|v| if v.iter().all(|a| a.abs() <= r + 1e-12) { 1.0 } else { 0.0 })
        .collect()
}

/// `sum_j (X_j - x0_j) (x) gamma^j` on `box (x) C^base (x) Lambda R^d`.
#[derive(Clone, Debug)]
pub struct DiracData {
    pub d: usize,
    pub offset: Vec<f64>,
    /// Diagonal of `X_j - x0_j` on the rows of the base space.
    pub positions: Vec<Vec<f64>>,
    /// Number of base rows (also meaningful when `d = 0`).
    pub rows: usize,
    pub exterior: ExteriorRep,
}

impl DiracData {
    pub fn base_dim(&self) -> usize {
        self.rows
    }

    pub fn operator(&self) -> CMat {
        let m = 1usize << self.d;
        let mut out = linalg::zeros(self.base_dim() * m, self.base_dim() * m);
        for j in 0..self.d {
            let x = linalg::diag_real(&self.positions[j]);
            out = &out + &linalg::kron(x.as_ref(), self.exterior.gamma(j).as_ref());
        }
        out
    }

    /// Left `Cl(0,d)` generator `1 (x) rho^j`.
    pub fn rho(&self, j: usize) -> CMat {
        linalg::kron(linalg::eye(self.base_dim()).as_ref(), self.exterior.rho(j).as_ref())
    }

    pub fn grading(&self) -> CMat {
        linalg::kron(linalg::eye(self.base_dim()).as_ref(), self.exterior.grading.as_ref())
    }

    /// Same operator with every position replaced by its direction.
    pub fn directions(&self) -> DiracData {
        let n = self.base_dim();
        let mut pos = self.positions.clone();
        for i in 0..n {
            let r = (0..self.d).map(|j| self.positions[j][i].powi(2)).sum::<f64>().sqrt();
            for p in pos.iter_mut() {
                p[i] /= r;
            }
        }
        DiracData { positions: pos, ..self.clone() }
    }
}

pub fn dirac(d: usize, l: usize, base: usize, x0: &[f64]) -> Result<DiracData, PairingError> {
    check_offset(x0, d)?;
    let sites = model::box_sites(d, l);
    dirac_on_rows(d, &sites, &(0..sites.len() * base).map(|r| r / base).collect::<Vec<_>>(), x0)
}

/// Dirac data on an arbitrary row layout, `site_of_row[r]` indexing `sites`.
pub fn dirac_on_rows(d: usize, sites: &[Vec<i64>], site_of_row: &[usize], x0: &[f64]) -> Result<DiracData, PairingError> {
    check_offset(x0, d)?;
    let sh = shifted(sites, x0);
    let positions = (0..d).map(|j| site_of_row.iter().map(|&s| sh[s][j]).collect()).collect();
    Ok(DiracData { d, offset: x0.to_vec(), positions, rows: site_of_row.len(), exterior: exterior_rep(d) })
}

fn scale_rows(w: &[f64], m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * w[i])
}

fn scale_rows_c(w: &[faer::c64], m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * w[i])
}

/// `P D P` on `range(P) (x) Lambda`, with `P = B B^*` and the grading of the
/// base entering through the graded tensor product:
/// `T = sum_j B^* X_j Gamma B (x) gamma^j`.
pub fn compress(basis: &CMat, grading: Option<&CMat>, dirac: &DiracData) -> Result<CMat, PairingError> {
    if basis.nrows() != dirac.base_dim() {
        return Err(PairingError::Dimension(format!("basis has {} rows, Dirac base {}", basis.nrows(), dirac.base_dim())));
    }
    let gb = match grading {
        Some(g) => g * basis,
        None => basis.clone(),
    };
    let r = basis.ncols();
    let m = 1usize << dirac.d;
    let mut t = linalg::zeros(r * m, r * m);
    for j in 0..dirac.d {
        let a = basis.adjoint() * scale_rows(&dirac.positions[j], &gb);
        t = &t + &linalg::kron(a.as_ref(), dirac.exterior.gamma(j).as_ref());
    }
    Ok(linalg::herm_part(t.as_ref()))
}

/// `F = T (1 + T^2)^{-1/2}`.
pub fn bounded_transform(t: &CMat) -> CMat {
    let e = linalg::eigh(linalg::herm_part(t.as_ref()).as_ref());
    let f: Vec<f64> = e.values.iter().map(|x| x / (1.0 + x * x).sqrt()).collect();
    let v = &e.vectors;
    linalg::herm_part((&(v * linalg::diag_real(&f)) * v.adjoint()).as_ref())
}

// ---------------------------------------------------------------------------
// kernels

#[derive(Clone, Debug, Default, Serialize)]
pub struct KernelInfo {
    /// Near-kernel dimension over the whole box.
    pub dim: usize,
    /// Ratio between the first excluded and the last included singular value.
    pub ratio_gap: f64,
    /// Largest singular value counted as kernel.
    pub smallest: f64,
    /// Smallest singular value not counted.
    pub next: f64,
    pub cut: f64,
}

/// Number of kernel directions among ascending singular values.
pub fn kernel_count(sv: &[f64], policy: &KernelPolicy) -> Result<KernelInfo, String> {
    let n = sv.len();
    if n == 0 {
        return Ok(KernelInfo { ratio_gap: f64::INFINITY, ..Default::default() });
    }
    let smax = sv[n - 1];
    let cut = policy.rel_cut * smax;
    let below = sv.iter().filter(|&&s| s <= cut || s <= policy.floor).count();
    let floor = sv.iter().filter(|&&s| s <= policy.floor).count();
    if below == 0 {
        // an isolated value just above the cut is an unresolved kernel, not a trivial one
        let suspect = (1..n.min(9)).find(|&k| sv[k - 1] <= policy.rel_cut.sqrt() * smax && sv[k] >= ISOLATION * sv[k - 1]);
        if let Some(k) = suspect {
            return Err(format!("{k} isolated singular value(s) up to {:.3e} above the cut {cut:.3e}", sv[k - 1]));
        }
        return Ok(KernelInfo { dim: 0, ratio_gap: f64::INFINITY, smallest: 0.0, next: sv[0], cut });
    }
    if floor == n {
        // the zero operator (d = 0): everything is kernel
        return Ok(KernelInfo { dim: n, ratio_gap: f64::INFINITY, smallest: smax, next: 0.0, cut });
    }
    if below == n {
        return Err(format!("all {n} singular values below the cut {cut:.3e}"));
    }
    let ratio = |k: usize| if sv[k - 1] > 0.0 { sv[k] / sv[k - 1] } else { f64::INFINITY };
    // the outermost clean gap below the cut wins: exact zeros and
    // exponentially small values are both kernel
    if let Some(k) = (floor.max(1)..=below).rev().find(|&k| ratio(k) >= policy.ratio) {
        return Ok(KernelInfo { dim: k, ratio_gap: ratio(k), smallest: sv[k - 1], next: sv[k], cut });
    }
    if floor > 0 {
        // zeros below the floor are kernel regardless of the next gap
        return Ok(KernelInfo { dim: floor, ratio_gap: ratio(floor), smallest: sv[floor - 1], next: sv[floor], cut });
    }
    let mut best = 1;
    for k in 1..=below {
        if ratio(k) > ratio(best) {
            best = k;
        }
    }
    let info = KernelInfo { dim: best, ratio_gap: ratio(best), smallest: sv[best - 1], next: sv[best], cut };
    if info.ratio_gap < policy.ratio {
        return Err(format!(
            "no ratio gap above {:.0e} below {cut:.3e} (best {:.1} between {:.3e} and {:.3e})",
            policy.ratio, info.ratio_gap, info.smallest, info.next
        ));
    }
    Ok(info)
}

/// Near-kernel of a Hermitian operator: orthonormal vectors and diagnostics.
pub struct Kernel {
    pub vectors: CMat,
    pub info: KernelInfo,
}

pub fn kernel(f: &CMat, policy: &KernelPolicy) -> Result<Kernel, PairingError> {
    let e = linalg::eigh(linalg::herm_part(f.as_ref()).as_ref());
    let mut order: Vec<usize> = (0..e.values.len()).collect();
    order.sort_by(|&a, &b| e.values[a].abs().total_cmp(&e.values[b].abs()));
    let sv: Vec<f64> = order.iter().map(|&k| e.values[k].abs()).collect();
    let info = kernel_count(&sv, policy).map_err(PairingError::Indeterminate)?;
    let vectors = linalg::cols(e.vectors.as_ref(), &order[..info.dim]);
    Ok(Kernel { vectors, info })
}

/// Right and left near-kernels of a square matrix.
pub struct SingularKernel {
    pub right: CMat,
    pub left: CMat,
    pub info: KernelInfo,
}

pub fn singular_kernel(m: &CMat, policy: &KernelPolicy) -> Result<SingularKernel, PairingError> {
    if m.nrows() != m.ncols() {
        return Err(PairingError::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let gr = linalg::herm_part((m.adjoint() * m).as_ref());
    let er = linalg::eigh(gr.as_ref());
    let sv: Vec<f64> = er.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let info = kernel_count(&sv, policy).map_err(PairingError::Indeterminate)?;
    let k = info.dim;
    let idx: Vec<usize> = (0..k).collect();
    let right = linalg::cols(er.vectors.as_ref(), &idx);
    let left = if sv[..k].iter().all(|&s| s > 1e-7) {
        // u = M v / s
        let mv = m * &right;
        CMat::from_fn(mv.nrows(), k, |i, j| mv[(i, j)] / sv[j])
    } else {
        let gl = linalg::herm_part((m * m.adjoint()).as_ref());
        let el = linalg::eigh(gl.as_ref());
        linalg::cols(el.vectors.as_ref(), &idx)
    };
    Ok(SingularKernel { right, left, info })
}

/// Splits a kernel by where it lives: returns the coefficients (columns,
/// in kernel coordinates) of the part with weight above 1/2 inside the
/// mask. `ambient` maps kernel coordinates to rows carrying `weights`.
pub fn localize(ambient: &CMat, weights: &[f64]) -> Result<CMat, PairingError> {
    let k = ambient.ncols();
    if k == 0 {
        return Ok(linalg::zeros(0, 0));
    }
    let cw = ambient.adjoint() * scale_rows(weights, ambient);
    let e = linalg::eigh(linalg::herm_part(cw.as_ref()).as_ref());
    if let Some(w) = e.values.iter().find(|&&w| w > 0.25 && w < 0.75) {
        return Err(PairingError::Indeterminate(format!("kernel vector with central weight {w:.3} is neither bulk nor boundary")));
    }
    let idx: Vec<usize> = (0..k).filter(|&i| e.values[i] >= 0.75).collect();
    Ok(linalg::cols(e.vectors.as_ref(), &idx))
}

/// Rows of `range (x) C^m` (row `i * m + a`) mapped to the ambient rows.
fn ambient_of(basis: &CMat, vecs: &CMat, m: usize) -> (CMat, Vec<usize>) {
    // returns stacked ambient vectors for each of the m components
    let r = basis.ncols();
    let n = basis.nrows();
    let k = vecs.ncols();
    let mut out = linalg::zeros(n * m, k);
    for a in 0..m {
        let comp = CMat::from_fn(r, k, |i, j| vecs[(i * m + a, j)]);
        let amb = basis * comp;
        for j in 0..k {
            for i in 0..n {
                out[(a * n + i, j)] = amb[(i, j)];
            }
        }
    }
    (out, (0..n * m).map(|i| i % n).collect())
}

// ---------------------------------------------------------------------------
// Clifford index

/// ABS class of a localized graded kernel, checked against the expected
/// group `KO_{n-d}` (or `K_{n-d}`).
pub fn clifford_index(kernel_rep: &GradedMatrixRep, class: CliffordClass, d: usize) -> Result<(GroupTag, i64), PairingError> {
    let group = abs_index_group(class.field, class.stable_class(), d);
    let abs = abs_class(kernel_rep)?;
    let got = abs.group;
    if got != group {
        return Err(PairingError::Inconsistent(format!("kernel module lands in {got}, expected {group}")));
    }
    if !group.contains(abs.value) {
        return Err(PairingError::Inconsistent(format!("value {} outside {group}", abs.value)));
    }
    Ok((group, abs.value))
}

/// `(G (x) M) w` for `w` on `C^r (x) C^m`, without forming the Kronecker product.
fn apply_kron(g: &CMat, mm: &CMat, w: &CMat) -> CMat {
    let r = g.nrows();
    let m = mm.nrows();
    let k = w.ncols();
    let mut out = linalg::zeros(r * m, k);
    for col in 0..k {
        let wm = CMat::from_fn(r, m, |i, a| w[(i * m + a, col)]);
        let y = &(g * &wm) * mm.transpose();
        for i in 0..r {
            for a in 0..m {
                out[(i * m + a, col)] = y[(i, a)];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Chern trace

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChernTrace {
    pub value: f64,
    pub imag: f64,
}

/// `2 pi i T(P [d1 P, d2 P])` with `d_j a = -i [X_j, a]`, the trace per
/// lattice site taken over the central box of side `frac (2L + 1)`.
pub fn chern_trace(p: &CMat, ht: &TruncatedOperator, frac: f64) -> Result<ChernTrace, PairingError> {
    if ht.d != 2 {
        return Err(PairingError::Dimension(format!("the Chern trace needs d = 2, got {}", ht.d)));
    }
    let x = ht.coordinate(0);
    let y = ht.coordinate(1);
    let n = p.nrows();
    let comm = |pos: &[f64]| CMat::from_fn(n, n, |i, j| p[(i, j)] * (pos[i] - pos[j]));
    let a = comm(&x);
    let b = comm(&y);
    let e = &(&a * &b) - &(&b * &a);
    // [d1 P, d2 P] = -[X1 P] [X2 P] commutator
    let half = frac * (2 * ht.l + 1) as f64 / 2.0;
    let rows: Vec<usize> = (0..n).filter(|&i| x[i].abs() <= half && y[i].abs() <= half).collect();
    let mut acc = ZERO;
    for &i in &rows {
        for k in 0..n {
            acc += p[(i, k)] * e[(k, i)];
        }
    }
    let sites = rows.len() as f64 / ht.n_int as f64;
    let v = c(0.0, -2.0 * PI) * acc * (1.0 / sites);
    Ok(ChernTrace { value: v.re, imag: v.im })
}

// ---------------------------------------------------------------------------
// reduced routes

/// `dim ker - dim coker` of the bulk part of a square operator.
#[derive(Clone, Debug, Serialize)]
pub struct IndexCount {
    pub plus: usize,
    pub minus: usize,
    pub kernel: KernelInfo,
}

impl IndexCount {
    pub fn index(&self) -> i64 {
        self.plus as i64 - self.minus as i64
    }
}

fn bulk_index(m: &CMat, right_amb: impl Fn(&CMat) -> CMat, left_amb: impl Fn(&CMat) -> CMat, wr: &[f64], wl: &[f64], policy: &KernelPolicy) -> Result<IndexCount, PairingError> {
    let sk = singular_kernel(m, policy)?;
    let plus = localize(&right_amb(&sk.right), wr)?.ncols();
    let minus = localize(&left_amb(&sk.left), wl)?.ncols();
    Ok(IndexCount { plus, minus, kernel: sk.info })
}

fn row_weights(ht: &TruncatedOperator, mask: &[f64]) -> Vec<f64> {
    (0..ht.dim()).map(|r| mask[r / ht.n_int]).collect()
}

/// Bulk index of `P U P` on `range(P)` with `U` the phase of
/// `(X1 - x0_1) + i (X2 - x0_2)`.
pub fn phase_index(basis: &CMat, ht: &TruncatedOperator, x0: &[f64], opts: &PairingOptions) -> Result<IndexCount, PairingError> {
    let dirs = directions(&ht.sites, x0);
    let u: Vec<faer::c64> = (0..ht.dim()).map(|r| {
        let v = &dirs[r / ht.n_int];
        c(v[0], v[1])
    }).collect();
    let m = basis.adjoint() * scale_rows_c(&u, basis);
    let w = row_weights(ht, &center_mask(&ht.sites, x0, ht.l, opts.center));
    let amb = |v: &CMat| basis * v;
    bulk_index(&m, amb, amb, &w, &w, &opts.policy)
}

/// Bulk kernel of `sum_j A_j (x) sigma_j` with `A_j` the compressed
/// direction components and `sigma_j` the spinor Clifford generators in
/// dimension `d` (Pauli matrices for d = 2, 3). Returns the localized
/// kernel vectors.
fn spin_kernel(basis: &CMat, ht: &TruncatedOperator, x0: &[f64], opts: &PairingOptions) -> Result<(CMat, KernelInfo), PairingError> {
    let d = ht.d;
    let sig = spinor_gammas(if d % 2 == 0 { d + 1 } else { d });
    let m = sig[0].nrows();
    let dirs = directions(&ht.sites, x0);
    let r = basis.ncols();
    let mut t = linalg::zeros(r * m, r * m);
    for j in 0..d {
        let w: Vec<f64> = (0..ht.dim()).map(|row| dirs[row / ht.n_int][j]).collect();
        let a = basis.adjoint() * scale_rows(&w, basis);
        t = &t + &linalg::kron(a.as_ref(), sig[j].as_ref());
    }
    let k = kernel(&t, &opts.policy)?;
    let (amb, rows) = ambient_of(basis, &k.vectors, m);
    let rw = row_weights(ht, &center_mask(&ht.sites, x0, ht.l, opts.center));
    let w: Vec<f64> = rows.iter().map(|&i| rw[i]).collect();
    let q = localize(&amb, &w)?;
    Ok((&k.vectors * &q, k.info))
}

/// Hermitian generators of the irreducible complex `Cl_d` module for odd
/// `d`, dimension `2^((d-1)/2)`.
pub fn spinor_gammas(d: usize) -> Vec<CMat> {
    assert!(d % 2 == 1, "odd dimension expected");
    if d == 1 {
        return vec![linalg::eye(1)];
    }
    let sx = linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let sy = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c(0.0, -1.0),
        (1, 0) => c(0.0, 1.0),
        _ => ZERO,
    });
    let sz = linalg::diag_real(&[1.0, -1.0]);
    let prev = spinor_gammas(d - 2);
    let id = linalg::eye(prev[0].nrows());
    let mut out: Vec<CMat> = prev.iter().map(|g| linalg::kron(sx.as_ref(), g.as_ref())).collect();
    out.push(linalg::kron(sy.as_ref(), id.as_ref()));
    out.push(linalg::kron(sz.as_ref(), id.as_ref()));
    out
}

/// `Index(Pi u Pi)` for a chiral Hamiltonian in odd `d`: `u` the unitary
/// phase of the off-diagonal block in the eigenbasis of the chiral operator
/// and `Pi = (1 + X.sigma / |X|)/2` the Hardy-type projection.
pub fn odd_complex_index(ht: &TruncatedOperator, chiral: &CMat, x0: &[f64], opts: &PairingOptions) -> Result<IndexCount, PairingError> {
    let d = ht.d;
    if d % 2 == 0 {
        return Err(PairingError::Dimension(format!("odd dimension expected, got {d}")));
    }
    let n = ht.n_int;
    // S may square to -1; i S is then the Hermitian involution
    let herm = linalg::max_abs((chiral - chiral.adjoint()).as_ref()) < 1e-10;
    let s_h = if herm { chiral.clone() } else { linalg::scale(chiral.as_ref(), I) };
    let es = linalg::eigh(linalg::herm_part(s_h.as_ref()).as_ref());
    let plus: Vec<usize> = (0..n).filter(|&k| es.values[k] > 0.0).collect();
    let minus: Vec<usize> = (0..n).filter(|&k| es.values[k] < 0.0).collect();
    if plus.len() != minus.len() {
        return Err(PairingError::Inconsistent(format!("chiral operator has unequal eigenspaces {} and {}", plus.len(), minus.len())));
    }
    let h = plus.len();
    let wp = linalg::cols(es.vectors.as_ref(), &plus);
    let wm = linalg::cols(es.vectors.as_ref(), &minus);
    let ns = ht.sites.len();
    // site-local basis change: block (s, t) of H becomes W_a^* H_st W_b
    let block = |wa: &CMat, wb: &CMat| -> CMat {
        let mut out = linalg::zeros(ns * h, ns * h);
        for t in 0..ns {
            let col = ht.matrix.as_ref().subcols(t * n, n);
            let cw = col * wb;
            for s in 0..ns {
                let blk = wa.adjoint() * cw.as_ref().subrows(s * n, n);
                for j in 0..h {
                    for i in 0..h {
                        out[(s * h + i, t * h + j)] = blk[(i, j)];
                    }
                }
            }
        }
        out
    };
    let diag_res = linalg::max_abs(block(&wp, &wp).as_ref()).max(linalg::max_abs(block(&wm, &wm).as_ref()));
    if diag_res > 1e-8 {
        return Err(PairingError::Inconsistent(format!("Hamiltonian is not off-diagonal in the chiral basis (residual {diag_res:.2e}); mu must be 0")));
    }
    let b = block(&wp, &wm);
    // unitary phase of b; near-null directions belong to end modes of the box
    let u = linalg::polar(b.as_ref());
    // Hardy projection: per site, eigenvectors of X.sigma with eigenvalue +1
    let sig = spinor_gammas(d);
    let dirs = directions(&ht.sites, x0);
    let mut pairs: Vec<(usize, Vec<faer::c64>)> = Vec::new();
    for (s, v) in dirs.iter().enumerate() {
        let mut xs = linalg::zeros(sig[0].nrows(), sig[0].nrows());
        for j in 0..d {
            xs = &xs + &linalg::scale(sig[j].as_ref(), c(v[j], 0.0));
        }
        let ev = linalg::eigh(xs.as_ref());
        for k in 0..ev.values.len() {
            if ev.values[k] > 0.0 {
                pairs.push((s, (0..ev.vectors.nrows()).map(|i| ev.vectors[(i, k)]).collect()));
            }
        }
    }
    let np = pairs.len();
    let mut m = linalg::zeros(np * h, np * h);
    for (p, (sp, ep)) in pairs.iter().enumerate() {
        for (q, (sq, eq)) in pairs.iter().enumerate() {
            let ov: faer::c64 = ep.iter().zip(eq).map(|(a, b)| a.conj() * b).sum();
            if ov.norm() == 0.0 {
                continue;
            }
            for a in 0..h {
                for bb in 0..h {
                    m[(p * h + a, q * h + bb)] = ov * u[(sp * h + a, sq * h + bb)];
                }
            }
        }
    }
    let mask = center_mask(&ht.sites, x0, ht.l, opts.center);
    let w: Vec<f64> = (0..np * h).map(|i| mask[pairs[i / h].0]).collect();
    let id_amb = |v: &CMat| v.clone();
    bulk_index(&m, id_amb, id_amb, &w, &w, &opts.policy)
}

// ---------------------------------------------------------------------------
// the generic route

/// Graded Clifford module on the bulk kernel of the compressed Dirac
/// operator built on the symmetry-class data.
pub fn generic_kernel_rep(data: &SymmetryClassData, ht: &TruncatedOperator, x0: &[f64], opts: &PairingOptions) -> Result<(GradedMatrixRep, KernelInfo), PairingError> {
    let d = ht.d;
    let dir = dirac_on_rows(d, &ht.sites, &data.site_of_row, x0)?.directions();
    let b = &data.basis;
    let t = compress(b, Some(&data.grading), &dir)?;
    let m = 1usize << d;
    let k = kernel(&t, &opts.policy)?;
    let (amb, rows) = ambient_of(b, &k.vectors, m);
    let mask = center_mask(&ht.sites, x0, ht.l, opts.center);
    let w: Vec<f64> = rows.iter().map(|&i| mask[data.site_of_row[i]]).collect();
    let q = localize(&amb, &w)?;
    let kl = &k.vectors * &q;
    let ext = &dir.exterior;
    let gr = b.adjoint() * &data.grading * b;
    let id_m = linalg::eye(m);
    let restrict = |g: &CMat, mm: &CMat| -> CMat { kl.adjoint() * apply_kron(g, mm, &kl) };
    let mut generators = Vec::new();
    let mut signs = Vec::new();
    for (g, s) in data.generators.iter().zip(&data.signs) {
        let gr_g = b.adjoint() * g * b;
        generators.push(restrict(&gr_g, &id_m));
        signs.push(*s);
    }
    for j in 0..d {
        generators.push(restrict(&gr, ext.rho(j)));
        signs.push(-1);
    }
    let grading = restrict(&gr, &ext.grading);
    Ok((GradedMatrixRep { field: data.field, generators, signs, grading }, k.info))
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// The group is 0; nothing to compute.
    ZeroGroup,
    /// Kernel of the compressed Dirac operator as a Clifford module.
    Generic,
    /// `Index(P U P)`, U the phase of `X1 + i X2` (d = 2).
    PhaseIndex,
    /// Quaternionic kernel dimension mod 2 (d = 2, T^2 = -1, no C).
    Quaternionic,
    /// Rank of the Fermi projection (d = 0 without odd symmetries).
    Rank,
    /// `dim_C ker(sgn H + sgn H_ref) / 2 mod 2` against a reference Hamiltonian (d = 0, C = +1).
    Relative,
    /// Bulk kernel of the flattened Hamiltonian compressed to a half line (d = 1, C = +1).
    HalfSpace,
    /// Complex kernel dimension mod 2 of `sum A_j sigma_j` (d = 3, T^2 = -1, no C).
    SpinKernel,
    /// `Index(Pi u Pi)` for chiral classes in odd d.
    Chiral,
}

/// Reduced route for a (class, d) cell, falling back to the generic one.
pub fn route_for(spec: &SymmetrySpec, d: usize) -> Result<Route, PairingError> {
    let class = classify(spec)?;
    let n = class.stable_class();
    let group = abs_index_group(class.field, n, d);
    if group == GroupTag::Zero {
        return Ok(Route::ZeroGroup);
    }
    let k = (n as i64 - d as i64).rem_euclid(8);
    let chiral = spec.s || (spec.t.is_some() && spec.c.is_some());
    Ok(match (class.field, d) {
        (_, 0) if spec.c.is_none() && !spec.s => Route::Rank,
        (Field::Real, 0) if spec.c == Some(1) => Route::Relative,
        (Field::Real, 1) if spec.c == Some(1) && !matches!(group, GroupTag::Z | GroupTag::TwoZ) => Route::HalfSpace,
        (Field::Complex, 2) => Route::PhaseIndex,
        (Field::Complex, d) if d % 2 == 1 => Route::Chiral,
        (Field::Real, 2) if k == 2 && spec.c.is_none() => Route::Quaternionic,
        (Field::Real, 2) => Route::PhaseIndex,
        (Field::Real, 3) if spec.t == Some(-1) && spec.c.is_none() => Route::SpinKernel,
        (Field::Real, d) if d % 2 == 1 && chiral && matches!(group, GroupTag::Z | GroupTag::TwoZ) => Route::Chiral,
        _ => {
            return Err(PairingError::Unsupported {
                class: class.to_string(),
                d,
                reason: "no index formula for this cell; the kernel-module route is available with force_generic for groups without C or S".into(),
            })
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub l: usize,
    pub dim: usize,
    pub value: Option<i64>,
    /// `"ok"` or `"indeterminate"`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelInfo>,
    /// Graded bulk kernel dimensions `(plus, minus)` in the route's own
    /// units (complex, or real for the generic real route).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_dims: Option<(usize, usize)>,
    /// Second formula for the same value, where the route has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern: Option<ChernTrace>,
}

impl LevelResult {
    fn new(l: usize, dim: usize) -> Self {
        LevelResult { l, dim, value: None, status: "ok".into(), detail: None, kernel: None, kernel_dims: None, cross_check: None, chern: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantResult {
    pub model: String,
    pub symmetry: String,
    pub cartan: String,
    pub class: String,
    pub d: usize,
    #[serde(serialize_with = "group_symbol")]
    pub group: GroupTag,
    pub value: Option<i64>,
    pub stable: bool,
    pub route: Route,
    pub schedule: Vec<usize>,
    pub offset: Vec<f64>,
    pub mu: f64,
    pub bulk_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disorder: Option<model::Disorder>,
    pub levels: Vec<LevelResult>,
    pub warnings: Vec<String>,
}

fn group_symbol<S: serde::Serializer>(g: &GroupTag, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(g.symbol())
}

impl InvariantResult {
    /// Values per L, `None` where indeterminate.
    pub fn values(&self) -> Vec<Option<i64>> {
        self.levels.iter().map(|l| l.value).collect()
    }
}

pub fn default_schedule(d: usize) -> Vec<usize> {
    match d {
        0 => vec![0, 1, 2],
        3 => vec![3, 4, 5],
        1 => vec![12, 16, 20, 24],
        _ => vec![6, 8, 10, 12],
    }
}

/// Boxes for flux models, whose magnetic length grows with the denominator.
pub const FLUX_SCHEDULE: [usize; 3] = [14, 16, 18];

/// Largest working dimension the d = 3 schedule aims for.
pub const WORK_BUDGET: usize = 3000;

/// Default schedule for a model. In d = 3 the boxes grow as `(2L+1)^3`, so
/// the schedule is the three largest consecutive `L` whose working matrix
/// (the one the route diagonalizes) stays within [`WORK_BUDGET`].
pub fn model_schedule(model: &LatticeModel) -> Vec<usize> {
    if model.flux.is_some_and(|f| f.p != 0 && f.q.abs() >= 3) {
        return FLUX_SCHEDULE.to_vec();
    }
    if model.d != 3 {
        return default_schedule(model.d);
    }
    let halve = matches!(route_for(&model.spec, 3), Ok(Route::Chiral));
    let work = |l: usize| {
        let n = (2 * l + 1).pow(3) * model.n_int;
        if halve { n / 2 } else { n }
    };
    let mut top = 4;
    while work(top + 1) <= WORK_BUDGET {
        top += 1;
    }
    while top > 3 && work(top) > WORK_BUDGET {
        top -= 1;
    }
    vec![top - 2, top - 1, top]
}

/// Stability: the last three values exist and agree.
pub fn is_stable(values: &[Option<i64>]) -> bool {
    values.len() >= 3 && {
        let tail = &values[values.len() - 3..];
        tail.iter().all(|v| v.is_some() && *v == tail[0])
    }
}

fn mod2(v: usize) -> i64 {
    (v % 2) as i64
}

/// Invariant of one truncation. `mu` is passed separately so that flattened
/// operators (Fermi level 0) can be fed through the same path.
pub fn invariant_at(model: &LatticeModel, ht: &TruncatedOperator, mu: f64, opts: &PairingOptions) -> Result<LevelResult, PairingError> {
    let d = ht.d;
    let spec = model.spec;
    let class = classify(&spec)?;
    let x0 = opts.offset.clone().unwrap_or_else(|| default_offset(d));
    check_offset(&x0, d)?;
    let route = effective_route(&spec, d, opts)?;
    let mut out = LevelResult::new(ht.l, ht.dim());
    let group = abs_index_group(class.field, class.stable_class(), d);
    let res: Result<(), PairingError> = (|| {
        match route {
            Route::ZeroGroup => {
                out.value = Some(0);
            }
            Route::PhaseIndex => {
                let f = model::fermi_open(ht, mu);
                let ic = phase_index(&f.basis, ht, &x0, opts)?;
                out.kernel = Some(ic.kernel.clone());
                out.kernel_dims = Some((ic.plus, ic.minus));
                let v = match group {
                    GroupTag::Z2 => {
                        if ic.plus != ic.minus {
                            return Err(PairingError::Inconsistent(format!("kernel {} and cokernel {} differ in a Z2 cell", ic.plus, ic.minus)));
                        }
                        mod2(ic.plus)
                    }
                    _ => ic.index(),
                };
                if class.field == Field::Complex && opts.check_chern {
                    let ch = chern_trace(&f.projection(), ht, opts.chern_fraction)?;
                    out.chern = Some(ch);
                }
                out.value = Some(v);
            }
            Route::Quaternionic => {
                let f = model::fermi_open(ht, mu);
                let (kv, info) = spin_kernel(&f.basis, ht, &x0, opts)?;
                let kc = kv.ncols();
                let t = model.ops.t.as_ref().ok_or_else(|| PairingError::Inconsistent("no time reversal".into()))?;
                let res = quaternionic_residual(&f.basis, ht, &t.u, &kv);
                if res > 1e-6 {
                    return Err(PairingError::Inconsistent(format!("kernel is not invariant under the quaternionic structure (residual {res:.2e})")));
                }
                // dim_R = 2 dim_C, dim_H = dim_R / 4
                if (2 * kc) % 4 != 0 {
                    return Err(PairingError::Inconsistent(format!("real kernel dimension {} is not a multiple of 4", 2 * kc)));
                }
                let dim_h = 2 * kc / 4;
                let ic = phase_index(&f.basis, ht, &x0, opts)?;
                out.kernel = Some(info);
                out.kernel_dims = Some((ic.plus, ic.minus));
                out.cross_check = Some(mod2(ic.plus));
                out.value = Some(mod2(dim_h));
                if out.cross_check != out.value {
                    return Err(PairingError::Inconsistent(format!("dim_H ker = {dim_h} and dim_C ker(P(X1+iX2)P) = {} disagree mod 2", ic.plus)));
                }
            }
            Route::Rank => {
                let f = model::fermi_open(ht, mu);
                if f.gap < model::DEFAULT_GAP_TOL {
                    return Err(ModelError::MuInSpectrum { mu, gap: f.gap }.into());
                }
                let v = f.rank as i64;
                if !group.contains(v) {
                    return Err(PairingError::Inconsistent(format!("rank {v} outside {group}")));
                }
                out.kernel_dims = Some((f.rank, 0));
                out.value = Some(v);
            }
            Route::Relative => {
                let f = model::fermi_open(ht, mu);
                if f.gap < model::DEFAULT_GAP_TOL {
                    return Err(ModelError::MuInSpectrum { mu, gap: f.gap }.into());
                }
                let fr = reference_flat(model, ht)?;
                let sum = &flat_of(&f) + &fr;
                let k = kernel(&sum, &opts.policy)?;
                let kc = k.info.dim;
                if kc % 2 != 0 {
                    return Err(PairingError::Inconsistent(format!("relative kernel dimension {kc} is odd")));
                }
                out.kernel = Some(k.info);
                out.kernel_dims = Some((kc, 0));
                out.value = Some(mod2(kc / 2));
            }
            Route::HalfSpace => {
                let f = model::fermi_open(ht, mu);
                let (kc, info) = half_space_kernel(&f, ht, &x0, opts)?;
                out.kernel = Some(info);
                out.kernel_dims = Some((kc, 0));
                let v = if spec.t == Some(-1) {
                    if kc % 2 != 0 {
                        return Err(PairingError::Inconsistent(format!("Kramers-degenerate kernel has odd dimension {kc}")));
                    }
                    mod2(kc / 2)
                } else {
                    mod2(kc)
                };
                out.value = Some(v);
            }
            Route::SpinKernel => {
                let f = model::fermi_open(ht, mu);
                let (kv, info) = spin_kernel(&f.basis, ht, &x0, opts)?;
                out.kernel = Some(info);
                out.kernel_dims = Some((kv.ncols(), 0));
                out.value = Some(mod2(kv.ncols()));
            }
            Route::Chiral => {
                if mu != 0.0 {
                    return Err(PairingError::Unsupported { class: class.to_string(), d, reason: "chiral routes need mu = 0".into() });
                }
                let s = chiral_operator(model)?;
                let ic = odd_complex_index(ht, &s, &x0, opts)?;
                out.kernel = Some(ic.kernel.clone());
                out.kernel_dims = Some((ic.plus, ic.minus));
                let v = ic.index();
                if !group.contains(v) {
                    return Err(PairingError::Inconsistent(format!("index {v} outside {group}")));
                }
                out.value = Some(v);
            }
            Route::Generic => {
                let f = model::fermi_open(ht, mu);
                let est = generic_size(&spec, ht.dim(), f.rank, d);
                if est > opts.generic_max {
                    return Err(PairingError::Unsupported {
                        class: class.to_string(),
                        d,
                        reason: format!("generic route needs a {est}-dimensional eigensolve (cap {})", opts.generic_max),
                    });
                }
                let data = symmetry_class(ht, &f, &model.ops)?;
                let (rep, info) = generic_kernel_rep(&data, ht, &x0, opts)?;
                let dim = rep.dim();
                let (_, v) = clifford_index(&rep, class, d)?;
                // the exterior-algebra orientation is opposite to that of X1 + i X2
                let v = if d % 4 == 2 { -v } else { v };
                let gplus = (dim as i64 + grading_trace(&rep.grading)) / 2;
                out.kernel = Some(info);
                out.kernel_dims = Some((gplus as usize, dim - gplus as usize));
                out.value = Some(v);
            }
        }
        Ok(())
    })();
    match res {
        Ok(()) => Ok(out),
        Err(PairingError::Indeterminate(msg)) => {
            out.status = "indeterminate".into();
            out.detail = Some(msg);
            out.value = None;
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// The route `invariant_at` takes, honouring `force_generic`.
pub fn effective_route(spec: &SymmetrySpec, d: usize, opts: &PairingOptions) -> Result<Route, PairingError> {
    let class = classify(spec)?;
    let group = abs_index_group(class.field, class.stable_class(), d);
    if group == GroupTag::Zero {
        return Ok(Route::ZeroGroup);
    }
    if opts.force_generic {
        if !spec.is_even() {
            return Err(PairingError::Unsupported {
                class: class.to_string(),
                d,
                reason: "the kernel-module route only resolves groups without C or S".into(),
            });
        }
        return Ok(Route::Generic);
    }
    route_for(spec, d)
}

fn flat_of(f: &model::Fermi) -> CMat {
    let p = f.projection();
    linalg::herm_part((&linalg::eye(p.nrows()) - &linalg::scale(p.as_ref(), c(2.0, 0.0))).as_ref())
}

/// Sign of a fixed symmetric reference Hamiltonian on every site: the
/// symmetrization of `diag(1, .., 1, -1, .., -1)`, or of a seeded random
/// matrix when that vanishes. For the built-in realization of `C = +1` this
/// is the particle-hole vacuum `tau_z`.
fn reference_flat(model: &LatticeModel, ht: &TruncatedOperator) -> Result<CMat, PairingError> {
    use rand::{Rng, SeedableRng};
    let n = model.n_int;
    let h = n / 2;
    let mut cand = linalg::diag_real(&(0..n).map(|k| if k < h { 1.0 } else { -1.0 }).collect::<Vec<_>>());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..8 {
        let sym = model.ops.symmetrize_block(&cand);
        let e = linalg::eigh(linalg::herm_part(sym.as_ref()).as_ref());
        if e.values.iter().all(|v| v.abs() > 1e-6) {
            let sg: Vec<f64> = e.values.iter().map(|v| v.signum()).collect();
            let f = &(&e.vectors * linalg::diag_real(&sg)) * e.vectors.adjoint();
            return Ok(linalg::kron(linalg::eye(ht.sites.len()).as_ref(), f.as_ref()));
        }
        cand = CMat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        cand = linalg::herm_part(cand.as_ref());
    }
    Err(PairingError::Inconsistent("no gapped symmetric reference Hamiltonian found".into()))
}

/// Bulk kernel of `Pi sgn(H) Pi` on the half line `x_1 > x0_1`; returns the
/// complex dimension of the part near `x0`.
fn half_space_kernel(f: &model::Fermi, ht: &TruncatedOperator, x0: &[f64], opts: &PairingOptions) -> Result<(usize, KernelInfo), PairingError> {
    let flat = flat_of(f);
    let sh = shifted(&ht.sites, x0);
    let rows: Vec<usize> = (0..ht.dim()).filter(|&r| sh[r / ht.n_int][0] > 0.0).collect();
    let m = linalg::submatrix(flat.as_ref(), &rows, &rows);
    let k = kernel(&m, &opts.policy)?;
    let mask = center_mask(&ht.sites, x0, ht.l, opts.center);
    let w: Vec<f64> = rows.iter().map(|&r| mask[r / ht.n_int]).collect();
    let q = localize(&k.vectors, &w)?;
    Ok((q.ncols(), k.info))
}

fn grading_trace(g: &CMat) -> i64 {
    linalg::trace(g.as_ref()).re.round() as i64
}

/// Rows of the compressed Dirac operator in the generic route.
fn generic_size(spec: &SymmetrySpec, dim: usize, rank: usize, d: usize) -> usize {
    let factor = match (spec.is_complex(), spec.is_even()) {
        (true, true) => 1,
        (true, false) => 4,
        (false, true) => if spec.t == Some(-1) { 4 } else { 2 },
        (false, false) => 16,
    };
    let _ = dim;
    factor * rank * (1usize << d)
}

/// The unitary chiral operator of the model (`U_C conj(U_T)` when both
/// antiunitaries are present).
fn chiral_operator(model: &LatticeModel) -> Result<CMat, PairingError> {
    model.ops.s.clone().ok_or_else(|| PairingError::Inconsistent("chiral route without a chiral operator".into()))
}

/// `|(1 - K K^*) Theta K|` with `Theta = (R_T (x) sigma_x) conj` on
/// `range(P) (x) C^2`.
fn quaternionic_residual(basis: &CMat, ht: &TruncatedOperator, ut: &CMat, kv: &CMat) -> f64 {
    if kv.ncols() == 0 {
        return 0.0;
    }
    let big = linalg::kron(linalg::eye(ht.sites.len()).as_ref(), ut.as_ref());
    let bt = basis.adjoint() * &big * linalg::conj(basis.as_ref());
    let sx = linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let tk = apply_kron(&bt, &sx, &linalg::conj(kv.as_ref()));
    let proj = kv * (kv.adjoint() * &tk);
    linalg::max_abs((&tk - &proj).as_ref())
}

/// Full pipeline over an L schedule.
pub fn invariant(model: &LatticeModel, schedule: &[usize], opts: &PairingOptions) -> Result<InvariantResult, PairingError> {
    let d = model.d;
    let spec = model.spec;
    if spec.realization == Realization::SpatialInvolution {
        return Err(PairingError::Unsupported {
            class: classify(&spec)?.to_string(),
            d,
            reason: "spatial-involution realizations are classified but not paired".into(),
        });
    }
    let class = classify(&spec)?;
    let group = abs_index_group(class.field, class.stable_class(), d);
    let route = effective_route(&spec, d, opts)?;
    let x0 = opts.offset.clone().unwrap_or_else(|| default_offset(d));
    check_offset(&x0, d)?;
    let bulk_gap = model::bulk_gap_at(model, model.mu, model::default_nk(d));
    if bulk_gap < BULK_GAP_TOL {
        return Err(ModelError::MuInSpectrum { mu: model.mu, gap: bulk_gap }.into());
    }
    let mut levels = Vec::new();
    for &l in schedule {
        let ht = model::truncate(model, l).map_err(|e| PairingError::from(e).at(l))?;
        let lv = invariant_at(model, &ht, model.mu, opts).map_err(|e| e.at(l))?;
        levels.push(lv);
    }
    let values: Vec<Option<i64>> = levels.iter().map(|l| l.value).collect();
    let stable = is_stable(&values);
    let value = values.last().copied().flatten();
    if let (Some(v), Some(ch)) = (value, levels.last().and_then(|l| l.chern)) {
        if (ch.value - v as f64).abs() >= 0.5 {
            return Err(PairingError::ChernMismatch { chern: ch.value, index: v });
        }
    }
    Ok(InvariantResult {
        model: model.name.clone(),
        symmetry: spec.to_string(),
        cartan: spec.cartan().to_string(),
        class: class.to_string(),
        d,
        group,
        value,
        stable,
        route,
        schedule: schedule.to_vec(),
        offset: x0,
        mu: model.mu,
        bulk_gap,
        disorder: model.disorder,
        levels,
        warnings: model.warnings.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, ModelFile, SymmetryFile, SymmetryMatrices, TermFile};

    fn m2(a: [[f64; 2]; 2]) -> Vec<Vec<[f64; 2]>> {
        a.iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect()
    }

    /// Chiral chain with `q(k) = sum_a w_a e^{i a k}` in the off-diagonal block.
    fn chiral_chain(ws: &[(i64, f64)]) -> LatticeModel {
        let mut terms: Vec<TermFile> = Vec::new();
        for &(a, w) in ws {
            let mut m = [[0.0; 2]; 2];
            if a == 0 {
                m = [[0.0, w], [w, 0.0]];
                terms.push(TermFile { offset: vec![0], matrix: m2(m) });
                continue;
            }
            m[0][1] = w;
            let t = [[0.0, 0.0], [w, 0.0]];
            terms.push(TermFile { offset: vec![a], matrix: m2(m) });
            terms.push(TermFile { offset: vec![-a], matrix: m2(t) });
        }
        let s = SymmetryMatrices { s: Some(m2([[1.0, 0.0], [0.0, -1.0]])), ..Default::default() };
        let sym = SymmetryFile { s: Some(true), realization: Realization::Explicit, matrices: Some(s), ..Default::default() };
        build(&ModelFile { dimension: 1, internal_rank: 2, terms, flux: None, mu: 0.0, symmetry: sym }).unwrap()
    }

    /// Winding number of `k -> H(k)_{01}` from accumulated phase increments.
    fn winding_oracle(m: &LatticeModel) -> i64 {
        let n = 2000;
        let mut total = 0.0;
        let q = |k: f64| model::bloch(m, &[k])[(0, 1)];
        let mut prev = q(-PI);
        for i in 1..=n {
            let z = q(-PI + 2.0 * PI * i as f64 / n as f64);
            total += (z * prev.conj()).arg();
            prev = z;
        }
        (total / (2.0 * PI)).round() as i64
    }

    fn kitaev(mu: f64) -> LatticeModel {
        let terms = vec![
            TermFile { offset: vec![0], matrix: m2([[-mu, 0.0], [0.0, mu]]) },
            TermFile { offset: vec![1], matrix: m2([[-1.0, 0.6], [-0.6, 1.0]]) },
        ];
        let sym = SymmetryFile { c: Some(1), ..Default::default() };
        build(&ModelFile { dimension: 1, internal_rank: 2, terms, flux: None, mu: 0.0, symmetry: sym }).unwrap()
    }

    #[test]
    fn dirac_positions_example() {
        let dd = dirac(1, 1, 1, &[0.5]).unwrap();
        assert_eq!(dd.positions[0], vec![-1.5, -0.5, 0.5]);
        let op = dd.operator();
        let sq = &op * &op;
        let want = linalg::diag_real(&[2.25, 2.25, 0.25, 0.25, 0.25, 0.25]);
        assert!(linalg::max_abs((&sq - &want).as_ref()) < 1e-14);
    }

    #[test]
    fn integer_offset_rejected() {
        assert!(matches!(dirac(2, 2, 1, &[0.5, 1.0]), Err(PairingError::Offset(_))));
    }

    #[test]
    fn bounded_transform_example() {
        let f = bounded_transform(&linalg::diag_real(&[0.0, 3.0, -4.0]));
        let want = linalg::diag_real(&[0.0, 3.0 / 10f64.sqrt(), -4.0 / 17f64.sqrt()]);
        assert!(linalg::max_abs((&f - &want).as_ref()) < 1e-14);
    }

    #[test]
    fn kernel_count_example() {
        let info = kernel_count(&[1e-12, 0.5, 0.7, 1.0], &KernelPolicy::default()).unwrap();
        assert_eq!(info.dim, 1);
        assert!((info.ratio_gap / 5e11 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_count_without_gap_is_indeterminate() {
        let sv = [2e-4, 5e-4, 8e-4, 2e-3, 1.0];
        assert!(kernel_count(&sv, &KernelPolicy::default()).is_err());
        let iso = [5e-3, 0.3, 0.5, 1.0];
        assert!(kernel_count(&iso, &KernelPolicy::default()).is_err());
    }

    #[test]
    fn chiral_chain_matches_winding_oracle() {
        let cases: [&[(i64, f64)]; 5] = [
            &[(0, 0.5), (1, 1.0)],
            &[(0, 1.5), (1, 1.0)],
            &[(0, 0.5), (-1, 1.0)],
            &[(0, 0.3), (1, 0.2), (2, 1.0)],
            &[(0, 0.2), (1, 1.0), (-1, 0.1)],
        ];
        for ws in cases {
            let m = chiral_chain(ws);
            let r = invariant(&m, &default_schedule(1), &PairingOptions::default()).unwrap();
            assert_eq!(r.route, Route::Chiral);
            assert!(r.stable, "{ws:?}: {:?}", r.values());
            assert_eq!(r.value, Some(winding_oracle(&m)), "{ws:?}");
        }
    }

    #[test]
    fn kitaev_chain_parity() {
        for (mu, want) in [(0.5, 1), (-1.2, 1), (3.0, 0), (-2.6, 0)] {
            let r = invariant(&kitaev(mu).with_mu(0.0), &default_schedule(1), &PairingOptions::default());
            let m = kitaev(mu);
            let r = r.unwrap_or_else(|e| panic!("mu={mu} {}: {e}", m.name));
            assert_eq!(r.route, Route::HalfSpace);
            assert!(r.stable);
            assert_eq!(r.value, Some(want), "mu={mu}");
        }
    }

    #[test]
    fn flattening_leaves_value_unchanged() {
        let m = chiral_chain(&[(0, 0.4), (1, 1.0)]);
        let ht = model::truncate(&m, 16).unwrap();
        let flat = model::flatten(&ht, 0.0).unwrap();
        let o = PairingOptions::default();
        let a = invariant_at(&m, &ht, 0.0, &o).unwrap();
        let b = invariant_at(&m, &flat, 0.0, &o).unwrap();
        assert_eq!(a.value, Some(winding_oracle(&m)));
        assert_eq!(a.value, b.value);
        let k = kitaev(0.7);
        let ht = model::truncate(&k, 16).unwrap();
        let flat = model::flatten(&ht, 0.0).unwrap();
        assert_eq!(invariant_at(&k, &ht, 0.0, &o).unwrap().value, invariant_at(&k, &flat, 0.0, &o).unwrap().value);
    }

    #[test]
    fn offset_does_not_matter() {
        let m = chiral_chain(&[(0, 0.4), (1, 1.0)]);
        for x0 in [0.5, 0.3, 0.8] {
            let o = PairingOptions { offset: Some(vec![x0]), ..Default::default() };
            assert_eq!(invariant(&m, &default_schedule(1), &o).unwrap().value, Some(winding_oracle(&m)));
        }
    }

    #[test]
    fn zero_cells_are_zero_and_stable() {
        for spec in [SymmetrySpec::t(1), SymmetrySpec::chiral(), SymmetrySpec::c(-1)] {
            let d = if spec == SymmetrySpec::c(-1) { 1 } else { 2 };
            let m = model::random_compatible(&spec, d, 4, 0.3, 11).unwrap();
            let r = invariant(&m, &default_schedule(d), &PairingOptions::default()).unwrap();
            assert_eq!(r.route, Route::ZeroGroup);
            assert_eq!((r.value, r.stable), (Some(0), true), "{spec}");
        }
    }

    #[test]
    fn zero_dimensional_particle_hole_is_relative() {
        let tz = |s: f64| {
            let sym = SymmetryFile { c: Some(1), ..Default::default() };
            let terms = vec![TermFile { offset: vec![], matrix: m2([[s, 0.0], [0.0, -s]]) }];
            build(&ModelFile { dimension: 0, internal_rank: 2, terms, flux: None, mu: 0.0, symmetry: sym }).unwrap()
        };
        let v = |s| invariant(&tz(s), &default_schedule(0), &PairingOptions::default()).unwrap().value;
        assert_eq!(v(1.0), Some(0));
        assert_eq!(v(-1.0), Some(1));
    }

    #[test]
    fn zero_dimensional_rank() {
        let sym = SymmetryFile::default();
        let terms = vec![TermFile { offset: vec![], matrix: m2([[-1.0, 0.2], [0.2, -0.5]]) }];
        let m = build(&ModelFile { dimension: 0, internal_rank: 2, terms, flux: None, mu: 0.0, symmetry: sym }).unwrap();
        let r = invariant(&m, &default_schedule(0), &PairingOptions::default()).unwrap();
        assert_eq!((r.route, r.value, r.stable), (Route::Rank, Some(2), true));
    }

    #[test]
    fn stability_needs_three_equal_values() {
        assert!(is_stable(&[None, Some(1), Some(1), Some(1)]));
        assert!(!is_stable(&[Some(1), Some(1), None]));
        assert!(!is_stable(&[Some(1), Some(1)]));
        assert!(!is_stable(&[Some(0), Some(1), Some(1)]));
    }

    #[test]
    fn schedules() {
        assert_eq!(model_schedule(&model::builtin("threed_ct", &Default::default()).unwrap()), vec![3, 4, 5]);
        assert_eq!(model_schedule(&model::builtin("threed_t_only", &Default::default()).unwrap()), vec![2, 3, 4]);
        assert_eq!(model_schedule(&model::builtin("hofstadter", &Default::default()).unwrap()), FLUX_SCHEDULE.to_vec());
    }
}
