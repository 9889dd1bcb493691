//! Dense linear-algebra helpers on top of faer.
//!
//! Everything is stored as `Mat<c64>`; real matrices simply carry zero
//! imaginary parts. Realification uses the interleaved convention
//! `a + bi -> [[a, -b], [b, a]]`.

use faer::{c64, Mat, MatRef, Side};

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    Mat::zeros(r, cols)
}

pub fn eye(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(v: &[c64]) -> CMat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| if i == j { v[i] } else { ZERO })
}

pub fn diag_real(v: &[f64]) -> CMat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| if i == j { c(v[i], 0.0) } else { ZERO })
}

pub fn adj(a: MatRef<'_, c64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn conj(a: MatRef<'_, c64>) -> CMat {
    a.conjugate().to_owned()
}

pub fn scale(a: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a + b
}

pub fn sub(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a - b
}

/// Largest absolute entry.
pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for z in a.col(j).iter() {
            m = m.max(z.re * z.re + z.im * z.im);
        }
    }
    m.sqrt()
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Block matrix from a square grid of equally sized blocks; `None` is zero.
pub fn blocks(grid: &[Vec<Option<CMat>>]) -> CMat {
    let k = grid.len();
    let mut n = 0;
    for row in grid {
        for b in row.iter().flatten() {
            n = b.nrows();
        }
    }
    let mut out = zeros(k * n, k * n);
    for (bi, row) in grid.iter().enumerate() {
        for (bj, b) in row.iter().enumerate() {
            if let Some(b) = b {
                for j in 0..n {
                    for i in 0..n {
                        out[(bi * n + i, bj * n + j)] = b[(i, j)];
                    }
                }
            }
        }
    }
    out
}

pub fn block_diag(parts: &[CMat]) -> CMat {
    let n: usize = parts.iter().map(|p| p.nrows()).sum();
    let m: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = zeros(n, m);
    let (mut r0, mut c0) = (0, 0);
    for p in parts {
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                out[(r0 + i, c0 + j)] = p[(i, j)];
            }
        }
        r0 += p.nrows();
        c0 += p.ncols();
    }
    out
}

/// Real 2n x 2n matrix of a complex-linear map.
pub fn realify(a: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(2 * a.nrows(), 2 * a.ncols(), |i, j| {
        let z = a[(i / 2, j / 2)];
        match (i % 2, j % 2) {
            (0, 0) | (1, 1) => c(z.re, 0.0),
            (0, 1) => c(-z.im, 0.0),
            _ => c(z.im, 0.0),
        }
    })
}

/// Real matrix of the antilinear map `psi -> U conj(psi)`.
pub fn realify_anti(u: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(2 * u.nrows(), 2 * u.ncols(), |i, j| {
        let z = u[(i / 2, j / 2)];
        // realify(U) * diag(1, -1) per entry
        let base = match (i % 2, j % 2) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        c(base * sign, 0.0)
    })
}

/// Realified vector: complex n-vector to real 2n-vector.
pub fn realify_vec(v: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(2 * v.nrows(), v.ncols(), |i, j| {
        let z = v[(i / 2, j)];
        c(if i % 2 == 0 { z.re } else { z.im }, 0.0)
    })
}

#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: MatRef<'_, c64>) -> Eigh {
    let n = a.nrows();
    if n == 0 {
        return Eigh { values: vec![], vectors: zeros(0, 0) };
    }
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigensolver failed to converge");
    let values = e.S().column_vector().iter().map(|x| x.re).collect();
    Eigh { values, vectors: e.U().to_owned() }
}

pub fn eigvalsh(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return vec![];
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .expect("hermitian eigensolver failed to converge")
}

/// Unitary polar factor `W V^*` of `A = W S V^*`; defined also when `A`
/// is singular.
pub fn polar(a: MatRef<'_, c64>) -> CMat {
    if a.nrows() == 0 {
        return zeros(0, 0);
    }
    let s = a.svd().expect("singular value decomposition failed to converge");
    s.U() * s.V().adjoint()
}

/// Selected columns of a matrix.
pub fn cols(a: MatRef<'_, c64>, idx: &[usize]) -> CMat {
    Mat::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])])
}

/// Hermitian part (A + A*)/2, used to clean round-off before eigensolves.
pub fn herm_part(a: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Orthonormal basis of the eigenspace of a Hermitian involution-like
/// matrix with eigenvalue closest to `target`.
pub fn eigenspace(a: MatRef<'_, c64>, target: f64, tol: f64) -> CMat {
    let e = eigh(herm_part(a).as_ref());
    let idx: Vec<usize> = (0..e.values.len())
        .filter(|&k| (e.values[k] - target).abs() < tol)
        .collect();
    cols(e.vectors.as_ref(), &idx)
}

/// Connected components of the sparsity graph of a square matrix.
pub fn components(a: MatRef<'_, c64>, tol: f64) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && a[(i, j)].norm() > tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

pub fn submatrix(a: MatRef<'_, c64>, rows: &[usize], cs: &[usize]) -> CMat {
    Mat::from_fn(rows.len(), cs.len(), |i, j| a[(rows[i], cs[j])])
}

/// Anticommutator residual max|AB + BA|.
pub fn anticomm_res(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    pair_res(a, b, 1.0)
}

/// Commutator residual max|AB - BA|.
pub fn comm_res(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    pair_res(a, b, -1.0)
}

/// max|A^2 - s I|.
pub fn square_res(a: MatRef<'_, c64>, s: f64) -> f64 {
    let n = a.nrows();
    let Some(sa) = Columns::sparse(a) else {
        let sq = a * a;
        return max_abs((&sq - scale(eye(n).as_ref(), c(s, 0.0))).as_ref());
    };
    let mut buf = vec![c64::new(0.0, 0.0); n];
    let mut m: f64 = 0.0;
    for j in 0..n {
        buf.fill(c64::new(0.0, 0.0));
        sa.add_product_col(a, Some(&sa), j, 1.0, &mut buf);
        buf[j] -= c(s, 0.0);
        m = m.max(max_abs_slice(&buf));
    }
    m
}

/// max|AB + s BA| without forming either product when one factor is sparse.
fn pair_res(a: MatRef<'_, c64>, b: MatRef<'_, c64>, s: f64) -> f64 {
    let (sa, sb) = (Columns::sparse(a), Columns::sparse(b));
    if sa.is_none() && sb.is_none() {
        return max_abs((a * b + scale((b * a).as_ref(), c(s, 0.0))).as_ref());
    }
    let n = a.nrows();
    let mut buf = vec![c64::new(0.0, 0.0); n];
    let mut m: f64 = 0.0;
    for j in 0..b.ncols() {
        buf.fill(c64::new(0.0, 0.0));
        product_col(a, sa.as_ref(), b, sb.as_ref(), j, 1.0, &mut buf);
        product_col(b, sb.as_ref(), a, sa.as_ref(), j, s, &mut buf);
        m = m.max(max_abs_slice(&buf));
    }
    m
}

fn max_abs_slice(v: &[c64]) -> f64 {
    v.iter().map(|z| z.re * z.re + z.im * z.im).fold(0.0, f64::max).sqrt()
}

/// Nonzero entries per column.
struct Columns(Vec<Vec<(usize, c64)>>);

impl Columns {
    /// `None` once the fill passes `SPARSE_FILL`.
    fn sparse(a: MatRef<'_, c64>) -> Option<Self> {
        let limit = (SPARSE_FILL * (a.nrows() * a.ncols()) as f64) as usize;
        let mut count = 0;
        let mut cols = Vec::with_capacity(a.ncols());
        for j in 0..a.ncols() {
            let mut col = Vec::new();
            for (i, &z) in a.col(j).iter().enumerate() {
                if z != c64::new(0.0, 0.0) {
                    col.push((i, z));
                }
            }
            count += col.len();
            if count > limit {
                return None;
            }
            cols.push(col);
        }
        Some(Columns(cols))
    }

    /// `buf += s (A A')[:, j]` where `self` holds the columns of the right factor.
    fn add_product_col(&self, a: MatRef<'_, c64>, sa: Option<&Columns>, j: usize, s: f64, buf: &mut [c64]) {
        for &(l, x) in &self.0[j] {
            add_col(a, sa, l, x * s, buf);
        }
    }
}

fn add_col(a: MatRef<'_, c64>, sa: Option<&Columns>, l: usize, x: c64, buf: &mut [c64]) {
    match sa {
        Some(cols) => {
            for &(i, y) in &cols.0[l] {
                buf[i] += y * x;
            }
        }
        None => {
            for (o, &y) in buf.iter_mut().zip(a.col(l).iter()) {
                *o += y * x;
            }
        }
    }
}

/// `buf += s (A B)[:, j]`.
fn product_col(a: MatRef<'_, c64>, sa: Option<&Columns>, b: MatRef<'_, c64>, sb: Option<&Columns>, j: usize, s: f64, buf: &mut [c64]) {
    match sb {
        Some(cols) => cols.add_product_col(a, sa, j, s, buf),
        None => {
            let sa = sa.expect("one factor is sparse");
            for (l, &x) in b.col(j).iter().enumerate() {
                if x != c64::new(0.0, 0.0) {
                    for &(i, y) in &sa.0[l] {
                        buf[i] += y * x * s;
                    }
                }
            }
        }
    }
}

/// Below this fill fraction a factor is treated as sparse.
const SPARSE_FILL: f64 = 0.1;


pub fn is_real(a: MatRef<'_, c64>, tol: f64) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im.abs() <= tol))
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realify_is_multiplicative() {
        let a = Mat::from_fn(3, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.5));
        let b = Mat::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, 1.0 - i as f64));
        let lhs = realify((&a * &b).as_ref());
        let rhs = &realify(a.as_ref()) * &realify(b.as_ref());
        assert!(max_abs((&lhs - &rhs).as_ref()) < 1e-12);
    }

    #[test]
    fn realify_anti_squares_to_u_conj_u() {
        // (U K)^2 = U conj(U)
        let u = from_real(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let r = realify_anti(u.as_ref());
        let sq = &r * &r;
        assert!(max_abs((&sq + &eye(4)).as_ref()) < 1e-14);
        let ui = scale(u.as_ref(), I);
        let r = realify_anti(ui.as_ref());
        let sq = &r * &r;
        assert!(max_abs((&sq + &eye(4)).as_ref()) < 1e-14);
    }

    #[test]
    fn components_split_block_diagonal() {
        let a = block_diag(&[eye(2), from_real(&[&[0.0, 1.0], &[1.0, 0.0]])]);
        let c = components(a.as_ref(), 1e-14);
        assert_eq!(c, vec![vec![0], vec![1], vec![2, 3]]);
    }

    #[test]
    fn sparse_residuals_match_dense_products() {
        let n = 40;
        let perm = Mat::from_fn(n, n, |i, j| if j == (7 * i + 3) % n { c(1.0, -0.5) } else { c(0.0, 0.0) });
        let dense = Mat::from_fn(n, n, |i, j| c((i as f64 * 0.3 + j as f64).sin(), (i * j) as f64 * 0.01));
        for (a, b) in [(&perm, &dense), (&dense, &perm), (&perm, &perm), (&dense, &dense)] {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ab = a * b;
            let ba = b * a;
            assert!((anticomm_res(a, b) - max_abs((&ab + &ba).as_ref())).abs() < 1e-12);
            assert!((comm_res(a, b) - max_abs((&ab - &ba).as_ref())).abs() < 1e-12);
        }
        for a in [&perm, &dense] {
            let sq = a * a;
            for s in [1.0, -1.0] {
                let want = max_abs((&sq - scale(eye(n).as_ref(), c(s, 0.0))).as_ref());
                assert!((square_res(a.as_ref(), s) - want).abs() < 1e-12);
            }
        }
    }
}
