//! Tight-binding models on Z^d: shift-operator polynomials with internal
//! matrices, open-box truncation, spectra, Fermi projections and disorder.

use crate::linalg::{self, c, CMat, Eigh, ZERO};
use crate::symmetry::{self, Realization, SymmetryError, SymmetryOperators, SymmetrySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const DEFAULT_MAX_DIM: usize = 20_000;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Matrix-size cap, overridable through `TENFOLD_MAX_DIM`.
pub fn max_dim() -> usize {
    std::env::var("TENFOLD_MAX_DIM").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_DIM)
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("term at offset {offset:?} is not Hermitian-closed: M(-a) differs from M(a)^* by {residual:.3e}")]
    NotHermitian { offset: Vec<i64>, residual: f64 },
    #[error("magnetic flux must vanish when an antilinear symmetry acts by complex conjugation")]
    FluxWithAntilinear,
    #[error("box radius {l} is below the hopping range {range}")]
    BoxTooSmall { l: usize, range: usize },
    #[error("matrix dimension {dim} exceeds the cap {cap} (TENFOLD_MAX_DIM)")]
    TooLarge { dim: usize, cap: usize },
    #[error("mu_in_spectrum: distance from mu={mu} to the spectrum is {gap:.3e}")]
    MuInSpectrum { mu: f64, gap: f64 },
    #[error("disorder amplitude {sigma} is not below half the gap {gap}")]
    DisorderTooStrong { sigma: f64, gap: f64 },
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
    #[error("unknown parameter '{param}' for builtin '{name}'")]
    UnknownParam { name: String, param: String },
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::MuInSpectrum { .. } => "mu_in_spectrum",
            ModelError::DisorderTooStrong { .. } => "disorder_closes_gap",
            ModelError::TooLarge { .. } => "too_large",
            ModelError::BoxTooSmall { .. } => "box_too_small",
            ModelError::FluxWithAntilinear => "flux_with_antilinear_symmetry",
            _ => "schema",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub offset: Vec<i64>,
    pub matrix: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flux {
    pub p: i64,
    pub q: i64,
}

impl Flux {
    pub fn phi(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Disorder {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub name: String,
    pub d: usize,
    pub n_int: usize,
    pub terms: Vec<Term>,
    pub flux: Option<Flux>,
    pub mu: f64,
    pub spec: SymmetrySpec,
    pub ops: SymmetryOperators,
    pub disorder: Option<Disorder>,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// JSON model files

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub offset: Vec<i64>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryMatrices {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryFile {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<i8>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<i8>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<bool>,
    #[serde(default)]
    pub realization: Realization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<SymmetryMatrices>,
}

impl SymmetryFile {
    pub fn spec(&self) -> SymmetrySpec {
        let s = self.s.unwrap_or(false) || (self.t.is_some() && self.c.is_some());
        SymmetrySpec { t: self.t, c: self.c, s, realization: self.realization }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dimension: usize,
    pub internal_rank: usize,
    pub terms: Vec<TermFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<Flux>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub symmetry: SymmetryFile,
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], n: usize, what: &str) -> Result<CMat, ModelError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ModelError::Schema(format!("{what}: expected a {n}x{n} matrix")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

fn matrix_to_file(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))
    }

    pub fn from_model(m: &LatticeModel) -> Self {
        ModelFile {
            dimension: m.d,
            internal_rank: m.n_int,
            terms: m.terms.iter().map(|t| TermFile { offset: t.offset.clone(), matrix: matrix_to_file(&t.matrix) }).collect(),
            flux: m.flux,
            mu: m.mu,
            symmetry: SymmetryFile {
                t: m.spec.t,
                c: m.spec.c,
                s: if m.spec.s { Some(true) } else { None },
                realization: m.spec.realization,
                matrices: None,
            },
        }
    }
}

/// Validates a model description and completes missing Hermitian partners.
pub fn build(file: &ModelFile) -> Result<LatticeModel, ModelError> {
    let n = file.internal_rank;
    if n == 0 {
        return Err(ModelError::Schema("internal_rank must be positive".into()));
    }
    let mut terms = Vec::with_capacity(file.terms.len());
    for (k, t) in file.terms.iter().enumerate() {
        if t.offset.len() != file.dimension {
            return Err(ModelError::Schema(format!("term {k}: offset has {} entries, dimension is {}", t.offset.len(), file.dimension)));
        }
        terms.push(Term { offset: t.offset.clone(), matrix: parse_matrix(&t.matrix, n, &format!("term {k}"))? });
    }
    let spec = file.symmetry.spec();
    if file.flux.is_some_and(|f| f.p != 0) && (spec.t.is_some() || spec.c.is_some()) && spec.realization != Realization::SpatialInvolution {
        return Err(ModelError::FluxWithAntilinear);
    }
    let ops = match spec.realization {
        Realization::Explicit => {
            let m = file.symmetry.matrices.clone().unwrap_or_default();
            let p = |x: Option<Vec<Vec<[f64; 2]>>>, w: &str| x.map(|r| parse_matrix(&r, n, w)).transpose();
            symmetry::explicit(&spec, p(m.t, "T")?, p(m.c, "C")?, p(m.s, "S")?)?
        }
        _ => operators_for(&spec, n)?,
    };
    assemble("custom", file.dimension, n, terms, file.flux, file.mu, spec, ops)
}

fn operators_for(spec: &SymmetrySpec, n: usize) -> Result<SymmetryOperators, ModelError> {
    spec.validate()?;
    if spec.is_complex() && !spec.s {
        return Ok(SymmetryOperators::trivial(n));
    }
    if n % 2 == 1 {
        return Err(SymmetryError::OddRank(n).into());
    }
    Ok(symmetry::realize(spec, n / 2)?)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    name: &str,
    d: usize,
    n: usize,
    raw: Vec<Term>,
    flux: Option<Flux>,
    mu: f64,
    spec: SymmetrySpec,
    ops: SymmetryOperators,
) -> Result<LatticeModel, ModelError> {
    if let Some(f) = flux {
        if f.q == 0 {
            return Err(ModelError::Schema("flux denominator q must be nonzero".into()));
        }
        if f.p != 0 {
            if d < 2 {
                return Err(ModelError::Schema("flux needs dimension >= 2".into()));
            }
            if (spec.t.is_some() || spec.c.is_some()) && spec.realization != Realization::SpatialInvolution {
                return Err(ModelError::FluxWithAntilinear);
            }
        }
    }
    if ops.dim() != 0 && ops.dim() != n {
        return Err(SymmetryError::DimensionMismatch { ops: ops.dim(), model: n }.into());
    }
    // merge equal offsets
    let mut merged: BTreeMap<Vec<i64>, CMat> = BTreeMap::new();
    for t in raw {
        match merged.get_mut(&t.offset) {
            Some(m) => *m = &*m + &t.matrix,
            None => {
                merged.insert(t.offset, t.matrix);
            }
        }
    }
    let mut warnings = Vec::new();
    let keys: Vec<Vec<i64>> = merged.keys().cloned().collect();
    for a in &keys {
        let neg: Vec<i64> = a.iter().map(|x| -x).collect();
        let ma = merged[a].clone();
        match merged.get(&neg) {
            Some(mn) => {
                let res = linalg::max_abs((mn - ma.adjoint()).as_ref());
                if res > 1e-12 {
                    return Err(ModelError::NotHermitian { offset: a.clone(), residual: res });
                }
            }
            None => {
                warnings.push(format!("added Hermitian partner for offset {a:?}"));
                merged.insert(neg, ma.adjoint().to_owned());
            }
        }
    }
    let terms = merged.into_iter().map(|(offset, matrix)| Term { offset, matrix }).collect();
    Ok(LatticeModel { name: name.to_string(), d, n_int: n, terms, flux, mu, spec, ops, disorder: None, warnings })
}

// ---------------------------------------------------------------------------
// truncation

#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub d: usize,
    pub l: usize,
    pub n_int: usize,
    /// Site coordinates in `{-L..L}^d`, row-block order.
    pub sites: Vec<Vec<i64>>,
    pub matrix: CMat,
    pub grading: Option<CMat>,
}

impl TruncatedOperator {
    pub fn side(&self) -> usize {
        2 * self.l + 1
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn site_index(&self, x: &[i64]) -> Option<usize> {
        site_index(self.d, self.l, x)
    }

    pub fn row(&self, site: usize, a: usize) -> usize {
        site * self.n_int + a
    }

    /// `(site, internal)` of a row.
    pub fn split_row(&self, row: usize) -> (usize, usize) {
        (row / self.n_int, row % self.n_int)
    }

    /// Index of `-x`.
    pub fn reflected(&self, site: usize) -> usize {
        let neg: Vec<i64> = self.sites[site].iter().map(|v| -v).collect();
        self.site_index(&neg).expect("box is symmetric")
    }

    /// `j`-th coordinate of every row.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for s in &self.sites {
            for _ in 0..self.n_int {
                out.push(s[j] as f64);
            }
        }
        out
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::max_abs((&self.matrix - self.matrix.adjoint()).as_ref())
    }
}

fn site_index(d: usize, l: usize, x: &[i64]) -> Option<usize> {
    let side = 2 * l as i64 + 1;
    let mut idx = 0i64;
    for j in (0..d).rev() {
        let v = x[j] + l as i64;
        if v < 0 || v >= side {
            return None;
        }
        idx = idx * side + v;
    }
    Some(idx as usize)
}

pub fn box_sites(d: usize, l: usize) -> Vec<Vec<i64>> {
    let side = 2 * l + 1;
    let count = side.pow(d as u32);
    (0..count)
        .map(|mut k| {
            let mut x = vec![0i64; d];
            for v in x.iter_mut() {
                *v = (k % side) as i64 - l as i64;
                k /= side;
            }
            x
        })
        .collect()
}

impl LatticeModel {
    pub fn range(&self) -> usize {
        self.terms.iter().flat_map(|t| t.offset.iter().map(|v| v.unsigned_abs() as usize)).max().unwrap_or(0)
    }

    pub fn phi(&self) -> f64 {
        self.flux.map(|f| f.phi()).unwrap_or(0.0)
    }

    /// Landau-gauge phase for the hop `y -> y + a`.
    fn peierls(&self, y: &[i64], a: &[i64]) -> faer::c64 {
        let phi = self.phi();
        if phi == 0.0 || a[1] == 0 {
            return c(1.0, 0.0);
        }
        let mid = y[0] as f64 + a[0] as f64 / 2.0;
        c(0.0, -2.0 * PI * phi * a[1] as f64 * mid).exp()
    }

    pub fn truncate_dim(&self, l: usize) -> usize {
        (2 * l + 1).pow(self.d as u32) * self.n_int
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }
}

pub fn truncate(model: &LatticeModel, l: usize) -> Result<TruncatedOperator, ModelError> {
    let range = model.range();
    if l < range {
        return Err(ModelError::BoxTooSmall { l, range });
    }
    let dim = model.truncate_dim(l);
    let cap = max_dim();
    if dim > cap {
        return Err(ModelError::TooLarge { dim, cap });
    }
    let n = model.n_int;
    let sites = box_sites(model.d, l);
    let mut h = linalg::zeros(dim, dim);
    let mut x = vec![0i64; model.d];
    for (yi, y) in sites.iter().enumerate() {
        for t in &model.terms {
            for j in 0..model.d {
                x[j] = y[j] + t.offset[j];
            }
            let Some(xi) = site_index(model.d, l, &x) else { continue };
            let ph = model.peierls(y, &t.offset);
            for a in 0..n {
                for b in 0..n {
                    let v = t.matrix[(a, b)];
                    if v != ZERO {
                        h[(xi * n + a, yi * n + b)] += v * ph;
                    }
                }
            }
        }
    }
    if let Some(dis) = model.disorder {
        for (yi, y) in sites.iter().enumerate() {
            let w = disorder_block(&model.ops, n, dis, y);
            for a in 0..n {
                for b in 0..n {
                    h[(yi * n + a, yi * n + b)] += w[(a, b)];
                }
            }
        }
    }
    Ok(TruncatedOperator { d: model.d, l, n_int: n, sites, matrix: h, grading: None })
}

// ---------------------------------------------------------------------------
// spectra

#[derive(Clone, Debug)]
pub struct GapInfo {
    pub below: f64,
    pub above: f64,
    pub eigen: Eigh,
}

impl GapInfo {
    pub fn gap(&self) -> f64 {
        self.below.min(self.above)
    }
}

pub fn spectrum_gap(ht: &TruncatedOperator, mu: f64) -> Result<GapInfo, ModelError> {
    spectrum_gap_tol(ht, mu, DEFAULT_GAP_TOL)
}

pub fn spectrum_gap_tol(ht: &TruncatedOperator, mu: f64, tol: f64) -> Result<GapInfo, ModelError> {
    let eigen = linalg::eigh(ht.matrix.as_ref());
    let below = eigen.values.iter().filter(|&&e| e < mu).map(|e| mu - e).fold(f64::INFINITY, f64::min);
    let above = eigen.values.iter().filter(|&&e| e >= mu).map(|e| e - mu).fold(f64::INFINITY, f64::min);
    let gap = below.min(above);
    if gap < tol {
        return Err(ModelError::MuInSpectrum { mu, gap });
    }
    Ok(GapInfo { below, above, eigen })
}

/// Occupied eigenvectors and the projection they span.
#[derive(Clone, Debug)]
pub struct Fermi {
    pub basis: CMat,
    pub rank: usize,
    pub gap: f64,
}

impl Fermi {
    pub fn from_gap(info: &GapInfo, mu: f64) -> Self {
        let idx: Vec<usize> = (0..info.eigen.values.len()).filter(|&k| info.eigen.values[k] < mu).collect();
        Fermi { basis: linalg::cols(info.eigen.vectors.as_ref(), &idx), rank: idx.len(), gap: info.gap() }
    }

    pub fn projection(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }
}

pub fn fermi(ht: &TruncatedOperator, mu: f64) -> Result<Fermi, ModelError> {
    let info = spectrum_gap(ht, mu)?;
    Ok(Fermi::from_gap(&info, mu))
}

pub fn fermi_projection(ht: &TruncatedOperator, mu: f64) -> Result<CMat, ModelError> {
    Ok(fermi(ht, mu)?.projection())
}

/// Occupied states `E < mu` without a gap requirement. Boundary modes of the
/// open box may sit at `mu`; they are filled or left empty arbitrarily.
pub fn fermi_open(ht: &TruncatedOperator, mu: f64) -> Fermi {
    let eigen = linalg::eigh(ht.matrix.as_ref());
    let gap = eigen.values.iter().map(|e| (e - mu).abs()).fold(f64::INFINITY, f64::min);
    let idx: Vec<usize> = (0..eigen.values.len()).filter(|&k| eigen.values[k] < mu).collect();
    Fermi { basis: linalg::cols(eigen.vectors.as_ref(), &idx), rank: idx.len(), gap }
}

/// Eigenvalues within this distance of `mu` count as zero modes in [`flatten`].
pub const FLATTEN_ZERO: f64 = 1e-9;

/// `sgn(H - mu)`, with `sgn` vanishing on the (boundary) zero modes so
/// that the flattened box keeps every symmetry of `H - mu` even when those
/// modes are numerically degenerate.
pub fn flatten(ht: &TruncatedOperator, mu: f64) -> Result<TruncatedOperator, ModelError> {
    let e = linalg::eigh(ht.matrix.as_ref());
    let sg: Vec<f64> = e.values.iter().map(|v| if (v - mu).abs() < FLATTEN_ZERO { 0.0 } else { (v - mu).signum() }).collect();
    let m = &(&e.vectors * linalg::diag_real(&sg)) * e.vectors.adjoint();
    Ok(TruncatedOperator { matrix: linalg::herm_part(m.as_ref()), ..ht.clone() })
}

// ---------------------------------------------------------------------------
// bulk (Bloch) spectra

/// Magnetic supercell length along the first axis.
fn supercell(model: &LatticeModel) -> usize {
    match model.flux {
        Some(f) if f.p != 0 => f.q.unsigned_abs() as usize,
        _ => 1,
    }
}

/// Bloch Hamiltonian of the magnetic supercell at quasi-momentum `k`.
pub fn bloch(model: &LatticeModel, k: &[f64]) -> CMat {
    let q = supercell(model);
    let n = model.n_int;
    let mut h = linalg::zeros(q * n, q * n);
    if model.d == 0 {
        for t in &model.terms {
            h = &h + &t.matrix;
        }
        return h;
    }
    for s in 0..q {
        let mut y = vec![0i64; model.d];
        y[0] = s as i64;
        for t in &model.terms {
            let tgt = s as i64 + t.offset[0];
            let sp = tgt.rem_euclid(q as i64) as usize;
            let cell0 = tgt.div_euclid(q as i64);
            let mut phase = cell0 as f64 * k[0];
            for j in 1..model.d {
                phase += t.offset[j] as f64 * k[j];
            }
            let f = model.peierls(&y, &t.offset) * c(0.0, -phase).exp();
            for a in 0..n {
                for b in 0..n {
                    h[(sp * n + a, s * n + b)] += t.matrix[(a, b)] * f;
                }
            }
        }
    }
    h
}

fn k_grid(d: usize, nk: usize) -> Vec<Vec<f64>> {
    let count = nk.pow(d as u32);
    (0..count)
        .map(|mut idx| {
            let mut k = vec![0.0; d];
            for v in k.iter_mut() {
                *v = 2.0 * PI * ((idx % nk) as f64 + 0.5) / nk as f64 - PI;
                idx /= nk;
            }
            k
        })
        .collect()
}

pub fn default_nk(d: usize) -> usize {
    match d {
        0 => 1,
        1 => 256,
        2 => 48,
        _ => 16,
    }
}

/// Energy range `(min, max)` of every Bloch band on a k-grid.
pub fn band_ranges(model: &LatticeModel, nk: usize) -> Vec<(f64, f64)> {
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    for k in k_grid(model.d, nk) {
        let e = linalg::eigvalsh(bloch(model, &k).as_ref());
        if ranges.is_empty() {
            ranges = e.iter().map(|&v| (v, v)).collect();
        }
        for (r, v) in ranges.iter_mut().zip(e) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    ranges
}

fn raw_gaps(ranges: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut top = f64::NEG_INFINITY;
    for w in 0..ranges.len() {
        top = top.max(ranges[w].1);
        if w + 1 < ranges.len() && ranges[w + 1].0 > top + 1e-6 {
            out.push((top, ranges[w + 1].0));
        }
    }
    out
}

/// Open spectral gaps `(lower edge, upper edge)` in ascending order.
///
/// A gap seen on the `nk` grid is kept only if it survives on the `3 nk`
/// grid with at least 3/4 of its width; band touchings between grid points
/// shrink under refinement and are dropped.
pub fn bulk_gaps(model: &LatticeModel, nk: usize) -> Vec<(f64, f64)> {
    let coarse = raw_gaps(&band_ranges(model, nk));
    let fine = raw_gaps(&band_ranges(model, 3 * nk));
    fine.into_iter()
        .filter(|&(lo, hi)| {
            coarse.iter().any(|&(clo, chi)| clo < hi && lo < chi && (hi - lo) >= 0.75 * (chi - clo))
        })
        .collect()
}

/// Distance from `mu` to the bulk spectrum (0 inside a band).
pub fn bulk_gap_at(model: &LatticeModel, mu: f64, nk: usize) -> f64 {
    band_ranges(model, nk)
        .iter()
        .map(|&(lo, hi)| if mu < lo { lo - mu } else if mu > hi { mu - hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// disorder

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn site_seed(seed: u64, x: &[i64]) -> u64 {
    x.iter().fold(splitmix(seed), |h, &v| splitmix(h ^ (v as u64)))
}

/// Random Hermitian block with entries uniform in `[-sigma, sigma]`,
/// projected onto the symmetry-allowed subspace; a function of the seed
/// and the site only.
pub fn disorder_block(ops: &SymmetryOperators, n: usize, dis: Disorder, x: &[i64]) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(site_seed(dis.seed, x));
    let s = dis.sigma;
    let mut w = linalg::zeros(n, n);
    for a in 0..n {
        w[(a, a)] = c(rng.random_range(-s..=s), 0.0);
        for b in a + 1..n {
            let v = c(rng.random_range(-s..=s), rng.random_range(-s..=s));
            w[(a, b)] = v;
            w[(b, a)] = v.conj();
        }
    }
    linalg::herm_part(ops.symmetrize_block(&w).as_ref())
}

/// Adds symmetry-compatible on-site disorder. `gap` is the clean gap the
/// amplitude is checked against.
pub fn add_disorder(model: &LatticeModel, sigma: f64, seed: u64, gap: f64) -> Result<LatticeModel, ModelError> {
    if sigma == 0.0 {
        return Ok(model.clone());
    }
    if model.ops.flip {
        return Err(ModelError::Schema("disorder is not defined for spatial-involution realizations".into()));
    }
    if !(sigma < gap / 2.0) {
        return Err(ModelError::DisorderTooStrong { sigma, gap });
    }
    let mut m = model.clone();
    m.disorder = Some(Disorder { sigma, seed });
    Ok(m)
}

// ---------------------------------------------------------------------------
// builtins

pub const BUILTINS: [&str; 5] = ["hofstadter", "haldane", "kane_mele", "threed_ct", "threed_t_only"];

fn unit(d: usize, j: usize, s: i64) -> Vec<i64> {
    let mut v = vec![0; d];
    v[j] = s;
    v
}

/// Pushes `(a, m)` and its Hermitian partner `(-a, m^*)`.
fn hop(terms: &mut Vec<Term>, a: Vec<i64>, m: CMat) {
    let neg = a.iter().map(|v| -v).collect();
    terms.push(Term { offset: neg, matrix: m.adjoint().to_owned() });
    terms.push(Term { offset: a, matrix: m });
}

fn pauli() -> [CMat; 4] {
    [
        linalg::eye(2),
        linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]),
        CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => ZERO,
        }),
        linalg::diag_real(&[1.0, -1.0]),
    ]
}

fn params_with(name: &str, given: &BTreeMap<String, f64>, defaults: &[(&str, f64)]) -> Result<BTreeMap<String, f64>, ModelError> {
    let mut p: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !p.contains_key(k) && k != "mu" {
            return Err(ModelError::UnknownParam { name: name.into(), param: k.clone() });
        }
        p.insert(k.clone(), *v);
    }
    Ok(p)
}

/// Default parameters of a builtin, in documentation order.
pub fn builtin_defaults(name: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match name {
        "hofstadter" => &[("p", 1.0), ("q", 3.0), ("gap", 1.0)],
        "haldane" => &[("t1", 1.0), ("t2", 0.2), ("phase", 0.5), ("mass", 0.2)],
        "kane_mele" => &[("t1", 1.0), ("lambda_so", 0.2), ("rashba", 0.05), ("mass", 0.2)],
        "threed_ct" => &[("m", 1.8)],
        "threed_t_only" => &[("m", 2.0)],
        _ => return None,
    })
}

pub fn builtin(name: &str, given: &BTreeMap<String, f64>) -> Result<LatticeModel, ModelError> {
    let defaults = builtin_defaults(name).ok_or_else(|| ModelError::UnknownBuiltin(name.to_string()))?;
    let p = params_with(name, given, defaults)?;
    let mut model = match name {
        "hofstadter" => hofstadter(p["p"] as i64, p["q"] as i64, p["gap"] as usize)?,
        "haldane" => haldane(p["t1"], p["t2"], p["phase"] * PI, p["mass"])?,
        "kane_mele" => kane_mele(p["t1"], p["lambda_so"], p["rashba"], p["mass"])?,
        "threed_ct" => threed_ct(p["m"])?,
        "threed_t_only" => threed_t_only(p["m"])?,
        _ => unreachable!(),
    };
    if let Some(mu) = given.get("mu") {
        model.mu = *mu;
    }
    model.name = name.to_string();
    Ok(model)
}

/// `H = U + U^* + V + V^*` with flux `p/q` per plaquette; `mu` sits in the
/// middle of the `gap`-th open bulk gap (counted from below; 0 keeps mu = 0).
pub fn hofstadter(p: i64, q: i64, gap: usize) -> Result<LatticeModel, ModelError> {
    let one = linalg::eye(1);
    let mut terms = Vec::new();
    hop(&mut terms, vec![1, 0], one.clone());
    hop(&mut terms, vec![0, 1], one);
    let flux = if p == 0 { None } else { Some(Flux { p, q }) };
    let mut m = assemble("hofstadter", 2, 1, terms, flux, 0.0, SymmetrySpec::none(), SymmetryOperators::trivial(1))?;
    if gap > 0 {
        let gaps = bulk_gaps(&m, 64);
        let (lo, hi) = *gaps
            .get(gap - 1)
            .ok_or_else(|| ModelError::Schema(format!("hofstadter: only {} open gaps, asked for gap {gap}", gaps.len())))?;
        m.mu = 0.5 * (lo + hi);
    }
    Ok(m)
}

/// Honeycomb lattice encoded on Z^2: sublattice A at the cell origin, B at
/// `(a1 + a2)/3`; `a1 = (1, 0)`, `a2 = (1/2, sqrt3/2)`.
fn honeycomb_terms(t1: f64, t2: f64, phase: f64, mass: f64) -> Vec<Term> {
    let mut terms = Vec::new();
    terms.push(Term { offset: vec![0, 0], matrix: linalg::diag_real(&[mass, -mass]) });
    // B(R) -> A(R + a)
    for a in [[0, 0], [1, 0], [0, 1]] {
        let mut m = linalg::zeros(2, 2);
        m[(0, 1)] = c(t1, 0.0);
        hop(&mut terms, a.to_vec(), m);
    }
    // next-nearest neighbours, counter-clockwise within each sublattice
    let e = c(0.0, phase).exp();
    for b in [[1, 0], [-1, 1], [0, -1]] {
        hop(&mut terms, b.to_vec(), linalg::diag(&[e * t2, e.conj() * t2]));
    }
    terms
}

pub fn haldane(t1: f64, t2: f64, phase: f64, mass: f64) -> Result<LatticeModel, ModelError> {
    assemble("haldane", 2, 2, honeycomb_terms(t1, t2, phase, mass), None, 0.0, SymmetrySpec::none(), SymmetryOperators::trivial(2))
}

fn honeycomb_position(cell: [i64; 2], sub: usize) -> [f64; 2] {
    let s3 = 3f64.sqrt();
    let mut x = cell[0] as f64 + 0.5 * cell[1] as f64;
    let mut y = 0.5 * s3 * cell[1] as f64;
    if sub == 1 {
        x += 0.5;
        y += s3 / 6.0;
    }
    [x, y]
}

/// `[[h, g], [g^*, conj h]]` with `h` the Haldane model at flux phase pi/2
/// (the spin-orbit term) and `g` the nearest-neighbour Rashba coupling.
pub fn kane_mele(t1: f64, lambda_so: f64, rashba: f64, mass: f64) -> Result<LatticeModel, ModelError> {
    let h = honeycomb_terms(t1, lambda_so, PI / 2.0, mass);
    let mut terms = Vec::new();
    for t in h {
        let m4 = linalg::block_diag(&[t.matrix.clone(), linalg::conj(t.matrix.as_ref())]);
        terms.push(Term { offset: t.offset, matrix: m4 });
    }
    // g on the bond j -> i is rashba * (-d_x + i d_y), d the unit vector i - j
    for a in [[0i64, 0], [1, 0], [0, 1]] {
        let ra = honeycomb_position(a, 0);
        let rb = honeycomb_position([0, 0], 1);
        let (dx, dy) = (ra[0] - rb[0], ra[1] - rb[1]);
        let nrm = (dx * dx + dy * dy).sqrt();
        let (dx, dy) = (dx / nrm, dy / nrm);
        // up-A(R + a) <- down-B(R)
        let mut m = linalg::zeros(4, 4);
        m[(0, 3)] = c(-dx * rashba, dy * rashba);
        hop(&mut terms, a.to_vec(), m);
        // up-B(R) <- down-A(R + a): offset -a, d reversed
        let mut m = linalg::zeros(4, 4);
        m[(1, 2)] = c(dx * rashba, -dy * rashba);
        hop(&mut terms, vec![-a[0], -a[1]], m);
    }
    let spec = SymmetrySpec::t(-1);
    let ops = symmetry::realize(&spec, 2)?;
    assemble("kane_mele", 2, 4, terms, None, 0.0, spec, ops)
}

/// Chiral block `b = [(m + sum cos k_j) + i sum sin k_j sigma_j] (i sigma_y)`,
/// antisymmetric as an operator, so that `[[0, b], [b^*, 0]]` carries the
/// odd time reversal and even charge conjugation of the standard form.
pub fn threed_ct_block(m: f64) -> Vec<(Vec<i64>, CMat)> {
    let s = pauli();
    let iy = linalg::scale(s[2].as_ref(), c(0.0, 1.0));
    let mut out = vec![(vec![0, 0, 0], linalg::scale(iy.as_ref(), c(m, 0.0)))];
    for j in 0..3 {
        let plus = linalg::scale((&s[0] + &s[j + 1]).as_ref(), c(0.5, 0.0));
        let minus = linalg::scale((&s[0] - &s[j + 1]).as_ref(), c(0.5, 0.0));
        out.push((unit(3, j, 1), &plus * &iy));
        out.push((unit(3, j, -1), &minus * &iy));
    }
    out
}

pub fn threed_ct(m: f64) -> Result<LatticeModel, ModelError> {
    let b = threed_ct_block(m);
    let get = |a: &[i64]| b.iter().find(|(o, _)| o.as_slice() == a).map(|(_, x)| x.clone()).unwrap();
    let mut terms = Vec::new();
    for (a, ba) in &b {
        let neg: Vec<i64> = a.iter().map(|v| -v).collect();
        let lower = get(&neg).adjoint().to_owned();
        let m4 = linalg::blocks(&[vec![None, Some(ba.clone())], vec![Some(lower), None]]);
        terms.push(Term { offset: a.clone(), matrix: m4 });
    }
    let spec = SymmetrySpec::ct(1, -1);
    let ops = symmetry::realize(&spec, 2)?;
    assemble("threed_ct", 3, 4, terms, None, 0.0, spec, ops)
}

/// `diag(h + h', -h + h')` with `h = sin k_x tau_x` (imaginary) and
/// `h' = sin k_y tau_y + (m + sum cos k_j) tau_z` (real).
pub fn threed_t_only(m: f64) -> Result<LatticeModel, ModelError> {
    let s = pauli();
    let mut h1 = vec![Term { offset: vec![0, 0, 0], matrix: linalg::scale(s[3].as_ref(), c(m, 0.0)) }];
    for j in 0..3 {
        let mut mm = linalg::scale(s[3].as_ref(), c(0.5, 0.0));
        if j < 2 {
            mm = &mm + &linalg::scale(s[j + 1].as_ref(), c(0.0, -0.5));
        }
        hop(&mut h1, unit(3, j, 1), mm);
    }
    let terms = h1
        .into_iter()
        .map(|t| Term { matrix: linalg::block_diag(&[t.matrix.clone(), linalg::conj(t.matrix.as_ref())]), offset: t.offset })
        .collect();
    let spec = SymmetrySpec::t(-1);
    let ops = symmetry::realize(&spec, 2)?;
    assemble("threed_t_only", 3, 4, terms, None, 0.0, spec, ops)
}

/// Random gapped model compatible with `spec`: a flattened symmetric on-site
/// term plus weak symmetric nearest-neighbour hopping. Used by the class
/// construction checks.
pub fn random_compatible(spec: &SymmetrySpec, d: usize, n: usize, hopping: f64, seed: u64) -> Result<LatticeModel, ModelError> {
    let ops = operators_for(spec, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_mat = |rng: &mut ChaCha8Rng| CMat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let w = rand_mat(&mut rng);
    let onsite = ops.symmetrize_block(&linalg::herm_part(w.as_ref()));
    let e = linalg::eigh(onsite.as_ref());
    let sgn: Vec<f64> = e.values.iter().map(|v| v.signum()).collect();
    let flat = &(&e.vectors * linalg::diag_real(&sgn)) * e.vectors.adjoint();
    let mut terms = vec![Term { offset: vec![0; d], matrix: linalg::herm_part(flat.as_ref()) }];
    for j in 0..d {
        let a = rand_mat(&mut rng);
        let s = ops.symmetrize_block(&a);
        let nrm = linalg::max_abs(s.as_ref()).max(1e-300);
        let s = linalg::scale(s.as_ref(), c(hopping / (nrm * n as f64), 0.0));
        hop(&mut terms, unit(d, j, 1), s);
    }
    assemble("random", d, n, terms, None, 0.0, *spec, ops)
}
