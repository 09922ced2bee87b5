//! Dense complex linear algebra: tensor products, partial traces, Hermitian
//! exponentials, spectra and the distance measures used everywhere else.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest tolerated deviation from Hermiticity before an input is rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on the trace and on negative eigenvalues of a density matrix.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Max-entry deviation of `m` from its conjugate transpose.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Square matrix checked (and symmetrized) to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian {
    mat: CMat,
    symmetrized: bool,
}

impl Hermitian {
    /// Accepts deviations up to `HERMITIAN_TOL`; anything above 1e-12 is
    /// symmetrized and flagged.
    pub fn new(mat: CMat) -> Result<Self, LinalgError> {
        if !mat.is_square() {
            return Err(LinalgError::DimMismatch(format!(
                "expected square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !is_finite(&mat) {
            return Err(LinalgError::NonFinite);
        }
        let dev = hermitian_deviation(&mat);
        if dev > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(dev));
        }
        let symmetrized = dev > 1e-12;
        let mat = if dev > 0.0 { symmetrize(&mat) } else { mat };
        Ok(Hermitian { mat, symmetrized })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMat::zeros(d, d);
        for (i, v) in diag.iter().enumerate() {
            m[(i, i)] = c(*v, 0.0);
        }
        Hermitian {
            mat: m,
            symmetrized: false,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// True when construction had to symmetrize a small deviation.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues sorted non-increasing, eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl Spectrum {
    pub fn reconstruct(&self) -> CMat {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*lam);
        }
        &scaled * v.adjoint()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

pub fn spectrum(h: &Hermitian) -> Spectrum {
    spectrum_of(h.matrix())
}

/// Spectrum of a matrix the caller already knows is Hermitian.
pub(crate) fn spectrum_of(m: &CMat) -> Spectrum {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (j, &k) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[k]);
        vecs.set_column(j, &eig.eigenvectors.column(k));
    }
    Spectrum {
        eigenvalues: vals,
        eigenvectors: vecs,
    }
}

pub fn eigenvalues_of(m: &CMat) -> Vec<f64> {
    spectrum_of(m).eigenvalues
}

/// e^{-i h t}, by spectral decomposition.
pub fn herm_exp(h: &Hermitian, t: f64) -> CMat {
    exp_from_spectrum(&spectrum(h), t)
}

pub(crate) fn exp_from_spectrum(sp: &Spectrum, t: f64) -> CMat {
    let v = &sp.eigenvectors;
    let mut scaled = v.clone();
    for (j, lam) in sp.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lam * t);
        for x in scaled.column_mut(j).iter_mut() {
            *x *= phase;
        }
    }
    &scaled * v.adjoint()
}

/// e^{A} for anti-Hermitian A, through the Hermitian operator iA.
pub fn exp_antihermitian(a: &CMat) -> CMat {
    let h = a * c(0.0, 1.0);
    exp_from_spectrum(&spectrum_of(&symmetrize(&h)), 1.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn check_factors(m: &CMat, dims: &[usize]) -> Result<(), LinalgError> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != total || dims.is_empty() {
        return Err(LinalgError::DimMismatch(format!(
            "{}x{} matrix over factors {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(())
}

fn multi_index(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

fn flat_index(idx: &[usize], dims: &[usize], which: impl Fn(usize) -> bool) -> usize {
    let mut f = 0;
    for k in 0..dims.len() {
        if which(k) {
            f = f * dims[k] + idx[k];
        }
    }
    f
}

/// Traces out every factor not listed in `keep`. Kept factors stay in their
/// original order.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat, LinalgError> {
    check_factors(m, dims)?;
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(LinalgError::DimMismatch(format!(
            "keep {:?} out of range for {:?}",
            keep, dims
        )));
    }
    let kept = |k: usize| keep.contains(&k);
    let dk: usize = (0..dims.len())
        .filter(|&k| kept(k))
        .map(|k| dims[k])
        .product();
    let n = m.nrows();
    let mut out = CMat::zeros(dk, dk);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    for r in 0..n {
        multi_index(r, dims, &mut ri);
        for col in 0..n {
            multi_index(col, dims, &mut ci);
            let traced_equal = (0..dims.len()).all(|k| kept(k) || ri[k] == ci[k]);
            if traced_equal {
                let a = flat_index(&ri, dims, kept);
                let b = flat_index(&ci, dims, kept);
                out[(a, b)] += m[(r, col)];
            }
        }
    }
    Ok(out)
}

/// Transposes the indices of factor `part` only.
pub fn partial_transpose(m: &CMat, dims: &[usize], part: usize) -> Result<CMat, LinalgError> {
    check_factors(m, dims)?;
    if part >= dims.len() {
        return Err(LinalgError::DimMismatch(format!(
            "part {} out of range for {:?}",
            part, dims
        )));
    }
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    let all = |_: usize| true;
    for r in 0..n {
        multi_index(r, dims, &mut ri);
        for col in 0..n {
            multi_index(col, dims, &mut ci);
            std::mem::swap(&mut ri[part], &mut ci[part]);
            let a = flat_index(&ri, dims, all);
            let b = flat_index(&ci, dims, all);
            std::mem::swap(&mut ri[part], &mut ci[part]);
            out[(a, b)] = m[(r, col)];
        }
    }
    Ok(out)
}

/// SWAP on two factors of dimension d.
pub fn swap_operator(d: usize) -> CMat {
    let mut s = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(i * d + j, j * d + i)] = c(1.0, 0.0);
        }
    }
    s
}

/// ½‖a − b‖₁ for Hermitian inputs.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let diff = symmetrize(&(a - b));
    Ok(0.5 * eigenvalues_of(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

pub fn hs_norm(a: &CMat) -> f64 {
    a.norm()
}

pub fn op_norm(a: &Hermitian) -> f64 {
    let ev = eigenvalues_of(a.matrix());
    ev.iter().fold(0.0f64, |m, l| m.max(l.abs()))
}

/// Largest singular value, for matrices that need not be Hermitian.
pub fn spectral_norm(a: &CMat) -> f64 {
    let g = a.adjoint() * a;
    let ev = eigenvalues_of(&symmetrize(&g));
    ev[0].max(0.0).sqrt()
}

/// Density matrix with an explicit tensor-factor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
    factor_dims: Vec<usize>,
    clipped: f64,
}

impl DensityMatrix {
    /// Strict constructor: the matrix must already satisfy the state invariants.
    pub fn new(mat: CMat, factor_dims: Vec<usize>) -> Result<Self, LinalgError> {
        check_factors(&mat, &factor_dims)?;
        let h = Hermitian::new(mat)?;
        let tr = h.matrix().trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(LinalgError::InvalidState(format!("trace {}", tr)));
        }
        let min = spectrum_of(h.matrix()).min();
        if min < -STATE_TOL {
            return Err(LinalgError::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                min
            )));
        }
        Ok(DensityMatrix {
            mat: h.into_matrix(),
            factor_dims,
            clipped: 0.0,
        })
    }

    /// Repairing constructor for channel outputs: symmetrizes, clips
    /// eigenvalues below -1e-10 to zero and renormalizes the trace. The total
    /// clipped weight is recorded.
    pub fn repaired(mat: CMat, factor_dims: Vec<usize>) -> Result<Self, LinalgError> {
        check_factors(&mat, &factor_dims)?;
        if !is_finite(&mat) {
            return Err(LinalgError::NonFinite);
        }
        let mut m = symmetrize(&mat);
        let mut clipped = 0.0;
        let sp = spectrum_of(&m);
        if sp.min() < -STATE_TOL {
            let mut vals = sp.eigenvalues.clone();
            for v in vals.iter_mut() {
                if *v < -STATE_TOL {
                    clipped += -*v;
                    *v = 0.0;
                }
            }
            m = Spectrum {
                eigenvalues: vals,
                eigenvectors: sp.eigenvectors,
            }
            .reconstruct();
        }
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return Err(LinalgError::InvalidState(format!(
                "trace {} after repair",
                tr
            )));
        }
        m.unscale_mut(tr);
        Ok(DensityMatrix {
            mat: m,
            factor_dims,
            clipped,
        })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        DensityMatrix {
            mat: v * v.adjoint(),
            factor_dims: psi.factor_dims().to_vec(),
            clipped: 0.0,
        }
    }

    pub fn maximally_mixed(factor_dims: Vec<usize>) -> Self {
        let d: usize = factor_dims.iter().product();
        DensityMatrix {
            mat: identity(d) * c(1.0 / d as f64, 0.0),
            factor_dims,
            clipped: 0.0,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn clipped(&self) -> f64 {
        self.clipped
    }

    pub fn as_hermitian(&self) -> Hermitian {
        Hermitian {
            mat: self.mat.clone(),
            symmetrized: false,
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        spectrum_of(&self.mat)
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.factor_dims.clone();
        dims.extend_from_slice(&other.factor_dims);
        DensityMatrix {
            mat: kron(&self.mat, &other.mat),
            factor_dims: dims,
            clipped: 0.0,
        }
    }

    /// U ρ U† followed by the usual repair.
    pub fn conjugated(&self, u: &CMat) -> Result<DensityMatrix, LinalgError> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(LinalgError::DimMismatch(format!(
                "unitary {:?} on dim {}",
                u.shape(),
                self.dim()
            )));
        }
        DensityMatrix::repaired(u * &self.mat * u.adjoint(), self.factor_dims.clone())
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, LinalgError> {
        let m = partial_trace(&self.mat, &self.factor_dims, keep)?;
        let dims = keep.iter().map(|&k| self.factor_dims[k]).collect();
        DensityMatrix::repaired(m, dims)
    }

    /// ⟨v|ρ|v⟩.
    pub fn expectation_pure(&self, v: &CVec) -> f64 {
        (v.adjoint() * &self.mat * v)[(0, 0)].re
    }
}

/// Normalized state vector with an explicit tensor-factor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVec,
    factor_dims: Vec<usize>,
}

impl PureState {
    pub fn new(amps: CVec, factor_dims: Vec<usize>) -> Result<Self, LinalgError> {
        let total: usize = factor_dims.iter().product();
        if total != amps.len() || factor_dims.is_empty() {
            return Err(LinalgError::DimMismatch(format!(
                "{} amplitudes over factors {:?}",
                amps.len(),
                factor_dims
            )));
        }
        if !amps.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let n = amps.norm();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(LinalgError::InvalidState(format!("norm {}", n)));
        }
        Ok(PureState { amps, factor_dims })
    }

    /// Normalizes a non-zero vector.
    pub fn normalized(amps: CVec, factor_dims: Vec<usize>) -> Result<Self, LinalgError> {
        let n = amps.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(LinalgError::InvalidState(
                "zero or non-finite vector".into(),
            ));
        }
        PureState::new(amps.unscale(n), factor_dims)
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = CVec::zeros(dim);
        v[k] = c(1.0, 0.0);
        PureState {
            amps: v,
            factor_dims: vec![dim],
        }
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    pub fn overlap(&self, other: &PureState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> CMat {
        &self.amps * self.amps.adjoint()
    }

    pub fn evolve(&self, u: &CMat) -> Result<PureState, LinalgError> {
        PureState::normalized(u * &self.amps, self.factor_dims.clone())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_complex(r: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    c(re, im)
}

pub fn random_ginibre(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut r = rng(seed);
    CMat::from_fn(rows, cols, |_, _| gaussian_complex(&mut r))
}

/// Full-rank random state from the Hilbert-Schmidt ensemble.
pub fn random_density(dim: usize, seed: u64) -> DensityMatrix {
    let g = random_ginibre(dim, dim, seed);
    let m = &g * g.adjoint();
    DensityMatrix::repaired(m, vec![dim]).expect("Ginibre product is positive definite")
}

/// Haar-random pure state.
pub fn random_pure(dim: usize, seed: u64) -> PureState {
    let g = random_ginibre(dim, 1, seed);
    PureState::normalized(g.column(0).into_owned(), vec![dim]).expect("Gaussian vector is non-zero")
}

/// Hermitian matrix with Gaussian entries (GUE up to scale).
pub fn random_hermitian(dim: usize, seed: u64) -> Hermitian {
    let g = random_ginibre(dim, dim, seed);
    Hermitian {
        mat: symmetrize(&g),
        symmetrized: false,
    }
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(dim: usize, seed: u64) -> CMat {
    let g = random_ginibre(dim, dim, seed);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        for x in q.column_mut(j).iter_mut() {
            *x *= ph;
        }
    }
    q
}
