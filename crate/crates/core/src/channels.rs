//! Memory-calls and memory-usage queries.
//!
//! A memory-call with map N and duration s is the unitary e^{isN(ρ)}. A
//! memory-usage query with generator N̂ and duration s is the channel
//! σ ↦ Tr₁[e^{−iN̂s}(ρ⊗σ)e^{iN̂s}], which to first order applies e^{−isN(ρ)}.
//! Engines that want to emulate e^{isN(ρ)} therefore query with duration −s.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    self, c, commutator, exp_from_spectrum, identity, kron, partial_trace, partial_transpose,
    random_pure, spectral_norm, spectrum_of, trace_distance, CMat, DensityMatrix, Hermitian,
    LinalgError, Spectrum,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("diagonal operator must be non-degenerate")]
    DegenerateDiagonal,
}

/// What a map is, when that is known. Engines use this to pick shortcuts
/// (covariant unfolding, group commutators).
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// ρ ↦ −αρ.
    ScaledIdentity {
        alpha: f64,
    },
    /// ρ ↦ −is[D, ρ].
    Commutator {
        d: CMat,
        s: f64,
    },
    /// ρ_AB ↦ −is[D, Tr_B ρ_AB] ⊗ 𝟙_B.
    Osd {
        d_a: CMat,
        s: f64,
        da: usize,
        db: usize,
    },
    /// Degree-two lift of (ρ, χ) ↦ −i[ρ, χ], acting on ρ⊗χ.
    LiftedCommutator {
        d: usize,
    },
    General,
}

/// Linear Hermitian-preserving map stored through its Choi matrix
/// Λ = Σ_{jk} |j⟩⟨k| ⊗ N(|j⟩⟨k|).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPreservingMap {
    d_in: usize,
    d_out: usize,
    choi: CMat,
    kind: MapKind,
}

impl HermitianPreservingMap {
    pub fn from_choi(d_in: usize, d_out: usize, choi: CMat) -> Result<Self, ChannelError> {
        Self::with_kind(d_in, d_out, choi, MapKind::General)
    }

    fn with_kind(
        d_in: usize,
        d_out: usize,
        choi: CMat,
        kind: MapKind,
    ) -> Result<Self, ChannelError> {
        if choi.nrows() != d_in * d_out || choi.ncols() != d_in * d_out {
            return Err(LinalgError::DimMismatch(format!(
                "Choi matrix {:?} for d_in={} d_out={}",
                choi.shape(),
                d_in,
                d_out
            ))
            .into());
        }
        let choi = Hermitian::new(choi)?.into_matrix();
        Ok(HermitianPreservingMap {
            d_in,
            d_out,
            choi,
            kind,
        })
    }

    /// Builds the Choi matrix by evaluating `f` on every matrix unit.
    pub fn from_fn(
        d_in: usize,
        d_out: usize,
        f: impl Fn(&CMat) -> CMat,
    ) -> Result<Self, ChannelError> {
        let choi = choi_from_fn(d_in, d_out, f);
        Self::from_choi(d_in, d_out, choi)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn choi(&self) -> &CMat {
        &self.choi
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn generator(&self) -> QueryGenerator {
        QueryGenerator::from_map(self)
    }
}

fn choi_from_fn(d_in: usize, d_out: usize, f: impl Fn(&CMat) -> CMat) -> CMat {
    let mut choi = CMat::zeros(d_in * d_out, d_in * d_out);
    let mut unit = CMat::zeros(d_in, d_in);
    for j in 0..d_in {
        for k in 0..d_in {
            unit[(j, k)] = c(1.0, 0.0);
            let img = f(&unit);
            unit[(j, k)] = c(0.0, 0.0);
            for a in 0..d_out {
                for b in 0..d_out {
                    choi[(j * d_out + a, k * d_out + b)] = img[(a, b)];
                }
            }
        }
    }
    choi
}

/// N(x) = Tr₁[Λ(xᵀ ⊗ 𝟙)].
pub fn map_apply(m: &HermitianPreservingMap, x: &CMat) -> Result<CMat, ChannelError> {
    if x.nrows() != m.d_in || x.ncols() != m.d_in {
        return Err(
            LinalgError::DimMismatch(format!("input {:?} for d_in={}", x.shape(), m.d_in)).into(),
        );
    }
    let (di, d) = (m.d_in, m.d_out);
    let mut out = CMat::zeros(d, d);
    for j in 0..di {
        for k in 0..di {
            let w = x[(j, k)];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] += w * m.choi[(j * d + a, k * d + b)];
                }
            }
        }
    }
    Ok(out)
}

/// ρ ↦ −is[D, ρ].
pub fn make_commutator_map(d: &Hermitian, s: f64) -> HermitianPreservingMap {
    let dm = d.matrix().clone();
    let n = d.dim();
    let choi = choi_from_fn(n, n, |x| commutator(&dm, x) * c(0.0, -s));
    HermitianPreservingMap {
        d_in: n,
        d_out: n,
        choi,
        kind: MapKind::Commutator { d: dm, s },
    }
}

/// ρ ↦ −αρ; its query generator is −α·SWAP.
pub fn make_scaled_identity_map(alpha: f64, d: usize) -> HermitianPreservingMap {
    let choi = choi_from_fn(d, d, |x| x * c(-alpha, 0.0));
    HermitianPreservingMap {
        d_in: d,
        d_out: d,
        choi,
        kind: MapKind::ScaledIdentity { alpha },
    }
}

fn check_nondegenerate_diagonal(d: &Hermitian) -> Result<(), ChannelError> {
    let m = d.matrix();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 1e-12 {
                return Err(ChannelError::InvalidArgument(
                    "operator is not diagonal".into(),
                ));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, i)].re - m[(j, j)].re).abs() < 1e-12 {
                return Err(ChannelError::DegenerateDiagonal);
            }
        }
    }
    Ok(())
}

/// ρ_AB ↦ −is[D_A, Tr_B ρ_AB] ⊗ 𝟙_B.
pub fn make_osd_map(
    d_a: &Hermitian,
    s: f64,
    dims: (usize, usize),
) -> Result<HermitianPreservingMap, ChannelError> {
    let (da, db) = dims;
    if d_a.dim() != da {
        return Err(
            LinalgError::DimMismatch(format!("D has dim {} but dA={}", d_a.dim(), da)).into(),
        );
    }
    check_nondegenerate_diagonal(d_a)?;
    let dm = d_a.matrix().clone();
    let idb = identity(db);
    let choi = choi_from_fn(da * db, da * db, |x| {
        let red = partial_trace(x, &[da, db], &[0]).expect("dims checked");
        kron(&(commutator(&dm, &red) * c(0.0, -s)), &idb)
    });
    Ok(HermitianPreservingMap {
        d_in: da * db,
        d_out: da * db,
        choi,
        kind: MapKind::Osd { d_a: dm, s, da, db },
    })
}

/// Linear map on d²-dimensional inputs that agrees with −i[ρ, χ] on ρ⊗χ.
pub fn make_lifted_commutator_map(d: usize) -> HermitianPreservingMap {
    let choi = choi_from_fn(d * d, d, |x| {
        let mut out = CMat::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = c(0.0, 0.0);
                for k in 0..d {
                    acc += x[(a * d + k, k * d + b)] - x[(k * d + a, b * d + k)];
                }
                out[(a, b)] = acc * c(0.0, -1.0);
            }
        }
        out
    });
    HermitianPreservingMap {
        d_in: d * d,
        d_out: d,
        choi,
        kind: MapKind::LiftedCommutator { d },
    }
}

/// N̂ = Λ^{T₁}.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGenerator {
    n_hat: CMat,
    d_in: usize,
    d_out: usize,
}

impl QueryGenerator {
    pub fn from_map(m: &HermitianPreservingMap) -> Self {
        let n_hat =
            partial_transpose(&m.choi, &[m.d_in, m.d_out], 0).expect("Choi dims are consistent");
        QueryGenerator {
            n_hat,
            d_in: m.d_in,
            d_out: m.d_out,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.n_hat
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(&Hermitian::new(self.n_hat.clone()).expect("N̂ is Hermitian"))
    }

    /// Eigendecomposition, reusable across durations.
    pub fn eigen(&self) -> GeneratorEigen {
        GeneratorEigen {
            sp: spectrum_of(&linalg::symmetrize(&self.n_hat)),
            d_in: self.d_in,
            d_out: self.d_out,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorEigen {
    sp: Spectrum,
    d_in: usize,
    d_out: usize,
}

impl GeneratorEigen {
    /// e^{−iN̂s}.
    pub fn unitary(&self, s: f64) -> QueryUnitary {
        QueryUnitary {
            q: exp_from_spectrum(&self.sp, s),
            d_in: self.d_in,
            d_out: self.d_out,
        }
    }
}

/// e^{−iN̂s} for one fixed duration.
#[derive(Debug, Clone)]
pub struct QueryUnitary {
    q: CMat,
    d_in: usize,
    d_out: usize,
}

impl QueryUnitary {
    pub fn new(gen: &QueryGenerator, s: f64) -> Self {
        gen.eigen().unitary(s)
    }

    pub fn matrix(&self) -> &CMat {
        &self.q
    }

    /// Superoperator of σ ↦ Tr₁[Q(ρ⊗σ)Q†] on row-major vectorized σ,
    /// assembled from the Kraus operators K_{k,i} = √pᵢ(⟨k|⊗𝟙)Q(|vᵢ⟩⊗𝟙).
    pub fn superoperator(&self, memory: &DensityMatrix) -> Result<CMat, ChannelError> {
        if memory.dim() != self.d_in {
            return Err(LinalgError::DimMismatch(format!(
                "memory dim {} for d_in={}",
                memory.dim(),
                self.d_in
            ))
            .into());
        }
        let (di, d) = (self.d_in, self.d_out);
        let sp = memory.spectrum();
        let mut s = CMat::zeros(d * d, d * d);
        let mut qv = CMat::zeros(di * d, d);
        for (i, p) in sp.eigenvalues.iter().enumerate() {
            if *p <= 1e-15 {
                continue;
            }
            let v = sp.eigenvectors.column(i);
            let sq = p.sqrt();
            qv.fill(c(0.0, 0.0));
            for row in 0..di * d {
                for b in 0..d {
                    let mut acc = c(0.0, 0.0);
                    for j in 0..di {
                        acc += self.q[(row, j * d + b)] * v[j];
                    }
                    qv[(row, b)] = acc * sq;
                }
            }
            for k in 0..di {
                let kr = qv.rows(k * d, d);
                for a in 0..d {
                    for b in 0..d {
                        let kab = kr[(a, b)];
                        if kab == c(0.0, 0.0) {
                            continue;
                        }
                        for a2 in 0..d {
                            for b2 in 0..d {
                                s[(a * d + a2, b * d + b2)] += kab * kr[(a2, b2)].conj();
                            }
                        }
                    }
                }
            }
        }
        Ok(s)
    }

    /// One query, computed directly from the joint state.
    pub fn apply(
        &self,
        memory: &DensityMatrix,
        working: &DensityMatrix,
    ) -> Result<DensityMatrix, ChannelError> {
        if memory.dim() != self.d_in || working.dim() != self.d_out {
            return Err(LinalgError::DimMismatch(format!(
                "memory {} / working {} for generator {}x{}",
                memory.dim(),
                working.dim(),
                self.d_in,
                self.d_out
            ))
            .into());
        }
        let joint = kron(memory.matrix(), working.matrix());
        let evolved = &self.q * joint * self.q.adjoint();
        let out = partial_trace(&evolved, &[self.d_in, self.d_out], &[1])?;
        Ok(DensityMatrix::repaired(
            out,
            working.factor_dims().to_vec(),
        )?)
    }
}

/// Applies a superoperator `times` times to a state.
pub fn apply_superoperator(
    s: &CMat,
    working: &DensityMatrix,
    times: usize,
) -> Result<DensityMatrix, ChannelError> {
    let d = working.dim();
    if s.nrows() != d * d {
        return Err(LinalgError::DimMismatch(format!(
            "superoperator {:?} on dim {}",
            s.shape(),
            d
        ))
        .into());
    }
    let mut v =
        nalgebra::DVector::from_iterator(d * d, working.matrix().transpose().iter().copied());
    for _ in 0..times {
        v = s * v;
    }
    let m = CMat::from_row_slice(d, d, v.as_slice());
    Ok(DensityMatrix::repaired(m, working.factor_dims().to_vec())?)
}

/// A memory-call e^{i·duration·N(instruction)}. When `auxiliary` is set the
/// instruction fed to the map is ρ⊗auxiliary instead of ρ.
#[derive(Debug, Clone)]
pub struct MemoryCallSpec {
    pub map: Arc<HermitianPreservingMap>,
    pub duration: f64,
    pub auxiliary: Option<DensityMatrix>,
}

impl MemoryCallSpec {
    pub fn new(map: HermitianPreservingMap, duration: f64) -> Result<Self, ChannelError> {
        Self::shared(Arc::new(map), duration)
    }

    pub fn shared(map: Arc<HermitianPreservingMap>, duration: f64) -> Result<Self, ChannelError> {
        if !duration.is_finite() {
            return Err(ChannelError::InvalidArgument(
                "duration must be finite".into(),
            ));
        }
        Ok(MemoryCallSpec {
            map,
            duration,
            auxiliary: None,
        })
    }

    pub fn with_auxiliary(mut self, aux: DensityMatrix) -> Self {
        self.auxiliary = Some(aux);
        self
    }

    /// The state the map actually reads when the recursion holds `rho`.
    pub fn instruction_for(&self, rho: &DensityMatrix) -> DensityMatrix {
        match &self.auxiliary {
            Some(aux) => rho.tensor(aux),
            None => rho.clone(),
        }
    }

    /// e^{i·duration·N(instruction)} as a matrix.
    pub fn unitary(&self, instruction: &DensityMatrix) -> Result<CMat, ChannelError> {
        let n = map_apply(&self.map, instruction.matrix())?;
        let h = Hermitian::new(n)?;
        Ok(linalg::herm_exp(&h, -self.duration))
    }
}

/// Working state conjugated by e^{is·N(instruction)}.
pub fn exact_memory_call(
    spec: &MemoryCallSpec,
    instruction: &DensityMatrix,
    working: &DensityMatrix,
) -> Result<DensityMatrix, ChannelError> {
    if working.dim() != spec.map.d_out {
        return Err(LinalgError::DimMismatch(format!(
            "working dim {} for d_out={}",
            working.dim(),
            spec.map.d_out
        ))
        .into());
    }
    let u = spec.unitary(instruction)?;
    Ok(working.conjugated(&u)?)
}

/// Tr₁[e^{−iN̂s}(memory⊗working)e^{iN̂s}].
pub fn memory_usage_query(
    gen: &QueryGenerator,
    memory: &DensityMatrix,
    working: &DensityMatrix,
    s: f64,
) -> Result<DensityMatrix, ChannelError> {
    QueryUnitary::new(gen, s).apply(memory, working)
}

/// cos²s·σ − i·sin s·cos s·[ρ,σ] + sin²s·ρ.
pub fn dme_query(
    memory: &DensityMatrix,
    working: &DensityMatrix,
    s: f64,
) -> Result<DensityMatrix, ChannelError> {
    if memory.dim() != working.dim() {
        return Err(LinalgError::DimMismatch(format!(
            "memory {} vs working {}",
            memory.dim(),
            working.dim()
        ))
        .into());
    }
    let (sn, cs) = s.sin_cos();
    let rho = memory.matrix();
    let sigma = working.matrix();
    let out =
        sigma * c(cs * cs, 0.0) - commutator(rho, sigma) * c(0.0, sn * cs) + rho * c(sn * sn, 0.0);
    Ok(DensityMatrix::repaired(
        out,
        working.factor_dims().to_vec(),
    )?)
}

/// `m` queries of duration s/m with a fresh copy of `memory` each time.
pub fn repeated_queries(
    gen: &QueryGenerator,
    memory: &DensityMatrix,
    working: &DensityMatrix,
    s: f64,
    m: usize,
) -> Result<DensityMatrix, ChannelError> {
    if m == 0 {
        return Err(ChannelError::InvalidArgument(
            "number of queries must be at least 1".into(),
        ));
    }
    let q = QueryUnitary::new(gen, s / m as f64);
    let sup = q.superoperator(memory)?;
    apply_superoperator(&sup, working, m)
}

/// e^{−i√s B}e^{−i√s A}e^{i√s B}e^{i√s A}, which approximates e^{s[A,B]}.
pub fn group_commutator(a: &Hermitian, b: &Hermitian, s: f64) -> Result<CMat, ChannelError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimMismatch(format!("{} vs {}", a.dim(), b.dim())).into());
    }
    if !(s > 0.0) {
        return Err(ChannelError::InvalidArgument(
            "group commutator needs s > 0".into(),
        ));
    }
    let r = s.sqrt();
    let spa = linalg::spectrum(a);
    let spb = linalg::spectrum(b);
    Ok(exp_from_spectrum(&spb, r)
        * exp_from_spectrum(&spa, r)
        * exp_from_spectrum(&spb, -r)
        * exp_from_spectrum(&spa, -r))
}

/// s^{3/2}(‖[A,[A,B]]‖ + ‖[B,[B,A]]‖) in operator norm.
pub fn group_commutator_bound(a: &Hermitian, b: &Hermitian, s: f64) -> f64 {
    let (am, bm) = (a.matrix(), b.matrix());
    let ab = commutator(am, bm);
    let ba = commutator(bm, am);
    s.powf(1.5) * (spectral_norm(&commutator(am, &ab)) + spectral_norm(&commutator(bm, &ba)))
}

/// Sampled lower bound on the trace-norm distance between `m` repeated
/// queries of total duration s and the exact e^{−isN(memory)}: the largest
/// trace distance over seeded random pure working states.
pub fn channel_error_probe(
    gen: &QueryGenerator,
    map: &Arc<HermitianPreservingMap>,
    memory: &DensityMatrix,
    s: f64,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64, ChannelError> {
    if n_samples == 0 {
        return Err(ChannelError::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    if m == 0 {
        return Err(ChannelError::InvalidArgument(
            "number of queries must be at least 1".into(),
        ));
    }
    let sup = QueryUnitary::new(gen, s / m as f64).superoperator(memory)?;
    let exact = MemoryCallSpec::shared(map.clone(), -s)?;
    let u = exact.unitary(memory)?;
    let mut worst = 0.0f64;
    for k in 0..n_samples {
        let w = random_pure(gen.d_out, seed.wrapping_add(k as u64)).density();
        let approx = apply_superoperator(&sup, &w, m)?;
        let target = w.conjugated(&u)?;
        worst = worst.max(trace_distance(approx.matrix(), target.matrix())?);
    }
    Ok(worst)
}
