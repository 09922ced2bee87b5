//! Ready-made recursions: nested fixed-point Grover search, double-bracket
//! iteration and imaginary-time evolution, oblivious Schmidt decomposition.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::channels::{
    make_commutator_map, make_lifted_commutator_map, make_osd_map, make_scaled_identity_map,
    ChannelError, MemoryCallSpec,
};
use crate::engine::{run_qdp, EngineError, RecursionSpec, RecursionStepSpec, TrajectoryRecord};
use crate::imr::IMRConfig;
use crate::linalg::{
    self, c, exp_antihermitian, herm_exp, hs_norm, identity, kron, partial_trace, random_pure,
    spectrum, trace_distance, CMat, CVec, DensityMatrix, Hermitian, LinalgError, PureState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

// ---------------------------------------------------------------- Grover

/// T_m(x) = cos(m arccos x) on [−1, 1], cosh(m arcosh x) above 1 and the odd
/// or even continuation below −1 (only integer m is meaningful there).
pub fn chebyshev_t(m: f64, x: f64) -> f64 {
    if x.abs() <= 1.0 {
        (m * x.acos()).cos()
    } else if x > 1.0 {
        (m * x.acosh()).cosh()
    } else {
        let sign = if (m.round() as i64) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        sign * (m * (-x).acosh()).cosh()
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn angles_for(l: usize, q: f64) -> (Vec<f64>, Vec<f64>) {
    let order = 2 * l + 1;
    let t = chebyshev_t(1.0 / order as f64, 1.0 / q);
    let root = if t.is_finite() {
        (1.0 - 1.0 / (t * t)).max(0.0).sqrt()
    } else {
        1.0
    };
    let alphas: Vec<f64> = (1..=l)
        .map(|j| {
            let x = (2.0 * PI * j as f64 / order as f64).tan() * root;
            2.0 * 1.0f64.atan2(x)
        })
        .collect();
    let betas = (1..=l).map(|j| -alphas[l - j]).collect();
    (alphas, betas)
}

/// Chebyshev angles α₁…α_L (arccot branch (0, π), so αₗ ∈ (0, 2π)) and
/// βₗ = −α_{L−l+1}. The inner Chebyshev polynomial is evaluated at 1/q.
pub fn grover_angles(l: usize, q: f64) -> Result<(Vec<f64>, Vec<f64>), AlgoError> {
    if l == 0 {
        return Err(AlgoError::InvalidArgument("L must be >= 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(AlgoError::InvalidArgument(format!(
            "q={} outside (0, 1)",
            q
        )));
    }
    Ok(angles_for(l, q))
}

/// sech((2L+1)·arcsech δ), the exact one-step distance map.
pub fn grover_h(l: usize, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let order = (2 * l + 1) as f64;
    1.0 / (order * (1.0 / delta).acosh()).cosh()
}

/// δ₀…δ_N with δₙ = sech((2L+1)arcsech δₙ₋₁) + ε. With ε = 0 this is the
/// closed form sech((2L+1)ⁿ arcosh δ₀⁻¹).
pub fn grover_delta_sequence(
    delta0: f64,
    l: usize,
    n: usize,
    eps: f64,
) -> Result<Vec<f64>, AlgoError> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(AlgoError::InvalidArgument(format!(
            "delta0={} outside (0, 1)",
            delta0
        )));
    }
    let mut v = vec![delta0];
    if eps == 0.0 {
        let a = (1.0 / delta0).acosh();
        for k in 1..=n {
            let order = ((2 * l + 1) as f64).powi(k as i32);
            v.push(1.0 / (order * a).cosh());
        }
    } else {
        for k in 0..n {
            let next = (grover_h(l, v[k]) + eps).min(1.0);
            v.push(next);
        }
    }
    Ok(v)
}

/// q·T_{2L+1}(T_{1/(2L+1)}(q⁻¹)·δ): distance after one step run with
/// parameter q from distance δ. Equals q when q = h(δ).
pub fn grover_step_distance(l: usize, q: f64, delta: f64) -> f64 {
    let order = (2 * l + 1) as f64;
    q * chebyshev_t(order, chebyshev_t(1.0 / order, 1.0 / q) * delta)
}

#[derive(Debug, Clone)]
pub struct GroverConfig {
    pub l: usize,
    pub initial: PureState,
    pub target: PureState,
    pub n_steps: usize,
}

impl GroverConfig {
    pub fn new(
        l: usize,
        initial: PureState,
        target: PureState,
        n_steps: usize,
    ) -> Result<Self, AlgoError> {
        if l == 0 {
            return Err(AlgoError::InvalidArgument("L must be >= 1".into()));
        }
        if initial.dim() != target.dim() {
            return Err(LinalgError::DimMismatch(format!(
                "initial {} vs target {}",
                initial.dim(),
                target.dim()
            ))
            .into());
        }
        if initial.overlap(&target).norm() <= 1e-12 {
            return Err(AlgoError::InvalidArgument(
                "initial state is orthogonal to the target".into(),
            ));
        }
        Ok(GroverConfig {
            l,
            initial,
            target,
            n_steps,
        })
    }

    /// τ = |0⟩ and ψ₀ = √(1−δ₀²)|0⟩ + δ₀|φ⟩, with φ a seeded random unit
    /// vector orthogonal to τ.
    pub fn with_distance(
        dim: usize,
        delta0: f64,
        l: usize,
        n_steps: usize,
        seed: u64,
    ) -> Result<Self, AlgoError> {
        if dim < 2 {
            return Err(AlgoError::InvalidArgument(
                "Grover search needs dim >= 2".into(),
            ));
        }
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(AlgoError::InvalidArgument(format!(
                "delta0={} outside (0, 1)",
                delta0
            )));
        }
        let target = PureState::basis(dim, 0);
        let mut phi = CVec::zeros(dim);
        if dim == 2 {
            phi[1] = c(1.0, 0.0);
        } else {
            let r = random_pure(dim - 1, seed);
            for k in 1..dim {
                phi[k] = r.amplitudes()[k - 1];
            }
        }
        let mut amps = phi * c(delta0, 0.0);
        amps[0] = c((1.0 - delta0 * delta0).sqrt(), 0.0);
        let initial = PureState::normalized(amps, vec![dim])?;
        GroverConfig::new(l, initial, target, n_steps)
    }

    pub fn delta0(&self) -> f64 {
        (1.0 - self.initial.overlap(&self.target).norm_sqr())
            .max(0.0)
            .sqrt()
    }
}

/// e^{iβτ}: the target-side reflection.
fn target_reflection(target: &PureState, beta: f64) -> CMat {
    let d = target.dim();
    identity(d) + target.projector() * (Complex::from_polar(1.0, beta) - c(1.0, 0.0))
}

use num_complex::Complex64 as Complex;

/// One Grover step E_{α_L}(ψ)E'_{β_L}(τ)⋯E_{α₁}(ψ)E'_{β₁}(τ) as a recursion
/// step, with the ψ-reflections e^{−iαψ} expressed as memory-calls.
pub fn grover_step_spec(
    l: usize,
    target: &PureState,
    q: f64,
) -> Result<RecursionStepSpec, AlgoError> {
    let (alphas, betas) = angles_for(l, q);
    let d = target.dim();
    let mut statics = Vec::with_capacity(l + 1);
    let mut calls = Vec::with_capacity(l);
    for j in 0..l {
        statics.push(target_reflection(target, betas[j]));
        calls.push(MemoryCallSpec::new(
            make_scaled_identity_map(wrap_angle(alphas[j]), d),
            1.0,
        )?);
    }
    statics.push(identity(d));
    Ok(RecursionStepSpec::new(statics, calls)?)
}

/// Applies one step with parameter q to a pure state.
pub fn grover_step(psi: &PureState, cfg: &GroverConfig, q: f64) -> Result<PureState, AlgoError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(AlgoError::InvalidArgument(format!(
            "q={} outside (0, 1)",
            q
        )));
    }
    let step = grover_step_spec(cfg.l, &cfg.target, q)?;
    let u = step.unitary(&psi.density())?;
    Ok(psi.evolve(&u)?)
}

/// Recursion whose step n aims at q = h(δₙ), the distance it would reach
/// from the (possibly ε-inflated) bound δₙ.
pub fn grover_spec(cfg: &GroverConfig, eps: f64) -> Result<RecursionSpec, AlgoError> {
    let deltas = grover_delta_sequence(cfg.delta0(), cfg.l, cfg.n_steps.max(1), eps)?;
    let mut steps = Vec::new();
    for &delta in deltas.iter().take(cfg.n_steps.max(1)) {
        let q = grover_h(cfg.l, delta).min(1.0 - 1e-12);
        steps.push(grover_step_spec(cfg.l, &cfg.target, q)?);
    }
    Ok(RecursionSpec::new(
        steps,
        cfg.initial.density(),
        Some(cfg.target.density()),
    )?)
}

/// Grover search with DME queries replacing the ψ-reflections.
pub fn grover_qdp_run(
    cfg: &GroverConfig,
    m: usize,
    eps: f64,
    imr: Option<&IMRConfig>,
) -> Result<TrajectoryRecord, AlgoError> {
    if m < 2 * cfg.l {
        return Err(AlgoError::InvalidArgument(format!(
            "m={} < 2L={}",
            m,
            2 * cfg.l
        )));
    }
    let spec = grover_spec(cfg, eps)?;
    Ok(run_qdp(&spec, cfg.n_steps, m, imr)?)
}

/// Tr[(𝟙−P)ρ] with P the projector onto span{τ, ψ₀}.
pub fn out_of_subspace_weight(rho: &DensityMatrix, target: &PureState, initial: &PureState) -> f64 {
    let t = target.amplitudes();
    let perp = initial.amplitudes() - t * t.dotc(initial.amplitudes());
    let mut p = target.projector();
    let n = perp.norm();
    if n > 1e-14 {
        let u = perp.unscale(n);
        p += &u * u.adjoint();
    }
    let q = identity(rho.dim()) - p;
    (&q * rho.matrix() * &q).trace().re.abs()
}

/// Compares e^{−isρ} with e^{−isx𝟙_rel}·e^{−is(1−2x)ψ} for ρ = (1−x)ψ + xψ⊥
/// on seeded random states; returns the largest trace distance.
pub fn mixed_reflection_identity_check(rho: &DensityMatrix, s: f64) -> Result<f64, AlgoError> {
    let sp = rho.spectrum();
    if sp.eigenvalues.len() > 2 && sp.eigenvalues[2] > 1e-10 {
        return Err(AlgoError::InvalidArgument("state has rank above 2".into()));
    }
    let d = rho.dim();
    let x = if d > 1 {
        sp.eigenvalues[1].max(0.0)
    } else {
        0.0
    };
    let v0 = sp.eigenvectors.column(0).into_owned();
    let mut rel = &v0 * v0.adjoint();
    if d > 1 {
        let v1 = sp.eigenvectors.column(1).into_owned();
        rel += &v1 * v1.adjoint();
    }
    let psi = &v0 * v0.adjoint();
    let lhs = herm_exp(&rho.as_hermitian(), s);
    let phase = identity(d) + &rel * (Complex::from_polar(1.0, -s * x) - c(1.0, 0.0));
    let refl = identity(d) + &psi * (Complex::from_polar(1.0, -s * (1.0 - 2.0 * x)) - c(1.0, 0.0));
    let rhs = phase * refl;
    let mut worst = 0.0f64;
    for k in 0..8u64 {
        let w = random_pure(d, 1000 + k).density();
        let a = w.conjugated(&lhs)?;
        let b = w.conjugated(&rhs)?;
        worst = worst.max(trace_distance(a.matrix(), b.matrix())?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------- DBI

fn check_diag(d: &Hermitian) -> Result<(), AlgoError> {
    let m = d.matrix();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 1e-12 {
                return Err(AlgoError::InvalidArgument("D must be diagonal".into()));
            }
            if i < j && (m[(i, i)].re - m[(j, j)].re).abs() < 1e-12 {
                return Err(AlgoError::InvalidArgument(
                    "D must be non-degenerate".into(),
                ));
            }
        }
    }
    Ok(())
}

/// e^{s[D,P]} P e^{−s[D,P]}.
pub fn dbi_step(p: &Hermitian, d: &Hermitian, s: f64) -> Result<Hermitian, AlgoError> {
    check_diag(d)?;
    if p.dim() != d.dim() {
        return Err(LinalgError::DimMismatch(format!("P {} vs D {}", p.dim(), d.dim())).into());
    }
    let gen = linalg::commutator(d.matrix(), p.matrix()) * c(s, 0.0);
    let u = exp_antihermitian(&gen);
    Ok(Hermitian::new(linalg::symmetrize(
        &(&u * p.matrix() * u.adjoint()),
    ))?)
}

/// 1/(4‖P₀‖₂‖D‖₂) with Hilbert-Schmidt norms.
pub fn dbi_canonical_step_size(p0: &Hermitian, d: &Hermitian) -> Result<f64, AlgoError> {
    let np = hs_norm(p0.matrix());
    let nd = hs_norm(d.matrix());
    if np == 0.0 || nd == 0.0 {
        return Err(AlgoError::InvalidArgument("zero norm".into()));
    }
    Ok(1.0 / (4.0 * np * nd))
}

/// ‖P − D‖₂².
pub fn dbi_cost(p: &Hermitian, d: &Hermitian) -> f64 {
    (p.matrix() - d.matrix()).norm_squared()
}

/// Hilbert-Schmidt norm of the off-diagonal part.
pub fn offdiag_norm(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// (P + λ𝟙)/Tr(P + λ𝟙) with λ = −λ_min(P) + 0.01‖P‖∞, and the λ used.
pub fn dbi_encode(p: &Hermitian) -> Result<(DensityMatrix, f64), AlgoError> {
    let sp = spectrum(p);
    let norm = sp.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let margin = if norm > 0.0 { 0.01 * norm } else { 1.0 };
    let lambda = -sp.min() + margin;
    let shifted = p.matrix() + identity(p.dim()) * c(lambda, 0.0);
    let tr = shifted.trace().re;
    Ok((
        DensityMatrix::repaired(shifted.unscale(tr), vec![p.dim()])?,
        lambda,
    ))
}

/// Exact iterates P₀…P_N.
pub fn dbi_run(
    p0: &Hermitian,
    d: &Hermitian,
    s: f64,
    n: usize,
) -> Result<Vec<Hermitian>, AlgoError> {
    let mut out = vec![p0.clone()];
    for _ in 0..n {
        let next = dbi_step(out.last().unwrap(), d, s)?;
        out.push(next);
    }
    Ok(out)
}

/// The double-bracket iteration on a density matrix as a recursion with one
/// commutator memory-call per step.
pub fn dbi_spec(root: &DensityMatrix, d: &Hermitian, s: f64) -> Result<RecursionSpec, AlgoError> {
    check_diag(d)?;
    let n = root.dim();
    let call = MemoryCallSpec::new(make_commutator_map(d, s), 1.0)?;
    let step = RecursionStepSpec::new(vec![identity(n), identity(n)], vec![call])?;
    Ok(RecursionSpec::new(vec![step], root.clone(), None)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Fixed(f64),
    /// 1/(4‖P₀‖₂‖D‖₂); constant along the run because the iteration is isospectral.
    Canonical,
}

#[derive(Debug, Clone)]
pub struct DBIConfig {
    pub diag: Hermitian,
    pub initial: Hermitian,
    pub step: StepSchedule,
}

impl DBIConfig {
    pub fn new(diag: Hermitian, initial: Hermitian, step: StepSchedule) -> Result<Self, AlgoError> {
        check_diag(&diag)?;
        let m = diag.matrix();
        if (1..diag.dim()).any(|i| m[(i, i)].re <= m[(i - 1, i - 1)].re) {
            return Err(AlgoError::InvalidArgument(
                "diagonal entries must be strictly increasing".into(),
            ));
        }
        if initial.dim() != diag.dim() {
            return Err(LinalgError::DimMismatch(format!(
                "P₀ {} vs D {}",
                initial.dim(),
                diag.dim()
            ))
            .into());
        }
        Ok(DBIConfig {
            diag,
            initial,
            step,
        })
    }

    pub fn step_size(&self) -> Result<f64, AlgoError> {
        match self.step {
            StepSchedule::Fixed(s) => Ok(s),
            StepSchedule::Canonical => dbi_canonical_step_size(&self.initial, &self.diag),
        }
    }

    pub fn run_exact(&self, n: usize) -> Result<Vec<Hermitian>, AlgoError> {
        dbi_run(&self.initial, &self.diag, self.step_size()?, n)
    }

    /// Recursion on the encoded state ρ = (P + λ𝟙)/T. Since [D, ρ] = [D, P]/T,
    /// the state step is s·T, which keeps ρₙ the encoding of Pₙ.
    pub fn recursion(&self) -> Result<(RecursionSpec, DbiEncoding), AlgoError> {
        let (rho, lambda) = dbi_encode(&self.initial)?;
        let trace = (self.initial.matrix().trace().re + lambda * self.initial.dim() as f64).abs();
        let spec = dbi_spec(&rho, &self.diag, self.step_size()? * trace)?;
        Ok((spec, DbiEncoding { lambda, trace }))
    }
}

/// Offset and normalization of the state encoding of P.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbiEncoding {
    pub lambda: f64,
    pub trace: f64,
}

impl DbiEncoding {
    /// P = T·ρ − λ𝟙.
    pub fn decode(&self, rho: &DensityMatrix) -> Hermitian {
        let n = rho.dim();
        let m = rho.matrix() * c(self.trace, 0.0) - identity(n) * c(self.lambda, 0.0);
        Hermitian::new(linalg::symmetrize(&m)).expect("finite by construction")
    }
}

// ---------------------------------------------------------------- QITE

#[derive(Debug, Clone)]
pub struct QITEConfig {
    pub hamiltonian: Hermitian,
    pub initial: PureState,
    pub s: f64,
}

/// e^{s[ψ,H]}|ψ⟩.
pub fn qite_step(psi: &PureState, h: &Hermitian, s: f64) -> Result<PureState, AlgoError> {
    if psi.dim() != h.dim() {
        return Err(
            LinalgError::DimMismatch(format!("state {} vs H {}", psi.dim(), h.dim())).into(),
        );
    }
    let gen = linalg::commutator(&psi.projector(), h.matrix()) * c(s, 0.0);
    Ok(psi.evolve(&exp_antihermitian(&gen))?)
}

pub fn qite_energy(psi: &PureState, h: &Hermitian) -> f64 {
    let v = psi.amplitudes();
    (v.adjoint() * h.matrix() * v)[(0, 0)].re
}

/// Canonical double-bracket step with P₀ = ψ and D = −H: 1/(4‖H‖₂).
pub fn qite_canonical_step(h: &Hermitian) -> Result<f64, AlgoError> {
    let n = hs_norm(h.matrix());
    if n == 0.0 {
        return Err(AlgoError::InvalidArgument("zero Hamiltonian".into()));
    }
    Ok(1.0 / (4.0 * n))
}

/// H − E₀𝟙, E₀ and the ground vector. E₀ is computed exactly here; hardware
/// would have to make do with a lower bound.
pub fn qite_shift(h: &Hermitian) -> Result<(Hermitian, f64, PureState), AlgoError> {
    let sp = spectrum(h);
    let n = h.dim();
    let e0 = sp.min();
    if n > 1 && (sp.eigenvalues[n - 2] - e0).abs() < 1e-10 {
        return Err(AlgoError::InvalidArgument(
            "ground state is degenerate".into(),
        ));
    }
    let g = PureState::normalized(sp.eigenvectors.column(n - 1).into_owned(), vec![n])?;
    let shifted = Hermitian::new(h.matrix() - identity(n) * c(e0, 0.0))?;
    Ok((shifted, e0, g))
}

pub fn ground_infidelity(rho: &DensityMatrix, ground: &PureState) -> f64 {
    (1.0 - rho.expectation_pure(ground.amplitudes())).max(0.0)
}

/// QITE recursion: the memory-call e^{t[ρ,χ]} with χ = H'/Tr H' and
/// t = s·Tr H', realized through the lifted commutator map on ρ⊗χ. Returns
/// the recursion (target = ground state) and the ground vector.
pub fn qite_spec(cfg: &QITEConfig) -> Result<(RecursionSpec, PureState), AlgoError> {
    let (shifted, _, ground) = qite_shift(&cfg.hamiltonian)?;
    let n = shifted.dim();
    if cfg.initial.dim() != n {
        return Err(
            LinalgError::DimMismatch(format!("state {} vs H {}", cfg.initial.dim(), n)).into(),
        );
    }
    if cfg.initial.overlap(&ground).norm() <= 1e-12 {
        return Err(AlgoError::InvalidArgument(
            "initial state has no ground-state overlap".into(),
        ));
    }
    let tr = shifted.matrix().trace().re;
    let chi = DensityMatrix::repaired(shifted.matrix().unscale(tr), vec![n]).map_err(|e| {
        AlgoError::InvalidArgument(format!("shifted Hamiltonian is not a valid state: {}", e))
    })?;
    let call = MemoryCallSpec::shared(Arc::new(make_lifted_commutator_map(n)), cfg.s * tr)?
        .with_auxiliary(chi);
    let step = RecursionStepSpec::new(vec![identity(n), identity(n)], vec![call])?;
    let spec = RecursionSpec::new(vec![step], cfg.initial.density(), Some(ground.density()))?;
    Ok((spec, ground))
}

pub fn qite_qdp_run(
    cfg: &QITEConfig,
    n_steps: usize,
    m: usize,
) -> Result<TrajectoryRecord, AlgoError> {
    let (spec, _) = qite_spec(cfg)?;
    Ok(run_qdp(&spec, n_steps, m, None)?)
}

fn pauli(k: usize) -> CMat {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match k {
        1 => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMat::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        3 => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => identity(2),
    }
}

fn site_op(op: &CMat, site: usize, n: usize) -> CMat {
    let mut m = identity(1);
    for k in 0..n {
        m = if k == site {
            kron(&m, op)
        } else {
            kron(&m, &identity(2))
        };
    }
    m
}

/// Open XXZ chain Σᵢ Jᵢ(XX + YY + Δ·ZZ) + h_z ΣZ + h_x ΣX on `couplings.len()+1` qubits.
pub fn xxz_chain(couplings: &[f64], delta_z: f64, hz: f64, hx: f64) -> Hermitian {
    let n = couplings.len() + 1;
    let d = 1usize << n;
    let mut h = CMat::zeros(d, d);
    for (i, j) in couplings.iter().enumerate() {
        for (k, w) in [(1usize, 1.0), (2, 1.0), (3, delta_z)] {
            h += site_op(&pauli(k), i, n) * site_op(&pauli(k), i + 1, n) * c(j * w, 0.0);
        }
    }
    for i in 0..n {
        h += site_op(&pauli(3), i, n) * c(hz, 0.0) + site_op(&pauli(1), i, n) * c(hx, 0.0);
    }
    Hermitian::new(h).expect("sum of Pauli products is Hermitian")
}

// ---------------------------------------------------------------- OSD

#[derive(Debug, Clone)]
pub struct OSDConfig {
    pub dims: (usize, usize),
    pub diag: Hermitian,
    pub initial: PureState,
    pub s: f64,
    pub n_steps: usize,
    pub m_queries: usize,
}

impl OSDConfig {
    /// D = diag(linspace(−1, 1, dA)) and the canonical step for ψ₀.
    pub fn canonical(
        dims: (usize, usize),
        initial: PureState,
        n_steps: usize,
        m_queries: usize,
    ) -> Result<Self, AlgoError> {
        let (da, _) = dims;
        let diag: Vec<f64> = if da == 1 {
            vec![0.0]
        } else {
            (0..da)
                .map(|i| -1.0 + 2.0 * i as f64 / (da - 1) as f64)
                .collect()
        };
        let diag = Hermitian::from_real_diagonal(&diag);
        let s = osd_canonical_step(&initial, dims, &diag)?;
        Ok(OSDConfig {
            dims,
            diag,
            initial,
            s,
            n_steps,
            m_queries,
        })
    }
}

/// 1/(4‖ρ_A‖₂‖D‖₂) for the reduced root state.
pub fn osd_canonical_step(
    psi: &PureState,
    dims: (usize, usize),
    diag: &Hermitian,
) -> Result<f64, AlgoError> {
    let red = partial_trace(&psi.projector(), &[dims.0, dims.1], &[0])?;
    let p = Hermitian::new(linalg::symmetrize(&red))?;
    dbi_canonical_step_size(&p, diag)
}

/// Recursion ψₙ₊₁ = (e^{s[D, Tr_B ψₙ]} ⊗ 𝟙)ψₙ.
pub fn osd_spec(cfg: &OSDConfig) -> Result<RecursionSpec, AlgoError> {
    let (da, db) = cfg.dims;
    if da * db != cfg.initial.dim() {
        return Err(LinalgError::DimMismatch(format!(
            "dA·dB = {} but state has dim {}",
            da * db,
            cfg.initial.dim()
        ))
        .into());
    }
    let map = make_osd_map(&cfg.diag, cfg.s, cfg.dims)?;
    let n = da * db;
    let call = MemoryCallSpec::new(map, 1.0)?;
    let step = RecursionStepSpec::new(vec![identity(n), identity(n)], vec![call])?;
    let root = DensityMatrix::new(cfg.initial.projector(), vec![da, db])?;
    Ok(RecursionSpec::new(vec![step], root, None)?)
}

/// Reduced states on A along a trajectory.
pub fn reduced_states(
    rec: &TrajectoryRecord,
    dims: (usize, usize),
) -> Result<Vec<CMat>, AlgoError> {
    rec.steps
        .iter()
        .map(|s| Ok(partial_trace(s.state.matrix(), &[dims.0, dims.1], &[0])?))
        .collect()
}

/// Runs the QDP recursion and reads the Schmidt coefficients off the
/// diagonal of the final reduced state, ordered by decreasing μ.
pub fn osd_run(cfg: &OSDConfig) -> Result<(TrajectoryRecord, Vec<f64>), AlgoError> {
    let spec = osd_spec(cfg)?;
    let rec = run_qdp(&spec, cfg.n_steps, cfg.m_queries, None)?;
    let red = partial_trace(rec.final_state().matrix(), &[cfg.dims.0, cfg.dims.1], &[0])?;
    let mut idx: Vec<usize> = (0..cfg.dims.0).collect();
    idx.sort_by(|&a, &b| {
        cfg.diag.matrix()[(b, b)]
            .re
            .total_cmp(&cfg.diag.matrix()[(a, a)].re)
    });
    let estimate = idx.iter().map(|&i| red[(i, i)].re).collect();
    Ok((rec, estimate))
}

/// Eigenvalues of Tr_B|ψ⟩⟨ψ|, non-increasing.
pub fn schmidt_oracle(psi: &PureState, dims: (usize, usize)) -> Result<Vec<f64>, AlgoError> {
    if dims.0 * dims.1 != psi.dim() {
        return Err(LinalgError::DimMismatch(format!(
            "dims {:?} for state of dim {}",
            dims,
            psi.dim()
        ))
        .into());
    }
    let red = partial_trace(&psi.projector(), &[dims.0, dims.1], &[0])?;
    Ok(spectrum(&Hermitian::new(linalg::symmetrize(&red))?).eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_exact;
    use crate::linalg::{random_density, random_hermitian};

    #[test]
    fn chebyshev_values() {
        for m in [0.2, 1.0 / 3.0, 2.0, 5.0] {
            assert!((chebyshev_t(m, 1.0) - 1.0).abs() < 1e-15);
        }
        assert!((chebyshev_t(3.0, 0.6) - (-0.936)).abs() < 1e-12);
        for x in [0.55, 0.75, 0.99, 1.5] {
            assert!((chebyshev_t(1.0 / 3.0, chebyshev_t(3.0, x)) - x).abs() < 1e-12);
        }
        assert!((chebyshev_t(3.0, 2.0) - (4.0 * 8.0 - 6.0)).abs() < 1e-12);
        assert!((chebyshev_t(3.0, -2.0) + 26.0).abs() < 1e-12);
    }

    #[test]
    fn angle_antisymmetry_and_finiteness() {
        for l in 1..=4 {
            for q in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
                let (a, b) = grover_angles(l, q).unwrap();
                for j in 0..l {
                    assert_eq!(b[l - 1 - j], -a[j]);
                    assert!(a[j].is_finite() && a[j] > 0.0 && a[j] < 2.0 * PI);
                }
            }
        }
        assert!(grover_angles(1, 0.0).is_err());
        assert!(grover_angles(1, 1.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(1.5 * PI) + 0.5 * PI).abs() < 1e-15);
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inner_argument_is_inverse_q() {
        // With 1/q the step reproduces the closed-form distance; evaluating the
        // inner polynomial at q instead leaves the square root undefined.
        let t = chebyshev_t(1.0 / 3.0, 0.6);
        assert!((1.0 - 1.0 / (t * t)).sqrt().is_nan());
        let cfg = GroverConfig::with_distance(2, 0.6, 1, 1, 0).unwrap();
        let expect = 1.0 / (3.0 * (1.0 / 0.6f64).acosh()).cosh();
        let out = grover_step(&cfg.initial, &cfg, expect).unwrap();
        let d = trace_distance(out.density().matrix(), cfg.target.density().matrix()).unwrap();
        assert!((d - expect).abs() < 1e-8);
        assert!((expect - 0.0740).abs() < 1e-3);
    }

    #[test]
    fn step_fixes_the_target() {
        let cfg = GroverConfig::with_distance(3, 0.5, 2, 1, 1).unwrap();
        let out = grover_step(&cfg.target, &cfg, 0.5).unwrap();
        let d = trace_distance(out.density().matrix(), cfg.target.density().matrix()).unwrap();
        assert!(d < 1e-10);
    }

    #[test]
    fn delta_sequence_closed_form_and_recurrence() {
        assert_eq!(grover_delta_sequence(0.6, 1, 0, 0.0).unwrap(), vec![0.6]);
        let v = grover_delta_sequence(0.6, 1, 2, 0.0).unwrap();
        let closed = 1.0 / (9.0 * (1.0 / 0.6f64).acosh()).cosh();
        assert!((v[2] - closed).abs() < 1e-16);
        assert!((v[2] - 1.016e-4).abs() < 1e-6);
        for l in 1..=3 {
            let v = grover_delta_sequence(0.6, l, 3, 0.0).unwrap();
            let mut d = 0.6;
            for k in 1..=3 {
                d = grover_h(l, d);
                assert!((d - v[k]).abs() <= 1e-12 * v[k].max(1e-300) + 1e-300);
                assert!((grover_step_distance(l, v[k], v[k - 1]) - v[k]).abs() <= 1e-9 * v[k]);
            }
        }
    }

    #[test]
    fn delta_sequence_with_eps() {
        let v = grover_delta_sequence(0.6, 1, 2, 0.01).unwrap();
        assert!((v[1] - (grover_h(1, 0.6) + 0.01)).abs() < 1e-15);
        assert!((v[2] - (grover_h(1, v[1]) + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn exact_run_follows_cascade_and_stays_in_plane() {
        let cfg = GroverConfig::with_distance(4, 0.9, 2, 2, 3).unwrap();
        let spec = grover_spec(&cfg, 0.0).unwrap();
        let rec = run_exact(&spec, 2).unwrap();
        let deltas = grover_delta_sequence(0.9, 2, 2, 0.0).unwrap();
        for (st, d) in rec.steps.iter().zip(deltas.iter()) {
            assert!((st.distance_to_target.unwrap() - d).abs() < 1e-8);
            assert!(out_of_subspace_weight(&st.state, &cfg.target, &cfg.initial) < 1e-10);
        }
    }

    #[test]
    fn qdp_run_rejects_too_few_queries() {
        let cfg = GroverConfig::with_distance(2, 0.6, 2, 1, 0).unwrap();
        assert!(grover_qdp_run(&cfg, 3, 0.0, None).is_err());
    }

    #[test]
    fn qdp_run_within_bound() {
        let cfg = GroverConfig::with_distance(2, 0.6, 1, 2, 0).unwrap();
        let rec = grover_qdp_run(&cfg, 128, 0.0, None).unwrap();
        let d = rec.final_step().distance_to_target.unwrap();
        let exact = grover_delta_sequence(0.6, 1, 2, 0.0).unwrap()[2];
        assert!((d - exact).abs() < 2e-2, "{} vs {}", d, exact);
    }

    #[test]
    fn h_is_monotone_and_convex_on_a_grid() {
        for l in 1..=3 {
            let xs: Vec<f64> = (1..200).map(|k| k as f64 / 200.0).collect();
            for w in xs.windows(3) {
                let (a, b, cc) = (grover_h(l, w[0]), grover_h(l, w[1]), grover_h(l, w[2]));
                assert!(b >= a && cc >= b);
                assert!(b <= 0.5 * (a + cc) + 1e-15);
            }
        }
    }

    #[test]
    fn mixed_reflection_identity() {
        let pure = random_pure(3, 1).density();
        assert!(mixed_reflection_identity_check(&pure, 0.7).unwrap() < 1e-10);
        let v0 = random_pure(3, 2);
        let mut v1 = random_pure(3, 3).amplitudes().clone();
        v1 -= v0.amplitudes() * v0.amplitudes().dotc(&v1);
        let v1 = v1.unscale(v1.norm());
        let mix = |x: f64| {
            let m = v0.projector() * c(1.0 - x, 0.0) + &v1 * v1.adjoint() * c(x, 0.0);
            DensityMatrix::new(linalg::symmetrize(&m), vec![3]).unwrap()
        };
        assert!(mixed_reflection_identity_check(&mix(0.1), PI / 2.0).unwrap() < 1e-10);
        assert!(mixed_reflection_identity_check(&mix(0.5), 1.3).unwrap() < 1e-10);
        assert!(mixed_reflection_identity_check(&random_density(3, 4), 0.5).is_err());
    }

    #[test]
    fn dbi_fixed_points_and_errors() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let p = Hermitian::from_real_diagonal(&[0.3, 0.1, 0.6]);
        let out = dbi_step(&p, &d, 0.2).unwrap();
        assert!((out.matrix() - p.matrix()).norm() < 1e-14);
        assert!(dbi_step(&p, &Hermitian::from_real_diagonal(&[1.0, 1.0, 2.0]), 0.1).is_err());
        assert_eq!(dbi_cost(&d, &d), 0.0);
    }

    #[test]
    fn dbi_two_level_orders_largest_weight_on_largest_mu() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0]);
        let u = linalg::random_unitary(2, 5);
        let p = Hermitian::new(linalg::symmetrize(
            &(&u * Hermitian::from_real_diagonal(&[0.7, 0.3]).matrix() * u.adjoint()),
        ))
        .unwrap();
        let s = dbi_canonical_step_size(&p, &d).unwrap();
        let run = dbi_run(&p, &d, s, 400).unwrap();
        let last = run.last().unwrap().matrix();
        assert!(offdiag_norm(last) < 1e-8);
        assert!((last[(0, 0)].re - 0.3).abs() < 1e-8);
        assert!((last[(1, 1)].re - 0.7).abs() < 1e-8);
    }

    #[test]
    fn dbi_offdiagonal_suppression_factor() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0]);
        let eps = 1e-4;
        let m = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(eps, 0.0), c(eps, 0.0), c(0.8, 0.0)]);
        let p = Hermitian::new(m).unwrap();
        let s = dbi_canonical_step_size(&p, &d).unwrap();
        let out = dbi_step(&p, &d, s).unwrap();
        let ratio = out.matrix()[(0, 1)].re / eps;
        let lam = spectrum(&p).eigenvalues;
        let predicted = 1.0 - (lam[1] - lam[0]) * (0.0 - 1.0) * s;
        assert!(
            (ratio - predicted).abs() < 1e-6,
            "{} vs {}",
            ratio,
            predicted
        );
    }

    #[test]
    fn dbi_canonical_step_values() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0]);
        let p = random_pure(2, 1);
        let p = Hermitian::new(p.projector()).unwrap();
        assert!((dbi_canonical_step_size(&p, &d).unwrap() - 0.25).abs() < 1e-12);
        let d10 = Hermitian::from_real_diagonal(&[0.0, 10.0]);
        assert!((dbi_canonical_step_size(&p, &d10).unwrap() - 0.025).abs() < 1e-12);
        let zero = Hermitian::from_real_diagonal(&[0.0, 0.0]);
        assert!(dbi_canonical_step_size(&zero, &d).is_err());
    }

    #[test]
    fn dbi_cost_decreases_on_random_run() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0]);
        let p = random_hermitian(4, 8);
        let s = dbi_canonical_step_size(&p, &d).unwrap();
        let run = dbi_run(&p, &d, s, 20).unwrap();
        for w in run.windows(2) {
            assert!(dbi_cost(&w[1], &d) <= dbi_cost(&w[0], &d) + 1e-9);
        }
    }

    #[test]
    fn dbi_encoding_is_full_rank() {
        let p = random_hermitian(4, 9);
        let (rho, lambda) = dbi_encode(&p).unwrap();
        assert!(rho.spectrum().min() > 0.0);
        assert!(lambda > -spectrum(&p).min());
    }

    #[test]
    fn dbi_config_validation() {
        let p = random_hermitian(3, 1);
        let dec = Hermitian::from_real_diagonal(&[2.0, 1.0, 0.0]);
        assert!(DBIConfig::new(dec, p.clone(), StepSchedule::Canonical).is_err());
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0]);
        assert!(DBIConfig::new(d, p, StepSchedule::Canonical).is_err());
    }

    #[test]
    fn dbi_encoded_recursion_tracks_matrix_iteration() {
        let d = Hermitian::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let cfg = DBIConfig::new(d, random_hermitian(3, 12), StepSchedule::Canonical).unwrap();
        let direct = cfg.run_exact(6).unwrap();
        let (spec, enc) = cfg.recursion().unwrap();
        let rec = run_exact(&spec, 6).unwrap();
        for (p, st) in direct.iter().zip(&rec.steps) {
            assert!((enc.decode(&st.state).matrix() - p.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn grover_qdp_with_imr_keeps_mixedness_small() {
        let eps = 0.05;
        let cfg = GroverConfig::with_distance(2, 0.6, 1, 2, 0).unwrap();
        let imr = IMRConfig {
            reduction_factor: 16.0,
            copies_out: 1000,
            failure_threshold: 0.01,
        };
        let rec = grover_qdp_run(&cfg, 64, eps, Some(&imr)).unwrap();
        for st in &rec.steps {
            assert!(st.mixedness <= eps / (2.0 * PI), "{}", st.mixedness);
        }
        assert!(rec.final_step().ledger.imr_copies > 0);
    }

    #[test]
    fn qite_ground_state_is_stationary_when_exact() {
        let h = xxz_chain(&[0.25, 1.8], 1.0, 0.1, 0.0);
        let (_, _, g) = qite_shift(&h).unwrap();
        let cfg = QITEConfig {
            hamiltonian: h,
            initial: g.clone(),
            s: 0.02,
        };
        let (spec, _) = qite_spec(&cfg).unwrap();
        let rec = run_exact(&spec, 3).unwrap();
        assert!(ground_infidelity(rec.final_state(), &g) < 1e-10);
    }

    #[test]
    fn qite_two_level_closed_form() {
        let h = Hermitian::from_real_diagonal(&[0.0, 1.0]);
        let s = 0.4;
        let mut psi =
            PureState::normalized(CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]), vec![2]).unwrap();
        let mut phi = PI / 4.0;
        for _ in 0..15 {
            psi = qite_step(&psi, &h, s).unwrap();
            phi -= 0.5 * s * (2.0 * phi).sin();
            assert!((qite_energy(&psi, &h) - phi.sin().powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn qite_eigenvector_is_fixed() {
        let h = xxz_chain(&[1.0, 0.7], 1.0, 0.3, 0.0);
        let g = spectrum(&h).eigenvectors.column(3).into_owned();
        let psi = PureState::normalized(g, vec![8]).unwrap();
        let out = qite_step(&psi, &h, 0.2).unwrap();
        assert!(out.overlap(&psi).norm() > 1.0 - 1e-12);
    }

    #[test]
    fn qite_energy_tracks_dbi_cost() {
        let h = xxz_chain(&[1.0, 0.5], 0.8, 0.2, 0.1);
        let d = Hermitian::new(h.matrix() * c(-1.0, 0.0)).unwrap();
        let psi0 = random_pure(8, 2);
        let s = qite_canonical_step(&h).unwrap();
        let mut psi = psi0;
        let trh2 = (h.matrix() * h.matrix()).trace().re;
        for _ in 0..5 {
            let p = Hermitian::new(psi.projector()).unwrap();
            let f = 1.0 + trh2 + 2.0 * qite_energy(&psi, &h);
            assert!((dbi_cost(&p, &d) - f).abs() < 1e-10);
            psi = qite_step(&psi, &h, s).unwrap();
        }
    }

    #[test]
    fn qite_ground_state_drift_shrinks_with_m() {
        let h = xxz_chain(&[0.25, 1.8], 1.0, 0.1, 0.0);
        let (_, _, g) = qite_shift(&h).unwrap();
        let cfg = QITEConfig {
            hamiltonian: h,
            initial: g.clone(),
            s: 0.02,
        };
        // The exact step is the identity here; the query error still decays as 1/m.
        let a = ground_infidelity(qite_qdp_run(&cfg, 2, 16).unwrap().final_state(), &g);
        let b = ground_infidelity(qite_qdp_run(&cfg, 2, 64).unwrap().final_state(), &g);
        assert!(a > 3.0 * b, "{} {}", a, b);
    }

    #[test]
    fn xxz_chain_is_hermitian_with_expected_trace() {
        let h = xxz_chain(&[1.0, 1.0], 1.0, 0.5, 0.3);
        assert_eq!(h.dim(), 8);
        assert!(h.matrix().trace().norm() < 1e-12);
    }

    #[test]
    fn schmidt_oracle_cases() {
        let prod = PureState::basis(4, 0);
        let v = schmidt_oracle(&prod, (2, 2)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        let bell = PureState::normalized(
            CVec::from_vec(vec![c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]),
            vec![2, 2],
        )
        .unwrap();
        let v = schmidt_oracle(&bell, (2, 2)).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
        let amps = CVec::from_vec(vec![
            c(0.9f64.sqrt(), 0.),
            c(0., 0.),
            c(0., 0.),
            c(0.1f64.sqrt(), 0.),
        ]);
        let v = schmidt_oracle(&PureState::new(amps, vec![2, 2]).unwrap(), (2, 2)).unwrap();
        assert!((v[0] - 0.9).abs() < 1e-12 && (v[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn osd_aligned_state_is_stationary() {
        let amps = CVec::from_vec(vec![
            c(0.1f64.sqrt(), 0.),
            c(0., 0.),
            c(0., 0.),
            c(0.9f64.sqrt(), 0.),
        ]);
        let psi = PureState::new(amps, vec![2, 2]).unwrap();
        let cfg = OSDConfig::canonical((2, 2), psi.clone(), 5, 16).unwrap();
        let (_, est) = osd_run(&cfg).unwrap();
        let oracle = schmidt_oracle(&psi, (2, 2)).unwrap();
        for (a, b) in est.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
