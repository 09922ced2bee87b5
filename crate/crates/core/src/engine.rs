//! Executes N-step recursions ρₙ₊₁ = U(ρₙ)ρₙU(ρₙ)† under four strategies and
//! keeps the depth/width books.
//!
//! Ledger conventions: `depth` counts state-dependent operations only
//! (memory-usage queries, root memory-calls after unfolding, IMR rounds);
//! `static_depth` counts static unitaries separately. `width` is the number of
//! root-state copies consumed in parallel.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{
    apply_superoperator, map_apply, ChannelError, GeneratorEigen, HermitianPreservingMap, MapKind,
    MemoryCallSpec, QueryUnitary,
};
use crate::imr::{imr_subroutine, IMRConfig, ImrError};
use crate::linalg::{
    self, exp_from_spectrum, identity, kron, partial_trace, trace_distance, CMat, DensityMatrix,
    Hermitian, LinalgError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Imr(#[from] ImrError),
    #[error("invalid recursion spec: {0}")]
    InvalidSpec(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
}

/// V_L e^{i𝒩_L(ρ)} ⋯ V₁ e^{i𝒩₁(ρ)} V₀.
#[derive(Debug, Clone)]
pub struct RecursionStepSpec {
    pub static_unitaries: Vec<CMat>,
    pub memory_calls: Vec<MemoryCallSpec>,
}

impl RecursionStepSpec {
    pub fn new(
        static_unitaries: Vec<CMat>,
        memory_calls: Vec<MemoryCallSpec>,
    ) -> Result<Self, EngineError> {
        if static_unitaries.len() != memory_calls.len() + 1 {
            return Err(EngineError::InvalidSpec(format!(
                "{} static unitaries for {} memory-calls",
                static_unitaries.len(),
                memory_calls.len()
            )));
        }
        let d = static_unitaries[0].nrows();
        for (i, v) in static_unitaries.iter().enumerate() {
            if v.nrows() != d || v.ncols() != d {
                return Err(EngineError::InvalidSpec(format!(
                    "V{} has shape {:?}, expected {}x{}",
                    i,
                    v.shape(),
                    d,
                    d
                )));
            }
            let dev = (v.adjoint() * v - identity(d)).norm();
            if dev > 1e-9 {
                return Err(EngineError::InvalidSpec(format!(
                    "V{} is not unitary (deviation {:.2e})",
                    i, dev
                )));
            }
        }
        for (i, call) in memory_calls.iter().enumerate() {
            if call.map.d_out() != d {
                return Err(EngineError::InvalidSpec(format!(
                    "memory-call {} acts on dim {}, step on {}",
                    i,
                    call.map.d_out(),
                    d
                )));
            }
            let aux = call.auxiliary.as_ref().map(|a| a.dim()).unwrap_or(1);
            if call.map.d_in() != d * aux {
                return Err(EngineError::InvalidSpec(format!(
                    "memory-call {} reads dim {}, instruction has {}",
                    i,
                    call.map.d_in(),
                    d * aux
                )));
            }
        }
        Ok(RecursionStepSpec {
            static_unitaries,
            memory_calls,
        })
    }

    pub fn dim(&self) -> usize {
        self.static_unitaries[0].nrows()
    }

    pub fn n_calls(&self) -> usize {
        self.memory_calls.len()
    }

    /// U(ρ) with every memory-call instructed by `rho`.
    pub fn unitary(&self, rho: &DensityMatrix) -> Result<CMat, EngineError> {
        let mut u = self.static_unitaries[0].clone();
        for (call, v) in self
            .memory_calls
            .iter()
            .zip(self.static_unitaries.iter().skip(1))
        {
            let cu = call.unitary(&call.instruction_for(rho))?;
            u = v * cu * u;
        }
        Ok(u)
    }
}

/// A recursion: step n uses `steps[min(n, steps.len()-1)]`, so a single
/// entry describes a stationary recursion.
#[derive(Debug, Clone)]
pub struct RecursionSpec {
    pub steps: Vec<RecursionStepSpec>,
    pub root: DensityMatrix,
    pub target: Option<DensityMatrix>,
}

impl RecursionSpec {
    pub fn new(
        steps: Vec<RecursionStepSpec>,
        root: DensityMatrix,
        target: Option<DensityMatrix>,
    ) -> Result<Self, EngineError> {
        if steps.is_empty() {
            return Err(EngineError::InvalidSpec(
                "recursion needs at least one step description".into(),
            ));
        }
        for (i, s) in steps.iter().enumerate() {
            if s.dim() != root.dim() {
                return Err(EngineError::InvalidSpec(format!(
                    "step {} acts on dim {}, root has {}",
                    i,
                    s.dim(),
                    root.dim()
                )));
            }
        }
        if let Some(t) = &target {
            if t.dim() != root.dim() {
                return Err(EngineError::InvalidSpec(format!(
                    "target dim {} vs root {}",
                    t.dim(),
                    root.dim()
                )));
            }
        }
        Ok(RecursionSpec {
            steps,
            root,
            target,
        })
    }

    pub fn step(&self, n: usize) -> &RecursionStepSpec {
        &self.steps[n.min(self.steps.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategyConfig {
    Exact,
    Unfolding {
        #[serde(default = "one")]
        gc_substeps: u32,
    },
    Qdp {
        m: usize,
        #[serde(default)]
        imr: Option<IMRConfig>,
    },
    Hybrid {
        n1: usize,
        n2: usize,
        m: usize,
        #[serde(default)]
        imr: Option<IMRConfig>,
        #[serde(default = "one")]
        gc_substeps: u32,
    },
}

fn one() -> u32 {
    1
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            StrategyConfig::Exact => Ok(()),
            StrategyConfig::Unfolding { gc_substeps }
            | StrategyConfig::Hybrid { gc_substeps, .. }
                if *gc_substeps == 0 =>
            {
                Err(EngineError::InvalidSpec("gc_substeps must be >= 1".into()))
            }
            StrategyConfig::Qdp { m, .. } | StrategyConfig::Hybrid { m, .. } if *m == 0 => {
                Err(EngineError::InvalidSpec("m must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StrategyConfig::Exact => "exact".into(),
            StrategyConfig::Unfolding { gc_substeps } => format!("unfolding(gc={})", gc_substeps),
            StrategyConfig::Qdp { m, imr } => {
                format!("qdp(m={}{})", m, if imr.is_some() { ",imr" } else { "" })
            }
            StrategyConfig::Hybrid { n1, n2, m, imr, .. } => {
                format!(
                    "hybrid(n1={},n2={},m={}{})",
                    n1,
                    n2,
                    m,
                    if imr.is_some() { ",imr" } else { "" }
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub depth: u128,
    pub static_depth: u128,
    pub width: u128,
    pub imr_copies: u128,
    pub success_probability: f64,
}

impl Default for CostLedger {
    fn default() -> Self {
        CostLedger {
            depth: 0,
            static_depth: 0,
            width: 1,
            imr_copies: 0,
            success_probability: 1.0,
        }
    }
}

impl CostLedger {
    pub fn circuit_size(&self) -> u128 {
        self.depth.saturating_mul(self.width)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub state: DensityMatrix,
    pub distance_to_target: Option<f64>,
    pub mixedness: f64,
    pub ledger: CostLedger,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub steps: Vec<TrajectoryStep>,
}

impl TrajectoryRecord {
    pub fn final_step(&self) -> &TrajectoryStep {
        self.steps.last().expect("trajectory always holds the root")
    }

    pub fn final_state(&self) -> &DensityMatrix {
        &self.final_step().state
    }

    pub fn distances(&self) -> Vec<Option<f64>> {
        self.steps.iter().map(|s| s.distance_to_target).collect()
    }

    fn push(
        &mut self,
        spec: &RecursionSpec,
        state: DensityMatrix,
        ledger: CostLedger,
    ) -> Result<(), EngineError> {
        let distance_to_target = match &spec.target {
            Some(t) => Some(trace_distance(state.matrix(), t.matrix())?),
            None => None,
        };
        let mixedness = (1.0 - state.spectrum().max()).max(0.0);
        self.steps.push(TrajectoryStep {
            state,
            distance_to_target,
            mixedness,
            ledger,
        });
        Ok(())
    }
}

/// ρ ↦ U(ρ)ρU(ρ)†.
pub fn exact_step(
    step: &RecursionStepSpec,
    rho: &DensityMatrix,
) -> Result<DensityMatrix, EngineError> {
    Ok(rho.conjugated(&step.unitary(rho)?)?)
}

fn check_isospectral(root: &[f64], state: &DensityMatrix, n: usize) -> Result<(), EngineError> {
    let now = state.spectrum().eigenvalues;
    let dev = root
        .iter()
        .zip(now.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if dev > 1e-8 {
        return Err(EngineError::Numerical(format!(
            "spectrum drifted by {:.3e} at step {}",
            dev, n
        )));
    }
    Ok(())
}

pub fn run_exact(spec: &RecursionSpec, n_steps: usize) -> Result<TrajectoryRecord, EngineError> {
    let root_spec = spec.root.spectrum().eigenvalues;
    let mut rec = TrajectoryRecord::default();
    let mut ledger = CostLedger::default();
    rec.push(spec, spec.root.clone(), ledger)?;
    let mut rho = spec.root.clone();
    for n in 0..n_steps {
        let step = spec.step(n);
        rho = exact_step(step, &rho)?;
        check_isospectral(&root_spec, &rho, n + 1)?;
        ledger.depth += step.n_calls() as u128;
        ledger.static_depth += step.static_unitaries.len() as u128;
        rec.push(spec, rho.clone(), ledger)?;
    }
    Ok(rec)
}

/// (calls in the final step, total calls to the root) for unfolding n steps
/// with L memory-calls per step.
pub fn unfolding_cost(l: u64, n: u32) -> (u128, u128) {
    let base = 2 * l as u128 + 1;
    let l = l as u128;
    if n == 0 {
        return (0, 0);
    }
    let final_step = l * base.pow(n - 1);
    let total = (0..n).map(|k| l * base.pow(k)).sum();
    (final_step, total)
}

/// Caches query unitaries for one run, keyed by map identity and duration.
#[derive(Default)]
struct QueryCache {
    eigen: HashMap<usize, GeneratorEigen>,
    unitaries: HashMap<(usize, u64), QueryUnitary>,
}

impl QueryCache {
    fn unitary(&mut self, map: &Arc<HermitianPreservingMap>, s: f64) -> &QueryUnitary {
        let key = Arc::as_ptr(map) as usize;
        let eig = self
            .eigen
            .entry(key)
            .or_insert_with(|| map.generator().eigen());
        let eig = eig.clone();
        self.unitaries
            .entry((key, s.to_bits()))
            .or_insert_with(|| eig.unitary(s))
    }
}

/// Splits m queries over L calls: ⌊m/L⌋ each, remainder to the last call.
pub fn split_queries(m: usize, l: usize) -> Result<Vec<usize>, EngineError> {
    if l == 0 {
        return Ok(vec![]);
    }
    let base = m / l;
    if base == 0 {
        return Err(EngineError::InvalidSpec(format!(
            "{} queries cannot serve {} memory-calls",
            m, l
        )));
    }
    let mut v = vec![base; l];
    v[l - 1] += m - base * l;
    Ok(v)
}

fn qdp_step(
    step: &RecursionStepSpec,
    sigma: &DensityMatrix,
    m: usize,
    cache: &mut QueryCache,
) -> Result<DensityMatrix, EngineError> {
    let split = split_queries(m, step.n_calls())?;
    let mut w = sigma.conjugated(&step.static_unitaries[0])?;
    for ((call, v), &ml) in step
        .memory_calls
        .iter()
        .zip(step.static_unitaries.iter().skip(1))
        .zip(split.iter())
    {
        let memory = call.instruction_for(sigma);
        let q = cache.unitary(&call.map, -call.duration / ml as f64);
        let sup = q.superoperator(&memory)?;
        w = apply_superoperator(&sup, &w, ml)?;
        if w.clipped() > 1e-6 {
            return Err(EngineError::Numerical(format!(
                "query output lost positivity ({:.3e})",
                w.clipped()
            )));
        }
        w = w.conjugated(v)?;
    }
    Ok(w)
}

#[allow(clippy::too_many_arguments)]
fn run_qdp_from(
    spec: &RecursionSpec,
    rec: &mut TrajectoryRecord,
    start: DensityMatrix,
    first_index: usize,
    n_steps: usize,
    m: usize,
    imr: Option<&IMRConfig>,
    mut ledger: CostLedger,
) -> Result<(), EngineError> {
    let mut cache = QueryCache::default();
    let mut sigma = start;
    for k in 0..n_steps {
        let step = spec.step(first_index + k);
        let mut next = qdp_step(step, &sigma, m, &mut cache)?;
        ledger.width = ledger.width.saturating_mul(m as u128 + 1);
        ledger.depth += m as u128;
        ledger.static_depth += step.static_unitaries.len() as u128;
        if let Some(cfg) = imr {
            let out = imr_subroutine(&next, cfg)?;
            ledger.depth += out.rounds_used as u128;
            ledger.imr_copies = ledger.imr_copies.saturating_add(out.copies_consumed);
            let per_copy = out.copies_consumed.div_ceil(cfg.copies_out as u128);
            ledger.width = ledger.width.saturating_mul(per_copy);
            ledger.success_probability *= out.success_probability;
            next = out.state;
        }
        rec.push(spec, next.clone(), ledger)?;
        sigma = next;
    }
    Ok(())
}

pub fn run_qdp(
    spec: &RecursionSpec,
    n_steps: usize,
    m: usize,
    imr: Option<&IMRConfig>,
) -> Result<TrajectoryRecord, EngineError> {
    if m == 0 {
        return Err(EngineError::InvalidSpec("m must be >= 1".into()));
    }
    let mut rec = TrajectoryRecord::default();
    rec.push(spec, spec.root.clone(), CostLedger::default())?;
    run_qdp_from(
        spec,
        &mut rec,
        spec.root.clone(),
        0,
        n_steps,
        m,
        imr,
        CostLedger::default(),
    )?;
    Ok(rec)
}

fn is_covariant(call: &MemoryCallSpec) -> bool {
    call.auxiliary.is_none() && matches!(call.map.kind(), MapKind::ScaledIdentity { .. })
}

/// Replaces e^{t[A,B]} by g repetitions of the group commutator at t/g.
fn gc_power(a: &CMat, b: &CMat, t: f64, g: u32) -> Result<CMat, EngineError> {
    let d = a.nrows();
    if t == 0.0 {
        return Ok(identity(d));
    }
    let (a, b, t) = if t > 0.0 { (a, b, t) } else { (b, a, -t) };
    let ha = Hermitian::new(linalg::symmetrize(a))?;
    let hb = Hermitian::new(linalg::symmetrize(b))?;
    let sa = linalg::spectrum(&ha);
    let sb = linalg::spectrum(&hb);
    let r = (t / g as f64).sqrt();
    let one = exp_from_spectrum(&sb, r)
        * exp_from_spectrum(&sa, r)
        * exp_from_spectrum(&sb, -r)
        * exp_from_spectrum(&sa, -r);
    let mut u = identity(d);
    for _ in 0..g {
        u = &one * u;
    }
    Ok(u)
}

/// Group-commutator form of a commutator-type memory-call instructed by ρ.
fn gc_call(call: &MemoryCallSpec, rho: &DensityMatrix, g: u32) -> Result<CMat, EngineError> {
    match call.map.kind() {
        MapKind::Commutator { d, s } => gc_power(d, rho.matrix(), call.duration * s, g),
        MapKind::Osd { d_a, s, da, db } => {
            let red = partial_trace(rho.matrix(), &[*da, *db], &[0])?;
            let ib = identity(*db);
            gc_power(&kron(d_a, &ib), &kron(&red, &ib), call.duration * s, g)
        }
        MapKind::LiftedCommutator { .. } => {
            let aux = call.auxiliary.as_ref().ok_or_else(|| {
                EngineError::Unsupported("lifted commutator call without auxiliary state".into())
            })?;
            gc_power(rho.matrix(), aux.matrix(), call.duration, g)
        }
        other => Err(EngineError::Unsupported(format!(
            "map {:?} is neither covariant nor commutator-type",
            kind_name(other)
        ))),
    }
}

fn kind_name(k: &MapKind) -> &'static str {
    match k {
        MapKind::ScaledIdentity { .. } => "scaled-identity",
        MapKind::Commutator { .. } => "commutator",
        MapKind::Osd { .. } => "osd",
        MapKind::LiftedCommutator { .. } => "lifted-commutator",
        MapKind::General => "general",
    }
}

fn run_unfolding_into(
    spec: &RecursionSpec,
    rec: &mut TrajectoryRecord,
    n_steps: usize,
    gc_substeps: u32,
) -> Result<(DensityMatrix, CostLedger), EngineError> {
    if gc_substeps == 0 {
        return Err(EngineError::InvalidSpec("gc_substeps must be >= 1".into()));
    }
    let mut ledger = CostLedger::default();
    rec.push(spec, spec.root.clone(), ledger)?;
    let mut rho = spec.root.clone();
    // ρₙ = W ρ₀ W†, and a call to ρₙ costs `call_cost` calls to the root.
    let mut w = identity(rho.dim());
    let mut call_cost: u128 = 1;
    for n in 0..n_steps {
        let step = spec.step(n);
        let mut u = step.static_unitaries[0].clone();
        let mut state_calls: u128 = 0;
        for (call, v) in step
            .memory_calls
            .iter()
            .zip(step.static_unitaries.iter().skip(1))
        {
            let cu = if is_covariant(call) {
                state_calls += 1;
                let n0 = map_apply(&call.map, spec.root.matrix())?;
                let base = linalg::herm_exp(&Hermitian::new(n0)?, -call.duration);
                &w * base * w.adjoint()
            } else {
                state_calls += 2 * gc_substeps as u128;
                gc_call(call, &rho, gc_substeps)?
            };
            u = v * cu * u;
        }
        rho = rho.conjugated(&u)?;
        w = &u * w;
        ledger.depth = ledger
            .depth
            .saturating_add(state_calls.saturating_mul(call_cost));
        ledger.static_depth += step.static_unitaries.len() as u128;
        call_cost = call_cost.saturating_mul(2 * state_calls + 1);
        rec.push(spec, rho.clone(), ledger)?;
    }
    Ok((rho, ledger))
}

pub fn run_unfolding(
    spec: &RecursionSpec,
    n_steps: usize,
    gc_substeps: u32,
) -> Result<TrajectoryRecord, EngineError> {
    let mut rec = TrajectoryRecord::default();
    run_unfolding_into(spec, &mut rec, n_steps, gc_substeps)?;
    Ok(rec)
}

/// n1 unfolding steps, then n2 QDP steps seeded with the unfolded state.
pub fn run_hybrid(
    spec: &RecursionSpec,
    n1: usize,
    n2: usize,
    m: usize,
    imr: Option<&IMRConfig>,
    gc_substeps: u32,
) -> Result<TrajectoryRecord, EngineError> {
    if m == 0 && n2 > 0 {
        return Err(EngineError::InvalidSpec("m must be >= 1".into()));
    }
    let mut rec = TrajectoryRecord::default();
    let (state, ledger) = run_unfolding_into(spec, &mut rec, n1, gc_substeps)?;
    run_qdp_from(spec, &mut rec, state, n1, n2, m, imr, ledger)?;
    Ok(rec)
}

/// ½‖σₖ₊₁ − U(σₖ)σₖU(σₖ)†‖₁.
pub fn local_accuracy_check(
    sigma_next: &DensityMatrix,
    step: &RecursionStepSpec,
    sigma_curr: &DensityMatrix,
) -> Result<f64, EngineError> {
    let exact = exact_step(step, sigma_curr)?;
    Ok(trace_distance(sigma_next.matrix(), exact.matrix())?)
}

pub fn run(
    spec: &RecursionSpec,
    n_steps: usize,
    strategy: &StrategyConfig,
) -> Result<TrajectoryRecord, EngineError> {
    strategy.validate()?;
    match strategy {
        StrategyConfig::Exact => run_exact(spec, n_steps),
        StrategyConfig::Unfolding { gc_substeps } => run_unfolding(spec, n_steps, *gc_substeps),
        StrategyConfig::Qdp { m, imr } => run_qdp(spec, n_steps, *m, imr.as_ref()),
        StrategyConfig::Hybrid {
            n1,
            n2,
            m,
            imr,
            gc_substeps,
        } => {
            if n1 + n2 != n_steps {
                return Err(EngineError::InvalidSpec(format!(
                    "hybrid n1+n2={} but {} steps requested",
                    n1 + n2,
                    n_steps
                )));
            }
            run_hybrid(spec, *n1, *n2, *m, imr.as_ref(), *gc_substeps)
        }
    }
}

/// Maximum entry of |ρ − σ|, handy for strategy-equivalence checks.
pub fn max_entry_difference(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    (a.matrix() - b.matrix())
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}
