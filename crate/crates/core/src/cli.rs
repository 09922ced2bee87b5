//! Experiment harness behind the `qdpsim` binary: JSON configs in, CSV or
//! JSON trajectories out.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algos::{
    self, dbi_cost, grover_delta_sequence, offdiag_norm, AlgoError, DBIConfig, DbiEncoding,
    GroverConfig, OSDConfig, QITEConfig, StepSchedule,
};
use crate::channels::{
    channel_error_probe, make_commutator_map, make_scaled_identity_map, ChannelError,
};
use crate::engine::{self, unfolding_cost, EngineError, StrategyConfig, TrajectoryRecord};
use crate::imr::ImrError;
use crate::linalg::{
    partial_trace, random_density, random_hermitian, random_pure, Hermitian, LinalgError, PureState,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "QDPSIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Imr(ImrError::Infeasible(_)) | EngineError::Imr(ImrError::TooMixed(_)) => {
                CliError::Infeasible(e.to_string())
            }
            EngineError::Imr(ImrError::InvalidConfig(_))
            | EngineError::InvalidSpec(_)
            | EngineError::Unsupported(_) => CliError::Config(e.to_string()),
            EngineError::Channel(ChannelError::InvalidArgument(_)) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        match e {
            AlgoError::Engine(inner) => inner.into(),
            AlgoError::InvalidArgument(_) | AlgoError::Channel(_) => {
                CliError::Config(e.to_string())
            }
            AlgoError::Linalg(LinalgError::DimMismatch(_)) => CliError::Config(e.to_string()),
            AlgoError::Linalg(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::InvalidArgument(_) | ChannelError::DegenerateDiagonal => {
                CliError::Config(e.to_string())
            }
            ChannelError::Linalg(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Grover,
    Dbi,
    Qite,
    Osd,
    ChannelError,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub strategy: Option<StrategyConfig>,
    /// Used by `compare` only.
    #[serde(default)]
    pub strategies: Vec<StrategyConfig>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "version: expected {}, got {}",
                SCHEMA_VERSION, cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        let v = if self.params.is_null() {
            serde_json::json!({})
        } else {
            self.params.clone()
        };
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("params: {}", e)))
    }

    fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(format!(
                "seed: required for the {:?} scenario",
                self.scenario
            ))
        })
    }

    fn strategy_or_exact(&self) -> StrategyConfig {
        self.strategy.clone().unwrap_or(StrategyConfig::Exact)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroverParams {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N")]
    n: usize,
    delta0: f64,
    #[serde(default = "two")]
    dim: usize,
    #[serde(default)]
    eps: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbiParams {
    dim: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct QiteParams {
    #[serde(default = "default_couplings")]
    couplings: Vec<f64>,
    #[serde(default = "one_f")]
    delta_z: f64,
    #[serde(default = "default_hz")]
    hz: f64,
    #[serde(default)]
    hx: f64,
    #[serde(default = "default_initial_index")]
    initial_index: usize,
    #[serde(default = "default_qite_s")]
    s: f64,
    #[serde(rename = "N", default = "ten")]
    n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OsdParams {
    #[serde(rename = "dA")]
    da: usize,
    #[serde(rename = "dB")]
    db: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default)]
    s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelErrorParams {
    #[serde(default = "two")]
    dim: usize,
    #[serde(default = "default_map")]
    map: String,
    s: f64,
    ms: Vec<usize>,
    #[serde(default = "four")]
    samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostParams {
    #[serde(rename = "L")]
    l: u64,
    #[serde(rename = "N")]
    n: u32,
    #[serde(default = "default_m")]
    m: u64,
}

fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn ten() -> usize {
    10
}
fn one_f() -> f64 {
    1.0
}
fn default_couplings() -> Vec<f64> {
    vec![0.25, 1.8]
}
fn default_hz() -> f64 {
    0.1
}
fn default_initial_index() -> usize {
    6
}
fn default_qite_s() -> f64 {
    0.025
}
fn default_map() -> String {
    "dme".into()
}
fn default_m() -> u64 {
    64
}

/// One table cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u128),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{:.16e}", v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool_version: String,
    pub schema_version: u32,
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<BoundCheck>,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig, columns: &[&str]) -> Self {
        RunReport {
            metadata: Metadata {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                schema_version: SCHEMA_VERSION,
                scenario: cfg.scenario,
                seed: cfg.seed,
                config: cfg.clone(),
            },
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx].clone()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing memory buffer"))
            .expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, out: &OutputSpec) -> Result<(), CliError> {
        let text = match out.format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        };
        fs::write(&out.path, text).map_err(|source| CliError::Io {
            path: out.path.clone(),
            source,
        })
    }
}

/// Seed precedence: explicit flag, then the environment variable, then the file.
pub fn resolve_seed(
    file_seed: Option<u64>,
    flag: Option<u64>,
    env: Option<&str>,
) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Some(v) = env {
        let parsed = v.trim().parse::<u64>().map_err(|_| {
            CliError::Config(format!("{}: not an unsigned integer: {:?}", SEED_ENV, v))
        })?;
        return Ok(Some(parsed));
    }
    Ok(file_seed)
}

fn ledger_cells(rec: &TrajectoryRecord, row: &mut Vec<Cell>, k: usize) {
    let l = rec.steps[k].ledger;
    row.push(Cell::Int(l.depth));
    row.push(Cell::Int(l.width));
    row.push(Cell::Float(l.success_probability));
}

fn distance_cell(d: Option<f64>) -> Cell {
    d.map(Cell::Float).unwrap_or(Cell::Empty)
}

fn check_qdp_queries(strategy: &StrategyConfig, l: usize) -> Result<(), CliError> {
    let m = match strategy {
        StrategyConfig::Qdp { m, .. } | StrategyConfig::Hybrid { m, .. } => *m,
        _ => return Ok(()),
    };
    if m < 2 * l {
        return Err(CliError::Config(format!(
            "strategy.m: {} is below 2L = {}",
            m,
            2 * l
        )));
    }
    Ok(())
}

struct Prepared {
    spec: engine::RecursionSpec,
    n_steps: usize,
}

fn prepare(
    cfg: &ExperimentConfig,
    strategy: &StrategyConfig,
) -> Result<(Prepared, Extra), CliError> {
    match cfg.scenario {
        Scenario::Grover => {
            let p: GroverParams = cfg.params()?;
            let seed = if p.dim > 2 {
                cfg.require_seed()?
            } else {
                cfg.seed.unwrap_or(0)
            };
            let g = GroverConfig::with_distance(p.dim, p.delta0, p.l, p.n, seed)?;
            check_qdp_queries(strategy, p.l)?;
            let spec = algos::grover_spec(&g, p.eps)?;
            Ok((Prepared { spec, n_steps: p.n }, Extra::Grover(p, g)))
        }
        Scenario::Dbi => {
            let p: DbiParams = cfg.params()?;
            let seed = cfg.require_seed()?;
            if p.dim < 2 {
                return Err(CliError::Config("params.dim: must be >= 2".into()));
            }
            let diag = p
                .diag
                .clone()
                .unwrap_or_else(|| (0..p.dim).map(|i| i as f64).collect());
            if diag.len() != p.dim {
                return Err(CliError::Config(format!(
                    "params.diag: expected {} entries",
                    p.dim
                )));
            }
            let schedule = match p.s {
                Some(s) => StepSchedule::Fixed(s),
                None => StepSchedule::Canonical,
            };
            let dbi = DBIConfig::new(
                Hermitian::from_real_diagonal(&diag),
                random_hermitian(p.dim, seed),
                schedule,
            )
            .map_err(|e| CliError::Config(format!("params: {}", e)))?;
            let (spec, enc) = dbi.recursion()?;
            Ok((Prepared { spec, n_steps: p.n }, Extra::Dbi(dbi.diag, enc)))
        }
        Scenario::Qite => {
            let p: QiteParams = cfg.params()?;
            if p.couplings.is_empty() || p.couplings.len() > 3 {
                return Err(CliError::Config(
                    "params.couplings: between 1 and 3 bonds supported".into(),
                ));
            }
            let h = algos::xxz_chain(&p.couplings, p.delta_z, p.hz, p.hx);
            if p.initial_index >= h.dim() {
                return Err(CliError::Config(format!(
                    "params.initial_index: must be < {}",
                    h.dim()
                )));
            }
            let q = QITEConfig {
                hamiltonian: h.clone(),
                initial: PureState::basis(h.dim(), p.initial_index),
                s: p.s,
            };
            let (spec, _) = algos::qite_spec(&q)?;
            Ok((Prepared { spec, n_steps: p.n }, Extra::Qite(h)))
        }
        Scenario::Osd => {
            let p: OsdParams = cfg.params()?;
            let seed = cfg.require_seed()?;
            if p.da < 2 || p.db < 1 {
                return Err(CliError::Config(
                    "params.dA: must be >= 2 and dB >= 1".into(),
                ));
            }
            let mut psi = random_pure(p.da * p.db, seed);
            psi = PureState::new(psi.amplitudes().clone(), vec![p.da, p.db])?;
            let m = match strategy {
                StrategyConfig::Qdp { m, .. } | StrategyConfig::Hybrid { m, .. } => *m,
                _ => 1,
            };
            let mut o = OSDConfig::canonical((p.da, p.db), psi, p.n, m)?;
            if let Some(s) = p.s {
                o.s = s;
            }
            let spec = algos::osd_spec(&o)?;
            Ok((Prepared { spec, n_steps: p.n }, Extra::Osd(o)))
        }
        Scenario::ChannelError | Scenario::Cost => Err(CliError::Config(format!(
            "scenario {:?} does not run a recursion",
            cfg.scenario
        ))),
    }
}

enum Extra {
    Grover(GroverParams, GroverConfig),
    Dbi(Hermitian, DbiEncoding),
    Qite(Hermitian),
    Osd(OSDConfig),
}

fn trajectory_report(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let strategy = cfg.strategy_or_exact();
    let (prep, extra) = prepare(cfg, &strategy)?;
    let rec = engine::run(&prep.spec, prep.n_steps, &strategy)?;
    let mut report = match &extra {
        Extra::Grover(..) => RunReport::new(
            cfg,
            &[
                "step",
                "trace_distance",
                "mixedness",
                "depth",
                "width",
                "p_success",
            ],
        ),
        Extra::Dbi(..) => RunReport::new(
            cfg,
            &[
                "step",
                "trace_distance",
                "mixedness",
                "cost",
                "depth",
                "width",
                "p_success",
            ],
        ),
        Extra::Qite(_) => RunReport::new(
            cfg,
            &[
                "step",
                "trace_distance",
                "mixedness",
                "energy",
                "depth",
                "width",
                "p_success",
            ],
        ),
        Extra::Osd(_) => RunReport::new(
            cfg,
            &[
                "step",
                "trace_distance",
                "mixedness",
                "offdiag_norm",
                "depth",
                "width",
                "p_success",
            ],
        ),
    };
    for (k, st) in rec.steps.iter().enumerate() {
        let mut row = vec![
            Cell::Int(k as u128),
            distance_cell(st.distance_to_target),
            Cell::Float(st.mixedness),
        ];
        match &extra {
            Extra::Grover(..) => {}
            Extra::Dbi(d, enc) => row.push(Cell::Float(dbi_cost(&enc.decode(&st.state), d))),
            Extra::Qite(h) => {
                let e = (st.state.matrix() * h.matrix()).trace().re;
                row.push(Cell::Float(e));
            }
            Extra::Osd(o) => {
                let red = partial_trace(st.state.matrix(), &[o.dims.0, o.dims.1], &[0])?;
                row.push(Cell::Float(offdiag_norm(&red)));
            }
        }
        ledger_cells(&rec, &mut row, k);
        report.rows.push(row);
    }
    let last = rec.final_step();
    match &extra {
        Extra::Grover(p, g) => {
            let exact = grover_delta_sequence(g.delta0(), p.l, p.n, 0.0)?[p.n];
            let measured = last.distance_to_target.unwrap_or(f64::NAN);
            if matches!(strategy, StrategyConfig::Exact) {
                report.checks.push(BoundCheck::new(
                    "cascade_deviation",
                    (measured - exact).abs(),
                    1e-8,
                ));
            } else if p.eps > 0.0 {
                let bound = grover_delta_sequence(g.delta0(), p.l, p.n, p.eps)?[p.n]
                    + p.eps / (2.0 * p.l as f64 * std::f64::consts::PI);
                report
                    .checks
                    .push(BoundCheck::new("qdp_distance", measured, bound));
            }
            let leak = algos::out_of_subspace_weight(&last.state, &g.target, &g.initial);
            report
                .checks
                .push(BoundCheck::new("out_of_subspace_weight", leak, 1e-10));
        }
        Extra::Qite(h) => {
            let (_, _, ground) = algos::qite_shift(h)?;
            let first = algos::ground_infidelity(&rec.steps[0].state, &ground);
            let final_ = algos::ground_infidelity(&last.state, &ground);
            report.checks.push(BoundCheck::new(
                "ground_infidelity_reduction",
                final_,
                first / 10.0,
            ));
        }
        Extra::Osd(o) => {
            let oracle = algos::schmidt_oracle(&o.initial, o.dims)?;
            let red = partial_trace(last.state.matrix(), &[o.dims.0, o.dims.1], &[0])?;
            let mut est: Vec<f64> = (0..o.dims.0).map(|i| red[(i, i)].re).collect();
            est.sort_by(|a, b| b.total_cmp(a));
            let worst = est
                .iter()
                .zip(oracle.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            report
                .checks
                .push(BoundCheck::new("schmidt_estimate", worst, 1e-2));
        }
        Extra::Dbi(..) => {}
    }
    Ok(report)
}

fn channel_error_report(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let p: ChannelErrorParams = cfg.params()?;
    let seed = cfg.require_seed()?;
    if p.dim < 2 {
        return Err(CliError::Config("params.dim: must be >= 2".into()));
    }
    let map = match p.map.as_str() {
        "dme" => make_scaled_identity_map(1.0, p.dim),
        "commutator" => {
            let diag: Vec<f64> = (0..p.dim)
                .map(|i| -1.0 + 2.0 * i as f64 / (p.dim - 1) as f64)
                .collect();
            make_commutator_map(&Hermitian::from_real_diagonal(&diag), 1.0)
        }
        other => {
            return Err(CliError::Config(format!(
                "params.map: unknown map {:?}",
                other
            )))
        }
    };
    let map = Arc::new(map);
    let gen = map.generator();
    let memory = random_density(p.dim, seed);
    let mut report = RunReport::new(cfg, &["m", "s", "measured", "bound"]);
    for &m in &p.ms {
        let measured =
            channel_error_probe(&gen, &map, &memory, p.s, m, p.samples, seed.wrapping_add(1))?;
        let bound = 4.0 * gen.op_norm().powi(2) * p.s * p.s / m as f64;
        report.rows.push(vec![
            Cell::Int(m as u128),
            Cell::Float(p.s),
            Cell::Float(measured),
            Cell::Float(bound),
        ]);
        report.checks.push(BoundCheck::new(
            format!("hme_bound_m{}", m),
            measured,
            bound,
        ));
    }
    Ok(report)
}

fn cost_report(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let p: CostParams = cfg.params()?;
    if p.l == 0 {
        return Err(CliError::Config("params.L: must be >= 1".into()));
    }
    let mut report = RunReport::new(
        cfg,
        &[
            "step",
            "unfolding_step_calls",
            "unfolding_total_calls",
            "qdp_depth",
            "qdp_width",
        ],
    );
    for n in 1..=p.n {
        let (step_calls, total) = unfolding_cost(p.l, n);
        let width = (p.m as u128 + 1)
            .checked_pow(n)
            .map(Cell::Int)
            .unwrap_or(Cell::Text("overflow".into()));
        report.rows.push(vec![
            Cell::Int(n as u128),
            Cell::Int(step_calls),
            Cell::Int(total),
            Cell::Int(p.m as u128 * n as u128),
            width,
        ]);
    }
    Ok(report)
}

/// Runs one scenario and writes the configured output file, if any.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let report = match cfg.scenario {
        Scenario::ChannelError => channel_error_report(cfg)?,
        Scenario::Cost => cost_report(cfg)?,
        _ => trajectory_report(cfg)?,
    };
    if let Some(out) = &cfg.output {
        report.write(out)?;
    }
    Ok(report)
}

/// One row per strategy: final distance, depth, width and circuit size.
pub fn compare_strategies(
    cfg: &ExperimentConfig,
    strategies: &[StrategyConfig],
) -> Result<RunReport, CliError> {
    if matches!(cfg.scenario, Scenario::ChannelError | Scenario::Cost) {
        return Err(CliError::Config(format!(
            "scenario {:?} has no strategies to compare",
            cfg.scenario
        )));
    }
    let mut report = RunReport::new(
        cfg,
        &[
            "strategy",
            "final_distance",
            "mixedness",
            "depth",
            "width",
            "circuit_size",
            "p_success",
        ],
    );
    for strategy in strategies {
        let (prep, _) = prepare(cfg, strategy)?;
        let rec = engine::run(&prep.spec, prep.n_steps, strategy)?;
        let last = rec.final_step();
        report.rows.push(vec![
            Cell::Text(strategy.label()),
            distance_cell(last.distance_to_target),
            Cell::Float(last.mixedness),
            Cell::Int(last.ledger.depth),
            Cell::Int(last.ledger.width),
            Cell::Int(last.ledger.circuit_size()),
            Cell::Float(last.ledger.success_probability),
        ]);
    }
    if let Some(out) = &cfg.output {
        report.write(out)?;
    }
    Ok(report)
}
