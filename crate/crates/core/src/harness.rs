//! Experiment configuration, parallel replica orchestration and reports.
//!
//! A run resolves `n` for every lattice size, simulates `R` replicas per
//! size in parallel (results are collected in replica order, so the output
//! does not depend on the thread count), summarizes every registered
//! pairing at every sample time, and evaluates the configured checks
//! against closed-form references.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dual::{self, KPointEstimate};
use crate::engine::{run_replica, ReplicaPlan, ReplicaResult, DEFAULT_TRACE_LIMIT};
use crate::error::{Error, Result};
use crate::initcond::{DensityDescriptor, DensityProfile};
use crate::limits::LimitField;
use crate::observables::ObservableKind;
use crate::regimes::{resolve_regime, ScalingRegime};
use crate::stats::{self, CheckKind, CheckRecord, SummaryStats};
use crate::testfn::{TestFunction, TestFunctionDescriptor};
use crate::torus::TorusGeometry;

/// A single value or a list, e.g. `"L": 128` or `"L": [64, 128]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub phi: String,
}

fn default_z() -> f64 {
    stats::MEAN_Z
}
fn default_band() -> f64 {
    stats::VARIANCE_BAND
}
fn default_reject_z() -> f64 {
    5.0
}
fn default_alt_scale() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}

/// One entry of `"checks"`; `t` restricts the check to one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CheckSpec {
    /// `|mean - limit| <= max(atol, rtol |limit|, z se)`.
    Mean {
        observable: ObservableKind,
        phi: String,
        #[serde(default)]
        atol: f64,
        #[serde(default)]
        rtol: f64,
        #[serde(default = "default_z")]
        z: f64,
        /// Occupied fraction used for the reference instead of the regime's.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// `|mean - limit| >= z se`, typically with an `alpha` override.
    Reject {
        observable: ObservableKind,
        phi: String,
        #[serde(default = "default_reject_z")]
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Net-collision sample variance within `band` of `scale` times the target.
    Variance {
        phi: String,
        #[serde(default = "default_band")]
        band: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Net-collision sample variance at least `z` of its standard errors from `scale` times the target.
    VarianceReject {
        phi: String,
        #[serde(default = "default_alt_scale")]
        scale: f64,
        #[serde(default = "default_reject_z")]
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Skewness and kurtosis z-scores below 4.
    Gaussian {
        observable: ObservableKind,
        phi: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Dynkin martingale mean zero and variance matching the mean `int Gamma_2`.
    Martingale {
        observable: ObservableKind,
        phi: String,
        #[serde(default = "default_z")]
        z: f64,
        #[serde(default = "default_band")]
        band: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// `mean <Lambda> <= d ||phi|| ||rho_0||^2 + z se`.
    NnBound {
        phi: String,
        #[serde(default = "default_z")]
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
}

impl CheckSpec {
    fn target(&self) -> (ObservableKind, &str) {
        match self {
            CheckSpec::Mean { observable, phi, .. }
            | CheckSpec::Reject { observable, phi, .. }
            | CheckSpec::Gaussian { observable, phi, .. }
            | CheckSpec::Martingale { observable, phi, .. } => (*observable, phi),
            CheckSpec::Variance { phi, .. } | CheckSpec::VarianceReject { phi, .. } => {
                (ObservableKind::NetCollision, phi)
            }
            CheckSpec::NnBound { phi, .. } => (ObservableKind::NearestNeighbour, phi),
        }
    }

    fn time(&self) -> Option<f64> {
        match self {
            CheckSpec::Mean { t, .. }
            | CheckSpec::Reject { t, .. }
            | CheckSpec::Variance { t, .. }
            | CheckSpec::VarianceReject { t, .. }
            | CheckSpec::Gaussian { t, .. }
            | CheckSpec::Martingale { t, .. }
            | CheckSpec::NnBound { t, .. } => *t,
        }
    }
}

/// Point sets for the `oracle` subcommand; coordinates in `[0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub points: Vec<Vec<OneOrMany<f64>>>,
    pub times: Vec<f64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_true")]
    pub exact: bool,
}

fn default_paths() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}

/// Raw JSON form; every field optional so validation can report all problems at once.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment_id: Option<String>,
    d: Option<usize>,
    #[serde(rename = "L")]
    side: Option<OneOrMany<usize>>,
    regime: Option<ScalingRegime>,
    rho0: Option<DensityDescriptor>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    sample_times: Option<Vec<f64>>,
    test_functions: Option<BTreeMap<String, TestFunctionDescriptor>>,
    observables: Option<Vec<ObservableSpec>>,
    checks: Option<Vec<CheckSpec>>,
    replicas: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    event_budget: Option<u64>,
    oracle: Option<OracleSpec>,
}

/// Validated, normalized experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub d: usize,
    #[serde(rename = "L")]
    pub sides: Vec<usize>,
    /// Resolved particle scale for each entry of `L`.
    pub n: Vec<usize>,
    pub regime: ScalingRegime,
    pub rho0: DensityDescriptor,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub test_functions: BTreeMap<String, TestFunctionDescriptor>,
    pub observables: Vec<ObservableSpec>,
    pub checks: Vec<CheckSpec>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Per-replica event budget.
    pub event_budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(skip)]
    profile: Option<DensityProfile>,
    #[serde(skip)]
    functions: BTreeMap<String, TestFunction>,
}

impl ExperimentConfig {
    pub fn profile(&self) -> &DensityProfile {
        self.profile.as_ref().expect("validated config carries its profile")
    }

    pub fn test_function(&self, id: &str) -> Option<&TestFunction> {
        self.functions.get(id)
    }

    /// Expected events per replica at lattice side `side` with scale `n`.
    pub fn expected_events(&self, side: usize, n: usize) -> f64 {
        let l2 = (side * side) as f64;
        n as f64 * self.profile().l1_norm() * (2 * self.d) as f64 * l2 * self.horizon
    }

    /// Applies CLI overrides and re-validates the affected invariants.
    pub fn with_overrides(mut self, seed: Option<u64>, replicas: Option<usize>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(r) = replicas {
            if r < 2 && !self.checks.is_empty() {
                return Err(Error::Config(vec![format!(
                    "replicas = {r}: statistical checks need at least 2"
                )]));
            }
            if r == 0 {
                return Err(Error::Config(vec!["replicas must be positive".into()]));
            }
            self.replicas = r;
        }
        if out.is_some() {
            self.output_dir = out;
        }
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `sha256("blob <len>\0" || normalized config)`, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        let body = self.to_json()?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        Ok(hex::encode(h.finalize()))
    }
}

/// Parses and validates a JSON experiment description.
pub fn validate_config(json: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(json).map_err(|e| Error::Config(vec![e.to_string()]))?;
    let mut errs = Vec::new();

    let d = raw.d.unwrap_or(1);
    if d == 0 {
        errs.push("d must be at least 1".to_string());
    }
    let sides = match &raw.side {
        None => {
            errs.push("L required".into());
            Vec::new()
        }
        Some(s) => {
            let v = s.to_vec();
            if v.is_empty() {
                errs.push("L list is empty".into());
            }
            for &l in &v {
                if let Err(e) = TorusGeometry::new(d.max(1), l) {
                    errs.push(format!("L = {l}: {e}"));
                }
            }
            v
        }
    };
    let regime = raw.regime.unwrap_or_else(|| {
        errs.push("regime required".into());
        ScalingRegime::Classic { alpha: 0.5 }
    });
    if let Err(e) = regime.validate() {
        errs.push(e.to_string());
    }
    let rho0_desc = raw.rho0.clone().unwrap_or_else(|| {
        errs.push("rho0 required".into());
        DensityDescriptor { a0: 1.0, terms: vec![] }
    });
    let profile = match DensityProfile::from_descriptor(&rho0_desc, d.max(1)) {
        Ok(p) => Some(p),
        Err(e) => {
            errs.push(format!("rho0: {e}"));
            None
        }
    };
    let horizon = match raw.horizon {
        None => {
            errs.push("T required".into());
            0.0
        }
        Some(t) if !(t >= 0.0 && t.is_finite()) => {
            errs.push(format!("T = {t} must be a finite nonnegative time"));
            0.0
        }
        Some(t) => t,
    };
    let sample_times = raw.sample_times.clone().unwrap_or_else(|| vec![horizon]);
    if sample_times.is_empty() {
        errs.push("sample_times is empty".into());
    }
    for (i, &t) in sample_times.iter().enumerate() {
        if !(t >= 0.0) {
            errs.push(format!("sample time {t} is negative"));
        }
        if t > horizon {
            errs.push(format!("sample time {t} exceeds T = {horizon}"));
        }
        if i > 0 && !(t > sample_times[i - 1]) {
            errs.push(format!(
                "sample times must be strictly increasing ({} then {t})",
                sample_times[i - 1]
            ));
        }
    }

    let mut test_functions = raw.test_functions.clone().unwrap_or_default();
    if test_functions.is_empty() {
        test_functions.insert(
            "one".into(),
            serde_json::from_str(r#"{"kind":"const","c":1.0}"#).expect("static descriptor"),
        );
    }
    let mut functions = BTreeMap::new();
    for (id, desc) in &test_functions {
        match TestFunction::from_descriptor(desc, d.max(1)) {
            Ok(f) => {
                functions.insert(id.clone(), f);
            }
            Err(e) => errs.push(format!("test function `{id}`: {e}")),
        }
    }

    let mut observables = raw.observables.clone().unwrap_or_default();
    let checks = raw.checks.clone().unwrap_or_default();
    for c in &checks {
        let (kind, phi) = c.target();
        if !observables.iter().any(|o| o.kind == kind && o.phi == phi) {
            observables.push(ObservableSpec {
                kind,
                phi: phi.to_string(),
            });
        }
        if let Some(t) = c.time() {
            if !sample_times.contains(&t) {
                errs.push(format!("check time {t} is not a sample time"));
            }
        }
        if let CheckSpec::Martingale { observable, .. } = c {
            if !observable.is_cumulative() {
                errs.push(format!("martingale check needs a cumulative field, got {observable}"));
            }
        }
    }
    for o in &observables {
        match functions.get(&o.phi) {
            None if test_functions.contains_key(&o.phi) => {}
            None => errs.push(format!(
                "observable {} refers to unknown test function `{}`",
                o.kind, o.phi
            )),
            Some(f) => {
                if let Err(e) = o.kind.check_test_function(f) {
                    errs.push(format!("observable {} with `{}`: {e}", o.kind, o.phi));
                }
            }
        }
    }

    let replicas = raw.replicas.unwrap_or(100);
    if replicas == 0 {
        errs.push("replicas must be positive".into());
    } else if replicas < 2 && !checks.is_empty() {
        errs.push(format!("replicas = {replicas}: statistical checks need at least 2"));
    }

    let mut n = Vec::new();
    if let (Some(p), true) = (&profile, errs.is_empty()) {
        for &l in &sides {
            match resolve_regime(&regime, l, d, p) {
                Ok(v) => n.push(v),
                Err(e) => errs.push(format!("L = {l}: {e}")),
            }
        }
    }

    if let Some(o) = &raw.oracle {
        if o.points.is_empty() || o.times.is_empty() {
            errs.push("oracle needs points and times".into());
        }
        for pts in &o.points {
            for p in pts {
                if p.to_vec().len() != d {
                    errs.push(format!("oracle point {:?} does not have {d} coordinates", p.to_vec()));
                }
            }
        }
        for &t in &o.times {
            if !(t >= 0.0) {
                errs.push(format!("oracle time {t} is negative"));
            }
        }
        if o.paths < 2 {
            errs.push("oracle paths must be at least 2".into());
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }

    let mut cfg = ExperimentConfig {
        experiment_id: raw.experiment_id.unwrap_or_else(|| "experiment".into()),
        d,
        sides,
        n,
        regime,
        rho0: rho0_desc,
        horizon,
        sample_times,
        test_functions,
        observables,
        checks,
        replicas,
        seed: raw.seed.unwrap_or(0),
        output_dir: raw.output_dir,
        event_budget: 0,
        oracle: raw.oracle,
        profile,
        functions,
    };
    let expected = cfg
        .sides
        .iter()
        .zip(&cfg.n)
        .map(|(&l, &n)| cfg.expected_events(l, n))
        .fold(0.0, f64::max);
    cfg.event_budget = match raw.event_budget {
        Some(b) => {
            if (b as f64) < expected {
                return Err(Error::Config(vec![format!(
                    "event_budget {b} is below the expected {expected:.0} events per replica"
                )]));
            }
            if expected > 0.8 * b as f64 {
                warn!("expected {expected:.0} events per replica is above 80% of the budget {b}");
            }
            b
        }
        None => (4.0 * expected + 1e6).ceil() as u64,
    };
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_config(&text)
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment_id: String,
    #[serde(rename = "L")]
    pub side: usize,
    pub n: usize,
    pub regime: String,
    pub observable: String,
    pub phi_id: String,
    pub t: f64,
    #[serde(rename = "R")]
    pub replicas: u64,
    pub mean: f64,
    pub var: f64,
    pub stderr: f64,
    pub reference: Option<f64>,
    pub abs_err: Option<f64>,
    pub check: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckVerdict {
    #[serde(rename = "L")]
    pub side: usize,
    pub observable: String,
    pub phi_id: String,
    pub t: f64,
    pub name: String,
    pub record: CheckRecord,
}

/// Per-lattice-size diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    #[serde(rename = "L")]
    pub side: usize,
    pub n: usize,
    pub replicas: usize,
    pub mean_particles: f64,
    pub total_events: u64,
    pub identity_checks: u64,
    pub runtime_secs: f64,
}

/// Summaries at one `(L, observable, phi, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub side: usize,
    pub n: usize,
    pub kind: ObservableKind,
    pub phi_id: String,
    pub t: f64,
    pub values: SummaryStats,
    /// Dynkin martingale `M(t)` and `int_0^t Gamma_2` across replicas.
    pub martingale: Option<(SummaryStats, SummaryStats)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment_id: String,
    pub pass: bool,
    pub content_hash: String,
    pub runtime_secs: f64,
    pub runs: Vec<RunSummary>,
    pub checks: Vec<CheckVerdict>,
    #[serde(skip)]
    pub rows: Vec<ReportRow>,
    #[serde(skip)]
    pub samples: Vec<SampleSummary>,
}

impl Report {
    pub fn verdicts<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckVerdict> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn sample(&self, side: usize, kind: ObservableKind, phi_id: &str, t: f64) -> Option<&SampleSummary> {
        self.samples
            .iter()
            .find(|s| s.side == side && s.kind == kind && s.phi_id == phi_id && s.t == t)
    }
}

/// Replica plan for lattice side `sides[idx]`.
pub fn replica_plan(cfg: &ExperimentConfig, idx: usize, trace: bool) -> Result<ReplicaPlan> {
    let geom = TorusGeometry::new(cfg.d, cfg.sides[idx])?;
    let n = cfg.n[idx];
    Ok(ReplicaPlan {
        parameters: cfg.profile().parameter_field(n, &geom)?,
        geom,
        n,
        sample_times: cfg.sample_times.clone(),
        observables: cfg
            .observables
            .iter()
            .map(|o| (o.kind, cfg.functions[&o.phi].clone()))
            .collect(),
        master_seed: cfg.seed,
        event_budget: Some(cfg.event_budget),
        trace_limit: if trace { DEFAULT_TRACE_LIMIT } else { 0 },
    })
}

/// Runs replicas `0..replicas` in parallel; results come back in id order.
pub fn run_replicas(plan: &ReplicaPlan, replicas: usize) -> Result<Vec<ReplicaResult>> {
    let results: Vec<Result<ReplicaResult>> = (0..replicas as u64)
        .into_par_iter()
        .map(|id| run_replica(plan, id))
        .collect();
    let mut out = Vec::with_capacity(replicas);
    let mut first_err = None;
    for (id, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                log::error!("replica {id} failed: {e}");
                if first_err.is_none() {
                    first_err = Some(Error::Replica {
                        id: id as u64,
                        source: Box::new(e),
                    });
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn summary_of(values: impl Iterator<Item = f64>) -> SummaryStats {
    let mut s = SummaryStats::new();
    for v in values {
        s.push(v);
    }
    s
}

/// Closed-form limit of the mean pairing.
fn limit_reference(
    cfg: &ExperimentConfig,
    kind: ObservableKind,
    phi: &TestFunction,
    t: f64,
    alpha: Option<f64>,
) -> Result<f64> {
    let field = match alpha {
        Some(a) => LimitField::new(cfg.profile(), a),
        None => LimitField::for_regime(cfg.profile(), &cfg.regime),
    };
    match kind {
        ObservableKind::Empirical => field.pair_rho(phi, t),
        ObservableKind::UniFlux => field.pair_uniflux(phi, t),
        ObservableKind::UniCollision => field.pair_unicol(phi, t),
        ObservableKind::NetFlux => field.pair_netflux(phi, t),
        ObservableKind::NetCollision => {
            phi.require_shape(crate::testfn::TableShape::Axis)?;
            Ok(0.0)
        }
        ObservableKind::NearestNeighbour => field.pair_nn(phi, t),
    }
}

/// Runs every lattice size, evaluates all checks and assembles the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment_traced(cfg, None)
}

/// As [`run_experiment`]; also writes replica 0's event trace per lattice size into `trace_dir`.
pub fn run_experiment_traced(cfg: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<Report> {
    let started = Instant::now();
    let mut runs = Vec::new();
    let mut samples = Vec::new();
    for idx in 0..cfg.sides.len() {
        let t0 = Instant::now();
        let side = cfg.sides[idx];
        let n = cfg.n[idx];
        let plan = replica_plan(cfg, idx, trace_dir.is_some())?;
        info!(
            "L = {side}, n = {n}: {} replicas, ~{:.2e} events each",
            cfg.replicas,
            cfg.expected_events(side, n)
        );
        let results = run_replicas(&plan, cfg.replicas)?;
        if let (Some(dir), Some(first)) = (trace_dir, results.first()) {
            if let Some(tr) = &first.trace {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join(format!("trace_L{side}_replica0.bin"));
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                tr.write_to(std::io::BufWriter::new(file))
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
        runs.push(RunSummary {
            side,
            n,
            replicas: results.len(),
            mean_particles: results.iter().map(|r| r.particle_count as f64).sum::<f64>() / results.len() as f64,
            total_events: results.iter().map(|r| r.events).sum(),
            identity_checks: results.iter().map(|r| r.identity_checks).sum(),
            runtime_secs: t0.elapsed().as_secs_f64(),
        });
        for (j, (kind, _)) in plan.observables.iter().enumerate() {
            for (i, &t) in cfg.sample_times.iter().enumerate() {
                let values = summary_of(results.iter().map(|r| r.samples[i].values[j]));
                let martingale = kind.is_cumulative().then(|| {
                    let dyn_at = |r: &ReplicaResult| r.samples[i].dynkin[j].expect("cumulative field is tracked");
                    (
                        summary_of(results.iter().map(|r| dyn_at(r).martingale)),
                        summary_of(results.iter().map(|r| dyn_at(r).qv_integral)),
                    )
                });
                samples.push(SampleSummary {
                    side,
                    n,
                    kind: *kind,
                    phi_id: cfg.observables[j].phi.clone(),
                    t,
                    values,
                    martingale,
                });
            }
        }
    }

    let mut checks = Vec::new();
    for spec in &cfg.checks {
        let (kind, phi_id) = spec.target();
        let phi = &cfg.functions[phi_id];
        for s in samples.iter().filter(|s| s.kind == kind && s.phi_id == phi_id) {
            if spec.time().is_some_and(|t| t != s.t) {
                continue;
            }
            let field = LimitField::for_regime(cfg.profile(), &cfg.regime);
            let verdict = |name: &str, record: CheckRecord| CheckVerdict {
                side: s.side,
                observable: kind.name().into(),
                phi_id: phi_id.into(),
                t: s.t,
                name: name.into(),
                record,
            };
            match spec {
                CheckSpec::Mean {
                    atol, rtol, z, alpha, ..
                } => {
                    let reference = limit_reference(cfg, kind, phi, s.t, *alpha)?;
                    let tol = atol.max(rtol * reference.abs());
                    checks.push(verdict(
                        "mean",
                        stats::compare_to_reference(&s.values, reference, tol, *z),
                    ));
                }
                CheckSpec::Reject { z, alpha, .. } => {
                    let reference = limit_reference(cfg, kind, phi, s.t, *alpha)?;
                    checks.push(verdict("reject", stats::reject_reference(&s.values, reference, *z)));
                }
                CheckSpec::Variance { band, scale, .. } => {
                    let target = scale * field.netcol_variance_target(phi, s.t)?;
                    checks.push(verdict("variance", stats::check_variance(&s.values, target, *band)));
                }
                CheckSpec::VarianceReject { scale, z, .. } => {
                    let alt = scale * field.netcol_variance_target(phi, s.t)?;
                    checks.push(verdict("variance_reject", stats::reject_variance(&s.values, alt, *z)));
                }
                CheckSpec::Gaussian { .. } => {
                    let record = match stats::gaussian_record(&s.values) {
                        Ok(r) => r,
                        Err(e @ (Error::DegenerateSample | Error::InsufficientSamples { .. })) => {
                            warn!("gaussianity of {kind} `{phi_id}` at t = {}: {e}", s.t);
                            CheckRecord {
                                kind: CheckKind::Gaussian,
                                estimate: f64::NAN,
                                reference: 0.0,
                                stderr: f64::NAN,
                                margin: f64::NAN,
                                tolerance: stats::SHAPE_Z,
                                pass: false,
                            }
                        }
                        Err(e) => return Err(e),
                    };
                    checks.push(verdict("gaussian", record));
                }
                CheckSpec::Martingale { z, band, .. } => {
                    let (m, qv) = s.martingale.as_ref().expect("validated: cumulative");
                    checks.push(verdict("martingale_mean", stats::compare_to_reference(m, 0.0, 0.0, *z)));
                    checks.push(verdict("martingale_qv", stats::check_variance(m, qv.mean(), *band)));
                }
                CheckSpec::NnBound { z, .. } => {
                    let bound = cfg.d as f64 * phi.sup_norm() * cfg.profile().sup_bound().powi(2);
                    checks.push(verdict("nn_bound", stats::check_upper_bound(&s.values, bound, *z)));
                }
            }
        }
    }

    let rows = build_rows(cfg, &samples, &checks)?;
    let pass = checks.iter().all(|c| c.record.pass);
    Ok(Report {
        experiment_id: cfg.experiment_id.clone(),
        pass,
        content_hash: cfg.content_hash()?,
        runtime_secs: started.elapsed().as_secs_f64(),
        runs,
        checks,
        rows,
        samples,
    })
}

fn build_rows(cfg: &ExperimentConfig, samples: &[SampleSummary], checks: &[CheckVerdict]) -> Result<Vec<ReportRow>> {
    let regime = cfg.regime.label();
    let mut rows = Vec::new();
    for s in samples {
        let base = |obs: String, stats: &SummaryStats| ReportRow {
            experiment_id: cfg.experiment_id.clone(),
            side: s.side,
            n: s.n,
            regime: regime.clone(),
            observable: obs,
            phi_id: s.phi_id.clone(),
            t: s.t,
            replicas: stats.count(),
            mean: stats.mean(),
            var: stats.var(),
            stderr: stats.stderr(),
            reference: None,
            abs_err: None,
            check: String::new(),
            status: String::new(),
        };
        let mine: Vec<&CheckVerdict> = checks
            .iter()
            .filter(|c| c.side == s.side && c.observable == s.kind.name() && c.phi_id == s.phi_id && c.t == s.t)
            .collect();
        if mine.is_empty() {
            let mut row = base(s.kind.name().into(), &s.values);
            if let Ok(r) = limit_reference(cfg, s.kind, &cfg.functions[&s.phi_id], s.t, None) {
                row.reference = Some(r);
                row.abs_err = Some((s.values.mean() - r).abs());
            }
            rows.push(row);
        }
        for c in mine {
            let (obs, st) = match (c.name.starts_with("martingale"), &s.martingale) {
                (true, Some((m, _))) => (format!("{}:martingale", s.kind.name()), m),
                _ => (s.kind.name().to_string(), &s.values),
            };
            let mut row = base(obs, st);
            row.reference = Some(c.record.reference);
            row.abs_err = Some(c.record.margin.abs());
            row.check = c.name.clone();
            row.status = if c.record.pass { "pass".into() } else { "fail".into() };
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| {
        (a.side, &a.observable, &a.phi_id, &a.check)
            .cmp(&(b.side, &b.observable, &b.phi_id, &b.check))
            .then(a.t.total_cmp(&b.t))
    });
    Ok(rows)
}

/// Writes `report.csv`, `summary.json` and `config.normalized.json` into `dir`.
pub fn write_report(report: &Report, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let summary = serde_json::json!({
        "experiment_id": report.experiment_id,
        "status": if report.pass { "pass" } else { "fail" },
        "content_hash": report.content_hash,
        "runtime_secs": report.runtime_secs,
        "runs": report.runs,
        "checks": report.checks,
        "config": cfg,
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("config.normalized.json");
    std::fs::write(&path, cfg.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// One line of `oracle` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLine {
    #[serde(rename = "L")]
    pub side: usize,
    pub n: usize,
    pub x: Vec<Vec<f64>>,
    pub t: f64,
    pub estimate: f64,
    pub exact: Option<f64>,
    pub stderr: f64,
}

/// Nearest lattice site to a point of `[0,1)^d`.
fn nearest_site(geom: &TorusGeometry, point: &[f64]) -> usize {
    let side = geom.side() as f64;
    let coords: Vec<usize> = point
        .iter()
        .map(|&x| ((x * side).round() as i64).rem_euclid(geom.side() as i64) as usize)
        .collect();
    geom.site(&coords)
}

/// Dual estimates (and exact values when requested) for the configured point sets.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<Vec<OracleLine>> {
    let spec = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["oracle section required".into()]))?;
    let mut out = Vec::new();
    for (idx, &side) in cfg.sides.iter().enumerate() {
        let geom = TorusGeometry::new(cfg.d, side)?;
        let n = cfg.n[idx];
        let params = cfg.profile().parameter_field(n, &geom)?;
        for pts in &spec.points {
            let coords: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            let sites: Vec<usize> = coords.iter().map(|p| nearest_site(&geom, p)).collect();
            let snapped: Vec<Vec<f64>> = sites.iter().map(|&s| geom.point(s)).collect();
            for &t in &spec.times {
                let KPointEstimate { estimate, stderr, .. } =
                    dual::estimate_kpoint(&sites, t, &params, &geom, spec.paths, cfg.seed)?;
                let exact = if spec.exact {
                    Some(dual::exact_kpoint(&sites, t, &params, &geom)?)
                } else {
                    None
                };
                out.push(OracleLine {
                    side,
                    n,
                    x: snapped.clone(),
                    t,
                    estimate,
                    exact,
                    stderr,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "experiment_id": "unit",
        "d": 1, "L": 64,
        "regime": {"type": "classic", "alpha": 0.5},
        "rho0": {"a0": 0.5},
        "T": 0.05,
        "sample_times": [0.05],
        "replicas": 4
    }"#;

    fn with(patch: serde_json::Value) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        for (k, val) in patch.as_object().unwrap() {
            if val.is_null() {
                v.as_object_mut().unwrap().remove(k);
            } else {
                v[k] = val.clone();
            }
        }
        v.to_string()
    }

    fn messages(e: Error) -> Vec<String> {
        match e {
            Error::Config(m) => m,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn resolves_classic_fixture() {
        let cfg = validate_config(BASE).unwrap();
        assert_eq!(cfg.n, vec![64]);
        assert!(cfg.event_budget as f64 >= cfg.expected_events(64, 64));
    }

    #[test]
    fn missing_horizon() {
        let m = messages(validate_config(&with(serde_json::json!({"T": null, "sample_times": null}))).unwrap_err());
        assert!(m.iter().any(|s| s == "T required"), "{m:?}");
    }

    #[test]
    fn sample_time_beyond_horizon() {
        let m = messages(validate_config(&with(serde_json::json!({"sample_times": [0.01, 0.2]}))).unwrap_err());
        assert!(m.iter().any(|s| s.contains("exceeds T")), "{m:?}");
    }

    #[test]
    fn all_errors_are_reported() {
        let m = messages(
            validate_config(&with(serde_json::json!({
                "L": 2,
                "regime": {"type": "sparse", "gamma": 0.3},
                "sample_times": [0.04, 0.02]
            })))
            .unwrap_err(),
        );
        assert!(m.len() >= 3, "{m:?}");
    }

    #[test]
    fn budget_below_expectation_is_rejected() {
        assert!(validate_config(&with(serde_json::json!({"event_budget": 10}))).is_err());
    }

    #[test]
    fn checks_register_their_observables() {
        let cfg = validate_config(&with(serde_json::json!({
            "checks": [{"type": "mean", "observable": "empirical", "phi": "one", "atol": 0.01}]
        })))
        .unwrap();
        assert_eq!(
            cfg.observables,
            vec![ObservableSpec {
                kind: ObservableKind::Empirical,
                phi: "one".into()
            }]
        );
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let m = messages(
            validate_config(&with(serde_json::json!({
                "test_functions": {"c": {"kind":"trig","terms":[{"axis":0,"freq":1,"phase":"cos","amp":1.0}]}},
                "observables": [{"kind": "uniflux", "phi": "c"}]
            })))
            .unwrap_err(),
        );
        assert!(m.iter().any(|s| s.contains("uniflux")), "{m:?}");
    }

    #[test]
    fn zero_horizon_run_is_trivial() {
        let cfg = validate_config(&with(serde_json::json!({
            "T": 0.0, "sample_times": [0.0], "replicas": 2,
            "observables": [
                {"kind": "empirical", "phi": "one"},
                {"kind": "netflux", "phi": "one"},
                {"kind": "unicollision", "phi": "one"}
            ]
        })))
        .unwrap();
        let plan = replica_plan(&cfg, 0, false).unwrap();
        let results = run_replicas(&plan, 2).unwrap();
        for r in &results {
            assert_eq!(r.events, 0);
            assert_eq!(r.samples[0].values[0], r.initial_values[0]);
            assert_eq!(r.samples[0].values[1], 0.0);
            assert_eq!(r.samples[0].values[2], 0.0);
        }
        assert!(run_experiment(&cfg).unwrap().pass);
    }

    #[test]
    fn content_hash_tracks_config() {
        let a = validate_config(BASE).unwrap();
        let b = validate_config(&with(serde_json::json!({"seed": 7}))).unwrap();
        assert_eq!(
            a.content_hash().unwrap(),
            validate_config(BASE).unwrap().content_hash().unwrap()
        );
        assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
        assert_eq!(a.content_hash().unwrap().len(), 64);
    }
}
