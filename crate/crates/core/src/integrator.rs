//! Explicit Euler–Maruyama integration of the norm-preserving collapse
//! equation
//!
//! ```text
//! |dψ> = -i H |ψ> dt - ½ β†β |ψ> dt + β |ψ> dξ,     β = V - <V>
//! ```
//!
//! with `β` frozen at the pre-step state and the result renormalized after
//! every step. Trajectories are seeded from a ChaCha8 stream
//! (`ChaCha8Rng::seed_from_u64(seed)`), so a seed fixes the noise bitstream.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{schmidt, Bipartition};
use crate::error::{Error, Result};
use crate::hilbert::{inner, norm, CompositeSpace, StateVector};
use crate::operators::AssembledOperator;
use crate::sparse::CsrMatrix;

/// Upper limit on `dt * |V|^2_max`.
pub const STABILITY_LIMIT: f64 = 0.1;
/// Environment variable capping ensemble parallelism.
pub const THREADS_ENV: &str = "COLLAPSE_LAB_THREADS";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `dξ = (dW1 + i dW2)/sqrt(2)`.
    #[default]
    Complex,
    /// `dξ = dW`; deviation switch for real-noise conventions.
    Real,
}

impl NoiseKind {
    pub fn sample<R: rand::Rng>(self, rng: &mut R, dt: f64) -> Complex64 {
        let s = dt.sqrt();
        match self {
            NoiseKind::Complex => {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                Complex64::new(a, b) * (s * std::f64::consts::FRAC_1_SQRT_2)
            }
            NoiseKind::Real => {
                let a: f64 = StandardNormal.sample(rng);
                Complex64::new(a * s, 0.0)
            }
        }
    }
}

fn default_threshold() -> f64 {
    1.0 - 1e-6
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationPlan {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "default_threshold")]
    pub collapse_threshold: f64,
    /// Keep the full state at every recorded time (small systems only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_states: bool,
}

impl IntegrationPlan {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            seed: 0,
            noise_kind: NoiseKind::Complex,
            record_every: 1,
            collapse_threshold: default_threshold(),
            record_states: false,
        }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, kind: NoiseKind) -> Self {
        self.noise_kind = kind;
        self
    }

    pub fn with_states(mut self) -> Self {
        self.record_states = true;
        self
    }

    pub fn n_records(&self) -> usize {
        1 + self.n_steps / self.record_every
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            errs.push("plan dt must be finite and > 0".into());
        }
        if self.n_steps == 0 {
            errs.push("plan n_steps must be positive".into());
        }
        if self.record_every == 0 || self.record_every > self.n_steps.max(1) {
            errs.push("plan record_every must be in 1..=n_steps".into());
        }
        if !(self.collapse_threshold > 0.0 && self.collapse_threshold < 1.0) {
            errs.push("plan collapse_threshold must lie in (0, 1)".into());
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(errs.join("; ")))
        }
    }
}

/// Checks `dt * |V|^2_max <= 0.1`, with `|.|_max` the largest entry modulus.
pub fn check_stability(vhat: &CsrMatrix, dt: f64) -> Result<()> {
    let g = dt * vhat.max_abs().powi(2);
    if g > STABILITY_LIMIT {
        Err(Error::StabilityGuard(g))
    } else {
        Ok(())
    }
}

/// Work buffers for repeated steps on one space.
struct Stepper {
    hv: Vec<Complex64>,
    vv: Vec<Complex64>,
    bb: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Self {
            hv: vec![ZERO; dim],
            vv: vec![ZERO; dim],
            bb: vec![ZERO; dim],
            next: vec![ZERO; dim],
        }
    }

    /// One step in place; returns the pre-renormalization norm.
    fn step(
        &mut self,
        psi: &mut [Complex64],
        h: &CsrMatrix,
        v: Option<&CsrMatrix>,
        dt: f64,
        dxi: Complex64,
    ) -> Result<f64> {
        h.matvec_into(psi, &mut self.hv);
        let minus_i_dt = Complex64::new(0.0, -dt);
        match v {
            Some(v) => {
                v.matvec_into(psi, &mut self.vv);
                let mean = inner(psi, &self.vv).re;
                // vv <- beta psi
                for (b, p) in self.vv.iter_mut().zip(psi.iter()) {
                    *b -= p * mean;
                }
                // bb <- beta (beta psi)
                v.matvec_into(&self.vv, &mut self.bb);
                for (bb, b) in self.bb.iter_mut().zip(&self.vv) {
                    *bb -= b * mean;
                }
                for i in 0..psi.len() {
                    self.next[i] = psi[i] + minus_i_dt * self.hv[i] - self.bb[i] * (0.5 * dt)
                        + self.vv[i] * dxi;
                }
            }
            None => {
                for i in 0..psi.len() {
                    self.next[i] = psi[i] + minus_i_dt * self.hv[i];
                }
            }
        }
        let n = norm(&self.next);
        if !n.is_finite() {
            return Err(Error::NonFinite("state after integration step".into()));
        }
        if n == 0.0 {
            return Err(Error::ZeroNorm("state after integration step".into()));
        }
        for (p, x) in psi.iter_mut().zip(&self.next) {
            *p = x / n;
        }
        Ok(n)
    }
}

/// One Euler–Maruyama step of the collapse equation for a given noise increment.
pub fn ito_step(
    psi: &StateVector,
    h: &AssembledOperator,
    vhat: &AssembledOperator,
    dt: f64,
    dxi: Complex64,
) -> Result<StateVector> {
    Ok(ito_step_with_norm(psi, h, vhat, dt, dxi)?.0)
}

/// As [`ito_step`], also returning the pre-renormalization norm.
pub fn ito_step_with_norm(
    psi: &StateVector,
    h: &AssembledOperator,
    vhat: &AssembledOperator,
    dt: f64,
    dxi: Complex64,
) -> Result<(StateVector, f64)> {
    let dim = psi.amplitudes().len();
    for (op, what) in [(h, "hamiltonian"), (vhat, "collapse operator")] {
        if op.matrix.dim() != dim {
            return Err(Error::dim(dim, op.matrix.dim(), what));
        }
        op.require_hermitian()?;
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be finite and > 0".into()));
    }
    check_stability(&vhat.matrix, dt)?;
    let mut amps = psi.amplitudes().to_vec();
    let n = Stepper::new(dim).step(&mut amps, &h.matrix, Some(&vhat.matrix), dt, dxi)?;
    Ok((StateVector::new(psi.space().clone(), amps)?, n))
}

#[derive(Clone, Debug)]
pub enum ObservableKind {
    /// `<ψ|Q|ψ>` for Hermitian `Q`.
    Expectation(CsrMatrix),
    /// Complex `<ψ|U|ψ>`, e.g. for unitary symmetry generators.
    ComplexExpectation(CsrMatrix),
    /// `sqrt(<Q²> - <Q>²)` for Hermitian `Q`.
    StdDev(CsrMatrix),
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
}

impl Observable {
    pub fn expectation(name: &str, op: CsrMatrix) -> Self {
        Self {
            name: name.into(),
            kind: ObservableKind::Expectation(op),
        }
    }

    pub fn complex(name: &str, op: CsrMatrix) -> Self {
        Self {
            name: name.into(),
            kind: ObservableKind::ComplexExpectation(op),
        }
    }

    pub fn std_dev(name: &str, op: CsrMatrix) -> Self {
        Self {
            name: name.into(),
            kind: ObservableKind::StdDev(op),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, ObservableKind::ComplexExpectation(_))
    }

    pub fn operator(&self) -> &CsrMatrix {
        match &self.kind {
            ObservableKind::Expectation(m)
            | ObservableKind::ComplexExpectation(m)
            | ObservableKind::StdDev(m) => m,
        }
    }

    fn measure(&self, psi: &[Complex64]) -> Complex64 {
        match &self.kind {
            ObservableKind::Expectation(m) => Complex64::new(m.expectation(psi).re, 0.0),
            ObservableKind::ComplexExpectation(m) => m.expectation(psi),
            ObservableKind::StdDev(m) => {
                let q = m.matvec(psi);
                let mean = inner(psi, &q).re;
                let sq = inner(&q, &q).re;
                Complex64::new((sq - mean * mean).max(0.0).sqrt(), 0.0)
            }
        }
    }
}

/// A set of product-basis states whose total weight is tracked.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: String,
    pub indices: Vec<usize>,
}

impl Branch {
    pub fn weight(&self, psi: &[Complex64]) -> f64 {
        self.indices.iter().map(|&i| psi[i].norm_sqr()).sum()
    }
}

/// Branches given by the eigenspaces of a diagonal collapse operator.
/// Diagonal values closer than `tol` share a branch; labels are `v=<value>`.
pub fn collapse_eigenbranches(vhat: &CsrMatrix, tol: f64) -> Result<Vec<Branch>> {
    if !vhat.is_diagonal() {
        return Err(Error::InvalidParameter(
            "collapse-eigenspace branches need a diagonal collapse operator".into(),
        ));
    }
    let diag: Vec<f64> = vhat.diagonal().iter().map(|z| z.re).collect();
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut branches: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in order {
        match branches.last_mut() {
            Some((v, idx)) if (diag[i] - *v).abs() <= tol => idx.push(i),
            _ => branches.push((diag[i], vec![i])),
        }
    }
    Ok(branches
        .into_iter()
        .map(|(v, mut indices)| {
            indices.sort_unstable();
            Branch {
                label: format!("v={v:.6e}"),
                indices,
            }
        })
        .collect())
}

/// One branch per level of subsystem `pos`, labelled `<label>=<level>`.
pub fn level_branches(space: &CompositeSpace, pos: usize) -> Vec<Branch> {
    let spec = &space.subsystems()[pos];
    (0..spec.dim)
        .map(|l| Branch {
            label: format!("{}={}", spec.label, l),
            indices: (0..space.total_dim())
                .filter(|&i| space.level(i, pos) == l)
                .collect(),
        })
        .collect()
}

/// Everything needed to integrate trajectories: operators, initial state and
/// the quantities to record.
#[derive(Clone, Debug)]
pub struct Dynamics {
    pub space: Arc<CompositeSpace>,
    pub hamiltonian: AssembledOperator,
    /// `None` disables collapse (pure unitary Euler steps).
    pub collapse: Option<AssembledOperator>,
    pub initial: StateVector,
    pub observables: Vec<Observable>,
    pub branches: Vec<Branch>,
    pub bipartitions: Vec<Bipartition>,
}

impl Dynamics {
    pub fn new(
        hamiltonian: AssembledOperator,
        collapse: Option<AssembledOperator>,
        initial: StateVector,
    ) -> Result<Self> {
        let space = initial.space().clone();
        let dim = space.total_dim();
        hamiltonian.require_hermitian()?;
        if hamiltonian.matrix.dim() != dim {
            return Err(Error::dim(dim, hamiltonian.matrix.dim(), "hamiltonian"));
        }
        if let Some(v) = &collapse {
            v.require_hermitian()?;
            if v.matrix.dim() != dim {
                return Err(Error::dim(dim, v.matrix.dim(), "collapse operator"));
            }
        }
        Ok(Self {
            space,
            hamiltonian,
            collapse,
            initial,
            observables: Vec::new(),
            branches: Vec::new(),
            bipartitions: Vec::new(),
        })
    }

    pub fn with_observable(mut self, obs: Observable) -> Self {
        self.observables.push(obs);
        self
    }

    pub fn with_branches(mut self, branches: Vec<Branch>) -> Self {
        self.branches = branches;
        self
    }

    pub fn with_bipartition(mut self, part: Bipartition) -> Self {
        self.bipartitions.push(part);
        self
    }

    fn check(&self, plan: &IntegrationPlan) -> Result<()> {
        plan.validate()?;
        if let Some(v) = &self.collapse {
            check_stability(&v.matrix, plan.dt)?;
        }
        let dim = self.space.total_dim();
        for o in &self.observables {
            if o.operator().dim() != dim {
                return Err(Error::dim(dim, o.operator().dim(), format!("observable `{}`", o.name)));
            }
        }
        for b in &self.branches {
            if b.indices.iter().any(|&i| i >= dim) {
                return Err(Error::InvalidParameter(format!("branch `{}` indexes outside the space", b.label)));
            }
        }
        for p in &self.bipartitions {
            p.validate(&self.space)?;
        }
        Ok(())
    }

    /// Runs one trajectory with noise drawn from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn run(&self, plan: &IntegrationPlan, seed: u64) -> Result<TrajectoryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = plan.noise_kind;
        let dt = plan.dt;
        self.run_with_noise(plan, seed, |_| kind.sample(&mut rng, dt))
    }

    /// Runs one trajectory with caller-supplied noise: `noise(k)` is the
    /// increment over `[k dt, (k+1) dt]`, for `k` in `0..n_steps`.
    pub fn run_with_noise(
        &self,
        plan: &IntegrationPlan,
        seed: u64,
        mut noise: impl FnMut(usize) -> Complex64,
    ) -> Result<TrajectoryRecord> {
        self.check(plan)?;
        let dim = self.space.total_dim();
        let mut psi = self.initial.amplitudes().to_vec();
        let mut stepper = Stepper::new(dim);
        let mut rec = Recorder::new(self, plan);
        rec.record(self, 0.0, 1.0, &psi)?;
        let mut drift = DriftAccumulator::default();
        let mut collapse_event = None;
        let h = &self.hamiltonian.matrix;
        let v = self.collapse.as_ref().map(|c| &c.matrix);
        for step in 1..=plan.n_steps {
            let dxi = if v.is_some() { noise(step - 1) } else { ZERO };
            let pre = stepper.step(&mut psi, h, v, plan.dt, dxi)?;
            drift.push(pre * pre - 1.0);
            if collapse_event.is_none() {
                if let Some(b) = self.branches.iter().find(|b| b.weight(&psi) > plan.collapse_threshold) {
                    collapse_event = Some(CollapseEvent {
                        branch: b.label.clone(),
                        step,
                        time: step as f64 * plan.dt,
                    });
                }
            }
            if step % plan.record_every == 0 {
                rec.record(self, step as f64 * plan.dt, pre, &psi)?;
            }
        }
        let terminal_branch = self
            .branches
            .iter()
            .find(|b| b.weight(&psi) > plan.collapse_threshold)
            .map(|b| b.label.clone());
        let final_state = StateVector::new(self.space.clone(), psi)?;
        Ok(rec.finish(final_state, collapse_event, terminal_branch, drift.finish(), seed, plan.clone()))
    }
}

#[derive(Default)]
struct DriftAccumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl DriftAccumulator {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn finish(self) -> NormDrift {
        let mean = if self.n > 0 { self.sum / self.n as f64 } else { 0.0 };
        NormDrift {
            steps: self.n,
            mean,
            mean_sq: if self.n > 0 { self.sum_sq / self.n as f64 } else { 0.0 },
        }
    }
}

struct Recorder {
    times: Vec<f64>,
    norms: Vec<f64>,
    observables: Vec<(String, bool, Vec<Complex64>)>,
    weights: Vec<(String, Vec<f64>)>,
    entropies: Vec<(String, Vec<f64>)>,
    states: Option<Vec<Vec<Complex64>>>,
}

impl Recorder {
    fn new(dynamics: &Dynamics, plan: &IntegrationPlan) -> Self {
        let n = plan.n_records();
        Self {
            times: Vec::with_capacity(n),
            norms: Vec::with_capacity(n),
            observables: dynamics
                .observables
                .iter()
                .map(|o| (o.name.clone(), o.is_complex(), Vec::with_capacity(n)))
                .collect(),
            weights: dynamics
                .branches
                .iter()
                .map(|b| (b.label.clone(), Vec::with_capacity(n)))
                .collect(),
            entropies: dynamics
                .bipartitions
                .iter()
                .map(|p| (p.label(), Vec::with_capacity(n)))
                .collect(),
            states: plan.record_states.then(|| Vec::with_capacity(n)),
        }
    }

    fn record(&mut self, d: &Dynamics, t: f64, pre_norm: f64, psi: &[Complex64]) -> Result<()> {
        self.times.push(t);
        self.norms.push(pre_norm);
        for (o, (_, _, series)) in d.observables.iter().zip(&mut self.observables) {
            series.push(o.measure(psi));
        }
        for (b, (_, w)) in d.branches.iter().zip(&mut self.weights) {
            w.push(b.weight(psi));
        }
        if !d.bipartitions.is_empty() {
            let state = StateVector::new(d.space.clone(), psi.to_vec())?;
            for (p, (_, s)) in d.bipartitions.iter().zip(&mut self.entropies) {
                s.push(schmidt(&state, p)?.entropy());
            }
        }
        if let Some(states) = &mut self.states {
            states.push(psi.to_vec());
        }
        Ok(())
    }

    fn finish(
        self,
        final_state: StateVector,
        collapse: Option<CollapseEvent>,
        terminal_branch: Option<String>,
        norm_drift: NormDrift,
        seed: u64,
        plan: IntegrationPlan,
    ) -> TrajectoryRecord {
        TrajectoryRecord {
            times: self.times,
            norms_pre_renorm: self.norms,
            observables: self
                .observables
                .into_iter()
                .map(|(name, complex, values)| Series { name, complex, values })
                .collect(),
            branch_weights: self.weights,
            entropy_series: self.entropies,
            collapse,
            terminal_branch,
            norm_drift,
            final_state,
            states: self.states,
            seed,
            plan,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    /// Stored as `_re`/`_im` column pairs.
    pub complex: bool,
    pub values: Vec<Complex64>,
}

impl Series {
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn is_real(&self) -> bool {
        !self.complex
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub branch: String,
    pub step: usize,
    pub time: f64,
}

/// Per-trajectory statistics of the squared-norm increment `|ψ̃|² - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormDrift {
    pub steps: usize,
    pub mean: f64,
    pub mean_sq: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub norms_pre_renorm: Vec<f64>,
    pub observables: Vec<Series>,
    pub branch_weights: Vec<(String, Vec<f64>)>,
    pub entropy_series: Vec<(String, Vec<f64>)>,
    /// First time any branch weight exceeded the collapse threshold.
    pub collapse: Option<CollapseEvent>,
    /// Branch above threshold at the final step, if any.
    pub terminal_branch: Option<String>,
    pub norm_drift: NormDrift,
    pub final_state: StateVector,
    pub states: Option<Vec<Vec<Complex64>>>,
    pub seed: u64,
    pub plan: IntegrationPlan,
}

impl TrajectoryRecord {
    pub fn observable(&self, name: &str) -> Result<&Series> {
        self.observables
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))
    }

    pub fn branch_weight(&self, label: &str) -> Option<&[f64]> {
        self.branch_weights
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, w)| w.as_slice())
    }

    pub fn entropy(&self, label: &str) -> Option<&[f64]> {
        self.entropy_series
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s.as_slice())
    }

    /// Flat real-valued columns in CSV order (excluding `t` and `norm_pre`).
    ///
    /// Real observables give one column, complex ones `<name>_re`/`<name>_im`,
    /// branch weights `w:<label>` and entropies `S:<label>`.
    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        let mut cols = Vec::new();
        for s in &self.observables {
            if s.is_real() {
                cols.push((s.name.clone(), s.real()));
            } else {
                cols.push((format!("{}_re", s.name), s.values.iter().map(|z| z.re).collect()));
                cols.push((format!("{}_im", s.name), s.values.iter().map(|z| z.im).collect()));
            }
        }
        for (l, w) in &self.branch_weights {
            cols.push((format!("w:{l}"), w.clone()));
        }
        for (l, s) in &self.entropy_series {
            cols.push((format!("S:{l}"), s.clone()));
        }
        cols
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Standard error of the mean.
    pub se: Vec<f64>,
    /// 95% normal-approximation interval.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub base_seed: u64,
    pub times: Vec<f64>,
    pub columns: Vec<ColumnStats>,
    /// Terminal collapse outcomes per branch label; `"none"` for uncollapsed runs.
    pub outcome_counts: BTreeMap<String, usize>,
    pub outcome_frequencies: BTreeMap<String, f64>,
    /// Mean over trajectories of the per-step squared-norm increment, with its standard error.
    pub norm_drift_mean: f64,
    pub norm_drift_se: f64,
    /// Ensemble average of `|ψ><ψ|` at each recorded time (only with `record_states`).
    #[serde(skip)]
    pub mean_projectors: Option<Vec<DMatrix<Complex64>>>,
}

impl EnsembleStats {
    pub fn column(&self, name: &str) -> Result<&ColumnStats> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))
    }

    pub fn frequency(&self, label: &str) -> f64 {
        self.outcome_frequencies.get(label).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub records: Vec<TrajectoryRecord>,
    pub stats: EnsembleStats,
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `n_traj` trajectories with seeds `base_seed + index`.
///
/// Trajectories run in parallel (capped by `COLLAPSE_LAB_THREADS`); the
/// reduction runs in index order so results do not depend on scheduling.
pub fn run_ensemble(
    dynamics: &Dynamics,
    plan: &IntegrationPlan,
    n_traj: usize,
    base_seed: u64,
) -> Result<Ensemble> {
    if n_traj < 2 {
        return Err(Error::InvalidParameter("ensembles need n_traj >= 2".into()));
    }
    dynamics.check(plan)?;
    let work = || -> Result<Vec<TrajectoryRecord>> {
        (0..n_traj)
            .into_par_iter()
            .map(|i| dynamics.run(plan, base_seed.wrapping_add(i as u64)))
            .collect()
    };
    let records = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let stats = ensemble_stats(&records, base_seed);
    Ok(Ensemble { records, stats })
}

/// Fixed-order reduction of trajectory records.
pub fn ensemble_stats(records: &[TrajectoryRecord], base_seed: u64) -> EnsembleStats {
    let n = records.len();
    let nf = n as f64;
    let first = &records[0];
    let mut columns = Vec::new();
    let per_record: Vec<Vec<(String, Vec<f64>)>> = records.iter().map(|r| r.columns()).collect();
    for (ci, (name, series)) in per_record[0].iter().enumerate() {
        let len = series.len();
        let mut mean = vec![0.0; len];
        let mut m2 = vec![0.0; len];
        for cols in &per_record {
            for (k, x) in cols[ci].1.iter().enumerate() {
                mean[k] += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        for cols in &per_record {
            for (k, x) in cols[ci].1.iter().enumerate() {
                m2[k] += (x - mean[k]).powi(2);
            }
        }
        let variance: Vec<f64> = m2.iter().map(|s| s / (nf - 1.0)).collect();
        let se: Vec<f64> = variance.iter().map(|v| (v / nf).sqrt()).collect();
        columns.push(ColumnStats {
            name: name.clone(),
            ci_low: mean.iter().zip(&se).map(|(m, s)| m - 1.96 * s).collect(),
            ci_high: mean.iter().zip(&se).map(|(m, s)| m + 1.96 * s).collect(),
            mean,
            variance,
            se,
        });
    }

    let mut outcome_counts: BTreeMap<String, usize> = BTreeMap::new();
    for (label, _) in &first.branch_weights {
        outcome_counts.insert(label.clone(), 0);
    }
    for r in records {
        let key = r.terminal_branch.clone().unwrap_or_else(|| "none".to_string());
        *outcome_counts.entry(key).or_default() += 1;
    }
    let outcome_frequencies = outcome_counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / nf))
        .collect();

    let drifts: Vec<f64> = records.iter().map(|r| r.norm_drift.mean).collect();
    let drift_mean = drifts.iter().sum::<f64>() / nf;
    let drift_var = drifts.iter().map(|d| (d - drift_mean).powi(2)).sum::<f64>() / (nf - 1.0);

    let mean_projectors = first.states.as_ref().map(|states0| {
        let dim = states0[0].len();
        (0..states0.len())
            .map(|k| {
                let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
                for r in records {
                    let psi = &r.states.as_ref().expect("all records share a plan")[k];
                    for i in 0..dim {
                        for j in 0..dim {
                            acc[(i, j)] += psi[i] * psi[j].conj();
                        }
                    }
                }
                acc / Complex64::new(nf, 0.0)
            })
            .collect()
    });

    EnsembleStats {
        n_traj: n,
        base_seed,
        times: first.times.clone(),
        columns,
        outcome_counts,
        outcome_frequencies,
        norm_drift_mean: drift_mean,
        norm_drift_se: (drift_var / nf).sqrt(),
        mean_projectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SubsystemSpec;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit() -> Arc<CompositeSpace> {
        Arc::new(CompositeSpace::new(vec![SubsystemSpec::discrete("q", 2, 1.0)]).unwrap())
    }

    fn diag_op(sp: &Arc<CompositeSpace>, d: &[f64]) -> AssembledOperator {
        AssembledOperator::new(sp.clone(), CsrMatrix::from_real_diagonal(d)).unwrap()
    }

    fn plus(sp: &Arc<CompositeSpace>) -> StateVector {
        StateVector::new(sp.clone(), vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn unitary_limit_phases() {
        let sp = qubit();
        let h = diag_op(&sp, &[1.0, -1.0]);
        let v = diag_op(&sp, &[0.7, 0.7]);
        let dt = 1e-3;
        let out = ito_step(&plus(&sp), &h, &v, dt, c(0.3, -0.2)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a0 = out.amplitudes()[0] / s;
        let a1 = out.amplitudes()[1] / s;
        assert!((a0 - Complex64::from_polar(1.0, -dt)).norm() < dt * dt);
        assert!((a1 - Complex64::from_polar(1.0, dt)).norm() < dt * dt);
    }

    #[test]
    fn collapse_step_matches_hand_expansion() {
        let sp = qubit();
        let h = diag_op(&sp, &[0.0, 0.0]);
        let v = 1.3;
        let vop = diag_op(&sp, &[v, -v]);
        let dt = 1e-4;
        let eps = 0.007;
        let out = ito_step(&plus(&sp), &h, &vop, dt, c(eps, 0.0)).unwrap();
        let w0 = out.amplitudes()[0].norm_sqr();
        // Exact update: amplitudes ∝ 1 - v²dt/2 ± v ε.
        let (p, m) = (1.0 - v * v * dt / 2.0 + v * eps, 1.0 - v * v * dt / 2.0 - v * eps);
        assert_abs_diff_eq!(w0, p * p / (p * p + m * m), epsilon = 1e-14);
        let (p0, m0) = (1.0 + v * eps, 1.0 - v * eps);
        assert!((w0 - p0 * p0 / (p0 * p0 + m0 * m0)).abs() < 10.0 * dt);
    }

    #[test]
    fn joint_eigenstate_is_fixed() {
        let sp = qubit();
        let h = diag_op(&sp, &[2.0, -1.0]);
        let v = diag_op(&sp, &[0.5, -0.5]);
        let psi = StateVector::basis(sp.clone(), 1).unwrap();
        let out = ito_step(&psi, &h, &v, 1e-3, c(0.05, 0.02)).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[1].norm(), 1.0, epsilon = 1e-15);
        assert_eq!(out.amplitudes()[0], c(0.0, 0.0));
    }

    #[test]
    fn step_guards() {
        let sp = qubit();
        let h = diag_op(&sp, &[0.0, 0.0]);
        let v = diag_op(&sp, &[2.0, -2.0]);
        assert!(matches!(
            ito_step(&plus(&sp), &h, &v, 0.05, c(0.0, 0.0)),
            Err(Error::StabilityGuard(_))
        ));
        let huge = diag_op(&sp, &[1e300, 0.0]);
        assert!(ito_step(&plus(&sp), &huge, &diag_op(&sp, &[0.0, 0.0]), 1e10, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn plan_validation() {
        let mut p = IntegrationPlan::new(0.01, 10).record_every(20);
        assert!(p.validate().is_err());
        p.record_every = 5;
        assert!(p.validate().is_ok());
        assert_eq!(p.n_records(), 3);
        p.collapse_threshold = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn eigenbranches_group_equal_values() {
        let m = CsrMatrix::from_real_diagonal(&[1.0, -1.0, 1.0, 0.0]);
        let b = collapse_eigenbranches(&m, 1e-12).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[2].indices, vec![0, 2]);
    }

    #[test]
    fn eigenstate_weights_stay_constant() {
        let sp = qubit();
        let d = Dynamics::new(
            diag_op(&sp, &[0.0, 0.0]),
            Some(diag_op(&sp, &[1.0, -1.0])),
            StateVector::basis(sp.clone(), 0).unwrap(),
        )
        .unwrap()
        .with_branches(level_branches(&sp, 0));
        let rec = d.run(&IntegrationPlan::new(0.01, 200).record_every(10), 3).unwrap();
        assert_eq!(rec.times.len(), 21);
        assert!(rec.branch_weight("q=0").unwrap().iter().all(|&w| w == 1.0));
        assert_eq!(rec.terminal_branch.as_deref(), Some("q=0"));
        assert_eq!(rec.collapse.as_ref().unwrap().step, 1);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let sp = qubit();
        let psi = StateVector::new(sp.clone(), vec![c(0.3f64.sqrt(), 0.0), c(0.7f64.sqrt(), 0.0)]).unwrap();
        let d = Dynamics::new(diag_op(&sp, &[0.2, -0.1]), Some(diag_op(&sp, &[1.0, -1.0])), psi)
            .unwrap()
            .with_branches(level_branches(&sp, 0));
        let plan = IntegrationPlan::new(0.01, 300);
        let a = d.run(&plan, 11).unwrap();
        let b = d.run(&plan, 11).unwrap();
        let c2 = d.run(&plan, 12).unwrap();
        assert_eq!(a.columns(), b.columns());
        assert_ne!(a.columns(), c2.columns());
        for (_, w) in [&a.branch_weights[0]] {
            for (k, w0) in w.iter().enumerate() {
                let w1 = a.branch_weights[1].1[k];
                assert!((w0 + w1 - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ensemble_rejects_single_trajectory() {
        let sp = qubit();
        let d = Dynamics::new(diag_op(&sp, &[0.0, 0.0]), None, plus(&sp)).unwrap();
        assert!(run_ensemble(&d, &IntegrationPlan::new(0.01, 10), 1, 0).is_err());
    }
}
