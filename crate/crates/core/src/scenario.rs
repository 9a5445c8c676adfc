//! Declarative scenario configs and the builtin scenario library.
//!
//! A [`ScenarioConfig`] is plain JSON. Loading parses the syntax first (so
//! errors carry a line and column), then the typed structure with unknown
//! keys rejected, then collects every semantic problem into one
//! [`Error::Validation`].

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conservation::{total_shift_generator, ConservedQuantity, QuantityKind};
use crate::entanglement::{build_two_branch_state, Bipartition, MirrorModel};
use crate::error::{Error, Result};
use crate::hilbert::{gaussian_packet, make_product_state, CompositeSpace, StateVector, SubsystemKind, SubsystemSpec};
use crate::integrator::{
    collapse_eigenbranches, level_branches, Dynamics, IntegrationPlan, Observable, TrajectoryRecord,
};
use crate::operators::{
    assemble_hamiltonian, collapse_operator, scaled_interaction_sum, AssembledOperator, CollapseParams, OperatorSpec,
    OperatorTerm, PairPotential,
};
use crate::sparse::CsrMatrix;

pub const BUILTIN_NAMES: [&str; 5] = [
    "qnd-two-level",
    "beamsplitter",
    "two-particle-collision",
    "stern-gerlach",
    "free-packet",
];

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "one")]
    pub c_scale: f64,
    #[serde(default = "one")]
    pub tau0: f64,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            c_scale: 1.0,
            tau0: 1.0,
        }
    }
}

impl CollapseConfig {
    pub fn params(&self) -> CollapseParams {
        CollapseParams {
            c_scale: self.c_scale,
            tau0: self.tau0,
        }
    }
}

/// State of one subsystem in a product initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Factor {
    Basis {
        subsystem: String,
        level: usize,
    },
    /// Unnormalized amplitudes; `im` defaults to zeros.
    Amplitudes {
        subsystem: String,
        re: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<f64>>,
    },
    Gaussian {
        subsystem: String,
        x0: f64,
        a: f64,
        #[serde(default)]
        k0: f64,
    },
}

impl Factor {
    pub fn subsystem(&self) -> &str {
        match self {
            Factor::Basis { subsystem, .. } | Factor::Amplitudes { subsystem, .. } | Factor::Gaussian { subsystem, .. } => {
                subsystem
            }
        }
    }

    fn errors(&self, space: &CompositeSpace) -> Vec<String> {
        let Ok(spec) = space.subsystem(self.subsystem()) else {
            return vec![format!("initial state: unknown subsystem `{}`", self.subsystem())];
        };
        let mut errs = Vec::new();
        match self {
            Factor::Basis { level, .. } if *level >= spec.dim => {
                errs.push(format!("initial state: level {level} outside `{}` (dim {})", spec.label, spec.dim))
            }
            Factor::Amplitudes { re, im, .. } => {
                if re.len() != spec.dim {
                    errs.push(format!("initial state: `{}` needs {} amplitudes, got {}", spec.label, spec.dim, re.len()));
                }
                if im.as_ref().is_some_and(|im| im.len() != re.len()) {
                    errs.push(format!("initial state: `{}` re/im lengths differ", spec.label));
                }
            }
            Factor::Gaussian { .. } if spec.kind != SubsystemKind::Lattice1d => {
                errs.push(format!("initial state: gaussian factor needs a lattice, `{}` is {}", spec.label, spec.kind.name()))
            }
            _ => {}
        }
        errs
    }

    fn amplitudes(&self, space: &CompositeSpace) -> Result<Vec<Complex64>> {
        let spec = space.subsystem(self.subsystem())?;
        Ok(match self {
            Factor::Basis { level, .. } => {
                let mut v = vec![Complex64::new(0.0, 0.0); spec.dim];
                v[*level] = Complex64::new(1.0, 0.0);
                v
            }
            Factor::Amplitudes { re, im, .. } => re
                .iter()
                .enumerate()
                .map(|(k, r)| Complex64::new(*r, im.as_ref().map_or(0.0, |im| im[k])))
                .collect(),
            Factor::Gaussian { subsystem, x0, a, k0 } => gaussian_packet(space, subsystem, *x0, *a, *k0)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// One factor per subsystem, in any order. With `shift_sector = q` the
    /// product is projected onto the total-shift eigenspace of index `q`.
    Product {
        factors: Vec<Factor>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift_sector: Option<i64>,
    },
    /// `(|0>|B_r> + |1>|B_t>)/sqrt(2)` on `photon` ⊗ `mirror` with
    /// `<B_r|B_t> = 1 - delta`; the remaining subsystems take `others`.
    ///
    /// A 2-level discrete mirror uses the two-mode model; a lattice mirror
    /// uses displaced Gaussians of half-width `width`.
    TwoBranch {
        delta: f64,
        photon: String,
        mirror: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
        #[serde(default)]
        others: Vec<Factor>,
    },
}

impl InitialState {
    fn errors(&self, space: &CompositeSpace) -> Vec<String> {
        let mut errs = Vec::new();
        let (factors, fixed): (&[Factor], Vec<&str>) = match self {
            InitialState::Product { factors, .. } => (factors, vec![]),
            InitialState::TwoBranch {
                delta,
                photon,
                mirror,
                width,
                others,
            } => {
                if !(0.0..=1.0).contains(delta) {
                    errs.push(format!("initial state: delta {delta} outside [0, 1]"));
                }
                match space.subsystem(photon) {
                    Ok(p) if p.dim == 2 => {}
                    Ok(_) => errs.push(format!("initial state: photon `{photon}` must have 2 levels")),
                    Err(_) => errs.push(format!("initial state: unknown subsystem `{photon}`")),
                }
                match space.subsystem(mirror) {
                    Ok(m) if m.kind == SubsystemKind::Lattice1d => {
                        if width.is_none() {
                            errs.push(format!("initial state: lattice mirror `{mirror}` needs a width"));
                        }
                    }
                    Ok(m) if m.dim == 2 => {}
                    Ok(_) => errs.push(format!("initial state: mirror `{mirror}` must be a lattice or have 2 levels")),
                    Err(_) => errs.push(format!("initial state: unknown subsystem `{mirror}`")),
                }
                (others, vec![photon.as_str(), mirror.as_str()])
            }
        };
        let mut covered: Vec<&str> = fixed;
        for f in factors {
            errs.extend(f.errors(space));
            if covered.contains(&f.subsystem()) {
                errs.push(format!("initial state: subsystem `{}` given twice", f.subsystem()));
            }
            covered.push(f.subsystem());
        }
        for s in space.subsystems() {
            if !covered.contains(&s.label.as_str()) {
                errs.push(format!("initial state: no factor for subsystem `{}`", s.label));
            }
        }
        errs
    }

    fn build(&self, space: &Arc<CompositeSpace>) -> Result<StateVector> {
        match self {
            InitialState::Product { factors, shift_sector } => {
                let mut ordered = Vec::with_capacity(factors.len());
                for s in space.subsystems() {
                    let f = factors
                        .iter()
                        .find(|f| f.subsystem() == s.label)
                        .ok_or_else(|| Error::UnknownSubsystem(s.label.clone()))?;
                    ordered.push(f.amplitudes(space)?);
                }
                let psi = make_product_state(space.clone(), &ordered)?;
                match shift_sector {
                    Some(q) => crate::conservation::project_shift_sector(&psi, *q),
                    None => Ok(psi),
                }
            }
            InitialState::TwoBranch {
                delta,
                photon,
                mirror,
                width,
                others,
            } => {
                let mspec = space.subsystem(mirror)?;
                let model = match mspec.kind {
                    SubsystemKind::Lattice1d => MirrorModel::DisplacedGaussian {
                        sites: mspec.dim,
                        spacing: mspec.spacing(),
                        width: width.unwrap_or(1.0),
                    },
                    _ => MirrorModel::TwoMode,
                };
                let pair = build_two_branch_state(*delta, &model)?;
                let (br, bt) = pair.amplitudes().split_at(mspec.dim);
                let (pp, pm) = (space.position(photon)?, space.position(mirror)?);
                let rest: Vec<(usize, Vec<Complex64>)> = others
                    .iter()
                    .map(|f| Ok((space.position(f.subsystem())?, f.amplitudes(space)?)))
                    .collect::<Result<_>>()?;
                let amps = (0..space.total_dim())
                    .map(|i| {
                        let lm = space.level(i, pm);
                        let mut a = if space.level(i, pp) == 0 { br[lm] } else { bt[lm] };
                        for (pos, f) in &rest {
                            a *= f[space.level(i, *pos)];
                        }
                        a
                    })
                    .collect();
                StateVector::new(space.clone(), amps)
            }
        }
    }
}

/// A recorded observable. Default names: `x:<s>`, `dx:<s>`, `sz:<s>`,
/// `P:<s>=<level>`, `energy`, `vhat`, `shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Position { subsystem: String },
    PositionSpread { subsystem: String },
    SpinZ { subsystem: String },
    Level { subsystem: String, level: usize },
    Energy,
    CollapseOperator,
    /// Complex `<T>` of the total shift.
    Shift,
}

impl ObservableSpec {
    pub fn name(&self) -> String {
        match self {
            ObservableSpec::Position { subsystem } => format!("x:{subsystem}"),
            ObservableSpec::PositionSpread { subsystem } => format!("dx:{subsystem}"),
            ObservableSpec::SpinZ { subsystem } => format!("sz:{subsystem}"),
            ObservableSpec::Level { subsystem, level } => format!("P:{subsystem}={level}"),
            ObservableSpec::Energy => "energy".into(),
            ObservableSpec::CollapseOperator => "vhat".into(),
            ObservableSpec::Shift => "shift".into(),
        }
    }

    fn subsystem(&self) -> Option<&str> {
        match self {
            ObservableSpec::Position { subsystem }
            | ObservableSpec::PositionSpread { subsystem }
            | ObservableSpec::SpinZ { subsystem }
            | ObservableSpec::Level { subsystem, .. } => Some(subsystem),
            _ => None,
        }
    }

    fn errors(&self, space: &CompositeSpace, collapse: bool) -> Vec<String> {
        let what = self.name();
        if let Some(label) = self.subsystem() {
            let Ok(spec) = space.subsystem(label) else {
                return vec![format!("observable `{what}`: unknown subsystem `{label}`")];
            };
            return match self {
                ObservableSpec::SpinZ { .. } if spec.kind != SubsystemKind::Spin => {
                    vec![format!("observable `{what}`: `{label}` is not a spin")]
                }
                ObservableSpec::Level { level, .. } if *level >= spec.dim => {
                    vec![format!("observable `{what}`: level {level} outside dim {}", spec.dim)]
                }
                _ => vec![],
            };
        }
        match self {
            ObservableSpec::CollapseOperator if !collapse => vec![format!("observable `{what}`: collapse is disabled")],
            ObservableSpec::Shift => shift_errors(space).into_iter().map(|e| format!("observable `{what}`: {e}")).collect(),
            _ => vec![],
        }
    }

    fn build(&self, space: &Arc<CompositeSpace>, h: &AssembledOperator, v: Option<&AssembledOperator>) -> Result<Observable> {
        let name = self.name();
        let local_diag = |label: &str, f: &dyn Fn(&SubsystemSpec) -> Vec<f64>| -> Result<CsrMatrix> {
            let pos = space.position(label)?;
            Ok(CsrMatrix::from_real_diagonal(&space.lift_diagonal(pos, &f(&space.subsystems()[pos]))))
        };
        Ok(match self {
            ObservableSpec::Position { subsystem } => Observable::expectation(&name, local_diag(subsystem, &|s| s.coordinates())?),
            ObservableSpec::PositionSpread { subsystem } => Observable::std_dev(&name, local_diag(subsystem, &|s| s.coordinates())?),
            ObservableSpec::SpinZ { subsystem } => Observable::expectation(&name, local_diag(subsystem, &|s| s.coordinates())?),
            ObservableSpec::Level { subsystem, level } => Observable::expectation(
                &name,
                local_diag(subsystem, &|s| (0..s.dim).map(|l| if l == *level { 1.0 } else { 0.0 }).collect())?,
            ),
            ObservableSpec::Energy => Observable::expectation(&name, h.matrix.clone()),
            ObservableSpec::CollapseOperator => Observable::expectation(
                &name,
                v.map(|v| v.matrix.clone())
                    .ok_or_else(|| Error::InvalidParameter("collapse is disabled".into()))?,
            ),
            ObservableSpec::Shift => Observable::complex(&name, total_shift_generator(space)?.matrix),
        })
    }
}

fn shift_errors(space: &CompositeSpace) -> Vec<String> {
    let lattices: Vec<_> = space
        .subsystems()
        .iter()
        .filter(|s| s.kind == SubsystemKind::Lattice1d)
        .collect();
    if lattices.is_empty() {
        vec!["total shift needs a lattice subsystem".into()]
    } else if lattices.iter().any(|s| !s.periodic) {
        vec!["total shift needs every lattice to be periodic".into()]
    } else {
        vec![]
    }
}

/// A quantity to audit. Its series is recorded under [`QuantitySpec::name`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantitySpec {
    Energy,
    TotalShift,
    SpinZ { subsystem: String },
    /// Projector onto one level of a subsystem.
    Level { subsystem: String, level: usize },
}

impl QuantitySpec {
    pub fn name(&self) -> String {
        self.observable().name()
    }

    fn observable(&self) -> ObservableSpec {
        match self {
            QuantitySpec::Energy => ObservableSpec::Energy,
            QuantitySpec::TotalShift => ObservableSpec::Shift,
            QuantitySpec::SpinZ { subsystem } => ObservableSpec::SpinZ {
                subsystem: subsystem.clone(),
            },
            QuantitySpec::Level { subsystem, level } => ObservableSpec::Level {
                subsystem: subsystem.clone(),
                level: *level,
            },
        }
    }

    fn build(&self, obs: &Observable) -> Result<ConservedQuantity> {
        let op = obs.operator().clone();
        let name = self.name();
        match self {
            QuantitySpec::Energy => ConservedQuantity::hermitian(&name, QuantityKind::Energy, op),
            QuantitySpec::TotalShift => ConservedQuantity::generator(&name, op),
            QuantitySpec::SpinZ { .. } => ConservedQuantity::hermitian(&name, QuantityKind::SpinZ, op),
            QuantitySpec::Level { .. } => ConservedQuantity::hermitian(&name, QuantityKind::Custom, op),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchSpec {
    #[default]
    None,
    /// Eigenspaces of the (diagonal) collapse operator.
    CollapseEigenspaces,
    Level { subsystem: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub space: Vec<SubsystemSpec>,
    pub operators: OperatorSpec,
    #[serde(default)]
    pub collapse: CollapseConfig,
    pub initial_state: InitialState,
    pub plan: IntegrationPlan,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub branches: BranchSpec,
    /// Each entry lists the subsystems on one side of a cut.
    #[serde(default)]
    pub bipartitions: Vec<Vec<String>>,
    #[serde(default)]
    pub audits: Vec<QuantitySpec>,
}

/// A config turned into operators and a ready-to-run [`Dynamics`].
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub dynamics: Dynamics,
    pub quantities: Vec<ConservedQuantity>,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn plan(&self) -> &IntegrationPlan {
        &self.config.plan
    }

    /// One trajectory with the config's seed unless `seed` overrides it.
    pub fn run(&self, seed: Option<u64>) -> Result<TrajectoryRecord> {
        self.dynamics.run(&self.config.plan, seed.unwrap_or(self.config.plan.seed))
    }

    pub fn audit_context(&self) -> crate::conservation::AuditContext<'_> {
        crate::conservation::AuditContext::from_dynamics(&self.dynamics, self.config.operators.has_external_potential())
    }
}

impl ScenarioConfig {
    /// Every structural and semantic problem, or an empty list.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = CompositeSpace::validation_errors(&self.space);
        errs.extend(self.plan.validation_errors());
        if self.collapse.enabled {
            errs.extend(self.collapse.params().validation_errors());
        }
        if !errs.is_empty() {
            return errs;
        }
        let space = match CompositeSpace::new(self.space.clone()) {
            Ok(s) => s,
            Err(e) => return vec![e.to_string()],
        };
        errs.extend(self.operators.validation_errors(&space));
        errs.extend(self.initial_state.errors(&space));
        for o in &self.observables {
            errs.extend(o.errors(&space, self.collapse.enabled));
        }
        for a in &self.audits {
            errs.extend(a.observable().errors(&space, self.collapse.enabled));
        }
        match &self.branches {
            BranchSpec::Level { subsystem } if space.position(subsystem).is_err() => {
                errs.push(format!("branches: unknown subsystem `{subsystem}`"))
            }
            BranchSpec::CollapseEigenspaces if !self.collapse.enabled => {
                errs.push("branches: collapse eigenspaces requested but collapse is disabled".into())
            }
            _ => {}
        }
        for side in &self.bipartitions {
            let labels: Vec<&str> = side.iter().map(String::as_str).collect();
            if let Err(e) = Bipartition::new(&space, &labels) {
                errs.push(format!("bipartition {side:?}: {e}"));
            }
        }
        if errs.is_empty() {
            if let Err(e) = self.build() {
                errs.push(e.to_string());
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Set when audits cannot be certified (external potentials present).
    pub fn audit_refusal(&self) -> Option<String> {
        self.operators.has_external_potential().then(|| {
            "configuration contains an external potential; conservation audits are refused".to_string()
        })
    }

    pub fn build(&self) -> Result<Scenario> {
        let space = Arc::new(CompositeSpace::new(self.space.clone())?);
        let h = assemble_hamiltonian(&self.operators, &space)?;
        let mut warnings = h.warnings.clone();
        let v = if self.collapse.enabled {
            let vp = scaled_interaction_sum(&self.operators, &space)?;
            let v = collapse_operator(&vp, &self.collapse.params())?;
            crate::integrator::check_stability(&v.matrix, self.plan.dt)?;
            warnings.extend(v.warnings.iter().cloned());
            Some(v)
        } else {
            None
        };
        let psi0 = self.initial_state.build(&space)?;
        let mut d = Dynamics::new(h.clone(), v.clone(), psi0)?;
        let mut names = Vec::new();
        for spec in self.observables.iter().chain(self.audits.iter().map(|a| a.observable()).collect::<Vec<_>>().iter()) {
            let name = spec.name();
            if !names.contains(&name) {
                d = d.with_observable(spec.build(&space, &h, v.as_ref())?);
                names.push(name);
            }
        }
        let quantities = self
            .audits
            .iter()
            .map(|a| {
                let obs = d.observables.iter().find(|o| o.name == a.name()).expect("audit series registered");
                a.build(obs)
            })
            .collect::<Result<_>>()?;
        d = match &self.branches {
            BranchSpec::None => d,
            BranchSpec::Level { subsystem } => {
                let pos = space.position(subsystem)?;
                d.with_branches(level_branches(&space, pos))
            }
            BranchSpec::CollapseEigenspaces => {
                let v = v.as_ref().ok_or_else(|| Error::InvalidParameter("collapse is disabled".into()))?;
                d.with_branches(collapse_eigenbranches(&v.matrix, 1e-9)?)
            }
        };
        for side in &self.bipartitions {
            let labels: Vec<&str> = side.iter().map(String::as_str).collect();
            d = d.with_bipartition(Bipartition::new(&space, &labels)?);
        }
        if let Some(r) = self.audit_refusal() {
            if !self.audits.is_empty() {
                warnings.push(r);
            }
        }
        Ok(Scenario {
            config: self.clone(),
            dynamics: d,
            quantities,
            warnings,
        })
    }

    /// SHA-256 of the canonical JSON form (sorted keys, defaults filled in).
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(hex::encode(Sha256::digest(serde_json::to_string(&value)?.as_bytes())))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a config from text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    serde_json::from_str::<serde_json::Value>(text).map_err(parse_err)?;
    let config: ScenarioConfig = serde_json::from_str(text).map_err(parse_err)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    match name {
        "qnd-two-level" => Ok(qnd_two_level(0.3)),
        "beamsplitter" => Ok(beamsplitter(0.01)),
        "two-particle-collision" => Ok(two_particle_collision(100.0)),
        "stern-gerlach" => Ok(stern_gerlach()),
        "free-packet" => Ok(free_packet()),
        other => Err(Error::UnknownScenario(other.into())),
    }
}

/// Two-level system read out by a one-level apparatus; `V = diag(1, -1)`
/// commutes with `H`, so branch weights are martingales. `p0` is the initial
/// weight of level 0.
pub fn qnd_two_level(p0: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: "qnd-two-level".into(),
        description: "two-level system coupled to a one-level apparatus by a diagonal interaction".into(),
        space: vec![SubsystemSpec::discrete("q", 2, 0.5), SubsystemSpec::discrete("a", 1, 0.5)],
        operators: OperatorSpec::new(vec![OperatorTerm::Interaction {
            a: "q".into(),
            b: "a".into(),
            potential: PairPotential::Tabulated {
                separations: vec![0.0, 1.0],
                values: vec![1.0, -1.0],
            },
        }]),
        collapse: CollapseConfig::default(),
        initial_state: InitialState::Product {
            factors: vec![
                Factor::Amplitudes {
                    subsystem: "q".into(),
                    re: vec![p0.sqrt(), (1.0 - p0).sqrt()],
                    im: None,
                },
                Factor::Basis {
                    subsystem: "a".into(),
                    level: 0,
                },
            ],
            shift_sector: None,
        },
        plan: IntegrationPlan::new(0.005, 8000).record_every(40).with_seed(1),
        observables: vec![ObservableSpec::Level {
            subsystem: "q".into(),
            level: 0,
        }],
        branches: BranchSpec::Level { subsystem: "q".into() },
        bipartitions: vec![],
        audits: vec![
            QuantitySpec::Energy,
            QuantitySpec::Level {
                subsystem: "q".into(),
                level: 0,
            },
        ],
    }
}

/// Photon after a beam splitter, entangled with a two-mode mirror whose
/// branch states overlap by `1 - delta`; a detector registers the reflected
/// branch.
pub fn beamsplitter(delta: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: "beamsplitter".into(),
        description: "photon ⊗ mirror two-branch state, detector coupled to the reflected branch".into(),
        space: vec![
            SubsystemSpec::discrete("photon", 2, 1.0),
            SubsystemSpec::discrete("mirror", 2, 1.0),
            SubsystemSpec::discrete("detector", 1, 1.0),
        ],
        operators: OperatorSpec::new(vec![OperatorTerm::Interaction {
            a: "photon".into(),
            b: "detector".into(),
            potential: PairPotential::Tabulated {
                separations: vec![0.0, 1.0],
                values: vec![2.0, 0.0],
            },
        }]),
        collapse: CollapseConfig::default(),
        initial_state: InitialState::TwoBranch {
            delta,
            photon: "photon".into(),
            mirror: "mirror".into(),
            width: None,
            others: vec![Factor::Basis {
                subsystem: "detector".into(),
                level: 0,
            }],
        },
        plan: IntegrationPlan::new(0.005, 4000).record_every(20).with_seed(1),
        observables: vec![],
        branches: BranchSpec::Level {
            subsystem: "photon".into(),
        },
        bipartitions: vec![vec!["photon".into()]],
        audits: vec![QuantitySpec::Energy],
    }
}

/// Light particle scattering off a heavy one on a periodic 64 x 64 lattice
/// through a Gaussian well. `heavy_mass` sets the mass ratio (default 100).
pub fn two_particle_collision(heavy_mass: f64) -> ScenarioConfig {
    let lattice = |label: &str, mass: f64| SubsystemSpec::lattice(label, 64, mass, 0.5, true);
    ScenarioConfig {
        name: "two-particle-collision".into(),
        description: "light and heavy particle on a periodic lattice interacting through a Gaussian well".into(),
        space: vec![lattice("p1", 1.0), lattice("p2", heavy_mass)],
        operators: OperatorSpec::new(vec![
            OperatorTerm::Kinetic {
                subsystem: "p1".into(),
                mass: None,
            },
            OperatorTerm::Kinetic {
                subsystem: "p2".into(),
                mass: None,
            },
            OperatorTerm::Interaction {
                a: "p1".into(),
                b: "p2".into(),
                potential: PairPotential::GaussianWell { depth: 1.0, range: 1.0 },
            },
        ]),
        // V' carries 1/(1 + heavy_mass); tau0 restores an O(1) collapse rate.
        collapse: CollapseConfig {
            enabled: true,
            c_scale: 1.0,
            tau0: (1.0 + heavy_mass).powi(-2),
        },
        initial_state: InitialState::Product {
            factors: vec![
                Factor::Gaussian {
                    subsystem: "p1".into(),
                    x0: -6.0,
                    a: 1.5,
                    k0: 2.0,
                },
                Factor::Gaussian {
                    subsystem: "p2".into(),
                    x0: 2.0,
                    a: 1.5,
                    k0: 0.0,
                },
            ],
            shift_sector: None,
        },
        plan: IntegrationPlan::new(1e-3, 10_000).record_every(100).with_seed(1),
        observables: vec![
            ObservableSpec::Position { subsystem: "p1".into() },
            ObservableSpec::Position { subsystem: "p2".into() },
            ObservableSpec::CollapseOperator,
        ],
        branches: BranchSpec::CollapseEigenspaces,
        bipartitions: vec![vec!["p1".into()]],
        audits: vec![QuantitySpec::Energy, QuantitySpec::TotalShift],
    }
}

/// Spin-1/2 along +x crossing an effective field gradient off-axis: the
/// pointer starts at `x0 = 4`, so `σ_z x` differs between the two deflected
/// branches and the collapse term can tell them apart.
pub fn stern_gerlach() -> ScenarioConfig {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ScenarioConfig {
        name: "stern-gerlach".into(),
        description: "spin-1/2 coupled to an off-axis pointer coordinate by an effective field gradient".into(),
        space: vec![
            SubsystemSpec::spin("s", 2, 1.0),
            SubsystemSpec::lattice("z", 128, 10.0, 0.25, false),
        ],
        operators: OperatorSpec::new(vec![
            OperatorTerm::Kinetic {
                subsystem: "z".into(),
                mass: None,
            },
            OperatorTerm::SpinCoupling {
                spin: "s".into(),
                pointer: "z".into(),
                strength: 1.0,
            },
        ]),
        collapse: CollapseConfig {
            enabled: true,
            c_scale: 1.0,
            tau0: 0.1,
        },
        initial_state: InitialState::Product {
            factors: vec![
                Factor::Amplitudes {
                    subsystem: "s".into(),
                    re: vec![h, h],
                    im: None,
                },
                Factor::Gaussian {
                    subsystem: "z".into(),
                    x0: 4.0,
                    a: 0.5,
                    k0: 0.0,
                },
            ],
            shift_sector: None,
        },
        plan: IntegrationPlan::new(0.002, 5000).record_every(50).with_seed(1),
        observables: vec![
            ObservableSpec::Position { subsystem: "z".into() },
            ObservableSpec::PositionSpread { subsystem: "z".into() },
        ],
        branches: BranchSpec::Level { subsystem: "s".into() },
        bipartitions: vec![vec!["s".into()]],
        audits: vec![QuantitySpec::SpinZ { subsystem: "s".into() }, QuantitySpec::Energy],
    }
}

/// Free Gaussian packet (`a = 1`, 8 sites per `a`) with collapse disabled.
pub fn free_packet() -> ScenarioConfig {
    ScenarioConfig {
        name: "free-packet".into(),
        description: "free Gaussian packet spreading on a hard-wall lattice".into(),
        space: vec![SubsystemSpec::lattice("x", 256, 1.0, 0.125, false)],
        operators: OperatorSpec::new(vec![OperatorTerm::Kinetic {
            subsystem: "x".into(),
            mass: None,
        }]),
        collapse: CollapseConfig {
            enabled: false,
            ..CollapseConfig::default()
        },
        initial_state: InitialState::Product {
            factors: vec![Factor::Gaussian {
                subsystem: "x".into(),
                x0: 0.0,
                a: 1.0,
                k0: 0.0,
            }],
            shift_sector: None,
        },
        plan: IntegrationPlan::new(1e-4, 40_000).record_every(2000).with_seed(1),
        observables: vec![ObservableSpec::PositionSpread { subsystem: "x".into() }],
        branches: BranchSpec::None,
        bipartitions: vec![],
        audits: vec![QuantitySpec::Energy],
    }
}
