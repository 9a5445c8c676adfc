//! Command-line front end. Data goes to stdout (or files under `--out-dir`);
//! every message goes to stderr.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime or numerical error,
//! 3 audit refusal or failed audit assertion.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::conservation::{audit_records, AuditReport};
use crate::entanglement::{nats_to_bits, two_branch_entropy_approx, two_branch_entropy_exact};
use crate::error::{Error, Result};
use crate::integrator::{run_ensemble, TrajectoryRecord};
use crate::persist::{self, PersistOutcome};
use crate::scenario::{builtin_scenario, load_config, ScenarioConfig, BUILTIN_NAMES};
use crate::wavepacket::{
    closed_form_regime_warning, dominant_momentum, momentum_modulus_formula, packet_width, polar_decomposition,
    postselected_momentum_closed, postselected_momentum_quadrature, PacketParams, PostSelection, ELECTRON_MASS_SI,
    HBAR_SI,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "collapse-lab", version, about = "Stochastic collapse dynamics on composite quantum systems")]
pub struct Cli {
    /// Suppress progress and summary messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate a single trajectory.
    Run(RunArgs),
    /// Integrate an ensemble of trajectories with seeds seed, seed+1, ...
    Ensemble(EnsembleArgs),
    /// Wavepacket closed forms with their quadrature oracles.
    Analyze(AnalyzeArgs),
    /// Two-branch entanglement entropy, exact and small-δ forms.
    Entropy(EntropyArgs),
    /// Conservation audit of a stored run or a fresh ensemble.
    Audit(AuditArgs),
    /// Builtin scenario library.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Scenario config file (JSON).
    #[arg(long, conflicts_with = "builtin")]
    pub config: Option<PathBuf>,
    /// Builtin scenario name (see `scenario list`).
    #[arg(long)]
    pub builtin: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.builtin) {
            (Some(path), _) => load_config(path),
            (None, Some(name)) => builtin_scenario(name),
            (None, None) => Err(Error::Validation(vec!["one of --config or --builtin is required".into()])),
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Overrides the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub source: Source,
    /// Base seed; defaults to the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub n_traj: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long = "x-f", default_value_t = 1.0)]
    pub x_f: f64,
    /// Segment half-width; defaults to width/100.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Tabulate x_f over this many points in [0, x_f].
    #[arg(long, default_value_t = 0)]
    pub sweep: usize,
    /// Electron in SI units (a = 1e-10 m, t = 1e-6 s) instead of the above.
    #[arg(long)]
    pub electron: bool,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    /// `1 - <B_r|B_t>`.
    #[arg(long, conflicts_with = "mu")]
    pub delta: Option<f64>,
    /// Branch overlap `<B_r|B_t>`.
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub source: Source,
    /// Run directory written by `run` or `ensemble`; its trajectories are
    /// regenerated from the stored seeds and checked byte-for-byte first.
    #[arg(long, conflicts_with_all = ["config", "builtin"])]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub n_traj: usize,
    /// Where to write audit.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ScenarioAction {
    List,
    /// Print a builtin scenario's config.
    Show { name: String },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    quiet: bool,
}

impl Io<'_> {
    fn note(&mut self, msg: impl AsRef<str>) {
        if !self.quiet {
            let _ = writeln!(self.err, "{}", msg.as_ref());
        }
    }

    fn data(&mut self, bytes: &[u8]) -> Result<()> {
        self.out.write_all(bytes)?;
        Ok(())
    }
}

/// Outcome of an audit command that ran to completion.
enum Verdict {
    Ok,
    AuditFailed,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn cli_run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        quiet: cli.quiet,
    };
    match dispatch(&cli, &mut io) {
        Ok(Verdict::Ok) => EXIT_OK,
        Ok(Verdict::AuditFailed) => EXIT_AUDIT,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            match e {
                Error::AuditRefused(_) => EXIT_AUDIT,
                ref e if e.is_validation() => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn dispatch(cli: &Cli, io: &mut Io<'_>) -> Result<Verdict> {
    match &cli.command {
        Command::Run(a) => run(a, cli.format, io),
        Command::Ensemble(a) => ensemble(a, cli.format, io),
        Command::Analyze(a) => analyze(a, cli.format, io),
        Command::Entropy(a) => entropy(a, cli.format, io),
        Command::Audit(a) => audit(a, io),
        Command::Scenario { action } => scenario(action, io),
    }
}

fn warn_all(io: &mut Io<'_>, warnings: &[String]) {
    for w in warnings {
        io.note(format!("warning: {w}"));
    }
}

fn run(a: &RunArgs, format: Format, io: &mut Io<'_>) -> Result<Verdict> {
    let config = a.source.load()?;
    let sc = config.build()?;
    warn_all(io, &sc.warnings);
    let rec = sc.run(a.seed)?;
    if let Some(c) = &rec.collapse {
        io.note(format!("collapsed onto `{}` at t = {}", c.branch, c.time));
    }
    match &a.out_dir {
        Some(dir) => report_persist(io, persist::persist_run(&config, std::slice::from_ref(&rec), None, dir)?),
        None => match format {
            Format::Csv => io.data(&persist::trajectory_csv(&rec)?)?,
            Format::Json => io.data(format!("{}\n", persist::trajectory_json(&rec)?).as_bytes())?,
        },
    }
    Ok(Verdict::Ok)
}

fn report_persist(io: &mut Io<'_>, outcome: PersistOutcome) {
    match outcome {
        PersistOutcome::Written(m) => io.note(format!("wrote {} files (config {})", m.files.len() + 1, &m.config_hash[..8])),
        PersistOutcome::Unchanged(m) => io.note(format!("run already stored (config {}); nothing written", &m.config_hash[..8])),
    }
}

fn ensemble(a: &EnsembleArgs, format: Format, io: &mut Io<'_>) -> Result<Verdict> {
    let config = a.source.load()?;
    let sc = config.build()?;
    warn_all(io, &sc.warnings);
    let base = a.seed.unwrap_or(config.plan.seed);
    let ens = run_ensemble(&sc.dynamics, &config.plan, a.n_traj, base)?;
    for (label, f) in &ens.stats.outcome_frequencies {
        io.note(format!("outcome {label}: {f:.4}"));
    }
    io.note(format!(
        "norm drift per step: {:.3e} ± {:.3e}",
        ens.stats.norm_drift_mean, ens.stats.norm_drift_se
    ));
    match &a.out_dir {
        Some(dir) => report_persist(io, persist::persist_run(&config, &ens.records, Some(&ens.stats), dir)?),
        None => match format {
            Format::Json => io.data(format!("{}\n", persist::ensemble_json(&ens.stats)?).as_bytes())?,
            Format::Csv => io.data(&ensemble_mean_csv(&ens.stats)?)?,
        },
    }
    Ok(Verdict::Ok)
}

/// `t,<col>_mean,<col>_se,...`
fn ensemble_mean_csv(stats: &crate::integrator::EnsembleStats) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for c in &stats.columns {
        header.push(format!("{}_mean", c.name));
        header.push(format!("{}_se", c.name));
    }
    w.write_record(&header)?;
    for (k, t) in stats.times.iter().enumerate() {
        let mut row = vec![persist::format_float(*t)];
        for c in &stats.columns {
            row.push(persist::format_float(c.mean[k]));
            row.push(persist::format_float(c.se[k]));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn analyze(a: &AnalyzeArgs, format: Format, io: &mut Io<'_>) -> Result<Verdict> {
    if a.electron {
        let p = PacketParams {
            a: 1e-10,
            m: ELECTRON_MASS_SI,
            hbar: HBAR_SI,
            t: 1e-6,
        };
        let w = packet_width(&p);
        match format {
            Format::Json => io.data(format!("{}\n", json!({"params": p, "width_m": w})).as_bytes())?,
            Format::Csv => io.data(format!("a,m,hbar,t,width\n{},{},{},{},{}\n", p.a, p.m, p.hbar, p.t, w).as_bytes())?,
        }
        return Ok(Verdict::Ok);
    }
    let p = PacketParams {
        a: a.a,
        m: a.m,
        hbar: a.hbar,
        t: a.t,
    };
    p.validate()?;
    let width = packet_width(&p);
    let epsilon = a.epsilon.unwrap_or(width / 100.0);
    let xs: Vec<f64> = if a.sweep > 1 {
        (0..a.sweep).map(|k| a.x_f * k as f64 / (a.sweep - 1) as f64).collect()
    } else {
        vec![a.x_f]
    };
    let mut rows = Vec::new();
    for x_f in xs {
        let sel = PostSelection { x_f, epsilon };
        sel.validate()?;
        if let Some(w) = closed_form_regime_warning(&p, &sel) {
            io.note(format!("warning: {w}"));
        }
        let closed = postselected_momentum_closed(&p, &sel);
        let quad = postselected_momentum_quadrature(&p, &sel)?;
        let (r, theta) = polar_decomposition(closed);
        let rel = if closed.norm() > 0.0 { (quad - closed).norm() / closed.norm() } else { quad.norm() };
        rows.push(json!({
            "x_f": x_f,
            "epsilon": epsilon,
            "closed": closed,
            "quadrature": quad,
            "relative_difference": rel,
            "r": r,
            "theta": theta,
            "r_formula": momentum_modulus_formula(&p, x_f),
            "dominant_momentum": dominant_momentum(&p, x_f),
        }));
    }
    match format {
        Format::Json => {
            let doc = json!({"schema_version": persist::SCHEMA_VERSION, "params": p, "width": width, "rows": rows});
            io.data(format!("{}\n", serde_json::to_string_pretty(&doc)?).as_bytes())?
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["x_f", "epsilon", "closed_re", "closed_im", "quad_re", "quad_im", "rel_diff", "r", "theta"])?;
            for row in &rows {
                let f = |k: &str, i: usize| row[k][i].as_f64().unwrap_or(f64::NAN).to_string();
                let s = |k: &str| row[k].as_f64().unwrap_or(f64::NAN).to_string();
                w.write_record([
                    s("x_f"),
                    s("epsilon"),
                    f("closed", 0),
                    f("closed", 1),
                    f("quadrature", 0),
                    f("quadrature", 1),
                    s("relative_difference"),
                    s("r"),
                    s("theta"),
                ])?;
            }
            io.data(&w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?
        }
    }
    Ok(Verdict::Ok)
}

fn entropy(a: &EntropyArgs, format: Format, io: &mut Io<'_>) -> Result<Verdict> {
    let delta = match (a.delta, a.mu) {
        (Some(d), _) => d,
        (None, Some(mu)) => 1.0 - mu,
        (None, None) => return Err(Error::Validation(vec!["one of --delta or --mu is required".into()])),
    };
    let exact = two_branch_entropy_exact(1.0 - delta)?;
    let approx = two_branch_entropy_approx(delta)?;
    let rel = if exact > 0.0 { (approx - exact).abs() / exact } else { 0.0 };
    match format {
        Format::Json => {
            let doc = json!({
                "delta": delta,
                "exact_nats": exact,
                "approx_nats": approx,
                "exact_bits": nats_to_bits(exact),
                "relative_error": rel,
            });
            io.data(format!("{doc}\n").as_bytes())?
        }
        Format::Csv => io.data(
            format!(
                "exact  {exact:.5} nats ({:.5} bits)\napprox {approx:.5} nats\nrelative error {rel:.3e}\n",
                nats_to_bits(exact)
            )
            .as_bytes(),
        )?,
    }
    Ok(Verdict::Ok)
}

fn audit(a: &AuditArgs, io: &mut Io<'_>) -> Result<Verdict> {
    let (config, seeds) = match &a.run_dir {
        Some(dir) => {
            let manifest = persist::load_manifest(dir)?
                .ok_or_else(|| Error::Manifest(format!("no manifest in {}", dir.display())))?;
            let config = persist::load_run_config(dir)?;
            if config.hash()? != manifest.config_hash {
                return Err(Error::Manifest("stored config does not match the manifest hash".into()));
            }
            (config, manifest.seeds)
        }
        None => {
            let config = a.source.load()?;
            let base = a.seed.unwrap_or(config.plan.seed);
            let seeds = (0..a.n_traj.max(1) as u64).map(|i| base.wrapping_add(i)).collect();
            (config, seeds)
        }
    };
    if let Some(reason) = config.audit_refusal() {
        return Err(Error::AuditRefused(reason));
    }
    if config.audits.is_empty() {
        return Err(Error::Validation(vec!["config lists no audit quantities".into()]));
    }
    let sc = config.build()?;
    let records: Vec<TrajectoryRecord> = seeds.iter().map(|&s| sc.run(Some(s))).collect::<Result<_>>()?;
    if let Some(dir) = &a.run_dir {
        let hash = config.hash()?;
        for r in &records {
            let stored = std::fs::read(dir.join(persist::trajectory_file_name(&hash, r.seed)))?;
            if stored != persist::trajectory_csv(r)? {
                return Err(Error::Manifest(format!(
                    "stored trajectory for seed {} differs from its regeneration",
                    r.seed
                )));
            }
        }
    }
    let report: AuditReport = audit_records(&records, &sc.quantities, &sc.audit_context())?;
    if !io.quiet {
        let _ = write!(io.out, "{}", report.summary());
    }
    if let Some(dir) = a.out_dir.as_ref().or(a.run_dir.as_ref()) {
        let path = persist::write_audit(&report, dir)?;
        io.note(format!("audit written to {}", path.display()));
    }
    Ok(if report.passed() { Verdict::Ok } else { Verdict::AuditFailed })
}

fn scenario(action: &ScenarioAction, io: &mut Io<'_>) -> Result<Verdict> {
    match action {
        ScenarioAction::List => {
            for name in BUILTIN_NAMES {
                let cfg = builtin_scenario(name)?;
                io.data(format!("{name:<24} {}\n", cfg.description).as_bytes())?;
            }
        }
        ScenarioAction::Show { name } => {
            io.data(format!("{}\n", builtin_scenario(name)?.to_json_pretty()?).as_bytes())?;
        }
    }
    Ok(Verdict::Ok)
}
