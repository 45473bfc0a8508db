//! `rabi-lab` command line: parse flags or a TOML config, run a sweep,
//! write CSV/JSON.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure. Failures
//! print a single `error: code=<code> <message>` line on stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::acceptance::{self, ForcedCutoff, VerifyOptions};
use crate::displaced::{adiabatic_energies, TwoSpinParams};
use crate::error::{Error, Result};
use crate::hilbert::BosonBasis;
use crate::models::{
    build_hamiltonian, build_parity, commutator_norms, ion_param_map, CutoffChoice, IonParams, IsingAxis,
    ModelDocument, ModelSpec,
};
use crate::report::{Cell, Table};
use crate::scaling::{
    beta_c_of, beta_grid_alpha, beta_grid_relative, kappa_of, linspace, magnetization_curve, scaling_curve,
    SCALING_COLUMNS,
};
use crate::spectra::{converge_cutoff, eigendecompose, seed_cutoff, solve_converged};

const CUTOFF_STEP: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "rabi-lab", version, about = "Spectra and ground-state scaling of Rabi-type spin-boson models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest levels along a parameter sweep.
    Spectrum(SpectrumArgs),
    /// Norms of the commutator with the parity operator.
    Parity(ParityArgs),
    /// Closed-form adiabatic levels of the two-spin model.
    Adiabatic(AdiabaticArgs),
    /// Ground-state ⟨σ₁ᶻ⟩ against β = (λ/ω)² next to the closed form.
    Scaling(ScalingArgs),
    /// Lowest levels against the boson cutoff.
    Converge(ConvergeArgs),
    /// Two-spin model parameters of the trapped-ion realization.
    IonMap(IonMapArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// one biased Rabi spin
    Brm,
    /// two spins, unbiased
    H2,
    /// two spins with bias on spin 1
    H2b,
    /// spins 2..N coupled to spin 1
    Star,
    /// nearest-neighbour chain, bias on the last spin
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Args)]
pub struct ModelArgs {
    /// TOML model document (model fields plus cutoff, optional [grid], [output], k)
    #[arg(long, conflicts_with_all = ["model", "delta", "epsilon", "eta", "omega", "lambda", "axis", "n_spins"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Ising strength, applied to every edge
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// zz or xx
    #[arg(long)]
    pub axis: Option<IsingAxis>,
    #[arg(long)]
    pub n_spins: Option<usize>,
    /// auto or an explicit n_max
    #[arg(long)]
    pub cutoff: Option<CutoffChoice>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// parameter=start:stop:count, parameter one of lambda, eta, epsilon, delta, omega
    #[arg(long)]
    pub sweep: Option<Sweep>,
    /// number of levels
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub sweep: Option<Sweep>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AdiabaticArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub sweep: Option<Sweep>,
    /// highest oscillator level m tabulated
    #[arg(long, default_value_t = 0)]
    pub m_max: usize,
    /// add the four lowest exact levels per row
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, conflicts_with_all = ["model", "delta", "epsilon", "eta", "omega", "n_spins", "kappa"])]
    pub config: Option<PathBuf>,
    /// h2b, star or chain
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "eta")]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub n_spins: Option<usize>,
    /// β/β_c grid as start:stop:count
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["alpha", "beta"])]
    pub beta_rel: Option<Range>,
    /// α grid as start:stop:count
    #[arg(long, allow_hyphen_values = true, conflicts_with = "beta")]
    pub alpha: Option<Range>,
    /// absolute β grid as start:stop:count
    #[arg(long)]
    pub beta: Option<Range>,
    /// spin whose ⟨σᶻ⟩ is measured on a chain
    #[arg(long, default_value_t = 1)]
    pub site: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// ascending cutoffs: a comma list or start:stop:count
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct IonMapArgs {
    /// Ω̃
    #[arg(long, allow_negative_numbers = true)]
    pub rabi: f64,
    /// Δ̃
    #[arg(long, allow_negative_numbers = true)]
    pub detuning: f64,
    /// ν̃
    #[arg(long)]
    pub trap_freq: f64,
    /// η̃
    #[arg(long)]
    pub lamb_dicke: f64,
    /// ω_s
    #[arg(long, allow_negative_numbers = true)]
    pub splitting: f64,
    /// ε̃
    #[arg(long, allow_negative_numbers = true)]
    pub ion_coupling: f64,
    /// also write the mapped model as a TOML config
    #[arg(long)]
    pub emit_config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// comma list of criterion numbers; all when absent
    #[arg(long)]
    pub criteria: Option<String>,
    /// replace the overlap kernel by one with the alternating sign dropped
    #[arg(long)]
    pub inject_d_sign_error: bool,
    /// q:cutoff, pin the Fock cutoff for solves at displacement q
    #[arg(long)]
    pub force_cutoff: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Swept model parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Lambda,
    Eta,
    Epsilon,
    Delta,
    Omega,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Eta => "eta",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Delta => "delta",
            SweepParam::Omega => "omega",
        }
    }

    fn current(self, spec: &ModelSpec) -> f64 {
        match self {
            SweepParam::Lambda => spec.coupling,
            SweepParam::Eta => spec.bias[bias_site(spec)],
            SweepParam::Epsilon => spec.ising_edges.first().map_or(0.0, |e| e.strength),
            SweepParam::Delta => spec.tunneling[0],
            SweepParam::Omega => spec.boson_freq,
        }
    }

    pub fn apply(self, spec: &ModelSpec, value: f64) -> ModelSpec {
        let mut s = spec.clone();
        match self {
            SweepParam::Lambda => s.coupling = value,
            SweepParam::Eta => {
                let site = bias_site(spec);
                s.bias[site] = value;
            }
            SweepParam::Epsilon => s.ising_edges.iter_mut().for_each(|e| e.strength = value),
            SweepParam::Delta => s.tunneling.iter_mut().for_each(|d| *d = value),
            SweepParam::Omega => s.boson_freq = value,
        }
        s
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "eta" => Ok(SweepParam::Eta),
            "epsilon" => Ok(SweepParam::Epsilon),
            "delta" => Ok(SweepParam::Delta),
            "omega" => Ok(SweepParam::Omega),
            other => Err(Error::InvalidParameter(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

/// The spin that carries the bias: the first biased spin, else spin 1.
fn bias_site(spec: &ModelSpec) -> usize {
    spec.bias.iter().position(|&b| b != 0.0).unwrap_or(0)
}

/// start:stop:count with count ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("grid count must be at least 1".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        Ok(())
    }
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected start:stop:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(bad());
        };
        let r = Range {
            start: start.trim().parse().map_err(|_| bad())?,
            stop: stop.trim().parse().map_err(|_| bad())?,
            count: count.trim().parse().map_err(|_| bad())?,
        };
        r.validate()?;
        Ok(r)
    }
}

/// Sweep descriptor `parameter=start:stop:count`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParam,
    #[serde(flatten)]
    pub range: Range,
}

impl Sweep {
    fn single(parameter: SweepParam, value: f64) -> Self {
        Sweep { parameter, range: Range { start: value, stop: value, count: 1 } }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, range) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected parameter=start:stop:count, got {s:?}")))?;
        Ok(Sweep { parameter: name.trim().parse()?, range: range.parse()? })
    }
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}:{}:{}", self.parameter.name(), self.range.start, self.range.stop, self.range.count)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
struct OutputSection {
    path: Option<PathBuf>,
    format: Option<String>,
}

/// On-disk config: a model document plus optional run settings.
#[derive(Clone, Debug, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    document: ModelDocument,
    grid: Option<Sweep>,
    output: Option<OutputSection>,
    k: Option<usize>,
}

fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ConfigFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
    cfg.document.spec.validate()?;
    if let Some(g) = &cfg.grid {
        g.range.validate()?;
    }
    Ok(cfg)
}

/// Everything a command needs after flags and config are merged.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub cutoff: CutoffChoice,
    pub grid: Sweep,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub k: Option<usize>,
}

impl RunConfig {
    fn resolve(model: &ModelArgs, sweep: Option<Sweep>, k: Option<usize>, out: &OutputArgs) -> Result<Self> {
        let (spec, cutoff, cfg_grid, cfg_out, cfg_k) = match &model.config {
            Some(path) => {
                let cfg = read_config(path)?;
                (cfg.document.spec, cfg.document.cutoff, cfg.grid, cfg.output.unwrap_or_default(), cfg.k)
            }
            None => (model_from_flags(model)?, CutoffChoice::Auto, None, OutputSection::default(), None),
        };
        let cutoff = model.cutoff.unwrap_or(cutoff);
        let grid = sweep
            .or(cfg_grid)
            .unwrap_or_else(|| Sweep::single(SweepParam::Lambda, SweepParam::Lambda.current(&spec)));
        let output = out.output.clone().or(cfg_out.path);
        let format = match (out.format, cfg_out.format.as_deref()) {
            (Some(f), _) => f,
            (None, Some(f)) => Format::from_str(f, true)
                .map_err(|_| Error::Config(format!("unknown output format {f:?}")))?,
            (None, None) => format_from_path(output.as_deref()),
        };
        Ok(RunConfig { model: spec, cutoff, grid, output, format, k: k.or(cfg_k) })
    }

    fn points(&self) -> Vec<(f64, ModelSpec)> {
        self.grid
            .range
            .values()
            .into_iter()
            .map(|v| (v, self.grid.parameter.apply(&self.model, v)))
            .collect()
    }

    fn document(&self) -> ModelDocument {
        ModelDocument { spec: self.model.clone(), cutoff: self.cutoff }
    }
}

fn format_from_path(path: Option<&Path>) -> Format {
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn model_from_flags(a: &ModelArgs) -> Result<ModelSpec> {
    let kind = a.model.unwrap_or(ModelKind::H2b);
    let delta = a.delta.unwrap_or(0.01);
    let eps = a.epsilon.unwrap_or(0.0);
    let eta = a.eta.unwrap_or(0.0);
    let omega = a.omega.unwrap_or(1.0);
    let lambda = a.lambda.unwrap_or(0.0);
    let axis = a.axis.unwrap_or(IsingAxis::XX);
    let n = a.n_spins.unwrap_or(3);
    if a.n_spins.is_some() && !matches!(kind, ModelKind::Star | ModelKind::Chain) {
        return Err(Error::InvalidParameter("--n-spins applies to star and chain models".into()));
    }
    let spec = match kind {
        ModelKind::Brm => ModelSpec::biased_rabi(delta, omega, lambda, eta),
        ModelKind::H2 | ModelKind::H2b => {
            if kind == ModelKind::H2 && eta != 0.0 {
                return Err(Error::InvalidParameter("h2 is the unbiased model; use h2b for eta != 0".into()));
            }
            ModelSpec::two_spin(delta, omega, lambda, eps, eta, axis)
        }
        ModelKind::Star | ModelKind::Chain => {
            if n < 2 {
                return Err(Error::InvalidParameter("star and chain need at least two spins".into()));
            }
            let edges = vec![eps; n - 1];
            if kind == ModelKind::Star {
                ModelSpec::star(delta, omega, lambda, &edges, eta, axis)
            } else {
                ModelSpec::chain(delta, omega, lambda, &edges, eta, axis)
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(stderr, "error: code=usage {line}");
            return 1;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: code={} {}", e.code(), e.to_string().replace('\n', " "));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Spectrum(a) => {
            let cfg = RunConfig::resolve(&a.model, a.sweep, a.k, &a.out)?;
            let table = spectrum_table(&cfg)?;
            emit(&cfg, &table, stdout)?;
            Ok(0)
        }
        Command::Parity(a) => {
            let cfg = RunConfig::resolve(&a.model, a.sweep, None, &a.out)?;
            let table = parity_table(&cfg)?;
            emit(&cfg, &table, stdout)?;
            Ok(0)
        }
        Command::Adiabatic(a) => {
            let cfg = RunConfig::resolve(&a.model, a.sweep, None, &a.out)?;
            let table = adiabatic_table(&cfg, a.m_max, a.exact)?;
            emit(&cfg, &table, stdout)?;
            Ok(0)
        }
        Command::Converge(a) => {
            let cfg = RunConfig::resolve(&a.model, None, a.k, &a.out)?;
            let table = converge_table(&cfg, a.cutoffs.as_deref())?;
            emit(&cfg, &table, stdout)?;
            Ok(0)
        }
        Command::Scaling(a) => run_scaling(&a, stdout, stderr),
        Command::IonMap(a) => run_ion_map(&a, stdout),
        Command::Verify(a) => run_verify(&a, stdout),
    }
}

fn open_output(path: Option<&Path>, stdout: &mut dyn Write, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => write(stdout),
    }
}

fn write_table(
    table: &Table,
    doc: &ModelDocument,
    extra: &[(&str, String)],
    format: Format,
    path: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    open_output(path, stdout, |w| match format {
        Format::Csv => {
            let mut comments = vec![("spec", doc.digest())];
            comments.extend(extra.iter().cloned());
            table.write_csv(w, &comments)
        }
        Format::Json => {
            let mut meta = vec![("spec", serde_json::to_value(doc).expect("document serializes"))];
            meta.extend(extra.iter().map(|(k, v)| (*k, Value::from(v.as_str()))));
            table.write_json(w, &meta)
        }
    })
}

fn emit(cfg: &RunConfig, table: &Table, stdout: &mut dyn Write) -> Result<()> {
    let extra = [("sweep", cfg.grid.to_string())];
    write_table(table, &cfg.document(), &extra, cfg.format, cfg.output.as_deref(), stdout)
}

/// Lowest `k` levels and the cutoff used.
fn levels(spec: &ModelSpec, cutoff: CutoffChoice, k: usize) -> Result<(usize, Vec<f64>)> {
    match cutoff {
        CutoffChoice::Auto => {
            let s = solve_converged(spec, k, CUTOFF_STEP)?;
            Ok((s.cutoff, s.spectrum.eigenvalues()[..k.min(s.spectrum.len())].to_vec()))
        }
        CutoffChoice::Fixed(n) => {
            let h = build_hamiltonian(spec, BosonBasis::new(n))?;
            let s = eigendecompose(&h, Some(k))?;
            Ok((n, s.eigenvalues()[..k.min(s.len())].to_vec()))
        }
    }
}

fn spectrum_table(cfg: &RunConfig) -> Result<Table> {
    let k = cfg.k.unwrap_or(4);
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut columns = vec![cfg.grid.parameter.name().to_string(), "cutoff".into()];
    columns.extend((0..k).map(|i| format!("e{i}")));
    let rows: Vec<(f64, usize, Vec<f64>)> = cfg
        .points()
        .par_iter()
        .map(|(v, spec)| levels(spec, cfg.cutoff, k).map(|(c, e)| (*v, c, e)))
        .collect::<Result<_>>()?;
    let mut table = Table::new(columns);
    for (v, c, e) in rows {
        if e.len() < k {
            return Err(Error::InvalidParameter(format!("only {} levels exist, k = {k}", e.len())));
        }
        let mut row = vec![Cell::from(v), Cell::from(c)];
        row.extend(e.into_iter().map(Cell::from));
        table.push(row)?;
    }
    Ok(table)
}

fn parity_table(cfg: &RunConfig) -> Result<Table> {
    let rows: Vec<Vec<Cell>> = cfg
        .points()
        .par_iter()
        .map(|(v, spec)| {
            let cutoff = match cfg.cutoff {
                CutoffChoice::Auto => seed_cutoff(spec.displacement()),
                CutoffChoice::Fixed(n) => n,
            };
            let basis = BosonBasis::new(cutoff);
            let h = build_hamiltonian(spec, basis)?;
            let p = build_parity(spec.n_spins, basis)?;
            let norms = commutator_norms(&h, &p)?;
            Ok(vec![
                Cell::from(*v),
                Cell::from(cutoff),
                Cell::from(h.frobenius_norm()),
                Cell::from(norms.frobenius),
                Cell::from(norms.spectral),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new([
        cfg.grid.parameter.name(),
        "cutoff",
        "h_frobenius",
        "commutator_frobenius",
        "commutator_spectral",
    ]);
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

fn adiabatic_table(cfg: &RunConfig, m_max: usize, exact: bool) -> Result<Table> {
    if cfg.model.ising_axis != IsingAxis::XX {
        return Err(Error::InvalidModel("adiabatic levels describe the xx coupling".into()));
    }
    TwoSpinParams::from_spec(&cfg.model)?;
    let mut columns: Vec<String> = vec![cfg.grid.parameter.name().into(), "m".into()];
    columns.extend(["e1_minus", "e1_plus", "e2_minus", "e2_plus"].map(String::from));
    if exact {
        columns.push("cutoff".into());
        columns.extend((0..4).map(|i| format!("exact_{i}")));
    }
    let rows: Vec<Vec<Vec<Cell>>> = cfg
        .points()
        .par_iter()
        .map(|(v, spec)| {
            let p = TwoSpinParams::from_spec(spec)?;
            let exact_levels = if exact { Some(levels(spec, cfg.cutoff, 4)?) } else { None };
            Ok((0..=m_max)
                .map(|m| {
                    let mut row = vec![Cell::from(*v), Cell::from(m)];
                    row.extend(adiabatic_energies(m, &p).iter().map(|l| Cell::from(l.energy)));
                    if let Some((c, e)) = &exact_levels {
                        row.push(Cell::from(*c));
                        row.extend(e.iter().map(|&x| Cell::from(x)));
                    }
                    row
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(columns);
    for row in rows.into_iter().flatten() {
        table.push(row)?;
    }
    Ok(table)
}

fn parse_cutoffs(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidParameter(format!("cannot parse cutoffs {text:?}"));
    if text.contains(':') {
        let r: Range = text.parse()?;
        if r.start < 0.0 || r.stop < r.start {
            return Err(bad());
        }
        Ok(r.values().into_iter().map(|v| v.round() as usize).collect())
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn converge_table(cfg: &RunConfig, cutoffs: Option<&str>) -> Result<Table> {
    let k = cfg.k.unwrap_or(4);
    let spec = &cfg.model;
    let cutoffs = match cutoffs {
        Some(text) => parse_cutoffs(text)?,
        None => {
            let seed = seed_cutoff(spec.displacement());
            (0..7).map(|i| seed + CUTOFF_STEP * i).collect()
        }
    };
    let result = converge_cutoff(spec, &cutoffs, k)?;
    let mut columns = vec!["cutoff".to_string(), "recommended".into()];
    columns.extend((0..k).map(|i| format!("e{i}")));
    let mut table = Table::new(columns);
    for row in &result.rows {
        let mut cells = vec![Cell::from(row.cutoff), Cell::from(usize::from(row.cutoff == result.recommended))];
        cells.extend(row.levels.iter().map(|&e| Cell::from(e)));
        table.push(cells)?;
    }
    Ok(table)
}

fn scaling_spec(a: &ScalingArgs) -> Result<(ModelSpec, Option<f64>)> {
    if let Some(path) = &a.config {
        let cfg = read_config(path)?;
        let spec = ModelSpec { coupling: 0.0, ..cfg.document.spec };
        let kappa = kappa_of(&spec).ok();
        return Ok((spec, kappa));
    }
    let kind = a.model.unwrap_or(ModelKind::H2b);
    let delta = a.delta.unwrap_or(0.01);
    let eps = a.epsilon.unwrap_or(0.0);
    let omega = a.omega.unwrap_or(1.0);
    let n = match kind {
        ModelKind::H2b => 2,
        ModelKind::Star | ModelKind::Chain => a.n_spins.unwrap_or(3),
        other => {
            return Err(Error::InvalidParameter(format!(
                "scaling takes h2b, star or chain, got {other:?}"
            )))
        }
    };
    if n < 2 {
        return Err(Error::InvalidParameter("scaling needs at least two spins".into()));
    }
    let edges = vec![eps; n - 1];
    let eta = match (a.kappa, a.eta) {
        (Some(k), None) => {
            if kind == ModelKind::Chain {
                return Err(Error::InvalidParameter("chains have no closed-form kappa; pass --eta".into()));
            }
            let denom = delta - edges.iter().sum::<f64>();
            if denom == 0.0 {
                return Err(Error::DegenerateKappa);
            }
            k * denom
        }
        (None, Some(eta)) => eta,
        _ => return Err(Error::InvalidParameter("pass one of --kappa or --eta".into())),
    };
    let spec = match kind {
        ModelKind::Chain => ModelSpec::chain(delta, omega, 0.0, &edges, eta, IsingAxis::XX),
        _ => ModelSpec::star(delta, omega, 0.0, &edges, eta, IsingAxis::XX),
    };
    spec.validate()?;
    let kappa = kappa_of(&spec).ok();
    Ok((spec, kappa))
}

fn run_scaling(a: &ScalingArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let (spec, kappa) = scaling_spec(a)?;
    for r in [a.beta_rel, a.alpha, a.beta].iter().flatten() {
        r.validate()?;
    }
    let doc = ModelDocument { spec: spec.clone(), cutoff: CutoffChoice::Auto };
    let format = a.out.format.unwrap_or_else(|| format_from_path(a.out.output.as_deref()));
    let (table, failures) = match kappa {
        Some(kappa) => {
            let beta_c = beta_c_of(kappa)?;
            let betas = match (a.beta_rel, a.alpha, a.beta) {
                (_, _, Some(b)) => b.values(),
                (_, Some(al), _) => beta_grid_alpha(beta_c, al.start, al.stop, al.count),
                (Some(r), _, _) => beta_grid_relative(beta_c, r.start, r.stop, r.count),
                _ => beta_grid_relative(beta_c, 0.5, 1.5, 41),
            };
            if betas.iter().any(|&b| !(b >= 0.0)) {
                return Err(Error::InvalidParameter("beta grid reaches negative beta".into()));
            }
            let curve = scaling_curve(&spec, &betas)?;
            let failures: Vec<(f64, String)> = curve
                .rows
                .iter()
                .filter_map(|r| r.error.clone().map(|e| (r.beta, e)))
                .collect();
            (curve.to_table(), failures)
        }
        None => {
            let Some(b) = a.beta else {
                return Err(Error::InvalidParameter(
                    "no closed-form kappa for this topology; pass an absolute --beta grid".into(),
                ));
            };
            if !(b.start >= 0.0 && b.stop >= 0.0) {
                return Err(Error::InvalidParameter("beta grid reaches negative beta".into()));
            }
            let points = magnetization_curve(&spec, &b.values(), a.site);
            let mut table = Table::new(SCALING_COLUMNS);
            let mut failures = Vec::new();
            for p in points {
                if let Some(e) = &p.error {
                    failures.push((p.beta, e.clone()));
                }
                table.push(vec![
                    Cell::Empty,
                    p.beta.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    p.sigma_z.into(),
                    p.cutoff.into(),
                ])?;
            }
            (table, failures)
        }
    };
    write_table(&table, &doc, &[], format, a.out.output.as_deref(), stdout)?;
    for (beta, e) in &failures {
        let _ = writeln!(stderr, "warning: row beta={beta} failed: {e}");
    }
    if failures.is_empty() {
        Ok(0)
    } else {
        let _ = writeln!(stderr, "error: code=row_failures {} of {} rows failed", failures.len(), table.rows().len());
        Ok(2)
    }
}

fn run_ion_map(a: &IonMapArgs, stdout: &mut dyn Write) -> Result<i32> {
    let params = IonParams {
        rabi: a.rabi,
        detuning: a.detuning,
        trap_freq: a.trap_freq,
        lamb_dicke: a.lamb_dicke,
        splitting: a.splitting,
        ion_coupling: a.ion_coupling,
    };
    let spec = ion_param_map(&params)?;
    let doc = ModelDocument { spec: spec.clone(), cutoff: CutoffChoice::Auto };
    if let Some(path) = &a.emit_config {
        std::fs::write(path, doc.to_toml())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut table = Table::new([
        "n_spins",
        "tunneling_1",
        "tunneling_2",
        "boson_freq",
        "coupling",
        "epsilon_12",
        "bias_1",
        "bias_2",
        "ising_axis",
    ]);
    table.push(vec![
        spec.n_spins.into(),
        spec.tunneling[0].into(),
        spec.tunneling[1].into(),
        spec.boson_freq.into(),
        spec.coupling.into(),
        spec.ising_edges[0].strength.into(),
        spec.bias[0].into(),
        spec.bias[1].into(),
        spec.ising_axis.as_str().into(),
    ])?;
    let format = a.out.format.unwrap_or_else(|| format_from_path(a.out.output.as_deref()));
    write_table(&table, &doc, &[], format, a.out.output.as_deref(), stdout)?;
    Ok(0)
}

fn run_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let forced_cutoff = match &a.force_cutoff {
        Some(text) => {
            let bad = || Error::InvalidParameter(format!("expected q:cutoff, got {text:?}"));
            let (q, c) = text.split_once(':').ok_or_else(bad)?;
            Some(ForcedCutoff { q: q.trim().parse().map_err(|_| bad())?, cutoff: c.trim().parse().map_err(|_| bad())? })
        }
        None => None,
    };
    let opts = VerifyOptions { inject_d_sign_error: a.inject_d_sign_error, forced_cutoff };
    let ids: Vec<u8> = match &a.criteria {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad criterion {s:?}"))))
            .collect::<Result<_>>()?,
        None => acceptance::CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut reports = Vec::new();
    for id in ids {
        let r = acceptance::run_criterion(id, &opts)?;
        if a.out.output.is_some() {
            writeln!(stdout, "{r}")?;
        }
        reports.push(r);
    }
    let mut table = Table::new(["criterion", "name", "passed", "seconds", "budget_seconds", "detail"]);
    for r in &reports {
        table.push(vec![
            usize::from(r.id).into(),
            r.name.into(),
            usize::from(r.passed).into(),
            r.seconds.into(),
            r.budget_seconds.into(),
            r.detail.as_str().into(),
        ])?;
    }
    if a.out.output.is_some() {
        let format = a.out.format.unwrap_or_else(|| format_from_path(a.out.output.as_deref()));
        open_output(a.out.output.as_deref(), stdout, |w| match format {
            Format::Csv => table.write_csv(w, &[]),
            Format::Json => table.write_json(w, &[]),
        })?;
    } else {
        for r in &reports {
            writeln!(stdout, "{r}")?;
        }
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        Err(Error::AcceptanceFailed(failed.join(",")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "lambda=0:1:51".parse().unwrap();
        assert_eq!(s.parameter, SweepParam::Lambda);
        assert_eq!(s.range.values().len(), 51);
        assert_eq!(s.to_string(), "lambda=0:1:51");
        assert!("lambda=0:1:0".parse::<Sweep>().is_err());
        assert!("mu=0:1:3".parse::<Sweep>().is_err());
        assert!("lambda=0:1".parse::<Sweep>().is_err());
        let r: Range = "-0.3:0.3:7".parse().unwrap();
        assert_eq!(r.values()[0], -0.3);
    }

    #[test]
    fn eta_sweep_targets_biased_spin() {
        let chain = ModelSpec::chain(0.01, 1.0, 0.0, &[0.001, 0.001], 1e-4, IsingAxis::XX);
        let moved = SweepParam::Eta.apply(&chain, 0.5);
        assert_eq!(moved.bias, vec![0.0, 0.0, 0.5]);
        assert_eq!(SweepParam::Eta.current(&moved), 0.5);
        let star = ModelSpec::star(0.01, 1.0, 0.0, &[0.001, 0.002], 0.0, IsingAxis::XX);
        let swept = SweepParam::Epsilon.apply(&star, 0.3);
        assert!(swept.ising_edges.iter().all(|e| e.strength == 0.3));
    }

    #[test]
    fn model_flags() {
        let a = ModelArgs { model: Some(ModelKind::H2), eta: Some(0.1), ..Default::default() };
        assert!(model_from_flags(&a).is_err());
        let a = ModelArgs { model: Some(ModelKind::Star), n_spins: Some(4), epsilon: Some(0.002), ..Default::default() };
        let spec = model_from_flags(&a).unwrap();
        assert_eq!(spec.n_spins, 4);
        assert_eq!(spec.ising_edges.len(), 3);
        let a = ModelArgs { model: Some(ModelKind::H2b), n_spins: Some(4), ..Default::default() };
        assert!(model_from_flags(&a).is_err());
    }

    #[test]
    fn cutoff_lists() {
        assert_eq!(parse_cutoffs("20,30,45").unwrap(), vec![20, 30, 45]);
        assert_eq!(parse_cutoffs("20:40:3").unwrap(), vec![20, 30, 40]);
        assert!(parse_cutoffs("a,b").is_err());
    }
}
