//! Command-line entry point: config loading, dispatch and artifact output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::capacities::CapacityLaw;
use crate::deviations::{cutset_from_samples, rate_from_samples, run_phi, sample_meshes};
use crate::geometry::{unit_cube_domain, Domain, UnitVector};
use crate::maxflow::write_cut_csv;
use crate::nu::{direction_grid, NuPlan, NuTable};
use crate::oracle::selftest;
use crate::surface::{phi_omega_search, results_json, CutFamily};

pub const SCHEMA: &str = "percoflow/1";

const CSV_HELP: &str = "\
Artifacts (written to --out, each through a temporary file and a rename):
  flow       flow.json; cut.csv with columns z0,..,z{d-1},axis,capacity
  nu         nu_table.json; nu.csv with columns direction,n,replicas,mean,stderr
  rate       rate.csv with columns n,replicas,hits,p_hat,wilson_lo,wilson_hi,r_n
  cutset     cutset.csv with columns n,beta,tail
  phi-omega  phi_omega.json
Every command with --out also writes manifest.json. CSV files start with a
'# seed=<seed>' comment line.

Domains: 'square' and 'cube' are the unit square and cube with the source on
the face x0 = 0 and the sink on x0 = 1; anything else is read as a domain
JSON file. Laws are JSON, e.g. '{\"kind\":\"bernoulli\",\"p\":0.6,\"a\":1}'.";

#[derive(Debug, Parser)]
#[command(name = "percoflow", version, about = "Maximal flows in first-passage percolation", after_help = CSV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve φ_n for one seed and print its value and cut size.
    Flow(Flags),
    /// Estimate the flow constant ν over a direction grid.
    Nu(Flags),
    /// Lower-deviation rates of φ_n below λ n^{d-1}.
    Rate(Flags),
    /// Tails of the minimal cut size over a β grid.
    Cutset(Flags),
    /// Search half-space cuts for the minimal surface energy.
    PhiOmega(Flags),
    /// Run the brute-force max-flow oracle suite.
    Selftest(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Flow(f) => ("flow", f),
            Command::Nu(f) => ("nu", f),
            Command::Rate(f) => ("rate", f),
            Command::Cutset(f) => ("cutset", f),
            Command::PhiOmega(f) => ("phi-omega", f),
            Command::Selftest(f) => ("selftest", f),
        }
    }
}

/// Flags; each one mirrors the config key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, value_parser = parse_law)]
    pub law: Option<CapacityLaw>,
    #[arg(long)]
    pub n: Option<u32>,
    /// Comma-separated meshes, e.g. 4,8,16.
    #[arg(long, value_delimiter = ',')]
    pub meshes: Option<Vec<u32>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threshold λ for `rate`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// λ as a multiple of ν̂(e₁) from --nu-table.
    #[arg(long)]
    pub lambda_factor: Option<f64>,
    /// Comma-separated β grid for `cutset`.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Dimension of the default direction grid.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Explicit directions as `x,y;x,y;...`.
    #[arg(long, value_parser = parse_directions)]
    pub directions: Option<Directions>,
    /// Offsets per direction for `phi-omega`.
    #[arg(long)]
    pub offsets: Option<usize>,
    /// ν table JSON for `phi-omega` and `rate --lambda-factor`.
    #[arg(long)]
    pub nu_table: Option<PathBuf>,
    /// Side of the cylinder base for `nu`.
    #[arg(long)]
    pub side: Option<f64>,
    /// Cylinder half-height for `nu`.
    #[arg(long)]
    pub h: Option<f64>,
    /// Instance count for `selftest`.
    #[arg(long)]
    pub count: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directions(pub Vec<Vec<f64>>);

fn parse_law(s: &str) -> std::result::Result<CapacityLaw, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn parse_directions(s: &str) -> std::result::Result<Directions, String> {
    s.split(';')
        .map(|v| {
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
                .collect()
        })
        .collect::<std::result::Result<_, _>>()
        .map(Directions)
}

/// Merged configuration; the echo of this struct goes into every manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<CapacityLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meshes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Directions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a config file, reporting syntax errors by line and column.
pub fn parse_config(text: &str, origin: &str) -> CliResult<ExperimentConfig> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
}

impl ExperimentConfig {
    /// Config file (if any) overlaid with the flags that were given.
    pub fn load(command: &str, flags: &Flags) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                parse_config(&text, &path.display().to_string())?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(c) = &cfg.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for command {c:?}, invoked as {command:?}"
                )));
            }
        }
        cfg.command = Some(command.to_string());
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if flags.$field.is_some() { cfg.$field = flags.$field.clone(); })*
            };
        }
        overlay!(
            domain,
            law,
            n,
            meshes,
            replicas,
            seed,
            out,
            lambda,
            lambda_factor,
            betas,
            dim,
            directions,
            offsets,
            nu_table,
            side,
            h,
            count,
            workers
        );
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON echo.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn require<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| {
        CliError::Config(format!("missing required key --{}", key.replace('_', "-")))
    })
}

fn load_domain(spec: &str) -> CliResult<Domain> {
    match spec {
        "square" => Ok(unit_cube_domain(2)),
        "cube" => Ok(unit_cube_domain(3)),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("domain {path}: {e}")))?;
            Domain::from_json(&text).map_err(|e| CliError::Config(format!("domain {path}: {e}")))
        }
    }
}

fn load_table(path: &Path) -> CliResult<NuTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("nu table {}: {e}", path.display())))?;
    NuTable::from_json(&text)
        .map_err(|e| CliError::Config(format!("nu table {}: {e}", path.display())))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Output directory plus the list of artifacts written so far.
struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, seed: u64, body: Vec<u8>) -> CliResult<()> {
        let mut bytes = format!("# seed={seed}\n").into_bytes();
        bytes.extend(body);
        self.write(name, &bytes)
    }

    fn manifest(mut self, cfg: &ExperimentConfig, started: Instant) -> CliResult<()> {
        let manifest = json!({
            "schema": SCHEMA,
            "command": cfg.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "config": cfg,
            "artifacts": self.written,
            "wall_seconds": started.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        self.write("manifest.json", text.as_bytes())
    }
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("[percoflow] {}", msg.as_ref());
}

/// Runs one command; standard output receives the machine-readable summary.
pub fn run(command: &str, cfg: &ExperimentConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cfg.workers {
            if w == 0 {
                return Err(CliError::Config("workers must be positive".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Runtime(e.to_string()))?
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(command, cfg, &mut buf));
    stdout.write_all(&buf)?;
    result
}

fn dispatch(command: &str, cfg: &ExperimentConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let started = Instant::now();
    match command {
        "flow" => flow(cfg, stdout, started),
        "nu" => nu(cfg, stdout, started),
        "rate" => rate(cfg, stdout, started),
        "cutset" => cutset(cfg, stdout, started),
        "phi-omega" => phi_omega(cfg, stdout, started),
        "selftest" => self_test(cfg, stdout),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}

fn flow(cfg: &ExperimentConfig, stdout: &mut dyn Write, started: Instant) -> CliResult<()> {
    let domain = load_domain(&require(&cfg.domain, "domain")?)?;
    let law = require(&cfg.law, "law")?;
    let n = require(&cfg.n, "n")?;
    let seed = require(&cfg.seed, "seed")?;
    law.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let run = run_phi(&domain, &law, n, seed)?;
    writeln!(stdout, "φ_n={}, cut_size={}", run.phi, run.cut_size)?;
    if let Some(dir) = &cfg.out {
        let mut out = Output::new(dir.clone())?;
        let mut summary = serde_json::to_value(&run).expect("run serializes");
        summary["schema"] = json!(SCHEMA);
        out.write(
            "flow.json",
            serde_json::to_string_pretty(&summary).unwrap().as_bytes(),
        )?;
        if let Some(flow) = &run.flow {
            let exp = crate::deviations::PhiExperiment::new(&domain, n)?;
            let caps = crate::maxflow::edge_capacities(
                exp.graph(),
                &crate::capacities::CapacityField::new(law, seed),
            );
            let mut body = Vec::new();
            write_cut_csv(&mut body, exp.graph(), &flow.cutset, &caps)?;
            out.csv("cut.csv", seed, body)?;
        }
        out.manifest(cfg, started)?;
    }
    Ok(())
}

fn directions_for(cfg: &ExperimentConfig) -> CliResult<Vec<UnitVector>> {
    match &cfg.directions {
        Some(Directions(list)) => list
            .iter()
            .map(|v| UnitVector::normalize(v).map_err(|e| CliError::Config(e.to_string())))
            .collect(),
        None => Ok(direction_grid(cfg.dim.unwrap_or(2))),
    }
}

fn nu_plan(cfg: &ExperimentConfig) -> CliResult<NuPlan> {
    let mut plan = NuPlan::new(
        require(&cfg.meshes, "meshes")?,
        require(&cfg.replicas, "replicas")?,
        require(&cfg.seed, "seed")?,
    );
    if let Some(side) = cfg.side {
        plan.side = side;
    }
    if let Some(h) = cfg.h {
        plan.h = h;
    }
    Ok(plan)
}

fn nu(cfg: &ExperimentConfig, stdout: &mut dyn Write, started: Instant) -> CliResult<()> {
    let law = require(&cfg.law, "law")?;
    let plan = nu_plan(cfg)?;
    let dir = require(&cfg.out, "out")?;
    let directions = directions_for(cfg)?;
    progress(format!("estimating ν over {} directions", directions.len()));
    let table = NuTable::estimate(&directions, &law, &plan)?;
    let mut body = String::from("direction,n,replicas,mean,stderr\n");
    for e in &table.entries {
        let v: Vec<String> = e.v.iter().map(f64::to_string).collect();
        for m in &e.meshes {
            body += &format!(
                "{},{},{},{},{}\n",
                v.join(" "),
                m.n,
                m.replicas,
                m.mean,
                m.stderr
            );
        }
    }
    let mut out = Output::new(dir)?;
    out.write("nu_table.json", table.to_json().as_bytes())?;
    out.csv("nu.csv", plan.seed, body.into_bytes())?;
    out.manifest(cfg, started)?;
    writeln!(
        stdout,
        "{}",
        json!({"schema": SCHEMA, "directions": table.entries.len(), "nu_min": table.nu_min(), "nu_max": table.nu_max()})
    )?;
    Ok(())
}

fn lambda_for(cfg: &ExperimentConfig, dim: usize) -> CliResult<f64> {
    match (cfg.lambda, cfg.lambda_factor) {
        (Some(l), None) => Ok(l),
        (None, Some(f)) => {
            let table = load_table(&require(&cfg.nu_table, "nu_table")?)?;
            let e1 = UnitVector::axis(dim, 0);
            Ok(f * table.lookup(e1.as_slice())?.value)
        }
        (Some(_), Some(_)) => Err(CliError::Config(
            "give one of --lambda and --lambda-factor".into(),
        )),
        (None, None) => Err(CliError::Config("missing required key --lambda".into())),
    }
}

fn rate(cfg: &ExperimentConfig, stdout: &mut dyn Write, started: Instant) -> CliResult<()> {
    let domain = load_domain(&require(&cfg.domain, "domain")?)?;
    let law = require(&cfg.law, "law")?;
    let meshes = require(&cfg.meshes, "meshes")?;
    let replicas = require(&cfg.replicas, "replicas")?;
    let seed = require(&cfg.seed, "seed")?;
    let dir = require(&cfg.out, "out")?;
    let lambda = lambda_for(cfg, domain.dim())?;
    if replicas == 0 {
        return Err(CliError::Config("replicas must be positive".into()));
    }
    progress(format!(
        "sampling φ_n for meshes {meshes:?}, {replicas} replicas each"
    ));
    let samples = sample_meshes(&domain, &law, &meshes, replicas, seed)?;
    let est = rate_from_samples(&samples, &law, lambda, seed, domain.dim());
    for w in &est.warnings {
        progress(format!("warning: {w}"));
    }
    let mut body = Vec::new();
    est.write_csv(&mut body)?;
    let mut out = Output::new(dir)?;
    out.csv("rate.csv", seed, body)?;
    out.manifest(cfg, started)?;
    writeln!(
        stdout,
        "{}",
        json!({"schema": SCHEMA, "lambda": lambda, "verdict": est.verdict})
    )?;
    Ok(())
}

fn cutset(cfg: &ExperimentConfig, stdout: &mut dyn Write, started: Instant) -> CliResult<()> {
    let domain = load_domain(&require(&cfg.domain, "domain")?)?;
    let law = require(&cfg.law, "law")?;
    let meshes = require(&cfg.meshes, "meshes")?;
    let replicas = require(&cfg.replicas, "replicas")?;
    let seed = require(&cfg.seed, "seed")?;
    let betas = require(&cfg.betas, "betas")?;
    let dir = require(&cfg.out, "out")?;
    progress(format!("sampling cut sizes for meshes {meshes:?}"));
    let samples = sample_meshes(&domain, &law, &meshes, replicas, seed)?;
    let stats = cutset_from_samples(&samples, &betas);
    let mut body = Vec::new();
    stats.write_csv(&mut body)?;
    let mut out = Output::new(dir)?;
    out.csv("cutset.csv", seed, body)?;
    out.manifest(cfg, started)?;
    let q99: Vec<f64> = stats.points.iter().map(|p| p.q99).collect();
    writeln!(
        stdout,
        "{}",
        json!({"schema": SCHEMA, "q99": q99, "tails_shrink": stats.tails_shrink})
    )?;
    Ok(())
}

fn phi_omega(cfg: &ExperimentConfig, stdout: &mut dyn Write, started: Instant) -> CliResult<()> {
    let domain = load_domain(&require(&cfg.domain, "domain")?)?;
    let dir = require(&cfg.out, "out")?;
    let offsets = cfg.offsets.unwrap_or(19);
    let (table, reference) = match &cfg.nu_table {
        Some(path) => (load_table(path)?, path.display().to_string()),
        None => {
            let law = require(&cfg.law, "law")?;
            let plan = nu_plan(cfg)?;
            progress("no --nu-table given; estimating ν on the default grid");
            let table = NuTable::estimate(&direction_grid(domain.dim()), &law, &plan)?;
            (table, "nu_table.json".to_string())
        }
    };
    let family = CutFamily::grid(domain.dim(), offsets);
    let result = phi_omega_search(&domain, &table, &family)?;
    let mut out = Output::new(dir)?;
    if cfg.nu_table.is_none() {
        out.write("nu_table.json", table.to_json().as_bytes())?;
    }
    out.write(
        "phi_omega.json",
        results_json(&result, &family, &reference).as_bytes(),
    )?;
    out.manifest(cfg, started)?;
    writeln!(
        stdout,
        "{}",
        json!({"schema": SCHEMA, "phi_omega_hat": result.phi_omega_hat, "argmin": result.argmin})
    )?;
    Ok(())
}

fn self_test(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let count = cfg.count.unwrap_or(500);
    let seed = cfg.seed.unwrap_or(0);
    let report = selftest(count, seed);
    writeln!(
        stdout,
        "{}",
        json!({"schema": SCHEMA, "instances": report.instances, "failures": report.failures})
    )?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} of {} oracle instances failed",
            report.failures.len(),
            count
        )))
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, flags) = cli.command.parts();
    let result = ExperimentConfig::load(name, flags).and_then(|cfg| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        run(name, &cfg, &mut lock)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("percoflow: {e}");
            e.exit_code()
        }
    }
}
