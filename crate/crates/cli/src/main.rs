mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use percobound::Error;

#[derive(Parser, Debug)]
#[command(name = "percobound", version, about = "Percolation functional, packing certificates and disconnection bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate φ_p^v(S) for S a ball or box around v.
    Phi(PhiArgs),
    /// Certify a lower bound on the critical probability.
    PcBound(PcArgs),
    /// Certify a packing number on the iteratively punctured graph.
    Pack(PackArgs),
    /// Compare simulated disconnection with both bounds.
    VerifyBound(VerifyArgs),
    /// Truncated disconnection of S at several radii.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// lattice:<d>, tree:<b> or file:<path>
    #[arg(long)]
    pub graph: String,
    /// Radius up to which the graph is materialized; derived from the
    /// other parameters when omitted.
    #[arg(long)]
    pub truncation: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Directory for the JSON and CSV outputs; JSON goes to stdout otherwise.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// key = value config file; command-line flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball,
    Box,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Auto,
    Exact,
    Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Conventions {
    /// Let the path start at a closed source.
    #[arg(long)]
    pub source_may_be_closed: bool,
    /// Let the path end on an open non-interior neighbor of y.
    #[arg(long)]
    pub non_interior_endpoints: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct PhiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub p: f64,
    /// Source vertex v; the graph origin when omitted.
    #[arg(long)]
    pub origin: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub ball: u32,
    #[arg(long, value_enum, default_value_t = Shape::Ball)]
    pub shape: Shape,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, default_value_t = percobound::phi::DEFAULT_EXACT_CAP)]
    pub exact_cap: usize,
    #[arg(long, default_value_t = 20_000)]
    pub replicas: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub conventions: Conventions,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct PcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Largest witness radius.
    #[arg(long)]
    pub rmax: u32,
    #[arg(long, default_value_t = 0.05)]
    pub eps0: f64,
    #[arg(long, value_enum, default_value_t = Shape::Ball)]
    pub shape: Shape,
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Vertices that must all carry a witness, separated by ';'. The graph
    /// origin when omitted.
    #[arg(long)]
    pub origin: Option<String>,
    #[arg(long, default_value_t = percobound::phi::DEFAULT_EXACT_CAP)]
    pub exact_cap: usize,
    #[arg(long, default_value_t = 20_000)]
    pub replicas: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub conventions: Conventions,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SetArgs {
    /// Explicit vertices separated by ';', e.g. "(0,0);(4,0)".
    #[arg(long, conflicts_with = "segment_length")]
    pub set: Option<String>,
    /// Segment of lattice points on the first axis around the origin.
    #[arg(long)]
    pub segment_length: Option<u32>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilArg {
    Proxy,
    Analytic,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PackingArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub dmin: u32,
    #[arg(long, default_value_t = 3)]
    pub dmax: u32,
    #[arg(long, default_value_t = 16)]
    pub rproxy: u32,
    /// Try every n-th vertex of S in generator order first.
    #[arg(long)]
    pub spacing: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub replicas: u64,
    #[arg(long, value_enum, default_value_t = WilArg::Proxy)]
    pub wil: WilArg,
    /// p1 of the analytic connection bound.
    #[arg(long)]
    pub p1: Option<f64>,
    /// ε1 of the analytic connection bound.
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Upper estimate of the critical probability.
    #[arg(long)]
    pub pc_estimate: Option<f64>,
    /// Audit radius of the analytic route.
    #[arg(long, default_value_t = 3)]
    pub audit_rmax: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct PackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub packing: PackingArgs,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub c: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub packing: PackingArgs,
    /// Grid values of ε, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.4])]
    pub eps: Vec<f64>,
    /// Grid values of δ, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.4])]
    pub delta: Vec<f64>,
    /// Grid values of p1; eight geometric values in (p̃c, p) when omitted.
    #[arg(long, value_delimiter = ',')]
    pub grid_p1: Vec<f64>,
    /// ε of the packing form.
    #[arg(long, default_value_t = 0.2)]
    pub lemma_eps: f64,
    /// c of the packing form.
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    #[arg(long)]
    pub p: f64,
    /// Truncation radii, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16])]
    pub radii: Vec<u32>,
    #[arg(long, default_value_t = 20_000)]
    pub replicas: u64,
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Done,
    Violation,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TruncationTooSmall(_) | Error::Resource(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Phi(a) => commands::phi_cmd(a),
        Command::PcBound(a) => commands::pc_bound(a),
        Command::Pack(a) => commands::pack(a),
        Command::VerifyBound(a) => commands::verify_bound(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
