//! The `locsim` command line.
//!
//! Exit codes: 0 affirmative verdict or success, 1 negative verdict, 2 input
//! or usage error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::generate::{self, Seed};
use crate::io::{self, matrix_to_rows, RawInput};
use crate::linalg::CMatrix;
use crate::protocol_sim::compare_branches;
use crate::report::{InputDigest, Report, Verdict, SCHEMA_VERSION};
use crate::schmidt::{self, check_schmidt_decomposable, degeneracy_blocks, schmidt_decompose, Decomposability, WitnessKind};
use crate::tensor::{permute_parties, phase_invariant_distance, Bipartition, StateVector, NORM_TOL};
use crate::tripartite::{build_frame, construct_simulating_measurement, verify_frame, verify_measure_sim, MeasureSimTolerances};
use crate::unitary_sim::{check_unitary_simulable, oracle_partner, SimTolerances};

pub const EXIT_AFFIRMATIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "locsim", version, about = "Local-operation simulation checks for multipartite pure states")]
pub struct Cli {
    /// Decision tolerance for verdicts.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Seed for generators.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Rescale input states to unit norm instead of rejecting them.
    #[arg(long, global = true)]
    pub renormalize: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Schmidt decomposition across a cut such as `0|1,2`.
    Schmidt {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        cut: String,
    },
    /// Decide whether a state has a multipartite Schmidt form.
    Decomposable {
        #[arg(long)]
        state: PathBuf,
    },
    /// Whether Alice can reproduce Bob's unitary on a bipartite state.
    #[command(subcommand)]
    UnitarySim(UnitarySimCommand),
    /// Tripartite Schmidt frame.
    #[command(subcommand)]
    Frame(FrameCommand),
    /// Construct the target party's measurement reproducing the source's.
    MeasureSim(MeasureArgs),
    /// Mirror a measurement across a Schmidt-decomposable state.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Generate instances.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args, Debug)]
pub struct UnitaryArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Bob's unitary.
    #[arg(long)]
    pub op: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum UnitarySimCommand {
    Check(UnitaryArgs),
    Construct(UnitaryArgs),
}

#[derive(Subcommand, Debug)]
pub enum FrameCommand {
    Build {
        #[arg(long)]
        state: PathBuf,
    },
    Verify {
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub measurement: PathBuf,
    /// Party measured originally (letter or index).
    #[arg(long, default_value = "B")]
    pub source: String,
    /// Party that simulates the measurement.
    #[arg(long, default_value = "A")]
    pub target: String,
}

#[derive(Subcommand, Debug)]
pub enum ProtocolCommand {
    Run(MeasureArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Haar-random state.
    State {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[command(flatten)]
        object: ObjectArg,
    },
    /// Haar-random unitary.
    Unitary {
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        object: ObjectArg,
    },
    /// Direct sum of Haar-random unitaries.
    BlockUnitary {
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[command(flatten)]
        object: ObjectArg,
    },
    /// State with prescribed Schmidt multiplicities across `0 | rest`.
    Degenerate {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[command(flatten)]
        object: ObjectArg,
    },
    /// Multipartite Schmidt-form state.
    SchmidtState {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, required_unless_present = "coeffs")]
        rank: Option<usize>,
        /// Explicit coefficients (normalized before use).
        #[arg(long, value_delimiter = ',')]
        coeffs: Option<Vec<f64>>,
        #[command(flatten)]
        object: ObjectArg,
    },
    /// Complete measurement set.
    Measurement {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        outcomes: usize,
        #[arg(long)]
        projective: bool,
        #[command(flatten)]
        object: ObjectArg,
    },
}

#[derive(Args, Debug)]
pub struct ObjectArg {
    /// Also write the generated object as a plain input file.
    #[arg(long)]
    pub object: Option<PathBuf>,
}

/// Result of one command before it is wrapped into a report.
struct Outcome {
    verdict: Verdict,
    results: Value,
}

struct Context {
    tol: f64,
    seed: Seed,
    renormalize: bool,
    inputs: Vec<InputDigest>,
    tolerances: BTreeMap<String, f64>,
}

impl Context {
    fn input(&mut self, role: &str, path: &Path) -> Result<RawInput> {
        let raw = io::read_input(path)?;
        self.inputs.push(InputDigest { role: role.into(), path: raw.path.clone(), sha256: raw.sha256.clone() });
        Ok(raw)
    }

    fn state(&mut self, path: &Path) -> Result<StateVector> {
        let raw = self.input("state", path)?;
        self.tolerance("norm", NORM_TOL);
        io::parse_state(&raw.bytes, NORM_TOL, self.renormalize)
    }

    fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.into(), value);
    }
}

pub fn parse_party(text: &str, parties: usize) -> Result<usize> {
    let t = text.trim();
    let index = match t.as_bytes() {
        [c @ b'A'..=b'Z'] => usize::from(c - b'A'),
        [c @ b'a'..=b'z'] => usize::from(c - b'a'),
        _ => t.parse().map_err(|_| Error::InvalidParameter(format!("unknown party {t:?}")))?,
    };
    if index >= parties {
        return Err(Error::InvalidParameter(format!("party {t} is out of range for {parties} parties")));
    }
    Ok(index)
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn rows(m: &CMatrix) -> Value {
    to_value(&matrix_to_rows(m))
}

fn witness_kind(kind: WitnessKind) -> &'static str {
    match kind {
        WitnessKind::EntangledCofactor => "entangled_cofactor",
        WitnessKind::NonOrthogonalFactors => "non_orthogonal_factors",
    }
}

fn affirm(ok: bool) -> Verdict {
    if ok {
        Verdict::Affirmative
    } else {
        Verdict::Negative
    }
}

fn run_schmidt(ctx: &mut Context, state: &Path, cut: &str) -> Result<Outcome> {
    let state = ctx.state(state)?;
    let cut = Bipartition::parse(cut, state.num_parties())?;
    ctx.tolerance("rank", schmidt::RANK_TOL);
    ctx.tolerance("group", schmidt::GROUP_TOL);
    let sd = schmidt_decompose(&state, &cut, schmidt::RANK_TOL)?;
    let ambient = sd.left_basis.nrows().min(sd.right_basis.nrows());
    let blocks = degeneracy_blocks(&sd.coeffs, ambient, schmidt::GROUP_TOL)?;
    let distance = phase_invariant_distance(&schmidt::reconstruct(&sd), &state)?;
    Ok(Outcome {
        verdict: Verdict::Affirmative,
        results: json!({
            "cut": cut.to_string(),
            "rank": sd.rank(),
            "coeffs": sd.coeffs,
            "spectrum": sd.spectrum(),
            "degeneracy_blocks": {"sizes": blocks.sizes, "values": blocks.values},
            "left_basis": rows(&sd.left_basis),
            "right_basis": rows(&sd.right_basis),
            "reconstruction_distance": distance,
        }),
    })
}

fn run_decomposable(ctx: &mut Context, state: &Path) -> Result<Outcome> {
    let state = ctx.state(state)?;
    ctx.tolerance("decision", ctx.tol);
    Ok(match check_schmidt_decomposable(&state, ctx.tol)? {
        Decomposability::Decomposable(msd) => Outcome {
            verdict: Verdict::Affirmative,
            results: json!({
                "decomposable": true,
                "rank": msd.rank(),
                "coeffs": msd.coeffs,
                "bases": msd.bases.iter().map(rows).collect::<Vec<_>>(),
                "reconstruction_distance": phase_invariant_distance(&msd.to_state(), &state)?,
            }),
        },
        Decomposability::Infeasible(w) => Outcome {
            verdict: Verdict::Negative,
            results: json!({
                "decomposable": false,
                "witness": {"kind": witness_kind(w.kind), "cofactor": w.cofactor, "party": w.party, "value": w.value},
            }),
        },
    })
}

fn run_unitary(ctx: &mut Context, args: &UnitaryArgs, construct: bool) -> Result<Outcome> {
    let state = ctx.state(&args.state)?;
    let raw = ctx.input("operator", &args.op)?;
    let u_b = io::parse_operator(&raw.bytes)?;
    let tols = SimTolerances { decision: ctx.tol, ..SimTolerances::default() };
    for (name, v) in [("decision", tols.decision), ("verify", tols.verify), ("unitarity", tols.unitarity), ("rank", tols.rank), ("group", tols.group)] {
        ctx.tolerance(name, v);
    }
    let verdict = check_unitary_simulable(&state, &u_b, &tols)?;
    let oracle = oracle_partner(&state, &u_b)?;
    let mut results = Map::new();
    results.insert("simulable".into(), json!(verdict.simulable));
    results.insert("offblock_residual".into(), json!(verdict.offblock_residual));
    results.insert("blocks".into(), json!({"sizes": verdict.blocks.sizes, "values": verdict.blocks.values}));
    results.insert("oracle_unitarity_residual".into(), json!(oracle.unitarity_residual));
    if construct {
        if let Some(p) = &verdict.partner {
            results.insert("partner".into(), rows(&p.matrix));
        }
        if let Some(d) = verdict.verification_distance {
            results.insert("verification_distance".into(), json!(d));
        }
    }
    let ok = verdict.simulable && (!construct || verdict.verification_distance.is_some_and(|d| d < tols.verify));
    Ok(Outcome { verdict: affirm(ok), results: Value::Object(results) })
}

fn run_frame(ctx: &mut Context, state: &Path, verify_only: bool) -> Result<Outcome> {
    let state = ctx.state(state)?;
    ctx.tolerance("rank", schmidt::RANK_TOL);
    ctx.tolerance("decision", ctx.tol);
    let frame = build_frame(&state, schmidt::RANK_TOL)?;
    let r = verify_frame(&frame);
    let residuals = json!({"a": r.residual_a, "b": r.residual_b, "c": r.residual_c});
    if verify_only {
        return Ok(Outcome { verdict: affirm(r.max() < ctx.tol), results: json!({ "residuals": residuals }) });
    }
    let coeffs: Vec<[f64; 2]> = frame.coeff_tensor.iter().map(|z| [z.re, z.im]).collect();
    Ok(Outcome {
        verdict: Verdict::Affirmative,
        results: json!({
            "ranks": frame.ranks,
            "spectra": frame.spectra,
            "bases": frame.bases.iter().map(rows).collect::<Vec<_>>(),
            "coeff_tensor": coeffs,
            "residuals": residuals,
            "reconstruction_distance": phase_invariant_distance(&frame.reconstruct(), &state)?,
        }),
    })
}

fn run_measure_sim(ctx: &mut Context, args: &MeasureArgs) -> Result<Outcome> {
    let state = ctx.state(&args.state)?;
    if state.num_parties() != 3 {
        return Err(Error::NotTripartite { parties: state.num_parties() });
    }
    let source = parse_party(&args.source, 3)?;
    let target = parse_party(&args.target, 3)?;
    if source == target {
        return Err(Error::InvalidParameter("source and target must differ".into()));
    }
    let raw = ctx.input("measurement", &args.measurement)?;
    // the frame construction expects the target first and the source second
    let other = 3 - source - target;
    let permuted = permute_parties(&state, &[target, source, other])?;
    let measurement = io::parse_measurement(&raw.bytes, 1)?;
    let tols = MeasureSimTolerances { decision: ctx.tol, ..MeasureSimTolerances::default() };
    ctx.tolerance("rank", schmidt::RANK_TOL);
    ctx.tolerance("support", tols.support);
    ctx.tolerance("decision", tols.decision);
    let frame = build_frame(&permuted, schmidt::RANK_TOL)?;
    let result = construct_simulating_measurement(&frame, &measurement, &tols)?;
    let checks = verify_measure_sim(&frame, &measurement, &result, ctx.tol)?;
    let outcomes: Vec<Value> = checks
        .iter()
        .map(|c| {
            let mut m = Map::new();
            m.insert("outcome".into(), json!(c.outcome_index));
            m.insert("checked".into(), json!(c.checked));
            if let Some(d) = c.aligned_distance {
                m.insert("aligned_distance".into(), json!(d));
            }
            if let Some(d) = c.state_distance {
                m.insert("state_distance".into(), json!(d));
            }
            Value::Object(m)
        })
        .collect();
    let feasible = result.max_feasibility_residual() < ctx.tol;
    Ok(Outcome {
        verdict: affirm(feasible),
        results: json!({
            "source": source,
            "target": target,
            "feasible": feasible,
            "target_operators": result.target_ops.operators.iter().map(rows).collect::<Vec<_>>(),
            "support_operators": result.support_ops.iter().map(rows).collect::<Vec<_>>(),
            "feasibility_residuals": result.feasibility_residuals,
            "obstructions": result.obstructions,
            "completeness_residual": result.completeness_residual,
            "f_constants": result.f_constants,
            "h_constants": result.h_constants,
            "outcomes": outcomes,
        }),
    })
}

fn run_protocol(ctx: &mut Context, args: &MeasureArgs) -> Result<Outcome> {
    let state = ctx.state(&args.state)?;
    let n = state.num_parties();
    let source = parse_party(&args.source, n)?;
    let target = parse_party(&args.target, n)?;
    let raw = ctx.input("measurement", &args.measurement)?;
    let measurement = io::parse_measurement(&raw.bytes, source)?;
    ctx.tolerance("decision", ctx.tol);
    let msd = match check_schmidt_decomposable(&state, ctx.tol)? {
        Decomposability::Decomposable(msd) => msd,
        Decomposability::Infeasible(w) => {
            return Ok(Outcome {
                verdict: Verdict::Negative,
                results: json!({
                    "decomposable": false,
                    "witness": {"kind": witness_kind(w.kind), "cofactor": w.cofactor, "party": w.party, "value": w.value},
                }),
            })
        }
    };
    let report = compare_branches(&msd, &measurement, source, target)?;
    let outcomes: Vec<Value> = report
        .outcomes
        .iter()
        .map(|o| {
            json!({
                "outcome": o.outcome_index,
                "skipped": o.skipped,
                "source_probability": o.source_probability,
                "target_probability": o.target_probability,
                "probability_match": o.probability_match,
                "spectator_distances": o.spectator_distances.iter().map(|&(p, d)| json!({"party": p, "distance": d})).collect::<Vec<_>>(),
                "swap_relation_distance": o.swap_relation_distance,
                "cut_spectra": o.spectra.iter().map(|c| json!({"cut": c.cut.to_string(), "deviation": c.deviation})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mismatches: Vec<Value> = report
        .spectral_mismatches(ctx.tol)
        .iter()
        .map(|m| json!({"outcome": m.outcome_index, "cut": m.cut.to_string(), "deviation": m.deviation}))
        .collect();
    let ok = report.max_probability_match() < ctx.tol
        && report.max_spectator_distance() < ctx.tol
        && report.max_swap_relation_distance() < ctx.tol;
    Ok(Outcome {
        verdict: affirm(ok),
        results: json!({
            "decomposable": true,
            "source": source,
            "target": target,
            "mirrored_operators": report.mirrored.operators.iter().map(rows).collect::<Vec<_>>(),
            "mirrored_completeness_residual": report.mirrored.completeness_residual,
            "max_probability_match": report.max_probability_match(),
            "max_spectator_distance": report.max_spectator_distance(),
            "max_swap_relation_distance": report.max_swap_relation_distance(),
            "spectral_mismatches": mismatches,
            "outcomes": outcomes,
        }),
    })
}

fn write_object(path: Option<&PathBuf>, object: &Value) -> Result<()> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(object).expect("plain data serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run_gen(ctx: &mut Context, cmd: &GenCommand) -> Result<Outcome> {
    let seed = ctx.seed;
    let (kind, object, path) = match cmd {
        GenCommand::State { dims, object } => ("state", to_value(&io::state_file(&generate::gen_random_state(dims, seed)?)), &object.object),
        GenCommand::Unitary { dim, object } => {
            ("unitary", to_value(&io::operator_file(&generate::gen_random_unitary(*dim, seed)?)), &object.object)
        }
        GenCommand::BlockUnitary { blocks, object } => {
            ("block-unitary", to_value(&io::operator_file(&generate::gen_block_unitary(blocks, seed)?)), &object.object)
        }
        GenCommand::Degenerate { dims, blocks, object } => {
            ("degenerate", to_value(&io::state_file(&generate::gen_degenerate_state(dims, blocks, seed)?)), &object.object)
        }
        GenCommand::SchmidtState { dims, rank, coeffs, object } => {
            let state = match (coeffs, rank) {
                (Some(c), _) => generate::gen_schmidt_decomposable_with(dims, c, seed)?,
                (None, Some(r)) => generate::gen_schmidt_decomposable(dims, *r, seed)?,
                (None, None) => return Err(Error::InvalidParameter("either --rank or --coeffs is required".into())),
            };
            ("schmidt-state", to_value(&io::state_file(&state)), &object.object)
        }
        GenCommand::Measurement { dim, outcomes, projective, object } => {
            let set = generate::gen_measurement_set(*dim, *outcomes, *projective, 0, seed)?;
            ("measurement", to_value(&io::measurement_file(&set)), &object.object)
        }
    };
    write_object(path.as_ref(), &object)?;
    Ok(Outcome { verdict: Verdict::Affirmative, results: json!({ "kind": kind, "object": object }) })
}

fn dispatch(ctx: &mut Context, command: &Command) -> Result<Outcome> {
    match command {
        Command::Schmidt { state, cut } => run_schmidt(ctx, state, cut),
        Command::Decomposable { state } => run_decomposable(ctx, state),
        Command::UnitarySim(UnitarySimCommand::Check(a)) => run_unitary(ctx, a, false),
        Command::UnitarySim(UnitarySimCommand::Construct(a)) => run_unitary(ctx, a, true),
        Command::Frame(FrameCommand::Build { state }) => run_frame(ctx, state, false),
        Command::Frame(FrameCommand::Verify { state }) => run_frame(ctx, state, true),
        Command::MeasureSim(a) => run_measure_sim(ctx, a),
        Command::Protocol(ProtocolCommand::Run(a)) => run_protocol(ctx, a),
        Command::Gen(g) => run_gen(ctx, g),
    }
}

fn error_exit(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let start = Instant::now();
    let mut ctx = Context {
        tol: cli.tol,
        seed: Seed::new(cli.seed),
        renormalize: cli.renormalize,
        inputs: Vec::new(),
        tolerances: BTreeMap::new(),
    };
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        eprintln!("error: --tol must be a positive finite number");
        return EXIT_INPUT;
    }
    let outcome = match dispatch(&mut ctx, &cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        inputs: ctx.inputs,
        seed: cli.seed,
        tolerances: ctx.tolerances,
        verdict: outcome.verdict,
        results: outcome.results,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if let Err(e) = report.check_finite() {
        eprintln!("error: {e}");
        return EXIT_NUMERICAL;
    }
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return EXIT_INPUT;
    }
    match report.verdict {
        Verdict::Affirmative => EXIT_AFFIRMATIVE,
        Verdict::Negative => EXIT_NEGATIVE,
    }
}
