//! Command-line front end: construct and verify states, and run the
//! secret-sharing, teleportation, and swapping demos.
//!
//! Exit codes are a stable contract: 0 success, 1 semantic failure (a
//! verification or protocol check did not pass), 2 usage or malformed
//! input, 3 internal failure.

use std::path::PathBuf;
use std::process::ExitCode;

use ame_core::ame::{self, catalog, state_from_code, AmeCandidate, VerifyOptions};
use ame_core::codes::{self, CodeError};
use ame_core::gf::FiniteField;
use ame_core::qss::{self, QssScheme, SetCategory};
use ame_core::qstate::{self, random_state, QuditState};
use ame_core::swap::{self, ChainOutcomes};
use ame_core::teleport;
use ame_lab::formats::{self, RecoveryJson, SwapBranchJson};
use ame_lab::parallel;
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Branch-enumeration cutoff: protocols enumerate every branch up to
/// this many, above it they sample 100 seeded branches.
const ALL_BRANCH_CAP: usize = 1000;
const SAMPLED_BRANCHES: usize = 100;

#[derive(Parser)]
#[command(
    name = "ame-lab",
    about = "Construct, verify, and run protocols on absolutely maximally entangled qudit states"
)]
struct Cli {
    /// RNG seed for random secrets and sampled branches.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for verification scans (falls back to the
    /// AME_LAB_THREADS environment variable, then to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Entropy tolerance (dits) for verification passes.
    #[arg(long, global = true, default_value_t = 1e-8)]
    entropy_tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a state (and optionally its code) and write JSON files.
    Construct {
        #[command(subcommand)]
        family: ConstructCmd,
    },
    /// Check whether a state file is absolutely maximally entangled.
    Verify(VerifyArgs),
    /// Encode, recover, and classify a secret-sharing scheme.
    Qss(QssArgs),
    /// Run the open-destination teleportation protocol.
    Teleport(TeleportArgs),
    /// Run an entanglement-swapping chain.
    Swap(SwapArgs),
}

#[derive(Subcommand)]
enum ConstructCmd {
    /// Reed-Solomon code over GF(q) (doubly extended when n = q + 1).
    Rs {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Output path for the state file.
        #[arg(long, default_value = "state.json")]
        state_out: PathBuf,
        /// Also write the codeword table.
        #[arg(long)]
        code_out: Option<PathBuf>,
    },
    /// Built-in states: EPR(d), GHZ(n,d), AME43, AME43_swap_form.
    Catalog {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "state.json")]
        state_out: PathBuf,
    },
    /// Equal superposition over the codewords of a code file.
    FromCodeFile {
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value = "state.json")]
        state_out: PathBuf,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// State file to verify.
    state: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also check every subset smaller than floor(n/2).
    #[arg(long)]
    extended: bool,
}

#[derive(Args)]
struct QssArgs {
    /// Resource state file (2m parties).
    #[arg(long, required_unless_present = "scheme")]
    resource: Option<PathBuf>,
    /// Scheme descriptor file ({"m","L","d","resource","dealers"}).
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// Number of dealers / secret qudits.
    #[arg(long = "L", default_value_t = 1)]
    l: usize,
    /// Dealer party indices (comma separated; defaults to 1..=L).
    #[arg(long, value_delimiter = ',')]
    dealers: Option<Vec<usize>>,
    /// Secret to share: "random" or "basis:<index>".
    #[arg(long, default_value = "random")]
    secret: String,
    /// Force full branch enumeration regardless of the size cutoff.
    #[arg(long)]
    all_branches: bool,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TeleportArgs {
    /// Resource state file (must verify as AME).
    #[arg(long)]
    resource: PathBuf,
    /// Dealer party.
    #[arg(long)]
    dealer: usize,
    /// Destination party.
    #[arg(long)]
    dest: usize,
    /// Jointly operating set (comma separated); defaults to the lowest
    /// ceil(n/2) parties excluding dealer and destination.
    #[arg(long, value_delimiter = ',')]
    set_a: Option<Vec<usize>>,
    /// Send the state to a member of the jointly operating set instead
    /// (set A is then derived automatically).
    #[arg(long)]
    via_a: bool,
    /// Secret to teleport: "random" or "basis:<index>".
    #[arg(long, default_value = "random")]
    secret: String,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SwapArgs {
    /// Number of chained copies of the state.
    #[arg(long)]
    chain: usize,
    /// State file holding one chain link (2n parties).
    #[arg(long)]
    state: PathBuf,
    /// Measure every pair with outcome (0,0) instead of sampling.
    #[arg(long)]
    all_zero: bool,
    /// Tabulate the corrected fidelity of every outcome path (sampled
    /// above the enumeration cutoff).
    #[arg(long)]
    all_branches: bool,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn main() -> ExitCode {
    // Die quietly when the consumer of our stdout goes away (e.g. `| head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Construct { ref family } => cmd_construct(family),
        Command::Verify(ref args) => cmd_verify(&cli, args),
        Command::Qss(ref args) => cmd_qss(&cli, args),
        Command::Teleport(ref args) => cmd_teleport(&cli, args),
        Command::Swap(ref args) => cmd_swap(&cli, args),
    }
}

/// Parameter errors exit 2; failures of the construction itself exit 3.
fn classify_code_error(e: CodeError) -> Failure {
    match e {
        CodeError::KOutOfRange { .. }
        | CodeError::BlockLengthTooLarge { .. }
        | CodeError::AlphabetTooSmall
        | CodeError::ZeroLength
        | CodeError::TooLarge
        | CodeError::PositionOutOfRange { .. }
        | CodeError::SymbolOutOfRange { .. }
        | CodeError::Field(_) => usage(e),
        other => internal(other),
    }
}

fn cmd_construct(family: &ConstructCmd) -> Result<ExitCode, Failure> {
    let (candidate, code, state_out, code_out) = match family {
        ConstructCmd::Rs { q, n, k, state_out, code_out } => {
            let field = FiniteField::of_order(*q).map_err(usage)?;
            let code = codes::reed_solomon(&field, *n, *k).map_err(classify_code_error)?;
            let candidate = state_from_code(&code).map_err(|e| match e {
                ame::AmeError::State(qstate::StateError::TooLarge(_)) => usage(e),
                other => internal(other),
            })?;
            (candidate, Some(code), state_out.clone(), code_out.clone())
        }
        ConstructCmd::Catalog { name, state_out } => {
            let candidate = catalog(name).map_err(usage)?;
            (candidate, None, state_out.clone(), None)
        }
        ConstructCmd::FromCodeFile { code, state_out } => {
            let loaded = formats::load_code(code).map_err(usage)?;
            let candidate = state_from_code(&loaded).map_err(|e| match e {
                ame::AmeError::State(qstate::StateError::TooLarge(_)) => usage(e),
                other => internal(other),
            })?;
            (candidate, Some(loaded), state_out.clone(), None)
        }
    };
    formats::save_state(&state_out, &candidate.state).map_err(internal)?;
    if let (Some(code), Some(path)) = (&code, &code_out) {
        formats::save_code(path, code).map_err(internal)?;
    }
    println!(
        "wrote {} ({} parties, local dimension {}, provenance {:?})",
        state_out.display(),
        candidate.state.n(),
        candidate.state.d(),
        candidate.provenance
    );
    if let (Some(code), Some(path)) = (&code, &code_out) {
        println!(
            "wrote {} ({} codewords, n={}, q={})",
            path.display(),
            code.len(),
            code.n(),
            code.q()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<ExitCode, Failure> {
    let state = formats::load_state(&args.state).map_err(usage)?;
    let opts = VerifyOptions {
        entropy_tol: cli.entropy_tol,
        extended: args.extended,
        ..VerifyOptions::default()
    };
    let threads = parallel::resolve_threads(cli.threads);
    let report = parallel::par_verify_state(&state, &opts, threads);
    let json = serde_json::to_string_pretty(&formats::AmeReportJson::from(&report))
        .map_err(internal)?;
    match &args.report {
        Some(path) => {
            std::fs::write(path, &json)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(internal)?;
            println!(
                "{}: is_ame={} worst_deviation={:.3e} ({} subsets checked, report at {})",
                args.state.display(),
                report.is_ame,
                report.worst_deviation,
                report.checked_subsets.len(),
                path.display()
            );
        }
        None => println!("{json}"),
    }
    if report.is_ame {
        Ok(ExitCode::SUCCESS)
    } else {
        for check in report.checked_subsets.iter().filter(|c| !c.pass) {
            eprintln!(
                "failing subset {:?}: entropy {:.10} of {:.1} (deviation {:.3e})",
                check.parties, check.entropy_dits, check.max_entropy, check.deviation
            );
        }
        Ok(ExitCode::from(1))
    }
}

fn parse_secret(kind: &str, n: usize, d: usize, seed: u64) -> Result<QuditState, Failure> {
    if kind == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(random_state(n, d, &mut rng));
    }
    if let Some(idx) = kind.strip_prefix("basis:") {
        let idx: usize = idx.parse().map_err(|_| usage(anyhow!("bad basis index `{idx}`")))?;
        let dim = d.pow(n as u32);
        if idx >= dim {
            return Err(usage(anyhow!("basis index {idx} out of range for dimension {dim}")));
        }
        let mut digits = vec![0usize; n];
        let mut rest = idx;
        for t in (0..n).rev() {
            digits[t] = rest % d;
            rest /= d;
        }
        return QuditState::basis_state(n, d, &digits).map_err(usage);
    }
    Err(usage(anyhow!("secret must be `random` or `basis:<index>`, got `{kind}`")))
}

fn cmd_qss(cli: &Cli, args: &QssArgs) -> Result<ExitCode, Failure> {
    let (resource_path, l, dealers) = match &args.scheme {
        Some(path) => {
            let descriptor = formats::load_scheme(path).map_err(usage)?;
            (
                descriptor.resource_path(path),
                descriptor.l,
                Some(descriptor.dealers.clone()),
            )
        }
        None => (
            args.resource.clone().expect("clap enforces resource or scheme"),
            args.l,
            args.dealers.clone(),
        ),
    };
    let state = formats::load_state(&resource_path).map_err(usage)?;
    let d = state.d();
    let scheme = QssScheme::new(AmeCandidate::user_supplied(state), l, dealers)
        .map_err(usage)?;
    let secret = parse_secret(&args.secret, scheme.l(), d, cli.seed)?;

    let total_branches = d.pow(2 * scheme.l() as u32);
    let enumerate_all = args.all_branches || total_branches <= ALL_BRANCH_CAP;
    let branches = if enumerate_all {
        qss::encode(&scheme, &secret).map_err(internal)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let mut out = Vec::with_capacity(SAMPLED_BRANCHES);
        for _ in 0..SAMPLED_BRANCHES {
            let outcomes: Vec<(usize, usize)> = (0..scheme.l())
                .map(|_| {
                    use rand_chacha::rand_core::RngCore;
                    let q = (rng.next_u64() % d as u64) as usize;
                    let p = (rng.next_u64() % d as u64) as usize;
                    (q, p)
                })
                .collect();
            out.push(qss::encode_branch(&scheme, &secret, &outcomes).map_err(internal)?);
        }
        out
    };

    let players = scheme.players();
    let sets = ame::subsets_of_size(2 * scheme.m(), scheme.m());
    let recover_sets: Vec<Vec<usize>> = sets
        .into_iter()
        .filter(|s| s.iter().all(|p| players.contains(p)))
        .collect();
    let mut recoveries = Vec::new();
    let mut min_fidelity = f64::INFINITY;
    for branch in &branches {
        for set in &recover_sets {
            let rec = qss::recover(&scheme, branch, set).map_err(internal)?;
            let f = qstate::fidelity(&rec.secret, &secret).map_err(internal)?;
            min_fidelity = min_fidelity.min(f);
            recoveries.push(RecoveryJson {
                outcomes: branch.outcomes.clone(),
                set: set.clone(),
                fidelity: f,
            });
        }
    }

    let mut classification = Vec::new();
    for size in 1..=players.len() {
        for set in ame::subsets_of_size(2 * scheme.m(), size)
            .into_iter()
            .filter(|s| s.iter().all(|p| players.contains(p)))
        {
            classification.push(qss::classify_set(&scheme, &set).map_err(internal)?);
        }
    }

    // Per-size category counts for the summary line.
    let mut summary = String::new();
    for size in 1..=players.len() {
        let of_size: Vec<_> =
            classification.iter().filter(|c| c.subset.len() == size).collect();
        let mut counts = [0usize; 3];
        for c in &of_size {
            counts[match c.category {
                SetCategory::Forbidden => 0,
                SetCategory::Intermediate => 1,
                SetCategory::Authorized => 2,
            }] += 1;
        }
        let mut parts = Vec::new();
        if counts[0] > 0 {
            parts.push(format!("{} forbidden", counts[0]));
        }
        if counts[1] > 0 {
            parts.push(format!("{} intermediate", counts[1]));
        }
        if counts[2] > 0 {
            parts.push(format!("{} authorized", counts[2]));
        }
        summary.push_str(&format!("{size}-sets: {}; ", parts.join(", ")));
    }
    println!(
        "min fidelity {:.9} over {} recoveries ({} branches); {}",
        min_fidelity,
        recoveries.len(),
        branches.len(),
        summary.trim_end_matches("; ")
    );

    let report = formats::QssReportJson {
        m: scheme.m(),
        l: scheme.l(),
        d,
        dealers: scheme.dealer_indices().to_vec(),
        secret: args.secret.clone(),
        branches_tested: branches.len(),
        min_fidelity,
        recoveries,
        classification: classification.iter().map(formats::classification_json).collect(),
    };
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report).map_err(internal)?)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(internal)?;
    }
    Ok(if min_fidelity >= 1.0 - 1e-9 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_teleport(cli: &Cli, args: &TeleportArgs) -> Result<ExitCode, Failure> {
    let state = formats::load_state(&args.resource).map_err(usage)?;
    let n = state.n();
    let d = state.d();
    let resource = AmeCandidate::user_supplied(state);
    let secret = parse_secret(&args.secret, 1, d, cli.seed)?;
    let run = if args.via_a {
        if args.set_a.is_some() {
            return Err(usage(anyhow!("--via-a derives set A itself; drop --set-a")));
        }
        teleport::choose_destination_in_a(&resource, args.dealer, &secret, args.dest)
            .map_err(usage)?
    } else {
        let set_a = match &args.set_a {
            Some(set) => set.clone(),
            None => (1..=n)
                .filter(|&p| p != args.dealer && p != args.dest)
                .take(n - n / 2)
                .collect(),
        };
        teleport::open_destination_teleport(&resource, args.dealer, &secret, &set_a, args.dest)
            .map_err(usage)?
    };

    println!(
        "teleport: dealer {} -> destination {} via A = {:?}",
        run.dealer, run.destination, run.set_a
    );
    println!("dealer outcome | A outcome | fidelity");
    for b in &run.branches {
        let a = match b.a_outcome {
            Some((q, p)) => format!("({q},{p})"),
            None => "   -   ".into(),
        };
        println!(
            "    ({},{})      |  {a}  | {:.12}",
            b.dealer_outcome.0, b.dealer_outcome.1, b.fidelity
        );
    }
    println!("min fidelity {:.12} over {} branches", run.min_fidelity, run.branches.len());

    if let Some(path) = &args.report {
        let json = formats::teleport_json(&run);
        std::fs::write(path, serde_json::to_string_pretty(&json).map_err(internal)?)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(internal)?;
    }
    Ok(if run.min_fidelity >= 1.0 - 1e-9 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_swap(cli: &Cli, args: &SwapArgs) -> Result<ExitCode, Failure> {
    let state = formats::load_state(&args.state).map_err(usage)?;
    if args.chain < 2 {
        return Err(usage(anyhow!("--chain must be at least 2")));
    }
    let states = vec![state.clone(); args.chain];
    let policy = if args.all_zero {
        ChainOutcomes::AllZero
    } else {
        ChainOutcomes::Seeded(cli.seed)
    };
    let result = swap::swap_chain(&states, policy).map_err(usage)?;

    let opts = VerifyOptions { entropy_tol: cli.entropy_tol, ..VerifyOptions::default() };
    let threads = parallel::resolve_threads(cli.threads);
    let final_report = parallel::par_verify_state(&result.final_state, &opts, threads);
    let equiv = swap::check_local_equiv_restricted(&result.final_state, &state)
        .map_err(internal)?;

    // Optional branch table over every outcome path (seeded sample when
    // the enumeration would be too large).
    let branch_table = if args.all_branches {
        let d = state.d();
        let n_half = state.n() / 2;
        let per_hop = d.pow(2 * n_half as u32);
        let total = per_hop.saturating_pow((args.chain - 1) as u32);
        let paths: Vec<Vec<Vec<(usize, usize)>>> = if total <= ALL_BRANCH_CAP {
            // Enumerate every outcome path.
            let mut paths = vec![Vec::new()];
            for _ in 0..args.chain - 1 {
                let mut next = Vec::with_capacity(paths.len() * per_hop);
                for path in &paths {
                    for code in 0..per_hop {
                        let mut rest = code;
                        let mut hop = Vec::with_capacity(n_half);
                        for _ in 0..n_half {
                            let p = rest % d;
                            rest /= d;
                            let q = rest % d;
                            rest /= d;
                            hop.push((q, p));
                        }
                        let mut path = path.clone();
                        path.push(hop);
                        next.push(path);
                    }
                }
                paths = next;
            }
            paths
        } else {
            use rand_chacha::rand_core::RngCore;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            (0..SAMPLED_BRANCHES)
                .map(|_| {
                    (0..args.chain - 1)
                        .map(|_| {
                            (0..n_half)
                                .map(|_| {
                                    (
                                        (rng.next_u64() % d as u64) as usize,
                                        (rng.next_u64() % d as u64) as usize,
                                    )
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        let mut table = Vec::with_capacity(paths.len());
        for path in paths {
            let r = swap::swap_chain(&states, ChainOutcomes::Fixed(path.clone()))
                .map_err(internal)?;
            table.push(SwapBranchJson {
                outcomes: path,
                corrected_fidelity: r.corrected_fidelity,
            });
        }
        Some(table)
    } else {
        None
    };

    println!(
        "chain of {}: outcomes {:?}, corrected fidelity {:.12}, final is_ame={}",
        result.hops, result.outcome_record, result.corrected_fidelity, final_report.is_ame
    );
    match &equiv {
        swap::EquivVerdict::Equivalent(w) => {
            println!("local-equivalence witness against the source state: {w:?}")
        }
        swap::EquivVerdict::Unknown { spectrum_mismatch } => println!(
            "no witness in the restricted class (spectrum mismatch: {spectrum_mismatch})"
        ),
    }
    if let Some(table) = &branch_table {
        let min = table.iter().map(|b| b.corrected_fidelity).fold(f64::INFINITY, f64::min);
        println!("branch table: {} paths, min corrected fidelity {min:.12}", table.len());
    }

    let all_ok = result.u_power_check
        && branch_table
            .as_ref()
            .is_none_or(|t| t.iter().all(|b| b.corrected_fidelity >= 1.0 - 1e-9));
    if let Some(path) = &args.report {
        let json = formats::swap_json(&result, final_report.is_ame, &equiv, branch_table);
        std::fs::write(path, serde_json::to_string_pretty(&json).map_err(internal)?)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(internal)?;
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
