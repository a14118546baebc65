//! `necklace`: generate digits, verify necklaces, scan discrepancy, run the
//! lemma suites and the lower-bound machinery.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage,
//! budget or I/O errors.

mod lemmas;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use necklace_normal::construct::{block, n_offset, AffineParams, DigitStream};
use necklace_normal::discrepancy::{log_spaced, scan, write_csv, BoundProfile};
use necklace_normal::lowerbound::{
    a_l_lower_bound, build_chain, count_surplus, make_custom_plan, make_plan, verify_gamma, PlanReport,
};
use necklace_normal::necklace::{check_flat, check_nested, search_class, NecklaceClass, Word};
use necklace_normal::Prime;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Seed used by every randomized command unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "necklace", version, about = "Normal numbers from nested perfect necklaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Prime base.
    #[arg(long, global = true, default_value_t = 2)]
    p: u32,
    /// Seed for random parameter profiles.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Largest number of digits, points or candidates a command may materialize.
    #[arg(long, global = true, default_value_t = 1 << 26)]
    budget: u64,
    /// Output file (standard output if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for commands that support more than one.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Source {
    /// Use random z, η, u at every level (from --seed) instead of Levin's choice.
    #[arg(long)]
    random: bool,
    /// Levin's parameters (the default).
    #[arg(long, conflicts_with = "random")]
    levin: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump digits of the number.
    Digits {
        #[command(flatten)]
        source: Source,
        /// First digit index (0-based).
        #[arg(long, default_value = "0", conflicts_with = "level")]
        start: BigUint,
        /// Start at the first digit of block m instead.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        len: usize,
    },
    /// Check a word or an affine block for (nested) (semi-)perfection.
    Verify {
        /// Digits of the word, e.g. 00111001.
        #[arg(long, conflicts_with = "block")]
        word: Option<String>,
        /// Verify block m of the stream as a (p^m, p^m)-nested perfect necklace.
        #[arg(long)]
        block: Option<u32>,
        #[arg(long, requires = "word")]
        k: Option<usize>,
        #[arg(long, requires = "word")]
        l: Option<usize>,
        /// Alphabet size of --word (defaults to --p).
        #[arg(long)]
        base: Option<u16>,
        #[arg(long)]
        nested: bool,
        #[arg(long)]
        semi: bool,
        #[command(flatten)]
        source: Source,
    },
    /// Exact star discrepancy of the first N points against the upper bound.
    Scan {
        #[command(flatten)]
        source: Source,
        /// Scan every N from 1 to this value.
        #[arg(long = "Nmax", alias = "nmax")]
        n_max: u64,
        /// Use this many log-spaced N up to --Nmax instead of all of them.
        #[arg(long)]
        log_count: Option<usize>,
        /// Digits per point (default: ceil(log_p N) + 16).
        #[arg(long)]
        precision: Option<u32>,
    },
    /// Run the property suites for one (p, m).
    Lemmas {
        #[arg(long)]
        m: u32,
        /// Random profiles per check.
        #[arg(long, default_value_t = 10)]
        profiles: usize,
    },
    /// Lower-bound machinery: schedules, γ tables, interval chain and surplus.
    Lowerbound {
        #[arg(long)]
        m: u32,
        /// Comma-separated custom schedule, e.g. 7,5,3.
        #[arg(long, value_delimiter = ',')]
        custom_w: Option<Vec<usize>>,
        /// Report the plan without enumerating any points.
        #[arg(long)]
        analyze_only: bool,
        /// Check every γ prediction against enumeration.
        #[arg(long)]
        verify_gamma: bool,
    },
    /// Enumerate all words of a necklace class.
    Search {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        /// Alphabet size (defaults to --p).
        #[arg(long)]
        base: Option<u16>,
        #[arg(long)]
        nested: bool,
        #[arg(long)]
        semi: bool,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] necklace_normal::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

type Outcome = Result<bool, CliError>;

fn output(global: &Global) -> Result<Box<dyn Write>, CliError> {
    Ok(match &global.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn stream(prime: Prime, source: &Source, seed: u64, max_level: u32) -> Result<DigitStream, CliError> {
    Ok(if source.random {
        DigitStream::random(prime, max_level, seed)?
    } else {
        DigitStream::levin(prime, max_level)?
    })
}

fn source_tag(source: &Source, seed: u64) -> String {
    if source.random {
        format!("source=random seed={seed}")
    } else {
        "source=levin".into()
    }
}

/// Smallest stream depth covering digit `end` plus a margin for point windows.
fn depth_for(prime: Prime, end: &BigUint) -> Result<u32, CliError> {
    for m in 1..64 {
        if n_offset(m + 1, prime)? > *end {
            return Ok(m + 1);
        }
    }
    Err(CliError::Usage("index beyond any supported level".into()))
}

fn cmd_digits(g: &Global, prime: Prime, source: &Source, start: &BigUint, level: Option<u32>, len: usize) -> Outcome {
    if len as u64 > g.budget {
        return Err(necklace_normal::Error::BudgetExceeded { needed: format!("{len} digits"), budget: g.budget.to_string() }.into());
    }
    let start = match level {
        Some(m) => n_offset(m, prime)?,
        None => start.clone(),
    };
    let s = stream(prime, source, g.seed, depth_for(prime, &(&start + len))?)?;
    let mut out = output(g)?;
    writeln!(out, "# {}", source_tag(source, g.seed))?;
    out.write_all(s.dump(&start, len)?.as_bytes())?;
    out.flush()?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    g: &Global,
    prime: Prime,
    word: Option<&str>,
    block_m: Option<u32>,
    kl: (Option<usize>, Option<usize>),
    base: Option<u16>,
    nested: bool,
    semi: bool,
    source: &Source,
) -> Outcome {
    let (w, k, l, nested, label) = match (word, block_m) {
        (Some(text), None) => {
            let base = base.unwrap_or(prime.get() as u16);
            let (Some(k), Some(l)) = kl else {
                return Err(CliError::Usage("--word needs --k and --l".into()));
            };
            (Word::from_digit_str(base, text)?, k, l, nested, format!("word {text}"))
        }
        (None, Some(m)) => {
            let params = if source.random {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                rng.set_stream(m as u64);
                AffineParams::random(m, prime, &mut rng)?
            } else {
                AffineParams::levin(m, prime)?
            };
            let dim = params.dim();
            (block(&params, g.budget)?, dim, dim, true, format!("block A_{m} ({})", source_tag(source, g.seed)))
        }
        _ => return Err(CliError::Usage("give exactly one of --word or --block".into())),
    };
    let perfect = !semi;
    let violation = if nested { check_nested(&w, k, l, perfect)? } else { check_flat(&w, k, l, perfect)? };
    let kind = format!(
        "({k},{l})-{}{}perfect",
        if nested { "nested " } else { "" },
        if semi { "semi-" } else { "" }
    );
    let mut out = output(g)?;
    match &violation {
        None => writeln!(out, "PASS {label} is {kind}")?,
        Some(v) => writeln!(out, "FAIL {label} is not {kind}: {v}")?,
    }
    out.flush()?;
    Ok(violation.is_none())
}

fn cmd_scan(g: &Global, prime: Prime, source: &Source, n_max: u64, log_count: Option<usize>, precision: Option<u32>) -> Outcome {
    if n_max == 0 {
        return Err(CliError::Usage("--Nmax must be positive".into()));
    }
    if n_max > g.budget {
        return Err(necklace_normal::Error::BudgetExceeded { needed: format!("{n_max} points"), budget: g.budget.to_string() }.into());
    }
    let ns: Vec<u64> = match log_count {
        Some(c) => log_spaced(1, n_max, c),
        None => (1..=n_max).collect(),
    };
    let s = stream(prime, source, g.seed, depth_for(prime, &BigUint::from(n_max + 64))?)?;
    let profile = BoundProfile::Power { b: prime.get() as u64 };
    let reports = scan(&s, &ns, precision, &profile)?;
    let ok = reports.iter().all(|r| r.certified());
    let mut out = output(g)?;
    match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let l = reports.first().map_or(0, |r| r.precision);
            writeln!(out, "# p={prime} {} precision={l}", source_tag(source, g.seed))?;
            write_csv(&reports, &mut out)?;
        }
        Format::Json | Format::Text => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "N": r.n,
                        "NDstar": r.nd_star().to_string(),
                        "thm1_bound": r.thm1.bound.to_string(),
                        "certified": r.certified(),
                    })
                })
                .collect();
            let doc = json!({"p": prime.get(), "source": source_tag(source, g.seed), "rows": rows});
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(ok)
}

fn cmd_lemmas(g: &Global, prime: Prime, m: u32, profiles: usize) -> Outcome {
    let results = lemmas::run_suite(prime, m, g.seed, profiles, g.budget)?;
    let ok = results.iter().all(|r| r.failed == 0);
    let mut out = output(g)?;
    match g.format.unwrap_or(Format::Text) {
        Format::Json => {
            let doc = json!({"p": prime.get(), "m": m, "seed": g.seed, "lemmas": results});
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
        _ => {
            writeln!(out, "# p={prime} m={m} seed={}", g.seed)?;
            for r in &results {
                writeln!(out, "{r}")?;
            }
        }
    }
    out.flush()?;
    Ok(ok)
}

fn cmd_lowerbound(g: &Global, prime: Prime, m: u32, custom: Option<Vec<usize>>, analyze_only: bool, check_gamma: bool) -> Outcome {
    let plan = match custom {
        Some(w) => make_custom_plan(prime, m, w)?,
        None => make_plan(m, prime)?,
    };
    let mut ok = true;
    let mut extra = serde_json::Map::new();
    let report = if analyze_only {
        if plan.is_paper_schedule() {
            let a = a_l_lower_bound(m, prime, false)?;
            ok &= a.columns_hold() && a.sum_holds();
            extra.insert(
                "a_counts".into(),
                json!({
                    "column_counts": a.column_counts,
                    "A": a.a,
                    "lower": a.lower,
                    "target": a.target.to_string(),
                    "regime": a.regime,
                    "aggregate_holds": a.aggregate_holds(),
                }),
            );
        }
        PlanReport::new(&plan, None, None)
    } else {
        let s = DigitStream::levin(prime, m + 1)?;
        let chain = build_chain(&plan, &s, g.budget)?;
        let surplus = count_surplus(&plan, &chain, &s, g.budget)?;
        let runs: Vec<_> = surplus
            .runs
            .iter()
            .map(|r| json!({"l": r.l, "count": r.count, "required": r.required.to_string(), "holds": r.holds()}))
            .collect();
        ok &= surplus.runs.iter().all(|r| r.holds());
        extra.insert("runs".into(), json!(runs));
        extra.insert("lambda".into(), json!(surplus.lambda.to_string()));
        PlanReport::new(&plan, Some(&chain), Some(&surplus))
    };
    if check_gamma {
        let params = Arc::new(AffineParams::levin(m, prime)?);
        let mut checks = Vec::new();
        for l in 0..plan.w().len() {
            let v = verify_gamma(&plan, &params, l)?;
            ok &= v.is_clean();
            checks.push(json!({
                "l": l,
                "pairs": v.pairs,
                "not_unique": v.not_unique,
                "matrix_mismatches": v.matrix_mismatches,
                "closed_form_mismatches": v.closed_form_mismatches,
                "substitution_mismatches": v.substitution_mismatches,
                "shift_checked": v.shift_checked,
                "shift_mismatches": v.shift_mismatches,
            }));
        }
        extra.insert("gamma_verification".into(), json!(checks));
    }
    let mut doc = serde_json::to_value(&report)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.extend(extra);
    }
    let mut out = output(g)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(ok)
}

fn cmd_search(g: &Global, class: NecklaceClass) -> Outcome {
    let found = search_class(class, g.budget)?;
    let mut out = output(g)?;
    writeln!(
        out,
        "# k={} l={} base={} nested={} semi={} found={}",
        class.k,
        class.l,
        class.base,
        class.nested,
        class.semi,
        found.len()
    )?;
    for w in &found {
        writeln!(out, "{}", w.body_text())?;
    }
    out.flush()?;
    Ok(true)
}

fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    let prime = Prime::new(g.p)?;
    match cli.command {
        Command::Digits { source, start, level, len } => cmd_digits(g, prime, &source, &start, level, len),
        Command::Verify { word, block, k, l, base, nested, semi, source } => {
            cmd_verify(g, prime, word.as_deref(), block, (k, l), base, nested, semi, &source)
        }
        Command::Scan { source, n_max, log_count, precision } => cmd_scan(g, prime, &source, n_max, log_count, precision),
        Command::Lemmas { m, profiles } => cmd_lemmas(g, prime, m, profiles),
        Command::Lowerbound { m, custom_w, analyze_only, verify_gamma } => {
            cmd_lowerbound(g, prime, m, custom_w, analyze_only, verify_gamma)
        }
        Command::Search { k, l, base, nested, semi } => {
            let base = base.unwrap_or(prime.get() as u16);
            cmd_search(g, NecklaceClass { k, l, base, nested, semi })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
