use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use galcoh::classifier::{
    classify_mod_p, classify_p_power, cross_check_with_cohomology, h2_verdict, ClassifierError, CrossCheck, Verdict,
};
use galcoh::curves::{
    bundled_curves, fetch_curve, load_curve_facts, scan_divisibility, CurveError, CurveFacts, CurvePoint,
    Divisibility, DivisibilityScan, FetchConfig, ENV_CACHE_DIR,
};
use galcoh::report::{format_factors, is_supported, summarize, table, FlatRow, ReportError, TableOptions, TableRow, TableSummary};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "galcoh", version, about = "Cohomology of Galois images of elliptic curves")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// H^1(G_2, (Z/p^2)^2) for every class of G_2 ≤ GL_2(Z/p^2).
    Enumerate(TableArgs),
    /// Localization kernels: rows with L(G_2) ≠ 0.
    Lker(TableArgs),
    /// Vanishing verdicts for curve facts.
    Classify(ClassifyArgs),
    /// Local divisibility of k·P by m at every prime below a bound.
    ScanDivisibility(ScanArgs),
    /// Curve facts by label (cache, then database, then bundled fixtures).
    Fetch(FetchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    p: u32,
    #[arg(long, default_value_t = 2)]
    level: u32,
    /// Only groups with surjective determinant (required for p ≥ 5).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    surjective_det: bool,
    /// Restrict to dim M_2 = N (the reduction kernel has p^N elements).
    #[arg(long)]
    dim_m2: Option<usize>,
    /// Allow the full p = 7 table without a --dim-m2 restriction.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Subgroup cache directory (default: $GALCOH_CACHE_DIR or ~/.cache/galcoh).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    /// Compare the JSON report with a golden file; exit 3 on mismatch.
    #[arg(long, value_name = "GOLDEN")]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// JSON-lines curve facts (default: the bundled fixtures).
    #[arg(long)]
    facts: Option<PathBuf>,
    #[arg(long)]
    p: u64,
    /// 1 for H^1(G, E[p]); 2 or more for H^1(G_i, E[p^i]), i ≥ 2.
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Report H^2(G, E[p]) instead of H^1.
    #[arg(long)]
    h2: bool,
    /// Skip the cohomology cross-check.
    #[arg(long)]
    no_cross_check: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    label: String,
    #[arg(long)]
    facts: Option<PathBuf>,
    /// Base point P as `x,y` (default: the first bundled generator).
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Scan k·P instead of P.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    k: i64,
    #[arg(long)]
    m: u64,
    /// Primes ℓ < LMAX are scanned.
    #[arg(long, default_value_t = 1000)]
    lmax: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct FetchArgs {
    label: String,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    /// Database base URL (default: $GALCOH_DB_URL).
    #[arg(long)]
    base_url: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: message.into() }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Unsupported { .. } | ReportError::NeedsSurjectiveDet(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<CurveError> for Failure {
    fn from(e: CurveError) -> Self {
        match e {
            CurveError::NotPrime(_) | CurveError::FieldTooLarge(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for Failure {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::SmallPrime(_) | ClassifierError::NotPrime(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

fn default_cache_dir() -> Option<PathBuf> {
    if let Some(d) = std::env::var_os(ENV_CACHE_DIR) {
        return Some(PathBuf::from(d));
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return Some(PathBuf::from(d).join("galcoh"));
    }
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache").join("galcoh"))
}

fn cache_dir(explicit: &Option<PathBuf>, disabled: bool) -> Option<PathBuf> {
    if disabled {
        None
    } else {
        explicit.clone().or_else(default_cache_dir)
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<String>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.iter().map(|s| s.to_string()).collect(), &mut out);
    for r in rows {
        line(r.clone(), &mut out);
    }
    out
}

#[derive(Serialize)]
struct TableReport<'a> {
    p: u32,
    level: u32,
    dim_m2: Option<usize>,
    summary: &'a TableSummary,
    rows: &'a [TableRow],
}

fn run_table(args: &TableArgs, localization: bool) -> Result<(), Failure> {
    if !is_supported(args.p, args.level) {
        return Err(Failure::usage(format!(
            "unsupported p={} level={}; supported: --level 2 with --p 2, 3, 5, 7",
            args.p, args.level
        )));
    }
    if args.p == 7 && args.dim_m2.is_none() && !args.full {
        return Err(Failure::usage("p=7: pass --dim-m2 N for a restricted table or --full for all classes"));
    }
    let opts = TableOptions {
        surjective_det: args.surjective_det,
        dim_m2: args.dim_m2,
        localization,
        cache_dir: cache_dir(&args.cache, args.no_cache),
        ..Default::default()
    };
    eprintln!("computing classes of G_2 ≤ GL_2(Z/{}) ...", args.p.pow(args.level));
    let start = std::time::Instant::now();
    let mut rows = table(args.p, args.level, &opts)?;
    let summary = summarize(&rows);
    eprintln!("{} classes in {:.1?}", rows.len(), start.elapsed());
    if localization {
        rows.retain(|r| r.lker.as_ref().is_some_and(|l| !l.is_empty()));
    }
    let report = TableReport { p: args.p, level: args.level, dim_m2: args.dim_m2, summary: &summary, rows: &rows };
    let text = match args.format {
        Format::Json => json(&report),
        Format::Csv => csv_string(rows.iter().map(FlatRow::from))?,
        Format::Table => {
            let header = ["id", "|G_2|", "|G|", "dim M_2", "H^1", "L", "H^0(G)", "H^2(G)", "method"];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.id.to_string(),
                        r.order.to_string(),
                        r.image_order.to_string(),
                        r.dim_m2.to_string(),
                        format_factors(&r.h1),
                        r.lker.as_deref().map(format_factors).unwrap_or_else(|| "-".into()),
                        if r.h0_image { "≠0" } else { "0" }.into(),
                        match r.h2_image {
                            Some(true) => "≠0",
                            Some(false) => "0",
                            None => "?",
                        }
                        .into(),
                        serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    ]
                })
                .collect();
            let mut s = render_table(&header, &body);
            let _ = writeln!(s, "\nclasses: {}", summary.classes);
            let _ = writeln!(s, "nonvanishing H^1: {}", summary.nonvanishing);
            for (f, n) in &summary.h1_histogram {
                let _ = writeln!(s, "  {} × {}", n, format_factors(f));
            }
            if let Some(n) = summary.lker_nonzero {
                let _ = writeln!(s, "nonzero localization kernel: {n}");
            }
            if summary.shortcut > 0 {
                let _ = writeln!(s, "homothety shortcut: {}", summary.shortcut);
            }
            s
        }
    };
    io::stdout().write_all(text.as_bytes())?;
    if let Some(golden) = &args.check {
        check_golden(golden, &serde_json::to_value(&report).expect("serializable"))?;
    }
    Ok(())
}

fn check_golden(path: &Path, actual: &serde_json::Value) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let expected: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    if &expected == actual {
        eprintln!("check: matches {}", path.display());
        Ok(())
    } else {
        Err(Failure { code: EXIT_CHECK, message: format!("check: output differs from {}", path.display()) })
    }
}

fn load_facts(path: &Option<PathBuf>) -> Result<Vec<CurveFacts>, Failure> {
    match path {
        Some(p) => Ok(load_curve_facts(p)?),
        None => Ok(bundled_curves()),
    }
}

#[derive(Serialize)]
struct ClassifyRecord {
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<CrossCheck>,
}

#[derive(Serialize)]
struct ClassifyCsvRow {
    label: String,
    p: u64,
    question: String,
    vanishing: String,
    case: String,
    h_size: Option<u64>,
    cross_check_h1: String,
    cross_check_agrees: String,
    notes: String,
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn run_classify(args: &ClassifyArgs) -> Result<(), Failure> {
    if args.level == 0 {
        return Err(Failure::usage("--level must be at least 1"));
    }
    if !args.h2 && args.level >= 2 && args.p <= 3 {
        return Err(Failure::usage(format!(
            "prime-power classification needs p > 3; for p = {} use `galcoh enumerate --p {}`",
            args.p, args.p
        )));
    }
    let facts = load_facts(&args.facts)?;
    let records: Vec<ClassifyRecord> = facts
        .par_iter()
        .map(|f| -> Result<ClassifyRecord, Failure> {
            if args.h2 {
                return Ok(ClassifyRecord { verdict: h2_verdict(f, args.p)?, cross_check: None });
            }
            if args.no_cross_check {
                let verdict = if args.level == 1 { classify_mod_p(f, args.p)? } else { classify_p_power(f, args.p)? };
                return Ok(ClassifyRecord { verdict, cross_check: None });
            }
            let c = cross_check_with_cohomology(f, args.p, args.level)?;
            Ok(ClassifyRecord { verdict: c.verdict.clone(), cross_check: Some(c) })
        })
        .collect::<Result<_, _>>()?;
    let failed: Vec<&str> = records
        .iter()
        .filter(|r| r.cross_check.as_ref().is_some_and(CrossCheck::failed))
        .map(|r| r.verdict.label.as_str())
        .collect();
    let text = match args.format {
        Format::Json => json(&records),
        Format::Csv => csv_string(records.iter().map(|r| ClassifyCsvRow {
            label: r.verdict.label.clone(),
            p: r.verdict.p,
            question: tag(&r.verdict.question),
            vanishing: tag(&r.verdict.vanishing),
            case: r.verdict.case.tag(),
            h_size: r.verdict.h_size,
            cross_check_h1: r.cross_check.as_ref().and_then(|c| c.h1.as_deref()).map(format_factors).unwrap_or_default(),
            cross_check_agrees: r.cross_check.as_ref().and_then(|c| c.agrees).map(|b| b.to_string()).unwrap_or_default(),
            notes: r.verdict.notes.join("; "),
        }))?,
        Format::Table => {
            let header = ["label", "p", "verdict", "case", "size", "check H^1", "agrees", "notes"];
            let body: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let c = r.cross_check.as_ref();
                    let mut notes = r.verdict.notes.clone();
                    notes.extend(c.and_then(|c| c.note.clone()));
                    vec![
                        r.verdict.label.clone(),
                        r.verdict.p.to_string(),
                        tag(&r.verdict.vanishing),
                        r.verdict.case.tag(),
                        r.verdict.h_size.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                        c.and_then(|c| c.h1.as_deref()).map(format_factors).unwrap_or_else(|| "-".into()),
                        c.and_then(|c| c.agrees).map(|b| if b { "yes" } else { "NO" }.to_string()).unwrap_or_else(|| "-".into()),
                        notes.join("; "),
                    ]
                })
                .collect();
            if body.is_empty() {
                String::new()
            } else {
                render_table(&header, &body)
            }
        }
    };
    io::stdout().write_all(text.as_bytes())?;
    if !failed.is_empty() {
        return Err(Failure { code: EXIT_CHECK, message: format!("cross-check failed for {}", failed.join(", ")) });
    }
    Ok(())
}

fn run_scan(args: &ScanArgs) -> Result<(), Failure> {
    if args.m == 0 {
        return Err(Failure::usage("--m must be positive"));
    }
    let facts = match &args.facts {
        Some(p) => load_curve_facts(p)?
            .into_iter()
            .find(|c| c.label == args.label)
            .ok_or_else(|| Failure::data(format!("no curve {} in {}", args.label, p.display())))?,
        None => fetch_curve(&args.label, &FetchConfig::from_env())?,
    };
    let base = match &args.point {
        Some(s) => s.parse::<CurvePoint>().map_err(Failure::usage)?,
        None => facts
            .generators
            .as_ref()
            .and_then(|g| g.first())
            .map(|g| CurvePoint::Affine(g.clone()))
            .ok_or_else(|| Failure::usage(format!("{} has no bundled generator; pass --point", facts.label)))?,
    };
    let scan: DivisibilityScan = scan_divisibility(&facts, &base, args.k, args.m, args.lmax)?;
    let text = match args.format {
        Format::Json => json(&scan),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                ell: u64,
                status: String,
                reason: String,
            }
            csv_string(scan.primes.iter().map(|r| {
                let (status, reason) = match &r.result {
                    Divisibility::Divisible => ("divisible", String::new()),
                    Divisibility::NotDivisible => ("not-divisible", String::new()),
                    Divisibility::Inconclusive(s) => ("inconclusive", s.clone()),
                };
                Row { ell: r.ell, status: status.into(), reason }
            }))?
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "curve {}  point {}·{} = {}", scan.label, scan.k, scan.base_point, scan.point);
            let _ = writeln!(s, "m = {}, primes ℓ < {}: {}", scan.m, scan.bound, scan.primes.len());
            let _ = writeln!(s, "not divisible at: {:?}", scan.failures);
            let _ = writeln!(s, "inconclusive at: {:?}", scan.inconclusive);
            let _ = writeln!(s, "divisible at every other prime: {}", scan.all_good_primes_divisible);
            let g = match scan.global_divisible {
                Some(true) => "yes",
                Some(false) => "no",
                None => "unknown",
            };
            let _ = writeln!(s, "divisible in E(Q): {g}");
            let _ = writeln!(s, "local-global gap below the bound: {}", scan.local_global_gap);
            s
        }
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn run_fetch(args: &FetchArgs) -> Result<(), Failure> {
    let env = FetchConfig::from_env();
    let cfg = FetchConfig {
        base_url: args.base_url.clone().or(env.base_url),
        cache_dir: args.cache.clone().or(env.cache_dir),
        use_cache: !args.no_cache,
    };
    let facts = fetch_curve(&args.label, &cfg)?;
    println!("{}", serde_json::to_string(&facts).expect("serializable"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool configured once");
    }
    let result = match &cli.command {
        Command::Enumerate(a) => run_table(a, false),
        Command::Lker(a) => run_table(a, true),
        Command::Classify(a) => run_classify(a),
        Command::ScanDivisibility(a) => run_scan(a),
        Command::Fetch(a) => run_fetch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
