use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rpair::corpus::{random_bytes, MutatedCopies};
use rpair::ctph::CtphConfig;
use rpair::pipeline::{compress_stream, decompress_to, stats, CompressOptions, CompressedArtifact, StatsReport};
use rpair::verify::{default_corpus, faulty_rparse, reference_rparse, run_suite, RparseFn, VerifyCase, PROPERTIES};

const EXIT_ERROR: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 3;

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  runtime failure (I/O error, corrupt or truncated artifact)
  2  invalid command line
  3  verify: at least one property failed";

#[derive(Parser, Debug)]
#[command(name = "rpair", version, about = "Grammar compressor for large repetitive inputs", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress a file into a grammar artifact
    Compress(CompressArgs),
    /// Restore the original bytes from an artifact
    Decompress(DecompressArgs),
    /// Print compression statistics and phrase counts per input
    Stats(StatsArgs),
    /// Run the property suite over a generated corpus or given files
    Verify(VerifyArgs),
    /// Write a synthetic test input
    GenCorpus(GenArgs),
}

#[derive(Args, Debug, Clone)]
struct ParseArgs {
    /// Rolling-hash window length
    #[arg(short = 'w', long = "window", env = "RPAIR_WINDOW", default_value_t = 64,
          value_parser = clap::value_parser!(u64).range(2..))]
    window: u64,
    /// Block boundary modulus: a boundary follows every window whose hash is 0 mod p
    #[arg(short = 'p', long = "threshold", env = "RPAIR_THRESHOLD", default_value_t = 64,
          value_parser = clap::value_parser!(u64).range(1..))]
    threshold: u64,
    /// Levels of recursion allowed on the block-ID sequence
    #[arg(long, env = "RPAIR_RECURSE_DEPTH", default_value_t = rpair::pipeline::DEFAULT_RECURSE_DEPTH)]
    recurse_depth: u32,
    /// Only block-ID sequences longer than this are recursed on
    #[arg(long, env = "RPAIR_RECURSION_THRESHOLD", default_value_t = rpair::pipeline::DEFAULT_RECURSION_THRESHOLD)]
    recursion_threshold: usize,
}

impl ParseArgs {
    fn options(&self) -> Result<CompressOptions> {
        let window = usize::try_from(self.window).context("window too large")?;
        Ok(CompressOptions {
            ctph: CtphConfig::new(window, self.threshold)?,
            recurse_depth: self.recurse_depth,
            recursion_threshold: self.recursion_threshold,
            ..CompressOptions::default()
        })
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file (`-` for standard output)
    #[arg(short, long, conflicts_with = "stdout")]
    output: Option<PathBuf>,
    /// Write to standard output
    #[arg(short = 'c', long)]
    stdout: bool,
    /// Overwrite an existing output file
    #[arg(short, long)]
    force: bool,
}

#[derive(Args, Debug)]
struct CompressArgs {
    /// Input file (`-` for standard input)
    #[arg(default_value = "-")]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    parse: ParseArgs,
    /// Do not print the summary line
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct DecompressArgs {
    /// Artifact file (`-` for standard input)
    #[arg(default_value = "-")]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ReportFormat {
    Text,
    Kv,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Input files (`-` for standard input)
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    parse: ParseArgs,
    /// Longest input on which the exact LZ parsers run
    #[arg(long, env = "RPAIR_ORACLE_CAP", default_value_t = 1_000_000)]
    oracle_cap: u64,
    #[arg(long, env = "RPAIR_FORMAT", value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ParserChoice {
    Reference,
    /// Splits every copy into single symbols; the suite must reject it
    Faulty,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Inputs to check instead of the generated corpus
    inputs: Vec<PathBuf>,
    /// Parameters used for the given inputs
    #[command(flatten)]
    parse: ParseArgs,
    /// Seed for the generated corpus
    #[arg(long, env = "RPAIR_SEED", default_value_t = 0)]
    seed: u64,
    /// Use at most this many generated cases
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long, env = "RPAIR_ORACLE_CAP", default_value_t = 1_000_000)]
    oracle_cap: u64,
    /// Worker threads (defaults to the available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Parser to check the phrase bounds against
    #[arg(long, value_enum, default_value_t = ParserChoice::Reference)]
    parser: ParserChoice,
}

#[derive(Subcommand, Debug)]
enum CorpusCommand {
    /// Uniformly random bytes
    Random {
        #[arg(long)]
        len: usize,
    },
    /// One byte repeated
    Unary {
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = b'a')]
        byte: u8,
    },
    /// Copies of a random seed string with point mutations in every copy after the first
    Mutated {
        #[arg(long)]
        seed_len: usize,
        #[arg(long)]
        copies: usize,
        /// Per-byte mutation probability
        #[arg(long, value_parser = parse_rate)]
        rate: f64,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(subcommand)]
    kind: CorpusCommand,
    /// Output file; standard output when omitted
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, env = "RPAIR_SEED", default_value_t = 0, global = true)]
    seed: u64,
}

fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let rate: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&rate) {
        Ok(rate)
    } else {
        Err("rate must lie in [0, 1)".into())
    }
}

fn is_dash(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    if is_dash(path) {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::with_capacity(1 << 20, f)))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    open_input(path)?.read_to_end(&mut data).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(data)
}

enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    fn choose(out: &OutputArgs, input: &Path, derive: impl FnOnce(&Path) -> Result<PathBuf>) -> Result<Sink> {
        let sink = match &out.output {
            Some(p) if is_dash(p) => Sink::Stdout,
            Some(p) => Sink::File(p.clone()),
            None if out.stdout || is_dash(input) => Sink::Stdout,
            None => Sink::File(derive(input)?),
        };
        if let Sink::File(p) = &sink {
            if !out.force && p.exists() {
                bail!("{} already exists (use --force to overwrite)", p.display());
            }
        }
        Ok(sink)
    }

    /// Writes through a temporary file that only replaces the target once
    /// `fill` has succeeded.
    fn write(&self, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match self {
            Sink::Stdout => {
                let mut w = BufWriter::new(io::stdout().lock());
                fill(&mut w)?;
                w.flush().context("cannot write to standard output")
            }
            Sink::File(path) => {
                let dir = match path.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                let tmp = tempfile::NamedTempFile::new_in(dir)
                    .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
                {
                    let mut w = BufWriter::with_capacity(1 << 20, tmp.as_file());
                    fill(&mut w)?;
                    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
                }
                tmp.persist(path).with_context(|| format!("cannot create {}", path.display()))?;
                Ok(())
            }
        }
    }
}

fn cmd_compress(args: &CompressArgs) -> Result<()> {
    let opts = args.parse.options()?;
    let sink = Sink::choose(&args.out, &args.input, |p| {
        let mut name = p.as_os_str().to_owned();
        name.push(".rpair");
        Ok(name.into())
    })?;
    let input = open_input(&args.input)?;
    let (art, trace) =
        compress_stream(input, &opts).with_context(|| format!("cannot compress {}", args.input.display()))?;
    let bytes = art.to_bytes();
    sink.write(|w| Ok(w.write_all(&bytes)?))?;
    if !args.quiet {
        let h = &art.header;
        let ratio = if h.input_len == 0 { 0.0 } else { art.accounted_bits() as f64 / 8.0 / h.input_len as f64 };
        eprintln!(
            "{}: {} -> {} bytes, b={} r={} c={} depth={} ratio={:.4}%",
            args.input.display(),
            h.input_len,
            bytes.len(),
            trace.b,
            h.r,
            h.c,
            trace.recursion_depth,
            ratio * 100.0
        );
    }
    Ok(())
}

fn cmd_decompress(args: &DecompressArgs) -> Result<()> {
    let sink = Sink::choose(&args.out, &args.input, |p| match p.extension() {
        Some(ext) if ext == "rpair" => Ok(p.with_extension("")),
        _ => bail!("cannot derive an output name for {}; use -o or -c", p.display()),
    })?;
    let art = CompressedArtifact::read_from(open_input(&args.input)?)
        .with_context(|| format!("cannot read artifact {}", args.input.display()))?;
    sink.write(|w| {
        decompress_to(&art, w).with_context(|| format!("cannot decompress {}", args.input.display()))?;
        Ok(())
    })
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let opts = args.parse.options()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.format == ReportFormat::Text {
        writeln!(out, "{}", StatsReport::table_header())?;
    }
    for path in &args.inputs {
        let data = read_all(path)?;
        let rep =
            stats(&data, &opts, args.oracle_cap).with_context(|| format!("cannot compress {}", path.display()))?;
        let name = path.display().to_string();
        match args.format {
            ReportFormat::Text => writeln!(out, "{}", rep.table_row(&name))?,
            ReportFormat::Kv => rep.write_kv(&name, &mut out)?,
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let cases: Vec<VerifyCase> = if args.inputs.is_empty() {
        let mut cases = default_corpus(args.seed);
        cases.truncate(args.cases.unwrap_or(usize::MAX));
        cases
    } else {
        let options = args.parse.options()?;
        args.inputs
            .iter()
            .map(|p| Ok(VerifyCase { label: p.display().to_string(), data: read_all(p)?, options }))
            .collect::<Result<_>>()?
    };
    if cases.is_empty() {
        eprintln!("rpair: warning: empty corpus, nothing to verify");
    }
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let parser: &RparseFn = match args.parser {
        ParserChoice::Reference => &reference_rparse,
        ParserChoice::Faulty => &faulty_rparse,
    };
    let rep = run_suite(&cases, args.oracle_cap, threads, parser)?;

    let mut out = io::stdout().lock();
    writeln!(out, "{:<18} {:>8} {:>8} {:>8}", "property", "passed", "failed", "skipped")?;
    for (name, t) in PROPERTIES.iter().zip(&rep.tallies) {
        writeln!(out, "{name:<18} {:>8} {:>8} {:>8}", t.passed, t.failed, t.skipped)?;
    }
    for f in rep.failures.iter().take(20) {
        writeln!(out, "FAILED {f}")?;
    }
    if rep.failures.len() > 20 {
        writeln!(out, "... and {} more failures", rep.failures.len() - 20)?;
    }
    let verdict = if rep.all_passed() { "all properties hold" } else { "some properties FAILED" };
    writeln!(out, "{} cases: {verdict}", rep.cases)?;
    Ok(rep.all_passed())
}

fn cmd_gen_corpus(args: &GenArgs) -> Result<()> {
    let sink = match &args.output {
        None => Sink::Stdout,
        Some(p) if is_dash(p) => Sink::Stdout,
        Some(p) => Sink::File(p.clone()),
    };
    sink.write(|w| {
        match args.kind {
            CorpusCommand::Random { len } => w.write_all(&random_bytes(len, args.seed))?,
            CorpusCommand::Unary { len, byte } => io::copy(&mut io::repeat(byte).take(len as u64), w).map(drop)?,
            CorpusCommand::Mutated { seed_len, copies, rate } => {
                io::copy(&mut MutatedCopies::new(seed_len, copies, rate, args.seed), w).map(drop)?
            }
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compress(a) => cmd_compress(a).map(|_| true),
        Command::Decompress(a) => cmd_decompress(a).map(|_| true),
        Command::Stats(a) => cmd_stats(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(e) => {
            eprintln!("rpair: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
