//! `hzgsvd`: solve, generate, verify, strategy and pitfall pipelines.
//!
//! Exit codes: 0 success, 1 internal protocol error, 2 usage or invalid
//! configuration, 3 rank failure, 4 no convergence within the sweep limit
//! (outputs are still written), 5 I/O or file-format error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hzgsvd::distsim::{solve_distributed, DistConfig};
use hzgsvd::harness::{accuracy_report, gen_pair, pitfall_report, pitfall_tsv, AccuracyReport, GenSpec};
use hzgsvd::io::{load, save};
use hzgsvd::strategies::{comm_mapping, dump_mapping, dump_table, gen_table, validate_table};
use hzgsvd::{Blocking, Error, Field, GsvdResult, Matrix, ProblemPair, SolverConfig, StrategyKind};

#[derive(Parser, Debug)]
#[command(name = "hzgsvd", version, about = "GSVD of matrix pairs by implicit Hari-Zimmermann sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve F·Z = U·Σ_F, G·Z = V·Σ_G.
    Solve(SolveArgs),
    /// Generate a test pair with known generalized singular values.
    Generate(GenerateArgs),
    /// Accuracy of a solve output against its input pair.
    Verify(VerifyArgs),
    /// Print a pivot strategy table or its stripe routing.
    Strategy(StrategyArgs),
    /// GSVD versus eigenproblem route on increasingly ill-conditioned pairs.
    Pitfall(PitfallArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Me,
    Mm,
}

impl From<Kind> for StrategyKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Me => StrategyKind::Me,
            Kind::Mm => StrategyKind::Mm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BlockingArg {
    Fb,
    Bo,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=7))]
    variant: u8,
    #[arg(long, value_enum, default_value = "me")]
    outer: Kind,
    #[arg(long, value_enum, default_value = "me")]
    inner: Kind,
    #[arg(long, value_enum, default_value = "fb")]
    blocking: BlockingArg,
    /// Do not sort the transformed columns.
    #[arg(long)]
    no_sort: bool,
    /// Block width.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    w: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Sweeps of the blocked solver per step when distributed.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    s_inner: u64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Error> {
        let blocking = match self.blocking {
            BlockingArg::Fb => Blocking::Fb,
            BlockingArg::Bo => Blocking::Bo,
        };
        let mut cfg = SolverConfig::variant(self.variant)?
            .with_blocking(blocking)
            .with_block_width(self.w as usize)
            .with_kinds(self.outer.into(), self.inner.into());
        cfg.sorting = !self.no_sort;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    /// Output directory for U.bin, V.bin, Z.bin and sigma.tsv.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "real")]
    field: FieldArg,
    /// Output directory for F.bin, G.bin and sigma_ref.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    /// Directory written by `solve`.
    #[arg(long)]
    result: PathBuf,
    /// TSV with a `sigma` column of reference values.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StrategyArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    /// Print the pairs of every step.
    #[arg(long)]
    dump: bool,
    /// Print the stripe routing of every step.
    #[arg(long)]
    mapping: bool,
}

#[derive(Args, Debug)]
struct PitfallArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    from: u32,
    #[arg(long, default_value_t = 16)]
    to: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

const USAGE: u8 = 2;
const RANK: u8 = 3;
const NOT_CONVERGED: u8 = 4;
const IO: u8 = 5;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_rank_failure() => RANK,
        Error::Io(_) | Error::Header(_) | Error::SizeMismatch { .. } | Error::LengthMismatch(..) => IO,
        Error::Invalid(_) => USAGE,
        _ => 1,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<Matrix, Error> {
    load(path).map_err(|e| match e {
        Error::Io(e) => io_err(path, e),
        e => e,
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn sigma_tsv(r: &GsvdResult) -> String {
    let mut s = String::from("sigma_f\tsigma_g\tsigma\n");
    for j in 0..r.sigma.len() {
        s.push_str(&format!("{}\t{}\t{}\n", fmt17(r.sigma_f[j]), fmt17(r.sigma_g[j]), fmt17(r.sigma[j])));
    }
    s
}

/// Reads the `sigma` column of a TSV with a header line.
fn read_sigma_column(path: &Path) -> Result<Vec<f64>, Error> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Header(format!("{}: empty file", path.display())))?;
    let col = header
        .split('\t')
        .position(|h| h == "sigma")
        .ok_or_else(|| Error::Header(format!("{}: no sigma column", path.display())))?;
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split('\t')
                .nth(col)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Header(format!("{}: bad line {l:?}", path.display())))
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn mkdir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn solve(a: &SolveArgs) -> Result<u8, Error> {
    let cfg = a.solver.config()?;
    let f = read(&a.f)?;
    let g = read(&a.g)?;
    let r = if a.solver.workers > 1 || a.solver.s_inner > 1 {
        let dc = DistConfig { workers: a.solver.workers as usize, s_inner: a.solver.s_inner as usize, ..DistConfig::default() };
        solve_distributed(&f, &g, &cfg, &dc)?
    } else {
        hzgsvd::solve(&f, &g, &cfg)?
    };
    mkdir(&a.out)?;
    save(&r.u, &a.out.join("U.bin"))?;
    save(&r.v, &a.out.join("V.bin"))?;
    save(&r.z, &a.out.join("Z.bin"))?;
    write(&a.out.join("sigma.tsv"), &sigma_tsv(&r))?;
    let stats = format!(
        "sweeps={} total={} big={} converged={}",
        r.sweeps,
        r.total_transforms,
        r.big_transforms,
        u8::from(r.converged)
    );
    write(&a.out.join("stats.txt"), &format!("{stats}\n"))?;
    println!("{stats}");
    Ok(if r.converged { 0 } else { NOT_CONVERGED })
}

fn generate(a: &GenerateArgs) -> Result<u8, Error> {
    let field = match a.field {
        FieldArg::Real => Field::Real,
        FieldArg::Complex => Field::Complex,
    };
    let (p, sigma) = gen_pair(&GenSpec::random(a.n, a.seed, field))?;
    mkdir(&a.out)?;
    save(&p.f, &a.out.join("F.bin"))?;
    save(&p.g, &a.out.join("G.bin"))?;
    let mut s = String::from("sigma\n");
    for x in sigma {
        s.push_str(&fmt17(x));
        s.push('\n');
    }
    write(&a.out.join("sigma_ref.tsv"), &s)?;
    Ok(0)
}

fn verify(a: &VerifyArgs) -> Result<u8, Error> {
    let p = ProblemPair::new(read(&a.f)?, read(&a.g)?)?;
    let sig = a.result.join("sigma.tsv");
    let text = fs::read_to_string(&sig).map_err(|e| io_err(&sig, e))?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for l in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let v: Vec<f64> = l.split('\t').filter_map(|x| x.parse().ok()).collect();
        if v.len() != 3 {
            return Err(Error::Header(format!("{}: bad line {l:?}", sig.display())));
        }
        for k in 0..3 {
            cols[k].push(v[k]);
        }
    }
    let [sigma_f, sigma_g, sigma] = cols;
    let r = GsvdResult {
        u: read(&a.result.join("U.bin"))?,
        v: read(&a.result.join("V.bin"))?,
        z: read(&a.result.join("Z.bin"))?,
        sigma_f,
        sigma_g,
        sigma,
        sweeps: 0,
        total_transforms: 0,
        big_transforms: 0,
        converged: true,
        workers: 1,
    };
    let reference = a.reference.as_deref().map(read_sigma_column).transpose()?;
    let rep = accuracy_report(&p, &r, reference.as_deref())?;
    println!("{}", AccuracyReport::TSV_HEADER);
    println!("{}", rep.tsv_row());
    Ok(0)
}

fn strategy(a: &StrategyArgs) -> Result<u8, Error> {
    let t = gen_table(a.kind.into(), a.n)?;
    let rep = validate_table(&t);
    if a.dump || !a.mapping {
        print!("{}", dump_table(&t));
    }
    if a.mapping {
        print!("{}", dump_mapping(&comm_mapping(&t)));
    }
    eprintln!("steps={} cyclic={} coverage={} disjoint={}", t.steps.len(), rep.cyclic, rep.coverage_ok, rep.disjoint_ok);
    Ok(0)
}

fn pitfall(a: &PitfallArgs) -> Result<u8, Error> {
    if a.from > a.to {
        return Err(Error::Invalid("--from must not exceed --to".into()));
    }
    let js: Vec<u32> = (a.from..=a.to).collect();
    print!("{}", pitfall_tsv(&pitfall_report(a.n, &js, a.seed)?));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Generate(a) => generate(a),
        Command::Verify(a) => verify(a),
        Command::Strategy(a) => strategy(a),
        Command::Pitfall(a) => pitfall(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hzgsvd: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
