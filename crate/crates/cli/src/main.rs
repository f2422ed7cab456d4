use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lowspace::graph::{gen_instance, gen_set_intersection_pair, InstanceKind};
use lowspace::harness::{
    estimate, sweep, verify_lemma, write_estimate_csv, write_sweep_csv, Axis, EstimatorSpec, HashMode, Preset, Target,
    LEMMA_IDS,
};
use lowspace::randomness::{parse_seed_hex, FieldChoice};
use lowspace::solver::{solve_ed_lowspace, solve_ed_tradeoff, solve_si, SolverConfig, Verdict};
use lowspace::{Instance, RandomTape};

#[derive(Parser)]
#[command(
    name = "lowspace",
    version,
    about = "Low-space element distinctness, set intersection and walk experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a solver on instance files.
    #[command(subcommand)]
    Solve(Solve),
    /// Monte Carlo estimate of one walk probability.
    Estimate(EstimateArgs),
    /// One estimate per value of a swept parameter.
    Sweep(SweepArgs),
    /// Run a bundled exact or statistical check.
    Verify(VerifyArgs),
    /// Write a random instance file.
    #[command(subcommand)]
    Gen(Gen),
}

#[derive(Args)]
struct SeedArg {
    /// Master seed in hex.
    #[arg(long, env = "LOWSPACE_SEED", default_value = "00")]
    seed: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Smallest,
    LowBias,
}

impl From<Field> for FieldChoice {
    fn from(f: Field) -> Self {
        match f {
            Field::Smallest => FieldChoice::Smallest,
            Field::LowBias => FieldChoice::LowBias,
        }
    }
}

#[derive(Args)]
struct SolverOpts {
    /// Space budget S in words. Omit for the single-start low-space solver.
    #[arg(long)]
    space: Option<u64>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value = "smallest")]
    field: Field,
    /// Override the phase-1 (single-start) trial count.
    #[arg(long)]
    single_trials: Option<u64>,
    /// Override the phase-2 (multi-start) trial count.
    #[arg(long)]
    multi_trials: Option<u64>,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
}

impl SolverOpts {
    fn apply(&self, cfg: &mut SolverConfig) {
        cfg.field = self.field.into();
        if let Some(t) = self.single_trials {
            cfg.single_trials = t;
        }
        if let Some(t) = self.multi_trials {
            cfg.multi_trials = t;
        }
    }
}

#[derive(Subcommand)]
enum Solve {
    /// Element distinctness. Exit code 0: distinct, 1: collision found.
    Ed {
        #[arg(long)]
        input: PathBuf,
        /// Run every scheduled trial instead of stopping at the first witness.
        #[arg(long)]
        no_early_exit: bool,
        #[command(flatten)]
        opts: SolverOpts,
    },
    /// Set intersection of two duplicate-free arrays of equal length.
    Si {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        opts: SolverOpts,
    },
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long)]
    target: Target,
    #[arg(long)]
    n: u32,
    /// Value range; defaults to n².
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long, default_value = "prf")]
    mode: HashMode,
    #[arg(long, value_enum, default_value = "smallest")]
    field: Field,
    /// Fixed trial count; omit to stop after enough events.
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated target vertices.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<u32>>,
    /// Instance family: distinct, planted-pair or planted-k.
    #[arg(long)]
    instance: Option<Kind>,
    /// Planted pairs for planted-k.
    #[arg(long, default_value_t = 1)]
    pairs: u32,
    #[command(flatten)]
    seed: SeedArg,
}

impl SpecArgs {
    fn build(&self) -> Result<EstimatorSpec> {
        parse_seed_hex(&self.seed.seed)?;
        let mut s = EstimatorSpec::new(self.target, self.n);
        if let Some(m) = self.m {
            s.m = m;
        }
        if let Some(k) = self.k {
            s.k = k;
        }
        if let Some(c) = self.c {
            s.c = c;
        }
        s.retune();
        if let Some(t) = self.t {
            s.t = t;
        }
        if let Some(kappa) = self.kappa {
            s.kappa = kappa;
        }
        s.mode = self.mode;
        s.field = self.field.into();
        s.trials = self.trials;
        s.targets = self.targets.clone();
        if let Some(kind) = self.instance {
            s.instance = kind.resolve(self.pairs);
        }
        s.seed = self.seed.seed.clone();
        Ok(s)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a JSON summary to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Parameter to sweep: n, m, t, kappa, k or c.
    #[arg(long)]
    axis: Axis,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check id, or `all`.
    #[arg(long)]
    lemma: String,
    #[arg(long, default_value = "quick")]
    preset: Preset,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Distinct,
    PlantedPair,
    PlantedK,
}

impl Kind {
    fn resolve(self, pairs: u32) -> InstanceKind {
        match self {
            Kind::Distinct => InstanceKind::Distinct,
            Kind::PlantedPair => InstanceKind::PlantedPair,
            Kind::PlantedK => InstanceKind::PlantedKCollisions { k: pairs },
        }
    }
}

#[derive(Subcommand)]
enum Gen {
    /// One array for element distinctness.
    Ed {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long, default_value_t = 1)]
        pairs: u32,
        #[command(flatten)]
        seed: SeedArg,
        /// `.bin` selects the binary format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Two duplicate-free arrays sharing `common` values.
    Si {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        common: u32,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out_a: PathBuf,
        #[arg(long)]
        out_b: PathBuf,
    },
}

fn square(n: u32) -> u64 {
    u64::from(n) * u64::from(n)
}

fn tape(seed: &str) -> Result<RandomTape> {
    Ok(RandomTape::new(&parse_seed_hex(seed)?))
}

fn read(path: &Path) -> Result<Instance> {
    Instance::read(path).with_context(|| format!("reading {}", path.display()))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve(Solve::Ed {
            input,
            no_early_exit,
            opts,
        }) => {
            let inst = read(&input)?;
            let seed = &opts.seed.seed;
            let mut cfg = match opts.space {
                Some(s) => SolverConfig::tradeoff(inst.n(), inst.m(), s, seed),
                None => SolverConfig::low_space(inst.n(), inst.m(), seed),
            };
            opts.apply(&mut cfg);
            cfg.early_exit = !no_early_exit;
            let out = if opts.space.is_some() {
                solve_ed_tradeoff(&inst, &cfg)?
            } else {
                solve_ed_lowspace(&inst, &cfg)?
            };
            if opts.json {
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                match out.verdict {
                    Verdict::Distinct => println!("distinct"),
                    Verdict::CollisionFound => {
                        println!("collision");
                        for g in &out.witnesses.groups {
                            let pos: Vec<String> = g.positions.iter().map(|p| p.to_string()).collect();
                            println!("value {} at positions {}", g.value, pos.join(","));
                        }
                    }
                }
                eprintln!(
                    "trials {} oracle calls {} peak words {} ({:.2}s)",
                    out.trials_run(),
                    out.resources.oracle_calls,
                    out.resources.peak_words,
                    out.seconds
                );
            }
            Ok(ExitCode::from(match out.verdict {
                Verdict::Distinct => 0,
                Verdict::CollisionFound => 1,
            }))
        }
        Cmd::Solve(Solve::Si { a, b, opts }) => {
            let (a, b) = (read(&a)?, read(&b)?);
            if !a.is_injective() || !b.is_injective() {
                bail!("set intersection inputs must be duplicate-free");
            }
            let space = opts.space.unwrap_or(u64::from(a.n()).max(1).ilog2().into());
            let mut cfg = SolverConfig::set_intersection(a.n(), a.m().max(b.m()), space, &opts.seed.seed);
            opts.apply(&mut cfg);
            let mut printed = Vec::new();
            let json = opts.json;
            let out = solve_si(&a, &b, &cfg, |v| {
                if json {
                    printed.push(v);
                } else {
                    println!("{v}");
                }
            })?;
            if json {
                let doc = serde_json::json!({ "printed": printed, "outcome": out });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Estimate(args) => {
            let spec = args.spec.build()?;
            let r = estimate(&spec)?;
            if args.out.is_some() || !args.json {
                write_estimate_csv(&r, output(&args.out)?)?;
            }
            if args.json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep(args) => {
            let spec = args.spec.build()?;
            let rows = sweep(&spec, args.axis, &args.values);
            write_sweep_csv(&rows, output(&args.out)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify(args) => {
            let ids: Vec<&str> = if args.lemma == "all" {
                LEMMA_IDS.to_vec()
            } else {
                vec![args.lemma.as_str()]
            };
            let mut pass = true;
            for id in ids {
                let r = verify_lemma(id, args.preset)?;
                pass &= r.pass;
                if args.json {
                    println!("{}", serde_json::to_string(&r)?);
                } else {
                    print!("{r}");
                }
            }
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Gen(Gen::Ed {
            kind,
            n,
            m,
            pairs,
            seed,
            out,
        }) => {
            let g = gen_instance(kind.resolve(pairs), n, m.unwrap_or(square(n)), &mut tape(&seed.seed)?)?;
            g.instance.write(&out)?;
            for (p, q) in g.planted {
                eprintln!("planted {p} {q}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Gen(Gen::Si {
            n,
            m,
            common,
            seed,
            out_a,
            out_b,
        }) => {
            let (a, b) = gen_set_intersection_pair(n, m.unwrap_or(square(n)), common, &mut tape(&seed.seed)?)?;
            a.write(&out_a)?;
            b.write(&out_b)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
