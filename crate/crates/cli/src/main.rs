use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use qld_core::experiment::{emit_results, run_suite, thread_count, Format, SuiteConfig};
use qld_core::klcheck::kl_report;
use qld_core::library;
use qld_core::listdec::{build_list_table, ErrorSet};
use qld_core::moments;
use qld_core::protocol::{multi_round, to_jsonl, Adversary, AdversarySpec, Protocol, ProtocolConfig};
use qld_core::randunitary::{parse_seed, stream_rng};

#[derive(Parser)]
#[command(name = "qld", version, about = "Quantum list decoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stabilizer code library.
    #[command(subcommand)]
    Codes(CodesCmd),
    /// Syndrome list tables.
    #[command(subcommand)]
    Table(TableCmd),
    /// Knill-Laflamme checks.
    #[command(subcommand)]
    Kl(KlCmd),
    /// Weingarten coefficients.
    #[command(subcommand)]
    Wg(WgCmd),
    /// Haar moment closed forms.
    #[command(subcommand)]
    Moment(MomentCmd),
    /// Keyed encode / inject / decode rounds.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// Seeded experiment suites.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum CodesCmd {
    List,
}

#[derive(Args)]
struct CodeArgs {
    /// Builtin name, `name^k`, or a code file.
    #[arg(long)]
    code: String,
    #[arg(long)]
    max_weight: usize,
}

#[derive(Subcommand)]
enum TableCmd {
    Build {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KlCmd {
    Check {
        #[command(flatten)]
        code: CodeArgs,
    },
}

#[derive(Subcommand)]
enum WgCmd {
    Verify {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        d: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum MomentCmd {
    /// Key-averaged wrong-guess pass probability.
    P0 {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
    },
    /// Key-averaged unnormalized restoration fidelity after a failed guess.
    Fidelity {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        sign: i32,
    },
}

#[derive(Subcommand)]
enum ProtocolCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Transcript file (JSON lines); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Hex master seed; overrides the config.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `protocol run` document: `[protocol]` and `[adversary]` tables.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolRunConfig {
    protocol: ProtocolConfig,
    adversary: AdversarySpec,
    rounds: usize,
    seed: String,
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Codes(CodesCmd::List) => {
            println!("name,n,k,generators,distance");
            for name in library::BUILTIN {
                let c = library::builtin(name)?;
                let d = c.distance().map_or("-".to_string(), |d| d.to_string());
                println!("{name},{},{},{},{d}", c.n_physical(), c.n_logical(), c.n_generators());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Table(TableCmd::Build { code, out }) => {
            let c = library::resolve(&code.code)?;
            let t = build_list_table(&c, &ErrorSet::new(c.n_physical(), code.max_weight))?;
            let text = serde_json::to_string_pretty(&t.to_json())?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
            eprintln!("syndromes: {}, L_max: {}", t.syndromes().count(), t.l_max());
            Ok(ExitCode::SUCCESS)
        }
        Command::Kl(KlCmd::Check { code }) => {
            let c = library::resolve(&code.code)?;
            let r = kl_report(&c, &ErrorSet::new(c.n_physical(), code.max_weight))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(verdict(r.pass))
        }
        Command::Wg(WgCmd::Verify { d }) => {
            print!("{}", moments::orthogonality_csv(&d)?);
            let mut ok = true;
            for &x in &d {
                let err = moments::orthogonality_error(x)?;
                eprintln!("d={x}: max orthogonality error {err:e}");
                ok &= err <= 1e-9;
            }
            Ok(verdict(ok))
        }
        Command::Moment(MomentCmd::P0 { n, m }) => {
            let exact = moments::expected_p0_exact(n, m);
            println!("n,m,exact,value");
            println!("{n},{m},{exact},{:e}", moments::to_f64(&exact));
            Ok(ExitCode::SUCCESS)
        }
        Command::Moment(MomentCmd::Fidelity { n, m, sign }) => {
            if sign != 1 && sign != -1 {
                bail!("--sign must be 1 or -1");
            }
            let exact = moments::expected_unnormalized_fidelity_exact(n, m, sign)?;
            println!("n,m,sign,exact,value,leading_order,required_c");
            println!(
                "{n},{m},{sign},{exact},{:e},{:e},{:e}",
                moments::to_f64(&exact),
                moments::leading_order_fidelity(n, m)?,
                moments::required_fidelity_constant(n, m)?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Protocol(ProtocolCmd::Run { config, out }) => {
            let cfg: ProtocolRunConfig = read_config(&config)?;
            let proto = Protocol::new(&cfg.protocol)?;
            let adv = Adversary::new(cfg.adversary, proto.code(), proto.table())?;
            let mut rng = stream_rng(&parse_seed(&cfg.seed)?, 0);
            let transcripts = multi_round(&proto, &adv, cfg.rounds, &mut rng)?;
            let text = to_jsonl(&transcripts)?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            let failures = transcripts.iter().filter(|t| t.failed()).count();
            eprintln!("rounds: {}, decode failures: {failures}", transcripts.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment(ExperimentCmd::Run { config, seed, out }) => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = SuiteConfig::parse(&text)?;
            let seed_hex = seed
                .or_else(|| cfg.seed.clone())
                .context("no seed given on the command line or in the config")?;
            let seed = parse_seed(&seed_hex)?;
            eprintln!("threads: {}", thread_count(cfg.threads));
            let results = run_suite(&cfg, &seed, Some(&out))?;
            print!("{}", emit_results(&results, Format::Csv)?);
            Ok(verdict(results.all_pass()))
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
