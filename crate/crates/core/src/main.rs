use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bufrelay::analytic::{
    interruption_prob_conventional, joint_state_probs, solve_buffered_bernoulli_chain, ChannelProbs,
    DEFAULT_CHAIN_CAP,
};
use bufrelay::config::{parse_config, parse_mode, Overrides};
use bufrelay::experiment::{rate_label, run_experiment};

#[derive(Parser)]
#[command(name = "bufrelay", version, about = "Conventional vs buffer-aided relaying simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, env = "BUFRELAY_OUT_DIR")]
        out: Option<PathBuf>,
        /// First seed; replications use consecutive seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Cells run concurrently.
        #[arg(long)]
        parallel: Option<usize>,
        /// conventional, buffered or both.
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated Poisson rates in packets/s, e.g. 10,20,30.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Print Bernoulli-channel interruption probabilities.
    Analytic {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        /// Relay buffer size for the buffered chain.
        #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
        cap: usize,
    },
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("invalid sweep value `{v}`: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<(), Box<dyn std::error::Error>> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
            mode,
            sweep,
        } => {
            let overrides = Overrides {
                output_dir: out,
                seed,
                parallel,
                modes: mode.as_deref().map(parse_mode).transpose()?,
                sweep: sweep.as_deref().map(parse_sweep).transpose()?,
            };
            let spec = parse_config(&config)?.apply(overrides)?;
            let summary = run_experiment(&spec)?;
            println!(
                "{:<13} {:>8} {:>5} {:>15} {:>12} {:>12} {:>10}",
                "mode", "rate", "reps", "mean_delay_ms", "offered_pps", "thpt_pps", "bs_unstab"
            );
            for g in &summary.groups {
                println!(
                    "{:<13} {:>8} {:>5} {:>15} {:>12.2} {:>12.2} {:>10}",
                    g.mode.as_str(),
                    rate_label(g.rate_pps),
                    g.replications,
                    g.pooled_mean_delay_ms
                        .map_or_else(|| "-".to_string(), |d| format!("{d:.2}")),
                    g.mean_offered_pps,
                    g.mean_throughput_pps,
                    g.bs_unstable,
                );
            }
            println!("wrote {}", spec.output_dir.join("summary.json").display());
            Ok(())
        }
        Command::Analytic { p1, p2, cap } => {
            let p = ChannelProbs::new(p1, p2)?;
            let joint = joint_state_probs(p)?;
            let chain = solve_buffered_bernoulli_chain(p, cap)?;
            println!("P(GG)={:.6} P(GB)={:.6} P(BG)={:.6} P(BB)={:.6}", joint.gg, joint.gb, joint.bg, joint.bb);
            println!("q_conventional={:.6}", interruption_prob_conventional(p)?);
            println!("q_buffered={:.6} (relay cap {cap})", chain.interruption_probability());
            Ok(())
        }
    }
}
