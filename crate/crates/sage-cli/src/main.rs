use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sage_cli::commands::{
    cmd_distill, cmd_eval_tools, cmd_gate_bench, cmd_rank, cmd_reliability, cmd_train, CommonOpts,
};
use sage_cli::error::CliResult;
use sage_cli::experiments::GateBenchOptions;

#[derive(Parser)]
#[command(
    name = "sage",
    version,
    about = "Deterministic experiment runner: training, reranking, gating, distillation, tool evaluation, and reliability checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Config file (key = value lines); schema depends on the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed. Equal seed and config reproduce outputs byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn opts(&self) -> CommonOpts {
        CommonOpts {
            config: self.config.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train on a token corpus; writes model.ckpt and loss.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus file: one sequence per line, `|` before the masked span.
        corpus: PathBuf,
        /// Number of optimization steps.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Sample and rerank k continuations per prompt; writes rank.csv.
    Rank {
        #[command(flatten)]
        common: Common,
        /// Checkpoint produced by `sage train`.
        checkpoint: PathBuf,
        /// Prompt file: token ids per line, optional `-> t` answer key.
        prompts: PathBuf,
        /// Candidates sampled per prompt.
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Skepticism weight; defaults to the config value.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run scenario reliability checks; writes report.json and curves.csv.
    Reliability {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials per check (>= 1000).
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Distill-then-reinforce over the standard tool tasks.
    Distill {
        #[command(flatten)]
        common: Common,
        /// Samples used for each hallucination-rate estimate.
        #[arg(long, default_value_t = 400)]
        trials: usize,
    },
    /// Sweep the entropy gate; writes the accuracy/cost frontier.
    GateBench {
        #[command(flatten)]
        common: Common,
        /// Evaluation suite size.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Candidates sampled on the slow path.
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Evaluate a single threshold instead of sweeping.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Score fixed policies on the tool suite; writes eval_tools.json.
    EvalTools {
        #[command(flatten)]
        common: Common,
        /// Injected episodes per arm of the recovery ablation.
        #[arg(long, default_value_t = 120)]
        trials: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Cmd::Train {
            common,
            corpus,
            trials,
        } => {
            let summary = cmd_train(&common.opts(), &corpus, trials)?;
            println!(
                "trained {} steps: total {:.4} fwd {:.4} inv {:.4}",
                summary.steps, summary.final_total, summary.final_fwd, summary.final_inv
            );
        }
        Cmd::Rank {
            common,
            checkpoint,
            prompts,
            k,
            lambda,
        } => {
            let summary = cmd_rank(&common.opts(), &checkpoint, &prompts, k, lambda)?;
            match &summary.accuracy {
                Some(acc) => println!(
                    "ranked {} prompts at k={} lambda={}: vote {:.3} -> {:.3} (ICS-filtered)",
                    summary.n_prompts,
                    summary.k,
                    summary.lambda,
                    acc.acc_vanilla_vote,
                    acc.acc_ir_vote
                ),
                None => println!(
                    "ranked {} prompts at k={} lambda={}",
                    summary.n_prompts, summary.k, summary.lambda
                ),
            }
        }
        Cmd::Reliability { common, trials } => {
            let report = cmd_reliability(&common.opts(), trials)?;
            println!(
                "{} checks passed: eps'={:.4} cost_ratio={:.4}",
                report.checks.len(),
                report.eps_prime,
                report.cost_ratio
            );
        }
        Cmd::Distill { common, trials } => {
            let summary = cmd_distill(&common.opts(), trials)?;
            println!(
                "{} tasks: hallucination {:.3} -> {:.3} -> {:.3} (ordering {})",
                summary.rows.len(),
                summary.mean_exact_base,
                summary.mean_exact_distill,
                summary.mean_exact_rl,
                if summary.ordering_holds { "holds" } else { "broken" }
            );
        }
        Cmd::GateBench {
            common,
            trials,
            k,
            tau,
        } => {
            let opts = GateBenchOptions {
                n_tasks: trials,
                k_slow: k,
                tau,
                seed: common.seed,
                ..GateBenchOptions::default()
            };
            let report = cmd_gate_bench(&common.opts(), &opts)?;
            match report.best {
                Some(p) => println!(
                    "gate sweep over {} tasks: tau={:.3} keeps accuracy {:.3} at {:.1}% of slow cost",
                    report.n_tasks,
                    p.tau,
                    p.accuracy,
                    100.0 * p.cost / report.always_slow.cost
                ),
                None => println!(
                    "gate sweep over {} tasks: no threshold meets the accuracy/cost target",
                    report.n_tasks
                ),
            }
        }
        Cmd::EvalTools { common, trials } => {
            let report = cmd_eval_tools(&common.opts(), trials)?;
            println!(
                "oracle {:.2} garbage {:.2} negatives {}/{} recovery {:.2} vs {:.2}",
                report.oracle_success_rate,
                report.garbage_success_rate,
                report.negatives_confirmed,
                report.negatives_total,
                report.irr_with_mch,
                report.irr_without
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SAGE_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sage: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
