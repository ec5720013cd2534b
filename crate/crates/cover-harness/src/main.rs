//! Experiment CLI. Subcommands verify the coverage, detection, and
//! connectivity bounds by Monte Carlo, run full protocol scenarios, or
//! print every bound for a configuration. Exit code 0 iff all performed
//! bound checks pass.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cover_harness::config::ScenarioConfig;
use cover_harness::scenario::run_scenario;
use cover_harness::stats::McEstimate;
use cover_harness::{bounds, experiments, export};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cover", about = "collaborative verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario configuration file; its values override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    l: Option<u64>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    c: Option<u64>,
    #[arg(long)]
    n_h: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    symbol_size: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Miner strategy kind: honest, hide_stopping_set, coding_fraud,
    /// unsorted, withhold_random, or an invalid transaction class
    /// (bad_sig, bad_sum, bad_input_proof, double_spend, expired).
    #[arg(long)]
    miner_strategy: Option<String>,
}

impl ConfigArgs {
    /// Flags first, then the file on top: the file overrides flags.
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::default();
        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        flag!(l);
        flag!(k);
        flag!(c);
        flag!(n_h);
        flag!(alpha);
        flag!(p);
        flag!(delta);
        flag!(tau);
        flag!(lambda);
        flag!(symbol_size);
        flag!(rounds);
        flag!(master_seed);
        flag!(trials);
        if let Some(kind) = &self.miner_strategy {
            cfg.miner_strategy = parse_strategy(kind)?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            cfg = ScenarioConfig::from_toml(&text).context("parsing config file")?;
        }
        if let Err(errors) = cfg.validate() {
            bail!("invalid configuration:\n  {}", errors.join("\n  "));
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Section-coverage bound: required N_h and empirical full-coverage rate.
    Coverage {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Monte Carlo trials.
        #[arg(long, default_value_t = 10_000)]
        mc_trials: u64,
    },
    /// Per-layer availability detection against 1 - (1-f)^c.
    Detection {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 10_000)]
        mc_trials: u64,
        /// Layer holding the hidden set; the smallest scannable one if unset.
        #[arg(long)]
        layer: Option<u16>,
    },
    /// Interest-subgraph connectivity at the prescribed edge probability.
    Connectivity {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 500)]
        mc_trials: u64,
    },
    /// Full protocol rounds under the configured miner strategy.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for rows.tsv and summary.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print all theorem bounds for a configuration.
    Bounds {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn parse_strategy(kind: &str) -> Result<cover_harness::config::MinerStrategyConfig> {
    use cover_harness::config::{InvalidClassConfig as C, MinerStrategyConfig as M};
    Ok(match kind {
        "honest" => M::Honest,
        "hide_stopping_set" => M::HideStoppingSet { layer: None },
        "coding_fraud" => M::CodingFraud { layer: None, check: 0 },
        "unsorted" => M::Unsorted,
        "withhold_random" => M::WithholdRandom { fraction: 0.05 },
        "bad_sig" => M::InvalidTxn { class: C::BadSig },
        "bad_sum" => M::InvalidTxn { class: C::BadSum },
        "bad_input_proof" => M::InvalidTxn { class: C::BadInputProof },
        "double_spend" => M::InvalidTxn { class: C::DoubleSpend },
        "expired" => M::InvalidTxn { class: C::Expired },
        other => bail!("unknown miner strategy: {other}"),
    })
}

fn print_estimate(name: &str, est: &McEstimate, bound: f64, pass: bool) {
    let (lo, hi) = est.wilson();
    println!(
        "{name}: rate {:.4} wilson [{:.4}, {:.4}] bound {:.4} -> {}",
        est.rate(),
        lo,
        hi,
        bound,
        if pass { "PASS" } else { "FAIL" }
    );
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut all_pass = true;
    match cli.command {
        Command::Coverage { cfg, mc_trials } => {
            let cfg = cfg.resolve()?;
            let required = bounds::coverage_required_nodes(cfg.k, cfg.lambda);
            let target = 1.0 - (-cfg.lambda).exp();
            println!(
                "k={} lambda={}: required N_h = {} (ln L variant: {})",
                cfg.k,
                cfg.lambda,
                required,
                bounds::coverage_required_nodes_ln_l(cfg.k, cfg.l, cfg.lambda)
            );
            let est = experiments::mc_coverage(cfg.k, cfg.n_h, mc_trials, cfg.master_seed);
            // At N_h >= required the rate must clear 1 - e^-lambda at the
            // lower interval edge; below it the bound is not claimed.
            let pass = if cfg.n_h >= required {
                est.lower() >= target
            } else {
                true
            };
            print_estimate(
                &format!("coverage (N_h={})", cfg.n_h),
                &est,
                target,
                pass,
            );
            all_pass &= pass;
        }
        Command::Detection { cfg, mc_trials, layer } => {
            let cfg = cfg.resolve()?;
            let ctx = cover::cmt::CmtContext::new(cfg.chain_params().cmt, cfg.l as usize)
                .context("building tree context")?;
            let layer = layer.unwrap_or_else(|| cover_harness::scenario::smallest_scannable_layer(&ctx));
            let hidden = cover_harness::scenario::minimum_stopping_set(&ctx, layer, cfg.master_seed)
                .context("no stopping set found")?;
            let f = hidden.len() as f64 / ctx.layout.total_width(layer) as f64;
            let c = cfg.effective_c();
            let bound = bounds::detection_probability(f, c);
            println!(
                "layer {layer}: hidden |S|={} of {} (f={:.4}), c={c}",
                hidden.len(),
                ctx.layout.total_width(layer),
                f
            );
            let est = experiments::mc_detection(
                &ctx.layout,
                layer,
                &hidden,
                c as usize,
                mc_trials,
                cfg.master_seed,
            );
            // The guarantee is a lower bound; fail only when the whole
            // interval sits below it.
            let pass = est.upper() >= bound;
            print_estimate("per-layer detection", &est, bound, pass);
            all_pass &= pass;
        }
        Command::Connectivity { cfg, mc_trials } => {
            let cfg = cfg.resolve()?;
            let p_override = (cfg.p > 0.0).then_some(cfg.p);
            let run = experiments::mc_connectivity(
                cfg.n_h,
                cfg.l,
                cfg.k,
                cfg.lambda,
                p_override,
                mc_trials,
                cfg.master_seed,
                cfg.chain_params().cmt,
            )?;
            println!(
                "N_h={} L={} k={}: r={:.4}, M={}, p={:.4}, neighbors/node ~ {:.1}",
                cfg.n_h,
                cfg.l,
                cfg.k,
                run.r,
                run.total_symbols,
                run.p_used,
                run.p_used * cfg.n_h as f64 / (1.0 - cfg.alpha)
            );
            let pass = run.estimate.lower() >= run.bound.max(0.0);
            print_estimate("all interest subgraphs connected", &run.estimate, run.bound, pass);
            all_pass &= pass;
        }
        Command::Run { cfg, out } => {
            let cfg = cfg.resolve()?;
            let report = run_scenario(&cfg).map_err(|e| anyhow::anyhow!(e))?;
            let summary = export::summary_text(&cfg, &report)?;
            print!("{summary}");
            let n = report.trials.len() as u64;
            let accept = McEstimate::new(
                report.trials.iter().filter(|t| t.unanimous_accept).count() as u64,
                n,
            );
            let reject = McEstimate::new(
                report.trials.iter().filter(|t| t.unanimous_reject).count() as u64,
                n,
            );
            let accept_bound = bounds::theorem_case_accept_bound(cfg.l, cfg.k, cfg.n_h, cfg.lambda);
            let pass = match report.strategy_label {
                "honest" => accept.upper() >= accept_bound.max(0.0),
                _ => reject.upper() >= accept_bound.max(0.0),
            };
            println!("theorem comparison: {}", if pass { "PASS" } else { "FAIL" });
            all_pass &= pass;
            if let Some(dir) = out {
                export::write_files(&dir, &cfg, &report)?;
                println!("wrote {}", dir.join("rows.tsv").display());
            }
        }
        Command::Bounds { cfg } => {
            let cfg = cfg.resolve()?;
            println!("L={} k={} c={} N_h={} lambda={}", cfg.l, cfg.k, cfg.effective_c(), cfg.n_h, cfg.lambda);
            println!(
                "coverage N_h >= k(ln k + lambda) = {}",
                bounds::coverage_required_nodes(cfg.k, cfg.lambda)
            );
            println!(
                "coverage N_h >= k(ln L + lambda) = {}",
                bounds::coverage_required_nodes_ln_l(cfg.k, cfg.l, cfg.lambda)
            );
            println!(
                "tree coverage N_h >= (L/c)(ln L + lambda) = {}",
                bounds::tree_coverage_required_nodes(cfg.l, cfg.effective_c(), cfg.lambda)
            );
            println!(
                "coverage probability >= {:.6}",
                bounds::coverage_probability_bound(cfg.k, cfg.n_h)
            );
            match bounds::connectivity_required_p(cfg.n_h, cfg.l, cfg.k, cfg.lambda) {
                Ok(p) => {
                    println!("prescribed p = {p:.6}");
                    println!(
                        "neighbors per node = {:.1}",
                        bounds::connectivity_required_neighbors(cfg.n_h, cfg.l, cfg.k, cfg.lambda, cfg.alpha)
                            .unwrap()
                    );
                }
                Err(e) => println!("prescribed p: n/a ({e})"),
            }
            println!(
                "accept bound (cases 1 and 3) = {:.6}",
                bounds::theorem_case_accept_bound(cfg.l, cfg.k, cfg.n_h, cfg.lambda)
            );
        }
    }
    if !all_pass {
        std::process::exit(1);
    }
    Ok(())
}
