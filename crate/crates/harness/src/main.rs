//! `lpssl`: command-line entry point of the experiment harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lpssl_core::augment::AugKind;
use lpssl_core::seed::SeedLineage;
use lpssl_eval::Tail;
use lpssl_harness::report::{self, file_stem};
use lpssl_harness::runner::{self, evaluate_checkpoint, load_graph, split_for};
use lpssl_harness::{run_experiment, tune_and_run, ExperimentConfig, ExperimentReport, SearchSpace, DATA_ROOT_ENV};
use lpssl_models::ModelKind;

#[derive(Parser)]
#[command(name = "lpssl", version, about = "Self-supervised link prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset name; overrides the config. `benchmark` accepts a comma list.
    #[arg(long)]
    dataset: Option<String>,
    /// Seeds, e.g. `1,2,3` or `1-10`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads for seeds and trials.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Results directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Dataset root directory.
    #[arg(long, env = DATA_ROOT_ENV, default_value = "data")]
    data_root: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TailArg {
    OneSided,
    TwoSided,
}

impl From<TailArg> for Tail {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::OneSided => Tail::OneSided,
            TailArg::TwoSided => Tail::TwoSided,
        }
    }
}

#[derive(Args, Clone)]
struct StatsArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = TailArg::OneSided)]
    tail: TailArg,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Number of trials.
    #[arg(long, default_value_t = 25)]
    budget: usize,
    /// Search space file (TOML); defaults to the tuning table.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    search_seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train/validation/test edge lists of each seed.
    Split(Common),
    /// Train and evaluate one configuration over its seeds.
    Train(Common),
    /// Re-evaluate saved checkpoints on their regenerated splits.
    Evaluate(Common),
    /// Sweep models and augmentations over datasets, then report.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Comma-separated models (default: all).
        #[arg(long)]
        models: Option<String>,
        /// Comma-separated augmentations (default: all).
        #[arg(long)]
        augmentations: Option<String>,
        /// Tune every combination before running it.
        #[arg(long)]
        search: bool,
        #[command(flatten)]
        search_args: SearchArgs,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Random hyperparameter search on the tuning seed, then run the best
    /// configuration over the evaluation seeds.
    Search {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search_args: SearchArgs,
    },
    /// Friedman and Bonferroni-Dunn over an existing results directory.
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Render result tables with significance marks and optim rows.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stats: StatsArgs,
    },
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if out.is_empty() {
        bail!("no seeds in `{s}`");
    }
    Ok(out)
}

fn base_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &c.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(s) = &c.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    Ok(cfg)
}

fn print_report(r: &ExperimentReport) -> bool {
    let s = r.summary();
    println!(
        "{} {}: hits@{} {:.2}±{:.2}  ap {:.2}±{:.2}  auc {:.2}±{:.2}  ({} seeds)",
        r.config.dataset,
        r.config.run_name(),
        r.config.hits_k,
        100.0 * s.hits.0,
        100.0 * s.hits.1,
        100.0 * s.ap.0,
        100.0 * s.ap.1,
        100.0 * s.auc.0,
        100.0 * s.auc.1,
        s.seeds
    );
    let mut ok = true;
    for (seed, e) in r.failures() {
        eprintln!("seed {seed} failed: {e}");
        ok = false;
    }
    ok
}

fn load_space(a: &SearchArgs) -> anyhow::Result<SearchSpace> {
    let mut space = match &a.space {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SearchSpace::default(),
    };
    space.budget = a.budget;
    Ok(space)
}

fn write_edges(path: &Path, edges: &[(usize, usize)]) -> anyhow::Result<()> {
    let text: String = edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_split(c: &Common) -> anyhow::Result<bool> {
    let cfg = base_config(c)?;
    let g = load_graph(&cfg.dataset, &c.data_root)?;
    for &seed in &cfg.seeds {
        let split = split_for(&g, &cfg, seed)?;
        let dir = c.out.join(&cfg.dataset).join("splits").join(seed.to_string());
        std::fs::create_dir_all(&dir)?;
        write_edges(&dir.join("train.txt"), &split.train_pos)?;
        write_edges(&dir.join("val.txt"), &split.val_pos)?;
        write_edges(&dir.join("test.txt"), &split.test_pos)?;
        std::fs::write(dir.join("lineage.json"), serde_json::to_string_pretty(&SeedLineage::new(seed))?)?;
        println!(
            "{} seed {seed}: {} train, {} val, {} test -> {}",
            cfg.dataset,
            split.train_pos.len(),
            split.val_pos.len(),
            split.test_pos.len(),
            dir.display()
        );
    }
    Ok(true)
}

fn cmd_train(c: &Common) -> anyhow::Result<bool> {
    let cfg = base_config(c)?;
    let g = load_graph(&cfg.dataset, &c.data_root)?;
    let r = run_experiment(&g, &cfg, Some(&c.out), c.workers)?;
    Ok(print_report(&r))
}

fn cmd_evaluate(c: &Common) -> anyhow::Result<bool> {
    let cfg = base_config(c)?;
    let g = load_graph(&cfg.dataset, &c.data_root)?;
    let mut ok = true;
    for &seed in &cfg.seeds {
        let dir = runner::run_dir(&c.out, &cfg).join(seed.to_string());
        match evaluate_checkpoint(&g, &dir) {
            Ok((snap, m)) => println!(
                "{} {} seed {seed}: hits@{} {:.4}  ap {:.4}  auc {:.4}",
                snap.dataset,
                snap.run_name(),
                snap.hits_k,
                m.hits,
                m.ap,
                m.auc
            ),
            Err(e) => {
                eprintln!("{}: {e}", dir.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn parse_list<T>(s: Option<&str>, all: &[T], parse: impl Fn(&str) -> Option<T>) -> anyhow::Result<Vec<T>>
where
    T: Copy,
{
    match s {
        None => Ok(all.to_vec()),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .map(|x| parse(x).with_context(|| format!("unknown name `{x}`")))
            .collect(),
    }
}

fn cmd_report(c: &Common, st: &StatsArgs) -> anyhow::Result<bool> {
    let rows = report::collect(&c.out)?;
    if rows.is_empty() {
        bail!("no per-seed metrics under {}", c.out.display());
    }
    let dir = c.out.join("report");
    std::fs::create_dir_all(&dir)?;
    for r in report::render(&rows, st.alpha, st.tail.into())? {
        println!("{}", r.text);
        let stem = file_stem(&r.metric);
        std::fs::write(dir.join(format!("{stem}.txt")), &r.text)?;
        std::fs::write(dir.join(format!("{stem}.csv")), &r.csv)?;
    }
    Ok(true)
}

fn cmd_stats(c: &Common, st: &StatsArgs) -> anyhow::Result<bool> {
    let rows = report::collect(&c.out)?;
    if rows.is_empty() {
        bail!("no per-seed metrics under {}", c.out.display());
    }
    let mut all = Vec::new();
    for t in report::tables(&rows)? {
        for s in report::significance(&t, st.alpha, st.tail.into())? {
            println!(
                "{} {}: chi2 {:.4}  p {:.3e}  CD {:.4}  best [{}]  worst [{}]",
                s.dataset,
                s.metric,
                s.chi_sq,
                s.p_value,
                s.critical_difference,
                s.best.join(", "),
                s.worst.join(", ")
            );
            all.push(s);
        }
    }
    let path = c.out.join("stats.json");
    std::fs::write(&path, serde_json::to_string_pretty(&all)?)?;
    println!("wrote {}", path.display());
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_benchmark(
    c: &Common,
    models: Option<&str>,
    augmentations: Option<&str>,
    search: bool,
    sa: &SearchArgs,
    st: &StatsArgs,
) -> anyhow::Result<bool> {
    let base = base_config(c)?;
    let datasets: Vec<String> = c
        .dataset
        .as_deref()
        .unwrap_or(&base.dataset)
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let models = parse_list(models, &ModelKind::ALL, ModelKind::parse)?;
    let augs = parse_list(augmentations, &AugKind::ALL, AugKind::parse)?;
    let space = load_space(sa)?;
    let mut ok = true;
    for dataset in &datasets {
        let g = match load_graph(dataset, &c.data_root) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("{dataset}: {e}");
                ok = false;
                continue;
            }
        };
        for &model in &models {
            let kinds: &[AugKind] = if model.is_self_supervised() { &augs } else { &augs[..1] };
            for &kind in kinds {
                let mut cfg = base.clone();
                cfg.dataset = dataset.clone();
                cfg.model = model;
                cfg.augmentation.kind = kind;
                let result = if search {
                    tune_and_run(&g, &cfg, &space, sa.search_seed, c.workers, Some(&c.out)).map(|(_, r)| r)
                } else {
                    run_experiment(&g, &cfg, Some(&c.out), c.workers)
                };
                match result {
                    Ok(r) => ok &= print_report(&r),
                    Err(e) => {
                        eprintln!("{dataset} {}: {e}", cfg.run_name());
                        ok = false;
                    }
                }
            }
        }
    }
    if report::collect(&c.out).map(|r| !r.is_empty()).unwrap_or(false) {
        cmd_report(c, st)?;
    }
    Ok(ok)
}

fn cmd_search(c: &Common, sa: &SearchArgs) -> anyhow::Result<bool> {
    let base = base_config(c)?;
    let g = load_graph(&base.dataset, &c.data_root)?;
    let space = load_space(sa)?;
    let (outcome, r) = tune_and_run(&g, &base, &space, sa.search_seed, c.workers, Some(&c.out))?;
    let failed = outcome.trials.iter().filter(|t| t.error.is_some()).count();
    println!(
        "best of {} trials ({failed} failed): trial {} with validation hits@{} {:.4}",
        outcome.trials.len(),
        outcome.best,
        base.hits_k,
        outcome.best_score()
    );
    Ok(print_report(&r))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Split(c) => cmd_split(c),
        Command::Train(c) => cmd_train(c),
        Command::Evaluate(c) => cmd_evaluate(c),
        Command::Benchmark {
            common,
            models,
            augmentations,
            search,
            search_args,
            stats,
        } => cmd_benchmark(common, models.as_deref(), augmentations.as_deref(), *search, search_args, stats),
        Command::Search { common, search_args } => cmd_search(common, search_args),
        Command::Stats { common, stats } => cmd_stats(common, stats),
        Command::Report { common, stats } => cmd_report(common, stats),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("finished with failures");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "lpssl", "benchmark", "--dataset", "usair,power", "--models", "grace", "--search", "--budget", "3",
            "--workers", "4",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Benchmark { search: true, .. }));
        assert!(Cli::try_parse_from(["lpssl", "stats", "--tail", "two-sided"]).is_ok());
    }
}
