//! Experiment driver behind the `skillseq` binary: seeded multi-seed runs,
//! artifact emission with a hash manifest, and the comparison summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::env::{DrawerEnv, MetaTaskId};
use crate::error::{Error, Result};
use crate::exploration::{
    run_greedy_episode, run_training, Agent, EpisodeRecord, ExplorationMode, HighLevel, LowLevel,
};
use crate::highlevel::{format_f64, QTable};
use crate::baselines::SchemaPolicy;
use crate::lowlevel::LowLevelPolicy;
use crate::metrics::{self, CurveSeries};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Parser)]
#[command(name = "skillseq", version, about = "Skill-sequence hierarchical policy experiments")]
pub struct Cli {
    /// JSON experiment config; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seeds, e.g. `0,1,2` or `0-9`.
    #[arg(long, global = true, value_name = "LIST", value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    /// Worker threads for independent seeds.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    /// Let the high level explore in both branches of the alternating loop.
    #[arg(long, global = true)]
    pub pseudocode_literal: bool,
    /// Override the number of training episodes.
    #[arg(long, global = true, value_name = "N")]
    pub episodes: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration over all seeds and write curves and policies.
    Train(SvgFlag),
    /// Greedy evaluation of trained policies from a `train` output directory.
    Eval {
        #[arg(long, value_name = "DIR")]
        artifacts: PathBuf,
    },
    /// Joint vs alternating exploration on shared seeds.
    CompareExploration(SvgFlag),
    /// Alternating exploration with and without under-sampling.
    AblateUndersampling(SvgFlag),
    /// Render curve CSVs into one SVG chart under `--out`.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Chart file name without extension; defaults to the first input's stem.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct SvgFlag {
    /// Also render SVG charts next to the CSVs.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seed_list(s: &str) -> std::result::Result<SeedList, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {part:?}"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {part:?}"))?;
            if b < a {
                return Err(format!("empty seed range {part:?}"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| format!("bad seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

/// Config with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seeds) = &cli.seeds {
        cfg.seeds = seeds.0.clone();
    }
    if let Some(n) = cli.episodes {
        cfg.episode_loop.max_episode_num = n;
    }
    if cli.pseudocode_literal {
        cfg.episode_loop.pseudocode_literal = true;
    }
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be >= 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Train(f) => cmd_train(&cfg, cli.jobs, f.svg).map(|_| ()),
        Command::Eval { artifacts } => cmd_eval(artifacts, &cfg.output_dir).map(|_| ()),
        Command::CompareExploration(f) => cmd_compare_exploration(&cfg, cli.jobs, f.svg).map(|_| ()),
        Command::AblateUndersampling(f) => cmd_ablate_undersampling(&cfg, cli.jobs, f.svg).map(|_| ()),
        Command::Plot { inputs, name, title } => cmd_plot(inputs, &cfg.output_dir, name.as_deref(), title.as_deref()),
    }
}

/// One finished training run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub agent: Agent,
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let mut loop_cfg = cfg.episode_loop.clone();
    loop_cfg.seed = seed;
    let mut train = cfg.lowlevel.clone();
    train.weight_init_seed = derive_seed(cfg.lowlevel.weight_init_seed, seed);
    let mut agent = Agent::new(&cfg.agent, &cfg.qlearn, &train, &cfg.env, &loop_cfg);
    info!("seed {seed}: {:?} mode, {} episodes", loop_cfg.mode, loop_cfg.max_episode_num);
    let records = run_training(&cfg.env, &mut agent, &loop_cfg)?;
    info!("seed {seed}: done, store counts {:?}", agent.store.counts());
    Ok(RunOutput { seed, records, agent })
}

/// Runs every configured seed on a pool of `jobs` threads. Output order
/// follows `cfg.seeds` regardless of scheduling.
pub fn run_seeds(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunOutput>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Per-stage success rate over the final window.
    pub final_success: [f64; 4],
    pub final_reward: f64,
    pub stage_counts: [usize; 4],
}

pub fn summarize(run: &RunOutput, final_window: usize) -> SeedSummary {
    let n = run.records.len().min(final_window);
    let tail = &run.records[run.records.len() - n..];
    let denom = n.max(1) as f64;
    let final_success = [0, 1, 2, 3].map(|k| tail.iter().filter(|r| r.stage_success[k]).count() as f64 / denom);
    SeedSummary {
        seed: run.seed,
        final_success,
        final_reward: tail.iter().map(|r| r.total_reward).sum::<f64>() / denom,
        stage_counts: run.agent.store.counts(),
    }
}

/// Writes files and remembers their hashes for the manifest.
struct ArtifactWriter {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(ArtifactWriter {
            root: root.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.hashes.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn curve(&mut self, rel: &str, curve: &CurveSeries) -> Result<()> {
        self.write(rel, curve.to_csv_string().as_bytes())
    }

    fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            version: &'a str,
            config: &'a ExperimentConfig,
            files: &'a BTreeMap<String, String>,
        }
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            files: &self.hashes,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn episodes_csv(records: &[EpisodeRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "episode", "total_reward", "steps", "stage1", "stage2", "stage3", "stage4", "low_explores",
        "high_explores", "low_deviated", "high_deviated", "added1", "added2", "added3", "added4", "train_loss",
    ])?;
    let b = |v: bool| u8::from(v).to_string();
    for r in records {
        let mut row = vec![r.episode.to_string(), format_f64(r.total_reward), r.steps.to_string()];
        row.extend(r.stage_success.iter().map(|&s| b(s)));
        row.extend([b(r.low_explores), b(r.high_explores), b(r.low_deviated), b(r.high_deviated)]);
        row.extend(r.samples_added.iter().map(|v| v.to_string()));
        row.push(r.train_loss.map(format_f64).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

fn policy_texts(agent: &Agent) -> (String, String) {
    let high = match &agent.high {
        HighLevel::History(q) => q.to_text(),
        HighLevel::Schema(s) => s.to_text(),
    };
    let low = match &agent.low {
        LowLevel::Learned(p) => p.to_text(),
        LowLevel::Oracle(_) => "oracle\n".to_string(),
    };
    (high, low)
}

fn summary_csv(rows: &[SeedSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed", "success1", "success2", "success3", "success4", "final_reward", "count1", "count2", "count3", "count4",
    ])?;
    for s in rows {
        let mut row = vec![s.seed.to_string()];
        row.extend(s.final_success.iter().map(|v| format_f64(*v)));
        row.push(format_f64(s.final_reward));
        row.extend(s.stage_counts.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Curves for one group of runs under `prefix`.
fn write_group(
    out: &mut ArtifactWriter,
    prefix: &str,
    cfg: &ExperimentConfig,
    runs: &[RunOutput],
    svg: bool,
) -> Result<()> {
    let recs: Vec<&[EpisodeRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
    let window = cfg.smoothing_window;
    let reward = metrics::reward_curve(&recs, window)?;
    out.curve(&format!("{prefix}curves/reward.csv"), &reward)?;
    let success = metrics::success_rate_curves(&recs, window)?;
    for (k, c) in success.iter().enumerate() {
        out.curve(&format!("{prefix}curves/success_stage{}.csv", k + 1), c)?;
    }
    let counters: Vec<_> = runs
        .iter()
        .map(|r| metrics::sample_count_curves(&metrics::store_snapshots(&r.records)))
        .collect();
    let mut count_curves = Vec::new();
    for task in MetaTaskId::ALL {
        let c = metrics::sample_count_series(&counters, task)?;
        out.curve(&format!("{prefix}curves/samples_stage{}.csv", task.index() + 1), &c)?;
        count_curves.push(c);
    }
    let smoothed: Vec<Vec<f64>> = recs
        .iter()
        .map(|r| metrics::moving_average(&r.iter().map(|e| e.total_reward).collect::<Vec<_>>(), window))
        .collect();
    if recs.iter().all(|r| !r.is_empty()) {
        let by_step = metrics::by_env_steps(&recs, &smoothed, cfg.step_grid)?;
        out.curve(&format!("{prefix}curves/reward_by_step.csv"), &by_step)?;
    }
    let rows: Vec<SeedSummary> = runs.iter().map(|r| summarize(r, cfg.final_window)).collect();
    out.write(&format!("{prefix}summary.csv"), &summary_csv(&rows)?)?;
    for r in runs {
        let dir = format!("{prefix}seed_{}", r.seed);
        let (high, low) = policy_texts(&r.agent);
        out.write(&format!("{dir}/episodes.csv"), &episodes_csv(&r.records)?)?;
        out.write(&format!("{dir}/qtable.txt"), high.as_bytes())?;
        out.write(&format!("{dir}/lowlevel.txt"), low.as_bytes())?;
        let mut samples = Vec::new();
        r.agent.store.write_csv(&mut samples)?;
        out.write(&format!("{dir}/samples.csv"), &samples)?;
    }
    if svg {
        out.write(
            &format!("{prefix}curves/reward.svg"),
            metrics::render_svg("reward", &[("reward", &reward)]).as_bytes(),
        )?;
        let labels = ["stage 1", "stage 2", "stage 3", "stage 4"];
        let pairs: Vec<(&str, &CurveSeries)> = labels.iter().copied().zip(success.iter()).collect();
        out.write(
            &format!("{prefix}curves/success.svg"),
            metrics::render_svg("success rate", &pairs).as_bytes(),
        )?;
        let pairs: Vec<(&str, &CurveSeries)> = labels.iter().copied().zip(count_curves.iter()).collect();
        out.write(
            &format!("{prefix}curves/samples.svg"),
            metrics::render_svg("positive samples", &pairs).as_bytes(),
        )?;
    }
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, jobs: usize, svg: bool) -> Result<Vec<RunOutput>> {
    let runs = run_seeds(cfg, jobs)?;
    let mut out = ArtifactWriter::new(&cfg.output_dir)?;
    out.write("config.json", cfg.to_json().as_bytes())?;
    write_group(&mut out, "", cfg, &runs, svg)?;
    let path = out.finish("train", cfg)?;
    println!("{}", format_summary_table("train", &runs, cfg.final_window));
    println!("manifest: {}", path.display());
    Ok(runs)
}

fn format_summary_table(title: &str, runs: &[RunOutput], final_window: usize) -> String {
    let rows: Vec<SeedSummary> = runs.iter().map(|r| summarize(r, final_window)).collect();
    let mut s = String::new();
    writeln!(s, "{title}: final {final_window} episodes").unwrap();
    writeln!(s, "{:>6} {:>7} {:>7} {:>7} {:>7} {:>9}  samples", "seed", "s1", "s2", "s3", "s4", "reward").unwrap();
    for r in &rows {
        let [a, b, c, d] = r.final_success;
        writeln!(s, "{:>6} {a:>7.3} {b:>7.3} {c:>7.3} {d:>7.3} {:>9.2}  {:?}", r.seed, r.final_reward, r.stage_counts).unwrap();
    }
    let med = |f: &dyn Fn(&SeedSummary) -> f64| metrics::median(&rows.iter().map(f).collect::<Vec<_>>());
    writeln!(
        s,
        "{:>6} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>9.2}",
        "median",
        med(&|r| r.final_success[0]),
        med(&|r| r.final_success[1]),
        med(&|r| r.final_success[2]),
        med(&|r| r.final_success[3]),
        med(&|r| r.final_reward)
    )
    .unwrap();
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub seed: u64,
    pub mean_reward: f64,
    pub success: [f64; 4],
}

/// Rebuilds each seed's agent from a `train` directory and runs greedy
/// episodes on resets disjoint from training. Writes `eval/` under `out`.
pub fn cmd_eval(artifacts: &Path, out_dir: &Path) -> Result<Vec<EvalRow>> {
    let cfg = ExperimentConfig::load(&artifacts.join("config.json"))?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let dir = artifacts.join(format!("seed_{seed}"));
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let mut loop_cfg = cfg.episode_loop.clone();
        loop_cfg.seed = seed;
        let mut agent = Agent::new(&cfg.agent, &cfg.qlearn, &cfg.lowlevel, &cfg.env, &loop_cfg);
        let high = read("qtable.txt")?;
        agent.high = match agent.high {
            HighLevel::History(_) => HighLevel::History(QTable::from_text(&high, cfg.qlearn.n_history, cfg.qlearn.initial_q)?),
            HighLevel::Schema(_) => HighLevel::Schema(SchemaPolicy::from_text(&high, cfg.qlearn.epsilon)?),
        };
        if let LowLevel::Learned(_) = agent.low {
            agent.low = LowLevel::Learned(LowLevelPolicy::from_text(&read("lowlevel.txt")?)?);
        }
        let mut env = DrawerEnv::new(cfg.env.clone())?;
        let mut rng = seeded_rng(derive_seed(seed, u64::MAX - 1));
        let base = loop_cfg.max_episode_num;
        let recs: Vec<EpisodeRecord> = (0..cfg.eval_episodes)
            .map(|k| run_greedy_episode(&mut env, &mut agent, &loop_cfg, base + k, &mut rng))
            .collect();
        let n = recs.len().max(1) as f64;
        rows.push(EvalRow {
            seed,
            mean_reward: recs.iter().map(|r| r.total_reward).sum::<f64>() / n,
            success: [0, 1, 2, 3].map(|k| recs.iter().filter(|r| r.stage_success[k]).count() as f64 / n),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "mean_reward", "success1", "success2", "success3", "success4"])?;
    for r in &rows {
        let mut row = vec![r.seed.to_string(), format_f64(r.mean_reward)];
        row.extend(r.success.iter().map(|v| format_f64(*v)));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    let mut out = ArtifactWriter::new(&out_dir.join("eval"))?;
    out.write("eval.csv", &bytes)?;
    out.finish("eval", &cfg)?;
    println!("{:>6} {:>9} {:>7} {:>7} {:>7} {:>7}", "seed", "reward", "s1", "s2", "s3", "s4");
    for r in &rows {
        let [a, b, c, d] = r.success;
        println!("{:>6} {:>9.2} {a:>7.3} {b:>7.3} {c:>7.3} {d:>7.3}", r.seed, r.mean_reward);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationComparison {
    pub seeds: Vec<u64>,
    pub joint: Vec<[usize; 4]>,
    pub alternating: Vec<[usize; 4]>,
}

impl ExplorationComparison {
    /// Seeds where alternating collected more stage-4 samples than joint.
    pub fn alternating_wins(&self) -> usize {
        self.joint.iter().zip(&self.alternating).filter(|(j, a)| a[3] > j[3]).count()
    }

    pub fn median_count(counts: &[[usize; 4]], stage: usize) -> f64 {
        metrics::median(&counts.iter().map(|c| c[stage] as f64).collect::<Vec<_>>())
    }
}

pub fn with_mode(cfg: &ExperimentConfig, mode: ExplorationMode) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.episode_loop.mode = mode;
    c
}

pub fn with_undersampling(cfg: &ExperimentConfig, on: bool) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.agent.undersample = on;
    c
}

pub fn compare_exploration(joint: &[RunOutput], alternating: &[RunOutput]) -> ExplorationComparison {
    ExplorationComparison {
        seeds: joint.iter().map(|r| r.seed).collect(),
        joint: joint.iter().map(|r| r.agent.store.counts()).collect(),
        alternating: alternating.iter().map(|r| r.agent.store.counts()).collect(),
    }
}

pub fn cmd_compare_exploration(cfg: &ExperimentConfig, jobs: usize, svg: bool) -> Result<ExplorationComparison> {
    let joint_cfg = with_mode(cfg, ExplorationMode::Joint);
    let alt_cfg = with_mode(cfg, ExplorationMode::Alternating);
    let joint = run_seeds(&joint_cfg, jobs)?;
    let alt = run_seeds(&alt_cfg, jobs)?;
    let cmp = compare_exploration(&joint, &alt);

    let mut out = ArtifactWriter::new(&cfg.output_dir)?;
    out.write("config.json", cfg.to_json().as_bytes())?;
    write_group(&mut out, "joint/", &joint_cfg, &joint, svg)?;
    write_group(&mut out, "alternating/", &alt_cfg, &alt, svg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "mode", "count1", "count2", "count3", "count4"])?;
    for (i, seed) in cmp.seeds.iter().enumerate() {
        for (mode, c) in [("joint", cmp.joint[i]), ("alternating", cmp.alternating[i])] {
            let mut row = vec![seed.to_string(), mode.to_string()];
            row.extend(c.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    out.write("comparison.csv", &w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?)?;
    if svg {
        let recs = |runs: &[RunOutput]| -> Result<CurveSeries> {
            let counters: Vec<_> = runs
                .iter()
                .map(|r| metrics::sample_count_curves(&metrics::store_snapshots(&r.records)))
                .collect();
            metrics::sample_count_series(&counters, MetaTaskId::CloseDrawer)
        };
        let (j, a) = (recs(&joint)?, recs(&alt)?);
        out.write(
            "stage4_samples.svg",
            metrics::render_svg("stage 4 positive samples", &[("joint", &j), ("alternating", &a)]).as_bytes(),
        )?;
    }
    out.finish("compare-exploration", cfg)?;

    println!("cumulative positive samples per stage (median over {} seeds)", cmp.seeds.len());
    println!("{:>12} {:>9} {:>9} {:>9} {:>9}", "mode", "stage1", "stage2", "stage3", "stage4");
    for (name, counts) in [("joint", &cmp.joint), ("alternating", &cmp.alternating)] {
        let m: Vec<f64> = (0..4).map(|k| ExplorationComparison::median_count(counts, k)).collect();
        println!("{name:>12} {:>9.1} {:>9.1} {:>9.1} {:>9.1}", m[0], m[1], m[2], m[3]);
    }
    println!("alternating > joint at stage 4 in {}/{} seeds", cmp.alternating_wins(), cmp.seeds.len());
    Ok(cmp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub seeds: Vec<u64>,
    pub with: Vec<f64>,
    pub without: Vec<f64>,
}

impl AblationResult {
    pub fn median_with(&self) -> f64 {
        metrics::median(&self.with)
    }

    pub fn median_without(&self) -> f64 {
        metrics::median(&self.without)
    }

    /// Mean paired difference over the standard deviation of the paired
    /// differences; zero when all differences are equal.
    pub fn effect_size(&self) -> f64 {
        let d: Vec<f64> = self.with.iter().zip(&self.without).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        if d.len() < 2 {
            return 0.0;
        }
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd == 0.0 {
            0.0
        } else {
            mean / sd
        }
    }
}

pub fn ablation(with: &[RunOutput], without: &[RunOutput], final_window: usize) -> AblationResult {
    AblationResult {
        seeds: with.iter().map(|r| r.seed).collect(),
        with: with.iter().map(|r| summarize(r, final_window).final_reward).collect(),
        without: without.iter().map(|r| summarize(r, final_window).final_reward).collect(),
    }
}

pub fn cmd_ablate_undersampling(cfg: &ExperimentConfig, jobs: usize, svg: bool) -> Result<AblationResult> {
    let base = with_mode(cfg, ExplorationMode::Alternating);
    let on_cfg = with_undersampling(&base, true);
    let off_cfg = with_undersampling(&base, false);
    let on = run_seeds(&on_cfg, jobs)?;
    let off = run_seeds(&off_cfg, jobs)?;
    let res = ablation(&on, &off, cfg.final_window);

    let mut out = ArtifactWriter::new(&cfg.output_dir)?;
    out.write("config.json", cfg.to_json().as_bytes())?;
    write_group(&mut out, "undersampling/", &on_cfg, &on, svg)?;
    write_group(&mut out, "no_undersampling/", &off_cfg, &off, svg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "reward_undersampling", "reward_no_undersampling", "difference"])?;
    for i in 0..res.seeds.len() {
        w.write_record([
            res.seeds[i].to_string(),
            format_f64(res.with[i]),
            format_f64(res.without[i]),
            format_f64(res.with[i] - res.without[i]),
        ])?;
    }
    out.write("ablation.csv", &w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?)?;
    if svg {
        let curve = |runs: &[RunOutput]| {
            let recs: Vec<&[EpisodeRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
            metrics::reward_curve(&recs, cfg.smoothing_window)
        };
        let (a, b) = (curve(&on)?, curve(&off)?);
        out.write(
            "reward.svg",
            metrics::render_svg("reward", &[("under-sampling", &a), ("no under-sampling", &b)]).as_bytes(),
        )?;
    }
    out.finish("ablate-undersampling", cfg)?;

    println!("final-window mean reward over {} seeds", res.seeds.len());
    println!("{:>6} {:>14} {:>17}", "seed", "undersampling", "no undersampling");
    for i in 0..res.seeds.len() {
        println!("{:>6} {:>14.2} {:>17.2}", res.seeds[i], res.with[i], res.without[i]);
    }
    println!("{:>6} {:>14.2} {:>17.2}", "median", res.median_with(), res.median_without());
    println!(
        "median difference {:.2}, paired effect size {:.3}",
        res.median_with() - res.median_without(),
        res.effect_size()
    );
    Ok(res)
}

pub fn cmd_plot(inputs: &[PathBuf], out_dir: &Path, name: Option<&str>, title: Option<&str>) -> Result<()> {
    let mut curves = Vec::new();
    for p in inputs {
        let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        curves.push((label, CurveSeries::read_csv(f)?));
    }
    let stem = name.map(str::to_string).unwrap_or_else(|| curves[0].0.clone());
    let pairs: Vec<(&str, &CurveSeries)> = curves.iter().map(|(l, c)| (l.as_str(), c)).collect();
    let svg = metrics::render_svg(title.unwrap_or(&stem), &pairs);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(format!("{stem}.svg"));
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    println!("{}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("0,1,5").unwrap().0, vec![0, 1, 5]);
        assert_eq!(parse_seed_list("2-4, 9").unwrap().0, vec![2, 3, 4, 9]);
        assert!(parse_seed_list("").is_err());
        assert!(parse_seed_list("4-2").is_err());
        assert!(parse_seed_list("x").is_err());
    }

    #[test]
    fn effect_size_of_constant_shift_is_zero_spread() {
        let r = AblationResult {
            seeds: vec![0, 1, 2],
            with: vec![3.0, 5.0, 7.0],
            without: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(r.median_with(), 5.0);
        assert_eq!(r.median_without(), 2.0);
        // differences 2, 3, 4: mean 3, sample sd 1
        assert!((r.effect_size() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cli_parses_flags() {
        let cli = Cli::try_parse_from([
            "skillseq", "--seeds", "0-2", "--jobs", "2", "--pseudocode-literal", "--episodes", "5", "train", "--svg",
        ])
        .unwrap();
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.episode_loop.max_episode_num, 5);
        assert!(cfg.episode_loop.pseudocode_literal);
        assert!(matches!(cli.command, Command::Train(SvgFlag { svg: true })));
        assert!(Cli::try_parse_from(["skillseq", "--jobs", "0", "train"])
            .map(|c| resolve_config(&c).is_err())
            .unwrap());
    }
}
