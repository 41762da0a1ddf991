use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use eusa::attack::run_eusa;
use eusa::corpus::{generate_corpus, load_corpus, save_corpus, VideoCorpus, VideoSequence};
use eusa::eval::{emit_report, evaluate, run_ablation, AblationReport, AblationRow};
use eusa::perturbation::Perturbation;
use eusa::tracker::{load_model, save_model, train_toy_tracker, TrackerModel};

use crate::config::{RunConfig, SplitChoice};
use crate::manifest::Run;
use crate::{AttackFlags, Cli, Command, Common};

pub const MODEL_FILE: &str = "model.eusm";
pub const PERTURBATION_FILE: &str = "perturbation.eusp";

/// Defaults, then the config file, then `common` flags; module seeds resolved last.
fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.paths.out = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_attack_flags(cfg: &mut RunConfig, f: &AttackFlags) {
    let a = &mut cfg.attack;
    if let Some(v) = f.epsilon {
        a.epsilon = v;
    }
    if let Some(v) = f.step {
        a.step = v;
    }
    if let Some(v) = f.k {
        a.candidates = v;
    }
    if let Some(v) = f.rate {
        a.sampling_rate = v;
    }
    if let Some(v) = f.strategy {
        a.strategy = v;
    }
    if let Some(v) = f.loss {
        a.loss.terms = v;
    }
    if let Some(v) = f.epochs_per_candidate {
        a.epochs_per_candidate = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = Some(p.clone());
    }
}

fn required<'a>(slot: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    slot.as_deref().ok_or_else(|| anyhow!("missing {what}: pass --{what} or set paths.{what}"))
}

fn load_inputs(cfg: &RunConfig, run: &mut Run) -> Result<(VideoCorpus, TrackerModel<f64>)> {
    let corpus_dir = required(&cfg.paths.corpus, "corpus")?;
    let model_path = required(&cfg.paths.model, "model")?;
    let corpus = load_corpus(corpus_dir).with_context(|| format!("loading corpus {}", corpus_dir.display()))?;
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    run.input(corpus_dir)?;
    run.input(model_path)?;
    Ok((corpus, model))
}

fn select(corpus: &VideoCorpus, split: SplitChoice) -> Vec<&VideoSequence> {
    match split {
        SplitChoice::Train => corpus.train(),
        SplitChoice::Holdout => corpus.holdout(),
        SplitChoice::All => corpus.videos.iter().collect(),
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Gen { common, videos } => {
            let mut cfg = base_config(&common)?;
            if let Some(n) = videos {
                cfg.corpus.n_videos = n;
            }
            let cfg = cfg.resolve();
            let out = required(&cfg.paths.out, "out")?;
            let corpus = generate_corpus(&cfg.corpus)?;
            save_corpus(&corpus, out)?;
            let mut run = Run::start(out, "gen")?;
            run.record("manifest.json");
            run.finish(&cfg)
        }
        Command::Train { common, corpus, epochs, split } => {
            let mut cfg = base_config(&common)?;
            set_path(&mut cfg.paths.corpus, &corpus);
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = split {
                cfg.training.split = s;
            }
            let cfg = cfg.resolve();
            let out = required(&cfg.paths.out, "out")?;
            let corpus_dir = required(&cfg.paths.corpus, "corpus")?;
            let corpus = load_corpus(corpus_dir).with_context(|| format!("loading corpus {}", corpus_dir.display()))?;
            let mut run = Run::start(out, "train")?;
            run.input(corpus_dir)?;
            let init = TrackerModel::<f64>::default_init(cfg.init_seed());
            let (model, report) = train_toy_tracker(&select(&corpus, cfg.training.split), init, &cfg.train)?;
            save_model(&model, &run.path(MODEL_FILE))?;
            run.record(MODEL_FILE);
            run.write("train_report.json", json_bytes(&report)?)?;
            run.finish(&cfg)
        }
        Command::Attack { common, corpus, model, attack } => {
            let mut cfg = base_config(&common)?;
            set_path(&mut cfg.paths.corpus, &corpus);
            set_path(&mut cfg.paths.model, &model);
            apply_attack_flags(&mut cfg, &attack);
            let cfg = cfg.resolve();
            cfg.attack.validate()?;
            let out = required(&cfg.paths.out, "out")?;
            let mut run = Run::start(out, "attack")?;
            let (corpus, model) = load_inputs(&cfg, &mut run)?;
            let (delta, report) = run_eusa(&model, &corpus.train(), &cfg.attack)?;
            run.write(PERTURBATION_FILE, delta.to_bytes())?;
            run.write("attack_report.json", report.to_json())?;
            run.finish(&cfg)
        }
        Command::Eval { common, corpus, model, perturbation, policy, split } => {
            let mut cfg = base_config(&common)?;
            set_path(&mut cfg.paths.corpus, &corpus);
            set_path(&mut cfg.paths.model, &model);
            set_path(&mut cfg.paths.perturbation, &perturbation);
            if let Some(p) = policy {
                cfg.eval.policy = p;
            }
            if let Some(s) = split {
                cfg.eval.split = s;
            }
            let cfg = cfg.resolve();
            let out = required(&cfg.paths.out, "out")?;
            let mut run = Run::start(out, "eval")?;
            let (corpus, model) = load_inputs(&cfg, &mut run)?;
            let delta = match &cfg.paths.perturbation {
                Some(p) => {
                    run.input(p)?;
                    Some(
                        Perturbation::<f64>::load(p)
                            .with_context(|| format!("loading perturbation {}", p.display()))?,
                    )
                }
                None => None,
            };
            let videos = select(&corpus, cfg.eval.split);
            let policies = cfg.eval.policy.policies();
            let clean = evaluate(&model, &videos, None, &policies)?;
            let attacked = delta.as_ref().map(|d| evaluate(&model, &videos, Some(d), &policies)).transpose()?;
            emit_report(&clean, attacked.as_ref(), &cfg.to_json(), cfg.seed, &run.dir)?;
            for name in ["report.json", "report.csv", "precision.svg", "success.svg"] {
                if run.path(name).exists() {
                    run.record(name);
                }
            }
            run.finish(&cfg)
        }
        Command::Ablate { common, corpus, model, seeds, attack } => {
            let mut cfg = base_config(&common)?;
            set_path(&mut cfg.paths.corpus, &corpus);
            set_path(&mut cfg.paths.model, &model);
            apply_attack_flags(&mut cfg, &attack);
            if let Some(n) = seeds {
                cfg.ablation.repeats = n;
            }
            let cfg = cfg.resolve();
            if cfg.ablation.repeats == 0 {
                bail!("--seeds must be at least 1");
            }
            let out = required(&cfg.paths.out, "out")?;
            let mut run = Run::start(out, "ablate")?;
            let (corpus, model) = load_inputs(&cfg, &mut run)?;
            let report = run_ablation(
                &model,
                &corpus.train(),
                &select(&corpus, cfg.eval.split),
                &cfg.attack,
                &cfg.ablation.rates,
                &cfg.ablation_seeds(),
            )?;
            run.write("ablation.json", json_bytes(&report)?)?;
            run.write("ablation.csv", ablation_csv(&report))?;
            run.finish(&cfg)
        }
    }
}

fn ablation_csv(report: &AblationReport) -> String {
    let mut out =
        String::from("grid,strategy,sampling_rate,loss,precision,success_auc,accuracy,robustness,eao,failures\n");
    let mut row = |grid: &str, r: &AblationRow| {
        let m = &r.mean;
        writeln!(
            out,
            "{grid},{},{},\"{}\",{:.4},{:.4},{:.4},{:.4},{:.6},{:.2}",
            r.strategy,
            r.sampling_rate,
            r.loss,
            m.precision,
            m.success_auc,
            m.accuracy,
            m.robustness,
            m.eao,
            m.failures
        )
        .unwrap();
    };
    for r in &report.sampling {
        row("sampling", r);
    }
    for r in &report.loss {
        row("loss", r);
    }
    out
}
