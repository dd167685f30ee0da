use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdloc_core::synth::{self, SyntheticSpec};

use crate::config::{DatasetSource, MinArea, RunConfig};
use crate::dataset::export_dataset;
use crate::error::{self, Error, Result};
use crate::run::{self, HessianLoss, Role, Workspace};
use crate::sweep::{self, Axis};

#[derive(Debug, Parser)]
#[command(name = "kdloc", version, about = "Weakly supervised localization through knowledge distillation")]
pub struct Cli {
    /// Root seed (the dataset seed for gen-data, the run seed otherwise).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Dataset directory written by gen-data (default: generate from the config).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Keep data order and augmentation independent of --seed.
    #[arg(long)]
    pub fixed_shuffle: bool,
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args, Default)]
pub struct KdArgs {
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Temperature,
    Alpha,
    Seed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Ce,
    Kd,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark and export it as PGM + JSON.
    GenData {
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
        #[arg(long)]
        p_train: Option<f64>,
        #[arg(long)]
        p_test: Option<f64>,
    },
    /// Train the teacher with cross-entropy.
    TrainTeacher {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train the student against a teacher checkpoint.
    TrainStudent {
        #[arg(long)]
        teacher: PathBuf,
        #[command(flatten)]
        kd: KdArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Grad-CAM boxes and mIOU on the annotated test positives.
    Localize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// Fixed minimum box area (default: smallest train ground-truth box).
        #[arg(long)]
        min_area: Option<f64>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Classification metrics on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train and localize once per value along one axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Runs to execute concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        kd: KdArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Top eigenvalues, trace and spectral density of the loss Hessian.
    HessianReport {
        /// Repeat to compare several checkpoints.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "ce")]
        loss: LossArg,
        /// Teacher checkpoint for --loss kd.
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Maximum Hutchinson probes.
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        max_samples: Option<usize>,
        #[command(flatten)]
        kd: KdArgs,
        #[command(flatten)]
        data: DataArgs,
    },
}

impl DataArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(d) = &self.dataset {
            c.dataset = DatasetSource::Path(d.clone());
        }
    }
}

impl TrainArgs {
    fn apply(&self, c: &mut RunConfig) {
        let t = &mut c.training;
        if let Some(v) = self.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.patience {
            t.patience = v;
        }
        t.fixed_shuffle |= self.fixed_shuffle;
        t.augment &= !self.no_augment;
    }
}

impl KdArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(t) = self.temperature {
            c.kd.temperature = t;
        }
        if let Some(a) = self.alpha {
            c.kd.alpha = a;
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        c.output_dir = Some(out.clone());
    }
    Ok(c)
}

fn open(mut config: RunConfig, seed: Option<u64>) -> Result<Workspace> {
    if let Some(s) = seed {
        config.seed = s;
    }
    Workspace::open(config)
}

/// Runs one parsed command line; progress goes to stdout, warnings to stderr.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(&cli)?;
    let out = config.output_dir();
    match &cli.command {
        Command::GenData { train, test, p_train, p_test } => {
            let mut spec = match &config.dataset {
                DatasetSource::Synthetic(s) => *s,
                DatasetSource::Path(_) => SyntheticSpec::default(),
            };
            spec.train_samples = train.unwrap_or(spec.train_samples);
            spec.test_samples = test.unwrap_or(spec.test_samples);
            spec.p_train = p_train.unwrap_or(spec.p_train);
            spec.p_test = p_test.unwrap_or(spec.p_test);
            spec.seed = cli.seed.unwrap_or(spec.seed);
            let data = synth::generate_dataset(&spec)?;
            let manifest = export_dataset(&data, Some(&spec), &out)?;
            println!("wrote {} images to {}", manifest.samples.len(), out.display());
        }
        Command::TrainTeacher { data, train } => {
            data.apply(&mut config);
            train.apply(&mut config);
            let ws = open(config, cli.seed)?;
            let (_, rec) = run::train_and_save(&ws, Role::Teacher, None, &out, "teacher")?;
            report_training(&out, "teacher", &rec);
        }
        Command::TrainStudent { teacher, kd, data, train } => {
            data.apply(&mut config);
            train.apply(&mut config);
            kd.apply(&mut config);
            let ws = open(config, cli.seed)?;
            let teacher_net = run::load_network(teacher)?;
            let label = teacher.to_string_lossy();
            let (_, rec) =
                run::train_and_save(&ws, Role::Student { teacher: &teacher_net }, Some(&label), &out, "student")?;
            report_training(&out, "student", &rec);
        }
        Command::Localize { checkpoint, tau, min_area, data } => {
            data.apply(&mut config);
            if let Some(t) = tau {
                config.localization.tau = *t;
            }
            if let Some(a) = min_area {
                config.localization.min_area = MinArea::Fixed(*a);
            }
            let ws = open(config, cli.seed)?;
            let net = run::load_network(checkpoint)?;
            let (results, summary) = run::localize(&net, &ws, &ws.config.localization)?;
            run::write_localization(&out, &results, &summary)?;
            println!("miou {} over {} images (min_area {})", summary.miou, summary.images, summary.min_area);
        }
        Command::Evaluate { checkpoint, threshold, data } => {
            data.apply(&mut config);
            if let Some(t) = threshold {
                config.decision_threshold = *t;
            }
            let ws = open(config, cli.seed)?;
            let net = run::load_network(checkpoint)?;
            let report = run::evaluate(&net, &ws, ws.config.decision_threshold)?;
            if report.auc.is_none() {
                eprintln!("warning: test split holds a single class; AUC is undefined and written as null");
            }
            error::write_json(&out.join("metrics.json"), &report)?;
            println!(
                "accuracy {} sensitivity {} specificity {} auc {}",
                report.accuracy,
                report.sensitivity,
                report.specificity,
                report.auc.map_or("null".into(), |a| a.to_string())
            );
        }
        Command::Sweep { axis, values, jobs, kd, data, train } => {
            data.apply(&mut config);
            train.apply(&mut config);
            kd.apply(&mut config);
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            config.validate()?;
            let axis = match axis {
                AxisArg::Temperature => Axis::Temperature,
                AxisArg::Alpha => Axis::Alpha,
                AxisArg::Seed => Axis::Seed,
            };
            let parsed = values.iter().map(|v| axis.parse_value(v)).collect::<Result<Vec<_>>>()?;
            let dataset = run::load_dataset(&config.dataset)?;
            let outcome = sweep::run_sweep(&config, &dataset, axis, &parsed, &out, *jobs)?;
            print!("{}", outcome.summary());
            for r in outcome.rows.iter().filter(|r| !r.completed()) {
                eprintln!("run {}={} failed: {}", axis.name(), r.value, r.error.as_deref().unwrap_or(""));
            }
            if outcome.completed() == 0 {
                return Err(Error::Failed("every sweep run failed".into()));
            }
        }
        Command::HessianReport { checkpoint, loss, teacher, top_k, probes, max_samples, kd, data } => {
            data.apply(&mut config);
            kd.apply(&mut config);
            if let Some(k) = top_k {
                config.hessian.spectrum.top_k = *k;
            }
            if let Some(p) = probes {
                config.hessian.spectrum.trace_max_probes = *p;
            }
            if let Some(m) = max_samples {
                config.hessian.max_samples = *m;
            }
            let teacher_net = match (loss, teacher) {
                (LossArg::Kd, None) => return Err(Error::invalid("--loss kd needs --teacher")),
                (LossArg::Kd, Some(p)) => Some(run::load_network(p)?),
                (LossArg::Ce, _) => None,
            };
            let ws = open(config, cli.seed)?;
            hessian_reports(&ws, checkpoint, teacher_net.as_ref(), &out)?;
        }
    }
    Ok(())
}

fn report_training(out: &Path, name: &str, rec: &crate::record::RunRecord) {
    println!(
        "{name}: stopped at epoch {} ({}), final loss {}, test accuracy {}; wrote {}",
        rec.stop_epoch,
        kdloc_core::train::reason_name(rec.stop_reason),
        rec.epoch_losses.last().copied().unwrap_or(f64::NAN),
        rec.metrics.accuracy,
        out.join(&rec.checkpoint).display()
    );
}

fn hessian_reports(
    ws: &Workspace,
    checkpoints: &[PathBuf],
    teacher: Option<&kdloc_core::net::NetworkState>,
    out: &Path,
) -> Result<()> {
    let names: Vec<String> = checkpoints
        .iter()
        .map(|p| p.file_stem().map_or_else(|| "checkpoint".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != names.len() {
        return Err(Error::invalid("checkpoint file names must be distinct"));
    }
    let loss = match teacher {
        Some(t) => HessianLoss::Distillation { teacher: t },
        None => HessianLoss::CrossEntropy,
    };
    let mut table = String::from("checkpoint,params,trace,top_eigenvalue,dense_trace\n");
    for (path, name) in checkpoints.iter().zip(&names) {
        let net = run::load_network(path)?;
        let report = run::hessian_report(&net, ws, loss)?;
        let dir = if checkpoints.len() == 1 { out.to_path_buf() } else { out.join(name) };
        run::write_hessian(&dir, &report)?;
        let s = &report.spectrum;
        table.push_str(&format!(
            "{name},{},{},{},{}\n",
            s.meta.params,
            s.trace,
            s.top_eigenvalues.first().copied().unwrap_or(f64::NAN),
            report.dense.as_ref().map_or(String::new(), |d| d.dense_trace.to_string()),
        ));
        println!("{name}: trace {} top eigenvalues {:?}", s.trace, s.top_eigenvalues);
    }
    if checkpoints.len() > 1 {
        error::write(&out.join("trace_comparison.csv"), table.as_bytes())?;
    }
    Ok(())
}
