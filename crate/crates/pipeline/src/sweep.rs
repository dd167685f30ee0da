//! One-axis sweeps over temperature, alpha or seed.
//!
//! Every value gets a full teacher/student train and localize cycle under
//! `runs/<axis>-<value>/`. Temperature and alpha only change the student
//! objective, so those sweeps share one teacher trained under `teacher/`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use kdloc_core::math;
use kdloc_core::net::NetworkState;
use kdloc_core::synth::Dataset;

use crate::config::RunConfig;
use crate::error::{self, Error, Result};
use crate::run::{localize, train_and_save, write_localization, Role, Workspace};

pub const CSV_HEADER: &str = "axis_value,teacher_miou,student_miou";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Temperature,
    Alpha,
    Seed,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Temperature => "temperature",
            Axis::Alpha => "alpha",
            Axis::Seed => "seed",
        }
    }

    pub fn parse_value(self, s: &str) -> Result<AxisValue> {
        let bad = || Error::invalid(format!("invalid {} value {s:?}", self.name()));
        match self {
            Axis::Seed => u64::from_str(s.trim()).map(AxisValue::Seed).map_err(|_| bad()),
            Axis::Temperature | Axis::Alpha => {
                let v = f64::from_str(s.trim()).map_err(|_| bad())?;
                let ok = match self {
                    Axis::Temperature => v > 0.0 && v.is_finite(),
                    _ => (0.0..=1.0).contains(&v),
                };
                if ok {
                    Ok(AxisValue::Real(v))
                } else {
                    Err(bad())
                }
            }
        }
    }

    fn apply(self, config: &mut RunConfig, value: AxisValue) {
        match (self, value) {
            (Axis::Seed, AxisValue::Seed(s)) => config.seed = s,
            (Axis::Temperature, AxisValue::Real(t)) => config.kd.temperature = t,
            (Axis::Alpha, AxisValue::Real(a)) => config.kd.alpha = a,
            _ => unreachable!("values are parsed per axis"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Seed(u64),
    Real(f64),
}

impl AxisValue {
    fn key(self) -> f64 {
        match self {
            AxisValue::Seed(s) => s as f64,
            AxisValue::Real(v) => v,
        }
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Seed(s) => write!(f, "{s}"),
            AxisValue::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: AxisValue,
    pub teacher_miou: Option<f64>,
    pub student_miou: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".to_string(), |x| x.to_string())
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    (!values.is_empty()).then(|| math::mean_std(values))
}

impl SweepOutcome {
    pub fn csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.value, cell(r.teacher_miou), cell(r.student_miou)));
        }
        s
    }

    pub fn completed(&self) -> usize {
        self.rows.iter().filter(|r| r.completed()).count()
    }

    /// Population mean and standard deviation of completed runs.
    pub fn teacher_stats(&self) -> Option<(f64, f64)> {
        mean_std(&self.rows.iter().filter(|r| r.completed()).filter_map(|r| r.teacher_miou).collect::<Vec<_>>())
    }

    pub fn student_stats(&self) -> Option<(f64, f64)> {
        mean_std(&self.rows.iter().filter(|r| r.completed()).filter_map(|r| r.student_miou).collect::<Vec<_>>())
    }

    pub fn summary(&self) -> String {
        let fmt = |s: Option<(f64, f64)>| s.map_or("n/a".to_string(), |(m, sd)| format!("{m:.4}±{sd:.4}"));
        let (t, s) = (self.teacher_stats(), self.student_stats());
        let direction = match (t, s) {
            (Some((tm, _)), Some((sm, _))) if sm > tm => "student above teacher",
            (Some(_), Some(_)) => "student not above teacher",
            _ => "undetermined",
        };
        format!(
            "axis {}: {} of {} runs completed\nteacher_miou mean±std {}\nstudent_miou mean±std {}\ndirection: {direction}\n",
            self.axis.name(),
            self.completed(),
            self.rows.len(),
            fmt(t),
            fmt(s),
        )
    }
}

fn run_dir_name(axis: Axis, value: AxisValue) -> String {
    format!("{}-{value}", axis.name())
}

fn train_and_localize(
    ws: &Workspace,
    role: Role<'_>,
    teacher_checkpoint: Option<&str>,
    dir: &Path,
    name: &str,
) -> Result<(NetworkState, f64)> {
    let (net, _) = train_and_save(ws, role, teacher_checkpoint, dir, name)?;
    let (results, summary) = localize(&net, ws, &ws.config.localization)?;
    write_localization(&dir.join(format!("{name}_localization")), &results, &summary)?;
    Ok((net, summary.miou))
}

fn run_cell(
    config: &RunConfig,
    dataset: &Dataset,
    axis: Axis,
    value: AxisValue,
    shared_teacher: Option<&(NetworkState, f64)>,
    out: &Path,
) -> Result<(f64, f64)> {
    let mut cfg = config.clone();
    axis.apply(&mut cfg, value);
    let ws = Workspace::with_dataset(cfg, dataset.clone())?;
    let dir = out.join("runs").join(run_dir_name(axis, value));
    match shared_teacher {
        Some((teacher, teacher_miou)) => {
            let student = train_and_localize(
                &ws,
                Role::Student { teacher },
                Some("../../teacher/teacher.ckpt"),
                &dir,
                "student",
            )?;
            Ok((*teacher_miou, student.1))
        }
        None => {
            let (teacher, teacher_miou) = train_and_localize(&ws, Role::Teacher, None, &dir, "teacher")?;
            let (_, student_miou) =
                train_and_localize(&ws, Role::Student { teacher: &teacher }, Some("teacher.ckpt"), &dir, "student")?;
            Ok((teacher_miou, student_miou))
        }
    }
}

/// Runs the sweep, writing `sweep.csv`, `sweep_summary.txt` and per-run
/// outputs under `out`. Failed runs are recorded, not fatal. Up to `jobs`
/// runs execute concurrently; rows come out in ascending axis order.
pub fn run_sweep(
    config: &RunConfig,
    dataset: &Dataset,
    axis: Axis,
    values: &[AxisValue],
    out: &Path,
    jobs: usize,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let mut values = values.to_vec();
    values.sort_by(|a, b| a.key().total_cmp(&b.key()));
    if values.windows(2).any(|w| w[0].key() == w[1].key()) {
        return Err(Error::invalid("sweep values must be distinct"));
    }
    for v in &values {
        let mut c = config.clone();
        axis.apply(&mut c, *v);
        c.validate()?;
    }

    let shared = match axis {
        Axis::Seed => None,
        Axis::Temperature | Axis::Alpha => {
            let ws = Workspace::with_dataset(config.clone(), dataset.clone())?;
            Some(train_and_localize(&ws, Role::Teacher, None, &out.join("teacher"), "teacher"))
        }
    };
    let rows: Vec<SweepRow> = match shared {
        Some(Err(e)) => {
            let msg = format!("shared teacher failed: {e}");
            error::write(&out.join("teacher").join("error.txt"), format!("{msg}\n").as_bytes())?;
            values
                .iter()
                .map(|&value| SweepRow { value, teacher_miou: None, student_miou: None, error: Some(msg.clone()) })
                .collect()
        }
        shared => {
            let teacher = shared.as_ref().map(|r| r.as_ref().expect("error handled above"));
            let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; values.len()]);
            let next = AtomicUsize::new(0);
            let work = || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&value) = values.get(i) else { break };
                let row = match run_cell(config, dataset, axis, value, teacher, out) {
                    Ok((t, s)) => SweepRow { value, teacher_miou: Some(t), student_miou: Some(s), error: None },
                    Err(e) => {
                        let dir = out.join("runs").join(run_dir_name(axis, value));
                        let _ = error::write(&dir.join("error.txt"), format!("{e}\n").as_bytes());
                        SweepRow { value, teacher_miou: None, student_miou: None, error: Some(e.to_string()) }
                    }
                };
                slots.lock().expect("no panics while holding the lock")[i] = Some(row);
            };
            std::thread::scope(|scope| {
                for _ in 1..jobs.clamp(1, values.len()) {
                    scope.spawn(work);
                }
                work();
            });
            slots.into_inner().expect("workers finished").into_iter().map(|r| r.expect("every slot filled")).collect()
        }
    };

    let outcome = SweepOutcome { axis, rows };
    error::write(&out.join("sweep.csv"), outcome.csv().as_bytes())?;
    error::write(&out.join("sweep_summary.txt"), outcome.summary().as_bytes())?;
    Ok(outcome)
}
