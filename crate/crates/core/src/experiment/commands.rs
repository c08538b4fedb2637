use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, SweepAxis};
use crate::data::{gen_synthetic, load_csv, DatasetSplit};
use crate::metrics::{slice_report, MetricsReport, SliceMetrics};
use crate::trainer::{predict, train, Checkpoint, EpochRecord, Method, Phase, TrainConfig};
use crate::{Error, Result};

/// Summary written next to generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_samples: usize,
    pub aligned_fraction: f64,
    pub n_aligned: usize,
    pub n_host_rows: usize,
    pub n_guest_rows: usize,
    pub host_slots: usize,
    pub guest_slots: usize,
    pub vocab_size: usize,
    pub config_digest: String,
}

/// Write `bytes` to a temporary sibling and rename it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let syn = &cfg.data.synthetic;
    let data = gen_synthetic(syn)?;
    fs::create_dir_all(out)?;
    data.host.write_csv(&out.join("host.csv"))?;
    data.guest.write_csv(&out.join("guest.csv"))?;
    let manifest = Manifest {
        seed: syn.seed,
        n_samples: syn.n_samples,
        aligned_fraction: syn.aligned_fraction,
        n_aligned: data.guest.rows.len(),
        n_host_rows: data.host.rows.len(),
        n_guest_rows: data.guest.rows.len(),
        host_slots: syn.host_slots,
        guest_slots: syn.guest_slots,
        vocab_size: syn.vocab_size,
        config_digest: cfg.digest(),
    };
    write_atomic(&out.join("manifest.json"), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(manifest)
}

/// Materialize the train / validation / test split the config describes.
pub fn load_split(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    let (host_schema, guest_schema) = cfg.schemas()?;
    let (host, guest) = match cfg.data.source {
        DataSource::Synthetic => {
            let d = gen_synthetic(&cfg.data.synthetic)?;
            (d.host_samples()?, d.guest_samples()?)
        }
        DataSource::Csv => (
            load_csv(&cfg.data.host.path, &host_schema)?,
            load_csv(&cfg.data.guest.path, &guest_schema)?,
        ),
    };
    DatasetSplit::build(&host_schema, &guest_schema, host, &guest, &cfg.split_rule())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

/// Tab-separated per-epoch log with a commented header naming the run.
pub fn format_train_log(cfg: &ExperimentConfig, tc: &TrainConfig, records: &[EpochRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# method={} init_seed={} shuffle_seed={} config_digest={}",
        tc.method,
        tc.init_seed,
        tc.shuffle_seed,
        cfg.digest()
    );
    s.push_str("phase\tepoch\tloss1\tloss2\tloss3\tval_auc\tforward_msgs\tbackward_msgs\tbytes\n");
    for r in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.phase,
            r.epoch,
            opt(r.loss1),
            opt(r.loss2),
            opt(r.loss3),
            opt(r.val_auc),
            r.forward_msgs,
            r.backward_msgs,
            r.bytes
        );
    }
    s
}

/// Paths written by [`cmd_train`].
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub checkpoints: Vec<PathBuf>,
    /// Checkpoint to score with.
    pub final_checkpoint: PathBuf,
    pub log: PathBuf,
    pub transcript: PathBuf,
}

fn checkpoint_name(c: &Checkpoint) -> &'static str {
    match c.phase {
        Phase::Step1 => "step1.ckpt",
        Phase::Step2 => "step2.ckpt",
        Phase::Single => "model.ckpt",
    }
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainArtifacts> {
    let split = load_split(cfg)?;
    let tc = cfg.train_config();
    let stages = train(&split, &tc)?;
    fs::create_dir_all(out)?;
    let mut checkpoints = Vec::new();
    let mut records = Vec::new();
    let mut transcript = String::new();
    for st in &stages {
        let path = out.join(checkpoint_name(&st.checkpoint));
        write_atomic(&path, &st.checkpoint.to_bytes()?)?;
        checkpoints.push(path);
        records.extend(st.epochs.iter().cloned());
        transcript.push_str(&st.transcript.to_text());
    }
    let log = out.join("train.log");
    write_atomic(&log, format_train_log(cfg, &tc, &records).as_bytes())?;
    let transcript_path = out.join("transcript.txt");
    write_atomic(&transcript_path, transcript.as_bytes())?;
    Ok(TrainArtifacts {
        final_checkpoint: checkpoints.last().cloned().unwrap_or_default(),
        checkpoints,
        log,
        transcript: transcript_path,
    })
}

/// The checkpoint must hold the architecture and schemas the config describes.
fn check_compatible(cfg: &ExperimentConfig, split: &DatasetSplit, ckpt: &Checkpoint) -> Result<()> {
    let want = cfg.train_config();
    let have = &ckpt.config;
    let mismatch = |what: &str, a: String, b: String| {
        Err(Error::Checkpoint(format!("{what} differs: config has {a}, checkpoint has {b}")))
    };
    if want.method != have.method {
        return mismatch("method", want.method.to_string(), have.method.to_string());
    }
    let arch = |c: &TrainConfig| {
        (
            c.embedding_dim,
            c.bottom_dims.clone(),
            c.guest_dims().to_vec(),
            c.top_dims.clone(),
            c.rep_dims.clone(),
        )
    };
    if arch(&want) != arch(have) {
        return mismatch("model dims", format!("{:?}", arch(&want)), format!("{:?}", arch(have)));
    }
    let host_schema = match &ckpt.model {
        crate::trainer::Model::Federated { host, .. } => host.schema(),
        crate::trainer::Model::Local(l) => &l.schema,
    };
    if host_schema.slots != split.host_schema.slots {
        return Err(Error::Checkpoint("host feature slots differ between data and checkpoint".into()));
    }
    if let crate::trainer::Model::Federated { guest, .. } = &ckpt.model {
        if guest.schema().slots != split.guest_schema.slots {
            return Err(Error::Checkpoint("guest feature slots differ between data and checkpoint".into()));
        }
    }
    Ok(())
}

/// Score a checkpoint on the test split.
pub fn evaluate(cfg: &ExperimentConfig, split: &DatasetSplit, ckpt: &Checkpoint) -> Result<(MetricsReport, crate::metrics::PredictionSet)> {
    check_compatible(cfg, split, ckpt)?;
    let (preds, _) = predict(ckpt, &split.test, ckpt.method)?;
    let report = slice_report(&preds)?.with_run(ckpt.method.as_str(), ckpt.config.init_seed, cfg.digest());
    Ok((report, preds))
}

pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<MetricsReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let split = load_split(cfg)?;
    let (report, preds) = evaluate(cfg, &split, &ckpt)?;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("metrics.json"), report.to_json()?.as_bytes())?;
    let tmp = out.join("predictions.csv.tmp");
    preds.write_csv(&tmp)?;
    fs::rename(tmp, out.join("predictions.csv"))?;
    Ok(report)
}

/// One line of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub axis_value: String,
    pub seed: u64,
    pub method: String,
    pub slice: String,
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
    pub n: usize,
    pub config_digest: String,
    /// Set when the cell failed; metric columns are then empty.
    pub error: Option<String>,
}

/// Parse an unaligned-sample count: `"25%"` of the available rows or an absolute count.
pub fn parse_count(value: &str, available: usize) -> Result<usize> {
    let bad = || Error::Config(format!("bad unaligned sample count `{value}`"));
    if let Some(p) = value.trim().strip_suffix('%') {
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        if !(0.0..=100.0).contains(&p) {
            return Err(bad());
        }
        Ok(((p / 100.0) * available as f64).round() as usize)
    } else {
        Ok(value.trim().parse::<usize>().map_err(|_| bad())?.min(available))
    }
}

fn parse_weight(value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| Error::Config(format!("bad weight `{value}`")))
}

/// Apply one axis value to a copy of the config; unaligned-sample counts are
/// applied later to the split itself.
fn apply_axis(cfg: &ExperimentConfig, axis: SweepAxis, value: &str) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::GuestSlots => {
            if c.data.source != DataSource::Synthetic {
                return Err(Error::Config("the guest_slots axis needs synthetic data".into()));
            }
            c.data.synthetic.guest_slots = value
                .trim()
                .parse()
                .ok()
                .filter(|&n: &usize| n >= 1)
                .ok_or_else(|| Error::Config(format!("bad slot count `{value}`")))?;
        }
        SweepAxis::Alpha => c.training.alpha = parse_weight(value)?,
        SweepAxis::Beta => c.training.beta = parse_weight(value)?,
        SweepAxis::UnalignedSamples => {
            parse_count(value, 0)?;
        }
    }
    c.validate()?;
    Ok(c)
}

fn slice_rows(base: &SweepRow, report: &MetricsReport) -> Vec<SweepRow> {
    let s = &report.slices;
    [("overall", &s.overall), ("aligned", &s.aligned), ("unaligned", &s.unaligned)]
        .into_iter()
        .map(|(name, m): (&str, &SliceMetrics)| SweepRow {
            slice: name.into(),
            auc: m.auc,
            logloss: m.logloss,
            n: m.n,
            ..base.clone()
        })
        .collect()
}

fn run_cell(cfg: &ExperimentConfig, split: &DatasetSplit, method: Method, seed: u64) -> Result<MetricsReport> {
    let mut c = cfg.clone().with_seed(seed);
    c.training.method = method;
    let stages = train(split, &c.train_config())?;
    let last = stages.last().ok_or_else(|| Error::Config("training produced no model".into()))?;
    Ok(evaluate(&c, split, &last.checkpoint)?.0)
}

/// Train and evaluate every (value, seed, method) cell. A failing cell is
/// recorded in the table and the sweep moves on.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    seeds: &[u64],
    methods: &[Method],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() || seeds.is_empty() || methods.is_empty() {
        return Err(Error::Config("sweep needs at least one value, seed and method".into()));
    }
    let mut rows = Vec::new();
    // data depends only on the axis value, so it is built once per value
    let mut cached: Option<(String, DatasetSplit)> = None;
    for value in values {
        let cell_cfg = apply_axis(cfg, axis, value);
        let split = cell_cfg.as_ref().map_err(|e| e.to_string()).and_then(|c| {
            let key = serde_json::to_string(&c.data).unwrap_or_default();
            let base = match cached.take() {
                Some((k, s)) if k == key => s,
                _ => load_split(c).map_err(|e| e.to_string())?,
            };
            cached = Some((key, base.clone()));
            let mut split = base;
            if axis == SweepAxis::UnalignedSamples {
                let n = parse_count(value, split.train.unaligned.len()).map_err(|e| e.to_string())?;
                split.train.unaligned = split.train.unaligned.subset(n, c.data.split_seed);
            }
            Ok(split)
        });
        for &seed in seeds {
            for &method in methods {
                let base = SweepRow {
                    axis: axis.as_str().into(),
                    axis_value: value.clone(),
                    seed,
                    method: method.as_str().into(),
                    slice: "overall".into(),
                    auc: None,
                    logloss: None,
                    n: 0,
                    config_digest: cell_cfg.as_ref().map(|c| c.clone().with_seed(seed).digest()).unwrap_or_default(),
                    error: None,
                };
                let outcome = match (&cell_cfg, &split) {
                    (Ok(c), Ok(s)) => run_cell(c, s, method, seed).map_err(|e| e.to_string()),
                    (Err(e), _) => Err(e.to_string()),
                    (_, Err(e)) => Err(e.clone()),
                };
                match outcome {
                    Ok(report) => {
                        log::info!(
                            "{} = {value}, seed {seed}, {method}: overall auc {:?}",
                            axis.as_str(),
                            report.slices.overall.auc
                        );
                        rows.extend(slice_rows(&base, &report));
                    }
                    Err(e) => {
                        log::warn!("{} = {value}, seed {seed}, {method} failed: {e}", axis.as_str());
                        rows.push(SweepRow {
                            error: Some(e),
                            ..base
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_table(rows: &[SweepRow], path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

/// Axis, values and methods fall back to the config's `[sweep]` section,
/// seeds to `[eval]`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    axis: Option<SweepAxis>,
    values: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let axis = axis
        .or(cfg.sweep.axis)
        .ok_or_else(|| Error::Config("no sweep axis given (use --axis or sweep.axis)".into()))?;
    let values = values.unwrap_or_else(|| cfg.sweep.values.clone());
    let seeds = seeds.unwrap_or_else(|| cfg.eval.seeds.clone());
    let rows = run_sweep(cfg, axis, &values, &seeds, &cfg.sweep.methods)?;
    fs::create_dir_all(out)?;
    write_sweep_table(&rows, &out.join(format!("sweep_{}.csv", axis.as_str())))?;
    Ok(rows)
}
