use std::path::Path;

use igcf::data::write_id_map;
use igcf::eval::{model_from_snapshot, prepare_protocol, run_experiment, write_log_csv, MetricPoint, LOG_CSV_HEADER};
use igcf::pretrain::{pretrain, PretrainedModel, Snapshot};
use igcf::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::OutputDir;

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs `body` against a fresh output directory and always leaves a
/// manifest behind, flagged `partial` on failure.
fn with_outputs(command: &str, config: &RunConfig, body: impl FnOnce(&mut OutputDir) -> Result<()>) -> Result<()> {
    let mut out = OutputDir::create(&config.out)?;
    let outcome = body(&mut out);
    out.finish(command, config, &outcome)?;
    outcome
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    seed: u64,
    num_users: usize,
    num_items: usize,
    dim: usize,
    config_hash: &'a str,
    dataset_fingerprint: &'a str,
    epochs: usize,
    converged: bool,
    final_loss: Option<f64>,
}

impl<'a> TrainingSummary<'a> {
    fn new(model: &'a PretrainedModel, seed: u64) -> Self {
        Self {
            seed,
            num_users: model.num_users,
            num_items: model.num_items,
            dim: model.dim(),
            config_hash: &model.provenance.config_hash,
            dataset_fingerprint: &model.provenance.dataset_fingerprint,
            epochs: model.report.epochs(),
            converged: model.report.converged,
            final_loss: model.report.epoch_losses.last().copied(),
        }
    }
}

fn write_id_map_to(out: &mut OutputDir, name: &str, ds: &igcf::data::InteractionDataset) -> Result<()> {
    let tmp = out.path(&format!(".{name}.tmp"));
    write_id_map(ds, &tmp)?;
    let bytes = std::fs::read(&tmp)?;
    std::fs::remove_file(&tmp)?;
    out.write(name, &bytes)
}

/// Pretrains on the protocol's training split and stores the snapshot.
pub fn pretrain_cmd(config: &RunConfig) -> Result<()> {
    with_outputs("pretrain", config, |out| {
        config.experiment.validate()?;
        let dataset = config.load_dataset()?;
        let prepared = prepare_protocol(&dataset, &config.experiment)?;
        let model = pretrain(
            &prepared.train,
            &config.experiment.propagation,
            &config.experiment.pretrain,
        )?;
        let mut snapshot = Vec::new();
        Snapshot::from(&model).write_to(&mut snapshot)?;
        out.write("snapshot.bin", &snapshot)?;
        let mut embeddings = Vec::new();
        Snapshot::from(&model).write_csv(&mut embeddings)?;
        out.write("embeddings.csv", &embeddings)?;
        let items = csv_bytes(|w| {
            let mut header = vec!["item".to_string()];
            header.extend((0..model.dim()).map(|k| format!("e_{k}")));
            w.write_record(&header)?;
            for i in 0..model.num_items {
                let mut row = vec![i.to_string()];
                row.extend(model.item_vector(i).iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            Ok(())
        })?;
        out.write("item_vectors.csv", &items)?;
        let losses = csv_bytes(|w| {
            w.write_record(["epoch", "loss"])?;
            for (e, l) in model.report.epoch_losses.iter().enumerate() {
                w.write_record([(e + 1).to_string(), l.to_string()])?;
            }
            Ok(())
        })?;
        out.write("losses.csv", &losses)?;
        write_id_map_to(out, "dataset_id_map.csv", &dataset)?;
        write_id_map_to(out, "id_map.csv", &prepared.train)?;
        out.write_json("pretrain_summary.json", &TrainingSummary::new(&model, config.seed))
    })
}

#[derive(Serialize)]
struct PolicyMetrics<'a> {
    policy: &'a str,
    metrics: &'a [MetricPoint],
}

#[derive(Serialize)]
struct EvaluationSummary<'a> {
    seed: u64,
    horizon: usize,
    slate_size: usize,
    test_users: usize,
    pretrain: TrainingSummary<'a>,
    policies: Vec<PolicyMetrics<'a>>,
}

/// Replays every configured policy; needs either a snapshot or permission
/// to pretrain.
pub fn evaluate_cmd(config: &RunConfig, snapshot: Option<&Path>, allow_pretrain: bool) -> Result<()> {
    if snapshot.is_none() && !allow_pretrain {
        return Err(Error::Config(
            "evaluate needs --snapshot <path> or --pretrain to train a model first".into(),
        ));
    }
    if let Some(p) = snapshot {
        if !p.exists() {
            return Err(Error::Config(format!("snapshot {} does not exist", p.display())));
        }
    }
    with_outputs("evaluate", config, |out| {
        config.experiment.validate()?;
        let dataset = config.load_dataset()?;
        let model = match snapshot {
            Some(p) => {
                let prepared = prepare_protocol(&dataset, &config.experiment)?;
                Some(model_from_snapshot(Snapshot::load(p)?, &prepared.train)?)
            }
            None => None,
        };
        let outcome = run_experiment(&dataset, &config.experiment, model)?;
        let interactions = csv_bytes(|w| {
            w.write_record(LOG_CSV_HEADER)?;
            for r in &outcome.results {
                write_log_csv(w, "evaluate", &r.name, &r.log)?;
            }
            Ok(())
        })?;
        out.write("interactions.csv", &interactions)?;
        let metrics = csv_bytes(|w| {
            w.write_record(["policy", "horizon", "precision", "recall", "ndcg"])?;
            for r in &outcome.results {
                for m in &r.metrics {
                    w.write_record([
                        r.name.clone(),
                        m.horizon.to_string(),
                        m.precision.to_string(),
                        m.recall.to_string(),
                        m.ndcg.to_string(),
                    ])?;
                }
            }
            Ok(())
        })?;
        out.write("metrics.csv", &metrics)?;
        write_id_map_to(out, "dataset_id_map.csv", &dataset)?;
        write_id_map_to(out, "test_id_map.csv", &outcome.prepared.test)?;
        let summary = EvaluationSummary {
            seed: config.seed,
            horizon: config.experiment.horizon,
            slate_size: config.experiment.slate_size,
            test_users: outcome.prepared.env.num_users(),
            pretrain: TrainingSummary::new(&outcome.model, config.seed),
            policies: outcome
                .results
                .iter()
                .map(|r| PolicyMetrics {
                    policy: &r.name,
                    metrics: &r.metrics,
                })
                .collect(),
        };
        for p in &summary.policies {
            if let Some(m) = p.metrics.last() {
                println!(
                    "{:<16} precision@{} = {:.4}  recall = {:.4}  ndcg = {:.4}",
                    p.policy, m.horizon, m.precision, m.recall, m.ndcg
                );
            }
        }
        out.write_json("metrics.json", &summary)
    })
}

/// Synthetic regret curves plus the analytic overlay.
pub fn regret_cmd(config: &RunConfig) -> Result<()> {
    with_outputs("regret", config, |out| {
        let (_env, curves, summary) = config.regret.run()?;
        for c in &curves {
            let bytes = csv_bytes(|w| c.write_csv(w))?;
            out.write(&format!("curves/{}.csv", c.policy), &bytes)?;
        }
        for p in &summary.policies {
            if let Some(last) = p.checkpoints.last() {
                println!(
                    "{:<16} cumulative regret @{} = {:.3}  (per round {:.5})",
                    p.policy, last.horizon, last.mean_cumulative, last.per_round
                );
            }
        }
        out.write_json("regret_summary.json", &summary)
    })
}

#[derive(Serialize)]
struct SnapshotReport {
    num_users: usize,
    num_items: usize,
    dim: usize,
    spec: igcf::graph::PropagationSpec,
    mean_abs_mu: f64,
    max_abs_mu: f64,
    min_scale: f64,
    max_scale: f64,
}

/// Prints a JSON description of a snapshot; optionally exports its CSV.
pub fn inspect_cmd(path: &Path, csv_out: Option<&Path>) -> Result<()> {
    let snap = Snapshot::load(path)?;
    let mu = snap.params.mu.as_slice();
    let scales = snap.params.scales();
    let s = scales.as_slice();
    let report = SnapshotReport {
        num_users: snap.num_users,
        num_items: snap.num_items,
        dim: snap.params.dim(),
        spec: snap.spec.clone(),
        mean_abs_mu: if mu.is_empty() {
            0.0
        } else {
            mu.iter().map(|v| v.abs()).sum::<f64>() / mu.len() as f64
        },
        max_abs_mu: mu.iter().fold(0.0, |m, v| m.max(v.abs())),
        min_scale: s.iter().copied().fold(f64::INFINITY, f64::min),
        max_scale: s.iter().copied().fold(0.0, f64::max),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Error::Data(e.to_string()))?
    );
    if let Some(p) = csv_out {
        snap.write_csv(std::fs::File::create(p)?)?;
    }
    Ok(())
}
