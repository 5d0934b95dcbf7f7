//! End-to-end experiment pipeline: ingest each organisation's flows, run the
//! requested scenarios, and write every artifact to the output directory.
//!
//! Per organisation (in config order): load the CSV, drop identifier
//! columns, balance the classes, apply the optional row cap, split
//! train/test, then fit a min–max scaler on the training split only and
//! scale both splits with it. All seeds derive from the master seed, so a
//! rerun with the same config reproduces every artifact byte for byte apart
//! from wall-clock fields.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use fednids_core::dataio::{drop_identifiers, load_flow_table, FlowSchema};
use fednids_core::federation::{
    run_centralised, run_federated, run_localised, FederatedConfig, Organisation,
};
use fednids_core::metrics::{measure_time, EvaluationReport};
use fednids_core::preprocess::{
    apply_scaler, balance_classes, fit_scaler, split_train_test, subsample_balanced,
};
use fednids_core::seed::{derive_seed, stage};

use crate::checkpoint;
use crate::config::{ConfigError, ExperimentConfig, Scenario};
use crate::manifest::render_manifest;
use crate::report::{emit_final_report, emit_round_table};

/// Artifacts written by [`run_experiment`].
#[derive(Debug)]
pub struct RunOutputs {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Loads and prepares every organisation listed in the config.
pub fn prepare_organisations(
    config: &ExperimentConfig,
) -> fednids_core::Result<Vec<Organisation>> {
    let schema = FlowSchema::netflow_v9();
    let mut orgs = Vec::with_capacity(config.orgs.len());
    for (index, org) in config.orgs.iter().enumerate() {
        let table = load_flow_table(&org.path, &schema)?;
        let table = drop_identifiers(table)?;
        let balanced = balance_classes(
            &table,
            derive_seed(config.seed, &[stage::BALANCE, index as u64]),
        )?;
        let capped = match config.subsample_cap {
            Some(cap) => subsample_balanced(&balanced, cap)?,
            None => balanced,
        };
        let (train_table, test_table) = split_train_test(
            &capped,
            config.train_fraction,
            derive_seed(config.seed, &[stage::SPLIT, index as u64]),
        )?;
        let scaler = fit_scaler(&train_table)?;
        orgs.push(Organisation {
            id: org.id.clone(),
            train: apply_scaler(&scaler, &train_table)?,
            test: apply_scaler(&scaler, &test_table)?,
        });
    }
    Ok(orgs)
}

pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<RunOutputs> {
    config.validate()?;
    let out_dir = config.out_dir.clone().ok_or_else(|| {
        ConfigError(
            "no output directory: set `out` in the config, pass --out, or set FEDNIDS_OUT".into(),
        )
    })?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let total_start = Instant::now();

    let (orgs, prepare_s) = measure_time(|| prepare_organisations(config));
    let orgs = orgs?;

    let mut timings: Vec<(&str, f64)> = vec![("prepare", prepare_s)];
    let mut sections: Vec<(String, EvaluationReport)> = Vec::new();
    let mut files = Vec::new();

    for scenario in config.scenario.expand() {
        match scenario {
            Scenario::Federated => {
                let fed = FederatedConfig {
                    rounds: config.rounds,
                    server: config.server,
                    local: config.local.clone(),
                    seed: config.seed,
                };
                let (run, seconds) = measure_time(|| run_federated(&orgs, &fed));
                let run = run?;
                timings.push(("federated", seconds));
                files.push(write_atomic(
                    &out_dir,
                    "federated_rounds.csv",
                    emit_round_table(&run.rounds).as_bytes(),
                )?);
                files.push(write_atomic(
                    &out_dir,
                    "federated_model.ckpt",
                    &checkpoint::encode(&run.final_model),
                )?);
                let last = run.rounds.last().expect("rounds is non-empty");
                for (org_id, eval) in &last.evaluations {
                    sections.push((format!("federated.dnn.{org_id}"), eval.clone()));
                }
            }
            Scenario::Centralised => {
                let (run, seconds) =
                    measure_time(|| run_centralised(&orgs, &config.local, config.seed));
                let run = run?;
                timings.push(("centralised", seconds));
                files.push(write_atomic(
                    &out_dir,
                    "centralised_model.ckpt",
                    &checkpoint::encode(&run.model),
                )?);
                for (org_id, eval) in &run.evaluations {
                    sections.push((format!("centralised.dnn.{org_id}"), eval.clone()));
                }
            }
            Scenario::Localised => {
                let (runs, seconds) =
                    measure_time(|| run_localised(&orgs, &config.local, config.seed));
                let runs = runs?;
                timings.push(("localised", seconds));
                for run in &runs {
                    files.push(write_atomic(
                        &out_dir,
                        &format!("localised_{}_model.ckpt", run.org_id),
                        &checkpoint::encode(&run.model),
                    )?);
                    for (eval_org, eval) in &run.evaluations {
                        sections.push((
                            format!("localised.dnn.train_{}.eval_{eval_org}", run.org_id),
                            eval.clone(),
                        ));
                    }
                }
            }
            Scenario::All => unreachable!("expand() yields concrete scenarios"),
        }
    }

    let section_refs: Vec<(String, &EvaluationReport)> = sections
        .iter()
        .map(|(prefix, eval)| (prefix.clone(), eval))
        .collect();
    files.push(write_atomic(
        &out_dir,
        "final_report.txt",
        emit_final_report(&section_refs).as_bytes(),
    )?);
    timings.push(("total", total_start.elapsed().as_secs_f64()));
    files.insert(
        0,
        write_atomic(
            &out_dir,
            "manifest.txt",
            render_manifest(config, &timings).as_bytes(),
        )?,
    );
    Ok(RunOutputs { out_dir, files })
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written artifact behind.
fn write_atomic(dir: &std::path::Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let temp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&temp, bytes)
        .with_context(|| format!("cannot write {}", temp.display()))?;
    std::fs::rename(&temp, &path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(path)
}
