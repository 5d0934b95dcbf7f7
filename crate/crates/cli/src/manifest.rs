//! Run manifest: the resolved configuration, every derived stage seed, and
//! wall-clock timings, as flat `key = value` text.
//!
//! The seeds written here are re-derived with the same formulas the pipeline
//! uses (balance and split seeds by config-file position, training seeds by
//! round and sorted organisation position), so a reader can audit exactly
//! which random stream fed each stage. Timing keys all end in `_time_s`;
//! everything else is reproducible for a fixed config and seed.

use fednids_core::federation::ServerOptimizer;
use fednids_core::seed::{derive_seed, stage};

use crate::config::{ExperimentConfig, Scenario};
use crate::report::fmt_sig;

pub fn render_manifest(config: &ExperimentConfig, timings: &[(&str, f64)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("scenario = {}\n", config.scenario));
    out.push_str(&format!("seed = {}\n", config.seed));
    out.push_str(&format!("train_fraction = {}\n", config.train_fraction));
    match config.subsample_cap {
        Some(cap) => out.push_str(&format!("subsample_cap = {cap}\n")),
        None => out.push_str("subsample_cap = none\n"),
    }
    out.push_str(&format!("local.epochs = {}\n", config.local.epochs));
    out.push_str(&format!("local.batch_size = {}\n", config.local.batch_size));
    out.push_str(&format!(
        "local.learning_rate = {}\n",
        config.local.learning_rate
    ));
    out.push_str(&format!(
        "local.dropout_rate = {}\n",
        config.local.dropout_rate
    ));
    out.push_str(&format!("local.beta1 = {}\n", config.local.beta1));
    out.push_str(&format!("local.beta2 = {}\n", config.local.beta2));
    out.push_str(&format!("local.epsilon = {}\n", config.local.epsilon));
    out.push_str(&format!("federated.rounds = {}\n", config.rounds));
    match config.server {
        ServerOptimizer::Adam(hyper) => {
            out.push_str("federated.server = adam\n");
            out.push_str(&format!(
                "federated.server_learning_rate = {}\n",
                hyper.learning_rate
            ));
        }
        ServerOptimizer::Assignment => out.push_str("federated.server = assignment\n"),
    }

    for (index, org) in config.orgs.iter().enumerate() {
        out.push_str(&format!("org.{index}.id = {}\n", org.id));
        out.push_str(&format!("org.{index}.path = {}\n", org.path.display()));
    }
    for (index, org) in config.orgs.iter().enumerate() {
        out.push_str(&format!(
            "seed.org.{}.balance = {}\n",
            org.id,
            derive_seed(config.seed, &[stage::BALANCE, index as u64])
        ));
        out.push_str(&format!(
            "seed.org.{}.split = {}\n",
            org.id,
            derive_seed(config.seed, &[stage::SPLIT, index as u64])
        ));
    }

    let mut sorted_ids: Vec<&str> = config.orgs.iter().map(|o| o.id.as_str()).collect();
    sorted_ids.sort_unstable();
    let scenarios = config.scenario.expand();
    if scenarios.contains(&Scenario::Federated) {
        for round in 1..=config.rounds {
            for (position, id) in sorted_ids.iter().enumerate() {
                out.push_str(&format!(
                    "seed.round.{round}.{id} = {}\n",
                    derive_seed(
                        config.seed,
                        &[stage::LOCAL_TRAIN, round as u64, position as u64]
                    )
                ));
            }
        }
    }
    if scenarios.contains(&Scenario::Centralised) {
        out.push_str(&format!(
            "seed.centralised = {}\n",
            derive_seed(config.seed, &[stage::LOCAL_TRAIN, 1, 0])
        ));
    }
    if scenarios.contains(&Scenario::Localised) {
        for (position, id) in sorted_ids.iter().enumerate() {
            out.push_str(&format!(
                "seed.localised.{id} = {}\n",
                derive_seed(config.seed, &[stage::LOCAL_TRAIN, 1, position as u64])
            ));
        }
    }

    for (name, seconds) in timings {
        out.push_str(&format!("time.{name}_time_s = {}\n", fmt_sig(*seconds)));
    }
    out
}
