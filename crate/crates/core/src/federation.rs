//! The three training scenarios over a set of participating organisations:
//! federated rounds with sample-weighted averaging and a server-side
//! optimizer, centralised training on pooled data, and per-organisation
//! localised training with cross-organisation evaluation.
//!
//! Every run is a pure function of its inputs and seed: organisations are
//! processed in ascending id order, per-round per-organisation training
//! seeds are derived from the run seed, and only wall-clock time fields
//! vary between repeats.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::FlowTable;
use crate::error::{Error, Result};
use crate::metrics::{
    auc, binary_metrics, confusion, measure_time, per_category_dr, EvaluationReport,
};
use crate::model::{
    adam_step, forward_inference, init_model, train_local, AdamHyper, ModelParameters,
    OptimizerState, TrainingConfig, LAYER_SIZES,
};
use crate::preprocess::{apply_scaler, fit_scaler, split_train_test, PreparedDataset};
use crate::seed::{derive_seed, stage};

/// Attack/benign decision threshold applied to model probabilities; ties go
/// to the attack class.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// One participant: an id plus its already-scaled train and test splits.
#[derive(Debug, Clone)]
pub struct Organisation {
    pub id: String,
    pub train: PreparedDataset,
    pub test: PreparedDataset,
}

impl Organisation {
    /// Training-set size, the weight this organisation carries in averaging.
    pub fn sample_count(&self) -> usize {
        self.train.n_rows()
    }
}

/// How the server folds the averaged client models into the global model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerOptimizer {
    /// The average simply becomes the new global model.
    Assignment,
    /// Adam over the pseudo-gradient (global - average); state persists
    /// across rounds.
    Adam(AdamHyper),
}

impl Default for ServerOptimizer {
    fn default() -> Self {
        ServerOptimizer::Adam(AdamHyper {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        })
    }
}

/// Federated run settings: defaults are 10 rounds, server Adam at 0.05 and
/// the default local training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedConfig {
    pub rounds: usize,
    pub server: ServerOptimizer,
    pub local: TrainingConfig,
    pub seed: u64,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        FederatedConfig {
            rounds: 10,
            server: ServerOptimizer::default(),
            local: TrainingConfig::default(),
            seed: 42,
        }
    }
}

/// Global-model evaluations after one federated round. `wall_time_s` counts
/// the slowest client plus the server step; the `train_time_s` inside each
/// evaluation is cumulative over rounds.
#[derive(Debug, Clone)]
pub struct RoundReport {
    /// 1-based round number.
    pub round_index: usize,
    pub evaluations: Vec<(String, EvaluationReport)>,
    pub global_model: ModelParameters,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub final_model: ModelParameters,
    pub rounds: Vec<RoundReport>,
}

#[derive(Debug, Clone)]
pub struct CentralisedRun {
    pub model: ModelParameters,
    pub evaluations: Vec<(String, EvaluationReport)>,
    pub train_time_s: f64,
}

/// One organisation's self-trained model, evaluated on every test set.
#[derive(Debug, Clone)]
pub struct LocalisedRun {
    pub org_id: String,
    pub model: ModelParameters,
    pub evaluations: Vec<(String, EvaluationReport)>,
}

/// Sample-weighted average of client models: sum of (m_k / m) * w_k in the
/// order given.
pub fn fedavg_aggregate(updates: &[(ModelParameters, usize)]) -> Result<ModelParameters> {
    if updates.is_empty() {
        return Err(Error::invalid("cannot average zero client updates"));
    }
    let total: usize = updates.iter().map(|(_, m)| m).sum();
    if updates.iter().any(|&(_, m)| m == 0) {
        return Err(Error::invalid("client update with zero sample count"));
    }
    let mut average = updates[0].0.zeros_like();
    for (params, m_k) in updates {
        average.add_scaled(*m_k as f64 / total as f64, params)?;
    }
    Ok(average)
}

/// Applies one server-side update, replacing `global` in place.
pub fn server_update(
    global: &mut ModelParameters,
    aggregated: &ModelParameters,
    state: &mut OptimizerState,
    server: &ServerOptimizer,
) -> Result<()> {
    match server {
        ServerOptimizer::Assignment => {
            if !global.same_shape(aggregated) {
                return Err(Error::invalid("cannot combine models of different shapes"));
            }
            *global = aggregated.clone();
            Ok(())
        }
        ServerOptimizer::Adam(hyper) => {
            let pseudo_gradient = global.delta(aggregated)?;
            adam_step(state, global, &pseudo_gradient, hyper)
        }
    }
}

/// Runs the model over a test set and assembles the full metric report.
/// `train_time_s` is supplied by the caller because it belongs to whichever
/// training run produced `params`.
pub fn evaluate_model(
    params: &ModelParameters,
    test: &PreparedDataset,
    train_time_s: f64,
) -> Result<EvaluationReport> {
    let probabilities = forward_inference(params, test.features.view())?;
    let probs = probabilities.as_slice().expect("contiguous probabilities");
    let cm = confusion(probs, &test.labels, DECISION_THRESHOLD)?;
    let binary = binary_metrics(&cm);
    let auc = auc(probs, &test.labels)?;
    let benign_marker = test
        .labels
        .iter()
        .position(|&l| l == 0)
        .map(|i| test.categories[i].clone())
        .unwrap_or_else(|| "Benign".to_string());
    let (by_category, category_avg) =
        per_category_dr(probs, &test.categories, DECISION_THRESHOLD, &benign_marker)?;
    Ok(EvaluationReport {
        accuracy: binary.accuracy,
        auc,
        f1: binary.f1,
        detection_rate: binary.detection_rate,
        false_alarm_rate: binary.false_alarm_rate,
        per_category_dr: by_category,
        per_category_avg: category_avg,
        train_time_s,
    })
}

/// Checks the organisation set and returns indices in ascending id order.
fn sorted_org_order(orgs: &[Organisation]) -> Result<Vec<usize>> {
    if orgs.is_empty() {
        return Err(Error::invalid("at least one organisation is required"));
    }
    let mut order: Vec<usize> = (0..orgs.len()).collect();
    order.sort_by(|&a, &b| orgs[a].id.cmp(&orgs[b].id));
    for pair in order.windows(2) {
        if orgs[pair[0]].id == orgs[pair[1]].id {
            return Err(Error::invalid(format!(
                "duplicate organisation id {:?}",
                orgs[pair[0]].id
            )));
        }
    }
    for org in orgs {
        if org.train.n_rows() == 0 || org.test.n_rows() == 0 {
            return Err(Error::invalid(format!(
                "organisation {:?} has an empty train or test split",
                org.id
            )));
        }
        for split in [&org.train, &org.test] {
            if split.feature_dim() != LAYER_SIZES[0] {
                return Err(Error::Dimension {
                    context: "organisation features vs model input",
                    expected: LAYER_SIZES[0],
                    actual: split.feature_dim(),
                });
            }
        }
    }
    Ok(order)
}

/// The federated scenario. Each round, every organisation trains the global
/// model locally (seeded per round and per organisation), the server
/// averages the results by sample count in ascending id order and applies
/// its optimizer, and the new global model is evaluated on every test set.
pub fn run_federated(orgs: &[Organisation], config: &FederatedConfig) -> Result<FederatedRun> {
    if config.rounds == 0 {
        return Err(Error::invalid("at least one federated round is required"));
    }
    let order = sorted_org_order(orgs)?;
    let mut global = init_model(config.seed);
    let mut server_state = OptimizerState::zeros_for(&global);
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut cumulative_time = 0.0;

    for round in 1..=config.rounds {
        let mut updates = Vec::with_capacity(order.len());
        let mut slowest_client = 0.0f64;
        for (position, &index) in order.iter().enumerate() {
            let org = &orgs[index];
            let local = TrainingConfig {
                seed: derive_seed(
                    config.seed,
                    &[stage::LOCAL_TRAIN, round as u64, position as u64],
                ),
                ..config.local.clone()
            };
            let (trained, seconds) = train_local(&global, &org.train, &local)?;
            slowest_client = slowest_client.max(seconds);
            updates.push((trained, org.sample_count()));
        }
        let (step, server_seconds) = measure_time(|| -> Result<()> {
            let average = fedavg_aggregate(&updates)?;
            server_update(&mut global, &average, &mut server_state, &config.server)
        });
        step?;

        let wall_time_s = slowest_client + server_seconds;
        cumulative_time += wall_time_s;
        let mut evaluations = Vec::with_capacity(order.len());
        for &index in &order {
            let org = &orgs[index];
            evaluations.push((
                org.id.clone(),
                evaluate_model(&global, &org.test, cumulative_time)?,
            ));
        }
        rounds.push(RoundReport {
            round_index: round,
            evaluations,
            global_model: global.clone(),
            wall_time_s,
        });
    }
    Ok(FederatedRun {
        final_model: global,
        rounds,
    })
}

/// The centralised scenario: every organisation's data pooled into one
/// training set. Features are unscaled back to raw values with each
/// organisation's own scaler, a single scaler is refit on the pooled
/// training rows, and every split is rescaled with it. With one
/// organisation this reduces to plain local training on its own scaling.
pub fn run_centralised(
    orgs: &[Organisation],
    local: &TrainingConfig,
    seed: u64,
) -> Result<CentralisedRun> {
    let order = sorted_org_order(orgs)?;
    let train_seed = derive_seed(seed, &[stage::LOCAL_TRAIN, 1, 0]);
    let local = TrainingConfig {
        seed: train_seed,
        ..local.clone()
    };

    let (pooled_train, tests) = if order.len() == 1 {
        let org = &orgs[order[0]];
        (org.train.clone(), vec![(org.id.clone(), org.test.clone())])
    } else {
        pool_datasets(orgs, &order)?
    };

    let model = init_model(seed);
    let (trained, train_time_s) = train_local(&model, &pooled_train, &local)?;
    let mut evaluations = Vec::with_capacity(tests.len());
    for (id, test) in &tests {
        evaluations.push((id.clone(), evaluate_model(&trained, test, train_time_s)?));
    }
    Ok(CentralisedRun {
        model: trained,
        evaluations,
        train_time_s,
    })
}

/// Rebuilds raw feature values for every split, refits one scaler on the
/// pooled training rows, and rescales everything with it.
fn pool_datasets(
    orgs: &[Organisation],
    order: &[usize],
) -> Result<(PreparedDataset, Vec<(String, PreparedDataset)>)> {
    let mut raw_trains = Vec::with_capacity(order.len());
    for &index in order {
        let org = &orgs[index];
        raw_trains.push(org.train.scaler.unscale(org.train.features.view())?);
    }
    let views: Vec<_> = raw_trains.iter().map(|m| m.view()).collect();
    let pooled_raw = ndarray::concatenate(Axis(0), &views)
        .map_err(|_| Error::invalid("organisations disagree on the feature dimension"))?;
    let scaler = crate::preprocess::fit_scaler_matrix(pooled_raw.view())?;

    let mut labels = Vec::new();
    let mut categories = Vec::new();
    for &index in order {
        labels.extend_from_slice(&orgs[index].train.labels);
        categories.extend_from_slice(&orgs[index].train.categories);
    }
    let pooled_train = PreparedDataset {
        features: crate::preprocess::apply_scaler_matrix(&scaler, pooled_raw.view())?,
        labels,
        categories,
        scaler: scaler.clone(),
    };

    let mut tests = Vec::with_capacity(order.len());
    for &index in order {
        let org = &orgs[index];
        let raw_test = org.test.scaler.unscale(org.test.features.view())?;
        tests.push((
            org.id.clone(),
            PreparedDataset {
                features: crate::preprocess::apply_scaler_matrix(&scaler, raw_test.view())?,
                labels: org.test.labels.clone(),
                categories: org.test.categories.clone(),
                scaler: scaler.clone(),
            },
        ));
    }
    Ok((pooled_train, tests))
}

/// The localised scenario: every organisation trains its own model from the
/// same initialisation, then each model is evaluated on every
/// organisation's own prepared test set — the off-diagonal entries show how
/// well a model transfers to data it has never seen.
pub fn run_localised(
    orgs: &[Organisation],
    local: &TrainingConfig,
    seed: u64,
) -> Result<Vec<LocalisedRun>> {
    let order = sorted_org_order(orgs)?;
    let initial = init_model(seed);
    let mut runs = Vec::with_capacity(order.len());
    for (position, &index) in order.iter().enumerate() {
        let org = &orgs[index];
        let config = TrainingConfig {
            seed: derive_seed(seed, &[stage::LOCAL_TRAIN, 1, position as u64]),
            ..local.clone()
        };
        let (trained, seconds) = train_local(&initial, &org.train, &config)?;
        let mut evaluations = Vec::with_capacity(order.len());
        for &eval_index in &order {
            let target = &orgs[eval_index];
            evaluations.push((
                target.id.clone(),
                evaluate_model(&trained, &target.test, seconds)?,
            ));
        }
        runs.push(LocalisedRun {
            org_id: org.id.clone(),
            model: trained,
            evaluations,
        });
    }
    Ok(runs)
}

/// Builds `k` synthetic organisations for exercising the pipeline without
/// flow captures: per organisation, benign rows are standard normal and
/// attack rows are shifted by `separation` along a random unit direction,
/// half and half, then split 70/30 and min-max scaled like real data.
pub fn make_synthetic_orgs(
    k: usize,
    n_per_org: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<Organisation>> {
    if k == 0 {
        return Err(Error::invalid("at least one organisation is required"));
    }
    if n_per_org < 4 {
        return Err(Error::invalid("need at least 4 rows per organisation"));
    }
    let dim = LAYER_SIZES[0];
    let feature_names: Vec<String> = crate::dataio::FlowSchema::netflow_v9()
        .retained_features()
        .into_iter()
        .map(String::from)
        .collect();

    let mut orgs = Vec::with_capacity(k);
    for org_index in 0..k {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &[stage::SYNTH_DATA, org_index as u64],
        ));
        let mut direction: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut direction {
            *v /= norm;
        }

        let benign_rows = n_per_org / 2;
        let mut features = Array2::zeros((n_per_org, dim));
        let mut labels = Vec::with_capacity(n_per_org);
        let mut categories = Vec::with_capacity(n_per_org);
        for row in 0..n_per_org {
            let attack = row >= benign_rows;
            for col in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                let shift = if attack { separation * direction[col] } else { 0.0 };
                features[[row, col]] = shift + noise;
            }
            labels.push(u8::from(attack));
            categories.push(if attack { "Attack".into() } else { "Benign".into() });
        }

        let table = FlowTable::from_parts(
            feature_names.clone(),
            features,
            labels,
            categories,
            "Benign",
        )?;
        let (train_table, test_table) = split_train_test(
            &table,
            0.7,
            derive_seed(seed, &[stage::SPLIT, org_index as u64]),
        )?;
        let scaler = fit_scaler(&train_table)?;
        orgs.push(Organisation {
            id: format!("org{org_index:02}"),
            train: apply_scaler(&scaler, &train_table)?,
            test: apply_scaler(&scaler, &test_table)?,
        });
    }
    Ok(orgs)
}
