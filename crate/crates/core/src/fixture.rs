//! Deterministic synthetic flow corpus: two organisations whose traffic
//! lives on deliberately different scales, for exercising the whole pipeline
//! when no real flow captures are on hand.
//!
//! The "enterprise" file is mostly benign with nine attack categories that
//! each elevate a pair of packet-shape columns; the "iot" file is mostly
//! attack traffic (flood-style volumetrics, plus reconnaissance and data
//! theft) over a much narrower benign baseline. A small share of benign
//! enterprise rows carry heavy-tailed durations, so the two organisations
//! disagree badly about what "large" means on those columns — which is
//! exactly the non-IID tension the training scenarios are meant to expose.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::{IDENTIFIER_COLUMNS, NETFLOW_V9_FEATURES};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stage};

const FLOOD_DIMS: [&str; 2] = ["IN_BYTES", "IN_PKTS"];

/// Benign bulk transfers: a slice of benign rows in every organisation sits
/// between the benign baseline and the flood attacks on the volumetric
/// columns, the way backups and software updates do in real captures.
const BURST_PROBABILITY: f64 = 0.12;
const BURST_MEAN: f64 = 400.0;
const BURST_STD: f64 = 55.0;
const RECON_DIMS: [&str; 2] = ["FLOW_DURATION_MILLISECONDS", "DURATION_IN"];
const THEFT_DIMS: [&str; 2] = ["TCP_WIN_MAX_IN", "TCP_WIN_MAX_OUT"];
const ENTERPRISE_DIMS: [&str; 11] = [
    "MIN_TTL",
    "MAX_TTL",
    "LONGEST_FLOW_PKT",
    "SHORTEST_FLOW_PKT",
    "MIN_IP_PKT_LEN",
    "MAX_IP_PKT_LEN",
    "RETRANSMITTED_IN_BYTES",
    "RETRANSMITTED_OUT_BYTES",
    "SRC_TO_DST_SECOND_BYTES",
    "OUT_BYTES",
    "OUT_PKTS",
];

/// One attack category: its share of the organisation's attack rows and the
/// (mean, std) level it forces onto its two signature columns.
struct Category {
    name: &'static str,
    weight: f64,
    dims: [&'static str; 2],
    mean: f64,
    std: f64,
}

const ENTERPRISE_CATEGORIES: [Category; 9] = [
    Category { name: "Exploits", weight: 0.30, dims: ["MIN_TTL", "LONGEST_FLOW_PKT"], mean: 700.0, std: 50.0 },
    Category { name: "Fuzzers", weight: 0.22, dims: ["MAX_TTL", "SHORTEST_FLOW_PKT"], mean: 700.0, std: 50.0 },
    Category { name: "Generic", weight: 0.18, dims: ["MIN_IP_PKT_LEN", "MAX_IP_PKT_LEN"], mean: 700.0, std: 50.0 },
    Category { name: "Reconnaissance", weight: 0.08, dims: ["FLOW_DURATION_MILLISECONDS", "DURATION_IN"], mean: 800.0, std: 60.0 },
    Category { name: "Analysis", weight: 0.07, dims: ["MIN_TTL", "MAX_TTL"], mean: 700.0, std: 50.0 },
    Category { name: "DoS", weight: 0.05, dims: ["IN_BYTES", "IN_PKTS"], mean: 800.0, std: 60.0 },
    Category { name: "Backdoor", weight: 0.05, dims: ["RETRANSMITTED_IN_BYTES", "RETRANSMITTED_OUT_BYTES"], mean: 700.0, std: 50.0 },
    Category { name: "Shellcode", weight: 0.03, dims: ["SRC_TO_DST_SECOND_BYTES", "SHORTEST_FLOW_PKT"], mean: 700.0, std: 50.0 },
    Category { name: "Worms", weight: 0.02, dims: ["OUT_BYTES", "OUT_PKTS"], mean: 700.0, std: 50.0 },
];

const IOT_CATEGORIES: [Category; 4] = [
    Category { name: "DDoS", weight: 0.47, dims: ["IN_BYTES", "IN_PKTS"], mean: 900.0, std: 50.0 },
    Category { name: "DoS", weight: 0.40, dims: ["IN_BYTES", "IN_PKTS"], mean: 760.0, std: 50.0 },
    Category { name: "Reconnaissance", weight: 0.08, dims: ["FLOW_DURATION_MILLISECONDS", "DURATION_IN"], mean: 500.0, std: 30.0 },
    Category { name: "Theft", weight: 0.05, dims: ["TCP_WIN_MAX_IN", "TCP_WIN_MAX_OUT"], mean: 950.0, std: 30.0 },
];

/// Columns where a small share of benign rows goes heavy-tailed.
struct TailBand {
    dims: &'static [&'static str],
    probability: f64,
    mean: f64,
    std: f64,
}

struct OrgProfile {
    file_name: &'static str,
    benign_share: f64,
    categories: &'static [Category],
    /// Benign (mean, std) per feature column.
    base: fn(&str) -> (f64, f64),
    tails: &'static [TailBand],
    src_subnet: &'static str,
}

fn enterprise_base(dim: &str) -> (f64, f64) {
    if FLOOD_DIMS.contains(&dim) {
        (120.0, 30.0)
    } else if RECON_DIMS.contains(&dim) || THEFT_DIMS.contains(&dim) {
        (300.0, 80.0)
    } else if ENTERPRISE_DIMS.contains(&dim) {
        (60.0, 25.0)
    } else {
        (500.0, 100.0)
    }
}

fn iot_base(dim: &str) -> (f64, f64) {
    if FLOOD_DIMS.contains(&dim) || RECON_DIMS.contains(&dim) || THEFT_DIMS.contains(&dim) {
        (120.0, 15.0)
    } else if ENTERPRISE_DIMS.contains(&dim) {
        (100.0, 35.0)
    } else {
        (500.0, 100.0)
    }
}

const ENTERPRISE_TAIL_DIMS: [&str; 4] = [
    "FLOW_DURATION_MILLISECONDS",
    "DURATION_IN",
    "TCP_WIN_MAX_IN",
    "TCP_WIN_MAX_OUT",
];

const PROFILES: [OrgProfile; 2] = [
    OrgProfile {
        file_name: "enterprise.csv",
        benign_share: 0.72,
        categories: &ENTERPRISE_CATEGORIES,
        base: enterprise_base,
        tails: &[TailBand { dims: &ENTERPRISE_TAIL_DIMS, probability: 0.01, mean: 2600.0, std: 350.0 }],
        src_subnet: "192.168",
    },
    OrgProfile {
        file_name: "iot.csv",
        benign_share: 0.24,
        categories: &IOT_CATEGORIES,
        base: iot_base,
        tails: &[TailBand { dims: &ENTERPRISE_DIMS, probability: 0.01, mean: 1000.0, std: 120.0 }],
        src_subnet: "10.42",
    },
];

/// Writes `enterprise.csv` and `iot.csv` under `dir`, each with
/// `rows_per_org` flow records in the standard 43-feature layout, and
/// returns their paths. Byte-deterministic in (rows_per_org, seed).
pub fn write_fixture_pair(
    dir: &Path,
    rows_per_org: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf)> {
    if rows_per_org < 10 {
        return Err(Error::invalid("need at least 10 rows per organisation"));
    }
    let mut paths = Vec::with_capacity(2);
    for (index, profile) in PROFILES.iter().enumerate() {
        let path = dir.join(profile.file_name);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &[stage::FIXTURE, index as u64],
        ));
        write_org(&path, profile, rows_per_org, &mut rng)?;
        paths.push(path);
    }
    let iot = paths.pop().expect("two profiles");
    let enterprise = paths.pop().expect("two profiles");
    Ok((enterprise, iot))
}

fn draw(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (mean + std * z).max(0.0)
}

fn write_org(
    path: &Path,
    profile: &OrgProfile,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let benign_rows = (profile.benign_share * rows as f64).round() as usize;
    let attack_rows = rows - benign_rows;

    // Category counts by largest remainder, so shares hold exactly.
    let mut counts: Vec<usize> = profile
        .categories
        .iter()
        .map(|c| (c.weight * attack_rows as f64).floor() as usize)
        .collect();
    let mut remainders: Vec<(usize, f64)> = profile
        .categories
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.weight * attack_rows as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut short = attack_rows - counts.iter().sum::<usize>();
    for &(i, _) in &remainders {
        if short == 0 {
            break;
        }
        counts[i] += 1;
        short -= 1;
    }

    // None marks a benign row; Some(i) draws from category i.
    let mut assignment: Vec<Option<usize>> = Vec::with_capacity(rows);
    assignment.extend(std::iter::repeat(None).take(benign_rows));
    for (i, &count) in counts.iter().enumerate() {
        assignment.extend(std::iter::repeat(Some(i)).take(count));
    }
    assignment.shuffle(rng);

    let mut writer = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut header: Vec<&str> = NETFLOW_V9_FEATURES.to_vec();
    header.push("Label");
    header.push("Attack");
    writer.write_record(&header).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;

    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for row in &assignment {
        record.clear();
        let category = row.map(|i| &profile.categories[i]);
        let burst = category.is_none() && rng.random_range(0.0..1.0) < BURST_PROBABILITY;
        for column in NETFLOW_V9_FEATURES {
            if IDENTIFIER_COLUMNS.contains(&column) {
                record.push(identifier_value(column, profile.src_subnet, rng));
                continue;
            }
            let band = category
                .is_none()
                .then(|| profile.tails.iter().find(|band| band.dims.contains(&column)))
                .flatten();
            let value = if let Some(cat) = category.filter(|c| c.dims.contains(&column)) {
                draw(rng, cat.mean, cat.std)
            } else if burst && FLOOD_DIMS.contains(&column) {
                draw(rng, BURST_MEAN, BURST_STD)
            } else if let Some(band) =
                band.filter(|band| rng.random_range(0.0..1.0) < band.probability)
            {
                draw(rng, band.mean, band.std)
            } else {
                let (mean, std) = (profile.base)(column);
                draw(rng, mean, std)
            };
            record.push(format!("{value:.3}"));
        }
        match category {
            None => {
                record.push("0".to_string());
                record.push("Benign".to_string());
            }
            Some(cat) => {
                record.push("1".to_string());
                record.push(cat.name.to_string());
            }
        }
        writer.write_record(&record).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn identifier_value(column: &str, src_subnet: &str, rng: &mut ChaCha8Rng) -> String {
    match column {
        "IPV4_SRC_ADDR" => format!(
            "{src_subnet}.{}.{}",
            rng.random_range(0..256u16),
            rng.random_range(1..255u16)
        ),
        "L4_SRC_PORT" => rng.random_range(1024..65536u32).to_string(),
        "IPV4_DST_ADDR" => format!(
            "172.16.{}.{}",
            rng.random_range(0..256u16),
            rng.random_range(1..255u16)
        ),
        _ => {
            const SERVICES: [u16; 6] = [22, 53, 80, 123, 443, 8080];
            SERVICES[rng.random_range(0..SERVICES.len())].to_string()
        }
    }
}
