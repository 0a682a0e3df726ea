#![allow(dead_code)]

use std::path::PathBuf;

use curio::distance::bc_mvn;
use curio::distributions::estimate_mvn;
use curio::knowledge::{KnowledgeStore, StoreConfig};
use curio::projection::JlMap;
use curio::sim::{SimConfig, Topic};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.toml")
}

pub fn reference_config() -> SimConfig {
    let text = std::fs::read_to_string(reference_path()).expect("reference scenario present");
    SimConfig::from_toml(&text).expect("reference scenario valid")
}

/// Ten batches from three unit-variance sources 6 apart in every coordinate,
/// in source order 0,1,2,0,1,2,0,1,2,0.
pub struct SleepFixture {
    pub batches: Vec<DMatrix<f64>>,
    pub sources: Vec<usize>,
}

pub const FIXTURE_DIM: usize = 4;

pub fn sleep_fixture(seed: u64) -> SleepFixture {
    let mut r = rng(seed);
    let topics: Vec<Topic> = (0..3)
        .map(|i| Topic::isotropic(i, vec![6.0 * i as f64; FIXTURE_DIM], 1.0).unwrap())
        .collect();
    let sources: Vec<usize> = (0..10).map(|i| i % 3).collect();
    let batches = sources
        .iter()
        .map(|&s| topics[s].draw(64, &mut r))
        .collect();
    SleepFixture { batches, sources }
}

/// Pairwise distances between raw batches, estimated directly from the rows.
pub fn batch_distance_table(batches: &[DMatrix<f64>]) -> Vec<Vec<f64>> {
    let fitted: Vec<_> = batches.iter().map(|b| estimate_mvn(b).unwrap()).collect();
    fitted
        .iter()
        .map(|a| {
            fitted
                .iter()
                .map(|b| bc_mvn(a, b).unwrap().distance())
                .collect()
        })
        .collect()
}

/// Store that keeps every batch as its own item until sleep.
pub fn unlinked_store(dim: usize, theta_merge: f64) -> KnowledgeStore {
    KnowledgeStore::new(
        JlMap::identity(dim, 0.5).unwrap(),
        StoreConfig {
            theta_link: 1e-9,
            theta_merge,
            ..StoreConfig::default()
        },
    )
    .unwrap()
}
