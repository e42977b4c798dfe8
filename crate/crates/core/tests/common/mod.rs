#![allow(dead_code)]

use pfl_sim::data::{generate_synthetic_population, prepare_population, Population, SynthConfig};
use pfl_sim::federated::TrainConfig;
use pfl_sim::langmodel::ModelConfig;
use pfl_sim::Seed;

pub fn tiny_synth() -> SynthConfig {
    SynthConfig {
        n_clients_t: 40,
        population_ratio: 4.0,
        shared_words: 30,
        t_words: 40,
        s_words: 50,
        tokens_per_client: (15, 30),
        ..SynthConfig::default()
    }
}

pub fn tiny_population(seed: u64) -> Population {
    let data = Seed(seed).child("data");
    let raw = generate_synthetic_population(&tiny_synth(), data).unwrap();
    prepare_population(raw, 60, data).unwrap()
}

pub fn tiny_model(pop: &Population) -> ModelConfig {
    ModelConfig {
        vocab_size: pop.vocab.len(),
        embed_dim: 4,
        hidden_dim: 6,
        ..ModelConfig::default()
    }
}

pub fn tiny_train() -> TrainConfig {
    TrainConfig {
        rounds: 6,
        cohort: 6,
        calibration_cohort: 12,
        alpha: 0.34,
        eval_every: 3,
        ..TrainConfig::default()
    }
}
