//! Synthetic two-domain populations standing in for real corpora.
//!
//! The word universe has three groups: shared words, target-specific
//! words, and source-specific words. Each group carries a Zipf
//! distribution over its members. A domain's unigram distribution mixes
//! the shared group, its own group, and (optionally) the other domain's
//! group; words within a sentence are drawn i.i.d. from that mixture.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{DataError, Domain, RawClient};
use crate::seed::Seed;

/// How a domain spreads its mass over the three word groups.
/// The own-group mass is `1 − shared − cross`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainMix {
    pub shared: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_clients_t: usize,
    /// Source-to-target client ratio.
    pub population_ratio: f64,
    /// Fraction of target clients that also hold source-domain text.
    pub overlap: f64,
    pub shared_words: usize,
    pub t_words: usize,
    pub s_words: usize,
    pub zipf_exponent: f64,
    pub t_mix: DomainMix,
    pub s_mix: DomainMix,
    /// Inclusive range of words per client per domain.
    pub tokens_per_client: (usize, usize),
    /// Inclusive range of words per sentence.
    pub sentence_len: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clients_t: 500,
            population_ratio: 10.0,
            overlap: 0.0,
            shared_words: 600,
            t_words: 1800,
            s_words: 2400,
            zipf_exponent: 1.0,
            t_mix: DomainMix { shared: 0.5, cross: 0.0 },
            s_mix: DomainMix { shared: 0.5, cross: 0.1 },
            tokens_per_client: (20, 60),
            sentence_len: (4, 12),
        }
    }
}

fn zipf(n: usize, s: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-s)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidSynth(m.to_string()));
        if self.n_clients_t == 0 {
            return bad("n_clients_t must be positive");
        }
        if !(self.population_ratio >= 1.0) {
            return bad("population_ratio must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must be in [0, 1]");
        }
        if self.shared_words == 0 || self.t_words == 0 || self.s_words == 0 {
            return bad("every word group needs at least one word");
        }
        if !(self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent must be nonnegative");
        }
        for mix in [self.t_mix, self.s_mix] {
            if mix.shared < 0.0 || mix.cross < 0.0 || mix.shared + mix.cross > 1.0 {
                return bad("domain mix weights must be nonnegative and sum to at most 1");
            }
        }
        let ranges = [self.tokens_per_client, self.sentence_len];
        if ranges.iter().any(|&(lo, hi)| lo == 0 || lo > hi) {
            return bad("ranges must satisfy 1 <= min <= max");
        }
        Ok(())
    }

    pub fn n_clients_s(&self) -> usize {
        (self.n_clients_t as f64 * self.population_ratio).round() as usize
    }

    pub fn universe_size(&self) -> usize {
        self.shared_words + self.t_words + self.s_words
    }

    /// Surface form of word `i` of the universe.
    pub fn word(i: usize) -> String {
        format!("w{i}")
    }

    /// The configured unigram distribution of `domain` over the universe.
    pub fn domain_distribution(&self, domain: Domain) -> Vec<f64> {
        let (mix, own_first) = match domain {
            Domain::T => (self.t_mix, true),
            Domain::S => (self.s_mix, false),
        };
        let own = 1.0 - mix.shared - mix.cross;
        let (t_mass, s_mass) = if own_first { (own, mix.cross) } else { (mix.cross, own) };
        let s = self.zipf_exponent;
        let mut dist = Vec::with_capacity(self.universe_size());
        dist.extend(zipf(self.shared_words, s).into_iter().map(|p| p * mix.shared));
        dist.extend(zipf(self.t_words, s).into_iter().map(|p| p * t_mass));
        dist.extend(zipf(self.s_words, s).into_iter().map(|p| p * s_mass));
        dist
    }
}

fn sentences<R: Rng + ?Sized>(cfg: &SynthConfig, sampler: &WeightedIndex<f64>, rng: &mut R) -> Vec<String> {
    let (lo, hi) = cfg.tokens_per_client;
    let mut remaining = rng.random_range(lo..=hi);
    let mut out = Vec::new();
    while remaining > 0 {
        let (slo, shi) = cfg.sentence_len;
        let len = rng.random_range(slo..=shi).min(remaining);
        remaining -= len;
        let words: Vec<String> = (0..len).map(|_| SynthConfig::word(sampler.sample(rng))).collect();
        out.push(words.join(" "));
    }
    out
}

/// Target clients first (ids `c000000…`), then source clients. A leading
/// fraction `overlap` of the target clients also receives source text.
pub fn generate_synthetic_population(cfg: &SynthConfig, seed: Seed) -> Result<Vec<RawClient>, DataError> {
    cfg.validate()?;
    let sampler = |d| {
        WeightedIndex::new(cfg.domain_distribution(d)).map_err(|e| DataError::InvalidSynth(e.to_string()))
    };
    let t_sampler = sampler(Domain::T)?;
    let s_sampler = sampler(Domain::S)?;
    let mut rng = seed.child("synth").rng();
    let n_overlap = (cfg.n_clients_t as f64 * cfg.overlap).round() as usize;
    let n_total = cfg.n_clients_t + cfg.n_clients_s();
    let mut clients = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let mut by_domain = BTreeMap::new();
        if i < cfg.n_clients_t {
            by_domain.insert(Domain::T, sentences(cfg, &t_sampler, &mut rng));
            if i < n_overlap {
                by_domain.insert(Domain::S, sentences(cfg, &s_sampler, &mut rng));
            }
        } else {
            by_domain.insert(Domain::S, sentences(cfg, &s_sampler, &mut rng));
        }
        clients.push(RawClient {
            id: format!("c{i:06}"),
            sentences: by_domain,
        });
    }
    Ok(clients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;

    #[test]
    fn population_counts() {
        let cfg = SynthConfig {
            n_clients_t: 50,
            ..SynthConfig::default()
        };
        let clients = generate_synthetic_population(&cfg, Seed(1)).unwrap();
        let t = clients.iter().filter(|c| c.sentences.contains_key(&Domain::T)).count();
        let s = clients.iter().filter(|c| c.sentences.contains_key(&Domain::S)).count();
        assert_eq!((t, s), (50, 500));
        assert!(clients.iter().all(|c| c.sentences.len() == 1));
        assert_eq!(SynthConfig::default().n_clients_s(), 5000);
    }

    #[test]
    fn overlap_and_determinism() {
        let cfg = SynthConfig {
            n_clients_t: 40,
            population_ratio: 2.0,
            overlap: 0.25,
            ..SynthConfig::default()
        };
        let a = generate_synthetic_population(&cfg, Seed(9)).unwrap();
        assert_eq!(a, generate_synthetic_population(&cfg, Seed(9)).unwrap());
        assert_eq!(a.iter().filter(|c| c.sentences.len() == 2).count(), 10);
    }

    #[test]
    fn distributions_are_normalized_and_word_ranges_respected() {
        let cfg = SynthConfig::default();
        for d in [Domain::S, Domain::T] {
            let p = cfg.domain_distribution(d);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let clients = generate_synthetic_population(&SynthConfig { n_clients_t: 20, ..cfg.clone() }, Seed(2)).unwrap();
        for c in &clients {
            for sents in c.sentences.values() {
                let n: usize = sents.iter().map(|s| tokenize(s).count()).sum();
                assert!((20..=60).contains(&n));
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            population_ratio: 0.5,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic_population(&cfg, Seed(1)).is_err());
    }
}
