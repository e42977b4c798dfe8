use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::seed::Seed;

/// Disjoint train/validation/test client-id lists, each sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Deterministic shuffle, then a 6:2:2 partition by client. Validation
/// and test each get `round(0.2·n)` clients; train takes the remainder.
pub fn split_clients(ids: &[String], seed: Seed) -> Result<PopulationSplit, DataError> {
    let n = ids.len();
    if n < 5 {
        return Err(DataError::TooFewClients(n));
    }
    let mut shuffled = ids.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut seed.rng());
    let held_out = (n as f64 * 0.2).round() as usize;
    let mut test = shuffled.split_off(n - held_out);
    let mut validation = shuffled.split_off(n - 2 * held_out);
    let mut train = shuffled;
    train.sort();
    validation.sort();
    test.sort();
    Ok(PopulationSplit { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i:03}")).collect()
    }

    #[test]
    fn ratios() {
        let s = split_clients(&ids(10), Seed(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
        let s = split_clients(&ids(11), Seed(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 2, 2));
        let s = split_clients(&ids(5500), Seed(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (3300, 1100, 1100));
    }

    #[test]
    fn deterministic_disjoint_and_complete() {
        let a = split_clients(&ids(50), Seed(3)).unwrap();
        assert_eq!(a, split_clients(&ids(50), Seed(3)).unwrap());
        assert_ne!(a, split_clients(&ids(50), Seed(4)).unwrap());
        let mut all: Vec<String> = a.train.iter().chain(&a.validation).chain(&a.test).cloned().collect();
        all.sort();
        assert_eq!(all, ids(50));
    }

    #[test]
    fn too_few() {
        assert!(matches!(split_clients(&ids(4), Seed(1)), Err(DataError::TooFewClients(4))));
    }
}
