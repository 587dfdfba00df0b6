//! Deterministic local strategies with outcomes in {-1, 0, +1}.

use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};

/// Largest `parties * settings` accepted by [`enumerate_local_strategies`].
pub const MAX_ENUMERATION_SLOTS: usize = 12;

/// Outcome alphabet in enumeration order; 0 stands for "not detected".
pub const TRICHOTOMIC: [i8; 3] = [-1, 0, 1];

/// One deterministic assignment of an outcome to every (party, setting).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalStrategy {
    parties: usize,
    settings: usize,
    outcomes: Vec<i8>,
}

impl LocalStrategy {
    /// `outcomes[party * settings + setting]`, each in {-1, 0, +1}.
    pub fn new(parties: usize, settings: usize, outcomes: Vec<i8>) -> Result<Self> {
        if outcomes.len() != parties * settings {
            return Err(EsrError::InvalidConstraint(format!(
                "strategy has {} outcomes, expected {}",
                outcomes.len(),
                parties * settings
            )));
        }
        if outcomes.iter().any(|o| !TRICHOTOMIC.contains(o)) {
            return Err(EsrError::InvalidConstraint("outcome outside {-1, 0, +1}".into()));
        }
        Ok(Self {
            parties,
            settings,
            outcomes,
        })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcome(&self, party: usize, setting: usize) -> i8 {
        self.outcomes[party * self.settings + setting]
    }

    pub fn outcomes(&self) -> &[i8] {
        &self.outcomes
    }

    pub fn detected(&self, party: usize, setting: usize) -> bool {
        self.outcome(party, setting) != 0
    }

    /// Product of the outcomes at `settings[party]` for every party (0 if anyone is undetected).
    pub fn product(&self, settings: &[usize]) -> i8 {
        settings
            .iter()
            .enumerate()
            .map(|(party, &s)| self.outcome(party, s))
            .product()
    }

    pub fn all_detected(&self, settings: &[usize]) -> bool {
        settings.iter().enumerate().all(|(party, &s)| self.detected(party, s))
    }
}

/// All `3^(parties * settings)` strategies in lexicographic order over
/// `(-1, 0, +1)`, first slot most significant.
pub fn enumerate_local_strategies(parties: usize, settings: usize) -> Result<Vec<LocalStrategy>> {
    let slots = parties * settings;
    if slots > MAX_ENUMERATION_SLOTS {
        return Err(EsrError::EnumerationBound {
            parties,
            settings,
            max: MAX_ENUMERATION_SLOTS,
        });
    }
    let count = 3usize.pow(slots as u32);
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; slots];
    for _ in 0..count {
        out.push(LocalStrategy {
            parties,
            settings,
            outcomes: digits.iter().map(|&d| TRICHOTOMIC[d]).collect(),
        });
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < 3 {
                break;
            }
            *d = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn counts() {
        assert_eq!(enumerate_local_strategies(1, 1).unwrap().len(), 3);
        assert_eq!(enumerate_local_strategies(2, 2).unwrap().len(), 81);
        assert_eq!(enumerate_local_strategies(3, 2).unwrap().len(), 729);
    }

    #[test]
    fn lexicographic_and_distinct() {
        let all = enumerate_local_strategies(2, 2).unwrap();
        assert_eq!(all[0].outcomes(), &[-1, -1, -1, -1]);
        assert_eq!(all[1].outcomes(), &[-1, -1, -1, 0]);
        assert_eq!(all[80].outcomes(), &[1, 1, 1, 1]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 81);
    }

    #[test]
    fn bound_enforced() {
        assert!(matches!(
            enumerate_local_strategies(3, 5),
            Err(EsrError::EnumerationBound { .. })
        ));
        assert!(enumerate_local_strategies(0, 4).unwrap().len() == 1);
    }

    #[test]
    fn product_and_detection() {
        let s = LocalStrategy::new(3, 2, vec![1, -1, 0, 1, -1, -1]).unwrap();
        assert_eq!(s.product(&[0, 1, 1]), -1);
        assert_eq!(s.product(&[1, 0, 0]), 0);
        assert!(!s.all_detected(&[0, 0, 0]));
        assert!(s.all_detected(&[1, 1, 0]));
        assert!(LocalStrategy::new(1, 2, vec![2, 0]).is_err());
    }
}
