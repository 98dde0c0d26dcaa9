use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Result, Utterance};

/// Disjoint actor sets for train / validation / test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_actors: BTreeSet<u32>,
    pub val_actors: BTreeSet<u32>,
    pub test_actors: BTreeSet<u32>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_actors: (1..=20).collect(),
            val_actors: [21, 22].into_iter().collect(),
            test_actors: [23, 24].into_iter().collect(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("train", &self.train_actors, "val", &self.val_actors),
            ("train", &self.train_actors, "test", &self.test_actors),
            ("val", &self.val_actors, "test", &self.test_actors),
        ];
        for (a, sa, b, sb) in pairs {
            if let Some(actor) = sa.intersection(sb).next() {
                return Err(CorpusError::Config(format!(
                    "actor {actor} appears in both {a} and {b} sets"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Utterance>,
    pub val: Vec<Utterance>,
    pub test: Vec<Utterance>,
    /// Utterances whose actor belongs to no set.
    pub dropped: usize,
}

/// Partition by actor id. Inputs are ordered by path first so the output is
/// independent of the caller's ordering.
pub fn split(corpus: &[Utterance], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut sorted: Vec<&Utterance> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path).then_with(|| a.id.cmp(&b.id)));

    let mut out = Split::default();
    for u in sorted {
        if spec.train_actors.contains(&u.actor) {
            out.train.push(u.clone());
        } else if spec.val_actors.contains(&u.actor) {
            out.val.push(u.clone());
        } else if spec.test_actors.contains(&u.actor) {
            out.test.push(u.clone());
        } else {
            out.dropped += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_ravdess_filename;
    use proptest::prelude::*;

    fn utt(actor: u32, rep: u32) -> Utterance {
        parse_ravdess_filename(&format!("03-01-03-01-01-{rep:02}-{actor:02}.wav")).unwrap()
    }

    #[test]
    fn default_assignments() {
        let corpus = vec![utt(21, 1), utt(7, 1), utt(24, 2)];
        let s = split(&corpus, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.train[0].actor, 7);
        assert_eq!(s.val[0].actor, 21);
        assert_eq!(s.test[0].actor, 24);
        assert_eq!(s.dropped, 0);
    }

    #[test]
    fn empty_corpus() {
        let s = split(&[], &SplitSpec::default()).unwrap();
        assert!(s.train.is_empty() && s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn overlapping_sets_rejected() {
        let mut spec = SplitSpec::default();
        spec.val_actors.insert(3);
        assert!(matches!(split(&[], &spec), Err(CorpusError::Config(_))));
    }

    #[test]
    fn unknown_actors_are_counted() {
        let spec = SplitSpec {
            train_actors: [1].into_iter().collect(),
            val_actors: [2].into_iter().collect(),
            test_actors: [3].into_iter().collect(),
        };
        let s = split(&[utt(1, 1), utt(9, 1), utt(10, 2)], &spec).unwrap();
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.dropped, 2);
    }

    proptest! {
        #[test]
        fn speaker_independent(actors in proptest::collection::vec((1u32..=24, 1u32..=2), 0..80)) {
            let corpus: Vec<Utterance> = actors.iter().map(|&(a, r)| utt(a, r)).collect();
            let s = split(&corpus, &SplitSpec::default()).unwrap();
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len() + s.dropped, corpus.len());
            let ids = |v: &[Utterance]| v.iter().map(|u| u.actor).collect::<BTreeSet<_>>();
            let (tr, va, te) = (ids(&s.train), ids(&s.val), ids(&s.test));
            prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        }
    }
}
