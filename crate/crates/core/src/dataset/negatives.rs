use std::collections::{HashMap, HashSet};

use super::{LabeledPair, PairSet};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Uniform sampler over the compound × protein grid minus an exclusion set.
///
/// Requests that are small relative to the complement use rejection
/// sampling; requests for more than half of it enumerate the complement and
/// draw a partial Fisher–Yates permutation. Both are uniform over distinct
/// subsets.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    compounds: Vec<String>,
    proteins: Vec<String>,
    compound_index: HashMap<String, u32>,
    protein_index: HashMap<String, u32>,
    excluded: HashSet<(u32, u32)>,
}

impl NegativeSampler {
    /// Pairs of `positives` whose ids are outside the grid are ignored.
    pub fn new(compounds: &[String], proteins: &[String], positives: &PairSet) -> Result<Self> {
        let index = |ids: &[String], what: &str| -> Result<HashMap<String, u32>> {
            let mut map = HashMap::with_capacity(ids.len());
            for (i, id) in ids.iter().enumerate() {
                let i = u32::try_from(i).map_err(|_| Error::Data(format!("too many {what}")))?;
                if map.insert(id.clone(), i).is_some() {
                    return Err(Error::Data(format!("duplicate {what} id {id}")));
                }
            }
            Ok(map)
        };
        let compound_index = index(compounds, "compound")?;
        let protein_index = index(proteins, "protein")?;
        let mut sampler = Self {
            compounds: compounds.to_vec(),
            proteins: proteins.to_vec(),
            compound_index,
            protein_index,
            excluded: HashSet::with_capacity(positives.len()),
        };
        sampler.exclude(positives.iter().map(|(c, p)| (c.as_str(), p.as_str())));
        Ok(sampler)
    }

    /// Removes more pairs from the sampling pool.
    pub fn exclude<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) {
        for (c, p) in pairs {
            if let (Some(&ci), Some(&pi)) = (self.compound_index.get(c), self.protein_index.get(p))
            {
                self.excluded.insert((ci, pi));
            }
        }
    }

    pub fn grid_size(&self) -> usize {
        self.compounds.len() * self.proteins.len()
    }

    pub fn complement_size(&self) -> usize {
        self.grid_size() - self.excluded.len()
    }

    pub fn is_excluded(&self, compound: &str, protein: &str) -> bool {
        match (
            self.compound_index.get(compound),
            self.protein_index.get(protein),
        ) {
            (Some(&c), Some(&p)) => self.excluded.contains(&(c, p)),
            _ => false,
        }
    }

    /// `count` distinct non-excluded pairs, labeled negative.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Result<Vec<LabeledPair>> {
        let available = self.complement_size();
        if count > available {
            return Err(Error::Data(format!(
                "requested {count} negatives but only {available} non-positive pairs exist"
            )));
        }
        let picks = if count.saturating_mul(2) > available {
            self.sample_by_enumeration(count, rng)
        } else {
            self.sample_by_rejection(count, rng)
        };
        Ok(picks
            .into_iter()
            .map(|(c, p)| {
                LabeledPair::negative(
                    self.compounds[c as usize].clone(),
                    self.proteins[p as usize].clone(),
                )
            })
            .collect())
    }

    fn sample_by_rejection(&self, count: usize, rng: &mut RngStream) -> Vec<(u32, u32)> {
        let (nc, np) = (self.compounds.len(), self.proteins.len());
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let pair = (rng.index(nc) as u32, rng.index(np) as u32);
            if self.excluded.contains(&pair) || !chosen.insert(pair) {
                continue;
            }
            out.push(pair);
        }
        out
    }

    fn sample_by_enumeration(&self, count: usize, rng: &mut RngStream) -> Vec<(u32, u32)> {
        let (nc, np) = (self.compounds.len() as u32, self.proteins.len() as u32);
        let mut pool: Vec<(u32, u32)> = (0..nc)
            .flat_map(|c| (0..np).map(move |p| (c, p)))
            .filter(|pair| !self.excluded.contains(pair))
            .collect();
        for i in 0..count {
            let j = i + rng.index(pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

/// One-shot form of [`NegativeSampler::sample`].
pub fn sample_negatives(
    compounds: &[String],
    proteins: &[String],
    positives: &PairSet,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<LabeledPair>> {
    NegativeSampler::new(compounds, proteins, positives)?.sample(count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn pairs(list: &[(&str, &str)]) -> PairSet {
        list.iter()
            .map(|(c, p)| (c.to_string(), p.to_string()))
            .collect()
    }

    #[test]
    fn two_by_two_complement() {
        let pos = pairs(&[("c0", "p0"), ("c1", "p1")]);
        let mut rng = RngStream::new(3);
        let got = sample_negatives(&ids("c", 2), &ids("p", 2), &pos, 2, &mut rng).unwrap();
        let got: PairSet = got.iter().map(LabeledPair::pair).collect();
        assert_eq!(got, pairs(&[("c0", "p1"), ("c1", "p0")]));
    }

    #[test]
    fn full_grid_errors() {
        let pos = pairs(&[("c0", "p0"), ("c0", "p1"), ("c1", "p0"), ("c1", "p1")]);
        let mut rng = RngStream::new(0);
        assert!(matches!(
            sample_negatives(&ids("c", 2), &ids("p", 2), &pos, 1, &mut rng),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn deterministic() {
        let pos = pairs(&[("c3", "p4")]);
        let draw = |seed| {
            sample_negatives(
                &ids("c", 20),
                &ids("p", 20),
                &pos,
                50,
                &mut RngStream::new(seed),
            )
            .unwrap()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn both_paths_respect_exclusions() {
        let pos = pairs(&[("c0", "p0"), ("c2", "p1"), ("c4", "p4")]);
        let sampler = NegativeSampler::new(&ids("c", 5), &ids("p", 5), &pos).unwrap();
        for count in [3, 20, 22] {
            let got = sampler
                .sample(count, &mut RngStream::new(count as u64))
                .unwrap();
            let set: PairSet = got.iter().map(LabeledPair::pair).collect();
            assert_eq!(set.len(), count);
            assert!(set.is_disjoint(&pos));
            assert!(got.iter().all(|p| !p.is_positive() && p.score().is_none()));
        }
    }

    #[test]
    fn extra_exclusions() {
        let mut sampler =
            NegativeSampler::new(&ids("c", 2), &ids("p", 2), &PairSet::new()).unwrap();
        sampler.exclude([("c0", "p0"), ("c1", "p1"), ("zz", "p0")]);
        assert_eq!(sampler.complement_size(), 2);
        assert!(sampler.is_excluded("c1", "p1"));
    }
}
