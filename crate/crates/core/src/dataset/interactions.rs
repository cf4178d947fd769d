use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_id, read_text, write_text};
use crate::error::{Error, Result};

pub const MAX_SCORE: u32 = 1000;

/// `(compound_id, protein_id)` pairs.
pub type PairSet = HashSet<(String, String)>;

/// Half-open confidence interval `[lo, hi)`. Serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct TierSpec {
    lo: u32,
    hi: u32,
}

impl TierSpec {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo >= hi || hi > MAX_SCORE {
            return Err(Error::Config(format!(
                "tier [{lo},{hi}) must satisfy 0 <= lo < hi <= {MAX_SCORE}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    #[inline]
    pub fn contains(&self, score: u32) -> bool {
        self.lo <= score && score < self.hi
    }

    pub fn overlaps(&self, other: &TierSpec) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

impl TryFrom<[u32; 2]> for TierSpec {
    type Error = Error;

    fn try_from([lo, hi]: [u32; 2]) -> Result<Self> {
        TierSpec::new(lo, hi)
    }
}

impl From<TierSpec> for [u32; 2] {
    fn from(t: TierSpec) -> Self {
        [t.lo, t.hi]
    }
}

impl fmt::Display for TierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InteractionRecord {
    pub compound_id: String,
    pub protein_id: String,
    pub score: u32,
}

impl InteractionRecord {
    pub fn new(compound_id: impl Into<String>, protein_id: impl Into<String>, score: u32) -> Self {
        Self {
            compound_id: compound_id.into(),
            protein_id: protein_id.into(),
            score,
        }
    }

    pub fn pair(&self) -> (String, String) {
        (self.compound_id.clone(), self.protein_id.clone())
    }
}

/// Positive records with confidence scores; each pair appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionTable {
    records: Vec<InteractionRecord>,
}

impl InteractionTable {
    pub fn new(records: Vec<InteractionRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            check_id(&r.compound_id).map_err(Error::Data)?;
            check_id(&r.protein_id).map_err(Error::Data)?;
            if r.score > MAX_SCORE {
                return Err(Error::Data(format!(
                    "score {} for ({}, {}) exceeds {MAX_SCORE}",
                    r.score, r.compound_id, r.protein_id
                )));
            }
            if !seen.insert((r.compound_id.as_str(), r.protein_id.as_str())) {
                return Err(Error::Data(format!(
                    "duplicate pair ({}, {})",
                    r.compound_id, r.protein_id
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pair_set(&self) -> PairSet {
        self.records.iter().map(InteractionRecord::pair).collect()
    }

    /// `compound_id<TAB>protein_id<TAB>score`, no header.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: PathBuf::from(path),
            line,
            message,
        };
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [c, p, s] = fields[..] else {
                return Err(err(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            };
            check_id(c).map_err(|m| err(lineno, m))?;
            check_id(p).map_err(|m| err(lineno, m))?;
            let score: u32 = s.parse().ok().filter(|&v| v <= MAX_SCORE).ok_or_else(|| {
                err(
                    lineno,
                    format!("score {s:?} is not an integer in 0..={MAX_SCORE}"),
                )
            })?;
            if !seen.insert((c.to_owned(), p.to_owned())) {
                return Err(err(lineno, format!("duplicate pair ({c}, {p})")));
            }
            records.push(InteractionRecord::new(c, p, score));
        }
        Ok(Self { records })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                r.compound_id, r.protein_id, r.score
            ));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_text(path)?, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.render())
    }
}

/// Records with `lo <= score < hi`, in their original order.
pub fn tier_filter(table: &InteractionTable, tier: TierSpec) -> InteractionTable {
    InteractionTable {
        records: table
            .records
            .iter()
            .filter(|r| tier.contains(r.score))
            .cloned()
            .collect(),
    }
}

/// Score cutoff for a percentile `p` in `[0, 100)`.
///
/// Returns the largest score `s` such that at least `(100 - p)%` of the
/// records score `>= s`. Under an ascending sort `a[0..n)` this is
/// `a[floor(p·n/100)]`, so `p = 0` yields the minimum.
pub fn percentile_cutoff(table: &InteractionTable, p: f64) -> Result<u32> {
    if !(0.0..100.0).contains(&p) {
        return Err(Error::Config(format!("percentile {p} outside [0, 100)")));
    }
    let n = table.len();
    if n == 0 {
        return Err(Error::Data("percentile of an empty table".into()));
    }
    let mut scores: Vec<u32> = table.records.iter().map(|r| r.score).collect();
    scores.sort_unstable();
    // Largest index i with (n - i)·100 >= (100 - p)·n; start from the closed
    // form and correct for float rounding.
    let need = (100.0 - p) * n as f64;
    let holds = |i: usize| ((n - i) as f64) * 100.0 >= need;
    let mut i = ((p * n as f64) / 100.0).floor().clamp(0.0, (n - 1) as f64) as usize;
    while i > 0 && !holds(i) {
        i -= 1;
    }
    while i + 1 < n && holds(i + 1) {
        i += 1;
    }
    Ok(scores[i])
}

/// A training or validation example: positives carry their score,
/// negatives carry none.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub compound_id: String,
    pub protein_id: String,
    positive: bool,
    score: Option<u32>,
}

impl LabeledPair {
    pub fn positive(
        compound_id: impl Into<String>,
        protein_id: impl Into<String>,
        score: u32,
    ) -> Self {
        Self {
            compound_id: compound_id.into(),
            protein_id: protein_id.into(),
            positive: true,
            score: Some(score),
        }
    }

    pub fn negative(compound_id: impl Into<String>, protein_id: impl Into<String>) -> Self {
        Self {
            compound_id: compound_id.into(),
            protein_id: protein_id.into(),
            positive: false,
            score: None,
        }
    }

    /// 1 for positives, 0 for negatives.
    pub fn label(&self) -> u8 {
        u8::from(self.positive)
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn score(&self) -> Option<u32> {
        self.score
    }

    pub fn pair(&self) -> (String, String) {
        (self.compound_id.clone(), self.protein_id.clone())
    }
}

impl From<&InteractionRecord> for LabeledPair {
    fn from(r: &InteractionRecord) -> Self {
        LabeledPair::positive(r.compound_id.clone(), r.protein_id.clone(), r.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(scores: &[u32]) -> InteractionTable {
        InteractionTable::new(
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| InteractionRecord::new(format!("c{i}"), "p", s))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn tier_membership() {
        let t = table(&[319, 389, 700, 900, 950]);
        let f = tier_filter(&t, TierSpec::new(700, 900).unwrap());
        assert_eq!(f.len(), 1);
        assert_eq!(f.records()[0].score, 700);
        assert_eq!(tier_filter(&t, TierSpec::new(0, 1000).unwrap()), t);
    }

    #[test]
    fn tier_validation() {
        assert!(TierSpec::new(5, 5).is_err());
        assert!(TierSpec::new(0, 1001).is_err());
        let t: TierSpec = serde_json::from_str("[700, 900]").unwrap();
        assert_eq!(t, TierSpec::new(700, 900).unwrap());
        assert!(serde_json::from_str::<TierSpec>("[900, 700]").is_err());
        assert_eq!(serde_json::to_string(&t).unwrap(), "[700,900]");
    }

    #[test]
    fn overlap() {
        let a = TierSpec::new(300, 700).unwrap();
        assert!(!a.overlaps(&TierSpec::new(700, 900).unwrap()));
        assert!(a.overlaps(&TierSpec::new(699, 900).unwrap()));
    }

    #[test]
    fn percentile_simple_cases() {
        assert_eq!(percentile_cutoff(&table(&[42]), 0.0).unwrap(), 42);
        let uniform: Vec<u32> = (1..=100).collect();
        // 50 records score >= 51, which is half the table.
        assert_eq!(percentile_cutoff(&table(&uniform), 50.0).unwrap(), 51);
        assert!(matches!(
            percentile_cutoff(&InteractionTable::default(), 10.0),
            Err(Error::Data(_))
        ));
        assert!(percentile_cutoff(&table(&[1]), 100.0).is_err());
    }

    #[test]
    fn duplicate_pairs_rejected() {
        let recs = vec![
            InteractionRecord::new("c", "p", 1),
            InteractionRecord::new("c", "p", 2),
        ];
        assert!(InteractionTable::new(recs).is_err());
        assert!(matches!(
            InteractionTable::parse("c\tp\t1\nc\tp\t2\n", Path::new("f")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(InteractionTable::parse("c\tp\n", Path::new("f")).is_err());
        assert!(InteractionTable::parse("c\tp\t1001\n", Path::new("f")).is_err());
        assert!(InteractionTable::parse("c\tp\tx\n", Path::new("f")).is_err());
    }

    #[test]
    fn negatives_have_no_score() {
        let n = LabeledPair::negative("c", "p");
        assert_eq!(n.label(), 0);
        assert_eq!(n.score(), None);
        let p = LabeledPair::positive("c", "p", 10);
        assert_eq!((p.label(), p.score()), (1, Some(10)));
    }

    proptest! {
        #[test]
        fn tsv_round_trip(scores in prop::collection::vec(0u32..=1000, 0..50)) {
            let t = table(&scores);
            let text = t.render();
            let back = InteractionTable::parse(&text, Path::new("mem")).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.render(), text);
        }
    }
}
