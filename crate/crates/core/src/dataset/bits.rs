use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bitvec::prelude::*;
use indexmap::IndexMap;

use super::{check_id, read_text, write_text, LatentStore};
use crate::error::{Error, Result};

/// Fixed-width binary feature vectors keyed by entity id, in insertion order.
///
/// On disk: a `#width=<n>` header line, then `id<TAB><0/1 string>` per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVectorStore {
    width: usize,
    entries: IndexMap<String, BitVec<u64, Lsb0>>,
}

impl BitVectorStore {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            entries: IndexMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, bits: BitVec<u64, Lsb0>) -> Result<()> {
        let id = id.into();
        check_id(&id).map_err(Error::Data)?;
        if bits.len() != self.width {
            return Err(Error::shape(
                "BitVectorStore::insert",
                self.width,
                bits.len(),
            ));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::Data(format!("duplicate id {id}")));
        }
        self.entries.insert(id, bits);
        Ok(())
    }

    pub fn insert_bools(&mut self, id: impl Into<String>, bits: &[bool]) -> Result<()> {
        self.insert(id, bits.iter().copied().collect())
    }

    pub fn get(&self, id: &str) -> Option<&BitSlice<u64, Lsb0>> {
        self.entries.get(id).map(|b| b.as_bitslice())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BitSlice<u64, Lsb0>)> {
        self.entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_bitslice()))
    }

    /// Entry `index` (insertion order) written as 0.0/1.0 into `out`.
    pub fn fill_row(&self, index: usize, out: &mut [f64]) {
        let (_, bits) = self.entries.get_index(index).expect("index in range");
        for (o, b) in out.iter_mut().zip(bits.iter()) {
            *o = if *b { 1.0 } else { 0.0 };
        }
    }

    /// Bits as 0.0/1.0 features, for training directly on raw vectors.
    pub fn to_latent(&self) -> LatentStore {
        let mut store = LatentStore::new(self.width);
        let mut row = vec![0.0; self.width];
        for i in 0..self.len() {
            self.fill_row(i, &mut row);
            let id = self.entries.get_index(i).expect("index").0.clone();
            store
                .insert(id, row.clone())
                .expect("fresh ids, consistent width");
        }
        store
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: PathBuf::from(path),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| err(1, "missing #width header".into()))?;
        let width: usize = header
            .strip_prefix("#width=")
            .and_then(|w| w.trim().parse().ok())
            .ok_or_else(|| err(1, format!("expected `#width=<int>`, found {header:?}")))?;
        let mut store = Self::new(width);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let (id, bits) = line
                .split_once('\t')
                .ok_or_else(|| err(lineno, "expected `id<TAB>bits`".into()))?;
            check_id(id).map_err(|m| err(lineno, m))?;
            if bits.len() != width {
                return Err(err(
                    lineno,
                    format!("expected {width} bits, found {}", bits.len()),
                ));
            }
            let mut vec = BitVec::with_capacity(width);
            for c in bits.chars() {
                match c {
                    '0' => vec.push(false),
                    '1' => vec.push(true),
                    other => return Err(err(lineno, format!("invalid bit character {other:?}"))),
                }
            }
            if store.entries.contains_key(id) {
                return Err(err(lineno, format!("duplicate id {id}")));
            }
            store.entries.insert(id.to_owned(), vec);
        }
        Ok(store)
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.len() * (self.width + 16) + 16);
        writeln!(out, "#width={}", self.width).unwrap();
        for (id, bits) in &self.entries {
            out.push_str(id);
            out.push('\t');
            out.extend(bits.iter().map(|b| if *b { '1' } else { '0' }));
            out.push('\n');
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
