use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use super::{check_id, read_text, write_text};
use crate::error::{Error, Result};
use crate::format::{format_sig, LOSSLESS_DIGITS};

/// Real-valued feature vectors keyed by entity id. Persists as
/// `id<TAB>v1,v2,...` with 17-significant-digit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStore {
    dim: usize,
    entries: IndexMap<String, Vec<f64>>,
}

impl LatentStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        check_id(&id).map_err(Error::Data)?;
        if vector.len() != self.dim {
            return Err(Error::shape("LatentStore::insert", self.dim, vector.len()));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::Data(format!("duplicate id {id}")));
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses the TSV form. The dimension is taken from the first row
    /// (zero for an empty file).
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: PathBuf::from(path),
            line,
            message,
        };
        let mut store: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| err(lineno, "expected `id<TAB>v1,v2,...`".into()))?;
            check_id(id).map_err(|m| err(lineno, m))?;
            let vector = values
                .split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(lineno, format!("invalid value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let s = store.get_or_insert_with(|| Self::new(vector.len()));
            if vector.len() != s.dim {
                return Err(err(
                    lineno,
                    format!("expected {} values, found {}", s.dim, vector.len()),
                ));
            }
            if s.entries.contains_key(id) {
                return Err(err(lineno, format!("duplicate id {id}")));
            }
            s.entries.insert(id.to_owned(), vector);
        }
        Ok(store.unwrap_or_else(|| Self::new(0)))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.entries {
            out.push_str(id);
            out.push('\t');
            for (k, x) in v.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&format_sig(*x, LOSSLESS_DIGITS));
            }
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
