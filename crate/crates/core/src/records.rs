use std::borrow::Cow;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Optional per-record identifiers and class labels shared by embedding
/// sets and code indexes.
///
/// When no ids are stored, a record's id is its decimal row position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordMeta {
    ids: Option<Vec<String>>,
    labels: Option<Vec<String>>,
}

impl RecordMeta {
    pub fn new(n: usize, ids: Option<Vec<String>>, labels: Option<Vec<String>>) -> Result<Self> {
        for (what, seq) in [("ids", &ids), ("labels", &labels)] {
            if let Some(seq) = seq {
                if seq.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} {what} given for {n} records",
                        seq.len()
                    )));
                }
            }
        }
        Ok(Self { ids, labels })
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn id(&self, i: usize) -> Cow<'_, str> {
        match &self.ids {
            Some(ids) => Cow::Borrowed(ids[i].as_str()),
            None => Cow::Owned(i.to_string()),
        }
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    /// Builds an id → position lookup for `n` records.
    pub fn lookup(&self, n: usize) -> HashMap<String, usize> {
        (0..n).map(|i| (self.id(i).into_owned(), i)).collect()
    }

    pub(crate) fn select(&self, rows: &[usize]) -> RecordMeta {
        let pick = |seq: &Option<Vec<String>>| seq.as_ref().map(|s| rows.iter().map(|&r| s[r].clone()).collect());
        RecordMeta {
            ids: pick(&self.ids),
            labels: pick(&self.labels),
        }
    }
}
