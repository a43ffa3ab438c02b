//! Line-delimited token vocabulary: line number = token id.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CoreError, CoreResult};

#[derive(Debug, Clone, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>) -> CoreResult<Self> {
        let mut index = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(CoreError::InvalidArgument(format!(
                    "vocab entry {i} is empty"
                )));
            }
            if index.insert(tok.clone(), i).is_some() {
                return Err(CoreError::InvalidArgument(format!(
                    "duplicate vocab entry {tok:?}"
                )));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> CoreResult<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(CoreError::TokenOutOfRange {
                token: id,
                vocab: self.tokens.len(),
            })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn load(path: impl AsRef<Path>) -> CoreResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::new(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> CoreResult<()> {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_both_ways() {
        let v = Vocab::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.token(0).unwrap(), "a");
        assert!(v.token(2).is_err());
        assert_eq!(v.id("missing"), None);
    }

    #[test]
    fn file_round_trip_and_duplicate_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        let v = Vocab::new(vec!["x".into(), "y".into(), "z".into()]).unwrap();
        v.save(&p).unwrap();
        let loaded = Vocab::load(&p).unwrap();
        assert_eq!(loaded.tokens(), v.tokens());
        assert!(Vocab::new(vec!["x".into(), "x".into()]).is_err());
    }
}
