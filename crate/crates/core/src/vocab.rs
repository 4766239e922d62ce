//! Token vocabulary and the optional static embedding table.

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";

/// Token to row index map. Index 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    lowercase: bool,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I, lowercase: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocab {
            tokens: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
            lowercase,
        };
        for t in tokens {
            let t = v.normalize(t.as_ref());
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// Every token of the corpus, in order of first appearance.
    pub fn build(corpus: &[Sentence], lowercase: bool) -> Self {
        Vocab::from_tokens(corpus.iter().flat_map(|s| s.tokens.iter()), lowercase)
    }

    fn normalize(&self, token: &str) -> String {
        if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> usize {
        let found = if self.lowercase {
            self.index.get(&token.to_lowercase())
        } else {
            self.index.get(token)
        };
        found.copied().unwrap_or(0)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.get(t)).collect()
    }
}

/// Pretrained vectors read from `word v1 v2 ...` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddings {
    pub words: Vec<String>,
    pub dim: usize,
    /// Row-major `words.len() x dim`.
    pub values: Vec<f64>,
}

impl StaticEmbeddings {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut words = Vec::new();
        let mut values = Vec::new();
        let mut dim = 0;
        for (ln, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let row = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Corpus {
                    path: source.to_string(),
                    line: ln + 1,
                    message: format!("bad vector component: {e}"),
                })?;
            if dim == 0 {
                dim = row.len();
            }
            if row.is_empty() || row.len() != dim {
                return Err(Error::Corpus {
                    path: source.to_string(),
                    line: ln + 1,
                    message: format!("expected {dim} components, found {}", row.len()),
                });
            }
            words.push(word.to_string());
            values.extend(row);
        }
        if words.is_empty() {
            return Err(Error::Corpus {
                path: source.to_string(),
                line: 1,
                message: "no embeddings".into(),
            });
        }
        Ok(StaticEmbeddings { words, dim, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        StaticEmbeddings::parse(&text, &path.display().to_string())
    }

    /// Vocabulary over the file's words (plus the unknown token) and the
    /// matching matrix; the unknown row is the mean vector.
    pub fn table(&self, lowercase: bool) -> (Vocab, Vec<f64>) {
        let vocab = Vocab::from_tokens(&self.words, lowercase);
        let mut matrix = vec![0.0; vocab.len() * self.dim];
        let n = self.words.len() as f64;
        for row in self.values.chunks(self.dim) {
            for (m, v) in matrix[..self.dim].iter_mut().zip(row) {
                *m += v / n;
            }
        }
        for (w, row) in self.words.iter().zip(self.values.chunks(self.dim)).rev() {
            let i = vocab.get(w);
            if i != 0 {
                matrix[i * self.dim..(i + 1) * self.dim].copy_from_slice(row);
            }
        }
        (vocab, matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_tokens_fall_back_to_zero() {
        let v = Vocab::from_tokens(["a", "b", "a"], false);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get("a"), 1);
        assert_eq!(v.get("zzz"), 0);
        assert_eq!(v.token(0), UNK);
    }

    #[test]
    fn lowercasing_is_opt_in() {
        let v = Vocab::from_tokens(["The"], true);
        assert_eq!(v.get("tHe"), 1);
        let v = Vocab::from_tokens(["The"], false);
        assert_eq!(v.get("the"), 0);
    }

    #[test]
    fn static_file_table() {
        let e = StaticEmbeddings::parse("a 1 2\nb 3 4\n", "mem").unwrap();
        let (v, m) = e.table(false);
        assert_eq!(v.len(), 3);
        assert_eq!(m, vec![2.0, 3.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(StaticEmbeddings::parse("a 1 2\nb 3\n", "mem").is_err());
        assert!(StaticEmbeddings::parse("a 1 x\n", "mem").is_err());
    }
}
