//! Sentence records and the blank-line separated corpus format:
//!
//! ```text
//! TOKENS<TAB>tok1<TAB>tok2...
//! EDUS<TAB>e1 e2 ... ek
//! TREE<TAB>(NS Elaboration [1] [2])
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::relations::RelationInventory;
use crate::tree::{parse_tree_with, validate_tree, DiscourseTree, ParseOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    /// 1-based indices of EDU-final tokens; the last one is the token count.
    pub edu_ends: Vec<usize>,
    pub gold_tree: Option<DiscourseTree>,
}

impl Sentence {
    pub fn new(
        tokens: Vec<String>,
        edu_ends: Vec<usize>,
        gold_tree: Option<DiscourseTree>,
    ) -> Result<Self> {
        let s = Sentence {
            tokens,
            edu_ends,
            gold_tree,
        };
        s.check()?;
        Ok(s)
    }

    /// Sentence treated as a single EDU, without a tree.
    pub fn unsegmented(tokens: Vec<String>) -> Result<Self> {
        let n = tokens.len();
        Sentence::new(tokens, vec![n], None)
    }

    pub fn check(&self) -> Result<()> {
        check_edu_ends(&self.edu_ends, self.tokens.len())?;
        if let Some(tree) = &self.gold_tree {
            let violations = validate_tree(tree, self.edu_ends.len());
            if let Some(v) = violations.first() {
                return Err(Error::Sentence(format!("gold tree: {v}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn edu_count(&self) -> usize {
        self.edu_ends.len()
    }

    /// Inclusive 1-based token range of EDU `k` (1-based).
    pub fn edu_token_range(&self, k: usize) -> (usize, usize) {
        edu_token_range(&self.edu_ends, k)
    }

    pub fn edu_tokens(&self, k: usize) -> &[String] {
        let (a, b) = self.edu_token_range(k);
        &self.tokens[a - 1..b]
    }
}

pub(crate) fn edu_token_range(edu_ends: &[usize], k: usize) -> (usize, usize) {
    let start = if k == 1 { 1 } else { edu_ends[k - 2] + 1 };
    (start, edu_ends[k - 1])
}

pub fn check_edu_ends(edu_ends: &[usize], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Sentence("no tokens".into()));
    }
    if edu_ends.last() != Some(&n) {
        return Err(Error::Sentence(format!(
            "last EDU end {:?} must equal token count {n}",
            edu_ends.last()
        )));
    }
    let mut prev = 0;
    for &e in edu_ends {
        if e <= prev {
            return Err(Error::Sentence(format!(
                "EDU ends {edu_ends:?} not strictly increasing from 1"
            )));
        }
        prev = e;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct CorpusOptions {
    pub inventory: RelationInventory,
    pub binarize: bool,
}

/// Parses corpus text; `source` names the input in error messages.
pub fn parse_corpus(text: &str, source: &str, options: &CorpusOptions) -> Result<Vec<Sentence>> {
    let err = |line: usize, message: String| Error::Corpus {
        path: source.to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    loop {
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        let Some((ln, line)) = lines.next() else {
            break;
        };
        let start_line = ln + 1;
        let tokens: Vec<String> = match line.strip_prefix("TOKENS\t") {
            Some(rest) => rest.split('\t').map(str::to_string).collect(),
            None if line == "TOKENS" => Vec::new(),
            None => return Err(err(start_line, "expected a TOKENS line".into())),
        };
        if tokens.is_empty() || tokens.iter().any(|t| t.is_empty()) {
            return Err(err(start_line, "empty token".into()));
        }
        let Some((ln, line)) = lines.next() else {
            return Err(err(start_line + 1, "missing EDUS line".into()));
        };
        let Some(rest) = line.strip_prefix("EDUS\t") else {
            return Err(err(ln + 1, "expected an EDUS line".into()));
        };
        let edu_ends = rest
            .split_whitespace()
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(ln + 1, format!("bad EDU index: {e}")))?;
        check_edu_ends(&edu_ends, tokens.len()).map_err(|e| err(ln + 1, e.to_string()))?;
        let mut tree = None;
        if let Some(&(ln, line)) = lines.peek() {
            if let Some(rest) = line.strip_prefix("TREE\t") {
                lines.next();
                let t = parse_tree_with(
                    rest,
                    &options.inventory,
                    ParseOptions {
                        binarize: options.binarize,
                    },
                )
                .map_err(|e| err(ln + 1, e.to_string()))?;
                let m = edu_ends.len();
                if let Some(v) = validate_tree(&t, m).first() {
                    return Err(err(ln + 1, format!("tree does not fit {m} EDUs: {v}")));
                }
                tree = Some(t);
            } else if !line.trim().is_empty() {
                return Err(err(ln + 1, "expected a TREE line or a blank line".into()));
            }
        }
        out.push(Sentence {
            tokens,
            edu_ends,
            gold_tree: tree,
        });
    }
    Ok(out)
}

pub fn read_corpus(path: &Path, options: &CorpusOptions) -> Result<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, &path.display().to_string(), options)
}

pub fn format_sentence(s: &Sentence, out: &mut String) {
    out.push_str("TOKENS");
    for t in &s.tokens {
        out.push('\t');
        out.push_str(t);
    }
    out.push_str("\nEDUS\t");
    let ends: Vec<String> = s.edu_ends.iter().map(usize::to_string).collect();
    out.push_str(&ends.join(" "));
    out.push('\n');
    if let Some(t) = &s.gold_tree {
        let _ = writeln!(out, "TREE\t{t}");
    }
}

pub fn format_corpus(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        format_sentence(s, &mut out);
    }
    out
}

pub fn write_corpus(path: &Path, sentences: &[Sentence]) -> Result<()> {
    std::fs::write(path, format_corpus(sentences)).map_err(|e| Error::io(path, e))
}
