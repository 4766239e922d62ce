//! Greedy segmentation and parsing with a trained [`Model`].

use rstptr_autodiff::Tape;

use crate::corpus::{check_edu_ends, Sentence};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::{encode_batch, Encoded, Graph};
use crate::parser::{parse_greedy, ParseTrace};
use crate::segmenter::{segment_greedy, SegmentTrace};
use crate::tree::DiscourseTree;

/// Sentences encoded together on one tape during batch prediction.
const CHUNK: usize = 32;

/// Where the parser's EDUs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segmentation {
    Gold,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Segment,
    Parse(Segmentation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub edu_ends: Vec<usize>,
    pub tree: Option<DiscourseTree>,
    pub segment_trace: Option<SegmentTrace>,
    pub parse_trace: Option<ParseTrace>,
}

/// `E[k] = H[edu_ends[k]]` with 1-based token indices.
pub fn edu_representations(h: &[Vec<f64>], edu_ends: &[usize]) -> Result<Vec<Vec<f64>>> {
    edu_ends
        .iter()
        .map(|&e| {
            if e == 0 || e > h.len() {
                Err(Error::Sentence(format!(
                    "EDU end {e} outside 1..={}",
                    h.len()
                )))
            } else {
                Ok(h[e - 1].clone())
            }
        })
        .collect()
}

impl Model {
    fn encode_on(&self, tape: &mut Tape, sentences: &[&[String]]) -> Result<Encoded> {
        let ids: Vec<Vec<usize>> = sentences.iter().map(|s| self.vocab().encode(s)).collect();
        let mut g = Graph::new(tape, &self.store, &self.arch);
        encode_batch(&mut g, &ids)
    }

    /// Encoder states `H`, one `2 x hidden_size` vector per token.
    pub fn encode(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let enc = self.encode_on(&mut tape, &[tokens])?;
        Ok(enc
            .pack
            .rows_of(0)
            .map(|r| tape.row_values(enc.top, r).to_vec())
            .collect())
    }

    fn analyze_encoded(
        &self,
        tape: &mut Tape,
        enc: &Encoded,
        seq: usize,
        task: Task,
        gold_ends: Option<&[usize]>,
    ) -> Result<Analysis> {
        let mut g = Graph::new(tape, &self.store, &self.arch);
        let (edu_ends, segment_trace) = match (task, gold_ends) {
            (Task::Parse(Segmentation::Gold), Some(e)) => {
                check_edu_ends(e, enc.pack.length(seq))?;
                (e.to_vec(), None)
            }
            (Task::Parse(Segmentation::Gold), None) => {
                return Err(Error::Annotation(
                    "gold segmentation requested but not supplied".into(),
                ))
            }
            _ => {
                let (e, t) = segment_greedy(&mut g, enc, seq);
                (e, Some(t))
            }
        };
        let (tree, parse_trace) = match task {
            Task::Segment => (None, None),
            Task::Parse(_) => {
                let (t, tr) = parse_greedy(&mut g, enc, seq, &edu_ends)?;
                (Some(t), Some(tr))
            }
        };
        Ok(Analysis {
            edu_ends,
            tree,
            segment_trace,
            parse_trace,
        })
    }

    pub fn analyze(
        &self,
        tokens: &[String],
        task: Task,
        gold_ends: Option<&[usize]>,
    ) -> Result<Analysis> {
        let mut tape = Tape::new();
        let enc = self.encode_on(&mut tape, &[tokens])?;
        self.analyze_encoded(&mut tape, &enc, 0, task, gold_ends)
    }

    pub fn segment(&self, tokens: &[String]) -> Result<Vec<usize>> {
        Ok(self.analyze(tokens, Task::Segment, None)?.edu_ends)
    }

    /// Parse over the given segmentation.
    pub fn parse(&self, tokens: &[String], edu_ends: &[usize]) -> Result<DiscourseTree> {
        let a = self.analyze(tokens, Task::Parse(Segmentation::Gold), Some(edu_ends))?;
        Ok(a.tree.expect("parse result"))
    }

    pub fn parse_traced(
        &self,
        tokens: &[String],
        edu_ends: &[usize],
    ) -> Result<(DiscourseTree, ParseTrace)> {
        let a = self.analyze(tokens, Task::Parse(Segmentation::Gold), Some(edu_ends))?;
        Ok((
            a.tree.expect("parse result"),
            a.parse_trace.expect("parse trace"),
        ))
    }

    /// Segments, then parses the predicted EDUs.
    pub fn parse_end_to_end(&self, tokens: &[String]) -> Result<(Vec<usize>, DiscourseTree)> {
        let a = self.analyze(tokens, Task::Parse(Segmentation::Auto), None)?;
        Ok((a.edu_ends, a.tree.expect("parse result")))
    }

    fn predict_chunk(&self, sentences: &[Sentence], task: Task) -> Result<Vec<Analysis>> {
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in sentences.chunks(CHUNK) {
            let mut tape = Tape::new();
            let toks: Vec<&[String]> = chunk.iter().map(|s| s.tokens.as_slice()).collect();
            let enc = self.encode_on(&mut tape, &toks)?;
            for (i, s) in chunk.iter().enumerate() {
                out.push(self.analyze_encoded(&mut tape, &enc, i, task, Some(&s.edu_ends))?);
            }
        }
        Ok(out)
    }

    /// Runs `task` over a corpus, splitting it over `threads` workers.
    pub fn predict(
        &self,
        sentences: &[Sentence],
        task: Task,
        threads: usize,
    ) -> Result<Vec<Analysis>> {
        let threads = threads.max(1).min(sentences.len().max(1));
        if threads == 1 {
            return self.predict_chunk(sentences, task);
        }
        let per = sentences.len().div_ceil(threads);
        let parts: Vec<Result<Vec<Analysis>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = sentences
                .chunks(per)
                .map(|part| scope.spawn(move || self.predict_chunk(part, task)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("prediction worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(sentences.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Predicted records in corpus form: tokens, EDUs and (for parsing) the tree.
    pub fn predict_sentences(
        &self,
        sentences: &[Sentence],
        task: Task,
        threads: usize,
    ) -> Result<Vec<Sentence>> {
        let analyses = self.predict(sentences, task, threads)?;
        Ok(sentences
            .iter()
            .zip(analyses)
            .map(|(s, a)| Sentence {
                tokens: s.tokens.clone(),
                edu_ends: a.edu_ends,
                gold_tree: a.tree,
            })
            .collect())
    }
}

/// End-to-end analysis with separately trained models: `segmenter` supplies
/// the EDUs that `parser` builds trees over.
pub fn predict_pipeline(
    segmenter: &Model,
    parser: &Model,
    sentences: &[Sentence],
    threads: usize,
) -> Result<Vec<Analysis>> {
    let segs = segmenter.predict(sentences, Task::Segment, threads)?;
    let segmented: Vec<Sentence> = sentences
        .iter()
        .zip(&segs)
        .map(|(s, a)| Sentence {
            tokens: s.tokens.clone(),
            edu_ends: a.edu_ends.clone(),
            gold_tree: None,
        })
        .collect();
    let mut out = parser.predict(&segmented, Task::Parse(Segmentation::Gold), threads)?;
    for (a, s) in out.iter_mut().zip(segs) {
        a.segment_trace = s.segment_trace;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edu_representation_selection() {
        let h: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
        let e = edu_representations(&h, &[2, 4, 6, 8, 9, 10]).unwrap();
        let expect: Vec<Vec<f64>> = [2, 4, 6, 8, 9, 10]
            .iter()
            .map(|&i| h[i - 1].clone())
            .collect();
        assert_eq!(e, expect);
        assert_eq!(edu_representations(&h, &[10]).unwrap(), vec![h[9].clone()]);
        assert!(edu_representations(&h, &[11]).is_err());
        assert!(edu_representations(&h, &[0]).is_err());
    }
}
