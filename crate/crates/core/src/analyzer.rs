//! Statistical indicator analysis: how often each of a problem's indicator
//! phrases occurs in a document's text.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::knowledge::{DocumentId, DocumentRecord, Indicator, ProblemDefinition, ProblemId};
use crate::metrics::{fraction_where, Scalar};

/// Lowercased alphanumeric runs of `text`, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorCount {
    pub indicator: Indicator,
    pub count: u64,
}

/// Counts and coverage of indicators over one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorAnalysis<T> {
    pub counts: Vec<IndicatorCount>,
    pub coverage: T,
    pub token_count: u64,
}

/// Indicator analysis of a document against a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport<T> {
    pub document: DocumentId,
    pub problem: ProblemId,
    pub counts: Vec<IndicatorCount>,
    pub coverage: T,
    pub token_count: u64,
}

impl<T: Scalar> IndicatorReport<T> {
    pub fn matched(&self) -> usize {
        self.counts.iter().filter(|c| c.count > 0).count()
    }
}

/// Counts, for every indicator, the overlapping occurrences of its tokenized
/// value as a contiguous run of the text's tokens.
///
/// Indicator attributes are labels and are not matched.
pub fn analyze<T: Scalar>(text: &str, indicators: &[Indicator]) -> IndicatorAnalysis<T> {
    let mut interner: HashMap<String, u32> = HashMap::new();
    let mut intern = |token: String| -> u32 {
        let next = interner.len() as u32;
        *interner.entry(token).or_insert(next)
    };
    let text_ids: Vec<u32> = tokenize(text).into_iter().map(&mut intern).collect();

    let counts: Vec<IndicatorCount> = indicators
        .iter()
        .map(|indicator| {
            let pattern: Vec<u32> = tokenize(&indicator.value).into_iter().map(&mut intern).collect();
            IndicatorCount { indicator: indicator.clone(), count: count_overlapping(&text_ids, &pattern) }
        })
        .collect();

    IndicatorAnalysis { coverage: fraction_where(&counts, |c| c.count > 0), counts, token_count: text_ids.len() as u64 }
}

/// Analyzes a document's fetched text against the problem's indicators.
pub fn analyze_document<T: Scalar>(doc: &DocumentRecord, problem: &ProblemDefinition) -> IndicatorReport<T> {
    let analysis = analyze(&doc.fetched_text, &problem.indicators);
    IndicatorReport {
        document: doc.id,
        problem: problem.id,
        counts: analysis.counts,
        coverage: analysis.coverage,
        token_count: analysis.token_count,
    }
}

/// Knuth-Morris-Pratt occurrence count, overlaps included. An empty
/// pattern occurs nowhere.
fn count_overlapping(text: &[u32], pattern: &[u32]) -> u64 {
    if pattern.is_empty() || pattern.len() > text.len() {
        return 0;
    }
    let mut failure = vec![0usize; pattern.len()];
    let mut k = 0;
    for i in 1..pattern.len() {
        while k > 0 && pattern[i] != pattern[k] {
            k = failure[k - 1];
        }
        if pattern[i] == pattern[k] {
            k += 1;
        }
        failure[i] = k;
    }

    let mut count = 0;
    let mut matched = 0;
    for &t in text {
        while matched > 0 && t != pattern[matched] {
            matched = failure[matched - 1];
        }
        if t == pattern[matched] {
            matched += 1;
        }
        if matched == pattern.len() {
            count += 1;
            matched = failure[matched - 1];
        }
    }
    count
}
