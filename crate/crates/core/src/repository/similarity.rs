//! Problem-to-problem similarity, repository search and collaborator
//! recommendation.
//!
//! The similarity of two problems blends four components:
//!
//! * keywords: Jaccard over case-folded keyword sets
//! * domains: Jaccard over case-folded domain sets
//! * indicators: Jaccard over case-folded `attribute:value` pairs
//! * text: cosine of term-frequency vectors over statement and objective
//!
//! A component whose inputs are both empty scores zero.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::tokenize;
use crate::knowledge::{ProblemDefinition, UserId};
use crate::metrics::{jaccard, Scalar, TermVector};

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum WeightsError {
    #[error("similarity weights must be non-negative and sum to 1 (got sum {0})")]
    BadSum(f64),
    #[error("similarity threshold must lie in [0, 1] (got {0})")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights<T> {
    pub keywords: T,
    pub domains: T,
    pub indicators: T,
    pub text: T,
}

impl<T: Scalar> SimilarityWeights<T> {
    pub fn new(keywords: T, domains: T, indicators: T, text: T) -> Result<Self, WeightsError> {
        let weights = Self { keywords, domains, indicators, text };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let parts = [self.keywords, self.domains, self.indicators, self.text];
        let sum: f64 = parts.iter().map(|w| w.to_f64().unwrap_or(f64::NAN)).sum();
        let non_negative = parts.iter().all(|w| *w >= T::zero());
        if non_negative && (sum - 1.0).abs() <= T::SUM_TOLERANCE {
            Ok(())
        } else {
            Err(WeightsError::BadSum(sum))
        }
    }
}

impl<T: Scalar> Default for SimilarityWeights<T> {
    fn default() -> Self {
        Self {
            keywords: T::from_f64_lossy(0.4),
            domains: T::from_f64_lossy(0.2),
            indicators: T::from_f64_lossy(0.2),
            text: T::from_f64_lossy(0.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParts<T> {
    pub keywords: T,
    pub domains: T,
    pub indicators: T,
    pub text: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore<T> {
    pub value: T,
    pub parts: SimilarityParts<T>,
}

fn folded<'a>(items: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
    items.into_iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect()
}

fn indicator_pairs(problem: &ProblemDefinition) -> BTreeSet<String> {
    problem
        .indicators
        .iter()
        .map(|i| format!("{}:{}", i.attribute.trim().to_lowercase(), i.value.trim().to_lowercase()))
        .collect()
}

fn describing_terms(problem: &ProblemDefinition) -> TermVector<String> {
    tokenize(&format!("{} {}", problem.statement, problem.objective)).into_iter().collect()
}

fn clamp_unit<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        T::zero()
    } else if x > T::one() {
        T::one()
    } else {
        x
    }
}

/// Symmetric similarity in `[0, 1]`.
pub fn problem_similarity<T: Float + Scalar>(
    a: &ProblemDefinition,
    b: &ProblemDefinition,
    weights: &SimilarityWeights<T>,
) -> SimilarityScore<T> {
    let parts = SimilarityParts {
        keywords: jaccard(&folded(&a.keywords), &folded(&b.keywords)),
        domains: jaccard(&folded(&a.domains), &folded(&b.domains)),
        indicators: jaccard(&indicator_pairs(a), &indicator_pairs(b)),
        text: describing_terms(a).cosine(&describing_terms(b)),
    };
    let value = weights.keywords * parts.keywords
        + weights.domains * parts.domains
        + weights.indicators * parts.indicators
        + weights.text * parts.text;
    SimilarityScore { value: clamp_unit(value), parts }
}

/// Term vector a stored problem is searched by: statement, objective and
/// keywords.
pub fn searchable_terms(problem: &ProblemDefinition) -> TermVector<String> {
    let mut text = format!("{} {}", problem.statement, problem.objective);
    for keyword in &problem.keywords {
        text.push(' ');
        text.push_str(keyword);
    }
    tokenize(&text).into_iter().collect()
}

/// Ranks `problems` against a free-text query by term-frequency cosine.
///
/// Only positive scores are returned, best first; ties go to the most
/// recently modified problem, then to the smaller id.
pub fn search<'a, T: Float + Scalar>(
    problems: impl IntoIterator<Item = &'a ProblemDefinition>,
    query: &str,
    limit: usize,
) -> Vec<(&'a ProblemDefinition, T)> {
    let query: TermVector<String> = tokenize(query).into_iter().collect();
    if query.is_empty() || limit == 0 {
        return Vec::new();
    }
    let mut hits: Vec<(&ProblemDefinition, T)> = problems
        .into_iter()
        .map(|p| (p, query.cosine::<T>(&searchable_terms(p))))
        .filter(|(_, score)| *score > T::zero())
        .collect();
    hits.sort_by(|(pa, sa), (pb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then_with(|| pb.timestamp.cmp(&pa.timestamp))
            .then_with(|| pa.id.cmp(&pb.id))
    });
    hits.truncate(limit);
    hits
}

/// A stored problem together with everyone who worked in its workspace.
#[derive(Debug, Clone, Copy)]
pub struct PastProblem<'a> {
    pub problem: &'a ProblemDefinition,
    pub participants: &'a BTreeSet<UserId>,
}

/// Users who worked on problems similar to `current`.
///
/// Each past problem with similarity at least `threshold` credits its
/// similarity to all of its participants; a user's affinity is the best
/// credit received. Users in `exclude` are skipped. Best first, ties by
/// user id.
pub fn recommend<'a, T: Float + Scalar>(
    current: &ProblemDefinition,
    exclude: &BTreeSet<UserId>,
    past: impl IntoIterator<Item = PastProblem<'a>>,
    weights: &SimilarityWeights<T>,
    threshold: T,
    k: usize,
) -> Vec<(UserId, T)> {
    let mut affinity: BTreeMap<&UserId, T> = BTreeMap::new();
    for candidate in past {
        if candidate.problem.id == current.id {
            continue;
        }
        let s = problem_similarity(current, candidate.problem, weights).value;
        if s < threshold {
            continue;
        }
        for user in candidate.participants.iter().filter(|u| !exclude.contains(*u)) {
            let slot = affinity.entry(user).or_insert(s);
            if s > *slot {
                *slot = s;
            }
        }
    }
    let mut ranked: Vec<(UserId, T)> = affinity.into_iter().map(|(u, s)| (u.clone(), s)).collect();
    ranked.sort_by(|(ua, sa), (ub, sb)| sb.partial_cmp(sa).unwrap_or(Ordering::Equal).then_with(|| ua.cmp(ub)));
    ranked.truncate(k);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Indicator;
    use chrono::Utc;
    use num_rational::Ratio;

    fn problem(statement: &str, keywords: &[&str]) -> ProblemDefinition {
        let mut p = ProblemDefinition::new(statement, "", Utc::now()).unwrap();
        for k in keywords {
            p.add_keyword(k);
        }
        p
    }

    #[test]
    fn default_weights_validate() {
        assert!(SimilarityWeights::<f64>::default().validate().is_ok());
        assert!(SimilarityWeights::<f32>::default().validate().is_ok());
        assert!(SimilarityWeights::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(SimilarityWeights::new(1.2, -0.2, 0.0, 0.0).is_err());
        let exact = SimilarityWeights::<Ratio<i64>>::default();
        assert_eq!(exact.keywords, Ratio::new(2, 5));
        assert!(exact.validate().is_ok());
    }

    #[test]
    fn self_similarity_is_one() {
        let mut p = problem("cassava plantation in West Africa", &["cassava", "export"]);
        p.domains.insert("agriculture".into());
        p.indicators.push(Indicator::new("crop", "cassava").unwrap());
        let s = problem_similarity(&p, &p, &SimilarityWeights::<f64>::default());
        assert!((s.value - 1.0).abs() < 1e-12, "{s:?}");
        assert_eq!(s.parts.text, 1.0);
    }

    #[test]
    fn disjoint_problems_score_zero() {
        let mut p = problem("alpha beta", &["a"]);
        p.domains.insert("x".into());
        let mut q = problem("gamma delta", &["b"]);
        q.domains.insert("y".into());
        assert_eq!(problem_similarity(&p, &q, &SimilarityWeights::<f64>::default()).value, 0.0);
    }

    #[test]
    fn keyword_overlap_half() {
        // Statements share no vocabulary, so only the keyword part contributes.
        let p = problem("alpha", &["cassava", "export"]);
        let q = problem("omega", &["cassava"]);
        let s = problem_similarity(&p, &q, &SimilarityWeights::<f64>::default());
        assert_eq!(s.parts.keywords, 0.5);
        assert_eq!((s.parts.domains, s.parts.indicators, s.parts.text), (0.0, 0.0, 0.0));
        assert!((s.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn keywords_compare_case_insensitively() {
        let p = problem("alpha", &["Cassava"]);
        let q = problem("omega", &["cassava"]);
        assert_eq!(problem_similarity(&p, &q, &SimilarityWeights::<f64>::default()).parts.keywords, 1.0);
    }

    #[test]
    fn empty_query_finds_nothing() {
        let p = problem("cassava", &[]);
        assert!(search::<f64>([&p], "", 5).is_empty());
        assert!(search::<f64>([&p], "?!", 5).is_empty());
    }

    #[test]
    fn recommend_excludes_current_participants() {
        let mut current = problem("cassava export", &["cassava"]);
        current.domains.insert("agriculture".into());
        current.indicators.push(Indicator::new("crop", "cassava").unwrap());
        let mut past = current.clone();
        past.id = crate::knowledge::ProblemId::new();
        let participants: BTreeSet<UserId> = ["u1", "u2"].iter().map(|s| s.parse().unwrap()).collect();
        let exclude: BTreeSet<UserId> = ["u1"].iter().map(|s| s.parse().unwrap()).collect();
        let out = recommend(
            &current,
            &exclude,
            [PastProblem { problem: &past, participants: &participants }],
            &SimilarityWeights::<f64>::default(),
            0.2,
            5,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0.as_str(), "u2");
        assert!((out[0].1 - 1.0).abs() < 1e-12);
    }
}
