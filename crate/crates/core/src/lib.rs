//! Collaborative information retrieval core.
//!
//! Users share an information problem, clarify and decompose it, search and
//! read documents together, and every action is captured as an
//! [`ActivityEvent`](knowledge::ActivityEvent) classified by the
//! knowledge-conversion process it facilitates. Captured problems feed
//! repository search and collaborator recommendation.
//!
//! Score arithmetic is generic over [`metrics::Scalar`]; the aliases below
//! fix the `f64` instantiation used by the service.

pub mod analyzer;
pub mod fetcher;
pub mod knowledge;
pub mod metrics;
pub mod repository;
pub mod session;

pub use knowledge::{
    classify_activity, ActivityEvent, ActivityKind, AnnotationKind, AnnotationRecord, DocumentId, DocumentRecord,
    EntityRef, EventPayload, Indicator, InformationSource, KnowledgeError, KnowledgeProcess, ProblemDefinition,
    ProblemId, ProblemPatch, UserId, WorkspaceId,
};

pub type IndicatorReport = analyzer::IndicatorReport<f64>;
pub type IndicatorAnalysis = analyzer::IndicatorAnalysis<f64>;
pub type SimilarityScore = repository::similarity::SimilarityScore<f64>;
pub type SimilarityWeights = repository::similarity::SimilarityWeights<f64>;
