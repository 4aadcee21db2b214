//! Risk scoring: a statistical classifier and a fuzzy rule base, fused into
//! one score and mapped to accept / monitor / reject.

pub mod classifier;
pub mod engine;
pub mod fusion;
pub mod fuzzy;

pub use classifier::{ClassifierConfig, LogisticClassifier, RiskModel};
pub use engine::{fuzzy_inputs, EngineConfig, RiskAssessment, RiskEngine, RuleTrace, FUZZY_INPUTS};
pub use fusion::{Decision, FusionConfig};
pub use fuzzy::{FuzzyEvaluation, FuzzyRule, FuzzyVariable, Label, MembershipFunction, RuleBase, RuleBaseFile};
