//! Canonical storage, harmonization, token-level evaluation, merging and
//! scrubbing of PHI annotations over clinical-note corpora.

pub mod corpus;
pub mod detach;
pub mod error;
pub mod evaluate;
pub mod harmonize;
pub mod ingest;
mod lexicon;
pub mod merge;
pub mod report;
pub mod scrub;
pub mod store;
pub mod synth;
pub mod tagger;
pub mod text;
pub mod tokenize;

pub use corpus::{Annotation, Corpus, Document, Gazetteer, Split, GOLD};
pub use detach::{detach_corpus, evaluate_detached, DetachedCorpus, DetachedDocument};
pub use error::{Error, Result};
pub use evaluate::{
    evaluate_corpus, evaluate_entities, evaluate_pair, label_tokens, ClassCounts, ConfusionCounts,
    EntityScores, EvalClass, EvalResult, Evaluator, Metrics, TokenLabeling,
};
pub use harmonize::{
    apply_scenario, apply_scenario_derived, builtin_label_map, AnnotationFlags, Category,
    Disposition, EvalMode, LabelMap, ScenarioConfig, UnknownPolicy,
};
pub use merge::{merge_annotations, MergeStrategy};
pub use report::render_report;
pub use scrub::{scrub_document, OffsetMapping, ScrubStyle, Scrubbed};
pub use store::{encode_component, read_corpus, write_corpus, write_corpus_as, StoreFormat};
pub use synth::{generate_corpus, TemplateSet};
pub use tagger::{builtin_profile, tag_corpus, tag_document, PatternRule, TaggerProfile};
pub use tokenize::{get_tokenizer, tokenize_whitespace, tokenize_wordpunct, Token, Tokenizer};
