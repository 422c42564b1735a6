//! Toolkit for probing reasoning shortcuts in multi-hop QA corpora, generating
//! debiased and adversarial evaluation sets, and scoring predictions with
//! answer / supporting-sentence / evidence-triple metrics and their joint forms.

pub mod corpus;
pub mod runconfig;
pub mod seed;
pub mod text;
pub mod metrics;
pub mod probe;
pub mod debias;
pub mod adversarial;
pub mod taskprep;
pub mod synth;
pub mod verify;
pub mod cli;
