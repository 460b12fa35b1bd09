//! Cited question answering with per-aspect critics and an iterative
//! feedback loop.
//!
//! An answer is a list of sentences, each carrying inline `[k]` citations of
//! retrieved documents. Three critics score an answer for fluency,
//! correctness and citation quality; their clipped rewards are mapped to
//! templated feedback, and a generator refines its previous answer from that
//! feedback for a fixed number of rounds.
//!
//! Modules, bottom up:
//!
//! * [`answer`]: documents, questions and the cited-answer parser/renderer.
//! * [`corpus`]: prompts and negative-answer synthesis for critic training.
//! * [`critic`]: features, the linear scorer, ranking loss and trainer.
//! * [`metrics`]: EM recall, citation recall/precision and MAUVE.
//! * [`feedback`]: reward bands, feedback texts and the refinement prompt.
//! * [`ifl`]: the generate, score, feedback, refine loop and its reports.
//! * [`gateway`]: chat and embedding clients plus offline mocks.
//! * [`synthetic`]: a deterministic toy corpus for offline runs.

pub mod answer;
pub mod corpus;
pub mod critic;
pub mod feedback;
pub mod gateway;
pub mod ifl;
pub mod jsonl;
pub mod metrics;
pub mod synthetic;
pub mod text;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic stream `stream` of the generator seeded by `seed`.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/answers.md")]
    mod answers {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/critic.md")]
    mod critic {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
