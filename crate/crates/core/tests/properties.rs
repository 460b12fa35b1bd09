use std::collections::{BTreeSet, HashSet};

use ifl_core::answer::{
    parse_cited_answer, render_cited_answer, strip_citations, CitedAnswer, Document, DocumentSet, Sentence,
};
use ifl_core::corpus::{build_deterministic, Aspect, CritiqueExample};
use ifl_core::critic::{
    clip_reward, extract_features, loss_gradient, pairwise_ranking_loss, train_critic, AnswerContext, CriticParams,
    RewardScore, TrainConfig, FEATURE_DIM,
};
use ifl_core::feedback::{classify_reward_band, Band, BandThresholds};
use ifl_core::metrics::{citation_scores, em_recall, mauve_from_embeddings, LexicalJudge, MauveConfig};
use ifl_core::synthetic::synthetic_corpus;
use proptest::prelude::*;
use std::sync::LazyLock;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{2,8}".prop_filter("abbreviation suffix", |w| !w.ends_with("etc"))
}

fn sentence() -> impl Strategy<Value = Sentence> {
    (
        prop::collection::vec(word(), 1..6),
        prop::sample::select(vec![".", "?", "!"]),
        prop::collection::btree_set(1u32..12, 0..4),
    )
        .prop_map(|(words, end, cites)| Sentence::new(format!("{}{end}", words.join(" ")), cites))
}

fn answer() -> impl Strategy<Value = CitedAnswer> {
    prop::collection::vec(sentence(), 0..5).prop_map(CitedAnswer::new)
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(a in answer()) {
        prop_assert_eq!(parse_cited_answer(&render_cited_answer(&a)), a);
    }

    #[test]
    fn strip_is_idempotent(a in answer(), noise in "[a-z \\[\\]0-9.]{0,40}") {
        let raw = format!("{} {noise}", render_cited_answer(&a));
        let once = strip_citations(&raw);
        prop_assert_eq!(strip_citations(&once), once.clone());
    }
}

fn naive_loss(pos: &[f64], neg: &[f64]) -> f64 {
    pos.iter()
        .flat_map(|p| neg.iter().map(move |n| (1.0 + (n - p).exp()).ln()))
        .sum()
}

proptest! {
    #[test]
    fn loss_of_equal_scores_is_pairs_times_ln2(x in -50.0f64..50.0, np in 1usize..4, nn in 1usize..5) {
        let l = pairwise_ranking_loss(&vec![x; np], &vec![x; nn]).unwrap();
        let expected = (np * nn) as f64 * std::f64::consts::LN_2;
        prop_assert!((l - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn loss_is_nonnegative_and_matches_naive_sum(
        pos in prop::collection::vec(-20.0f64..20.0, 1..4),
        neg in prop::collection::vec(-20.0f64..20.0, 1..4),
    ) {
        let l = pairwise_ranking_loss(&pos, &neg).unwrap();
        prop_assert!(l >= 0.0);
        let naive = naive_loss(&pos, &neg);
        prop_assert!((l - naive).abs() <= 1e-10 * naive.max(1.0));
    }

    #[test]
    fn loss_decreases_as_positive_rises(p in -10.0f64..10.0, n in -10.0f64..10.0, d in 0.01f64..5.0) {
        let lower = pairwise_ranking_loss(&[p], &[n]).unwrap();
        let higher = pairwise_ranking_loss(&[p + d], &[n]).unwrap();
        prop_assert!(higher < lower);
    }

    #[test]
    fn loss_is_stable_for_large_gaps(gap in 40.0f64..1e6) {
        let l = pairwise_ranking_loss(&[0.0], &[gap]).unwrap();
        prop_assert!(l.is_finite());
        prop_assert!((l - gap).abs() <= 1e-9 * gap);
    }
}

static EXAMPLES: LazyLock<Vec<CritiqueExample>> =
    LazyLock::new(|| build_deterministic(&synthetic_corpus(40, 3), 3).unwrap());

fn example_loss(params: &CriticParams, ex: &CritiqueExample) -> f64 {
    let score = |a: &CitedAnswer| {
        let ctx = AnswerContext::new(ex.question.clone(), ex.docs.clone(), a.clone());
        params.head(ex.aspect).raw(&extract_features(&ctx, ex.aspect))
    };
    let pos = [score(&ex.positive)];
    let neg: Vec<f64> = ex.negatives.iter().map(score).collect();
    pairwise_ranking_loss(&pos, &neg).unwrap()
}

fn random_params(values: &[f64]) -> CriticParams {
    let mut p = CriticParams::default();
    for (a, aspect) in Aspect::ALL.into_iter().enumerate() {
        let head = p.head_mut(aspect);
        head.weights.copy_from_slice(&values[a * 9..a * 9 + FEATURE_DIM]);
        head.bias = values[a * 9 + FEATURE_DIM];
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(
        idx in 0usize..120,
        values in prop::collection::vec(-1.5f64..1.5, 27),
    ) {
        let ex = &EXAMPLES[idx % EXAMPLES.len()];
        let params = random_params(&values);
        let grad = loss_gradient(&params, ex);
        let h = 1e-5;
        for aspect in Aspect::ALL {
            for j in 0..=FEATURE_DIM {
                let get = |p: &CriticParams| if j < FEATURE_DIM { p.head(aspect).weights[j] } else { p.head(aspect).bias };
                let mut plus = params;
                let mut minus = params;
                let set = |p: &mut CriticParams, v: f64| {
                    if j < FEATURE_DIM { p.head_mut(aspect).weights[j] = v } else { p.head_mut(aspect).bias = v }
                };
                set(&mut plus, get(&params) + h);
                set(&mut minus, get(&params) - h);
                let fd = (example_loss(&plus, ex) - example_loss(&minus, ex)) / (2.0 * h);
                let analytic = get(&grad);
                let tol = 1e-4 * analytic.abs().max(fd.abs()).max(1e-3);
                prop_assert!((fd - analytic).abs() <= tol, "{aspect:?}[{j}]: fd {fd} analytic {analytic}");
            }
        }
    }
}

proptest! {
    #[test]
    fn clipping_is_idempotent_and_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        prop_assert_eq!(clip_reward(clip_reward(a)), clip_reward(a));
        prop_assert!((-2.0..=2.0).contains(&clip_reward(a)));
        if a <= b {
            prop_assert!(clip_reward(a) <= clip_reward(b));
        }
    }

    #[test]
    fn bands_are_monotone_in_reward(a in -5.0f64..5.0, b in -5.0f64..5.0, asp in 0usize..3) {
        let aspect = Aspect::ALL[asp];
        let t = BandThresholds::default();
        let rank = |x: f64| match classify_reward_band(&RewardScore::new(aspect, x), &t) {
            Band::Corrective => 0,
            Band::Improve => 1,
            Band::Praise => 2,
        };
        if a <= b {
            prop_assert!(rank(a) <= rank(b));
        }
        let clipped = RewardScore::new(aspect, clip_reward(a));
        prop_assert_eq!(
            classify_reward_band(&clipped, &t),
            classify_reward_band(&RewardScore::new(aspect, a), &t)
        );
    }
}

const VOCAB: [&str; 6] = ["amber", "birch", "cobalt", "dune", "ember", "fjord"];
const DOCS: u32 = 4;

fn doc_words() -> impl Strategy<Value = Vec<BTreeSet<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0usize..VOCAB.len(), 1..4), DOCS as usize)
}

fn claim() -> impl Strategy<Value = (BTreeSet<usize>, BTreeSet<u32>)> {
    (
        prop::collection::btree_set(0usize..VOCAB.len(), 1..3),
        prop::collection::btree_set(1u32..=DOCS + 1, 0..=3),
    )
}

fn sentence_text(words: &BTreeSet<usize>) -> String {
    let w: Vec<&str> = words.iter().map(|&i| VOCAB[i]).collect();
    format!("{}.", w.join(" "))
}

/// Supported iff every claim word occurs in one of the cited documents.
fn oracle_entails(docs: &[BTreeSet<usize>], cited: &BTreeSet<u32>, words: &BTreeSet<usize>) -> bool {
    let union: HashSet<usize> = cited
        .iter()
        .filter(|&&c| (1..=DOCS).contains(&c))
        .flat_map(|&c| docs[c as usize - 1].iter().copied())
        .collect();
    words.iter().all(|w| union.contains(w))
}

fn oracle_scores(docs: &[BTreeSet<usize>], claims: &[(BTreeSet<usize>, BTreeSet<u32>)]) -> (f64, f64) {
    let mut recalled = 0;
    let mut relevant = 0;
    let mut total = 0;
    for (words, cited) in claims {
        total += cited.len();
        if cited.is_empty() || !oracle_entails(docs, cited, words) {
            continue;
        }
        recalled += 1;
        for c in cited {
            let alone = BTreeSet::from([*c]);
            let rest: BTreeSet<u32> = cited.iter().copied().filter(|x| x != c).collect();
            let irrelevant =
                !oracle_entails(docs, &alone, words) && !rest.is_empty() && oracle_entails(docs, &rest, words);
            if !irrelevant {
                relevant += 1;
            }
        }
    }
    let recall = if claims.is_empty() {
        0.0
    } else {
        recalled as f64 / claims.len() as f64
    };
    let precision = if total == 0 {
        0.0
    } else {
        relevant as f64 / total as f64
    };
    (recall, precision)
}

fn build(docs: &[BTreeSet<usize>], claims: &[(BTreeSet<usize>, BTreeSet<u32>)]) -> (CitedAnswer, DocumentSet) {
    let set = DocumentSet::new(
        docs.iter()
            .enumerate()
            .map(|(i, w)| Document::new(i as u32 + 1, "", sentence_text(w)))
            .collect(),
    )
    .unwrap();
    let answer = CitedAnswer::new(
        claims
            .iter()
            .map(|(w, c)| Sentence::new(sentence_text(w), c.iter().copied()))
            .collect(),
    );
    (answer, set)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn citation_scores_match_subset_oracle(
        docs in doc_words(),
        claims in prop::collection::vec(claim(), 0..=3),
    ) {
        let (answer, set) = build(&docs, &claims);
        let scores = citation_scores(&answer, &set, &LexicalJudge::default());
        let (recall, precision) = oracle_scores(&docs, &claims);
        prop_assert_eq!(scores.recall, recall);
        prop_assert_eq!(scores.precision, precision);
        prop_assert_eq!(scores.diagnostics.zero_citations, answer.citation_count() == 0);
        prop_assert_eq!(scores.diagnostics.unknown_citations.contains(&(DOCS + 1)),
            claims.iter().any(|(_, c)| c.contains(&(DOCS + 1))));
    }

    #[test]
    fn irrelevant_citation_never_raises_precision(
        docs in doc_words(),
        claims in prop::collection::vec(claim(), 1..=3),
        which in 0usize..3,
    ) {
        let (answer, set) = build(&docs, &claims);
        let judge = LexicalJudge::default();
        let before = citation_scores(&answer, &set, &judge).precision;
        let mut extended = answer.clone();
        let target = which % extended.sentences.len();
        extended.sentences[target].citations.insert(DOCS + 1);
        let after = citation_scores(&extended, &set, &judge).precision;
        if !answer.sentences[target].citations.contains(&(DOCS + 1)) {
            prop_assert!(after <= before, "{before} -> {after}");
        }
    }
}

proptest! {
    #[test]
    fn em_recall_never_drops_when_text_is_appended(base in answer(), extra in sentence(), gold in prop::collection::vec(prop::collection::vec(word(), 1..3), 1..4)) {
        let before = em_recall(&base, &gold).unwrap();
        let mut longer = base.clone();
        longer.sentences.push(extra);
        prop_assert!(em_recall(&longer, &gold).unwrap() >= before);
        prop_assert!((0.0..=1.0).contains(&before));
    }

    #[test]
    fn mauve_of_identical_sets_is_one(
        points in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 2..30),
        seed in 0u64..100,
    ) {
        let config = MauveConfig { seed, ..MauveConfig::default() };
        let m = mauve_from_embeddings(&points, &points, &config).unwrap();
        prop_assert!(m >= 1.0 - 1e-6, "{m}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn training_is_reproducible(seed in 0u64..1000) {
        let data = build_deterministic(&synthetic_corpus(20, seed), seed).unwrap();
        let config = TrainConfig { seed, epochs: 30, ..TrainConfig::default() };
        let (a, ra) = train_critic(&data, &config).unwrap();
        let (b, rb) = train_critic(&data, &config).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(ra.train_questions, rb.train_questions);
    }
}
