//! Deterministic toy corpus of invented cities.
//!
//! Each question asks about one city. Its four documents state the city's
//! population and region, its founding, its main industry, and facts about
//! an unrelated distractor city, in seeded order. The reference answer has
//! one cited sentence per fact and the gold groups are the population, the
//! founding year and the industry.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::answer::{CitedAnswer, Document, DocumentSet, Sentence};
use crate::corpus::CorpusRecord;
use crate::seeded_rng;

const ONSETS: &[&str] = &[
    "b", "d", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "gr", "st", "tr",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ei"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "m", "th"];
const REGIONS: &[&str] = &[
    "northern", "southern", "eastern", "western", "central", "coastal", "highland", "lowland",
];
const INDUSTRIES: &[&str] = &[
    "shipbuilding",
    "textiles",
    "mining",
    "tourism",
    "fishing",
    "forestry",
    "brewing",
    "printing",
    "glassmaking",
    "software",
    "pottery",
    "viticulture",
];
const ROLES: &[&str] = &["merchant", "monk", "soldier", "farmer", "sailor", "scholar"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(NUCLEI.choose(rng).unwrap());
        w.push_str(CODAS.choose(rng).unwrap());
    }
    let mut chars = w.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => w,
    }
}

fn unique_name(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(2..=3);
        let name = pseudo_word(rng, syllables);
        if used.insert(name.to_lowercase()) {
            return name;
        }
    }
}

struct City {
    name: String,
    population: String,
    region: &'static str,
    founded: u32,
    founder: String,
    role: &'static str,
    industry: &'static str,
}

fn city(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> City {
    City {
        name: unique_name(rng, used),
        population: format!("{}.{:02}", rng.random_range(1..10), rng.random_range(0..100)),
        region: REGIONS.choose(rng).unwrap(),
        founded: rng.random_range(1100..1900),
        founder: unique_name(rng, used),
        role: ROLES.choose(rng).unwrap(),
        industry: INDUSTRIES.choose(rng).unwrap(),
    }
}

/// `questions` records, fully determined by `seed`.
pub fn synthetic_corpus(questions: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = seeded_rng(seed, 50);
    let mut used = HashSet::new();
    (0..questions)
        .map(|i| {
            let c = city(&mut rng, &mut used);
            let other = city(&mut rng, &mut used);
            let mut bodies = vec![
                (
                    "population",
                    format!("{} Facts", c.name),
                    format!(
                        "{} is a city in the {} region with a population of {} million.",
                        c.name, c.region, c.population
                    ),
                ),
                (
                    "founded",
                    format!("History of {}", c.name),
                    format!(
                        "{} was founded in {} by {}, a local {}.",
                        c.name, c.founded, c.founder, c.role
                    ),
                ),
                (
                    "industry",
                    format!("Economy of {}", c.name),
                    format!(
                        "The main industry of {} is {}, which employs most residents.",
                        c.name, c.industry
                    ),
                ),
                (
                    "distractor",
                    format!("{} Facts", other.name),
                    format!(
                        "{} has a population of {} million and was founded in {} by {}.",
                        other.name, other.population, other.founded, other.founder
                    ),
                ),
            ];
            bodies.shuffle(&mut rng);
            let index_of = |kind: &str| bodies.iter().position(|b| b.0 == kind).unwrap() as u32 + 1;
            let answer = CitedAnswer::new(vec![
                Sentence::new(
                    format!(
                        "{} has a population of {} million and lies in the {} region.",
                        c.name, c.population, c.region
                    ),
                    [index_of("population")],
                ),
                Sentence::new(
                    format!("{} was founded in {} by {}.", c.name, c.founded, c.founder),
                    [index_of("founded")],
                ),
                Sentence::new(format!("Its main industry is {}.", c.industry), [index_of("industry")]),
            ]);
            let docs = bodies
                .into_iter()
                .enumerate()
                .map(|(k, (_, title, body))| Document::new(k as u32 + 1, title, body))
                .collect();
            CorpusRecord {
                id: format!("city-{i:04}"),
                question: format!("What are the main facts about the city of {}?", c.name),
                docs: DocumentSet::new(docs).expect("generated documents are valid"),
                gold_aspects: vec![
                    vec![format!("{} million", c.population)],
                    vec![c.founded.to_string()],
                    vec![c.industry.to_string()],
                ],
                answer: Some(answer),
            }
        })
        .collect()
}
