//! Deterministic synthetic listener population.
//!
//! Generates the shipped `fixtures/synthetic-120.json` corpus and the
//! matching `fixtures/synonyms.json` dictionary. Everything here is pure and
//! seeded, so the fixtures can be regenerated byte-for-byte at any time
//! (`cargo run --example regen_fixtures`) and a test guards against drift.
//!
//! Structure of the population:
//! * 120 prompts, 11 annotator responses each.
//! * Every prompt contains at least three words from the synonym dictionary,
//!   and every dictionary word has exactly three synonyms, so per-prompt
//!   substitution capacity is at least 4^3 - 1 = 63 variants. That keeps
//!   factor-50 augmentation saturated (original + 50 variants per entry).
//! * Responses are drawn around a per-prompt consensus point implied by the
//!   descriptor words, with a per-prompt agreement class ranging from tight
//!   clusters to full disagreement, so the generalized-variance statistics
//!   span a realistic range.
//! * The exact corpus statistics and the global response centroid are
//!   recorded in `Dataset::metadata` at generation time.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::augment::SynonymDict;
use crate::beosonic::BeoCoord;
use crate::dataset::{prompt_stats, AudioType, Dataset, PromptEntry, ResponseSet};
use crate::util::derive_seed;

/// Seed the shipped fixture was generated with.
pub const FIXTURE_SEED: u64 = 177;

/// Number of prompts in the shipped fixture.
pub const FIXTURE_ENTRIES: usize = 120;

/// Annotator responses per prompt.
pub const FIXTURE_RESPONSES: usize = 11;

/// Descriptor word, its three synonyms, and the EQ consensus it suggests
/// (x: mids-forward negative to bass-and-treble positive; y: bass-heavy
/// negative to treble-heavy positive).
struct Descriptor {
    word: &'static str,
    synonyms: [&'static str; 3],
    target: (f64, f64),
}

const LEXICON: &[Descriptor] = &[
    Descriptor { word: "warm", synonyms: ["cozy", "toasty", "inviting"], target: (1.5, -2.5) },
    Descriptor { word: "bright", synonyms: ["brilliant", "sparkling", "radiant"], target: (0.5, 3.5) },
    Descriptor { word: "dark", synonyms: ["dusky", "shadowy", "somber"], target: (0.0, -3.5) },
    Descriptor { word: "boomy", synonyms: ["thumpy", "booming", "cavernous"], target: (2.5, -4.0) },
    Descriptor { word: "crisp", synonyms: ["snappy", "clean", "precise"], target: (1.0, 2.5) },
    Descriptor { word: "smooth", synonyms: ["silky", "velvety", "even"], target: (-1.5, -0.5) },
    Descriptor { word: "punchy", synonyms: ["forceful", "driving", "energetic"], target: (3.5, 0.0) },
    Descriptor { word: "airy", synonyms: ["open", "spacious", "breathy"], target: (1.0, 3.0) },
    Descriptor { word: "muffled", synonyms: ["muted", "veiled", "smothered"], target: (-2.5, -3.0) },
    Descriptor { word: "harsh", synonyms: ["piercing", "shrill", "abrasive"], target: (1.5, 4.5) },
    Descriptor { word: "deep", synonyms: ["low", "profound", "weighty"], target: (2.0, -3.2) },
    Descriptor { word: "thin", synonyms: ["wispy", "reedy", "brittle"], target: (-2.5, 2.2) },
    Descriptor { word: "lush", synonyms: ["rich", "plush", "sumptuous"], target: (1.8, -1.2) },
    Descriptor { word: "neutral", synonyms: ["balanced", "flat", "uncolored"], target: (0.0, 0.0) },
    Descriptor { word: "vivid", synonyms: ["lively", "vibrant", "colorful"], target: (2.2, 1.8) },
    Descriptor { word: "thick", synonyms: ["dense", "heavy", "chunky"], target: (2.6, -2.4) },
    Descriptor { word: "soft", synonyms: ["gentle", "hushed", "faint"], target: (-1.2, -1.6) },
    Descriptor { word: "clear", synonyms: ["transparent", "pristine", "lucid"], target: (-0.6, 1.6) },
    Descriptor { word: "rumbling", synonyms: ["growling", "roaring", "thunderous"], target: (3.6, -4.4) },
    Descriptor { word: "delicate", synonyms: ["fragile", "fine", "subtle"], target: (-1.0, 1.2) },
    Descriptor { word: "aggressive", synonyms: ["fierce", "intense", "edgy"], target: (3.4, 2.6) },
    Descriptor { word: "relaxed", synonyms: ["calm", "laidback", "easygoing"], target: (-0.8, -2.0) },
    Descriptor { word: "gritty", synonyms: ["rough", "raspy", "coarse"], target: (2.8, 1.4) },
    Descriptor { word: "sharp", synonyms: ["keen", "cutting", "pointed"], target: (0.8, 3.8) },
    Descriptor { word: "mellow", synonyms: ["soothing", "tender", "rounded"], target: (0.5, -1.8) },
    Descriptor { word: "hollow", synonyms: ["empty", "thinned", "scooped"], target: (-3.0, 0.5) },
    Descriptor { word: "full", synonyms: ["ample", "complete", "generous"], target: (2.4, -1.0) },
    Descriptor { word: "dull", synonyms: ["lifeless", "drab", "blunted"], target: (-1.8, -2.8) },
    Descriptor { word: "resonant", synonyms: ["ringing", "echoing", "sonorous"], target: (2.0, -2.0) },
    Descriptor { word: "natural", synonyms: ["organic", "lifelike", "true"], target: (-0.4, 0.3) },
];

const QUALIFIERS: &[&str] = &[
    "slightly", "noticeably", "gently", "really", "extra", "somewhat", "fairly", "quite",
    "distinctly", "mildly",
];

const NOUNS: &[&str] = &[
    "vocals", "strings", "drums", "dialogue", "bassline", "percussion", "guitars", "synths",
    "piano", "brass", "cymbals", "voices", "effects", "ambience", "harmonies", "transients",
    "reverb", "narration", "soundstage", "chorus", "woodwinds", "snare", "textures", "crowd",
    "applause", "pads", "hooks", "breaks",
];

const FLAVORS: &[&str] = &[
    "vintage", "analog", "cinematic", "dreamy", "modern", "retro", "polished", "moody",
    "playful", "intimate", "grand", "glossy", "rustic", "futuristic", "nostalgic", "smoky",
    "crystalline", "earthy", "breezy", "golden", "amber", "velvet", "midnight", "hazy",
];

const CONTEXTS: &[&str] = &[
    "late night jazz",
    "morning news podcasts",
    "action movie marathons",
    "rainy sunday reading",
    "weekend gaming sessions",
    "classical piano recitals",
    "summer road trips",
    "deep focus work",
    "fireplace winter evenings",
    "crowded subway commutes",
    "acoustic guitar covers",
    "live concert recordings",
    "ambient sleep sounds",
    "heavy metal practice",
    "french film noir",
    "vinyl record sessions",
    "early morning yoga",
    "competitive esports streams",
    "backyard barbecue parties",
    "documentary nature series",
    "lofi study beats",
    "orchestral soundtrack scores",
    "spoken word poetry",
    "retro arcade emulation",
    "holiday cooking shows",
    "long haul flights",
    "audiobook thriller chapters",
    "choir rehearsal playback",
    "garage band demos",
    "tropical beach lounging",
    "horror movie nights",
    "vintage soul records",
    "quiet office hours",
    "marathon training runs",
    "underground techno sets",
    "sunday church services",
    "kids cartoon marathons",
    "late shift driving",
    "opera house broadcasts",
    "campfire ghost stories",
    "city rooftop parties",
    "bluegrass festival streams",
    "midnight coding sprints",
    "rain storm recordings",
    "standup comedy specials",
    "museum audio tours",
    "foreign language lessons",
    "indie folk playlists",
    "basement drum practice",
    "airport lounge waits",
    "science podcast binges",
    "wedding reception dancing",
    "mountain cabin getaways",
    "video call meetings",
    "jazz brunch gatherings",
    "silent film scoring",
    "gym workout mixes",
    "evening wind downs",
    "talk radio mornings",
    "surround sound demos",
];

// Audio-type assignment cycle; over 120 entries this gives music1 24,
// music2 24, movies1 16, movies2 16, nature_noise 16, audiobooks 16,
// other:podcasts 8, covering every serialized form.
const TYPE_CYCLE: &[&str] = &[
    "music1",
    "music1",
    "music2",
    "movies1",
    "music2",
    "nature_noise",
    "movies2",
    "audiobooks",
    "music1",
    "movies1",
    "other:podcasts",
    "music2",
    "nature_noise",
    "audiobooks",
    "movies2",
];

/// Dictionary entries backing `fixtures/synonyms.json`, as (word, synonyms).
pub fn synonym_entries() -> Vec<(String, Vec<String>)> {
    LEXICON
        .iter()
        .map(|d| {
            (
                d.word.to_string(),
                d.synonyms.iter().map(|s| s.to_string()).collect(),
            )
        })
        .collect()
}

/// The shipped synonym dictionary.
pub fn synonym_dict() -> SynonymDict {
    SynonymDict::new(synonym_entries()).expect("static lexicon satisfies the dictionary invariants")
}

/// Canonical bytes of `fixtures/synonyms.json`.
pub fn synonyms_json() -> String {
    let map: BTreeMap<String, Vec<String>> = synonym_entries().into_iter().collect();
    let mut out = serde_json::to_string_pretty(&map).expect("string map serialization");
    out.push('\n');
    out
}

/// How much the annotators agree on one prompt.
enum Agreement {
    /// Clear consensus: responses cluster tightly around the implied point.
    Tight,
    /// Broad consensus with personal taste spread.
    Medium,
    /// Weak consensus: the descriptor only loosely pins a region.
    Wide,
    /// No consensus: responses scatter over the whole square.
    Scattered,
}

fn draw_agreement(rng: &mut ChaCha8Rng) -> Agreement {
    let u: f64 = rng.random();
    if u < 0.38 {
        Agreement::Tight
    } else if u < 0.72 {
        Agreement::Medium
    } else if u < 0.90 {
        Agreement::Wide
    } else {
        Agreement::Scattered
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn normal(rng: &mut ChaCha8Rng, mu: f64, sigma: f64) -> f64 {
    Normal::new(mu, sigma).expect("finite parameters").sample(rng)
}

/// Builds the prompt text for entry `i` from three descriptor words plus
/// scaffolding. Every template uses all three descriptors, so each prompt is
/// guaranteed three dictionary hits.
fn prompt_text(i: usize, rng: &mut ChaCha8Rng, d: [&str; 3]) -> String {
    let q = QUALIFIERS[rng.random_range(0..QUALIFIERS.len())];
    let n = NOUNS[rng.random_range(0..NOUNS.len())];
    let f = FLAVORS[rng.random_range(0..FLAVORS.len())];
    let ctx = CONTEXTS[rng.random_range(0..CONTEXTS.len())];
    let [d1, d2, d3] = d;
    match i % 12 {
        0 => format!("make it {d1} and {d2} but keep the {n} {d3}"),
        1 => format!("i want a {d1}, {d2} sound with {d3} {n} for {ctx}"),
        2 => format!("{q} {d1}, a bit {d2} and {d3}, great for {ctx}"),
        3 => format!("give me a {d1} {f} tone, {d2} mids and {d3} highs"),
        4 => format!("something {d1} but not {d2}, with {d3} {n}"),
        5 => format!("turn this into a {d1}, {d2} mix with {d3} {n}"),
        6 => format!("{ctx} needs a {d1} and {d2} feel, {d3} overall"),
        7 => format!("less {d1}, more {d2}, and keep everything {d3} please"),
        8 => format!("a {f} {d1} sound, {d2} lows and {d3} {n}"),
        9 => format!("i'd like it {d1} and {d2} without getting {d3}"),
        10 => format!("{q} {d1} with {d2} {n} and a {d3} edge for {ctx}"),
        _ => format!("keep it {d1} and {d2}, just a touch {d3}"),
    }
}

fn response_set(rng: &mut ChaCha8Rng, center: (f64, f64)) -> ResponseSet {
    let agreement = draw_agreement(rng);
    let (sx, sy) = match agreement {
        Agreement::Tight => (rng.random_range(1.0..1.5), rng.random_range(1.0..1.5)),
        Agreement::Medium => (rng.random_range(1.7..2.5), rng.random_range(1.7..2.5)),
        Agreement::Wide => (rng.random_range(2.7..3.6), rng.random_range(2.7..3.6)),
        Agreement::Scattered => (0.0, 0.0),
    };
    let mut points = Vec::with_capacity(FIXTURE_RESPONSES);
    for _ in 0..FIXTURE_RESPONSES {
        let (x, y) = match agreement {
            Agreement::Scattered => (
                rng.random_range(-5.8..5.8),
                rng.random_range(-5.8..5.8),
            ),
            _ => (
                normal(rng, center.0, sx),
                normal(rng, center.1, sy),
            ),
        };
        points.push(
            BeoCoord::clamped(round2(x), round2(y)).expect("rounded samples are finite"),
        );
    }
    ResponseSet::new(points).expect("eleven points")
}

/// Generates the synthetic population: 120 prompts, 11 responses each, with
/// the corpus statistics and global response centroid recorded in metadata.
/// Deterministic in `seed`; entries are keyed by id so the stream for one
/// entry never depends on its neighbours.
pub fn synthetic_population(seed: u64) -> Dataset {
    let mut entries = Vec::with_capacity(FIXTURE_ENTRIES);
    for i in 0..FIXTURE_ENTRIES {
        let id = format!("syn{i:03}");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &id));

        let picks = sample(&mut rng, LEXICON.len(), 3);
        let d = [
            &LEXICON[picks.index(0)],
            &LEXICON[picks.index(1)],
            &LEXICON[picks.index(2)],
        ];
        let prompt = prompt_text(i, &mut rng, [d[0].word, d[1].word, d[2].word]);

        // Consensus point: average of what the three descriptors suggest,
        // plus idiosyncratic drift, kept away from the walls so response
        // clusters are not dominated by clamping.
        let tx = (d[0].target.0 + d[1].target.0 + d[2].target.0) / 3.0;
        let ty = (d[0].target.1 + d[1].target.1 + d[2].target.1) / 3.0;
        let center = (
            (tx + normal(&mut rng, 0.0, 0.8)).clamp(-4.2, 4.2),
            (ty + normal(&mut rng, 0.0, 0.8)).clamp(-4.2, 4.2),
        );

        entries.push(PromptEntry {
            id,
            prompt,
            audio_type: AudioType::parse(TYPE_CYCLE[i % TYPE_CYCLE.len()]),
            responses: response_set(&mut rng, center),
        });
    }

    // Global centroid, accumulated in entry order exactly as the static
    // preset baseline does, so the recorded value matches it bit for bit.
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut n = 0usize;
    for entry in &entries {
        for p in entry.responses.points() {
            sum_x += p.x();
            sum_y += p.y();
            n += 1;
        }
    }

    let mut ds = Dataset {
        metadata: BTreeMap::new(),
        entries,
    };
    let stats = prompt_stats(&ds);
    let meta = &mut ds.metadata;
    meta.insert("source".into(), "synthetic listener population".into());
    meta.insert("generator".into(), "examples/regen_fixtures.rs".into());
    meta.insert("seed".into(), seed.to_string());
    meta.insert("total_prompts".into(), stats.total_prompts.to_string());
    meta.insert(
        "total_annotations".into(),
        stats.total_annotations.to_string(),
    );
    meta.insert("vocab_size".into(), stats.vocab_size.to_string());
    meta.insert(
        "avg_words_per_prompt".into(),
        stats.avg_words_per_prompt.to_string(),
    );
    meta.insert("gv_avg".into(), stats.gv_avg.to_string());
    meta.insert("gv_min".into(), stats.gv_min.to_string());
    meta.insert("gv_max".into(), stats.gv_max.to_string());
    meta.insert("centroid_x".into(), (sum_x / n as f64).to_string());
    meta.insert("centroid_y".into(), (sum_y / n as f64).to_string());
    ds
}

/// Canonical bytes of `fixtures/synthetic-120.json`.
pub fn fixture_json() -> String {
    synthetic_population(FIXTURE_SEED).to_json_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tokenize;

    #[test]
    fn population_has_the_advertised_shape() {
        let ds = synthetic_population(FIXTURE_SEED);
        ds.validate().unwrap();
        assert_eq!(ds.entries.len(), FIXTURE_ENTRIES);
        for e in &ds.entries {
            assert_eq!(e.responses.len(), FIXTURE_RESPONSES);
        }
    }

    #[test]
    fn every_prompt_saturates_factor_fifty_augmentation() {
        let ds = synthetic_population(FIXTURE_SEED);
        let dict = synonym_dict();
        for e in &ds.entries {
            // capacity = prod(1 + synonyms) - 1 over dictionary hits
            let mut capacity = 1usize;
            let mut hits = 0usize;
            for tok in tokenize(&e.prompt) {
                if let Some(syns) = dict.synonyms(&tok) {
                    capacity *= 1 + syns.len();
                    hits += 1;
                }
            }
            assert!(hits >= 3, "{}: only {hits} dictionary hits", e.id);
            let variants = capacity - 1; // the original does not count
            assert!(variants >= 50, "{}: only {variants} distinct variants", e.id);
        }
    }

    #[test]
    fn metadata_matches_recomputed_statistics_exactly() {
        let ds = synthetic_population(FIXTURE_SEED);
        let stats = prompt_stats(&ds);
        let get = |k: &str| ds.metadata.get(k).unwrap().clone();
        assert_eq!(get("total_prompts"), stats.total_prompts.to_string());
        assert_eq!(
            get("total_annotations"),
            stats.total_annotations.to_string()
        );
        assert_eq!(get("vocab_size"), stats.vocab_size.to_string());
        assert_eq!(
            get("avg_words_per_prompt").parse::<f64>().unwrap(),
            stats.avg_words_per_prompt
        );
        assert_eq!(get("gv_avg").parse::<f64>().unwrap(), stats.gv_avg);
        assert_eq!(get("gv_min").parse::<f64>().unwrap(), stats.gv_min);
        assert_eq!(get("gv_max").parse::<f64>().unwrap(), stats.gv_max);
    }

    #[test]
    fn recorded_centroid_matches_the_static_preset() {
        use crate::recommend::StaticPresetBaseline;
        let ds = synthetic_population(FIXTURE_SEED);
        let preset = StaticPresetBaseline::from_train(&ds).unwrap().centroid();
        assert_eq!(
            ds.metadata["centroid_x"].parse::<f64>().unwrap(),
            preset.x()
        );
        assert_eq!(
            ds.metadata["centroid_y"].parse::<f64>().unwrap(),
            preset.y()
        );
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        assert_eq!(
            synthetic_population(FIXTURE_SEED).to_json_string(),
            synthetic_population(FIXTURE_SEED).to_json_string()
        );
        assert_ne!(
            synthetic_population(1).to_json_string(),
            synthetic_population(2).to_json_string()
        );
    }

    #[test]
    fn the_dictionary_is_structurally_valid() {
        let dict = synonym_dict();
        assert_eq!(dict.len(), LEXICON.len());
        for d in LEXICON {
            let syns = dict.synonyms(d.word).unwrap();
            assert_eq!(syns.len(), 3);
        }
        // round-trips through its JSON form
        let reparsed = SynonymDict::from_json_str(&synonyms_json()).unwrap();
        assert_eq!(reparsed, dict);
    }
}
