//! Regenerates the synthetic fixture corpus under `fixtures/`.
//!
//! ```text
//! cargo run -p compgen --example make_fixture -- fixtures
//! ```
//!
//! Output is a pure function of the seed below, so rerunning it leaves the
//! checked-in files unchanged.

use std::fs;
use std::path::PathBuf;

use compgen::aspects::SentimentLexicon;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const SEED: u64 = 20230704;

struct Category {
    noun: &'static str,
    aspects: [&'static str; 4],
}

const CATEGORIES: &[Category] = &[
    Category { noun: "guitar", aspects: ["neck", "frets", "tone", "finish"] },
    Category { noun: "keyboard", aspects: ["keys", "action", "speakers", "sound"] },
    Category { noun: "drum", aspects: ["heads", "shells", "hardware", "sound"] },
    Category { noun: "microphone", aspects: ["clarity", "grille", "cable", "sound"] },
    Category { noun: "amp", aspects: ["tone", "volume", "knobs", "speaker"] },
    Category { noun: "pedal", aspects: ["switch", "tone", "enclosure", "volume"] },
    Category { noun: "strings", aspects: ["tension", "coating", "tone", "sound"] },
    Category { noun: "headphones", aspects: ["bass", "cable", "padding", "sound"] },
    Category { noun: "tuner", aspects: ["display", "clip", "accuracy", "battery"] },
    Category { noun: "valve", aspects: ["valve", "spring", "slide", "oil"] },
];

const BRANDS: &[&str] = &["yamaha", "fender", "casio", "roland", "boss", "shure", "korg", "behringer"];
const CODES: &[&str] = &["fx-3200", "sm58", "ct-x700", "td17", "gt-100", "mx500", "dp-28", "a-40"];
const POSITIVE: &[&str] = &["great", "excellent", "solid", "smooth", "warm", "clear", "sturdy", "nice", "crisp", "responsive"];
const NEGATIVE: &[&str] = &["cheap", "flimsy", "noisy", "weak", "harsh", "thin", "dull", "muddy"];
const COMPARATIVE: &[&str] = &["warmer", "smoother", "richer", "clearer", "louder", "brighter", "sturdier", "lighter"];
const PEOPLE: &[&str] = &["son", "daughter", "band", "teacher", "church", "studio"];
const TIMES: &[&str] = &["day", "week", "weekend", "night"];

struct Slots<'a> {
    cat: &'a Category,
    liked: &'a [&'static str],
    disliked: &'a [&'static str],
}

fn pick(rng: &mut ChaCha8Rng, xs: &[&'static str]) -> &'static str {
    xs.choose(rng).copied().unwrap_or("it")
}

fn comparative(rng: &mut ChaCha8Rng, s: &Slots) -> String {
    let a = pick(rng, s.liked);
    let n = s.cat.noun;
    let brand = pick(rng, BRANDS);
    let code = pick(rng, CODES);
    let adj = pick(rng, COMPARATIVE);
    let good = pick(rng, POSITIVE);
    match rng.random_range(0..9) {
        0 => format!("The {a} is {adj} than my old {n}."),
        1 => format!("The {a} is much {adj} than the {brand} {code}."),
        2 => format!("This {n} sounds better than the {brand} {code}."),
        3 => format!("I prefer this {n} to the {brand} because the {a} is {good}."),
        4 => format!("Compared to my {brand}, the {a} is {good} and {adj}."),
        5 => format!("It beats the {brand} {code} on {a}."),
        6 => format!("The {a} is superior to the {code}."),
        7 => format!("The {a} feels {adj} than the {brand} version."),
        _ => format!("I like the {a} better than on my {brand} {n}."),
    }
}

fn plain(rng: &mut ChaCha8Rng, s: &Slots) -> String {
    let a = pick(rng, s.liked);
    let bad = pick(rng, s.disliked);
    let n = s.cat.noun;
    let good = pick(rng, POSITIVE);
    let neg = pick(rng, NEGATIVE);
    match rng.random_range(0..10) {
        8 => format!("Other than the {bad}, no complaints."),
        9 => format!("I ordered it rather than waiting for the {}.", pick(rng, BRANDS)),
        0 => format!("The {a} is {good}."),
        1 => format!("The {bad} is {neg}."),
        2 => format!("I bought this {n} for my {}.", pick(rng, PEOPLE)),
        3 => format!("I use it every {}.", pick(rng, TIMES)),
        4 => format!("The {bad} is not {good} at all."),
        5 => format!("Shipping was fast and the box was {good}."),
        6 => format!("It's a {good} {n} and the {a} is {}.", pick(rng, POSITIVE)),
        _ => format!("The {bad} feels {neg} and I don't like it."),
    }
}

/// Negatives share vocabulary with positives: marker words are swapped out.
fn perturbed(rng: &mut ChaCha8Rng, s: &Slots) -> String {
    let a = pick(rng, s.liked);
    let n = s.cat.noun;
    let brand = pick(rng, BRANDS);
    let code = pick(rng, CODES);
    let good = pick(rng, POSITIVE);
    match rng.random_range(0..9) {
        6 => format!("Other than the {a}, I have nothing to add."),
        7 => format!("I bought it online rather than at the {brand} store."),
        8 => format!("It got better after a week with the {a}."),
        0 => format!("The {a} is {good} and my old {n} is gone."),
        1 => format!("I also own the {brand} {code}."),
        2 => format!("This {n} sounds {good} with the {brand} {code}."),
        3 => format!("My {brand} has a {good} {a} too."),
        4 => format!("The {code} arrived with the {a} set up."),
        _ => format!("The {a} is {good} on the {brand} {n}."),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut reviews = String::new();
    let mut review_no = 0;
    for (ci, cat) in CATEGORIES.iter().enumerate() {
        for variant in 0..2 {
            let item = format!("B00INST{:03}", ci * 2 + variant);
            let (liked, disliked) = if variant == 0 {
                (&cat.aspects[..2], &cat.aspects[2..])
            } else {
                (&cat.aspects[2..], &cat.aspects[..2])
            };
            let slots = Slots { cat, liked, disliked };
            for _ in 0..10 {
                let n = rng.random_range(3..6);
                let mut sentences = Vec::with_capacity(n);
                for _ in 0..n {
                    sentences.push(if rng.random_bool(0.45) {
                        comparative(&mut rng, &slots)
                    } else {
                        plain(&mut rng, &slots)
                    });
                }
                let mut text = sentences.join(" ");
                if review_no % 17 == 0 {
                    text.push_str(" Worth it &amp; more.");
                }
                let line = json!({
                    "reviewID": format!("R{review_no:05}"),
                    "reviewerID": format!("U{:04}", rng.random_range(0..120)),
                    "asin": item,
                    "overall": rng.random_range(3..=5) as f64,
                    "reviewText": text,
                });
                reviews.push_str(&line.to_string());
                reviews.push('\n');
                review_no += 1;
            }
        }
    }
    fs::write(out.join("reviews.jsonl"), reviews)?;

    let mut labeled = String::new();
    for i in 0..2000 {
        let cat = &CATEGORIES[rng.random_range(0..CATEGORIES.len())];
        let split = rng.random_range(1..4);
        let slots = Slots { cat, liked: &cat.aspects[..split], disliked: &cat.aspects[split..] };
        let (text, label) = match i % 4 {
            0 | 1 => (comparative(&mut rng, &slots), "comparative"),
            2 => (perturbed(&mut rng, &slots), "non_comparative"),
            _ => (plain(&mut rng, &slots), "non_comparative"),
        };
        labeled.push_str(&json!({ "text": text, "label": label }).to_string());
        labeled.push('\n');
    }
    fs::write(out.join("labeled_sentences.jsonl"), labeled)?;

    let extra = [("louder", 0.3), ("brighter", 0.4), ("sturdier", 0.6), ("lighter", 0.3), ("superior", 0.7), ("fast", 0.4)];
    let lexicon = SentimentLexicon::new(SentimentLexicon::seed().entries().chain(extra))?;
    fs::write(out.join("lexicon.tsv"), lexicon.to_tsv())?;
    println!("wrote {review_no} reviews and 2000 labeled sentences to {}", out.display());
    Ok(())
}
