//! A compositional ATIS-style grammar: 8 intents, 10 slot types. Used for the
//! synthetic experiments and as test fixtures.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bio::tags_from_types;
use crate::corpus::LabeledUtterance;

// Multi-word values share words so that no two words always co-occur.
const CITIES: &[&str] = &[
    "boston", "denver", "atlanta", "dallas", "pittsburgh", "baltimore", "philadelphia", "oakland", "seattle",
    "chicago", "houston", "miami", "phoenix", "detroit", "charlotte", "memphis", "orlando", "new york",
    "new orleans", "san francisco", "san diego", "san jose", "st. louis", "st. paul",
];
const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const PERIODS: &[&str] = &["morning", "afternoon", "evening", "night"];
const AIRLINES: &[&str] =
    &["american", "delta", "united", "continental", "alaska", "lufthansa", "air canada", "air france", "us air"];
const CLASSES: &[&str] = &["first", "business", "economy", "coach"];
const FARE_CODES: &[&str] = &["q", "y", "h", "f", "m", "b", "qx", "yn", "bh", "kq"];
const MEALS: &[&str] = &["breakfast", "lunch", "dinner", "snack", "snacks", "supper"];

/// Placeholder, slot type, value pool.
const SLOTS: &[(&str, &str, &[&str])] = &[
    ("$from", "fromloc.city_name", CITIES),
    ("$to", "toloc.city_name", CITIES),
    ("$stop", "stoploc.city_name", CITIES),
    ("$day", "depart_date.day_name", DAYS),
    ("$period", "depart_time.period_of_day", PERIODS),
    ("$airline", "airline_name", AIRLINES),
    ("$class", "class_type", CLASSES),
    ("$flight", "flight_number", &[]),
    ("$fare", "fare_basis_code", FARE_CODES),
    ("$meal", "meal_description", MEALS),
];

const PREFIXES: &[&str] = &["", "please", "show", "list", "find", "need", "want", "give", "display"];
const ADJECTIVES: &[&str] = &["cheapest", "earliest", "latest", "direct", "available"];

/// Optional phrases, each naming one slot.
const FROM: &str = "from $from";
const TO: &str = "to $to";
const STOP: &str = "via $stop";
const DAY: &str = "on $day";
const PERIOD: &str = "during $period";
const AIRLINE: &str = "with $airline";
const CLASS: &str = "in $class";
const FLIGHT: &str = "number $flight";
const MEAL: &str = "serving $meal";

struct Intent {
    name: &'static str,
    /// Whether a request word and an adjective may precede the core noun.
    prefixed: bool,
    cores: &'static [&'static str],
    modifiers: &'static [&'static str],
    /// Modifiers drawn per utterance, inclusive range.
    count: (usize, usize),
    /// Modifier that every utterance of the intent carries.
    required: Option<&'static str>,
}

const INTENTS: &[Intent] = &[
    Intent {
        name: "flight",
        prefixed: true,
        cores: &["flights", "connections", "itineraries", "nonstops"],
        modifiers: &[FROM, TO, STOP, DAY, PERIOD, AIRLINE, CLASS],
        count: (1, 4),
        required: None,
    },
    Intent {
        name: "airfare",
        prefixed: true,
        cores: &["fares", "prices", "costs", "rates"],
        modifiers: &[FROM, TO, DAY, AIRLINE, CLASS],
        count: (1, 3),
        required: None,
    },
    Intent {
        name: "ground_service",
        prefixed: true,
        cores: &["transportation", "rentals", "shuttles", "limousines", "taxis"],
        modifiers: &[DAY, PERIOD],
        count: (0, 1),
        required: Some("at $to"),
    },
    Intent {
        name: "airline",
        prefixed: true,
        cores: &["airlines", "carriers", "operators"],
        modifiers: &[FROM, TO, FLIGHT, CLASS, STOP],
        count: (1, 3),
        required: None,
    },
    Intent {
        name: "abbreviation",
        prefixed: false,
        cores: &["explain", "define", "decode", "clarify", "interpret"],
        modifiers: &["code", "abbreviation", "restriction"],
        count: (0, 1),
        required: Some("$fare"),
    },
    Intent {
        name: "aircraft",
        prefixed: true,
        cores: &["aircraft", "planes", "equipment", "airplanes"],
        modifiers: &[FROM, TO, AIRLINE, FLIGHT, PERIOD],
        count: (1, 3),
        required: None,
    },
    Intent {
        name: "flight_time",
        prefixed: true,
        cores: &["departures", "arrivals", "schedules", "timetables"],
        modifiers: &[FROM, TO, DAY, PERIOD, AIRLINE, FLIGHT],
        count: (1, 3),
        required: None,
    },
    Intent {
        name: "meal",
        prefixed: true,
        cores: &["meals", "food", "refreshments", "menus"],
        modifiers: &[FROM, TO, FLIGHT, AIRLINE, DAY],
        count: (0, 2),
        required: Some(MEAL),
    },
];

pub const NUM_INTENTS: usize = 8;
pub const NUM_SLOT_TYPES: usize = 10;

pub fn intents() -> Vec<&'static str> {
    INTENTS.iter().map(|i| i.name).collect()
}

pub fn slot_types() -> Vec<&'static str> {
    SLOTS.iter().map(|(_, t, _)| *t).collect()
}

fn flight_number(rng: &mut impl Rng) -> String {
    (rng.random_range(10..60) * 17 + 100).to_string()
}

fn sample_one(rng: &mut ChaCha8Rng, id: String) -> LabeledUtterance {
    let intent = INTENTS.choose(rng).expect("intents");
    let mut phrases: Vec<&str> = Vec::new();
    if intent.prefixed {
        phrases.push(PREFIXES.choose(rng).expect("prefixes"));
        if rng.random_bool(0.4) {
            phrases.push(ADJECTIVES.choose(rng).expect("adjectives"));
        }
    }
    phrases.push(intent.cores.choose(rng).expect("cores"));
    let n = rng.random_range(intent.count.0..=intent.count.1);
    let mut modifiers: Vec<&str> = intent.modifiers.choose_multiple(rng, n).copied().collect();
    modifiers.extend(intent.required);
    modifiers.shuffle(rng);
    phrases.extend(modifiers);

    let mut tokens: Vec<String> = Vec::new();
    let mut types: Vec<Option<&str>> = Vec::new();
    let mut used_cities: Vec<&str> = Vec::new();
    for word in phrases.iter().flat_map(|p| p.split_whitespace()) {
        let Some((_, ty, pool)) = SLOTS.iter().find(|(p, _, _)| *p == word) else {
            tokens.push(word.to_string());
            types.push(None);
            continue;
        };
        let value = if pool.is_empty() {
            flight_number(rng)
        } else if std::ptr::eq(*pool, CITIES) {
            let city = loop {
                let c = *pool.choose(rng).expect("pool");
                if !used_cities.contains(&c) {
                    break c;
                }
            };
            used_cities.push(city);
            city.to_string()
        } else {
            pool.choose(rng).expect("pool").to_string()
        };
        for part in value.split(' ') {
            tokens.push(part.to_string());
            types.push(Some(ty));
        }
    }
    let tags = tags_from_types(&types);
    LabeledUtterance::new(id, tokens, tags, intent.name).expect("grammar produces valid rows")
}

/// `n` utterances with ids `<prefix>-<k>`.
pub fn generate(n: usize, seed: u64, prefix: &str) -> Vec<LabeledUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|k| sample_one(&mut rng, format!("{prefix}-{k}"))).collect()
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Vec<LabeledUtterance>,
    pub dev: Vec<LabeledUtterance>,
    pub test: Vec<LabeledUtterance>,
}

pub fn splits(train: usize, dev: usize, test: usize, seed: u64) -> Splits {
    Splits {
        train: generate(train, seed, "train"),
        dev: generate(dev, seed.wrapping_add(0x9e37_79b9), "dev"),
        test: generate(test, seed.wrapping_add(0x3c6e_f372), "test"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn inventory_sizes() {
        assert_eq!(intents().len(), NUM_INTENTS);
        assert_eq!(slot_types().len(), NUM_SLOT_TYPES);
        let data = generate(2000, 7, "t");
        let seen: HashSet<&str> = data.iter().map(|u| u.intent.as_str()).collect();
        assert_eq!(seen.len(), NUM_INTENTS);
        let types: HashSet<&str> = data.iter().flat_map(|u| u.tags.iter().filter_map(|t| crate::bio::slot_type(t))).collect();
        assert_eq!(types.len(), NUM_SLOT_TYPES);
    }

    #[test]
    fn rows_are_clean() {
        for u in generate(500, 3, "t") {
            assert!(crate::bio::validate_bio(&u.tags, crate::bio::BioMode::Strict).is_empty());
            assert!(u.tokens.iter().all(|t| !t.contains(['(', ')', '$'])));
            let cities: Vec<&String> = u.tokens.iter().zip(&u.tags).filter(|(_, t)| t.starts_with("B-") && t.contains("loc")).map(|(w, _)| w).collect();
            let distinct: HashSet<_> = cities.iter().collect();
            assert_eq!(distinct.len(), cities.len(), "{:?}", u.tokens);
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(generate(50, 1, "a"), generate(50, 1, "a"));
        assert_ne!(generate(50, 1, "a"), generate(50, 2, "a"));
        let s = splits(10, 5, 5, 0);
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (10, 5, 5));
        assert_ne!(s.train[0].tokens, s.test[0].tokens);
    }
}
