//! Synthetic ad records covering every column type and null pattern.

use adtrace_core::classify::DEFAULT_LABELS;
use adtrace_core::sink::AdRecord;
use chrono::{DateTime, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rust_decimal::Decimal;

const WORDS: &[&str] = &[
    "macaw", "tiger", "claw", "plush", "ivory", "pendant", "Schildkröte", "象牙", "ñandú", "rug",
    "\"quoted\"", "comma,separated", "tab\tinside", "emoji 🦜", "pelt", "statue",
];

fn phrase(rng: &mut StdRng, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn maybe<T>(rng: &mut StdRng, f: impl FnOnce(&mut StdRng) -> T) -> Option<T> {
    if rng.random_bool(0.25) {
        None
    } else {
        Some(f(rng))
    }
}

/// `n` records from `seed`; about a quarter of each nullable column is null.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<AdRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let base: DateTime<Utc> = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
    (0..n)
        .map(|i| {
            let domain = format!("market{}.example", rng.random_range(0..40));
            let retrieved = base + chrono::Duration::milliseconds(rng.random_range(0..31_536_000_000i64));
            let label = DEFAULT_LABELS[rng.random_range(0..DEFAULT_LABELS.len())].to_string();
            AdRecord {
                url: format!("https://www.{domain}/item/{i}"),
                title: maybe(&mut rng, |r| phrase(r, 6)),
                text: phrase(&mut rng, 40),
                product: phrase(&mut rng, 5),
                description: maybe(&mut rng, |r| phrase(r, 20)),
                domain,
                image: maybe(&mut rng, |r| format!("https://img.example/{}.jpg", r.random::<u32>())),
                retrieved,
                category: maybe(&mut rng, |r| phrase(r, 2)),
                production_date: maybe(&mut rng, |r| format!("{}", r.random_range(1850..2024))),
                price: maybe(&mut rng, |r| {
                    Decimal::new(r.random_range(0..100_000_000_000i64), r.random_range(0..=4)).normalize()
                }),
                currency: maybe(&mut rng, |r| ["USD", "EUR", "GBP", "JPY"][r.random_range(0..4)].to_string()),
                seller: maybe(&mut rng, |r| phrase(r, 2)),
                seller_type: maybe(&mut rng, |r| ["private", "business"][r.random_range(0..2)].to_string()),
                location: maybe(&mut rng, |r| phrase(r, 3)),
                zero_shot_label: label,
                zero_shot_prob: rng.random_range(0.0..=1.0),
                id: format!("{:032x}", rng.random::<u128>()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_with_nulls() {
        let a = synthetic_records(200, 7);
        assert_eq!(a, synthetic_records(200, 7));
        assert!(a.iter().any(|r| r.price.is_none()));
        assert!(a.iter().any(|r| r.title.is_some()));
    }
}
