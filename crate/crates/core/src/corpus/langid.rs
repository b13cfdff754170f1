//! Character n-gram language identification.
//!
//! Rank-order profile comparison in the Cavnar–Trenkle style: each bundled
//! language carries a ranked list of its most frequent 1–3 character n-grams
//! (top 300, words padded with `_`). Input text is profiled the same way and
//! scored against every language by total out-of-place rank distance; the
//! reported confidence is the normalized inverse of the winning distance.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const PROFILE_SIZE: usize = 300;
const MAX_NGRAM: usize = 3;
const MIN_TEXT_CHARS: usize = 20;
/// Rank penalty for an n-gram absent from the reference profile.
const OUT_OF_PLACE: usize = PROFILE_SIZE;

const SEED_TEXTS: [(&str, &str); 5] = [
    ("en", include_str!("../../data/lang/en.txt")),
    ("es", include_str!("../../data/lang/es.txt")),
    ("fr", include_str!("../../data/lang/fr.txt")),
    ("pt", include_str!("../../data/lang/pt.txt")),
    ("de", include_str!("../../data/lang/de.txt")),
];

struct LangProfile {
    code: &'static str,
    ranks: HashMap<String, usize>,
}

fn profiles() -> &'static [LangProfile] {
    static PROFILES: OnceLock<Vec<LangProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        SEED_TEXTS
            .iter()
            .map(|(code, text)| LangProfile {
                code,
                ranks: rank_map(&ranked_ngrams(text)),
            })
            .collect()
    })
}

/// Detect the language of `text` against the bundled profiles.
///
/// Returns a BCP-47-style code and a confidence in `[0, 1]`. Texts shorter
/// than 20 characters after trimming are reported as `("und", 0.0)`; an
/// empty text is an error.
pub fn detect_language(text: &str) -> Result<(String, f64)> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::EmptyText);
    }
    if trimmed.chars().count() < MIN_TEXT_CHARS {
        return Ok(("und".to_string(), 0.0));
    }

    let doc_profile = ranked_ngrams(trimmed);
    if doc_profile.is_empty() {
        return Ok(("und".to_string(), 0.0));
    }

    let mut best: Option<(&'static str, usize)> = None;
    for lang in profiles() {
        let dist = out_of_place_distance(&doc_profile, &lang.ranks);
        match best {
            Some((_, d)) if dist >= d => {}
            _ => best = Some((lang.code, dist)),
        }
    }
    let (code, dist) = best.expect("at least one bundled profile");
    let max_dist = (doc_profile.len() * OUT_OF_PLACE) as f64;
    let confidence = (1.0 - dist as f64 / max_dist).max(0.0);
    Ok((code.to_string(), confidence))
}

fn out_of_place_distance(doc_profile: &[String], reference: &HashMap<String, usize>) -> usize {
    doc_profile
        .iter()
        .enumerate()
        .map(|(rank, gram)| match reference.get(gram) {
            Some(&ref_rank) => rank.abs_diff(ref_rank),
            None => OUT_OF_PLACE,
        })
        .sum()
}

/// Most frequent n-grams of `text`, highest count first, ties lexicographic.
fn ranked_ngrams(text: &str) -> Vec<String> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for word in alphabetic_words(text) {
        let padded: Vec<char> = std::iter::once('_')
            .chain(word.chars())
            .chain(std::iter::once('_'))
            .collect();
        for n in 1..=MAX_NGRAM {
            if padded.len() < n {
                continue;
            }
            for window in padded.windows(n) {
                *counts.entry(window.iter().collect()).or_insert(0) += 1;
            }
        }
    }
    let mut grams: Vec<(String, u64)> = counts.into_iter().collect();
    grams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    grams.truncate(PROFILE_SIZE);
    grams.into_iter().map(|(g, _)| g).collect()
}

fn rank_map(profile: &[String]) -> HashMap<String, usize> {
    profile
        .iter()
        .enumerate()
        .map(|(rank, gram)| (gram.clone(), rank))
        .collect()
}

fn alphabetic_words(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_sentence_detected() {
        let (code, conf) =
            detect_language("This course was fantastic and very well explained").unwrap();
        assert_eq!(code, "en");
        assert!(conf > 0.5, "confidence {conf} not above 0.5");
    }

    #[test]
    fn spanish_sentence_detected() {
        let (code, _) =
            detect_language("Este curso fue muy bueno y las explicaciones fueron claras").unwrap();
        assert_eq!(code, "es");
    }

    #[test]
    fn french_sentence_detected() {
        let (code, _) =
            detect_language("Ce cours est vraiment très utile et les vidéos sont claires").unwrap();
        assert_eq!(code, "fr");
    }

    #[test]
    fn empty_text_is_error() {
        assert!(matches!(detect_language(""), Err(Error::EmptyText)));
        assert!(matches!(detect_language("   "), Err(Error::EmptyText)));
    }

    #[test]
    fn short_text_is_und() {
        let (code, conf) = detect_language("ok").unwrap();
        assert_eq!(code, "und");
        assert_eq!(conf, 0.0);
    }

    #[test]
    fn seed_texts_classify_themselves() {
        for (code, text) in SEED_TEXTS {
            let (detected, conf) = detect_language(text).unwrap();
            assert_eq!(detected, code);
            assert!(conf > 0.5, "{code} self-confidence {conf}");
        }
    }
}
