//! Character-3-gram Naive Bayes language identification.
//!
//! Stands in for a pretrained classifier: profiles are trained from
//! user-supplied seed corpora, one per language, with add-one smoothing over
//! the joint trigram vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

const NGRAM: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LangProfile {
    /// Smoothed log-probability per seen trigram.
    log_probs: HashMap<String, f64>,
    /// Smoothed log-probability for any trigram unseen in this language.
    unseen_log_prob: f64,
    log_prior: f64,
}

/// Trained multinomial model over character trigrams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LangModel {
    profiles: BTreeMap<String, LangProfile>,
}

fn trigrams(text: &str) -> impl Iterator<Item = String> + '_ {
    let chars: Vec<char> = std::iter::once(' ')
        .chain(text.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    (0..chars.len().saturating_sub(NGRAM - 1))
        .map(move |i| chars[i..i + NGRAM].iter().collect())
}

impl LangModel {
    /// Trains from seed corpora, one document stream per language.
    /// Requires at least two languages and 10,000 characters per language.
    pub fn train<I>(seed_corpora: BTreeMap<String, I>) -> Result<LangModel>
    where
        I: IntoIterator<Item = Document>,
    {
        if seed_corpora.len() < 2 {
            return Err(Error::Config(format!(
                "language model needs >= 2 seed languages, got {}",
                seed_corpora.len()
            )));
        }
        let mut counts: BTreeMap<String, HashMap<String, u64>> = BTreeMap::new();
        for (lang, docs) in seed_corpora {
            let mut table: HashMap<String, u64> = HashMap::new();
            let mut chars_seen = 0usize;
            for doc in docs {
                chars_seen += doc.text.chars().count();
                for g in trigrams(&doc.text) {
                    *table.entry(g).or_insert(0) += 1;
                }
            }
            if chars_seen < 10_000 {
                return Err(Error::Config(format!(
                    "seed corpus for '{lang}' has {chars_seen} chars, need >= 10000"
                )));
            }
            counts.insert(lang, table);
        }

        // Shared smoothing vocabulary: every trigram seen in any language.
        let mut vocab: std::collections::BTreeSet<&String> = Default::default();
        for table in counts.values() {
            vocab.extend(table.keys());
        }
        let vocab_size = vocab.len() as f64;
        let log_prior = -(counts.len() as f64).ln();

        let profiles = counts
            .iter()
            .map(|(lang, table)| {
                let total: u64 = table.values().sum();
                let denom = total as f64 + vocab_size;
                let log_probs = table
                    .iter()
                    .map(|(g, &c)| (g.clone(), ((c as f64 + 1.0) / denom).ln()))
                    .collect();
                let profile = LangProfile {
                    log_probs,
                    unseen_log_prob: (1.0 / denom).ln(),
                    log_prior,
                };
                (lang.clone(), profile)
            })
            .collect();
        Ok(LangModel { profiles })
    }

    pub fn languages(&self) -> Vec<&str> {
        self.profiles.keys().map(|s| s.as_str()).collect()
    }

    /// Posterior log-score per language, unnormalized.
    fn log_scores(&self, text: &str) -> Vec<(&str, f64)> {
        let grams: Vec<String> = trigrams(text).collect();
        self.profiles
            .iter()
            .map(|(lang, p)| {
                let ll: f64 = grams
                    .iter()
                    .map(|g| p.log_probs.get(g).copied().unwrap_or(p.unseen_log_prob))
                    .sum();
                (lang.as_str(), p.log_prior + ll)
            })
            .collect()
    }

    /// Normalized posterior over all model languages; sums to 1.
    pub fn posteriors(&self, text: &str) -> Result<Vec<(String, f64)>> {
        if text.trim().is_empty() {
            return Err(Error::Data("empty input".into()));
        }
        let scores = self.log_scores(text);
        let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|(_, s)| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        Ok(scores
            .iter()
            .zip(&exp)
            .map(|((lang, _), e)| (lang.to_string(), e / z))
            .collect())
    }

    /// Top language and its posterior confidence.
    pub fn detect(&self, text: &str) -> Result<(String, f64)> {
        let posts = self.posteriors(text)?;
        let best = posts
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("model has languages");
        Ok(best)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path.as_ref(), json).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LangModel> {
        let data =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        serde_json::from_str(&data).map_err(|e| Error::Data(format!("bad language model: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(text: &str) -> Vec<Document> {
        // Repeat to satisfy the minimum seed size.
        let repeated = std::iter::repeat(text)
            .take(1 + 10_000 / text.len().max(1))
            .collect::<Vec<_>>()
            .join(" ");
        vec![Document::new(0, repeated)]
    }

    fn toy_model() -> LangModel {
        let mut seeds = BTreeMap::new();
        seeds.insert(
            "es".to_string(),
            seed("el perro come pan y la niña bebe agua en la casa blanca"),
        );
        seeds.insert(
            "en".to_string(),
            seed("the quick brown fox jumps over the lazy dog every morning"),
        );
        LangModel::train(seeds).unwrap()
    }

    #[test]
    fn classifies_seed_sentences_to_their_language() {
        let model = toy_model();
        let (lang, conf) = model.detect("la niña bebe agua").unwrap();
        assert_eq!(lang, "es");
        assert!(conf > 0.9);
        let (lang, _) = model.detect("the quick brown fox").unwrap();
        assert_eq!(lang, "en");
    }

    #[test]
    fn one_language_is_config_error() {
        let mut seeds = BTreeMap::new();
        seeds.insert("es".to_string(), seed("hola mundo"));
        let err = LangModel::train(seeds).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn identical_seeds_give_symmetric_posterior() {
        let text = "un texto idéntico para ambos idiomas de prueba";
        let mut seeds = BTreeMap::new();
        seeds.insert("a".to_string(), seed(text));
        seeds.insert("b".to_string(), seed(text));
        let model = LangModel::train(seeds).unwrap();
        let posts = model.posteriors(text).unwrap();
        for (_, p) in posts {
            assert!((p - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let model = toy_model();
        let posts = model.posteriors("texto cualquiera de prueba").unwrap();
        let sum: f64 = posts.iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_text_is_error() {
        let model = toy_model();
        assert!(model.detect("   ").is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let model = toy_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lang.json");
        model.save(&path).unwrap();
        let back = LangModel::load(&path).unwrap();
        let a = model.detect("la casa blanca").unwrap();
        let b = back.detect("la casa blanca").unwrap();
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn training_sentence_posterior_matches_direct_bayes() {
        // Direct computation of the posterior from the smoothed tables for a
        // training sentence must agree with detect().
        let model = toy_model();
        let text = "el perro come pan";
        let grams: Vec<String> = trigrams(text).collect();
        let mut lls = Vec::new();
        for lang in ["en", "es"] {
            let p = &model.profiles[lang];
            let ll: f64 = grams
                .iter()
                .map(|g| p.log_probs.get(g).copied().unwrap_or(p.unseen_log_prob))
                .sum::<f64>()
                + p.log_prior;
            lls.push((lang, ll));
        }
        let max = lls.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lls.iter().map(|x| (x.1 - max).exp()).sum();
        let direct_es = (lls.iter().find(|x| x.0 == "es").unwrap().1 - max).exp() / z;
        let (top, conf) = model.detect(text).unwrap();
        assert_eq!(top, "es");
        assert!((conf - direct_es).abs() < 1e-12);
    }
}
