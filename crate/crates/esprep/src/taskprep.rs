//! Converts downstream datasets into (source, target) fine-tuning pairs:
//! summarization, generative QA, split-and-rephrase, dialogue, translation
//! and text-to-text classification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Summarization,
    Qa,
    SplitRephrase,
    Dialogue,
    Translation,
    Classification,
}

/// One raw dataset instance: a task tag plus an open field map. Dialogue
/// sessions carry their utterances in `utterances`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskExample {
    pub task: TaskKind,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub utterances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub source: String,
    pub target: String,
    pub id: u64,
}

pub const DEFAULT_QA_TEMPLATE: &str = "pregunta: {q} contexto: {c}";
pub const DEFAULT_SPLIT_SEP: &str = "<s>";
pub const DIALOGUE_JOINER: &str = " </s> ";

fn require<'a>(ex: &'a TaskExample, field: &str) -> Result<&'a str> {
    match ex.fields.get(field) {
        Some(v) if !v.trim().is_empty() => Ok(v),
        Some(_) => Err(Error::Data(format!("field '{field}' is empty"))),
        None => Err(Error::Data(format!("missing field '{field}'"))),
    }
}

/// source = document, target = summary, both verbatim.
pub fn format_summarization(ex: &TaskExample, id: u64) -> Result<Pair> {
    Ok(Pair {
        source: require(ex, "document")?.to_string(),
        target: require(ex, "summary")?.to_string(),
        id,
    })
}

/// Concatenates question and supporting context through the template; the
/// target is the answer text, not positions.
pub fn format_qa(ex: &TaskExample, template: &str, id: u64) -> Result<Pair> {
    if !template.contains("{q}") || !template.contains("{c}") {
        return Err(Error::Config(format!(
            "QA template must contain {{q}} and {{c}}: {template:?}"
        )));
    }
    let source = template
        .replace("{q}", require(ex, "question")?)
        .replace("{c}", require(ex, "context")?);
    Ok(Pair {
        source,
        target: require(ex, "answer")?.to_string(),
        id,
    })
}

/// source = the long sentence; target = the split sentences joined by the
/// separator token.
pub fn format_split_rephrase(ex: &TaskExample, sep_token: &str, id: u64) -> Result<Pair> {
    let source = require(ex, "source")?.to_string();
    let targets: Vec<&str> = ex
        .utterances
        .iter()
        .map(|s| s.as_str())
        .filter(|s| !s.trim().is_empty())
        .collect();
    if targets.len() < 2 {
        return Err(Error::Data(format!(
            "split_rephrase needs >= 2 target sentences, got {}",
            targets.len()
        )));
    }
    Ok(Pair {
        source,
        target: targets.join(&format!(" {sep_token} ")),
        id,
    })
}

/// Expands one session of n utterances into n-1 (context, response) pairs.
/// `history_max` limits how many past utterances form the context; 0 means
/// unlimited. Sessions with fewer than 2 utterances yield no pairs (the
/// caller counts the skip).
pub fn format_dialogue(session: &[String], history_max: usize, base_id: u64) -> Vec<Pair> {
    if session.len() < 2 {
        return Vec::new();
    }
    (1..session.len())
        .map(|k| {
            let from = if history_max == 0 {
                0
            } else {
                k.saturating_sub(history_max)
            };
            Pair {
                source: session[from..k].join(DIALOGUE_JOINER),
                target: session[k].clone(),
                id: base_id + (k as u64 - 1),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

pub fn format_translation(ex: &TaskExample, direction: Direction, id: u64) -> Result<Pair> {
    let src = require(ex, "src_text")?.to_string();
    let tgt = require(ex, "tgt_text")?.to_string();
    let (source, target) = match direction {
        Direction::Forward => (src, tgt),
        Direction::Reverse => (tgt, src),
    };
    Ok(Pair { source, target, id })
}

/// Text-to-text classification: paired inputs become
/// `"{task} premisa: {p} hipótesis: {h}"`, single-text inputs
/// `"{task} texto: {t}"`. Regression labels (field `score`) format to one
/// decimal with round-half-even.
pub fn format_classification_t2t(
    ex: &TaskExample,
    task_name: &str,
    label_map: &BTreeMap<String, String>,
    id: u64,
) -> Result<Pair> {
    let source = if ex.fields.contains_key("premise") {
        format!(
            "{task_name} premisa: {} hipótesis: {}",
            require(ex, "premise")?,
            require(ex, "hypothesis")?
        )
    } else {
        format!("{task_name} texto: {}", require(ex, "text")?)
    };
    let target = if let Some(score) = ex.fields.get("score") {
        let value: f64 = score
            .parse()
            .map_err(|_| Error::Data(format!("bad regression score {score:?}")))?;
        format_half_even(value)
    } else {
        let label = require(ex, "label")?;
        label_map
            .get(label)
            .cloned()
            .ok_or_else(|| Error::Data(format!("unknown label {label:?}")))?
    };
    Ok(Pair { source, target, id })
}

/// One-decimal formatting with round-half-even (bankers' rounding).
fn format_half_even(value: f64) -> String {
    let scaled = value * 10.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        if (floor as i64) % 2 == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    format!("{:.1}", rounded / 10.0)
}
