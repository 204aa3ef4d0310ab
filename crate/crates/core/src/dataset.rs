//! Dataset construction: ingest exported post records, apply the cleaning
//! rules, split by brand with held-out test brands, sample test sets, and
//! build instruction/target training pairs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_request, AttributeSet, BrandMap, BrandSplit, CaptionRequest, DomainError, Personality,
    PostRecord, RawPostRecord, Variant, PERSONALITY_COUNT,
};
use crate::prompting::{render_instruction, ShotExample};
use crate::providers::{ProviderClient, ProviderError};
use crate::textproc::{
    demojize, detect_english, extract_entities_heuristic, extract_hashtags, extract_urls,
    extract_usernames, is_emoji_only, strip_attributes, word_count,
};

/// Captions shorter than this many words are dropped.
pub const MIN_WORDS: usize = 10;

/// Back-solved validation share of the non-test records.
pub const DEFAULT_VAL_FRACTION: f64 = 0.11;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("insufficient test records for {personality}: need {need}, have {have}")]
    InsufficientTestRecords {
        personality: Personality,
        need: usize,
        have: usize,
    },
    #[error("val_fraction must be in (0, 1), got {0}")]
    InvalidValFraction(f64),
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no description available for record {0:?}")]
    MissingDescription(String),
    #[error("entity extraction failed: {0}")]
    Entity(String),
    #[error(transparent)]
    Prompt(#[from] crate::prompting::PromptError),
}

/// First failing cleaning rule, evaluated in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    EmojiOnly,
    TooShort,
    NotEnglish,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::EmojiOnly => f.write_str("emoji_only"),
            DropReason::TooShort => f.write_str("too_short"),
            DropReason::NotEnglish => f.write_str("not_english"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CleanReport {
    pub kept: Vec<PostRecord>,
    pub dropped: Vec<(PostRecord, DropReason)>,
}

fn first_failing_rule(caption: &str) -> Option<DropReason> {
    if is_emoji_only(caption) {
        Some(DropReason::EmojiOnly)
    } else if word_count(caption) < MIN_WORDS {
        Some(DropReason::TooShort)
    } else if !detect_english(caption) {
        Some(DropReason::NotEnglish)
    } else {
        None
    }
}

/// Drops emoji-only, under-length, and non-English captions, annotating each
/// drop with its first failing rule.
pub fn clean(records: Vec<PostRecord>) -> CleanReport {
    let mut report = CleanReport::default();
    for record in records {
        match first_failing_rule(&record.caption) {
            None => report.kept.push(record),
            Some(reason) => report.dropped.push((record, reason)),
        }
    }
    report
}

#[derive(Debug, Clone, Default)]
pub struct SplitSet {
    pub train: Vec<PostRecord>,
    pub validation: Vec<PostRecord>,
    pub test: Vec<PostRecord>,
}

impl SplitSet {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Routes test-brand records to the test split and divides the rest into
/// train/validation per personality with a seeded shuffle. Deterministic per
/// seed; output order follows the input.
pub fn assign_splits(
    records: Vec<PostRecord>,
    map: &BrandMap,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitSet, DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::InvalidValFraction(val_fraction));
    }
    let mut split = SplitSet::default();
    let mut trainable: Vec<(usize, PostRecord)> = Vec::new();
    for (index, record) in records.into_iter().enumerate() {
        let entry = map
            .lookup(&record.brand)
            .ok_or_else(|| DomainError::UnknownBrand(record.brand.clone()))?;
        match entry.split {
            BrandSplit::Test => split.test.push(record),
            BrandSplit::Train => trainable.push((index, record)),
        }
    }
    let mut validation_indices: Vec<usize> = Vec::new();
    for (slot, personality) in Personality::ALL.into_iter().enumerate() {
        let members: Vec<usize> = trainable
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| r.personality == personality)
            .map(|(i, _)| i)
            .collect();
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(
            seed.wrapping_add(slot as u64),
        ));
        let n_val = ((members.len() as f64) * val_fraction).round() as usize;
        validation_indices.extend(shuffled.into_iter().take(n_val));
    }
    validation_indices.sort_unstable();
    for (i, (_, record)) in trainable.into_iter().enumerate() {
        if validation_indices.binary_search(&i).is_ok() {
            split.validation.push(record);
        } else {
            split.train.push(record);
        }
    }
    Ok(split)
}

/// Per-personality record counts for the three splits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsTable {
    pub rows: [(Personality, SplitCounts); PERSONALITY_COUNT],
    pub total: SplitCounts,
}

pub fn stats(split: &SplitSet) -> StatsTable {
    let mut rows = Personality::ALL.map(|p| (p, SplitCounts::default()));
    let mut total = SplitCounts::default();
    for record in &split.train {
        rows[record.personality.index()].1.train += 1;
        total.train += 1;
    }
    for record in &split.validation {
        rows[record.personality.index()].1.validation += 1;
        total.validation += 1;
    }
    for record in &split.test {
        rows[record.personality.index()].1.test += 1;
        total.test += 1;
    }
    StatsTable { rows, total }
}

impl StatsTable {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16}{:>8}{:>12}{:>8}\n",
            "Personality", "Train", "Validation", "Test"
        ));
        for (personality, counts) in &self.rows {
            out.push_str(&format!(
                "{:<16}{:>8}{:>12}{:>8}\n",
                personality.name(),
                counts.train,
                counts.validation,
                counts.test
            ));
        }
        out.push_str(&format!(
            "{:<16}{:>8}{:>12}{:>8}\n",
            "Total", self.total.train, self.total.validation, self.total.test
        ));
        out
    }
}

/// Seeded uniform sample without replacement, per personality, from the test
/// split. Output preserves test-split order.
pub fn sample_test(
    split: &SplitSet,
    per_personality: usize,
    seed: u64,
) -> Result<Vec<PostRecord>, DatasetError> {
    let mut picked_indices: Vec<usize> = Vec::new();
    for (slot, personality) in Personality::ALL.into_iter().enumerate() {
        let members: Vec<usize> = split
            .test
            .iter()
            .enumerate()
            .filter(|(_, r)| r.personality == personality)
            .map(|(i, _)| i)
            .collect();
        if members.len() < per_personality {
            return Err(DatasetError::InsufficientTestRecords {
                personality,
                need: per_personality,
                have: members.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(slot as u64));
        let mut chosen: Vec<usize> = members
            .choose_multiple(&mut rng, per_personality)
            .copied()
            .collect();
        chosen.sort_unstable();
        picked_indices.extend(chosen);
    }
    picked_indices.sort_unstable();
    Ok(picked_indices
        .into_iter()
        .map(|i| split.test[i].clone())
        .collect())
}

/// Source of named entities for instruction construction. The bundled
/// heuristic is the offline default; an LLM-backed extractor can be swapped
/// in behind the same interface.
pub trait EntityProvider: Send + Sync {
    fn extract(&self, text: &str) -> Result<Vec<String>, DatasetError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicEntityProvider;

impl EntityProvider for HeuristicEntityProvider {
    fn extract(&self, text: &str) -> Result<Vec<String>, DatasetError> {
        Ok(extract_entities_heuristic(text))
    }
}

/// One supervised fine-tuning pair: the rendered instruction and the
/// demojized ground-truth caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub instruction: String,
    pub target: String,
    pub personality: Personality,
    pub variant: Variant,
}

/// Extracts the caption's attributes (grammars for hashtags/usernames/URLs,
/// the entity provider for named entities).
pub fn attributes_of_caption(
    caption: &str,
    entities: &dyn EntityProvider,
) -> Result<AttributeSet, DatasetError> {
    Ok(AttributeSet {
        hashtags: extract_hashtags(caption),
        usernames: extract_usernames(caption),
        urls: extract_urls(caption),
        named_entities: entities.extract(caption)?,
    })
}

/// Builds the instruction/target pair for one record. `description` is the
/// record's Part-1 image description (or a stored stand-in).
pub fn build_training_pair(
    record: &PostRecord,
    description: &str,
    variant: Variant,
    entities: &dyn EntityProvider,
) -> Result<TrainingPair, DatasetError> {
    let attributes = attributes_of_caption(&record.caption, entities)?;
    let context = strip_attributes(description, &attributes);
    let context = if context.is_empty() {
        description.to_string()
    } else {
        context
    };
    let request = validate_request(CaptionRequest {
        description: context,
        personality: record.personality,
        attributes,
        variant,
        shots: 0,
        model_id: String::new(),
    })?;
    let instruction = render_instruction(&request).text;
    Ok(TrainingPair {
        instruction,
        target: demojize(&record.caption),
        personality: record.personality,
        variant,
    })
}

/// Batch pair construction. Descriptions come from `stored` (keyed by record
/// id) when present, otherwise from the captioning provider.
pub async fn build_training_pairs(
    client: &ProviderClient,
    caption_model: &str,
    records: &[PostRecord],
    variant: Variant,
    entities: &dyn EntityProvider,
    stored: Option<&HashMap<String, String>>,
) -> Result<Vec<TrainingPair>, DatasetError> {
    let mut pairs = Vec::with_capacity(records.len());
    for record in records {
        let description = match stored.and_then(|m| m.get(&record.id)) {
            Some(description) => description.clone(),
            None => {
                let image_ref = record
                    .image_ref
                    .as_deref()
                    .ok_or_else(|| DatasetError::MissingDescription(record.id.clone()))?;
                client.describe_image(image_ref, caption_model).await?
            }
        };
        pairs.push(build_training_pair(
            record,
            &description,
            variant,
            entities,
        )?);
    }
    Ok(pairs)
}

/// Turns a cleaned record into an in-context example for few-shot prompting.
pub fn record_to_shot(
    record: &PostRecord,
    description: &str,
    entities: &dyn EntityProvider,
) -> Result<ShotExample, DatasetError> {
    Ok(ShotExample {
        description: description.to_string(),
        attributes: attributes_of_caption(&record.caption, entities)?,
        personality: record.personality,
        target_caption: record.caption.clone(),
    })
}

// ---------------------------------------------------------------------------
// JSONL I/O

/// Reads `{"id", "brand", "image_ref", "caption", "collected_at"}` lines,
/// resolving each brand against the map. Errors carry 1-based line numbers.
pub fn read_post_records(path: &Path, map: &BrandMap) -> Result<Vec<PostRecord>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPostRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        let record = PostRecord::from_raw(raw, map).map_err(|e| match e {
            DomainError::UnknownBrand(brand) => DatasetError::MalformedRecord {
                line: i + 1,
                message: format!("unknown brand {brand:?}"),
            },
            other => DatasetError::Domain(other),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_post_records(path: &Path, records: &[PostRecord]) -> Result<(), DatasetError> {
    let mut file = std::fs::File::create(path)?;
    for record in records {
        serde_json::to_writer(&mut file, &record.to_raw()).map_err(|e| {
            DatasetError::MalformedRecord {
                line: 0,
                message: e.to_string(),
            }
        })?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_shot_examples(path: &Path) -> Result<Vec<ShotExample>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut shots = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let shot: ShotExample =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        shots.push(shot);
    }
    Ok(shots)
}

/// `{"id": record_id, "description": text}` lines for fixture-mode
/// descriptions.
pub fn read_descriptions(path: &Path) -> Result<HashMap<String, String>, DatasetError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        description: String,
    }
    let file = std::fs::File::open(path)?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(row.id, row.description);
    }
    Ok(out)
}

/// Common Instagram export shape accepted by the importer.
#[derive(Debug, Clone, Deserialize)]
pub struct ExportedPost {
    pub shortcode: String,
    pub caption: String,
    #[serde(default)]
    pub display_url: Option<String>,
    pub taken_at: i64,
    pub owner_username: String,
}

impl ExportedPost {
    pub fn into_raw(self) -> RawPostRecord {
        let collected_at = chrono::DateTime::from_timestamp(self.taken_at, 0)
            .map(|dt| dt.date_naive())
            .unwrap_or_default();
        RawPostRecord {
            id: self.shortcode,
            brand: self.owner_username,
            image_ref: self.display_url,
            caption: self.caption,
            collected_at,
        }
    }
}

pub fn import_export_file(path: &Path) -> Result<Vec<RawPostRecord>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: ExportedPost =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(post.into_raw());
    }
    Ok(out)
}
