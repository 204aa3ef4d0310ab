//! Evaluation metrics: CLIPScore, semantic cosine similarity, LLM-judge
//! personality classification with majority vote, attribute coverage,
//! confusion matrices with accuracy/macro-F1, and heatmap MSE.

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::GeneratedCaption;
use crate::domain::{AttributeKind, AttributeSet, Personality, PostRecord, PERSONALITY_COUNT};
use crate::prompting::{render_geval_prompt, PromptError};
use crate::providers::{ChatParams, Embedding, ProviderClient, ProviderError};
use crate::textproc::{attribute_presence, strip_attributes, PresenceReport};

/// CLIP-style re-scaling weight from the metric's original definition.
pub const CLIPSCORE_WEIGHT: f64 = 2.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("embedding dimensions differ: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("the confusion matrix is empty")]
    EmptyMatrix,
    #[error("every judge completion was unparseable")]
    AllUnparseable,
    #[error("invalid weight: {0}")]
    InvalidWeight(f64),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// `w · max(cos(img, txt), 0)` — reference-free image/caption relevance.
pub fn clipscore(img: &Embedding, txt: &Embedding, w: f64) -> Result<f64, MetricsError> {
    if w <= 0.0 || !w.is_finite() {
        return Err(MetricsError::InvalidWeight(w));
    }
    let cos = cosine_similarity(img, txt)?;
    Ok(w * cos.max(0.0))
}

/// Plain cosine similarity in [-1, 1].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, MetricsError> {
    if a.dim != b.dim {
        return Err(MetricsError::DimensionMismatch { a: a.dim, b: b.dim });
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// 5×5 confusion counts; rows are the actual personality, columns the
/// predicted one, indexed 0: Sincerity .. 4: Ruggedness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    cells: [[u64; PERSONALITY_COUNT]; PERSONALITY_COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> ConfusionMatrix {
        ConfusionMatrix::default()
    }

    pub fn from_pairs<I>(pairs: I) -> ConfusionMatrix
    where
        I: IntoIterator<Item = (Personality, Personality)>,
    {
        let mut matrix = ConfusionMatrix::new();
        for (actual, predicted) in pairs {
            matrix.add(actual, predicted);
        }
        matrix
    }

    pub fn add(&mut self, actual: Personality, predicted: Personality) {
        self.cells[actual.index()][predicted.index()] += 1;
    }

    pub fn cell(&self, actual: Personality, predicted: Personality) -> u64 {
        self.cells[actual.index()][predicted.index()]
    }

    pub fn set_cell(&mut self, actual: Personality, predicted: Personality, count: u64) {
        self.cells[actual.index()][predicted.index()] = count;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..PERSONALITY_COUNT).map(|i| self.cells[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.cells[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        (0..PERSONALITY_COUNT).map(|i| self.cells[i][j]).sum()
    }
}

/// Percentage of correctly classified items: `100 · trace / total`.
pub fn accuracy(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(100.0 * matrix.trace() as f64 / total as f64)
}

/// Unweighted mean of per-class F1 over the five classes; a class with
/// `P + R = 0` contributes 0.
pub fn macro_f1(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if matrix.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut sum = 0.0;
    for i in 0..PERSONALITY_COUNT {
        let tp = matrix.cells[i][i] as f64;
        let predicted = matrix.col_sum(i) as f64;
        let actual = matrix.row_sum(i) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / PERSONALITY_COUNT as f64)
}

/// Mean squared difference of corresponding cells between two flattened
/// heatmaps (raw counts).
pub fn heatmap_mse(a: &ConfusionMatrix, b: &ConfusionMatrix) -> f64 {
    let mut sum = 0.0;
    for i in 0..PERSONALITY_COUNT {
        for j in 0..PERSONALITY_COUNT {
            let diff = a.cells[i][j] as f64 - b.cells[i][j] as f64;
            sum += diff * diff;
        }
    }
    sum / (PERSONALITY_COUNT * PERSONALITY_COUNT) as f64
}

/// Majority-vote outcome of the personality judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JudgeVerdict {
    pub personality: Personality,
    pub votes: [u32; PERSONALITY_COUNT],
    /// Completions with no recognizable personality noun.
    pub discarded: u32,
}

impl JudgeVerdict {
    pub fn votes_for(&self, p: Personality) -> u32 {
        self.votes[p.index()]
    }
}

/// Earliest personality noun mentioned in a judge completion,
/// case-insensitive. `None` when the completion names no personality.
pub fn parse_judge_completion(text: &str) -> Option<Personality> {
    let lower = text.to_lowercase();
    Personality::ALL
        .into_iter()
        .filter_map(|p| lower.find(&p.name().to_lowercase()).map(|pos| (pos, p)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, p)| p)
}

/// Tallies personality votes over completions. Ties break toward the
/// personality whose first vote appeared earliest.
pub fn tally_votes(completions: &[String]) -> Result<JudgeVerdict, MetricsError> {
    let mut votes = [0u32; PERSONALITY_COUNT];
    let mut first_seen = [usize::MAX; PERSONALITY_COUNT];
    let mut discarded = 0u32;
    for (i, completion) in completions.iter().enumerate() {
        match parse_judge_completion(completion) {
            Some(p) => {
                votes[p.index()] += 1;
                if first_seen[p.index()] == usize::MAX {
                    first_seen[p.index()] = i;
                }
            }
            None => discarded += 1,
        }
    }
    let winner = Personality::ALL
        .into_iter()
        .filter(|p| votes[p.index()] > 0)
        .min_by_key(|p| (std::cmp::Reverse(votes[p.index()]), first_seen[p.index()]))
        .ok_or(MetricsError::AllUnparseable)?;
    Ok(JudgeVerdict {
        personality: winner,
        votes,
        discarded,
    })
}

/// Renders the judge prompt, samples `n` completions, and majority-votes the
/// personality.
pub async fn judge_personality(
    client: &ProviderClient,
    params: &ChatParams,
    caption: &str,
    n: u32,
) -> Result<JudgeVerdict, MetricsError> {
    let prompt = render_geval_prompt(caption)?;
    let sampled = params.clone().with_n(n.max(1));
    let reply = client.chat(&prompt.messages, &sampled).await?;
    tally_votes(&reply.completions)
}

/// Per-kind coverage percentages. `None` means the kind was never provided
/// (not applicable), which is distinct from 0%.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub hashtags: Option<f64>,
    pub entities: Option<f64>,
    pub usernames: Option<f64>,
    pub urls: Option<f64>,
}

impl CoverageReport {
    pub fn kind(&self, kind: AttributeKind) -> Option<f64> {
        match kind {
            AttributeKind::Hashtags => self.hashtags,
            AttributeKind::NamedEntities => self.entities,
            AttributeKind::Usernames => self.usernames,
            AttributeKind::Urls => self.urls,
        }
    }

    fn set(&mut self, kind: AttributeKind, value: Option<f64>) {
        match kind {
            AttributeKind::Hashtags => self.hashtags = value,
            AttributeKind::NamedEntities => self.entities = value,
            AttributeKind::Usernames => self.usernames = value,
            AttributeKind::Urls => self.urls = value,
        }
    }
}

/// For each kind: among rows that provided at least one item of the kind,
/// the percentage whose captions contained all of them.
pub fn coverage<'a, I>(rows: I) -> CoverageReport
where
    I: IntoIterator<Item = (&'a AttributeSet, &'a PresenceReport)>,
{
    let mut provided = [0usize; 4];
    let mut covered = [0usize; 4];
    for (attrs, presence) in rows {
        for (slot, kind) in AttributeKind::REPORT_ORDER.into_iter().enumerate() {
            if attrs.values(kind).is_empty() {
                continue;
            }
            provided[slot] += 1;
            if presence.kind(kind).all_present() {
                covered[slot] += 1;
            }
        }
    }
    let mut report = CoverageReport::default();
    for (slot, kind) in AttributeKind::REPORT_ORDER.into_iter().enumerate() {
        let value = if provided[slot] == 0 {
            None
        } else {
            Some(100.0 * covered[slot] as f64 / provided[slot] as f64)
        };
        report.set(kind, value);
    }
    report
}

/// One generated caption paired with its source record and optional ground
/// truth for evaluation.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub record: Option<PostRecord>,
    pub caption: GeneratedCaption,
    pub ground_truth: Option<String>,
}

impl EvalItem {
    fn ground_truth_caption(&self) -> Option<&str> {
        self.ground_truth
            .as_deref()
            .or(self.record.as_ref().map(|r| r.caption.as_str()))
    }

    fn actual_personality(&self) -> Personality {
        self.record
            .as_ref()
            .map(|r| r.personality)
            .unwrap_or(self.caption.request.personality)
    }
}

/// Knobs for a full evaluation run.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub model_label: String,
    pub skip_clipscore: bool,
    pub skip_geval: bool,
    pub clip_weight: f64,
    pub judge_n: u32,
    pub judge_params: ChatParams,
    pub embed_text_model: String,
    pub embed_image_model: String,
    /// Items evaluated concurrently; results reduce in input order, so the
    /// report is identical for any setting.
    pub concurrency: usize,
}

impl EvalOptions {
    pub fn new(model_label: impl Into<String>) -> EvalOptions {
        EvalOptions {
            model_label: model_label.into(),
            skip_clipscore: false,
            skip_geval: false,
            clip_weight: CLIPSCORE_WEIGHT,
            judge_n: 10,
            judge_params: ChatParams::new("gpt-3.5-turbo"),
            embed_text_model: "all-mpnet-base-v2".to_string(),
            embed_image_model: "ViT-B-32".to_string(),
            concurrency: 4,
        }
    }
}

/// One evaluation run, schema mirroring the quantitative results table:
/// CLIPScore, CLIPScore without the injected attributes, judge accuracy and
/// macro-F1, cosine similarity to the ground truth, and per-kind coverage.
/// `null` fields were skipped or not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n_items: usize,
    pub clipscore: Option<f64>,
    pub clipscore_wo_add_info: Option<f64>,
    pub geval_accuracy: Option<f64>,
    pub geval_macro_f1: Option<f64>,
    pub cosine_similarity: Option<f64>,
    pub coverage: CoverageReport,
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Aligned plain-text table in the report column order.
    pub fn to_table(&self) -> String {
        fn fmt(value: Option<f64>) -> String {
            value.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
        }
        let headers = [
            "Model",
            "CLIPScore",
            "CLIPScore w/o Add. Info",
            "G-Eval Accuracy",
            "G-Eval F1",
            "C.S.",
            "hashtags",
            "entities",
            "usernames",
            "URLs",
        ];
        let row = [
            self.model.clone(),
            fmt(self.clipscore),
            fmt(self.clipscore_wo_add_info),
            fmt(self.geval_accuracy),
            fmt(self.geval_macro_f1),
            fmt(self.cosine_similarity),
            fmt(self.coverage.hashtags),
            fmt(self.coverage.entities),
            fmt(self.coverage.usernames),
            fmt(self.coverage.urls),
        ];
        let widths: Vec<usize> = headers
            .iter()
            .zip(&row)
            .map(|(h, r)| h.len().max(r.len()))
            .collect();
        let mut out = String::new();
        for (i, h) in headers.iter().enumerate() {
            out.push_str(&format!("{:<width$}", h, width = widths[i] + 2));
        }
        out.push('\n');
        for (i, r) in row.iter().enumerate() {
            out.push_str(&format!("{:<width$}", r, width = widths[i] + 2));
        }
        out.push('\n');
        out
    }
}

struct ItemOutcome {
    presence: (AttributeSet, PresenceReport),
    clip: Option<f64>,
    clip_wo: Option<f64>,
    cosine: Option<f64>,
    judged: Option<(Personality, Option<Personality>)>,
    warnings: Vec<String>,
}

async fn evaluate_item(
    client: &ProviderClient,
    opts: &EvalOptions,
    index: usize,
    item: &EvalItem,
) -> ItemOutcome {
    let caption_text = item.caption.text.as_str();
    let attrs = &item.caption.request.attributes;
    let mut outcome = ItemOutcome {
        presence: (attrs.clone(), attribute_presence(caption_text, attrs)),
        clip: None,
        clip_wo: None,
        cosine: None,
        judged: None,
        warnings: Vec::new(),
    };

    if !opts.skip_clipscore {
        let image_ref = item.record.as_ref().and_then(|r| r.image_ref.as_deref());
        if let Some(image_ref) = image_ref {
            let scores: Result<(f64, Option<f64>), MetricsError> = async {
                let img = client
                    .embed_image(image_ref, &opts.embed_image_model)
                    .await?;
                let txt = client
                    .embed_text(caption_text, &opts.embed_text_model)
                    .await?;
                let full = clipscore(&img, &txt, opts.clip_weight)?;
                let stripped = strip_attributes(caption_text, attrs);
                let without = if stripped.is_empty() {
                    None
                } else {
                    let txt_wo = client.embed_text(&stripped, &opts.embed_text_model).await?;
                    Some(clipscore(&img, &txt_wo, opts.clip_weight)?)
                };
                Ok((full, without))
            }
            .await;
            match scores {
                Ok((full, without)) => {
                    outcome.clip = Some(full);
                    outcome.clip_wo = without;
                }
                Err(e) => outcome
                    .warnings
                    .push(format!("item {index}: clipscore failed: {e}")),
            }
        }
    }

    if let Some(truth) = item.ground_truth_caption() {
        if !truth.is_empty() && !caption_text.is_empty() {
            let cos: Result<f64, MetricsError> = async {
                let a = client
                    .embed_text(caption_text, &opts.embed_text_model)
                    .await?;
                let b = client.embed_text(truth, &opts.embed_text_model).await?;
                cosine_similarity(&a, &b)
            }
            .await;
            match cos {
                Ok(value) => outcome.cosine = Some(value),
                Err(e) => outcome
                    .warnings
                    .push(format!("item {index}: cosine similarity failed: {e}")),
            }
        }
    }

    if !opts.skip_geval {
        let actual = item.actual_personality();
        match judge_personality(client, &opts.judge_params, caption_text, opts.judge_n).await {
            Ok(verdict) => outcome.judged = Some((actual, Some(verdict.personality))),
            Err(MetricsError::AllUnparseable) => {
                // conservative scoring: unparseable counts as incorrect
                outcome.judged = Some((actual, None));
            }
            Err(e) => outcome
                .warnings
                .push(format!("item {index}: judge failed: {e}")),
        }
    }

    outcome
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Runs every metric over the items and assembles the report. Items are
/// processed concurrently (bounded by `opts.concurrency`) and reduced in
/// input order, so the result is byte-stable across thread counts.
pub async fn evaluate_run(
    client: &ProviderClient,
    items: &[EvalItem],
    opts: &EvalOptions,
) -> EvalReport {
    let outcomes: Vec<ItemOutcome> = stream::iter(
        items
            .iter()
            .enumerate()
            .map(|(i, item)| evaluate_item(client, opts, i, item)),
    )
    .buffered(opts.concurrency.max(1))
    .collect()
    .await;

    let mut clip = Vec::new();
    let mut clip_wo = Vec::new();
    let mut cosine = Vec::new();
    let mut judged_total = 0usize;
    let mut judged_correct = 0usize;
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    for outcome in &outcomes {
        if let Some(v) = outcome.clip {
            clip.push(v);
        }
        if let Some(v) = outcome.clip_wo {
            clip_wo.push(v);
        }
        if let Some(v) = outcome.cosine {
            cosine.push(v);
        }
        if let Some((actual, predicted)) = outcome.judged {
            judged_total += 1;
            if let Some(predicted) = predicted {
                pairs.push((actual, predicted));
                if predicted == actual {
                    judged_correct += 1;
                }
            }
        }
        rows.push((&outcome.presence.0, &outcome.presence.1));
        warnings.extend(outcome.warnings.iter().cloned());
    }

    let matrix = ConfusionMatrix::from_pairs(pairs.iter().copied());
    let geval_accuracy = if judged_total > 0 {
        Some(100.0 * judged_correct as f64 / judged_total as f64)
    } else {
        None
    };
    let geval_macro_f1 = macro_f1(&matrix).ok();

    EvalReport {
        model: opts.model_label.clone(),
        n_items: items.len(),
        clipscore: mean(&clip),
        clipscore_wo_add_info: mean(&clip_wo),
        geval_accuracy,
        geval_macro_f1,
        cosine_similarity: mean(&cosine),
        coverage: coverage(rows),
        warnings,
    }
}
