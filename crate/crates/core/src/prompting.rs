//! Rendering of the three prompt families — fine-tuned-LLM instructions,
//! zero/few-shot chat prompts, and the personality judge prompt — plus
//! few-shot example selection.
//!
//! All fixed prompt text lives in template resources under
//! `resources/templates/`. Templates use `{name}` placeholders; a segment
//! wrapped in `[[...]]` is emitted only when a placeholder inside it expands
//! to a non-empty value.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AttributeKind, AttributeSet, ChatMessage, Personality, ValidatedRequest, Variant,
};

const INSTRUCTION_SELECTIVE: &str =
    include_str!("../resources/templates/instruction_selective.txt");
const INSTRUCTION_NONSELECTIVE: &str =
    include_str!("../resources/templates/instruction_nonselective.txt");
const CHAT_SELECTIVE: &str = include_str!("../resources/templates/chat_selective.txt");
const CHAT_NONSELECTIVE: &str = include_str!("../resources/templates/chat_nonselective.txt");
const CHAT_BLOCK: &str = include_str!("../resources/templates/chat_block.txt");
const TONALITY_BAN: &str = include_str!("../resources/templates/tonality_ban.txt");
const GEVAL: &str = include_str!("../resources/templates/geval.txt");

/// Marker the judge template carries for caption substitution.
pub const GEVAL_CAPTION_MARKER: &str = "##__caption__##";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("expected {expected} shot examples, got {got}")]
    ShotCountMismatch { expected: usize, got: usize },
    #[error("not enough shot examples: need {need}, have {have}")]
    NotEnoughExamples { need: usize, have: usize },
    #[error("shot count {0} exceeds the maximum of 4")]
    TooManyShots(usize),
    #[error("shot personality {shot} does not match the requested {requested}")]
    ShotPersonalityMismatch {
        shot: Personality,
        requested: Personality,
    },
    #[error("shot example has an empty target caption")]
    EmptyShotTarget,
    #[error("caption must not be empty")]
    EmptyCaption,
}

/// An in-context example drawn from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotExample {
    pub description: String,
    #[serde(default)]
    pub attributes: AttributeSet,
    pub personality: Personality,
    pub target_caption: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Instruction,
    ChatMessages,
    Judge,
}

/// A fully rendered prompt: flat text plus the ordered message list sent to
/// chat endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub variant: Option<Variant>,
    pub text: String,
    pub messages: Vec<ChatMessage>,
}

impl RenderedPrompt {
    fn single_user(kind: PromptKind, variant: Option<Variant>, text: String) -> RenderedPrompt {
        let messages = vec![ChatMessage::user(text.clone())];
        RenderedPrompt {
            kind,
            variant,
            text,
            messages,
        }
    }
}

fn tpl(raw: &str) -> &str {
    raw.strip_suffix('\n').unwrap_or(raw)
}

fn substitute(segment: &str, vars: &[(&str, &str)]) -> String {
    let mut out = segment.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Expands `{name}` placeholders and drops `[[...]]` segments whose
/// placeholders are all empty.
fn expand(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find("[[") {
        out.push_str(&substitute(&rest[..start], vars));
        let after = &rest[start + 2..];
        let end = after.find("]]").expect("template has an unclosed [[ block");
        let block = &after[..end];
        let keep = vars
            .iter()
            .any(|(key, value)| !value.is_empty() && block.contains(&format!("{{{key}}}")));
        if keep {
            out.push_str(&substitute(block, vars));
        }
        rest = &after[end + 2..];
    }
    out.push_str(&substitute(rest, vars));
    out
}

/// `"Kind: v1, v2."` — one line per present kind for the selective variant.
fn selective_attribute_lines(attrs: &AttributeSet) -> String {
    AttributeKind::PROMPT_ORDER
        .into_iter()
        .filter(|k| !attrs.values(*k).is_empty())
        .map(|k| format!("{}: {}.", k.prompt_label(), attrs.values(k).join(", ")))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A single line listing all four kinds, `None.` for absent ones.
fn nonselective_attribute_line(attrs: &AttributeSet) -> String {
    AttributeKind::PROMPT_ORDER
        .into_iter()
        .map(|k| {
            let values = attrs.values(k);
            if values.is_empty() {
                format!("{}: None.", k.prompt_label())
            } else {
                format!("{}: {}.", k.prompt_label(), values.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn attribute_block(attrs: &AttributeSet, variant: Variant) -> String {
    match variant {
        Variant::Selective => selective_attribute_lines(attrs),
        Variant::NonSelective => nonselective_attribute_line(attrs),
    }
}

/// Lowercase names of the present kinds, prompt order, comma-joined.
fn present_kinds_phrase(attrs: &AttributeSet) -> String {
    attrs
        .present_kinds()
        .into_iter()
        .map(|k| k.prompt_label().to_lowercase())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the fine-tuning style instruction for the request.
pub fn render_instruction(req: &ValidatedRequest) -> RenderedPrompt {
    let adjective = req.personality.adjective();
    let attributes = attribute_block(&req.attributes, req.variant);
    let kinds = present_kinds_phrase(&req.attributes);
    let template = match req.variant {
        Variant::Selective => tpl(INSTRUCTION_SELECTIVE),
        Variant::NonSelective => tpl(INSTRUCTION_NONSELECTIVE),
    };
    let text = expand(
        template,
        &[
            ("adjective", adjective),
            ("kinds", &kinds),
            ("description", &req.description),
            ("attributes", &attributes),
        ],
    );
    RenderedPrompt::single_user(PromptKind::Instruction, Some(req.variant), text)
}

fn render_block(
    description: &str,
    attrs: &AttributeSet,
    variant: Variant,
    target: Option<&str>,
) -> String {
    let attributes = attribute_block(attrs, variant);
    expand(
        tpl(CHAT_BLOCK),
        &[
            ("description", description),
            ("attributes", &attributes),
            ("target", target.unwrap_or("")),
        ],
    )
}

/// Renders the zero/few-shot chat prompt. Zero-shot renders carry an explicit
/// sentence banning the tonality word; few-shot renders do not.
pub fn render_chat_prompt(
    req: &ValidatedRequest,
    shots: &[ShotExample],
) -> Result<RenderedPrompt, PromptError> {
    if shots.len() != req.shots as usize {
        return Err(PromptError::ShotCountMismatch {
            expected: req.shots as usize,
            got: shots.len(),
        });
    }
    for shot in shots {
        if shot.personality != req.personality {
            return Err(PromptError::ShotPersonalityMismatch {
                shot: shot.personality,
                requested: req.personality,
            });
        }
        if shot.target_caption.trim().is_empty() {
            return Err(PromptError::EmptyShotTarget);
        }
    }

    let adjective = req.personality.adjective();
    let ban = if shots.is_empty() {
        expand(tpl(TONALITY_BAN), &[("adjective", adjective)])
    } else {
        String::new()
    };

    let mut blocks: Vec<String> = shots
        .iter()
        .map(|s| {
            render_block(
                &s.description,
                &s.attributes,
                req.variant,
                Some(&s.target_caption),
            )
        })
        .collect();
    blocks.push(render_block(
        &req.description,
        &req.attributes,
        req.variant,
        None,
    ));
    let blocks = blocks.join("\n\n");

    let template = match req.variant {
        Variant::Selective => tpl(CHAT_SELECTIVE),
        Variant::NonSelective => tpl(CHAT_NONSELECTIVE),
    };
    let text = expand(
        template,
        &[("adjective", adjective), ("ban", &ban), ("blocks", &blocks)],
    );
    Ok(RenderedPrompt::single_user(
        PromptKind::ChatMessages,
        Some(req.variant),
        text,
    ))
}

/// Renders the judge prompt with the caption substituted for the marker
/// (single pass: a marker inside the caption itself is preserved).
pub fn render_geval_prompt(caption: &str) -> Result<RenderedPrompt, PromptError> {
    if caption.trim().is_empty() {
        return Err(PromptError::EmptyCaption);
    }
    let text = tpl(GEVAL).replacen(GEVAL_CAPTION_MARKER, caption, 1);
    Ok(RenderedPrompt::single_user(PromptKind::Judge, None, text))
}

/// Deterministically picks `k` in-context examples for the personality,
/// preferring examples whose attribute sets cover the most kinds; ties break
/// by a seeded shuffle.
pub fn select_shots(
    train: &[ShotExample],
    personality: Personality,
    k: usize,
    seed: u64,
) -> Result<Vec<ShotExample>, PromptError> {
    if k > 4 {
        return Err(PromptError::TooManyShots(k));
    }
    let candidates: Vec<&ShotExample> = train
        .iter()
        .filter(|s| s.personality == personality)
        .collect();
    if candidates.len() < k {
        return Err(PromptError::NotEnoughExamples {
            need: k,
            have: candidates.len(),
        });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rank = vec![0usize; candidates.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank[idx] = r;
    }
    let mut indices: Vec<usize> = (0..candidates.len()).collect();
    indices.sort_by_key(|&i| {
        (
            std::cmp::Reverse(candidates[i].attributes.present_kinds().len()),
            rank[i],
        )
    });
    Ok(indices
        .into_iter()
        .take(k)
        .map(|i| candidates[i].clone())
        .collect())
}
