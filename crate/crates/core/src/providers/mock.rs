//! Deterministic offline provider. Entire pipeline runs against this mock are
//! bit-reproducible given a seed.
//!
//! Contracts the rest of the workspace relies on:
//! - chat on a caption prompt echoes the query description followed by every
//!   provided attribute value and a fixed `:sparkles:` suffix;
//! - chat on a judge prompt answers `Brand personality: <Noun>` where the
//!   noun derives from a seeded hash of the caption under evaluation;
//! - scripted responses, when queued, take precedence (one queue entry per
//!   call) so tests can rig exact outputs;
//! - embeddings are unit vectors of dimension 16 derived from a seeded hash
//!   of the input string;
//! - `describe_image` returns `a photo referenced by <image_ref>`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use crate::domain::{AttributeKind, ChatMessage};

use super::{ChatParams, Embedding, ModelProvider, ProviderError};

pub const MOCK_EMBEDDING_DIM: usize = 16;
const MOCK_CAPTION_SUFFIX: &str = ":sparkles:";

pub struct MockProvider {
    seed: u64,
    scripted_chat: Mutex<VecDeque<Vec<String>>>,
    transient_failures: AtomicUsize,
    chat_calls: AtomicUsize,
    embed_text_calls: AtomicUsize,
    embed_image_calls: AtomicUsize,
    describe_calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(seed: u64) -> MockProvider {
        MockProvider {
            seed,
            scripted_chat: Mutex::new(VecDeque::new()),
            transient_failures: AtomicUsize::new(0),
            chat_calls: AtomicUsize::new(0),
            embed_text_calls: AtomicUsize::new(0),
            embed_image_calls: AtomicUsize::new(0),
            describe_calls: AtomicUsize::new(0),
        }
    }

    /// Queues the completions the next chat call returns verbatim.
    pub fn script_chat(&self, completions: Vec<String>) {
        self.scripted_chat
            .lock()
            .expect("mock script lock")
            .push_back(completions);
    }

    /// Makes the next `n` chat/embed/describe calls fail with a transient
    /// error before any other behavior applies.
    pub fn fail_transient(&self, n: usize) {
        self.transient_failures.store(n, Ordering::SeqCst);
    }

    pub fn chat_call_count(&self) -> usize {
        self.chat_calls.load(Ordering::SeqCst)
    }

    pub fn embed_text_call_count(&self) -> usize {
        self.embed_text_calls.load(Ordering::SeqCst)
    }

    pub fn embed_image_call_count(&self) -> usize {
        self.embed_image_calls.load(Ordering::SeqCst)
    }

    pub fn describe_call_count(&self) -> usize {
        self.describe_calls.load(Ordering::SeqCst)
    }

    fn take_transient_failure(&self) -> bool {
        self.transient_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }

    fn hash64(&self, salt: &str, payload: &str) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(salt.as_bytes());
        hasher.update([0]);
        hasher.update(payload.as_bytes());
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
    }

    fn unit_vector(&self, salt: &str, payload: &str) -> Vec<f64> {
        let mut vector = Vec::with_capacity(MOCK_EMBEDDING_DIM);
        for i in 0..MOCK_EMBEDDING_DIM {
            let h = self.hash64(&format!("{salt}:{i}"), payload);
            vector.push((h as f64 / u64::MAX as f64) * 2.0 - 1.0);
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        vector.iter().map(|v| v / norm).collect()
    }

    fn judge_completion(&self, prompt: &str) -> String {
        let caption = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Instagram caption: "))
            .unwrap_or(prompt);
        let personality =
            crate::domain::Personality::ALL[(self.hash64("judge", caption) % 5) as usize];
        format!("Brand personality: {personality}")
    }

    fn echo_caption(prompt: &str) -> String {
        // chat prompts end with a query block; instruction prompts put the
        // description on the second line
        let (description, attr_region) = if prompt.contains("Instagram caption:") {
            let query_start = prompt.rfind("\nText: ").map(|p| p + 1).unwrap_or(0);
            let query = &prompt[query_start..];
            let description = query
                .lines()
                .next()
                .and_then(|l| l.strip_prefix("Text: "))
                .unwrap_or("")
                .to_string();
            let after_description = query.find('\n').map(|p| &query[p + 1..]).unwrap_or("");
            let attr_end = after_description
                .find("Instagram caption:")
                .unwrap_or(after_description.len());
            (description, after_description[..attr_end].to_string())
        } else {
            let mut lines = prompt.lines();
            let _header = lines.next();
            let description = lines.next().unwrap_or("").to_string();
            (description, lines.collect::<Vec<_>>().join("\n"))
        };

        let mut caption = description;
        for kind in AttributeKind::PROMPT_ORDER {
            for value in parse_attribute_values(&attr_region, kind.prompt_label()) {
                caption.push(' ');
                caption.push_str(&value);
            }
        }
        caption.push(' ');
        caption.push_str(MOCK_CAPTION_SUFFIX);
        caption
    }
}

/// Pulls the `, `-joined values that follow `<label>: ` in the attribute
/// region, stopping at the next label or line end. `None` reads as absent.
fn parse_attribute_values(region: &str, label: &str) -> Vec<String> {
    let marker = format!("{label}: ");
    let Some(start) = region.find(&marker) else {
        return Vec::new();
    };
    let rest = &region[start + marker.len()..];
    let mut end = rest.len();
    for other in ["Named Entities: ", "Links: ", "Hashtags: ", "Usernames: "] {
        if other != marker.as_str() {
            if let Some(pos) = rest.find(other) {
                end = end.min(pos);
            }
        }
    }
    if let Some(pos) = rest.find('\n') {
        end = end.min(pos);
    }
    rest[..end]
        .trim()
        .trim_end_matches('.')
        .split(", ")
        .map(|v| v.trim().trim_end_matches('.').to_string())
        .filter(|v| !v.is_empty() && v != "None")
        .collect()
}

#[async_trait]
impl ModelProvider for MockProvider {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
    ) -> Result<Vec<String>, ProviderError> {
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        if self.take_transient_failure() {
            return Err(ProviderError::Transient("scripted failure".to_string()));
        }
        if let Some(scripted) = self
            .scripted_chat
            .lock()
            .expect("mock script lock")
            .pop_front()
        {
            return Ok(scripted);
        }
        let prompt = messages
            .last()
            .map(|m| m.content.as_str())
            .ok_or(ProviderError::EmptyInput("chat messages"))?;
        let completion = if prompt.contains("Brand personality (select from") {
            self.judge_completion(prompt)
        } else {
            Self::echo_caption(prompt)
        };
        Ok(vec![completion; params.n as usize])
    }

    async fn embed_text(&self, text: &str, model_id: &str) -> Result<Embedding, ProviderError> {
        self.embed_text_calls.fetch_add(1, Ordering::SeqCst);
        if self.take_transient_failure() {
            return Err(ProviderError::Transient("scripted failure".to_string()));
        }
        if text.is_empty() {
            return Err(ProviderError::EmptyInput("embedding text"));
        }
        Embedding::new(self.unit_vector("text", text), model_id)
    }

    async fn embed_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<Embedding, ProviderError> {
        self.embed_image_calls.fetch_add(1, Ordering::SeqCst);
        if self.take_transient_failure() {
            return Err(ProviderError::Transient("scripted failure".to_string()));
        }
        Embedding::new(self.unit_vector("image", image_ref), model_id)
    }

    async fn describe_image(
        &self,
        image_ref: &str,
        _model_id: &str,
    ) -> Result<String, ProviderError> {
        self.describe_calls.fetch_add(1, Ordering::SeqCst);
        if self.take_transient_failure() {
            return Err(ProviderError::Transient("scripted failure".to_string()));
        }
        Ok(format!("a photo referenced by {image_ref}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Personality;

    fn call_chat(mock: &MockProvider, prompt: &str, n: u32) -> Vec<String> {
        let messages = [ChatMessage::user(prompt)];
        let params = ChatParams::new("mock-chat").with_n(n);
        futures::executor::block_on(mock.chat(&messages, &params)).unwrap()
    }

    #[test]
    fn echo_contract_includes_description_and_attributes() {
        let mock = MockProvider::new(7);
        let prompt = "instructions here\n\
            Text: a bed with a green comforter and a wooden headboard\n\
            Named Entities: this season.\n\
            Instagram caption:";
        let out = call_chat(&mock, prompt, 1);
        assert_eq!(
            out[0],
            "a bed with a green comforter and a wooden headboard this season :sparkles:"
        );
    }

    #[test]
    fn echo_contract_reads_single_line_nonselective_attributes() {
        let mock = MockProvider::new(7);
        let prompt = "instructions\n\
            Text: a dog on a couch\n\
            Named Entities: PB Comfort Sofa. Links: None. Hashtags: #dogsofinstagram, #doglovers. Usernames: @apriljoy_ful.\n\
            Instagram caption:";
        let out = call_chat(&mock, prompt, 1);
        assert_eq!(
            out[0],
            "a dog on a couch PB Comfort Sofa #dogsofinstagram #doglovers @apriljoy_ful :sparkles:"
        );
    }

    #[test]
    fn echo_contract_handles_instruction_prompts() {
        let mock = MockProvider::new(7);
        let prompt = "Create an Instagram caption from the following text. The tone of the text should be sincere.\n\
            a woman speaks to a crowd\n\
            Usernames: @vp, @wba_global.";
        let out = call_chat(&mock, prompt, 1);
        assert_eq!(
            out[0],
            "a woman speaks to a crowd @vp @wba_global :sparkles:"
        );
    }

    #[test]
    fn judge_prompts_get_a_personality_noun() {
        let mock = MockProvider::new(7);
        let prompt = "...\nBrand personality (select from Sincerity, Excitement, Competence, Sophistication, and Ruggedness):\nInstagram caption: cozy nights by the fire";
        // judge detection is marker based, caption comes from the caption line
        let out = call_chat(&mock, prompt, 3);
        assert_eq!(out.len(), 3);
        assert!(out[0].starts_with("Brand personality: "));
        let noun = out[0].strip_prefix("Brand personality: ").unwrap();
        assert!(Personality::parse(noun).is_ok());
        // deterministic per seed
        let again = call_chat(&MockProvider::new(7), prompt, 1);
        assert_eq!(again[0], out[0]);
    }

    #[test]
    fn scripted_responses_take_precedence_then_fall_back() {
        let mock = MockProvider::new(7);
        mock.script_chat(vec!["first".to_string()]);
        let prompt = "Text: x\nInstagram caption:";
        assert_eq!(call_chat(&mock, prompt, 1), vec!["first".to_string()]);
        assert_eq!(
            call_chat(&mock, prompt, 1),
            vec!["x :sparkles:".to_string()]
        );
    }

    #[test]
    fn embeddings_are_unit_norm_and_seed_dependent() {
        let mock = MockProvider::new(7);
        let e = futures::executor::block_on(mock.embed_text("hello", "m")).unwrap();
        assert_eq!(e.dim, MOCK_EMBEDDING_DIM);
        let norm: f64 = e.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let other =
            futures::executor::block_on(MockProvider::new(8).embed_text("hello", "m")).unwrap();
        assert_ne!(e.vector, other.vector);
    }
}
