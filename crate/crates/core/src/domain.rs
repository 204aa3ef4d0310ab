//! Shared domain vocabulary: personalities, attribute sets, caption requests,
//! post records, and the bundled brand map.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of brand personalities in the taxonomy.
pub const PERSONALITY_COUNT: usize = 5;

/// Maximum number of in-context examples a request may ask for.
pub const MAX_SHOTS: u8 = 4;

/// The five-way brand personality taxonomy.
///
/// The discriminant order is fixed and doubles as the row/column index of
/// confusion matrices (0: Sincerity .. 4: Ruggedness).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Personality {
    Sincerity,
    Excitement,
    Competence,
    Sophistication,
    Ruggedness,
}

impl Personality {
    pub const ALL: [Personality; PERSONALITY_COUNT] = [
        Personality::Sincerity,
        Personality::Excitement,
        Personality::Competence,
        Personality::Sophistication,
        Personality::Ruggedness,
    ];

    /// Canonical noun form, e.g. `"Sophistication"`.
    pub fn name(self) -> &'static str {
        match self {
            Personality::Sincerity => "Sincerity",
            Personality::Excitement => "Excitement",
            Personality::Competence => "Competence",
            Personality::Sophistication => "Sophistication",
            Personality::Ruggedness => "Ruggedness",
        }
    }

    /// Adjective form used inside prompt instructions, e.g. `"sophisticated"`.
    pub fn adjective(self) -> &'static str {
        match self {
            Personality::Sincerity => "sincere",
            Personality::Excitement => "exciting",
            Personality::Competence => "competent",
            Personality::Sophistication => "sophisticated",
            Personality::Ruggedness => "rugged",
        }
    }

    /// Trait lexicon associated with the personality.
    pub fn trait_words(self) -> &'static [&'static str] {
        match self {
            Personality::Sincerity => &["down-to-earth", "honest", "wholesome", "cheerful"],
            Personality::Excitement => &["daring", "spirited", "imaginative", "up-to-date"],
            Personality::Competence => &["reliable", "intelligent", "successful"],
            Personality::Sophistication => &["upper class", "charming"],
            Personality::Ruggedness => &["outdoorsy", "tough"],
        }
    }

    /// Lowercase prefix stems that match the personality word and all of its
    /// morphological variants (sophisticated, sophistication, ...).
    pub fn tonality_stems(self) -> &'static [&'static str] {
        match self {
            Personality::Sincerity => &["sincer"],
            Personality::Excitement => &["excit"],
            Personality::Competence => &["competen"],
            Personality::Sophistication => &["sophistic"],
            Personality::Ruggedness => &["rugged"],
        }
    }

    /// Fixed matrix index (0: Sincerity .. 4: Ruggedness).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Personality> {
        Personality::ALL.get(index).copied()
    }

    /// Case-insensitive parse of the canonical noun form.
    pub fn parse(s: &str) -> Result<Personality, DomainError> {
        let norm = s.trim().to_lowercase();
        Personality::ALL
            .into_iter()
            .find(|p| p.name().to_lowercase() == norm)
            .ok_or_else(|| DomainError::UnknownPersonality(s.to_string()))
    }
}

impl fmt::Display for Personality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Personality {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Personality::parse(s)
    }
}

/// The four user-injectable attribute kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Hashtags,
    Usernames,
    Urls,
    NamedEntities,
}

impl AttributeKind {
    /// Order of attribute lines inside rendered prompts.
    pub const PROMPT_ORDER: [AttributeKind; 4] = [
        AttributeKind::NamedEntities,
        AttributeKind::Urls,
        AttributeKind::Hashtags,
        AttributeKind::Usernames,
    ];

    /// Column order of the evaluation report.
    pub const REPORT_ORDER: [AttributeKind; 4] = [
        AttributeKind::Hashtags,
        AttributeKind::NamedEntities,
        AttributeKind::Usernames,
        AttributeKind::Urls,
    ];

    /// Label used in prompt text. URLs are labelled "Links" in prompts.
    pub fn prompt_label(self) -> &'static str {
        match self {
            AttributeKind::NamedEntities => "Named Entities",
            AttributeKind::Urls => "Links",
            AttributeKind::Hashtags => "Hashtags",
            AttributeKind::Usernames => "Usernames",
        }
    }

    /// Key used in reports and serialized output.
    pub fn report_key(self) -> &'static str {
        match self {
            AttributeKind::Hashtags => "hashtags",
            AttributeKind::NamedEntities => "entities",
            AttributeKind::Usernames => "usernames",
            AttributeKind::Urls => "urls",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.report_key())
    }
}

/// Errors raised by domain validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("unknown personality: {0:?}")]
    UnknownPersonality(String),
    #[error("description must not be empty")]
    EmptyDescription,
    #[error("malformed {kind} attribute: {value:?}")]
    MalformedAttribute { kind: AttributeKind, value: String },
    #[error("shots must be between 0 and {MAX_SHOTS}, got {0}")]
    ShotsOutOfRange(u8),
    #[error("unknown brand: {0:?}")]
    UnknownBrand(String),
    #[error("invalid bundled resource: {0}")]
    InvalidResource(String),
}

fn is_hashtag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_username_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

/// `#` followed by one or more of letter/digit/underscore, nothing else.
pub fn is_valid_hashtag(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('#') && {
        let rest = &s[1..];
        !rest.is_empty() && rest.chars().all(is_hashtag_char)
    }
}

/// `@` followed by one or more of letter/digit/underscore/period. A trailing
/// period is rejected: extraction never consumes one, so it could never be
/// found in a caption.
pub fn is_valid_username(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('@') && {
        let rest = &s[1..];
        !rest.is_empty() && rest.chars().all(is_username_char) && !rest.ends_with('.')
    }
}

/// URLs must carry one of the recognized prefixes and no whitespace.
pub fn is_valid_url(s: &str) -> bool {
    let lower = s.to_lowercase();
    let prefix = ["http://", "https://", "www."]
        .into_iter()
        .find(|p| lower.starts_with(p));
    match prefix {
        Some(p) => s.len() > p.len() && !s.chars().any(char::is_whitespace),
        None => false,
    }
}

pub(crate) fn hashtag_char(c: char) -> bool {
    is_hashtag_char(c)
}

pub(crate) fn username_char(c: char) -> bool {
    is_username_char(c)
}

/// The four optional attribute lists a user can ask to be injected into a
/// caption. May be entirely empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub usernames: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub named_entities: Vec<String>,
}

impl AttributeSet {
    pub fn is_empty(&self) -> bool {
        self.hashtags.is_empty()
            && self.usernames.is_empty()
            && self.urls.is_empty()
            && self.named_entities.is_empty()
    }

    pub fn values(&self, kind: AttributeKind) -> &[String] {
        match kind {
            AttributeKind::Hashtags => &self.hashtags,
            AttributeKind::Usernames => &self.usernames,
            AttributeKind::Urls => &self.urls,
            AttributeKind::NamedEntities => &self.named_entities,
        }
    }

    fn values_mut(&mut self, kind: AttributeKind) -> &mut Vec<String> {
        match kind {
            AttributeKind::Hashtags => &mut self.hashtags,
            AttributeKind::Usernames => &mut self.usernames,
            AttributeKind::Urls => &mut self.urls,
            AttributeKind::NamedEntities => &mut self.named_entities,
        }
    }

    /// Non-empty kinds in prompt order.
    pub fn present_kinds(&self) -> Vec<AttributeKind> {
        AttributeKind::PROMPT_ORDER
            .into_iter()
            .filter(|k| !self.values(*k).is_empty())
            .collect()
    }
}

/// Instruction rendering policy for absent attribute kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Selective,
    NonSelective,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Selective => f.write_str("selective"),
            Variant::NonSelective => f.write_str("nonselective"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "selective" | "s" => Ok(Variant::Selective),
            "nonselective" | "non-selective" | "ns" => Ok(Variant::NonSelective),
            other => Err(format!("unknown variant: {other:?}")),
        }
    }
}

fn default_model_id() -> String {
    String::new()
}

/// A single caption generation request: the Part-1 description plus target
/// personality, optional attributes, and rendering configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub description: String,
    pub personality: Personality,
    #[serde(default)]
    pub attributes: AttributeSet,
    pub variant: Variant,
    #[serde(default)]
    pub shots: u8,
    #[serde(default = "default_model_id")]
    pub model_id: String,
}

/// A request that has passed [`validate_request`]. Attribute lists are
/// trimmed and deduplicated; all grammar invariants hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedRequest(CaptionRequest);

impl ValidatedRequest {
    pub fn as_request(&self) -> &CaptionRequest {
        &self.0
    }

    pub fn into_request(self) -> CaptionRequest {
        self.0
    }
}

impl Deref for ValidatedRequest {
    type Target = CaptionRequest;

    fn deref(&self) -> &CaptionRequest {
        &self.0
    }
}

/// Validates a request: non-empty description, shots in range, attribute
/// grammars. Normalizes attribute lists by trimming whitespace and dropping
/// case-insensitive duplicates while preserving first-seen order.
pub fn validate_request(mut req: CaptionRequest) -> Result<ValidatedRequest, DomainError> {
    if req.description.trim().is_empty() {
        return Err(DomainError::EmptyDescription);
    }
    if req.shots > MAX_SHOTS {
        return Err(DomainError::ShotsOutOfRange(req.shots));
    }
    for kind in AttributeKind::PROMPT_ORDER {
        let values = req.attributes.values_mut(kind);
        let mut seen: Vec<String> = Vec::new();
        let mut normalized: Vec<String> = Vec::new();
        for raw in values.iter() {
            let value = raw.trim().to_string();
            let ok = match kind {
                AttributeKind::Hashtags => is_valid_hashtag(&value),
                AttributeKind::Usernames => is_valid_username(&value),
                AttributeKind::Urls => is_valid_url(&value),
                AttributeKind::NamedEntities => !value.is_empty(),
            };
            if !ok {
                return Err(DomainError::MalformedAttribute { kind, value });
            }
            let key = value.to_lowercase();
            if !seen.contains(&key) {
                seen.push(key);
                normalized.push(value);
            }
        }
        *values = normalized;
    }
    Ok(ValidatedRequest(req))
}

/// One chat message sent to (or scripted for) a model endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "user".to_string(),
            content: content.into(),
        }
    }
}

/// Post-processing flags attached to a generated caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionFlags {
    /// True when the final caption contains no tonality word for the
    /// requested personality.
    pub tonality_clean: bool,
    /// Number of regeneration attempts the tonality filter consumed.
    pub regenerations: u32,
}

/// A finished caption: the emojized final text plus the request echo and
/// provenance of the raw model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCaption {
    pub text: String,
    pub request: CaptionRequest,
    /// The Part-1 image description (or the user's override) that fed Part 2.
    pub primary_caption: String,
    pub raw_model_output: String,
    pub provider_latency_ms: u64,
    pub cached: bool,
    pub flags: CaptionFlags,
}

/// Wire form of a post record: what ingestion files carry. The personality
/// is not stored; it derives from the brand map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPostRecord {
    pub id: String,
    pub brand: String,
    #[serde(default)]
    pub image_ref: Option<String>,
    pub caption: String,
    pub collected_at: NaiveDate,
}

/// One ingested social post with its brand-derived personality label.
#[derive(Debug, Clone, PartialEq)]
pub struct PostRecord {
    pub id: String,
    pub brand: String,
    pub personality: Personality,
    pub image_ref: Option<String>,
    pub caption: String,
    pub collected_at: NaiveDate,
}

impl PostRecord {
    /// Resolves the brand against the map; unknown brands are rejected.
    pub fn from_raw(raw: RawPostRecord, map: &BrandMap) -> Result<PostRecord, DomainError> {
        let entry = map
            .lookup(&raw.brand)
            .ok_or_else(|| DomainError::UnknownBrand(raw.brand.clone()))?;
        Ok(PostRecord {
            id: raw.id,
            brand: raw.brand,
            personality: entry.personality,
            image_ref: raw.image_ref,
            caption: raw.caption,
            collected_at: raw.collected_at,
        })
    }

    pub fn to_raw(&self) -> RawPostRecord {
        RawPostRecord {
            id: self.id.clone(),
            brand: self.brand.clone(),
            image_ref: self.image_ref.clone(),
            caption: self.caption.clone(),
            collected_at: self.collected_at,
        }
    }
}

/// Whether a brand's posts are reserved for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrandSplit {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrandEntry {
    pub name: String,
    pub personality: Personality,
    pub split: BrandSplit,
}

/// The brand → personality map with per-personality held-out test brands.
#[derive(Debug, Clone)]
pub struct BrandMap {
    entries: Vec<BrandEntry>,
    by_key: HashMap<String, usize>,
}

const BRAND_MAP_TSV: &str = include_str!("../resources/brand_personality_map.tsv");

impl BrandMap {
    /// Parses the `brand<TAB>personality<TAB>{train|test}` resource format.
    pub fn parse(text: &str) -> Result<BrandMap, DomainError> {
        let mut entries = Vec::new();
        let mut by_key = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (name, personality, split) = match (parts.next(), parts.next(), parts.next()) {
                (Some(n), Some(p), Some(s)) => (n, p, s),
                _ => {
                    return Err(DomainError::InvalidResource(format!(
                        "brand map line {} is not three tab-separated fields",
                        lineno + 1
                    )))
                }
            };
            let personality = Personality::parse(personality)?;
            let split = match split.trim() {
                "train" => BrandSplit::Train,
                "test" => BrandSplit::Test,
                other => {
                    return Err(DomainError::InvalidResource(format!(
                        "brand map line {}: unknown split {other:?}",
                        lineno + 1
                    )))
                }
            };
            let key = name.trim().to_lowercase();
            if by_key.contains_key(&key) {
                return Err(DomainError::InvalidResource(format!(
                    "duplicate brand {name:?}"
                )));
            }
            by_key.insert(key, entries.len());
            entries.push(BrandEntry {
                name: name.trim().to_string(),
                personality,
                split,
            });
        }
        Ok(BrandMap { entries, by_key })
    }

    /// The map bundled with the crate.
    pub fn bundled() -> &'static BrandMap {
        static MAP: OnceLock<BrandMap> = OnceLock::new();
        MAP.get_or_init(|| BrandMap::parse(BRAND_MAP_TSV).expect("bundled brand map must parse"))
    }

    /// Case-insensitive lookup by brand name.
    pub fn lookup(&self, brand: &str) -> Option<&BrandEntry> {
        self.by_key
            .get(&brand.trim().to_lowercase())
            .map(|&i| &self.entries[i])
    }

    pub fn personality_of(&self, brand: &str) -> Option<Personality> {
        self.lookup(brand).map(|e| e.personality)
    }

    pub fn is_test_brand(&self, brand: &str) -> Option<bool> {
        self.lookup(brand).map(|e| e.split == BrandSplit::Test)
    }

    pub fn entries(&self) -> &[BrandEntry] {
        &self.entries
    }

    pub fn test_brand(&self, personality: Personality) -> Option<&BrandEntry> {
        self.entries
            .iter()
            .find(|e| e.personality == personality && e.split == BrandSplit::Test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn personality_parse_is_case_insensitive() {
        assert_eq!(
            Personality::parse("sophistication").unwrap(),
            Personality::Sophistication
        );
        assert_eq!(
            Personality::parse("SINCERITY").unwrap(),
            Personality::Sincerity
        );
        assert!(matches!(
            Personality::parse("bold"),
            Err(DomainError::UnknownPersonality(_))
        ));
    }

    #[test]
    fn personality_display_round_trips() {
        for p in Personality::ALL {
            assert_eq!(Personality::parse(&p.to_string()).unwrap(), p);
        }
    }

    #[test]
    fn trait_words_match_the_lexicon() {
        assert_eq!(
            Personality::Sincerity.trait_words(),
            &["down-to-earth", "honest", "wholesome", "cheerful"]
        );
        assert_eq!(
            Personality::Excitement.trait_words(),
            &["daring", "spirited", "imaginative", "up-to-date"]
        );
        assert_eq!(
            Personality::Competence.trait_words(),
            &["reliable", "intelligent", "successful"]
        );
        assert_eq!(
            Personality::Sophistication.trait_words(),
            &["upper class", "charming"]
        );
        assert_eq!(
            Personality::Ruggedness.trait_words(),
            &["outdoorsy", "tough"]
        );
        for p in Personality::ALL {
            assert!(!p.tonality_stems().is_empty());
            for stem in p.tonality_stems() {
                assert_eq!(stem.to_lowercase(), **stem);
            }
        }
    }

    fn request(description: &str) -> CaptionRequest {
        CaptionRequest {
            description: description.to_string(),
            personality: Personality::Sincerity,
            attributes: AttributeSet::default(),
            variant: Variant::Selective,
            shots: 0,
            model_id: String::new(),
        }
    }

    #[test]
    fn validate_accepts_a_plain_request() {
        let mut req = request("a red car");
        req.shots = 1;
        assert!(validate_request(req).is_ok());
    }

    #[test]
    fn validate_rejects_bad_hashtags() {
        let mut req = request("a red car");
        req.attributes.hashtags = vec!["no-hash".to_string()];
        assert!(matches!(
            validate_request(req),
            Err(DomainError::MalformedAttribute {
                kind: AttributeKind::Hashtags,
                ..
            })
        ));
    }

    #[test]
    fn validate_dedups_case_insensitively_keeping_first() {
        let mut req = request("a red car");
        req.attributes.hashtags = vec!["#Fall".to_string(), "#fall".to_string()];
        let validated = validate_request(req).unwrap();
        assert_eq!(validated.attributes.hashtags, vec!["#Fall".to_string()]);
    }

    #[test]
    fn validate_rejects_empty_description_and_bad_shots() {
        assert_eq!(
            validate_request(request("   ")),
            Err(DomainError::EmptyDescription)
        );
        let mut req = request("x");
        req.shots = 5;
        assert_eq!(validate_request(req), Err(DomainError::ShotsOutOfRange(5)));
    }

    #[test]
    fn validate_is_idempotent() {
        let mut req = request("a trip to the coast");
        req.attributes.hashtags = vec![" #Fall ".to_string(), "#fall".to_string()];
        req.attributes.usernames = vec!["@vp".to_string()];
        let once = validate_request(req).unwrap();
        let twice = validate_request(once.as_request().clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn username_grammar_allows_periods_hashtag_grammar_does_not() {
        assert!(is_valid_username("@wba_global"));
        assert!(is_valid_username("@apriljoy_ful"));
        assert!(is_valid_username("@a.b"));
        assert!(!is_valid_username("@a.b."));
        assert!(!is_valid_username("vp"));
        assert!(is_valid_hashtag("#homeinspo"));
        assert!(!is_valid_hashtag("#a.b"));
        assert!(!is_valid_hashtag("#"));
    }

    #[test]
    fn bundled_brand_map_has_six_brands_per_personality_one_test_each() {
        let map = BrandMap::bundled();
        assert_eq!(map.entries().len(), 30);
        for p in Personality::ALL {
            let brands: Vec<_> = map
                .entries()
                .iter()
                .filter(|e| e.personality == p)
                .collect();
            assert_eq!(brands.len(), 6, "{p} should have 6 brands");
            let tests: Vec<_> = brands
                .iter()
                .filter(|e| e.split == BrandSplit::Test)
                .collect();
            assert_eq!(tests.len(), 1, "{p} should have exactly one test brand");
        }
    }

    #[test]
    fn brand_map_test_brands_are_the_held_out_ones() {
        let map = BrandMap::bundled();
        for (brand, p) in [
            ("Walgreens", Personality::Sincerity),
            ("Mattel", Personality::Excitement),
            ("Marriott", Personality::Competence),
            ("Pottery Barn", Personality::Sophistication),
            ("Goodyear", Personality::Ruggedness),
        ] {
            let entry = map.lookup(brand).unwrap();
            assert_eq!(entry.personality, p);
            assert_eq!(entry.split, BrandSplit::Test);
        }
        assert_eq!(map.is_test_brand("walgreens"), Some(true));
        assert_eq!(map.is_test_brand("Microsoft"), Some(false));
        assert_eq!(map.lookup("Acme"), None);
    }
}
