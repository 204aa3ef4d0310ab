//! Deterministic text parsing: attribute extraction grammars, emoji
//! transliteration, caption cleaning predicates, tonality detection, and
//! attribute-presence checking. Everything here is a pure function.

mod emoji;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::domain::{hashtag_char, username_char, AttributeKind, AttributeSet, Personality};

pub use emoji::{EmojiTable, EmojiTableError};

const STOPWORDS_TXT: &str = include_str!("../../resources/stopwords_en.txt");

/// Replaces every supported emoji in `text` with its `:shortcode:` form.
pub fn demojize(text: &str) -> String {
    EmojiTable::bundled().demojize(text)
}

/// Replaces every supported `:shortcode:` in `text` with its emoji.
pub fn emojize(text: &str) -> String {
    EmojiTable::bundled().emojize(text)
}

/// Byte span of a grammar match inside the scanned text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: usize,
    end: usize,
}

fn hashtag_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].1 == '#' {
            let mut j = i + 1;
            while j < bytes.len() && hashtag_char(bytes[j].1) {
                j += 1;
            }
            if j > i + 1 {
                let end = if j < bytes.len() {
                    bytes[j].0
                } else {
                    text.len()
                };
                spans.push(Span {
                    start: bytes[i].0,
                    end,
                });
                i = j;
                continue;
            }
        }
        i += 1;
    }
    spans
}

fn username_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].1 == '@' {
            // mentions only start at the beginning of the text or after
            // whitespace; "a@b" is not a mention
            let boundary = i == 0 || bytes[i - 1].1.is_whitespace();
            if boundary {
                let mut j = i + 1;
                while j < bytes.len() && username_char(bytes[j].1) {
                    j += 1;
                }
                // a trailing period is not consumed
                while j > i + 1 && bytes[j - 1].1 == '.' {
                    j -= 1;
                }
                if j > i + 1 {
                    let end = if j < bytes.len() {
                        bytes[j].0
                    } else {
                        text.len()
                    };
                    spans.push(Span {
                        start: bytes[i].0,
                        end,
                    });
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    spans
}

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];
const URL_TRAILING: [char; 7] = ['.', ',', ';', ':', '!', '?', ')'];

fn url_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let lower = text.to_lowercase();
    // to_lowercase can change byte lengths for some scripts; fall back to a
    // char-wise ASCII lowering that preserves offsets
    let lower = if lower.len() == text.len() {
        lower
    } else {
        text.chars().map(|c| c.to_ascii_lowercase()).collect()
    };
    let mut cursor = 0;
    'outer: while cursor < text.len() {
        let mut best: Option<usize> = None;
        let mut which = "";
        for prefix in URL_PREFIXES {
            if let Some(pos) = lower[cursor..].find(prefix) {
                let abs = cursor + pos;
                if best.is_none_or(|b| abs < b) {
                    best = Some(abs);
                    which = prefix;
                }
            }
        }
        let Some(start) = best else { break 'outer };
        // require a non-alphanumeric boundary so "awww.cool" is not a URL
        let boundary = text[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let mut end = text[start..]
            .find(char::is_whitespace)
            .map_or(text.len(), |o| start + o);
        while end > start && text[..end].ends_with(URL_TRAILING) {
            end -= text[..end].chars().next_back().map_or(1, char::len_utf8);
        }
        if boundary && end - start > which.len() {
            spans.push(Span { start, end });
            cursor = end;
        } else {
            cursor = start + which.len();
        }
    }
    spans
}

fn dedup_case_insensitive(values: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for v in values {
        if seen.insert(v.to_lowercase()) {
            out.push(v);
        }
    }
    out
}

/// Maximal `#word` tokens in order of appearance, deduplicated
/// case-insensitively.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    dedup_case_insensitive(
        hashtag_spans(text)
            .into_iter()
            .map(|s| text[s.start..s.end].to_string())
            .collect(),
    )
}

/// Maximal `@handle` tokens in order of appearance. A mention must follow
/// start-of-text or whitespace, and a trailing period is not consumed.
pub fn extract_usernames(text: &str) -> Vec<String> {
    dedup_case_insensitive(
        username_spans(text)
            .into_iter()
            .map(|s| text[s.start..s.end].to_string())
            .collect(),
    )
}

/// Substrings beginning with `http://`, `https://` or `www.` up to the first
/// whitespace, with trailing `.,;:!?)` stripped.
pub fn extract_urls(text: &str) -> Vec<String> {
    dedup_case_insensitive(
        url_spans(text)
            .into_iter()
            .map(|s| text[s.start..s.end].to_string())
            .collect(),
    )
}

fn trim_token(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn is_capitalized(core: &str) -> bool {
    core.chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(char::is_uppercase)
}

fn ends_sentence(raw: &str) -> bool {
    raw.ends_with(['.', '!', '?', ';', ':', ','])
}

/// Offline named-entity fallback: maximal runs of capitalized words, allowing
/// an internal or leading "the"/"of", excluding sentence-initial single words
/// and tokens already matched as hashtags, usernames, or URLs.
///
/// Deliberately lossy: lowercase temporal spans such as "the fall" are not
/// found. A smarter extractor can be plugged in behind the dataset module's
/// entity-provider interface.
pub fn extract_entities_heuristic(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let excluded: Vec<bool> = tokens
        .iter()
        .map(|t| {
            let lower = t.to_lowercase();
            t.starts_with('#')
                || t.starts_with('@')
                || lower.contains("://")
                || lower.starts_with("www.")
        })
        .collect();
    let cores: Vec<&str> = tokens.iter().map(|t| trim_token(t)).collect();

    let mut entities = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if excluded[i] || !is_capitalized(cores[i]) {
            i += 1;
            continue;
        }
        let mut run = vec![i];
        let mut j = i + 1;
        loop {
            if ends_sentence(tokens[*run.last().unwrap()]) {
                break;
            }
            if j < tokens.len() && !excluded[j] && is_capitalized(cores[j]) {
                run.push(j);
                j += 1;
            } else if j + 1 < tokens.len()
                && !excluded[j]
                && !excluded[j + 1]
                && matches!(cores[j].to_lowercase().as_str(), "the" | "of")
                && !ends_sentence(tokens[j])
                && is_capitalized(cores[j + 1])
            {
                run.push(j);
                run.push(j + 1);
                j += 2;
            } else {
                break;
            }
        }
        // a lowercase "the" immediately before the run joins it
        let prefix =
            i > 0 && !excluded[i - 1] && cores[i - 1] == "the" && !ends_sentence(tokens[i - 1]);
        let sentence_initial = i == 0 || ends_sentence(tokens[i - 1]);
        if run.len() > 1 || prefix || !sentence_initial {
            let mut words: Vec<&str> = Vec::new();
            if prefix {
                words.push(cores[i - 1]);
            }
            words.extend(run.iter().map(|&k| cores[k]));
            let entity = words.join(" ");
            if !entity.is_empty() {
                entities.push(entity);
            }
        }
        i = j.max(i + 1);
    }
    dedup_case_insensitive(entities)
}

fn is_plain_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '…' | '—' | '–' | '‘' | '’' | '“' | '”' | '¡' | '¿' | '·' | '•' | '«' | '»'
        )
}

/// True iff nothing remains after removing emoji, whitespace, and
/// punctuation. The empty string counts as emoji-only.
pub fn is_emoji_only(text: &str) -> bool {
    let table = EmojiTable::bundled();
    let stripped = table.demojize(text);
    let mut rest = stripped.as_str();
    // demojize turned supported emoji into :shortcode: tokens; strip those
    // before the character test
    let mut cleaned = String::new();
    while let Some(pos) = rest.find(':') {
        cleaned.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        if let Some(end) = after.find(':') {
            let token = &after[..end];
            if !token.is_empty() && table.emoji_for(token).is_some() {
                rest = &after[end + 1..];
                continue;
            }
        }
        cleaned.push(':');
        rest = after;
    }
    cleaned.push_str(rest);
    cleaned
        .chars()
        .all(|c| c.is_whitespace() || is_plain_punctuation(c) || emoji::is_emoji_codepoint(c))
}

/// Whitespace-delimited tokens containing at least one letter or digit,
/// counted after demojize; shortcode tokens (leading `:`) are excluded so an
/// emoji contributes zero words.
pub fn word_count(text: &str) -> usize {
    demojize(text)
        .split_whitespace()
        .filter(|t| !t.starts_with(':'))
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Cheap English heuristic: at least 90% of letter characters are ASCII and,
/// for texts of 3+ tokens, at least one bundled stopword appears.
pub fn detect_english(text: &str) -> bool {
    let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
    let ascii_ok = if letters.is_empty() {
        true
    } else {
        let ascii = letters.iter().filter(|c| c.is_ascii_alphabetic()).count();
        ascii as f64 >= 0.9 * letters.len() as f64
    };
    if !ascii_ok {
        return false;
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() < 3 {
        return true;
    }
    let stops = stopwords();
    tokens
        .iter()
        .any(|t| stops.contains(trim_token(t).to_lowercase().as_str()))
}

/// Case-insensitive substring search over char boundaries.
fn find_ci(haystack: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (from..=haystack.len() - needle.len()).find(|&i| {
        haystack[i..i + needle.len()]
            .iter()
            .zip(needle)
            .all(|(a, b)| a.to_lowercase().eq(b.to_lowercase()))
    })
}

/// Removes all hashtag/username/URL tokens (by grammar) and every
/// case-insensitive occurrence of the provided named entities, then collapses
/// repeated whitespace.
pub fn strip_attributes(text: &str, attrs: &AttributeSet) -> String {
    let mut spans: Vec<Span> = hashtag_spans(text);
    spans.extend(username_spans(text));
    spans.extend(url_spans(text));
    spans.sort_by_key(|s| s.start);
    let mut kept = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        if span.start >= cursor {
            kept.push_str(&text[cursor..span.start]);
            cursor = span.end;
        }
    }
    kept.push_str(&text[cursor..]);

    let mut chars: Vec<char> = kept.chars().collect();
    for entity in &attrs.named_entities {
        let needle: Vec<char> = entity.chars().collect();
        if needle.is_empty() {
            continue;
        }
        while let Some(pos) = find_ci(&chars, &needle, 0) {
            chars.drain(pos..pos + needle.len());
        }
    }
    let joined: String = chars.into_iter().collect();
    joined.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True iff any lowercase token of `text` starts with one of the
/// personality's tonality stems. Tokens are stripped of surrounding
/// punctuation before the stem test.
pub fn contains_tonality_word(text: &str, personality: Personality) -> bool {
    let stems = personality.tonality_stems();
    text.split_whitespace().any(|token| {
        let core = trim_token(token).to_lowercase();
        stems.iter().any(|stem| core.starts_with(stem))
    })
}

/// Presence counts for one attribute kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindPresence {
    pub provided: usize,
    pub found: usize,
}

impl KindPresence {
    pub fn all_present(&self) -> bool {
        self.found == self.provided
    }
}

/// Per-kind and overall attribute presence of a caption.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceReport {
    pub hashtags: KindPresence,
    pub usernames: KindPresence,
    pub urls: KindPresence,
    pub entities: KindPresence,
}

impl PresenceReport {
    pub fn kind(&self, kind: AttributeKind) -> KindPresence {
        match kind {
            AttributeKind::Hashtags => self.hashtags,
            AttributeKind::Usernames => self.usernames,
            AttributeKind::Urls => self.urls,
            AttributeKind::NamedEntities => self.entities,
        }
    }

    /// True iff every kind has all of its provided items present.
    pub fn all_present(&self) -> bool {
        AttributeKind::PROMPT_ORDER
            .into_iter()
            .all(|k| self.kind(k).all_present())
    }
}

/// Checks which provided attributes appear in the caption: hashtags and
/// usernames as exact case-insensitive tokens, URLs as case-sensitive
/// substrings, named entities as case-insensitive substrings.
pub fn attribute_presence(caption: &str, attrs: &AttributeSet) -> PresenceReport {
    let caption_tags: HashSet<String> = extract_hashtags(caption)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect();
    let caption_handles: HashSet<String> = extract_usernames(caption)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect();
    let caption_chars: Vec<char> = caption.chars().collect();

    let count = |provided: &[String], hit: &mut dyn FnMut(&str) -> bool| -> KindPresence {
        KindPresence {
            provided: provided.len(),
            found: provided.iter().filter(|v| hit(v)).count(),
        }
    };

    PresenceReport {
        hashtags: count(&attrs.hashtags, &mut |v| {
            caption_tags.contains(&v.to_lowercase())
        }),
        usernames: count(&attrs.usernames, &mut |v| {
            caption_handles.contains(&v.to_lowercase())
        }),
        urls: count(&attrs.urls, &mut |v| caption.contains(v)),
        entities: count(&attrs.named_entities, &mut |v| {
            let needle: Vec<char> = v.chars().collect();
            find_ci(&caption_chars, &needle, 0).is_some()
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Personality::*;

    #[test]
    fn hashtags_are_extracted_in_order() {
        assert_eq!(
            extract_hashtags("cozy nights #homeinspo #potterybarn"),
            vec!["#homeinspo", "#potterybarn"]
        );
        assert_eq!(extract_hashtags(""), Vec::<String>::new());
        assert_eq!(extract_hashtags("#A#B"), vec!["#A", "#B"]);
        assert_eq!(extract_hashtags("#Fall #fall"), vec!["#Fall"]);
    }

    #[test]
    fn usernames_require_a_leading_boundary() {
        assert_eq!(
            extract_usernames("stay at @brooklynmarriott."),
            vec!["@brooklynmarriott"]
        );
        // mid-word '@' is not a mention (boundary rule)
        assert_eq!(extract_usernames("email a@b"), Vec::<String>::new());
        assert_eq!(extract_usernames("no handles"), Vec::<String>::new());
        assert_eq!(
            extract_usernames("@vp, @wba_global"),
            vec!["@vp", "@wba_global"]
        );
    }

    #[test]
    fn urls_strip_trailing_punctuation() {
        assert_eq!(
            extract_urls("shop https://ex.am/p now"),
            vec!["https://ex.am/p"]
        );
        assert_eq!(extract_urls("(www.a.com)."), vec!["www.a.com"]);
        assert_eq!(extract_urls(""), Vec::<String>::new());
        assert_eq!(extract_urls("awww.cool story"), Vec::<String>::new());
        assert_eq!(extract_urls("see www."), Vec::<String>::new());
    }

    #[test]
    fn entity_heuristic_matches_the_documented_cases() {
        assert_eq!(
            extract_entities_heuristic("walk to the Brooklyn Bridge when you stay"),
            vec!["the Brooklyn Bridge"]
        );
        assert_eq!(
            extract_entities_heuristic("hello world"),
            Vec::<String>::new()
        );
        assert_eq!(
            extract_entities_heuristic("New York City in the fall"),
            vec!["New York City"]
        );
        // sentence-initial single words are not entities
        assert_eq!(
            extract_entities_heuristic("There is nothing here"),
            Vec::<String>::new()
        );
        assert_eq!(
            extract_entities_heuristic("a visit to Paris today"),
            vec!["Paris"]
        );
        assert_eq!(
            extract_entities_heuristic("the Statue of Liberty at dusk"),
            vec!["the Statue of Liberty"]
        );
        assert_eq!(
            extract_entities_heuristic("say hi to @Madison at #Fall"),
            Vec::<String>::new()
        );
    }

    #[test]
    fn emoji_only_checks() {
        assert!(is_emoji_only("🔥🔥 ❤️"));
        assert!(!is_emoji_only("🔥 sale"));
        assert!(is_emoji_only(""));
        assert!(is_emoji_only("❗ ✋"));
        assert!(is_emoji_only("🔥!!"));
    }

    #[test]
    fn word_count_ignores_shortcodes() {
        assert_eq!(word_count("a bed with a green comforter"), 6);
        assert_eq!(word_count("🔥 🔥"), 0);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("Big news coming soon 🚀"), 4);
        assert_eq!(word_count("— – …"), 0);
    }

    #[test]
    fn english_detection_examples() {
        assert!(detect_english(
            "There is nothing quite like New York City in the fall"
        ));
        assert!(!detect_english("これは日本語です"));
        assert!(!detect_english("zzz qqq xxx yyy"));
        assert!(detect_english("ok now"));
        assert_eq!(stopwords().len(), 50);
    }

    #[test]
    fn strip_attributes_examples() {
        let empty = AttributeSet::default();
        assert_eq!(
            strip_attributes("win a trip #fall @vp", &empty),
            "win a trip"
        );
        assert_eq!(strip_attributes("plain", &empty), "plain");
        let attrs = AttributeSet {
            named_entities: vec!["New York City".to_string()],
            ..Default::default()
        };
        assert_eq!(strip_attributes("see New York City now", &attrs), "see now");
        assert_eq!(
            strip_attributes("book at https://ex.am/p today", &empty),
            "book at today"
        );
    }

    #[test]
    fn tonality_detection_uses_prefix_stems() {
        assert!(contains_tonality_word(
            "a truly sophisticated evening",
            Sophistication
        ));
        assert!(!contains_tonality_word("a cozy evening", Sophistication));
        assert!(contains_tonality_word("Sophistication!", Sophistication));
        for p in Personality::ALL {
            assert!(contains_tonality_word(p.name(), p));
            assert!(contains_tonality_word(p.adjective(), p));
        }
    }

    #[test]
    fn presence_counts_per_kind() {
        let attrs = AttributeSet {
            usernames: vec!["@brooklynmarriott".to_string()],
            named_entities: vec![
                "New York City".to_string(),
                "the fall".to_string(),
                "the Brooklyn Bridge".to_string(),
            ],
            ..Default::default()
        };
        let caption =
            "Staying in New York City? @brooklynmarriott has a view of the Brooklyn Bridge.";
        let report = attribute_presence(caption, &attrs);
        assert!(report.usernames.all_present());
        assert_eq!(report.entities.found, 2);
        assert_eq!(report.entities.provided, 3);
        assert!(!report.entities.all_present());
        assert!(!report.all_present());

        // the full paper output carries all three entities
        let full = "Staying in New York City in the fall? This fall @brooklynmarriott has a view \
                    of the Brooklyn Bridge!";
        assert!(attribute_presence(full, &attrs).entities.all_present());

        let vacuous = attribute_presence("anything", &AttributeSet::default());
        assert!(vacuous.all_present());

        let tags = AttributeSet {
            hashtags: vec!["#fall".to_string()],
            ..Default::default()
        };
        assert!(attribute_presence("#Fall sale", &tags)
            .hashtags
            .all_present());
        // a longer hashtag is not a token match for the shorter one
        assert!(!attribute_presence("#fallfoliage", &tags)
            .hashtags
            .all_present());
    }
}
