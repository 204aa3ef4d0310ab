//! Bidirectional emoji ↔ `:shortcode:` transliteration backed by a frozen
//! shortcode table shipped as a crate resource.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

const EMOJI_TABLE_TSV: &str = include_str!("../../resources/emoji_shortcodes.tsv");

#[derive(Debug, Error)]
pub enum EmojiTableError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("table is not a bijection: {0}")]
    NotBijective(String),
}

/// A bijective map between emoji codepoint sequences and `:shortcode:` names.
///
/// File format: one mapping per line, `<hex codepoints space-separated>` TAB
/// `:shortcode:`, UTF-8.
pub struct EmojiTable {
    /// (emoji string, shortcode including colons)
    entries: Vec<(String, String)>,
    /// first char of an emoji sequence → entry indices, longest sequence first
    by_first_char: HashMap<char, Vec<usize>>,
    /// shortcode token (without colons) → entry index
    by_code: HashMap<String, usize>,
}

impl EmojiTable {
    pub fn parse(text: &str) -> Result<EmojiTable, EmojiTableError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut by_code: HashMap<String, usize> = HashMap::new();
        let mut seen_emoji: HashMap<String, usize> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (hexes, code) = line.split_once('\t').ok_or(EmojiTableError::Malformed {
                line: i + 1,
                message: "expected <hex codepoints>\\t:shortcode:".to_string(),
            })?;
            let mut emoji = String::new();
            for h in hexes.split(' ').filter(|h| !h.is_empty()) {
                let cp = u32::from_str_radix(h, 16).map_err(|e| EmojiTableError::Malformed {
                    line: i + 1,
                    message: format!("bad codepoint {h:?}: {e}"),
                })?;
                emoji.push(char::from_u32(cp).ok_or(EmojiTableError::Malformed {
                    line: i + 1,
                    message: format!("{h} is not a Unicode scalar"),
                })?);
            }
            let token = code
                .strip_prefix(':')
                .and_then(|c| c.strip_suffix(':'))
                .filter(|c| !c.is_empty() && c.chars().all(is_shortcode_char))
                .ok_or(EmojiTableError::Malformed {
                    line: i + 1,
                    message: format!("bad shortcode {code:?}"),
                })?;
            if emoji.is_empty() {
                return Err(EmojiTableError::Malformed {
                    line: i + 1,
                    message: "empty codepoint sequence".to_string(),
                });
            }
            if seen_emoji.insert(emoji.clone(), entries.len()).is_some() {
                return Err(EmojiTableError::NotBijective(format!(
                    "sequence {hexes} mapped twice"
                )));
            }
            if by_code.insert(token.to_string(), entries.len()).is_some() {
                return Err(EmojiTableError::NotBijective(format!(
                    "shortcode {code} mapped twice"
                )));
            }
            entries.push((emoji, code.to_string()));
        }
        let mut by_first_char: HashMap<char, Vec<usize>> = HashMap::new();
        for (i, (emoji, _)) in entries.iter().enumerate() {
            let first = emoji.chars().next().expect("non-empty sequence");
            by_first_char.entry(first).or_default().push(i);
        }
        for indices in by_first_char.values_mut() {
            indices.sort_by_key(|&i| std::cmp::Reverse(entries[i].0.chars().count()));
        }
        Ok(EmojiTable {
            entries,
            by_first_char,
            by_code,
        })
    }

    /// The snapshot bundled with the crate.
    pub fn bundled() -> &'static EmojiTable {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            EmojiTable::parse(EMOJI_TABLE_TSV).expect("bundled emoji table must parse")
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (emoji, `:shortcode:`) pairs in file order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(e, c)| (e.as_str(), c.as_str()))
    }

    pub fn shortcode_for(&self, emoji: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(e, _)| e == emoji)
            .map(|(_, c)| c.as_str())
    }

    pub fn emoji_for(&self, token: &str) -> Option<&str> {
        self.by_code.get(token).map(|&i| self.entries[i].0.as_str())
    }

    /// Longest table sequence starting at `chars[at..]`, if any.
    fn match_at(&self, chars: &[char], at: usize) -> Option<usize> {
        let candidates = self.by_first_char.get(&chars[at])?;
        for &i in candidates {
            let seq: Vec<char> = self.entries[i].0.chars().collect();
            if chars.len() - at >= seq.len() && chars[at..at + seq.len()] == seq[..] {
                return Some(i);
            }
        }
        None
    }

    /// Replaces every supported emoji with its `:shortcode:` form. Longest
    /// sequences win; unsupported codepoints pass through unchanged.
    pub fn demojize(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < chars.len() {
            match self.match_at(&chars, i) {
                Some(entry) => {
                    let (emoji, code) = &self.entries[entry];
                    out.push_str(code);
                    i += emoji.chars().count();
                }
                None => {
                    out.push(chars[i]);
                    i += 1;
                }
            }
        }
        out
    }

    /// Inverse of [`demojize`](Self::demojize) on supported shortcodes.
    /// Unknown `:tokens:` are left verbatim.
    pub fn emojize(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < chars.len() {
            if chars[i] == ':' {
                // scan a candidate token up to the next colon
                let mut j = i + 1;
                while j < chars.len() && is_shortcode_char(chars[j]) {
                    j += 1;
                }
                if j > i + 1 && j < chars.len() && chars[j] == ':' {
                    let token: String = chars[i + 1..j].iter().collect();
                    if let Some(emoji) = self.emoji_for(&token) {
                        out.push_str(emoji);
                        i = j + 1;
                        continue;
                    }
                    // unknown token: emit it and let the closing colon open
                    // the next candidate
                    out.push(':');
                    out.extend(&chars[i + 1..j]);
                    i = j;
                    continue;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

fn is_shortcode_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '+' | '-')
}

/// True for codepoints that belong to emoji-presentation blocks even when
/// they are not in the bundled table. Used by the emoji-only cleaning rule.
pub(crate) fn is_emoji_codepoint(c: char) -> bool {
    matches!(u32::from(c),
        0x1F000..=0x1FAFF      // misc pictographs, emoticons, transport, supplemental
        | 0x2600..=0x27BF      // misc symbols + dingbats
        | 0x2B00..=0x2BFF      // arrows + stars (⭐)
        | 0x2190..=0x21FF      // arrows
        | 0x2300..=0x23FF      // technical (⌚ ⏰)
        | 0xFE00..=0xFE0F      // variation selectors
    ) || c == '\u{200D}'
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_parses_and_is_bijective() {
        let table = EmojiTable::bundled();
        assert!(table.len() > 200);
        for (emoji, code) in table.entries() {
            let token = &code[1..code.len() - 1];
            assert_eq!(table.emoji_for(token), Some(emoji));
            assert_eq!(table.shortcode_for(emoji), Some(code));
        }
    }

    #[test]
    fn demojize_replaces_supported_emoji() {
        let table = EmojiTable::bundled();
        assert_eq!(table.demojize("great 🔥"), "great :fire:");
        assert_eq!(table.demojize("plain text"), "plain text");
        assert_eq!(table.demojize(""), "");
    }

    #[test]
    fn demojize_prefers_the_longest_sequence() {
        let table = EmojiTable::bundled();
        // heart_on_fire = red_heart + ZWJ + fire; must not split
        assert_eq!(
            table.demojize("\u{2764}\u{FE0F}\u{200D}\u{1F525}"),
            ":heart_on_fire:"
        );
        assert_eq!(table.demojize("\u{2764}\u{FE0F}"), ":red_heart:");
        assert_eq!(
            table.demojize("\u{1F3F3}\u{FE0F}\u{200D}\u{1F308}"),
            ":rainbow_flag:"
        );
    }

    #[test]
    fn emojize_restores_supported_codes_and_keeps_unknown_ones() {
        let table = EmojiTable::bundled();
        assert_eq!(table.emojize("great :fire:"), "great 🔥");
        assert_eq!(table.emojize(":notacode:"), ":notacode:");
        assert_eq!(table.emojize(":notacode:fire:"), ":notacode🔥");
        assert_eq!(table.emojize("a : b"), "a : b");
    }

    #[test]
    fn round_trips_hold_on_supported_input() {
        let table = EmojiTable::bundled();
        let s = "cozy nights ❤️ by the 🔥 with ✨";
        assert_eq!(table.emojize(&table.demojize(s)), s);
        let t = "cozy :red_heart: nights :fire:";
        assert_eq!(table.demojize(&table.emojize(t)), t);
    }
}
