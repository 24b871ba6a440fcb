//! Fixed word-level text vocabulary and the global token-id layout.
//!
//! The id space is laid out in contiguous blocks so every consumer agrees on
//! ranges without a shared registry:
//!
//! ```text
//! [0] pad  [1] eos  [2..] words  [loc x 16]  [proprio bins x 64]  [action tokens...]
//! ```
//!
//! Words cover the closed template grammar of the synthetic world: function
//! words, object categories, color names, receptacles, and the control-mode
//! tag appended to every action prompt. Location tokens serialize box
//! corners in 16 pixel bins; proprio tokens carry discretized state; the
//! trailing open-ended block is reserved for the learned discrete action
//! vocabulary, whose size is fixed per trained codec.

use std::collections::HashMap;

use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const EOS: u32 = 1;
pub const LOC_BINS: usize = 16;
pub const PROPRIO_BINS: usize = 64;

pub const FUNCTION_WORDS: &[&str] = &[
    "pick", "up", "the", "place", "in", "on", "open", "close", "straighten", "at", "head",
    "of", "put", "make", "items", "dishes", "laundry", "to", "and", "what", "color", "is",
    "where", "a", "near", "down",
];

/// Object categories; index is the global category id. The first blocks are
/// seen in robot demonstrations; the final [`OOD_CATEGORY_START`].. block
/// appears only in captioned web-style examples.
pub const CATEGORY_WORDS: &[&str] = &[
    // dishes
    "plate", "bowl", "cup", "mug", "pan", "pot", "fork", "spoon", "knife", "jar",
    // drawer items
    "can", "bottle", "book", "toy", "ball", "brush", "sponge", "soap", "clock", "tape",
    // clothing
    "sock", "shirt", "towel", "scarf", "hat", "glove",
    // bedding
    "pillow", "blanket",
    // web-only categories
    "funnel", "whisk", "stapler", "magnet", "candle", "crayon",
];

pub const OOD_CATEGORY_START: usize = 28;

/// Color names; index is the global color id, and category `i` always renders
/// in color `i` so naming an object pins its pixels.
pub const COLOR_WORDS: &[&str] = &[
    "red", "green", "blue", "yellow", "purple", "orange", "cyan", "magenta", "pink",
    "brown", "teal", "olive", "navy", "maroon", "lime", "gold", "silver", "coral",
    "violet", "indigo", "salmon", "khaki", "plum", "orchid", "tan", "beige", "mint",
    "rust", "azure", "rose", "amber", "jade", "pearl", "slate",
];

pub const RECEPTACLE_WORDS: &[&str] = &["sink", "drawer", "basket", "bed"];

pub const CONTROL_WORDS: &[&str] = &["<control_mode>", "joint", "end_effector", "none"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Pad,
    Eos,
    Word,
    Loc,
    Proprio,
    Action,
}

#[derive(Debug, Clone)]
pub struct TextVocab {
    words: Vec<&'static str>,
    index: HashMap<&'static str, u32>,
}

impl Default for TextVocab {
    fn default() -> Self {
        Self::new()
    }
}

impl TextVocab {
    pub fn new() -> Self {
        let mut words = Vec::new();
        words.extend_from_slice(FUNCTION_WORDS);
        words.extend_from_slice(CATEGORY_WORDS);
        words.extend_from_slice(COLOR_WORDS);
        words.extend_from_slice(RECEPTACLE_WORDS);
        words.extend_from_slice(CONTROL_WORDS);
        let mut index = HashMap::new();
        for (i, &w) in words.iter().enumerate() {
            let prev = index.insert(w, 2 + i as u32);
            assert!(prev.is_none(), "duplicate word {w:?} in vocabulary");
        }
        TextVocab { words, index }
    }

    /// First location-token id.
    pub fn loc_base(&self) -> u32 {
        2 + self.words.len() as u32
    }

    /// First proprio-bin token id.
    pub fn proprio_base(&self) -> u32 {
        self.loc_base() + LOC_BINS as u32
    }

    /// First discrete-action token id.
    pub fn action_base(&self) -> u32 {
        self.proprio_base() + PROPRIO_BINS as u32
    }

    /// Total model vocab size for a discrete action vocabulary of
    /// `action_tokens` ids.
    pub fn vocab_size_with(&self, action_tokens: usize) -> usize {
        self.action_base() as usize + action_tokens
    }

    pub fn word_id(&self, w: &str) -> Result<u32> {
        self.index
            .get(w)
            .copied()
            .ok_or_else(|| Error::UnknownWord(w.to_string()))
    }

    /// Whitespace-split encoding over the closed word list.
    pub fn encode(&self, s: &str) -> Result<Vec<u32>> {
        s.split_whitespace().map(|w| self.word_id(w)).collect()
    }

    pub fn loc_token(&self, bin: usize) -> u32 {
        assert!(bin < LOC_BINS, "loc bin {bin} out of range");
        self.loc_base() + bin as u32
    }

    pub fn proprio_token(&self, bin: usize) -> u32 {
        assert!(bin < PROPRIO_BINS, "proprio bin {bin} out of range");
        self.proprio_base() + bin as u32
    }

    pub fn action_token(&self, id: u32) -> u32 {
        self.action_base() + id
    }

    pub fn kind(&self, id: u32) -> TokenKind {
        if id == PAD {
            TokenKind::Pad
        } else if id == EOS {
            TokenKind::Eos
        } else if id < self.loc_base() {
            TokenKind::Word
        } else if id < self.proprio_base() {
            TokenKind::Loc
        } else if id < self.action_base() {
            TokenKind::Proprio
        } else {
            TokenKind::Action
        }
    }

    /// Render ids back to text; special tokens print symbolically.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut parts = Vec::new();
        for &id in ids {
            match self.kind(id) {
                TokenKind::Pad => parts.push("<pad>".to_string()),
                TokenKind::Eos => parts.push("<eos>".to_string()),
                TokenKind::Word => parts.push(self.words[(id - 2) as usize].to_string()),
                TokenKind::Loc => parts.push(format!("<loc{}>", id - self.loc_base())),
                TokenKind::Proprio => parts.push(format!("<p{}>", id - self.proprio_base())),
                TokenKind::Action => parts.push(format!("<act{}>", id - self.action_base())),
            }
        }
        parts.join(" ")
    }

    /// Render only the plain words in `ids`, stopping at the first eos;
    /// used to turn a decoded subtask back into a prompt string.
    pub fn decode_words(&self, ids: &[u32]) -> String {
        let mut parts = Vec::new();
        for &id in ids {
            match self.kind(id) {
                TokenKind::Eos => break,
                TokenKind::Word => parts.push(self.words[(id - 2) as usize]),
                _ => {}
            }
        }
        parts.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_blocks_are_contiguous_and_disjoint() {
        let v = TextVocab::new();
        assert!(v.loc_base() > 2);
        assert_eq!(v.proprio_base(), v.loc_base() + 16);
        assert_eq!(v.action_base(), v.proprio_base() + 64);
        assert_eq!(v.kind(PAD), TokenKind::Pad);
        assert_eq!(v.kind(EOS), TokenKind::Eos);
        assert_eq!(v.kind(2), TokenKind::Word);
        assert_eq!(v.kind(v.loc_token(0)), TokenKind::Loc);
        assert_eq!(v.kind(v.proprio_token(63)), TokenKind::Proprio);
        assert_eq!(v.kind(v.action_token(0)), TokenKind::Action);
    }

    #[test]
    fn encode_decode_round_trip() {
        let v = TextVocab::new();
        let s = "pick up the red mug <control_mode> joint";
        let ids = v.encode(s).unwrap();
        assert_eq!(v.decode(&ids), s);
        assert!(matches!(
            v.encode("pick up the zzz"),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn category_and_color_tables_align() {
        assert_eq!(CATEGORY_WORDS.len(), COLOR_WORDS.len());
        assert!(OOD_CATEGORY_START < CATEGORY_WORDS.len());
        // Every category/color/receptacle word is encodable.
        let v = TextVocab::new();
        for w in CATEGORY_WORDS
            .iter()
            .chain(COLOR_WORDS)
            .chain(RECEPTACLE_WORDS)
            .chain(CONTROL_WORDS)
        {
            v.word_id(w).unwrap();
        }
    }

    #[test]
    fn decode_words_stops_at_eos_and_skips_specials() {
        let v = TextVocab::new();
        let mut ids = v.encode("open the drawer").unwrap();
        ids.insert(0, v.loc_token(3));
        ids.push(EOS);
        ids.extend(v.encode("close the drawer").unwrap());
        assert_eq!(v.decode_words(&ids), "open the drawer");
    }
}
