//! Word-boundary helpers shared by the gazetteer matcher, the exclusion
//! lexicon and the bag-of-words backend.
//!
//! A word boundary is any transition between an alphabetic character and a
//! non-alphabetic one (or the start/end of the text).

use std::collections::HashMap;
use std::ops::Range;

#[inline]
pub fn is_letter(c: char) -> bool {
    c.is_alphabetic()
}

fn prev_char(text: &str, at: usize) -> Option<char> {
    text[..at].chars().next_back()
}

fn next_char(text: &str, at: usize) -> Option<char> {
    text[at..].chars().next()
}

/// True when `at` is a position where a word may start.
pub fn starts_word(text: &str, at: usize) -> bool {
    !prev_char(text, at).is_some_and(is_letter)
}

/// True when `at` is a position where a word may end.
pub fn ends_word(text: &str, at: usize) -> bool {
    !next_char(text, at).is_some_and(is_letter)
}

/// Byte spans of every boundary-delimited occurrence of `needle`.
pub fn occurrences<'a>(haystack: &'a str, needle: &'a str) -> impl Iterator<Item = Range<usize>> + 'a {
    haystack
        .match_indices(needle)
        .filter(move |(i, m)| !m.is_empty() && starts_word(haystack, *i) && ends_word(haystack, i + m.len()))
        .map(|(i, m)| i..i + m.len())
}

/// Maximal runs of letters.
pub fn letter_runs(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !is_letter(c)).filter(|w| !w.is_empty())
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Exact, case-sensitive phrase lookup with longest-match-wins scanning.
#[derive(Debug, Clone)]
pub struct PhraseMatcher<V> {
    entries: HashMap<String, V>,
    max_len: usize,
}

impl<V> Default for PhraseMatcher<V> {
    fn default() -> Self {
        Self { entries: HashMap::new(), max_len: 0 }
    }
}

impl<V> PhraseMatcher<V> {
    pub fn insert(&mut self, phrase: String, value: V) {
        self.max_len = self.max_len.max(phrase.len());
        self.entries.insert(phrase, value);
    }

    pub fn get(&self, phrase: &str) -> Option<&V> {
        self.entries.get(phrase)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Left-to-right scan returning non-overlapping matches. At each word
    /// start the longest entry accepted by `accept` wins.
    pub fn scan<F>(&self, text: &str, mut accept: F) -> Vec<(Range<usize>, &V)>
    where
        F: FnMut(&V) -> bool,
    {
        let mut out = Vec::new();
        if self.entries.is_empty() {
            return out;
        }
        let mut ends = Vec::new();
        let mut prev_letter = false;
        let mut skip_until = 0usize;
        for (i, c) in text.char_indices() {
            let letter = is_letter(c);
            let word_start = letter && !prev_letter;
            prev_letter = letter;
            if i < skip_until || !word_start {
                continue;
            }
            // candidate ends: letter -> non-letter transitions within max_len
            ends.clear();
            let mut last_letter = false;
            for (j, d) in text[i..].char_indices() {
                if j > self.max_len {
                    break;
                }
                let l = is_letter(d);
                if last_letter && !l {
                    ends.push(i + j);
                }
                last_letter = l;
            }
            if last_letter && text.len() - i <= self.max_len {
                ends.push(text.len());
            }
            let hit = ends
                .iter()
                .rev()
                .find_map(|&end| self.entries.get(&text[i..end]).filter(|v| accept(v)).map(|v| (i..end, v)));
            if let Some((span, v)) = hit {
                skip_until = span.end;
                out.push((span, v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occurrences_respect_boundaries() {
        let spans: Vec<_> = occurrences("Han met Hannah and Han.", "Han").collect();
        assert_eq!(spans, vec![0..3, 19..22]);
    }

    #[test]
    fn longest_match_wins() {
        let mut m = PhraseMatcher::default();
        m.insert("Guinea".to_string(), 1);
        m.insert("Guinea-Bissau".to_string(), 2);
        m.insert("Saint Lucia".to_string(), 3);
        let hits = m.scan("Guinea-Bissau, Guinea and Saint Lucia", |_| true);
        let got: Vec<_> = hits.iter().map(|(r, v)| (r.clone(), **v)).collect();
        assert_eq!(got, vec![(0..13, 2), (15..21, 1), (26..37, 3)]);
    }

    #[test]
    fn no_match_inside_words() {
        let mut m = PhraseMatcher::default();
        m.insert("Han".to_string(), ());
        assert!(m.scan("Hannah", |_| true).is_empty());
        assert!(m.scan("Johan", |_| true).is_empty());
    }

    #[test]
    fn unicode_letters_are_word_chars() {
        let mut m = PhraseMatcher::default();
        m.insert("Ramón".to_string(), ());
        assert_eq!(m.scan("Ramón's hat", |_| true).len(), 1);
        assert!(m.scan("Ramóné", |_| true).is_empty());
    }

    #[test]
    fn word_count_is_whitespace_tokens() {
        assert_eq!(word_count("Mike ran."), 2);
        assert_eq!(word_count("  a\tb\n c  "), 3);
        assert_eq!(word_count(""), 0);
    }
}
