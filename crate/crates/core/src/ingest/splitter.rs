use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const DEFAULT_CHUNK_SIZE: usize = 800;
pub const DEFAULT_OVERLAP: usize = 100;

fn default_separators() -> Vec<String> {
    ["\n\n", "\n", " ", ""].iter().map(|s| s.to_string()).collect()
}

/// Character budget and separator hierarchy for [`split_text`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkSpec {
    pub chunk_size: usize,
    pub overlap: usize,
    pub separators: Vec<String>,
}

impl Default for ChunkSpec {
    fn default() -> Self {
        ChunkSpec {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
            separators: default_separators(),
        }
    }
}

impl ChunkSpec {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, IngestError> {
        let spec = ChunkSpec { chunk_size, overlap, separators: default_separators() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.chunk_size == 0 {
            return Err(IngestError::Config("chunk_size must be at least 1".into()));
        }
        if self.overlap >= self.chunk_size {
            return Err(IngestError::Config(format!(
                "overlap {} must be smaller than chunk_size {}",
                self.overlap, self.chunk_size
            )));
        }
        Ok(())
    }
}

/// A chunk of a body: its text plus the `[start, end)` character offsets it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: usize,
    end: usize,
    chars: usize,
}

struct Splitter<'a> {
    body: &'a str,
    chunk_size: usize,
    overlap: usize,
}

impl<'a> Splitter<'a> {
    fn piece(&self, start: usize, end: usize) -> Piece {
        Piece { start, end, chars: self.body[start..end].chars().count() }
    }

    fn char_pieces(&self, start: usize, end: usize) -> Vec<Piece> {
        self.body[start..end]
            .char_indices()
            .map(|(i, c)| Piece { start: start + i, end: start + i + c.len_utf8(), chars: 1 })
            .collect()
    }

    /// Pieces of `[start, end)` split after each occurrence of `sep`.
    fn sep_pieces(&self, start: usize, end: usize, sep: &str) -> Vec<Piece> {
        let text = &self.body[start..end];
        let mut out = Vec::new();
        let mut from = 0;
        for (i, m) in text.match_indices(sep) {
            let to = i + m.len();
            out.push(self.piece(start + from, start + to));
            from = to;
        }
        if from < text.len() {
            out.push(self.piece(start + from, end));
        }
        out
    }

    fn split(&self, start: usize, end: usize, separators: &[String]) -> Vec<(usize, usize)> {
        let text = &self.body[start..end];
        let chosen = separators
            .iter()
            .position(|s| s.is_empty() || text.contains(s.as_str()));
        let (pieces, rest) = match chosen {
            Some(i) if separators[i].is_empty() => (self.char_pieces(start, end), &separators[i + 1..]),
            Some(i) => (self.sep_pieces(start, end, &separators[i]), &separators[i + 1..]),
            None => (self.char_pieces(start, end), &separators[separators.len()..]),
        };

        let mut out = Vec::new();
        let mut fitting: Vec<Piece> = Vec::new();
        for p in pieces {
            if p.chars <= self.chunk_size {
                fitting.push(p);
                continue;
            }
            if !fitting.is_empty() {
                out.extend(self.merge(&fitting));
                fitting.clear();
            }
            if rest.is_empty() {
                out.extend(self.merge(&self.char_pieces(p.start, p.end)));
            } else {
                out.extend(self.split(p.start, p.end, rest));
            }
        }
        if !fitting.is_empty() {
            out.extend(self.merge(&fitting));
        }
        out
    }

    /// Packs consecutive pieces into windows of at most `chunk_size` chars,
    /// carrying up to `overlap` trailing chars (whole pieces) into the next window.
    fn merge(&self, pieces: &[Piece]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut current: VecDeque<Piece> = VecDeque::new();
        let mut total = 0usize;
        for &p in pieces {
            if total + p.chars > self.chunk_size && !current.is_empty() {
                out.push((current[0].start, current[current.len() - 1].end));
                while total > self.overlap || (total + p.chars > self.chunk_size && total > 0) {
                    match current.pop_front() {
                        Some(front) => total -= front.chars,
                        None => break,
                    }
                }
            }
            current.push_back(p);
            total += p.chars;
        }
        if let (Some(first), Some(last)) = (current.front(), current.back()) {
            out.push((first.start, last.end));
        }
        out
    }
}

/// Recursive character splitter.
///
/// The body is cut at the first separator in the hierarchy that occurs in it;
/// pieces that are still too long are cut again with the remaining separators,
/// falling back to single characters. Fitting pieces are packed greedily into
/// windows of at most `chunk_size` characters with `overlap` carried forward.
/// Chunks are verbatim slices of the body, so their spans tile it.
pub fn split_text(body: &str, spec: &ChunkSpec) -> Result<Vec<TextSpan>, IngestError> {
    spec.validate()?;
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let splitter = Splitter { body, chunk_size: spec.chunk_size, overlap: spec.overlap };
    let ranges = splitter.split(0, body.len(), &spec.separators);

    // byte offset -> char offset
    let mut char_at = vec![0usize; body.len() + 1];
    let mut n = 0;
    for (i, c) in body.char_indices() {
        char_at[i] = n;
        n += 1;
        for k in 1..c.len_utf8() {
            char_at[i + k] = n;
        }
    }
    char_at[body.len()] = n;

    Ok(ranges
        .into_iter()
        .map(|(s, e)| TextSpan {
            text: body[s..e].to_string(),
            start: char_at[s],
            end: char_at[e],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(size: usize, overlap: usize) -> ChunkSpec {
        ChunkSpec::new(size, overlap).unwrap()
    }

    fn texts(spans: &[TextSpan]) -> Vec<&str> {
        spans.iter().map(|s| s.text.as_str()).collect()
    }

    // stride = size - overlap windows over the characters
    fn sliding_window(text: &str, size: usize, overlap: usize) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        loop {
            let end = (start + size).min(chars.len());
            out.push(chars[start..end].iter().collect());
            if end == chars.len() {
                break;
            }
            start += size - overlap;
        }
        out
    }

    #[test]
    fn short_body_single_chunk() {
        let out = split_text("coffee rust", &spec(800, 100)).unwrap();
        assert_eq!(texts(&out), vec!["coffee rust"]);
        assert_eq!((out[0].start, out[0].end), (0, 11));
    }

    #[test]
    fn character_level_windows() {
        let out = split_text("abcdefghij", &spec(4, 2)).unwrap();
        assert_eq!(texts(&out), vec!["abcd", "cdef", "efgh", "ghij"]);
        assert_eq!(sliding_window("abcdefghij", 4, 2), vec!["abcd", "cdef", "efgh", "ghij"]);
    }

    #[test]
    fn paragraph_boundary() {
        let body = "Para one here.\n\nPara two here.";
        let out = split_text(body, &spec(20, 5)).unwrap();
        assert_eq!(texts(&out), vec!["Para one here.\n\n", "Para two here."]);
        assert_eq!(out[1].start, 16);
    }

    #[test]
    fn words_pack_with_overlap() {
        let out = split_text("aa bb cc dd", &spec(6, 3)).unwrap();
        assert_eq!(texts(&out), vec!["aa bb ", "bb cc ", "cc dd"]);
    }

    #[test]
    fn invalid_spec() {
        assert!(ChunkSpec::new(4, 4).is_err());
        assert!(ChunkSpec::new(0, 0).is_err());
        let bad = ChunkSpec { chunk_size: 3, overlap: 5, separators: vec![] };
        assert!(split_text("abc", &bad).is_err());
    }

    #[test]
    fn empty_body() {
        assert!(split_text("", &spec(4, 1)).unwrap().is_empty());
    }

    #[test]
    fn multibyte_offsets_are_chars() {
        let out = split_text("çàé üö", &spec(3, 0)).unwrap();
        assert!(out.iter().all(|s| s.text.chars().count() <= 3));
        assert_eq!(out.last().unwrap().end, 6);
    }

    #[test]
    fn no_matching_separator_falls_back_to_chars() {
        let s = ChunkSpec { chunk_size: 3, overlap: 0, separators: vec!["\n".into()] };
        let out = split_text("abcdefg", &s).unwrap();
        assert_eq!(texts(&out), vec!["abc", "def", "g"]);
    }

    proptest! {
        #[test]
        fn letters_match_sliding_window(text in "[a-z]{1,60}", size in 1usize..12, ov in 0usize..12) {
            prop_assume!(ov < size);
            let got: Vec<String> = split_text(&text, &spec(size, ov)).unwrap().into_iter().map(|s| s.text).collect();
            prop_assert_eq!(got, sliding_window(&text, size, ov));
        }

        #[test]
        fn bounded_covering_monotone(text in "[a-zé \n.]{0,300}", size in 1usize..60, ov in 0usize..60) {
            prop_assume!(ov < size);
            let out = split_text(&text, &spec(size, ov)).unwrap();
            let n = text.chars().count();
            let chars: Vec<char> = text.chars().collect();
            let mut covered = 0usize;
            for (i, s) in out.iter().enumerate() {
                prop_assert!(s.text.chars().count() <= size);
                prop_assert!(s.start < s.end);
                prop_assert!(s.start <= covered, "gap before chunk {}", i);
                let slice: String = chars[s.start..s.end].iter().collect();
                prop_assert_eq!(&slice, &s.text);
                if i > 0 {
                    prop_assert!(s.start > out[i - 1].start);
                }
                covered = covered.max(s.end);
            }
            prop_assert_eq!(covered, n);
        }
    }
}
