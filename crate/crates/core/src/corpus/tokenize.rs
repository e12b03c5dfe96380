//! Whitespace-and-punctuation tokenizer.
//!
//! Version 1 rules, applied to each whitespace-delimited chunk:
//!
//! 1. The chunk is cut at every forced boundary (e.g. mention edges).
//! 2. From each piece, characters in [`SPLIT_PUNCT`] are peeled off the
//!    front and back as one-character tokens. An opening bracket at the front
//!    stays attached when its matching closing bracket sits inside the piece
//!    (`(2S)-butanol`); a closing bracket at the back stays attached when its
//!    opening bracket is inside the piece (`poly(dimethylsiloxane)`).
//! 3. Interior punctuation is never split (`N,N-dimethyl`, `Ca2+`).
//!
//! Offsets are in Unicode scalar values (chars), end-exclusive.

pub const TOKENIZER_VERSION: u32 = 1;

/// Characters peeled off token edges.
pub const SPLIT_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')', '[', ']', '{', '}'];

fn closing_for(c: char) -> Option<char> {
    match c {
        '(' => Some(')'),
        '[' => Some(']'),
        '{' => Some('}'),
        _ => None,
    }
}

fn opening_for(c: char) -> Option<char> {
    match c {
        ')' => Some('('),
        ']' => Some('['),
        '}' => Some('{'),
        _ => None,
    }
}

/// Index of the bracket closing `chars[open]`, searching forward.
fn find_close(chars: &[char], open: usize, end: usize) -> Option<usize> {
    let o = chars[open];
    let c = closing_for(o)?;
    let mut depth = 0usize;
    for (i, &ch) in chars.iter().enumerate().take(end).skip(open) {
        if ch == o {
            depth += 1;
        } else if ch == c {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Index of the bracket opening `chars[close]`, searching backward to `start`.
fn find_open(chars: &[char], start: usize, close: usize) -> Option<usize> {
    let c = chars[close];
    let o = opening_for(c)?;
    let mut depth = 0usize;
    for i in (start..=close).rev() {
        let ch = chars[i];
        if ch == c {
            depth += 1;
        } else if ch == o {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn split_piece(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    let mut tail = Vec::new();
    while start < end {
        let c = chars[start];
        if !SPLIT_PUNCT.contains(&c) {
            break;
        }
        if closing_for(c).is_some() {
            if let Some(close) = find_close(chars, start, end) {
                if close + 1 < end {
                    break;
                }
            }
        }
        out.push((start, start + 1));
        start += 1;
    }
    while start < end {
        let c = chars[end - 1];
        if !SPLIT_PUNCT.contains(&c) {
            break;
        }
        if opening_for(c).is_some() && find_open(chars, start, end - 1).is_some() {
            break;
        }
        tail.push((end - 1, end));
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
    out.extend(tail.into_iter().rev());
}

/// Token offsets of `text`, additionally cut at every char position in
/// `boundaries`.
pub fn tokenize_with_boundaries(text: &str, boundaries: &[usize]) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut cuts: Vec<usize> = boundaries.to_vec();
    cuts.sort_unstable();
    cuts.dedup();

    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let chunk_end = i;
        let mut piece_start = chunk_start;
        let lo = cuts.partition_point(|&b| b <= chunk_start);
        for &b in cuts[lo..].iter().take_while(|&&b| b < chunk_end) {
            split_piece(&chars, piece_start, b, &mut out);
            piece_start = b;
        }
        split_piece(&chars, piece_start, chunk_end, &mut out);
    }
    out
}

pub fn tokenize(text: &str) -> Vec<(usize, usize)> {
    tokenize_with_boundaries(text, &[])
}

/// Substring by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

/// Token strings of `text`.
pub fn tokenize_words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .map(|(s, e)| char_slice(text, s, e))
        .collect()
}
