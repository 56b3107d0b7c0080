use super::RagError;

/// A slice of a document: its starting offset (in chars) and text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextSpan {
    pub char_start: usize,
    pub text: String,
}

/// Splits `body` into windows of at most `chunk_size` chars where each window
/// after the first begins `overlap` chars before the previous one ended.
///
/// Cuts snap back to just after the nearest preceding whitespace, as long as
/// the window still advances past the overlap; otherwise the cut is hard.
pub fn chunk_text(body: &str, chunk_size: usize, overlap: usize) -> Result<Vec<TextSpan>, RagError> {
    if chunk_size == 0 || overlap >= chunk_size {
        return Err(RagError::BadChunkParams { chunk_size, overlap });
    }
    if body.trim().is_empty() {
        return Err(RagError::EmptyDocument);
    }
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0;
    loop {
        let hard_end = (start + chunk_size).min(n);
        let end = if hard_end == n {
            n
        } else {
            let min_end = start + overlap + 1;
            (min_end..=hard_end).rev().find(|&e| chars[e - 1].is_whitespace()).unwrap_or(hard_end)
        };
        spans.push(TextSpan { char_start: start, text: chars[start..end].iter().collect() });
        if end == n {
            break;
        }
        start = end - overlap;
    }
    Ok(spans)
}
