//! Small text helpers shared across modules.

/// Strips one surrounding markdown code fence, if present. The opening fence
/// may carry a language tag (```json, ```text, ...). Inner fences are left
/// alone.
pub(crate) fn strip_code_fences(s: &str) -> &str {
    let t = s.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body_start) = rest.find('\n') else {
        return t;
    };
    let body = &rest[body_start + 1..];
    match body.rfind("```") {
        Some(end) => body[..end].trim_matches('\n'),
        None => t,
    }
}

/// Truncates to at most `max_chars` characters on a char boundary.
pub(crate) fn truncate_chars(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Returns the byte range covering chars `[start, end)` of `s`.
pub(crate) fn char_slice(s: &str, start: usize, end: usize) -> &str {
    if start >= end {
        return "";
    }
    let mut indices = s.char_indices().map(|(i, _)| i).skip(start);
    let Some(from) = indices.next() else {
        return "";
    };
    let to = s.char_indices().map(|(i, _)| i).nth(end).unwrap_or(s.len());
    &s[from..to]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_fence_with_language_tag() {
        assert_eq!(strip_code_fences("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fences("```\nplain\n```"), "plain");
    }

    #[test]
    fn leaves_unfenced_text_alone() {
        assert_eq!(strip_code_fences("  hello  "), "hello");
        assert_eq!(strip_code_fences("```not closed"), "```not closed");
    }

    #[test]
    fn truncates_on_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("ab", 10), "ab");
    }

    #[test]
    fn char_slice_handles_multibyte() {
        assert_eq!(char_slice("αβγδ", 1, 3), "βγ");
        assert_eq!(char_slice("abc", 2, 9), "c");
        assert_eq!(char_slice("abc", 3, 3), "");
    }
}
