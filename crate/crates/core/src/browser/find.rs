//! Find-on-page matching. Patterns are matched ASCII-case-insensitively
//! within single lines; `*` matches any (possibly empty) run of characters
//! but never crosses a line boundary.

/// Char offset of the first match of `pattern` starting at or after `from`.
/// An empty pattern never matches.
pub fn find_from(page: &str, pattern: &str, from: usize) -> Option<usize> {
    if pattern.is_empty() {
        return None;
    }
    let segments: Vec<Vec<char>> = pattern
        .split('*')
        .map(|seg| seg.chars().map(|c| c.to_ascii_lowercase()).collect())
        .collect();

    let mut offset = 0usize;
    for line in page.split('\n') {
        let chars: Vec<char> = line.chars().map(|c| c.to_ascii_lowercase()).collect();
        let line_len = chars.len();
        let first_start = from.saturating_sub(offset);
        if first_start <= line_len {
            for start in first_start..=line_len {
                if matches_at(&chars, start, &segments) {
                    return Some(offset + start);
                }
            }
        }
        offset += line_len + 1; // the newline itself
    }
    None
}

/// True when the segment list matches somewhere in `chars[start..]` with the
/// first segment anchored at `start`. Existence of a match only depends on
/// finding each literal segment in order, so a greedy left-to-right scan is
/// exact.
fn matches_at(chars: &[char], start: usize, segments: &[Vec<char>]) -> bool {
    let first = &segments[0];
    if start + first.len() > chars.len() || chars[start..start + first.len()] != first[..] {
        return false;
    }
    let mut pos = start + first.len();
    for segment in &segments[1..] {
        if segment.is_empty() {
            continue; // adjacent or trailing '*': matches the empty run
        }
        match find_segment(chars, pos, segment) {
            Some(found) => pos = found + segment.len(),
            None => return false,
        }
    }
    true
}

fn find_segment(chars: &[char], from: usize, segment: &[char]) -> Option<usize> {
    if from > chars.len() {
        return None;
    }
    (from..=chars.len().checked_sub(segment.len())?)
        .find(|&i| chars[i..i + segment.len()] == segment[..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_spans_within_a_line() {
        let page = "alpha beta gamma";
        assert_eq!(find_from(page, "be*ma", 0), Some(6));
        assert_eq!(find_from(page, "alpha*gamma", 0), Some(0));
    }

    #[test]
    fn literal_search_is_case_insensitive() {
        assert_eq!(find_from("Hello World", "world", 0), Some(6));
        assert_eq!(find_from("hello world", "WORLD", 0), Some(6));
    }

    #[test]
    fn absent_token_does_not_match() {
        assert_eq!(find_from("alpha beta", "absent-token", 0), None);
        assert_eq!(find_from("alpha beta", "", 0), None);
    }

    #[test]
    fn wildcard_does_not_cross_lines() {
        let page = "alpha\nbeta";
        assert_eq!(find_from(page, "alpha*beta", 0), None);
        assert_eq!(find_from(page, "al*a", 0), Some(0));
        assert_eq!(find_from(page, "be*a", 0), Some(6));
    }

    #[test]
    fn from_offset_skips_earlier_matches() {
        let page = "cat cat cat";
        assert_eq!(find_from(page, "cat", 0), Some(0));
        assert_eq!(find_from(page, "cat", 1), Some(4));
        assert_eq!(find_from(page, "cat", 5), Some(8));
        assert_eq!(find_from(page, "cat", 9), None);
    }

    #[test]
    fn leading_and_trailing_stars() {
        assert_eq!(find_from("xxabyy", "*ab", 0), Some(0));
        assert_eq!(find_from("xxabyy", "ab*", 0), Some(2));
        assert_eq!(find_from("xxabyy", "a**b", 0), Some(2));
    }

    #[test]
    fn multibyte_offsets_are_char_counts() {
        let page = "ααβ target";
        assert_eq!(find_from(page, "target", 0), Some(4));
    }
}
