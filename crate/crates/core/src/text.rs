use alloc::string::String;

/// Joins the whitespace-separated words of `s` with single spaces.
pub(crate) fn collapse_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for w in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// Comparison key under the case policy: whitespace collapsed, optionally lowercased.
pub(crate) fn comparison_key(s: &str, fold_case: bool) -> String {
    let collapsed = collapse_ws(s);
    if fold_case {
        collapsed.to_lowercase()
    } else {
        collapsed
    }
}

/// True when `s` has no leading/trailing whitespace and words are separated by
/// exactly one ASCII space.
pub(crate) fn is_single_spaced(s: &str) -> bool {
    if s.is_empty() {
        return true;
    }
    let mut prev_space = true;
    for c in s.chars() {
        if c == ' ' {
            if prev_space {
                return false;
            }
            prev_space = true;
        } else if c.is_whitespace() {
            return false;
        } else {
            prev_space = false;
        }
    }
    !prev_space
}
