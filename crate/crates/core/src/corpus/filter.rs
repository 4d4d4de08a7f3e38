use serde::{Deserialize, Serialize};

/// Thresholds for accepting a method–comment pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_comment_tokens: usize,
    pub max_comment_tokens: usize,
    pub min_letter_ratio: f64,
    pub min_code_tokens: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_comment_tokens: 3,
            max_comment_tokens: 200,
            min_letter_ratio: 0.5,
            min_code_tokens: 2,
        }
    }
}

fn is_tag(word: &str) -> bool {
    word.len() > 1
        && word.starts_with('@')
        && word[1..]
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == ':')
}

/// Removes NatSpec tag markers (`@dev`, `@param`, ...) and collapses
/// whitespace, keeping the text that followed each tag.
pub fn strip_tags(comment: &str) -> String {
    comment
        .split_whitespace()
        .filter(|w| !is_tag(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when the comment has no prose outside `@param` and `@return`
/// entries, e.g. a bare `@param _addr`.
pub fn is_tag_skeleton(comment: &str) -> bool {
    let mut in_skeleton_tag = false;
    let mut prose = false;
    for word in comment.split_whitespace() {
        if is_tag(word) {
            in_skeleton_tag = matches!(word, "@param" | "@return" | "@returns");
        } else if !in_skeleton_tag && word.chars().any(char::is_alphabetic) {
            prose = true;
        }
    }
    !prose
}

fn letter_ratio(text: &str) -> f64 {
    let visible = text.chars().filter(|c| !c.is_whitespace()).count();
    if visible == 0 {
        return 0.0;
    }
    text.chars().filter(char::is_ascii_alphabetic).count() as f64 / visible as f64
}

impl FilterConfig {
    /// `raw_comment` is the cleaned doc comment with tags still present.
    pub fn accepts(&self, raw_comment: &str, code: &str) -> bool {
        let comment = strip_tags(raw_comment);
        let tokens = comment.split_whitespace().count();
        tokens >= self.min_comment_tokens
            && tokens <= self.max_comment_tokens
            && !is_tag_skeleton(raw_comment)
            && letter_ratio(&comment) >= self.min_letter_ratio
            && code.split_whitespace().count() >= self.min_code_tokens
            && comment.trim() != code.trim()
    }
}

/// [`FilterConfig::accepts`] with default thresholds.
pub fn filter_low_quality(comment: &str, code: &str) -> bool {
    FilterConfig::default().accepts(comment, code)
}
