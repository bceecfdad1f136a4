//! Word tokenization shared by the lexicon scorer and the reference resolver.

/// A lowercase alphanumeric token and its byte range in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of alphanumeric characters, lowercased. Punctuation and
/// apostrophes separate tokens, so "smith's" yields "smith" and "s".
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), current) {
            (true, None) => current = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    text: text[s..i].to_lowercase(),
                    start: s,
                    end: i,
                });
                current = None;
            }
            _ => {}
        }
    }
    if let Some(s) = current {
        out.push(Token {
            text: text[s..].to_lowercase(),
            start: s,
            end: text.len(),
        });
    }
    out
}

/// Token sequence of a (possibly multi-word) phrase.
pub fn phrase(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Start positions (token indices) where `needle` occurs as a whole-word sequence.
pub fn find_phrase(tokens: &[Token], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - needle.len())
        .filter(|&i| tokens[i..i + needle.len()].iter().zip(needle).all(|(t, n)| &t.text == n))
        .collect()
}
