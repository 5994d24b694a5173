use std::sync::OnceLock;

use regex::Regex;

use crate::formal::Term;

const SYMBOLS: &[(&str, &str)] = &[
    ("m∠", " measure of angle "),
    ("∠", " angle "),
    ("°", " degrees"),
    ("⊥", " is perpendicular to "),
    ("∥", " is parallel to "),
    ("△", " triangle "),
    ("⊙", " circle "),
    ("≅", " is congruent to "),
    ("∼", " is similar to "),
    ("~", " is similar to "),
    ("π", "pi"),
    ("×", "*"),
    ("·", "*"),
    ("−", "-"),
    ("–", "-"),
];

fn sqrt_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"√\s*(\d+(?:\.\d+)?|[a-z]\b)").expect("sqrt regex"))
}

/// Canonical prose form: symbols spelled out, punctuation split off, words
/// lowercased, point labels kept uppercase, whitespace collapsed.
pub fn normalize(prose: &str) -> String {
    let mut text = sqrt_regex().replace_all(prose, "sqrt($1)").replace('√', "sqrt");
    for (from, to) in SYMBOLS {
        text = text.replace(from, to);
    }

    let chars: Vec<char> = text.chars().collect();
    let mut spaced = String::with_capacity(text.len() + 16);
    for (i, &c) in chars.iter().enumerate() {
        let decimal_point = c == '.'
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if matches!(c, '.' | ',' | ';' | ':' | '?' | '!' | '=') && !decimal_point {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else if c.is_whitespace() {
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }

    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let mut out = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let sentence_start = i == 0 || matches!(tokens[i - 1], "." | "?" | "!");
        let next_is_word = tokens.get(i + 1).is_some_and(|n| n.starts_with(|c: char| c.is_ascii_lowercase()));
        let article = *tok == "A" && sentence_start && next_is_word;
        if Term::Point(tok.to_string()).validate().is_ok() && !article {
            out.push(tok.to_string());
        } else {
            out.push(tok.to_lowercase());
        }
    }
    out.join(" ")
}
