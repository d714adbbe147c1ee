//! The fixed analysis pipeline: lowercase, split on non-alphanumerics,
//! drop tokens shorter than 2 characters, drop stopwords, Porter-stem.
//!
//! Every downstream number depends on this pipeline being deterministic,
//! so there are no configuration knobs here.

use super::porter;

// Lucene's classic English stopword list.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Tokenize `text` with the fixed pipeline.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| !is_stopword(t))
        .map(porter::stem)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_is_sorted_for_binary_search() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn lowercases_and_splits_on_non_alphanumerics() {
        assert_eq!(
            tokenize("Covid covid spread"),
            vec!["covid", "covid", "spread"]
        );
        assert_eq!(tokenize("COVID-19"), vec!["covid", "19"]);
    }

    #[test]
    fn drops_short_tokens_and_stopwords() {
        assert_eq!(tokenize("a I x of the spread"), vec!["spread"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("-- :: !!").is_empty());
    }

    #[test]
    fn applies_porter_stemming() {
        assert_eq!(tokenize("infections"), vec!["infect"]);
        assert_eq!(tokenize("immunity"), vec!["immun"]);
        assert_eq!(tokenize("studies suggesting"), vec!["studi", "suggest"]);
    }
}
