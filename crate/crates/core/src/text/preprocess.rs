use std::collections::{HashMap, HashSet};
use std::io::Read;

use crate::error::Result;
use crate::ingest::{check_header, csv_reader, row_error};

/// A small English stopword list used when no list is configured.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did",
    "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
    "or", "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub item_id: String,
    pub tokens: Vec<String>,
}

/// Lowercases `label` + `description`, splits on non-alphanumeric
/// characters, and drops stopwords and single-character tokens.
pub fn preprocess(item_id: &str, label: &str, description: &str, stopwords: &HashSet<String>) -> TokenizedDoc {
    let text = format!("{label} {description}").to_lowercase();
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1 && !stopwords.contains(*t))
        .map(str::to_string)
        .collect();
    TokenizedDoc {
        item_id: item_id.to_string(),
        tokens,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub item_id: String,
    pub token: String,
    pub pos: String,
}

/// Reads an externally produced `item_id,token,pos` table.
pub fn parse_tagged_tokens<R: Read>(input: R) -> Result<Vec<TaggedToken>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &["item_id", "token", "pos"])?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(row_error)?;
        out.push(TaggedToken {
            item_id: row[0].to_string(),
            token: row[1].to_lowercase(),
            pos: row[2].to_uppercase(),
        });
    }
    Ok(out)
}

/// Keeps only tokens tagged as nouns or adjectives for items that have tags;
/// documents without any tags are left untouched.
pub fn apply_pos_filter(docs: &mut [TokenizedDoc], tags: &[TaggedToken]) {
    const KEEP: [&str; 3] = ["NOUN", "PROPN", "ADJ"];
    let mut by_item: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut tagged: HashSet<&str> = HashSet::new();
    for t in tags {
        tagged.insert(&t.item_id);
        if KEEP.contains(&t.pos.as_str()) {
            by_item.entry(&t.item_id).or_default().insert(&t.token);
        }
    }
    for doc in docs {
        if !tagged.contains(doc.item_id.as_str()) {
            continue;
        }
        let keep = by_item.get(doc.item_id.as_str());
        doc.tokens.retain(|tok| keep.is_some_and(|k| k.contains(tok.as_str())));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn london_example() {
        let doc = preprocess("Q84", "London", "capital of the UK", &stop(&["of", "the"]));
        assert_eq!(doc.tokens, ["london", "capital", "uk"]);
    }

    #[test]
    fn empty_and_single_letters() {
        assert!(preprocess("Q", "", "", &stop(&[])).tokens.is_empty());
        assert!(preprocess("Q", "a-b", "", &stop(&[])).tokens.is_empty());
    }

    #[test]
    fn punctuation_only_is_dropped() {
        let doc = preprocess("Q", "--- ... !!", "état (1998)", &stop(&[]));
        assert_eq!(doc.tokens, ["état", "1998"]);
    }

    #[test]
    fn pos_filter_keeps_nouns_and_adjectives() {
        let mut docs = vec![
            preprocess("Q1", "red planet", "orbits quickly", &stop(&[])),
            preprocess("Q2", "untagged text", "", &stop(&[])),
        ];
        let tags = parse_tagged_tokens(
            "item_id,token,pos\nQ1,red,ADJ\nQ1,planet,NOUN\nQ1,orbits,VERB\nQ1,quickly,ADV\n".as_bytes(),
        )
        .unwrap();
        apply_pos_filter(&mut docs, &tags);
        assert_eq!(docs[0].tokens, ["red", "planet"]);
        assert_eq!(docs[1].tokens, ["untagged", "text"]);
    }

    proptest! {
        #[test]
        fn idempotent(label in "\\PC{0,40}", desc in "\\PC{0,60}") {
            let sw: HashSet<String> = DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect();
            let once = preprocess("Q", &label, &desc, &sw);
            let twice = preprocess("Q", &once.tokens.join(" "), "", &sw);
            prop_assert_eq!(once.tokens, twice.tokens);
        }
    }
}
