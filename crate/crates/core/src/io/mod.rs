//! Parsers and writers for the external artifacts: topics XML, TREC run
//! files, TREC qrels files, and the JSON-Lines document corpus.
//!
//! All parsers are pure functions of their input text and either return a
//! value or a diagnosed [`IoError`]; they never panic on bad input.

mod corpus;
mod qrels;
mod run;
mod topics;

pub use corpus::{load_corpus, Doc};
pub use qrels::{parse_qrels, write_qrels, Qrels, QrelsParse};
pub use run::{parse_run, write_run, Run, RunEntry};
pub use topics::{parse_topics, Topic};

use thiserror::Error;

/// Errors produced by any of the corpus-io parsers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IoError {
    /// The XML itself could not be parsed.
    #[error("line {line}, column {col}: malformed XML: {message}")]
    Xml {
        line: usize,
        col: usize,
        message: String,
    },
    /// A `<topic>` element lacks a usable `number` attribute.
    #[error("<{element}> element is missing a valid `number` attribute")]
    TopicNumber { element: String },
    /// Two topics share a number.
    #[error("duplicate topic number {0}")]
    DuplicateTopicNumber(u32),
    /// A topic has an empty `query` field.
    #[error("topic {0} has an empty query")]
    EmptyQuery(u32),
    /// A line of a run, qrels, or corpus file could not be parsed.
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    /// A run file parsed but violates a run invariant.
    #[error("topic {topic}, line {line}: {message}")]
    RunInvariant {
        topic: u32,
        line: usize,
        message: String,
    },
    /// Two corpus documents share an id.
    #[error("duplicate doc_id `{0}`")]
    DuplicateDoc(String),
    /// A corpus document has neither an abstract nor full text.
    #[error("doc `{0}` has neither abstract nor full_text")]
    EmptyDoc(String),
}

/// Trim surrounding whitespace and collapse internal runs to single spaces.
pub(crate) fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Format `x` with `sig` significant digits, `%g`-style: positional notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
///
/// The output is idempotent: parsing it back and reformatting yields the
/// same string, which is what makes run files round-trip byte-for-byte.
pub(crate) fn format_sig(x: f64, sig: usize) -> String {
    debug_assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    // {:e} rounds the mantissa to exactly `sig` digits and carries into the
    // exponent when rounding overflows (0.9999995 -> 1e0).
    let formatted = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = formatted
        .split_once('e')
        .expect("float e-format always contains an exponent");
    let exp: i32 = exp.parse().expect("float e-format exponent is an integer");

    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_fraction(mantissa);
        return format!("{mantissa}e{exp}");
    }

    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let rendered = if exp >= 0 {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            format!("{digits}{}", "0".repeat(int_len - digits.len()))
        } else {
            format!("{}.{}", &digits[..int_len], &digits[int_len..])
        }
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{}", trim_fraction(&rendered))
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
