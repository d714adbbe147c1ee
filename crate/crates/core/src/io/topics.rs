//! Topics-XML parsing.
//!
//! Topics arrive as a `<topics>` document whose `<topic number=...>`
//! children carry `query`, `question`, and `narrative` elements.

use super::{normalize_ws, IoError};

/// A structured search topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub number: u32,
    pub query: String,
    pub question: String,
    pub narrative: String,
}

/// Parse a topics XML document into a list of [`Topic`]s, preserving
/// document order.
///
/// Field text is whitespace-normalized (trimmed, internal runs collapsed to
/// single spaces); a missing `question` or `narrative` element becomes the
/// empty string. Topic numbers must be unique and queries non-empty.
pub fn parse_topics(xml_text: &str) -> Result<Vec<Topic>, IoError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| {
        let pos = e.pos();
        IoError::Xml {
            line: pos.row as usize,
            col: pos.col as usize,
            message: e.to_string(),
        }
    })?;

    let root = doc.root_element();
    if root.tag_name().name() != "topics" {
        return Err(IoError::Xml {
            line: 1,
            col: 1,
            message: format!(
                "expected <topics> root element, found <{}>",
                root.tag_name().name()
            ),
        });
    }

    let mut topics = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for node in root.children().filter(|n| n.is_element()) {
        if node.tag_name().name() != "topic" {
            continue;
        }
        let number: u32 = node
            .attribute("number")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| IoError::TopicNumber {
                element: "topic".to_string(),
            })?;
        if !seen.insert(number) {
            return Err(IoError::DuplicateTopicNumber(number));
        }

        let field = |name: &str| -> String {
            node.children()
                .find(|c| c.is_element() && c.tag_name().name() == name)
                .map(|c| normalize_ws(c.text().unwrap_or("")))
                .unwrap_or_default()
        };
        let topic = Topic {
            number,
            query: field("query"),
            question: field("question"),
            narrative: field("narrative"),
        };
        if topic.query.is_empty() {
            return Err(IoError::EmptyQuery(number));
        }
        topics.push(topic);
    }
    Ok(topics)
}
