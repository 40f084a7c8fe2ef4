//! Feature extraction: lexing plus the per-document feature channels
//! (includes, functions, comments, tokens, code keywords, LOC and the project
//! metadata channels), and selection of channel combinations as flat token
//! sequences for embedding.

mod lexer;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodeDocument, Dialect};
pub use lexer::{is_keyword, lex_source, Token, TokenKind, TokenStream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("channel {channel} is not available for {dialect} documents")]
    ChannelUnavailable { channel: Channel, dialect: Dialect },
    #[error("unknown feature channel {0:?}")]
    UnknownChannel(String),
    #[error("feature set must name at least one channel")]
    EmptyFeatureSet,
    #[error("channel {0} listed twice")]
    DuplicateChannel(Channel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Includes,
    Functions,
    Comments,
    Tokens,
    Code,
    Tags,
    Title,
    Description,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Includes,
        Channel::Functions,
        Channel::Comments,
        Channel::Tokens,
        Channel::Code,
        Channel::Tags,
        Channel::Title,
        Channel::Description,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Includes => "includes",
            Channel::Functions => "functions",
            Channel::Comments => "comments",
            Channel::Tokens => "tokens",
            Channel::Code => "code",
            Channel::Tags => "tags",
            Channel::Title => "title",
            Channel::Description => "description",
        }
    }

    /// Whether the channel exists for documents of `dialect`; SCL code has no
    /// includes and no project metadata.
    pub fn available_for(self, dialect: Dialect) -> bool {
        match dialect {
            Dialect::Arduino => true,
            Dialect::Scl => !matches!(
                self,
                Channel::Includes | Channel::Tags | Channel::Title | Channel::Description
            ),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let s = match s.as_str() {
            "descriptions" => "description",
            "titles" => "title",
            "keywords" => "code",
            other => other,
        };
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| FeatureError::UnknownChannel(s.to_string()))
    }
}

/// An ordered, duplicate-free, non-empty list of channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Channel>", into = "Vec<Channel>")]
pub struct FeatureSetSpec {
    channels: Vec<Channel>,
}

impl FeatureSetSpec {
    pub fn new(channels: Vec<Channel>) -> Result<Self, FeatureError> {
        if channels.is_empty() {
            return Err(FeatureError::EmptyFeatureSet);
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].contains(c) {
                return Err(FeatureError::DuplicateChannel(*c));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }
}

impl TryFrom<Vec<Channel>> for FeatureSetSpec {
    type Error = FeatureError;

    fn try_from(channels: Vec<Channel>) -> Result<Self, Self::Error> {
        Self::new(channels)
    }
}

impl From<FeatureSetSpec> for Vec<Channel> {
    fn from(spec: FeatureSetSpec) -> Self {
        spec.channels
    }
}

/// Parses `"code,comments"` or `"code+comments"`.
impl FromStr for FeatureSetSpec {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let channels = s
            .split([',', '+'])
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(channels)
    }
}

impl fmt::Display for FeatureSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.channels.iter().map(|c| c.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub doc_id: String,
    pub dialect: Option<Dialect>,
    pub includes: Vec<String>,
    pub functions: Vec<String>,
    pub comments: Vec<String>,
    pub tokens: Vec<String>,
    pub code: Vec<String>,
    pub loc: usize,
    pub tags: Vec<String>,
    pub title_tokens: Vec<String>,
    pub description_tokens: Vec<String>,
    /// Category found on an SCL `FAMILY: X` comment line, if any.
    pub family_label: Option<String>,
}

impl FeatureBundle {
    pub fn channel(&self, channel: Channel) -> &[String] {
        match channel {
            Channel::Includes => &self.includes,
            Channel::Functions => &self.functions,
            Channel::Comments => &self.comments,
            Channel::Tokens => &self.tokens,
            Channel::Code => &self.code,
            Channel::Tags => &self.tags,
            Channel::Title => &self.title_tokens,
            Channel::Description => &self.description_tokens,
        }
    }
}

fn family_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)family\s*:\s*([A-Za-z0-9_\-]*)").expect("valid regex"))
}

/// Removes every line mentioning `FAMILY:` from a comment body, returning the
/// cleaned body and the first family value seen.
fn strip_family_lines(body: &str) -> (String, Option<String>) {
    let re = family_re();
    let mut family = None;
    let kept: Vec<&str> = body
        .split('\n')
        .filter(|line| match re.captures(line) {
            Some(caps) => {
                if family.is_none() {
                    family = caps.get(1).map(|m| m.as_str().to_string()).filter(|s| !s.is_empty());
                }
                false
            }
            None => true,
        })
        .collect();
    (kept.join("\n"), family)
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .filter(|w| w.chars().any(|c| c.is_alphanumeric()))
        .map(str::to_string)
}

/// Extracts all feature channels from a document. Pure in the document.
///
/// * `functions`: identifiers directly followed by `(` (comments skipped),
///   deduplicated in first-seen order.
/// * `comments`: whitespace-split words of comment bodies; words without any
///   alphanumeric character (comment decoration such as `*`) are dropped.
/// * `tokens`: identifiers, keywords, numbers, string literals and include
///   targets.
/// * `code`: identifiers and keywords only.
/// * `loc`: non-blank source lines.
///
/// For SCL documents the `FAMILY: X` line is removed from every channel and
/// reported in `family_label`.
pub fn extract_features(doc: &CodeDocument) -> FeatureBundle {
    let scl = doc.dialect == Dialect::Scl;
    let mut bundle = FeatureBundle {
        doc_id: doc.id.clone(),
        dialect: Some(doc.dialect),
        ..Default::default()
    };
    for source in &doc.sources {
        bundle.loc += source.text.lines().filter(|l| !l.trim().is_empty()).count();
        let tokens = lex_source(&source.text, doc.dialect);
        let mut last_code: Option<&Token> = None;
        for tok in &tokens {
            match tok.kind {
                TokenKind::CommentText => {
                    if scl {
                        let (body, family) = strip_family_lines(&tok.text);
                        if bundle.family_label.is_none() {
                            bundle.family_label = family;
                        }
                        bundle.comments.extend(words(&body));
                    } else {
                        bundle.comments.extend(words(&tok.text));
                    }
                    continue;
                }
                TokenKind::Identifier | TokenKind::Keyword => {
                    bundle.tokens.push(tok.text.clone());
                    bundle.code.push(tok.text.clone());
                }
                TokenKind::Number => bundle.tokens.push(tok.text.clone()),
                TokenKind::StringLiteral => {
                    if !(scl && family_re().is_match(&tok.text)) {
                        bundle.tokens.push(tok.text.clone());
                    }
                }
                TokenKind::IncludeTarget => {
                    bundle.includes.push(tok.text.clone());
                    bundle.tokens.push(tok.text.clone());
                }
                TokenKind::Punct => {
                    if tok.text == "(" {
                        if let Some(prev) = last_code.filter(|p| p.kind == TokenKind::Identifier) {
                            if !bundle.functions.contains(&prev.text) {
                                bundle.functions.push(prev.text.clone());
                            }
                        }
                    }
                }
            }
            last_code = Some(tok);
        }
    }
    if !scl {
        bundle.tags = doc.tags.clone();
        bundle.title_tokens = doc.title.as_deref().map(|t| words(t).collect()).unwrap_or_default();
        bundle.description_tokens = doc
            .description
            .as_deref()
            .map(|t| words(t).collect())
            .unwrap_or_default();
    }
    bundle
}

/// Sets `doc.label` from the SCL `FAMILY: X` line when the label is unset.
/// Returns whether a label was assigned.
pub fn apply_family_label(doc: &mut CodeDocument) -> bool {
    if doc.label.is_some() || doc.dialect != Dialect::Scl {
        return false;
    }
    let family = extract_features(doc).family_label;
    let assigned = family.is_some();
    doc.label = family;
    assigned
}

/// Concatenates the requested channels in order, lowercased.
pub fn select_features(
    bundle: &FeatureBundle,
    spec: &FeatureSetSpec,
) -> Result<Vec<String>, FeatureError> {
    let dialect = bundle.dialect.unwrap_or(Dialect::Arduino);
    let mut out = Vec::new();
    for &channel in spec.channels() {
        if !channel.available_for(dialect) {
            return Err(FeatureError::ChannelUnavailable { channel, dialect });
        }
        out.extend(bundle.channel(channel).iter().map(|t| t.to_lowercase()));
    }
    Ok(out)
}
