//! BIO tag parsing, validation, and the run-based prefix recomputation used
//! by every projection path.

use serde::{Deserialize, Serialize};

pub const OUTSIDE: &str = "O";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    /// `None` for anything that is not `O`, `B-<type>` or `I-<type>` with a
    /// nonempty type.
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == OUTSIDE {
            return Some(Tag::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(ty)),
            "I" => Some(Tag::Inside(ty)),
            _ => None,
        }
    }

    pub fn slot_type(self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }
}

pub fn is_well_formed(tag: &str) -> bool {
    Tag::parse(tag).is_some()
}

/// Slot type of a tag; `None` for `O` and for malformed tags.
pub fn slot_type(tag: &str) -> Option<&str> {
    Tag::parse(tag).and_then(Tag::slot_type)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BioMode {
    Strict,
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// 0-based position of the offending tag.
    pub position: usize,
    pub tag: String,
}

/// Strict mode flags every `I-X` not directly preceded by `B-X` or `I-X`.
/// Lenient mode follows conlleval, which reads such a tag as a chunk start,
/// so nothing is flagged.
pub fn validate_bio<S: AsRef<str>>(tags: &[S], mode: BioMode) -> Vec<Violation> {
    if mode == BioMode::Lenient {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut prev: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let parsed = Tag::parse(tag);
        if let Some(Tag::Inside(ty)) = parsed {
            if prev != Some(ty) {
                out.push(Violation { position: i, tag: tag.to_string() });
            }
        }
        prev = parsed.and_then(Tag::slot_type);
    }
    out
}

/// Turns a sequence of slot types into BIO tags: the first token of each
/// maximal run of one type gets `B-`, the rest `I-`; `None` becomes `O`.
pub fn tags_from_types<S: AsRef<str>>(types: &[Option<S>]) -> Vec<String> {
    let mut out = Vec::with_capacity(types.len());
    let mut prev: Option<&str> = None;
    for ty in types {
        let ty = ty.as_ref().map(AsRef::as_ref);
        out.push(match ty {
            None => OUTSIDE.to_string(),
            Some(t) if prev == Some(t) => format!("I-{t}"),
            Some(t) => format!("B-{t}"),
        });
        prev = ty;
    }
    out
}

/// Rewrites every orphan `I-X` (one not continuing an `X` chunk) to `B-X`.
pub fn repair(tags: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(tags.len());
    let mut prev: Option<String> = None;
    for tag in tags {
        let fixed = match Tag::parse(tag) {
            Some(Tag::Inside(ty)) if prev.as_deref() != Some(ty) => format!("B-{ty}"),
            _ => tag.clone(),
        };
        prev = slot_type(&fixed).map(str::to_string);
        out.push(fixed);
    }
    out
}
