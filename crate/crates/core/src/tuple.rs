//! Relational tuples and the BIO label inventory used to tag them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default highest argument index (`ARG0` through `ARG5`).
pub const DEFAULT_MAX_ARG: u8 = 5;

/// A slot of an n-ary tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Rel,
    Arg(u8),
}

impl Role {
    /// Canonical tuple order: ARG0, REL, ARG1, ARG2, ...
    fn rank(self) -> u16 {
        match self {
            Role::Arg(0) => 0,
            Role::Rel => 1,
            Role::Arg(k) => k as u16 + 1,
        }
    }
}

impl Ord for Role {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for Role {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Rel => write!(f, "REL"),
            Role::Arg(k) => write!(f, "ARG{k}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown role `{0}`")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "REL" {
            return Ok(Role::Rel);
        }
        s.strip_prefix("ARG")
            .and_then(|k| if k.is_empty() || k.starts_with('+') { None } else { k.parse::<u8>().ok() })
            .map(Role::Arg)
            .ok_or_else(|| UnknownRole(s.to_string()))
    }
}

impl Serialize for Role {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive token range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// An extracted or gold tuple anchored on its relation-indicator verb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub indicator_verb: usize,
    pub spans: BTreeMap<Role, Span>,
    pub confidence: f64,
}

impl Tuple {
    pub fn new(indicator_verb: usize, spans: BTreeMap<Role, Span>, confidence: f64) -> Self {
        Tuple {
            indicator_verb,
            spans,
            confidence,
        }
    }

    pub fn rel(&self) -> Option<Span> {
        self.spans.get(&Role::Rel).copied()
    }

    /// First pair of roles whose spans overlap, if any.
    pub fn overlapping_roles(&self) -> Option<(Role, Role)> {
        let spans: Vec<_> = self.spans.iter().collect();
        for (a, (ra, sa)) in spans.iter().enumerate() {
            for (rb, sb) in &spans[a + 1..] {
                if sa.overlaps(sb) {
                    return Some((**ra, **rb));
                }
            }
        }
        None
    }

    /// Surface text of every role, whitespace-joined.
    pub fn texts<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeMap<Role, String> {
        self.spans
            .iter()
            .map(|(role, span)| {
                let words: Vec<&str> = tokens[span.start..=span.end].iter().map(AsRef::as_ref).collect();
                (*role, words.join(" "))
            })
            .collect()
    }
}

/// One BIO label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(Role),
    I(Role),
}

impl Tag {
    pub fn role(self) -> Option<Role> {
        match self {
            Tag::O => None,
            Tag::B(r) | Tag::I(r) => Some(r),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => write!(f, "O"),
            Tag::B(r) => write!(f, "B-{r}"),
            Tag::I(r) => write!(f, "I-{r}"),
        }
    }
}

impl FromStr for Tag {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::O);
        }
        if let Some(r) = s.strip_prefix("B-") {
            return Ok(Tag::B(r.parse()?));
        }
        if let Some(r) = s.strip_prefix("I-") {
            return Ok(Tag::I(r.parse()?));
        }
        Err(UnknownRole(s.to_string()))
    }
}

/// The label inventory `{O, B-REL, I-REL, B-ARGk, I-ARGk | k <= max_arg}`.
///
/// Ids are laid out as `O, B-REL, I-REL, B-ARG0, I-ARG0, B-ARG1, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSet {
    max_arg: u8,
}

impl TagSet {
    pub fn new(max_arg: u8) -> Self {
        TagSet { max_arg }
    }

    pub fn max_arg(&self) -> u8 {
        self.max_arg
    }

    pub fn len(&self) -> usize {
        3 + 2 * (self.max_arg as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn supports(&self, role: Role) -> bool {
        match role {
            Role::Rel => true,
            Role::Arg(k) => k <= self.max_arg,
        }
    }

    pub fn id(&self, tag: Tag) -> Option<usize> {
        let base = |role: Role| match role {
            Role::Rel => Some(1),
            Role::Arg(k) if k <= self.max_arg => Some(3 + 2 * k as usize),
            Role::Arg(_) => None,
        };
        match tag {
            Tag::O => Some(0),
            Tag::B(r) => base(r),
            Tag::I(r) => base(r).map(|b| b + 1),
        }
    }

    pub fn tag(&self, id: usize) -> Option<Tag> {
        match id {
            0 => Some(Tag::O),
            1 => Some(Tag::B(Role::Rel)),
            2 => Some(Tag::I(Role::Rel)),
            _ if id < self.len() => {
                let k = ((id - 3) / 2) as u8;
                Some(if (id - 3).is_multiple_of(2) { Tag::B(Role::Arg(k)) } else { Tag::I(Role::Arg(k)) })
            }
            _ => None,
        }
    }

    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        (0..self.len()).filter_map(|id| self.tag(id))
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::new(DEFAULT_MAX_ARG)
    }
}

/// Writes a tuple's spans as a BIO sequence of length `n`.
///
/// Spans are assumed disjoint and within bounds.
pub fn encode_bio(spans: &BTreeMap<Role, Span>, n: usize) -> Vec<Tag> {
    let mut tags = vec![Tag::O; n];
    for (role, span) in spans {
        let end = span.end.min(n.saturating_sub(1));
        for (idx, tag) in tags.iter_mut().enumerate().take(end + 1).skip(span.start) {
            *tag = if idx == span.start { Tag::B(*role) } else { Tag::I(*role) };
        }
    }
    tags
}

/// True when every `I-X` continues a run started by `B-X`.
pub fn is_well_formed(tags: &[Tag]) -> bool {
    let mut open: Option<Role> = None;
    for tag in tags {
        match tag {
            Tag::O => open = None,
            Tag::B(r) => open = Some(*r),
            Tag::I(r) => {
                if open != Some(*r) {
                    return false;
                }
            }
        }
    }
    true
}
