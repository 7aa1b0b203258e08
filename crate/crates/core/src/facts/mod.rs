//! Versioned, typed temporal fact store.
//!
//! Facts are subject–predicate–object triples over a small fixed vocabulary
//! (see [`schema`]). A [`FactStore`] serializes writes and hands out immutable
//! [`WorldSnapshot`]s; every committed change is logged as a [`ChangeRecord`]
//! carrying the time windows it invalidates.

mod file;
pub mod schema;
mod store;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use file::{parse_fact_file, write_fact_file, FactLine, LineOp};
pub use schema::{standard_shapes, PropertyCheck, Range, ShapeRule, Violation};
pub use store::{
    ChangeRecord, ChangeSet, FactStore, Op, TouchedWindows, WorldSnapshot,
};

/// Errors raised by the fact store and the fact-file parser.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FactError {
    #[error("invalid entity id `{0}`")]
    InvalidEntity(String),
    #[error("unknown namespace `{0}` (expected ex, prov, time or geo)")]
    UnknownNamespace(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(EntityId),
    #[error("type mismatch for {predicate}: {reason}")]
    TypeMismatch { predicate: EntityId, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("entity `{0}` has no provenance edges")]
    EmptyProvenance(EntityId),
    #[error("version {requested} is in the future (current {current})")]
    VersionFromFuture { requested: u64, current: u64 },
    #[error("batch rejected: {0} shape violation(s), first: {1}")]
    Rejected(usize, String),
}

/// The four namespaces of the mission vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Namespace {
    Ex,
    Prov,
    Time,
    Geo,
}

impl Namespace {
    pub fn prefix(self) -> &'static str {
        match self {
            Namespace::Ex => "ex",
            Namespace::Prov => "prov",
            Namespace::Time => "time",
            Namespace::Geo => "geo",
        }
    }
}

impl FromStr for Namespace {
    type Err = FactError;

    fn from_str(s: &str) -> Result<Self, FactError> {
        match s {
            "ex" => Ok(Namespace::Ex),
            "prov" => Ok(Namespace::Prov),
            "time" => Ok(Namespace::Time),
            "geo" => Ok(Namespace::Geo),
            other => Err(FactError::UnknownNamespace(other.to_string())),
        }
    }
}

/// A namespaced identifier such as `ex:agent/alpha`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    pub namespace: Namespace,
    pub local: String,
}

impl EntityId {
    pub fn new(namespace: Namespace, local: impl Into<String>) -> Result<Self, FactError> {
        let local = local.into();
        if local.is_empty() || local.chars().any(char::is_whitespace) {
            return Err(FactError::InvalidEntity(format!(
                "{}:{}",
                namespace.prefix(),
                local
            )));
        }
        Ok(EntityId { namespace, local })
    }

    /// Shorthand for `ex:` identifiers built from trusted parts.
    ///
    /// Panics if `local` is empty or contains whitespace.
    pub fn ex(local: impl Into<String>) -> Self {
        Self::new(Namespace::Ex, local).expect("valid ex: identifier")
    }

    pub fn parse(text: &str) -> Result<Self, FactError> {
        let (ns, local) = text
            .split_once(':')
            .ok_or_else(|| FactError::InvalidEntity(text.to_string()))?;
        Self::new(ns.parse()?, local)
    }

    /// The last `/`-separated segment of the local name.
    pub fn leaf(&self) -> &str {
        self.local.rsplit('/').next().unwrap_or(&self.local)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.namespace.prefix(), self.local)
    }
}

impl FromStr for EntityId {
    type Err = FactError;

    fn from_str(s: &str) -> Result<Self, FactError> {
        EntityId::parse(s)
    }
}

impl Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        EntityId::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// The object position of a fact: another entity or a typed literal.
#[derive(Debug, Clone)]
pub enum Value {
    Entity(EntityId),
    Str(String),
    Int(i64),
    Real(f64),
    DateTime(String),
    Wkt(String),
    Json(String),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Entity(_) => 0,
            Value::Str(_) => 1,
            Value::Int(_) => 2,
            Value::Real(_) => 3,
            Value::DateTime(_) => 4,
            Value::Wkt(_) => 5,
            Value::Json(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Entity(_) => "entity",
            Value::Str(_) => "string",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::DateTime(_) => "datetime",
            Value::Wkt(_) => "wkt",
            Value::Json(_) => "json",
        }
    }

    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            Value::Entity(e) => Some(e),
            _ => None,
        }
    }

    /// Numeric view; integers widen to reals.
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Text payload of string-like literals.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Str(s) | Value::DateTime(s) | Value::Wkt(s) | Value::Json(s) => Some(s),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        use Value::*;
        match (self, other) {
            (Entity(a), Entity(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Str(a), Str(b))
            | (DateTime(a), DateTime(b))
            | (Wkt(a), Wkt(b))
            | (Json(a), Json(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Entity(e) => e.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Real(x) => x.to_bits().hash(state),
            Value::Str(s) | Value::DateTime(s) | Value::Wkt(s) | Value::Json(s) => s.hash(state),
        }
    }
}

impl From<EntityId> for Value {
    fn from(e: EntityId) -> Self {
        Value::Entity(e)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

/// One subject–predicate–object statement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub subject: EntityId,
    pub predicate: EntityId,
    pub object: Value,
}

impl Fact {
    pub fn new(subject: EntityId, predicate: EntityId, object: impl Into<Value>) -> Self {
        Fact {
            subject,
            predicate,
            object: object.into(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.subject,
            self.predicate,
            file::format_value(&self.object)
        )
    }
}

/// A triple pattern; `None` positions are wildcards.
#[derive(Debug, Clone, Default)]
pub struct Pattern {
    pub subject: Option<EntityId>,
    pub predicate: Option<EntityId>,
    pub object: Option<Value>,
}

impl Pattern {
    pub fn new(
        subject: Option<EntityId>,
        predicate: Option<EntityId>,
        object: Option<Value>,
    ) -> Self {
        Pattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn is_bound(&self) -> bool {
        self.subject.is_some() || self.predicate.is_some() || self.object.is_some()
    }

    pub fn matches(&self, fact: &Fact) -> bool {
        self.subject.as_ref().is_none_or(|s| *s == fact.subject)
            && self.predicate.as_ref().is_none_or(|p| *p == fact.predicate)
            && self.object.as_ref().is_none_or(|o| *o == fact.object)
    }
}
