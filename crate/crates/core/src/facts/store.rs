use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use super::schema::{self, term, vocab, ShapeRule};
use super::{EntityId, Fact, FactError, Pattern, Value};

#[derive(Debug, Default, Clone)]
struct Index {
    facts: BTreeSet<Fact>,
    by_subject: HashMap<EntityId, BTreeSet<Fact>>,
    by_predicate: HashMap<EntityId, BTreeSet<Fact>>,
    by_object: HashMap<Value, BTreeSet<Fact>>,
}

impl Index {
    fn insert(&mut self, fact: Fact) -> bool {
        if !self.facts.insert(fact.clone()) {
            return false;
        }
        self.by_subject
            .entry(fact.subject.clone())
            .or_default()
            .insert(fact.clone());
        self.by_predicate
            .entry(fact.predicate.clone())
            .or_default()
            .insert(fact.clone());
        self.by_object
            .entry(fact.object.clone())
            .or_default()
            .insert(fact);
        true
    }

    fn remove(&mut self, fact: &Fact) -> bool {
        if !self.facts.remove(fact) {
            return false;
        }
        fn drop_from<K: std::hash::Hash + Eq>(
            map: &mut HashMap<K, BTreeSet<Fact>>,
            key: &K,
            fact: &Fact,
        ) {
            if let Some(set) = map.get_mut(key) {
                set.remove(fact);
                if set.is_empty() {
                    map.remove(key);
                }
            }
        }
        drop_from(&mut self.by_subject, &fact.subject, fact);
        drop_from(&mut self.by_predicate, &fact.predicate, fact);
        drop_from(&mut self.by_object, &fact.object, fact);
        true
    }
}

/// An immutable view of the store at one version.
#[derive(Debug, Clone)]
pub struct WorldSnapshot {
    version: u64,
    index: Arc<Index>,
}

impl Default for WorldSnapshot {
    fn default() -> Self {
        WorldSnapshot {
            version: 0,
            index: Arc::new(Index::default()),
        }
    }
}

impl WorldSnapshot {
    /// Builds a snapshot directly from facts without type checks, e.g. for
    /// auditing an externally produced fact file.
    pub fn from_facts(version: u64, facts: impl IntoIterator<Item = Fact>) -> Self {
        let mut index = Index::default();
        for f in facts {
            index.insert(f);
        }
        WorldSnapshot {
            version,
            index: Arc::new(index),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.index.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.facts.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.index.facts.iter()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.index.facts.contains(fact)
    }

    /// All facts matching the partially bound triple, sorted by (s, p, o).
    pub fn query(
        &self,
        subject: Option<&EntityId>,
        predicate: Option<&EntityId>,
        object: Option<&Value>,
    ) -> Vec<&Fact> {
        let mut candidates: Vec<&BTreeSet<Fact>> = Vec::with_capacity(3);
        static EMPTY: BTreeSet<Fact> = BTreeSet::new();
        if let Some(s) = subject {
            candidates.push(self.index.by_subject.get(s).unwrap_or(&EMPTY));
        }
        if let Some(p) = predicate {
            candidates.push(self.index.by_predicate.get(p).unwrap_or(&EMPTY));
        }
        if let Some(o) = object {
            candidates.push(self.index.by_object.get(o).unwrap_or(&EMPTY));
        }
        let base = candidates
            .into_iter()
            .min_by_key(|set| set.len())
            .unwrap_or(&self.index.facts);
        base.iter()
            .filter(|f| {
                subject.is_none_or(|s| *s == f.subject)
                    && predicate.is_none_or(|p| *p == f.predicate)
                    && object.is_none_or(|o| *o == f.object)
            })
            .collect()
    }

    /// Triple-pattern query; an unbound pattern yields nothing.
    pub fn query_pattern(&self, pattern: &Pattern) -> Vec<&Fact> {
        if !pattern.is_bound() {
            return Vec::new();
        }
        self.query(
            pattern.subject.as_ref(),
            pattern.predicate.as_ref(),
            pattern.object.as_ref(),
        )
    }

    /// Pattern query restricted by a predicate over the matched fact.
    pub fn query_filter<F>(&self, pattern: &Pattern, keep: F) -> Vec<&Fact>
    where
        F: Fn(&Fact) -> bool,
    {
        self.query_pattern(pattern)
            .into_iter()
            .filter(|f| keep(f))
            .collect()
    }

    pub fn objects<'a>(
        &'a self,
        subject: &EntityId,
        predicate: &'a EntityId,
    ) -> impl Iterator<Item = &'a Value> + 'a {
        self.index
            .by_subject
            .get(subject)
            .into_iter()
            .flat_map(|set| set.iter())
            .filter(move |f| f.predicate == *predicate)
            .map(|f| &f.object)
    }

    /// The first object of `(subject, predicate, ?)`, if any.
    pub fn one(&self, subject: &EntityId, predicate: &str) -> Option<&Value> {
        let p = term(predicate);
        self.index
            .by_subject
            .get(subject)?
            .iter()
            .find(|f| f.predicate == p)
            .map(|f| &f.object)
    }

    pub fn has_subject(&self, e: &EntityId) -> bool {
        self.index.by_subject.contains_key(e)
    }

    pub fn mentions(&self, e: &EntityId) -> bool {
        self.has_subject(e) || self.index.by_object.contains_key(&Value::Entity(e.clone()))
    }

    /// Instances of `class` (via `ex:type`), sorted.
    pub fn instances(&self, class: &str) -> Vec<EntityId> {
        let ty = term(vocab::TYPE);
        self.query(None, Some(&ty), Some(&Value::Entity(term(class))))
            .into_iter()
            .map(|f| f.subject.clone())
            .collect()
    }

    pub fn has_type(&self, e: &EntityId, class: &str) -> bool {
        self.contains(&Fact::new(e.clone(), term(vocab::TYPE), term(class)))
    }

    /// `ex:index` of a time-window entity.
    pub fn window_index(&self, e: &EntityId) -> Option<u32> {
        self.one(e, vocab::INDEX)
            .and_then(Value::as_int)
            .and_then(|i| u32::try_from(i).ok())
    }

    /// Indexes of every declared time window, ascending.
    pub fn horizon(&self) -> BTreeSet<u32> {
        self.instances(vocab::TIME_WINDOW)
            .iter()
            .filter_map(|w| self.window_index(w))
            .collect()
    }

    fn is_derived(&self, e: &EntityId) -> bool {
        vocab::DERIVED_CLASSES.iter().any(|c| self.has_type(e, c))
    }

    /// Windows an entity is scoped to; `None` when it has facts but no
    /// window links (global), `Some(empty)` when it has no facts here.
    fn window_scope(&self, e: &EntityId) -> Option<BTreeSet<u32>> {
        let mut out = BTreeSet::new();
        if !self.has_subject(e) {
            return Some(out);
        }
        if self.has_type(e, vocab::TIME_WINDOW) {
            if let Some(i) = self.window_index(e) {
                out.insert(i);
            }
            return Some(out);
        }
        let for_window: Vec<u32> = self
            .objects(e, &term(vocab::FOR_WINDOW))
            .filter_map(Value::as_entity)
            .filter_map(|w| self.window_index(w))
            .collect();
        out.extend(for_window.iter().copied());
        out.extend(
            self.objects(e, &term(vocab::APPLIES_IN))
                .filter_map(Value::as_entity)
                .filter_map(|w| self.window_index(w)),
        );
        if let Some(end) = self
            .one(e, vocab::EXPIRES_AFTER)
            .and_then(Value::as_int)
            .and_then(|i| u32::try_from(i).ok())
        {
            for &start in &for_window {
                out.extend(start..=end);
            }
        }
        if out.is_empty() {
            None
        } else {
            Some(out)
        }
    }

    /// Transitive closure over provenance predicates, including `artifact`.
    pub fn provenance_trace(&self, artifact: &EntityId) -> Result<BTreeSet<EntityId>, FactError> {
        if !self.mentions(artifact) {
            return Err(FactError::UnknownEntity(artifact.clone()));
        }
        let preds: Vec<EntityId> = vocab::PROVENANCE.iter().map(|p| term(p)).collect();
        let step = |e: &EntityId| -> Vec<EntityId> {
            preds
                .iter()
                .flat_map(|p| self.objects(e, p))
                .filter_map(Value::as_entity)
                .cloned()
                .collect()
        };
        if step(artifact).is_empty() {
            return Err(FactError::EmptyProvenance(artifact.clone()));
        }
        let mut seen = BTreeSet::from([artifact.clone()]);
        let mut queue = VecDeque::from([artifact.clone()]);
        while let Some(e) = queue.pop_front() {
            for next in step(&e) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        Ok(seen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Assert,
    Retract,
}

/// Windows invalidated by one change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TouchedWindows {
    /// The fact has no window scope, so every window is affected.
    Global,
    Windows(BTreeSet<u32>),
    /// The fact describes a compiled artifact or planning activity and
    /// invalidates no inputs.
    Derived,
}

#[derive(Debug, Clone)]
pub struct ChangeRecord {
    pub version: u64,
    pub op: Op,
    pub fact: Fact,
    pub touched: TouchedWindows,
}

/// A batch of retractions followed by assertions, committed atomically.
#[derive(Debug, Clone, Default)]
pub struct ChangeSet {
    pub retracts: Vec<Fact>,
    pub asserts: Vec<Fact>,
}

impl ChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn asserting(facts: impl IntoIterator<Item = Fact>) -> Self {
        ChangeSet {
            retracts: Vec::new(),
            asserts: facts.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.retracts.is_empty() && self.asserts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.retracts.len() + self.asserts.len()
    }

    pub fn assert(&mut self, fact: Fact) -> &mut Self {
        self.asserts.push(fact);
        self
    }

    pub fn retract(&mut self, fact: Fact) -> &mut Self {
        self.retracts.push(fact);
        self
    }

    /// Retracts every current `(subject, predicate, ?)` and asserts the new value.
    pub fn replace(
        &mut self,
        snapshot: &WorldSnapshot,
        subject: EntityId,
        predicate: EntityId,
        object: impl Into<Value>,
    ) -> &mut Self {
        for f in snapshot.query(Some(&subject), Some(&predicate), None) {
            self.retracts.push(f.clone());
        }
        self.asserts.push(Fact::new(subject, predicate, object));
        self
    }

    /// Retracts every fact whose subject is `subject`.
    pub fn retract_subject(&mut self, snapshot: &WorldSnapshot, subject: &EntityId) -> &mut Self {
        for f in snapshot.query(Some(subject), None, None) {
            self.retracts.push(f.clone());
        }
        self
    }

    pub fn extend(&mut self, other: ChangeSet) -> &mut Self {
        self.retracts.extend(other.retracts);
        self.asserts.extend(other.asserts);
        self
    }
}

/// Single-writer fact store with a change log.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    current: WorldSnapshot,
    log: Vec<ChangeRecord>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.current.version
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        self.current.clone()
    }

    pub fn log(&self) -> &[ChangeRecord] {
        &self.log
    }

    /// Asserts a batch; returns the new version (unchanged for an empty or
    /// fully redundant batch).
    pub fn assert_facts(&mut self, batch: Vec<Fact>) -> Result<u64, FactError> {
        self.commit(ChangeSet::asserting(batch))
    }

    pub fn retract_facts(&mut self, batch: Vec<Fact>) -> Result<u64, FactError> {
        self.commit(ChangeSet {
            retracts: batch,
            asserts: Vec::new(),
        })
    }

    /// Applies a change set atomically after literal type checks.
    pub fn commit(&mut self, changes: ChangeSet) -> Result<u64, FactError> {
        let (next, records) = self.prepare(changes)?;
        Ok(self.install(next, records))
    }

    /// Like [`commit`](Self::commit) but also runs `rules` against the
    /// resulting snapshot; any violation rejects the whole batch.
    pub fn commit_validated(
        &mut self,
        changes: ChangeSet,
        rules: &[ShapeRule],
    ) -> Result<u64, FactError> {
        let (next, records) = self.prepare(changes)?;
        let violations = schema::validate(&next, rules);
        if let Some(first) = violations.first() {
            return Err(FactError::Rejected(
                violations.len(),
                format!("{} {}: {}", first.entity, first.rule, first.reason),
            ));
        }
        Ok(self.install(next, records))
    }

    /// The snapshot `changes` would produce, without committing it.
    pub fn preview(&self, changes: ChangeSet) -> Result<WorldSnapshot, FactError> {
        Ok(self.prepare(changes)?.0)
    }

    fn prepare(
        &self,
        changes: ChangeSet,
    ) -> Result<(WorldSnapshot, Vec<(Op, Fact)>), FactError> {
        for f in &changes.asserts {
            schema::check_literal(&f.predicate, &f.object)?;
        }
        let mut index = (*self.current.index).clone();
        let mut applied = Vec::new();
        for f in changes.retracts {
            if index.remove(&f) {
                applied.push((Op::Retract, f));
            }
        }
        for f in changes.asserts {
            if index.insert(f.clone()) {
                applied.push((Op::Assert, f));
            }
        }
        let version = if applied.is_empty() {
            self.current.version
        } else {
            self.current.version + 1
        };
        Ok((
            WorldSnapshot {
                version,
                index: Arc::new(index),
            },
            applied,
        ))
    }

    fn install(&mut self, next: WorldSnapshot, applied: Vec<(Op, Fact)>) -> u64 {
        if applied.is_empty() {
            return self.current.version;
        }
        let before = std::mem::replace(&mut self.current, next);
        for (op, fact) in applied {
            let touched = touched_windows(&fact, &before, &self.current);
            self.log.push(ChangeRecord {
                version: self.current.version,
                op,
                fact,
                touched,
            });
        }
        self.current.version
    }

    /// Union of windows touched by changes committed after `since_version`.
    pub fn dirty_windows(&self, since_version: u64) -> Result<BTreeSet<u32>, FactError> {
        if since_version > self.version() {
            return Err(FactError::VersionFromFuture {
                requested: since_version,
                current: self.version(),
            });
        }
        let horizon = self.current.horizon();
        let mut out = BTreeSet::new();
        for rec in self.log.iter().rev().take_while(|r| r.version > since_version) {
            match &rec.touched {
                TouchedWindows::Global => out.extend(horizon.iter().copied()),
                TouchedWindows::Windows(w) => out.extend(w.iter().copied()),
                TouchedWindows::Derived => {}
            }
        }
        out.retain(|w| horizon.contains(w));
        Ok(out)
    }
}

fn touched_windows(fact: &Fact, before: &WorldSnapshot, after: &WorldSnapshot) -> TouchedWindows {
    let subject = &fact.subject;
    if before.is_derived(subject) || after.is_derived(subject) {
        return TouchedWindows::Derived;
    }
    let mut windows = BTreeSet::new();
    for snap in [before, after] {
        match snap.window_scope(subject) {
            None => return TouchedWindows::Global,
            Some(w) => windows.extend(w),
        }
        if let Value::Entity(o) = &fact.object {
            if let Some(i) = snap.window_index(o) {
                let p = fact.predicate.to_string();
                if p == vocab::FOR_WINDOW || p == vocab::APPLIES_IN {
                    windows.insert(i);
                }
            }
        }
    }
    if windows.is_empty() {
        TouchedWindows::Global
    } else {
        TouchedWindows::Windows(windows)
    }
}
