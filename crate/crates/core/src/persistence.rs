//! Branch persistence by fat nodes.
//!
//! Every node holds a root record and, per branch label, an optional private
//! record. Reading under branch `i` returns the branch record when present and
//! the root record otherwise. A root write first copies the old root record
//! into every branch that has none, so branches never observe root writes;
//! the root update is then replayed on each branch, and branch records that
//! end up equal to the root record are dropped again.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::EngineError;
use crate::index::{Algo, NodeRef, NodeStore, QueryMode, ShapeTable, Word};
use crate::geometry::{Shape, ShapeId};

/// Label of the root version.
pub const ROOT: u64 = 0;

#[derive(Clone, Debug, Default)]
struct FatNode {
    root: Option<Box<[Word]>>,
    versions: BTreeMap<u64, Box<[Word]>>,
}

#[derive(Debug, Default)]
struct FatStore {
    nodes: Vec<FatNode>,
    labels: BTreeSet<u64>,
    records: usize,
    written: BTreeSet<NodeRef>,
    touches: Cell<u64>,
    lookups: Cell<u64>,
}

impl FatStore {
    fn read(&self, node: NodeRef, field: usize, label: u64) -> Word {
        self.touches.set(self.touches.get() + 1);
        let n = &self.nodes[node as usize];
        if label != ROOT {
            // One probe of a balanced map of this size.
            let probe = usize::BITS - n.versions.len().leading_zeros();
            self.lookups.set(self.lookups.get() + probe.max(1) as u64);
            if let Some(rec) = n.versions.get(&label) {
                return rec[field];
            }
        }
        n.root.as_ref().expect("node has no root record")[field]
    }

    fn push(&mut self, node: FatNode) -> NodeRef {
        self.records += 1;
        self.nodes.push(node);
        (self.nodes.len() - 1) as NodeRef
    }

    /// Drop branch records equal to the root record on nodes written since the last call.
    fn collapse(&mut self) {
        for node in std::mem::take(&mut self.written) {
            let n = &mut self.nodes[node as usize];
            if let Some(root) = &n.root {
                let before = n.versions.len();
                n.versions.retain(|_, rec| rec != root);
                self.records -= before - n.versions.len();
            }
        }
    }
}

/// The store as seen (and written) by one version.
struct View<'a> {
    fat: &'a mut FatStore,
    label: u64,
}

impl NodeStore for View<'_> {
    fn alloc(&mut self, fields: &[Word]) -> NodeRef {
        let rec: Box<[Word]> = fields.into();
        let node = if self.label == ROOT {
            FatNode { root: Some(rec), versions: BTreeMap::new() }
        } else {
            FatNode { root: None, versions: BTreeMap::from([(self.label, rec)]) }
        };
        self.fat.push(node)
    }

    /// Fat nodes are never recycled: other versions may still reach them.
    fn release(&mut self, _node: NodeRef) {}

    fn get(&self, node: NodeRef, field: usize) -> Word {
        self.fat.read(node, field, self.label)
    }

    fn set(&mut self, node: NodeRef, field: usize, value: Word) {
        let fat = &mut *self.fat;
        let n = &mut fat.nodes[node as usize];
        if self.label == ROOT {
            let root = n.root.as_mut().expect("root write to a branch-private node");
            if root[field] == value {
                return;
            }
            for &l in &fat.labels {
                if let std::collections::btree_map::Entry::Vacant(v) = n.versions.entry(l) {
                    v.insert(root.clone());
                    fat.records += 1;
                }
            }
            root[field] = value;
        } else {
            let rec = match n.versions.entry(self.label) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    fat.records += 1;
                    e.insert(n.root.as_ref().expect("branch write to an unreachable node").clone())
                }
            };
            rec[field] = value;
        }
        fat.written.insert(node);
    }
}

/// Read-only view for queries.
struct Reader<'a> {
    fat: &'a FatStore,
    label: u64,
}

impl NodeStore for Reader<'_> {
    fn alloc(&mut self, _fields: &[Word]) -> NodeRef {
        unreachable!("queries do not allocate")
    }

    fn release(&mut self, _node: NodeRef) {
        unreachable!("queries do not release")
    }

    fn get(&self, node: NodeRef, field: usize) -> Word {
        self.fat.read(node, field, self.label)
    }

    fn set(&mut self, _node: NodeRef, _field: usize, _value: Word) {
        unreachable!("queries do not write")
    }
}

/// An intersection index with a root set `S` and labeled branch subsets `S_i`.
#[derive(Debug)]
pub struct BranchStore {
    algo: Algo,
    fat: FatStore,
    header: NodeRef,
    table: ShapeTable,
    /// Difference trees: `S \ S_i` per branch.
    diffs: BTreeMap<u64, BTreeSet<ShapeId>>,
    abandoned: BTreeSet<u64>,
}

impl BranchStore {
    pub fn new(algo: Algo) -> BranchStore {
        let mut fat = FatStore::default();
        let header = algo.init(&mut View { fat: &mut fat, label: ROOT });
        BranchStore { algo, fat, header, table: ShapeTable::new(), diffs: BTreeMap::new(), abandoned: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, id: ShapeId) -> bool {
        self.table.contains_key(&id)
    }

    pub fn shape(&self, id: ShapeId) -> Option<&Shape> {
        self.table.get(&id)
    }

    pub fn branch_count(&self) -> usize {
        self.diffs.len()
    }

    pub fn has_branch(&self, label: u64) -> bool {
        self.diffs.contains_key(&label)
    }

    pub fn labels(&self) -> impl Iterator<Item = u64> + '_ {
        self.diffs.keys().copied()
    }

    /// Does `S_label` contain `id`?
    pub fn branch_contains(&self, label: u64, id: ShapeId) -> bool {
        self.table.contains_key(&id) && (label == ROOT || !self.diffs[&label].contains(&id))
    }

    /// Create branch `label` with `S_label = S`; a no-op when it exists.
    pub fn branch(&mut self, label: u64) {
        assert!(label != ROOT, "label 0 is the root");
        self.abandoned.remove(&label);
        if let std::collections::btree_map::Entry::Vacant(v) = self.diffs.entry(label) {
            v.insert(BTreeSet::new());
            self.fat.labels.insert(label);
        }
    }

    /// Mark a branch as unused; it keeps following root updates until the next
    /// rebuild, which does not recreate it. `branch` revives it.
    pub fn abandon(&mut self, label: u64) {
        if self.diffs.contains_key(&label) {
            self.abandoned.insert(label);
        }
    }

    /// Insert `id` (which must be in `S`) into `S_label`; idempotent.
    pub fn branch_insert(&mut self, label: u64, id: ShapeId) {
        let s = *self.table.get(&id).unwrap_or_else(|| panic!("branch insert of {id}, which is not in the root set"));
        let diff = self.diffs.get_mut(&label).expect("unknown branch");
        if !diff.remove(&id) {
            return;
        }
        self.algo.insert(&mut View { fat: &mut self.fat, label }, &self.table, self.header, &s);
        self.fat.collapse();
    }

    /// Delete `id` from `S_label`; idempotent.
    pub fn branch_delete(&mut self, label: u64, id: ShapeId) {
        let Some(s) = self.table.get(&id).copied() else { return };
        let diff = self.diffs.get_mut(&label).expect("unknown branch");
        if !diff.insert(id) {
            return;
        }
        self.algo.delete(&mut View { fat: &mut self.fat, label }, &self.table, self.header, &s);
        self.fat.collapse();
    }

    /// Insert into `S` and every branch.
    pub fn root_insert(&mut self, s: &Shape) -> Result<(), EngineError> {
        if self.table.contains_key(&s.id) {
            return Err(EngineError::DuplicateId(s.id));
        }
        self.table.insert(s.id, *s);
        self.algo.insert(&mut View { fat: &mut self.fat, label: ROOT }, &self.table, self.header, s);
        let labels: Vec<u64> = self.diffs.keys().copied().collect();
        for label in labels {
            self.algo.insert(&mut View { fat: &mut self.fat, label }, &self.table, self.header, s);
        }
        self.fat.collapse();
        Ok(())
    }

    /// Delete from `S` and every branch.
    pub fn root_delete(&mut self, id: ShapeId) -> Result<Shape, EngineError> {
        let s = *self.table.get(&id).ok_or(EngineError::UnknownId(id))?;
        self.algo.delete(&mut View { fat: &mut self.fat, label: ROOT }, &self.table, self.header, &s);
        let labels: Vec<u64> = self.diffs.keys().copied().collect();
        for label in labels {
            if !self.diffs.get_mut(&label).expect("label").remove(&id) {
                self.algo.delete(&mut View { fat: &mut self.fat, label }, &self.table, self.header, &s);
            }
        }
        self.fat.collapse();
        self.table.remove(&id);
        Ok(s)
    }

    /// A shape of `S_label` intersecting `q`.
    pub fn query(&self, label: u64, q: &Shape) -> Option<ShapeId> {
        self.query_mode(label, q, QueryMode::Any)
    }

    /// The smallest-id shape of `S_label` intersecting `q`.
    pub fn query_min(&self, label: u64, q: &Shape) -> Option<ShapeId> {
        self.query_mode(label, q, QueryMode::Min)
    }

    pub fn query_mode(&self, label: u64, q: &Shape, mode: QueryMode) -> Option<ShapeId> {
        assert!(label == ROOT || self.diffs.contains_key(&label), "unknown branch {label}");
        self.algo.query(&Reader { fat: &self.fat, label }, &self.table, self.header, q, mode)
    }

    /// Ids of `S_label` as stored in the structure, sorted.
    pub fn members(&self, label: u64) -> Vec<ShapeId> {
        let mut v = self.algo.members(&Reader { fat: &self.fat, label }, self.header);
        v.sort_unstable();
        v
    }

    /// `S \ S_label`.
    pub fn difference(&self, label: u64) -> &BTreeSet<ShapeId> {
        &self.diffs[&label]
    }

    /// Total size of all difference trees.
    pub fn z(&self) -> usize {
        self.diffs.values().map(|d| d.len()).sum()
    }

    /// Rebuild from `S` and the difference trees, dropping abandoned branches
    /// and all version history.
    pub fn rebuild(&mut self) {
        let mut fat = FatStore::default();
        let header = self.algo.init(&mut View { fat: &mut fat, label: ROOT });
        let mut ids: Vec<ShapeId> = self.table.keys().copied().collect();
        ids.sort_unstable();
        for id in &ids {
            let s = self.table[id];
            self.algo.insert(&mut View { fat: &mut fat, label: ROOT }, &self.table, header, &s);
        }
        for l in std::mem::take(&mut self.abandoned) {
            self.diffs.remove(&l);
        }
        for (&label, diff) in &self.diffs {
            fat.labels.insert(label);
            for id in diff {
                let s = self.table[id];
                self.algo.delete(&mut View { fat: &mut fat, label }, &self.table, header, &s);
            }
        }
        fat.collapse();
        fat.touches.set(self.fat.touches.get());
        fat.lookups.set(self.fat.lookups.get());
        self.fat = fat;
        self.header = header;
    }

    /// Records currently held: root records plus branch records.
    pub fn node_versions_total(&self) -> usize {
        self.fat.records
    }

    /// Weighted version-map probes performed by reads under a branch.
    pub fn lookups_total(&self) -> u64 {
        self.fat.lookups.get()
    }

    /// Node field reads.
    pub fn touches_total(&self) -> u64 {
        self.fat.touches.get()
    }
}
