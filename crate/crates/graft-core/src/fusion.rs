//! The fusion driver: find consecutive traversal-call sequences, outline and
//! inline them into merged functions keyed by their concrete function
//! sequence, reorder with greedy call grouping, and recurse on the grouped
//! calls. Units are memoized per key; a sequence that reappears (including
//! inside its own construction) becomes a call to the existing unit.

use crate::depgraph::{build_dependence_graph, merge_bodies, DepGraph, MergedStmt};
use crate::error::{Error, Result, Span};
use crate::model::{concrete_targets, lub_type};
use crate::resolved::*;
use crate::surface;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    /// Max constituents per fused function.
    pub max_seq_len: usize,
    /// Max occurrences of one static function per group.
    pub max_repeat: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            max_seq_len: 5,
            max_repeat: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FusionKey(pub Vec<FnId>);

impl FusionKey {
    pub fn display(&self, rp: &RProgram) -> String {
        self.0
            .iter()
            .map(|f| rp.fn_display(*f).to_string())
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[derive(Debug, Clone)]
pub struct CallGroup {
    /// Vertex indices into the merged body, in program order.
    pub members: Vec<usize>,
    pub child: ChildFieldId,
    /// Index into `FusionResult::stubs`.
    pub stub: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedItem {
    Vertex(usize),
    Group(usize),
}

#[derive(Debug, Clone)]
pub struct FusionUnit {
    pub key: FusionKey,
    pub name: String,
    pub receiver: KindId,
    pub merged: Vec<MergedStmt>,
    pub graph: DepGraph,
    pub groups: Vec<CallGroup>,
    pub schedule: Vec<SchedItem>,
    pub split_events: u32,
}

#[derive(Debug, Clone)]
pub struct StubFamily {
    pub name: String,
    /// Declared kind of the traversed child (dispatch base).
    pub base: KindId,
    pub families: Vec<FamilyId>,
    /// (concrete kind, unit index), in declaration order.
    pub arms: Vec<(KindId, usize)>,
}

#[derive(Debug, Clone)]
pub enum EntryOut {
    Bind(BindingIdx),
    Call {
        binding: BindingIdx,
        family: FamilyId,
        surface_args: Vec<surface::Expr>,
        span: Span,
    },
    Stub {
        binding: BindingIdx,
        stub: usize,
        mask: u32,
        surface_args: Vec<surface::Expr>,
        span: Span,
    },
}

#[derive(Debug, Clone, Default)]
pub struct UnitStats {
    pub key: String,
    pub constituents: Vec<String>,
    pub grouped_calls: u32,
    pub split_events: u32,
}

#[derive(Debug, Clone, Default)]
pub struct FusionStats {
    pub sequences_found: u32,
    pub units_created: u32,
    pub units_reused: u32,
    pub entry_splits: u32,
    pub per_unit: Vec<UnitStats>,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub units: Vec<FusionUnit>,
    pub stubs: Vec<StubFamily>,
    pub entry: Vec<EntryOut>,
    pub stats: FusionStats,
}

/// Maximal runs of consecutive fusible traversal calls on one binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSeq {
    pub binding: BindingIdx,
    /// Indices into `rp.entry`.
    pub entries: Vec<usize>,
}

pub fn find_seed_sequences(rp: &RProgram) -> Vec<SeedSeq> {
    let mut out: Vec<SeedSeq> = Vec::new();
    let mut current: Option<SeedSeq> = None;
    for (i, e) in rp.entry.iter().enumerate() {
        let fusible = match e {
            REntry::Call {
                binding, family, span, ..
            } => {
                let bkind = rp.bindings[binding.idx()].kind;
                match concrete_targets(rp, bkind, *family, *span) {
                    Ok(targets) => {
                        if targets.iter().any(|(_, f)| rp.unfusible[f.idx()]) {
                            None
                        } else {
                            Some(*binding)
                        }
                    }
                    Err(_) => None,
                }
            }
            _ => None,
        };
        match fusible {
            Some(b) => match &mut current {
                Some(seq) if seq.binding == b => seq.entries.push(i),
                _ => {
                    if let Some(seq) = current.take() {
                        out.push(seq);
                    }
                    current = Some(SeedSeq {
                        binding: b,
                        entries: vec![i],
                    });
                }
            },
            None => {
                if let Some(seq) = current.take() {
                    out.push(seq);
                }
            }
        }
    }
    if let Some(seq) = current.take() {
        out.push(seq);
    }
    out
}

/// Greedy call grouping: in program order, accumulate later ungrouped calls
/// on the same child field while the whole grouping stays contiguously
/// schedulable (the group-contracted graph remains acyclic) and the static
/// per-function repeat limit holds.
pub fn group_calls(
    graph: &DepGraph,
    merged: &[MergedStmt],
    config: &FusionConfig,
) -> (Vec<(Vec<usize>, ChildFieldId)>, u32) {
    let n = merged.len();
    let call_vertices: Vec<usize> = (0..n)
        .filter(|&v| matches!(merged[v].call, Some((Some(_), _))))
        .collect();
    let mut grouped = vec![false; n];
    let mut groups: Vec<(Vec<usize>, ChildFieldId)> = Vec::new();
    for &v in &call_vertices {
        if grouped[v] {
            continue;
        }
        let Some((Some(child), _)) = merged[v].call else {
            continue;
        };
        let mut members = vec![v];
        grouped[v] = true;
        for &w in &call_vertices {
            if w <= v || grouped[w] {
                continue;
            }
            if members.len() >= config.max_seq_len {
                break;
            }
            let Some((Some(wchild), wfam)) = merged[w].call else {
                continue;
            };
            if wchild != child {
                continue;
            }
            let repeats = members
                .iter()
                .filter(|&&m| {
                    let Some((_, mfam)) = merged[m].call else { return false };
                    mfam == wfam
                })
                .count();
            if repeats >= config.max_repeat {
                continue;
            }
            let mut tentative = members.clone();
            tentative.push(w);
            if contracted_acyclic(graph, n, &groups, &tentative) {
                members.push(w);
                grouped[w] = true;
            }
        }
        groups.push((members, child));
    }
    // split events: per child field, each group beyond the first
    let mut per_field: HashMap<ChildFieldId, u32> = HashMap::new();
    for (_, child) in &groups {
        *per_field.entry(*child).or_insert(0) += 1;
    }
    let split_events = per_field.values().map(|&c| c.saturating_sub(1)).sum();
    (groups, split_events)
}

/// Acyclicity of the graph with each group contracted to one vertex.
fn contracted_acyclic(
    graph: &DepGraph,
    n: usize,
    groups: &[(Vec<usize>, ChildFieldId)],
    tentative: &[usize],
) -> bool {
    let mut cluster: Vec<usize> = (0..n).collect();
    for (members, _) in groups {
        let c = members[0];
        for &m in members {
            cluster[m] = c;
        }
    }
    let c = tentative[0];
    for &m in tentative {
        cluster[m] = c;
    }
    // Kahn over contracted vertices
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        indegree.entry(cluster[v]).or_insert(0);
    }
    for &(u, v, _) in &graph.edges {
        let (cu, cv) = (cluster[u], cluster[v]);
        if cu != cv {
            adj.entry(cu).or_default().push(cv);
            *indegree.entry(cv).or_insert(0) += 1;
        }
    }
    let mut ready: Vec<usize> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&c, _)| c)
        .collect();
    let mut done = 0usize;
    while let Some(c) = ready.pop() {
        done += 1;
        if let Some(next) = adj.get(&c) {
            for &t in next {
                let d = indegree.get_mut(&t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(t);
                }
            }
        }
    }
    done == indegree.len()
}

/// Deterministic topological order, stable by original position, with group
/// members adjacent (groups occupy one slot).
pub fn schedule(
    graph: &DepGraph,
    merged: &[MergedStmt],
    groups: &[(Vec<usize>, ChildFieldId)],
) -> Result<Vec<SchedItem>> {
    let n = merged.len();
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut cluster_item: HashMap<usize, SchedItem> = HashMap::new();
    for v in 0..n {
        cluster_item.insert(v, SchedItem::Vertex(v));
    }
    for (gi, (members, _)) in groups.iter().enumerate() {
        let c = members[0];
        for &m in members {
            cluster[m] = c;
        }
        cluster_item.insert(c, SchedItem::Group(gi));
    }
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        indegree.entry(cluster[v]).or_insert(0);
    }
    for &(u, v, _) in &graph.edges {
        let (cu, cv) = (cluster[u], cluster[v]);
        if cu != cv {
            adj.entry(cu).or_default().push(cv);
            *indegree.entry(cv).or_insert(0) += 1;
        }
    }
    let total = indegree.len();
    let mut out = Vec::new();
    let mut ready: Vec<usize> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&c, _)| c)
        .collect();
    while !ready.is_empty() {
        // stable: smallest original position first (a cluster's position is
        // its representative, which is its earliest member)
        ready.sort_unstable();
        let c = ready.remove(0);
        out.push(cluster_item[&c]);
        if let Some(next) = adj.remove(&c) {
            for t in next {
                let d = indegree.get_mut(&t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(t);
                }
            }
        }
    }
    if out.len() != total {
        return Err(Error::internal("cycle detected while scheduling"));
    }
    Ok(out)
}

/// Kahn's algorithm with a random ready-pick: any topological order of the
/// group-contracted graph, for reorder fuzzing.
pub fn schedule_random(
    graph: &DepGraph,
    merged: &[MergedStmt],
    groups: &[(Vec<usize>, ChildFieldId)],
    rng: &mut crate::interp::DeterministicRng,
) -> Result<Vec<SchedItem>> {
    let n = merged.len();
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut cluster_item: HashMap<usize, SchedItem> = HashMap::new();
    for v in 0..n {
        cluster_item.insert(v, SchedItem::Vertex(v));
    }
    for (gi, (members, _)) in groups.iter().enumerate() {
        let c = members[0];
        for &m in members {
            cluster[m] = c;
        }
        cluster_item.insert(c, SchedItem::Group(gi));
    }
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        indegree.entry(cluster[v]).or_insert(0);
    }
    for &(u, v, _) in &graph.edges {
        let (cu, cv) = (cluster[u], cluster[v]);
        if cu != cv {
            adj.entry(cu).or_default().push(cv);
            *indegree.entry(cv).or_insert(0) += 1;
        }
    }
    let total = indegree.len();
    let mut out = Vec::new();
    let mut ready: Vec<usize> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&c, _)| c)
        .collect();
    while !ready.is_empty() {
        ready.sort_unstable();
        let pick = rng.below(ready.len() as u64) as usize;
        let c = ready.remove(pick);
        out.push(cluster_item[&c]);
        if let Some(next) = adj.remove(&c) {
            for t in next {
                let d = indegree.get_mut(&t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(t);
                }
            }
        }
    }
    if out.len() != total {
        return Err(Error::internal("cycle detected while scheduling"));
    }
    Ok(out)
}

impl FusionResult {
    /// Clone with every unit rescheduled by a seeded random topological
    /// order; the emitted program changes, the semantics must not.
    pub fn with_random_schedules(&self, seed: u64) -> Result<FusionResult> {
        let mut rng = crate::interp::DeterministicRng::seeded(seed);
        let mut out = self.clone();
        for unit in &mut out.units {
            let member_groups: Vec<(Vec<usize>, ChildFieldId)> = unit
                .groups
                .iter()
                .map(|g| (g.members.clone(), g.child))
                .collect();
            unit.schedule = schedule_random(&unit.graph, &unit.merged, &member_groups, &mut rng)?;
        }
        Ok(out)
    }

    /// Clone with one unit's schedule replaced; the order must be a valid
    /// topological order of the contracted graph with groups intact.
    pub fn with_unit_schedule(&self, unit_idx: usize, sched: Vec<SchedItem>) -> FusionResult {
        let mut out = self.clone();
        out.units[unit_idx].schedule = sched;
        out
    }
}

struct Driver<'a> {
    rp: &'a RProgram,
    config: FusionConfig,
    units: Vec<FusionUnit>,
    by_key: HashMap<Vec<FnId>, usize>,
    stubs: Vec<StubFamily>,
    stub_dedup: HashMap<(KindId, Vec<FamilyId>), usize>,
    stats: FusionStats,
}

/// Fuse a whole program under the given limits.
pub fn fuse_program(rp: &RProgram, config: FusionConfig) -> Result<FusionResult> {
    let mut driver = Driver {
        rp,
        config,
        units: Vec::new(),
        by_key: HashMap::new(),
        stubs: Vec::new(),
        stub_dedup: HashMap::new(),
        stats: FusionStats::default(),
    };
    let seeds = find_seed_sequences(rp);
    driver.stats.sequences_found = seeds.len() as u32;
    let mut fused_entries: HashMap<usize, EntryOut> = HashMap::new();
    let mut consumed: Vec<bool> = vec![false; rp.entry.len()];
    for seed in &seeds {
        let chunks = driver.split_chunks(seed)?;
        driver.stats.entry_splits += (chunks.len() as u32).saturating_sub(1);
        for chunk in chunks {
            let first = chunk[0];
            let binding = seed.binding;
            let bkind = rp.bindings[binding.idx()].kind;
            let families: Vec<FamilyId> = chunk
                .iter()
                .map(|&i| match &rp.entry[i] {
                    REntry::Call { family, .. } => *family,
                    _ => unreachable!("seed entries are calls"),
                })
                .collect();
            let stub = driver.get_or_create_stub(bkind, &families)?;
            // concatenated surface arguments from the original entry calls
            let mut surface_args = Vec::new();
            let mut span = Span::default();
            let surface_calls: Vec<&surface::Entry> = rp
                .surface
                .main()
                .map(|m| {
                    m.entries
                        .iter()
                        .filter(|e| matches!(e, surface::Entry::Call { .. }))
                        .collect()
                })
                .unwrap_or_default();
            for &i in &chunk {
                // entry index -> index among call entries
                let call_pos = rp.entry[..i]
                    .iter()
                    .filter(|e| matches!(e, REntry::Call { .. }))
                    .count();
                if let Some(surface::Entry::Call { args, span: s, .. }) =
                    surface_calls.get(call_pos).copied()
                {
                    surface_args.extend(args.iter().cloned());
                    span = *s;
                }
                consumed[i] = true;
            }
            fused_entries.insert(
                first,
                EntryOut::Stub {
                    binding,
                    stub,
                    mask: ((1u64 << chunk.len()) - 1) as u32,
                    surface_args,
                    span,
                },
            );
        }
    }
    // assemble the rewritten entry list: binds first in source order, then
    // calls in entry order (fused chunks replace their first member)
    let mut entry = Vec::new();
    for b in (0..rp.bindings.len()).map(|i| BindingIdx(i as u32)) {
        entry.push(EntryOut::Bind(b));
    }
    for (i, e) in rp.entry.iter().enumerate() {
        if let Some(out) = fused_entries.remove(&i) {
            entry.push(out);
            continue;
        }
        if consumed[i] {
            continue;
        }
        if let REntry::Call {
            binding,
            family,
            span,
            ..
        } = e
        {
            let call_pos = rp.entry[..i]
                .iter()
                .filter(|x| matches!(x, REntry::Call { .. }))
                .count();
            let surface_args = rp
                .surface
                .main()
                .and_then(|m| {
                    m.entries
                        .iter()
                        .filter_map(|x| match x {
                            surface::Entry::Call { args, .. } => Some(args.clone()),
                            _ => None,
                        })
                        .nth(call_pos)
                })
                .unwrap_or_default();
            entry.push(EntryOut::Call {
                binding: *binding,
                family: *family,
                surface_args,
                span: *span,
            });
        }
    }
    driver.finish_stats();
    Ok(FusionResult {
        units: driver.units,
        stubs: driver.stubs,
        entry,
        stats: driver.stats,
    })
}

impl<'a> Driver<'a> {
    /// Split a seed run into maximal legal prefixes under the config limits.
    fn split_chunks(&self, seed: &SeedSeq) -> Result<Vec<Vec<usize>>> {
        let mut chunks: Vec<Vec<usize>> = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        let mut fam_count: HashMap<FamilyId, usize> = HashMap::new();
        for &i in &seed.entries {
            let REntry::Call { family, .. } = &self.rp.entry[i] else {
                continue;
            };
            let count = fam_count.get(family).copied().unwrap_or(0);
            if cur.len() >= self.config.max_seq_len || count >= self.config.max_repeat {
                chunks.push(std::mem::take(&mut cur));
                fam_count.clear();
            }
            *fam_count.entry(*family).or_insert(0) += 1;
            cur.push(i);
        }
        if !cur.is_empty() {
            chunks.push(cur);
        }
        Ok(chunks)
    }

    /// Stub family for a call sequence on a receiver of declared kind `base`:
    /// one arm per concrete subtype, each to the unit for that subtype's
    /// concrete function sequence.
    fn get_or_create_stub(&mut self, base: KindId, families: &[FamilyId]) -> Result<usize> {
        let dedup_key = (base, families.to_vec());
        if let Some(&idx) = self.stub_dedup.get(&dedup_key) {
            // the whole dispatch family (and its units) is reused
            self.stats.units_reused += 1;
            return Ok(idx);
        }
        let idx = self.stubs.len();
        self.stubs.push(StubFamily {
            name: format!("__stub{}", idx + 1),
            base,
            families: families.to_vec(),
            arms: Vec::new(),
        });
        self.stub_dedup.insert(dedup_key, idx);
        let mut arms = Vec::new();
        for kind in self.rp.concrete_subkinds(base) {
            let key: Vec<FnId> = families
                .iter()
                .map(|fam| {
                    self.rp.dispatch[kind.idx()][fam.idx()].ok_or_else(|| {
                        Error::internal(format!(
                            "kind {} lacks a body for a grouped family",
                            self.rp.kind_name(kind)
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let unit = self.get_or_create_unit(key)?;
            arms.push((kind, unit));
        }
        if arms.is_empty() {
            return Err(Error::NoConcreteTarget {
                kind: self.rp.kind_name(base).to_string(),
                span: Span::default(),
            });
        }
        self.stubs[idx].arms = arms;
        Ok(idx)
    }

    /// Memoized unit construction. A key already present — including one
    /// whose unit is still being built — is reused immediately, which is
    /// what ties the recursion (a unit that regroups its own sequence emits
    /// a self-recursive call).
    fn get_or_create_unit(&mut self, key: Vec<FnId>) -> Result<usize> {
        if let Some(&idx) = self.by_key.get(&key) {
            self.stats.units_reused += 1;
            return Ok(idx);
        }
        let idx = self.units.len();
        let owners: Vec<KindId> = key.iter().map(|f| self.rp.fns[f.idx()].owner).collect();
        let receiver = lub_type(self.rp, &owners)?;
        let fkey = FusionKey(key.clone());
        let name = format!("_fuse__{:08x}", fnv(&fkey.display(self.rp)));
        self.units.push(FusionUnit {
            key: fkey,
            name,
            receiver,
            merged: Vec::new(),
            graph: DepGraph {
                n: 0,
                edges: Vec::new(),
                succ: Vec::new(),
                pred: Vec::new(),
            },
            groups: Vec::new(),
            schedule: Vec::new(),
            split_events: 0,
        });
        self.by_key.insert(key.clone(), idx);
        self.stats.units_created += 1;

        let merged = merge_bodies(self.rp, &key)?;
        let graph = build_dependence_graph(&merged);
        let (member_groups, split_events) = group_calls(&graph, &merged, &self.config);
        let sched = schedule(&graph, &merged, &member_groups)?;
        let mut groups = Vec::new();
        for (members, child) in &member_groups {
            let base = self.rp.child_fields[child.idx()].child_kind;
            let families: Vec<FamilyId> = members
                .iter()
                .map(|&m| merged[m].call.expect("group member is a call").1)
                .collect();
            let stub = self.get_or_create_stub(base, &families)?;
            groups.push(CallGroup {
                members: members.clone(),
                child: *child,
                stub,
            });
        }
        let unit = &mut self.units[idx];
        unit.merged = merged;
        unit.graph = graph;
        unit.groups = groups;
        unit.schedule = sched;
        unit.split_events = split_events;
        Ok(idx)
    }

    fn finish_stats(&mut self) {
        for u in &self.units {
            self.stats.per_unit.push(UnitStats {
                key: u.name.clone(),
                constituents: u
                    .key
                    .0
                    .iter()
                    .map(|f| self.rp.fn_display(*f).to_string())
                    .collect(),
                grouped_calls: u.groups.len() as u32,
                split_events: u.split_events,
            });
        }
    }
}

fn fnv(text: &str) -> u32 {
    let mut h: u32 = 0x811c9dc5;
    for b in text.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x01000193);
    }
    h
}

impl FusionStats {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sequencesFound": self.sequences_found,
            "unitsCreated": self.units_created,
            "unitsReused": self.units_reused,
            "entrySplits": self.entry_splits,
            "perUnit": self.per_unit.iter().map(|u| serde_json::json!({
                "key": u.key,
                "constituents": u.constituents,
                "groupedCalls": u.grouped_calls,
                "splitEvents": u.split_events,
            })).collect::<Vec<_>>(),
        })
    }
}
