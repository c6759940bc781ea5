//! Statement and call summaries: six access automata per top-level statement
//! ({tree, global, local} x {read, write}), and the pairwise conflict test
//! that drives dependence edges.

use super::nfa::{AcceptMode, Label, Nfa};
use super::paths::{collect_access_paths, APath, Cat, CollectCtx, PathSet};
use crate::error::Result;
use crate::model::concrete_targets;
use crate::resolved::*;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct StatementSummary {
    pub tree_read: Nfa,
    pub tree_write: Nfa,
    pub global_read: Nfa,
    pub global_write: Nfa,
    pub local_read: Nfa,
    pub local_write: Nfa,
    // normalized (epsilon-free, wildcard-expanded) forms for conflict tests
    norm: Box<[Nfa; 6]>,
}

impl StatementSummary {
    fn from_parts(rp: &RProgram, parts: [Nfa; 6]) -> StatementSummary {
        let syms = &rp.alphabet.field_syms;
        let norm = Box::new([
            parts[0].normalize(syms),
            parts[1].normalize(syms),
            parts[2].normalize(syms),
            parts[3].normalize(syms),
            parts[4].normalize(syms),
            parts[5].normalize(syms),
        ]);
        let [tree_read, tree_write, global_read, global_write, local_read, local_write] = parts;
        StatementSummary {
            tree_read,
            tree_write,
            global_read,
            global_write,
            local_read,
            local_write,
            norm,
        }
    }

    pub fn automata(&self) -> [(&'static str, &Nfa); 6] {
        [
            ("tree-read", &self.tree_read),
            ("tree-write", &self.tree_write),
            ("global-read", &self.global_read),
            ("global-write", &self.global_write),
            ("local-read", &self.local_read),
            ("local-write", &self.local_write),
        ]
    }

    fn norm_tree(&self) -> (&Nfa, &Nfa) {
        (&self.norm[0], &self.norm[1])
    }

    fn norm_global(&self) -> (&Nfa, &Nfa) {
        (&self.norm[2], &self.norm[3])
    }

    fn norm_local(&self) -> (&Nfa, &Nfa) {
        (&self.norm[4], &self.norm[5])
    }
}

fn chain_for(path: &APath, mode: AcceptMode) -> Nfa {
    Nfa::chain(path.cat == Cat::Tree, &path.segs, mode, path.any_tail)
}

fn category_pair(paths: &PathSet, cat: Cat) -> (Nfa, Nfa) {
    let read = Nfa::union_all(
        paths
            .reads
            .iter()
            .filter(|p| p.cat == cat)
            .map(|p| chain_for(p, AcceptMode::AllNonInitial)),
    );
    let write = Nfa::union_all(
        paths
            .writes
            .iter()
            .filter(|p| p.cat == cat)
            .map(|p| chain_for(p, AcceptMode::FinalOnly)),
    );
    (read, write)
}

/// Six automata for a simple statement, from the union of its primitive
/// access-path automata.
pub fn build_statement_summary(rp: &RProgram, paths: &PathSet) -> StatementSummary {
    let (tr, tw) = category_pair(paths, Cat::Tree);
    let (gr, gw) = category_pair(paths, Cat::Global);
    let (lr, lw) = category_pair(paths, Cat::Local);
    StatementSummary::from_parts(rp, [tr, tw, gr, gw, lr, lw])
}

/// Call summary per the call-graph construction: one automaton state per
/// reachable concrete function, the traversed-node transition first,
/// child-field transitions along call edges (self-calls are epsilon), each
/// function's statement automata attached at its state, and back edges for
/// recursion. Argument expressions of the summarized call are caller-frame
/// accesses and are unioned in like statement accesses.
pub fn build_call_summary(
    rp: &RProgram,
    caller_ctx: &CollectCtx,
    owner: KindId,
    child: Option<ChildFieldId>,
    family: FamilyId,
    args: &[RExpr],
) -> Result<StatementSummary> {
    let mut builder = CallBuilder::new(rp);
    builder.build(owner, child, family)?;
    let CallBuilder {
        tree_read,
        tree_write,
        global_paths,
        ..
    } = builder;

    // argument accesses, summarized at the call statement itself
    let arg_stmt = RStmt {
        kind: RStmtKind::PureCall {
            id: PureId(0),
            args: args.to_vec(),
        },
        span: crate::error::Span::default(),
        text: std::rc::Rc::from(""),
    };
    let arg_paths = if args.is_empty() {
        PathSet::default()
    } else {
        collect_access_paths(rp, caller_ctx, &arg_stmt)
    };
    let (arg_tr, _) = category_pair(&arg_paths, Cat::Tree);
    let (arg_gr, _) = category_pair(&arg_paths, Cat::Global);
    let (arg_lr, arg_lw) = category_pair(&arg_paths, Cat::Local);

    let (body_gr, body_gw) = category_pair(&global_paths, Cat::Global);

    let tree_read = Nfa::union(&tree_read, &arg_tr);
    let global_read = Nfa::union(&body_gr, &arg_gr);
    Ok(StatementSummary::from_parts(
        rp,
        [
            tree_read,
            tree_write,
            global_read,
            body_gw,
            arg_lr,
            arg_lw,
        ],
    ))
}

struct CallBuilder<'a> {
    rp: &'a RProgram,
    tree_read: Nfa,
    tree_write: Nfa,
    /// Off-tree accesses of reachable functions (plain union, not
    /// receiver-parameterized).
    global_paths: PathSet,
    fn_state: HashMap<FnId, usize>,
    ctx_cache: HashMap<FnId, CollectCtx>,
}

impl<'a> CallBuilder<'a> {
    fn new(rp: &'a RProgram) -> Self {
        CallBuilder {
            rp,
            tree_read: Nfa::empty(),
            tree_write: Nfa::empty(),
            global_paths: PathSet::default(),
            fn_state: HashMap::new(),
            ctx_cache: HashMap::new(),
        }
    }

    fn add_state_pair(&mut self) -> usize {
        let a = self.tree_read.add_state();
        let b = self.tree_write.add_state();
        debug_assert_eq!(a, b);
        a
    }

    fn build(
        &mut self,
        owner: KindId,
        child: Option<ChildFieldId>,
        family: FamilyId,
    ) -> Result<()> {
        let post_root = self.add_state_pair();
        self.tree_read.add_transition(0, Label::Root, post_root);
        self.tree_write.add_transition(0, Label::Root, post_root);
        self.append_call(post_root, owner, child, family)
    }

    fn append_call(
        &mut self,
        from: usize,
        owner: KindId,
        child: Option<ChildFieldId>,
        family: FamilyId,
    ) -> Result<()> {
        let (label, recv) = match child {
            None => (Label::Eps, owner),
            Some(cf) => (
                Label::Field(self.rp.child_fields[cf.idx()].sym),
                self.rp.child_fields[cf.idx()].child_kind,
            ),
        };
        for (_, target) in concrete_targets(self.rp, recv, family, crate::error::Span::default())? {
            let state = match self.fn_state.get(&target) {
                Some(&s) => s,
                None => {
                    let s = self.add_state_pair();
                    self.fn_state.insert(target, s);
                    self.visit_fn(target, s)?;
                    s
                }
            };
            self.tree_read.add_transition(from, label, state);
            self.tree_write.add_transition(from, label, state);
        }
        Ok(())
    }

    fn visit_fn(&mut self, f: FnId, state: usize) -> Result<()> {
        let ctx = self
            .ctx_cache
            .entry(f)
            .or_insert_with(|| CollectCtx::for_fn(self.rp, f))
            .clone();
        let owner = self.rp.fns[f.idx()].owner;
        let body: Vec<RStmt> = self.rp.fns[f.idx()].body.clone();
        for st in &body {
            // statement paths (traverse statements contribute their argument
            // reads through the same collection)
            let paths = collect_access_paths(self.rp, &ctx, st);
            for p in &paths.reads {
                if p.cat == Cat::Tree {
                    self.attach_chain(state, p, AcceptMode::AllNonInitial);
                } else if p.cat == Cat::Global {
                    self.global_paths.reads.push(p.clone());
                }
            }
            for p in &paths.writes {
                if p.cat == Cat::Tree {
                    self.attach_chain(state, p, AcceptMode::FinalOnly);
                } else if p.cat == Cat::Global {
                    self.global_paths.writes.push(p.clone());
                }
            }
            if let RStmtKind::Traverse { child, family, .. } = &st.kind {
                self.append_call(state, owner, *child, *family)?;
            }
        }
        Ok(())
    }

    /// Attach one primitive path automaton at a function state.
    fn attach_chain(&mut self, from: usize, path: &APath, mode: AcceptMode) {
        let (nfa, accept_read) = match mode {
            AcceptMode::AllNonInitial => (&mut self.tree_read, true),
            AcceptMode::FinalOnly => (&mut self.tree_write, false),
        };
        let mut cur = from;
        for &s in &path.segs {
            let next = nfa.add_state();
            nfa.add_transition(cur, Label::Field(s), next);
            if accept_read {
                nfa.accepting[next] = true;
            }
            cur = next;
        }
        if !accept_read && cur != from {
            nfa.accepting[cur] = true;
        }
        if path.any_tail {
            if cur == from {
                // degenerate conservative path: wildcard loop on the state
                let next = nfa.add_state();
                nfa.add_transition(cur, Label::Any, next);
                nfa.add_transition(next, Label::Any, next);
                nfa.accepting[next] = true;
                if accept_read {
                    // the state itself stands for the receiver; prefix reads
                    // of a wildcard path accept everywhere below it
                    nfa.accepting[from] = accept_read && from != nfa.initial;
                }
            } else {
                nfa.add_transition(cur, Label::Any, cur);
                nfa.accepting[cur] = true;
            }
        }
        // keep the write-skeleton state count in sync with the read skeleton
        while self.tree_read.n_states < self.tree_write.n_states {
            self.tree_read.add_state();
        }
        while self.tree_write.n_states < self.tree_read.n_states {
            self.tree_write.add_state();
        }
    }
}

/// Summarize one statement of a merged body: simple statements via their
/// access paths, traverse statements via the call-graph construction.
pub fn summarize_stmt(
    rp: &RProgram,
    ctx: &CollectCtx,
    owner: KindId,
    stmt: &RStmt,
) -> Result<StatementSummary> {
    if let RStmtKind::Traverse {
        child,
        family,
        args,
    } = &stmt.kind
    {
        build_call_summary(rp, ctx, owner, *child, *family, args)
    } else {
        let paths = collect_access_paths(rp, ctx, stmt);
        Ok(build_statement_summary(rp, &paths))
    }
}

/// True iff the two statements may touch a common location with at least one
/// write, in any shared category. Locals are compared only when both
/// statements come from the same traversal instance (`share_locals`).
pub fn conflicts(a: &StatementSummary, b: &StatementSummary, share_locals: bool) -> bool {
    let pair = |(ar, aw): (&Nfa, &Nfa), (br, bw): (&Nfa, &Nfa)| {
        Nfa::intersects_nonempty(aw, br)
            || Nfa::intersects_nonempty(aw, bw)
            || Nfa::intersects_nonempty(ar, bw)
    };
    if pair(a.norm_tree(), b.norm_tree()) {
        return true;
    }
    if pair(a.norm_global(), b.norm_global()) {
        return true;
    }
    if share_locals && pair(a.norm_local(), b.norm_local()) {
        return true;
    }
    false
}
