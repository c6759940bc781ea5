//! Access-path collection: what locations a statement reads and writes,
//! classified as receiver-relative (tree), global, or local, with alias
//! variables statically inlined.

use crate::resolved::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cat {
    Tree,
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct APath {
    pub cat: Cat,
    pub segs: Vec<SymId>,
    /// Wildcard closure on the final state (new/delete and opaque objects).
    pub any_tail: bool,
}

impl APath {
    pub fn display(&self, rp: &RProgram) -> String {
        let mut parts: Vec<String> = Vec::new();
        if self.cat == Cat::Tree {
            parts.push("ROOT".to_string());
        }
        for s in &self.segs {
            parts.push(rp.alphabet.name(*s).to_string());
        }
        let mut out = parts.join(".");
        if self.any_tail {
            out.push_str(".(ANY)*");
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSet {
    pub reads: Vec<APath>,
    pub writes: Vec<APath>,
}

impl PathSet {
    fn push_read(&mut self, cat: Cat, segs: Vec<SymId>, any_tail: bool) {
        // every proper prefix of a read is itself read
        for end in 1..segs.len() {
            self.reads.push(APath {
                cat,
                segs: segs[..end].to_vec(),
                any_tail: false,
            });
        }
        self.reads.push(APath { cat, segs, any_tail });
    }

    fn push_write(&mut self, cat: Cat, segs: Vec<SymId>, any_tail: bool) {
        // prefixes of a written path are read, only the full path is written
        for end in 1..segs.len() {
            self.reads.push(APath {
                cat,
                segs: segs[..end].to_vec(),
                any_tail: false,
            });
        }
        self.writes.push(APath { cat, segs, any_tail });
    }

    fn dedup(&mut self) {
        self.reads.sort();
        self.reads.dedup();
        self.writes.sort();
        self.writes.dedup();
    }

    pub fn merge(&mut self, other: PathSet) {
        self.reads.extend(other.reads);
        self.writes.extend(other.writes);
        self.dedup();
    }
}

/// Per-function context: local name symbols and statically inlined alias
/// chains (first definition wins; rebinding marks the function unfusible
/// before analysis ever sees it).
#[derive(Debug, Clone)]
pub struct CollectCtx {
    pub local_syms: Vec<SymId>,
    pub alias_steps: Vec<Option<Vec<ChildFieldId>>>,
}

impl CollectCtx {
    pub fn for_fn(rp: &RProgram, f: FnId) -> CollectCtx {
        let rfn = &rp.fns[f.idx()];
        Self::from_locals(&rfn.locals, &rfn.body)
    }

    pub fn from_locals(locals: &[RLocal], body: &[RStmt]) -> CollectCtx {
        let local_syms = locals.iter().map(|l| l.sym).collect();
        let mut alias_steps = vec![None; locals.len()];
        fn walk(stmts: &[RStmt], alias_steps: &mut Vec<Option<Vec<ChildFieldId>>>) {
            for st in stmts {
                match &st.kind {
                    RStmtKind::Alias {
                        idx,
                        steps_from_this,
                        ..
                    } => {
                        if alias_steps[idx.idx()].is_none() {
                            alias_steps[idx.idx()] = steps_from_this.clone();
                        }
                    }
                    RStmtKind::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        walk(then_body, alias_steps);
                        walk(else_body, alias_steps);
                    }
                    _ => {}
                }
            }
        }
        walk(body, &mut alias_steps);
        CollectCtx {
            local_syms,
            alias_steps,
        }
    }
}

/// Read and write access paths of one top-level statement (conditionals merge
/// both branches). Traverse statements contribute only their argument reads —
/// the callee closure is summarized separately from the call graph.
pub fn collect_access_paths(rp: &RProgram, ctx: &CollectCtx, stmt: &RStmt) -> PathSet {
    let mut out = PathSet::default();
    collect_into(rp, ctx, stmt, &mut out);
    out.dedup();
    out
}

fn collect_into(rp: &RProgram, ctx: &CollectCtx, stmt: &RStmt, out: &mut PathSet) {
    match &stmt.kind {
        RStmtKind::Assign { target, value } => {
            expr_reads(rp, ctx, value, out);
            match access_path(rp, ctx, target) {
                Some((cat, segs, any_tail)) => out.push_write(cat, segs, any_tail),
                None => out.push_write(Cat::Tree, Vec::new(), true),
            }
        }
        RStmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            expr_reads(rp, ctx, cond, out);
            for st in then_body.iter().chain(else_body) {
                collect_into(rp, ctx, st, out);
            }
        }
        RStmtKind::Local { idx, init } => {
            if let Some(e) = init {
                expr_reads(rp, ctx, e, out);
            }
            out.push_write(Cat::Local, vec![ctx.local_syms[idx.idx()]], false);
        }
        RStmtKind::Alias { node, .. } => {
            if let Some(segs) = node_path_syms(rp, ctx, node) {
                if !segs.is_empty() {
                    out.push_read(Cat::Tree, segs, false);
                }
            } else {
                out.push_read(Cat::Tree, Vec::new(), true);
            }
        }
        RStmtKind::New {
            slot, ctor_args, ..
        } => {
            for a in ctor_args {
                expr_reads(rp, ctx, a, out);
            }
            tree_node_write(rp, ctx, slot, out);
        }
        RStmtKind::Delete { node } => {
            tree_node_write(rp, ctx, node, out);
        }
        RStmtKind::PureCall { args, .. } | RStmtKind::Traverse { args, .. } => {
            for a in args {
                expr_reads(rp, ctx, a, out);
            }
        }
        RStmtKind::Return => {}
    }
}

fn tree_node_write(rp: &RProgram, ctx: &CollectCtx, node: &RNodePath, out: &mut PathSet) {
    match node_path_syms(rp, ctx, node) {
        Some(segs) => out.push_write(Cat::Tree, segs, true),
        // untrackable alias chain: whole-subtree wildcard
        None => out.push_write(Cat::Tree, Vec::new(), true),
    }
}

fn node_path_syms(rp: &RProgram, ctx: &CollectCtx, node: &RNodePath) -> Option<Vec<SymId>> {
    let steps = node.flat_steps(&ctx.alias_steps)?;
    Some(
        steps
            .iter()
            .map(|cf| rp.child_fields[cf.idx()].sym)
            .collect(),
    )
}

fn access_path(rp: &RProgram, ctx: &CollectCtx, acc: &RAccess) -> Option<(Cat, Vec<SymId>, bool)> {
    match acc {
        RAccess::OnTree { node, field, length } => {
            let mut segs = node_path_syms(rp, ctx, node)?;
            segs.push(rp.data_fields[field.idx()].sym);
            if *length {
                segs.push(rp.alphabet.length_sym());
            }
            Some((Cat::Tree, segs, false))
        }
        RAccess::Global { id, length } => {
            let g = &rp.globals[id.idx()];
            let mut segs = vec![g.sym];
            if *length {
                segs.push(rp.alphabet.length_sym());
            }
            // whole-object access of a string global touches its members too
            let any_tail = g.ty == Ty::Str && !*length;
            Some((Cat::Global, segs, any_tail))
        }
        RAccess::Local { idx, length } => {
            let mut segs = vec![ctx.local_syms[idx.idx()]];
            if *length {
                segs.push(rp.alphabet.length_sym());
            }
            Some((Cat::Local, segs, false))
        }
    }
}

fn expr_reads(rp: &RProgram, ctx: &CollectCtx, e: &RExpr, out: &mut PathSet) {
    match &e.kind {
        RExprKind::Lit(_) => {}
        RExprKind::Access(acc) => match access_path(rp, ctx, acc) {
            Some((cat, segs, any_tail)) => out.push_read(cat, segs, any_tail),
            None => out.push_read(Cat::Tree, Vec::new(), true),
        },
        RExprKind::Unary { expr, .. } => expr_reads(rp, ctx, expr, out),
        RExprKind::Binary { lhs, rhs, .. } => {
            expr_reads(rp, ctx, lhs, out);
            expr_reads(rp, ctx, rhs, out);
        }
        RExprKind::Pure { args, .. } => {
            for a in args {
                expr_reads(rp, ctx, a, out);
            }
        }
    }
}
