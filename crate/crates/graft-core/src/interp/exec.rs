//! Execution of base and fused programs over concrete trees, with node-visit
//! and statement counters, optional per-statement access logging, and a
//! statement-identity multiset for conservation checks.

use super::generate::{materialize_tree, TreeSpec};
use super::tree::{Layouts, NodeRef, Tree};
use crate::automata::Cat;
use crate::error::{Error, Result, RuntimeError, RuntimeKind, Span};
use crate::resolved::*;
use std::collections::HashMap;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecMetrics {
    /// Traversal or fused-function invocations on tree nodes.
    pub node_visits: u64,
    /// Executed simple statements (nested statements counted individually).
    pub simple_statements: u64,
    /// Activity-mask tests (fused programs only).
    pub guard_checks: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    pub log_accesses: bool,
}

/// One concrete access relative to an enclosing top-level statement's
/// receiver. Dispatch dereferences are not accesses; data-path prefixes are.
#[derive(Debug, Clone)]
pub struct AccessRecord {
    pub fn_id: FnId,
    pub body_idx: usize,
    pub cat: Cat,
    pub is_write: bool,
    pub segs: Vec<SymId>,
}

#[derive(Debug)]
pub struct RunResult {
    pub tree: Tree,
    pub layouts: Layouts,
    /// Binding roots, aligned with `rp.bindings`.
    pub roots: Vec<NodeRef>,
    pub globals: Vec<Value>,
    pub metrics: ExecMetrics,
    /// (function display, normalized statement text) -> execution count.
    pub multiset: HashMap<(Rc<str>, Rc<str>), u64>,
    pub access_log: Vec<AccessRecord>,
}

enum Flow {
    Normal,
    Return,
}

#[derive(Clone)]
enum Slot {
    Unset,
    Val(Value),
    Node(NodeRef),
}

struct Frame {
    receiver: NodeRef,
    locals: Vec<Slot>,
}

struct LogFrame {
    fn_id: FnId,
    body_idx: usize,
    base_len: usize,
}

pub struct Executor<'a> {
    rp: &'a RProgram,
    layouts: Layouts,
    tree: Tree,
    bindings: Vec<NodeRef>,
    globals: Vec<Value>,
    metrics: ExecMetrics,
    multiset: HashMap<(Rc<str>, Rc<str>), u64>,
    opts: ExecOptions,
    access_log: Vec<AccessRecord>,
    log_frames: Vec<LogFrame>,
    /// Child-field labels from the entry binding down to the current frame.
    cur_path: Vec<SymId>,
}

/// Run a program: materialize every binding (input bindings from `input`),
/// then execute the entry statements in order.
pub fn execute(rp: &RProgram, input: Option<&TreeSpec>, opts: ExecOptions) -> Result<RunResult> {
    let layouts = Layouts::new(rp);
    let mut tree = Tree::new();
    let mut bindings = Vec::new();
    for b in &rp.bindings {
        let root = match &b.init {
            RTreeInit::Input => {
                let Some(spec) = input else {
                    return Err(Error::Runtime(RuntimeError {
                        kind: RuntimeKind::UnboundInput,
                        span: Span::default(),
                        node_path: String::new(),
                        msg: format!("binding `{}` needs an input tree spec", b.name),
                    }));
                };
                materialize_tree(rp, &layouts, &mut tree, spec, b.kind)?
            }
            RTreeInit::Literal(lit) => {
                let root = super::generate::materialize_literal(rp, &layouts, &mut tree, lit)?;
                let got = tree.node(root, Span::default(), "")?.kind;
                if !rp.is_subtype(got, b.kind) {
                    return Err(Error::KindMismatch {
                        expected: rp.kind_name(b.kind).to_string(),
                        found: rp.kind_name(got).to_string(),
                        context: format!("binding {}", b.name),
                    });
                }
                root
            }
        };
        bindings.push(root);
    }
    let mut ex = Executor {
        rp,
        layouts,
        tree,
        bindings,
        globals: rp.globals.iter().map(|g| g.init.clone()).collect(),
        metrics: ExecMetrics::default(),
        multiset: HashMap::new(),
        opts,
        access_log: Vec::new(),
        log_frames: Vec::new(),
        cur_path: Vec::new(),
    };
    for entry in &rp.entry {
        ex.run_entry(entry)?;
    }
    Ok(RunResult {
        tree: ex.tree,
        layouts: ex.layouts,
        roots: ex.bindings,
        globals: ex.globals,
        metrics: ex.metrics,
        multiset: ex.multiset,
        access_log: ex.access_log,
    })
}

impl<'a> Executor<'a> {
    fn rt(&self, kind: RuntimeKind, span: Span, msg: impl Into<String>) -> Error {
        let node_path = self
            .cur_path
            .iter()
            .map(|s| self.rp.alphabet.name(*s))
            .collect::<Vec<_>>()
            .join(".");
        Error::Runtime(RuntimeError {
            kind,
            span,
            node_path,
            msg: msg.into(),
        })
    }

    fn run_entry(&mut self, entry: &REntry) -> Result<()> {
        match entry {
            REntry::Call {
                binding,
                family,
                args,
                span,
            } => {
                let node = self.bindings[binding.idx()];
                let mut dummy = Frame {
                    receiver: node,
                    locals: Vec::new(),
                };
                let vals = self.eval_args(args, &mut dummy)?;
                let kind = self.tree.node(node, *span, "")?.kind;
                let f = self.dispatch(kind, *family, *span)?;
                self.exec_traversal(f, node, vals)
            }
            REntry::StubCall {
                binding,
                stub,
                mask,
                args,
                span,
            } => {
                let node = self.bindings[binding.idx()];
                let mut dummy = Frame {
                    receiver: node,
                    locals: Vec::new(),
                };
                let vals = self.eval_args(args, &mut dummy)?;
                self.exec_stub(*stub, node, *mask, vals, *span)
            }
        }
    }

    fn dispatch(&self, kind: KindId, family: FamilyId, span: Span) -> Result<FnId> {
        self.rp.dispatch[kind.idx()][family.idx()].ok_or_else(|| {
            self.rt(
                RuntimeKind::TypeError,
                span,
                format!(
                    "kind {} has no body for traversal family {}",
                    self.rp.kind_name(kind),
                    self.rp.families[family.idx()].name
                ),
            )
        })
    }

    fn exec_stub(
        &mut self,
        stub: StubId,
        node: NodeRef,
        mask: u32,
        args: Vec<Value>,
        span: Span,
    ) -> Result<()> {
        let kind = self.tree.node(node, span, "")?.kind;
        let arm = self.rp.stubs[stub.idx()]
            .arms
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                self.rt(
                    RuntimeKind::TypeError,
                    span,
                    format!("stub has no arm for kind {}", self.rp.kind_name(kind)),
                )
            })?;
        self.exec_fused(arm, node, mask, args, span)
    }

    fn exec_traversal(&mut self, f: FnId, node: NodeRef, args: Vec<Value>) -> Result<()> {
        self.metrics.node_visits += 1;
        let rp = self.rp;
        let rfn = &rp.fns[f.idx()];
        let mut frame = Frame {
            receiver: node,
            locals: vec![Slot::Unset; rfn.locals.len()],
        };
        for (i, v) in args.into_iter().enumerate() {
            frame.locals[i] = Slot::Val(v);
        }
        for (idx, stmt) in rfn.body.iter().enumerate() {
            if self.opts.log_accesses {
                self.log_frames.push(LogFrame {
                    fn_id: f,
                    body_idx: idx,
                    base_len: self.cur_path.len(),
                });
            }
            let flow = self.exec_stmt(f, stmt, &mut frame);
            if self.opts.log_accesses {
                self.log_frames.pop();
            }
            match flow? {
                Flow::Normal => {}
                Flow::Return => break,
            }
        }
        Ok(())
    }

    fn count_stmt(&mut self, f: FnId, stmt: &RStmt) {
        self.metrics.simple_statements += 1;
        let key = (self.rp.fns[f.idx()].display.clone(), stmt.text.clone());
        *self.multiset.entry(key).or_insert(0) += 1;
    }

    fn exec_stmt(&mut self, f: FnId, stmt: &RStmt, frame: &mut Frame) -> Result<Flow> {
        match &stmt.kind {
            RStmtKind::Traverse {
                child,
                family,
                args,
            } => {
                let vals = self.eval_args(args, frame)?;
                let (target_node, stepped) = match child {
                    None => (frame.receiver, false),
                    Some(cf) => {
                        let n = self.child_of(frame.receiver, *cf, stmt.span)?;
                        self.cur_path.push(self.rp.child_fields[cf.idx()].sym);
                        (n, true)
                    }
                };
                let kind = self.tree.node(target_node, stmt.span, "")?.kind;
                let callee = self.dispatch(kind, *family, stmt.span)?;
                let result = self.exec_traversal(callee, target_node, vals);
                if stepped {
                    self.cur_path.pop();
                }
                result?;
                Ok(Flow::Normal)
            }
            _ => self.exec_simple(f, stmt, frame),
        }
    }

    fn exec_simple(&mut self, f: FnId, stmt: &RStmt, frame: &mut Frame) -> Result<Flow> {
        self.count_stmt(f, stmt);
        match &stmt.kind {
            RStmtKind::Assign { target, value } => {
                let v = self.eval_expr(value, frame)?;
                self.write_access(target, v, frame, stmt.span)?;
                Ok(Flow::Normal)
            }
            RStmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let c = self.eval_expr(cond, frame)?;
                let Value::Bool(b) = c else {
                    return Err(self.rt(RuntimeKind::TypeError, stmt.span, "condition not a bool"));
                };
                let body = if b { then_body } else { else_body };
                for st in body {
                    if let Flow::Return = self.exec_simple(f, st, frame)? {
                        return Ok(Flow::Return);
                    }
                }
                Ok(Flow::Normal)
            }
            RStmtKind::Local { idx, init } => {
                let v = match init {
                    Some(e) => self.eval_expr(e, frame)?,
                    None => {
                        let LocalKind::Data(ty) = self.locals_of(f)[idx.idx()].kind else {
                            return Err(self.rt(RuntimeKind::TypeError, stmt.span, "bad local"));
                        };
                        Value::default_of(ty)
                    }
                };
                frame.locals[idx.idx()] = Slot::Val(v);
                Ok(Flow::Normal)
            }
            RStmtKind::Alias { idx, node, .. } => {
                let n = self.resolve_node(node, frame, stmt.span)?;
                if self.opts.log_accesses {
                    if let Some(segs) = self.node_segs(node, frame) {
                        self.log_access(Cat::Tree, false, segs);
                    }
                }
                frame.locals[idx.idx()] = Slot::Node(n);
                Ok(Flow::Normal)
            }
            RStmtKind::New {
                slot,
                kind,
                ctor_args,
            } => {
                for a in ctor_args {
                    let _ = self.eval_expr(a, frame)?;
                }
                let (parent, cf) = self.resolve_slot(slot, frame, stmt.span)?;
                let fresh = self.tree.alloc(self.rp, &self.layouts, *kind);
                let pk = self.tree.node(parent, stmt.span, "")?.kind;
                let sidx = self
                    .layouts
                    .child_slot(pk, cf)
                    .ok_or_else(|| self.rt(RuntimeKind::TypeError, stmt.span, "no such slot"))?;
                let old = self.tree.node(parent, stmt.span, "")?.children[sidx];
                if let Some(old) = old {
                    self.tree.free_subtree(old);
                }
                self.tree.node_mut(parent, stmt.span, "")?.children[sidx] = Some(fresh);
                if self.opts.log_accesses {
                    if let Some(segs) = self.node_segs(slot, frame) {
                        self.log_access(Cat::Tree, true, segs);
                    }
                }
                Ok(Flow::Normal)
            }
            RStmtKind::Delete { node } => {
                let (parent, cf) = self.resolve_slot(node, frame, stmt.span)?;
                let pk = self.tree.node(parent, stmt.span, "")?.kind;
                let sidx = self
                    .layouts
                    .child_slot(pk, cf)
                    .ok_or_else(|| self.rt(RuntimeKind::TypeError, stmt.span, "no such slot"))?;
                if let Some(victim) = self.tree.node(parent, stmt.span, "")?.children[sidx] {
                    self.tree.free_subtree(victim);
                    self.tree.node_mut(parent, stmt.span, "")?.children[sidx] = None;
                }
                if self.opts.log_accesses {
                    if let Some(segs) = self.node_segs(node, frame) {
                        self.log_access(Cat::Tree, true, segs);
                    }
                }
                Ok(Flow::Normal)
            }
            RStmtKind::PureCall { id, args } => {
                let vals = self.eval_args(args, frame)?;
                let _ = self.eval_builtin(*id, vals, stmt.span)?;
                Ok(Flow::Normal)
            }
            RStmtKind::Return => Ok(Flow::Return),
            RStmtKind::Traverse { .. } => {
                Err(self.rt(RuntimeKind::TypeError, stmt.span, "traverse in simple position"))
            }
        }
    }

    fn locals_of(&self, f: FnId) -> &[RLocal] {
        &self.rp.fns[f.idx()].locals
    }

    fn child_of(&mut self, node: NodeRef, cf: ChildFieldId, span: Span) -> Result<NodeRef> {
        let n = self.tree.node(node, span, "")?;
        let slot = self
            .layouts
            .child_slot(n.kind, cf)
            .ok_or_else(|| self.rt(RuntimeKind::TypeError, span, "no such child slot"))?;
        n.children[slot].ok_or_else(|| {
            self.rt(
                RuntimeKind::MissingChild,
                span,
                format!(
                    "child `{}` of a {} node is empty",
                    self.rp.child_fields[cf.idx()].name,
                    self.rp.kind_name(n.kind)
                ),
            )
        })
    }

    fn resolve_node(&mut self, path: &RNodePath, frame: &Frame, span: Span) -> Result<NodeRef> {
        let mut cur = match &path.base {
            RNodeBase::This => frame.receiver,
            RNodeBase::Alias(idx) => match frame.locals[idx.idx()] {
                Slot::Node(n) => n,
                _ => {
                    return Err(self.rt(RuntimeKind::UnboundLocal, span, "alias used before binding"))
                }
            },
            RNodeBase::Cast { kind, inner } => {
                let n = self.resolve_node(inner, frame, span)?;
                let actual = self.tree.node(n, span, "")?.kind;
                if !self.rp.is_subtype(actual, *kind) {
                    return Err(self.rt(
                        RuntimeKind::CastFailed,
                        span,
                        format!(
                            "node of kind {} is not a {}",
                            self.rp.kind_name(actual),
                            self.rp.kind_name(*kind)
                        ),
                    ));
                }
                n
            }
        };
        for cf in &path.steps {
            cur = self.child_of(cur, *cf, span)?;
        }
        Ok(cur)
    }

    /// Resolve all but the last step: (parent node, final child field).
    fn resolve_slot(
        &mut self,
        path: &RNodePath,
        frame: &Frame,
        span: Span,
    ) -> Result<(NodeRef, ChildFieldId)> {
        let Some((&last, prefix)) = path.steps.split_last() else {
            return Err(self.rt(RuntimeKind::TypeError, span, "not a child slot"));
        };
        let head = RNodePath {
            base: path.base.clone(),
            steps: prefix.to_vec(),
            kind: path.kind,
        };
        let parent = self.resolve_node(&head, frame, span)?;
        Ok((parent, last))
    }

    /// Child-label segments of a node path relative to the current receiver,
    /// for access logging (None when the path goes through an alias bound to
    /// a node outside the statically inlined chain).
    fn node_segs(&self, path: &RNodePath, _frame: &Frame) -> Option<Vec<SymId>> {
        fn walk(rp: &RProgram, p: &RNodePath, out: &mut Vec<SymId>) -> bool {
            let ok = match &p.base {
                RNodeBase::This => true,
                RNodeBase::Cast { inner, .. } => walk(rp, inner, out),
                RNodeBase::Alias(_) => false,
            };
            if !ok {
                return false;
            }
            for cf in &p.steps {
                out.push(rp.child_fields[cf.idx()].sym);
            }
            true
        }
        let mut segs = Vec::new();
        // aliases are logged from their statically inlined roots when
        // possible; otherwise the access is skipped (rebinding makes the
        // traversal unfusible, so no summary is checked against it)
        if walk(self.rp, path, &mut segs) {
            Some(segs)
        } else {
            None
        }
    }

    fn log_access(&mut self, cat: Cat, is_write: bool, segs: Vec<SymId>) {
        if self.log_frames.is_empty() {
            return;
        }
        let path_len = self.cur_path.len();
        let records: Vec<AccessRecord> = self
            .log_frames
            .iter()
            .enumerate()
            .filter_map(|(i, lf)| {
                // locals are only meaningful for the innermost frame
                if cat == Cat::Local && i + 1 != self.log_frames.len() {
                    return None;
                }
                let mut full = Vec::new();
                if cat == Cat::Tree {
                    full.extend_from_slice(&self.cur_path[lf.base_len..path_len]);
                }
                full.extend_from_slice(&segs);
                Some(AccessRecord {
                    fn_id: lf.fn_id,
                    body_idx: lf.body_idx,
                    cat,
                    is_write,
                    segs: full,
                })
            })
            .collect();
        self.access_log.extend(records);
    }

    fn eval_args(&mut self, args: &[RExpr], frame: &mut Frame) -> Result<Vec<Value>> {
        args.iter().map(|a| self.eval_expr(a, frame)).collect()
    }

    fn eval_expr(&mut self, e: &RExpr, frame: &mut Frame) -> Result<Value> {
        match &e.kind {
            RExprKind::Lit(v) => Ok(v.clone()),
            RExprKind::Access(a) => self.read_access(a, frame, e.span),
            RExprKind::Unary { op, expr } => {
                let v = self.eval_expr(expr, frame)?;
                match (op, v) {
                    (UnOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
                    (UnOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    _ => Err(self.rt(RuntimeKind::TypeError, e.span, "bad unary operand")),
                }
            }
            RExprKind::Binary { op, lhs, rhs } => {
                // short-circuit logic first
                if matches!(op, BinOp::And | BinOp::Or) {
                    let Value::Bool(l) = self.eval_expr(lhs, frame)? else {
                        return Err(self.rt(RuntimeKind::TypeError, e.span, "bad logic operand"));
                    };
                    let take_rhs = match op {
                        BinOp::And => l,
                        _ => !l,
                    };
                    if !take_rhs {
                        return Ok(Value::Bool(l));
                    }
                    let Value::Bool(r) = self.eval_expr(rhs, frame)? else {
                        return Err(self.rt(RuntimeKind::TypeError, e.span, "bad logic operand"));
                    };
                    return Ok(Value::Bool(r));
                }
                let l = self.eval_expr(lhs, frame)?;
                let r = self.eval_expr(rhs, frame)?;
                self.eval_binop(*op, l, r, e.span)
            }
            RExprKind::Pure { id, args } => {
                let vals = self.eval_args(args, frame)?;
                self.eval_builtin(*id, vals, e.span)
            }
        }
    }

    fn eval_binop(&self, op: BinOp, l: Value, r: Value, span: Span) -> Result<Value> {
        use BinOp::*;
        let type_err = || self.rt(RuntimeKind::TypeError, span, "bad operand types");
        Ok(match (op, &l, &r) {
            (Add, Value::Int(a), Value::Int(b)) => Value::Int(a.wrapping_add(*b)),
            (Sub, Value::Int(a), Value::Int(b)) => Value::Int(a.wrapping_sub(*b)),
            (Mul, Value::Int(a), Value::Int(b)) => Value::Int(a.wrapping_mul(*b)),
            (Div, Value::Int(a), Value::Int(b)) => {
                if *b == 0 {
                    return Err(self.rt(RuntimeKind::DivisionByZero, span, "integer division by zero"));
                }
                Value::Int(a.wrapping_div(*b))
            }
            (Rem, Value::Int(a), Value::Int(b)) => {
                if *b == 0 {
                    return Err(self.rt(RuntimeKind::DivisionByZero, span, "integer remainder by zero"));
                }
                Value::Int(a.wrapping_rem(*b))
            }
            (Add, Value::Float(a), Value::Float(b)) => Value::Float(a + b),
            (Sub, Value::Float(a), Value::Float(b)) => Value::Float(a - b),
            (Mul, Value::Float(a), Value::Float(b)) => Value::Float(a * b),
            (Div, Value::Float(a), Value::Float(b)) => Value::Float(a / b),
            (Rem, Value::Float(a), Value::Float(b)) => Value::Float(a % b),
            (Eq, a, b) => Value::Bool(a == b),
            (Ne, a, b) => Value::Bool(a != b),
            (Lt, Value::Int(a), Value::Int(b)) => Value::Bool(a < b),
            (Le, Value::Int(a), Value::Int(b)) => Value::Bool(a <= b),
            (Gt, Value::Int(a), Value::Int(b)) => Value::Bool(a > b),
            (Ge, Value::Int(a), Value::Int(b)) => Value::Bool(a >= b),
            (Lt, Value::Float(a), Value::Float(b)) => Value::Bool(a < b),
            (Le, Value::Float(a), Value::Float(b)) => Value::Bool(a <= b),
            (Gt, Value::Float(a), Value::Float(b)) => Value::Bool(a > b),
            (Ge, Value::Float(a), Value::Float(b)) => Value::Bool(a >= b),
            _ => return Err(type_err()),
        })
    }

    fn eval_builtin(&self, id: PureId, mut vals: Vec<Value>, span: Span) -> Result<Value> {
        let b = self.rp.pures[id.idx()].builtin;
        let err = || self.rt(RuntimeKind::TypeError, span, "bad builtin arguments");
        Ok(match b {
            Builtin::MinInt | Builtin::MaxInt => {
                let (Some(Value::Int(y)), Some(Value::Int(x))) = (vals.pop(), vals.pop()) else {
                    return Err(err());
                };
                Value::Int(if b == Builtin::MinInt { x.min(y) } else { x.max(y) })
            }
            Builtin::MinFloat | Builtin::MaxFloat => {
                let (Some(Value::Float(y)), Some(Value::Float(x))) = (vals.pop(), vals.pop()) else {
                    return Err(err());
                };
                Value::Float(if b == Builtin::MinFloat { x.min(y) } else { x.max(y) })
            }
            Builtin::AbsInt => {
                let Some(Value::Int(x)) = vals.pop() else { return Err(err()) };
                Value::Int(x.wrapping_abs())
            }
            Builtin::AbsFloat => {
                let Some(Value::Float(x)) = vals.pop() else { return Err(err()) };
                Value::Float(x.abs())
            }
            Builtin::Concat => {
                let (Some(Value::Str(y)), Some(Value::Str(x))) = (vals.pop(), vals.pop()) else {
                    return Err(err());
                };
                Value::Str(Rc::from(format!("{x}{y}")))
            }
            Builtin::Length => {
                let Some(Value::Str(x)) = vals.pop() else { return Err(err()) };
                Value::Int(x.chars().count() as i64)
            }
        })
    }

    fn read_access(&mut self, a: &RAccess, frame: &mut Frame, span: Span) -> Result<Value> {
        match a {
            RAccess::OnTree { node, field, length } => {
                let n = self.resolve_node(node, frame, span)?;
                let nk = self.tree.node(n, span, "")?.kind;
                let slot = self.layouts.data_slot(nk, *field).ok_or_else(|| {
                    self.rt(RuntimeKind::TypeError, span, "field not present on runtime kind")
                })?;
                let v = self.tree.node(n, span, "")?.data[slot].clone();
                if self.opts.log_accesses {
                    if let Some(mut segs) = self.node_segs(node, frame) {
                        segs.push(self.rp.data_fields[field.idx()].sym);
                        if *length {
                            segs.push(self.rp.alphabet.length_sym());
                        }
                        self.log_access(Cat::Tree, false, segs);
                    }
                }
                self.finish_read(v, *length, span)
            }
            RAccess::Global { id, length } => {
                let v = self.globals[id.idx()].clone();
                if self.opts.log_accesses {
                    let mut segs = vec![self.rp.globals[id.idx()].sym];
                    if *length {
                        segs.push(self.rp.alphabet.length_sym());
                    }
                    self.log_access(Cat::Global, false, segs);
                }
                self.finish_read(v, *length, span)
            }
            RAccess::Local { idx, length } => {
                let v = match &frame.locals[idx.idx()] {
                    Slot::Val(v) => v.clone(),
                    _ => {
                        return Err(self.rt(
                            RuntimeKind::UnboundLocal,
                            span,
                            "local used before initialization",
                        ))
                    }
                };
                if self.opts.log_accesses {
                    // local symbol: resolved through the frame's fn locals at
                    // logging time by the caller; index-based here
                    let mut segs = vec![self.local_sym_of_frame(idx.idx())];
                    if *length {
                        segs.push(self.rp.alphabet.length_sym());
                    }
                    self.log_access(Cat::Local, false, segs);
                }
                self.finish_read(v, *length, span)
            }
        }
    }

    /// Local name symbol for logging: taken from the innermost log frame's
    /// function local table.
    fn local_sym_of_frame(&self, idx: usize) -> SymId {
        if let Some(lf) = self.log_frames.last() {
            let locals = &self.rp.fns[lf.fn_id.idx()].locals;
            if idx < locals.len() {
                return locals[idx].sym;
            }
        }
        SymId(0)
    }

    fn finish_read(&self, v: Value, length: bool, span: Span) -> Result<Value> {
        if length {
            let Value::Str(s) = v else {
                return Err(self.rt(RuntimeKind::TypeError, span, "length of a non-string"));
            };
            Ok(Value::Int(s.chars().count() as i64))
        } else {
            Ok(v)
        }
    }

    fn write_access(&mut self, a: &RAccess, v: Value, frame: &mut Frame, span: Span) -> Result<()> {
        match a {
            RAccess::OnTree { node, field, .. } => {
                let n = self.resolve_node(node, frame, span)?;
                let nk = self.tree.node(n, span, "")?.kind;
                let slot = self.layouts.data_slot(nk, *field).ok_or_else(|| {
                    self.rt(RuntimeKind::TypeError, span, "field not present on runtime kind")
                })?;
                if self.opts.log_accesses {
                    if let Some(mut segs) = self.node_segs(node, frame) {
                        segs.push(self.rp.data_fields[field.idx()].sym);
                        self.log_access(Cat::Tree, true, segs);
                    }
                }
                self.tree.node_mut(n, span, "")?.data[slot] = v;
                Ok(())
            }
            RAccess::Global { id, .. } => {
                if self.opts.log_accesses {
                    let segs = vec![self.rp.globals[id.idx()].sym];
                    self.log_access(Cat::Global, true, segs);
                }
                self.globals[id.idx()] = v;
                Ok(())
            }
            RAccess::Local { idx, .. } => {
                if self.opts.log_accesses {
                    let segs = vec![self.local_sym_of_frame(idx.idx())];
                    self.log_access(Cat::Local, true, segs);
                }
                frame.locals[idx.idx()] = Slot::Val(v);
                Ok(())
            }
        }
    }

    // --- fused execution ---

    fn exec_fused(
        &mut self,
        fuse: FuseIdx,
        node: NodeRef,
        mask: u32,
        args: Vec<Value>,
        span: Span,
    ) -> Result<()> {
        self.metrics.node_visits += 1;
        let rp = self.rp;
        let rf = &rp.fuses[fuse.idx()];
        if rf.parts.len() > 32 {
            return Err(self.rt(RuntimeKind::FlagOverflow, span, "more than 32 constituents"));
        }
        // per-part frames; concatenated args bind part parameters in order
        let mut frames: Vec<Frame> = rf
            .part_locals
            .iter()
            .map(|locals| Frame {
                receiver: node,
                locals: vec![Slot::Unset; locals.len()],
            })
            .collect();
        let mut cursor = 0usize;
        for (pi, part) in rf.parts.iter().enumerate() {
            for k in 0..part.params.len() {
                let v = args.get(cursor).cloned().unwrap_or_else(|| {
                    Value::default_of(part.params[k].0)
                });
                frames[pi].locals[k] = Slot::Val(v);
                cursor += 1;
            }
        }
        let mut active = mask;
        let parts = &rf.parts;
        for item in &rf.items {
            match item {
                RFuseItem::Block { part, body } => {
                    self.metrics.guard_checks += 1;
                    if active & (1 << part) == 0 {
                        continue;
                    }
                    let pi = *part as usize;
                    let fn_id = parts[pi].fn_id;
                    for st in body {
                        match self.exec_simple(fn_id, st, &mut frames[pi])? {
                            Flow::Normal => {}
                            Flow::Return => {
                                // truncation clears this constituent's bit
                                active &= !(1 << part);
                                break;
                            }
                        }
                    }
                }
                RFuseItem::SelfCall {
                    part,
                    family,
                    args,
                    span,
                } => {
                    self.metrics.guard_checks += 1;
                    if active & (1 << part) == 0 {
                        continue;
                    }
                    let pi = *part as usize;
                    let vals = {
                        let frame = &mut frames[pi];
                        self.eval_args_split(args, frame)?
                    };
                    let kind = self.tree.node(node, *span, "")?.kind;
                    let callee = self.dispatch(kind, *family, *span)?;
                    self.exec_traversal(callee, node, vals)?;
                }
                RFuseItem::Group {
                    mask: gmask,
                    child,
                    stub,
                    flags,
                    args,
                    span,
                } => {
                    self.metrics.guard_checks += 1;
                    if active & gmask == 0 {
                        continue;
                    }
                    // assemble downstream flags: callee bit j = caller bit
                    // flags[j]
                    let mut call_flags = 0u32;
                    for (j, &owner) in flags.iter().enumerate() {
                        call_flags |= ((active >> owner) & 1) << j;
                    }
                    // evaluate live members' arguments in their owner frames;
                    // truncated members pass defaults (never observed)
                    let mut vals = Vec::new();
                    for (j, tuple) in args.iter().enumerate() {
                        let owner = flags[j] as usize;
                        let live = (active >> flags[j]) & 1 == 1;
                        for a in tuple {
                            if live {
                                let frame = &mut frames[owner];
                                let v = self.eval_args_split(std::slice::from_ref(a), frame)?;
                                vals.extend(v);
                            } else {
                                vals.push(Value::default_of(a.ty));
                            }
                        }
                    }
                    let target = self.child_of(node, *child, *span)?;
                    self.cur_path.push(self.rp.child_fields[child.idx()].sym);
                    let result = self.exec_stub(*stub, target, call_flags, vals, *span);
                    self.cur_path.pop();
                    result?;
                }
            }
        }
        Ok(())
    }

    fn eval_args_split(&mut self, args: &[RExpr], frame: &mut Frame) -> Result<Vec<Value>> {
        args.iter().map(|a| self.eval_expr(a, frame)).collect()
    }
}
