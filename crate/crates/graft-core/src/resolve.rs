//! Name resolution, type checking, and restriction validation: surface
//! program in, `RProgram` out.

use crate::error::{Error, ResolveKind, Result, Span};
use crate::resolved::*;
use crate::surface::{self, ast as s};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

pub fn resolve_program(prog: s::Program) -> Result<RProgram> {
    let mut r = Resolver::new();
    r.collect_kinds(&prog)?;
    r.resolve_hierarchy_edges(&prog)?;
    r.check_acyclic_and_order()?;
    r.resolve_fields(&prog)?;
    r.resolve_globals_and_pures(&prog)?;
    r.resolve_families(&prog)?;
    r.build_subtype_and_lubs()?;
    r.resolve_bodies(&prog)?;
    r.resolve_entry(&prog)?;
    r.resolve_extended(&prog)?;
    r.compute_unfusible();
    Ok(r.finish(prog))
}

fn err(span: Span, kind: ResolveKind, msg: impl Into<String>) -> Error {
    Error::resolve(span, kind, msg)
}

struct Resolver {
    kinds: Vec<RKind>,
    kind_names: HashMap<String, KindId>,
    topo: Vec<KindId>,
    child_fields: Vec<RChildField>,
    data_fields: Vec<RDataField>,
    families: Vec<RFamily>,
    fns: Vec<RFn>,
    globals: Vec<RGlobal>,
    global_names: HashMap<String, GlobalId>,
    pures: Vec<RPure>,
    pure_names: HashMap<String, PureId>,
    bindings: Vec<RBinding>,
    entry: Vec<REntry>,
    fuses: Vec<RFuse>,
    stubs: Vec<RStub>,
    stub_names: HashMap<String, StubId>,
    fuse_names: HashMap<String, FuseIdx>,
    alphabet: Alphabet,
    subtype: Vec<Vec<bool>>,
    lub_table: Vec<Vec<Option<KindId>>>,
    concrete: Vec<KindId>,
    dispatch: Vec<Vec<Option<FnId>>>,
    validation: ValidationReport,
    unfusible: Vec<bool>,
    fn_violations: HashSet<usize>,
    pending_stub_calls: Vec<(usize, String, Vec<s::Expr>, Span)>,
}

impl Resolver {
    fn new() -> Self {
        let mut alphabet = Alphabet::default();
        alphabet.intern_field("length");
        Resolver {
            kinds: Vec::new(),
            kind_names: HashMap::new(),
            topo: Vec::new(),
            child_fields: Vec::new(),
            data_fields: Vec::new(),
            families: Vec::new(),
            fns: Vec::new(),
            globals: Vec::new(),
            global_names: HashMap::new(),
            pures: Vec::new(),
            pure_names: HashMap::new(),
            bindings: Vec::new(),
            entry: Vec::new(),
            fuses: Vec::new(),
            stubs: Vec::new(),
            stub_names: HashMap::new(),
            fuse_names: HashMap::new(),
            alphabet,
            subtype: Vec::new(),
            lub_table: Vec::new(),
            concrete: Vec::new(),
            dispatch: Vec::new(),
            validation: ValidationReport::default(),
            unfusible: Vec::new(),
            fn_violations: HashSet::new(),
            pending_stub_calls: Vec::new(),
        }
    }

    fn kind_id(&self, name: &str, span: Span) -> Result<KindId> {
        self.kind_names
            .get(name)
            .copied()
            .ok_or_else(|| err(span, ResolveKind::UnknownKind, format!("unknown node kind `{name}`")))
    }

    fn collect_kinds(&mut self, prog: &s::Program) -> Result<()> {
        for n in prog.nodes() {
            if self.kind_names.contains_key(&n.name) {
                return Err(err(
                    n.span,
                    ResolveKind::DuplicateDecl,
                    format!("node kind `{}` declared twice", n.name),
                ));
            }
            let id = KindId(self.kinds.len() as u32);
            self.kind_names.insert(n.name.clone(), id);
            self.kinds.push(RKind {
                name: n.name.clone(),
                is_abstract: n.is_abstract,
                supers: Vec::new(),
                children: Vec::new(),
                data: Vec::new(),
                child_lookup: HashMap::new(),
                data_lookup: HashMap::new(),
                fams: HashMap::new(),
                span: n.span,
            });
        }
        Ok(())
    }

    fn resolve_hierarchy_edges(&mut self, prog: &s::Program) -> Result<()> {
        for n in prog.nodes() {
            let id = self.kind_names[&n.name];
            let mut supers = Vec::new();
            for sup in &n.supers {
                let sid = self.kind_id(sup, n.span)?;
                if supers.contains(&sid) {
                    return Err(err(
                        n.span,
                        ResolveKind::DuplicateDecl,
                        format!("duplicate supertype `{sup}`"),
                    ));
                }
                supers.push(sid);
            }
            self.kinds[id.idx()].supers = supers;
        }
        Ok(())
    }

    /// DFS cycle check plus a supertypes-first topological order.
    fn check_acyclic_and_order(&mut self) -> Result<()> {
        let n = self.kinds.len();
        let mut state = vec![0u8; n]; // 0 unvisited, 1 active, 2 done
        let mut order = Vec::with_capacity(n);
        fn visit(
            k: usize,
            kinds: &[RKind],
            state: &mut [u8],
            order: &mut Vec<KindId>,
        ) -> std::result::Result<(), Vec<String>> {
            match state[k] {
                1 => return Err(vec![kinds[k].name.clone()]),
                2 => return Ok(()),
                _ => {}
            }
            state[k] = 1;
            for sup in &kinds[k].supers {
                visit(sup.idx(), kinds, state, order).map_err(|mut cyc| {
                    cyc.push(kinds[k].name.clone());
                    cyc
                })?;
            }
            state[k] = 2;
            order.push(KindId(k as u32));
            Ok(())
        }
        for k in 0..n {
            visit(k, &self.kinds, &mut state, &mut order)
                .map_err(|kinds| Error::CyclicHierarchy { kinds })?;
        }
        self.topo = order;
        Ok(())
    }

    fn resolve_fields(&mut self, prog: &s::Program) -> Result<()> {
        let decls: HashMap<KindId, &s::NodeDecl> = prog
            .nodes()
            .map(|n| (self.kind_names[&n.name], n))
            .collect();
        for &kid in &self.topo.clone() {
            let decl = decls[&kid];
            // inherit
            let mut children: Vec<ChildFieldId> = Vec::new();
            let mut child_lookup: HashMap<String, ChildFieldId> = HashMap::new();
            let mut data: Vec<DataFieldId> = Vec::new();
            let mut data_lookup: HashMap<String, DataLookup> = HashMap::new();
            for &sup in &self.kinds[kid.idx()].supers {
                for &cf in &self.kinds[sup.idx()].children.clone() {
                    let name = self.child_fields[cf.idx()].name.clone();
                    match child_lookup.get(&name) {
                        None => {
                            child_lookup.insert(name, cf);
                            children.push(cf);
                        }
                        Some(&prev) if prev == cf => {}
                        Some(_) => {
                            return Err(err(
                                decl.span,
                                ResolveKind::AmbiguousField,
                                format!(
                                    "child field `{name}` inherited from two unrelated supertypes of `{}`",
                                    decl.name
                                ),
                            ))
                        }
                    }
                }
                for &df in &self.kinds[sup.idx()].data.clone() {
                    if !data.contains(&df) {
                        data.push(df);
                    }
                }
                for (name, lk) in self.kinds[sup.idx()].data_lookup.clone() {
                    match data_lookup.get(&name) {
                        None => {
                            data_lookup.insert(name, lk);
                        }
                        Some(prev) if *prev == lk => {}
                        Some(_) => {
                            data_lookup.insert(name, DataLookup::Ambiguous);
                        }
                    }
                }
            }
            // own members
            for m in &decl.members {
                match m {
                    s::Member::Child { kind, name, span } => {
                        if child_lookup.contains_key(name) {
                            return Err(err(
                                *span,
                                ResolveKind::DuplicateDecl,
                                format!("child field `{name}` already declared (child fields cannot be shadowed)"),
                            ));
                        }
                        let ck = self.kind_id(kind, *span)?;
                        let sym = self.alphabet.intern_field(name);
                        let id = ChildFieldId(self.child_fields.len() as u32);
                        self.child_fields.push(RChildField {
                            name: name.clone(),
                            declared_on: kid,
                            child_kind: ck,
                            sym,
                        });
                        child_lookup.insert(name.clone(), id);
                        children.push(id);
                    }
                    s::Member::Data { ty, name, span } => {
                        if child_lookup.contains_key(name) {
                            return Err(err(
                                *span,
                                ResolveKind::DuplicateDecl,
                                format!("`{name}` already declared as a child field"),
                            ));
                        }
                        if matches!(data_lookup.get(name), Some(DataLookup::Unique(id)) if self.data_fields[id.idx()].declared_on == kid)
                        {
                            return Err(err(
                                *span,
                                ResolveKind::DuplicateDecl,
                                format!("data field `{name}` declared twice on `{}`", decl.name),
                            ));
                        }
                        let sym = self.alphabet.intern_field(name);
                        let id = DataFieldId(self.data_fields.len() as u32);
                        self.data_fields.push(RDataField {
                            name: name.clone(),
                            declared_on: kid,
                            ty: *ty,
                            sym,
                        });
                        // a local declaration shadows any inherited field
                        data_lookup.insert(name.clone(), DataLookup::Unique(id));
                        data.push(id);
                    }
                    s::Member::Traversal(_) => {}
                }
            }
            let k = &mut self.kinds[kid.idx()];
            k.children = children;
            k.child_lookup = child_lookup;
            k.data = data;
            k.data_lookup = data_lookup;
        }
        Ok(())
    }

    fn resolve_globals_and_pures(&mut self, prog: &s::Program) -> Result<()> {
        for item in &prog.items {
            match item {
                s::Item::Global(g) => {
                    if self.global_names.contains_key(&g.name) {
                        return Err(err(
                            g.span,
                            ResolveKind::DuplicateDecl,
                            format!("global `{}` declared twice", g.name),
                        ));
                    }
                    let init = match &g.init {
                        Some(lit) => {
                            let v = Value::from_lit(lit);
                            if v.ty() != g.ty {
                                return Err(err(
                                    g.span,
                                    ResolveKind::TypeError,
                                    format!("global `{}` initializer has type {}", g.name, v.ty().name()),
                                ));
                            }
                            v
                        }
                        None => Value::default_of(g.ty),
                    };
                    let sym = self.alphabet.intern(&g.name);
                    let id = GlobalId(self.globals.len() as u32);
                    self.global_names.insert(g.name.clone(), id);
                    self.globals.push(RGlobal {
                        name: g.name.clone(),
                        ty: g.ty,
                        init,
                        sym,
                    });
                }
                s::Item::Pure(p) => {
                    if self.pure_names.contains_key(&p.name) {
                        return Err(err(
                            p.span,
                            ResolveKind::DuplicateDecl,
                            format!("pure function `{}` declared twice", p.name),
                        ));
                    }
                    let ptys: Vec<Ty> = p.params.iter().map(|q| q.ty).collect();
                    let builtin = resolve_builtin(&p.builtin, &ptys, p.ret, p.span)?;
                    let id = PureId(self.pures.len() as u32);
                    self.pure_names.insert(p.name.clone(), id);
                    self.pures.push(RPure {
                        name: p.name.clone(),
                        ret: p.ret,
                        params: ptys,
                        builtin,
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn resolve_families(&mut self, prog: &s::Program) -> Result<()> {
        let decls: HashMap<KindId, &s::NodeDecl> = prog
            .nodes()
            .map(|n| (self.kind_names[&n.name], n))
            .collect();
        for &kid in &self.topo.clone() {
            let decl = decls[&kid];
            // inherit dispatch entries
            let mut fams: HashMap<String, (FamilyId, FnId)> = HashMap::new();
            for &sup in &self.kinds[kid.idx()].supers {
                for (name, &(fam, body)) in self.kinds[sup.idx()].fams.clone().iter() {
                    match fams.get(name) {
                        None => {
                            fams.insert(name.clone(), (fam, body));
                        }
                        Some(&(pfam, pbody)) => {
                            if pfam != fam {
                                return Err(err(
                                    decl.span,
                                    ResolveKind::AmbiguousField,
                                    format!(
                                        "traversal `{name}` inherited from two unrelated supertypes of `{}`",
                                        decl.name
                                    ),
                                ));
                            }
                            if pbody != body {
                                // diamond with two competing overrides and no
                                // local one; flagged unless shadowed below
                                fams.insert(name.clone(), (fam, FnId(u32::MAX)));
                            }
                        }
                    }
                }
            }
            for m in &decl.members {
                let s::Member::Traversal(t) = m else { continue };
                let params: Vec<(Ty, String)> =
                    t.params.iter().map(|p| (p.ty, p.name.clone())).collect();
                let (fam_id, _) = match t.virt {
                    s::VirtKind::Virtual => {
                        if fams.contains_key(&t.name) {
                            return Err(err(
                                t.span,
                                ResolveKind::DuplicateDecl,
                                format!(
                                    "traversal `{}` already declared in a supertype; use `override`",
                                    t.name
                                ),
                            ));
                        }
                        let id = FamilyId(self.families.len() as u32);
                        self.families.push(RFamily {
                            name: t.name.clone(),
                            root_kind: kid,
                            params: params.clone(),
                            is_virtual: true,
                        });
                        (id, ())
                    }
                    s::VirtKind::Override => {
                        let Some(&(fam, _)) = fams.get(&t.name) else {
                            return Err(err(
                                t.span,
                                ResolveKind::OverrideMissingVirtual,
                                format!("`{}` overrides nothing", t.name),
                            ));
                        };
                        if !self.families[fam.idx()].is_virtual {
                            return Err(err(
                                t.span,
                                ResolveKind::OverrideMissingVirtual,
                                format!("`{}` is not virtual in its supertype", t.name),
                            ));
                        }
                        let expect: Vec<Ty> =
                            self.families[fam.idx()].params.iter().map(|p| p.0).collect();
                        let got: Vec<Ty> = params.iter().map(|p| p.0).collect();
                        if expect != got {
                            return Err(err(
                                t.span,
                                ResolveKind::SignatureMismatch,
                                format!("override of `{}` changes the signature", t.name),
                            ));
                        }
                        (fam, ())
                    }
                    s::VirtKind::Plain => {
                        if fams.contains_key(&t.name) {
                            return Err(err(
                                t.span,
                                ResolveKind::MissingOverrideMarker,
                                format!(
                                    "`{}` hides an inherited traversal; mark it `override`",
                                    t.name
                                ),
                            ));
                        }
                        let id = FamilyId(self.families.len() as u32);
                        self.families.push(RFamily {
                            name: t.name.clone(),
                            root_kind: kid,
                            params: params.clone(),
                            is_virtual: false,
                        });
                        (id, ())
                    }
                };
                let fn_id = FnId(self.fns.len() as u32);
                self.fns.push(RFn {
                    family: fam_id,
                    owner: kid,
                    display: Rc::from(format!("{}::{}", decl.name, t.name)),
                    params,
                    locals: Vec::new(),
                    body: Vec::new(),
                    surface_body: t.body.clone(),
                    span: t.span,
                });
                fams.insert(t.name.clone(), (fam_id, fn_id));
            }
            // any surviving ambiguous-dispatch marker is an error
            for (name, &(_, body)) in &fams {
                if body == FnId(u32::MAX) {
                    return Err(err(
                        decl.span,
                        ResolveKind::AmbiguousField,
                        format!(
                            "`{}` inherits conflicting overrides of `{name}`; add a local override",
                            decl.name
                        ),
                    ));
                }
            }
            self.kinds[kid.idx()].fams = fams;
        }
        // dispatch table over concrete kinds
        let nfam = self.families.len();
        self.dispatch = vec![vec![None; nfam]; self.kinds.len()];
        for (i, k) in self.kinds.iter().enumerate() {
            for &(fam, body) in k.fams.values() {
                self.dispatch[i][fam.idx()] = Some(body);
            }
        }
        self.concrete = self
            .kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| !k.is_abstract)
            .map(|(i, _)| KindId(i as u32))
            .collect();
        Ok(())
    }

    fn build_subtype_and_lubs(&mut self) -> Result<()> {
        let n = self.kinds.len();
        let mut sub = vec![vec![false; n]; n];
        for &kid in &self.topo {
            let i = kid.idx();
            sub[i][i] = true;
            for s in self.kinds[i].supers.clone() {
                let srow = sub[s.idx()].clone();
                for (j, up) in srow.iter().enumerate() {
                    if *up {
                        sub[i][j] = true;
                    }
                }
            }
        }
        self.subtype = sub;
        // unique minimal upper bound per pair; ambiguity is rejected
        let mut lub = vec![vec![None; n]; n];
        for a in 0..n {
            for b in 0..n {
                let uppers: Vec<usize> = (0..n)
                    .filter(|&u| self.subtype[a][u] && self.subtype[b][u])
                    .collect();
                let minimal: Vec<usize> = uppers
                    .iter()
                    .copied()
                    .filter(|&u| {
                        !uppers
                            .iter()
                            .any(|&v| v != u && self.subtype[v][u])
                    })
                    .collect();
                match minimal.len() {
                    0 => {}
                    1 => lub[a][b] = Some(KindId(minimal[0] as u32)),
                    _ => {
                        return Err(err(
                            self.kinds[a].span,
                            ResolveKind::AmbiguousLub,
                            format!(
                                "kinds `{}` and `{}` have {} minimal common supertypes",
                                self.kinds[a].name,
                                self.kinds[b].name,
                                minimal.len()
                            ),
                        ))
                    }
                }
            }
        }
        self.lub_table = lub;
        Ok(())
    }

    fn resolve_bodies(&mut self, _prog: &s::Program) -> Result<()> {
        for i in 0..self.fns.len() {
            let owner = self.fns[i].owner;
            let params = self.fns[i].params.clone();
            let surface_body = self.fns[i].surface_body.clone();
            let display = self.fns[i].display.to_string();
            let mut scope = FnScope::new(owner, display);
            for (ty, name) in &params {
                scope.define_local(self, name, LocalKind::Data(*ty), Span::default(), true)?;
            }
            let body = self.resolve_stmts(&surface_body, &mut scope, true)?;
            for v in scope.violations.drain(..) {
                self.fn_violations.insert(i);
                self.validation.violations.push(v);
            }
            self.fns[i].locals = scope.locals;
            self.fns[i].body = body;
        }
        Ok(())
    }

    fn resolve_stmts(
        &mut self,
        stmts: &[s::Stmt],
        scope: &mut FnScope,
        top_level: bool,
    ) -> Result<Vec<RStmt>> {
        let mut out = Vec::new();
        for st in stmts {
            out.push(self.resolve_stmt(st, scope, top_level)?);
        }
        Ok(out)
    }

    fn resolve_stmt(&mut self, st: &s::Stmt, scope: &mut FnScope, top_level: bool) -> Result<RStmt> {
        let span = st.span();
        let text: Rc<str> = Rc::from(surface::print_stmt_line(st));
        let kind = match st {
            s::Stmt::Return { .. } => RStmtKind::Return,
            s::Stmt::Traverse {
                child,
                traversal,
                args,
                ..
            } => {
                if !top_level {
                    return Err(err(
                        span,
                        ResolveKind::BadEntry,
                        "traverse statements are allowed only at the top level of a traversal body",
                    ));
                }
                let (child_id, recv_kind) = match child {
                    None => (None, scope.receiver),
                    Some(c) => {
                        let cf = self.lookup_child(scope.receiver, c, span)?;
                        (Some(cf), self.child_fields[cf.idx()].child_kind)
                    }
                };
                let (fam, _) = self.lookup_family(recv_kind, traversal, span)?;
                let rargs = self.resolve_args(args, &self.families[fam.idx()].params.clone(), scope, span)?;
                RStmtKind::Traverse {
                    child: child_id,
                    family: fam,
                    args: rargs,
                }
            }
            s::Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let c = self.resolve_expr(cond, scope)?;
                self.expect_ty(&c, Ty::Bool, "if condition")?;
                let t = self.resolve_stmts(then_body, scope, false)?;
                let e = self.resolve_stmts(else_body, scope, false)?;
                RStmtKind::If {
                    cond: c,
                    then_body: t,
                    else_body: e,
                }
            }
            s::Stmt::Local { ty, name, init, .. } => {
                let rinit = match init {
                    Some(e) => {
                        let re = self.resolve_expr(e, scope)?;
                        self.expect_ty(&re, *ty, &format!("initializer of `{name}`"))?;
                        Some(re)
                    }
                    None => None,
                };
                let idx = scope.define_local(self, name, LocalKind::Data(*ty), span, false)?;
                RStmtKind::Local { idx, init: rinit }
            }
            s::Stmt::AliasDef { name, node, .. } => {
                let path = self.resolve_node_path(node, scope)?;
                if path.steps.is_empty() && !matches!(path.base, RNodeBase::Cast { .. }) {
                    return Err(err(
                        span,
                        ResolveKind::BadEntry,
                        "alias must reference a descendant tree node",
                    ));
                }
                let steps = path.flat_steps(&scope.alias_steps);
                let idx = scope.define_local(self, name, LocalKind::Alias, span, false)?;
                if scope.alias_steps.len() <= idx.idx() {
                    scope.alias_steps.resize(idx.idx() + 1, None);
                }
                scope.alias_steps[idx.idx()] = steps.clone();
                scope.alias_kinds.insert(idx, path.kind);
                RStmtKind::Alias {
                    idx,
                    node: path,
                    steps_from_this: steps,
                }
            }
            s::Stmt::New {
                slot,
                kind,
                ctor_args,
                ..
            } => {
                let path = self.resolve_node_path(slot, scope)?;
                if path.steps.is_empty() {
                    return Err(err(
                        span,
                        ResolveKind::IllegalChildWrite,
                        "new must assign into a child slot",
                    ));
                }
                let kid = self.kind_id(kind, span)?;
                if self.kinds[kid.idx()].is_abstract {
                    return Err(err(
                        span,
                        ResolveKind::AbstractNew,
                        format!("cannot instantiate abstract kind `{kind}`"),
                    ));
                }
                if !self.subtype[kid.idx()][path.kind.idx()] {
                    return Err(err(
                        span,
                        ResolveKind::TypeError,
                        format!(
                            "new `{kind}` is not a subtype of the slot kind `{}`",
                            self.kinds[path.kind.idx()].name
                        ),
                    ));
                }
                let rargs: Vec<RExpr> = ctor_args
                    .iter()
                    .map(|a| self.resolve_expr(a, scope))
                    .collect::<Result<_>>()?;
                if !rargs.is_empty() {
                    scope.violations.push(Violation {
                        kind: ViolationKind::NontrivialCtor,
                        fn_display: scope.display.clone(),
                        span,
                        msg: "only the trivial constructor is permitted in new".into(),
                    });
                }
                RStmtKind::New {
                    slot: path,
                    kind: kid,
                    ctor_args: rargs,
                }
            }
            s::Stmt::Delete { node, .. } => {
                let path = self.resolve_node_path(node, scope)?;
                if path.steps.is_empty() {
                    return Err(err(
                        span,
                        ResolveKind::IllegalChildWrite,
                        "delete must target a child slot",
                    ));
                }
                RStmtKind::Delete { node: path }
            }
            s::Stmt::PureCall { name, args, .. } => {
                let id = self.lookup_pure(name, span)?;
                let params = self.pures[id.idx()].params.clone();
                let rargs = self.resolve_pure_args(args, &params, scope, name, span)?;
                RStmtKind::PureCall { id, args: rargs }
            }
            s::Stmt::Assign { target, value, .. } => {
                let access = self.resolve_access(target, scope)?;
                let tty = self.access_ty(&access, scope)?;
                if let RAccess::Local { idx, .. } = &access {
                    if scope.locals[idx.idx()].kind == LocalKind::Alias {
                        return Err(err(
                            span,
                            ResolveKind::TypeError,
                            "aliases are single-assignment; use `alias` to bind",
                        ));
                    }
                }
                if self.access_is_length(&access) {
                    return Err(err(
                        span,
                        ResolveKind::TypeError,
                        "`length` is a read-only member",
                    ));
                }
                let v = self.resolve_expr(value, scope)?;
                self.expect_ty(&v, tty, "assignment")?;
                RStmtKind::Assign { target: access, value: v }
            }
        };
        Ok(RStmt { kind, span, text })
    }

    fn access_is_length(&self, a: &RAccess) -> bool {
        match a {
            RAccess::OnTree { length, .. }
            | RAccess::Global { length, .. }
            | RAccess::Local { length, .. } => *length,
        }
    }

    fn resolve_args(
        &mut self,
        args: &[s::Expr],
        params: &[(Ty, String)],
        scope: &mut FnScope,
        span: Span,
    ) -> Result<Vec<RExpr>> {
        if args.len() != params.len() {
            return Err(err(
                span,
                ResolveKind::SignatureMismatch,
                format!("expected {} arguments, got {}", params.len(), args.len()),
            ));
        }
        args.iter()
            .zip(params)
            .map(|(a, (ty, name))| {
                let e = self.resolve_expr(a, scope)?;
                self.expect_ty(&e, *ty, &format!("argument `{name}`"))?;
                Ok(e)
            })
            .collect()
    }

    fn resolve_pure_args(
        &mut self,
        args: &[s::Expr],
        params: &[Ty],
        scope: &mut FnScope,
        name: &str,
        span: Span,
    ) -> Result<Vec<RExpr>> {
        if args.len() != params.len() {
            return Err(err(
                span,
                ResolveKind::SignatureMismatch,
                format!("`{name}` expects {} arguments, got {}", params.len(), args.len()),
            ));
        }
        args.iter()
            .zip(params)
            .map(|(a, ty)| {
                let e = self.resolve_expr(a, scope)?;
                self.expect_ty(&e, *ty, &format!("argument of `{name}`"))?;
                Ok(e)
            })
            .collect()
    }

    fn expect_ty(&self, e: &RExpr, ty: Ty, what: &str) -> Result<()> {
        if e.ty != ty {
            return Err(err(
                e.span,
                ResolveKind::TypeError,
                format!("{what} has type {}, expected {}", e.ty.name(), ty.name()),
            ));
        }
        Ok(())
    }

    fn lookup_child(&self, kind: KindId, name: &str, span: Span) -> Result<ChildFieldId> {
        self.kinds[kind.idx()]
            .child_lookup
            .get(name)
            .copied()
            .ok_or_else(|| {
                err(
                    span,
                    ResolveKind::UnknownField,
                    format!("kind `{}` has no child field `{name}`", self.kinds[kind.idx()].name),
                )
            })
    }

    fn lookup_data(&self, kind: KindId, name: &str, span: Span) -> Result<DataFieldId> {
        match self.kinds[kind.idx()].data_lookup.get(name) {
            Some(DataLookup::Unique(id)) => Ok(*id),
            Some(DataLookup::Ambiguous) => Err(err(
                span,
                ResolveKind::AmbiguousField,
                format!("data field `{name}` is ambiguous on `{}`", self.kinds[kind.idx()].name),
            )),
            None => Err(err(
                span,
                ResolveKind::UnknownField,
                format!("kind `{}` has no data field `{name}`", self.kinds[kind.idx()].name),
            )),
        }
    }

    fn lookup_family(&self, kind: KindId, name: &str, span: Span) -> Result<(FamilyId, FnId)> {
        self.kinds[kind.idx()]
            .fams
            .get(name)
            .copied()
            .ok_or_else(|| {
                err(
                    span,
                    ResolveKind::UnknownTraversal,
                    format!("kind `{}` has no traversal `{name}`", self.kinds[kind.idx()].name),
                )
            })
    }

    fn lookup_pure(&self, name: &str, span: Span) -> Result<PureId> {
        self.pure_names.get(name).copied().ok_or_else(|| {
            err(
                span,
                ResolveKind::UnknownPure,
                format!("unknown pure function `{name}`"),
            )
        })
    }

    /// Resolve a path that must denote a tree node (arrow segments only).
    fn resolve_node_path(&mut self, p: &s::PathExpr, scope: &mut FnScope) -> Result<RNodePath> {
        let (base, mut kind) = self.resolve_path_base(p, scope)?;
        let mut steps = Vec::new();
        for seg in &p.segs {
            match seg {
                s::Seg::Arrow(name) => {
                    let cf = self.lookup_child(kind, name, p.span)?;
                    kind = self.child_fields[cf.idx()].child_kind;
                    steps.push(cf);
                }
                s::Seg::Dot(name) => {
                    return Err(err(
                        p.span,
                        ResolveKind::TypeError,
                        format!("`.{name}` is a data access; a tree node was expected"),
                    ))
                }
            }
        }
        Ok(RNodePath { base, steps, kind })
    }

    fn resolve_path_base(
        &mut self,
        p: &s::PathExpr,
        scope: &mut FnScope,
    ) -> Result<(RNodeBase, KindId)> {
        match &p.base {
            s::PathBase::This => Ok((RNodeBase::This, scope.receiver)),
            s::PathBase::Cast { kind, node } => {
                let inner = self.resolve_node_path(node, scope)?;
                let target = self.kind_id(kind, p.span)?;
                let up = self.subtype[inner.kind.idx()][target.idx()];
                let down = self.subtype[target.idx()][inner.kind.idx()];
                if !up && !down {
                    return Err(err(
                        p.span,
                        ResolveKind::BadCast,
                        format!(
                            "cast between unrelated kinds `{}` and `{}`",
                            self.kinds[inner.kind.idx()].name, self.kinds[target.idx()].name
                        ),
                    ));
                }
                Ok((
                    RNodeBase::Cast {
                        kind: target,
                        inner: Box::new(inner),
                    },
                    target,
                ))
            }
            s::PathBase::Name(name) => {
                let Some(idx) = scope.names.get(name).copied() else {
                    return Err(err(
                        p.span,
                        ResolveKind::UnknownName,
                        format!("`{name}` does not name an alias in scope"),
                    ));
                };
                if scope.locals[idx.idx()].kind != LocalKind::Alias {
                    return Err(err(
                        p.span,
                        ResolveKind::TypeError,
                        format!("`{name}` is not an alias"),
                    ));
                }
                let kind = scope.alias_kinds[&idx];
                Ok((RNodeBase::Alias(idx), kind))
            }
        }
    }

    /// Resolve a data access (on-tree, global, or local).
    fn resolve_access(&mut self, p: &s::PathExpr, scope: &mut FnScope) -> Result<RAccess> {
        // bare-name bases may be locals or globals
        if let s::PathBase::Name(name) = &p.base {
            let is_alias = scope
                .names
                .get(name)
                .map(|i| scope.locals[i.idx()].kind == LocalKind::Alias)
                .unwrap_or(false);
            if !is_alias {
                if let Some(&idx) = scope.names.get(name) {
                    return self.finish_scalar_access(
                        p,
                        RAccess::Local { idx, length: false },
                        match scope.locals[idx.idx()].kind {
                            LocalKind::Data(ty) => ty,
                            LocalKind::Alias => unreachable!(),
                        },
                    );
                }
                if let Some(&gid) = self.global_names.get(name) {
                    let ty = self.globals[gid.idx()].ty;
                    return self.finish_scalar_access(p, RAccess::Global { id: gid, length: false }, ty);
                }
                return Err(err(
                    p.span,
                    ResolveKind::UnknownName,
                    format!("unknown name `{name}`"),
                ));
            }
        }
        // on-tree: node path followed by data segments
        let (base, mut kind) = self.resolve_path_base(p, scope)?;
        let mut steps = Vec::new();
        let mut it = p.segs.iter().peekable();
        while let Some(s::Seg::Arrow(name)) = it.peek() {
            let cf = self.lookup_child(kind, name, p.span)?;
            kind = self.child_fields[cf.idx()].child_kind;
            steps.push(cf);
            it.next();
        }
        let Some(s::Seg::Dot(field_name)) = it.next() else {
            return Err(err(
                p.span,
                ResolveKind::IllegalChildWrite,
                "expected a data member access, found a tree node",
            ));
        };
        let field = self.lookup_data(kind, field_name, p.span)?;
        let fty = self.data_fields[field.idx()].ty;
        let mut length = false;
        if let Some(seg) = it.next() {
            let s::Seg::Dot(n) = seg else {
                return Err(err(
                    p.span,
                    ResolveKind::TypeError,
                    "data members have no children",
                ));
            };
            if n != "length" || fty != Ty::Str {
                return Err(err(
                    p.span,
                    ResolveKind::UnknownField,
                    format!("`.{n}` is only available as `length` on string fields"),
                ));
            }
            length = true;
            if it.next().is_some() {
                return Err(err(
                    p.span,
                    ResolveKind::TypeError,
                    "no members beyond `length`",
                ));
            }
        }
        Ok(RAccess::OnTree {
            node: RNodePath { base, steps, kind },
            field,
            length,
        })
    }

    fn finish_scalar_access(&self, p: &s::PathExpr, acc: RAccess, ty: Ty) -> Result<RAccess> {
        let mut it = p.segs.iter();
        match it.next() {
            None => Ok(acc),
            Some(s::Seg::Dot(n)) if n == "length" && ty == Ty::Str => {
                if it.next().is_some() {
                    return Err(err(p.span, ResolveKind::TypeError, "no members beyond `length`"));
                }
                Ok(match acc {
                    RAccess::Local { idx, .. } => RAccess::Local { idx, length: true },
                    RAccess::Global { id, .. } => RAccess::Global { id, length: true },
                    other => other,
                })
            }
            Some(s::Seg::Dot(n)) => Err(err(
                p.span,
                ResolveKind::UnknownField,
                format!("`{}` has no member `.{n}`", ty.name()),
            )),
            Some(s::Seg::Arrow(_)) => Err(err(
                p.span,
                ResolveKind::TypeError,
                "scalar values have no children",
            )),
        }
    }

    fn access_ty(&self, a: &RAccess, scope: &FnScope) -> Result<Ty> {
        Ok(match a {
            RAccess::OnTree { field, length, .. } => {
                if *length {
                    Ty::Int
                } else {
                    self.data_fields[field.idx()].ty
                }
            }
            RAccess::Global { id, length } => {
                if *length {
                    Ty::Int
                } else {
                    self.globals[id.idx()].ty
                }
            }
            RAccess::Local { idx, length } => {
                if *length {
                    Ty::Int
                } else {
                    match scope.locals[idx.idx()].kind {
                        LocalKind::Data(ty) => ty,
                        LocalKind::Alias => Ty::Int,
                    }
                }
            }
        })
    }

    fn resolve_expr(&mut self, e: &s::Expr, scope: &mut FnScope) -> Result<RExpr> {
        let span = e.span();
        let (kind, ty) = match e {
            s::Expr::Lit(l, _) => {
                let v = Value::from_lit(l);
                let ty = v.ty();
                (RExprKind::Lit(v), ty)
            }
            s::Expr::Path(p) => {
                let acc = self.resolve_access(p, scope)?;
                let ty = match &acc {
                    RAccess::OnTree { field, length, .. } => {
                        if *length {
                            Ty::Int
                        } else {
                            self.data_fields[field.idx()].ty
                        }
                    }
                    RAccess::Global { id, length } => {
                        if *length {
                            Ty::Int
                        } else {
                            self.globals[id.idx()].ty
                        }
                    }
                    RAccess::Local { idx, length } => {
                        if *length {
                            Ty::Int
                        } else {
                            match scope.locals[idx.idx()].kind {
                                LocalKind::Data(t) => t,
                                LocalKind::Alias => {
                                    return Err(err(
                                        span,
                                        ResolveKind::TypeError,
                                        "an alias is not a data value",
                                    ))
                                }
                            }
                        }
                    }
                };
                (RExprKind::Access(acc), ty)
            }
            s::Expr::Unary { op, expr, .. } => {
                let inner = self.resolve_expr(expr, scope)?;
                let ty = match op {
                    s::UnOp::Neg => {
                        if inner.ty != Ty::Int && inner.ty != Ty::Float {
                            return Err(err(span, ResolveKind::TypeError, "`-` needs a numeric operand"));
                        }
                        inner.ty
                    }
                    s::UnOp::Not => {
                        if inner.ty != Ty::Bool {
                            return Err(err(span, ResolveKind::TypeError, "`!` needs a bool operand"));
                        }
                        Ty::Bool
                    }
                };
                (
                    RExprKind::Unary {
                        op: *op,
                        expr: Box::new(inner),
                    },
                    ty,
                )
            }
            s::Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.resolve_expr(lhs, scope)?;
                let r = self.resolve_expr(rhs, scope)?;
                let ty = self.binop_ty(*op, &l, &r, span)?;
                (
                    RExprKind::Binary {
                        op: *op,
                        lhs: Box::new(l),
                        rhs: Box::new(r),
                    },
                    ty,
                )
            }
            s::Expr::Pure { name, args, .. } => {
                let id = self.lookup_pure(name, span)?;
                let params = self.pures[id.idx()].params.clone();
                let rargs = self.resolve_pure_args(args, &params, scope, name, span)?;
                (RExprKind::Pure { id, args: rargs }, self.pures[id.idx()].ret)
            }
        };
        Ok(RExpr { kind, ty, span })
    }

    fn binop_ty(&self, op: BinOp, l: &RExpr, r: &RExpr, span: Span) -> Result<Ty> {
        use BinOp::*;
        let same = |what: &str| -> Result<()> {
            if l.ty != r.ty {
                return Err(err(
                    span,
                    ResolveKind::TypeError,
                    format!("{what}: operand types {} and {} differ", l.ty.name(), r.ty.name()),
                ));
            }
            Ok(())
        };
        match op {
            Add | Sub | Mul | Div | Rem => {
                same("arithmetic")?;
                if l.ty != Ty::Int && l.ty != Ty::Float {
                    return Err(err(span, ResolveKind::TypeError, "arithmetic needs numeric operands"));
                }
                Ok(l.ty)
            }
            Eq | Ne => {
                same("equality")?;
                Ok(Ty::Bool)
            }
            Lt | Le | Gt | Ge => {
                same("comparison")?;
                if l.ty != Ty::Int && l.ty != Ty::Float {
                    return Err(err(span, ResolveKind::TypeError, "comparison needs numeric operands"));
                }
                Ok(Ty::Bool)
            }
            And | Or => {
                if l.ty != Ty::Bool || r.ty != Ty::Bool {
                    return Err(err(span, ResolveKind::TypeError, "logical operators need bool operands"));
                }
                Ok(Ty::Bool)
            }
        }
    }

    fn resolve_entry(&mut self, prog: &s::Program) -> Result<()> {
        let Some(main) = prog.main() else {
            return Ok(());
        };
        for e in &main.entries {
            match e {
                s::Entry::Bind {
                    name, kind, init, span,
                } => {
                    if self.bindings.iter().any(|b| &b.name == name) {
                        return Err(err(
                            *span,
                            ResolveKind::DuplicateDecl,
                            format!("tree binding `{name}` declared twice"),
                        ));
                    }
                    let (rkind, rinit) = match init {
                        s::TreeInit::Input => {
                            let Some(k) = kind else {
                                return Err(err(
                                    *span,
                                    ResolveKind::BadEntry,
                                    "input bindings need a kind annotation: `tree t : Kind = input;`",
                                ));
                            };
                            (self.kind_id(k, *span)?, RTreeInit::Input)
                        }
                        s::TreeInit::Literal(lit) => {
                            let root = self.kind_id(&lit.kind, lit.span)?;
                            self.check_tree_lit(lit)?;
                            let declared = match kind {
                                Some(k) => {
                                    let kid = self.kind_id(k, *span)?;
                                    if !self.subtype[root.idx()][kid.idx()] {
                                        return Err(err(
                                            *span,
                                            ResolveKind::TypeError,
                                            format!("literal kind `{}` is not a subtype of `{k}`", lit.kind),
                                        ));
                                    }
                                    kid
                                }
                                None => root,
                            };
                            (declared, RTreeInit::Literal(lit.clone()))
                        }
                    };
                    self.bindings.push(RBinding {
                        name: name.clone(),
                        kind: rkind,
                        init: rinit,
                    });
                }
                s::Entry::Call {
                    binding,
                    traversal,
                    args,
                    span,
                } => {
                    let bidx = self.binding_idx(binding, *span)?;
                    let bkind = self.bindings[bidx.idx()].kind;
                    let (fam, _) = self.lookup_family(bkind, traversal, *span)?;
                    let params = self.families[fam.idx()].params.clone();
                    let rargs = self.resolve_entry_args(args, &params, *span)?;
                    self.entry.push(REntry::Call {
                        binding: bidx,
                        family: fam,
                        args: rargs,
                        span: *span,
                    });
                }
                s::Entry::StubCall {
                    binding,
                    stub,
                    mask,
                    args,
                    span,
                } => {
                    // stubs are resolved later; record the name for now
                    let bidx = self.binding_idx(binding, *span)?;
                    self.entry.push(REntry::StubCall {
                        binding: bidx,
                        stub: StubId(u32::MAX),
                        mask: *mask,
                        args: Vec::new(),
                        span: *span,
                    });
                    // stash raw arguments for the extended pass
                    self.pending_stub_calls.push((
                        self.entry.len() - 1,
                        stub.clone(),
                        args.clone(),
                        *span,
                    ));
                }
            }
        }
        Ok(())
    }

    fn binding_idx(&self, name: &str, span: Span) -> Result<BindingIdx> {
        self.bindings
            .iter()
            .position(|b| b.name == name)
            .map(|i| BindingIdx(i as u32))
            .ok_or_else(|| {
                err(
                    span,
                    ResolveKind::BadEntry,
                    format!("`{name}` is not a tree binding defined earlier in main"),
                )
            })
    }

    fn resolve_entry_args(&mut self, args: &[s::Expr], params: &[(Ty, String)], span: Span) -> Result<Vec<RExpr>> {
        if args.len() != params.len() {
            return Err(err(
                span,
                ResolveKind::SignatureMismatch,
                format!("expected {} arguments, got {}", params.len(), args.len()),
            ));
        }
        args.iter()
            .zip(params)
            .map(|(a, (ty, _))| {
                let s::Expr::Lit(lit, lspan) = a else {
                    return Err(err(
                        a.span(),
                        ResolveKind::BadEntry,
                        "entry-call arguments must be literal constants",
                    ));
                };
                let v = Value::from_lit(lit);
                if v.ty() != *ty {
                    return Err(err(*lspan, ResolveKind::TypeError, "argument type mismatch"));
                }
                let ty = v.ty();
                Ok(RExpr {
                    kind: RExprKind::Lit(v),
                    ty,
                    span: *lspan,
                })
            })
            .collect()
    }

    fn check_tree_lit(&self, lit: &s::TreeLit) -> Result<()> {
        let kid = self.kind_id(&lit.kind, lit.span)?;
        if self.kinds[kid.idx()].is_abstract {
            return Err(err(
                lit.span,
                ResolveKind::AbstractNew,
                format!("cannot instantiate abstract kind `{}`", lit.kind),
            ));
        }
        let mut seen = HashSet::new();
        for (f, v) in &lit.data {
            if !seen.insert(f.clone()) {
                return Err(err(lit.span, ResolveKind::DuplicateDecl, format!("field `{f}` set twice")));
            }
            let df = self.lookup_data(kid, f, lit.span)?;
            if Value::from_lit(v).ty() != self.data_fields[df.idx()].ty {
                return Err(err(
                    lit.span,
                    ResolveKind::TypeError,
                    format!("field `{f}` literal type mismatch"),
                ));
            }
        }
        let mut seen_children = HashSet::new();
        for (f, c) in &lit.children {
            if !seen_children.insert(f.clone()) {
                return Err(err(lit.span, ResolveKind::DuplicateDecl, format!("child `{f}` set twice")));
            }
            let cf = self.lookup_child(kid, f, lit.span)?;
            let ck = self.kind_id(&c.kind, c.span)?;
            if !self.subtype[ck.idx()][self.child_fields[cf.idx()].child_kind.idx()] {
                return Err(err(
                    c.span,
                    ResolveKind::TypeError,
                    format!("child `{f}`: `{}` is not a subtype of the declared kind", c.kind),
                ));
            }
            self.check_tree_lit(c)?;
        }
        Ok(())
    }

    fn resolve_extended(&mut self, prog: &s::Program) -> Result<()> {
        // collect stub names first so fuses and entries can reference them
        for item in &prog.items {
            if let s::Item::Stub(st) = item {
                if self.stub_names.contains_key(&st.name) {
                    return Err(err(st.span, ResolveKind::DuplicateDecl, "stub declared twice"));
                }
                let id = StubId(self.stubs.len() as u32);
                self.stub_names.insert(st.name.clone(), id);
                let base = self.kind_id(&st.receiver, st.span)?;
                self.stubs.push(RStub {
                    name: st.name.clone(),
                    base,
                    arms: Vec::new(),
                    span: st.span,
                });
            }
        }
        for item in &prog.items {
            if let s::Item::Fuse(f) = item {
                if self.fuse_names.contains_key(&f.name) {
                    return Err(err(f.span, ResolveKind::DuplicateDecl, "fuse declared twice"));
                }
                let idx = FuseIdx(self.fuses.len() as u32);
                self.fuse_names.insert(f.name.clone(), idx);
                let rf = self.resolve_fuse(f)?;
                self.fuses.push(rf);
            }
        }
        // stub arms
        for item in &prog.items {
            if let s::Item::Stub(st) = item {
                let id = self.stub_names[&st.name];
                let base = self.stubs[id.idx()].base;
                let mut arms = Vec::new();
                for (kname, target) in &st.arms {
                    let kid = self.kind_id(kname, st.span)?;
                    if self.kinds[kid.idx()].is_abstract || !self.subtype[kid.idx()][base.idx()] {
                        return Err(err(
                            st.span,
                            ResolveKind::BadStub,
                            format!("arm kind `{kname}` must be a concrete subtype of the stub base"),
                        ));
                    }
                    let Some(&fidx) = self.fuse_names.get(target) else {
                        return Err(err(
                            st.span,
                            ResolveKind::BadStub,
                            format!("unknown fused function `{target}`"),
                        ));
                    };
                    arms.push((kid, fidx));
                }
                let expected: Vec<KindId> = self
                    .concrete
                    .iter()
                    .copied()
                    .filter(|&k| self.subtype[k.idx()][base.idx()])
                    .collect();
                let got: Vec<KindId> = arms.iter().map(|a| a.0).collect();
                if got != expected {
                    return Err(err(
                        st.span,
                        ResolveKind::BadStub,
                        "stub arms must list every concrete subtype of the base, in declaration order",
                    ));
                }
                self.stubs[id.idx()].arms = arms;
            }
        }
        // entry stub calls
        for (entry_idx, stub_name, args, span) in std::mem::take(&mut self.pending_stub_calls) {
            let Some(&sid) = self.stub_names.get(&stub_name) else {
                return Err(err(
                    span,
                    ResolveKind::BadStub,
                    format!("unknown stub `{stub_name}`"),
                ));
            };
            let params = self.stub_param_layout(sid, span)?;
            let rargs = self.resolve_entry_args(&args, &params, span)?;
            if let REntry::StubCall {
                stub, args: a, binding, ..
            } = &mut self.entry[entry_idx]
            {
                let bkind = self.bindings[binding.idx()].kind;
                let base = self.stubs[sid.idx()].base;
                if !self.subtype[bkind.idx()][base.idx()] {
                    return Err(err(
                        span,
                        ResolveKind::BadStub,
                        "binding kind is not a subtype of the stub base",
                    ));
                }
                *stub = sid;
                *a = rargs;
            }
        }
        Ok(())
    }

    /// Concatenated parameter layout shared by every unit a stub dispatches to.
    fn stub_param_layout(&self, stub: StubId, span: Span) -> Result<Vec<(Ty, String)>> {
        let st = &self.stubs[stub.idx()];
        let Some(&(_, first)) = st.arms.first() else {
            return Err(err(span, ResolveKind::BadStub, "stub has no arms"));
        };
        let fuse = &self.fuses[first.idx()];
        let mut out = Vec::new();
        for part in &fuse.parts {
            out.extend(part.params.iter().cloned());
        }
        Ok(out)
    }

    fn resolve_fuse(&mut self, f: &s::FuseDecl) -> Result<RFuse> {
        let receiver = self.kind_id(&f.receiver, f.span)?;
        // parts must be densely indexed 0..n in order
        let mut parts = Vec::new();
        for (i, p) in f.parts.iter().enumerate() {
            if p.index as usize != i {
                return Err(err(p.span, ResolveKind::BadFuse, "part indices must be dense and ordered"));
            }
            let kid = self.kind_id(&p.kind, p.span)?;
            let (fam, body) = self.lookup_family(kid, &p.traversal, p.span)?;
            let owner_body = if self.fns[body.idx()].owner == kid {
                body
            } else {
                return Err(err(
                    p.span,
                    ResolveKind::BadFuse,
                    format!("`{}::{}` does not declare that traversal itself", p.kind, p.traversal),
                ));
            };
            let declared: Vec<Ty> = p.params.iter().map(|q| q.ty).collect();
            let actual: Vec<Ty> = self.families[fam.idx()].params.iter().map(|q| q.0).collect();
            if declared != actual {
                return Err(err(p.span, ResolveKind::BadFuse, "part parameter types differ from the traversal"));
            }
            parts.push(RPart {
                fn_id: owner_body,
                view: kid,
                params: p.params.iter().map(|q| (q.ty, q.name.clone())).collect(),
            });
        }
        if parts.len() > 32 {
            return Err(err(
                f.span,
                ResolveKind::BadFuse,
                "at most 32 constituents per fused function",
            ));
        }
        // per-part scopes threaded through blocks in item order
        let mut scopes: Vec<FnScope> = parts
            .iter()
            .map(|p| {
                FnScope::new(
                    p.view,
                    format!("{}(part)", self.fns[p.fn_id.idx()].display),
                )
            })
            .collect();
        for (p, scope) in parts.iter().zip(&mut scopes) {
            for (ty, name) in &p.params {
                scope.define_local(self, name, LocalKind::Data(*ty), Span::default(), true)?;
            }
        }
        let mut items = Vec::new();
        for item in &f.items {
            match item {
                s::FuseItem::Block { part, body, span } => {
                    let pi = *part as usize;
                    if pi >= parts.len() {
                        return Err(err(*span, ResolveKind::BadFuse, "block part out of range"));
                    }
                    let rbody = {
                        let scope = &mut scopes[pi];
                        let rbody = self.resolve_stmts(body, scope, true)?;
                        for st in &rbody {
                            if matches!(st.kind, RStmtKind::Traverse { .. }) {
                                return Err(err(
                                    st.span,
                                    ResolveKind::BadFuse,
                                    "blocks may not contain traverse statements",
                                ));
                            }
                        }
                        rbody
                    };
                    items.push(RFuseItem::Block { part: *part, body: rbody });
                }
                s::FuseItem::SelfCall {
                    part,
                    traversal,
                    args,
                    span,
                } => {
                    let pi = *part as usize;
                    if pi >= parts.len() {
                        return Err(err(*span, ResolveKind::BadFuse, "selfcall part out of range"));
                    }
                    let view = parts[pi].view;
                    let (fam, _) = self.lookup_family(view, traversal, *span)?;
                    let params = self.families[fam.idx()].params.clone();
                    let rargs = {
                        let scope = &mut scopes[pi];
                        self.resolve_args(args, &params, scope, *span)?
                    };
                    items.push(RFuseItem::SelfCall {
                        part: *part,
                        family: fam,
                        args: rargs,
                        span: *span,
                    });
                }
                s::FuseItem::Group {
                    mask,
                    child,
                    stub,
                    flags,
                    args,
                    span,
                } => {
                    if flags.is_empty() || flags.len() != args.len() {
                        return Err(err(*span, ResolveKind::BadFuse, "group flags/args arity mismatch"));
                    }
                    let Some(&sid) = self.stub_names.get(stub) else {
                        return Err(err(*span, ResolveKind::BadStub, format!("unknown stub `{stub}`")));
                    };
                    let mut expect_mask = 0u32;
                    for &fl in flags {
                        if fl as usize >= parts.len() {
                            return Err(err(*span, ResolveKind::BadFuse, "group flag out of range"));
                        }
                        expect_mask |= 1 << fl;
                    }
                    if expect_mask != *mask {
                        return Err(err(*span, ResolveKind::BadFuse, "group mask does not cover its members"));
                    }
                    let owner_view = parts[flags[0] as usize].view;
                    let cf = self.lookup_child(owner_view, child, *span)?;
                    let mut rargs = Vec::new();
                    for (j, tuple) in args.iter().enumerate() {
                        let owner = flags[j] as usize;
                        let resolved: Vec<RExpr> = {
                            let scope = &mut scopes[owner];
                            tuple
                                .iter()
                                .map(|a| self.resolve_expr(a, scope))
                                .collect::<Result<_>>()?
                        };
                        rargs.push(resolved);
                    }
                    items.push(RFuseItem::Group {
                        mask: *mask,
                        child: cf,
                        stub: sid,
                        flags: flags.clone(),
                        args: rargs,
                        span: *span,
                    });
                }
            }
        }
        let part_locals = scopes.iter().map(|sc| sc.locals.clone()).collect();
        Ok(RFuse {
            name: f.name.clone(),
            receiver,
            parts,
            items,
            part_locals,
            span: f.span,
        })
    }

    fn compute_unfusible(&mut self) {
        let n = self.fns.len();
        let mut bad = vec![false; n];
        for &i in &self.fn_violations {
            bad[i] = true;
        }
        // close over reachable callees: a caller of a bad fn is itself bad
        // (its summary cannot be trusted), so propagate backwards along edges
        let mut callees: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, f) in self.fns.iter().enumerate() {
            let mut tgts = Vec::new();
            collect_targets(&f.body, self, f.owner, &mut tgts);
            callees[i] = tgts;
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                if !bad[i] && callees[i].iter().any(|&j| bad[j]) {
                    bad[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.unfusible = bad;
    }

    fn finish(self, surface: s::Program) -> RProgram {
        RProgram {
            kinds: self.kinds,
            kind_names: self.kind_names,
            child_fields: self.child_fields,
            data_fields: self.data_fields,
            families: self.families,
            fns: self.fns,
            globals: self.globals,
            pures: self.pures,
            bindings: self.bindings,
            entry: self.entry,
            fuses: self.fuses,
            stubs: self.stubs,
            alphabet: self.alphabet,
            subtype: self.subtype,
            lub_table: self.lub_table,
            concrete: self.concrete,
            dispatch: self.dispatch,
            validation: self.validation,
            unfusible: self.unfusible,
            surface,
        }
    }
}

fn collect_targets(body: &[RStmt], r: &Resolver, owner: KindId, out: &mut Vec<usize>) {
    for st in body {
        if let RStmtKind::Traverse { child, family, .. } = &st.kind {
            let recv = match child {
                None => owner,
                Some(cf) => r.child_fields[cf.idx()].child_kind,
            };
            for &k in &r.concrete {
                if r.subtype[k.idx()][recv.idx()] {
                    if let Some(fn_id) = r.dispatch[k.idx()][family.idx()] {
                        if !out.contains(&fn_id.idx()) {
                            out.push(fn_id.idx());
                        }
                    }
                }
            }
        }
    }
}

// Extra resolver state that had no natural home in the struct literal above.
impl Resolver {
    fn define_local_inner(&mut self, name: &str) -> SymId {
        self.alphabet.intern(name)
    }
}

struct FnScope {
    receiver: KindId,
    display: String,
    locals: Vec<RLocal>,
    names: HashMap<String, LocalIdx>,
    alias_steps: Vec<Option<Vec<ChildFieldId>>>,
    alias_kinds: HashMap<LocalIdx, KindId>,
    violations: Vec<Violation>,
}

impl FnScope {
    fn new(receiver: KindId, display: String) -> Self {
        FnScope {
            receiver,
            display,
            locals: Vec::new(),
            names: HashMap::new(),
            alias_steps: Vec::new(),
            alias_kinds: HashMap::new(),
            violations: Vec::new(),
        }
    }

    fn define_local(
        &mut self,
        r: &mut Resolver,
        name: &str,
        kind: LocalKind,
        span: Span,
        is_param: bool,
    ) -> Result<LocalIdx> {
        if let Some(&prev) = self.names.get(name) {
            if is_param {
                return Err(err(
                    span,
                    ResolveKind::DuplicateDecl,
                    format!("duplicate parameter `{name}`"),
                ));
            }
            let vkind = if self.locals[prev.idx()].kind == LocalKind::Alias {
                ViolationKind::AliasReassigned
            } else {
                ViolationKind::LocalRedefined
            };
            self.violations.push(Violation {
                kind: vkind,
                fn_display: self.display.clone(),
                span,
                msg: format!("`{name}` is bound more than once"),
            });
        }
        let sym = r.define_local_inner(name);
        let idx = LocalIdx(self.locals.len() as u32);
        self.locals.push(RLocal {
            name: name.to_string(),
            sym,
            kind,
        });
        self.names.insert(name.to_string(), idx);
        Ok(idx)
    }
}

fn resolve_builtin(name: &str, params: &[Ty], ret: Ty, span: Span) -> Result<Builtin> {
    let b = match (name, params, ret) {
        ("min", [Ty::Int, Ty::Int], Ty::Int) => Builtin::MinInt,
        ("min", [Ty::Float, Ty::Float], Ty::Float) => Builtin::MinFloat,
        ("max", [Ty::Int, Ty::Int], Ty::Int) => Builtin::MaxInt,
        ("max", [Ty::Float, Ty::Float], Ty::Float) => Builtin::MaxFloat,
        ("abs", [Ty::Int], Ty::Int) => Builtin::AbsInt,
        ("abs", [Ty::Float], Ty::Float) => Builtin::AbsFloat,
        ("concat", [Ty::Str, Ty::Str], Ty::Str) => Builtin::Concat,
        ("length", [Ty::Str], Ty::Int) => Builtin::Length,
        _ => {
            return Err(err(
                span,
                ResolveKind::UnknownPure,
                format!("no builtin `{name}` with that signature (builtins: min, max, abs, concat, length)"),
            ))
        }
    };
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_program;

    #[test]
    fn nontrivial_ctor_is_a_violation_not_an_error() {
        let src = r#"
            abstract node N { virtual traversal f() { } }
            node A : N {
                child N C;
                int x;
                override traversal f() { this->C = new B(1 + 2); }
            }
            node B : N { int y; }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        assert_eq!(rp.validation.violations.len(), 1);
        assert_eq!(
            rp.validation.violations[0].kind,
            ViolationKind::NontrivialCtor
        );
        // the offending traversal is excluded from fusion
        let f = rp.fns.iter().position(|f| &*f.display == "A::f").unwrap();
        assert!(rp.unfusible[f]);
    }

    #[test]
    fn alias_rebinding_is_a_violation() {
        let src = r#"
            node A {
                child A C;
                int x;
                traversal f() {
                    alias l = this->C;
                    alias l = this->C;
                    l.x = 1;
                }
            }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        assert!(rp
            .validation
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::AliasReassigned));
    }

    #[test]
    fn assigning_a_child_slot_is_an_illegal_child_write() {
        let src = r#"
            node A {
                child A C;
                traversal f() { this->C = this->C; }
            }
        "#;
        let err = resolve_program(parse_program(src).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::Resolve {
                kind: ResolveKind::IllegalChildWrite,
                ..
            }
        ), "{err:?}");
    }

    #[test]
    fn traverse_inside_branch_is_rejected() {
        let src = r#"
            node A {
                child A C;
                int x;
                traversal f() { if (this.x > 0) { this->C->f(); } }
            }
        "#;
        assert!(resolve_program(parse_program(src).unwrap()).is_err());
    }

    #[test]
    fn override_signature_mismatch_is_rejected() {
        let src = r#"
            abstract node N { virtual traversal f(int a) { } }
            node A : N { override traversal f(string a) { } }
        "#;
        let err = resolve_program(parse_program(src).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::Resolve {
                kind: ResolveKind::SignatureMismatch,
                ..
            }
        ));
    }

    #[test]
    fn data_shadowing_keeps_two_storage_slots() {
        let src = r#"
            abstract node B { int V; virtual traversal f() { } }
            node D : B { int V; }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let d = rp.kind_names["D"];
        assert_eq!(rp.kinds[d.idx()].data.len(), 2);
    }
}
