//! Resolved program representation: interned names, a checked node-kind
//! hierarchy, override-resolved traversal bodies, and typed statements.

use crate::error::Span;
use crate::surface;
use std::collections::HashMap;
use std::rc::Rc;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(KindId);
id_type!(ChildFieldId);
id_type!(DataFieldId);
id_type!(FamilyId);
id_type!(FnId);
id_type!(GlobalId);
id_type!(PureId);
id_type!(SymId);
id_type!(LocalIdx);
id_type!(BindingIdx);
id_type!(FuseIdx);
id_type!(StubId);

pub use surface::ast::{BinOp, Ty, UnOp};

/// Runtime value of a data field, local, or expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<str>),
}

impl Value {
    pub fn default_of(ty: Ty) -> Value {
        match ty {
            Ty::Int => Value::Int(0),
            Ty::Float => Value::Float(0.0),
            Ty::Bool => Value::Bool(false),
            Ty::Str => Value::Str(Rc::from("")),
        }
    }

    pub fn ty(&self) -> Ty {
        match self {
            Value::Int(_) => Ty::Int,
            Value::Float(_) => Ty::Float,
            Value::Bool(_) => Ty::Bool,
            Value::Str(_) => Ty::Str,
        }
    }

    pub fn from_lit(lit: &surface::Lit) -> Value {
        match lit {
            surface::Lit::Int(v) => Value::Int(*v),
            surface::Lit::Float(v) => Value::Float(*v),
            surface::Lit::Bool(b) => Value::Bool(*b),
            surface::Lit::Str(s) => Value::Str(Rc::from(s.as_str())),
        }
    }

    /// Bit-exact equality (floats compared by bits so diffs are exact).
    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }

    pub fn display(&self) -> String {
        match self {
            Value::Int(v) => format!("{v}"),
            Value::Float(v) => format!("{v:?}"),
            Value::Bool(b) => format!("{b}"),
            Value::Str(s) => format!("{:?}", s.as_ref()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RKind {
    pub name: String,
    pub is_abstract: bool,
    pub supers: Vec<KindId>,
    /// All child fields visible on this kind (inherited first, then own).
    pub children: Vec<ChildFieldId>,
    /// All data storage slots on this kind, including shadowed base fields.
    pub data: Vec<DataFieldId>,
    pub child_lookup: HashMap<String, ChildFieldId>,
    pub data_lookup: HashMap<String, DataLookup>,
    /// Traversal families visible on this kind with the dispatched body.
    pub fams: HashMap<String, (FamilyId, FnId)>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataLookup {
    Unique(DataFieldId),
    /// Inherited from two unrelated supertypes without a local shadow.
    Ambiguous,
}

#[derive(Debug, Clone)]
pub struct RChildField {
    pub name: String,
    pub declared_on: KindId,
    pub child_kind: KindId,
    pub sym: SymId,
}

#[derive(Debug, Clone)]
pub struct RDataField {
    pub name: String,
    pub declared_on: KindId,
    pub ty: Ty,
    pub sym: SymId,
}

#[derive(Debug, Clone)]
pub struct RFamily {
    pub name: String,
    pub root_kind: KindId,
    pub params: Vec<(Ty, String)>,
    pub is_virtual: bool,
}

#[derive(Debug, Clone)]
pub struct RFn {
    pub family: FamilyId,
    pub owner: KindId,
    /// `Owner::name`, stable across print/reparse.
    pub display: Rc<str>,
    pub params: Vec<(Ty, String)>,
    pub locals: Vec<RLocal>,
    pub body: Vec<RStmt>,
    pub surface_body: Vec<surface::Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct RLocal {
    pub name: String,
    pub sym: SymId,
    pub kind: LocalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    Data(Ty),
    Alias,
}

#[derive(Debug, Clone)]
pub struct RGlobal {
    pub name: String,
    pub ty: Ty,
    pub init: Value,
    pub sym: SymId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    MinInt,
    MaxInt,
    AbsInt,
    MinFloat,
    MaxFloat,
    AbsFloat,
    Concat,
    Length,
}

#[derive(Debug, Clone)]
pub struct RPure {
    pub name: String,
    pub ret: Ty,
    pub params: Vec<Ty>,
    pub builtin: Builtin,
}

/// A tree-node path: a base plus child-slot steps.
#[derive(Debug, Clone)]
pub struct RNodePath {
    pub base: RNodeBase,
    pub steps: Vec<ChildFieldId>,
    /// Static kind of the node the full path denotes.
    pub kind: KindId,
}

#[derive(Debug, Clone)]
pub enum RNodeBase {
    This,
    Alias(LocalIdx),
    Cast { kind: KindId, inner: Box<RNodePath> },
}

impl RNodePath {
    /// Child steps of the whole path with casts flattened; `None` when the
    /// path goes through an alias that could not be statically inlined.
    pub fn flat_steps(
        &self,
        alias_steps: &[Option<Vec<ChildFieldId>>],
    ) -> Option<Vec<ChildFieldId>> {
        let mut prefix = match &self.base {
            RNodeBase::This => Vec::new(),
            RNodeBase::Alias(idx) => alias_steps[idx.idx()].clone()?,
            RNodeBase::Cast { inner, .. } => inner.flat_steps(alias_steps)?,
        };
        prefix.extend(self.steps.iter().copied());
        Some(prefix)
    }
}

#[derive(Debug, Clone)]
pub enum RAccess {
    OnTree {
        node: RNodePath,
        field: DataFieldId,
        length: bool,
    },
    Global {
        id: GlobalId,
        length: bool,
    },
    Local {
        idx: LocalIdx,
        length: bool,
    },
}

#[derive(Debug, Clone)]
pub struct RExpr {
    pub kind: RExprKind,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum RExprKind {
    Lit(Value),
    Access(RAccess),
    Unary {
        op: UnOp,
        expr: Box<RExpr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<RExpr>,
        rhs: Box<RExpr>,
    },
    Pure {
        id: PureId,
        args: Vec<RExpr>,
    },
}

#[derive(Debug, Clone)]
pub struct RStmt {
    pub kind: RStmtKind,
    pub span: Span,
    /// Normalized one-line source text; statement identity for metrics.
    pub text: Rc<str>,
}

#[derive(Debug, Clone)]
pub enum RStmtKind {
    Assign {
        target: RAccess,
        value: RExpr,
    },
    If {
        cond: RExpr,
        then_body: Vec<RStmt>,
        else_body: Vec<RStmt>,
    },
    Local {
        idx: LocalIdx,
        init: Option<RExpr>,
    },
    Alias {
        idx: LocalIdx,
        node: RNodePath,
        /// Statically inlined absolute child steps from the receiver.
        steps_from_this: Option<Vec<ChildFieldId>>,
    },
    New {
        slot: RNodePath,
        kind: KindId,
        ctor_args: Vec<RExpr>,
    },
    Delete {
        node: RNodePath,
    },
    PureCall {
        id: PureId,
        args: Vec<RExpr>,
    },
    Return,
    Traverse {
        child: Option<ChildFieldId>,
        family: FamilyId,
        args: Vec<RExpr>,
    },
}

impl RStmt {
    pub fn contains_return(&self) -> bool {
        match &self.kind {
            RStmtKind::Return => true,
            RStmtKind::If {
                then_body,
                else_body,
                ..
            } => then_body.iter().chain(else_body).any(|s| s.contains_return()),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RBinding {
    pub name: String,
    pub kind: KindId,
    pub init: RTreeInit,
}

#[derive(Debug, Clone)]
pub enum RTreeInit {
    Input,
    Literal(surface::TreeLit),
}

#[derive(Debug, Clone)]
pub enum REntry {
    Call {
        binding: BindingIdx,
        family: FamilyId,
        args: Vec<RExpr>,
        span: Span,
    },
    StubCall {
        binding: BindingIdx,
        stub: StubId,
        mask: u32,
        args: Vec<RExpr>,
        span: Span,
    },
}

#[derive(Debug, Clone)]
pub struct RPart {
    pub fn_id: FnId,
    /// Receiver view kind for this part's statements (the constituent's owner).
    pub view: KindId,
    pub params: Vec<(Ty, String)>,
}

#[derive(Debug, Clone)]
pub enum RFuseItem {
    Group {
        mask: u32,
        child: ChildFieldId,
        stub: StubId,
        flags: Vec<u32>,
        args: Vec<Vec<RExpr>>,
        span: Span,
    },
    Block {
        part: u32,
        body: Vec<RStmt>,
    },
    SelfCall {
        part: u32,
        family: FamilyId,
        args: Vec<RExpr>,
        span: Span,
    },
}

#[derive(Debug, Clone)]
pub struct RFuse {
    pub name: String,
    pub receiver: KindId,
    pub parts: Vec<RPart>,
    pub items: Vec<RFuseItem>,
    /// Per-part local tables (parameters first, then block locals).
    pub part_locals: Vec<Vec<RLocal>>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct RStub {
    pub name: String,
    pub base: KindId,
    pub arms: Vec<(KindId, FuseIdx)>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    AliasReassigned,
    NontrivialCtor,
    LocalRedefined,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationKind::AliasReassigned => "AliasReassigned",
            ViolationKind::NontrivialCtor => "NontrivialCtor",
            ViolationKind::LocalRedefined => "LocalRedefined",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    pub fn_display: String,
    pub span: Span,
    pub msg: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Interned field-label symbols. `field_syms` is the finite alphabet the
/// wildcard transition expands over: every child field, data field, and the
/// builtin string member.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    pub names: Vec<String>,
    map: HashMap<String, SymId>,
    pub field_syms: Vec<SymId>,
}

impl Alphabet {
    pub fn intern(&mut self, name: &str) -> SymId {
        if let Some(&id) = self.map.get(name) {
            return id;
        }
        let id = SymId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.map.insert(name.to_string(), id);
        id
    }

    pub fn intern_field(&mut self, name: &str) -> SymId {
        let id = self.intern(name);
        if !self.field_syms.contains(&id) {
            self.field_syms.push(id);
        }
        id
    }

    pub fn name(&self, id: SymId) -> &str {
        &self.names[id.idx()]
    }

    /// The builtin string member; always interned first.
    pub fn length_sym(&self) -> SymId {
        self.map["length"]
    }
}

#[derive(Debug, Clone)]
pub struct RProgram {
    pub kinds: Vec<RKind>,
    pub kind_names: HashMap<String, KindId>,
    pub child_fields: Vec<RChildField>,
    pub data_fields: Vec<RDataField>,
    pub families: Vec<RFamily>,
    pub fns: Vec<RFn>,
    pub globals: Vec<RGlobal>,
    pub pures: Vec<RPure>,
    pub bindings: Vec<RBinding>,
    pub entry: Vec<REntry>,
    pub fuses: Vec<RFuse>,
    pub stubs: Vec<RStub>,
    pub alphabet: Alphabet,
    /// subtype[a][b] iff kind a is a subtype of kind b (reflexive).
    pub subtype: Vec<Vec<bool>>,
    /// Unique least upper bound per kind pair, when one exists.
    pub lub_table: Vec<Vec<Option<KindId>>>,
    /// Concrete kinds in declaration order.
    pub concrete: Vec<KindId>,
    /// dispatch[kind][family] — resolved body for a concrete kind.
    pub dispatch: Vec<Vec<Option<FnId>>>,
    pub validation: ValidationReport,
    /// Functions excluded from fusion (violations, transitively closed).
    pub unfusible: Vec<bool>,
    pub surface: surface::Program,
}

impl RProgram {
    pub fn kind(&self, id: KindId) -> &RKind {
        &self.kinds[id.idx()]
    }

    pub fn kind_name(&self, id: KindId) -> &str {
        &self.kinds[id.idx()].name
    }

    pub fn is_subtype(&self, a: KindId, b: KindId) -> bool {
        self.subtype[a.idx()][b.idx()]
    }

    pub fn fn_display(&self, id: FnId) -> &str {
        &self.fns[id.idx()].display
    }

    /// Concrete subkinds of `base` in declaration order.
    pub fn concrete_subkinds(&self, base: KindId) -> Vec<KindId> {
        self.concrete
            .iter()
            .copied()
            .filter(|&k| self.is_subtype(k, base))
            .collect()
    }

    pub fn binding_index(&self, name: &str) -> Option<BindingIdx> {
        self.bindings
            .iter()
            .position(|b| b.name == name)
            .map(|i| BindingIdx(i as u32))
    }
}
