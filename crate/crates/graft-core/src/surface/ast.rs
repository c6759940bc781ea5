//! Surface syntax tree. Covers the base language plus the fused-output
//! extensions (`fuse`, `stub`, masked entry calls).

use crate::error::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Global(GlobalDecl),
    Pure(PureDecl),
    Node(NodeDecl),
    Main(MainDecl),
    Fuse(FuseDecl),
    Stub(StubDecl),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Int,
    Float,
    Bool,
    Str,
}

impl Ty {
    pub fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Float => "float",
            Ty::Bool => "bool",
            Ty::Str => "string",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDecl {
    pub ty: Ty,
    pub name: String,
    pub init: Option<Lit>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureDecl {
    pub ret: Ty,
    pub name: String,
    pub params: Vec<Param>,
    pub builtin: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub is_abstract: bool,
    pub name: String,
    pub supers: Vec<String>,
    pub members: Vec<Member>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Child {
        kind: String,
        name: String,
        span: Span,
    },
    Data {
        ty: Ty,
        name: String,
        span: Span,
    },
    Traversal(TraversalDecl),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VirtKind {
    Plain,
    Virtual,
    Override,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalDecl {
    pub virt: VirtKind,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: Ty,
    pub name: String,
}

/// A member-access chain: base, then `->child` and `.data` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathExpr {
    pub base: PathBase,
    pub segs: Vec<Seg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathBase {
    This,
    /// Alias, local, or global: resolution decides.
    Name(String),
    Cast {
        kind: String,
        node: Box<PathExpr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seg {
    /// `->field` — a child-slot dereference.
    Arrow(String),
    /// `.field` — a data-member access.
    Dot(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: PathExpr,
        value: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: Span,
    },
    Local {
        ty: Ty,
        name: String,
        init: Option<Expr>,
        span: Span,
    },
    AliasDef {
        name: String,
        node: PathExpr,
        span: Span,
    },
    New {
        slot: PathExpr,
        kind: String,
        ctor_args: Vec<Expr>,
        span: Span,
    },
    Delete {
        node: PathExpr,
        span: Span,
    },
    PureCall {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
    Return {
        span: Span,
    },
    /// `this->f(..)` or `this->child->f(..)`.
    Traverse {
        child: Option<String>,
        traversal: String,
        args: Vec<Expr>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::Local { span, .. }
            | Stmt::AliasDef { span, .. }
            | Stmt::New { span, .. }
            | Stmt::Delete { span, .. }
            | Stmt::PureCall { span, .. }
            | Stmt::Return { span }
            | Stmt::Traverse { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Lit, Span),
    Path(PathExpr),
    Unary {
        op: UnOp,
        expr: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Pure {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Lit(_, span) => *span,
            Expr::Path(p) => p.span,
            Expr::Unary { span, .. } | Expr::Binary { span, .. } | Expr::Pure { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MainDecl {
    pub entries: Vec<Entry>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Bind {
        name: String,
        kind: Option<String>,
        init: TreeInit,
        span: Span,
    },
    Call {
        binding: String,
        traversal: String,
        args: Vec<Expr>,
        span: Span,
    },
    /// Fused entry call: `binding->__stub1[0b11](args...)`.
    StubCall {
        binding: String,
        stub: String,
        mask: u32,
        args: Vec<Expr>,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeInit {
    Input,
    Literal(TreeLit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeLit {
    pub kind: String,
    pub data: Vec<(String, Lit)>,
    pub children: Vec<(String, TreeLit)>,
    pub span: Span,
}

// --- fused-output extensions ---

#[derive(Debug, Clone, PartialEq)]
pub struct FuseDecl {
    pub name: String,
    pub receiver: String,
    pub parts: Vec<PartDecl>,
    pub items: Vec<FuseItem>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartDecl {
    pub index: u32,
    pub kind: String,
    pub traversal: String,
    pub params: Vec<Param>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuseItem {
    /// Grouped downstream call guarded by `mask`; member `j` carries the
    /// caller bit `flags[j]` and its own argument tuple.
    Group {
        mask: u32,
        child: String,
        stub: String,
        flags: Vec<u32>,
        args: Vec<Vec<Expr>>,
        span: Span,
    },
    Block {
        part: u32,
        body: Vec<Stmt>,
        span: Span,
    },
    SelfCall {
        part: u32,
        traversal: String,
        args: Vec<Expr>,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubDecl {
    pub name: String,
    pub receiver: String,
    pub arms: Vec<(String, String)>,
    pub span: Span,
}

impl Program {
    pub fn nodes(&self) -> impl Iterator<Item = &NodeDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Node(n) => Some(n),
            _ => None,
        })
    }

    pub fn main(&self) -> Option<&MainDecl> {
        self.items.iter().find_map(|i| match i {
            Item::Main(m) => Some(m),
            _ => None,
        })
    }

    /// Clear all spans; used for structural comparisons across round trips.
    pub fn strip_spans(&mut self) {
        fn strip_path(p: &mut PathExpr) {
            p.span = Span::default();
            if let PathBase::Cast { node, .. } = &mut p.base {
                strip_path(node);
            }
        }
        fn strip_expr(e: &mut Expr) {
            match e {
                Expr::Lit(_, span) => *span = Span::default(),
                Expr::Path(p) => strip_path(p),
                Expr::Unary { expr, span, .. } => {
                    *span = Span::default();
                    strip_expr(expr);
                }
                Expr::Binary { lhs, rhs, span, .. } => {
                    *span = Span::default();
                    strip_expr(lhs);
                    strip_expr(rhs);
                }
                Expr::Pure { args, span, .. } => {
                    *span = Span::default();
                    args.iter_mut().for_each(strip_expr);
                }
            }
        }
        fn strip_stmt(s: &mut Stmt) {
            match s {
                Stmt::Assign { target, value, span } => {
                    *span = Span::default();
                    strip_path(target);
                    strip_expr(value);
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                } => {
                    *span = Span::default();
                    strip_expr(cond);
                    then_body.iter_mut().for_each(strip_stmt);
                    else_body.iter_mut().for_each(strip_stmt);
                }
                Stmt::Local { init, span, .. } => {
                    *span = Span::default();
                    if let Some(e) = init {
                        strip_expr(e);
                    }
                }
                Stmt::AliasDef { node, span, .. } => {
                    *span = Span::default();
                    strip_path(node);
                }
                Stmt::New {
                    slot, ctor_args, span, ..
                } => {
                    *span = Span::default();
                    strip_path(slot);
                    ctor_args.iter_mut().for_each(strip_expr);
                }
                Stmt::Delete { node, span } => {
                    *span = Span::default();
                    strip_path(node);
                }
                Stmt::PureCall { args, span, .. } => {
                    *span = Span::default();
                    args.iter_mut().for_each(strip_expr);
                }
                Stmt::Return { span } => *span = Span::default(),
                Stmt::Traverse { args, span, .. } => {
                    *span = Span::default();
                    args.iter_mut().for_each(strip_expr);
                }
            }
        }
        fn strip_treelit(t: &mut TreeLit) {
            t.span = Span::default();
            for (_, c) in &mut t.children {
                strip_treelit(c);
            }
        }
        for item in &mut self.items {
            match item {
                Item::Global(g) => g.span = Span::default(),
                Item::Pure(p) => p.span = Span::default(),
                Item::Node(n) => {
                    n.span = Span::default();
                    for m in &mut n.members {
                        match m {
                            Member::Child { span, .. } | Member::Data { span, .. } => {
                                *span = Span::default()
                            }
                            Member::Traversal(t) => {
                                t.span = Span::default();
                                t.body.iter_mut().for_each(strip_stmt);
                            }
                        }
                    }
                }
                Item::Main(m) => {
                    m.span = Span::default();
                    for e in &mut m.entries {
                        match e {
                            Entry::Bind { init, span, .. } => {
                                *span = Span::default();
                                if let TreeInit::Literal(t) = init {
                                    strip_treelit(t);
                                }
                            }
                            Entry::Call { args, span, .. }
                            | Entry::StubCall { args, span, .. } => {
                                *span = Span::default();
                                args.iter_mut().for_each(strip_expr);
                            }
                        }
                    }
                }
                Item::Fuse(f) => {
                    f.span = Span::default();
                    for p in &mut f.parts {
                        p.span = Span::default();
                    }
                    for it in &mut f.items {
                        match it {
                            FuseItem::Group { args, span, .. } => {
                                *span = Span::default();
                                args.iter_mut().flatten().for_each(strip_expr);
                            }
                            FuseItem::Block { body, span, .. } => {
                                *span = Span::default();
                                body.iter_mut().for_each(strip_stmt);
                            }
                            FuseItem::SelfCall { args, span, .. } => {
                                *span = Span::default();
                                args.iter_mut().for_each(strip_expr);
                            }
                        }
                    }
                }
                Item::Stub(s) => s.span = Span::default(),
            }
        }
    }
}
