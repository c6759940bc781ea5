//! Recursive-descent parser for the DSL (base language and fused extensions).

use super::ast::*;
use super::lexer::{lex, Lexed, Tok};
use crate::error::{Error, Result, Span};

pub struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

pub fn parse_program(src: &str) -> Result<Program> {
    if src.trim().is_empty() {
        return Err(Error::Syntax {
            span: Span::new(1, 1),
            expected: "a non-empty program".into(),
            found: "empty input".into(),
        });
    }
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    p.program()
}

/// Parse a standalone tree literal (the `--tree` literal file format).
pub fn parse_tree_literal(src: &str) -> Result<TreeLit> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let lit = p.tree_lit()?;
    p.expect(Tok::Eof)?;
    Ok(lit)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn peek3(&self) -> &Tok {
        &self.toks[(self.pos + 2).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: impl Into<String>) -> Error {
        Error::Syntax {
            span: self.span(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span> {
        if *self.peek() == tok {
            let s = self.span();
            self.bump();
            Ok(s)
        } else {
            Err(self.err(tok.describe()))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if *self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err("identifier")),
        }
    }

    fn int(&mut self) -> Result<i64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.err("integer")),
        }
    }

    fn ty(&mut self) -> Result<Ty> {
        let t = match self.peek() {
            Tok::KwInt => Ty::Int,
            Tok::KwFloat => Ty::Float,
            Tok::KwBool => Ty::Bool,
            Tok::KwString => Ty::Str,
            _ => return Err(self.err("type (int, float, bool, string)")),
        };
        self.bump();
        Ok(t)
    }

    fn is_ty(&self) -> bool {
        matches!(
            self.peek(),
            Tok::KwInt | Tok::KwFloat | Tok::KwBool | Tok::KwString
        )
    }

    fn program(&mut self) -> Result<Program> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(Program { items })
    }

    fn item(&mut self) -> Result<Item> {
        match self.peek() {
            Tok::KwAbstract | Tok::KwNode => Ok(Item::Node(self.node_decl()?)),
            Tok::KwPure => Ok(Item::Pure(self.pure_decl()?)),
            Tok::KwMain => Ok(Item::Main(self.main_decl()?)),
            Tok::KwFuse => Ok(Item::Fuse(self.fuse_decl()?)),
            Tok::KwStub => Ok(Item::Stub(self.stub_decl()?)),
            Tok::KwInt | Tok::KwFloat | Tok::KwBool | Tok::KwString => {
                Ok(Item::Global(self.global_decl()?))
            }
            _ => Err(self.err("top-level declaration (node, pure, main, or a global)")),
        }
    }

    fn global_decl(&mut self) -> Result<GlobalDecl> {
        let span = self.span();
        let ty = self.ty()?;
        let name = self.ident()?;
        let init = if self.eat(Tok::Assign) {
            Some(self.lit()?)
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(GlobalDecl {
            ty,
            name,
            init,
            span,
        })
    }

    fn lit(&mut self) -> Result<Lit> {
        let neg = self.eat(Tok::Minus);
        let lit = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Lit::Int(if neg { v.wrapping_neg() } else { v })
            }
            Tok::Float(v) => {
                self.bump();
                Lit::Float(if neg { -v } else { v })
            }
            Tok::KwTrue => {
                self.bump();
                Lit::Bool(true)
            }
            Tok::KwFalse => {
                self.bump();
                Lit::Bool(false)
            }
            Tok::Str(s) => {
                self.bump();
                Lit::Str(s)
            }
            _ => return Err(self.err("literal")),
        };
        if neg && !matches!(lit, Lit::Int(_) | Lit::Float(_)) {
            return Err(self.err("numeric literal after `-`"));
        }
        Ok(lit)
    }

    fn pure_decl(&mut self) -> Result<PureDecl> {
        let span = self.expect(Tok::KwPure)?;
        let ret = self.ty()?;
        let name = self.ident()?;
        let params = self.params()?;
        self.expect(Tok::Assign)?;
        let builtin = self.ident()?;
        self.expect(Tok::Semi)?;
        Ok(PureDecl {
            ret,
            name,
            params,
            builtin,
            span,
        })
    }

    fn params(&mut self) -> Result<Vec<Param>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if !self.eat(Tok::RParen) {
            loop {
                let ty = self.ty()?;
                let name = self.ident()?;
                out.push(Param { ty, name });
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(out)
    }

    fn node_decl(&mut self) -> Result<NodeDecl> {
        let span = self.span();
        let is_abstract = self.eat(Tok::KwAbstract);
        self.expect(Tok::KwNode)?;
        let name = self.ident()?;
        let mut supers = Vec::new();
        if self.eat(Tok::Colon) {
            loop {
                supers.push(self.ident()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        while !self.eat(Tok::RBrace) {
            members.push(self.member()?);
        }
        Ok(NodeDecl {
            is_abstract,
            name,
            supers,
            members,
            span,
        })
    }

    fn member(&mut self) -> Result<Member> {
        let span = self.span();
        match self.peek() {
            Tok::Ident(s) if s == "child" => {
                // `child Kind name ;`
                self.bump();
                let kind = self.ident()?;
                let name = self.ident()?;
                self.expect(Tok::Semi)?;
                Ok(Member::Child { kind, name, span })
            }
            Tok::KwVirtual | Tok::KwOverride | Tok::KwTraversal => {
                let virt = match self.peek() {
                    Tok::KwVirtual => {
                        self.bump();
                        VirtKind::Virtual
                    }
                    Tok::KwOverride => {
                        self.bump();
                        VirtKind::Override
                    }
                    _ => VirtKind::Plain,
                };
                self.expect(Tok::KwTraversal)?;
                let name = self.ident()?;
                let params = self.params()?;
                self.expect(Tok::LBrace)?;
                let mut body = Vec::new();
                while !self.eat(Tok::RBrace) {
                    body.push(self.stmt()?);
                }
                Ok(Member::Traversal(TraversalDecl {
                    virt,
                    name,
                    params,
                    body,
                    span,
                }))
            }
            _ if self.is_ty() => {
                let ty = self.ty()?;
                let name = self.ident()?;
                self.expect(Tok::Semi)?;
                Ok(Member::Data { ty, name, span })
            }
            _ => Err(self.err("member (child, data field, or traversal)")),
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let span = self.span();
        match self.peek() {
            Tok::KwReturn => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return { span })
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::LBrace)?;
                let mut then_body = Vec::new();
                while !self.eat(Tok::RBrace) {
                    then_body.push(self.stmt()?);
                }
                let mut else_body = Vec::new();
                if self.eat(Tok::KwElse) {
                    self.expect(Tok::LBrace)?;
                    while !self.eat(Tok::RBrace) {
                        else_body.push(self.stmt()?);
                    }
                }
                Ok(Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                })
            }
            Tok::KwDelete => {
                self.bump();
                let node = self.path_expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Delete { node, span })
            }
            Tok::KwAlias => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Assign)?;
                let node = self.path_expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::AliasDef { name, node, span })
            }
            _ if self.is_ty() => {
                let ty = self.ty()?;
                let name = self.ident()?;
                let init = if self.eat(Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Local {
                    ty,
                    name,
                    init,
                    span,
                })
            }
            Tok::KwThis | Tok::KwCast | Tok::Ident(_) => self.path_stmt(span),
            _ => Err(self.err("statement")),
        }
    }

    /// Statements that begin with an access path: traverse calls, pure calls,
    /// assignments, and `... = new K()`.
    fn path_stmt(&mut self, span: Span) -> Result<Stmt> {
        let path = self.path_expr()?;
        if *self.peek() == Tok::LParen {
            // call form
            let args = self.call_args()?;
            self.expect(Tok::Semi)?;
            return self.finish_call(path, args, span);
        }
        self.expect(Tok::Assign)?;
        if *self.peek() == Tok::KwNew {
            self.bump();
            let kind = self.ident()?;
            self.expect(Tok::LParen)?;
            let mut ctor_args = Vec::new();
            if !self.eat(Tok::RParen) {
                loop {
                    ctor_args.push(self.expr()?);
                    if !self.eat(Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
            }
            self.expect(Tok::Semi)?;
            return Ok(Stmt::New {
                slot: path,
                kind,
                ctor_args,
                span,
            });
        }
        let value = self.expr()?;
        self.expect(Tok::Semi)?;
        Ok(Stmt::Assign {
            target: path,
            value,
            span,
        })
    }

    fn finish_call(&mut self, path: PathExpr, args: Vec<Expr>, span: Span) -> Result<Stmt> {
        match (&path.base, path.segs.as_slice()) {
            (PathBase::Name(name), []) => Ok(Stmt::PureCall {
                name: name.clone(),
                args,
                span,
            }),
            (PathBase::This, [Seg::Arrow(f)]) => Ok(Stmt::Traverse {
                child: None,
                traversal: f.clone(),
                args,
                span,
            }),
            (PathBase::This, [Seg::Arrow(c), Seg::Arrow(f)]) => Ok(Stmt::Traverse {
                child: Some(c.clone()),
                traversal: f.clone(),
                args,
                span,
            }),
            _ => Err(Error::Syntax {
                span,
                expected: "traverse call `this[->child]->f(...)` or pure call `p(...)`".into(),
                found: "unsupported call receiver".into(),
            }),
        }
    }

    fn call_args(&mut self) -> Result<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !self.eat(Tok::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(args)
    }

    fn path_expr(&mut self) -> Result<PathExpr> {
        let span = self.span();
        let base = match self.peek().clone() {
            Tok::KwThis => {
                self.bump();
                PathBase::This
            }
            Tok::KwCast => {
                self.bump();
                self.expect(Tok::Lt)?;
                let kind = self.ident()?;
                self.expect(Tok::Gt)?;
                self.expect(Tok::LParen)?;
                let node = self.path_expr()?;
                self.expect(Tok::RParen)?;
                PathBase::Cast {
                    kind,
                    node: Box::new(node),
                }
            }
            Tok::Ident(s) => {
                self.bump();
                PathBase::Name(s)
            }
            _ => return Err(self.err("path (this, cast<...>(...), or identifier)")),
        };
        let mut segs = Vec::new();
        loop {
            if *self.peek() == Tok::Arrow {
                // Stop before `->f(` so callers can treat the final arrow
                // segment as a call; segments are consumed greedily otherwise.
                self.bump();
                let name = self.ident()?;
                segs.push(Seg::Arrow(name));
            } else if *self.peek() == Tok::Dot {
                self.bump();
                let name = self.ident()?;
                segs.push(Seg::Dot(name));
            } else {
                break;
            }
        }
        Ok(PathExpr { base, segs, span })
    }

    // expression precedence: || < && < comparisons < +- < */% < unary < atom
    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            let span = self.span();
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary {
                op: BinOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            let span = self.span();
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary {
                op: BinOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let span = self.span();
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            span,
        })
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr> {
        let span = self.span();
        if self.eat(Tok::Minus) {
            let e = self.unary_expr()?;
            return Ok(Expr::Unary {
                op: UnOp::Neg,
                expr: Box::new(e),
                span,
            });
        }
        if self.eat(Tok::Bang) {
            let e = self.unary_expr()?;
            return Ok(Expr::Unary {
                op: UnOp::Not,
                expr: Box::new(e),
                span,
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Lit(Lit::Int(v), span))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Expr::Lit(Lit::Float(v), span))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Lit::Str(s), span))
            }
            Tok::KwTrue => {
                self.bump();
                Ok(Expr::Lit(Lit::Bool(true), span))
            }
            Tok::KwFalse => {
                self.bump();
                Ok(Expr::Lit(Lit::Bool(false), span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if *self.peek2() == Tok::LParen => {
                self.bump();
                let args = self.call_args()?;
                Ok(Expr::Pure { name, args, span })
            }
            Tok::KwThis | Tok::KwCast | Tok::Ident(_) => Ok(Expr::Path(self.path_expr()?)),
            _ => Err(self.err("expression")),
        }
    }

    fn main_decl(&mut self) -> Result<MainDecl> {
        let span = self.expect(Tok::KwMain)?;
        self.expect(Tok::LBrace)?;
        let mut entries = Vec::new();
        while !self.eat(Tok::RBrace) {
            entries.push(self.entry()?);
        }
        Ok(MainDecl { entries, span })
    }

    fn entry(&mut self) -> Result<Entry> {
        let span = self.span();
        if self.eat(Tok::KwTree) {
            let name = self.ident()?;
            let kind = if self.eat(Tok::Colon) {
                Some(self.ident()?)
            } else {
                None
            };
            self.expect(Tok::Assign)?;
            let init = if self.eat(Tok::KwInput) {
                TreeInit::Input
            } else {
                TreeInit::Literal(self.tree_lit()?)
            };
            self.expect(Tok::Semi)?;
            return Ok(Entry::Bind {
                name,
                kind,
                init,
                span,
            });
        }
        let binding = self.ident()?;
        self.expect(Tok::Arrow)?;
        let traversal = self.ident()?;
        if self.eat(Tok::LBracket) {
            let mask = self.int()?;
            self.expect(Tok::RBracket)?;
            let args = self.call_args()?;
            self.expect(Tok::Semi)?;
            return Ok(Entry::StubCall {
                binding,
                stub: traversal,
                mask: mask as u32,
                args,
                span,
            });
        }
        let args = self.call_args()?;
        self.expect(Tok::Semi)?;
        Ok(Entry::Call {
            binding,
            traversal,
            args,
            span,
        })
    }

    fn tree_lit(&mut self) -> Result<TreeLit> {
        let span = self.span();
        let kind = self.ident()?;
        let mut data = Vec::new();
        while let Tok::Ident(field) = self.peek().clone() {
            if *self.peek2() != Tok::Assign {
                break;
            }
            // `name = <literal>` is a data field; `name = Kind ...` is a
            // child assignment belonging to the enclosing brace block
            let is_lit = matches!(
                self.peek3(),
                Tok::Int(_)
                    | Tok::Float(_)
                    | Tok::Str(_)
                    | Tok::KwTrue
                    | Tok::KwFalse
                    | Tok::Minus
            );
            if !is_lit {
                break;
            }
            self.bump();
            self.bump();
            let lit = self.lit()?;
            data.push((field, lit));
        }
        let mut children = Vec::new();
        if self.eat(Tok::LBrace) {
            while !self.eat(Tok::RBrace) {
                let field = self.ident()?;
                self.expect(Tok::Assign)?;
                let child = self.tree_lit()?;
                children.push((field, child));
            }
        }
        Ok(TreeLit {
            kind,
            data,
            children,
            span,
        })
    }

    fn fuse_decl(&mut self) -> Result<FuseDecl> {
        let span = self.expect(Tok::KwFuse)?;
        let name = self.ident()?;
        self.expect(Tok::KwOn)?;
        let receiver = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut parts = Vec::new();
        let mut items = Vec::new();
        while !self.eat(Tok::RBrace) {
            let ispan = self.span();
            match self.peek() {
                Tok::KwPart => {
                    self.bump();
                    let index = self.int()? as u32;
                    self.expect(Tok::Assign)?;
                    let kind = self.ident()?;
                    self.expect(Tok::ColonColon)?;
                    let traversal = self.ident()?;
                    let params = self.params()?;
                    self.expect(Tok::Semi)?;
                    parts.push(PartDecl {
                        index,
                        kind,
                        traversal,
                        params,
                        span: ispan,
                    });
                }
                Tok::KwGroup => {
                    self.bump();
                    let mask = self.int()? as u32;
                    self.expect(Tok::Arrow)?;
                    let child = self.ident()?;
                    self.expect(Tok::ColonColon)?;
                    let stub = self.ident()?;
                    self.expect(Tok::KwFlags)?;
                    self.expect(Tok::LBracket)?;
                    let mut flags = Vec::new();
                    if !self.eat(Tok::RBracket) {
                        loop {
                            flags.push(self.int()? as u32);
                            if !self.eat(Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RBracket)?;
                    }
                    self.expect(Tok::KwArgs)?;
                    self.expect(Tok::LParen)?;
                    let mut args = Vec::new();
                    if !self.eat(Tok::RParen) {
                        loop {
                            args.push(self.call_args()?);
                            if !self.eat(Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RParen)?;
                    }
                    self.expect(Tok::Semi)?;
                    items.push(FuseItem::Group {
                        mask,
                        child,
                        stub,
                        flags,
                        args,
                        span: ispan,
                    });
                }
                Tok::KwBlock => {
                    self.bump();
                    let part = self.int()? as u32;
                    self.expect(Tok::LBrace)?;
                    let mut body = Vec::new();
                    while !self.eat(Tok::RBrace) {
                        body.push(self.stmt()?);
                    }
                    items.push(FuseItem::Block {
                        part,
                        body,
                        span: ispan,
                    });
                }
                Tok::KwSelfcall => {
                    self.bump();
                    let part = self.int()? as u32;
                    let traversal = self.ident()?;
                    let args = self.call_args()?;
                    self.expect(Tok::Semi)?;
                    items.push(FuseItem::SelfCall {
                        part,
                        traversal,
                        args,
                        span: ispan,
                    });
                }
                _ => return Err(self.err("fuse item (part, group, block, selfcall)")),
            }
        }
        Ok(FuseDecl {
            name,
            receiver,
            parts,
            items,
            span,
        })
    }

    fn stub_decl(&mut self) -> Result<StubDecl> {
        let span = self.expect(Tok::KwStub)?;
        let name = self.ident()?;
        self.expect(Tok::KwOn)?;
        let receiver = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut arms = Vec::new();
        while !self.eat(Tok::RBrace) {
            let kind = self.ident()?;
            self.expect(Tok::Arrow)?;
            let target = self.ident()?;
            self.expect(Tok::Semi)?;
            arms.push((kind, target));
        }
        Ok(StubDecl {
            name,
            receiver,
            arms,
            span,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_input() {
        assert!(matches!(
            parse_program("   \n  "),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn parses_node_with_traversal() {
        let src = r#"
            int CHAR_WIDTH = 1;
            abstract node Element {
                child Element Next;
                int Width;
                virtual traversal computeWidth() { }
            }
            node TextBox : Element {
                string Text;
                override traversal computeWidth() {
                    this->Next->computeWidth();
                    this.Width = this.Text.length;
                }
            }
            main {
                tree t = TextBox Text="ab" { Next = TextBox Text="x" };
                t->computeWidth();
            }
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.nodes().count(), 2);
        let main = p.main().unwrap();
        assert_eq!(main.entries.len(), 2);
    }

    #[test]
    fn parses_traverse_forms() {
        let src = r#"
            node A {
                child A Next;
                traversal f() {
                    this->f();
                    this->Next->f();
                }
            }
        "#;
        let p = parse_program(src).unwrap();
        let node = p.nodes().next().unwrap();
        let Member::Traversal(t) = &node.members[1] else {
            panic!()
        };
        assert!(matches!(&t.body[0], Stmt::Traverse { child: None, .. }));
        assert!(matches!(&t.body[1], Stmt::Traverse { child: Some(c), .. } if c == "Next"));
    }

    #[test]
    fn parses_fused_extensions() {
        let src = r#"
            node A { int x; }
            fuse _fuse__ab12 on A {
                part 0 = A::f(int k);
                group 0b11 -> Next::__stub1 flags [0, 1] args ((1), ());
                block 0 { this.x = 1; }
                selfcall 1 f(2);
            }
            stub __stub1 on A {
                A -> _fuse__ab12;
            }
            main {
                tree t : A = input;
                t->__stub1[0b1]();
            }
        "#;
        let p = parse_program(src).unwrap();
        let fuse = p
            .items
            .iter()
            .find_map(|i| match i {
                Item::Fuse(f) => Some(f),
                _ => None,
            })
            .unwrap();
        assert_eq!(fuse.parts.len(), 1);
        assert_eq!(fuse.items.len(), 3);
        assert!(matches!(
            &fuse.items[0],
            FuseItem::Group { mask: 0b11, flags, .. } if flags == &[0, 1]
        ));
        let main = p.main().unwrap();
        assert!(matches!(
            &main.entries[1],
            Entry::StubCall { mask: 0b1, .. }
        ));
    }
}
