//! Deterministic pretty-printer. `parse(print(p))` is structurally identical
//! to `p`, and printing is idempotent byte-for-byte.

use super::ast::*;
use std::fmt::Write;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, item) in p.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Global(g) => print_global(&mut out, g),
            Item::Pure(d) => print_pure(&mut out, d),
            Item::Node(n) => print_node(&mut out, n),
            Item::Main(m) => print_main(&mut out, m),
            Item::Fuse(f) => print_fuse(&mut out, f),
            Item::Stub(s) => print_stub(&mut out, s),
        }
    }
    out
}

pub fn print_stmt_line(s: &Stmt) -> String {
    let mut out = String::new();
    print_stmt(&mut out, s, 0);
    // normalize to a single line for statement-identity keys
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn print_tree_lit(t: &TreeLit) -> String {
    let mut out = String::new();
    tree_lit(&mut out, t, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_global(out: &mut String, g: &GlobalDecl) {
    let _ = write!(out, "{} {}", g.ty.name(), g.name);
    if let Some(init) = &g.init {
        let _ = write!(out, " = {}", lit_str(init));
    }
    out.push_str(";\n");
}

fn print_pure(out: &mut String, d: &PureDecl) {
    let _ = write!(out, "pure {} {}(", d.ret.name(), d.name);
    params(out, &d.params);
    let _ = write!(out, ") = {};\n", d.builtin);
}

fn params(out: &mut String, ps: &[Param]) {
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.ty.name(), p.name);
    }
}

fn print_node(out: &mut String, n: &NodeDecl) {
    if n.is_abstract {
        out.push_str("abstract ");
    }
    let _ = write!(out, "node {}", n.name);
    if !n.supers.is_empty() {
        let _ = write!(out, " : {}", n.supers.join(", "));
    }
    out.push_str(" {\n");
    for m in &n.members {
        match m {
            Member::Child { kind, name, .. } => {
                indent(out, 1);
                let _ = write!(out, "child {kind} {name};\n");
            }
            Member::Data { ty, name, .. } => {
                indent(out, 1);
                let _ = write!(out, "{} {name};\n", ty.name());
            }
            Member::Traversal(t) => {
                indent(out, 1);
                match t.virt {
                    VirtKind::Virtual => out.push_str("virtual "),
                    VirtKind::Override => out.push_str("override "),
                    VirtKind::Plain => {}
                }
                let _ = write!(out, "traversal {}(", t.name);
                params(out, &t.params);
                out.push_str(") {\n");
                for s in &t.body {
                    print_stmt(out, s, 2);
                }
                indent(out, 1);
                out.push_str("}\n");
            }
        }
    }
    out.push_str("}\n");
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Assign { target, value, .. } => {
            path(out, target);
            out.push_str(" = ");
            expr(out, value, 0);
            out.push_str(";\n");
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            out.push_str("if (");
            expr(out, cond, 0);
            out.push_str(") {\n");
            for st in then_body {
                print_stmt(out, st, depth + 1);
            }
            indent(out, depth);
            out.push('}');
            if !else_body.is_empty() {
                out.push_str(" else {\n");
                for st in else_body {
                    print_stmt(out, st, depth + 1);
                }
                indent(out, depth);
                out.push('}');
            }
            out.push('\n');
        }
        Stmt::Local { ty, name, init, .. } => {
            let _ = write!(out, "{} {name}", ty.name());
            if let Some(e) = init {
                out.push_str(" = ");
                expr(out, e, 0);
            }
            out.push_str(";\n");
        }
        Stmt::AliasDef { name, node, .. } => {
            let _ = write!(out, "alias {name} = ");
            path(out, node);
            out.push_str(";\n");
        }
        Stmt::New {
            slot,
            kind,
            ctor_args,
            ..
        } => {
            path(out, slot);
            let _ = write!(out, " = new {kind}(");
            exprs(out, ctor_args);
            out.push_str(");\n");
        }
        Stmt::Delete { node, .. } => {
            out.push_str("delete ");
            path(out, node);
            out.push_str(";\n");
        }
        Stmt::PureCall { name, args, .. } => {
            let _ = write!(out, "{name}(");
            exprs(out, args);
            out.push_str(");\n");
        }
        Stmt::Return { .. } => out.push_str("return;\n"),
        Stmt::Traverse {
            child,
            traversal,
            args,
            ..
        } => {
            out.push_str("this->");
            if let Some(c) = child {
                let _ = write!(out, "{c}->");
            }
            let _ = write!(out, "{traversal}(");
            exprs(out, args);
            out.push_str(");\n");
        }
    }
}

fn path(out: &mut String, p: &PathExpr) {
    match &p.base {
        PathBase::This => out.push_str("this"),
        PathBase::Name(n) => out.push_str(n),
        PathBase::Cast { kind, node } => {
            let _ = write!(out, "cast<{kind}>(");
            path(out, node);
            out.push(')');
        }
    }
    for seg in &p.segs {
        match seg {
            Seg::Arrow(n) => {
                let _ = write!(out, "->{n}");
            }
            Seg::Dot(n) => {
                let _ = write!(out, ".{n}");
            }
        }
    }
}

fn lit_str(l: &Lit) -> String {
    match l {
        Lit::Int(v) => format!("{v}"),
        Lit::Float(v) => format!("{v:?}"),
        Lit::Bool(b) => format!("{b}"),
        Lit::Str(s) => format!("{s:?}"),
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
    }
}

fn op_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Rem => "%",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "&&",
        BinOp::Or => "||",
    }
}

fn expr(out: &mut String, e: &Expr, outer: u8) {
    match e {
        Expr::Lit(l, _) => out.push_str(&lit_str(l)),
        Expr::Path(p) => path(out, p),
        Expr::Unary { op, expr: inner, .. } => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            expr(out, inner, 6);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let p = prec(*op);
            let need = p < outer || (p == outer && matches!(op, BinOp::Sub | BinOp::Div | BinOp::Rem));
            if need {
                out.push('(');
            }
            expr(out, lhs, p);
            let _ = write!(out, " {} ", op_str(*op));
            expr(out, rhs, p + 1);
            if need {
                out.push(')');
            }
        }
        Expr::Pure { name, args, .. } => {
            let _ = write!(out, "{name}(");
            exprs(out, args);
            out.push(')');
        }
    }
}

fn exprs(out: &mut String, es: &[Expr]) {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, e, 0);
    }
}

fn print_main(out: &mut String, m: &MainDecl) {
    out.push_str("main {\n");
    for e in &m.entries {
        indent(out, 1);
        match e {
            Entry::Bind {
                name, kind, init, ..
            } => {
                let _ = write!(out, "tree {name}");
                if let Some(k) = kind {
                    let _ = write!(out, " : {k}");
                }
                out.push_str(" = ");
                match init {
                    TreeInit::Input => out.push_str("input"),
                    TreeInit::Literal(t) => tree_lit(out, t, 1),
                }
                out.push_str(";\n");
            }
            Entry::Call {
                binding,
                traversal,
                args,
                ..
            } => {
                let _ = write!(out, "{binding}->{traversal}(");
                exprs(out, args);
                out.push_str(");\n");
            }
            Entry::StubCall {
                binding,
                stub,
                mask,
                args,
                ..
            } => {
                let _ = write!(out, "{binding}->{stub}[0b{mask:b}](");
                exprs(out, args);
                out.push_str(");\n");
            }
        }
    }
    out.push_str("}\n");
}

fn tree_lit(out: &mut String, t: &TreeLit, depth: usize) {
    out.push_str(&t.kind);
    for (f, l) in &t.data {
        let _ = write!(out, " {f}={}", lit_str(l));
    }
    if !t.children.is_empty() {
        out.push_str(" {\n");
        for (f, c) in &t.children {
            indent(out, depth + 1);
            let _ = write!(out, "{f} = ");
            tree_lit(out, c, depth + 1);
            out.push('\n');
        }
        indent(out, depth);
        out.push('}');
    }
}

fn print_fuse(out: &mut String, f: &FuseDecl) {
    if !f.parts.is_empty() {
        let list = f
            .parts
            .iter()
            .map(|p| format!("{}::{}", p.kind, p.traversal))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = write!(out, "// constituents: {list}\n");
    }
    let _ = write!(out, "fuse {} on {} {{\n", f.name, f.receiver);
    for p in &f.parts {
        indent(out, 1);
        let _ = write!(out, "part {} = {}::{}(", p.index, p.kind, p.traversal);
        params(out, &p.params);
        out.push_str(");\n");
    }
    for item in &f.items {
        match item {
            FuseItem::Group {
                mask,
                child,
                stub,
                flags,
                args,
                ..
            } => {
                indent(out, 1);
                let _ = write!(out, "group 0b{mask:b} -> {child}::{stub} flags [");
                for (i, fl) in flags.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{fl}");
                }
                out.push_str("] args (");
                for (i, tuple) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push('(');
                    exprs(out, tuple);
                    out.push(')');
                }
                out.push_str(");\n");
            }
            FuseItem::Block { part, body, .. } => {
                indent(out, 1);
                let _ = write!(out, "block {part} {{\n");
                for s in body {
                    print_stmt(out, s, 2);
                }
                indent(out, 1);
                out.push_str("}\n");
            }
            FuseItem::SelfCall {
                part,
                traversal,
                args,
                ..
            } => {
                indent(out, 1);
                let _ = write!(out, "selfcall {part} {traversal}(");
                exprs(out, args);
                out.push_str(");\n");
            }
        }
    }
    out.push_str("}\n");
}

fn print_stub(out: &mut String, s: &StubDecl) {
    let _ = write!(out, "stub {} on {} {{\n", s.name, s.receiver);
    for (kind, target) in &s.arms {
        indent(out, 1);
        let _ = write!(out, "{kind} -> {target};\n");
    }
    out.push_str("}\n");
}
