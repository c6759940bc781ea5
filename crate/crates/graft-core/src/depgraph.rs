//! Dependence graphs over the top-level statements of a merged traversal
//! sequence: data edges from may-conflict pairs, control edges from possible
//! early returns within one traversal instance.

use crate::automata::{conflicts, summarize_stmt, CollectCtx, StatementSummary};
use crate::error::Result;
use crate::resolved::*;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeReason {
    Data,
    Control,
}

#[derive(Debug, Clone)]
pub struct MergedStmt {
    /// Constituent index within the fusion key (two copies of the same
    /// traversal are distinct constituents).
    pub origin: usize,
    /// Position in the merged body.
    pub pos: usize,
    pub fn_id: FnId,
    pub body_idx: usize,
    pub stmt: RStmt,
    pub summary: StatementSummary,
    pub may_return: bool,
    pub call: Option<(Option<ChildFieldId>, FamilyId)>,
}

#[derive(Debug, Clone)]
pub struct DepGraph {
    pub n: usize,
    /// Directed (earlier -> later) edges in merged program order.
    pub edges: Vec<(usize, usize, EdgeReason)>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
}

impl DepGraph {
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.succ[u].contains(&v)
    }

    /// Reachability over edges (u strictly before v).
    pub fn reaches(&self, u: usize, v: usize) -> bool {
        if u == v {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![u];
        seen[u] = true;
        while let Some(s) = stack.pop() {
            for &t in &self.succ[s] {
                if t == v {
                    return true;
                }
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        false
    }

    pub fn to_dot(&self, stmts: &[MergedStmt], rp: &RProgram) -> String {
        let mut out = String::from("digraph depgraph {\n");
        for (i, ms) in stmts.iter().enumerate() {
            let label = format!(
                "{}[{}] {}",
                rp.fn_display(ms.fn_id),
                ms.origin,
                ms.stmt.text.replace('"', "'")
            );
            let shape = if ms.call.is_some() { "box" } else { "ellipse" };
            let _ = writeln!(out, "  s{i} [label=\"{label}\", shape={shape}];");
        }
        for (u, v, r) in &self.edges {
            let style = match r {
                EdgeReason::Data => "solid",
                EdgeReason::Control => "dashed",
            };
            let _ = writeln!(out, "  s{u} -> s{v} [style={style}];");
        }
        out.push_str("}\n");
        out
    }
}

/// Inline the bodies of a concrete function sequence, in order, and summarize
/// every top-level statement.
pub fn merge_bodies(rp: &RProgram, key: &[FnId]) -> Result<Vec<MergedStmt>> {
    let mut out = Vec::new();
    for (origin, &f) in key.iter().enumerate() {
        let rfn = &rp.fns[f.idx()];
        let ctx = CollectCtx::for_fn(rp, f);
        for (body_idx, stmt) in rfn.body.iter().enumerate() {
            let summary = summarize_stmt(rp, &ctx, rfn.owner, stmt)?;
            let call = match &stmt.kind {
                RStmtKind::Traverse { child, family, .. } => Some((*child, *family)),
                _ => None,
            };
            out.push(MergedStmt {
                origin,
                pos: out.len(),
                fn_id: f,
                body_idx,
                stmt: stmt.clone(),
                summary,
                may_return: stmt.contains_return(),
                call,
            });
        }
    }
    Ok(out)
}

/// Data edge for earlier/later statement pairs that may touch a common
/// location with a write; control edge between statements of the same
/// traversal instance when either may return.
pub fn build_dependence_graph(stmts: &[MergedStmt]) -> DepGraph {
    let n = stmts.len();
    let mut edges = Vec::new();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for u in 0..n {
        for v in (u + 1)..n {
            let same_origin = stmts[u].origin == stmts[v].origin;
            let reason = if conflicts(&stmts[u].summary, &stmts[v].summary, same_origin) {
                Some(EdgeReason::Data)
            } else if same_origin && (stmts[u].may_return || stmts[v].may_return) {
                Some(EdgeReason::Control)
            } else {
                None
            };
            if let Some(r) = reason {
                edges.push((u, v, r));
                succ[u].push(v);
                pred[v].push(u);
            }
        }
    }
    DepGraph {
        n,
        edges,
        succ,
        pred,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolve::resolve_program;
    use crate::surface::parse_program;

    fn program(src: &str) -> RProgram {
        resolve_program(parse_program(src).unwrap()).unwrap()
    }

    fn fn_id(rp: &RProgram, display: &str) -> FnId {
        FnId(rp.fns.iter().position(|f| &*f.display == display).unwrap() as u32)
    }

    /// Two single-statement traversals with a write/read pair on the same
    /// field, and a child call whose body reads what the second statement
    /// writes: both dependences of the overview example.
    #[test]
    fn overview_merged_pair_edges() {
        let src = r#"
            node N {
                child N Child;
                int x;
                int y;
                traversal f1() {
                    this.x = 1;
                    this->Child->f3();
                }
                traversal f2() {
                    this.y = this.x + this->Child.x;
                    this->Child->f4();
                }
                traversal f3() { this.y = 1; }
                traversal f4() { this.x = 3; }
            }
        "#;
        let rp = program(src);
        let key = [fn_id(&rp, "N::f1"), fn_id(&rp, "N::f2")];
        let merged = merge_bodies(&rp, &key).unwrap();
        // merged: [s1 (x=1), call f3, s2 (y=x+child.x), call f4]
        let g = build_dependence_graph(&merged);
        let s1 = 0;
        let call3 = 1;
        let s2 = 2;
        let call4 = 3;
        assert!(g.has_edge(s1, s2), "s1 writes this.x, s2 reads this.x");
        assert!(
            g.has_edge(s2, call4),
            "s2 reads child.x, the call writes x below the child"
        );
        // s1 writes this.x, f3 writes child.y: disjoint locations
        assert!(!g.has_edge(s1, call3));
        // the two calls touch disjoint fields of the subtree
        assert!(!g.has_edge(call3, call4));
        // edges only earlier -> later
        assert!(g.edges.iter().all(|&(u, v, _)| u < v));
    }

    #[test]
    fn disjoint_fields_have_no_edge() {
        let src = r#"
            node N {
                int x;
                int y;
                traversal f() { this.x = 1; }
                traversal g() { this.y = 2; }
            }
        "#;
        let rp = program(src);
        let merged = merge_bodies(&rp, &[fn_id(&rp, "N::f"), fn_id(&rp, "N::g")]).unwrap();
        let g = build_dependence_graph(&merged);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn control_edges_from_may_return() {
        let src = r#"
            node N {
                int x;
                int y;
                traversal f() {
                    if (this.x > 0) { return; }
                    this.y = 1;
                }
                traversal g() { this.x = 3; }
            }
        "#;
        let rp = program(src);
        let merged = merge_bodies(&rp, &[fn_id(&rp, "N::f"), fn_id(&rp, "N::g")]).unwrap();
        let g = build_dependence_graph(&merged);
        // the conditional return orders everything later in the same instance
        assert!(g.has_edge(0, 1));
        // f's return does not order g's statement (different instance) unless
        // data conflicts: if reads x, g writes x
        assert!(g.has_edge(0, 2));
        assert_eq!(
            g.edges
                .iter()
                .find(|&&(u, v, _)| (u, v) == (0, 1))
                .map(|&(_, _, r)| r),
            Some(EdgeReason::Control)
        );
    }

    #[test]
    fn statements_from_two_copies_have_distinct_locals() {
        let src = r#"
            node N {
                int x;
                traversal f() {
                    int t = 1;
                    this.x = t;
                }
            }
        "#;
        let rp = program(src);
        let f = fn_id(&rp, "N::f");
        let merged = merge_bodies(&rp, &[f, f]).unwrap();
        let g = build_dependence_graph(&merged);
        // local t of copy 0 and copy 1 are distinct storage: no cross edges
        // through locals; cross edges exist only via this.x (WW)
        assert!(!g.has_edge(0, 2), "t write vs t write across copies");
        assert!(g.has_edge(1, 3), "x write vs x write across copies");
        // within one copy, the local write-then-read orders
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(2, 3));
    }

    /// Random 4-statement bodies over two fields: the edge set must equal a
    /// brute-force oracle that rechecks every pair by string enumeration over
    /// the raw (un-normalized) automata.
    #[test]
    fn random_bodies_match_pairwise_oracle() {
        use crate::automata::Label;
        let pool = [
            "this.a = 1;",
            "this.b = this.a;",
            "this.a = this.b;",
            "this.b = this.b + 1;",
            "int t = this.a;",
            "return;",
        ];
        let mut seed = 0xC0FFEEu64;
        let mut rng = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..40 {
            let body: Vec<&str> = (0..4).map(|_| pool[(rng() % 6) as usize]).collect();
            let src = format!(
                "node N {{ int a; int b; traversal f() {{ {} }} traversal g() {{ {} }} }}",
                body[..2].join(" "),
                body[2..].join(" ")
            );
            let rp = program(&src);
            let merged =
                merge_bodies(&rp, &[fn_id(&rp, "N::f"), fn_id(&rp, "N::g")]).unwrap();
            let g = build_dependence_graph(&merged);
            // oracle: enumerate all strings up to length 3 over the alphabet
            // plus local symbols and compare acceptance pairwise
            let mut syms: Vec<SymId> = rp.alphabet.field_syms.clone();
            for (i, _) in rp.alphabet.names.iter().enumerate() {
                let s = SymId(i as u32);
                if !syms.contains(&s) {
                    syms.push(s);
                }
            }
            let mut strings: Vec<Vec<Label>> = vec![vec![], vec![Label::Root]];
            for len in 1..=3usize {
                fn extend(
                    prefixes: &[Vec<Label>],
                    syms: &[SymId],
                    len: usize,
                ) -> Vec<Vec<Label>> {
                    let mut out = prefixes.to_vec();
                    for _ in 0..len {
                        let mut next = Vec::new();
                        for p in &out {
                            for &s in syms {
                                let mut v = p.clone();
                                v.push(Label::Field(s));
                                next.push(v);
                            }
                        }
                        out = next;
                    }
                    out
                }
                strings.extend(extend(&[vec![]], &syms, len));
                strings.extend(extend(&[vec![Label::Root]], &syms, len));
            }
            let overlap = |x: &crate::automata::Nfa, y: &crate::automata::Nfa| {
                strings.iter().any(|s| x.accepts(s) && y.accepts(s))
            };
            for u in 0..merged.len() {
                for v in (u + 1)..merged.len() {
                    let (a, b) = (&merged[u], &merged[v]);
                    let same = a.origin == b.origin;
                    let mut expect = overlap(&a.summary.tree_write, &b.summary.tree_read)
                        || overlap(&a.summary.tree_write, &b.summary.tree_write)
                        || overlap(&a.summary.tree_read, &b.summary.tree_write);
                    if same {
                        expect = expect
                            || overlap(&a.summary.local_write, &b.summary.local_read)
                            || overlap(&a.summary.local_write, &b.summary.local_write)
                            || overlap(&a.summary.local_read, &b.summary.local_write);
                        expect = expect || a.may_return || b.may_return;
                    }
                    assert_eq!(
                        g.has_edge(u, v),
                        expect,
                        "pair ({u},{v}) in body {body:?}"
                    );
                }
            }
        }
    }
}
