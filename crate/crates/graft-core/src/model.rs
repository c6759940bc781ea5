//! Hierarchy queries and the labeled call graph: least upper bounds, virtual
//! dispatch targets, and the transitive closure of traversal calls with
//! child-field edge labels.

use crate::error::{Error, Result, Span};
use crate::resolved::*;
use std::fmt::Write;

/// Least kind that is a supertype of every input kind.
pub fn lub_type(rp: &RProgram, kinds: &[KindId]) -> Result<KindId> {
    let mut it = kinds.iter();
    let Some(&first) = it.next() else {
        return Err(Error::internal("lub of an empty kind list"));
    };
    let mut acc = first;
    for &k in it {
        match rp.lub_table[acc.idx()][k.idx()] {
            Some(l) => acc = l,
            None => {
                return Err(Error::NoCommonSupertype {
                    kinds: kinds.iter().map(|&k| rp.kind_name(k).to_string()).collect(),
                })
            }
        }
    }
    Ok(acc)
}

/// One dispatched body per concrete subtype of the declared receiver kind,
/// in declaration order.
pub fn concrete_targets(
    rp: &RProgram,
    declared: KindId,
    family: FamilyId,
    span: Span,
) -> Result<Vec<(KindId, FnId)>> {
    let mut out = Vec::new();
    for &k in &rp.concrete {
        if rp.is_subtype(k, declared) {
            if let Some(f) = rp.dispatch[k.idx()][family.idx()] {
                out.push((k, f));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoConcreteTarget {
            kind: rp.kind_name(declared).to_string(),
            span,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallLabel {
    SelfCall,
    Child(ChildFieldId),
}

#[derive(Debug, Clone)]
pub struct LabeledCallGraph {
    /// Reachable concrete functions, in discovery (BFS) order.
    pub nodes: Vec<FnId>,
    pub edges: Vec<(FnId, CallLabel, FnId)>,
    pub roots: Vec<FnId>,
}

/// Closure of concrete functions reachable from a call to `family` on a
/// receiver of declared kind `declared`; each edge carries the traversed
/// child field, or `SelfCall` for `this->f()` calls.
pub fn build_labeled_call_graph(
    rp: &RProgram,
    declared: KindId,
    family: FamilyId,
    span: Span,
) -> Result<LabeledCallGraph> {
    let roots: Vec<FnId> = concrete_targets(rp, declared, family, span)?
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let mut nodes: Vec<FnId> = Vec::new();
    let mut edges: Vec<(FnId, CallLabel, FnId)> = Vec::new();
    let mut queue: Vec<FnId> = Vec::new();
    for &r in &roots {
        if !nodes.contains(&r) {
            nodes.push(r);
            queue.push(r);
        }
    }
    while let Some(f) = queue.pop() {
        let owner = rp.fns[f.idx()].owner;
        for st in &rp.fns[f.idx()].body {
            let RStmtKind::Traverse { child, family, .. } = &st.kind else {
                continue;
            };
            let (label, recv) = match child {
                None => (CallLabel::SelfCall, owner),
                Some(cf) => (
                    CallLabel::Child(*cf),
                    rp.child_fields[cf.idx()].child_kind,
                ),
            };
            for (_, target) in concrete_targets(rp, recv, *family, st.span)? {
                if !nodes.contains(&target) {
                    nodes.push(target);
                    queue.push(target);
                }
                let edge = (f, label, target);
                if !edges.contains(&edge) {
                    edges.push(edge);
                }
            }
        }
    }
    edges.sort_by_key(|&(a, l, b)| (a, l, b));
    Ok(LabeledCallGraph { nodes, edges, roots })
}

impl LabeledCallGraph {
    pub fn to_dot(&self, rp: &RProgram) -> String {
        let mut out = String::from("digraph callgraph {\n");
        let mut sorted = self.nodes.clone();
        sorted.sort();
        for f in &sorted {
            let shape = if self.roots.contains(f) {
                "doublecircle"
            } else {
                "ellipse"
            };
            let _ = writeln!(
                out,
                "  f{} [label=\"{}\", shape={}];",
                f.0,
                rp.fn_display(*f),
                shape
            );
        }
        for (a, l, b) in &self.edges {
            let label = match l {
                CallLabel::SelfCall => "self".to_string(),
                CallLabel::Child(cf) => rp.child_fields[cf.idx()].name.clone(),
            };
            let _ = writeln!(out, "  f{} -> f{} [label=\"{label}\"];", a.0, b.0);
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolve::resolve_program;
    use crate::surface::parse_program;

    fn fig2() -> RProgram {
        let src = include_str!("../corpus/fig2.tg");
        resolve_program(parse_program(src).unwrap()).unwrap()
    }

    fn kind(rp: &RProgram, name: &str) -> KindId {
        rp.kind_names[name]
    }

    #[test]
    fn fig2_parses_to_four_kinds_two_families() {
        let rp = fig2();
        assert_eq!(rp.kinds.len(), 4);
        assert_eq!(rp.families.len(), 2);
        assert!(rp.validation.is_empty());
    }

    #[test]
    fn fig2_subtype_relation() {
        let rp = fig2();
        let element = kind(&rp, "Element");
        for name in ["Element", "TextBox", "Group", "End"] {
            assert!(rp.is_subtype(kind(&rp, name), element));
        }
        assert!(!rp.is_subtype(element, kind(&rp, "TextBox")));
        // single kind with no supers: identity
        let rp2 =
            resolve_program(parse_program("node A { int x; }").unwrap()).unwrap();
        assert!(rp2.is_subtype(KindId(0), KindId(0)));
    }

    #[test]
    fn fig2_concrete_targets_of_element_call() {
        let rp = fig2();
        let element = kind(&rp, "Element");
        let fam = rp.kinds[element.idx()].fams["computeWidth"].0;
        let targets = concrete_targets(&rp, element, fam, Span::default()).unwrap();
        let displays: Vec<&str> = targets
            .iter()
            .map(|(_, f)| rp.fn_display(*f))
            .collect();
        // declaration order of the concrete kinds; End inherits the base body
        assert_eq!(
            displays,
            vec![
                "TextBox::computeWidth",
                "Group::computeWidth",
                "Element::computeWidth"
            ]
        );
        let kinds: Vec<&str> = targets.iter().map(|(k, _)| rp.kind_name(*k)).collect();
        assert_eq!(kinds, vec!["TextBox", "Group", "End"]);
    }

    #[test]
    fn concrete_target_of_leaf_kind_is_singleton() {
        let rp = fig2();
        let tb = kind(&rp, "TextBox");
        let fam = rp.kinds[tb.idx()].fams["computeWidth"].0;
        let targets = concrete_targets(&rp, tb, fam, Span::default()).unwrap();
        assert_eq!(targets.len(), 1);
    }

    #[test]
    fn abstract_kind_without_concrete_subtype_has_no_target() {
        let src = r#"
            abstract node Ghost { virtual traversal f() { } }
            node Real { child Ghost G; traversal g() { this->G->f(); } }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let ghost = rp.kind_names["Ghost"];
        let fam = rp.kinds[ghost.idx()].fams["f"].0;
        assert!(matches!(
            concrete_targets(&rp, ghost, fam, Span::default()),
            Err(Error::NoConcreteTarget { .. })
        ));
    }

    #[test]
    fn lub_examples() {
        let rp = fig2();
        let tb = kind(&rp, "TextBox");
        let grp = kind(&rp, "Group");
        assert_eq!(lub_type(&rp, &[tb, tb]).unwrap(), tb);
        assert_eq!(lub_type(&rp, &[tb, grp]).unwrap(), kind(&rp, "Element"));
    }

    #[test]
    fn lub_diamond() {
        // diamond A <= B, A <= C, B <= D, C <= D: lub(B, C) = D
        let src = r#"
            abstract node D { }
            abstract node B : D { }
            abstract node C : D { }
            node A : B, C { }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let b = rp.kind_names["B"];
        let c = rp.kind_names["C"];
        let d = rp.kind_names["D"];
        assert_eq!(lub_type(&rp, &[b, c]).unwrap(), d);
        // exhaustive check over the 4-element order
        for a in 0..4u32 {
            for bb in 0..4u32 {
                let x = KindId(a);
                let y = KindId(bb);
                let uppers: Vec<KindId> = (0..4u32)
                    .map(KindId)
                    .filter(|&u| rp.is_subtype(x, u) && rp.is_subtype(y, u))
                    .collect();
                let minimal: Vec<KindId> = uppers
                    .iter()
                    .copied()
                    .filter(|&u| !uppers.iter().any(|&v| v != u && rp.is_subtype(v, u)))
                    .collect();
                assert_eq!(minimal.len(), 1);
                assert_eq!(lub_type(&rp, &[x, y]).unwrap(), minimal[0]);
            }
        }
    }

    #[test]
    fn ambiguous_lub_is_rejected() {
        let src = r#"
            abstract node P1 { }
            abstract node P2 { }
            node A : P1, P2 { }
            node B : P1, P2 { }
        "#;
        let got = resolve_program(parse_program(src).unwrap());
        assert!(matches!(
            got,
            Err(Error::Resolve {
                kind: crate::error::ResolveKind::AmbiguousLub,
                ..
            })
        ));
    }

    #[test]
    fn cyclic_hierarchy_is_rejected() {
        let src = "node A : B { } node B : A { }";
        assert!(matches!(
            resolve_program(parse_program(src).unwrap()),
            Err(Error::CyclicHierarchy { .. })
        ));
    }

    #[test]
    fn fig2_call_graph_structure() {
        let rp = fig2();
        let element = kind(&rp, "Element");
        let fam = rp.kinds[element.idx()].fams["computeWidth"].0;
        let g = build_labeled_call_graph(&rp, element, fam, Span::default()).unwrap();
        assert_eq!(g.nodes.len(), 3);
        let name = |f: FnId| rp.fn_display(f).to_string();
        let edge_names: Vec<(String, String, String)> = g
            .edges
            .iter()
            .map(|(a, l, b)| {
                let label = match l {
                    CallLabel::SelfCall => "self".to_string(),
                    CallLabel::Child(cf) => rp.child_fields[cf.idx()].name.clone(),
                };
                (name(*a), label, name(*b))
            })
            .collect();
        // TextBox recurses over Next; Group over Content and Next; back edges
        // to every concrete target are present
        for target in [
            "TextBox::computeWidth",
            "Group::computeWidth",
            "Element::computeWidth",
        ] {
            assert!(edge_names.contains(&(
                "TextBox::computeWidth".into(),
                "Next".into(),
                target.into()
            )));
            assert!(edge_names.contains(&(
                "Group::computeWidth".into(),
                "Next".into(),
                target.into()
            )));
            assert!(edge_names.contains(&(
                "Group::computeWidth".into(),
                "Content".into(),
                target.into()
            )));
        }
        assert_eq!(edge_names.len(), 9);
    }

    #[test]
    fn call_graph_of_leaf_body_is_single_node() {
        let src = r#"
            node A { int x; traversal f() { this.x = 1; } }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let a = rp.kind_names["A"];
        let fam = rp.kinds[a.idx()].fams["f"].0;
        let g = build_labeled_call_graph(&rp, a, fam, Span::default()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn mutual_recursion_cycle() {
        let src = r#"
            node A {
                child A C;
                int x;
                traversal f() { this->C->g(); }
                traversal g() { this->C->f(); }
            }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let a = rp.kind_names["A"];
        let fam_f = rp.kinds[a.idx()].fams["f"].0;
        let g = build_labeled_call_graph(&rp, a, fam_f, Span::default()).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 2);
        // both edges labeled with the child field C (reachability closure)
        assert!(g
            .edges
            .iter()
            .all(|(_, l, _)| matches!(l, CallLabel::Child(cf) if rp.child_fields[cf.idx()].name == "C")));
    }
}

#[cfg(test)]
mod random_order_tests {
    use super::*;
    use crate::interp::DeterministicRng;
    use crate::resolve::resolve_program;
    use crate::surface::parse_program;

    /// Random eight-kind hierarchies: lub matches a brute-force minimal
    /// upper bound scan on every pair (ambiguous hierarchies are rejected
    /// at resolution and skipped).
    #[test]
    fn lub_matches_brute_force_on_random_hierarchies() {
        let mut rng = DeterministicRng::seeded(0xBEEF);
        let mut accepted = 0;
        for _ in 0..60 {
            // kinds K0..K7; each may inherit from up to two earlier kinds
            let mut src = String::new();
            for i in 0..8 {
                let mut supers = Vec::new();
                if i > 0 && rng.below(3) > 0 {
                    supers.push(format!("K{}", rng.below(i)));
                }
                if i > 1 && rng.below(4) == 0 {
                    let s = format!("K{}", rng.below(i));
                    if !supers.contains(&s) {
                        supers.push(s);
                    }
                }
                let colon = if supers.is_empty() {
                    String::new()
                } else {
                    format!(" : {}", supers.join(", "))
                };
                src.push_str(&format!("abstract node K{i}{colon} {{ }}\n"));
            }
            let Ok(rp) = resolve_program(parse_program(&src).unwrap()) else {
                continue; // ambiguous minimal upper bounds rejected
            };
            accepted += 1;
            let n = rp.kinds.len();
            for a in 0..n {
                for b in 0..n {
                    let x = KindId(a as u32);
                    let y = KindId(b as u32);
                    let uppers: Vec<KindId> = (0..n)
                        .map(|u| KindId(u as u32))
                        .filter(|&u| rp.is_subtype(x, u) && rp.is_subtype(y, u))
                        .collect();
                    let minimal: Vec<KindId> = uppers
                        .iter()
                        .copied()
                        .filter(|&u| !uppers.iter().any(|&v| v != u && rp.is_subtype(v, u)))
                        .collect();
                    match lub_type(&rp, &[x, y]) {
                        Ok(l) => {
                            assert_eq!(minimal.len(), 1, "{src}");
                            assert_eq!(l, minimal[0], "{src}");
                        }
                        Err(_) => assert!(minimal.is_empty(), "{src}"),
                    }
                }
            }
        }
        assert!(accepted > 20, "too few accepted hierarchies: {accepted}");
    }
}
