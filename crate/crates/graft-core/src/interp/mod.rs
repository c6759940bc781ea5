//! The tree interpreter: runtime trees, seeded generators, the executor, and
//! structural diffing.

pub mod diff;
pub mod exec;
pub mod generate;
pub mod tree;

pub use diff::{diff_states, Difference, TreeView};
pub use exec::{execute, AccessRecord, ExecMetrics, ExecOptions, RunResult};
pub use generate::{materialize_tree, DataCfg, DeterministicRng, TreeSpec};
pub use tree::{Layouts, NodeRef, Tree};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolve::resolve_program;
    use crate::resolved::Value;
    use crate::surface::parse_program;

    fn fig2() -> crate::resolved::RProgram {
        resolve_program(parse_program(include_str!("../../corpus/fig2.tg")).unwrap()).unwrap()
    }

    fn chain_spec(texts: &[&str]) -> TreeSpec {
        // a chain of TextBoxes closed by End, as a literal
        let mut text = String::from("End");
        for t in texts.iter().rev() {
            text = format!("TextBox Text=\"{t}\" {{ Next = {text} }}");
        }
        TreeSpec::Literal { text }
    }

    fn field_value(run: &RunResult, rp: &crate::resolved::RProgram, root: NodeRef, path: &[&str], field: &str) -> Value {
        let mut cur = root;
        for seg in path {
            let node = run.tree.node(cur, Default::default(), "").unwrap();
            let (slot, _) = run.layouts.child_fields_of[node.kind.idx()]
                .iter()
                .enumerate()
                .find(|(_, cf)| rp.child_fields[cf.idx()].name == *seg)
                .map(|(s, c)| (s, c))
                .unwrap();
            cur = node.children[slot].unwrap();
        }
        let node = run.tree.node(cur, Default::default(), "").unwrap();
        let (slot, _) = run.layouts.data_fields_of[node.kind.idx()]
            .iter()
            .enumerate()
            .find(|(_, df)| rp.data_fields[df.idx()].name == field)
            .unwrap();
        node.data[slot].clone()
    }

    /// Hand-evaluated oracle for the two-pass program on the chain
    /// [TextBox "ab", TextBox "cdef", End] with CHAR_WIDTH = 1:
    /// widths 2 and 4, TotalWidth 6 at the head, heights 5 and 17,
    /// MaxHeight 17 on both boxes.
    #[test]
    fn fig2_chain_hand_evaluation() {
        let rp = fig2();
        let spec = chain_spec(&["ab", "cdef"]);
        let run = execute(&rp, Some(&spec), ExecOptions::default()).unwrap();
        let root = run.roots[0];
        assert_eq!(field_value(&run, &rp, root, &[], "Width"), Value::Int(2));
        assert_eq!(field_value(&run, &rp, root, &[], "TotalWidth"), Value::Int(6));
        assert_eq!(field_value(&run, &rp, root, &[], "Height"), Value::Int(5));
        assert_eq!(field_value(&run, &rp, root, &[], "MaxHeight"), Value::Int(17));
        assert_eq!(field_value(&run, &rp, root, &["Next"], "Width"), Value::Int(4));
        assert_eq!(field_value(&run, &rp, root, &["Next"], "TotalWidth"), Value::Int(4));
        assert_eq!(field_value(&run, &rp, root, &["Next"], "Height"), Value::Int(17));
        assert_eq!(field_value(&run, &rp, root, &["Next"], "MaxHeight"), Value::Int(17));
    }

    #[test]
    fn empty_entry_changes_nothing() {
        let src = r#"
            node A { int x; }
            main { tree t = A x=3; }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let run = execute(&rp, None, ExecOptions::default()).unwrap();
        assert_eq!(run.metrics, ExecMetrics::default());
        assert_eq!(
            field_value(&run, &rp, run.roots[0], &[], "x"),
            Value::Int(3)
        );
    }

    #[test]
    fn unfused_visits_on_eleven_node_chain() {
        let rp = fig2();
        let texts: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let run = execute(&rp, Some(&chain_spec(&refs)), ExecOptions::default()).unwrap();
        // 2 traversals x 11 nodes
        assert_eq!(run.metrics.node_visits, 22);
    }

    #[test]
    fn determinism_across_runs() {
        let rp = fig2();
        let spec = TreeSpec::Grow {
            root: "Element".into(),
            size: 30,
            seed: 7,
            data: DataCfg::default(),
        };
        let a = execute(&rp, Some(&spec), ExecOptions::default()).unwrap();
        let b = execute(&rp, Some(&spec), ExecOptions::default()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        let va = TreeView { rp: &rp, layouts: &a.layouts, tree: &a.tree };
        let vb = TreeView { rp: &rp, layouts: &b.layouts, tree: &b.tree };
        assert!(diff_states((&va, a.roots[0]), (&vb, b.roots[0])).is_empty());
        assert_eq!(
            a.tree.dump_hash(&rp, &a.layouts, a.roots[0]),
            b.tree.dump_hash(&rp, &b.layouts, b.roots[0])
        );
    }

    #[test]
    fn diff_is_empty_on_self_and_sees_perturbation() {
        let rp = fig2();
        let spec = chain_spec(&["ab"]);
        let a = execute(&rp, Some(&spec), ExecOptions::default()).unwrap();
        let mut b = execute(&rp, Some(&spec), ExecOptions::default()).unwrap();
        {
            let va = TreeView { rp: &rp, layouts: &a.layouts, tree: &a.tree };
            let vb = TreeView { rp: &rp, layouts: &b.layouts, tree: &b.tree };
            assert!(diff_states((&va, a.roots[0]), (&vb, b.roots[0])).is_empty());
        }
        // perturb one field
        let root = b.roots[0];
        let node = b.tree.node_mut(root, Default::default(), "").unwrap();
        node.data[0] = Value::Int(999);
        let va = TreeView { rp: &rp, layouts: &a.layouts, tree: &a.tree };
        let vb = TreeView { rp: &rp, layouts: &b.layouts, tree: &b.tree };
        let diffs = diff_states((&va, a.roots[0]), (&vb, b.roots[0]));
        assert_eq!(diffs.len(), 1);
    }

    #[test]
    fn grow_respects_declared_kinds_and_size() {
        let rp = fig2();
        let layouts = Layouts::new(&rp);
        let mut tree = Tree::new();
        let spec = TreeSpec::Grow {
            root: "Element".into(),
            size: 50,
            seed: 3,
            data: DataCfg::default(),
        };
        let root =
            materialize_tree(&rp, &layouts, &mut tree, &spec, rp.kind_names["Element"]).unwrap();
        let n = tree.subtree_size(root);
        assert!(n >= 50, "grew {n} nodes");
        // every child slot is filled except on sentinel kinds, and filled
        // slots respect the declared child kind
        fn check(tree: &Tree, rp: &crate::resolved::RProgram, layouts: &Layouts, r: NodeRef) {
            let node = tree.node(r, Default::default(), "").unwrap();
            let sentinel = generate::leaf_like(rp, node.kind);
            for (slot, cf) in layouts.child_fields_of[node.kind.idx()].iter().enumerate() {
                let declared = rp.child_fields[cf.idx()].child_kind;
                match node.children[slot] {
                    None => assert!(sentinel, "empty slot on a non-sentinel kind"),
                    Some(c) => {
                        let ck = tree.node(c, Default::default(), "").unwrap().kind;
                        assert!(rp.is_subtype(ck, declared));
                        check(tree, rp, layouts, c);
                    }
                }
            }
        }
        check(&tree, &rp, &layouts, root);
    }

    #[test]
    fn replicate_builds_a_chain() {
        let rp = fig2();
        let layouts = Layouts::new(&rp);
        let mut tree = Tree::new();
        let spec = TreeSpec::Replicate {
            template: "TextBox Text=\"ab\"".into(),
            count: 10,
            link: "Next".into(),
            tail: "End".into(),
            wrap: None,
            seed: 0,
        };
        let root =
            materialize_tree(&rp, &layouts, &mut tree, &spec, rp.kind_names["Element"]).unwrap();
        assert_eq!(tree.subtree_size(root), 11);
    }

    #[test]
    fn mutation_and_dangling_access() {
        let src = r#"
            abstract node N { virtual traversal f() { } }
            node Cell : N {
                child N Inner;
                int x;
                override traversal f() {
                    delete this->Inner;
                    this->Inner = new Leaf();
                    cast<Leaf>(this->Inner).y = 5;
                }
            }
            node Leaf : N { int y; }
            main {
                tree t = Cell x=1 { Inner = Leaf y=0 };
                t->f();
            }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let run = execute(&rp, None, ExecOptions::default()).unwrap();
        assert_eq!(
            field_value(&run, &rp, run.roots[0], &["Inner"], "y"),
            Value::Int(5)
        );
        // exactly two nodes live: the cell and the fresh leaf
        assert_eq!(run.tree.live_count(), 2);
    }

    #[test]
    fn missing_child_deref_is_a_runtime_error() {
        let src = r#"
            node A { child A C; int x; traversal f() { this.x = this->C.x; } }
            main { tree t = A x=1; t->f(); }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let err = execute(&rp, None, ExecOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::Runtime(e) if e.kind == crate::error::RuntimeKind::MissingChild
        ));
    }

    #[test]
    fn failed_cast_is_a_runtime_error() {
        let src = r#"
            abstract node N { virtual traversal f() { } }
            node A : N { child N C; int x; override traversal f() { this.x = cast<B>(this->C).y; } }
            node B : N { int y; }
            main {
                tree t = A x=0 { C = A x=1 { C = B y=9 } };
                t->f();
            }
        "#;
        let rp = resolve_program(parse_program(src).unwrap()).unwrap();
        let err = execute(&rp, None, ExecOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::Runtime(e) if e.kind == crate::error::RuntimeKind::CastFailed
        ));
    }
}
