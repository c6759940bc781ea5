//! End-to-end drivers: load a program, fuse it, emit text, and run the
//! original and fused versions differentially.

use crate::codegen;
use crate::error::Result;
use crate::fusion::{self, FusionConfig, FusionResult};
use crate::interp::{self, diff::TreeView, Difference, ExecMetrics, ExecOptions, TreeSpec};
use crate::resolve::resolve_program;
use crate::resolved::RProgram;
use crate::surface;

/// Parse and resolve: the frontend in one step.
pub fn load_program(src: &str) -> Result<RProgram> {
    resolve_program(surface::parse_program(src)?)
}

/// Fuse and pretty-print; returns the emitted text alongside the result.
pub fn fuse_to_text(rp: &RProgram, config: FusionConfig) -> Result<(String, FusionResult)> {
    let result = fusion::fuse_program(rp, config)?;
    let text = codegen::pretty_print_program(rp, &result)?;
    Ok((text, result))
}

#[derive(Debug)]
pub struct DiffReport {
    /// Per-binding structural differences (empty everywhere on success).
    pub differences: Vec<(String, Vec<Difference>)>,
    pub unfused: ExecMetrics,
    pub fused: ExecMetrics,
    pub multiset_equal: bool,
    pub stats: FusionResult,
}

impl DiffReport {
    pub fn states_identical(&self) -> bool {
        self.differences.iter().all(|(_, d)| d.is_empty())
    }

    pub fn visit_ratio(&self) -> f64 {
        if self.unfused.node_visits == 0 {
            1.0
        } else {
            self.fused.node_visits as f64 / self.unfused.node_visits as f64
        }
    }
}

/// Run original and fused programs on the same tree spec; compare final
/// states and statement multisets.
pub fn diff_run(src: &str, spec: Option<&TreeSpec>, config: FusionConfig) -> Result<DiffReport> {
    let rp = load_program(src)?;
    let (fused_text, result) = fuse_to_text(&rp, config)?;
    let fused_rp = load_program(&fused_text)?;
    diff_programs(&rp, &fused_rp, spec, result)
}

pub fn diff_programs(
    rp: &RProgram,
    fused_rp: &RProgram,
    spec: Option<&TreeSpec>,
    stats: FusionResult,
) -> Result<DiffReport> {
    let a = interp::execute(rp, spec, ExecOptions::default())?;
    let b = interp::execute(fused_rp, spec, ExecOptions::default())?;
    let va = TreeView {
        rp,
        layouts: &a.layouts,
        tree: &a.tree,
    };
    let vb = TreeView {
        rp: fused_rp,
        layouts: &b.layouts,
        tree: &b.tree,
    };
    let mut differences = Vec::new();
    for (i, bind) in rp.bindings.iter().enumerate() {
        let d = interp::diff_states((&va, a.roots[i]), (&vb, b.roots[i]));
        differences.push((bind.name.clone(), d));
    }
    // the multisets are keyed by (fn display, statement text), both stable
    // across the print/reparse boundary
    let to_strings = |m: &std::collections::HashMap<(std::rc::Rc<str>, std::rc::Rc<str>), u64>| {
        let mut v: Vec<(String, String, u64)> = m
            .iter()
            .map(|((f, t), c)| (f.to_string(), t.to_string(), *c))
            .collect();
        v.sort();
        v
    };
    let multiset_equal = to_strings(&a.multiset) == to_strings(&b.multiset);
    Ok(DiffReport {
        differences,
        unfused: a.metrics,
        fused: b.metrics,
        multiset_equal,
        stats,
    })
}

/// Deep recursion headroom: chains of a thousand nodes nest interpreter
/// frames past the default test-thread stack.
pub fn run_with_stack<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> R {
    std::thread::Builder::new()
        .stack_size(256 * 1024 * 1024)
        .spawn(f)
        .expect("spawn worker")
        .join()
        .expect("worker panicked")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = include_str!("../corpus/fig2.tg");

    fn chain_spec(n: usize) -> TreeSpec {
        TreeSpec::Replicate {
            template: "TextBox Text=\"ab\"".into(),
            count: n as u64,
            link: "Next".into(),
            tail: "End".into(),
            wrap: None,
            seed: 0,
        }
    }

    #[test]
    fn fig2_fused_output_reparses_and_prints_idempotently() {
        let rp = load_program(FIG2).unwrap();
        let (text, _) = fuse_to_text(&rp, FusionConfig::default()).unwrap();
        let reparsed = surface::parse_program(&text).unwrap();
        let second = surface::print_program(&reparsed);
        assert_eq!(text, second);
        // and it resolves
        load_program(&text).unwrap();
    }

    #[test]
    fn fig2_differential_equivalence_on_chain() {
        let report = diff_run(FIG2, Some(&chain_spec(10)), FusionConfig::default()).unwrap();
        assert!(report.states_identical(), "{:?}", report.differences);
        assert!(report.multiset_equal);
        assert_eq!(report.unfused.node_visits, 22);
        assert_eq!(report.fused.node_visits, 11);
        assert_eq!(
            report.unfused.simple_statements,
            report.fused.simple_statements
        );
        assert_eq!(report.unfused.guard_checks, 0);
        assert!(report.fused.guard_checks > 0);
    }

    #[test]
    fn fig2_differential_on_grown_trees() {
        for seed in [1u64, 2, 3, 4, 5] {
            let spec = TreeSpec::Grow {
                root: "Element".into(),
                size: 60,
                seed,
                data: Default::default(),
            };
            let report = diff_run(FIG2, Some(&spec), FusionConfig::default()).unwrap();
            assert!(report.states_identical(), "seed {seed}: {:?}", report.differences);
            assert!(report.multiset_equal, "seed {seed}");
            assert!(report.fused.node_visits <= report.unfused.node_visits);
            assert_eq!(
                report.unfused.simple_statements,
                report.fused.simple_statements
            );
        }
    }

    #[test]
    fn identity_fusion_at_seq_len_one_is_equivalent() {
        let config = FusionConfig {
            max_seq_len: 1,
            max_repeat: 3,
        };
        let report = diff_run(FIG2, Some(&chain_spec(6)), config).unwrap();
        assert!(report.states_identical());
        assert!(report.multiset_equal);
        // identity fusion: same number of node visits as the original
        assert_eq!(report.unfused.node_visits, report.fused.node_visits);
    }

    #[test]
    fn fused_textbox_function_has_exactly_one_traverse() {
        let rp = load_program(FIG2).unwrap();
        let (text, result) = fuse_to_text(&rp, FusionConfig::default()).unwrap();
        let unit = result
            .units
            .iter()
            .find(|u| u.key.display(&rp).starts_with("TextBox::computeWidth"))
            .unwrap();
        let fused_rp = load_program(&text).unwrap();
        let rf = fused_rp
            .fuses
            .iter()
            .find(|f| f.name == unit.name)
            .unwrap();
        let group_items = rf
            .items
            .iter()
            .filter(|i| matches!(i, crate::resolved::RFuseItem::Group { .. }))
            .count();
        let self_items = rf
            .items
            .iter()
            .filter(|i| matches!(i, crate::resolved::RFuseItem::SelfCall { .. }))
            .count();
        assert_eq!(group_items + self_items, 1);
    }

    #[test]
    fn conditional_return_truncates_one_constituent_only() {
        // constituent 0 returns on a marker; constituent 1 keeps running
        let src = r#"
            abstract node N {
                child N Next;
                int stop;
                int a;
                int b;
                virtual traversal f() { }
                virtual traversal g() { }
            }
            node Cell : N {
                override traversal f() {
                    if (this.stop == 1) { return; }
                    this.a = this.a + 10;
                    this->Next->f();
                }
                override traversal g() {
                    this.b = this.b + 1;
                    this->Next->g();
                }
            }
            node Stop : N { }
            main {
                tree t : N = input;
                t->f();
                t->g();
            }
        "#;
        let lit = "Cell stop=0 { Next = Cell stop=1 { Next = Cell stop=0 { Next = Stop } } }";
        let spec = TreeSpec::Literal { text: lit.into() };
        let report = diff_run(src, Some(&spec), FusionConfig::default()).unwrap();
        assert!(report.states_identical(), "{:?}", report.differences);
        assert!(report.multiset_equal);
        // g visits all four nodes even though f truncates at the second
        assert!(report.fused.node_visits < report.unfused.node_visits);
    }

    #[test]
    fn shadowed_fields_resolve_per_declaring_kind() {
        // base-owned statements write the base field; derived-owned
        // statements write the shadowing field
        let src = r#"
            abstract node B {
                int V;
                virtual traversal p() { this.V = this.V + 10; }
                virtual traversal q() { }
            }
            node D : B {
                int V;
                override traversal q() { this.V = this.V + 100; }
            }
            main {
                tree t = D;
                t->p();
                t->q();
            }
        "#;
        let report = diff_run(src, None, FusionConfig::default()).unwrap();
        assert!(report.states_identical(), "{:?}", report.differences);
        assert!(report.multiset_equal);
        // check absolute values on the unfused run
        let rp = load_program(src).unwrap();
        let run = interp::execute(&rp, None, ExecOptions::default()).unwrap();
        let node = run.tree.node(run.roots[0], Default::default(), "").unwrap();
        let vals: Vec<(String, String)> = run.layouts.data_fields_of[node.kind.idx()]
            .iter()
            .enumerate()
            .map(|(slot, df)| {
                let f = &rp.data_fields[df.idx()];
                (
                    format!("{}::{}", rp.kind_name(f.declared_on), f.name),
                    node.data[slot].display(),
                )
            })
            .collect();
        assert!(vals.contains(&("B::V".into(), "10".into())), "{vals:?}");
        assert!(vals.contains(&("D::V".into(), "100".into())), "{vals:?}");
    }

    #[test]
    fn self_calls_stay_unfused_but_equivalent() {
        let src = r#"
            abstract node N {
                child N Next;
                int a;
                int b;
                virtual traversal f() { }
                virtual traversal g() { }
                virtual traversal mark() { }
            }
            node Cell : N {
                override traversal f() {
                    this->mark();
                    this->Next->f();
                }
                override traversal g() {
                    this.b = this.b + 1;
                    this->Next->g();
                }
                override traversal mark() { this.a = this.a + 1; }
            }
            node Stop : N { }
            main {
                tree t : N = input;
                t->f();
                t->g();
            }
        "#;
        let spec = TreeSpec::Literal {
            text: "Cell { Next = Cell { Next = Stop } }".into(),
        };
        let report = diff_run(src, Some(&spec), FusionConfig::default()).unwrap();
        assert!(report.states_identical(), "{:?}", report.differences);
        assert!(report.multiset_equal);
    }

    #[test]
    fn mutating_passes_stay_equivalent() {
        // rewrite a child in place between two fused traversals
        let src = r#"
            abstract node N {
                child N Inner;
                int tag;
                int sum;
                virtual traversal rewrite() { }
                virtual traversal total() { }
            }
            node Box : N {
                override traversal rewrite() {
                    if (this.tag == 1) {
                        delete this->Inner;
                        this->Inner = new Leaf();
                        cast<Leaf>(this->Inner).val = 7;
                    }
                    this->Inner->rewrite();
                }
                override traversal total() {
                    this->Inner->total();
                    this.sum = this->Inner.sum + 1;
                }
            }
            node Leaf : N { int val; override traversal total() { this.sum = this.val; } }
            main {
                tree t : N = input;
                t->rewrite();
                t->total();
            }
        "#;
        let spec = TreeSpec::Literal {
            text: "Box tag=1 { Inner = Box tag=0 { Inner = Leaf val=3 } }".into(),
        };
        let report = diff_run(src, Some(&spec), FusionConfig::default()).unwrap();
        assert!(report.states_identical(), "{:?}", report.differences);
        assert!(report.multiset_equal);
    }
}
