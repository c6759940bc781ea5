//! Cross-module invariants: automata algebra, summary soundness against
//! logged executions, dependence monotonicity, exhaustive reorder checks,
//! and golden structural snapshots.

use graft_core::automata::{
    build_statement_summary, collect_access_paths, conflicts, summarize_stmt, APath, Cat,
    CollectCtx, Label, Nfa, PathSet,
};
use graft_core::corpus;
use graft_core::fusion::{fuse_program, FusionConfig, SchedItem};
use graft_core::interp::{self, execute, ExecOptions, TreeSpec};
use graft_core::pipeline::{diff_programs, fuse_to_text, load_program, run_with_stack};
use graft_core::resolved::{FnId, RProgram, SymId};
use proptest::prelude::*;

fn arb_label(syms: u32) -> impl Strategy<Value = Label> {
    prop_oneof![
        8 => (0..syms).prop_map(|s| Label::Field(SymId(s))),
        1 => Just(Label::Any),
        1 => Just(Label::Eps),
    ]
}

fn arb_nfa(syms: u32) -> impl Strategy<Value = Nfa> {
    (1usize..6, proptest::collection::vec(any::<bool>(), 6))
        .prop_flat_map(move |(n, accepting)| {
            let trans = proptest::collection::vec(
                (0..n, arb_label(syms), 0..n),
                0..12,
            );
            trans.prop_map(move |transitions| {
                let mut nfa = Nfa {
                    n_states: n,
                    initial: 0,
                    accepting: accepting[..n].to_vec(),
                    transitions: Vec::new(),
                };
                for (f, l, t) in transitions {
                    nfa.add_transition(f, l, t);
                }
                nfa
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The early-exit product emptiness agrees with materializing the
    /// intersection and checking it.
    #[test]
    fn lazy_and_materialized_intersection_agree(a in arb_nfa(4), b in arb_nfa(4)) {
        let syms: Vec<SymId> = (0..4).map(SymId).collect();
        let lazy = Nfa::intersects_nonempty(&a.normalize(&syms), &b.normalize(&syms));
        let materialized = !Nfa::intersect(&a, &b, &syms).is_empty();
        prop_assert_eq!(lazy, materialized);
    }

    /// Union accepts exactly what either operand accepts.
    #[test]
    fn union_is_language_union(a in arb_nfa(3), b in arb_nfa(3),
                               input in proptest::collection::vec(0u32..3, 0..6)) {
        let u = Nfa::union(&a, &b);
        let labels: Vec<Label> = input.iter().map(|&s| Label::Field(SymId(s))).collect();
        prop_assert_eq!(u.accepts(&labels), a.accepts(&labels) || b.accepts(&labels));
    }

    /// Normalization (epsilon elimination plus wildcard expansion) preserves
    /// acceptance of concrete field strings.
    #[test]
    fn normalization_preserves_language(a in arb_nfa(3),
                                        input in proptest::collection::vec(0u32..3, 0..6)) {
        let syms: Vec<SymId> = (0..3).map(SymId).collect();
        let n = a.normalize(&syms);
        let labels: Vec<Label> = input.iter().map(|&s| Label::Field(SymId(s))).collect();
        prop_assert_eq!(a.accepts(&labels), n.accepts(&labels));
    }

    /// Minimization preserves acceptance.
    #[test]
    fn minimize_preserves_language(a in arb_nfa(3),
                                   input in proptest::collection::vec(0u32..3, 0..5)) {
        let m = a.minimize();
        let nfa_m = Nfa {
            n_states: m.n_states,
            initial: 0,
            accepting: m.accepting.clone(),
            transitions: m.transitions.clone(),
        };
        let labels: Vec<Label> = input.iter().map(|&s| Label::Field(SymId(s))).collect();
        prop_assert_eq!(a.accepts(&labels), nfa_m.accepts(&labels));
    }
}

fn fn_by_display(rp: &RProgram, display: &str) -> FnId {
    FnId(rp.fns.iter().position(|f| &*f.display == display).unwrap() as u32)
}

/// Conflicts are symmetric in the read/write-exchange sense.
#[test]
fn conflicts_is_symmetric_across_corpus_statements() {
    for entry in corpus::entries() {
        let rp = load_program(entry.source).unwrap();
        let mut summaries = Vec::new();
        for (i, f) in rp.fns.iter().enumerate() {
            let ctx = CollectCtx::for_fn(&rp, FnId(i as u32));
            for stmt in &f.body {
                summaries.push(summarize_stmt(&rp, &ctx, f.owner, stmt).unwrap());
            }
        }
        let take = summaries.len().min(14);
        for i in 0..take {
            for j in 0..take {
                assert_eq!(
                    conflicts(&summaries[i], &summaries[j], true),
                    conflicts(&summaries[j], &summaries[i], true),
                    "{} pair ({i},{j})",
                    entry.name
                );
            }
        }
    }
}

/// Adding a write to a statement's summary never removes dependence edges.
#[test]
fn adding_writes_is_monotone() {
    let rp = load_program(corpus::FIG2).unwrap();
    let f = fn_by_display(&rp, "TextBox::computeWidth");
    let ctx = CollectCtx::for_fn(&rp, f);
    let base_paths = collect_access_paths(&rp, &ctx, &rp.fns[f.idx()].body[1]);
    let other = collect_access_paths(&rp, &ctx, &rp.fns[f.idx()].body[2]);
    let a = build_statement_summary(&rp, &base_paths);
    let b = build_statement_summary(&rp, &other);
    let before = conflicts(&a, &b, true);
    // extend the first statement with an extra write on every field symbol
    for &sym in &rp.alphabet.field_syms {
        let mut extended = base_paths.clone();
        extended.writes.push(APath {
            cat: Cat::Tree,
            segs: vec![sym],
            any_tail: false,
        });
        let a2 = build_statement_summary(&rp, &extended);
        let after = conflicts(&a2, &b, true);
        assert!(
            !before || after,
            "adding a write removed a conflict (sym {})",
            rp.alphabet.name(sym)
        );
    }
    let _: &PathSet = &base_paths;
}

/// Summary soundness: every access the interpreter logs while running the
/// unfused corpus is accepted by the corresponding summary automaton of its
/// enclosing top-level statement.
#[test]
fn logged_accesses_are_accepted_by_summaries() {
    run_with_stack(|| {
        for (name, size) in [("fig2", 25u64), ("render", 40), ("ast", 40), ("partial", 25)] {
            let entry = corpus::by_name(name).unwrap();
            let rp = load_program(entry.source).unwrap();
            let spec = entry.sized_spec(size, 77);
            let run = execute(
                &rp,
                Some(&spec),
                ExecOptions { log_accesses: true },
            )
            .unwrap();
            assert!(!run.access_log.is_empty(), "{name}: nothing logged");
            // summaries per (fn, top-level statement)
            let mut cache: std::collections::HashMap<(u32, usize), _> =
                std::collections::HashMap::new();
            for rec in &run.access_log {
                let key = (rec.fn_id.0, rec.body_idx);
                let summary = cache.entry(key).or_insert_with(|| {
                    let rfn = &rp.fns[rec.fn_id.idx()];
                    let ctx = CollectCtx::for_fn(&rp, rec.fn_id);
                    summarize_stmt(&rp, &ctx, rfn.owner, &rfn.body[rec.body_idx]).unwrap()
                });
                let mut input = Vec::new();
                if rec.cat == Cat::Tree {
                    input.push(Label::Root);
                }
                input.extend(rec.segs.iter().map(|&s| Label::Field(s)));
                let nfa = match (rec.cat, rec.is_write) {
                    (Cat::Tree, false) => &summary.tree_read,
                    (Cat::Tree, true) => &summary.tree_write,
                    (Cat::Global, false) => &summary.global_read,
                    (Cat::Global, true) => &summary.global_write,
                    (Cat::Local, false) => &summary.local_read,
                    (Cat::Local, true) => &summary.local_write,
                };
                assert!(
                    nfa.accepts(&input),
                    "{name}: {} stmt {} does not admit {:?} {:?} {}",
                    rp.fn_display(rec.fn_id),
                    rec.body_idx,
                    rec.cat,
                    rec.is_write,
                    rec.segs
                        .iter()
                        .map(|s| rp.alphabet.name(*s))
                        .collect::<Vec<_>>()
                        .join(".")
                );
            }
        }
    });
}

/// Dynamic dispatch always lands on a declared concrete target.
#[test]
fn concrete_targets_is_exhaustive_under_execution() {
    let rp = load_program(corpus::RENDER).unwrap();
    // statically: for every traverse site and every concrete runtime kind of
    // the receiver, dispatch yields one of the computed targets
    for f in &rp.fns {
        for stmt in &f.body {
            if let graft_core::resolved::RStmtKind::Traverse { child, family, .. } = &stmt.kind {
                let recv = match child {
                    None => f.owner,
                    Some(cf) => rp.child_fields[cf.idx()].child_kind,
                };
                let targets =
                    graft_core::model::concrete_targets(&rp, recv, *family, stmt.span).unwrap();
                for k in rp.concrete_subkinds(recv) {
                    let d = rp.dispatch[k.idx()][family.idx()].unwrap();
                    assert!(targets.iter().any(|(tk, tf)| *tk == k && *tf == d));
                }
            }
        }
    }
}

/// Every topological order of a small unit's dependence graph executes to
/// the same final state (exhaustive, not sampled).
#[test]
fn all_topological_orders_execute_identically() {
    run_with_stack(|| {
        let rp = load_program(corpus::FIG2).unwrap();
        let result = fuse_program(&rp, FusionConfig::default()).unwrap();
        let (tb_idx, tb) = result
            .units
            .iter()
            .enumerate()
            .find(|(_, u)| u.key.display(&rp).starts_with("TextBox::"))
            .unwrap();
        let n = tb.merged.len();
        // clusters: the single group plus the simple vertices
        let group = &tb.groups[0];
        let mut items: Vec<SchedItem> = vec![SchedItem::Group(0)];
        for v in 0..n {
            if !group.members.contains(&v) {
                items.push(SchedItem::Vertex(v));
            }
        }
        // enumerate permutations of the schedule items, keep topological ones
        let spec = corpus::fig2_ten_box_chain();
        let baseline = {
            let (text, _) = fuse_to_text(&rp, FusionConfig::default()).unwrap();
            let fused = load_program(&text).unwrap();
            diff_programs(&rp, &fused, Some(&spec), result.clone()).unwrap();
            text
        };
        let _ = baseline;
        let position_of = |items: &[SchedItem], v: usize| -> usize {
            items
                .iter()
                .position(|it| match it {
                    SchedItem::Vertex(x) => *x == v,
                    SchedItem::Group(_) => group.members.contains(&v),
                })
                .unwrap()
        };
        let mut orders = Vec::new();
        permute(&mut items.clone(), 0, &mut |p| {
            let ok = tb
                .graph
                .edges
                .iter()
                .all(|&(u, v, _)| position_of(p, u) <= position_of(p, v));
            if ok {
                orders.push(p.to_vec());
            }
        });
        assert!(orders.len() > 1, "expected several valid orders");
        for order in orders {
            let variant = result.with_unit_schedule(tb_idx, order);
            let text = graft_core::codegen::pretty_print_program(&rp, &variant).unwrap();
            let fused = load_program(&text).unwrap();
            let rep = diff_programs(&rp, &fused, Some(&spec), variant).unwrap();
            assert!(rep.states_identical() && rep.multiset_equal);
        }
    });
}

fn permute(v: &mut Vec<SchedItem>, k: usize, f: &mut impl FnMut(&[SchedItem])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Every corpus entry stays differentially equivalent across a hundred
/// seeded trees under the default configuration.
#[test]
fn corpus_hundred_tree_equivalence() {
    run_with_stack(|| {
        for name in ["fig2", "partial"] {
            let entry = corpus::by_name(name).unwrap();
            let rp = load_program(entry.source).unwrap();
            let (text, result) = fuse_to_text(&rp, FusionConfig::default()).unwrap();
            let fused = load_program(&text).unwrap();
            for i in 0..100u64 {
                let spec = entry.sized_spec(1 + i * 7, 4000 + i);
                let rep = diff_programs(&rp, &fused, Some(&spec), result.clone()).unwrap();
                assert!(
                    rep.states_identical() && rep.multiset_equal,
                    "{name} seed {i}"
                );
            }
        }
    });
}

/// Structural goldens: fusion shape of the corpus programs and the minimized
/// call-summary automaton of the running example. Comparison is structural
/// (counts and canonical transition lists), not textual.
#[test]
fn golden_structures_are_stable() {
    // fusion shape summary
    let mut shape = String::new();
    for name in ["fig2", "render", "ast", "partial"] {
        let entry = corpus::by_name(name).unwrap();
        let rp = load_program(entry.source).unwrap();
        let result = fuse_program(&rp, FusionConfig::default()).unwrap();
        shape.push_str(&format!(
            "{name}: units {} stubs {} reused {} splits {}\n",
            result.stats.units_created,
            result.stubs.len(),
            result.stats.units_reused,
            result
                .stats
                .per_unit
                .iter()
                .map(|u| u.split_events)
                .sum::<u32>()
        ));
        for u in &result.units {
            let groups: Vec<String> = u
                .groups
                .iter()
                .map(|g| {
                    format!(
                        "{}:{}",
                        rp.child_fields[g.child.idx()].name,
                        g.members.len()
                    )
                })
                .collect();
            shape.push_str(&format!(
                "  {} <- [{}] groups [{}]\n",
                u.name,
                u.key.display(&rp),
                groups.join(", ")
            ));
        }
    }
    let golden = include_str!("golden/fusion_shape.txt");
    assert_eq!(shape, golden, "fusion shape changed; review and update the golden");

    // minimized tree-write automaton of the running example's inner call
    let rp = load_program(corpus::FIG2).unwrap();
    let f = fn_by_display(&rp, "Group::computeWidth");
    let ctx = CollectCtx::for_fn(&rp, f);
    let summary = summarize_stmt(&rp, &ctx, rp.fns[f.idx()].owner, &rp.fns[f.idx()].body[0]).unwrap();
    let structure = summary
        .tree_write
        .minimize()
        .structure_string(&rp.alphabet.names);
    let golden = include_str!("golden/fig2_call_write_automaton.txt");
    assert_eq!(structure, golden, "automaton structure changed; review the golden");
}

/// Regenerating the same spec yields a bit-identical tree (hash-stable).
#[test]
fn generator_determinism_is_hash_stable() {
    let entry = corpus::by_name("render").unwrap();
    let rp = load_program(entry.source).unwrap();
    let spec = corpus::render_page_chain(10, 3);
    let layouts = interp::Layouts::new(&rp);
    let mut t1 = interp::Tree::new();
    let r1 = interp::materialize_tree(&rp, &layouts, &mut t1, &spec, rp.kind_names["Document"])
        .unwrap();
    let mut t2 = interp::Tree::new();
    let r2 = interp::materialize_tree(&rp, &layouts, &mut t2, &spec, rp.kind_names["Document"])
        .unwrap();
    assert_eq!(
        t1.dump_hash(&rp, &layouts, r1),
        t2.dump_hash(&rp, &layouts, r2)
    );
    // grown trees too
    let spec = entry.sized_spec(64, 7);
    let mut t3 = interp::Tree::new();
    let r3 = interp::materialize_tree(&rp, &layouts, &mut t3, &spec, rp.kind_names["Document"])
        .unwrap();
    let mut t4 = interp::Tree::new();
    let r4 = interp::materialize_tree(&rp, &layouts, &mut t4, &spec, rp.kind_names["Document"])
        .unwrap();
    assert_eq!(
        t3.dump_hash(&rp, &layouts, r3),
        t4.dump_hash(&rp, &layouts, r4)
    );
    let _: Option<TreeSpec> = None;
}

/// Identity fusion: the emitted program carries exactly the original
/// statements (one block statement per original simple statement, one group
/// member per original traverse) plus guard/stub scaffolding only.
#[test]
fn identity_fusion_structural_diff() {
    let rp = load_program(corpus::FIG2).unwrap();
    let config = FusionConfig {
        max_seq_len: 1,
        max_repeat: 3,
    };
    let result = fuse_program(&rp, config).unwrap();
    for unit in &result.units {
        assert_eq!(unit.key.0.len(), 1);
        let f = &rp.fns[unit.key.0[0].idx()];
        let original_simple = f
            .body
            .iter()
            .filter(|s| !matches!(s.kind, graft_core::resolved::RStmtKind::Traverse { .. }))
            .count();
        let original_traverse = f.body.len() - original_simple;
        let scheduled_simple = unit
            .schedule
            .iter()
            .filter(|s| matches!(s, SchedItem::Vertex(v) if unit.merged[*v].call.is_none()))
            .count();
        let grouped: usize = unit.groups.iter().map(|g| g.members.len()).sum();
        assert_eq!(scheduled_simple, original_simple, "{}", unit.name);
        assert_eq!(grouped, original_traverse, "{}", unit.name);
    }
}

/// Printing the fused output of every corpus program is idempotent and the
/// text reloads cleanly.
#[test]
fn fused_corpus_outputs_reparse_and_print_idempotently() {
    for entry in corpus::entries() {
        let rp = load_program(entry.source).unwrap();
        let (text, _) = fuse_to_text(&rp, FusionConfig::default()).unwrap();
        let reparsed = graft_core::surface::parse_program(&text).unwrap();
        let second = graft_core::surface::print_program(&reparsed);
        assert_eq!(text, second, "{} print not idempotent", entry.name);
        load_program(&text).unwrap_or_else(|e| panic!("{}: {e}", entry.name));
    }
}
