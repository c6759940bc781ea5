//! Tree materialization: literals, seeded random growth respecting declared
//! child kinds, and replicated-template chains. Generation is a pure function
//! of (spec, seed).

use super::tree::{Layouts, NodeRef, Tree};
use crate::error::{Error, Result};
use crate::resolved::*;
use crate::surface::{self, TreeLit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// xorshift64: platform-stable, hash-stable.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicRng {
    state: u64,
}

impl DeterministicRng {
    pub fn seeded(seed: u64) -> Self {
        let state = if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed };
        DeterministicRng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.state = x;
        x
    }

    pub fn below(&mut self, n: u64) -> u64 {
        if n == 0 {
            0
        } else {
            self.next_u64() % n
        }
    }

    pub fn in_range(&mut self, lo: i64, hi: i64) -> i64 {
        if hi <= lo {
            return lo;
        }
        lo + (self.below((hi - lo + 1) as u64) as i64)
    }
}

fn default_int_range() -> (i64, i64) {
    (0, 7)
}

fn default_string_pool() -> Vec<String> {
    ["a", "ab", "abc", "abcd"].map(String::from).to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataCfg {
    /// Per-field integer ranges (inclusive), by field name.
    #[serde(default)]
    pub ints: BTreeMap<String, (i64, i64)>,
    #[serde(default = "default_int_range")]
    pub int_range: (i64, i64),
    /// Per-field string pools, by field name.
    #[serde(default)]
    pub strings: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_string_pool")]
    pub string_pool: Vec<String>,
}

impl Default for DataCfg {
    fn default() -> Self {
        DataCfg {
            ints: BTreeMap::new(),
            int_range: default_int_range(),
            strings: BTreeMap::new(),
            string_pool: default_string_pool(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSpec {
    /// A tree literal in the `.tg` literal syntax.
    Literal { text: String },
    /// Random growth from `root`, steering toward `size` nodes.
    Grow {
        root: String,
        size: u64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        data: DataCfg,
    },
    /// `count` copies of a template linked through child `link`, closed by a
    /// fresh `tail` node; `wrap` optionally embeds the chain at the `@` hole
    /// of an enclosing literal.
    Replicate {
        template: String,
        count: u64,
        link: String,
        tail: String,
        #[serde(default)]
        wrap: Option<String>,
        #[serde(default)]
        seed: u64,
    },
}

impl TreeSpec {
    pub fn from_json(text: &str) -> Result<TreeSpec> {
        serde_json::from_str(text).map_err(|e| Error::TreeSpec { msg: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// Replace the seed (used by seeded sweeps).
    pub fn with_seed(&self, new_seed: u64) -> TreeSpec {
        let mut spec = self.clone();
        match &mut spec {
            TreeSpec::Literal { .. } => {}
            TreeSpec::Grow { seed, .. } => *seed = new_seed,
            TreeSpec::Replicate { seed, .. } => *seed = new_seed,
        }
        spec
    }
}

/// Materialize a spec into the arena; the result must be a concrete subtype
/// of `expected` (the binding's declared kind).
pub fn materialize_tree(
    rp: &RProgram,
    layouts: &Layouts,
    tree: &mut Tree,
    spec: &TreeSpec,
    expected: KindId,
) -> Result<NodeRef> {
    let root = match spec {
        TreeSpec::Literal { text } => {
            let lit = surface::parse_tree_literal(text)?;
            materialize_literal(rp, layouts, tree, &lit)?
        }
        TreeSpec::Grow {
            root, size, seed, data,
        } => {
            let kind = lookup_kind(rp, root)?;
            let mut rng = DeterministicRng::seeded(*seed);
            let min_sizes = min_completion_sizes(rp);
            let mut budget = *size as i64;
            grow(rp, layouts, tree, kind, &mut budget, &mut rng, data, &min_sizes)?
        }
        TreeSpec::Replicate {
            template,
            count,
            link,
            tail,
            wrap,
            seed,
        } => {
            let _ = seed;
            let tpl = surface::parse_tree_literal(template)?;
            let tpl_kind = lookup_kind(rp, &tpl.kind)?;
            let link_field = rp.kinds[tpl_kind.idx()]
                .child_lookup
                .get(link)
                .copied()
                .ok_or_else(|| Error::KindMismatch {
                    expected: format!("child field `{link}`"),
                    found: tpl.kind.clone(),
                    context: "replicate link".into(),
                })?;
            let tail_kind = lookup_kind(rp, tail)?;
            if rp.kinds[tail_kind.idx()].is_abstract {
                return Err(Error::KindMismatch {
                    expected: "a concrete tail kind".into(),
                    found: tail.clone(),
                    context: "replicate tail".into(),
                });
            }
            let mut chain = tree.alloc(rp, layouts, tail_kind);
            for _ in 0..*count {
                let copy = materialize_literal(rp, layouts, tree, &tpl)?;
                let slot = layouts
                    .child_slot(tpl_kind, link_field)
                    .ok_or_else(|| Error::internal("replicate link slot"))?;
                tree.node_mut(copy, Default::default(), "")?.children[slot] = Some(chain);
                chain = copy;
            }
            match wrap {
                None => chain,
                Some(w) => {
                    let lit = surface::parse_tree_literal(&w.replace('@', "Hole"))?;
                    let _ = lit;
                    materialize_wrap(rp, layouts, tree, w, chain)?
                }
            }
        }
    };
    let got = tree.node(root, Default::default(), "")?.kind;
    if !rp.is_subtype(got, expected) {
        return Err(Error::KindMismatch {
            expected: rp.kind_name(expected).to_string(),
            found: rp.kind_name(got).to_string(),
            context: "tree spec root".into(),
        });
    }
    Ok(root)
}

fn lookup_kind(rp: &RProgram, name: &str) -> Result<KindId> {
    rp.kind_names.get(name).copied().ok_or_else(|| Error::KindMismatch {
        expected: "a declared node kind".into(),
        found: name.to_string(),
        context: "tree spec".into(),
    })
}

pub fn materialize_literal(
    rp: &RProgram,
    layouts: &Layouts,
    tree: &mut Tree,
    lit: &TreeLit,
) -> Result<NodeRef> {
    let kind = lookup_kind(rp, &lit.kind)?;
    if rp.kinds[kind.idx()].is_abstract {
        return Err(Error::KindMismatch {
            expected: "a concrete kind".into(),
            found: lit.kind.clone(),
            context: "tree literal".into(),
        });
    }
    let node = tree.alloc(rp, layouts, kind);
    for (fname, value) in &lit.data {
        let Some(DataLookup::Unique(df)) = rp.kinds[kind.idx()].data_lookup.get(fname) else {
            return Err(Error::KindMismatch {
                expected: format!("data field on {}", lit.kind),
                found: fname.clone(),
                context: "tree literal".into(),
            });
        };
        let v = Value::from_lit(value);
        if v.ty() != rp.data_fields[df.idx()].ty {
            return Err(Error::KindMismatch {
                expected: rp.data_fields[df.idx()].ty.name().into(),
                found: v.ty().name().into(),
                context: format!("literal field {fname}"),
            });
        }
        let slot = layouts.data_slot(kind, *df).unwrap();
        tree.node_mut(node, Default::default(), "")?.data[slot] = v;
    }
    for (cname, clit) in &lit.children {
        let Some(&cf) = rp.kinds[kind.idx()].child_lookup.get(cname) else {
            return Err(Error::KindMismatch {
                expected: format!("child field on {}", lit.kind),
                found: cname.clone(),
                context: "tree literal".into(),
            });
        };
        let child = materialize_literal(rp, layouts, tree, clit)?;
        let ck = tree.node(child, Default::default(), "")?.kind;
        if !rp.is_subtype(ck, rp.child_fields[cf.idx()].child_kind) {
            return Err(Error::KindMismatch {
                expected: rp.kind_name(rp.child_fields[cf.idx()].child_kind).to_string(),
                found: rp.kind_name(ck).to_string(),
                context: format!("literal child {cname}"),
            });
        }
        let slot = layouts.child_slot(kind, cf).unwrap();
        tree.node_mut(node, Default::default(), "")?.children[slot] = Some(child);
    }
    Ok(node)
}

/// A kind is leaf-like when no traversal body dispatched on it can touch a
/// child slot: sentinel kinds (chain terminators, empty bases). Their slots
/// may stay empty, which is what closes recursive shapes. Programs that
/// reach *through* a leaf-like node's slot from a parent would fault at
/// runtime; the shipped corpora only use single-step child accesses.
pub fn leaf_like(rp: &RProgram, kind: KindId) -> bool {
    fn node_path_steps(p: &RNodePath) -> bool {
        let base = match &p.base {
            RNodeBase::Cast { inner, .. } => node_path_steps(inner),
            _ => false,
        };
        base || !p.steps.is_empty()
    }
    fn access_steps(a: &RAccess) -> bool {
        match a {
            RAccess::OnTree { node, .. } => node_path_steps(node),
            _ => false,
        }
    }
    fn expr_steps(e: &RExpr) -> bool {
        match &e.kind {
            RExprKind::Lit(_) => false,
            RExprKind::Access(a) => access_steps(a),
            RExprKind::Unary { expr, .. } => expr_steps(expr),
            RExprKind::Binary { lhs, rhs, .. } => expr_steps(lhs) || expr_steps(rhs),
            RExprKind::Pure { args, .. } => args.iter().any(expr_steps),
        }
    }
    fn stmt_touches_children(s: &RStmt) -> bool {
        match &s.kind {
            RStmtKind::Assign { target, value } => access_steps(target) || expr_steps(value),
            RStmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                expr_steps(cond)
                    || then_body.iter().chain(else_body).any(stmt_touches_children)
            }
            RStmtKind::Local { init, .. } => init.as_ref().is_some_and(expr_steps),
            RStmtKind::Alias { .. } => true,
            RStmtKind::New { .. } | RStmtKind::Delete { .. } => true,
            RStmtKind::PureCall { args, .. } => args.iter().any(expr_steps),
            RStmtKind::Return => false,
            RStmtKind::Traverse { child, args, .. } => {
                child.is_some() || args.iter().any(expr_steps)
            }
        }
    }
    rp.kinds[kind.idx()].fams.values().all(|&(_, f)| {
        rp.fns[f.idx()].body.iter().all(|s| !stmt_touches_children(s))
    })
}

/// Minimum nodes needed to complete a tree rooted at each concrete kind
/// (fixpoint; `u64::MAX` marks kinds with no finite completion). Leaf-like
/// kinds complete with a single node regardless of declared slots.
fn min_completion_sizes(rp: &RProgram) -> Vec<u64> {
    let n = rp.kinds.len();
    let mut min = vec![u64::MAX; n];
    for &k in &rp.concrete {
        if leaf_like(rp, k) {
            min[k.idx()] = 1;
        }
    }
    loop {
        let mut changed = false;
        for &k in &rp.concrete {
            let mut total: u64 = 1;
            let mut ok = true;
            for &cf in &rp.kinds[k.idx()].children {
                let declared = rp.child_fields[cf.idx()].child_kind;
                let best = rp
                    .concrete
                    .iter()
                    .filter(|&&c| rp.is_subtype(c, declared))
                    .map(|&c| min[c.idx()])
                    .min()
                    .unwrap_or(u64::MAX);
                if best == u64::MAX {
                    ok = false;
                    break;
                }
                total = total.saturating_add(best);
            }
            if ok && total < min[k.idx()] {
                min[k.idx()] = total;
                changed = true;
            }
        }
        if !changed {
            return min;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    rp: &RProgram,
    layouts: &Layouts,
    tree: &mut Tree,
    declared: KindId,
    budget: &mut i64,
    rng: &mut DeterministicRng,
    cfg: &DataCfg,
    min_sizes: &[u64],
) -> Result<NodeRef> {
    let candidates: Vec<KindId> = rp
        .concrete
        .iter()
        .copied()
        .filter(|&c| rp.is_subtype(c, declared) && min_sizes[c.idx()] != u64::MAX)
        .collect();
    if candidates.is_empty() {
        return Err(Error::KindMismatch {
            expected: "a concrete kind with a finite completion".into(),
            found: rp.kind_name(declared).to_string(),
            context: "grow".into(),
        });
    }
    let kind = if *budget <= 0 {
        // out of budget: cheapest completion, first on ties
        *candidates
            .iter()
            .min_by_key(|&&c| min_sizes[c.idx()])
            .unwrap()
    } else {
        // steer toward kinds that keep growing while budget remains
        let growers: Vec<KindId> = candidates
            .iter()
            .copied()
            .filter(|&c| !leaf_like(rp, c))
            .collect();
        if growers.is_empty() {
            candidates[rng.below(candidates.len() as u64) as usize]
        } else {
            growers[rng.below(growers.len() as u64) as usize]
        }
    };
    *budget -= 1;
    let node = tree.alloc(rp, layouts, kind);
    // data fields
    for (slot, df) in layouts.data_fields_of[kind.idx()].iter().enumerate() {
        let f = &rp.data_fields[df.idx()];
        let v = match f.ty {
            Ty::Int => {
                let (lo, hi) = cfg.ints.get(&f.name).copied().unwrap_or(cfg.int_range);
                Value::Int(rng.in_range(lo, hi))
            }
            Ty::Float => Value::Float(rng.in_range(0, 8) as f64),
            Ty::Bool => Value::Bool(rng.below(2) == 1),
            Ty::Str => {
                let pool = cfg.strings.get(&f.name).unwrap_or(&cfg.string_pool);
                if pool.is_empty() {
                    Value::Str(std::rc::Rc::from(""))
                } else {
                    Value::Str(std::rc::Rc::from(
                        pool[rng.below(pool.len() as u64) as usize].as_str(),
                    ))
                }
            }
        };
        tree.node_mut(node, Default::default(), "")?.data[slot] = v;
    }
    // child slots stay empty on leaf-like kinds and are filled otherwise
    if !leaf_like(rp, kind) {
        let child_fields = layouts.child_fields_of[kind.idx()].clone();
        for (slot, cf) in child_fields.iter().enumerate() {
            let declared = rp.child_fields[cf.idx()].child_kind;
            let child = grow(rp, layouts, tree, declared, budget, rng, cfg, min_sizes)?;
            tree.node_mut(node, Default::default(), "")?.children[slot] = Some(child);
        }
    }
    Ok(node)
}

/// Wrap literal with a `@` hole: the hole child receives the chain.
fn materialize_wrap(
    rp: &RProgram,
    layouts: &Layouts,
    tree: &mut Tree,
    wrap: &str,
    chain: NodeRef,
) -> Result<NodeRef> {
    // The hole is written `Field = @`; splice by building the literal minus
    // the hole child and assigning the chain into that slot.
    let hole_marker = "@";
    let Some(pos) = wrap.find(hole_marker) else {
        return Err(Error::TreeSpec {
            msg: "replicate wrap needs a `@` hole".into(),
        });
    };
    // parse the wrap with the hole replaced by a placeholder of the chain's
    // kind; then overwrite that child slot with the chain
    let chain_kind = tree.node(chain, Default::default(), "")?.kind;
    let placeholder = rp.kind_name(chain_kind).to_string();
    let patched = format!("{}{}{}", &wrap[..pos], placeholder, &wrap[pos + 1..]);
    let lit = surface::parse_tree_literal(&patched)?;
    let root = materialize_literal(rp, layouts, tree, &lit)?;
    // find the placeholder node: walk the literal and the materialized tree
    // in lockstep along the path to the hole
    let mut hole_path: Vec<String> = Vec::new();
    fn find_hole(lit: &TreeLit, pos_line: &str, path: &mut Vec<String>) -> bool {
        for (cname, clit) in &lit.children {
            if clit.kind == pos_line && clit.children.is_empty() && clit.data.is_empty() {
                path.push(cname.clone());
                return true;
            }
            path.push(cname.clone());
            if find_hole(clit, pos_line, path) {
                return true;
            }
            path.pop();
        }
        false
    }
    if !find_hole(&lit, &placeholder, &mut hole_path) {
        return Err(Error::TreeSpec {
            msg: "could not locate the wrap hole".into(),
        });
    }
    // walk down and replace
    let mut cur = root;
    for (i, seg) in hole_path.iter().enumerate() {
        let node = tree.node(cur, Default::default(), "")?;
        let kind = node.kind;
        let cf = rp.kinds[kind.idx()].child_lookup[seg];
        let slot = layouts.child_slot(kind, cf).unwrap();
        if i + 1 == hole_path.len() {
            let old = tree.node(cur, Default::default(), "")?.children[slot];
            if let Some(old) = old {
                tree.free_subtree(old);
            }
            tree.node_mut(cur, Default::default(), "")?.children[slot] = Some(chain);
        } else {
            cur = tree.node(cur, Default::default(), "")?.children[slot].ok_or_else(|| {
                Error::TreeSpec {
                    msg: "wrap hole path crosses an empty slot".into(),
                }
            })?;
        }
    }
    Ok(root)
}
