//! Structural tree comparison. Node identity is structural: two runs may
//! allocate in different interleavings, so construction ids are not compared,
//! only kinds, data values, and slot shapes along matching paths.

use super::tree::{Layouts, NodeRef, Tree};
use crate::resolved::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub path: String,
    pub what: String,
}

pub struct TreeView<'a> {
    pub rp: &'a RProgram,
    pub layouts: &'a Layouts,
    pub tree: &'a Tree,
}

/// Structural and field-value differences between two trees; empty iff the
/// trees are identical up to node-id renaming.
pub fn diff_states(a: (&TreeView, NodeRef), b: (&TreeView, NodeRef)) -> Vec<Difference> {
    let mut out = Vec::new();
    diff_nodes(a.0, a.1, b.0, b.1, &mut String::new(), &mut out);
    out
}

fn diff_nodes(
    va: &TreeView,
    na: NodeRef,
    vb: &TreeView,
    nb: NodeRef,
    path: &mut String,
    out: &mut Vec<Difference>,
) {
    let a = match va.tree.node(na, Default::default(), "") {
        Ok(n) => n,
        Err(_) => {
            out.push(Difference {
                path: path.clone(),
                what: "left node deleted".into(),
            });
            return;
        }
    };
    let b = match vb.tree.node(nb, Default::default(), "") {
        Ok(n) => n,
        Err(_) => {
            out.push(Difference {
                path: path.clone(),
                what: "right node deleted".into(),
            });
            return;
        }
    };
    let ka = va.rp.kind_name(a.kind);
    let kb = vb.rp.kind_name(b.kind);
    if ka != kb {
        out.push(Difference {
            path: path.clone(),
            what: format!("kind {ka} vs {kb}"),
        });
        return;
    }
    // data fields, keyed by (declaring kind, name) so shadowed storage stays
    // distinct
    for (slot, df) in va.layouts.data_fields_of[a.kind.idx()].iter().enumerate() {
        let fa = &va.rp.data_fields[df.idx()];
        let key = (
            va.rp.kind_name(fa.declared_on).to_string(),
            fa.name.clone(),
        );
        let Some((slot_b, _)) = vb.layouts.data_fields_of[b.kind.idx()]
            .iter()
            .enumerate()
            .find(|(_, dfb)| {
                let fb = &vb.rp.data_fields[dfb.idx()];
                vb.rp.kind_name(fb.declared_on) == key.0 && fb.name == key.1
            })
        else {
            out.push(Difference {
                path: path.clone(),
                what: format!("field {}::{} missing on right", key.0, key.1),
            });
            continue;
        };
        let (x, y) = (&a.data[slot], &b.data[slot_b]);
        if !x.identical(y) {
            out.push(Difference {
                path: path.clone(),
                what: format!("field {}::{}: {} vs {}", key.0, key.1, x.display(), y.display()),
            });
        }
    }
    // children, by field name
    for (slot, cf) in va.layouts.child_fields_of[a.kind.idx()].iter().enumerate() {
        let name = &va.rp.child_fields[cf.idx()].name;
        let Some((slot_b, _)) = vb.layouts.child_fields_of[b.kind.idx()]
            .iter()
            .enumerate()
            .find(|(_, cfb)| &vb.rp.child_fields[cfb.idx()].name == name)
        else {
            out.push(Difference {
                path: path.clone(),
                what: format!("child {name} missing on right"),
            });
            continue;
        };
        let ca = a.children[slot];
        let cb = b.children[slot_b];
        let depth = path.len();
        if !path.is_empty() {
            path.push('.');
        }
        path.push_str(name);
        match (ca, cb) {
            (None, None) => {}
            (Some(_), None) => out.push(Difference {
                path: path.clone(),
                what: "right slot empty".into(),
            }),
            (None, Some(_)) => out.push(Difference {
                path: path.clone(),
                what: "left slot empty".into(),
            }),
            (Some(x), Some(y)) => diff_nodes(va, x, vb, y, path, out),
        }
        path.truncate(depth);
    }
}
