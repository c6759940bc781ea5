//! Runtime trees: an arena of nodes with per-kind slot layouts. Deleted
//! subtrees are released immediately; touching them afterwards is an error.

use crate::error::{Error, Result, RuntimeError, RuntimeKind, Span};
use crate::resolved::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef(pub u32);

#[derive(Debug, Clone)]
pub struct Node {
    /// Construction-order identifier (stable within one execution).
    pub ctor_id: u64,
    pub kind: KindId,
    pub data: Vec<Value>,
    pub children: Vec<Option<NodeRef>>,
}

/// Per-kind slot layouts: dense indices for every data field (including
/// shadowed base fields, which keep distinct storage) and child field.
#[derive(Debug, Clone)]
pub struct Layouts {
    data_slot: Vec<Vec<Option<u32>>>,
    child_slot: Vec<Vec<Option<u32>>>,
    pub data_fields_of: Vec<Vec<DataFieldId>>,
    pub child_fields_of: Vec<Vec<ChildFieldId>>,
}

impl Layouts {
    pub fn new(rp: &RProgram) -> Layouts {
        let nk = rp.kinds.len();
        let nd = rp.data_fields.len();
        let nc = rp.child_fields.len();
        let mut data_slot = vec![vec![None; nd]; nk];
        let mut child_slot = vec![vec![None; nc]; nk];
        let mut data_fields_of = vec![Vec::new(); nk];
        let mut child_fields_of = vec![Vec::new(); nk];
        for (k, kind) in rp.kinds.iter().enumerate() {
            for (slot, &df) in kind.data.iter().enumerate() {
                data_slot[k][df.idx()] = Some(slot as u32);
                data_fields_of[k].push(df);
            }
            for (slot, &cf) in kind.children.iter().enumerate() {
                child_slot[k][cf.idx()] = Some(slot as u32);
                child_fields_of[k].push(cf);
            }
        }
        Layouts {
            data_slot,
            child_slot,
            data_fields_of,
            child_fields_of,
        }
    }

    pub fn data_slot(&self, kind: KindId, field: DataFieldId) -> Option<usize> {
        self.data_slot[kind.idx()][field.idx()].map(|s| s as usize)
    }

    pub fn child_slot(&self, kind: KindId, field: ChildFieldId) -> Option<usize> {
        self.child_slot[kind.idx()][field.idx()].map(|s| s as usize)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tree {
    nodes: Vec<Option<Node>>,
    next_ctor_id: u64,
}

impl Tree {
    pub fn new() -> Tree {
        Tree::default()
    }

    pub fn alloc(&mut self, rp: &RProgram, layouts: &Layouts, kind: KindId) -> NodeRef {
        let data = layouts.data_fields_of[kind.idx()]
            .iter()
            .map(|df| Value::default_of(rp.data_fields[df.idx()].ty))
            .collect();
        let children = vec![None; layouts.child_fields_of[kind.idx()].len()];
        let id = self.next_ctor_id;
        self.next_ctor_id += 1;
        self.nodes.push(Some(Node {
            ctor_id: id,
            kind,
            data,
            children,
        }));
        NodeRef((self.nodes.len() - 1) as u32)
    }

    pub fn node(&self, r: NodeRef, span: Span, path: &str) -> Result<&Node> {
        self.nodes[r.0 as usize].as_ref().ok_or_else(|| {
            Error::Runtime(RuntimeError {
                kind: RuntimeKind::DanglingNode,
                span,
                node_path: path.to_string(),
                msg: "access to a deleted node".into(),
            })
        })
    }

    pub fn node_mut(&mut self, r: NodeRef, span: Span, path: &str) -> Result<&mut Node> {
        self.nodes[r.0 as usize].as_mut().ok_or_else(|| {
            Error::Runtime(RuntimeError {
                kind: RuntimeKind::DanglingNode,
                span,
                node_path: path.to_string(),
                msg: "write to a deleted node".into(),
            })
        })
    }

    pub fn is_live(&self, r: NodeRef) -> bool {
        self.nodes[r.0 as usize].is_some()
    }

    /// Release a subtree (iteratively; chains can be deep).
    pub fn free_subtree(&mut self, r: NodeRef) {
        let mut stack = vec![r];
        while let Some(n) = stack.pop() {
            if let Some(node) = self.nodes[n.0 as usize].take() {
                for child in node.children.into_iter().flatten() {
                    stack.push(child);
                }
            }
        }
    }

    pub fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Count of nodes reachable from `root`.
    pub fn subtree_size(&self, root: NodeRef) -> usize {
        let mut count = 0usize;
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if let Some(node) = &self.nodes[n.0 as usize] {
                count += 1;
                for child in node.children.iter().flatten() {
                    stack.push(*child);
                }
            }
        }
        count
    }

    /// Deterministic one-node-per-line dump (child order per declaration).
    pub fn dump(&self, rp: &RProgram, layouts: &Layouts, root: NodeRef) -> String {
        let mut out = String::new();
        self.dump_into(rp, layouts, root, 0, &mut out);
        out
    }

    fn dump_into(
        &self,
        rp: &RProgram,
        layouts: &Layouts,
        r: NodeRef,
        depth: usize,
        out: &mut String,
    ) {
        use std::fmt::Write;
        let Some(node) = &self.nodes[r.0 as usize] else {
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str("<deleted>\n");
            return;
        };
        for _ in 0..depth {
            out.push_str("  ");
        }
        let _ = write!(out, "{}", rp.kind_name(node.kind));
        for (slot, df) in layouts.data_fields_of[node.kind.idx()].iter().enumerate() {
            let f = &rp.data_fields[df.idx()];
            let _ = write!(
                out,
                " {}::{}={}",
                rp.kind_name(f.declared_on),
                f.name,
                node.data[slot].display()
            );
        }
        out.push('\n');
        for (slot, cf) in layouts.child_fields_of[node.kind.idx()].iter().enumerate() {
            let name = &rp.child_fields[cf.idx()].name;
            for _ in 0..depth + 1 {
                out.push_str("  ");
            }
            use std::fmt::Write;
            match node.children[slot] {
                Some(c) => {
                    let _ = writeln!(out, "{name} =");
                    self.dump_into(rp, layouts, c, depth + 2, out);
                }
                None => {
                    let _ = writeln!(out, "{name} = <empty>");
                }
            }
        }
    }

    /// FNV-1a hash of the canonical dump, for determinism checks.
    pub fn dump_hash(&self, rp: &RProgram, layouts: &Layouts, root: NodeRef) -> u64 {
        let text = self.dump(rp, layouts, root);
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}
