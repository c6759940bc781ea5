//! Materialize fusion results as extended-DSL source: fused functions with
//! activity masks, dispatch stubs, and the rewritten entry. The emitted text
//! re-parses and runs directly on the interpreter.

use crate::error::{Error, Result};
use crate::fusion::{EntryOut, FusionResult, FusionUnit, SchedItem, StubFamily};
use crate::resolved::*;
use crate::surface::{self, ast as s};

/// One fused function: guarded statement blocks in schedule order, grouped
/// stub calls with caller-bit maps, and per-part receiver views.
pub fn emit_fused_function(
    rp: &RProgram,
    result: &FusionResult,
    unit: &FusionUnit,
) -> Result<s::FuseDecl> {
    let mut parts = Vec::new();
    for (i, &f) in unit.key.0.iter().enumerate() {
        let rfn = &rp.fns[f.idx()];
        parts.push(s::PartDecl {
            index: i as u32,
            kind: rp.kind_name(rfn.owner).to_string(),
            traversal: rp.families[rfn.family.idx()].name.clone(),
            params: rfn
                .params
                .iter()
                .map(|(ty, name)| s::Param {
                    ty: *ty,
                    name: name.clone(),
                })
                .collect(),
            span: Default::default(),
        });
    }
    let surface_stmt = |v: usize| -> Result<s::Stmt> {
        let m = &unit.merged[v];
        rp.fns[m.fn_id.idx()]
            .surface_body
            .get(m.body_idx)
            .cloned()
            .ok_or_else(|| Error::internal("missing surface statement"))
    };
    let mut items: Vec<s::FuseItem> = Vec::new();
    let mut run: Option<(u32, Vec<s::Stmt>)> = None;
    let flush = |run: &mut Option<(u32, Vec<s::Stmt>)>, items: &mut Vec<s::FuseItem>| {
        if let Some((part, body)) = run.take() {
            items.push(s::FuseItem::Block {
                part,
                body,
                span: Default::default(),
            });
        }
    };
    for item in &unit.schedule {
        match item {
            SchedItem::Vertex(v) => {
                let m = &unit.merged[*v];
                match m.call {
                    Some((None, family)) => {
                        flush(&mut run, &mut items);
                        let s::Stmt::Traverse { args, .. } = surface_stmt(*v)? else {
                            return Err(Error::internal("self-call vertex is not a traverse"));
                        };
                        items.push(s::FuseItem::SelfCall {
                            part: m.origin as u32,
                            traversal: rp.families[family.idx()].name.clone(),
                            args,
                            span: Default::default(),
                        });
                    }
                    Some((Some(_), _)) => {
                        return Err(Error::internal("ungrouped child call in schedule"))
                    }
                    None => {
                        let stmt = surface_stmt(*v)?;
                        match &mut run {
                            Some((part, body)) if *part == m.origin as u32 => body.push(stmt),
                            _ => {
                                flush(&mut run, &mut items);
                                run = Some((m.origin as u32, vec![stmt]));
                            }
                        }
                    }
                }
            }
            SchedItem::Group(gi) => {
                flush(&mut run, &mut items);
                let group = &unit.groups[*gi];
                let stub = &result.stubs[group.stub];
                let mut mask = 0u32;
                let mut flags = Vec::new();
                let mut args = Vec::new();
                for &member in &group.members {
                    let m = &unit.merged[member];
                    mask |= 1 << m.origin;
                    flags.push(m.origin as u32);
                    let s::Stmt::Traverse { args: a, .. } = surface_stmt(member)? else {
                        return Err(Error::internal("group member is not a traverse"));
                    };
                    args.push(a);
                }
                items.push(s::FuseItem::Group {
                    mask,
                    child: rp.child_fields[group.child.idx()].name.clone(),
                    stub: stub.name.clone(),
                    flags,
                    args,
                    span: Default::default(),
                });
            }
        }
    }
    flush(&mut run, &mut items);
    Ok(s::FuseDecl {
        name: unit.name.clone(),
        receiver: rp.kind_name(unit.receiver).to_string(),
        parts,
        items,
        span: Default::default(),
    })
}

/// One dispatch stub per family: an arm per concrete subtype forwarding to
/// that subtype's fused function.
pub fn emit_stubs(rp: &RProgram, result: &FusionResult) -> Vec<s::StubDecl> {
    result
        .stubs
        .iter()
        .map(|stub: &StubFamily| s::StubDecl {
            name: stub.name.clone(),
            receiver: rp.kind_name(stub.base).to_string(),
            arms: stub
                .arms
                .iter()
                .map(|(kind, unit)| {
                    (
                        rp.kind_name(*kind).to_string(),
                        result.units[*unit].name.clone(),
                    )
                })
                .collect(),
            span: Default::default(),
        })
        .collect()
}

/// The whole fused program: original declarations, fused functions, stubs,
/// and the rewritten main.
pub fn emit_program(rp: &RProgram, result: &FusionResult) -> Result<s::Program> {
    let mut items: Vec<s::Item> = Vec::new();
    for item in &rp.surface.items {
        match item {
            s::Item::Main(_) | s::Item::Fuse(_) | s::Item::Stub(_) => {}
            other => items.push(other.clone()),
        }
    }
    for unit in &result.units {
        items.push(s::Item::Fuse(emit_fused_function(rp, result, unit)?));
    }
    for stub in emit_stubs(rp, result) {
        items.push(s::Item::Stub(stub));
    }
    // rewritten main
    let original_binds: Vec<s::Entry> = rp
        .surface
        .main()
        .map(|m| {
            m.entries
                .iter()
                .filter(|e| matches!(e, s::Entry::Bind { .. }))
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    let mut entries = Vec::new();
    for out in &result.entry {
        match out {
            EntryOut::Bind(b) => {
                let bind = original_binds
                    .get(b.idx())
                    .cloned()
                    .ok_or_else(|| Error::internal("missing surface bind"))?;
                entries.push(bind);
            }
            EntryOut::Call {
                binding,
                family,
                surface_args,
                span,
            } => entries.push(s::Entry::Call {
                binding: rp.bindings[binding.idx()].name.clone(),
                traversal: rp.families[family.idx()].name.clone(),
                args: surface_args.clone(),
                span: *span,
            }),
            EntryOut::Stub {
                binding,
                stub,
                mask,
                surface_args,
                span,
            } => entries.push(s::Entry::StubCall {
                binding: rp.bindings[binding.idx()].name.clone(),
                stub: result.stubs[*stub].name.clone(),
                mask: *mask,
                args: surface_args.clone(),
                span: *span,
            }),
        }
    }
    items.push(s::Item::Main(s::MainDecl {
        entries,
        span: Default::default(),
    }));
    Ok(s::Program { items })
}

/// Deterministic re-parseable text of the fused program. The printer itself
/// emits a constituents comment above each fused function, so printing stays
/// idempotent across parse/print round trips.
pub fn pretty_print_program(rp: &RProgram, result: &FusionResult) -> Result<String> {
    let program = emit_program(rp, result)?;
    Ok(surface::print_program(&program))
}
