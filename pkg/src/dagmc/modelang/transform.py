"""Model-file rewrites: block replication and merging of override files."""

from __future__ import annotations

import copy
from dataclasses import replace

import numpy as np

from ..errors import DataLengthMismatch, DuplicateName, MergeConflict, ReplicateUnknownNode
from . import ast


def rename(expr, mapping):
    """Return ``expr`` with identifiers renamed through ``mapping``."""
    if isinstance(expr, ast.Name):
        new = mapping.get(expr.id)
        return expr if new is None else ast.Name(new, pos=expr.pos)
    if isinstance(expr, ast.Unary):
        return replace(expr, operand=rename(expr.operand, mapping))
    if isinstance(expr, ast.Binary):
        return replace(expr, left=rename(expr.left, mapping), right=rename(expr.right, mapping))
    if isinstance(expr, ast.Cond):
        return replace(expr, test=rename(expr.test, mapping), then=rename(expr.then, mapping),
                       orelse=rename(expr.orelse, mapping))
    if isinstance(expr, ast.Call):
        return replace(expr, args=tuple(rename(a, mapping) for a in expr.args))
    if isinstance(expr, ast.Vector):
        return replace(expr, items=tuple(rename(a, mapping) for a in expr.items))
    if isinstance(expr, ast.Index):
        return replace(expr, target=rename(expr.target, mapping), index=rename(expr.index, mapping))
    return expr


def apply_replications(mf: ast.ModelFile, data=None):
    """Expand ``repeat_block`` directives.

    Parameters
    ----------
    mf : ModelFile
    data : dict, optional
        Node name to 1-D array of bound observations.

    Returns
    -------
    decls : list of NodeDecl
        Declarations with every replicated node ``n`` replaced by copies
        ``n1 .. nK``.  References between nodes of the same replicated
        block follow the copy index; all other references are shared.
    data : dict
        Observations re-keyed so that copy ``ni`` gets the ``i``-th value.
    """
    data = dict(data or {})
    decls = list(mf.nodes.values())
    taken = set(mf.nodes) | set(mf.consts)
    for rep in mf.replications:
        names = {d.name for d in decls}
        for n in rep.block_nodes:
            if n not in names:
                raise ReplicateUnknownNode(f"repeat_block refers to unknown node {n!r}", *(rep.pos or (None, None)))
        count = rep.count
        for n in rep.block_nodes:
            if n in data:
                length = len(data[n])
                if count is None:
                    count = length
                elif count != length:
                    raise DataLengthMismatch(
                        f"repeat_block count {count} but {length} data values bound to {n!r}",
                        *(rep.pos or (None, None)))
        if count is None:
            raise DataLengthMismatch("repeat_block needs a count when no data is bound to its nodes",
                                     *(rep.pos or (None, None)))
        block = set(rep.block_nodes)
        by_name = {d.name: d for d in decls}
        copies = []
        for i in range(1, count + 1):
            mapping = {}
            for n in rep.block_nodes:
                mapping[n] = f"{n}{i}"
                mapping[n + "_"] = f"{n}{i}_"
            for n in rep.block_nodes:
                new_name = mapping[n]
                if new_name in taken:
                    raise DuplicateName(f"replicated name {new_name!r} already exists", *(rep.pos or (None, None)))
                taken.add(new_name)
                d = by_name[n]
                parents = None if d.parents is None else tuple(mapping.get(p, p) for p in d.parents)
                density = d.density
                if density is not None and not isinstance(density, ast.Str):
                    density = rename(density, mapping)
                copies.append(replace(d, name=new_name, parents=parents, density=density))
                if n in data:
                    data[new_name] = np.asarray(data[n], dtype=float)[i - 1:i]
        for n in rep.block_nodes:
            data.pop(n, None)
        first = min(k for k, d in enumerate(decls) if d.name in block)
        kept = [d for d in decls[:first] if d.name not in block]
        tail = [d for d in decls[first:] if d.name not in block]
        decls = kept + copies + tail
    return decls, data


def _merge_node(old: ast.NodeDecl, new: ast.NodeDecl) -> ast.NodeDecl:
    if old.parents is not None and new.parents is not None and tuple(old.parents) != tuple(new.parents):
        raise MergeConflict(f"node {old.name!r} redeclared with parents {list(new.parents)}, "
                            f"previously {list(old.parents)}")
    if old.dim is not None and new.dim is not None and old.dim != new.dim:
        raise MergeConflict(f"node {old.name!r} redeclared with dimension {new.dim}, previously {old.dim}")
    fields = {k: getattr(new, k) for k in ("parents", "density", "init_val", "dim") if getattr(new, k) is not None}
    return replace(old, **fields)


def merge_overrides(base: ast.ModelFile, fragments) -> ast.ModelFile:
    """Layer ``fragments`` over ``base``; later entries win field by field."""
    out = copy.copy(base)
    out.consts = dict(base.consts)
    out.nodes = dict(base.nodes)
    out.data_bindings = dict(base.data_bindings)
    out.replications = list(base.replications)
    out.blocks = list(base.blocks)
    out.params = dict(base.params)
    for frag in fragments:
        for k, v in frag.consts.items():
            if k in out.nodes:
                raise MergeConflict(f"{k!r} is a node and cannot be redefined as a constant")
            out.consts[k] = v
        for k, decl in frag.nodes.items():
            if k in out.consts:
                raise MergeConflict(f"{k!r} is a constant and cannot be redefined as a node")
            out.nodes[k] = _merge_node(out.nodes[k], decl) if k in out.nodes else decl
        out.data_bindings.update(frag.data_bindings)
        for r in frag.replications:
            if r not in out.replications:
                out.replications.append(r)
        for b in frag.blocks:
            if b not in out.blocks:
                out.blocks.append(b)
        if frag.functional is not None:
            out.functional = frag.functional
        out.params.update(frag.params)
    return out
