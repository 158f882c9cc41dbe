"""Renderers: Graphviz DOT diagrams, fixed-width text tables, YAML summary.

DOT conventions for the data-flow diagram: processes are ellipses,
datastores cylinders, external entities boxes; one ``cluster_<context>``
subgraph per bounded context when clustering is on.  In the architecture
diagram, edge style encodes the protocol: solid for REST/HTTP, dashed for
binary RPC, dotted for the event bus.  Every node carries a ``class``
attribute (``process``, ``service``, ``gateway``...) naming its role.

All renderers are pure and byte-stable; text tables pad with spaces only.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import yaml

from mmsplit.decompose import ContextDecomposition, DecompositionResult
from mmsplit.model import MonolithModel, NodeKind, NodeRef, ValidationReport, canonicalize
from mmsplit.recommend import (
    ACL_NODE,
    AGGREGATOR_CAUTION,
    AGGREGATOR_ROUTING_NOTE,
    GATEWAY_NODE,
    AclDetail,
    AggregatorDetail,
    GatewayRouteDetail,
    Protocol,
    ProtocolDetail,
    Recommendation,
)

__all__ = [
    "OutputFormat",
    "RenderOptions",
    "emit_architecture_dot",
    "emit_dfd_dot",
    "emit_merge_trace",
    "emit_recommendations_text",
    "emit_service_list",
    "emit_summary",
    "emit_validation_text",
    "summary_tree",
]


class OutputFormat(str, Enum):
    DOT = "dot"
    TEXT = "text"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class RenderOptions:
    format: OutputFormat = OutputFormat.TEXT
    include_evidence: bool = False
    cluster_by_context: bool = False


EDGE_STYLE = {
    Protocol.REST_HTTP: "solid",
    Protocol.BINARY_RPC: "dashed",
    Protocol.EVENT_BUS: "dotted",
}

_DFD_SHAPES = {
    NodeKind.PROCESS: 'shape=ellipse, class="process"',
    NodeKind.DATASTORE: 'shape=cylinder, class="datastore"',
    NodeKind.EXTERNAL: 'shape=box, class="external"',
}


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _node(node_id: str, label: str, attrs: str, indent: str = "  ") -> str:
    return f"{indent}{_q(node_id)} [label={_q(label)}, {attrs}];"


def _edge(src: str, dst: str, attrs: str = "", indent: str = "  ") -> str:
    tail = f" [{attrs}]" if attrs else ""
    return f"{indent}{_q(src)} -> {_q(dst)}{tail};"


# ---------------------------------------------------------------------------
# DOT
# ---------------------------------------------------------------------------


def emit_dfd_dot(m: MonolithModel, options: RenderOptions = RenderOptions()) -> str:
    """Data-flow diagram of ``m`` as a DOT digraph."""
    m = canonicalize(m)
    lines = [f"digraph {_q(m.name + ' DFD')} {{", "  rankdir=LR;"]
    for ctx in m.contexts:
        indent = "  "
        if options.cluster_by_context:
            lines.append(f"  subgraph {_q('cluster_' + ctx.id)} {{")
            lines.append(f"    label={_q(ctx.id)};")
            indent = "    "
        names = {p.id: p.display_name for s in ctx.systems for p in s.processes}
        for pid in sorted(names):
            ref = NodeRef(NodeKind.PROCESS, pid, ctx.id)
            lines.append(_node(str(ref), names[pid], _DFD_SHAPES[NodeKind.PROCESS], indent))
        for t in ctx.tables:
            ref = NodeRef(NodeKind.DATASTORE, t.id, ctx.id)
            lines.append(_node(str(ref), t.display_name, _DFD_SHAPES[NodeKind.DATASTORE], indent))
        if options.cluster_by_context:
            lines.append("  }")
    for e in m.external_entities:
        ref = NodeRef(NodeKind.EXTERNAL, e.id)
        lines.append(_node(str(ref), e.display_name, _DFD_SHAPES[NodeKind.EXTERNAL]))
    for f in m.flows:
        lines.append(_edge(str(f.source), str(f.target), f"label={_q(f.label)}" if f.label else ""))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _service_label(cand: Any, include_evidence: bool) -> str:
    if not include_evidence:
        return cand.name
    return f"{cand.name}\n[{', '.join(cand.members)}]"


def emit_architecture_dot(
    r: DecompositionResult, recs: Sequence[Recommendation], options: RenderOptions = RenderOptions()
) -> str:
    """Target architecture: services, gateway, aggregators, ACL, protocol edges."""
    routes = [rec.detail for rec in recs if isinstance(rec.detail, GatewayRouteDetail)]
    aggregators = sorted(
        (rec.detail for rec in recs if isinstance(rec.detail, AggregatorDetail)), key=lambda d: d.name
    )
    acls = sorted((rec.detail for rec in recs if isinstance(rec.detail, AclDetail)), key=lambda d: (d.service, d.legacy_system))
    edges = sorted(
        (rec.detail for rec in recs if isinstance(rec.detail, ProtocolDetail)),
        key=lambda d: (d.source, d.target, d.protocol.value),
    )

    lines = ["digraph \"architecture\" {", "  rankdir=LR;", "  node [shape=box, style=rounded];"]
    if routes or edges:
        lines.append(_node(GATEWAY_NODE, GATEWAY_NODE, 'shape=hexagon, class="gateway"'))
    for cd in r.contexts:
        indent = "  "
        if options.cluster_by_context:
            lines.append(f"  subgraph {_q('cluster_' + cd.context_id)} {{")
            lines.append(f"    label={_q(cd.context_id)};")
            indent = "    "
        for cand in sorted(cd.candidates, key=lambda c: c.name):
            lines.append(_node(cand.name, _service_label(cand, options.include_evidence), 'class="service"', indent))
        if options.cluster_by_context:
            lines.append("  }")
    for agg in aggregators:
        lines.append(_node(agg.name, agg.name, 'style="rounded,bold", class="aggregator"'))
    if acls:
        lines.append(_node(ACL_NODE, ACL_NODE, 'shape=box3d, class="acl"'))
        for legacy in sorted({a.legacy_system for a in acls}):
            lines.append(_node(f"legacy:{legacy}", legacy, 'shape=cylinder, class="legacy"'))

    for d in edges:
        label = d.protocol.value
        if d.events:
            label += ": " + ", ".join(d.events)
        lines.append(_edge(d.source, d.target, f"style={EDGE_STYLE[d.protocol]}, label={_q(label)}"))
    for a in acls:
        lines.append(_edge(a.service, ACL_NODE, 'style=bold, label="legacy call"'))
    for legacy in sorted({a.legacy_system for a in acls}):
        lines.append(_edge(ACL_NODE, f"legacy:{legacy}", "style=bold"))
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Text
# ---------------------------------------------------------------------------


def _table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> list[str]:
    rows = [list(r) for r in rows]
    widths = [max([len(h), *(len(r[i]) for r in rows)]) for i, h in enumerate(header)]

    def fmt(cells: Sequence[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    return [fmt(header), fmt(["-" * w for w in widths]), *(fmt(r) for r in rows)]


def _columns(header: Sequence[str], columns: Sequence[Sequence[str]]) -> list[str]:
    """Render column-major data, shorter columns padded with blanks."""
    depth = max((len(c) for c in columns), default=0)
    rows = [[c[i] if i < len(c) else "" for c in columns] for i in range(depth)]
    return _table(header, rows)


def _context_trace(cd: ContextDecomposition) -> list[str]:
    ctx = cd.context
    lines = [f"== context {ctx.id} ({ctx.display_name}) ==", "", "systems x processes"]
    lines += _columns([s.id for s in ctx.systems], [[p.id for p in s.processes] for s in ctx.systems])
    pids = list(cd.usage)
    lines += ["", "processes x tables"]
    lines += _columns(pids, [sorted(cd.usage[p]) for p in pids])
    lines += ["", "merge evidence"]
    evidence = [ev for evs in cd.graph.edges.values() for ev in evs]
    lines += [str(ev) for ev in evidence] or ["no merges"]
    return lines


def emit_merge_trace(r: DecompositionResult) -> str:
    """Per-context comparison tables and the merge evidence behind each candidate."""
    blocks = ["\n".join(_context_trace(cd)) for cd in r.contexts]
    return "\n\n".join(blocks) + "\n"


def emit_service_list(r: DecompositionResult) -> str:
    rows = [
        (c.context_id, c.name, ", ".join(c.members), ", ".join(c.processes), ", ".join(c.tables))
        for c in r.candidates
    ]
    lines = ["identified services", *_table(["context", "service", "systems", "processes", "tables"], rows)]
    return "\n".join(lines) + "\n"


def _rec_line(rec: Recommendation) -> str:
    d = rec.detail
    if isinstance(d, AggregatorDetail):
        caution = " [caution]" if d.caution else ""
        return f"AGGREGATOR {rec.subject} {d.name} -> {', '.join(d.targets)}{caution}"
    if isinstance(d, GatewayRouteDetail):
        return f"ROUTE {d.path} -> {d.service}"
    if isinstance(d, AclDetail):
        return f"ACL {d.service} -> {d.legacy_system}"
    events = f" [{', '.join(d.events)}]" if d.events else ""
    return f"PROTOCOL {d.source} -> {d.target}: {d.protocol.value} ({d.direction.value}){events}"


def emit_recommendations_text(recs: Sequence[Recommendation]) -> str:
    lines = ["recommendations", *(_rec_line(rec) for rec in recs)]
    if any(isinstance(rec.detail, AggregatorDetail) for rec in recs):
        lines += ["", f"note: {AGGREGATOR_CAUTION}", f"note: {AGGREGATOR_ROUTING_NOTE}"]
    return "\n".join(lines) + "\n"


def emit_validation_text(report: ValidationReport) -> str:
    return "".join(f"{v}\n" for v in report.violations)


# ---------------------------------------------------------------------------
# Structured summary
# ---------------------------------------------------------------------------


def summary_tree(
    m: MonolithModel,
    r: DecompositionResult,
    recs: Sequence[Recommendation] = (),
    options: RenderOptions = RenderOptions(),
) -> dict[str, Any]:
    contexts = []
    for cd in r.contexts:
        services = []
        for c in cd.candidates:
            entry: dict[str, Any] = {
                "name": c.name,
                "members": list(c.members),
                "processes": list(c.processes),
                "tables": list(c.tables),
            }
            if options.include_evidence:
                entry["evidence"] = [
                    {"rule": ev.rule.value, "systems": [ev.left_system, ev.right_system], "witness": ev.witness_text}
                    for ev in c.trace
                ]
            services.append(entry)
        contexts.append({"id": cd.context_id, "services": services})

    def of(kind: type) -> list[Any]:
        return [rec.detail for rec in recs if isinstance(rec.detail, kind)]

    tree: dict[str, Any] = {
        "model": m.name,
        "contexts": contexts,
        "service_count": len(r.candidates),
        "diagnostics": list(r.diagnostics),
    }
    if recs:
        tree["recommendations"] = {
            "aggregators": [
                {"name": d.name, "use_case": rec.subject, "targets": list(d.targets), "caution": d.caution}
                for rec in recs
                if isinstance((d := rec.detail), AggregatorDetail)
            ],
            "gateway_routes": [{"path": d.path, "service": d.service} for d in of(GatewayRouteDetail)],
            "anti_corruption_layers": [{"service": d.service, "legacy_system": d.legacy_system} for d in of(AclDetail)],
            "protocols": [
                {
                    "source": d.source,
                    "target": d.target,
                    "protocol": d.protocol.value,
                    "direction": d.direction.value,
                    "events": list(d.events),
                }
                for d in of(ProtocolDetail)
            ],
        }
        if of(AggregatorDetail):
            tree["notes"] = [AGGREGATOR_CAUTION, AGGREGATOR_ROUTING_NOTE]
    return tree


def emit_summary(
    m: MonolithModel,
    r: DecompositionResult,
    recs: Sequence[Recommendation] = (),
    options: RenderOptions = RenderOptions(),
) -> str:
    """YAML summary of services, recommendations and diagnostics; keys sorted."""
    tree = summary_tree(m, r, recs, options)
    return yaml.safe_dump(tree, sort_keys=True, default_flow_style=False, allow_unicode=True, width=100)
