"""Affinity-graph merging of systems into microservice candidates.

Two systems of one bounded context are joined when they list a common
business process, or when a process of one and a process of the other touch
the same datastore table while sharing no system.  The candidates are the
connected components of that relation, computed per context; contexts never
merge with each other.

The combined "systems and processes" step is this whole pipeline: the
affinity graph applies both combination rules at once and its components are
the fixpoint of repeated pairwise merging (``naive_fixpoint_oracle`` runs the
literal loop for cross-checking).
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum

from mmsplit.model import (
    BoundedContext,
    MonolithModel,
    System,
    ValidationReport,
    canonicalize,
    derive_table_usage,
    validate_model,
)
from mmsplit.unionfind import UnionFind

__all__ = [
    "AffinityGraph",
    "ContextDecomposition",
    "DecompositionResult",
    "MergeEvidence",
    "MergeRule",
    "ServiceCandidate",
    "ValidationFailed",
    "affinity_graph",
    "cross_context_table_collisions",
    "cross_system_shared_tables",
    "decompose",
    "decompose_context",
    "merge_components",
    "naive_fixpoint_oracle",
    "shared_processes",
]

TableUsage = Mapping[tuple[str, str], frozenset[str]]
SharedTable = tuple[str, str, str]


class ValidationFailed(Exception):
    """Raised by :func:`decompose` for a model with rule violations."""

    def __init__(self, report: ValidationReport) -> None:
        self.report = report
        lines = "\n".join(str(v) for v in report.violations)
        super().__init__(f"model has {len(report.violations)} validation violation(s):\n{lines}")


class MergeRule(str, Enum):
    SHARED_PROCESS = "shared_process"
    SHARED_TABLE = "shared_table"


@dataclass(frozen=True)
class MergeEvidence:
    """Why two systems of one context were joined.

    ``witness`` is a process id for ``shared_process`` and a
    ``(process, process, table)`` triple, processes in id order, for
    ``shared_table``.
    """

    rule: MergeRule
    context_id: str
    left_system: str
    right_system: str
    witness: str | SharedTable

    def __post_init__(self) -> None:
        if self.left_system == self.right_system:
            raise ValueError("merge evidence needs two distinct systems")

    @property
    def witness_text(self) -> str:
        if isinstance(self.witness, str):
            return self.witness
        return "(" + ",".join(self.witness) + ")"

    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.left_system, self.right_system, self.rule.value, self.witness_text)

    def __str__(self) -> str:
        return f"MERGE {self.left_system}+{self.right_system} via {self.rule.value}: {self.witness_text}"


@dataclass(frozen=True)
class AffinityGraph:
    context_id: str
    nodes: tuple[str, ...]
    # (a, b) with a < b -> evidence, sorted
    edges: Mapping[tuple[str, str], tuple[MergeEvidence, ...]]


@dataclass(frozen=True)
class ServiceCandidate:
    name: str
    context_id: str
    members: tuple[str, ...]
    processes: tuple[str, ...]
    tables: tuple[str, ...]
    trace: tuple[MergeEvidence, ...]


@dataclass(frozen=True)
class ContextDecomposition:
    """Everything computed for one bounded context."""

    context: BoundedContext
    usage: Mapping[str, frozenset[str]]
    graph: AffinityGraph
    candidates: tuple[ServiceCandidate, ...]

    @property
    def context_id(self) -> str:
        return self.context.id


@dataclass(frozen=True)
class DecompositionResult:
    contexts: tuple[ContextDecomposition, ...]
    diagnostics: tuple[str, ...] = ()

    @property
    def candidates(self) -> tuple[ServiceCandidate, ...]:
        return tuple(c for cd in self.contexts for c in cd.candidates)

    def for_context(self, context_id: str) -> tuple[ServiceCandidate, ...]:
        for cd in self.contexts:
            if cd.context_id == context_id:
                return cd.candidates
        raise KeyError(context_id)

    def service_names(self) -> list[str]:
        return [c.name for c in self.candidates]

    def service(self, name: str) -> ServiceCandidate:
        for c in self.candidates:
            if c.name == name:
                return c
        raise KeyError(name)

    def owner_of(self, context_id: str, system_id: str) -> ServiceCandidate:
        for c in self.for_context(context_id):
            if system_id in c.members:
                return c
        raise KeyError(system_id)


def shared_processes(a: System, b: System) -> set[str]:
    return set(a.process_ids & b.process_ids)


def _usage_of(usage: TableUsage, ctx: BoundedContext, pid: str) -> frozenset[str]:
    return usage.get((ctx.id, pid), frozenset())


def cross_system_shared_tables(ctx: BoundedContext, usage: TableUsage) -> set[SharedTable]:
    """Tables used by two processes that have no system in common."""
    owners = ctx.process_owners()
    found: set[SharedTable] = set()
    for p, q in itertools.combinations(sorted(owners), 2):
        if owners[p] & owners[q]:
            continue
        for table in _usage_of(usage, ctx, p) & _usage_of(usage, ctx, q):
            found.add((p, q, table))
    return found


def affinity_graph(ctx: BoundedContext, usage: TableUsage) -> AffinityGraph:
    edges: dict[tuple[str, str], list[MergeEvidence]] = defaultdict(list)

    def add(a: str, b: str, rule: MergeRule, witness: str | SharedTable) -> None:
        left, right = sorted((a, b))
        edges[(left, right)].append(MergeEvidence(rule, ctx.id, left, right, witness))

    for a, b in itertools.combinations(ctx.systems, 2):
        for pid in sorted(shared_processes(a, b)):
            add(a.id, b.id, MergeRule.SHARED_PROCESS, pid)

    owners = ctx.process_owners()
    for p, q, table in sorted(cross_system_shared_tables(ctx, usage)):
        # owner sets are disjoint here, so every pair is two distinct systems
        for a in sorted(owners[p]):
            for b in sorted(owners[q]):
                add(a, b, MergeRule.SHARED_TABLE, (p, q, table))

    return AffinityGraph(
        context_id=ctx.id,
        nodes=tuple(sorted(s.id for s in ctx.systems)),
        edges={k: tuple(sorted(v, key=MergeEvidence.sort_key)) for k, v in sorted(edges.items())},
    )


def _sorted_partition(groups: Iterable[Iterable[str]]) -> list[list[str]]:
    return sorted((sorted(g) for g in groups), key=lambda g: g[0])


def merge_components(g: AffinityGraph) -> list[list[str]]:
    """Connected components of ``g``, members sorted, groups by smallest member."""
    uf: UnionFind[str] = UnionFind(g.nodes)
    for a, b in g.edges:
        uf.union(a, b)
    return _sorted_partition(uf.groups())


def naive_fixpoint_oracle(ctx: BoundedContext, usage: TableUsage) -> list[list[str]]:
    """Literal repeated pairwise merging, kept as a cross-check.

    Scans system pairs in declaration order, merges the first pair that shares
    a process or has processes sharing a table across system boundaries
    (recomputed on the merged systems), and starts over until nothing merges.
    """
    groups: list[tuple[list[str], set[str]]] = [([s.id], set(s.process_ids)) for s in ctx.systems]

    def share_a_system(p: str, q: str) -> bool:
        return any(p in procs and q in procs for _, procs in groups)

    def mergeable(a: set[str], b: set[str]) -> bool:
        if a & b:
            return True
        for p in a:
            for q in b:
                if _usage_of(usage, ctx, p) & _usage_of(usage, ctx, q) and not share_a_system(p, q):
                    return True
        return False

    merged = True
    while merged:
        merged = False
        for i, j in itertools.combinations(range(len(groups)), 2):
            if mergeable(groups[i][1], groups[j][1]):
                groups[i][0].extend(groups[j][0])
                groups[i][1].update(groups[j][1])
                del groups[j]
                merged = True
                break
    return _sorted_partition(members for members, _ in groups)


def decompose_context(
    ctx: BoundedContext, usage: TableUsage, rename_map: Mapping[frozenset[str], str]
) -> tuple[ServiceCandidate, ...]:
    return _decompose_context(ctx, usage, rename_map).candidates


def _decompose_context(
    ctx: BoundedContext, usage: TableUsage, rename_map: Mapping[frozenset[str], str]
) -> ContextDecomposition:
    graph = affinity_graph(ctx, usage)
    systems = {s.id: s for s in ctx.systems}
    candidates = []
    for members in merge_components(graph):
        name = rename_map.get(frozenset(members)) or f"{systems[members[0]].display_name} Service"
        processes = sorted({p.id for sid in members for p in systems[sid].processes})
        tables = sorted(set().union(*(_usage_of(usage, ctx, pid) for pid in processes)))
        inside = set(members)
        trace = [
            ev
            for (a, b), evidence in graph.edges.items()
            if a in inside and b in inside
            for ev in evidence
        ]
        candidates.append(
            ServiceCandidate(
                name=name,
                context_id=ctx.id,
                members=tuple(members),
                processes=tuple(processes),
                tables=tuple(tables),
                trace=tuple(sorted(trace, key=MergeEvidence.sort_key)),
            )
        )
    local_usage = {pid: _usage_of(usage, ctx, pid) for pid in sorted(ctx.process_owners())}
    return ContextDecomposition(ctx, local_usage, graph, tuple(candidates))


def cross_context_table_collisions(m: MonolithModel) -> list[str]:
    """Notes for table ids declared in more than one context."""
    where: dict[str, set[str]] = defaultdict(set)
    for ctx in m.contexts:
        for t in ctx.tables:
            where[t.id].add(ctx.id)
    return [
        f"table id {tid!r} is declared in contexts {', '.join(sorted(cids))}; "
        "treated as distinct context-local tables"
        for tid, cids in sorted(where.items())
        if len(cids) > 1
    ]


def decompose(m: MonolithModel) -> DecompositionResult:
    """Split every bounded context of ``m`` into service candidates.

    Raises :class:`ValidationFailed` when ``validate_model(m)`` is non-empty.
    Contexts come out in id order and the result does not depend on the
    declaration order inside ``m``.
    """
    report = validate_model(m)
    if not report.ok:
        raise ValidationFailed(report)
    m = canonicalize(m)
    usage = derive_table_usage(m)
    contexts = tuple(_decompose_context(ctx, usage, m.rename_map) for ctx in m.contexts)
    return DecompositionResult(contexts, tuple(cross_context_table_collisions(m)))
