"""Domain types, model-document parsing, canonical ordering and DFD validation.

A model document is YAML with the top-level keys ``name``, ``contexts``,
``external_entities``, ``flows``, ``use_cases``, ``rename_map`` and
``legacy_systems``.  Flow endpoints are written as compact references::

    process:<context-id>/<process-id>
    datastore:<context-id>/<table-id>
    external:<entity-id>
"""

from __future__ import annotations

import dataclasses
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any

import yaml

__all__ = [
    "BoundedContext",
    "BusinessProcess",
    "DataFlow",
    "DatastoreTable",
    "DuplicateIdError",
    "EventFlow",
    "ExternalEntity",
    "ModelError",
    "ModelSyntaxError",
    "MonolithModel",
    "NodeKind",
    "NodeRef",
    "SchemaError",
    "System",
    "SystemKind",
    "UnresolvedReferenceError",
    "UseCase",
    "ValidationReport",
    "Violation",
    "canonicalize",
    "derive_table_usage",
    "model_to_dict",
    "parse_model",
    "serialize_model",
    "validate_model",
]

TOP_LEVEL_KEYS = (
    "name",
    "contexts",
    "external_entities",
    "flows",
    "use_cases",
    "rename_map",
    "legacy_systems",
)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class ModelError(Exception):
    """Base class for documents that cannot be turned into a model."""

    code = "model error"

    def __init__(self, message: str) -> None:
        super().__init__(f"{self.code}: {message}")
        self.detail = message


class ModelSyntaxError(ModelError):
    code = "syntax error"

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class SchemaError(ModelError):
    """Well-formed YAML that does not follow the model document layout."""

    code = "schema error"


class UnresolvedReferenceError(ModelError):
    code = "unresolved reference"


class DuplicateIdError(ModelError):
    code = "duplicate id"


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class SystemKind(str, Enum):
    ENTITY = "entity"
    AGGREGATE = "aggregate"
    DOMAIN_SERVICE = "domain_service"


class NodeKind(str, Enum):
    PROCESS = "process"
    DATASTORE = "datastore"
    EXTERNAL = "external"


@dataclass(frozen=True)
class NodeRef:
    """One endpoint of a data flow."""

    kind: NodeKind
    id: str
    context_id: str | None = None

    def __str__(self) -> str:
        if self.kind is NodeKind.EXTERNAL:
            return f"external:{self.id}"
        return f"{self.kind.value}:{self.context_id}/{self.id}"

    @classmethod
    def parse(cls, text: str) -> NodeRef:
        kind_text, sep, rest = text.partition(":")
        try:
            kind = NodeKind(kind_text)
        except ValueError:
            raise SchemaError(f"bad node reference {text!r}: unknown kind {kind_text!r}") from None
        if not sep or not rest:
            raise SchemaError(f"bad node reference {text!r}")
        if kind is NodeKind.EXTERNAL:
            if "/" in rest:
                raise SchemaError(f"bad node reference {text!r}: external entities have no context")
            return cls(kind, rest)
        context_id, slash, node_id = rest.partition("/")
        if not slash or not context_id or not node_id:
            raise SchemaError(f"bad node reference {text!r}: expected {kind.value}:<context>/<id>")
        return cls(kind, node_id, context_id)


@dataclass(frozen=True)
class DatastoreTable:
    id: str
    display_name: str


@dataclass(frozen=True)
class BusinessProcess:
    id: str
    display_name: str
    declared_tables: frozenset[str] = frozenset()


@dataclass(frozen=True)
class System:
    id: str
    display_name: str
    kind: SystemKind
    processes: tuple[BusinessProcess, ...]

    @property
    def process_ids(self) -> frozenset[str]:
        return frozenset(p.id for p in self.processes)


@dataclass(frozen=True)
class BoundedContext:
    id: str
    display_name: str
    systems: tuple[System, ...]
    tables: tuple[DatastoreTable, ...]

    def system(self, system_id: str) -> System:
        for s in self.systems:
            if s.id == system_id:
                return s
        raise KeyError(system_id)

    @property
    def table_ids(self) -> frozenset[str]:
        return frozenset(t.id for t in self.tables)

    def process_owners(self) -> dict[str, frozenset[str]]:
        """Map each process id to the ids of the systems that list it."""
        owners: dict[str, set[str]] = defaultdict(set)
        for s in self.systems:
            for p in s.processes:
                owners[p.id].add(s.id)
        return {pid: frozenset(sids) for pid, sids in owners.items()}

    def process_ids(self) -> list[str]:
        """Distinct process ids, first-seen order."""
        return list(dict.fromkeys(p.id for s in self.systems for p in s.processes))


@dataclass(frozen=True)
class ExternalEntity:
    id: str
    display_name: str


@dataclass(frozen=True)
class DataFlow:
    source: NodeRef
    target: NodeRef
    label: str = ""

    def sort_key(self) -> tuple[str, str, str]:
        return (str(self.source), str(self.target), self.label)


@dataclass(frozen=True)
class EventFlow:
    source_context: str
    target_context: str
    event: str


@dataclass(frozen=True)
class UseCase:
    id: str
    description: str
    touches: tuple[str, ...]
    needs_legacy: bool = False
    event_flows: tuple[EventFlow, ...] = ()


@dataclass(frozen=True)
class MonolithModel:
    name: str
    contexts: tuple[BoundedContext, ...]
    external_entities: tuple[ExternalEntity, ...] = ()
    use_cases: tuple[UseCase, ...] = ()
    flows: tuple[DataFlow, ...] = ()
    # sorted member-id set -> service name
    rename_map: Mapping[frozenset[str], str] = field(default_factory=lambda: MappingProxyType({}))
    legacy_systems: frozenset[str] = frozenset()

    def context(self, context_id: str) -> BoundedContext:
        for c in self.contexts:
            if c.id == context_id:
                return c
        raise KeyError(context_id)


@dataclass(frozen=True)
class Violation:
    rule: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule} {self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _expect(value: Any, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(f"{where}: expected {names}, got {type(value).__name__}")
    return value


def _get(raw: Mapping[str, Any], key: str, where: str, default: Any = ..., kind: type | None = None) -> Any:
    if key not in raw or raw[key] is None:
        if default is ...:
            raise SchemaError(f"{where}: missing required key {key!r}")
        return default
    value = raw[key]
    if kind is not None:
        _expect(value, kind, f"{where}.{key}")
    return value


def _ident(raw: Mapping[str, Any], where: str) -> str:
    value = _get(raw, "id", where)
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{where}: id must be a non-empty string")
    if any(ch in value for ch in ":/"):
        raise SchemaError(f"{where}: id {value!r} may not contain ':' or '/'")
    return value


def _items(raw: Mapping[str, Any], key: str, where: str) -> list[Any]:
    return list(_get(raw, key, where, default=[], kind=list))


def _check_unique(ids: Iterable[str], what: str) -> None:
    dupes = sorted(i for i, n in Counter(ids).items() if n > 1)
    if dupes:
        raise DuplicateIdError(f"{what} id {dupes[0]!r} declared more than once")


def _parse_process(raw: Any, where: str, table_ids: frozenset[str]) -> BusinessProcess:
    _expect(raw, dict, where)
    pid = _ident(raw, where)
    tables = _get(raw, "tables", f"{where}/{pid}", default=[], kind=list)
    for t in tables:
        _expect(t, str, f"{where}/{pid}.tables")
        if t not in table_ids:
            raise UnresolvedReferenceError(f"process {where}/{pid} uses table {t!r} absent from its context")
    if len(set(tables)) != len(tables):
        raise DuplicateIdError(f"process {where}/{pid} lists a table twice")
    return BusinessProcess(pid, str(raw.get("name") or pid), frozenset(tables))


def _parse_context(raw: Any) -> BoundedContext:
    _expect(raw, dict, "context")
    cid = _ident(raw, "context")
    where = f"context {cid}"
    tables = []
    for t in _items(raw, "tables", where):
        _expect(t, dict, f"{where} table")
        tid = _ident(t, f"{where} table")
        tables.append(DatastoreTable(tid, str(t.get("name") or tid)))
    _check_unique((t.id for t in tables), f"table (context {cid})")
    table_ids = frozenset(t.id for t in tables)

    systems = []
    for s in _items(raw, "systems", where):
        _expect(s, dict, f"{where} system")
        sid = _ident(s, f"{where} system")
        kind_text = _get(s, "kind", f"system {sid}", kind=str)
        try:
            kind = SystemKind(kind_text)
        except ValueError:
            allowed = ", ".join(k.value for k in SystemKind)
            raise SchemaError(f"system {sid}: kind {kind_text!r} not one of {allowed}") from None
        processes = tuple(
            _parse_process(p, f"{cid}", table_ids) for p in _items(s, "processes", f"system {sid}")
        )
        _check_unique((p.id for p in processes), f"process (system {sid})")
        systems.append(System(sid, str(s.get("name") or sid), kind, processes))
    return BoundedContext(cid, str(raw.get("name") or cid), tuple(systems), tuple(tables))


def _resolve_ref(
    text: Any, where: str, contexts: Mapping[str, BoundedContext], externals: frozenset[str]
) -> NodeRef:
    _expect(text, str, where)
    ref = NodeRef.parse(text)
    if ref.kind is NodeKind.EXTERNAL:
        if ref.id not in externals:
            raise UnresolvedReferenceError(f"{where}: unknown external entity {ref.id!r}")
        return ref
    ctx = contexts.get(ref.context_id or "")
    if ctx is None:
        raise UnresolvedReferenceError(f"{where}: unknown context {ref.context_id!r}")
    if ref.kind is NodeKind.DATASTORE:
        if ref.id not in ctx.table_ids:
            raise UnresolvedReferenceError(f"{where}: unknown table {ref.id!r} in context {ctx.id!r}")
    elif ref.id not in ctx.process_owners():
        raise UnresolvedReferenceError(f"{where}: unknown process {ref.id!r} in context {ctx.id!r}")
    return ref


def _load_yaml(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ModelSyntaxError(str(exc.problem or exc.context or exc), line, column) from None
    except yaml.YAMLError as exc:
        raise ModelSyntaxError(str(exc)) from None


def parse_model(text: str) -> MonolithModel:
    """Parse a model document into a fully resolved :class:`MonolithModel`.

    Declaration order is preserved.  Raises a :class:`ModelError` subclass
    (syntax, schema, unresolved reference, duplicate id); never returns a
    partial model.
    """
    raw = _load_yaml(text)
    _expect(raw, dict, "document")
    unknown = sorted(set(raw) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise SchemaError(f"document: unknown top-level key {unknown[0]!r}")
    name = str(_get(raw, "name", "document"))

    contexts = tuple(_parse_context(c) for c in _items(raw, "contexts", "document"))
    _check_unique((c.id for c in contexts), "context")
    _check_unique((s.id for c in contexts for s in c.systems), "system")
    by_id = {c.id: c for c in contexts}
    system_context = {s.id: c.id for c in contexts for s in c.systems}

    externals = []
    for e in _items(raw, "external_entities", "document"):
        _expect(e, dict, "external entity")
        eid = _ident(e, "external entity")
        externals.append(ExternalEntity(eid, str(e.get("name") or eid)))
    _check_unique((e.id for e in externals), "external entity")
    external_ids = frozenset(e.id for e in externals)

    flows = []
    for i, f in enumerate(_items(raw, "flows", "document")):
        where = f"flows[{i}]"
        _expect(f, dict, where)
        src = _resolve_ref(_get(f, "from", where), f"{where}.from", by_id, external_ids)
        dst = _resolve_ref(_get(f, "to", where), f"{where}.to", by_id, external_ids)
        flows.append(DataFlow(src, dst, str(f.get("label") or "")))

    use_cases = []
    for u in _items(raw, "use_cases", "document"):
        _expect(u, dict, "use case")
        uid = _ident(u, "use case")
        where = f"use case {uid}"
        touches = _get(u, "touches", where, default=[], kind=list)
        for cid in touches:
            _expect(cid, str, f"{where}.touches")
            if cid not in by_id:
                raise UnresolvedReferenceError(f"{where} touches unknown context {cid!r}")
        events = []
        for ev in _get(u, "event_flows", where, default=[], kind=list):
            _expect(ev, dict, f"{where}.event_flows")
            src, dst = _get(ev, "from", where, kind=str), _get(ev, "to", where, kind=str)
            for cid in (src, dst):
                if cid not in by_id:
                    raise UnresolvedReferenceError(f"{where} event flow names unknown context {cid!r}")
            events.append(EventFlow(src, dst, str(_get(ev, "event", where))))
        needs_legacy = _get(u, "needs_legacy", where, default=False, kind=bool)
        use_cases.append(
            UseCase(
                uid,
                str(u.get("description") or ""),
                tuple(dict.fromkeys(touches)),
                needs_legacy,
                tuple(events),
            )
        )
    _check_unique((u.id for u in use_cases), "use case")

    rename: dict[frozenset[str], str] = {}
    for entry in _items(raw, "rename_map", "document"):
        _expect(entry, dict, "rename_map entry")
        members = _get(entry, "members", "rename_map entry", kind=list)
        if not members:
            raise SchemaError("rename_map entry: members must be non-empty")
        for sid in members:
            _expect(sid, str, "rename_map members")
            if sid not in system_context:
                raise UnresolvedReferenceError(f"rename_map names unknown system {sid!r}")
        key = frozenset(members)
        if key in rename:
            raise DuplicateIdError(f"rename_map key {'+'.join(sorted(key))!r} declared more than once")
        rename[key] = str(_get(entry, "name", "rename_map entry"))

    legacy = _get(raw, "legacy_systems", "document", default=[], kind=list)
    for lid in legacy:
        _expect(lid, str, "legacy_systems")

    return MonolithModel(
        name=name,
        contexts=contexts,
        external_entities=tuple(externals),
        use_cases=tuple(use_cases),
        flows=tuple(flows),
        rename_map=MappingProxyType(rename),
        legacy_systems=frozenset(legacy),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_to_dict(m: MonolithModel) -> dict[str, Any]:
    """Plain object tree for ``m``, in the document layout."""
    return {
        "name": m.name,
        "contexts": [
            {
                "id": c.id,
                "name": c.display_name,
                "tables": [{"id": t.id, "name": t.display_name} for t in c.tables],
                "systems": [
                    {
                        "id": s.id,
                        "name": s.display_name,
                        "kind": s.kind.value,
                        "processes": [
                            {"id": p.id, "name": p.display_name, "tables": sorted(p.declared_tables)}
                            for p in s.processes
                        ],
                    }
                    for s in c.systems
                ],
            }
            for c in m.contexts
        ],
        "external_entities": [{"id": e.id, "name": e.display_name} for e in m.external_entities],
        "flows": [{"from": str(f.source), "to": str(f.target), "label": f.label} for f in m.flows],
        "use_cases": [
            {
                "id": u.id,
                "description": u.description,
                "touches": list(u.touches),
                "needs_legacy": u.needs_legacy,
                "event_flows": [
                    {"from": e.source_context, "to": e.target_context, "event": e.event}
                    for e in u.event_flows
                ],
            }
            for u in m.use_cases
        ],
        "rename_map": [
            {"members": sorted(k), "name": v}
            for k, v in sorted(m.rename_map.items(), key=lambda kv: sorted(kv[0]))
        ],
        "legacy_systems": sorted(m.legacy_systems),
    }


def dump_yaml(tree: Any) -> str:
    return yaml.safe_dump(tree, sort_keys=False, default_flow_style=False, allow_unicode=True, width=100)


def serialize_model(m: MonolithModel) -> str:
    return dump_yaml(model_to_dict(m))


# ---------------------------------------------------------------------------
# Canonical ordering
# ---------------------------------------------------------------------------


def canonicalize(m: MonolithModel) -> MonolithModel:
    """Return an equivalent model with every list sorted by id.  Idempotent."""
    contexts = tuple(
        sorted(
            (
                dataclasses.replace(
                    c,
                    systems=tuple(
                        sorted(
                            (
                                dataclasses.replace(s, processes=tuple(sorted(s.processes, key=lambda p: p.id)))
                                for s in c.systems
                            ),
                            key=lambda s: s.id,
                        )
                    ),
                    tables=tuple(sorted(c.tables, key=lambda t: t.id)),
                )
                for c in m.contexts
            ),
            key=lambda c: c.id,
        )
    )
    use_cases = tuple(
        sorted(
            (
                dataclasses.replace(
                    u,
                    touches=tuple(sorted(u.touches)),
                    event_flows=tuple(
                        sorted(u.event_flows, key=lambda e: (e.source_context, e.target_context, e.event))
                    ),
                )
                for u in m.use_cases
            ),
            key=lambda u: u.id,
        )
    )
    return dataclasses.replace(
        m,
        contexts=contexts,
        external_entities=tuple(sorted(m.external_entities, key=lambda e: e.id)),
        use_cases=use_cases,
        flows=tuple(sorted(m.flows, key=DataFlow.sort_key)),
        rename_map=MappingProxyType(dict(sorted(m.rename_map.items(), key=lambda kv: sorted(kv[0])))),
    )


# ---------------------------------------------------------------------------
# Table usage and validation
# ---------------------------------------------------------------------------

TableUsage = Mapping[tuple[str, str], frozenset[str]]


def _flow_tables(m: MonolithModel) -> dict[tuple[str, str], set[str]]:
    found: dict[tuple[str, str], set[str]] = defaultdict(set)
    for f in m.flows:
        for proc, other in ((f.source, f.target), (f.target, f.source)):
            if (
                proc.kind is NodeKind.PROCESS
                and other.kind is NodeKind.DATASTORE
                and other.context_id == proc.context_id
            ):
                found[(proc.context_id or "", proc.id)].add(other.id)
    return found


def _declared_tables(ctx: BoundedContext) -> dict[str, frozenset[str]]:
    declared: dict[str, set[str]] = defaultdict(set)
    for s in ctx.systems:
        for p in s.processes:
            declared[p.id] |= p.declared_tables
    return {pid: frozenset(t) for pid, t in declared.items()}


def derive_table_usage(m: MonolithModel) -> dict[tuple[str, str], frozenset[str]]:
    """Tables touched by each ``(context id, process id)``.

    A datastore flow in either direction counts as usage.  Processes with no
    datastore flows fall back to their declared tables.
    """
    from_flows = _flow_tables(m)
    usage: dict[tuple[str, str], frozenset[str]] = {}
    for ctx in m.contexts:
        declared = _declared_tables(ctx)
        for pid in sorted(declared):
            key = (ctx.id, pid)
            usage[key] = frozenset(from_flows[key]) if from_flows.get(key) else declared[pid]
    return usage


def _context_of(ref: NodeRef) -> str | None:
    return ref.context_id if ref.kind is not NodeKind.EXTERNAL else None


def validate_model(m: MonolithModel) -> ValidationReport:
    """Collect every rule violation in ``m``.

    Rules:

    * R1 - a process needs at least one incoming and one outgoing flow once
      its context has any flows at all.
    * R2 - declared tables and DFD-derived tables must match when both exist.
    * R3 - forbidden flow endpoints: datastore->datastore, external->external,
      and process<->datastore across contexts.
    * R4 - every rename-map key names systems of a single context.
    * R5 - a process listed by several systems declares the same tables everywhere.
    * R6 - a context declares at least one system.
    * R7 - use cases touch at least one context; event flows join two different contexts.

    The result is sorted, so it never depends on declaration order.
    """
    out: list[Violation] = []

    contexts_with_flows: set[str] = set()
    incoming: Counter[tuple[str, str]] = Counter()
    outgoing: Counter[tuple[str, str]] = Counter()
    for f in m.flows:
        where = f"flow {f.source} -> {f.target}"
        kinds = (f.source.kind, f.target.kind)
        if kinds == (NodeKind.DATASTORE, NodeKind.DATASTORE):
            out.append(Violation("R3", where, "datastore-to-datastore flows are not allowed"))
        elif kinds == (NodeKind.EXTERNAL, NodeKind.EXTERNAL):
            out.append(Violation("R3", where, "external-to-external flows are not allowed"))
        elif NodeKind.DATASTORE in kinds and NodeKind.PROCESS in kinds and f.source.context_id != f.target.context_id:
            out.append(Violation("R3", where, "a process may only use datastores of its own context"))
        for ref in (f.source, f.target):
            if (cid := _context_of(ref)) is not None:
                contexts_with_flows.add(cid)
        if f.source.kind is NodeKind.PROCESS:
            outgoing[(f.source.context_id or "", f.source.id)] += 1
        if f.target.kind is NodeKind.PROCESS:
            incoming[(f.target.context_id or "", f.target.id)] += 1

    from_flows = _flow_tables(m)
    for ctx in m.contexts:
        if not ctx.systems:
            out.append(Violation("R6", f"context {ctx.id}", "context declares no systems"))
        declared_by_system: dict[str, dict[frozenset[str], list[str]]] = defaultdict(lambda: defaultdict(list))
        for s in ctx.systems:
            for p in s.processes:
                declared_by_system[p.id][p.declared_tables].append(s.id)
        for pid in sorted(declared_by_system):
            loc = f"{ctx.id}/{pid}"
            variants = declared_by_system[pid]
            if len(variants) > 1:
                desc = "; ".join(
                    f"{'+'.join(sorted(sids))}: {_fmt_set(tables)}"
                    for tables, sids in sorted(variants.items(), key=lambda kv: sorted(kv[1]))
                )
                out.append(Violation("R5", loc, f"systems disagree on declared tables ({desc})"))
            if ctx.id in contexts_with_flows:
                if not incoming[(ctx.id, pid)]:
                    out.append(Violation("R1", loc, "process has no incoming flow"))
                if not outgoing[(ctx.id, pid)]:
                    out.append(Violation("R1", loc, "process has no outgoing flow"))
            declared = frozenset().union(*variants)
            derived = frozenset(from_flows.get((ctx.id, pid), ()))
            if declared and derived and declared != derived:
                out.append(
                    Violation(
                        "R2",
                        loc,
                        f"declared tables {_fmt_set(declared)} differ from flow tables {_fmt_set(derived)}",
                    )
                )

    system_context = {s.id: c.id for c in m.contexts for s in c.systems}
    for members in m.rename_map:
        owning = {system_context.get(sid) for sid in members}
        if len(owning) != 1 or None in owning:
            key = "+".join(sorted(members))
            out.append(
                Violation(
                    "R4",
                    f"rename_map {key}",
                    f"members span contexts {_fmt_set(c or '?' for c in owning)}",
                )
            )

    for u in m.use_cases:
        if not u.touches:
            out.append(Violation("R7", f"use case {u.id}", "use case touches no context"))
        for e in u.event_flows:
            if e.source_context == e.target_context:
                out.append(
                    Violation("R7", f"use case {u.id}", f"event {e.event!r} starts and ends in {e.source_context}")
                )

    out.sort(key=lambda v: (v.rule, v.location, v.message))
    return ValidationReport(tuple(out))


def _fmt_set(items: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(items)) + "}"
