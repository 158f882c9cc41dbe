"""Integration-pattern recommendations over a decomposition.

Four deterministic rules:

* an aggregator for every use case that spans two or more bounded contexts;
* one API-gateway route per service candidate;
* an anti-corruption layer between a service and each legacy system whenever
  one of the service's use cases needs legacy resources;
* a protocol label for every edge: REST/HTTP from the gateway, binary RPC
  from aggregators to their targets, and an event bus for use-case events.

Anchoring a use case or event on a context needs one service per context.
That "primary" service is the candidate holding the context's domain-service
system (smallest system id wins); a context without one falls back to its
first candidate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from mmsplit.decompose import DecompositionResult
from mmsplit.model import MonolithModel, SystemKind

__all__ = [
    "ACL_NODE",
    "GATEWAY_NODE",
    "AclDetail",
    "AggregatorDetail",
    "AmbiguousRouteError",
    "Direction",
    "GatewayRouteDetail",
    "Protocol",
    "ProtocolDetail",
    "Recommendation",
    "RecommendationKind",
    "aggregator_name",
    "assign_protocols",
    "dangling_references",
    "kebab_case",
    "primary_service",
    "recommend",
    "recommend_acl",
    "recommend_aggregators",
    "recommend_gateway",
]

GATEWAY_NODE = "API Gateway"
ACL_NODE = "Anti-Corruption Layer"

AGGREGATOR_ROUTING_NOTE = (
    "aggregators are reached through the API gateway like any other service (assumed)"
)
AGGREGATOR_CAUTION = "aggregators add service calls per request; use with caution"


class AmbiguousRouteError(ValueError):
    """Two services of one context map to the same gateway route."""


class RecommendationKind(str, Enum):
    AGGREGATOR = "aggregator"
    GATEWAY_ROUTE = "gateway_route"
    ANTI_CORRUPTION_LAYER = "anti_corruption_layer"
    PROTOCOL_ASSIGNMENT = "protocol_assignment"


class Protocol(str, Enum):
    REST_HTTP = "rest_http"
    BINARY_RPC = "binary_rpc"
    EVENT_BUS = "event_bus"


class Direction(str, Enum):
    CLIENT_TO_SERVICE = "client_to_service"
    SERVICE_TO_SERVICE = "service_to_service"
    EVENT = "event"


@dataclass(frozen=True)
class AggregatorDetail:
    name: str
    targets: tuple[str, ...]
    caution: bool = True


@dataclass(frozen=True)
class GatewayRouteDetail:
    path: str
    service: str


@dataclass(frozen=True)
class AclDetail:
    service: str
    legacy_system: str


@dataclass(frozen=True)
class ProtocolDetail:
    source: str
    target: str
    protocol: Protocol
    direction: Direction
    events: tuple[str, ...] = ()

    @property
    def edge(self) -> tuple[str, str]:
        return (self.source, self.target)


Detail = AggregatorDetail | GatewayRouteDetail | AclDetail | ProtocolDetail


@dataclass(frozen=True)
class Recommendation:
    kind: RecommendationKind
    subject: str
    detail: Detail


def kebab_case(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def aggregator_name(use_case_id: str) -> str:
    return f"Aggregation Service ({use_case_id})"


def primary_service(m: MonolithModel, r: DecompositionResult, context_id: str) -> str:
    ctx = m.context(context_id)
    anchors = sorted(s.id for s in ctx.systems if s.kind is SystemKind.DOMAIN_SERVICE)
    if anchors:
        return r.owner_of(context_id, anchors[0]).name
    return r.for_context(context_id)[0].name


def recommend_aggregators(m: MonolithModel, r: DecompositionResult) -> list[Recommendation]:
    recs = []
    for uc in sorted(m.use_cases, key=lambda u: u.id):
        contexts = sorted(set(uc.touches))
        if len(contexts) < 2:
            continue
        targets = tuple(dict.fromkeys(primary_service(m, r, cid) for cid in contexts))
        recs.append(
            Recommendation(
                RecommendationKind.AGGREGATOR,
                uc.id,
                AggregatorDetail(aggregator_name(uc.id), targets, caution=True),
            )
        )
    return recs


def recommend_gateway(r: DecompositionResult) -> list[Recommendation]:
    recs = []
    for cd in r.contexts:
        seen: dict[str, str] = {}
        routes = []
        for cand in cd.candidates:
            path = f"/{cd.context_id}/{kebab_case(cand.name)}"
            if path in seen:
                raise AmbiguousRouteError(
                    f"ambiguous route {path}: {seen[path]!r} and {cand.name!r} in context {cd.context_id}"
                )
            seen[path] = cand.name
            routes.append(Recommendation(RecommendationKind.GATEWAY_ROUTE, cand.name, GatewayRouteDetail(path, cand.name)))
        recs.extend(sorted(routes, key=lambda rec: rec.detail.path))
    return recs


def _service_use_cases(m: MonolithModel, r: DecompositionResult) -> dict[str, set[str]]:
    by_service: dict[str, set[str]] = {}
    for uc in m.use_cases:
        for cid in uc.touches:
            by_service.setdefault(primary_service(m, r, cid), set()).add(uc.id)
    return by_service


def recommend_acl(m: MonolithModel, r: DecompositionResult) -> list[Recommendation]:
    if not m.legacy_systems:
        return []
    flagged = {u.id for u in m.use_cases if u.needs_legacy}
    pairs = {
        (service, legacy)
        for service, ucs in _service_use_cases(m, r).items()
        if ucs & flagged
        for legacy in m.legacy_systems
    }
    return [
        Recommendation(RecommendationKind.ANTI_CORRUPTION_LAYER, service, AclDetail(service, legacy))
        for service, legacy in sorted(pairs)
    ]


def _edge(detail: ProtocolDetail) -> Recommendation:
    return Recommendation(RecommendationKind.PROTOCOL_ASSIGNMENT, f"{detail.source} -> {detail.target}", detail)


def assign_protocols(m: MonolithModel, r: DecompositionResult) -> list[Recommendation]:
    out = [
        _edge(ProtocolDetail(GATEWAY_NODE, rec.detail.service, Protocol.REST_HTTP, Direction.CLIENT_TO_SERVICE))
        for rec in recommend_gateway(r)
    ]
    aggregators = recommend_aggregators(m, r)
    for rec in aggregators:
        out.append(
            _edge(ProtocolDetail(GATEWAY_NODE, rec.detail.name, Protocol.REST_HTTP, Direction.CLIENT_TO_SERVICE))
        )
    for rec in aggregators:
        for target in rec.detail.targets:
            out.append(
                _edge(ProtocolDetail(rec.detail.name, target, Protocol.BINARY_RPC, Direction.SERVICE_TO_SERVICE))
            )

    events: dict[tuple[str, str], set[str]] = {}
    for uc in m.use_cases:
        for ev in uc.event_flows:
            key = (primary_service(m, r, ev.source_context), primary_service(m, r, ev.target_context))
            events.setdefault(key, set()).add(ev.event)
    for (source, target), names in sorted(events.items()):
        out.append(_edge(ProtocolDetail(source, target, Protocol.EVENT_BUS, Direction.EVENT, tuple(sorted(names)))))
    return out


def recommend(m: MonolithModel, r: DecompositionResult) -> list[Recommendation]:
    """All recommendations for ``m``: aggregators, routes, ACLs, protocols."""
    return [
        *recommend_aggregators(m, r),
        *recommend_gateway(r),
        *recommend_acl(m, r),
        *assign_protocols(m, r),
    ]


def dangling_references(recs: list[Recommendation], r: DecompositionResult) -> list[str]:
    """Names used by ``recs`` that are neither services of ``r`` nor pattern nodes."""
    known = set(r.service_names()) | {GATEWAY_NODE}
    known |= {rec.detail.name for rec in recs if isinstance(rec.detail, AggregatorDetail)}
    used: list[str] = []
    for rec in recs:
        d = rec.detail
        if isinstance(d, AggregatorDetail):
            used.extend(d.targets)
        elif isinstance(d, GatewayRouteDetail | AclDetail):
            used.append(d.service)
        else:
            used.extend(d.edge)
    return sorted({name for name in used if name not in known})
