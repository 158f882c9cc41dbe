from __future__ import annotations

import dataclasses
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import permute_model, random_model
from mmsplit.decompose import decompose
from mmsplit.model import EventFlow, UseCase, parse_model
from mmsplit.recommend import (
    GATEWAY_NODE,
    AclDetail,
    AggregatorDetail,
    AmbiguousRouteError,
    Direction,
    GatewayRouteDetail,
    Protocol,
    ProtocolDetail,
    aggregator_name,
    assign_protocols,
    dangling_references,
    kebab_case,
    primary_service,
    recommend,
    recommend_acl,
    recommend_aggregators,
    recommend_gateway,
)


def _details(recs, kind):
    return [rec.detail for rec in recs if isinstance(rec.detail, kind)]


def _with_use_cases(m, *use_cases):
    return dataclasses.replace(m, use_cases=m.use_cases + tuple(use_cases))


@pytest.fixture(scope="module")
def fintech_recs(fintech, fintech_result):
    return recommend(fintech, fintech_result)


def test_kebab_case():
    assert kebab_case("Loan Management Service") == "loan-management-service"
    assert kebab_case("  A/B  testing!! ") == "a-b-testing"


def test_primary_services(fintech, fintech_result):
    assert primary_service(fintech, fintech_result, "loan") == "Loan Management Service"
    assert primary_service(fintech, fintech_result, "transactions") == "Transaction Management Service"
    assert primary_service(fintech, fintech_result, "customer-onboard") == "Customer Onboard Service"


def test_primary_service_fallback_is_first_candidate():
    m = parse_model(
        """
name: x
contexts:
  - {id: c, systems: [{id: b, kind: entity}, {id: a, kind: aggregate}]}
"""
    )
    r = decompose(m)
    # display names default to the id
    assert primary_service(m, r, "c") == "a Service"


# -- aggregators ----------------------------------------------------------------


def test_fixture_aggregator(fintech, fintech_result, expected):
    (agg,) = recommend_aggregators(fintech, fintech_result)
    (want,) = expected["aggregators"]
    assert agg.subject == want["use_case"] == "UC10"
    assert agg.detail == AggregatorDetail(aggregator_name("UC10"), tuple(want["targets"]), caution=True)


def test_single_context_use_cases_get_no_aggregator(fintech, fintech_result):
    trimmed = dataclasses.replace(fintech, use_cases=tuple(u for u in fintech.use_cases if u.id != "UC10"))
    assert recommend_aggregators(trimmed, fintech_result) == []


def test_three_context_use_case(fintech, fintech_result):
    m = _with_use_cases(fintech, UseCase("UCX", "everything", ("transactions", "loan", "customer-onboard")))
    aggs = {rec.subject: rec.detail for rec in recommend_aggregators(m, fintech_result)}
    assert aggs["UCX"].targets == (
        "Customer Onboard Service",
        "Loan Management Service",
        "Transaction Management Service",
    )


# -- gateway ----------------------------------------------------------------------


def test_gateway_routes(fintech_result):
    routes = _details(recommend_gateway(fintech_result), GatewayRouteDetail)
    assert len(routes) == 11
    assert GatewayRouteDetail("/loan/loan-management-service", "Loan Management Service") in routes
    assert len({r.path for r in routes}) == 11
    assert {r.service for r in routes} == set(fintech_result.service_names())


def test_gateway_single_service():
    m = parse_model("name: x\ncontexts: [{id: shop, systems: [{id: cart, kind: entity}]}]\n")
    (route,) = _details(recommend_gateway(decompose(m)), GatewayRouteDetail)
    assert route.path == "/shop/cart-service"


def test_gateway_route_collision():
    m = parse_model(
        """
name: x
contexts:
  - id: c
    systems: [{id: a, kind: entity}, {id: b, kind: entity}]
rename_map:
  - {members: [a], name: Billing Service}
  - {members: [b], name: billing-service}
"""
    )
    with pytest.raises(AmbiguousRouteError, match="/c/billing-service"):
        recommend_gateway(decompose(m))


# -- anti-corruption layer ------------------------------------------------------------


def test_fixture_acl(fintech, fintech_result, expected):
    acls = _details(recommend_acl(fintech, fintech_result), AclDetail)
    assert [(a.service, a.legacy_system) for a in acls] == [
        (e["service"], e["legacy_system"]) for e in expected["anti_corruption_layers"]
    ]


def test_no_legacy_no_acl(fintech, fintech_result):
    m = dataclasses.replace(fintech, legacy_systems=frozenset())
    assert recommend_acl(m, fintech_result) == []


def test_acl_deduplicated(fintech, fintech_result):
    m = _with_use_cases(fintech, UseCase("UCY", "second kyc path", ("customer-onboard",), needs_legacy=True))
    assert len(recommend_acl(m, fintech_result)) == 1


def test_acl_one_per_legacy_system(fintech, fintech_result):
    m = dataclasses.replace(fintech, legacy_systems=frozenset({"legacy_core", "mainframe"}))
    acls = _details(recommend_acl(m, fintech_result), AclDetail)
    assert [a.legacy_system for a in acls] == ["legacy_core", "mainframe"]


# -- protocols --------------------------------------------------------------------


def test_protocol_edges_match_expected(fintech, fintech_result, expected):
    edges = _details(assign_protocols(fintech, fintech_result), ProtocolDetail)
    got = Counter((d.source, d.target, d.protocol.value) for d in edges)
    assert got == Counter(tuple(e) for e in expected["protocol_edges"])


def test_event_edge(fintech, fintech_result):
    (event,) = [d for d in _details(assign_protocols(fintech, fintech_result), ProtocolDetail) if d.protocol is Protocol.EVENT_BUS]
    assert event.edge == ("Loan Management Service", "Transaction Management Service")
    assert event.direction is Direction.EVENT
    assert event.events == ("loan_disbursed", "loan_settled")


def test_only_rest_without_aggregators_or_events(fintech, fintech_result):
    m = dataclasses.replace(
        fintech,
        use_cases=tuple(
            dataclasses.replace(u, event_flows=()) for u in fintech.use_cases if len(set(u.touches)) < 2
        ),
    )
    edges = _details(assign_protocols(m, fintech_result), ProtocolDetail)
    assert len(edges) == 11
    assert {d.protocol for d in edges} == {Protocol.REST_HTTP}
    assert all(d.source == GATEWAY_NODE for d in edges)


def test_new_event_pair_adds_edge(fintech, fintech_result):
    m = _with_use_cases(
        fintech,
        UseCase("UCZ", "notify onboarding", ("transactions",), event_flows=(EventFlow("transactions", "customer-onboard", "paid"),)),
    )
    events = [d for d in _details(assign_protocols(m, fintech_result), ProtocolDetail) if d.protocol is Protocol.EVENT_BUS]
    assert len(events) == 2


# -- invariants -------------------------------------------------------------------


def _check_invariants(m, r, recs):
    assert dangling_references(recs, r) == []
    edges = [d.edge for d in _details(recs, ProtocolDetail)]
    assert len(edges) == len(set(edges))
    multi = [u for u in m.use_cases if len(set(u.touches)) >= 2]
    assert len(_details(recs, AggregatorDetail)) == len(multi)
    assert len(_details(recs, GatewayRouteDetail)) == len(r.candidates)


def test_fixture_invariants(fintech, fintech_result, fintech_recs):
    _check_invariants(fintech, fintech_result, fintech_recs)


def test_dangling_reference_detected(fintech_result, fintech_recs):
    bogus = dataclasses.replace(fintech_recs[0], detail=AclDetail("Ghost Service", "legacy_core"))
    assert dangling_references([*fintech_recs, bogus], fintech_result) == ["Ghost Service"]


def test_recommend_is_deterministic(fintech, fintech_result, fintech_recs):
    assert recommend(fintech, fintech_result) == fintech_recs


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_random_model_invariants(rng):
    m = random_model(rng, with_flows=rng.random() < 0.5)
    r = decompose(m)
    try:
        recs = recommend(m, r)
    except AmbiguousRouteError:
        return
    _check_invariants(m, r, recs)
    shuffled = permute_model(m, rng)
    assert recommend(shuffled, decompose(shuffled)) == recs
