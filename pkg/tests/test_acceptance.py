"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line for its criterion straight
to the terminal, so ``pytest -v`` doubles as the acceptance report.
"""

from __future__ import annotations

import dataclasses
import itertools
import random
import subprocess
import sys
import time
from types import MappingProxyType

import pytest

from conftest import FIXTURE
from generators import as_partition, context_usage, permute_model, random_context, random_model
from invariants import check_structure, drop_context, grow_model
from mmsplit.decompose import MergeRule, affinity_graph, decompose, merge_components, naive_fixpoint_oracle
from mmsplit.model import canonicalize, parse_model, serialize_model
from mmsplit.recommend import AggregatorDetail, GatewayRouteDetail, Protocol, ProtocolDetail, recommend
from mmsplit.report import emit_merge_trace, emit_summary


@pytest.fixture
def verdict(capsys):
    """Print the criterion outcome, then fail the test if it did not hold."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def _grouping(r):
    return {cd.context_id: {c.name: frozenset(c.members) for c in cd.candidates} for cd in r.contexts}


def test_criterion_1_golden_decomposition(verdict, expected):
    start = time.perf_counter()
    r = decompose(parse_model(FIXTURE.read_text(encoding="utf-8")))
    elapsed = time.perf_counter() - start
    want = {cid: {s["name"]: frozenset(s["members"]) for s in ss} for cid, ss in expected["services"].items()}
    ok = _grouping(r) == want and len(r.candidates) == 11 and elapsed < 1.0
    verdict(1, "golden decomposition, 11 named services", ok, f"{len(r.candidates)} services in {elapsed * 1000:.1f} ms")


def test_criterion_2_merge_evidence(verdict, fintech_result, expected):
    trace = [ev for c in fintech_result.candidates for ev in c.trace]
    procs = {ev.witness for ev in trace if ev.rule is MergeRule.SHARED_PROCESS}
    tables = {(frozenset(ev.witness[:2]), ev.witness[2]) for ev in trace if ev.rule is MergeRule.SHARED_TABLE}
    want_tables = {(frozenset(t[:2]), t[2]) for t in expected["evidence"]["shared_table"]}
    ok = (
        procs == set(expected["evidence"]["shared_process"])
        and tables == want_tables
        and len(trace) == len(procs) + len(tables)
    )
    verdict(2, "merge evidence is exactly the expected witnesses", ok, f"{len(trace)} witnesses")


def test_criterion_3_negative_control(verdict, fintech_result):
    cd = next(cd for cd in fintech_result.contexts if cd.context_id == "transactions")
    trace_text = emit_merge_trace(fintech_result).split("== context transactions")[1]
    ok = cd.graph.edges == {} and all(c.trace == () for c in cd.candidates) and "no merges" in trace_text
    verdict(3, "transactions context has no merge evidence", ok)


def test_criterion_4_oracle_equivalence(verdict):
    rng = random.Random(20240604)
    n, agree, merged = 250, 0, 0
    for _ in range(n):
        ctx = random_context(rng, max_systems=8, max_processes=20, max_tables=15)
        usage = context_usage(ctx)
        fast = merge_components(affinity_graph(ctx, usage))
        agree += fast == naive_fixpoint_oracle(ctx, usage)
        merged += len(fast) < len(ctx.systems)
    verdict(4, "union-find partition equals naive fixpoint", agree == n, f"{agree}/{n} agree, {merged} with merges")


def test_criterion_5_order_invariance(verdict, fintech):
    rng = random.Random(77)

    def signature(m):
        r = decompose(m)
        defaults = decompose(dataclasses.replace(m, rename_map=MappingProxyType({})))
        return (
            as_partition(c.members for c in r.candidates),
            [c.name for c in defaults.candidates],
            emit_summary(m, r, recommend(m, r)),
        )

    base = signature(fintech)
    n = 120
    same = sum(signature(permute_model(fintech, rng)) == base for _ in range(n))
    verdict(5, "partition, default names and summary ignore declaration order", same == n, f"{same}/{n} permutations")


def test_criterion_6_invariant_suite(verdict):
    rng = random.Random(6)
    failures: list[str] = []
    n = 200

    def attempt(name, fn):
        try:
            fn()
        except AssertionError:
            failures.append(name)

    for i in range(n):
        m = random_model(rng, max_contexts=4, with_flows=rng.random() < 0.5)
        r = decompose(m)
        attempt(f"structure #{i}", lambda: check_structure(m, r))

        # growth adds processes and tables without flows, so start flowless
        plain = dataclasses.replace(m, flows=())
        grown, cid = grow_model(plain, rng)

        def monotone():
            assert len(decompose(grown).for_context(cid)) <= len(decompose(plain).for_context(cid))

        attempt(f"monotonicity #{i}", monotone)

        if len(m.contexts) > 1:

            def isolated():
                reduced = decompose(drop_context(m, rng.choice(m.contexts).id))
                for cd in reduced.contexts:
                    assert cd.candidates == r.for_context(cd.context_id)

            attempt(f"isolation #{i}", isolated)
    verdict(6, "partition, fixpoint, ownership, monotonicity, isolation", not failures, f"{n} models, {len(failures)} failures")


def test_criterion_7_recommendations(verdict, fintech, fintech_result):
    recs = recommend(fintech, fintech_result)
    aggs = [rec.detail for rec in recs if isinstance(rec.detail, AggregatorDetail)]
    routes = [rec.detail for rec in recs if isinstance(rec.detail, GatewayRouteDetail)]
    events = [rec.detail for rec in recs if isinstance(rec.detail, ProtocolDetail) and rec.detail.protocol is Protocol.EVENT_BUS]
    ok = (
        len(aggs) == 1
        and set(aggs[0].targets) == {"Loan Management Service", "Transaction Management Service"}
        and aggs[0].caution is True
        and len(events) == 1
        and "loan_settled" in events[0].events
        and len(routes) == 11
    )
    verdict(7, "one aggregator, one event_bus edge, 11 routes", ok, f"{len(aggs)} aggregator, {len(events)} event edge, {len(routes)} routes")


def test_criterion_8_round_trip_and_determinism(verdict, fintech):
    rng = random.Random(8)
    models = [canonicalize(fintech)] + [canonicalize(random_model(rng, with_flows=True)) for _ in range(100)]
    round_trips = sum(parse_model(serialize_model(m)) == m for m in models)

    flag_sets = [[], ["--include-evidence", "--cluster-by-context"]]
    combos = list(itertools.product(("validate", "decompose", "recommend", "report"), ("text", "dot", "structured"), flag_sets))
    unstable = []
    for command, fmt, flags in combos:
        cmd = [sys.executable, "-m", "mmsplit", command, str(FIXTURE), "--format", fmt, *flags]
        runs = [subprocess.run(cmd, capture_output=True, check=False) for _ in range(2)]
        if runs[0].returncode != 0 or (runs[0].stdout, runs[0].stderr) != (runs[1].stdout, runs[1].stderr):
            unstable.append(" ".join(cmd[3:]))
    ok = round_trips == len(models) and not unstable
    verdict(
        8,
        "parse/serialize identity and byte-stable CLI",
        ok,
        f"{round_trips}/{len(models)} round trips, {len(combos) - len(unstable)}/{len(combos)} invocations stable",
    )
