from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cie.causality import instantiate
from cie.errors import UnknownIdError
from cie.impact import (blast_radius, impacted_entities, ownership_check,
                        remediation_alignment)
from cie.topology import Relation

from genmodels import blast_fixpoint, random_codebook, random_topology

UNBOUNDED = 64
PAYMENT_DEFECT = "code_defect_transaction_rejection@payment"


@pytest.fixture()
def shop(shop_engine):
    snap = shop_engine.snapshot()
    return snap.topology, snap.causality, shop_engine.codebook


def test_cause_with_only_local_symptoms_impacts_host_only(chain_codebook, chain_topology):
    lonely = chain_topology.remove_entity("A").remove_entity("B")
    cg = instantiate(lonely, chain_codebook)
    assert impacted_entities(cg, "defect@C") == {"C"}


def test_scenario_impacted_entities(shop):
    _, cg, _ = shop
    assert impacted_entities(cg, PAYMENT_DEFECT) == {
        "payment", "checkout", "accounting", "shipping"}


def test_impacted_entities_equals_edge_scan_oracle(shop):
    _, cg, _ = shop
    for cid in cg.causes:
        scan = {cg.symptoms[sid].host_entity
                for (c, sid) in cg.edges if c == cid}
        scan.add(cg.causes[cid].host_entity)
        assert impacted_entities(cg, cid) == scan


def test_impacted_entities_unknown_cause(shop):
    _, cg, _ = shop
    with pytest.raises(UnknownIdError):
        impacted_entities(cg, "phantom@x")


def test_blast_radius_no_rules_transitive_equals_direct(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, "broker_degradation@kafka")
    assert br.transitive_entities == br.direct_entities == frozenset({"kafka"})
    assert br.paths == {"kafka": ()}


def test_scenario_blast_radius_spans_multiple_teams(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    assert br.transitive_entities == frozenset(
        {"payment", "checkout", "accounting", "shipping"})
    assert br.impacted_teams == frozenset(
        {"team-payments", "team-storefront", "team-fulfillment"})
    assert len(br.impacted_teams) > 1
    # every transitive entity carries a recorded path; victims explain their hop chain
    assert set(br.paths) == set(br.transitive_entities)
    assert len(br.paths["checkout"]) == 1
    assert (br.paths["checkout"][0].from_entity, br.paths["checkout"][0].to_entity) == (
        "payment", "checkout")
    assert [h.rule_id for h in br.paths["shipping"]] == [
        "payment-rejections-hit-callers", "order-failures-starve-shipping"]
    assert br.paths["shipping"][0].from_entity == "payment"
    assert br.paths["shipping"][1].to_entity == "shipping"


def test_ownership_checks_on_scenario(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    assert ownership_check(br, "team-payments") is True
    assert ownership_check(br, "team-storefront") is True  # checkout is direct
    assert ownership_check(br, "team-platform") is False
    assert ownership_check(br, "team-nobody") is False


def test_ownership_true_while_alignment_false_for_checkout(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    assert ownership_check(br, "team-storefront") is True
    verdict = remediation_alignment(topology, cg, br, "checkout")
    assert verdict.aligned is False


def test_remediation_target_host_aligned(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    verdict = remediation_alignment(topology, cg, br, "payment")
    assert verdict.aligned is True
    assert verdict.path == ("payment",)


def test_remediation_payment_pod_aligned_via_stack(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    for pod in ("payment-pod-0", "payment-pod-1"):
        verdict = remediation_alignment(topology, cg, br, pod)
        assert verdict.aligned is True
        assert verdict.path == ("payment", "payment-deployment", pod)


def test_remediation_checkout_cites_propagation_path(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    verdict = remediation_alignment(topology, cg, br, "checkout")
    assert verdict.aligned is False
    assert "payment -> checkout" in verdict.rationale
    assert "suppress symptoms" in verdict.rationale


def test_remediation_unrelated_entity_not_aligned(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    verdict = remediation_alignment(topology, cg, br, "grafana")
    assert verdict.aligned is False
    assert "outside the blast radius" in verdict.rationale


def test_remediation_unknown_entity(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    with pytest.raises(UnknownIdError):
        remediation_alignment(topology, cg, br, "ghost")


def test_remediation_total_over_scenario_entities(shop):
    topology, cg, cb = shop
    br = blast_radius(topology, cg, cb, PAYMENT_DEFECT)
    for eid in topology.entity_ids():
        verdict = remediation_alignment(topology, cg, br, eid)
        assert verdict.aligned in (True, False)
        assert verdict.rationale


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_blast_radius_invariants_on_random_models(seed):
    rng = random.Random(seed)
    cb = random_codebook(rng)
    graph = random_topology(rng, cb)
    cg = instantiate(graph, cb, max_depth=UNBOUNDED)
    for cid in sorted(cg.causes):
        br = blast_radius(graph, cg, cb, cid, max_depth=UNBOUNDED)
        assert br.direct_entities <= br.transitive_entities
        assert cg.causes[cid].host_entity in br.transitive_entities
        assert set(br.paths) == set(br.transitive_entities)
        assert br.transitive_entities == frozenset(blast_fixpoint(graph, cb, cg, cid))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_blast_radius_monotone_in_topology(seed):
    rng = random.Random(seed)
    cb = random_codebook(rng)
    graph = random_topology(rng, cb)
    cg = instantiate(graph, cb, max_depth=UNBOUNDED)
    if not cg.causes:
        return
    cid = sorted(cg.causes)[rng.randrange(len(cg.causes))]
    before = blast_radius(graph, cg, cb, cid, max_depth=UNBOUNDED)
    ids = sorted(graph.entity_ids())
    if len(ids) < 2:
        return
    for _ in range(20):
        src, dst = rng.sample(ids, 2)
        rel = Relation(src, dst, rng.choice(("conn", "layer", "comp")))
        if rel not in graph.relations:
            break
    else:
        return
    grown = graph.add_relation(rel)
    cg2 = instantiate(grown, cb, max_depth=UNBOUNDED)
    after = blast_radius(grown, cg2, cb, cid, max_depth=UNBOUNDED)
    assert before.transitive_entities <= after.transitive_entities


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_ownership_check_is_set_intersection(seed):
    rng = random.Random(seed)
    cb = random_codebook(rng)
    graph = random_topology(rng, cb)
    # sprinkle teams over entities
    teams = ("alpha", "beta", None)
    rebuilt = graph
    for eid in sorted(graph.entity_ids()):
        entity = graph.entity(eid)
        rebuilt = rebuilt.remove_entity(eid).add_entity(
            type(entity)(id=entity.id, name=entity.name,
                         entity_type=entity.entity_type,
                         owner_team=rng.choice(teams)))
    cg = instantiate(rebuilt, cb)
    for cid in sorted(cg.causes):
        br = blast_radius(rebuilt, cg, cb, cid)
        for team in ("alpha", "beta", "gamma"):
            expected = bool(br.direct_entities & rebuilt.entities_owned_by(team))
            assert ownership_check(br, team) == expected
