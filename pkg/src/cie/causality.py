"""Environment-specific causality graph.

Instantiates the codebook over a topology snapshot: one root-cause instance
and one symptom instance per matching (definition, entity) pair, plus direct
cause→symptom edges. Multi-hop symptom propagation is compiled into direct
edges whose probability is the local association probability multiplied by
one attenuation factor per rule hop; the hop chain is stored on the edge so
every probability can be recomputed and audited. When several derivations
reach the same (cause, symptom) pair the maximum-probability one is kept,
with fewest-hops-then-lexicographic tie-breaks for determinism.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

from .errors import DocumentError, UnknownIdError
from .knowledge_base import ActivationSpec, Codebook
from .topology import RELATION_KINDS, EntityGraph

DEFAULT_MAX_DEPTH = 8


@dataclass(frozen=True)
class RootCauseInstance:
    id: str
    cause_name: str
    host_entity: str
    prior: float


@dataclass(frozen=True)
class SymptomInstance:
    id: str
    symptom_name: str
    host_entity: str
    activation: ActivationSpec


@dataclass(frozen=True)
class DerivationHop:
    rule_id: str
    source: str
    target: str
    kind: str


@dataclass(frozen=True)
class CausalEdge:
    cause_id: str
    symptom_id: str
    probability: float
    # Audit trail: probability == fold of local_probability over the hops'
    # attenuations, applied left to right.
    origin_symptom: str
    local_probability: float
    derivation: tuple[DerivationHop, ...] = ()


class CausalityGraph:
    """Bipartite cause→symptom snapshot tied to one topology revision."""

    def __init__(self, causes: dict[str, RootCauseInstance],
                 symptoms: dict[str, SymptomInstance],
                 edges: dict[tuple[str, str], CausalEdge],
                 topology_revision: int,
                 entity_types: dict[str, str],
                 attribute_decls: dict[str, tuple[str, ...]],
                 truncations: tuple[str, ...] = ()):
        self.causes = dict(causes)
        self.symptoms = dict(symptoms)
        self.edges = dict(edges)
        self.topology_revision = topology_revision
        self.entity_types = dict(entity_types)
        self.attribute_decls = dict(attribute_decls)
        self.truncations = tuple(truncations)
        self._out: dict[str, list[CausalEdge]] = {}
        self._in: dict[str, list[CausalEdge]] = {}
        for edge in self.edges.values():
            self._out.setdefault(edge.cause_id, []).append(edge)
            self._in.setdefault(edge.symptom_id, []).append(edge)

    def cause(self, cause_id: str) -> RootCauseInstance:
        try:
            return self.causes[cause_id]
        except KeyError:
            raise UnknownIdError(f"unknown root cause instance {cause_id!r}") from None

    def symptom(self, symptom_id: str) -> SymptomInstance:
        try:
            return self.symptoms[symptom_id]
        except KeyError:
            raise UnknownIdError(f"unknown symptom instance {symptom_id!r}") from None

    def effects(self, cause_id: str) -> set[str]:
        """Symptom instance ids with an edge from ``cause_id``."""
        self.cause(cause_id)
        return {edge.symptom_id for edge in self._out.get(cause_id, [])}

    def edge(self, cause_id: str, symptom_id: str) -> CausalEdge | None:
        return self.edges.get((cause_id, symptom_id))

    def edges_from(self, cause_id: str) -> list[CausalEdge]:
        return list(self._out.get(cause_id, []))

    def causes_of(self, symptom_id: str) -> set[str]:
        return {edge.cause_id for edge in self._in.get(symptom_id, [])}

    def __eq__(self, other) -> bool:
        if not isinstance(other, CausalityGraph):
            return NotImplemented
        return (self.causes == other.causes and self.symptoms == other.symptoms
                and self.edges == other.edges
                and self.topology_revision == other.topology_revision
                and self.truncations == other.truncations)

    def __repr__(self) -> str:
        return (f"CausalityGraph(causes={len(self.causes)}, symptoms={len(self.symptoms)}, "
                f"edges={len(self.edges)}, revision={self.topology_revision})")


def instance_id(name: str, entity_id: str) -> str:
    return f"{name}@{entity_id}"


def instantiate(graph: EntityGraph, cb: Codebook,
                max_depth: int = DEFAULT_MAX_DEPTH) -> CausalityGraph:
    """Apply the codebook to a topology snapshot.

    Deterministic: equal inputs yield equal graphs including derivations.
    Depth-limited rule application reports truncation as warnings on the
    returned graph rather than failing.
    """
    entities = graph.entities
    for eid in sorted(entities):
        if entities[eid].entity_type not in cb.type_names():
            raise DocumentError(
                f"entity {eid!r} has undeclared type {entities[eid].entity_type!r}")

    entity_types = {eid: e.entity_type for eid, e in entities.items()}

    causes: dict[str, RootCauseInstance] = {}
    symptoms: dict[str, SymptomInstance] = {}
    for eid in sorted(entities):
        etype = entity_types[eid]
        for cdef in cb.causes_for_type(etype):
            cid = instance_id(cdef.cause_name, eid)
            causes[cid] = RootCauseInstance(id=cid, cause_name=cdef.cause_name,
                                            host_entity=eid, prior=cdef.prior)
        for sdef in cb.symptoms_for_type(etype):
            sid = instance_id(sdef.symptom_name, eid)
            symptoms[sid] = SymptomInstance(id=sid, symptom_name=sdef.symptom_name,
                                            host_entity=eid, activation=sdef.activation)

    truncations: set[str] = set()
    reach_cache: dict[tuple[str, str], dict] = {}

    def expand(start_symptom: str, start_entity: str) -> dict:
        """Max-product rule closure from one (symptom, entity) state.

        Returns {(symptom_name, entity): (relative_prob, hops)} with the
        start state included at prob 1.0. Dijkstra over -log(prob); ties
        broken by fewest hops, then entity id, then symptom name.
        """
        key = (start_symptom, start_entity)
        if key in reach_cache:
            return reach_cache[key]
        best: dict[tuple[str, str], tuple[float, tuple[DerivationHop, ...]]] = {}
        counter = 0  # heap tie-breaker; keeps unorderable hop tuples out of comparisons
        heap = [(-1.0, 0, start_entity, start_symptom, counter, ())]
        while heap:
            neg_prob, n_hops, ent, sym, _, hops = heapq.heappop(heap)
            state = (sym, ent)
            if state in best:
                continue
            best[state] = (-neg_prob, hops)
            for kind in RELATION_KINDS:
                for rule in sorted(cb.rules_for(sym, kind), key=lambda r: r.rule_id):
                    direction = "out" if rule.traversal == "forward" else "in"
                    target_type = cb.symptom(rule.to_symptom).applies_to
                    for nbr in sorted(graph.neighbors(ent, kind, direction)):
                        if entity_types[nbr] != target_type:
                            continue
                        nxt = (rule.to_symptom, nbr)
                        if nxt in best:
                            continue
                        if n_hops >= max_depth:
                            truncations.add(
                                f"depth limit {max_depth} reached expanding "
                                f"{start_symptom}@{start_entity} at {sym}@{ent}")
                            continue
                        if rule.traversal == "forward":
                            hop = DerivationHop(rule.rule_id, ent, nbr, kind)
                        else:
                            hop = DerivationHop(rule.rule_id, nbr, ent, kind)
                        counter += 1
                        heapq.heappush(heap, (neg_prob * rule.attenuation, n_hops + 1,
                                              nbr, rule.to_symptom, counter, hops + (hop,)))
        reach_cache[key] = best
        return best

    attenuation_by_rule = {r.rule_id: r.attenuation for r in cb.rules}
    edges: dict[tuple[str, str], CausalEdge] = {}
    for eid in sorted(entities):
        for cdef in cb.causes_for_type(entity_types[eid]):
            cid = instance_id(cdef.cause_name, eid)
            for s0, p0 in cdef.local_symptoms:
                for (sym, ent), (_, hops) in expand(s0, eid).items():
                    prob = p0
                    for hop in hops:
                        prob *= attenuation_by_rule[hop.rule_id]
                    sid = instance_id(sym, ent)
                    edge_key = (cid, sid)
                    candidate = CausalEdge(cause_id=cid, symptom_id=sid, probability=prob,
                                           origin_symptom=s0, local_probability=p0,
                                           derivation=hops)
                    existing = edges.get(edge_key)
                    if existing is None or candidate.probability > existing.probability:
                        edges[edge_key] = candidate

    return CausalityGraph(causes, symptoms, edges,
                          topology_revision=graph.revision,
                          entity_types=entity_types,
                          attribute_decls={t.type_name: t.attribute_decls for t in cb.types},
                          truncations=tuple(sorted(truncations)))


def refresh(cg: CausalityGraph, graph: EntityGraph, cb: Codebook,
            max_depth: int = DEFAULT_MAX_DEPTH) -> CausalityGraph:
    """Bring a causality snapshot in line with the current topology.

    Contract: the result equals instantiate(graph, cb) exactly; a full
    rebuild is the reference strategy, and incremental recomputation would
    have to match it.
    """
    if (cg.topology_revision == graph.revision
            and cg.entity_types == {eid: e.entity_type
                                    for eid, e in graph.entities.items()}):
        return cg
    return instantiate(graph, cb, max_depth=max_depth)


def recompute_edge_probability(edge: CausalEdge, cb: Codebook) -> float:
    """Re-fold an edge's probability from its stored derivation (audit path)."""
    attenuation_by_rule = {r.rule_id: r.attenuation for r in cb.rules}
    prob = edge.local_probability
    for hop in edge.derivation:
        prob *= attenuation_by_rule[hop.rule_id]
    return prob


def dump_graph(cg: CausalityGraph) -> dict:
    """JSON-friendly export of the full graph, probabilities and derivations
    included, for debugging and rubric audits."""
    return {
        "schema": "causality-dump/1",
        "topology_revision": cg.topology_revision,
        "causes": [{"id": c.id, "cause_name": c.cause_name, "entity": c.host_entity,
                    "prior": c.prior}
                   for c in sorted(cg.causes.values(), key=lambda c: c.id)],
        "symptoms": [{"id": s.id, "symptom_name": s.symptom_name, "entity": s.host_entity}
                     for s in sorted(cg.symptoms.values(), key=lambda s: s.id)],
        "edges": [{"cause": e.cause_id, "symptom": e.symptom_id,
                   "probability": e.probability, "origin_symptom": e.origin_symptom,
                   "local_probability": e.local_probability,
                   "derivation": [{"rule": h.rule_id, "source": h.source,
                                   "target": h.target, "kind": h.kind}
                                  for h in e.derivation]}
                  for e in sorted(cg.edges.values(), key=lambda e: (e.cause_id, e.symptom_id))],
        "truncations": list(cg.truncations),
    }


def dump_graph_json(cg: CausalityGraph) -> str:
    return json.dumps(dump_graph(cg), indent=2)
