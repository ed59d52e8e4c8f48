"""Engine state: current topology, codebook, observation log, warm snapshots.

The engine is the single writer; queries run against immutable snapshots.
A snapshot binds one topology revision, the causality graph built from it,
and the observation log at bind time, so a response can never mix state
from two revisions. The causality graph is cached and only rebuilt when the
topology revision moves.
"""

from __future__ import annotations

import threading
from pathlib import Path

from . import causality, impact, inference
from .attributes import AttributeGraph, load_attribute_graph
from .causality import CausalityGraph, instantiate, refresh
from .errors import DocumentError
from .inference import (ActiveSymptomSet, Diagnosis, HealthReport, Observation,
                        assess_health, localize, parse_observations)
from .knowledge_base import Codebook, load_codebook
from .topology import Entity, EntityGraph, Relation, load_environment


class EngineSnapshot:
    """Immutable view of the engine at one revision; query results cached."""

    def __init__(self, topology: EntityGraph, codebook: Codebook,
                 causality_graph: CausalityGraph,
                 observations: tuple[Observation, ...],
                 attribute_graph: AttributeGraph | None,
                 leak: float, max_depth: int):
        self.topology = topology
        self.codebook = codebook
        self.causality = causality_graph
        self.observations = observations
        self.attributes = attribute_graph
        self.leak = leak
        self.max_depth = max_depth
        self._active: dict = {}
        self._diagnosis: dict = {}
        self._radius: dict[str, impact.BlastRadius] = {}

    @property
    def revision(self) -> int:
        return self.topology.revision

    def active(self, scope: frozenset[str] | None = None) -> ActiveSymptomSet:
        if scope not in self._active:
            self._active[scope] = inference.activate_symptoms(
                self.causality, list(self.observations),
                scope=set(scope) if scope is not None else None)
        return self._active[scope]

    def diagnosis(self, scope: frozenset[str] | None = None) -> Diagnosis:
        if scope not in self._diagnosis:
            self._diagnosis[scope] = localize(self.causality, self.active(scope),
                                              leak=self.leak)
        return self._diagnosis[scope]

    def health(self, scope: frozenset[str] | None = None) -> HealthReport:
        return assess_health(self.causality, list(self.observations),
                             scope=set(scope) if scope is not None else None,
                             leak=self.leak)

    def best_cause(self, scope: frozenset[str] | None = None) -> str | None:
        best = self.diagnosis(scope).best
        return best.cause_id if best else None

    def blast_radius(self, cause_id: str) -> impact.BlastRadius:
        if cause_id not in self._radius:
            self._radius[cause_id] = impact.blast_radius(
                self.topology, self.causality, self.codebook, cause_id,
                max_depth=self.max_depth)
        return self._radius[cause_id]

    def remediation(self, cause_id: str, action_target: str) -> impact.RemediationVerdict:
        return impact.remediation_alignment(self.topology, self.causality,
                                            self.blast_radius(cause_id), action_target)


class Engine:
    """Single-writer holder of the live model plus the observation log."""

    def __init__(self, topology: EntityGraph, codebook: Codebook,
                 attribute_graph: AttributeGraph | None = None,
                 leak: float = inference.DEFAULT_LEAK,
                 max_depth: int = causality.DEFAULT_MAX_DEPTH):
        self._lock = threading.Lock()
        self._topology = topology
        self._codebook = codebook
        self._attributes = attribute_graph
        self._observations: list[Observation] = []
        self.leak = leak
        self.max_depth = max_depth
        self._causality = instantiate(topology, codebook, max_depth=max_depth)

    @classmethod
    def from_documents(cls, env_document, codebook_document, **kwargs) -> Engine:
        cb = load_codebook(codebook_document)
        graph = load_environment(env_document, codebook=cb)
        ag = load_attribute_graph(env_document, graph, cb)
        return cls(graph, cb, attribute_graph=ag, **kwargs)

    @classmethod
    def from_files(cls, env_path, codebook_path, observations_path=None, **kwargs) -> Engine:
        env_text = Path(env_path).read_text()
        cb_text = Path(codebook_path).read_text()
        engine = cls.from_documents(env_text, cb_text, **kwargs)
        if observations_path is not None:
            engine.ingest(parse_observations(Path(observations_path).read_text()))
        return engine

    @property
    def codebook(self) -> Codebook:
        return self._codebook

    @property
    def topology(self) -> EntityGraph:
        return self._topology

    def snapshot(self) -> EngineSnapshot:
        with self._lock:
            if self._causality.topology_revision != self._topology.revision:
                self._causality = refresh(self._causality, self._topology,
                                          self._codebook, max_depth=self.max_depth)
            return EngineSnapshot(self._topology, self._codebook, self._causality,
                                  tuple(self._observations), self._attributes,
                                  self.leak, self.max_depth)

    def ingest(self, observations: list[Observation]):
        snapshot = self.snapshot()
        for obs in observations:
            inference.validate_observation(snapshot.causality, obs)
        with self._lock:
            self._observations.extend(observations)

    def clear_observations(self):
        with self._lock:
            self._observations.clear()

    # -- topology mutations (serialized) -------------------------------------

    def add_entity(self, entity: Entity):
        with self._lock:
            if entity.entity_type not in self._codebook.type_names():
                raise DocumentError(f"unknown entity_type {entity.entity_type!r}")
            self._topology = self._topology.add_entity(entity)

    def remove_entity(self, entity_id: str):
        with self._lock:
            self._topology = self._topology.remove_entity(entity_id)

    def add_relation(self, relation: Relation):
        with self._lock:
            self._topology = self._topology.add_relation(relation)

    def remove_relation(self, relation: Relation):
        with self._lock:
            self._topology = self._topology.remove_relation(relation)
