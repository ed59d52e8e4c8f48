"""Live entity/relationship model of a managed environment.

Entities are typed components (services, workloads, pods, ...) and relations
come in three kinds: ``conn`` (horizontal calls), ``layer`` (runs-atop, edge
points from the depending entity to the supporting one) and ``comp``
(containment, edge points from the container to the contained). Graphs are
immutable values: every mutation returns a new graph with a bumped revision,
so any reference held by a reader stays a consistent snapshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DocumentError, DuplicateIdError, UnknownIdError

RELATION_KINDS = ("conn", "layer", "comp")
DIRECTIONS = ("out", "in", "both")

ENV_SCHEMA = "env/1"


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    entity_type: str
    owner_team: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Relation:
    source: str
    target: str
    kind: str

    def __post_init__(self):
        if self.kind not in RELATION_KINDS:
            raise DocumentError(f"unknown relation kind {self.kind!r}")
        if self.source == self.target:
            raise DocumentError(f"self-relation on {self.source!r}")


class EntityGraph:
    """Immutable topology snapshot; mutators return new graphs.

    ``revision`` increases strictly on every mutation and never on reads,
    which lets the causality layer detect staleness cheaply.
    """

    def __init__(self, entities: dict[str, Entity] | None = None,
                 relations: frozenset[Relation] | None = None, revision: int = 0):
        self._entities: dict[str, Entity] = dict(entities or {})
        self._relations: frozenset[Relation] = frozenset(relations or ())
        self.revision = revision
        self._out: dict[str, dict[str, set[str]]] = {}
        self._in: dict[str, dict[str, set[str]]] = {}
        for rel in self._relations:
            self._out.setdefault(rel.source, {}).setdefault(rel.kind, set()).add(rel.target)
            self._in.setdefault(rel.target, {}).setdefault(rel.kind, set()).add(rel.source)

    # -- read surface -------------------------------------------------------

    @property
    def entities(self) -> dict[str, Entity]:
        return dict(self._entities)

    @property
    def relations(self) -> frozenset[Relation]:
        return self._relations

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._entities

    def __len__(self) -> int:
        return len(self._entities)

    def entity(self, entity_id: str) -> Entity:
        try:
            return self._entities[entity_id]
        except KeyError:
            raise UnknownIdError(f"unknown entity {entity_id!r}") from None

    def entity_ids(self) -> set[str]:
        return set(self._entities)

    def neighbors(self, entity_id: str, kind: str = "all",
                  direction: str = "both") -> set[str]:
        """Entity ids one matching relation edge away."""
        if entity_id not in self._entities:
            raise UnknownIdError(f"unknown entity {entity_id!r}")
        if kind != "all" and kind not in RELATION_KINDS:
            raise DocumentError(f"unknown relation kind {kind!r}")
        if direction not in DIRECTIONS:
            raise DocumentError(f"unknown direction {direction!r}")
        kinds = RELATION_KINDS if kind == "all" else (kind,)
        found: set[str] = set()
        if direction in ("out", "both"):
            by_kind = self._out.get(entity_id, {})
            for k in kinds:
                found |= by_kind.get(k, set())
        if direction in ("in", "both"):
            by_kind = self._in.get(entity_id, {})
            for k in kinds:
                found |= by_kind.get(k, set())
        return found

    def scope(self, entity_ids: set[str]) -> EntityGraph:
        """Induced subgraph over ``entity_ids``; same revision (read-only op)."""
        missing = set(entity_ids) - set(self._entities)
        if missing:
            raise UnknownIdError(f"unknown entities in scope: {sorted(missing)}")
        keep = set(entity_ids)
        entities = {eid: self._entities[eid] for eid in keep}
        relations = frozenset(r for r in self._relations
                              if r.source in keep and r.target in keep)
        return EntityGraph(entities, relations, self.revision)

    def teams(self) -> set[str]:
        return {e.owner_team for e in self._entities.values() if e.owner_team}

    def entities_owned_by(self, team: str) -> set[str]:
        return {eid for eid, e in self._entities.items() if e.owner_team == team}

    # -- mutation surface ---------------------------------------------------

    def add_entity(self, entity: Entity) -> EntityGraph:
        if entity.id in self._entities:
            raise DuplicateIdError(f"duplicate entity id {entity.id!r}")
        entities = dict(self._entities)
        entities[entity.id] = entity
        return EntityGraph(entities, self._relations, self.revision + 1)

    def remove_entity(self, entity_id: str) -> EntityGraph:
        if entity_id not in self._entities:
            raise UnknownIdError(f"unknown entity {entity_id!r}")
        entities = dict(self._entities)
        del entities[entity_id]
        relations = frozenset(r for r in self._relations
                              if r.source != entity_id and r.target != entity_id)
        return EntityGraph(entities, relations, self.revision + 1)

    def add_relation(self, relation: Relation) -> EntityGraph:
        for endpoint in (relation.source, relation.target):
            if endpoint not in self._entities:
                raise UnknownIdError(f"relation endpoint {endpoint!r} does not exist")
        if relation in self._relations:
            raise DuplicateIdError(
                f"duplicate relation ({relation.source}, {relation.target}, {relation.kind})")
        return EntityGraph(self._entities, self._relations | {relation}, self.revision + 1)

    def remove_relation(self, relation: Relation) -> EntityGraph:
        if relation not in self._relations:
            raise UnknownIdError(
                f"unknown relation ({relation.source}, {relation.target}, {relation.kind})")
        return EntityGraph(self._entities, self._relations - {relation}, self.revision + 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EntityGraph):
            return NotImplemented
        return (self._entities == other._entities
                and self._relations == other._relations
                and self.revision == other.revision)

    def __repr__(self) -> str:
        return (f"EntityGraph(entities={len(self._entities)}, "
                f"relations={len(self._relations)}, revision={self.revision})")


def load_environment(document, codebook=None) -> EntityGraph:
    """Build an EntityGraph from an ``env/1`` document.

    ``document`` may be a JSON string/bytes or an already-parsed dict. When a
    codebook is given, entity types are validated against its type set
    eagerly; otherwise type validation happens at instantiation time.
    Returned graph has revision 0.
    """
    doc = _parse_document(document, "environment")
    if doc.get("schema") != ENV_SCHEMA:
        raise DocumentError(f"expected schema {ENV_SCHEMA!r}, got {doc.get('schema')!r}",
                            location="schema")
    for key in ("entities", "relations"):
        if not isinstance(doc.get(key, []), list):
            raise DocumentError(f"{key!r} must be an array", location=key)

    entities: dict[str, Entity] = {}
    for i, raw in enumerate(doc.get("entities", [])):
        loc = f"entities[{i}]"
        if not isinstance(raw, dict) or "id" not in raw or "type" not in raw:
            raise DocumentError("entity requires 'id' and 'type'", location=loc)
        eid = raw["id"]
        if eid in entities:
            raise DocumentError(f"duplicate entity id {eid!r}", location=loc)
        if codebook is not None and raw["type"] not in codebook.type_names():
            raise DocumentError(f"unknown entity_type {raw['type']!r} for {eid!r}",
                                location=loc)
        metadata = raw.get("metadata", {})
        if not (isinstance(metadata, dict)
                and all(isinstance(k, str) and isinstance(v, str)
                        for k, v in metadata.items())):
            raise DocumentError("metadata must map strings to strings", location=loc)
        entities[eid] = Entity(id=eid, name=raw.get("name", eid),
                               entity_type=raw["type"],
                               owner_team=raw.get("team"), metadata=metadata)

    relations: set[Relation] = set()
    for i, raw in enumerate(doc.get("relations", [])):
        loc = f"relations[{i}]"
        if not isinstance(raw, dict) or not {"source", "target", "kind"} <= set(raw):
            raise DocumentError("relation requires 'source', 'target', 'kind'", location=loc)
        for endpoint in (raw["source"], raw["target"]):
            if endpoint not in entities:
                raise DocumentError(
                    f"relation endpoint {endpoint!r} is not a declared entity", location=loc)
        try:
            rel = Relation(raw["source"], raw["target"], raw["kind"])
        except DocumentError as exc:
            raise DocumentError(str(exc), location=loc) from None
        if rel in relations:
            raise DocumentError(
                f"duplicate relation ({rel.source}, {rel.target}, {rel.kind})", location=loc)
        relations.add(rel)

    return EntityGraph(entities, frozenset(relations), revision=0)


def _parse_document(document, what: str) -> dict:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"malformed {what} document: {exc}") from None
    if not isinstance(document, dict):
        raise DocumentError(f"{what} document must be a JSON object")
    return document
