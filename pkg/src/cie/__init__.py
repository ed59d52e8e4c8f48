"""Causal intelligence engine for modeled microservice environments.

Maintains four linked structures (topology graph, codebook, causality
graph, attribute dependency graph) and answers health, impact, root-cause,
and remediation queries through a line-oriented tool service.
"""

from .attributes import AttributeGraph, load_attribute_graph
from .causality import CausalityGraph, instantiate, refresh
from .engine import Engine, EngineSnapshot
from .errors import (CycleError, DocumentError, DuplicateIdError, EngineError,
                     UnknownIdError)
from .inference import (ActiveSymptomSet, Diagnosis, HealthReport, Observation,
                        activate_symptoms, assess_health, localize, score)
from .knowledge_base import Codebook, load_codebook, render_codebook
from .topology import Entity, EntityGraph, Relation, load_environment

__version__ = "0.1.0"

__all__ = [
    "ActiveSymptomSet", "AttributeGraph", "CausalityGraph", "Codebook",
    "CycleError", "Diagnosis", "DocumentError", "DuplicateIdError", "Engine",
    "EngineError", "EngineSnapshot", "Entity", "EntityGraph", "HealthReport",
    "Observation", "Relation", "UnknownIdError", "activate_symptoms",
    "assess_health", "instantiate", "load_attribute_graph", "load_codebook",
    "load_environment", "localize", "refresh", "render_codebook", "score",
]
