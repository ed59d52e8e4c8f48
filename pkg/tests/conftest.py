from __future__ import annotations

import pytest

from cie import data
from cie.engine import Engine
from cie.knowledge_base import (ActivationSpec, Codebook, EntityTypeDef,
                                PropagationRule, RootCauseDef, SymptomDef)
from cie.topology import Entity, EntityGraph, Relation


@pytest.fixture(scope="session")
def shop_env_path():
    return data.path("astronomy_shop_env.json")


@pytest.fixture(scope="session")
def shop_codebook_path():
    return data.path("astronomy_shop_codebook.json")


@pytest.fixture(scope="session")
def shop_engine(shop_env_path, shop_codebook_path):
    return Engine.from_files(shop_env_path, shop_codebook_path)


@pytest.fixture()
def chain_codebook():
    """One service type; an error symptom that walks conn edges caller-ward."""
    return Codebook(
        types=(EntityTypeDef(type_name="service", attribute_decls=("error_rate",)),),
        root_causes=(RootCauseDef(cause_name="defect", applies_to="service",
                                  local_symptoms=(("high_error_rate", 0.9),),
                                  prior=0.05),),
        symptoms=(SymptomDef(symptom_name="high_error_rate", applies_to="service",
                             activation=ActivationSpec(kind="threshold",
                                                       attribute="error_rate",
                                                       comparator=">",
                                                       threshold=0.05)),),
        rules=(PropagationRule(rule_id="errors-to-callers",
                               from_symptom="high_error_rate", over_relation="conn",
                               traversal="reverse", to_symptom="high_error_rate",
                               attenuation=0.8),),
        version="test",
    )


@pytest.fixture()
def chain_topology():
    """A calls B calls C."""
    graph = EntityGraph()
    for eid in ("A", "B", "C"):
        graph = graph.add_entity(Entity(id=eid, name=eid, entity_type="service"))
    graph = graph.add_relation(Relation("A", "B", "conn"))
    graph = graph.add_relation(Relation("B", "C", "conn"))
    return graph
