from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from mmsplit.decompose import DecompositionResult, decompose
from mmsplit.model import MonolithModel, parse_model

ROOT = Path(__file__).resolve().parents[1]
FIXTURE = ROOT / "fixtures" / "fintech.model"
EXPECT = ROOT / "fixtures" / "fintech.expect.yaml"

MINIMAL = """\
name: minimal
contexts:
  - id: c
    tables: [{id: t}]
    systems:
      - id: s
        kind: entity
        processes:
          - {id: p, tables: [t]}
external_entities: [{id: e}]
flows:
  - {from: "external:e", to: "process:c/p"}
  - {from: "process:c/p", to: "datastore:c/t"}
"""


@pytest.fixture(scope="session")
def fintech_text() -> str:
    return FIXTURE.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def fintech(fintech_text: str) -> MonolithModel:
    return parse_model(fintech_text)


@pytest.fixture(scope="session")
def fintech_result(fintech: MonolithModel) -> DecompositionResult:
    return decompose(fintech)


@pytest.fixture(scope="session")
def expected() -> dict:
    return yaml.safe_load(EXPECT.read_text(encoding="utf-8"))


@pytest.fixture
def minimal() -> MonolithModel:
    return parse_model(MINIMAL)
