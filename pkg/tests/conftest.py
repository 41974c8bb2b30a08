"""Shared fixtures: mode specs and corpus loading."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from elevator import modes
from elevator.frontend import elaborate, parse

CORPUS = Path(__file__).resolve().parents[1] / "src" / "elevator" / "corpus"

CORPUS_FILES = (
    "nth_naive.elv",
    "nth_gen.elv",
    "convert_nat.elv",
    "nth.elv",
    "map_lin.elv",
    "map_lin_meta.elv",
    "map_lin_meta_gen.elv",
    "convert_list.elv",
    "map_lin_meta_opt.elv",
)


def prelude_source() -> str:
    return (CORPUS / "prelude.elv").read_text("utf-8")


def corpus_spec(name: str) -> modes.ModeSpec:
    return modes.from_dict(json.loads((CORPUS / name).read_text("utf-8")))


def load_corpus(name: str, extra: str = ""):
    """Elaborate prelude + corpus file (+ optional extra source)."""
    source = prelude_source() + "\n" + (CORPUS / name).read_text("utf-8") + "\n" + extra
    module = parse(source)
    spec = corpus_spec(module.modes_path)
    return elaborate(module, spec), spec


@pytest.fixture
def two_mode():
    return modes.two_mode_spec()


@pytest.fixture
def three_mode():
    return modes.three_mode_spec()


@pytest.fixture
def single_mode():
    return modes.single_mode_spec()


@pytest.fixture
def linear_two_mode():
    return modes.linear_two_mode_spec()
