from dataclasses import fields
from pathlib import Path

import pytest

from slotgame.config import load_cost_model
from slotgame.frontend import parse_and_typecheck
from slotgame.syntax import Lambda, LocalBlock, New, Term, Var

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("SLOTGAME_STEP_LIMIT", "SLOTGAME_COST_MODEL", "SLOTGAME_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def programs_dir() -> Path:
    return PROGRAMS


@pytest.fixture
def program():
    """Typechecked program from the programs/ directory."""
    def load(name: str):
        return parse_and_typecheck((PROGRAMS / name).read_text(encoding="utf-8"))
    return load


@pytest.fixture
def costs():
    """Cost model file from the programs/ directory."""
    def load(name: str):
        return load_cost_model(PROGRAMS / name)
    return load


def _alpha(a: Term, b: Term, left, right) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        return left.get(a.name, a.name) == right.get(b.name, b.name) and a.occurrence == b.occurrence
    if isinstance(a, (Lambda, New, LocalBlock)):
        if isinstance(a, Lambda) and a.param_type != b.param_type:
            return False
        if isinstance(a, New):
            if a.data != b.data or not _alpha(a.init, b.init, left, right):
                return False
        name_a = a.param if isinstance(a, Lambda) else a.name
        name_b = b.param if isinstance(b, Lambda) else b.name
        marker = f"%{len(left)}"
        return _alpha(a.body, b.body, {**left, name_a: marker}, {**right, name_b: marker})
    for f in fields(a):
        if f.name in ("pos", "ty"):
            continue
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, Term):
            if not _alpha(va, vb, left, right):
                return False
        elif isinstance(va, tuple) and va and isinstance(va[0], Term):
            if len(va) != len(vb) or not all(_alpha(x, y, left, right) for x, y in zip(va, vb)):
                return False
        elif va != vb:
            return False
    return True


@pytest.fixture
def alpha_equivalent():
    """Structural equality of terms up to renaming of bound identifiers."""
    return lambda a, b: _alpha(a, b, {}, {})
