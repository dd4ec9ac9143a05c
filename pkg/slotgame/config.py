"""
Configuration: environment settings and cost model files.

Cost model files hold one `key = n` entry per line, `#` starts a comment:

    # only comparisons cost
    seq = 0
    op = 0
    op.= = 1
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import load_dotenv

from slotgame.errors import CostModelError
from slotgame.models import COST_KEYS, CostModel
from slotgame.opsem import DEFAULT_STEP_LIMIT

logger = logging.getLogger(__name__)

OPERATORS = ("+", "-", "*", "<", ">", "=", "!=", "&&", "||")


@dataclass
class Settings:
    """Settings read from the environment (and a .env file, if present)."""
    step_limit: int = DEFAULT_STEP_LIMIT
    cost_model_path: Optional[str] = None
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        raw_limit = os.getenv("SLOTGAME_STEP_LIMIT")
        step_limit = DEFAULT_STEP_LIMIT
        if raw_limit:
            try:
                step_limit = int(raw_limit)
            except ValueError:
                logger.warning("ignoring SLOTGAME_STEP_LIMIT=%r (not an integer)", raw_limit)
        return cls(
            step_limit=step_limit,
            cost_model_path=os.getenv("SLOTGAME_COST_MODEL") or None,
            log_level=os.getenv("SLOTGAME_LOG_LEVEL", "WARNING").upper(),
        )


def parse_cost_model(text: str) -> CostModel:
    """Parse the contents of a cost model file; unlisted keys keep cost 1."""
    values: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CostModelError("expected `key = value`", number)
        key, _, raw = line.rpartition("=")
        key, raw = key.strip(), raw.strip()
        if key not in COST_KEYS and key != "op" and not (key.startswith("op.") and key[3:] in OPERATORS):
            raise CostModelError(f"unknown cost key {key!r}", number)
        if key in values:
            raise CostModelError(f"duplicate cost key {key!r}", number)
        try:
            cost = int(raw)
        except ValueError:
            raise CostModelError(f"cost of {key} is not an integer: {raw!r}", number) from None
        if cost < 0:
            raise CostModelError(f"cost of {key} must be non-negative", number)
        values[key] = cost

    op_costs = {key[3:]: cost for key, cost in values.items() if key.startswith("op.")}
    return CostModel(
        seq=values.get("seq", 1),
        if_=values.get("if", 1),
        asg=values.get("asg", 1),
        der=values.get("der", 1),
        app=values.get("app", 1),
        var=values.get("var", 1),
        op_default=values.get("op", 1),
        op_costs=op_costs,
    )


def load_cost_model(path: Optional[Union[str, Path]]) -> CostModel:
    """Load a cost model file; without a path every cost is 1."""
    if path is None:
        return CostModel()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CostModelError(f"cannot read cost model {path}: {e.strerror}") from e
    cost_model = parse_cost_model(text)
    logger.info("[config] cost model %s: %s", path, cost_model.to_dict())
    return cost_model
