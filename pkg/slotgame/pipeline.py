"""
Analysis pipeline orchestrator.

Runs one command end to end: source text -> typed term -> model -> verdict
or export, collecting the report lines the CLI prints.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from slotgame import automaton as fa
from slotgame.config import Settings, load_cost_model
from slotgame.errors import ContextNotEmpty, InputError
from slotgame.export import emit_csp, emit_dot
from slotgame.frontend import TypedTerm, normalize, parse_and_typecheck
from slotgame.gamesem import denote
from slotgame.models import CostModel, ModelOrigin, Verdict, VerdictKind, render_value, render_word
from slotgame.opsem import oracle_timing_check
from slotgame.security import (
    Approximation,
    Mode,
    SecurityModel,
    build_tani_model,
    build_timing_model,
    check_tani,
    check_timing,
)
from slotgame.storage import ReportStorage, write_text

logger = logging.getLogger(__name__)

COMMANDS = ("check-timing", "check-tani", "worst-cost", "emit-dot", "emit-csp")

EXIT_CODES = {
    VerdictKind.SECURE: 0,
    VerdictKind.LEAK: 10,
    VerdictKind.POSSIBLE_LEAK: 11,
    VerdictKind.UNSAFE: 12,
}


@dataclass
class RunConfig:
    """Configuration for one analysis run."""
    command: str
    input_path: str
    cost_model_path: Optional[str] = None
    mode: Mode = Mode.UNDER
    m: int = 0
    output_path: Optional[str] = None
    dot_path: Optional[str] = None
    csp_path: Optional[str] = None
    step_limit: Optional[int] = None
    oracle: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        self.mode = Mode(self.mode)
        if self.m < 0:
            raise ValueError("--m must be non-negative")

    @property
    def approximation(self) -> Approximation:
        if self.mode == Mode.OVER:
            return Approximation.over()
        return Approximation.under(self.m)


@dataclass
class Report:
    """Outcome of a run: report lines, optional verdict, exit code."""
    command: str
    lines: List[str] = field(default_factory=list)
    verdict: Optional[Verdict] = None
    exit_code: int = 0
    result: Dict[str, Any] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"command": self.command, "exit_code": self.exit_code}
        if self.verdict is not None:
            data.update(self.verdict.to_dict())
        data.update(self.result)
        return data


class AnalysisPipeline:
    """
    Main pipeline orchestrator.

    Source file -> TypedTerm -> (normalized) -> model -> Verdict / export.
    """

    def __init__(self, config: RunConfig, settings: Optional[Settings] = None):
        """
        Initialize the pipeline.

        Args:
            config: RunConfig with the command and its options
            settings: Environment settings (read from the environment if None)
        """
        self.config = config
        self.settings = settings or Settings.from_env()
        self.step_limit = config.step_limit or self.settings.step_limit
        self.cost_model: CostModel = load_cost_model(config.cost_model_path or self.settings.cost_model_path)

    def run(self) -> Report:
        typed = self.load()
        handler = {
            "check-timing": self._check_timing,
            "check-tani": self._check_tani,
            "worst-cost": self._worst_cost,
            "emit-dot": self._emit_dot,
            "emit-csp": self._emit_csp,
        }[self.config.command]
        report = handler(typed)
        if self.config.output_path and self.config.command not in ("emit-dot", "emit-csp"):
            storage = ReportStorage(self.config.output_path)
            storage.save_report(report.text, report.to_dict())
            if storage.as_jsonl:
                logger.info("record appended to %s (%d records)", self.config.output_path, storage.count_records())
            else:
                logger.info("report saved to %s", self.config.output_path)
        return report

    def load(self) -> TypedTerm:
        path = Path(self.config.input_path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise InputError(f"cannot read {path}: {e}") from e
        typed = parse_and_typecheck(text)
        logger.info("loaded %s: %s", path, typed.result_type.render())
        return typed

    # -- commands ---------------------------------------------------------

    def _check_timing(self, typed: TypedTerm) -> Report:
        model = build_timing_model(typed, self.cost_model, self.config.approximation)
        verdict = check_timing(model)
        report = self._verdict_report("check-timing", model, verdict)
        if self.config.oracle:
            self._add_oracle(typed, verdict, report)
        self._export_model(model)
        return report

    def _check_tani(self, typed: TypedTerm) -> Report:
        model = build_tani_model(typed, self.cost_model)
        verdict = check_tani(model)
        report = self._verdict_report("check-tani", model, verdict)
        self._export_model(model)
        return report

    def _worst_cost(self, typed: TypedTerm) -> Report:
        model = denote(normalize(typed), self.cost_model)
        cost = fa.worst_case_cost(model)
        report = Report("worst-cost", result={"worst_cost": cost})
        report.lines.append(f"[OK] worst-case cost of {self.config.input_path}: {cost}")
        report.lines.append(f"worst_cost={cost}")
        return report

    def _emit_dot(self, typed: TypedTerm) -> Report:
        model = denote(normalize(typed), self.cost_model)
        return self._emitted("emit-dot", emit_dot(model))

    def _emit_csp(self, typed: TypedTerm) -> Report:
        model = build_timing_model(typed, self.cost_model, self.config.approximation)
        bound = fa.worst_case_cost(model.automaton)
        return self._emitted("emit-csp", emit_csp(model.automaton, bound))

    # -- helpers ----------------------------------------------------------

    def _emitted(self, command: str, text: str) -> Report:
        if self.config.output_path:
            write_text(self.config.output_path, text)
            return Report(command, [f"[OK] wrote {self.config.output_path}"])
        return Report(command, text.rstrip("\n").splitlines())

    def _verdict_report(self, command: str, model: SecurityModel, verdict: Verdict) -> Report:
        report = Report(command, verdict=verdict, exit_code=EXIT_CODES[verdict.kind])
        lines = report.lines
        lines.append(f"[INFO] {command} {self.config.input_path} ({model.origin.value} model, "
                     f"{model.automaton.num_states} states)")
        if verdict.kind == VerdictKind.SECURE:
            if verdict.origin == ModelOrigin.UNDER_PARTIAL:
                lines.append(f"[OK] Secure up to context bound m={verdict.bound}")
            else:
                lines.append("[OK] Secure")
        else:
            if verdict.kind == VerdictKind.UNSAFE:
                lines.append("[WARN] Unsafe: the low results of the two runs can differ")
            else:
                label = "Possible leak (may be spurious)" if verdict.kind == VerdictKind.POSSIBLE_LEAK else "Leak"
                lines.append(f"[WARN] {label}: cost {verdict.cost_before} vs {verdict.cost_after}")
            if verdict.high_values:
                values = " vs ".join(render_value(v) for v in verdict.high_values)
                lines.append(f"       high values: {values}")
            lines.append(f"       witness: {render_word(verdict.witness)}")
        lines.append(verdict.to_record())
        return report

    def _add_oracle(self, typed: TypedTerm, verdict: Verdict, report: Report) -> None:
        if typed.delta:
            report.lines.append("[WARN] oracle skipped: the term has a free context")
            return
        try:
            oracle = oracle_timing_check(typed, self.cost_model, self.step_limit)
        except ContextNotEmpty as e:
            report.lines.append(f"[WARN] oracle skipped: {e}")
            return
        agree = (oracle.kind == VerdictKind.SECURE) == verdict.is_secure
        report.lines.append(f"[{'OK' if agree else 'WARN'}] oracle: {oracle.kind.value}")
        report.result["oracle"] = oracle.kind.name

    def _export_model(self, model: SecurityModel) -> None:
        if self.config.dot_path:
            write_text(self.config.dot_path, emit_dot(model.automaton))
            logger.info("model written to %s", self.config.dot_path)
        if self.config.csp_path:
            bound = fa.worst_case_cost(model.automaton)
            write_text(self.config.csp_path, emit_csp(model.automaton, bound))
            logger.info("CSP script written to %s", self.config.csp_path)
