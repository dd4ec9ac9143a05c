"""
Output storage for analysis reports.

Writes the text report, or appends one JSON record per run when the
output file ends in .jsonl, and writes exported models next to it.
"""

import json
from pathlib import Path
from typing import Any, Dict, Union

from slotgame.errors import InputError


class ReportStorage:
    """
    Stores analysis results.

    - `<name>.jsonl`: one JSON record appended per run
    - any other name: the text report, overwritten
    """

    def __init__(self, output_path: Union[str, Path]):
        """
        Initialize report storage.

        Args:
            output_path: File the report goes to; parent directories are created
        """
        self.output_path = Path(output_path)
        self.as_jsonl = self.output_path.suffix == ".jsonl"

    def save_report(self, text: str, record: Dict[str, Any]) -> None:
        """
        Save one analysis result.

        Args:
            text: Human-readable report
            record: Machine-readable result, used for .jsonl outputs
        """
        if self.as_jsonl:
            self._append_jsonl(self.output_path, record)
        else:
            write_text(self.output_path, text)

    def count_records(self) -> int:
        """Number of records in a .jsonl output."""
        if not self.output_path.exists():
            return 0
        with open(self.output_path, "r", encoding="utf-8") as f:
            return sum(1 for line in f if line.strip())

    def _append_jsonl(self, file_path: Path, data: dict) -> None:
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, "a", encoding="utf-8") as f:
                json.dump(data, f, ensure_ascii=False)
                f.write("\n")
        except OSError as e:
            raise InputError(f"cannot write {file_path}: {e.strerror}") from e


def write_text(path: Union[str, Path], text: str) -> None:
    """Write UTF-8 text, creating parent directories."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot write {path}: {e.strerror}") from e
