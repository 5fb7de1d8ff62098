"""Sweep-CSV ingestion.

The nine-column trial CSV written by the simulator's experiment harness is
this package's only interface to the simulator — nothing here imports the
simulation code.  A file is accepted only when its header matches that
schema exactly (same names, same order); anything else is a different
schema version and is refused rather than guessed at.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

#: the trial-row schema, byte-for-byte
EXPECTED_HEADER = (
    "n",
    "seed",
    "input_kind",
    "steps_to_stable",
    "parallel_time",
    "max_state_bits",
    "detection_channel",
    "epochs_elapsed",
    "false_positive",
)

_NOT_REACHED = "not_reached"


class AnalysisError(ValueError):
    """Malformed input to the analysis pipeline."""


@dataclass(frozen=True)
class TrialRow:
    """One simulator trial, as recorded in the sweep CSV."""

    n: int
    seed: int
    input_kind: str
    steps_to_stable: int | None
    parallel_time: float | None
    max_state_bits: int
    detection_channel: str
    epochs_elapsed: int
    false_positive: bool


def _parse_row(cells: list[str], line_no: int) -> TrialRow:
    if len(cells) != len(EXPECTED_HEADER):
        raise AnalysisError(
            f"line {line_no}: expected {len(EXPECTED_HEADER)} cells, got {len(cells)}"
        )
    try:
        steps = None if cells[3] == _NOT_REACHED else int(cells[3])
        ptime = None if cells[4] == _NOT_REACHED else float(cells[4])
        if cells[8] not in ("true", "false"):
            raise ValueError(f"bad boolean {cells[8]!r}")
        return TrialRow(
            n=int(cells[0]),
            seed=int(cells[1]),
            input_kind=cells[2],
            steps_to_stable=steps,
            parallel_time=ptime,
            max_state_bits=int(cells[5]),
            detection_channel=cells[6],
            epochs_elapsed=int(cells[7]),
            false_positive=cells[8] == "true",
        )
    except ValueError as exc:
        raise AnalysisError(f"line {line_no}: {exc}") from exc


@dataclass(frozen=True)
class SweepFrame:
    """An immutable table of trial rows plus an optional protocol label.

    The protocol is frame-level metadata (used to caption figures): the
    CSV schema records per-trial inputs and outcomes but not which
    protocol produced the file, so the label travels alongside the data
    rather than inside it.
    """

    rows: tuple[TrialRow, ...]
    protocol: str | None = None

    @classmethod
    def from_csv(cls, path: str | Path, *, protocol: str | None = None) -> "SweepFrame":
        path = Path(path)
        try:
            handle = path.open(newline="")
        except OSError as exc:
            raise AnalysisError(f"cannot read {path}: {exc}") from exc
        with handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise AnalysisError(f"{path}: empty file, no header") from None
            if tuple(header) != EXPECTED_HEADER:
                raise AnalysisError(
                    f"{path}: schema version mismatch — header {header!r} "
                    f"does not match the expected trial schema"
                )
            rows = tuple(
                _parse_row(cells, line_no)
                for line_no, cells in enumerate(reader, start=2)
                if cells
            )
        return cls(rows=rows, protocol=protocol)

    def __len__(self) -> int:
        return len(self.rows)

    def groups(self) -> dict[tuple[int, str], list[TrialRow]]:
        """Rows bucketed by (population size, input kind)."""
        out: dict[tuple[int, str], list[TrialRow]] = {}
        for row in self.rows:
            out.setdefault((row.n, row.input_kind), []).append(row)
        return out

    def n_values(self) -> tuple[int, ...]:
        return tuple(sorted({row.n for row in self.rows}))

    def input_kinds(self) -> tuple[str, ...]:
        return tuple(sorted({row.input_kind for row in self.rows}))

    def median_steps(self, input_kind: str | None = None) -> dict[int, float]:
        """Per-n median steps-to-stable over stabilized rows.

        Rows that missed their budget carry no stabilization time and are
        excluded; a population size with no stabilized rows is omitted.
        """
        buckets: dict[int, list[int]] = {}
        for row in self.rows:
            if input_kind is not None and row.input_kind != input_kind:
                continue
            if row.steps_to_stable is None or row.steps_to_stable <= 0:
                continue
            buckets.setdefault(row.n, []).append(row.steps_to_stable)
        return {n: float(statistics.median(v)) for n, v in sorted(buckets.items())}

    def false_positives(self) -> int:
        return sum(1 for row in self.rows if row.false_positive)

    def duplicate_free_rows(self) -> int:
        return sum(1 for row in self.rows if row.input_kind == "distinct")
