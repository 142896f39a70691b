from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Union

from persistence.atomic import atomic_write_bytes


@dataclass(frozen=True)
class StepRecord:
    step: int
    task: str
    loss: float
    lr: float

    def line(self) -> str:
        return f"step={self.step} task={self.task} loss={self.loss!r} lr={self.lr!r}"


@dataclass(frozen=True)
class EvalRecord:
    step: int
    task: str
    split: str
    metric: str
    value: float

    def line(self) -> str:
        return f"eval step={self.step} task={self.task} split={self.split} {self.metric}={self.value!r}"

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class TrainLog:
    """One step record per executed plan step, with eval records interleaved where they happened."""

    steps: List[StepRecord] = field(default_factory=list)
    evals: List[EvalRecord] = field(default_factory=list)
    _lines: List[str] = field(default_factory=list, repr=False)

    def add_step(self, record: StepRecord) -> None:
        self.steps.append(record)
        self._lines.append(record.line())

    def add_eval(self, record: EvalRecord) -> None:
        self.evals.append(record)
        self._lines.append(record.line())

    def lines(self) -> List[str]:
        return list(self._lines)

    def text(self) -> str:
        return "".join(f"{line}\n" for line in self._lines)

    def write(self, path: Union[str, Path]) -> None:
        atomic_write_bytes(Path(path), self.text().encode("utf-8"))

    def final_metrics(self) -> Dict[str, float]:
        """Last eval value per task."""
        out: Dict[str, float] = {}
        for rec in self.evals:
            out[rec.task] = rec.value
        return out
