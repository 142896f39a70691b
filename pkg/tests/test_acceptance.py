from __future__ import annotations

import pytest

from scripts.compare_schedules import run_seed, summarize

SEEDS = range(5)
MIN_SEEDS = 4


@pytest.fixture(scope="module")
def toy_runs():
    """Weighted and task-by-task toy3 runs, final validation accuracy per task, for each seed."""
    return [run_seed("toy3", seed) for seed in SEEDS]


@pytest.mark.slow
class TestToyCotraining:
    def test_weighted_schedule_learns_every_task(self, toy_runs):
        passing = [r["seed"] for r in toy_runs if min(r["weighted"].values()) >= 0.90]
        assert len(passing) >= MIN_SEEDS, [r["weighted"] for r in toy_runs]
        assert all(len(r["weighted"]) == 3 for r in toy_runs)

    def test_task_by_task_forgets_the_first_task(self, toy_runs):
        forgot = [
            r["seed"]
            for r in toy_runs
            if r["weighted"][r["first_task"]] - r["task_by_task"][r["first_task"]] >= 0.20
        ]
        assert len(forgot) >= MIN_SEEDS, [(r["first_task"], r["weighted"], r["task_by_task"]) for r in toy_runs]

    def test_summary_agrees(self, toy_runs):
        summary = summarize(toy_runs, min_accuracy=0.90, gap=0.20)
        assert summary["seeds"] == len(SEEDS)
        assert summary["weighted_success"] >= MIN_SEEDS
        assert summary["task_by_task_forgetting"] >= MIN_SEEDS
