"""
Weighted vs task-by-task co-training on a desk-scale config.

For each seed, trains once per schedule and reports final validation accuracy per task. Passes when
the weighted schedule clears `--min-accuracy` on every task and the task trained first by the
task-by-task schedule ends at least `--forgetting-gap` below its weighted accuracy, each in at least
`--min-seeds` seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


def _ensure_import_paths() -> None:
    src = str(_repo_root() / "src")
    if src not in sys.path:
        sys.path.insert(0, src)


def run_seed(config_name: str, seed: int) -> Dict[str, Any]:
    _ensure_import_paths()
    from persistence import load_config
    from training import run_training, with_overrides

    base = load_config(config_name)
    out: Dict[str, Any] = {"seed": seed}
    for kind in ("weighted", "task_by_task"):
        result = run_training(with_overrides(base, seed=seed, schedule=kind))
        out[kind] = result.log.final_metrics()
        if kind == "task_by_task" and len(result.plan):
            out["first_task"] = result.plan.name_of(result.plan.steps[0][0])
    return out


def summarize(rows: List[Dict[str, Any]], *, min_accuracy: float, gap: float) -> Dict[str, int]:
    co_ok = sum(1 for r in rows if r["weighted"] and min(r["weighted"].values()) >= min_accuracy)
    forgot = 0
    for r in rows:
        first = r.get("first_task")
        if first and r["weighted"].get(first, 0.0) - r["task_by_task"].get(first, 0.0) >= gap:
            forgot += 1
    return {"seeds": len(rows), "weighted_success": co_ok, "task_by_task_forgetting": forgot}


def main() -> int:
    parser = argparse.ArgumentParser(description="Compare weighted and task-by-task co-training schedules.")
    parser.add_argument("--config", default="toy3", help="Preset name or config path.")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--min-seeds", type=int, default=4)
    parser.add_argument("--min-accuracy", type=float, default=0.90)
    parser.add_argument("--forgetting-gap", type=float, default=0.20)
    parser.add_argument("--json", default=None, help="Also write per-seed results to this path.")
    args = parser.parse_args()

    rows = []
    for seed in range(args.seeds):
        row = run_seed(args.config, seed)
        rows.append(row)
        print(
            f"seed {seed}: weighted={row['weighted']} task_by_task={row['task_by_task']} first={row.get('first_task')}",
            flush=True,
        )
    summary = summarize(rows, min_accuracy=args.min_accuracy, gap=args.forgetting_gap)
    print(json.dumps(summary, sort_keys=True), flush=True)
    if args.json:
        _ensure_import_paths()
        from persistence import atomic_write_bytes

        payload = json.dumps({"rows": rows, "summary": summary}, sort_keys=True, indent=2) + "\n"
        atomic_write_bytes(Path(args.json), payload.encode("utf-8"))
    ok = summary["weighted_success"] >= args.min_seeds and summary["task_by_task_forgetting"] >= args.min_seeds
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
