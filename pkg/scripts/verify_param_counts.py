from __future__ import annotations

import argparse
import sys
from pathlib import Path


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


def _ensure_import_paths() -> None:
    src = str(_repo_root() / "src")
    if src not in sys.path:
        sys.path.insert(0, src)


# Published sizes of the Base model and of the nine single-task models it replaces.
EXPECTED_TOTAL = 93_000_000
EXPECTED_FLEET = 773_000_000
RATIO_RANGE = (7.9, 8.7)


def verify(preset: str, tolerance: float) -> list[str]:
    """Problems found; empty when the analytic counts match the published ones."""
    _ensure_import_paths()
    from modeling import count_parameters
    from persistence import load_config

    breakdown = count_parameters(load_config(preset))
    problems = []
    for label, got, want in (("total", breakdown.total, EXPECTED_TOTAL), ("fleet", breakdown.fleet, EXPECTED_FLEET)):
        if abs(got - want) > tolerance * want:
            problems.append(f"{label} {got} is not within {tolerance:.0%} of {want}")
    lo, hi = RATIO_RANGE
    if not lo <= breakdown.ratio <= hi:
        problems.append(f"ratio {breakdown.ratio:.3f} outside [{lo}, {hi}]")
    return problems


def main() -> int:
    parser = argparse.ArgumentParser(description="Check analytic parameter counts of a preset against published sizes.")
    parser.add_argument("--config", default="base9", help="Preset name or config path.")
    parser.add_argument("--tolerance", type=float, default=0.05)
    args = parser.parse_args()

    problems = verify(args.config, args.tolerance)
    for p in problems:
        print(f"FAIL {p}", file=sys.stderr)
    if problems:
        return 1
    print(f"OK parameter counts for {args.config}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
