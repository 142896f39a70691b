from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict


def _repo_root() -> Path:
    return Path(__file__).resolve().parents[1]


def _ensure_import_paths() -> None:
    src = str(_repo_root() / "src")
    if src not in sys.path:
        sys.path.insert(0, src)


def _canonical_json_bytes(obj: Dict[str, Any]) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def build_report(config_name: str) -> Dict[str, Any]:
    _ensure_import_paths()
    from modeling import count_parameters, size_variants
    from persistence import load_config

    config = load_config(config_name)
    return {
        "config": config_name,
        "breakdown": count_parameters(config).to_dict(),
        "variants": size_variants(config),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description="Export the parameter breakdown of a config as canonical JSON.")
    parser.add_argument("--config", default="base9", help="Preset name or config path.")
    parser.add_argument("--out", default=str(_repo_root() / "docs" / "param_report.json"))
    args = parser.parse_args()

    _ensure_import_paths()
    from persistence import atomic_write_bytes

    atomic_write_bytes(Path(args.out), _canonical_json_bytes(build_report(args.config)))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
