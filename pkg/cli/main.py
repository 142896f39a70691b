from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from dotenv import load_dotenv


def _repo_root() -> Path:
    # `cli/main.py` lives at `<repo>/cli/main.py`
    return Path(__file__).resolve().parents[1]


def _ensure_src_on_path() -> None:
    src = _repo_root() / "src"
    if not src.is_dir():
        return
    s = str(src)
    if s not in sys.path:
        sys.path.insert(0, s)


_ensure_src_on_path()

from data import generate, read_dataset, task_from_spec  # noqa: E402
from modeling import count_parameters, size_variants  # noqa: E402
from modeling.tokenizers import ModalityGeometry  # noqa: E402
from persistence import atomic_write_bytes, load_checkpoint, load_config, save_checkpoint  # noqa: E402
from schedules import dump_lines, stats  # noqa: E402
from schemas.run_config import ConfigError, ModalitySpec, RunConfig, TaskSpec  # noqa: E402
from training import evaluate, linear_probe, plan_for, run_training, task_datasets, with_overrides  # noqa: E402
from training.runner import initial_model  # noqa: E402

logger = logging.getLogger("polyvit.cli")

_GEOMETRY_KEYS = ("input_shape", "patch", "allow_crop")


def _load_env() -> None:
    load_dotenv(_repo_root() / ".env", override=False)
    load_dotenv(_repo_root() / ".env.local", override=False)


def _configure_logging() -> None:
    level = (os.getenv("POLYVIT_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )


def _output_path(value: str) -> Path:
    """Relative output paths land under POLYVIT_OUTPUT_DIR when it is set."""
    path = Path(value)
    base = os.getenv("POLYVIT_OUTPUT_DIR")
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _fmt_count(n: int) -> str:
    return f"{n} ({n / 1e6:.1f}M)"


# --- subcommands ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = with_overrides(
        load_config(args.config),
        seed=args.seed,
        schedule=args.schedule,
        max_steps=args.max_steps,
    )
    out = _output_path(args.out or str(Path(config.output.dir) / config.output.checkpoint))
    log_path = _output_path(args.log) if args.log else out.with_name(config.output.log)
    result = run_training(config)
    save_checkpoint(out, result.model, config, result.state)
    result.log.write(log_path)
    print(f"trained {len(result.plan)} steps ({result.plan.kind}) -> {out}", flush=True)
    for task, value in sorted(result.log.final_metrics().items()):
        print(f"  {task}: {value:.4f}", flush=True)
    return 0


def _parse_inline_task(text: str) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError("--task", f"expected key=value, got {part!r}")
        key, value = (s.strip() for s in part.split("=", 1))
        fields[key] = value
    return fields


def _probe_task(config: RunConfig, spec: str) -> Tuple[str, TaskSpec, ModalityGeometry]:
    """A configured task name, or an inline `modality=audio;classes=4;input_shape=16,8,1;patch=4,4` spec."""
    if "=" not in spec:
        if spec not in config.tasks:
            raise ConfigError("--task", f"unknown task {spec!r}; expected one of {config.task_names()}")
        task = config.tasks[spec]
        return spec, task, config.geometries()[task.modality]
    fields = _parse_inline_task(spec)
    geometry_fields = {k: fields.pop(k) for k in _GEOMETRY_KEYS if k in fields}
    try:
        task = TaskSpec.model_validate(fields)
    except ValueError as e:
        raise ConfigError("--task", str(e).splitlines()[0]) from None
    if geometry_fields:
        try:
            geometry = ModalitySpec.model_validate(geometry_fields).geometry(task.modality)
        except ValueError as e:
            raise ConfigError("--task", str(e).splitlines()[0]) from None
    elif task.modality in config.modalities:
        geometry = config.geometries()[task.modality]
    else:
        raise ConfigError("--task", f"modality {task.modality!r} needs input_shape and patch")
    return f"probe_{task.modality}", task, geometry


def cmd_probe(args: argparse.Namespace) -> int:
    model, _, config = load_checkpoint(args.ckpt)
    name, task, geometry = _probe_task(config, args.task)
    splits = generate(task_from_spec(task, geometry))
    result = linear_probe(
        model,
        task,
        splits["train"],
        geometry=geometry,
        val=splits[args.split],
        steps=args.steps or config.train.probe_steps,
        lr=config.train.probe_lr,
        convert=args.convert is not None,
        seed=config.train.seed,
    )
    via = f" via {result.source_modality}" if result.source_modality else ""
    print(f"probe {name} ({geometry.modality} {geometry.input_shape}){via}", flush=True)
    for key, value in sorted(result.metrics.items()):
        print(f"  {key}={value:.4f}", flush=True)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model, _, config = load_checkpoint(args.ckpt)
    if args.task not in config.tasks:
        raise ConfigError("--task", f"unknown task {args.task!r}; expected one of {config.task_names()}")
    if args.data:
        _, dataset = read_dataset(Path(args.data))
    else:
        dataset = task_datasets(config)[args.task][args.split]
    for metric, value in evaluate(model, args.task, dataset).items():
        print(f"{args.task} {args.split} {metric}={value:.4f}", flush=True)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    config = with_overrides(load_config(args.config), seed=args.seed, schedule=args.schedule)
    plan = plan_for(config)
    lines = dump_lines(plan)
    if args.dump:
        atomic_write_bytes(_output_path(args.dump), "".join(f"{line}\n" for line in lines).encode("utf-8"))
    s = stats(plan)
    print(f"{plan.kind} plan: {s.length} steps, longest run {s.longest_run}", flush=True)
    for j, count in enumerate(s.counts):
        share = 100.0 * count / s.length if s.length else 0.0
        print(f"  {plan.name_of(j)}: {count} ({share:.2f}%)", flush=True)
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    breakdown = count_parameters(config)
    print(f"shared: {_fmt_count(breakdown.shared)}", flush=True)
    for modality, n in breakdown.per_modality.items():
        print(f"modality {modality}: {_fmt_count(n)}", flush=True)
    for task, n in breakdown.per_task.items():
        print(f"task {task}: {_fmt_count(n)}", flush=True)
    print(f"total: {_fmt_count(breakdown.total)}", flush=True)
    print(f"single-task fleet: {_fmt_count(breakdown.fleet)}", flush=True)
    print(f"ratio: {breakdown.ratio:.2f}", flush=True)
    for variant, n in size_variants(config).items():
        print(f"variant {variant}: {_fmt_count(n)}", flush=True)
    return 0


def cmd_init(args: argparse.Namespace) -> int:
    config = with_overrides(load_config(args.config), seed=args.seed)
    out = _output_path(args.out)
    save_checkpoint(out, initial_model(config), config)
    print(f"initialized -> {out}", flush=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyvit", description="Desk-scale PolyViT co-training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Co-train a model and write a checkpoint plus train log.")
    p.add_argument("--config", required=True, help="Preset name or config file path.")
    p.add_argument("--seed", type=int, default=None, help="Override every run seed.")
    p.add_argument("--schedule", default=None, help="Override schedule.kind.")
    p.add_argument("--out", default=None, help="Checkpoint path.")
    p.add_argument("--max-steps", type=int, default=None, help="Truncate the plan (0 = no training).")
    p.add_argument("--log", default=None, help="Train log path (default: next to the checkpoint).")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="Linear-probe a checkpoint's frozen features on a task.")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--task", required=True, help="Task name, or inline 'modality=..;classes=..;input_shape=..;patch=..'.")
    p.add_argument(
        "--convert",
        choices=["appendix-d", "cross-modal"],
        default=None,
        help="Derive a tokenizer for unseen geometries (the two names are equivalent).",
    )
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--split", choices=["val", "test"], default="val")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("eval", help="Evaluate a checkpoint on one task split.")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--data", default=None, help="PVDS dataset file instead of the task's synthetic split.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("schedule", help="Build a task-sampling plan and optionally dump it.")
    p.add_argument("--config", required=True)
    p.add_argument("--dump", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--schedule", default=None)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("params", help="Print the parameter breakdown and the single-task fleet comparison.")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("init", help="Write the initial (untrained) checkpoint for a config.")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _load_env()
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return int(args.func(args))
    except (ValueError, RuntimeError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr, flush=True)
        return 2
