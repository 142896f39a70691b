"""
Shipped run configurations.

Keep this file logic-free: plain nested mappings in the text-config shape, validated on request.
`base9` / `large9` carry the nine-task benchmark recipe (budgets, warmups, base learning rates,
head init, mixup and stochastic depth for audio, split conventions). `toy3` is a desk-scale
three-task stand-in with one synthetic task per modality.
"""

from __future__ import annotations

import copy
from typing import Any, Callable, Dict

from schedules.plan import BASELINE_TASK_ORDER

from .run_config import RunConfig, validate_run_config

IMAGE = {"input_shape": "384,384,3", "patch": "16,16"}
VIDEO = {"input_shape": "32,224,224,3", "patch": "4,16,16"}
AUDIO = {"input_shape": "800,128,1", "patch": "16,16", "stochastic_depth": 0.3}

NINE_TASKS: Dict[str, Dict[str, Any]] = {
    "cifar100": {
        "modality": "image", "classes": 100, "steps": 10000, "warmup": 500, "lr": 0.03,
        "head_init": "lecun_normal", "val_fraction": 0.02, "data_seed": 1,
    },
    "cifar10": {
        "modality": "image", "classes": 10, "steps": 10000, "warmup": 500, "lr": 0.03,
        "head_init": "lecun_normal", "val_fraction": 0.02, "data_seed": 2,
    },
    "pets": {
        "modality": "image", "classes": 37, "steps": 500, "warmup": 100, "lr": 0.03,
        "head_init": "lecun_normal", "val_fraction": 0.1, "data_seed": 3,
    },
    "resisc45": {
        "modality": "image", "classes": 45, "steps": 2500, "warmup": 200, "lr": 0.1,
        "head_init": "lecun_normal", "val_fraction": 0.2, "test_fraction": 0.2, "data_seed": 4,
    },
    "imagenet1k": {
        "modality": "image", "classes": 1000, "steps": 20000, "warmup": 500, "lr": 0.03,
        "head_init": "lecun_normal", "val_fraction": 0.01, "data_seed": 5,
    },
    "kinetics400": {
        "modality": "video", "classes": 400, "steps": 100700, "warmup": 8392, "lr": 0.1,
        "head_init": "zeros", "data_seed": 6,
    },
    "moments_in_time": {
        "modality": "video", "classes": 339, "steps": 123600, "warmup": 30900, "lr": 0.25,
        "head_init": "zeros", "data_seed": 7,
    },
    "mini_audioset": {
        "modality": "audio", "classes": 527, "steps": 15900, "warmup": 795, "lr": 0.5,
        "head_init": "zeros", "loss": "sigmoid", "mixup_alpha": 0.3, "data_seed": 8,
    },
    "vggsound": {
        "modality": "audio", "classes": 309, "steps": 135000, "warmup": 6750, "lr": 0.5,
        "head_init": "zeros", "mixup_alpha": 0.3, "data_seed": 9,
    },
}

BASE9: Dict[str, Any] = {
    "model": {"layers": 12, "width": 768, "heads": 12, "mlp_ratio": 4, "adapt_layers": 0},
    "modality": {"image": IMAGE, "video": VIDEO, "audio": AUDIO},
    "task": NINE_TASKS,
    "schedule": {"kind": "weighted", "order": ",".join(BASELINE_TASK_ORDER)},
    "optimizer": {"momentum": 0.9},
    "train": {"batch_size": 16},
    "pretrained": {"enabled": True, "image_shape": "224,224,3", "patch": "16,16", "inflation": "central_frame"},
}

LARGE9: Dict[str, Any] = {
    **BASE9,
    "model": {"layers": 24, "width": 1024, "heads": 16, "mlp_ratio": 4, "adapt_layers": 0},
}

TOY3: Dict[str, Any] = {
    "model": {"layers": 4, "width": 32, "heads": 2, "mlp_ratio": 4, "adapt_layers": 1, "init_seed": 0},
    "modality": {
        "image": {"input_shape": "8,8,3", "patch": "4,4"},
        "video": {"input_shape": "4,8,8,3", "patch": "2,4,4"},
        "audio": {"input_shape": "16,8,1", "patch": "4,4", "stochastic_depth": 0.1},
    },
    "task": {
        "toy_image": {
            "modality": "image", "classes": 4, "steps": 600, "warmup": 20, "lr": 0.03,
            "head_init": "lecun_normal", "noise": 0.3, "data_seed": 11,
        },
        "toy_video": {
            "modality": "video", "classes": 4, "steps": 600, "warmup": 20, "lr": 0.03,
            "noise": 0.3, "data_seed": 12,
        },
        "toy_audio": {
            "modality": "audio", "classes": 4, "steps": 600, "warmup": 20, "lr": 0.03,
            "noise": 0.3, "data_seed": 13,
        },
    },
    "schedule": {"kind": "weighted", "seed": 0},
    "train": {"batch_size": 16, "eval_every": 0, "probe_steps": 300, "probe_lr": 0.1},
}


def _loader(data: Dict[str, Any]) -> Callable[[], RunConfig]:
    return lambda: validate_run_config(copy.deepcopy(data))


PRESETS: Dict[str, Callable[[], RunConfig]] = {
    "base9": _loader(BASE9),
    "large9": _loader(LARGE9),
    "toy3": _loader(TOY3),
}
