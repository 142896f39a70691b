from .sgd_momentum import MOMENTUM_FORM, OptimizerState, lr_at, sgd_step

__all__ = ["MOMENTUM_FORM", "OptimizerState", "lr_at", "sgd_step"]
