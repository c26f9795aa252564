from .config import ModelConfig
from .params import init_params, integrator_prefix, param_shapes

__all__ = ["ModelConfig", "init_params", "integrator_prefix", "param_shapes"]
