"""Postprocessed stochastic theta-methods for sampling invariant measures of Brownian dynamics."""
from .model import BrownianDynamics, NoiseStream, make_problem
from .schemes import SchemeSpec, PostKind, preset
from .newton import NewtonConfig

__version__ = "0.1.0"

__all__ = ["BrownianDynamics", "NoiseStream", "make_problem", "SchemeSpec", "PostKind", "preset",
           "NewtonConfig", "__version__"]
