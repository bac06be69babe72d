"""Simulation and statistical verification of a self-repelling diffusion
with a trigonometric-polynomial interaction, via its finite Markov lift."""

__version__ = "0.1.0"

from .model import (EnvState, FullState, ModelSpec, apply_generator,  # noqa: E402
                    full_to_env, env_to_full, pi_sample, sigma2_bounds)
from .integrate import SimConfig, Trajectory, simulate  # noqa: E402
from .montecarlo import EnsembleConfig, run_ensemble, stationary_autocov  # noqa: E402
from .poly import PolyTestFn  # noqa: E402

__all__ = ["EnvState", "FullState", "ModelSpec", "apply_generator", "full_to_env",
           "env_to_full", "pi_sample", "sigma2_bounds", "SimConfig", "Trajectory",
           "simulate", "EnsembleConfig", "run_ensemble", "stationary_autocov",
           "PolyTestFn"]
