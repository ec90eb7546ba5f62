"""Counter-based Brownian increments with exact bridge refinement.

Each trajectory owns a keyed Philox stream, so ensembles need no
coordination and resampling one trajectory cannot disturb another.  A path
stores plain increments: column 0..m-1 drive the velocity noise modes,
column m drives the scalar director rotation.

``refine`` halves the step by conditional (Brownian bridge) sampling; the
two children of a coarse increment sum back to it up to a single float
rounding (one subtraction is the only inexact operation), which is what
lets one realization be consumed at several resolutions by different
schemes.  Bitwise-equal pair sums are not achievable for unconstrained
Gaussian splits: when the parent is much smaller than its children no
double y satisfies fl(x + y) == parent at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BrownianPath", "sample_path", "refine"]

_BASE_LANE = 0
_BRIDGE_LANE = 1


def _generator(seed: int, trajectory: int, lane: int, level: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, trajectory & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    counter = np.array([lane, level, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


@dataclass(frozen=True)
class BrownianPath:
    """Increments of (W_1, W_2) on a uniform step grid."""

    seed: int
    trajectory: int
    dt: float
    mode_count: int
    increments: np.ndarray  # (n_steps, mode_count + 1)
    level: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    def w1(self, step: int) -> np.ndarray:
        return self.increments[step, : self.mode_count]

    def w2(self, step: int) -> float:
        return float(self.increments[step, self.mode_count])


def sample_path(
    seed: int, trajectory: int, dt: float, n_steps: int, mode_count: int
) -> BrownianPath:
    """Draw a fresh path; increments are N(0, dt), independent across columns."""
    if dt <= 0.0 or n_steps < 1:
        raise ValueError("need dt > 0 and n_steps >= 1")
    gen = _generator(seed, trajectory, _BASE_LANE, 0)
    inc = gen.standard_normal((n_steps, mode_count + 1)) * np.sqrt(dt)
    return BrownianPath(seed, trajectory, dt, mode_count, inc, level=0)


def refine(path: BrownianPath) -> BrownianPath:
    """Split every increment in two by bridge sampling.

    left ~ N(inc/2, dt/4) conditionally on the parent; right = inc - left,
    so adjacent pairs of the refined path sum to the parent increments up
    to one rounding of the child scale (|pair - parent| <= eps * max child
    magnitude), not merely statistically.
    """
    gen = _generator(path.seed, path.trajectory, _BRIDGE_LANE, path.level + 1)
    xi = gen.standard_normal(path.increments.shape)
    left = 0.5 * path.increments + 0.5 * np.sqrt(path.dt) * xi
    right = path.increments - left
    fine = np.empty((2 * path.n_steps, path.increments.shape[1]))
    fine[0::2] = left
    fine[1::2] = right
    return BrownianPath(
        seed=path.seed,
        trajectory=path.trajectory,
        dt=path.dt / 2.0,
        mode_count=path.mode_count,
        increments=fine,
        level=path.level + 1,
    )
