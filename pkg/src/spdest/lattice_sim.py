"""Explicit Euler-Maruyama simulation of the stochastic heat equation on a
1-D lattice with Dirichlet boundaries.

The spatial interval [0, L] is split into n_x cells of width dx = L/n_x,
giving n_x + 1 sites at x_i = i*dx; sites 0 and n_x are pinned to zero.
The drift is the standard second difference scaled by 1/(2 dx^2) (for
L = 1 this is the tridiagonal n_x^2/2 * (1, -2, 1) stencil) and the
per-site noise amplitude is sigma(u_i)/sqrt(dx) (= sigma(u_i)*sqrt(n_x)
at L = 1). Time advances in n_t explicit steps of dt = T/n_t, subject to
the stability requirement dt <= dx^2.

Realization streams come from a counter-based Philox generator keyed by
(master_seed, realization_index), so distinct realizations are
independent and any single realization is reproducible bit-for-bit
regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SimulationDiverged, ValidationError, WindowUnavailable
from .sigma_models import SigmaModel, eval_sigma

__all__ = [
    "GridConfig",
    "NoiseSpec",
    "RollingField",
    "ArrayField",
    "DeterministicTrajectory",
    "SimulationSummary",
    "apply_drift",
    "em_step",
    "simulate_stream",
    "solve_deterministic",
    "SnapshotWriter",
]

TIME_STEP_RULES = ("nt-equals-nx-squared", "explicit")

# Sub-stream tags for deriving independent generators from one master seed.
NOISE_STREAM = 0
POINT_STREAM = 1


@dataclass(frozen=True)
class GridConfig:
    """Lattice geometry and time horizon.

    n_x counts spatial cells; the state vector has n_x + 1 entries with
    boundary sites 0 and n_x held at zero. Under the default time rule
    n_t is forced to n_x**2, which makes dt = dx^2 exactly at L = T = 1.
    """

    length: float = 1.0
    horizon: float = 1.0
    n_x: int = 2 ** 9
    n_t: int | None = None
    u0: float = 6.0
    time_step_rule: str = "nt-equals-nx-squared"

    def __post_init__(self):
        if self.time_step_rule not in TIME_STEP_RULES:
            raise ValidationError(f"unknown time_step_rule {self.time_step_rule!r}")
        if self.n_t is None:
            if self.time_step_rule != "nt-equals-nx-squared":
                raise ValidationError("n_t is required with the explicit time rule")
            object.__setattr__(self, "n_t", self.n_x ** 2)
        if self.time_step_rule == "nt-equals-nx-squared" and self.n_t != self.n_x ** 2:
            raise ValidationError(
                f"time rule nt-equals-nx-squared requires n_t = n_x^2, got {self.n_t}")
        if self.n_x < 4:
            raise ValidationError("n_x must be at least 4")
        if self.n_t < 1:
            raise ValidationError("n_t must be positive")
        if not (self.length > 0 and self.horizon > 0):
            raise ValidationError("length and horizon must be positive")
        # Explicit scheme stability; equality (the paper's N_t = N_x^2 at
        # L = T = 1) is admitted.
        if self.dt > self.dx ** 2 * (1.0 + 1e-12):
            raise ValidationError(
                f"unstable time step: dt={self.dt:g} exceeds dx^2={self.dx ** 2:g}")

    @property
    def dx(self) -> float:
        return self.length / self.n_x

    @property
    def dt(self) -> float:
        return self.horizon / self.n_t

    @property
    def n_sites(self) -> int:
        return self.n_x + 1

    def initial_row(self) -> np.ndarray:
        row = np.full(self.n_sites, float(self.u0))
        row[0] = row[-1] = 0.0
        return row


@dataclass(frozen=True)
class NoiseSpec:
    """Reproducible per-realization noise stream identity."""

    master_seed: int
    realization_index: int = 0

    def seed_sequence(self) -> np.random.SeedSequence:
        # Pure function of (master_seed, realization_index); the spawn key
        # tags the noise sub-stream so point-selection streams derived from
        # the same master seed never collide with it.
        return np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(NOISE_STREAM, self.realization_index),
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence()))


class RollingField:
    """Ring buffer of the most recent lattice rows.

    Keeps ``depth`` rows so that every registered predictor window
    (depth >= dj + st + 1 for each (h, eps) pair) stays fully resident
    while the full n_t x n_sites field is never materialized.
    """

    def __init__(self, n_sites: int, depth: int):
        if depth < 1:
            raise ValidationError("ring depth must be positive")
        self.n_sites = n_sites
        self.depth = depth
        self._rows = np.zeros((depth, n_sites))
        self.newest_index = -1

    @property
    def oldest_index(self) -> int:
        return max(0, self.newest_index - self.depth + 1)

    def append(self, row: np.ndarray) -> None:
        if row.shape != (self.n_sites,):
            raise ValidationError(f"row length {row.shape} != ({self.n_sites},)")
        self.newest_index += 1
        self._rows[self.newest_index % self.depth] = row

    def row(self, j: int) -> np.ndarray:
        if not self.oldest_index <= j <= self.newest_index:
            raise WindowUnavailable(
                f"row {j} not resident (have [{self.oldest_index}, {self.newest_index}])")
        return self._rows[j % self.depth]

    def window(self, j_lo: int, j_hi: int, i_lo: int, i_hi: int) -> np.ndarray:
        """Copy of rows j_lo..j_hi (time-ordered), columns i_lo..i_hi inclusive."""
        if j_lo < self.oldest_index or j_hi > self.newest_index or j_lo > j_hi:
            raise WindowUnavailable(
                f"rows [{j_lo}, {j_hi}] not resident "
                f"(have [{self.oldest_index}, {self.newest_index}])")
        if i_lo < 0 or i_hi >= self.n_sites or i_lo > i_hi:
            raise WindowUnavailable(f"sites [{i_lo}, {i_hi}] outside lattice")
        idx = np.arange(j_lo, j_hi + 1) % self.depth
        return self._rows[idx, i_lo:i_hi + 1]


class ArrayField:
    """Field view over a fully materialized (n_rows, n_sites) array."""

    def __init__(self, rows: np.ndarray):
        self._rows = np.asarray(rows, dtype=float)
        if self._rows.ndim != 2:
            raise ValidationError("ArrayField expects a 2-D array")
        self.n_sites = self._rows.shape[1]

    @property
    def n_rows(self) -> int:
        return self._rows.shape[0]

    def row(self, j: int) -> np.ndarray:
        if not 0 <= j < self.n_rows:
            raise WindowUnavailable(f"row {j} outside [0, {self.n_rows - 1}]")
        return self._rows[j]

    def window(self, j_lo: int, j_hi: int, i_lo: int, i_hi: int) -> np.ndarray:
        if j_lo < 0 or j_hi >= self.n_rows or j_lo > j_hi:
            raise WindowUnavailable(f"rows [{j_lo}, {j_hi}] outside [0, {self.n_rows - 1}]")
        if i_lo < 0 or i_hi >= self.n_sites or i_lo > i_hi:
            raise WindowUnavailable(f"sites [{i_lo}, {i_hi}] outside lattice")
        return self._rows[j_lo:j_hi + 1, i_lo:i_hi + 1]


def apply_drift(state: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Second-difference drift: 1/(2 dx^2) * (u_{i-1} - 2 u_i + u_{i+1}) at
    interior sites, zero at the two boundary rows."""
    state = np.asarray(state, dtype=float)
    if state.shape != (cfg.n_sites,):
        raise ValidationError(f"state length {state.shape} != ({cfg.n_sites},)")
    out = np.zeros_like(state)
    c = 0.5 / (cfg.dx * cfg.dx)
    out[1:-1] = c * (state[:-2] - 2.0 * state[1:-1] + state[2:])
    return out


def _euler_step(state: np.ndarray, cfg: GridConfig, sigma_interior: np.ndarray,
                gauss_interior: np.ndarray) -> np.ndarray:
    """One explicit step; shared verbatim by stochastic and zero-noise paths
    so that sigma == 0 reproduces the deterministic recursion bit-for-bit."""
    c_drift = cfg.dt * 0.5 / (cfg.dx * cfg.dx)
    c_noise = np.sqrt(cfg.dt) / np.sqrt(cfg.dx)
    out = np.zeros_like(state)
    interior = state[1:-1]
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is checked after
        out[1:-1] = (interior
                     + c_drift * (state[:-2] - 2.0 * interior + state[2:])
                     + c_noise * sigma_interior * gauss_interior)
    return out


def em_step(state: np.ndarray, cfg: GridConfig, model: SigmaModel,
            gauss: np.ndarray, step_index: int | None = None) -> np.ndarray:
    """Single Euler-Maruyama update.

    gauss must be an i.i.d. standard normal vector of full state length
    (boundary entries are ignored). Raises SimulationDiverged if the
    update produces a non-finite entry.
    """
    state = np.asarray(state, dtype=float)
    gauss = np.asarray(gauss, dtype=float)
    if state.shape != (cfg.n_sites,) or gauss.shape != (cfg.n_sites,):
        raise ValidationError("state and gauss must have length n_x + 1")
    sig = eval_sigma(model, state[1:-1])
    out = _euler_step(state, cfg, sig, gauss[1:-1])
    if not np.all(np.isfinite(out)):
        raise SimulationDiverged(step_index)
    return out


@dataclass
class SimulationSummary:
    steps: int
    min_value: float
    max_value: float


def simulate_stream(cfg: GridConfig, model: SigmaModel, noise: NoiseSpec,
                    observer: Callable[[int, RollingField], None] | None = None,
                    depth: int = 2) -> SimulationSummary:
    """Advance the lattice from t=0 to t=T, streaming rows through a ring buffer.

    The initial row (all-interior u0, zero boundaries) is time index 0;
    the observer is invoked after each of the n_t steps with the new time
    index and the rolling field. The full field is never materialized.
    """
    rng = noise.generator()
    ring = RollingField(cfg.n_sites, depth)
    state = cfg.initial_row()
    ring.append(state)
    lo = float(state.min())
    hi = float(state.max())
    for j in range(1, cfg.n_t + 1):
        gauss = rng.standard_normal(cfg.n_sites)
        sig = eval_sigma(model, state[1:-1])
        state = _euler_step(state, cfg, sig, gauss[1:-1])
        if not np.all(np.isfinite(state)):
            raise SimulationDiverged(j)
        ring.append(state)
        lo = min(lo, float(state.min()))
        hi = max(hi, float(state.max()))
        if observer is not None:
            observer(j, ring)
    return SimulationSummary(steps=cfg.n_t, min_value=lo, max_value=hi)


class DeterministicTrajectory:
    """Random access to the zero-noise companion solution.

    Small runs keep every row; large runs keep checkpoints every ``stride``
    steps and re-run the (cheap, noise-free) recursion to serve a block,
    so served values always equal exact re-simulation.
    """

    def __init__(self, cfg: GridConfig, max_full_bytes: int = 256 * 2 ** 20):
        self.cfg = cfg
        n_rows = cfg.n_t + 1
        full_bytes = n_rows * cfg.n_sites * 8
        self.n_rows = n_rows
        self.n_sites = cfg.n_sites
        self._zero_sig = np.zeros(cfg.n_x - 1)
        if full_bytes <= max_full_bytes:
            self.stride = 1
            self._full = np.empty((n_rows, cfg.n_sites))
            state = cfg.initial_row()
            self._full[0] = state
            for j in range(1, n_rows):
                state = _euler_step(state, cfg, self._zero_sig, self._zero_sig)
                self._full[j] = state
            self._checkpoints = None
        else:
            self._full = None
            self.stride = max(2, -(-full_bytes // max_full_bytes))
            n_ckpt = (n_rows - 1) // self.stride + 1
            self._checkpoints = np.empty((n_ckpt, cfg.n_sites))
            state = cfg.initial_row()
            self._checkpoints[0] = state
            for j in range(1, n_rows):
                state = _euler_step(state, cfg, self._zero_sig, self._zero_sig)
                if j % self.stride == 0:
                    self._checkpoints[j // self.stride] = state
            self._block_start = -1
            self._block = None

    def _load_block(self, b: int) -> None:
        start = b * self.stride
        count = min(self.stride, self.n_rows - start)
        block = np.empty((count, self.n_sites))
        state = self._checkpoints[b].copy()
        block[0] = state
        for k in range(1, count):
            state = _euler_step(state, self.cfg, self._zero_sig, self._zero_sig)
            block[k] = state
        self._block_start = start
        self._block = block

    def row(self, j: int) -> np.ndarray:
        if not 0 <= j < self.n_rows:
            raise WindowUnavailable(f"row {j} outside [0, {self.n_rows - 1}]")
        if self._full is not None:
            return self._full[j]
        b = j // self.stride
        if self._block is None or self._block_start != b * self.stride:
            self._load_block(b)
        return self._block[j - self._block_start]

    def window(self, j_lo: int, j_hi: int, i_lo: int, i_hi: int) -> np.ndarray:
        if j_lo < 0 or j_hi >= self.n_rows or j_lo > j_hi:
            raise WindowUnavailable(f"rows [{j_lo}, {j_hi}] outside [0, {self.n_rows - 1}]")
        if i_lo < 0 or i_hi >= self.n_sites or i_lo > i_hi:
            raise WindowUnavailable(f"sites [{i_lo}, {i_hi}] outside lattice")
        if self._full is not None:
            return self._full[j_lo:j_hi + 1, i_lo:i_hi + 1]
        out = np.empty((j_hi - j_lo + 1, i_hi - i_lo + 1))
        for j in range(j_lo, j_hi + 1):
            out[j - j_lo] = self.row(j)[i_lo:i_hi + 1]
        return out


def solve_deterministic(cfg: GridConfig,
                        max_full_bytes: int = 256 * 2 ** 20) -> DeterministicTrajectory:
    """Zero-noise solution computed by the same stepping rule as the
    stochastic stream; noise-independent, safe to share across realizations."""
    return DeterministicTrajectory(cfg, max_full_bytes=max_full_bytes)


class SnapshotWriter:
    """Observer writing decimated raw rows as CSV (time_index, x_index, value)."""

    def __init__(self, path, stride: int = 1):
        if stride < 1:
            raise ValidationError("snapshot stride must be positive")
        self.path = path
        self.stride = stride
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write("time_index,x_index,value\n")

    def __call__(self, j: int, ring: RollingField) -> None:
        if j % self.stride:
            return
        row = ring.row(j)
        lines = [f"{j},{i},{row[i]:.17g}\n" for i in range(row.shape[0])]
        self._fh.writelines(lines)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
