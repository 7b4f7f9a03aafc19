"""Discrete predictor of the squared diffusion function.

For a conditioning point (x0, t0) with lattice coordinates (i0, j0), the
window mesh is W = {(i, j): |i - i0| <= di, 0 <= j - j0 <= dj} and the
predictor value is

    sigma_tilde_sq = [ 1/(sqrt(2)*eps) * (T*L)/(n_x*n_t)
                       * sum_{(i,j) in W} (Lh u - Lh u_det)_i(t_j) ]^2,

where Lh is the forward time difference over h^2 minus the second space
difference over h (coefficient a, default 1) plus an optional first
difference term (coefficient b, default 0), and u_det is the zero-noise
companion solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientDomain,
    PointSkipped,
    SimulationDiverged,
    ValidationError,
)
from .lattice_sim import (
    GridConfig,
    NoiseSpec,
    RollingField,
    _euler_step,
)
from .sigma_models import SigmaModel, eval_sigma

__all__ = [
    "WindowSpec",
    "LhCoefficients",
    "Sample",
    "apply_lh",
    "sigma_tilde",
    "extract_dataset",
]


def _as_exact_int(value: float, name: str) -> int:
    k = round(value)
    if abs(value - k) > 1e-9 * max(1.0, abs(value)):
        raise ValidationError(f"{name} = {value:g} is not an integer lattice count")
    return int(k)


@dataclass(frozen=True)
class LhCoefficients:
    """Constant coefficients of the discrete operator: ``a`` multiplies the
    second difference, ``b`` the forward first difference. (1, 0) is the
    plain form used for all reported tables."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError("second-difference coefficient a must be positive")

    @classmethod
    def parse(cls, text: str) -> "LhCoefficients":
        """Parse CLI syntax like "a=0.5" or "a=1,b=0.25"."""
        kwargs = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in ("a", "b") or not val:
                raise ValidationError(f"bad operator coefficient spec {text!r}")
            kwargs[key] = float(val)
        return cls(**kwargs)


PAPER_EXACT = LhCoefficients(a=1.0, b=0.0)


@dataclass(frozen=True)
class WindowSpec:
    """Validated window geometry for one (h, eps) pair.

    h and eps must be integer multiples of dx; the derived counts are
    di = eps*n_x/L (window half-width in sites), dj = eps*n_t/T (window
    depth in steps), sh = h*n_x/L (spatial shift), st = h^2*n_t/T
    (temporal shift).
    """

    h: float
    eps: float
    di: int
    dj: int
    sh: int
    st: int

    @classmethod
    def from_grid(cls, cfg: GridConfig, h: float, eps: float) -> "WindowSpec":
        if h <= 0 or eps <= 0:
            raise ValidationError("h and eps must be positive")
        sh = _as_exact_int(h * cfg.n_x / cfg.length, "h*n_x/L")
        st = _as_exact_int(h * h * cfg.n_t / cfg.horizon, "h^2*n_t/T")
        di = _as_exact_int(eps * cfg.n_x / cfg.length, "eps*n_x/L")
        dj = _as_exact_int(eps * cfg.n_t / cfg.horizon, "eps*n_t/T")
        if sh < 1:
            raise ValidationError(f"h = {h:g} is below one lattice cell")
        if st < 1:
            raise ValidationError(f"h^2 = {h * h:g} is below one time step")
        if di < 1 or dj < 1:
            raise ValidationError(f"eps = {eps:g} is below one lattice cell")
        return cls(h=float(h), eps=float(eps), di=di, dj=dj, sh=sh, st=st)

    @property
    def mesh_size(self) -> int:
        return (2 * self.di + 1) * (self.dj + 1)

    @property
    def margin_sites(self) -> int:
        return self.di + self.sh

    @property
    def span_steps(self) -> int:
        return self.dj + self.st


@dataclass(frozen=True)
class Sample:
    """One extracted observation: conditioning value and predictor value."""

    u_value: float
    sigma_tilde_sq: float
    x0: float
    t0: float
    realization_id: int
    h: float
    eps: float


def apply_lh(field, i: int, j: int, w: WindowSpec, coeff: LhCoefficients = PAPER_EXACT) -> float:
    """Discrete operator at a single lattice point.

    [u_i(t_{j+st}) - u_i(t_j)]/h^2 - a*[u_{i-sh} - 2 u_i + u_{i+sh}](t_j)/h^2
    + b*[u_{i+sh} - u_i](t_j)/h. Raises WindowUnavailable when the needed
    rows or sites are not resident.
    """
    block = field.window(j, j + w.st, i - w.sh, i + w.sh)
    h2 = w.h * w.h
    center = block[0, w.sh]
    time_diff = (block[w.st, w.sh] - center) / h2
    space_second = (block[0, 0] - 2.0 * center + block[0, 2 * w.sh]) / h2
    space_first = (block[0, 2 * w.sh] - center) / w.h
    return time_diff - coeff.a * space_second + coeff.b * space_first


def _lh_window_sum(block: np.ndarray, w: WindowSpec, coeff: LhCoefficients) -> float:
    """Sum of Lh over the window mesh, vectorized over a block that spans
    rows j0..j0+dj+st and columns i0-di-sh..i0+di+sh."""
    di, dj, sh, st = w.di, w.dj, w.sh, w.st
    h2 = w.h * w.h
    win = block[: dj + 1]
    center = win[:, sh: sh + 2 * di + 1]
    t_part = float(block[st: st + dj + 1, sh: sh + 2 * di + 1].sum() - center.sum())
    s_left = float(win[:, 0: 2 * di + 1].sum())
    s_center = float(center.sum())
    s_right = float(win[:, 2 * sh: 2 * sh + 2 * di + 1].sum())
    total = (t_part - coeff.a * (s_left - 2.0 * s_center + s_right)) / h2
    total += coeff.b * (s_right - s_center) / w.h
    return total


def _norm_factor(cfg: GridConfig, w: WindowSpec) -> float:
    return (1.0 / (math.sqrt(2.0) * w.eps)) * (cfg.horizon * cfg.length / (cfg.n_x * cfg.n_t))


def _check_margins(cfg: GridConfig, w: WindowSpec, i0: int, j0: int) -> None:
    m = w.margin_sites
    if i0 - m < 1 or i0 + m > cfg.n_x - 1:
        raise PointSkipped(
            f"site {i0} within {m} sites of the boundary (valid [{1 + m}, {cfg.n_x - 1 - m}])")
    if j0 < 0 or j0 + w.span_steps > cfg.n_t - 1:
        raise PointSkipped(
            f"time index {j0} too close to the final time (needs {w.span_steps} extra rows)")


def sigma_tilde(field, det_field, i0: int, j0: int, w: WindowSpec,
                coeff: LhCoefficients, cfg: GridConfig) -> float:
    """Predictor value at one conditioning point given resident field views."""
    _check_margins(cfg, w, i0, j0)
    m = w.margin_sites
    blk_u = field.window(j0, j0 + w.span_steps, i0 - m, i0 + m)
    blk_d = det_field.window(j0, j0 + w.span_steps, i0 - m, i0 + m)
    total = _lh_window_sum(blk_u - blk_d, w, coeff)
    val = _norm_factor(cfg, w) * total
    return val * val


def _select_points(cfg: GridConfig, w: WindowSpec, n_points: int, point_seed: int,
                   strategy: str) -> tuple[np.ndarray, np.ndarray]:
    """Pick conditioning points among all valid lattice points, sorted by
    (j0, i0) so they can be evaluated as rows stream past."""
    m = w.margin_sites
    i_lo, i_hi = 1 + m, cfg.n_x - 1 - m
    j_hi = cfg.n_t - 1 - w.span_steps
    if n_points < 1:
        raise ValidationError("n_points must be positive")
    if i_hi < i_lo or j_hi < 0:
        raise InsufficientDomain(
            f"window (di={w.di}, sh={w.sh}, dj={w.dj}, st={w.st}) leaves no valid points")
    n_i = i_hi - i_lo + 1
    n_valid = n_i * (j_hi + 1)
    if n_points > n_valid:
        raise InsufficientDomain(f"{n_points} points requested, {n_valid} valid")
    if strategy == "random":
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(point_seed)))
        if n_valid <= max(1_000_000, 4 * n_points):
            idx = rng.permutation(n_valid)[:n_points]
        else:
            chosen = set()
            while len(chosen) < n_points:
                draw = rng.integers(0, n_valid, size=n_points - len(chosen))
                chosen.update(int(v) for v in draw)
            idx = np.fromiter(sorted(chosen), dtype=np.int64)
    elif strategy == "stride":
        idx = (np.arange(n_points, dtype=np.int64) * n_valid) // n_points
    else:
        raise ValidationError(f"unknown point strategy {strategy!r}")
    i0 = i_lo + idx % n_i
    j0 = idx // n_i
    order = np.lexsort((i0, j0))
    return i0[order], j0[order]


def extract_dataset(cfg: GridConfig, model: SigmaModel, noise: NoiseSpec,
                    w: WindowSpec, coeff: LhCoefficients, n_points: int,
                    point_seed: int, strategy: str = "random") -> list[Sample]:
    """Run one streaming realization and evaluate the predictor at n_points
    conditioning points chosen uniformly at random without replacement
    (or on an even stride) from the valid lattice points.

    The zero-noise companion advances in lockstep through the identical
    stepping code, so only two rolling windows are ever resident.
    """
    i0s, j0s = _select_points(cfg, w, n_points, point_seed, strategy)
    depth = w.span_steps + 1
    ring_u = RollingField(cfg.n_sites, depth)
    ring_d = RollingField(cfg.n_sites, depth)
    rng = noise.generator()
    state_u = cfg.initial_row()
    state_d = cfg.initial_row()
    ring_u.append(state_u)
    ring_d.append(state_d)
    zeros_interior = np.zeros(cfg.n_x - 1)
    norm = _norm_factor(cfg, w)
    m = w.margin_sites
    fire_at = j0s + w.span_steps
    last_needed = int(fire_at[-1])

    samples: list[Sample] = []
    k = 0
    for j in range(1, last_needed + 1):
        gauss = rng.standard_normal(cfg.n_sites)
        sig = eval_sigma(model, state_u[1:-1])
        state_u = _euler_step(state_u, cfg, sig, gauss[1:-1])
        if not np.all(np.isfinite(state_u)):
            raise SimulationDiverged(j)
        state_d = _euler_step(state_d, cfg, zeros_interior, zeros_interior)
        ring_u.append(state_u)
        ring_d.append(state_d)
        while k < len(fire_at) and fire_at[k] == j:
            i0 = int(i0s[k])
            j0 = int(j0s[k])
            blk_u = ring_u.window(j0, j0 + w.span_steps, i0 - m, i0 + m)
            blk_d = ring_d.window(j0, j0 + w.span_steps, i0 - m, i0 + m)
            total = _lh_window_sum(blk_u - blk_d, w, coeff)
            val = norm * total
            samples.append(Sample(
                u_value=float(ring_u.row(j0)[i0]),
                sigma_tilde_sq=val * val,
                x0=i0 * cfg.length / cfg.n_x,
                t0=j0 * cfg.horizon / cfg.n_t,
                realization_id=noise.realization_index,
                h=w.h,
                eps=w.eps,
            ))
            k += 1
    return samples
