"""Fast self-check suite backing the `verify` CLI subcommand.

Each check is a small, seconds-scale invariant probe; the full pytest
suite is the authoritative gate, this is the smoke test.
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import heat_kernel, rate_exponents
from .lattice_sim import ArrayField, GridConfig, NoiseSpec, apply_drift, simulate_stream
from .predictor import PAPER_EXACT, WindowSpec, apply_lh, extract_dataset
from .regression import fit, predict, prediction_interval
from .sigma_models import builtin_model, eval_sigma, eval_sigma_sq


def _check_drift_algebra():
    cfg = GridConfig(n_x=16, n_t=256)
    const = np.zeros(cfg.n_sites)
    const[1:-1] = 3.7
    out = apply_drift(const, cfg)
    deep = out[2:-2]
    if np.max(np.abs(deep)) != 0.0:
        return False, "constant interior not annihilated"
    e_k = np.zeros(cfg.n_sites)
    e_k[8] = 1.0
    out = apply_drift(e_k, cfg)
    c = 0.5 / cfg.dx ** 2
    if out[8] != -2.0 * c or out[7] != c or out[9] != c:
        return False, "unit-vector stencil mismatch"
    return True, "second-difference stencil exact"


def _check_lh_algebra():
    cfg = GridConfig(n_x=64, n_t=4096)
    w = WindowSpec.from_grid(cfg, h=2 * cfg.dx, eps=4 * cfg.dx)
    x = np.arange(cfg.n_sites) * cfg.dx
    rows = np.tile(x * x, (w.st + 1, 1))
    val = apply_lh(ArrayField(rows), 20, 0, w, PAPER_EXACT)
    if abs(val + 2.0) > 1e-10:
        return False, f"x^2 field gave {val}, expected -2"
    rows = np.tile(0.5 * x, (w.st + 1, 1))
    val = apply_lh(ArrayField(rows), 20, 0, w, PAPER_EXACT)
    if abs(val) > 1e-12:
        return False, f"affine field gave {val}, expected 0"
    return True, "operator annihilates affine, maps x^2 to -2"


def _check_zero_noise_predictor():
    cfg = GridConfig(n_x=32, n_t=1024)
    w = WindowSpec.from_grid(cfg, h=2 * cfg.dx, eps=2 * cfg.dx)
    samples = extract_dataset(cfg, builtin_model("zero"), NoiseSpec(7, 0),
                              w, PAPER_EXACT, n_points=50, point_seed=11)
    if any(s.sigma_tilde_sq != 0.0 for s in samples):
        return False, "zero model produced non-zero predictor values"
    return True, "zero model yields exactly zero predictor values"


def _check_stream_determinism():
    cfg = GridConfig(n_x=32, n_t=1024)
    model = builtin_model("sigma1")
    s1 = simulate_stream(cfg, model, NoiseSpec(123, 0))
    s2 = simulate_stream(cfg, model, NoiseSpec(123, 0))
    if (s1.min_value, s1.max_value) != (s2.min_value, s2.max_value):
        return False, "identical seeds gave different summaries"
    s3 = simulate_stream(cfg, model, NoiseSpec(123, 1))
    if (s1.min_value, s1.max_value) == (s3.min_value, s3.max_value):
        return False, "distinct realizations gave identical summaries"
    return True, "seeded streams reproducible and realization-independent"


def _check_regression_oracle():
    rng = np.random.Generator(np.random.Philox(42))
    u = rng.uniform(0, 4, size=100)
    y = rng.uniform(0, 1, size=100)
    f = fit((u, y), bandwidth=0.07)
    at = 0.37
    wgt = np.exp(-0.5 * ((at - u) / 0.07) ** 2)
    direct = float(np.sum(wgt * y) / np.sum(wgt))
    if abs(predict(f, at) - direct) > 1e-12 * abs(direct):
        return False, "prediction disagrees with direct weighted sum"
    lo, hi = prediction_interval(f, at)
    var = float(np.sum(wgt * y * y) / np.sum(wgt) - direct ** 2)
    z = 1.959963984540054
    want_lo = max(0.0, direct - z * math.sqrt(var))
    if abs(lo - want_lo) > 1e-10:
        return False, "interval disagrees with direct moments"
    _ = hi
    return True, "prediction and interval match direct weighted sums"


def _check_heat_kernel():
    t = 0.37
    x = np.linspace(-20 * math.sqrt(t), 20 * math.sqrt(t), 20001)
    mass = np.trapezoid(heat_kernel(x, t), x)
    if abs(mass - 1.0) > 1e-10:
        return False, f"kernel mass {mass} != 1"
    return True, "heat kernel integrates to one"


def _check_rate_exponents():
    w = rate_exponents(None)
    if not (math.isclose(w.rho_star, 8 / 9) and math.isclose(w.kappa_sup, 2 / 9)):
        return False, "white exponents wrong"
    r = rate_exponents(0.5)
    if not (math.isclose(r.rho_star, 8 / 11.5) and math.isclose(r.kappa_sup, 3 / 11.5)):
        return False, "riesz exponents wrong"
    return True, "rate exponents match theory"


def _check_sigma_table():
    m3 = builtin_model("sigma3")
    checks = (
        eval_sigma(builtin_model("sigma1"), 0.7) == 0.1,
        eval_sigma(builtin_model("sigma2"), -3.0) == 2.0,
        abs(eval_sigma(m3, 2.0) - 0.125) < 1e-15,
        eval_sigma_sq(m3, 2.0) == 0.125 ** 2,
    )
    if not all(checks):
        return False, "built-in table values wrong"
    return True, "built-in sigma values match their closed forms"


CHECKS = (
    ("sigma-table", _check_sigma_table),
    ("drift-algebra", _check_drift_algebra),
    ("lh-algebra", _check_lh_algebra),
    ("zero-noise-predictor", _check_zero_noise_predictor),
    ("stream-determinism", _check_stream_determinism),
    ("regression-oracle", _check_regression_oracle),
    ("heat-kernel", _check_heat_kernel),
    ("rate-exponents", _check_rate_exponents),
)


def run_all(printer=print) -> bool:
    ok_all = True
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # noqa: BLE001 - report, keep going
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        ok_all &= ok
        printer(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok_all
