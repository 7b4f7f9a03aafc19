"""Diffusion coefficient models sigma(u).

Seven built-in non-negative Lipschitz functions (constants and
exp(sin(.))-type bumps around u=2), a zero model for noise-free runs, and
user-supplied custom models. Evaluation is vectorized and non-negativity is
checked on every call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonNegativityViolation, ValidationError

__all__ = [
    "SigmaModel",
    "builtin_model",
    "model_from_id",
    "eval_sigma",
    "eval_sigma_sq",
    "BUILTIN_IDS",
]


def _s1(u):
    return np.full_like(np.asarray(u, dtype=float), 0.1)


def _s2(u):
    return np.full_like(np.asarray(u, dtype=float), 2.0)


def _s3(u):
    return 0.125 * np.exp(np.sin(4.0 * np.abs(np.asarray(u, dtype=float) - 2.0)))


def _s4(u):
    return 0.03125 * np.exp(np.sin(4.0 * np.abs(np.asarray(u, dtype=float) - 2.0))) + 1.0


def _s5(u):
    return 0.125 * np.exp(np.sin(0.8 * np.abs(np.asarray(u, dtype=float) - 2.0))) + 1.0


def _s6(u):
    return 0.125 * np.exp(np.sin(0.4 * np.abs(np.asarray(u, dtype=float) - 2.0)))


def _s7(u):
    return 0.125 * np.exp(np.sin(13.0 * np.abs(np.asarray(u, dtype=float) - 2.0)))


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


_BUILTIN_FNS: dict[str, Callable] = {
    "sigma1": _s1,
    "sigma2": _s2,
    "sigma3": _s3,
    "sigma4": _s4,
    "sigma5": _s5,
    "sigma6": _s6,
    "sigma7": _s7,
    "zero": _zero,
}

BUILTIN_IDS = tuple(_BUILTIN_FNS)

_SAFE_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "pi": math.pi, "e": math.e, "min": np.minimum, "max": np.maximum,
}


def numeric_lipschitz(fn: Callable, lo: float = -10.0, hi: float = 10.0,
                      n: int = 200_001) -> float:
    """Estimate a Lipschitz constant as max |difference quotient| on a dense grid."""
    u = np.linspace(lo, hi, n)
    v = np.asarray(fn(u), dtype=float)
    return float(np.max(np.abs(np.diff(v) / np.diff(u))))


@dataclass(frozen=True)
class SigmaModel:
    """A non-negative Lipschitz diffusion function u -> sigma(u).

    ``kind`` is one of the built-in ids, "zero", or "custom". For custom
    models the declared Lipschitz constant is trusted, not verified. For
    built-ins it is computed once by dense derivative sampling and stored
    as metadata only.
    """

    kind: str
    fn: Callable = field(repr=False)
    lipschitz: float
    expression: str | None = None

    def __call__(self, u):
        return eval_sigma(self, u)


_LIPSCHITZ_CACHE: dict[str, float] = {"sigma1": 0.0, "sigma2": 0.0, "zero": 0.0}


def builtin_model(kind: str) -> SigmaModel:
    if kind not in _BUILTIN_FNS:
        raise ValidationError(f"unknown sigma model {kind!r}; expected one of {BUILTIN_IDS}")
    fn = _BUILTIN_FNS[kind]
    if kind not in _LIPSCHITZ_CACHE:
        _LIPSCHITZ_CACHE[kind] = numeric_lipschitz(fn)
    return SigmaModel(kind=kind, fn=fn, lipschitz=_LIPSCHITZ_CACHE[kind])


class _CustomExpression:
    """Picklable wrapper evaluating a sigma(u) expression string."""

    def __init__(self, expression: str):
        self.expression = expression
        self._code = compile(expression, "<sigma>", "eval")

    def __call__(self, u):
        env = dict(_SAFE_FUNCS)
        env["u"] = np.asarray(u, dtype=float)
        return np.asarray(eval(self._code, {"__builtins__": {}}, env), dtype=float)

    def __getstate__(self):
        return self.expression

    def __setstate__(self, expression):
        self.__init__(expression)


def custom_model(expression_or_fn, lipschitz: float) -> SigmaModel:
    """Build a custom model from an expression in ``u`` or a callable.

    The caller must declare the Lipschitz constant; it is recorded, not
    verified. Non-negativity is still enforced at every evaluation.
    """
    if lipschitz is None or not np.isfinite(lipschitz) or lipschitz < 0:
        raise ValidationError("custom models require a finite non-negative Lipschitz constant")
    if callable(expression_or_fn):
        fn, expr = expression_or_fn, None
    else:
        expr = str(expression_or_fn)
        try:
            fn = _CustomExpression(expr)
            fn(np.array([0.0, 1.0]))  # fail fast on malformed expressions
        except NonNegativityViolation:
            raise
        except Exception as exc:  # noqa: BLE001 - surface as validation error
            raise ValidationError(f"cannot evaluate sigma expression {expr!r}: {exc}") from exc
    return SigmaModel(kind="custom", fn=fn, lipschitz=float(lipschitz), expression=expr)


def model_from_id(sigma_id: str, lipschitz: float | None = None) -> SigmaModel:
    """Resolve a CLI model id: "sigma1".."sigma7", "zero", or "custom:<expr>"."""
    sigma_id = sigma_id.strip()
    if sigma_id.startswith("custom:"):
        expr = sigma_id[len("custom:"):]
        return custom_model(expr, 1.0 if lipschitz is None else lipschitz)
    return builtin_model(sigma_id)


def eval_sigma(model: SigmaModel, u):
    """Evaluate sigma(u); scalar in, scalar out. Raises if any value is negative."""
    u_arr = np.asarray(u, dtype=float)
    val = np.asarray(model.fn(u_arr), dtype=float)
    if val.shape != u_arr.shape:
        val = np.broadcast_to(val, u_arr.shape).copy()
    if np.any(val < 0.0):
        bad = float(np.min(val))
        raise NonNegativityViolation(
            f"sigma model {model.kind!r} returned a negative value ({bad:g})")
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(val)
    return val


def eval_sigma_sq(model: SigmaModel, u):
    """sigma(u)^2, computed as the exact square of eval_sigma."""
    val = eval_sigma(model, u)
    return val * val
