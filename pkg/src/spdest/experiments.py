"""Experiment orchestration: dataset production, regression curves, error
tables, and normalizer rate studies, with reproducible seeding and an
embarrassingly parallel worker pool over realizations.

Seed derivation is fixed: the noise stream of realization r uses
SeedSequence(master_seed, spawn_key=(0, r)) feeding a Philox generator,
and the point-selection seed of realization r is the first 64-bit word of
SeedSequence(master_seed, spawn_key=(1, r)). Worker count therefore never
affects any output byte.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    NormalizerQuery,
    loglog_slope,
    m_hat_sq,
    m_sq_riesz,
    rate_exponents,
)
from .errors import SimulationDiverged, ValidationError
from .lattice_sim import POINT_STREAM, GridConfig, NoiseSpec
from .predictor import LhCoefficients, Sample, WindowSpec, extract_dataset
from .regression import curve_report, fit, l1_error
from .sigma_models import model_from_id

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "build_config",
    "parse_config_file",
    "derive_point_seed",
    "cmd_simulate",
    "cmd_estimate",
    "cmd_table",
    "cmd_rates",
    "read_dataset",
    "DATASET_HEADER",
    "CURVE_HEADER",
]

DATASET_HEADER = "u_value,sigma_tilde_sq,x0,t0,realization_id,h,eps"
CURVE_HEADER = "u,estimate,pi_lower,pi_upper,truth"

PRESETS = {
    "desk": {
        "nx": 2 ** 7, "nt": 2 ** 14, "realizations": 20, "points": 2000,
        "h_list": "2/nx", "eps_list": "1h,2h,4h,8h",
    },
    "paper": {
        "nx": 2 ** 9, "nt": 2 ** 18, "realizations": 100, "points": 10000,
        "h_list": "2/nx,4/nx,8/nx", "eps_list": "1h,2h,4h,8h",
    },
}

_DEFAULTS = {
    "length": 1.0, "horizon": 1.0, "u0": 6.0,
    "nx": 2 ** 7, "nt": None, "sigma": "sigma3",
    "realizations": 4, "points": 500, "seed": 20240611,
    "bandwidth": 0.05, "lh_coeff": "a=0.5,b=0",
    "h_list": "2/nx", "eps_list": "2h,4h",
    "out": "results", "point_strategy": "random",
    "custom_lipschitz": 1.0,
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def derive_point_seed(master_seed: int, realization_index: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed,
                                spawn_key=(POINT_STREAM, realization_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def parse_config_file(path: str) -> dict:
    """Flat key = value text; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().lower()] = val.strip()
    return values


def _parse_h_token(token: str, grid: GridConfig) -> float:
    token = token.strip().lower()
    if token.endswith("/nx"):
        return float(token[:-3]) * grid.dx
    return float(token)


def _parse_eps_token(token: str, h: float, grid: GridConfig) -> float:
    token = token.strip().lower()
    if token.endswith("/nx"):
        return float(token[:-3]) * grid.dx
    if token.endswith("h"):
        return float(token[:-1] or "1") * h
    return float(token)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment matrix; every (h, eps) pair is validated against
    the grid at construction time."""

    grid: GridConfig
    sigma_id: str
    combos: tuple  # of (h, eps) floats
    n_realizations: int
    n_points: int
    master_seed: int
    bandwidth: float
    lh_coeff: LhCoefficients
    output_dir: str
    point_strategy: str = "random"
    custom_lipschitz: float = 1.0
    windows: tuple = field(init=False)

    def __post_init__(self):
        if self.n_realizations < 1 or self.n_points < 1:
            raise ValidationError("realizations and points must be positive")
        if not self.bandwidth > 0:
            raise ValidationError("bandwidth must be positive")
        model_from_id(self.sigma_id, self.custom_lipschitz)  # fail fast
        windows = tuple(WindowSpec.from_grid(self.grid, h, eps)
                        for h, eps in self.combos)
        object.__setattr__(self, "windows", windows)

    def dataset_name(self, w: WindowSpec) -> str:
        return f"dataset_h{w.sh}dx_eps{w.di}dx.csv"

    def echo(self) -> dict:
        return {
            "length": self.grid.length, "horizon": self.grid.horizon,
            "nx": self.grid.n_x, "nt": self.grid.n_t, "u0": self.grid.u0,
            "sigma": self.sigma_id, "custom_lipschitz": self.custom_lipschitz,
            "realizations": self.n_realizations, "points": self.n_points,
            "seed": self.master_seed, "bandwidth": self.bandwidth,
            "lh_coeff": {"a": self.lh_coeff.a, "b": self.lh_coeff.b},
            "point_strategy": self.point_strategy,
            "combos": [{"h": h, "eps": eps} for h, eps in self.combos],
        }


def build_config(preset: str | None = None, config_file: str | None = None,
                 **overrides) -> ExperimentConfig:
    """Layer defaults <- preset <- config file <- explicit overrides."""
    values = dict(_DEFAULTS)
    if config_file:
        file_values = parse_config_file(config_file)
        preset = file_values.pop("preset", preset)
    else:
        file_values = {}
    if preset:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}; expected {tuple(PRESETS)}")
        values.update(PRESETS[preset])
    values.update(file_values)
    values.update({k: v for k, v in overrides.items() if v is not None})

    try:
        nx = int(values["nx"])
        nt = int(values["nt"]) if values["nt"] not in (None, "") else None
        grid = GridConfig(
            length=float(values["length"]), horizon=float(values["horizon"]),
            n_x=nx, n_t=nt, u0=float(values["u0"]),
            time_step_rule="nt-equals-nx-squared" if nt is None else "explicit",
        )
        h_values = [_parse_h_token(t, grid)
                    for t in str(values["h_list"]).split(",") if t.strip()]
        combos = []
        for h in h_values:
            for t in str(values["eps_list"]).split(","):
                if t.strip():
                    combos.append((h, _parse_eps_token(t, h, grid)))
        lh = values["lh_coeff"]
        if not isinstance(lh, LhCoefficients):
            lh = LhCoefficients.parse(str(lh))
        return ExperimentConfig(
            grid=grid,
            sigma_id=str(values["sigma"]),
            combos=tuple(combos),
            n_realizations=int(values["realizations"]),
            n_points=int(values["points"]),
            master_seed=int(values["seed"]),
            bandwidth=float(values["bandwidth"]),
            lh_coeff=lh,
            output_dir=str(values["out"]),
            point_strategy=str(values["point_strategy"]),
            custom_lipschitz=float(values["custom_lipschitz"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad configuration value: {exc}") from exc


def _extraction_job(args: tuple):
    """Worker body; takes primitives so it pickles cleanly."""
    (grid_kwargs, sigma_id, lipschitz, h, eps, a, b, n_points,
     master_seed, realization, strategy) = args
    grid = GridConfig(**grid_kwargs)
    model = model_from_id(sigma_id, lipschitz)
    w = WindowSpec.from_grid(grid, h, eps)
    coeff = LhCoefficients(a=a, b=b)
    noise = NoiseSpec(master_seed=master_seed, realization_index=realization)
    point_seed = derive_point_seed(master_seed, realization)
    try:
        samples = extract_dataset(grid, model, noise, w, coeff,
                                  n_points, point_seed, strategy)
    except SimulationDiverged as exc:
        return ("diverged", realization, exc.step_index)
    rows = [(s.u_value, s.sigma_tilde_sq, s.x0, s.t0, s.realization_id, s.h, s.eps)
            for s in samples]
    return ("ok", realization, rows)


def _grid_kwargs(grid: GridConfig) -> dict:
    return {
        "length": grid.length, "horizon": grid.horizon, "n_x": grid.n_x,
        "n_t": grid.n_t, "u0": grid.u0, "time_step_rule": grid.time_step_rule,
    }


def _write_dataset(path: str, results: list) -> int:
    n_rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(DATASET_HEADER + "\n")
        for status, _realization, payload in results:
            if status != "ok":
                continue
            for u_val, stsq, x0, t0, rid, h, eps in payload:
                fh.write(f"{_fmt(u_val)},{_fmt(stsq)},{_fmt(x0)},{_fmt(t0)},"
                         f"{rid},{_fmt(h)},{_fmt(eps)}\n")
                n_rows += 1
    return n_rows


def cmd_simulate(config: ExperimentConfig, workers: int = 1) -> dict:
    """Produce one dataset CSV per (h, eps) pair plus a manifest.

    Work is partitioned by realization index and merged in index order, so
    outputs are byte-identical for any worker count. Diverged realizations
    are recorded in the manifest and skipped; the run continues.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    manifest = {
        "version": f"spdest {__version__}",
        "config": config.echo(),
        "seed_derivation": "noise: SeedSequence(seed, spawn_key=(0, r)) -> Philox; "
                           "points: SeedSequence(seed, spawn_key=(1, r))[0]",
        "files": {},
        "diverged": [],
    }
    gk = _grid_kwargs(config.grid)
    for w, (h, eps) in zip(config.windows, config.combos):
        jobs = [(gk, config.sigma_id, config.custom_lipschitz, h, eps,
                 config.lh_coeff.a, config.lh_coeff.b, config.n_points,
                 config.master_seed, r, config.point_strategy)
                for r in range(config.n_realizations)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_extraction_job, jobs))
        else:
            results = [_extraction_job(job) for job in jobs]
        name = config.dataset_name(w)
        path = os.path.join(config.output_dir, name)
        n_rows = _write_dataset(path, results)
        manifest["files"][name] = {"h": h, "eps": eps, "rows": n_rows}
        for status, realization, payload in results:
            if status == "diverged":
                manifest["diverged"].append(
                    {"file": name, "realization": realization, "step": payload})
    manifest_path = os.path.join(config.output_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"manifest": manifest_path,
            "datasets": [os.path.join(config.output_dir, n) for n in manifest["files"]]}


def read_dataset(path: str) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != DATASET_HEADER:
            raise ValidationError(f"{path} is not a dataset CSV (bad header)")
        cols = [[], [], [], [], [], [], []]
        for row in reader:
            for store, text in zip(cols, row):
                store.append(float(text))
    names = DATASET_HEADER.split(",")
    return {name: np.asarray(col, dtype=float) for name, col in zip(names, cols)}


def _load_manifest(directory: str) -> dict:
    path = os.path.join(directory, "manifest.json")
    if not os.path.exists(path):
        raise ValidationError(f"no manifest.json in {directory}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_estimate(dataset_path: str, bandwidth: float = 0.05,
                 u_min: float = 0.0, u_max: float = 4.0, grid_n: int = 512,
                 out_path: str | None = None, sigma_id: str | None = None,
                 kernel: str = "gaussian", level: float = 0.95,
                 custom_lipschitz: float = 1.0) -> str:
    """Fit the conditional-expectation curve for one dataset and write the
    curve CSV (u, estimate, pi_lower, pi_upper, truth)."""
    if sigma_id is None:
        manifest = _load_manifest(os.path.dirname(os.path.abspath(dataset_path)))
        sigma_id = manifest["config"]["sigma"]
        custom_lipschitz = manifest["config"].get("custom_lipschitz", 1.0)
    model = model_from_id(sigma_id, custom_lipschitz)
    data = read_dataset(dataset_path)
    if data["u_value"].size == 0:
        raise ValidationError(f"dataset {dataset_path} is empty")
    fitted = fit((data["u_value"], data["sigma_tilde_sq"]), bandwidth, kernel)
    report = curve_report(fitted, model, u_min, u_max, grid_n, level)
    if out_path is None:
        out_path = os.path.splitext(dataset_path)[0] + "_curve.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CURVE_HEADER + "\n")
        for k in range(report.u_grid.shape[0]):
            fh.write(f"{_fmt(report.u_grid[k])},{_fmt(report.estimate[k])},"
                     f"{_fmt(report.pi_lower[k])},{_fmt(report.pi_upper[k])},"
                     f"{_fmt(report.truth[k])}\n")
    return out_path


def cmd_table(directory: str, bandwidth: float = 0.05, u_min: float = 0.0,
              u_max: float = 4.0, grid_n: int = 512,
              out_path: str | None = None, kernel: str = "gaussian") -> str:
    """L1-error matrix over the datasets in a directory: rows are eps
    values, columns are h values, with each row's minimizing h marked."""
    manifest = _load_manifest(directory)
    sigma_id = manifest["config"]["sigma"]
    model = model_from_id(sigma_id, manifest["config"].get("custom_lipschitz", 1.0))
    errors: dict[tuple[float, float], float] = {}
    for name, info in manifest["files"].items():
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            raise ValidationError(f"dataset {path} listed in manifest is missing")
        data = read_dataset(path)
        if data["u_value"].size == 0:
            raise ValidationError(f"dataset {path} is empty")
        fitted = fit((data["u_value"], data["sigma_tilde_sq"]), bandwidth, kernel)
        errors[(info["h"], info["eps"])] = l1_error(model=model, f=fitted,
                                                    u_min=u_min, u_max=u_max,
                                                    grid_n=grid_n)
    h_values = sorted({h for h, _ in errors})
    eps_values = sorted({eps for _, eps in errors})
    if out_path is None:
        out_path = os.path.join(directory, "l1_table.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("eps," + ",".join(f"h={_fmt(h)}" for h in h_values) + ",row_min_h\n")
        for eps in eps_values:
            row = [errors.get((h, eps)) for h in h_values]
            present = [(val, h) for val, h in zip(row, h_values) if val is not None]
            min_h = min(present)[1]
            cells = ["" if val is None else _fmt(val) for val in row]
            fh.write(f"{_fmt(eps)}," + ",".join(cells) + f",{_fmt(min_h)}\n")
    return out_path


def cmd_rates(h_values, betas=(), rho: float | None = None,
              out_path: str = "rates.csv") -> dict:
    """Evaluate the normalizers over a ladder of h values and compare the
    observed log-log slopes with the theoretical exponents.

    Writes one detail CSV (h, m_hat, m_riesz, beta, rho; blank where a
    column does not apply) and a companion *_summary.csv holding the
    fitted slopes next to theory.
    """
    h_values = sorted(float(h) for h in h_values)
    if len(h_values) < 2:
        raise ValidationError("rate study needs at least two h values")
    rows = []
    summary = []

    rho_white = rho if rho is not None else 8.0 / 9.0
    m_hats = [np.sqrt(m_hat_sq(NormalizerQuery.white(h, rho_white))) for h in h_values]
    for h, m in zip(h_values, m_hats):
        rows.append((h, m, None, None, rho_white))
    exps = rate_exponents(None)
    summary.append({"kind": "white", "beta": None, "rho": rho_white,
                    "slope": loglog_slope(h_values, m_hats),
                    "theory_slope": rho_white,
                    "rho_star": exps.rho_star, "kappa_sup": exps.kappa_sup})

    for beta in betas:
        beta = float(beta)
        rho_b = rho if rho is not None else 8.0 / (12.0 - beta)
        ms = [np.sqrt(m_sq_riesz(NormalizerQuery.riesz(h, beta, rho_b)))
              for h in h_values]
        for h, m in zip(h_values, ms):
            rows.append((h, None, m, beta, rho_b))
        exps = rate_exponents(beta)
        # Two-sided normalizer bounds give m(h) ~ h^(rho(2d - beta + 1)/2).
        theory = rho_b * (3.0 - beta) / 2.0
        summary.append({"kind": "riesz", "beta": beta, "rho": rho_b,
                        "slope": loglog_slope(h_values, ms),
                        "theory_slope": theory,
                        "rho_star": exps.rho_star, "kappa_sup": exps.kappa_sup})

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("h,m_hat,m_riesz,beta,rho\n")
        for h, m_hat, m_riesz, beta, rho_used in rows:
            fh.write(",".join([
                _fmt(h),
                "" if m_hat is None else _fmt(m_hat),
                "" if m_riesz is None else _fmt(m_riesz),
                "" if beta is None else _fmt(beta),
                _fmt(rho_used),
            ]) + "\n")
    summary_path = os.path.splitext(out_path)[0] + "_summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("kind,beta,rho,slope,theory_slope,rho_star,kappa_sup\n")
        for rec in summary:
            fh.write(",".join([
                rec["kind"],
                "" if rec["beta"] is None else _fmt(rec["beta"]),
                _fmt(rec["rho"]), _fmt(rec["slope"]), _fmt(rec["theory_slope"]),
                _fmt(rec["rho_star"]), _fmt(rec["kappa_sup"]),
            ]) + "\n")
    return {"rates": out_path, "summary": summary_path, "records": summary}
