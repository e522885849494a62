"""Parameter sweeps over (d, sigma_N, k) with CSV output next to the theory curves."""
import configparser
import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import json
import logging
import math
import os
import tempfile

import numpy as np

from . import __version__
from ._backend import BACKEND
from .model import GaussianModel, PowerLawErrorModel
from .montecarlo import estimate_d1, estimate_d2, estimate_smallball, fit_unit_codebook
from .quantizer import FitConfig
from .rng import Seed
from .theory import (
    AdmissibilityError,
    gaussian_d1_highrate,
    gaussian_d2_lower,
    gaussian_smallball_constant,
    powerlaw_smallball_bounds,
)

log = logging.getLogger(__name__)

RESULTS_NAME = "results.csv"
MANIFEST_NAME = "manifest.json"

# first stream index under the experiment root
_FIT, _D1, _D2 = 1, 2, 3


class SpecError(ValueError):
    """Invalid experiment specification; the message starts with the field path."""


@dataclass(frozen=True)
class ExperimentSpec:
    dims: tuple = (1, 4, 10)
    sigma_x: float = 1.0
    sigma_n_list: tuple = (0.2, 1.0, 5.0)
    k_grid: tuple = tuple(2**i for i in range(11))
    trials_d1: int = 100_000
    trials_d2: int = 100_000
    fit: FitConfig = field(default_factory=FitConfig)
    # ((d, FitConfig), ...) replacing ``fit`` for the listed dimensions
    fit_by_dim: tuple = ()
    seed_root: int = 0
    out_dir: str = "results"
    emit_plots: bool = False

    def validate(self):
        def need(cond, path, msg):
            if not cond:
                raise SpecError(f"{path}: {msg}")

        need(len(self.dims) > 0, "experiment.dims", "must be non-empty")
        for i, d in enumerate(self.dims):
            need(isinstance(d, int) and d >= 1, f"experiment.dims[{i}]", f"must be a positive integer, got {d!r}")
        need(len(set(self.dims)) == len(self.dims), "experiment.dims", "must not repeat")
        need(math.isfinite(self.sigma_x) and self.sigma_x > 0, "experiment.sigma_x", "must be positive")
        need(len(self.sigma_n_list) > 0, "experiment.sigma_n", "must be non-empty")
        for i, s in enumerate(self.sigma_n_list):
            need(math.isfinite(s) and s > 0, f"experiment.sigma_n[{i}]", f"must be positive, got {s!r}")
        need(len(set(self.sigma_n_list)) == len(self.sigma_n_list), "experiment.sigma_n", "must not repeat")
        need(len(self.k_grid) > 0, "experiment.k_grid", "must be non-empty")
        for i, k in enumerate(self.k_grid):
            need(isinstance(k, int) and k >= 1, f"experiment.k_grid[{i}]", f"must be a positive integer, got {k!r}")
        need(all(b > a for a, b in zip(self.k_grid, self.k_grid[1:])), "experiment.k_grid", "must be strictly increasing")
        need(self.trials_d1 >= 100, "experiment.trials_d1", "must be at least 100")
        need(self.trials_d2 >= 100, "experiment.trials_d2", "must be at least 100")
        need(0 <= self.seed_root < 2**64, "experiment.seed", "must fit in 64 unsigned bits")
        seen = set()
        for d, cfg in self.fit_by_dim:
            need(d in self.dims and d not in seen, f"fit.d{d}", "must name a distinct dimension listed in experiment.dims")
            seen.add(d)
        for name, cfg in [("fit", self.fit)] + [(f"fit.d{d}", c) for d, c in self.fit_by_dim]:
            need(cfg.max_iters >= 1, f"{name}.max_iters", "must be positive")
            need(cfg.restarts >= 1, f"{name}.restarts", "must be at least 1")
            need(cfg.rel_tol > 0, f"{name}.rel_tol", "must be positive")
            for k in self.k_grid:
                need(cfg.train_size(k) >= k, f"{name}.n_train", f"must be at least max(k_grid) = {max(self.k_grid)}")
        return self

    def fit_for(self, d):
        return dict(self.fit_by_dim).get(d, self.fit)

    def to_dict(self):
        out = asdict(self)
        out["fit_by_dim"] = {str(d): asdict(c) for d, c in self.fit_by_dim}
        return out


# --------------------------------------------------------------------------
# config file
# --------------------------------------------------------------------------


def _parse_list(text, conv):
    return tuple(conv(t.strip()) for t in text.replace(";", ",").split(",") if t.strip())


def _conv(path, fn, raw):
    try:
        return fn(raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{path}: cannot parse {raw!r} ({exc})") from None


_EXPERIMENT_KEYS = {
    "dims": ("dims", lambda s: _parse_list(s, int)),
    "sigma_x": ("sigma_x", float),
    "sigma_n": ("sigma_n_list", lambda s: _parse_list(s, float)),
    "k_grid": ("k_grid", lambda s: _parse_list(s, int)),
    "trials_d1": ("trials_d1", int),
    "trials_d2": ("trials_d2", int),
    "seed": ("seed_root", int),
    "out_dir": ("out_dir", str),
    "plots": ("emit_plots", lambda s: s.strip().lower() in {"1", "true", "yes", "on"}),
}
_FIT_KEYS = {
    "n_train": lambda s: int(s) if s.strip() else None,
    "max_iters": int,
    "rel_tol": float,
    "restarts": int,
}


def _read_fit_section(cp, section):
    out = {}
    for key, raw in cp.items(section):
        if key not in _FIT_KEYS:
            raise SpecError(f"{section}.{key}: unknown key")
        out[key] = _conv(f"{section}.{key}", _FIT_KEYS[key], raw)
    return out


def load_spec(path=None, **overrides):
    """Build a spec from an INI-style file with ``[experiment]`` and ``[fit]`` sections.

    Sections ``[fit.d1]``, ``[fit.d4]`` ... override ``[fit]`` keys for one
    dimension. Keyword overrides (``dims=``, ``k_grid=``, ``restarts=`` ...)
    win over the file and apply to ``[fit]``.
    """
    exp_kwargs, fit_kwargs, per_dim = {}, {}, {}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise SpecError(f"config: {exc}") from None
        for section in cp.sections():
            if section in ("experiment", "fit"):
                continue
            if not (section.startswith("fit.d") and section[5:].isdigit()):
                raise SpecError(f"{section}: unknown section")
            per_dim[int(section[5:])] = _read_fit_section(cp, section)
        if cp.has_section("experiment"):
            for key, raw in cp.items("experiment"):
                if key not in _EXPERIMENT_KEYS:
                    raise SpecError(f"experiment.{key}: unknown key")
                name, fn = _EXPERIMENT_KEYS[key]
                exp_kwargs[name] = _conv(f"experiment.{key}", fn, raw)
        if cp.has_section("fit"):
            fit_kwargs = _read_fit_section(cp, "fit")
    fit_names = {f.name for f in fields(FitConfig)}
    for key, val in overrides.items():
        if val is None:
            continue
        if key in fit_names:
            fit_kwargs[key] = val
        else:
            exp_kwargs[key] = val
    try:
        fit = FitConfig(**fit_kwargs)
    except ValueError as exc:
        raise SpecError(f"fit: {exc}") from None
    by_dim = []
    for d in sorted(per_dim):
        try:
            by_dim.append((d, replace(fit, **per_dim[d])))
        except ValueError as exc:
            raise SpecError(f"fit.d{d}: {exc}") from None
    if by_dim and "fit_by_dim" not in exp_kwargs:
        exp_kwargs["fit_by_dim"] = tuple(by_dim)
    try:
        spec = ExperimentSpec(fit=fit, **exp_kwargs)
    except TypeError as exc:
        raise SpecError(f"experiment: {exc}") from None
    return spec.validate()


# --------------------------------------------------------------------------
# result rows
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    estimator: str
    d: int
    sigma_x: float
    sigma_n: float
    k: int
    trials: int
    mean: float
    stderr: float
    theory_value: float  # None when the bound asserts nothing at this k
    theory_kind: str
    seed_root: int

    def sort_key(self):
        return (self.estimator, self.d, self.sigma_n, self.k)


COLUMNS = tuple(f.name for f in fields(ResultRow))
_INT_COLS = {"d", "k", "trials", "seed_root"}
_FLOAT_COLS = {"sigma_x", "sigma_n", "mean", "stderr"}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_rows_atomic(path, header, rows):
    """Write a CSV to a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_results(path, rows):
    rows = sorted(rows, key=ResultRow.sort_key)
    return write_rows_atomic(path, COLUMNS, [[getattr(r, c) for c in COLUMNS] for r in rows])


def read_results(path):
    """Parse a results CSV; raises ``ValueError`` naming the first bad row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: row 1 (header): expected columns {','.join(COLUMNS)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                if len(rec) != len(COLUMNS):
                    raise ValueError(f"expected {len(COLUMNS)} fields, got {len(rec)}")
                vals = {}
                for c, raw in zip(COLUMNS, rec):
                    if c in _INT_COLS:
                        vals[c] = int(raw)
                    elif c in _FLOAT_COLS:
                        vals[c] = float(raw)
                    elif c == "theory_value":
                        vals[c] = float(raw) if raw != "" else None
                    else:
                        vals[c] = raw
                rows.append(ResultRow(**vals))
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: {exc}") from None
    return rows


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def _theory_or_none(fn, *args):
    try:
        return fn(*args)
    except AdmissibilityError:
        return None


def _run_dimension(spec, d):
    root = Seed(spec.seed_root)
    rows = []
    codebooks = {}
    prev = None
    for k in spec.k_grid:
        log.info("d=%d: fitting k=%d codebook", d, k)
        prev = fit_unit_codebook(d, k, spec.fit_for(d), root.child(_FIT, d, k), warm_start=prev)
        codebooks[k] = prev
    for j, sn in enumerate(spec.sigma_n_list):
        model = GaussianModel.from_std(d, spec.sigma_x, sn)
        scale = math.sqrt(model.posterior_var)
        for k in spec.k_grid:
            e1 = estimate_d1(model, k, spec.trials_d1, seed=root.child(_D1, d, j, k), codebook=codebooks[k].scaled(scale))
            e2 = estimate_d2(model, k, spec.trials_d2, seed=root.child(_D2, d, j, k))
            log.info("d=%d sigma_n=%g k=%d: D1=%.4g D2=%.4g", d, sn, k, e1.mean, e2.mean)
            common = dict(d=d, sigma_x=float(spec.sigma_x), sigma_n=float(sn), k=k, seed_root=spec.seed_root)
            rows.append(
                ResultRow(
                    estimator=e1.estimator, trials=e1.trials, mean=e1.mean, stderr=e1.stderr,
                    theory_value=_theory_or_none(gaussian_d1_highrate, model, k), theory_kind="d1_highrate",
                    **common,
                )
            )
            rows.append(
                ResultRow(
                    estimator=e2.estimator, trials=e2.trials, mean=e2.mean, stderr=e2.stderr,
                    theory_value=_theory_or_none(gaussian_d2_lower, model, k), theory_kind="d2_lower_bound",
                    **common,
                )
            )
    return rows


def _prepare_out_dir(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise SpecError(f"experiment.out_dir: cannot create {out_dir!r} ({exc})") from None
    if not os.access(out_dir, os.W_OK):
        raise SpecError(f"experiment.out_dir: {out_dir!r} is not writable")


def _write_manifest(out_dir, payload):
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".json", dir=out_dir)
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, MANIFEST_NAME))


def run_experiment(spec, workers=1):
    """Run the full sweep and return the path of the results CSV."""
    spec.validate()
    _prepare_out_dir(spec.out_dir)
    if workers > 1 and len(spec.dims) > 1:
        with ProcessPoolExecutor(min(workers, len(spec.dims))) as ex:
            parts = list(ex.map(_run_dimension, [spec] * len(spec.dims), spec.dims))
    else:
        parts = [_run_dimension(spec, d) for d in spec.dims]
    rows = [r for part in parts for r in part]
    path = write_results(os.path.join(spec.out_dir, RESULTS_NAME), rows)
    _write_manifest(
        spec.out_dir,
        {"tool": "klist", "version": __version__, "kernel_backend": BACKEND, "spec": spec.to_dict()},
    )
    if spec.emit_plots:
        from .plots import render_plots

        render_plots(path, spec.out_dir)
    return path


# --------------------------------------------------------------------------
# small-ball runs
# --------------------------------------------------------------------------

SMALLBALL_COLUMNS = (
    "model", "d", "beta", "a", "prob_empirical", "bound_lower", "bound_upper", "fitted_alpha", "alpha_theory",
)


def smallball_rows(model, trials=1_000_000, seed=0, a_grid=None):
    """Rows of the small-ball table for one error model."""
    est = estimate_smallball(model, trials, a_grid, seed)
    if isinstance(model, GaussianModel):
        name, beta, alpha = "gaussian", 0.0, model.d / 2.0
        C = gaussian_smallball_constant(model)
        bounds = [(None, C * a ** (model.d / 2.0)) for a in est.a_grid]
    else:
        name, beta, alpha = "powerlaw", model.beta, model.radial_power / 2.0
        c = model.density_constant
        bounds = [
            powerlaw_smallball_bounds(model.d, model.beta, c, c, a) if a <= model.r_max**2 else (None, None)
            for a in est.a_grid
        ]
    rows = []
    for a, p, (lo, hi) in zip(est.a_grid, est.prob, bounds):
        rows.append([name, model.d, float(beta), float(a), float(p), lo, hi, est.fitted_alpha, float(alpha)])
    return rows, est


def run_smallball(model, out_path, trials=1_000_000, seed=0, a_grid=None):
    rows, _ = smallball_rows(model, trials, seed, a_grid)
    d = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(d, exist_ok=True)
    return write_rows_atomic(out_path, SMALLBALL_COLUMNS, rows)


def make_error_model(kind, d, sigma_x=1.0, sigma_n=1.0, beta=1.0, r_max=1.0):
    if kind == "gaussian":
        return GaussianModel.from_std(d, sigma_x, sigma_n)
    if kind == "powerlaw":
        return PowerLawErrorModel(d, beta, r_max)
    raise ValueError(f"unknown error model {kind!r}; expected 'gaussian' or 'powerlaw'")


def reference_spec(out_dir="results", **changes):
    """Default spec: the full (d, sigma_N, k) grid with the default fit budget."""
    return replace(ExperimentSpec(out_dir=out_dir), **changes)
