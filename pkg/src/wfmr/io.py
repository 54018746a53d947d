"""Curve-table CSV ingestion, model persistence, group assignment and the
leave-one-out relative prediction error.

The curve CSV carries one row per subject (`id,response,t_1,...,t_N`), with
the shared sampling grid stored once in a `# grid:` companion line above the
header.  Models persist as versioned JSON with floats written to 17
significant digits, so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InvalidGrid,
    InvalidLength,
    ParseError,
    UndefinedMetric,
)
from .fit import FitResult
from .model import MixtureParams, to_natural
from .wavelet import WaveletSpec, reconstruct_omegas

MODEL_FORMAT_VERSION = 1


@dataclass
class CurveTable:
    ids: list
    responses: np.ndarray  # nan where missing
    grid: np.ndarray
    values: np.ndarray  # n x len(grid)
    rejected: list  # (id, reason) rows dropped for gaps


def write_curves(path, curves, grid, responses=None, ids=None):
    curves = np.asarray(curves, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n, N = curves.shape
    if ids is None:
        ids = [str(i) for i in range(n)]
    with open(path, "w") as fh:
        fh.write("# grid: " + ",".join(_fmt(g) for g in grid) + "\n")
        fh.write("id,response," + ",".join(f"t_{j}" for j in range(1, N + 1)) + "\n")
        for i in range(n):
            resp = ""
            if responses is not None and not math.isnan(float(responses[i])):
                resp = _fmt(float(responses[i]))
            fh.write(f"{ids[i]},{resp}," + ",".join(_fmt(v) for v in curves[i]) + "\n")


def read_curves(path, allow_missing_response=False) -> CurveTable:
    """Parse a curve table; rows with gaps in the values are set aside."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    grid = None
    start = 0
    if lines and lines[0].startswith("# grid:"):
        try:
            grid = np.array([float(v) for v in lines[0][len("# grid:"):].split(",")])
        except ValueError as err:
            raise ParseError(f"bad grid line: {err}", row=0) from err
        start = 1
    if start >= len(lines) or not lines[start]:
        raise ParseError("missing header row", row=start)
    header = lines[start].split(",")
    if header[:2] != ["id", "response"]:
        raise ParseError("header must begin with id,response", row=start)
    N = len(header) - 2
    if grid is None:
        grid = np.arange(1, N + 1) / (N + 1.0)
    if len(grid) != N:
        raise ParseError(f"grid has {len(grid)} points but header has {N} columns",
                         row=0)
    if np.any(np.diff(grid) <= 0):
        raise InvalidGrid("grid must be strictly increasing")

    ids, responses, rows, rejected = [], [], [], []
    for lineno, line in enumerate(lines[start + 1:], start=start + 2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != N + 2:
            raise ParseError(f"expected {N + 2} cells, found {len(cells)}", row=lineno)
        rid = cells[0]
        if cells[1] == "":
            if not allow_missing_response:
                raise ParseError("missing response", row=lineno, col=2)
            resp = math.nan
        else:
            try:
                resp = float(cells[1])
            except ValueError as err:
                raise ParseError(f"bad response {cells[1]!r}", row=lineno, col=2) from err
        vals = np.empty(N)
        gap = None
        for j, cell in enumerate(cells[2:]):
            if cell == "":
                gap = j
                break
            try:
                vals[j] = float(cell)
            except ValueError as err:
                raise ParseError(f"bad value {cell!r}", row=lineno, col=j + 3) from err
        if gap is not None:
            rejected.append((rid, f"missing value at grid point {gap + 1}"))
            continue
        ids.append(rid)
        responses.append(resp)
        rows.append(vals)
    values = np.vstack(rows) if rows else np.empty((0, N))
    return CurveTable(ids, np.asarray(responses), grid, values, rejected)


def ingest(path, target_N, allow_missing_response=False):
    """Read curves and linearly interpolate onto a dyadic grid.

    The target grid is target_N equally spaced points spanning the source
    domain, endpoints included, so affine curves are reproduced exactly.
    """
    if target_N < 2 or (target_N & (target_N - 1)) != 0:
        raise InvalidLength(f"target length {target_N} is not a power of two")
    table = read_curves(path, allow_missing_response=allow_missing_response)
    if target_N < len(table.grid) / 2:
        raise InvalidLength(
            f"target length {target_N} is below half the source length "
            f"{len(table.grid)}"
        )
    new_grid = np.linspace(table.grid[0], table.grid[-1], target_N)
    curves = np.vstack([
        np.interp(new_grid, table.grid, row) for row in table.values
    ]) if len(table.values) else np.empty((0, target_N))
    return CurveTable(table.ids, table.responses, new_grid, curves, table.rejected)


def assign_groups(fit: FitResult) -> np.ndarray:
    """1-based component labels by maximal responsibility; ties to the lower index."""
    return np.argmax(fit.responsibilities, axis=1) + 1


def component_means(params: MixtureParams, Z) -> np.ndarray:
    """n x C matrix of per-component mean responses Z beta_r."""
    beta, _, _ = to_natural(params)
    return np.asarray(Z, dtype=float) @ beta.T


def cvrpe(Y, Z, fit_fn, assign_fn) -> float:
    """Leave-one-out cross-validated relative prediction error.

    For each observation the model is refit without it by ``fit_fn(Y, Z)``,
    the held-out response is routed to a component by
    ``assign_fn(y_obs, fit)``, and the squared error of that component's
    mean prediction accumulates relative to the raw response energy.
    """
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    denom = float(np.sum(Y**2))
    if denom == 0.0:
        raise UndefinedMetric("responses are identically zero")
    n = len(Y)
    sse = 0.0
    for i in range(n):
        keep = np.arange(n) != i
        fit = fit_fn(Y[keep], Z[keep])
        r = assign_fn(float(Y[i]), fit)
        pred = float(component_means(fit.params, Z[i : i + 1])[0, r])
        sse += (Y[i] - pred) ** 2
    return sse / denom


def make_threshold_rule(threshold: float):
    """The ad hoc routing rule: low responses go to the busier component.

    A response under the threshold is predicted by the component with the
    most nonzero coefficients (the one carrying an association); otherwise
    by the component with the fewest (the null-like one).  Ties pick the
    smaller index.
    """

    def rule(y_obs, fit):
        counts = [int(np.count_nonzero(fit.params.phi[r, 1:]))
                  for r in range(fit.params.n_components)]
        busiest = int(np.argmax(counts))
        emptiest = int(np.argmin(counts))
        return busiest if y_obs < threshold else emptiest

    return rule


# ---------------------------------------------------------------------------
# model persistence

def _fmt(x) -> str:
    """Deterministic float text with 17 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _dump_json(obj, indent=0) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{k}": {_dump_json(v, indent + 2)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ", ".join(_dump_json(v, indent) for v in obj)
        return "[" + inner + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return _fmt(obj)


def model_to_dict(fit: FitResult, spec: WaveletSpec, metadata=None) -> dict:
    params = fit.params
    beta, sigma, pi = to_natural(params)
    omegas = reconstruct_omegas(params, spec)
    meta = {
        "lambda": fit.config.lam,
        "C": params.n_components,
        "j0": spec.j0,
        "seed": fit.config.seed,
        "gamma": fit.config.gamma,
        "adaptive": fit.config.adaptive,
        "n_iters": fit.n_iters,
        "converged": fit.converged,
        "log_lik": fit.log_lik,
        "q0": fit.q0,
        "d_e": (omegas.shape[1] + 3) * params.n_components - 1 - fit.q0,
    }
    if metadata:
        meta.update(metadata)
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "wavelet": {
            "family": spec.family,
            "j0": spec.j0,
            "vanishing_moments": spec.vanishing_moments,
            "boundary": spec.boundary,
        },
        "grid_length": int(omegas.shape[1]),
        "params": {
            "phi": [list(row) for row in params.phi],
            "rho": list(params.rho),
            "pi": list(params.pi),
        },
        "natural": {
            "beta": [list(row) for row in beta],
            "alpha": [float(b[0]) for b in beta],
            "sigma": list(sigma),
            "pi": list(pi),
        },
        "omegas": [list(row) for row in omegas],
        "metadata": meta,
    }


def write_model(path, fit: FitResult, spec: WaveletSpec, metadata=None):
    doc = model_to_dict(fit, spec, metadata)
    with open(path, "w") as fh:
        fh.write(_dump_json(doc) + "\n")


def write_model_dict(path, doc: dict):
    with open(path, "w") as fh:
        fh.write(_dump_json(doc) + "\n")


def read_model(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ParseError(
            f"unsupported model format version {doc.get('format_version')!r}"
        )
    return doc


def model_params(doc: dict) -> MixtureParams:
    p = doc["params"]
    return MixtureParams(
        phi=np.array(p["phi"], dtype=float),
        rho=np.array(p["rho"], dtype=float),
        pi=np.array(p["pi"], dtype=float),
    )


def model_spec(doc: dict) -> WaveletSpec:
    w = doc["wavelet"]
    return WaveletSpec(
        family=w["family"],
        j0=int(w["j0"]),
        vanishing_moments=int(w["vanishing_moments"]),
        boundary=w["boundary"],
    )
