"""Penalty-grid construction and tuning-parameter selection.

Selection runs over combinations of component count C, decomposition floor
j0 and penalty strength lam, scored either by k-fold cross-validated
predictive loss or by a modified BIC whose dimension term counts only the
coefficients kept nonzero.  Fits along each descending lam path are warm
started from the previous solution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidDesign
from .fit import PI_FLOOR, FitConfig, FitResult, em_fit, update_intercept, update_rho
from .model import MixtureParams, predictive_loss, responsibilities
from .wavelet import WaveletSpec, build_design


@dataclass
class TuneGrid:
    """Candidate tuning values and which of them are free."""

    C_values: tuple = (1, 2, 3)
    j0_values: tuple = (0,)
    n_lambda: int = 100
    lambda_values: tuple | None = None  # explicit grid; data-driven if None

    def __post_init__(self):
        if len(self.C_values) == 0 or len(self.j0_values) == 0:
            raise ValueError("grids must be non-empty")
        if self.lambda_values is not None:
            lams = tuple(self.lambda_values)
            if any(b >= a for a, b in zip(lams, lams[1:])):
                raise ValueError("lambda_values must be strictly descending")
            self.lambda_values = lams
        elif self.n_lambda < 2:
            raise ValueError("need at least 2 lambda grid points")


@dataclass
class TuneRecord:
    C: int
    j0: int
    lam: float
    criterion: float
    ok: bool
    n_iters: int = 0
    converged: bool = False
    q0: int = 0
    active_counts: tuple = ()


@dataclass
class TuneResult:
    records: list
    best: TuneRecord
    selection_rule: str


def _pick_best(records) -> TuneRecord:
    """Argmin of the criterion; ties prefer larger lam, smaller C, then j0."""
    usable = [r for r in records if r.ok and np.isfinite(r.criterion)]
    if not usable:
        raise InvalidDesign("no grid cell produced a usable criterion value")
    return min(usable, key=lambda r: (r.criterion, -r.lam, r.C, r.j0))


def lambda_grid(Y, Z, config: FitConfig, n_points: int = 100) -> np.ndarray:
    """Log-spaced descending penalties from the data-driven maximum.

    The top value is the smallest penalty at which every coordinate update
    returns zero throughout the fit: with all coefficients pinned at zero,
    the mixing weights, scales and intercepts still move as the membership
    weights are refreshed, so the entry threshold is tracked along that
    whole null-model path (the initialized state alone undershoots it).
    The grid runs down to 0.001 of the maximum.
    """
    if n_points < 2:
        raise ValueError("need at least 2 grid points")
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, P = Z.shape
    C = config.C

    rng = np.random.default_rng(config.seed)
    classes = rng.integers(0, C, size=n)
    resp = np.full((n, C), 0.1)
    resp[np.arange(n), classes] = 0.9
    resp /= resp.sum(axis=1, keepdims=True)

    phi = np.zeros((C, P))
    rho = np.ones(C)
    lam_max = 0.0
    prev = None
    for _ in range(500):
        pi = np.clip(resp.mean(axis=0), PI_FLOOR, None)  # pi update at pen = 0
        pi = pi / pi.sum()
        for r in range(C):
            delta = resp[:, r]
            rho[r] = update_rho(delta, Y, Z, phi[r])
            phi[r, 0] = update_intercept(delta, Y, Z, rho[r], phi[r])
            e = delta * (rho[r] * Y - phi[r, 0])  # both sqrt-weights folded in
            scores = np.abs(Z[:, 1:].T @ e) / (n * pi[r] ** config.gamma)
            lam_max = max(lam_max, float(scores.max()))
        params = MixtureParams(phi.copy(), rho.copy(), pi)
        flat = params.flat()
        if prev is not None and np.max(np.abs(flat - prev) / (1.0 + np.abs(flat))) < 1e-12:
            break
        prev = flat
        resp = responsibilities(params, Y, Z)
    if lam_max <= 0.0:
        raise InvalidDesign("design carries no signal; penalty grid undefined")
    lam_max *= 1.0 + 1e-9  # guard the sup against post-convergence drift
    return np.geomspace(lam_max, 1e-3 * lam_max, n_points)


def modified_bic(fit: FitResult, n: int) -> float:
    """-2 loglik + log(n) * [(N+3)C - 1 - q0]; q0 counts zeroed coefficients."""
    C, P = fit.params.phi.shape
    d_e = (P - 1 + 3) * C - 1 - fit.q0
    return -2.0 * fit.log_lik + np.log(n) * d_e


def effective_dimension(fit: FitResult) -> int:
    C, P = fit.params.phi.shape
    return (P + 2) * C - 1 - fit.q0


def _worker_count() -> int:
    cap = os.environ.get("WFMR_THREADS", "")
    try:
        return max(1, int(cap))
    except ValueError:
        return 1


def _run_chains(chains):
    """Run independent path-fitting callables, optionally in threads."""
    workers = _worker_count()
    if workers == 1 or len(chains) <= 1:
        return [chain() for chain in chains]
    with ThreadPoolExecutor(max_workers=min(workers, len(chains))) as pool:
        return list(pool.map(lambda c: c(), chains))


def _path_fits(Y, Z, config: FitConfig, lams):
    """em_fit at each lam (descending), warm-started down the path.

    Returns a list of (lam, FitResult-or-None); cells that fail numerically
    are recorded as None rather than aborting the sweep.
    """
    out = []
    warm = None
    for lam in lams:
        cfg = replace(config, lam=float(lam))
        try:
            fit = em_fit(Y, Z, cfg, init=warm)
        except Exception:
            out.append((float(lam), None))
            continue
        warm = fit.params
        out.append((float(lam), fit))
    return out


def _grid_lambdas(Y, Z, config, grid: TuneGrid):
    if grid.lambda_values is not None:
        return np.asarray(grid.lambda_values, dtype=float)
    return lambda_grid(Y, Z, config, grid.n_lambda)


def kfold_cv(curves, Y, grid: TuneGrid, config: FitConfig, k: int = 5,
             seed: int = 0, family: str = "sym8") -> TuneResult:
    """Select (C, j0, lam) by k-fold cross-validated predictive loss.

    Folds are a seeded uniform split (no stratification).  The lam path of
    each (C, j0) cell is fixed on the full data so fold losses accumulate at
    matched penalties; a cell whose fit fails on any fold is excluded.
    """
    curves = np.asarray(curves, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)

    designs = {
        j0: build_design(curves, WaveletSpec(family=family, j0=j0))
        for j0 in grid.j0_values
    }

    records = []
    for C in sorted(grid.C_values):
        for j0 in sorted(grid.j0_values):
            Z = designs[j0]
            cfg = replace(config, C=C)
            lams = _grid_lambdas(Y, Z, cfg, grid)

            def run_fold(test_idx, Z=Z, cfg=cfg, lams=lams):
                train = np.setdiff1d(np.arange(n), test_idx)
                fits = _path_fits(Y[train], Z[train], cfg, lams)
                losses = []
                for _, fit in fits:
                    if fit is None:
                        losses.append(np.nan)
                    else:
                        losses.append(
                            predictive_loss(fit.params, Y[test_idx], Z[test_idx])
                        )
                return np.asarray(losses)

            fold_losses = _run_chains([
                (lambda idx=idx: run_fold(idx)) for idx in folds
            ])
            total = np.sum(fold_losses, axis=0)
            for lam, loss in zip(lams, total):
                records.append(TuneRecord(
                    C=C, j0=j0, lam=float(lam),
                    criterion=float(loss), ok=bool(np.isfinite(loss)),
                ))
    return TuneResult(records, _pick_best(records), selection_rule=f"CV{k}")


def bic_search(curves, Y, grid: TuneGrid, config: FitConfig,
               family: str = "sym8") -> TuneResult:
    """Select (C, j0, lam) by the modified BIC on full-data fits."""
    curves = np.asarray(curves, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    records = []
    for C in sorted(grid.C_values):
        for j0 in sorted(grid.j0_values):
            Z = build_design(curves, WaveletSpec(family=family, j0=j0))
            cfg = replace(config, C=C)
            lams = _grid_lambdas(Y, Z, cfg, grid)
            for lam, fit in _path_fits(Y, Z, cfg, lams):
                if fit is None:
                    records.append(TuneRecord(C=C, j0=j0, lam=lam,
                                              criterion=np.nan, ok=False))
                    continue
                records.append(TuneRecord(
                    C=C, j0=j0, lam=lam,
                    criterion=float(modified_bic(fit, n)), ok=True,
                    n_iters=fit.n_iters, converged=fit.converged, q0=fit.q0,
                    active_counts=tuple(int(v) for v in fit.active_counts),
                ))
    return TuneResult(records, _pick_best(records), selection_rule="BIC")


def train_validate_test(train, valid, test, grid: TuneGrid, config: FitConfig,
                        family: str = "sym8"):
    """Fit the grid on train, pick by validation loss, score on test.

    Each of train/valid/test is a (curves, responses) pair on a shared
    dyadic grid.  Returns (TuneResult, test_loss, best_fit).
    """
    (Xtr, Ytr), (Xva, Yva), (Xte, Yte) = train, valid, test
    records = []
    fits = {}
    for C in sorted(grid.C_values):
        for j0 in sorted(grid.j0_values):
            spec = WaveletSpec(family=family, j0=j0)
            Ztr = build_design(np.asarray(Xtr, float), spec)
            Zva = build_design(np.asarray(Xva, float), spec)
            cfg = replace(config, C=C)
            lams = _grid_lambdas(np.asarray(Ytr, float), Ztr, cfg, grid)
            for lam, fit in _path_fits(np.asarray(Ytr, float), Ztr, cfg, lams):
                if fit is None:
                    records.append(TuneRecord(C=C, j0=j0, lam=lam,
                                              criterion=np.nan, ok=False))
                    continue
                crit = predictive_loss(fit.params, np.asarray(Yva, float), Zva)
                rec = TuneRecord(
                    C=C, j0=j0, lam=lam, criterion=float(crit), ok=True,
                    n_iters=fit.n_iters, converged=fit.converged, q0=fit.q0,
                    active_counts=tuple(int(v) for v in fit.active_counts),
                )
                records.append(rec)
                fits[(C, j0, lam)] = fit
    best = _pick_best(records)
    best_fit = fits[(best.C, best.j0, best.lam)]
    spec = WaveletSpec(family=family, j0=best.j0)
    Zte = build_design(np.asarray(Xte, float), spec)
    test_loss = predictive_loss(best_fit.params, np.asarray(Yte, float), Zte)
    return TuneResult(records, best, "ValidationLoss"), float(test_loss), best_fit


def select_components(curves, Y, grid: TuneGrid, rule: str, config: FitConfig,
                      k: int = 5, seed: int = 0, family: str = "sym8") -> TuneResult:
    """Choose C (and lam) at fixed j0 by the requested rule."""
    if rule == "BIC":
        return bic_search(curves, Y, grid, config, family=family)
    if rule == "CV5":
        return kfold_cv(curves, Y, grid, config, k=k, seed=seed, family=family)
    raise ValueError(f"rule must be 'CV5' or 'BIC', got {rule!r}")
