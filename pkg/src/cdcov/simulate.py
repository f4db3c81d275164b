"""Synthetic factor-model benchmarks: data generation, replicates, metrics.

Two designs are covered. Setting 1 draws a sparse p x ktr loading matrix
(an exact floor(s * p * ktr)-sized uniform subset of entries zeroed, the
rest standard normal) and adds isotropic noise sigma0_sq * I. Setting 2
replaces the isotropic part with the covariance of a stationary AR(1)
sequence, which misspecifies the factor-plus-diagonal shape on purpose.

Every replicate redraws the loading matrix, the truth and the data from
per-replicate streams of one root seed, so a cell's output is a pure
function of its configuration and can be reproduced bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import AtConfig, PoetConfig, adaptive_threshold, poet
from .errors import CdcovError, InvalidInputError
from .estimator import cd_estimate
from .matrices import CovPair, DataMatrix, RngSeed, SymMat, center_columns, cov_pair, frob_norm, op_norm
from .sure import cd_risk_curve, default_k_grid, select_k

__all__ = [
    "SimConfig",
    "BenchRecord",
    "make_sigma0",
    "draw_data",
    "run_cell",
    "sparsity_sweep",
    "METHODS",
]

log = logging.getLogger(__name__)

METHODS = ("cd", "at", "poet", "sample")

# Relative eigenvalue floor when factorizing a near-singular truth.
_FACTOR_CLAMP = 1e-12


@dataclass(frozen=True)
class SimConfig:
    """Full description of one synthetic experiment cell."""

    setting: int
    n: int
    p: int
    ktr: int
    s: float
    replicates: int
    seed: RngSeed
    sigma0_sq: float = 1.0
    ar_error_var: float = 0.4
    ar_coef: float = 0.1
    ar_variance_mode: str = "innovation"  # or "marginal"

    def __post_init__(self) -> None:
        if self.setting not in (1, 2):
            raise InvalidInputError(f"setting must be 1 or 2, got {self.setting}")
        if self.n < 2:
            raise InvalidInputError(f"sample size must be >= 2, got n={self.n}")
        if self.p < 2:
            raise InvalidInputError(f"dimension must be >= 2, got p={self.p}")
        if not 1 <= self.ktr < self.p:
            raise InvalidInputError(f"true factor count must satisfy 1 <= ktr < p, got {self.ktr}")
        if not 0.0 < self.s < 1.0:
            raise InvalidInputError(f"sparsity fraction must lie in (0, 1), got s={self.s}")
        if self.replicates < 1:
            raise InvalidInputError(f"replicate count must be >= 1, got {self.replicates}")
        if self.sigma0_sq <= 0.0:
            raise InvalidInputError("sigma0_sq must be positive")
        if self.ar_error_var <= 0.0:
            raise InvalidInputError("ar_error_var must be positive")
        if not abs(self.ar_coef) < 1.0:
            raise InvalidInputError("|ar_coef| must be < 1")
        if self.ar_variance_mode not in ("innovation", "marginal"):
            raise InvalidInputError(f"unknown ar_variance_mode {self.ar_variance_mode!r}")


@dataclass(frozen=True)
class BenchRecord:
    """Aggregated errors of one method on one simulation cell."""

    method: str
    setting: int
    n: int
    p: int
    ktr: int
    s: float
    replicates: int
    op_err_mean: float
    op_err_se: float
    fro_err_mean: float
    fro_err_se: float
    k_hat_mode: int | None = None
    k_opt: int | None = None


def _loadings(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    lam = rng.standard_normal((cfg.p, cfg.ktr))
    n_zero = int(np.floor(cfg.s * cfg.p * cfg.ktr))
    if n_zero > 0:
        flat = rng.choice(cfg.p * cfg.ktr, size=n_zero, replace=False)
        lam.ravel()[flat] = 0.0
    return lam


def ar1_covariance(p: int, coef: float, error_var: float, mode: str = "innovation") -> SymMat:
    """Covariance of a stationary AR(1) sequence.

    ``mode="innovation"`` reads ``error_var`` as the innovation variance
    (marginal variance error_var / (1 - coef^2)); ``mode="marginal"`` reads
    it as the marginal variance directly.
    """
    if not abs(coef) < 1.0:
        raise InvalidInputError("|coef| must be < 1")
    marginal = error_var / (1.0 - coef**2) if mode == "innovation" else error_var
    idx = np.arange(p)
    return SymMat.from_array(marginal * coef ** np.abs(idx[:, None] - idx[None, :]))


def make_sigma0(cfg: SimConfig, rep: int = 0) -> SymMat:
    """Draw the truth for one replicate from the replicate's own stream."""
    rng = cfg.seed.generator(rep, 0)
    lam = _loadings(cfg, rng)
    low_rank = lam @ lam.T
    if cfg.setting == 1:
        sigma0 = low_rank + cfg.sigma0_sq * np.eye(cfg.p)
    else:
        omega = ar1_covariance(cfg.p, cfg.ar_coef, cfg.ar_error_var, cfg.ar_variance_mode)
        sigma0 = low_rank + omega.values
    return SymMat.from_array(sigma0)


def draw_data(sigma0: SymMat, n: int, seed: RngSeed | np.random.Generator) -> DataMatrix:
    """n i.i.d. N(0, Sigma0) columns via a symmetric eigen-factorization.

    Eigenvalues below _FACTOR_CLAMP * lambda_max are clamped to zero so a
    numerically singular truth still factorizes; genuinely indefinite input
    is rejected.
    """
    if n < 1:
        raise InvalidInputError(f"need n >= 1, got n={n}")
    rng = seed.generator() if isinstance(seed, RngSeed) else seed
    w, v = np.linalg.eigh(sigma0.values)
    top = float(w[-1])
    if top < 0.0:
        raise InvalidInputError("sigma0 must be positive semidefinite")
    clamp = _FACTOR_CLAMP * max(top, 1.0)
    if float(w[0]) < -1e-8 * max(top, 1.0):
        raise InvalidInputError("sigma0 is indefinite; cannot factorize")
    w = np.where(w < clamp, 0.0, w)
    root = v * np.sqrt(w)[None, :]
    z = rng.standard_normal((sigma0.dim, n))
    return DataMatrix.from_array(root @ z)


def _method_streams() -> dict[str, int]:
    return {"at": 0, "poet": 1}


def _run_method(
    method: str,
    pair: CovPair,
    x: DataMatrix,
    cfg: SimConfig,
    rep: int,
    k_grid: np.ndarray,
    at_config: AtConfig,
    poet_factors: int,
) -> tuple[SymMat, int | None]:
    if method == "sample":
        return pair.mle, None
    if method == "cd":
        curve = select_k(pair, k_grid)
        return cd_estimate(pair.mle, curve.k_hat), curve.k_hat
    if method == "at":
        seed = cfg.seed.child(rep, 2, _method_streams()["at"])
        return adaptive_threshold(x, at_config, seed), None
    if method == "poet":
        seed = cfg.seed.child(rep, 2, _method_streams()["poet"])
        pcfg = PoetConfig(n_factors=poet_factors, residual_threshold=at_config)
        return poet(x, pcfg, seed), None
    raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")


def _replicate(
    cfg: SimConfig,
    rep: int,
    methods: list[str],
    k_grid: np.ndarray,
    at_config: AtConfig,
    poet_factors: int,
    compute_k_opt: bool,
) -> dict:
    sigma0 = make_sigma0(cfg, rep)
    x = center_columns(draw_data(sigma0, cfg.n, cfg.seed.generator(rep, 1)))
    pair = cov_pair(x)
    out: dict = {"errors": {}, "k_hat": {}, "skips": {}}
    for method in methods:
        try:
            est, k_hat = _run_method(method, pair, x, cfg, rep, k_grid, at_config, poet_factors)
        except CdcovError as exc:
            log.warning("replicate %d: method %s skipped: %s", rep, method, exc)
            out["skips"][method] = str(exc)
            continue
        diff = SymMat.from_array(est.values - sigma0.values)
        out["errors"][method] = (op_norm(diff) / cfg.p, frob_norm(diff) / cfg.p)
        out["k_hat"][method] = k_hat
    if compute_k_opt:
        out["risk_curve"] = cd_risk_curve(pair.mle, sigma0, k_grid)
    return out


def _mode_smallest(values: list[int]) -> int:
    uniq, counts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    return int(uniq[np.argmax(counts)])  # argmax takes the first (smallest) on ties


def run_cell(
    cfg: SimConfig,
    methods,
    *,
    k_grid=None,
    at_config: AtConfig | None = None,
    poet_factors: int | None = None,
    compute_k_opt: bool = False,
    threads: int = 1,
    max_skip_fraction: float = 0.10,
) -> list[BenchRecord]:
    """Run one (setting, n, p, ktr, s) cell and aggregate per-method errors.

    Replicates execute on independent streams, so any thread count yields
    the same records. A method whose skip rate exceeds ``max_skip_fraction``
    fails the whole cell.
    """
    methods = list(methods)
    if not methods:
        raise InvalidInputError("methods list must be nonempty")
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}; expected one of {METHODS}")
    if cfg.replicates < 1:
        raise InvalidInputError(f"replicate count must be >= 1, got {cfg.replicates}")

    grid = np.asarray(k_grid, dtype=np.int64) if k_grid is not None else default_k_grid(cfg.p)
    at_cfg = at_config if at_config is not None else AtConfig()
    factors = poet_factors if poet_factors is not None else cfg.ktr

    def work(rep: int) -> dict:
        return _replicate(cfg, rep, methods, grid, at_cfg, factors, compute_k_opt)

    reps = range(cfg.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, reps))
    else:
        results = [work(rep) for rep in reps]

    k_opt: int | None = None
    if compute_k_opt:
        mean_curve = np.mean([r["risk_curve"] for r in results], axis=0)
        k_opt = int(grid[int(np.argmin(mean_curve))])

    records = []
    for method in methods:
        ops = [r["errors"][method][0] for r in results if method in r["errors"]]
        fros = [r["errors"][method][1] for r in results if method in r["errors"]]
        n_skip = cfg.replicates - len(ops)
        if n_skip > max_skip_fraction * cfg.replicates:
            raise CdcovError(
                f"method {method}: {n_skip}/{cfg.replicates} replicates skipped; cell failed"
            )
        ops_a = np.asarray(ops)
        fros_a = np.asarray(fros)

        def se(a):
            return float(np.std(a, ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0

        k_hats = [r["k_hat"][method] for r in results if r["k_hat"].get(method) is not None]
        records.append(
            BenchRecord(
                method=method,
                setting=cfg.setting,
                n=cfg.n,
                p=cfg.p,
                ktr=cfg.ktr,
                s=cfg.s,
                replicates=len(ops),
                op_err_mean=float(ops_a.mean()),
                op_err_se=se(ops_a),
                fro_err_mean=float(fros_a.mean()),
                fro_err_se=se(fros_a),
                k_hat_mode=_mode_smallest(k_hats) if k_hats else None,
                k_opt=k_opt if method == "cd" else None,
            )
        )
    return records


def sparsity_sweep(base: SimConfig, s_values, methods, **kwargs) -> list[BenchRecord]:
    """run_cell at each sparsity level, sharing the root seed across levels."""
    s_values = [float(s) for s in s_values]
    if not s_values:
        raise InvalidInputError("s_values must be nonempty")
    for s in s_values:
        if not 0.0 < s < 1.0:
            raise InvalidInputError(f"sparsity values must lie in (0, 1), got {s}")
    records: list[BenchRecord] = []
    for s in s_values:
        records.extend(run_cell(replace(base, s=s), methods, **kwargs))
    return records
