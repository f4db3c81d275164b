"""Unbiased risk estimation and selection of the compressed dimension.

For each candidate k the Frobenius risk of the CD estimator is estimated
from data alone as

    SURE(k) = || est(k) - S_hat ||_F^2 + 2 * optimism_hat(k),

where S_hat is the unbiased (n - 1) sample covariance, est(k) is the CD
estimate built from S_hat (one declared convention throughout, so the
discrepancy term vanishes exactly at k = p), and optimism_hat plugs
unbiased estimators of the second moments of S_hat's entries into

    optimism(k) = sum_ij cov(est_ij(k), s_hat_ij)
                = eta * sum_{i != j} var(s_hat_ij)
                  + sum_i [ (eta + gamma) var(s_hat_ii)
                            + gamma * sum_{l != i} cov(s_hat_ll, s_hat_ii) ].

E[SURE(k)] then differs from the true risk by sum_ij var(s_hat_ij), which
does not depend on k, so the argmin is unbiasedly identified.

Two moment-coefficient sets are provided. ``unbiased_moment_coeffs`` is
derived from exact Wishart moments for column-centered Gaussian data
(degrees of freedom n - 1) and is the default: with it the k-free-offset
property above holds exactly. ``moment_coeffs`` is the classic rational
closed-form set; it is retained as a reference parameterization (its
denominators n^3 + n^2 - 2n - 4 appear in the closed-form risk display)
but carries an O(1/n) relative bias against brute-force moments, which the
unbiasedness oracles in the test suite can resolve at n = 20.

``sure_direct`` evaluates SURE by explicit O(p^2) summation over entries;
``sure_closed`` evaluates the trace-identity closed form. The two share
only the coefficient definitions and agree to floating-point accuracy,
which is enforced as a cross-path test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .estimator import cd_coeffs
from .matrices import CovPair, RngSeed, SymMat, center_columns, cov_pair

__all__ = [
    "MomentCoeffs",
    "moment_coeffs",
    "unbiased_moment_coeffs",
    "var_hat_off",
    "var_hat_diag",
    "cov_hat_diag_pair",
    "sure_direct",
    "sure_closed",
    "select_k",
    "SureCurve",
    "RiskCurve",
    "risk_oracle",
    "risk_offset_estimate",
    "default_k_grid",
]


@dataclass(frozen=True)
class MomentCoeffs:
    """Coefficients of the quadratic moment estimators at sample size n.

    var_hat(s_hat_ij)       = a_n * t_ij^2 + b_n * t_ii t_jj   (i != j)
    var_hat(s_hat_ii)       = c_n * t_ii^2
    cov_hat(s_hat_ll, s_hat_ii) = d_n * t_il^2 + e_n * t_ii t_ll (l != i)

    with t the maximum-likelihood (denominator n) covariance entries.
    """

    n: int
    a_n: float
    b_n: float
    c_n: float
    d_n: float
    e_n: float


def _check_n(n: int) -> int:
    n = int(n)
    if n < 3:
        raise InvalidInputError(f"moment coefficients need n >= 3, got n={n}")
    return n


def moment_coeffs(n: int) -> MomentCoeffs:
    """Classic rational closed-form coefficient set.

    Kept as the reference parameterization for the closed-form risk
    display; biased at O(1/n) relative to :func:`unbiased_moment_coeffs`.
    """
    n = _check_n(n)
    d0 = n**3 + n**2 - 2 * n - 4
    if d0 == 0 or n == 1:
        raise InvalidInputError(f"degenerate denominator at n={n}")
    return MomentCoeffs(
        n=n,
        a_n=n**2 * (n**2 - n - 4) / ((n - 1) ** 2 * d0),
        b_n=n**3 / ((n - 1) * d0),
        c_n=n**2 * (2 * n**2 - 2 * n - 4) / ((n - 1) ** 2 * d0),
        d_n=2 * n**2 * (n + 2) / ((n - 1) * d0),
        e_n=2 * (n - 2) * n**2 / ((n - 1) * d0),
    )


def unbiased_moment_coeffs(n: int) -> MomentCoeffs:
    """Exactly unbiased coefficient set for centered Gaussian data.

    Derived from Wishart(n - 1) product moments of the MLE entries
    t_ij = w_ij / n:

        E[t_ij^2]      = ((n-1)/n) s_ij^2 + ((n-1)/n^2) s_ii s_jj
        E[t_ii t_jj]   = ((n-1)^2/n^2) s_ii s_jj + (2(n-1)/n^2) s_ij^2

    inverted for unbiased estimators of s_ij^2 and s_ii s_jj and combined
    with var(s_hat_ij) = (s_ij^2 + s_ii s_jj)/(n-1),
    var(s_hat_ii) = 2 s_ii^2/(n-1) and cov(s_hat_ll, s_hat_ii) =
    2 s_il^2/(n-1). Note e_n < 0: the product term over-counts and must be
    subtracted for the diagonal covariance.
    """
    n = _check_n(n)
    m1 = n - 1
    m2 = n - 2
    p1 = n + 1
    return MomentCoeffs(
        n=n,
        a_n=n**2 * (n - 3) / (m1**2 * m2 * p1),
        b_n=n**2 / (m1 * m2 * p1),
        c_n=2 * n**2 / (m1**2 * p1),
        d_n=2 * n**2 / (m1 * m2 * p1),
        e_n=-2 * n**2 / (m1**2 * m2 * p1),
    )


def _check_nonneg(name: str, value) -> None:
    if np.any(np.asarray(value) < 0):
        raise InvalidInputError(f"{name} must be nonnegative")


def var_hat_off(sigma_tilde_ij, sigma_tilde_ii, sigma_tilde_jj, c: MomentCoeffs):
    """Estimate of var(s_hat_ij) for an off-diagonal entry (i != j)."""
    _check_nonneg("sigma_tilde_ii", sigma_tilde_ii)
    _check_nonneg("sigma_tilde_jj", sigma_tilde_jj)
    return c.a_n * np.square(sigma_tilde_ij) + c.b_n * np.multiply(sigma_tilde_ii, sigma_tilde_jj)


def var_hat_diag(sigma_tilde_ii, c: MomentCoeffs):
    """Estimate of var(s_hat_ii) for a diagonal entry."""
    _check_nonneg("sigma_tilde_ii", sigma_tilde_ii)
    return c.c_n * np.square(sigma_tilde_ii)


def cov_hat_diag_pair(sigma_tilde_il, sigma_tilde_ii, sigma_tilde_ll, c: MomentCoeffs):
    """Estimate of cov(s_hat_ll, s_hat_ii) for distinct diagonal entries."""
    _check_nonneg("sigma_tilde_ii", sigma_tilde_ii)
    _check_nonneg("sigma_tilde_ll", sigma_tilde_ll)
    return c.d_n * np.square(sigma_tilde_il) + c.e_n * np.multiply(sigma_tilde_ii, sigma_tilde_ll)


def _check_sure_inputs(cov: CovPair, k: int) -> int:
    p = cov.mle.dim
    if p < 2:
        raise InvalidInputError(f"SURE needs p >= 2, got p={p}")
    if not 1 <= int(k) <= p:
        raise InvalidInputError(f"compressed dimension must satisfy 1 <= k <= p, got k={k}")
    if cov.n < 3:
        raise InvalidInputError(f"SURE needs n >= 3, got n={cov.n}")
    return p


def _sure_direct_parts(cov: CovPair, k: int, c: MomentCoeffs) -> tuple[float, float]:
    """(discrepancy, optimism_hat) by explicit summation over the entry grid."""
    p = _check_sure_inputs(cov, k)
    cc = cd_coeffs(p, k)
    s_hat = cov.unbiased.values
    s_til = cov.mle.values
    off = ~np.eye(p, dtype=bool)

    t_hat = float(np.trace(s_hat))
    disc_entries = (cc.eta - 1.0) * s_hat + (cc.gamma * t_hat) * np.eye(p)
    disc = float(np.sum(disc_entries**2))

    d_til = np.diag(s_til)
    voff = var_hat_off(s_til, d_til[:, None], d_til[None, :], c)
    vdiag = var_hat_diag(d_til, c)
    cpair = cov_hat_diag_pair(s_til, d_til[:, None], d_til[None, :], c)
    optimism = (
        cc.eta * float(np.sum(voff[off]))
        + (cc.eta + cc.gamma) * float(np.sum(vdiag))
        + cc.gamma * float(np.sum(cpair[off]))
    )
    return disc, optimism


def sure_direct(cov: CovPair, k: int, coeffs: MomentCoeffs | None = None) -> float:
    """SURE(k) as the reference entrywise sum (see module docstring)."""
    c = coeffs if coeffs is not None else unbiased_moment_coeffs(cov.n)
    disc, optimism = _sure_direct_parts(cov, k, c)
    return disc + 2.0 * optimism


def sure_closed(cov: CovPair, k: int, coeffs: MomentCoeffs | None = None) -> float:
    """SURE(k) via trace identities; fast path validated against sure_direct.

    With Q = sum_ij s_hat_ij^2, T_hat = Tr(S_hat), T_til = Tr(S_til),
    S_off = sum_{i != j} t_ij^2, D_sq = sum_i t_ii^2, D_off = T_til^2 - D_sq:

        SURE(k) = (eta-1)^2 Q + p gamma^2 T_hat^2 + 2 gamma (eta-1) T_hat^2
                  + 2 [ (a eta + d gamma) S_off + (b eta + e gamma) D_off
                        + c (eta + gamma) D_sq ].
    """
    p = _check_sure_inputs(cov, k)
    c = coeffs if coeffs is not None else unbiased_moment_coeffs(cov.n)
    cc = cd_coeffs(p, k)
    s_hat = cov.unbiased.values
    s_til = cov.mle.values

    q_hat = float(np.sum(s_hat**2))
    t_hat = float(np.trace(s_hat))
    d_sq = float(np.sum(np.diag(s_til) ** 2))
    s_off = float(np.sum(s_til**2)) - d_sq
    d_off = float(np.trace(s_til)) ** 2 - d_sq

    disc = (
        (cc.eta - 1.0) ** 2 * q_hat
        + p * cc.gamma**2 * t_hat**2
        + 2.0 * cc.gamma * (cc.eta - 1.0) * t_hat**2
    )
    optimism = (
        (c.a_n * cc.eta + c.d_n * cc.gamma) * s_off
        + (c.b_n * cc.eta + c.e_n * cc.gamma) * d_off
        + c.c_n * (cc.eta + cc.gamma) * d_sq
    )
    return disc + 2.0 * optimism


def risk_offset_estimate(cov: CovPair, coeffs: MomentCoeffs | None = None) -> float:
    """Estimate of sum_ij var(s_hat_ij), the k-free gap E[SURE] - risk.

    Diagnostic only; it cancels in the argmin over k.
    """
    if cov.n < 3:
        raise InvalidInputError(f"needs n >= 3, got n={cov.n}")
    c = coeffs if coeffs is not None else unbiased_moment_coeffs(cov.n)
    s_til = cov.mle.values
    d_til = np.diag(s_til)
    off = ~np.eye(cov.mle.dim, dtype=bool)
    voff = var_hat_off(s_til, d_til[:, None], d_til[None, :], c)
    return float(np.sum(voff[off]) + np.sum(var_hat_diag(d_til, c)))


@dataclass(frozen=True)
class SureCurve:
    """SURE values over a k grid, the selected k, and per-k term breakdown."""

    p: int
    n: int
    k_grid: np.ndarray
    sure_values: np.ndarray
    k_hat: int
    terms: dict[str, np.ndarray]


def default_k_grid(p: int, step: int = 10) -> np.ndarray:
    """Grid min(step, p), min(step, p)+step, ..., p (always includes p)."""
    if p < 2:
        raise InvalidInputError("grid needs p >= 2")
    if step < 1:
        raise InvalidInputError("grid step must be >= 1")
    start = min(step, p)
    grid = list(range(start, p + 1, step))
    if grid[-1] != p:
        grid.append(p)
    return np.asarray(grid, dtype=np.int64)


def _check_grid(k_grid, p: int) -> np.ndarray:
    grid = np.asarray(k_grid, dtype=np.int64)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("k grid must be a nonempty 1-d integer list")
    if np.any(grid < 1) or np.any(grid > p):
        raise InvalidInputError(f"k grid must lie within [1, {p}]")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("k grid must be strictly increasing")
    return grid


def select_k(cov: CovPair, k_grid, coeffs: MomentCoeffs | None = None) -> SureCurve:
    """Pick k_hat = argmin SURE(k) over the grid; ties go to the smaller k."""
    p = cov.mle.dim
    grid = _check_grid(k_grid, p)
    c = coeffs if coeffs is not None else unbiased_moment_coeffs(cov.n)
    disc = np.empty(grid.size)
    opt = np.empty(grid.size)
    for i, k in enumerate(grid):
        disc[i], opt[i] = _sure_direct_parts(cov, int(k), c)
    values = disc + 2.0 * opt
    k_hat = int(grid[int(np.argmin(values))])
    return SureCurve(
        p=p,
        n=cov.n,
        k_grid=grid,
        sure_values=values,
        k_hat=k_hat,
        terms={"discrepancy": disc, "optimism": opt},
    )


@dataclass(frozen=True)
class RiskCurve:
    """Monte-Carlo Frobenius risk of the CD estimator over a k grid."""

    k_grid: np.ndarray
    risk_values: np.ndarray
    replicates: int
    k_opt: int


def cd_risk_curve(sample: SymMat, sigma0: SymMat, k_grid: np.ndarray) -> np.ndarray:
    """|| eta S + gamma Tr(S) I - Sigma0 ||_F^2 for every k on the grid.

    Exact quadratic expansion in the precomputed inner products, so the
    per-k cost is O(1) after one O(p^2) pass.
    """
    p = sample.dim
    grid = _check_grid(k_grid, p)
    s = sample.values
    s0 = sigma0.values
    s_sq = float(np.sum(s * s))
    s_s0 = float(np.sum(s * s0))
    s0_sq = float(np.sum(s0 * s0))
    tr_s = float(np.trace(s))
    tr_s0 = float(np.trace(s0))
    eta = np.array([cd_coeffs(p, int(k)).eta for k in grid])
    gamma = np.array([cd_coeffs(p, int(k)).gamma for k in grid])
    gt = gamma * tr_s
    return (
        eta**2 * s_sq
        - 2.0 * eta * s_s0
        + s0_sq
        + 2.0 * gt * (eta * tr_s - tr_s0)
        + p * gt**2
    )


def risk_oracle(
    sigma0: SymMat,
    n: int,
    k_grid,
    reps: int,
    seed: RngSeed,
    *,
    convention: str = "mle",
) -> RiskCurve:
    """Monte-Carlo R(k) = E || est(k) - Sigma0 ||_F^2 with known Sigma0.

    ``convention`` chooses which sample covariance feeds the CD map:
    ``"mle"`` (denominator n, the benchmark convention) or ``"unbiased"``
    (denominator n - 1, the convention SURE itself targets).
    """
    from .simulate import draw_data

    if reps < 1:
        raise InvalidInputError(f"replicate count must be >= 1, got {reps}")
    if n < 2:
        raise InvalidInputError(f"risk oracle needs n >= 2, got n={n}")
    if convention not in ("mle", "unbiased"):
        raise InvalidInputError(f"unknown convention {convention!r}")
    w = np.linalg.eigvalsh(sigma0.values)
    if w[0] < -1e-10 * max(w[-1], 1.0):
        raise InvalidInputError("sigma0 must be positive semidefinite")
    grid = _check_grid(k_grid, sigma0.dim)

    total = np.zeros(grid.size)
    for rep in range(reps):
        x = draw_data(sigma0, n, seed.generator(rep))
        pair = cov_pair(center_columns(x))
        sample = pair.mle if convention == "mle" else pair.unbiased
        total += cd_risk_curve(sample, sigma0, grid)
    risk = total / reps
    return RiskCurve(
        k_grid=grid,
        risk_values=risk,
        replicates=reps,
        k_opt=int(grid[int(np.argmin(risk))]),
    )
