"""The data-driven test statistic and its calibration.

From a sample X_1..X_n and null coefficients, form

    bhat_j = n**-0.5 * sum_i (Q_j(X_i) m(X_i) - alpha_j),       j = 1..k,

whiten nested prefixes with the inverse square root of the null covariance
to get T_k, select the order S_n as the smallest maximizer of the
Schwarz-penalized sequence T_k - k*log(n), and reject for large T_{S_n}.
Critical values come either from the limiting chi-squared(1) law or from a
Monte Carlo calibration under the null (the default, exact to resampling
noise at finite n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammainc, gammaincinv

from .measures import RngStream
from .nullmodel import (
    EigenDiagnostics, NullCoefficients, NullSpec, compute_coefficients,
    eigen_floor_diagnostics,
)

DEFAULT_MC_SEED = 202608
_CALIBRATION_TAG = 0xCA1
_TIE_REL_TOL = 1e-12

K_MIN, K_CLAMP_MAX = 3, 15


class DataDomainError(ValueError):
    """Observations fall outside the reference support."""

    def __init__(self, indices: Sequence[int], detail: str):
        self.indices = list(indices)
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = ", ..." if len(self.indices) > 10 else ""
        super().__init__(
            f"{detail}: offending observation indices [{shown}{more}]")


@dataclass(frozen=True)
class TestConfig:
    """Level, order policy, calibration mode, and numerical guards."""

    __test__ = False  # not a pytest class, despite the name

    alpha: float = 0.05
    k_max: int | str = "auto"
    calibration: str = "mc"
    mc_reps: int = 2000
    mc_seed: int = DEFAULT_MC_SEED
    eigen_condition_cap: float = 1e12
    u_split: float = 0.5
    coeff_method: str | None = None
    coeff_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.k_max != "auto":
            if not (isinstance(self.k_max, int) and self.k_max >= 1):
                raise ValueError("fixed k_max must be an integer >= 1")
        if self.calibration not in ("mc", "asymptotic"):
            raise ValueError("calibration must be 'mc' or 'asymptotic'")
        if self.calibration == "mc" and self.mc_reps < 100:
            raise ValueError("Monte Carlo calibration needs at least 100 reps")
        if not 0 < self.u_split < 1:
            raise ValueError("u_split must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k_max": self.k_max,
            "calibration": self.calibration,
            "mc_reps": self.mc_reps,
            "mc_seed": self.mc_seed,
            "eigen_condition_cap": self.eigen_condition_cap,
            "u_split": self.u_split,
            "coeff_method": self.coeff_method,
            "coeff_tol": self.coeff_tol,
        }


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def chi2_cdf(x: float, df: int) -> float:
    """Chi-squared CDF via the regularized lower incomplete gamma."""
    if df < 1:
        raise ValueError("degrees of freedom must be a positive integer")
    if x <= 0:
        return 0.0
    return float(gammainc(df / 2.0, x / 2.0))


def chi2_quantile(p: float, df: int) -> float:
    """Inverse of ``chi2_cdf`` in its first argument."""
    if not 0 <= p < 1:
        raise ValueError("quantile level must lie in [0, 1)")
    return float(2.0 * gammaincinv(df / 2.0, p))


def compute_bhat(data: np.ndarray, null: NullSpec,
                 coeffs: NullCoefficients, k: int) -> np.ndarray:
    """Centered, sqrt(n)-scaled empirical coefficients bhat_1..bhat_k.

    Each observation is centered by alpha_j before averaging, so the vector
    has mean zero under the null.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("data must be nonempty")
    if k > coeffs.k:
        raise ValueError(f"requested order {k} exceeds coefficients ({coeffs.k})")
    ok = null.ref.in_support(data)
    if not np.all(ok):
        raise DataDomainError(np.flatnonzero(~ok).tolist(),
                              "data outside the reference support")
    q = null.basis.eval_normalized(data, k)
    v = q[1:] * null.ref.density(data)
    return np.sqrt(data.size) * (v.mean(axis=1) - coeffs.alphas[:k])


def inv_sqrt_psd(sigma: np.ndarray, condition_cap: float = 1e12) -> np.ndarray:
    """Symmetric pseudo-inverse square root of a PSD matrix.

    Eigenvalues below ``max_eigenvalue / condition_cap`` are excluded from
    inversion, so near-singular directions are projected out rather than
    amplified.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma must be a square matrix")
    asym = float(np.max(np.abs(sigma - sigma.T)))
    if asym > 1e-10 * max(1.0, float(np.max(np.abs(sigma)))):
        raise ValueError(f"sigma is not symmetric (max asymmetry {asym:.3e})")
    w, vec = np.linalg.eigh(0.5 * (sigma + sigma.T))
    floor = w[-1] / condition_cap
    keep = w > max(floor, 0.0)
    if not np.any(keep):
        raise ValueError("all eigenvalues fall below the condition floor")
    vk = vec[:, keep]
    return (vk / np.sqrt(w[keep])) @ vk.T


def t_sequence(bhat: np.ndarray, sigma: np.ndarray,
               condition_cap: float = 1e12) -> np.ndarray:
    """Whitened squared norms T_1..T_k over nested prefixes."""
    bhat = np.asarray(bhat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (bhat.size, bhat.size):
        raise ValueError("bhat and sigma dimensions disagree")
    out = np.empty(bhat.size)
    for k in range(1, bhat.size + 1):
        root = inv_sqrt_psd(sigma[:k, :k], condition_cap)
        u = root @ bhat[:k]
        out[k - 1] = float(u @ u)
    return out


def select_order(t_seq: np.ndarray, n: int) -> int:
    """Smallest maximizer of the penalized sequence T_k - k*log(n).

    Ties (and near-ties at floating-point resolution) resolve to the
    smallest order.
    """
    t_seq = np.asarray(t_seq, dtype=float)
    if t_seq.size == 0:
        raise ValueError("t_sequence must be nonempty")
    if n < 2:
        raise ValueError("sample size must be at least 2")
    pen = t_seq - np.arange(1, t_seq.size + 1) * math.log(n)
    top = float(pen.max())
    tol = _TIE_REL_TOL * (1.0 + abs(top))
    return int(np.argmax(pen >= top - tol)) + 1


def default_kmax(n: int, diagnostics: EigenDiagnostics | None = None) -> int:
    """Order budget: clamp(ceil(2 ln n), 3, 15), capped by the usable order."""
    if n < 2:
        raise ValueError("sample size must be at least 2")
    k = min(max(math.ceil(2.0 * math.log(n)), K_MIN), K_CLAMP_MAX)
    if diagnostics is not None:
        k = min(k, diagnostics.usable_k_max)
    return k


def _mc_threshold(values: np.ndarray, alpha: float) -> float:
    """Rejection threshold matching the exact Monte Carlo p-value rule.

    With m = #{calibration >= observed}, p = (1 + m) / (reps + 1) and
    p <= alpha iff the observed statistic exceeds this order statistic.
    """
    reps = values.size
    allowed = math.floor((reps + 1) * alpha - 1.0 + 1e-9)
    if allowed < 0:
        return float(np.inf)
    return float(np.sort(values)[reps - 1 - allowed])


# ---------------------------------------------------------------------------
# Engine: cached machinery shared by single tests and batch simulation
# ---------------------------------------------------------------------------

class TestEngine:
    """Null coefficients, whitening roots, and calibration for one (null, n).

    Preparing an engine is the expensive step; evaluating the statistic on
    a batch of samples is a few vectorized passes, which keeps Monte Carlo
    calibration and power studies fast.
    """

    __test__ = False  # not a pytest class, despite the name

    def __init__(self, null: NullSpec, n: int, config: TestConfig,
                 coeffs: NullCoefficients | None = None):
        if n < 2:
            raise ValueError("sample size must be at least 2")
        self.null = null
        self.n = n
        self.config = config
        policy_k = (default_kmax(n) if config.k_max == "auto"
                    else int(config.k_max))
        policy_k = min(policy_k, null.basis.family.max_degree)
        if coeffs is None:
            coeffs = compute_coefficients(
                null, policy_k, method=config.coeff_method,
                u_split=config.u_split, tol=config.coeff_tol)
        if coeffs.k < policy_k:
            policy_k = coeffs.k
        self.coeffs = coeffs
        self.diagnostics = eigen_floor_diagnostics(
            coeffs, config.eigen_condition_cap)
        if config.k_max == "auto":
            self.used_k_max = max(1, min(policy_k, self.diagnostics.usable_k_max))
        else:
            self.used_k_max = policy_k
        self._roots = [inv_sqrt_psd(coeffs.sigma[:k, :k],
                                    config.eigen_condition_cap)
                       for k in range(1, self.used_k_max + 1)]
        self._penalty = np.arange(1, self.used_k_max + 1) * math.log(n)
        self._critical = None
        self._calibration_values = None

    # -- statistic -----------------------------------------------------

    def statistic_batch(self, samples: np.ndarray):
        """T sequences, selected orders, and T_{S_n} for rows of samples.

        ``samples`` has shape (reps, n).  Returns (t_seq[reps, k], s_n[reps],
        t_stat[reps]).
        """
        samples = np.asarray(samples, dtype=float)
        reps, n = samples.shape
        k = self.used_k_max
        q = self.null.basis.eval_normalized(samples, k)
        v = q[1:] * self.null.ref.density(samples)
        b = np.sqrt(n) * (v.mean(axis=2) - self.coeffs.alphas[:k, None])
        t_seq = np.empty((k, reps))
        for j in range(1, k + 1):
            u = self._roots[j - 1] @ b[:j]
            t_seq[j - 1] = np.einsum("ir,ir->r", u, u)
        pen = t_seq - self._penalty[:, None]
        top = pen.max(axis=0)
        tol = _TIE_REL_TOL * (1.0 + np.abs(top))
        s_n = np.argmax(pen >= (top - tol)[None, :], axis=0) + 1
        t_stat = t_seq[s_n - 1, np.arange(reps)]
        return t_seq.T, s_n, t_stat

    def sample_null_batch(self, reps: int, base: RngStream) -> np.ndarray:
        """reps x n matrix of null samples; row r uses child stream r."""
        out = np.empty((reps, self.n))
        for r in range(reps):
            out[r] = self.null.sample_x(base.child(r).generator(), self.n)
        return out

    # -- calibration ---------------------------------------------------

    def calibration_values(self) -> np.ndarray:
        """T_{S_n} over fresh null samples, deterministic given the config seed."""
        if self._calibration_values is None:
            base = RngStream(self.config.mc_seed, 0).child(_CALIBRATION_TAG, self.n)
            samples = self.sample_null_batch(self.config.mc_reps, base)
            self._calibration_values = self.statistic_batch(samples)[2]
        return self._calibration_values

    def critical_value(self) -> float:
        if self._critical is None:
            if self.config.calibration == "asymptotic":
                self._critical = chi2_quantile(1.0 - self.config.alpha, 1)
            else:
                self._critical = _mc_threshold(self.calibration_values(),
                                               self.config.alpha)
        return self._critical

    def p_value(self, t_stat: float) -> float:
        if self.config.calibration == "asymptotic":
            return 1.0 - chi2_cdf(t_stat, 1)
        cal = self.calibration_values()
        return (1.0 + int(np.sum(cal >= t_stat))) / (cal.size + 1.0)

    def run(self, data: np.ndarray) -> "TestResult":
        data = np.asarray(data, dtype=float)
        if data.ndim != 1 or data.size == 0:
            raise ValueError("data must be a nonempty vector")
        ok = self.null.ref.in_support(data)
        if not np.all(ok):
            raise DataDomainError(np.flatnonzero(~ok).tolist(),
                                  "data outside the reference support")
        if data.size != self.n:
            raise ValueError(f"engine prepared for n={self.n}, got {data.size}")
        t_seq, s_n, t_stat = self.statistic_batch(data[None, :])
        crit = self.critical_value()
        t0 = float(t_stat[0])
        return TestResult(
            n=self.n,
            t_sequence=t_seq[0].copy(),
            s_n=int(s_n[0]),
            t_stat=t0,
            critical_value=crit,
            p_value=self.p_value(t0),
            reject=bool(t0 > crit),
            lambda_mins=self.diagnostics.lambda_mins[: self.used_k_max].copy(),
            used_k_max=self.used_k_max,
            alpha=self.config.alpha,
            calibration=self.config.calibration,
            coefficient_method=self.coeffs.method,
            notes=tuple(self.coeffs.notes),
        )


@dataclass
class TestResult:
    """Everything the decision rests on, in selection order."""

    __test__ = False  # not a pytest class, despite the name

    n: int
    t_sequence: np.ndarray
    s_n: int
    t_stat: float
    critical_value: float
    p_value: float
    reject: bool
    lambda_mins: np.ndarray
    used_k_max: int
    alpha: float
    calibration: str
    coefficient_method: str
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= self.s_n <= self.used_k_max:
            raise ValueError("selected order outside [1, used_k_max]")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "t_sequence": np.asarray(self.t_sequence).tolist(),
            "s_n": self.s_n,
            "t_stat": self.t_stat,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "lambda_mins": np.asarray(self.lambda_mins).tolist(),
            "used_k_max": self.used_k_max,
            "alpha": self.alpha,
            "calibration": self.calibration,
            "coefficient_method": self.coefficient_method,
            "notes": list(self.notes),
        }


def critical_value(config: TestConfig, null: NullSpec, n: int,
                   coeffs: NullCoefficients | None = None) -> float:
    """Rejection threshold for T_{S_n} at the configured level."""
    if config.calibration == "asymptotic":
        return chi2_quantile(1.0 - config.alpha, 1)
    return TestEngine(null, n, config, coeffs).critical_value()


def run_test(data, null: NullSpec, config: TestConfig = TestConfig(),
             coeffs: NullCoefficients | None = None) -> TestResult:
    """Run the full data-driven test on one sample."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise ValueError("data must be a nonempty vector")
    engine = TestEngine(null, data.size, config, coeffs)
    return engine.run(data)
