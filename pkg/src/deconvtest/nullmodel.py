"""Null expansion coefficients and their covariance.

Under the null the observable X = Y + Z has expansion coefficients
``alpha_j = E[Q_j(X) m(X)]`` against the orthonormal reference basis, and
the test statistic whitens empirical coefficient estimates with

    sigma_ij = E[Q_i(X) Q_j(X) m(X)**2] - alpha_i * alpha_j.

Three computation paths exist:

* ``closed_form`` (independent components): the polynomial of the sum is
  split by the convolution addition identities into products of
  one-dimensional expectations over Y and Z separately (Laguerre and
  Meixner), or into joint moments through monomial expansion (shifted
  Legendre),
* ``quadrature``: direct tensor integration of the bivariate integrand,
* ``monte_carlo``: sample moments over a joint sampler; the only path
  available when Y and Z are dependent.

All deterministic paths refine until successive estimates agree to an
absolute tolerance, so coefficient sets are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, inf, sqrt
from typing import Callable

import numpy as np

from . import orthopoly
from .engines import QuadratureError, expectation_rule, independent_sampler
from .measures import Distribution, GeometricRef, ReferenceMeasure, RngStream
from .orthopoly import (
    BasisTable, PolynomialFamilySpec, certify_orthonormality,
    laguerre_table, meixner_scaled_table,
)

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"

PSD_SLACK = 1e-10
DEFAULT_COEFF_TOL = 1e-10
DEFAULT_MC_DRAWS = 1_000_000
DEFAULT_MC_STREAM = RngStream(861221509, 0)

_REF_FAMILY = {
    "exponential1": orthopoly.LAGUERRE,
    "uniform01": orthopoly.SHIFTED_LEGENDRE,
    "geometric": orthopoly.MEIXNER,
}


class NullSpecError(ValueError):
    """Inconsistent pairing of component laws, reference, and basis."""


def default_basis_for(ref: ReferenceMeasure, max_degree: int = 16) -> BasisTable:
    """Certified basis matching a reference measure."""
    kind = _REF_FAMILY[ref.kind]
    shape = ref.p if isinstance(ref, GeometricRef) else 1.0
    return certify_orthonormality(
        PolynomialFamilySpec(kind=kind, shape=shape, max_degree=max_degree))


@dataclass(frozen=True)
class NullSpec:
    """The convolution null: component laws, reference measure, basis.

    ``joint_sampler(gen, n) -> (y, z)`` switches on the dependent case, in
    which the deterministic coefficient paths are unavailable.
    """

    y: Distribution
    z: Distribution
    ref: ReferenceMeasure
    basis: BasisTable = None
    joint_sampler: Callable | None = None

    def __post_init__(self):
        if self.basis is None:
            object.__setattr__(self, "basis", default_basis_for(self.ref))
        fam = self.basis.family
        want = _REF_FAMILY[self.ref.kind]
        if fam.kind != want:
            raise NullSpecError(
                f"basis family {fam.kind!r} does not match reference "
                f"{self.ref.kind!r} (expected {want!r})")
        if fam.kind == orthopoly.MEIXNER and fam.shape != self.ref.p:
            raise NullSpecError(
                f"Meixner parameter {fam.shape} differs from reference "
                f"parameter {self.ref.p}")
        if fam.kind == orthopoly.LAGUERRE and fam.shape != 1.0:
            raise NullSpecError(
                "the exponential reference pairs with shape-1 Laguerre")
        lo_y, hi_y = self.y.support()
        lo_z, hi_z = self.z.support()
        lo_r, hi_r = self.ref.support()
        if lo_y + lo_z < lo_r or hi_y + hi_z > hi_r:
            raise NullSpecError(
                f"support of Y + Z [{lo_y + lo_z}, {hi_y + hi_z}] is not "
                f"contained in the reference support [{lo_r}, {hi_r}]")
        if self.ref.discrete and not (self._integer_supported(self.y)
                                      and self._integer_supported(self.z)):
            raise NullSpecError(
                "a discrete reference requires integer-supported components")

    @staticmethod
    def _integer_supported(dist: Distribution) -> bool:
        return bool(dist.discrete)

    @property
    def independent(self) -> bool:
        return self.joint_sampler is None

    def sample_pair(self, gen: np.random.Generator, n: int):
        if self.joint_sampler is not None:
            return self.joint_sampler(gen, n)
        return independent_sampler(self.y, self.z)(gen, n)

    def sample_x(self, gen: np.random.Generator, n: int) -> np.ndarray:
        y, z = self.sample_pair(gen, n)
        return np.asarray(y, dtype=float) + np.asarray(z, dtype=float)

    def config(self) -> dict:
        return {
            "y": self.y.config(),
            "z": self.z.config(),
            "reference": self.ref.config(),
            "dependence": "independent" if self.independent else "joint_sampler",
            "basis": {"kind": self.basis.family.kind,
                      "shape": self.basis.family.shape,
                      "definition": self.basis.definition},
        }


@dataclass
class NullCoefficients:
    """alpha_1..alpha_k, the k x k covariance, and how they were obtained."""

    k: int
    alphas: np.ndarray
    sigma: np.ndarray
    method: str
    min_eigen: float = 0.0
    lambda_trace: np.ndarray = field(default_factory=lambda: np.array([]))
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.alphas.shape != (self.k,) or self.sigma.shape != (self.k, self.k):
            raise ValueError("coefficient shapes do not match k")
        asym = float(np.max(np.abs(self.sigma - self.sigma.T))) if self.k else 0.0
        if asym > 1e-12:
            raise ValueError(f"sigma is not symmetric (max asymmetry {asym:.3e})")
        if self.lambda_trace.size == 0:
            self.lambda_trace = np.array(
                [np.linalg.eigvalsh(self.sigma[:j, :j])[0]
                 for j in range(1, self.k + 1)])
        self.min_eigen = float(self.lambda_trace[-1]) if self.k else 0.0
        if self.min_eigen < -PSD_SLACK:
            raise ValueError(
                f"sigma has eigenvalue {self.min_eigen:.3e} below the "
                f"-{PSD_SLACK:.0e} positive-semidefiniteness slack")
        if self.min_eigen < 0 and "psd-clip" not in " ".join(self.notes):
            self.notes = self.notes + (
                f"psd-clip: eigenvalue {self.min_eigen:.3e} in "
                f"(-{PSD_SLACK:.0e}, 0) treated as zero",)

    def truncated(self, k: int) -> "NullCoefficients":
        """Exact nested sub-object of order k."""
        if not 1 <= k <= self.k:
            raise ValueError(f"truncation order {k} outside [1, {self.k}]")
        return NullCoefficients(
            k=k, alphas=self.alphas[:k].copy(), sigma=self.sigma[:k, :k].copy(),
            method=self.method, lambda_trace=self.lambda_trace[:k].copy(),
            notes=self.notes)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alphas": self.alphas.tolist(),
            "sigma": self.sigma.tolist(),
            "method": self.method,
            "min_eigen": self.min_eigen,
            "lambda_trace": self.lambda_trace.tolist(),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NullCoefficients":
        return cls(k=int(doc["k"]),
                   alphas=np.asarray(doc["alphas"], dtype=float),
                   sigma=np.asarray(doc["sigma"], dtype=float),
                   method=str(doc["method"]),
                   lambda_trace=np.asarray(doc["lambda_trace"], dtype=float),
                   notes=tuple(doc.get("notes", ())))


# ---------------------------------------------------------------------------
# Closed-form assembly
# ---------------------------------------------------------------------------

def _split_pieces_laguerre(dist: Distribution, shape: float, k: int, level: int):
    """One-dimensional expectations of split factors against exp weights.

    Returns (a1, a2): a1[s] = E[L(s, shape, X) e^-X] and
    a2[s, t] = E[L(s, shape, X) L(t, shape, X) e^-2X], in the recurrence
    scale, where the convolution split of the shape-1 family carries unit
    weights.
    """
    x, w = expectation_rule(dist, level)
    table = laguerre_table(k, shape, x)
    a1 = table @ (w * np.exp(-x))
    a2 = np.einsum("sn,tn,n->st", table, table, w * np.exp(-2.0 * x))
    return a1, a2


def _split_pieces_meixner(dist: Distribution, b: float, p: float, k: int, level: int):
    """Analogous split factors against geometric weights.

    a1[s] = E[Ms(s, b, p, X) p**X sqrt(1-p)],
    a2[s, t] = E[Ms(s, b, p, X) Ms(t, b, p, X) p**(2X) (1-p)].
    """
    x, w = expectation_rule(dist, level)
    table = meixner_scaled_table(k, b, p, x)
    a1 = table @ (w * p ** x * sqrt(1.0 - p))
    a2 = np.einsum("sn,tn,n->st", table, table, w * p ** (2.0 * x) * (1.0 - p))
    return a1, a2


def _assemble_convolution(a1, a2, b1, b2, weights, norms, k):
    """Combine split pieces into normalized alphas and sigma.

    ``weights[i][s]`` multiplies the pairing of degree s (from Y) with
    degree i - s (from Z); ``norms`` rescale the raw family to the
    orthonormal one.
    """
    alphas = np.empty(k + 1)
    m2 = np.empty((k + 1, k + 1))
    for i in range(k + 1):
        wi = weights[i]
        alphas[i] = sum(wi[s] * a1[s] * b1[i - s] for s in range(i + 1))
        for j in range(i + 1):
            wj = weights[j]
            acc = 0.0
            for s in range(i + 1):
                row = a2[s]
                acc += wi[s] * sum(wj[t] * row[t] * b2[i - s, j - t]
                                   for t in range(j + 1))
            m2[i, j] = m2[j, i] = acc
    alphas = alphas / norms[: k + 1]
    m2 = m2 / np.outer(norms[: k + 1], norms[: k + 1])
    sigma = m2 - np.outer(alphas, alphas)
    return alphas, sigma


def _closed_form_once(null: NullSpec, k: int, u: float, level: int):
    fam = null.basis.family
    if fam.kind == orthopoly.LAGUERRE:
        v = fam.shape - u
        if not (0 < u < fam.shape):
            raise NullSpecError("split parameter u must lie in (0, shape)")
        a1, a2 = _split_pieces_laguerre(null.y, u, k, level)
        b1, b2 = _split_pieces_laguerre(null.z, v, k, level)
        weights = [np.ones(i + 1) for i in range(k + 1)]
        alphas, sigma = _assemble_convolution(a1, a2, b1, b2, weights,
                                              null.basis.norms, k)
        return alphas, sigma, 0.0
    if fam.kind == orthopoly.MEIXNER:
        p = fam.shape
        v = 1.0 - u
        if not 0 < u < 1:
            raise NullSpecError("split parameter u must lie in (0, 1)")
        a1, a2 = _split_pieces_meixner(null.y, u, p, k, level)
        b1, b2 = _split_pieces_meixner(null.z, v, p, k, level)
        weights = [np.array([comb(i, s) for s in range(i + 1)], dtype=float)
                   for i in range(k + 1)]
        alphas, sigma = _assemble_convolution(a1, a2, b1, b2, weights,
                                              null.basis.norms, k)
        return alphas, sigma, 0.0
    return _legendre_closed_form_once(null, k, level)


def _legendre_closed_form_once(null: NullSpec, k: int, level: int):
    """Moment route: expand Q_i into monomials and use E[Y^s] E[Z^t].

    The monomial coefficients grow like a central binomial in the degree,
    so the assembly cancels catastrophically at higher orders; the returned
    noise floor tracks that roundoff scale and bounds the achievable
    accuracy of this route.
    """
    coefs = null.basis.normalized_monomial_coefficients()[: k + 1]
    y, wy = expectation_rule(null.y, level)
    z, wz = expectation_rule(null.z, level)
    powers = np.arange(2 * k + 1)
    mu_y = (y[None, :] ** powers[:, None]) @ wy
    mu_z = (z[None, :] ** powers[:, None]) @ wz
    abs_mu_y = (np.abs(y)[None, :] ** powers[:, None]) @ np.abs(wy)
    abs_mu_z = (np.abs(z)[None, :] ** powers[:, None]) @ np.abs(wz)
    # G_i[s, t] = monomial coefficient of y^s z^t in Q_i(y + z)
    G = []
    for i in range(k + 1):
        gi = np.zeros((i + 1, i + 1))
        for m, c in enumerate(coefs[i]):
            for s in range(m + 1):
                gi[s, m - s] = c * comb(m, s)
        G.append(gi)
    alphas = np.array([mu_y[: i + 1] @ G[i] @ mu_z[: i + 1]
                       for i in range(k + 1)])
    hank_y = mu_y[np.add.outer(np.arange(k + 1), np.arange(k + 1))]
    hank_z = mu_z[np.add.outer(np.arange(k + 1), np.arange(k + 1))]
    abs_hank_y = abs_mu_y[np.add.outer(np.arange(k + 1), np.arange(k + 1))]
    abs_hank_z = abs_mu_z[np.add.outer(np.arange(k + 1), np.arange(k + 1))]
    sigma = np.empty((k + 1, k + 1))
    magnitude = 0.0
    for i in range(k + 1):
        absgi = np.abs(G[i])
        magnitude = max(magnitude, float(
            abs_mu_y[: i + 1] @ absgi @ abs_mu_z[: i + 1]))
        for j in range(i + 1):
            inner = G[i].T @ hank_y[: i + 1, : j + 1] @ G[j]
            sigma[i, j] = sigma[j, i] = float(
                np.sum(inner * hank_z[: i + 1, : j + 1]))
            rough = np.abs(G[i]).T @ abs_hank_y[: i + 1, : j + 1] @ np.abs(G[j])
            magnitude = max(magnitude, float(
                np.sum(rough * abs_hank_z[: i + 1, : j + 1])))
    sigma -= np.outer(alphas, alphas)
    return alphas, sigma, 64.0 * np.finfo(float).eps * magnitude


def _quadrature_once(null: NullSpec, k: int, level: int):
    y, wy = expectation_rule(null.y, level)
    z, wz = expectation_rule(null.z, level)
    x = y[:, None] + z[None, :]
    w = wy[:, None] * wz[None, :]
    q = null.basis.eval_normalized(x, k)
    m = null.ref.density(x)
    alphas = np.tensordot(q * m, w, axes=([1, 2], [0, 1]))
    m2 = np.einsum("iab,jab,ab->ij", q, q, w * m * m)
    return alphas, m2 - np.outer(alphas, alphas), 0.0


def _deterministic_coefficients(null: NullSpec, k: int, method: str,
                                u_split: float, tol: float):
    prev, delta = None, np.inf
    max_level = 9 if method == CLOSED_FORM else 5
    for level in range(max_level + 1):
        if method == CLOSED_FORM:
            alphas, sigma, floor = _closed_form_once(null, k, u_split, level)
        else:
            alphas, sigma, floor = _quadrature_once(null, k, level)
        if prev is not None:
            delta = max(np.max(np.abs(alphas - prev[0])),
                        np.max(np.abs(sigma - prev[1])))
            if delta <= max(tol, floor):
                return alphas, sigma
        prev = (alphas, sigma)
    raise QuadratureError(float(alphas[1]) if k else 0.0, float(delta),
                          detail=f"{method} coefficients, k={k}")


def _monte_carlo_coefficients(null: NullSpec, k: int, draws: int,
                              stream: RngStream):
    gen = stream.generator()
    x = null.sample_x(gen, draws)
    q = null.basis.eval_normalized(x, k)
    v = q[1:] * null.ref.density(x)
    alphas = v.mean(axis=1)
    sigma = np.cov(v, ddof=1)
    return alphas, np.atleast_2d(sigma)


def compute_coefficients(null: NullSpec, k: int, method: str | None = None,
                         u_split: float = 0.5, tol: float = DEFAULT_COEFF_TOL,
                         mc_draws: int = DEFAULT_MC_DRAWS,
                         mc_stream: RngStream = DEFAULT_MC_STREAM,
                         ) -> NullCoefficients:
    """Compute alpha_1..alpha_k and sigma under the null.

    ``method`` is one of ``closed_form``, ``quadrature``, ``monte_carlo``;
    by default the closed form is used for independent pairs and Monte
    Carlo for dependent ones.
    """
    if k < 1:
        raise ValueError("order k must be at least 1")
    if k > null.basis.family.max_degree:
        raise ValueError(
            f"order {k} exceeds the basis degree {null.basis.family.max_degree}")
    if method is None:
        method = CLOSED_FORM if null.independent else MONTE_CARLO
    if method not in (CLOSED_FORM, QUADRATURE, MONTE_CARLO):
        raise ValueError(f"unknown coefficient method {method!r}")
    if not null.independent and method != MONTE_CARLO:
        raise NullSpecError(
            "dependent component pairs only support the monte_carlo method")
    notes: tuple[str, ...] = ()
    if method == MONTE_CARLO:
        full_a, full_s = _monte_carlo_coefficients(null, k, mc_draws, mc_stream)
        notes = (f"monte-carlo draws={mc_draws} "
                 f"stream=({mc_stream.master_seed},{mc_stream.stream_index})",)
        alphas, sigma = full_a, full_s
    else:
        full_a, full_s = _deterministic_coefficients(null, k, method, u_split, tol)
        # deterministic paths carry the degree-0 row; drop it
        alphas, sigma = full_a[1:], full_s[1:, 1:]
    if null.basis.definition == "standard":
        notes = notes + ("basis: standard Meixner definition substituted for "
                         "the seeded recurrence",)
    note = _alpha_growth_note(np.asarray(alphas[:k]))
    if note:
        notes = notes + (note,)
    return NullCoefficients(k=k, alphas=np.asarray(alphas[:k]),
                            sigma=np.asarray(sigma[:k, :k]),
                            method=method, notes=notes)


def _alpha_growth_note(alphas: np.ndarray) -> str | None:
    """Flag non-decaying expansion coefficients.

    The expansion of the observable's density is only valid when that
    density is square integrable against the reference measure; growing
    tail coefficients are the observable symptom, so they are surfaced
    instead of silently assumed away.
    """
    if alphas.size < 6:
        return None
    head = np.max(np.abs(alphas[: alphas.size // 2]))
    tail = np.max(np.abs(alphas[-(alphas.size // 3):]))
    if tail > max(head, 1e-12) * 1.5:
        return (f"alpha-growth: tail coefficient magnitude {tail:.3e} exceeds "
                f"head {head:.3e}; the density may not be square integrable "
                "against the reference measure")
    return None


def compute_alphas(null: NullSpec, k: int, method: str | None = None,
                   **kwargs) -> np.ndarray:
    """Null expansion coefficients alpha_1..alpha_k."""
    return compute_coefficients(null, k, method, **kwargs).alphas


def compute_sigma(null: NullSpec, k: int, method: str | None = None,
                  **kwargs) -> np.ndarray:
    """Null covariance matrix of the centered empirical coefficients."""
    return compute_coefficients(null, k, method, **kwargs).sigma


# ---------------------------------------------------------------------------
# Eigenvalue diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenDiagnostics:
    """Spectral health of the nested covariance blocks."""

    lambda_mins: np.ndarray
    lambda_maxs: np.ndarray
    condition_numbers: np.ndarray
    usable_k_max: int
    condition_cap: float

    def to_dict(self) -> dict:
        return {
            "lambda_mins": self.lambda_mins.tolist(),
            "lambda_maxs": self.lambda_maxs.tolist(),
            "condition_numbers": self.condition_numbers.tolist(),
            "usable_k_max": self.usable_k_max,
            "condition_cap": self.condition_cap,
        }


def eigen_floor_diagnostics(coeffs: NullCoefficients,
                            condition_cap: float = 1e12) -> EigenDiagnostics:
    """Per-order smallest eigenvalues, condition numbers, and the usable cap.

    The usable cap is the largest order whose nested covariance block stays
    below the condition cap; orders beyond it would whiten against noise.
    """
    lam_min = np.empty(coeffs.k)
    lam_max = np.empty(coeffs.k)
    for j in range(1, coeffs.k + 1):
        eig = np.linalg.eigvalsh(coeffs.sigma[:j, :j])
        lam_min[j - 1], lam_max[j - 1] = eig[0], eig[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam_min > 0, lam_max / np.maximum(lam_min, 1e-300), inf)
    usable = 0
    for j in range(coeffs.k):
        if cond[j] <= condition_cap:
            usable = j + 1
        else:
            break
    return EigenDiagnostics(lambda_mins=lam_min, lambda_maxs=lam_max,
                            condition_numbers=cond, usable_k_max=usable,
                            condition_cap=condition_cap)
