"""Orthogonal polynomial families and their convolution splits.

Three families are supported, each orthogonal with respect to a probability
measure used as the reference weight of the fit test:

* generalized Laguerre ``L(n, shape)`` -- Gamma(shape, 1) weight on (0, inf),
* shifted Legendre -- uniform weight on [0, 1],
* Meixner ``M(n, p)`` -- geometric weight ``p**x * (1 - p)`` on {0, 1, ...}.

Norms are always established numerically at table construction and the
resulting orthonormal system is certified against its Gram matrix; printed
closed-form norm constants are never trusted.  For each of the Laguerre and
Meixner families there is a second, rescaled evaluation in which the
polynomial of a sum ``y + z`` splits exactly into binomial-weighted products
of lower-degree polynomials of ``y`` and ``z``; those splits are what make
closed-form convolution coefficients possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, lgamma

import numpy as np
from scipy.special import roots_genlaguerre, roots_legendre

HARD_DEGREE_CAP = 30
GRAM_TOL = 1e-8

LAGUERRE = "laguerre"
SHIFTED_LEGENDRE = "shifted_legendre"
MEIXNER = "meixner"

_KINDS = (LAGUERRE, SHIFTED_LEGENDRE, MEIXNER)


class DegreeOverflowError(ValueError):
    """Requested degree exceeds the table or the hard recurrence cap."""


class DomainError(ValueError):
    """Argument or parameter outside the valid domain of a family."""


class BasisInconsistencyError(RuntimeError):
    """Orthonormality certification failed; carries the worst entry."""

    def __init__(self, kind: str, pair: tuple[int, int], residual: float):
        self.kind = kind
        self.pair = pair
        self.residual = residual
        super().__init__(
            f"{kind} basis failed orthonormality certification at entry "
            f"{pair}: |Gram - I| = {residual:.3e} (tolerance {GRAM_TOL:.0e})"
        )


@dataclass(frozen=True)
class PolynomialFamilySpec:
    """Which family to build, its shape parameter, and the degree cap.

    ``shape`` is the Gamma shape for Laguerre, the geometric parameter
    ``p`` for Meixner, and is ignored for shifted Legendre.
    """

    kind: str
    shape: float = 1.0
    max_degree: int = 16

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown polynomial family {self.kind!r}")
        if not 0 <= self.max_degree <= HARD_DEGREE_CAP:
            raise DegreeOverflowError(
                f"max_degree {self.max_degree} outside [0, {HARD_DEGREE_CAP}]"
            )
        if self.kind == LAGUERRE and not self.shape > 0:
            raise DomainError("Laguerre shape must be positive")
        if self.kind == MEIXNER and not 0 < self.shape < 1:
            raise DomainError("Meixner parameter p must lie in (0, 1)")


def _check_degree(degree: int, cap: int = HARD_DEGREE_CAP):
    if degree < 0:
        raise DomainError(f"degree must be nonnegative, got {degree}")
    if degree > cap:
        raise DegreeOverflowError(f"degree {degree} exceeds cap {cap}")


# ---------------------------------------------------------------------------
# Raw evaluations (three-term recurrences)
# ---------------------------------------------------------------------------

def laguerre_table(max_degree: int, shape: float, x) -> np.ndarray:
    """All generalized Laguerre values L(0..max_degree, shape) at x.

    Recurrence: L0 = 1, L1 = shape - x,
    (i+1) L_{i+1} = (2i + shape - x) L_i - (i + shape - 1) L_{i-1}.
    Returns an array of shape ``(max_degree + 1,) + x.shape``.
    """
    _check_degree(max_degree)
    if not shape > 0:
        raise DomainError("Laguerre shape must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = shape - x
    for i in range(1, max_degree):
        out[i + 1] = ((2 * i + shape - x) * out[i]
                      - (i + shape - 1) * out[i - 1]) / (i + 1)
    return out


def eval_laguerre(degree: int, shape: float, x) -> float | np.ndarray:
    """Generalized Laguerre polynomial value at x (recurrence scale)."""
    _check_degree(degree)
    vals = laguerre_table(degree, shape, x)[degree]
    return float(vals) if vals.ndim == 0 else vals


def laguerre_scaled_table(max_degree: int, shape: float, x) -> np.ndarray:
    """Laguerre values in the convolution scale ``n! * shape**-n * L_n``.

    This is the scale in which ``addition_split_laguerre`` weights apply.
    """
    out = laguerre_table(max_degree, shape, x)
    fac = 1.0
    for n in range(1, max_degree + 1):
        fac *= n / shape
        out[n] *= fac
    return out


def eval_laguerre_scaled(degree: int, shape: float, x) -> float | np.ndarray:
    """Convolution-scale Laguerre value at x."""
    _check_degree(degree)
    vals = laguerre_scaled_table(degree, shape, x)[degree]
    return float(vals) if vals.ndim == 0 else vals


def shifted_legendre_table(max_degree: int, x) -> np.ndarray:
    """Shifted Legendre values P(0..max_degree) on [0, 1].

    Defined as the ordinary Legendre polynomials at ``2x - 1``; this is the
    family with P0 = 1, P1 = 2x - 1 and squared norm 1/(2n + 1) under the
    uniform weight.
    """
    _check_degree(max_degree)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("shifted Legendre argument must lie in [0, 1]")
    t = 2.0 * x - 1.0
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = t
    for n in range(1, max_degree):
        out[n + 1] = ((2 * n + 1) * t * out[n] - n * out[n - 1]) / (n + 1)
    return out


def eval_shifted_legendre(degree: int, x) -> float | np.ndarray:
    """Shifted Legendre polynomial value at x in [0, 1]."""
    _check_degree(degree)
    vals = shifted_legendre_table(degree, x)[degree]
    return float(vals) if vals.ndim == 0 else vals


def shifted_legendre_coefficients(max_degree: int) -> list[np.ndarray]:
    """Monomial coefficients (ascending powers) of each shifted Legendre P_n."""
    _check_degree(max_degree)
    coefs = [np.array([1.0])]
    if max_degree >= 1:
        coefs.append(np.array([-1.0, 2.0]))
    for n in range(1, max_degree):
        prev, cur = coefs[n - 1], coefs[n]
        # multiply cur by (2x - 1), then combine per the recurrence
        shifted = np.zeros(n + 2)
        shifted[1:] = 2.0 * cur
        shifted[:-1] -= cur
        nxt = (2 * n + 1) * shifted
        nxt[: n] -= n * prev
        coefs.append(nxt / (n + 1))
    return coefs


def _meixner_seeded_table(max_degree: int, p: float, x) -> np.ndarray:
    """Meixner values from the b = 1 recurrence seeded with M1 = 1 - p - x/p."""
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = 1.0 - p - x / p
    for n in range(1, max_degree):
        out[n + 1] = (((p - 1) * x + (1 + p) * n + p) * out[n]
                      - (1 - p) * n * n * out[n - 1]) * (1 - p) / p
    return out


def meixner_scaled_table(max_degree: int, b: float, p: float, x) -> np.ndarray:
    """Meixner values in the convolution scale ``(b)_n (1-p)**n M(n; b, p)``.

    ``M(n; b, p)`` is the hypergeometric Meixner polynomial
    2F1(-n, -x; b; 1 - 1/p).  In this scale the same three-term recurrence
    holds for every positive ``b`` and the polynomial of a sum splits with
    plain binomial weights (see ``addition_split_meixner``).
    """
    _check_degree(max_degree)
    if not 0 < p < 1:
        raise DomainError("Meixner parameter p must lie in (0, 1)")
    if not b > 0:
        raise DomainError("Meixner order parameter b must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = b * (1 - p) - x * (1 - p) ** 2 / p
    for n in range(1, max_degree):
        out[n + 1] = (((p - 1) * x + n + (n + b) * p) * out[n]
                      - (1 - p) * n * (b + n - 1) * out[n - 1]) * (1 - p) / p
    return out


def eval_meixner(degree: int, p: float, x) -> float | np.ndarray:
    """Meixner value from the b = 1 recurrence seeded with M1 = 1 - p - x/p.

    Note: this degree-1 seed is not orthogonal to constants under the
    geometric weight, so certified tables substitute the standard
    hypergeometric family (see ``certify_orthonormality``).  This function
    keeps the seeded definition available.
    """
    _check_degree(degree)
    if not 0 < p < 1:
        raise DomainError("Meixner parameter p must lie in (0, 1)")
    vals = _meixner_seeded_table(degree, p, x)[degree]
    return float(vals) if vals.ndim == 0 else vals


def eval_meixner_scaled(degree: int, b: float, p: float, x) -> float | np.ndarray:
    """Convolution-scale Meixner value at x."""
    _check_degree(degree)
    vals = meixner_scaled_table(degree, b, p, x)[degree]
    return float(vals) if vals.ndim == 0 else vals


# ---------------------------------------------------------------------------
# Addition splits
# ---------------------------------------------------------------------------

def addition_split_laguerre(n: int, u: float, v: float) -> list[tuple[int, float]]:
    """Split weights for a convolution-scale Laguerre polynomial of a sum.

    Returns terms ``(s, w_s)`` such that, writing ``Ls(n, a, x)`` for
    ``eval_laguerre_scaled``,

        Ls(n, u + v, y + z) = sum_s w_s * Ls(s, u, y) * Ls(n - s, v, z)

    with ``w_s = C(n, s) * u**s * v**(n-s) / (u + v)**n``.  The divisor is 1
    in the default use ``u + v = 1``.
    """
    _check_degree(n)
    if not (u > 0 and v > 0):
        raise DomainError("split parameters u, v must be positive")
    a = u + v
    return [(s, comb(n, s) * u ** s * v ** (n - s) / a ** n) for s in range(n + 1)]


def addition_split_meixner(n: int, u: float, v: float, p: float) -> list[tuple[int, float]]:
    """Split weights for a convolution-scale Meixner polynomial of a sum.

    Returns terms ``(s, C(n, s))`` such that, writing ``Ms(n, b, p, x)`` for
    ``eval_meixner_scaled``,

        Ms(n, u + v, p, y + z) = sum_s C(n, s) * Ms(s, u, p, y) * Ms(n - s, v, p, z)

    for any positive u, v (the usual case is u + v = 1).
    """
    _check_degree(n)
    if not (u > 0 and v > 0):
        raise DomainError("split parameters u, v must be positive")
    if not 0 < p < 1:
        raise DomainError("Meixner parameter p must lie in (0, 1)")
    return [(s, float(comb(n, s))) for s in range(n + 1)]


def _validate_splits(table: "BasisTable", n_max: int = 5) -> None:
    """Spot-check the addition identities for a freshly built table."""
    spec = table.family
    rng = np.random.default_rng(13)
    u = v = 0.5
    for n in range(min(n_max, spec.max_degree) + 1):
        if spec.kind == LAGUERRE:
            y = rng.uniform(0.0, 8.0, 4)
            z = rng.uniform(0.0, 8.0, 4)
            lhs = eval_laguerre_scaled(n, u + v, y + z)
            rhs = sum(w * eval_laguerre_scaled(s, u, y) * eval_laguerre_scaled(n - s, v, z)
                      for s, w in addition_split_laguerre(n, u, v))
        elif spec.kind == MEIXNER:
            y = rng.integers(0, 12, 4).astype(float)
            z = rng.integers(0, 12, 4).astype(float)
            p = spec.shape
            lhs = eval_meixner_scaled(n, u + v, p, y + z)
            rhs = sum(w * eval_meixner_scaled(s, u, p, y) * eval_meixner_scaled(n - s, v, p, z)
                      for s, w in addition_split_meixner(n, u, v, p))
        else:
            return
        err = np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs)))
        if err > 1e-8:
            raise BasisInconsistencyError(spec.kind, (n, n), float(err))


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _gamma_weight_rule(shape: float, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights integrating polynomials against the Gamma(shape, 1) law.

    Generalized Gauss-Laguerre with the weights renormalized by Gamma(shape),
    exact for polynomial degree <= 2 * n_nodes - 1.
    """
    nodes, weights = roots_genlaguerre(n_nodes, shape - 1.0)
    return nodes, weights / exp(lgamma(shape))

def _uniform01_rule(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n_nodes)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _geometric_support(p: float, max_degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Support points and geometric masses summed until the Gram tail is dust.

    The summand for the Gram matrix grows at most like x**(2*max_degree)
    against the p**x tail; extend until the running term falls below 1e-18
    of the accumulated mass for fifty consecutive points.
    """
    pts, quiet, x = [], 0, 0
    total = 0.0
    while quiet < 50 and x < 200_000:
        mass = (1 - p) * p ** x
        bound = mass * (x + 1.0) ** (2 * max_degree)
        pts.append(x)
        total += mass
        quiet = quiet + 1 if bound < 1e-18 * max(total, 1.0) else 0
        x += 1
    xs = np.arange(len(pts), dtype=float)
    return xs, (1 - p) * p ** xs


def _raw_values_and_weights(spec: PolynomialFamilySpec, definition: str):
    n_nodes = 2 * spec.max_degree + 2
    if spec.kind == LAGUERRE:
        x, w = _gamma_weight_rule(spec.shape, n_nodes)
        return laguerre_table(spec.max_degree, spec.shape, x), w
    if spec.kind == SHIFTED_LEGENDRE:
        x, w = _uniform01_rule(n_nodes)
        return shifted_legendre_table(spec.max_degree, x), w
    x, w = _geometric_support(spec.shape, spec.max_degree)
    if definition == "seeded-recurrence":
        return _meixner_seeded_table(spec.max_degree, spec.shape, x), w
    return meixner_scaled_table(spec.max_degree, 1.0, spec.shape, x), w


@dataclass
class BasisTable:
    """Certified orthonormal polynomial system for one family.

    ``norms`` are the numerically computed L2 norms of the raw family under
    its weight; normalized evaluations divide by them.  ``definition``
    records which evaluation rule survived certification.
    """

    family: PolynomialFamilySpec
    norms: np.ndarray
    gram_residual: float
    definition: str
    notes: tuple[str, ...] = ()
    orthonormal: bool = True

    def eval_raw(self, x, max_degree: int | None = None) -> np.ndarray:
        k = self.family.max_degree if max_degree is None else max_degree
        if k > self.family.max_degree:
            raise DegreeOverflowError(
                f"degree {k} exceeds table max {self.family.max_degree}")
        if self.family.kind == LAGUERRE:
            return laguerre_table(k, self.family.shape, x)
        if self.family.kind == SHIFTED_LEGENDRE:
            return shifted_legendre_table(k, x)
        if self.definition == "seeded-recurrence":
            return _meixner_seeded_table(k, self.family.shape, x)
        return meixner_scaled_table(k, 1.0, self.family.shape, x)

    def eval_normalized(self, x, max_degree: int | None = None) -> np.ndarray:
        """Orthonormal values Q(0..k) at x, shape ``(k + 1,) + x.shape``."""
        raw = self.eval_raw(x, max_degree)
        scale = self.norms[: raw.shape[0]]
        return raw / scale.reshape((raw.shape[0],) + (1,) * (raw.ndim - 1))

    def normalized_monomial_coefficients(self) -> list[np.ndarray]:
        """Ascending monomial coefficients of each orthonormal polynomial."""
        if self.family.kind != SHIFTED_LEGENDRE:
            raise DomainError(
                "monomial coefficients are only maintained for the "
                "shifted Legendre family")
        raw = shifted_legendre_coefficients(self.family.max_degree)
        return [c / self.norms[n] for n, c in enumerate(raw)]


def _gram(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.einsum("in,jn,n->ij", values, values, weights)


def certify_orthonormality(family: PolynomialFamilySpec) -> BasisTable:
    """Numerically certify a family and return its orthonormal table.

    Norms come from quadrature (continuous weights) or truncated summation
    (geometric weight).  The Gram matrix of the normalized system must match
    the identity within 1e-8; for the Meixner family the seeded recurrence
    is tried first and the standard hypergeometric definition is
    substituted (and recorded) if certification fails.
    """
    definitions = ["recurrence"]
    if family.kind == MEIXNER:
        definitions = ["seeded-recurrence", "standard"]
    notes: list[str] = []
    last_err: BasisInconsistencyError | None = None
    for definition in definitions:
        values, weights = _raw_values_and_weights(family, definition)
        norms_sq = np.einsum("in,n->i", values ** 2, weights)
        if np.any(norms_sq <= 0):
            bad = int(np.argmin(norms_sq))
            last_err = BasisInconsistencyError(family.kind, (bad, bad),
                                               float(norms_sq[bad]))
            notes.append(f"{definition}: nonpositive norm at degree {bad}")
            continue
        norms = np.sqrt(norms_sq)
        gram = _gram(values / norms[:, None], weights)
        resid = np.abs(gram - np.eye(len(norms)))
        i, j = np.unravel_index(np.argmax(resid), resid.shape)
        worst = float(resid[i, j])
        if worst < GRAM_TOL:
            table = BasisTable(family=family, norms=norms,
                               gram_residual=worst, definition=definition,
                               notes=tuple(notes))
            _validate_splits(table)
            return table
        notes.append(f"{definition}: |Gram - I| = {worst:.3e} at ({i}, {j})")
        last_err = BasisInconsistencyError(family.kind, (int(i), int(j)), worst)
    raise last_err
