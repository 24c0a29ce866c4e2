"""Mixture kernels of coupled even p-spin models.

A mixture assigns to every even degree p >= 2 a vector of inverse
temperatures, one entry per coupled copy.  From it we build the covariance
kernel

    xi_{j,j'}(x) = sum_p beta_p(j) beta_p(j') x^p,

its entrywise derivative xi', the companion theta(A) = A . xi'(A) - xi(A)
(Hadamard product), and the increment matrices Delta_k = xi'(Q_k) -
xi'(Q_{k-1}) along a monotone matrix path.  Every Delta_k is positive
semidefinite because Hadamard powers of PSD-ordered matrices stay ordered
(Schur product theorem); deviations beyond floating-point noise indicate an
invalid path or mixture and are reported, not silently clamped.

All functions are pure and operate on immutable inputs; they are safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "MixtureSpec",
    "xi_scalar",
    "xi_matrix",
    "xi_prime_matrix",
    "theta_matrix",
    "delta_increments",
    "PSD_TOLERANCE",
]

# Relative noise floor for "PSD up to rounding" checks on increment matrices.
PSD_TOLERANCE = 1e-10

# Representability guards: with p <= 64 and |beta| <= 8 every monomial stays
# comfortably inside float64 range for |x| <= 2.
MAX_DEGREE = 64
MAX_BETA = 8.0


def int_power(x, p: int):
    """x**p for integer p >= 0 by repeated squaring (works on arrays)."""
    if p < 0:
        raise ValueError("negative power")
    result = np.ones_like(np.asarray(x, dtype=float))
    base = np.asarray(x, dtype=float).copy()
    k = p
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError(f"{name} must be exactly symmetric")
    return a


@dataclass(frozen=True)
class MixtureSpec:
    """Inverse-temperature vectors beta_p, one per even degree p.

    ``terms`` maps even p >= 2 to a length-n float vector.  Odd degrees are
    rejected at construction: the convexity of xi on [-1, 1], which the whole
    variational formula rests on, requires an even mixture.
    """

    n: int
    terms: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        clean: dict[int, np.ndarray] = {}
        for p, beta in self.terms.items():
            p = int(p)
            if p < 2 or p % 2 != 0:
                raise ValueError(f"mixture degree {p} is not an even integer >= 2")
            if p > MAX_DEGREE:
                raise ValueError(f"mixture degree {p} exceeds supported maximum {MAX_DEGREE}")
            vec = np.asarray(beta, dtype=float)
            if vec.shape != (self.n,):
                raise ValueError(
                    f"beta_{p} must have length n={self.n}, got shape {vec.shape}"
                )
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"beta_{p} has non-finite entries")
            if np.any(np.abs(vec) > MAX_BETA):
                raise ValueError(f"|beta_{p}| exceeds supported maximum {MAX_BETA}")
            vec = vec.copy()
            vec.setflags(write=False)
            clean[p] = vec
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(self.terms.keys())

    def is_zero(self) -> bool:
        return all(not np.any(v) for v in self.terms.values())

    @classmethod
    def zero(cls, n: int) -> "MixtureSpec":
        return cls(n=n, terms={})

    @classmethod
    def from_json_terms(cls, n: int, terms: Mapping[str, list]) -> "MixtureSpec":
        """Build from the CLI wire format {"2": [...], "4": [...]}."""
        parsed = {}
        for key, beta in terms.items():
            try:
                p = int(key)
            except (TypeError, ValueError):
                raise ValueError(f"mixture degree {key!r} is not an integer") from None
            parsed[p] = beta
        return cls(n=n, terms=parsed)

    def json_terms(self) -> dict[str, list]:
        return {str(p): list(map(float, v)) for p, v in self.terms.items()}


def _check_index(spec: MixtureSpec, j: int, name: str) -> None:
    if not 1 <= j <= spec.n:
        raise IndexError(f"{name}={j} out of range 1..{spec.n}")


def xi_scalar(spec: MixtureSpec, j: int, j2: int, x: float) -> float:
    """sum_p beta_p(j) beta_p(j') x^p.  Indices are 1-based like the copies."""
    _check_index(spec, j, "j")
    _check_index(spec, j2, "j2")
    if abs(x) > 2.0:
        raise ValueError(f"|x|={abs(x)} outside supported range [0, 2]")
    total = 0.0
    for p, beta in spec.terms.items():
        total += beta[j - 1] * beta[j2 - 1] * int_power(x, p)
    return float(total)


def _entrywise(spec: MixtureSpec, a: np.ndarray, weight) -> np.ndarray:
    """sum_p weight(p) * (beta_p outer beta_p) . a^{o p-ish}; helper core."""
    a = check_symmetric(a, "A")
    if a.shape != (spec.n, spec.n):
        raise ValueError(f"A has shape {a.shape}, expected ({spec.n}, {spec.n})")
    out = np.zeros_like(a)
    for p, beta in spec.terms.items():
        coeff, power = weight(p)
        out += coeff * np.outer(beta, beta) * int_power(a, power)
    # exact symmetry: inputs symmetric and the update is entrywise symmetric
    return out


def xi_matrix(spec: MixtureSpec, a: np.ndarray) -> np.ndarray:
    """Entrywise xi: (xi(A))_{j,j'} = xi_{j,j'}(A_{j,j'})."""
    return _entrywise(spec, a, lambda p: (1.0, p))


def xi_prime_matrix(spec: MixtureSpec, a: np.ndarray) -> np.ndarray:
    """Entrywise derivative: xi'_{j,j'}(x) = sum_p p beta_p(j) beta_p(j') x^{p-1}."""
    return _entrywise(spec, a, lambda p: (float(p), p - 1))


def theta_matrix(spec: MixtureSpec, a: np.ndarray) -> np.ndarray:
    """theta(A) = A . xi'(A) - xi(A), Hadamard product entrywise.

    Equivalently sum_p (p-1) beta_p(j) beta_p(j') x^p entrywise; computed via
    the defining combination so tests can cross-check the two forms.
    """
    a = check_symmetric(a, "A")
    return a * xi_prime_matrix(spec, a) - xi_matrix(spec, a)


def smallest_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


def delta_increments(spec: MixtureSpec, path) -> list[np.ndarray]:
    """Increment matrices Delta_k = xi'(Q_k) - xi'(Q_{k-1}), k = 1..r.

    Each increment must be PSD up to the rounding floor; a violation reports
    the level index (1-based) and the offending eigenvalue.
    """
    qs = path.qs
    deltas = []
    for k in range(1, qs.shape[0]):
        d = xi_prime_matrix(spec, qs[k]) - xi_prime_matrix(spec, qs[k - 1])
        eigs = np.linalg.eigvalsh(d)
        # noise floor relative to the increment scale, with an absolute floor
        # because rounding in xi' is set by the chain scale, not the increment
        tol = PSD_TOLERANCE * max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 0.0)
        if eigs.size and eigs[0] < -tol:
            raise ValueError(
                f"increment {k} is not PSD: smallest eigenvalue {eigs[0]:.3e} "
                f"(tolerance {-tol:.1e}); invalid path or mixture"
            )
        d.setflags(write=False)
        deltas.append(d)
    return deltas
