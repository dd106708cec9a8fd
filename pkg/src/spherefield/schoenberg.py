"""Operator-valued Schoenberg sequences and the kernels they induce.

A d-Schoenberg sequence is a family ``{b_l}`` of positive semi-definite
trace-class operators expanding an isotropic kernel on S^d,

    R(x, y) = sum_l b_l C_l^lam(x . y),        lam = (d - 1) / 2.

Three operator variants are supported:

* ``scalar``            -- a nonnegative real (H = R),
* ``matrix``            -- a p x p symmetric PSD matrix (H = R^p),
* ``fourier_diagonal``  -- a diagonal operator on the truncated real Fourier
  space of L^2([0,1]).  Entry ``k`` of the stored vector carries the shared
  eigenvalue of the +/-k modes, so it has multiplicity 1 for k = 0 and 2 for
  k >= 1; traces and Hilbert-Schmidt sums weight entries accordingly.

Strict positivity (needed for inverse square roots and the equivalence
criterion) is a stronger gate than PSD validity (enough for sampling);
:func:`validate_sequence` reports both.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .harmonics import (
    gegenbauer_all,
    gegenbauer_at_one_all,
    gegenbauer_order,
    h_dim,
    surface_measure,
)

SCALAR = "scalar"
MATRIX = "matrix"
FOURIER_DIAGONAL = "fourier_diagonal"

# Double-precision eigensolvers produce O(eps * trace) negative dust on PSD
# input; eigenvalues above -PSD_RTOL * trace count as nonnegative, and
# strict positivity requires eigenvalues above +STRICT_RTOL * trace.
PSD_RTOL = 1e-12
STRICT_RTOL = 1e-12

_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class SchoenbergOperator:
    """One coefficient of a Schoenberg sequence (see module docstring)."""

    kind: str
    data: np.ndarray

    @classmethod
    def scalar(cls, value: float) -> "SchoenbergOperator":
        value = float(value)
        if not math.isfinite(value) or value < 0.0:
            raise ValueError(f"scalar coefficient must be finite and >= 0, got {value}")
        return cls(SCALAR, _frozen(np.asarray(value, dtype=float)))

    @classmethod
    def matrix(cls, mat) -> "SchoenbergOperator":
        m = np.asarray(mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix coefficient must be square, got shape {m.shape}")
        scale = np.linalg.norm(m)
        if scale > 0 and np.linalg.norm(m - m.T) > _SYM_RTOL * scale:
            raise ValueError("matrix coefficient must be symmetric within 1e-12")
        m = 0.5 * (m + m.T)
        tr = float(np.trace(m))
        w = np.linalg.eigvalsh(m)
        if w[0] < -PSD_RTOL * max(tr, 0.0) - 0.0:
            raise ValueError(
                f"matrix coefficient must be PSD: min eigenvalue {w[0]:.3e} "
                f"below -{PSD_RTOL:g} * trace ({tr:.3e})")
        return cls(MATRIX, _frozen(m))

    @classmethod
    def fourier_diagonal(cls, gammas) -> "SchoenbergOperator":
        g = np.asarray(gammas, dtype=float)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("fourier_diagonal coefficient must be a nonempty vector")
        if not np.all(np.isfinite(g)) or np.any(g < 0.0):
            raise ValueError("fourier_diagonal entries must be finite and >= 0")
        return cls(FOURIER_DIAGONAL, _frozen(g))

    @property
    def dim(self) -> int:
        """Operator side: p for matrices, K_max + 1 folded entries, 1 for scalars."""
        if self.kind == SCALAR:
            return 1
        return self.data.shape[0]

    def multiplicities(self) -> np.ndarray:
        """Fold multiplicities (1, 2, 2, ...) for the fourier variant."""
        if self.kind != FOURIER_DIAGONAL:
            raise ValueError("multiplicities are defined for fourier_diagonal only")
        mult = np.full(self.data.shape[0], 2.0)
        mult[0] = 1.0
        return mult

    def trace(self) -> float:
        if self.kind == SCALAR:
            return float(self.data)
        if self.kind == MATRIX:
            return float(np.trace(self.data))
        return float(np.dot(self.multiplicities(), self.data))

    def min_eigenvalue(self) -> float:
        if self.kind == SCALAR:
            return float(self.data)
        if self.kind == MATRIX:
            return float(np.linalg.eigvalsh(self.data)[0])
        return float(np.min(self.data))

    def is_strictly_positive(self, rtol: float = STRICT_RTOL) -> bool:
        return self.min_eigenvalue() > rtol * self.trace()

    def scaled(self, c: float) -> "SchoenbergOperator":
        if c < 0:
            raise ValueError("scale factor must be >= 0")
        return SchoenbergOperator(self.kind, _frozen(self.data * c))

    def quadratic_form(self, u) -> float:
        """``<b u, u>`` for a coefficient-space direction ``u``.

        For the fourier variant ``u`` is folded (length K_max + 1) and the
        form carries the fold multiplicities.
        """
        u = np.asarray(u, dtype=float)
        if self.kind == SCALAR:
            if u.shape not in ((), (1,)):
                raise ValueError("scalar variant expects a length-1 direction")
            return float(self.data) * float(np.sum(u ** 2))
        if u.shape != (self.dim,):
            raise ValueError(f"direction must have length {self.dim}, got {u.shape}")
        if self.kind == MATRIX:
            return float(u @ self.data @ u)
        return float(np.dot(self.multiplicities() * self.data, u ** 2))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def operator_sqrt(op: SchoenbergOperator) -> SchoenbergOperator:
    """PSD square root; negative eigenvalue dust is clamped to zero."""
    if op.kind == SCALAR:
        return SchoenbergOperator(SCALAR, _frozen(np.asarray(math.sqrt(max(float(op.data), 0.0)))))
    if op.kind == FOURIER_DIAGONAL:
        return SchoenbergOperator(FOURIER_DIAGONAL, _frozen(np.sqrt(np.clip(op.data, 0.0, None))))
    w, v = np.linalg.eigh(op.data)
    w = np.clip(w, 0.0, None)
    return SchoenbergOperator(MATRIX, _frozen((v * np.sqrt(w)) @ v.T))


def operator_inv_sqrt(op: SchoenbergOperator, rtol: float = STRICT_RTOL) -> SchoenbergOperator:
    """Inverse square root ``b^{-1/2}`` of a strictly positive coefficient.

    Near-singular input (minimum eigenvalue <= rtol * trace) is rejected with
    conditioning diagnostics in the error message.
    """
    tr = op.trace()
    wmin = op.min_eigenvalue()
    if wmin <= rtol * tr or tr <= 0.0:
        cond = tr / wmin if wmin > 0 else math.inf
        raise ValueError(
            f"coefficient is not strictly positive: min eigenvalue {wmin:.6e}, "
            f"trace {tr:.6e}, trace/min ratio {cond:.3e} (threshold rtol={rtol:g})")
    if op.kind == SCALAR:
        return SchoenbergOperator(SCALAR, _frozen(np.asarray(1.0 / math.sqrt(float(op.data)))))
    if op.kind == FOURIER_DIAGONAL:
        return SchoenbergOperator(FOURIER_DIAGONAL, _frozen(1.0 / np.sqrt(op.data)))
    w, v = np.linalg.eigh(op.data)
    return SchoenbergOperator(MATRIX, _frozen((v / np.sqrt(w)) @ v.T))


def conjugate(b: SchoenbergOperator, s: SchoenbergOperator) -> SchoenbergOperator:
    """``s b s`` for operators of the same variant (s symmetric)."""
    if b.kind != s.kind or b.dim != s.dim:
        raise ValueError("conjugation requires operators of identical variant and size")
    if b.kind == SCALAR:
        return SchoenbergOperator(SCALAR, _frozen(np.asarray(float(s.data) ** 2 * float(b.data))))
    if b.kind == FOURIER_DIAGONAL:
        return SchoenbergOperator(FOURIER_DIAGONAL, _frozen(s.data ** 2 * b.data))
    m = s.data @ b.data @ s.data
    return SchoenbergOperator(MATRIX, _frozen(0.5 * (m + m.T)))


def hs_distance_to_identity(op: SchoenbergOperator) -> float:
    """Squared Hilbert-Schmidt norm ``||op - I||^2``.

    Frobenius for the matrix variant; the fourier variant sums
    ``mult_k (gamma_k - 1)^2`` over folded entries.
    """
    if op.kind == SCALAR:
        return (float(op.data) - 1.0) ** 2
    if op.kind == FOURIER_DIAGONAL:
        return float(np.dot(op.multiplicities(), (op.data - 1.0) ** 2))
    diff = op.data - np.eye(op.dim)
    return float(np.sum(diff * diff))


# ---------------------------------------------------------------------------
# Tail descriptors
# ---------------------------------------------------------------------------


class TailDescriptor:
    """Closed-form upper bound on ``sum_{l > L} trace(b_l) C_l^lam(1)``."""

    kind: str = "base"

    def trace_tail_bound(self, l_from: int) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GeometricTail(TailDescriptor):
    """Tail of terms ``c_i * binom(n + d - 2, n) * ratio_i^n`` summed over i.

    The term ratio ``ratio * (n + d - 1) / (n + 1)`` is decreasing in n, so
    the tail beyond L is bounded by the (L+1)-th term times the geometric
    closure at that ratio.
    """

    coefficients: tuple
    ratios: tuple
    d: int
    kind: str = field(default="geometric", init=False)

    def trace_tail_bound(self, l_from: int) -> float:
        total = 0.0
        n = l_from + 1
        for c, a in zip(self.coefficients, self.ratios):
            if c == 0.0:
                continue
            if not 0.0 < a < 1.0:
                return math.inf
            r = a * (n + self.d - 1.0) / (n + 1.0)
            if r >= 1.0:
                return math.inf
            if self.d >= 2:
                log_binom = (math.lgamma(n + self.d - 1.0) - math.lgamma(n + 1.0)
                             - math.lgamma(self.d - 1.0))
            else:
                log_binom = -math.inf  # family degenerates on the circle
            log_term = math.log(c) + log_binom + n * math.log(a)
            total += math.exp(log_term) / (1.0 - r)
        return total

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "params": {"coefficients": list(self.coefficients),
                           "ratios": list(self.ratios), "d": self.d}}


@dataclass(frozen=True)
class PowerLawTail(TailDescriptor):
    """Integral tail bound for spectra ``sigma^2 / (h(l) (alpha + k^2 + l^2)^{nu + 1/2})``.

    Uses ``sum_{k>=1} (alpha + k^2 + l^2)^{-nu-1/2} <= c_nu/2 (alpha + l^2)^{-nu}``
    with ``c_nu = sqrt(pi) Gamma(nu) / Gamma(nu + 1/2)`` and then the integral
    comparison in l, giving decay exponent ``2 nu + 1`` per degree.
    """

    sigma: float
    alpha: float
    nu: float
    kind: str = field(default="power_law", init=False)

    def trace_tail_bound(self, l_from: int) -> float:
        s2 = self.sigma ** 2
        nu = self.nu
        c_nu = math.sqrt(math.pi) * math.gamma(nu) / math.gamma(nu + 0.5)
        L = max(l_from, 1)
        bound = 0.5 * s2 * (L ** -(2 * nu + 1) / (2 * nu + 1)
                            + c_nu * L ** -(2 * nu) / (2 * nu))
        if l_from < 1:
            # add a majorant of the l = 1 term itself
            bound += 0.5 * s2 * (1.0 + c_nu)
        return bound

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "params": {"sigma": self.sigma, "alpha": self.alpha, "nu": self.nu}}


def tail_from_dict(obj) -> TailDescriptor | None:
    if obj is None:
        return None
    kind = obj["kind"]
    p = obj["params"]
    if kind == "geometric":
        return GeometricTail(tuple(p["coefficients"]), tuple(p["ratios"]), int(p["d"]))
    if kind == "power_law":
        return PowerLawTail(float(p["sigma"]), float(p["alpha"]), float(p["nu"]))
    raise ValueError(f"unknown tail descriptor kind {kind!r}")


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchoenbergSequence:
    """Dimension d plus the ordered coefficients ``b_0 .. b_{L_max}``."""

    d: int
    coeffs: tuple
    tail: TailDescriptor | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"sphere dimension must be >= 1, got {self.d}")
        coeffs = tuple(self.coeffs)
        if not coeffs:
            raise ValueError("sequence must contain at least one coefficient")
        kind = coeffs[0].kind
        dim = coeffs[0].dim
        for l, op in enumerate(coeffs):
            if op.kind != kind or op.dim != dim:
                raise ValueError(
                    f"heterogeneous sequence: coefficient {l} has variant "
                    f"{op.kind}/{op.dim}, expected {kind}/{dim}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def variant(self) -> str:
        return self.coeffs[0].kind

    @property
    def dim(self) -> int:
        return self.coeffs[0].dim

    @property
    def l_max(self) -> int:
        return len(self.coeffs) - 1

    @property
    def order(self) -> float:
        return gegenbauer_order(self.d)

    def h_values(self) -> np.ndarray:
        return np.array([h_dim(self.d, l) for l in range(self.l_max + 1)], dtype=float)

    def coeff_stack(self) -> np.ndarray:
        """Coefficients stacked along the degree axis."""
        if self.variant == SCALAR:
            return np.array([float(op.data) for op in self.coeffs])
        return np.stack([op.data for op in self.coeffs])

    def trace_terms(self) -> np.ndarray:
        """Per-degree variance contributions ``trace(b_l) C_l^lam(1)``."""
        c1 = gegenbauer_at_one_all(self.order, self.l_max)
        return np.array([op.trace() for op in self.coeffs]) * c1


@dataclass(frozen=True)
class ValidityReport:
    """Per-degree diagnostics from :func:`validate_sequence`."""

    d: int
    variant: str
    l_max: int
    traces: np.ndarray
    min_eig_ratios: np.ndarray
    weighted_partial_sums: np.ndarray
    tail_estimate: float | None
    tail_is_heuristic: bool
    psd_valid: bool
    strictly_positive: bool
    flags: tuple
    passed: bool

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "variant": self.variant,
            "L_max": self.l_max,
            "traces": self.traces.tolist(),
            "min_eig_ratios": self.min_eig_ratios.tolist(),
            "weighted_partial_sums": self.weighted_partial_sums.tolist(),
            "tail_estimate": self.tail_estimate,
            "tail_is_heuristic": self.tail_is_heuristic,
            "psd_valid": self.psd_valid,
            "strictly_positive": self.strictly_positive,
            "flags": list(self.flags),
            "passed": self.passed,
        }


def validate_sequence(seq: SchoenbergSequence) -> ValidityReport:
    """PSD margins, traces, weighted-trace partial sums, and tail estimate.

    ``passed`` requires both PSD validity and strict positivity of every
    coefficient; PSD-only sequences remain usable for sampling but are not
    equivalence-eligible, which is reported through the separate flags.
    """
    traces = np.array([op.trace() for op in seq.coeffs])
    mins = np.array([op.min_eigenvalue() for op in seq.coeffs])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(traces > 0, mins / np.where(traces > 0, traces, 1.0), 0.0)
    psd_valid = bool(np.all(mins >= -PSD_RTOL * np.maximum(traces, 0.0)))
    strictly_positive = bool(np.all(mins > STRICT_RTOL * traces))

    omega = surface_measure(seq.d)
    weighted = omega * seq.trace_terms()
    partial = np.cumsum(weighted)

    flags = []
    if not psd_valid:
        flags.append("not positive semi-definite")
    if not strictly_positive:
        flags.append("not strictly positive")
    if not np.all(np.isfinite(partial)):
        flags.append("weighted trace not finite")

    if seq.tail is not None:
        tail_estimate = omega * seq.tail.trace_tail_bound(seq.l_max)
        heuristic = False
    elif seq.l_max >= 1:
        tail_estimate = float(weighted[-1])
        heuristic = True
        flags.append("tail estimate is a last-term heuristic")
    else:
        tail_estimate = None
        heuristic = True

    passed = psd_valid and strictly_positive and np.all(np.isfinite(partial))
    return ValidityReport(
        d=seq.d, variant=seq.variant, l_max=seq.l_max,
        traces=traces, min_eig_ratios=ratios, weighted_partial_sums=partial,
        tail_estimate=tail_estimate, tail_is_heuristic=heuristic,
        psd_valid=psd_valid, strictly_positive=strictly_positive,
        flags=tuple(flags), passed=bool(passed))


@dataclass(frozen=True)
class KernelValue:
    """One kernel evaluation with its truncation-error bound."""

    value: SchoenbergOperator
    tail_bound: float
    tail_is_heuristic: bool


class IsotropicKernel:
    """Evaluator for ``R(t) = sum_{l <= L_max} b_l C_l^lam(t)``.

    The reported tail bound dominates ``sum_{l > L_max} trace(b_l) C_l^lam(1)``
    (an upper bound on the dropped terms in trace norm, uniform in t since
    ``|C_l(t)| <= C_l(1)``).  Without a tail descriptor the last computed
    term is reported instead and flagged as heuristic.
    """

    def __init__(self, seq: SchoenbergSequence):
        self.seq = seq
        self._stack = seq.coeff_stack()
        self._order = seq.order
        if seq.tail is not None:
            self._tail_bound = seq.tail.trace_tail_bound(seq.l_max)
            self._tail_heuristic = False
        else:
            terms = seq.trace_terms()
            self._tail_bound = float(terms[-1]) if seq.l_max >= 1 else 0.0
            self._tail_heuristic = True

    @property
    def tail_bound(self) -> float:
        return self._tail_bound

    @property
    def tail_is_heuristic(self) -> bool:
        return self._tail_heuristic

    def evaluate_stack(self, ts) -> np.ndarray:
        """Raw kernel values for an array of ts, shape ``(len(ts),) + coeff shape``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        c = gegenbauer_all(self._order, self.seq.l_max, ts)  # (L+1, nt)
        return np.tensordot(np.moveaxis(c, 0, -1), self._stack, axes=([-1], [0]))

    def __call__(self, t: float) -> KernelValue:
        vals = self.evaluate_stack([float(t)])[0]
        if self.seq.variant == SCALAR:
            op = SchoenbergOperator(SCALAR, _frozen(np.asarray(float(vals))))
        elif self.seq.variant == MATRIX:
            op = SchoenbergOperator(MATRIX, _frozen(0.5 * (vals + vals.T)))
        else:
            op = SchoenbergOperator(FOURIER_DIAGONAL, _frozen(vals))
        return KernelValue(op, self._tail_bound, self._tail_heuristic)

    def trace_at_one(self) -> float:
        """Field variance ``trace R(x, x) = sum_l trace(b_l) C_l^lam(1)`` (truncated)."""
        return float(np.sum(self.seq.trace_terms()))


def kernel_eval(kernel: IsotropicKernel, t: float) -> KernelValue:
    """Evaluate an isotropic kernel at ``t = x . y`` with its tail bound."""
    return kernel(t)


def truncate_sequence(seq: SchoenbergSequence, l_max: int) -> SchoenbergSequence:
    """Drop degrees above l_max; the tail descriptor (a bound valid for any
    starting degree) is carried over."""
    if not 0 <= l_max <= seq.l_max:
        raise ValueError(f"l_max must lie in [0, {seq.l_max}], got {l_max}")
    return SchoenbergSequence(d=seq.d, coeffs=seq.coeffs[:l_max + 1], tail=seq.tail)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def sequence_to_dict(seq: SchoenbergSequence) -> dict:
    if seq.variant == SCALAR:
        coeffs = [float(op.data) for op in seq.coeffs]
    elif seq.variant == MATRIX:
        coeffs = [op.data.tolist() for op in seq.coeffs]  # row-major nested lists
    else:
        coeffs = [op.data.tolist() for op in seq.coeffs]
    return {
        "d": seq.d,
        "variant": seq.variant,
        "L_max": seq.l_max,
        "coeffs": coeffs,
        "tail": seq.tail.to_dict() if seq.tail is not None else None,
    }


def sequence_from_dict(obj: dict) -> SchoenbergSequence:
    variant = obj["variant"]
    if variant == SCALAR:
        coeffs = tuple(SchoenbergOperator.scalar(v) for v in obj["coeffs"])
    elif variant == MATRIX:
        coeffs = tuple(SchoenbergOperator.matrix(m) for m in obj["coeffs"])
    elif variant == FOURIER_DIAGONAL:
        coeffs = tuple(SchoenbergOperator.fourier_diagonal(g) for g in obj["coeffs"])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if len(coeffs) != obj["L_max"] + 1:
        raise ValueError("coefficient count does not match L_max")
    return SchoenbergSequence(d=int(obj["d"]), coeffs=coeffs,
                              tail=tail_from_dict(obj.get("tail")))


def save_sequence(seq: SchoenbergSequence, path) -> None:
    with open(path, "w") as fh:
        json.dump(sequence_to_dict(seq), fh, indent=1)


def load_sequence(path) -> SchoenbergSequence:
    with open(path) as fh:
        return sequence_from_dict(json.load(fh))
