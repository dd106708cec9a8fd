"""Sampling isotropic Hilbert-valued Gaussian fields on S^1 and S^2.

Fields are synthesized by truncated harmonic expansion

    Z(x) = sum_{l <= L} sum_{m=1}^{h(l)} a_{l,m} Y_{l,m}(x),

where the ``a_{l,m}`` are independent zero-mean Gaussians with covariance
``bhat_l = b_l * omega_d * C_l(1) / h(l)``.  The rescaling converts
kernel-series coefficients to per-harmonic covariances under orthonormal
harmonics, so sampled fields reproduce ``R(t) = sum b_l C_l(t)`` exactly
(truncated); Monte Carlo checks therefore compare against the analytic
kernel truncated at the same degree, with the series tail bound reported
separately.

Randomness contract: draws come from numpy's Philox counter-based generator
keyed with the 128-bit key ``(seed, stream)``; distinct stream ids give
independent streams and identical ``(seed, stream)`` reproduce outputs
bit-for-bit.  Gaussians use numpy's ziggurat ``standard_normal``.  A single
field draws, for each degree ``l`` ascending, a row-major block of shape
``(h(l), dim)``; an ensemble draws ``(n_fields, H, dim)`` with fields as the
leading axis.  PSD coefficients that are not strictly positive are sampled
through the PSD square root (zero modes draw no variance); sampling never
needs inverses.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .harmonics import (
    addition_constant,
    check_points,
    degree_slices,
    h_dim,
    harmonic_basis,
    harmonic_count,
)
from .schoenberg import (
    FOURIER_DIAGONAL,
    MATRIX,
    IsotropicKernel,
    SchoenbergSequence,
    operator_sqrt,
    truncate_sequence,
)

_BATCH_ELEMS = 24_000_000  # ~192 MB of float64 per ensemble draw batch


@dataclass(frozen=True)
class RngSeed:
    """Key of a Philox stream: 64-bit seed plus 64-bit stream id."""

    seed: int
    stream: int = 0


def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for the (seed, stream) key (see module docstring)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SampleGrid:
    """Evaluation points on S^d (d = 1 or 2)."""

    d: int
    points: np.ndarray

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(
                f"field synthesis is restricted to d in {{1, 2}}; got d = {self.d}")
        pts = check_points(self.d, self.points)
        if pts.shape[0] == 0:
            raise ValueError("grid must contain at least one point")
        pts = np.array(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_points(cls, d: int, points) -> "SampleGrid":
        return cls(d=d, points=np.asarray(points, dtype=float))

    @classmethod
    def uniform_random(cls, d: int, n: int, seed: int, stream: int = 0) -> "SampleGrid":
        """n points drawn uniformly (normalized Gaussians), reproducible."""
        rng = make_generator(seed, stream)
        v = rng.standard_normal((n, d + 1))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return cls(d=d, points=v)

    @classmethod
    def equiangular(cls, n_polar: int, n_azimuth: int) -> "SampleGrid":
        """Latitude-longitude product grid on S^2 (pole-free midpoints)."""
        theta = (np.arange(n_polar) + 0.5) * math.pi / n_polar
        phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        pts = np.column_stack([
            (np.sin(tt) * np.cos(pp)).ravel(),
            (np.sin(tt) * np.sin(pp)).ravel(),
            np.cos(tt).ravel(),
        ])
        return cls(d=2, points=pts)

    @classmethod
    def equispaced_circle(cls, n: int) -> "SampleGrid":
        phi = 2.0 * math.pi * np.arange(n) / n
        return cls(d=1, points=np.column_stack([np.cos(phi), np.sin(phi)]))

    @classmethod
    def from_spec(cls, spec: dict) -> "SampleGrid":
        kind = spec.get("kind")
        if kind == "points":
            return cls.from_points(int(spec["d"]), spec["points"])
        if kind == "uniform":
            return cls.uniform_random(int(spec["d"]), int(spec["n"]),
                                      int(spec.get("seed", 0)),
                                      int(spec.get("stream", 0)))
        if kind == "equiangular":
            return cls.equiangular(int(spec["n_polar"]), int(spec["n_azimuth"]))
        if kind == "equispaced":
            return cls.equispaced_circle(int(spec["n"]))
        raise ValueError(f"unknown grid kind {kind!r}")


@dataclass(frozen=True)
class FieldSample:
    """One realization on a grid; values are (n_points, dim) coefficient vectors."""

    grid: SampleGrid
    values: np.ndarray
    l_max: int
    seed: int
    stream: int


def unfolded_dim(seq: SchoenbergSequence) -> int:
    """Length of materialized coefficient vectors: p for the matrix variant,
    1 for scalars, 2*K_max + 1 for the fourier variant (cos/sin pairs)."""
    if seq.variant == FOURIER_DIAGONAL:
        return 2 * seq.dim - 1
    return seq.dim


def _unfold_fourier(folded: np.ndarray) -> np.ndarray:
    """Repeat gamma_k onto the (cos, sin) coordinate pair for k >= 1."""
    k_max = folded.shape[-1] - 1
    out = np.empty(folded.shape[:-1] + (2 * k_max + 1,))
    out[..., 0] = folded[..., 0]
    out[..., 1::2] = folded[..., 1:]
    out[..., 2::2] = folded[..., 1:]
    return out


def coefficient_covariance(seq: SchoenbergSequence, l: int) -> np.ndarray:
    """Covariance ``bhat_l = b_l * omega_d C_l(1) / h(l)`` of the degree-l
    harmonic coefficients, in the materialized coefficient space."""
    w = 1.0 / addition_constant(seq.d, l)
    op = seq.coeffs[l]
    if op.kind == FOURIER_DIAGONAL:
        return _unfold_fourier(op.data * w)
    return op.data * w


def _scale_factors(seq: SchoenbergSequence, l_max: int):
    """Per-degree square roots of bhat_l, ready to scale standard normals."""
    if seq.variant == MATRIX:
        roots = []
        for l in range(l_max + 1):
            w = 1.0 / addition_constant(seq.d, l)
            roots.append(operator_sqrt(seq.coeffs[l].scaled(w)).data)
        return roots
    rows = []
    for l in range(l_max + 1):
        rows.append(np.sqrt(coefficient_covariance(seq, l)))
    return rows


def _check_l_max(seq: SchoenbergSequence, l_max) -> int:
    if l_max is None:
        return seq.l_max
    if not 0 <= l_max <= seq.l_max:
        raise ValueError(f"l_max must lie in [0, {seq.l_max}], got {l_max}")
    return l_max


def sample_coefficients(seq: SchoenbergSequence, l: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw the ``h(l)`` degree-l coefficient vectors, shape (h(l), dim).

    Zero-mean Gaussian with covariance ``bhat_l``; the matrix variant goes
    through the symmetric PSD square root, the fourier variant scales
    independent normals by sqrt(gamma-hat) entrywise (two normals per folded
    frequency k >= 1).
    """
    if not 0 <= l <= seq.l_max:
        raise ValueError(f"degree must lie in [0, {seq.l_max}], got {l}")
    h = h_dim(seq.d, l)
    dim = unfolded_dim(seq)
    z = rng.standard_normal((h, dim))
    if seq.variant == MATRIX:
        w = 1.0 / addition_constant(seq.d, l)
        s = operator_sqrt(seq.coeffs[l].scaled(w)).data
        return z @ s
    if seq.variant == FOURIER_DIAGONAL:
        return z * np.sqrt(coefficient_covariance(seq, l))[None, :]
    w = 1.0 / addition_constant(seq.d, l)
    return z * math.sqrt(float(seq.coeffs[l].data) * w)


def synthesize_field(seq: SchoenbergSequence, grid: SampleGrid,
                     l_max: int | None = None, seed: int = 0,
                     stream: int = 0) -> FieldSample:
    """Synthesize one field realization; deterministic given (seed, stream)."""
    if grid.d != seq.d:
        raise ValueError(f"grid dimension {grid.d} does not match sequence d={seq.d}")
    L = _check_l_max(seq, l_max)
    rng = make_generator(seed, stream)
    basis = harmonic_basis(seq.d, L, grid.points)
    slices = degree_slices(seq.d, L)
    dim = unfolded_dim(seq)
    values = np.zeros((grid.n_points, dim))
    for l in range(L + 1):
        a = sample_coefficients(seq, l, rng)            # (h(l), dim)
        values += basis[:, slices[l]] @ a
    return FieldSample(grid=grid, values=values, l_max=L, seed=seed, stream=stream)


def synthesize_ensemble(seq: SchoenbergSequence, grid: SampleGrid, n_fields: int,
                        l_max: int | None = None, seed: int = 0,
                        stream: int = 0) -> np.ndarray:
    """Synthesize ``n_fields`` independent realizations from one stream.

    Returns values of shape (n_fields, n_points, dim).  Deterministic given
    (seed, stream); fields are batched internally without changing the draw
    sequence.
    """
    if grid.d != seq.d:
        raise ValueError(f"grid dimension {grid.d} does not match sequence d={seq.d}")
    if n_fields < 1:
        raise ValueError(f"n_fields must be >= 1, got {n_fields}")
    L = _check_l_max(seq, l_max)
    rng = make_generator(seed, stream)
    basis = harmonic_basis(seq.d, L, grid.points)        # (npts, H)
    slices = degree_slices(seq.d, L)
    H = harmonic_count(seq.d, L)
    dim = unfolded_dim(seq)
    factors = _scale_factors(seq, L)

    out = np.empty((n_fields, grid.n_points, dim))
    batch = max(1, _BATCH_ELEMS // max(1, H * dim))
    done = 0
    while done < n_fields:
        nb = min(batch, n_fields - done)
        z = rng.standard_normal((nb, H, dim))
        if seq.variant == MATRIX:
            for l in range(L + 1):
                z[:, slices[l], :] = z[:, slices[l], :] @ factors[l]
        else:
            row_scale = np.concatenate(
                [np.broadcast_to(factors[l], (h_dim(seq.d, l), dim))
                 for l in range(L + 1)], axis=0)
            z *= row_scale[None, :, :]
        vals = np.tensordot(z, basis, axes=([1], [1]))   # (nb, dim, npts)
        out[done:done + nb] = np.swapaxes(vals, 1, 2)
        done += nb
    return out


def empirical_covariance(samples, i: int, j: int):
    """Entrywise mean and standard error of ``Z(x_i) (x) Z(x_j)`` over samples.

    ``samples`` is a list of FieldSample on a common grid (or an ensemble
    array).  Returns ``(estimate, se)``, both of shape (dim, dim).
    """
    if isinstance(samples, np.ndarray):
        values = samples
    else:
        samples = list(samples)
        if len(samples) < 2:
            raise ValueError("need at least 2 samples")
        g0 = samples[0].grid
        for s in samples[1:]:
            if s.grid.d != g0.d or not np.array_equal(s.grid.points, g0.points):
                raise ValueError("samples must share one grid")
        values = np.stack([s.values for s in samples])
    n = values.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    prod = values[:, i, :, None] * values[:, j, None, :]
    est = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n)
    return est, se


# ---------------------------------------------------------------------------
# Monte Carlo kernel checks
# ---------------------------------------------------------------------------


@dataclass
class PairCheck:
    x: np.ndarray
    y: np.ndarray
    t: float
    labels: list
    empirical: np.ndarray
    analytic: np.ndarray
    se: np.ndarray
    z: np.ndarray

    @property
    def z_max(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z.size else 0.0

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "t": self.t,
                "labels": self.labels,
                "empirical": self.empirical.tolist(),
                "analytic": self.analytic.tolist(),
                "se": self.se.tolist(), "z": self.z.tolist(),
                "z_max": self.z_max}


@dataclass
class CheckReport:
    passed: bool
    z_max: float
    z_threshold: float
    n_samples: int
    l_max: int
    tail_bound: float
    pairs: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "z_max": self.z_max,
                "z_threshold": self.z_threshold, "n_samples": self.n_samples,
                "L_max": self.l_max, "tail_bound": self.tail_bound,
                "pairs": [p.to_dict() for p in self.pairs]}


def _zscores(diff: np.ndarray, se: np.ndarray) -> np.ndarray:
    z = np.zeros_like(diff)
    nz = se > 0.0
    z[nz] = diff[nz] / se[nz]
    z[~nz & (np.abs(diff) > 1e-300)] = np.inf
    return z


def _pair_statistics(seq, values, idx_x, idx_y):
    """(labels, empirical, se) of the operator-representation entries."""
    vx = values[:, idx_x, :]
    vy = values[:, idx_y, :]
    n = values.shape[0]
    if seq.variant == FOURIER_DIAGONAL:
        prod = vx * vy                                  # (n, 2K+1)
        k_max = seq.dim - 1
        labels, emp, se = [], [], []
        for k in range(k_max + 1):
            if k == 0:
                sample = prod[:, 0]
            else:
                sample = np.concatenate([prod[:, 2 * k - 1], prod[:, 2 * k]])
            labels.append(f"gamma[{k}]")
            emp.append(sample.mean())
            se.append(sample.std(ddof=1) / math.sqrt(sample.size))
        return labels, np.array(emp), np.array(se)
    if seq.variant == MATRIX:
        p = seq.dim
        prod = vx[:, :, None] * vy[:, None, :]          # (n, p, p)
        emp = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / math.sqrt(n)
        labels = [f"R[{i}][{j}]" for i in range(p) for j in range(p)]
        return labels, emp.ravel(), se.ravel()
    prod = vx[:, 0] * vy[:, 0]
    return ["R"], np.array([prod.mean()]), np.array([prod.std(ddof=1) / math.sqrt(n)])


def _analytic_entries(seq, kernel_value):
    op = kernel_value.value
    if seq.variant == FOURIER_DIAGONAL:
        return np.asarray(op.data)
    if seq.variant == MATRIX:
        return np.asarray(op.data).ravel()
    return np.array([float(op.data)])


def monte_carlo_kernel_check(seq: SchoenbergSequence, pairs, n_samples: int,
                             seed: int = 0, stream: int = 0,
                             l_max: int | None = None,
                             z_threshold: float = 4.0,
                             analytic_seq: SchoenbergSequence | None = None) -> CheckReport:
    """Compare sampled covariances against the analytic kernel at point pairs.

    The analytic side is truncated at the sampling ``l_max`` so sampling
    error is not conflated with truncation error; the kernel tail bound is
    reported separately.  Entries are compared in the operator
    representation (p x p for matrices, folded frequencies for the fourier
    variant, pooling the cos/sin coordinate pairs).  Passes when every
    entrywise ``|z| < z_threshold``.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 3 or pairs.shape[1] != 2:
        raise ValueError("pairs must have shape (n_pairs, 2, d+1)")
    L = _check_l_max(seq, l_max)

    # deduplicate points so each field is synthesized once per location
    flat = pairs.reshape(-1, pairs.shape[2])
    uniq, inverse = np.unique(flat.round(decimals=15), axis=0, return_inverse=True)
    grid = SampleGrid.from_points(seq.d, uniq)
    values = synthesize_ensemble(seq, grid, n_samples, l_max=L,
                                 seed=seed, stream=stream)

    ref = truncate_sequence(analytic_seq if analytic_seq is not None else seq, L)
    kernel = IsotropicKernel(ref)

    results = []
    for p_idx in range(pairs.shape[0]):
        ix = int(inverse[2 * p_idx])
        iy = int(inverse[2 * p_idx + 1])
        t = float(np.clip(np.dot(pairs[p_idx, 0], pairs[p_idx, 1]), -1.0, 1.0))
        labels, emp, se = _pair_statistics(seq, values, ix, iy)
        analytic = _analytic_entries(seq, kernel(t))
        z = _zscores(emp - analytic, se)
        results.append(PairCheck(x=pairs[p_idx, 0], y=pairs[p_idx, 1], t=t,
                                 labels=labels, empirical=emp,
                                 analytic=analytic, se=se, z=z))
    z_max = max((r.z_max for r in results), default=0.0)
    return CheckReport(passed=bool(z_max < z_threshold), z_max=z_max,
                       z_threshold=z_threshold, n_samples=n_samples, l_max=L,
                       tail_bound=kernel.tail_bound, pairs=results)


# ---------------------------------------------------------------------------
# Function-space reconstruction and export
# ---------------------------------------------------------------------------


def fourier_function_values(coefficients: np.ndarray, taus) -> np.ndarray:
    """Evaluate a fourier-variant field value as a function on [0, 1].

    The coefficient vector is expressed in the orthonormal basis
    ``(1, sqrt(2) cos(2 pi k t), sqrt(2) sin(2 pi k t))_{k>=1}``:

        f(tau) = v_0 + sqrt(2) sum_k (v_{2k-1} cos(2 pi k tau)
                                      + v_{2k} sin(2 pi k tau)).
    """
    v = np.asarray(coefficients, dtype=float)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    k_max = (v.shape[-1] - 1) // 2
    out = np.full(taus.shape, v[0], dtype=float)
    for k in range(1, k_max + 1):
        out += math.sqrt(2.0) * (v[2 * k - 1] * np.cos(2 * math.pi * k * taus)
                                 + v[2 * k] * np.sin(2 * math.pi * k * taus))
    return out


def write_field_csv(sample: FieldSample, path) -> None:
    """CSV export: point coordinates then value vector, one row per point."""
    d = sample.grid.d
    dim = sample.values.shape[1]
    header = [f"x{i}" for i in range(d + 1)] + [f"v{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for pt, val in zip(sample.grid.points, sample.values):
            w.writerow([repr(float(c)) for c in pt] + [repr(float(v)) for v in val])


def write_field_json(sample: FieldSample, path) -> None:
    obj = {"d": sample.grid.d, "points": sample.grid.points.tolist(),
           "values": sample.values.tolist(), "L_max": sample.l_max,
           "seed": sample.seed, "stream": sample.stream}
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
