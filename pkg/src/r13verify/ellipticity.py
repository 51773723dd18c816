"""Symbol maps of first-order operators and their ellipticity classification.

An operator acts as a projection of the gradient, P[field x nabla]. Its
symbol at frequency xi is the linear map X -> P[X otimes xi]. The operator
is R-elliptic (C-elliptic) when the symbol is injective for every nonzero
real (complex) xi; the two notions differ exactly on the isotropic cone
xi . xi = 0, which a C-mode check therefore always samples explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .tensors import (
    _range_orthobasis,
    projection_matrix2,
    projection_matrix3,
    stf_basis,
)

RANK2_CODOMAINS = ("sym", "skew", "dev", "stf", "identity")
RANK3_CODOMAINS = ("Sym", "Dev", "Stf")

SINGULAR_VALUE_THRESHOLD = 1e-8
WITNESS_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class OperatorSpec:
    """First-order constant-coefficient operator: projection applied to a gradient.

    domain: 'vectors', 'stf2' (symmetric trace-free 2-tensors) or 'full2'.
    codomain: projection kind; rank-2 kinds for vector fields, rank-3
    kinds (Sym/Dev/Stf) for tensor fields.
    """

    domain: str
    codomain: str
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        if self.domain == "vectors":
            if self.codomain not in RANK2_CODOMAINS:
                raise ValueError(f"vector fields need a rank-2 codomain, got {self.codomain!r}")
        elif self.domain in ("stf2", "full2"):
            if self.codomain not in RANK3_CODOMAINS:
                raise ValueError(f"2-tensor fields need a rank-3 codomain, got {self.codomain!r}")
        else:
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class SymbolMatrix:
    """Coordinate matrix of the symbol at one frequency xi."""

    xi: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class SamplingPlan:
    """Frequency sampling counts for the ellipticity check.

    The isotropic counts apply only in C mode; the structured family
    (1, i cos phi, i sin phi, 0, ...) is always added there so the
    isotropic cone cannot be missed by chance.
    """

    n_real: int = 4096
    n_complex: int = 4096
    n_isotropic: int = 2048
    n_structured: int = 1024
    seed: int = 0


@dataclass(frozen=True)
class EllipticityVerdict:
    mode: str
    elliptic: bool
    min_singular_value: float
    xi_min: np.ndarray
    n_samples: int
    witness: np.ndarray | None = None
    witness_residual: float | None = None


@dataclass(frozen=True)
class Prefactors:
    """Dimension-dependent coefficients of the stf-gradient symbol analysis.

    c_stf is the rank-3 trace coefficient, c_symbol the coefficient in the
    symbol identity, c_core1 the full xi-contraction factor, c_case1 the
    factor on the anisotropic stratum and c_case2 the one on the isotropic
    stratum; c_case2 vanishes exactly at d = 2.
    """

    c_stf: Fraction
    c_symbol: Fraction
    c_core1: Fraction
    c_case1: Fraction
    c_case2: Fraction

    def as_tuple(self) -> tuple[Fraction, ...]:
        return (self.c_stf, self.c_symbol, self.c_core1, self.c_case1, self.c_case2)


def general_d_prefactors(d: int) -> Prefactors:
    """Exact rational prefactor table for dimension d >= 2."""
    if d < 2:
        raise ValueError("dimension must be >= 2")
    return Prefactors(
        c_stf=Fraction(1, d + 2),
        c_symbol=Fraction(2, 3 * (d + 2)),
        c_core1=Fraction(d, d + 2),
        c_case1=Fraction(2 * (d + 1), 3 * (d + 2)),
        c_case2=Fraction(d - 2, 3 * (d + 2)),
    )


def domain_basis(op: OperatorSpec) -> np.ndarray:
    """Orthonormal basis tensors of the operator's domain, shape (n, d[, d])."""
    d = op.dim
    if op.domain == "vectors":
        return np.eye(d)
    if op.domain == "stf2":
        return stf_basis(2, d)
    return np.eye(d * d).reshape(d * d, d, d)


def _codomain_matrix(op: OperatorSpec) -> np.ndarray:
    """Orthonormal basis of the codomain range as rows of flattened tensors."""
    d = op.dim
    if op.domain == "vectors":
        if op.codomain == "identity":
            return np.eye(d * d)
        return _range_orthobasis(projection_matrix2(op.codomain, d))
    return _range_orthobasis(projection_matrix3(op.codomain, d))


def _projection_matrix(op: OperatorSpec) -> np.ndarray:
    d = op.dim
    if op.domain == "vectors":
        if op.codomain == "identity":
            return np.eye(d * d)
        return projection_matrix2(op.codomain, d)
    return projection_matrix3(op.codomain, d)


def apply_symbol(op: OperatorSpec, X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Symbol applied to a domain tensor: the projected dyad P[X otimes xi]."""
    xi = np.asarray(xi)
    if np.linalg.norm(xi) == 0:
        raise ValueError("zero frequency")
    X = np.asarray(X)
    dyad = np.multiply.outer(X, xi)
    P = _projection_matrix(op)
    out = P.astype(dyad.dtype) @ dyad.ravel()
    return out.reshape(dyad.shape)


def symbol_coefficients(op: OperatorSpec) -> np.ndarray:
    """Coordinate matrices S_j with symbol(xi) = sum_j xi_j S_j, shape (d, m, n)."""
    d = op.dim
    dom = domain_basis(op)
    cod = _codomain_matrix(op)
    P = _projection_matrix(op)
    stack = np.zeros((d, cod.shape[0], dom.shape[0]))
    for j in range(d):
        ej = np.zeros(d)
        ej[j] = 1.0
        for col, X in enumerate(dom):
            dyad = np.multiply.outer(X, ej).ravel()
            stack[j, :, col] = cod @ (P @ dyad)
    return stack


def symbol_matrix(op: OperatorSpec, xi: np.ndarray) -> SymbolMatrix:
    """Coordinate matrix of the symbol map at frequency xi (possibly complex)."""
    xi = np.asarray(xi)
    if np.linalg.norm(xi) == 0:
        raise ValueError("zero frequency")
    stack = symbol_coefficients(op)
    return SymbolMatrix(xi=xi, matrix=np.tensordot(xi, stack, axes=1))


def codomain_tensor(op: OperatorSpec, coords: np.ndarray) -> np.ndarray:
    """Reassemble a codomain tensor from its coordinates."""
    cod = _codomain_matrix(op)
    d = op.dim
    flat = coords @ cod
    shape = (d, d) if op.domain == "vectors" else (d, d, d)
    return flat.reshape(shape)


def domain_tensor(op: OperatorSpec, coords: np.ndarray) -> np.ndarray:
    """Reassemble a domain tensor from its coordinates."""
    dom = domain_basis(op)
    return np.tensordot(coords, dom, axes=1)


def domain_coords(op: OperatorSpec, X: np.ndarray) -> np.ndarray:
    """Coordinates of a domain tensor in the domain basis."""
    dom = domain_basis(op)
    return dom.reshape(dom.shape[0], -1) @ np.asarray(X).ravel()


def codomain_coords(op: OperatorSpec, Y: np.ndarray) -> np.ndarray:
    """Coordinates of a codomain tensor in the codomain range basis."""
    cod = _codomain_matrix(op)
    return cod @ np.asarray(Y).ravel()


def _real_sphere(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _complex_sphere(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    v = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _isotropic_samples(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Random points on the isotropic cone xi.xi = 0: (a + i b)/sqrt(2), a perp b."""
    a = rng.standard_normal((n, d))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = rng.standard_normal((n, d))
    b -= np.sum(a * b, axis=1, keepdims=True) * a
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return (a + 1j * b) / np.sqrt(2.0)


def _structured_isotropic(n: int, d: int) -> np.ndarray:
    """Deterministic isotropic family; at d = 2 the two cone generators (1, +-i)."""
    if d == 2:
        return np.array([[1.0, 1j], [1.0, -1j]]) / np.sqrt(2.0)
    phi = np.linspace(0.0, 2.0 * np.pi, max(n, 4), endpoint=False)
    xis = np.zeros((phi.size, d), dtype=complex)
    xis[:, 0] = 1.0
    xis[:, 1] = 1j * np.cos(phi)
    xis[:, 2] = 1j * np.sin(phi)
    return xis / np.sqrt(2.0)


def check_ellipticity(
    op: OperatorSpec, mode: str, plan: SamplingPlan | None = None
) -> EllipticityVerdict:
    """Sample-based ellipticity certificate for the symbol map.

    mode 'R' samples the real unit sphere; mode 'C' adds generic complex
    directions, random isotropic directions and the structured isotropic
    family. elliptic means the minimal singular value over all samples
    (at |xi| = 1) stays above the 1e-8 threshold; otherwise the minimizer
    and a kernel vector are returned as witness.
    """
    if mode not in ("R", "C"):
        raise ValueError("mode must be 'R' or 'C'")
    plan = plan or SamplingPlan()
    rng = np.random.default_rng(plan.seed)

    batches = [_real_sphere(rng, plan.n_real, op.dim).astype(complex)]
    if mode == "C":
        batches.append(_complex_sphere(rng, plan.n_complex, op.dim))
        batches.append(_isotropic_samples(rng, plan.n_isotropic, op.dim))
        batches.append(_structured_isotropic(plan.n_structured, op.dim))
    xis = np.concatenate(batches, axis=0)

    stack = symbol_coefficients(op)
    mats = np.tensordot(xis, stack, axes=1)
    svals = np.linalg.svd(mats, compute_uv=False)
    smins = svals[:, -1]
    idx = int(np.argmin(smins))
    smin = float(smins[idx])
    xi_min = xis[idx]

    elliptic = smin >= SINGULAR_VALUE_THRESHOLD
    witness = None
    residual = None
    if not elliptic:
        _, _, vh = np.linalg.svd(mats[idx])
        coords = vh[-1].conj()
        witness = domain_tensor(op, coords)
        residual = float(
            np.linalg.norm(mats[idx] @ coords) / np.linalg.norm(coords)
        )
    return EllipticityVerdict(
        mode=mode,
        elliptic=elliptic,
        min_singular_value=smin,
        xi_min=xi_min,
        n_samples=xis.shape[0],
        witness=witness,
        witness_residual=residual,
    )


def _sphere_grid(n_theta: int, n_phi: int) -> np.ndarray:
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack(
        [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
    )
    return pts.reshape(-1, 3)


def _pair_objective_min(P4: np.ndarray, Z: np.ndarray, Y: np.ndarray, chunk: int = 256):
    """Minimize |P[z otimes y]|^2 over the product grid, chunked over Z."""
    YY = np.einsum("bj,bl->bjl", Y, Y).reshape(Y.shape[0], -1)
    best = np.inf
    best_pair = (Z[0], Y[0])
    for start in range(0, Z.shape[0], chunk):
        ZC = Z[start : start + chunk]
        G = np.einsum("ijkl,ai,ak->ajl", P4, ZC, ZC).reshape(ZC.shape[0], -1)
        F = G @ YY.T
        a, b = np.unravel_index(np.argmin(F), F.shape)
        if F[a, b] < best:
            best = F[a, b]
            best_pair = (ZC[a], Y[b])
    return best, best_pair


def _tangent_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space of the unit sphere at v."""
    d = v.size
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(d)[:, :-1]]))
    return q[:, 1:].T


def _descend_one(P4: np.ndarray, fixed: np.ndarray, moving: np.ndarray, radius: float, fix_left: bool):
    """One coordinate-descent sweep: refine `moving` on a local tangent grid."""
    tang = _tangent_basis(moving)
    steps = np.linspace(-1.0, 1.0, 9)
    cands = [moving]
    for i in range(tang.shape[0]):
        for j in range(i + 1, tang.shape[0]):
            for s1 in steps:
                for s2 in steps:
                    c = moving + radius * (s1 * tang[i] + s2 * tang[j])
                    cands.append(c / np.linalg.norm(c))
    C = np.array(cands)
    if fix_left:
        vals = np.einsum("ijkl,i,k,aj,al->a", P4, fixed, fixed, C, C)
    else:
        vals = np.einsum("ijkl,ai,ak,j,l->a", P4, C, C, fixed, fixed)
    i = int(np.argmin(vals))
    return C[i], float(vals[i])


def lh_constant(op: OperatorSpec, n_theta: int = 64, n_phi: int = 128, n_descent: int = 20) -> float:
    """Uniform lower bound on the symbol norm over rank-one directions.

    lambda = min over unit z, y of |P[z otimes y]|_F, found by a coarse
    scan over both unit spheres followed by alternating local descent.
    Positive exactly when the operator is R-elliptic.
    """
    if op.domain != "vectors":
        raise ValueError("rank-one bound is defined for vector-field operators")
    d = op.dim
    P = _projection_matrix(op)
    P4 = P.reshape(d, d, d, d)
    if d == 3:
        grid = _sphere_grid(n_theta, n_phi)
    else:
        rng = np.random.default_rng(1234)
        grid = _real_sphere(rng, n_theta * n_phi, d)
    best, (z, y) = _pair_objective_min(P4, grid, grid)
    radius = np.pi / max(n_theta, 8)
    for _ in range(n_descent):
        z, best = _descend_one(P4, y, z, radius, fix_left=False)
        y, best = _descend_one(P4, z, y, radius, fix_left=True)
        radius *= 0.6
    return float(np.sqrt(max(best, 0.0)))
