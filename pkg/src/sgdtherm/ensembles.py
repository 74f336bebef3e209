"""Loss ensembles: collections of per-example loss components sharing a minimizer structure.

Two families are scale-invariant and live on the unit sphere:

* great-circle ensembles in 3D, where component i is half the squared
  distance to a plane through the origin, normalized by ||w||^2; its zero
  set is the corresponding great circle;
* hyperplane ensembles, the same functional form in D dimensions.

The third family is an unconstrained quadratic ensemble (per-component
Hessians around a shared optimum), used to validate closed-form SNR
expressions.  Whether every per-example loss can vanish simultaneously
distinguishes the overparameterized (OP) regime from the underparameterized
(UP) one: for the normal-vector families, OP holds exactly when the normals
do not span the full space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, ZeroVector

_UNIT_TOL = 1e-12


def _check_unit_rows(normals: np.ndarray) -> None:
    norms = np.linalg.norm(normals, axis=1)
    if not np.all(np.abs(norms - 1.0) <= _UNIT_TOL):
        raise InvalidConfig("ensemble normals must have unit norm (within 1e-12)")


def circle_loss(normal: np.ndarray, w: np.ndarray) -> float:
    """Half squared plane distance, normalized: (normal . w)^2 / (2 ||w||^2).

    Scale-invariant by construction: identical for w and c*w, c != 0.
    """
    w = np.asarray(w, dtype=float)
    sq = float(w @ w)
    if sq < 1e-300:
        raise ZeroVector("loss undefined at the origin")
    a = float(np.asarray(normal, dtype=float) @ w)
    return a * a / (2.0 * sq)


def circle_grad(normal: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient of circle_loss at a unit vector w: a*normal - a^2*w with a = normal . w.

    Tangent to the sphere: grad . w = 0 up to rounding.
    """
    normal = np.asarray(normal, dtype=float)
    w = np.asarray(w, dtype=float)
    a = float(normal @ w)
    return a * normal - (a * a) * w


class HyperplaneEnsemble:
    """M unit normals in D dimensions; component i is (a_i . w)^2 / (2 ||w||^2).

    On the unit sphere the component gradient is (a_i . w) a_i - (a_i . w)^2 w.
    Regime: OP when the normals span a proper subspace (their common zero set
    on the sphere is nonempty), UP when they span all of R^D.
    """

    spherical = True

    def __init__(self, normals: np.ndarray):
        normals = np.asarray(normals, dtype=float)
        if normals.ndim != 2 or normals.shape[0] < 2 or normals.shape[1] < 2:
            raise InvalidConfig("need at least 2 normals of dimension >= 2")
        _check_unit_rows(normals)
        self.normals = normals

    def __len__(self) -> int:
        return self.normals.shape[0]

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def regime(self) -> str:
        rank = np.linalg.matrix_rank(self.normals)
        return "OP" if rank < self.dim else "UP"

    def losses(self, w: np.ndarray) -> np.ndarray:
        a = self.normals @ w
        sq = float(w @ w)
        if sq < 1e-300:
            raise ZeroVector("loss undefined at the origin")
        return a * a / (2.0 * sq)

    def full_loss(self, w: np.ndarray) -> float:
        a = self.normals @ w
        sq = w @ w
        if sq < 1e-300:
            raise ZeroVector("loss undefined at the origin")
        return float((a @ a) / (2.0 * sq * a.size))

    def component_grads(self, w: np.ndarray) -> np.ndarray:
        """(M, D) gradients at a unit vector w."""
        a = self.normals @ w
        return a[:, None] * self.normals - (a * a)[:, None] * w[None, :]

    def full_grad(self, w: np.ndarray) -> np.ndarray:
        return self.component_grads(w).mean(axis=0)

    def batch_grad(self, indices: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Mean gradient over the indexed components (single-index fast path)."""
        if len(indices) == 1:
            n = self.normals[indices[0]]
            a = n @ w
            return a * n - (a * a) * w
        sub = self.normals[indices]
        a = sub @ w
        inv = 1.0 / a.size
        return inv * (a @ sub) - (inv * (a @ a)) * w


class GreatCircleEnsemble(HyperplaneEnsemble):
    """The 3D special case: each component's zero set is a great circle."""

    def __init__(self, normals: np.ndarray):
        normals = np.asarray(normals, dtype=float)
        if normals.ndim != 2 or normals.shape[1] != 3:
            raise InvalidConfig("great-circle normals must be 3-vectors")
        super().__init__(normals)


def hyperplane_loss_and_grad(
    ensemble: HyperplaneEnsemble, index: int, w: np.ndarray
) -> tuple[float, np.ndarray]:
    """Single-component loss and gradient at a unit vector w."""
    if not 0 <= index < len(ensemble):
        raise IndexError(f"component index {index} out of range [0, {len(ensemble)})")
    normal = ensemble.normals[index]
    return circle_loss(normal, w), circle_grad(normal, w)


def make_toy_op() -> GreatCircleEnsemble:
    """Two great circles intersecting at (0, 0, +-1): the interpolating (OP) toy.

    Normals (sqrt(3)/2, 1/2, 0) and (sqrt(3)/2, -1/2, 0); the full loss is
    zero exactly at the poles.
    """
    s3 = np.sqrt(3.0) / 2.0
    return GreatCircleEnsemble(np.array([[s3, 0.5, 0.0], [s3, -0.5, 0.0]]))


def make_toy_up() -> GreatCircleEnsemble:
    """Three great circles with no common point: the non-interpolating (UP) toy.

    Raw normals (1, 0, 0.2), (-1/2, sqrt(3)/2, 0.2), (-1/2, -sqrt(3)/2, 0.2),
    normalized to unit length.  The circles sit at equal distance from
    (0, 0, 1) and the normals have equal pairwise angles; the full loss is
    strictly positive everywhere on the sphere.
    """
    h = np.sqrt(3.0) / 2.0
    raw = np.array([
        [1.0, 0.0, 0.2],
        [-0.5, h, 0.2],
        [-0.5, -h, 0.2],
    ])
    return GreatCircleEnsemble(raw / np.linalg.norm(raw, axis=1, keepdims=True))


def make_circle_pair(half_angle: float) -> GreatCircleEnsemble:
    """Two circles with normals (cos a, +-sin a, 0); make_toy_op() is a = pi/6."""
    c, s = np.cos(half_angle), np.sin(half_angle)
    return GreatCircleEnsemble(np.array([[c, s, 0.0], [c, -s, 0.0]]))


def random_hyperplane_ensemble(
    dim: int, components: int, seed: int
) -> HyperplaneEnsemble:
    """Ensemble of `components` uniform-random unit normals in `dim` dimensions."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((components, dim))
    return HyperplaneEnsemble(raw / np.linalg.norm(raw, axis=1, keepdims=True))


@dataclass(eq=False)
class QuadraticEnsemble:
    """Per-component quadratics around a shared optimum (unconstrained).

    Component i is offsets[i] + 0.5 (w - optimum)^T H_i (w - optimum) with
    symmetric PSD H_i; the full Hessian is the component mean.  Used for
    validating direction-wise SNR identities, not for spherical runs.
    """

    optimum: np.ndarray
    hessians: np.ndarray  # (M, D, D)
    offsets: np.ndarray | None = None
    spherical: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.optimum = np.asarray(self.optimum, dtype=float)
        self.hessians = np.asarray(self.hessians, dtype=float)
        d = self.optimum.shape[0]
        if self.hessians.ndim != 3 or self.hessians.shape[1:] != (d, d):
            raise DimensionMismatch("hessians must have shape (M, D, D) matching the optimum")
        if not np.allclose(self.hessians, np.swapaxes(self.hessians, 1, 2), atol=1e-12):
            raise InvalidConfig("component Hessians must be symmetric within 1e-12")
        if self.offsets is None:
            self.offsets = np.zeros(self.hessians.shape[0])
        else:
            self.offsets = np.asarray(self.offsets, dtype=float)
            if self.offsets.shape != (self.hessians.shape[0],):
                raise DimensionMismatch("one offset per component required")

    def __len__(self) -> int:
        return self.hessians.shape[0]

    @property
    def dim(self) -> int:
        return self.optimum.shape[0]

    @property
    def full_hessian(self) -> np.ndarray:
        return self.hessians.mean(axis=0)

    def losses(self, w: np.ndarray) -> np.ndarray:
        d = np.asarray(w, dtype=float) - self.optimum
        return self.offsets + 0.5 * np.einsum("mij,i,j->m", self.hessians, d, d)

    def full_loss(self, w: np.ndarray) -> float:
        return float(self.losses(w).mean())

    def component_grads(self, w: np.ndarray) -> np.ndarray:
        d = np.asarray(w, dtype=float) - self.optimum
        return np.einsum("mij,j->mi", self.hessians, d)

    def full_grad(self, w: np.ndarray) -> np.ndarray:
        return self.component_grads(w).mean(axis=0)

    def batch_grad(self, indices: np.ndarray, w: np.ndarray) -> np.ndarray:
        d = np.asarray(w, dtype=float) - self.optimum
        return np.einsum("mij,j->mi", self.hessians[indices], d).mean(axis=0)


def quadratic_loss_and_grad(
    ensemble: QuadraticEnsemble, index: int, w: np.ndarray
) -> tuple[float, np.ndarray]:
    """Single-component quadratic loss and gradient H_i (w - optimum)."""
    if not 0 <= index < len(ensemble):
        raise IndexError(f"component index {index} out of range [0, {len(ensemble)})")
    d = np.asarray(w, dtype=float) - ensemble.optimum
    h = ensemble.hessians[index]
    loss = float(ensemble.offsets[index] + 0.5 * d @ h @ d)
    return loss, h @ d


def random_quadratic_ensemble(
    dim: int, components: int, seed: int, scale: float = 1.0
) -> QuadraticEnsemble:
    """Random PSD quadratic ensemble: H_i = G_i^T G_i / dim, optimum at the origin.

    Zero offsets, so every stochastic gradient vanishes at the optimum
    (the interpolation property).
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((components, dim, dim))
    hessians = scale * np.einsum("mki,mkj->mij", g, g) / dim
    hessians = 0.5 * (hessians + np.swapaxes(hessians, 1, 2))
    return QuadraticEnsemble(optimum=np.zeros(dim), hessians=hessians)
