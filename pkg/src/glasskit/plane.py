"""Plane representation, canonical form, polar angles and least-squares fitting.

Conventions:
  * A plane is the point set {v : n . v + d = 0} with ||n|| = 1.
  * Canonical form keeps the normal in the -z hemisphere (n_z <= 0); when
    n_z == 0 the first nonzero component among (n_x, n_y) is positive.
  * Polar angles: theta1 = arcsin(n_y); theta2 is the angle of (n_x, n_z)
    measured from the -z axis toward +x. Both lie in [-pi/2, pi/2] for
    canonical normals. Normal (0, 0, -1) maps to (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidPlane, NearOriginPlane, OutOfRange

UNIT_TOL = 1e-12
ORTHO_TOL = 1e-9

# fit_plane_lsq guards
COND_BOUND = 1e12
RESIDUAL_TOL = 1e-6  # RMS residual of P n + 1


@dataclass(frozen=True)
class Plane:
    """Unit normal + intercept in the camera frame: n . v + d = 0."""

    n: np.ndarray  # unit 3-vector
    d: float       # meters

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(n)) or not np.isfinite(self.d):
            raise InvalidPlane("non-finite plane parameters")
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise InvalidPlane("normal is not unit length")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", float(self.d))

    def signed_distance(self, v) -> np.ndarray:
        """n . v + d for one point or an (N, 3) array of points."""
        v = np.asarray(v, dtype=np.float64)
        return v @ self.n + self.d


@dataclass(frozen=True)
class PolarPlane:
    """(theta1, theta2, d) angular plane parameterization."""

    theta1: float  # radians
    theta2: float  # radians
    d: float       # meters

    def __post_init__(self):
        half_pi = np.pi / 2
        if not (-half_pi <= self.theta1 <= half_pi and -half_pi <= self.theta2 <= half_pi):
            raise OutOfRange("theta1/theta2 outside [-pi/2, pi/2]")

    def to_plane(self) -> Plane:
        return Plane(from_polar(self.theta1, self.theta2), self.d)


@dataclass(frozen=True)
class RigidTransform:
    """World -> camera rigid transform: p_c = rotation @ p_w + translation."""

    rotation: np.ndarray     # 3x3 orthonormal, det +1
    translation: np.ndarray  # 3-vector, meters

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def inverse(self) -> "RigidTransform":
        R_inv = self.rotation.T
        return RigidTransform(R_inv, -R_inv @ self.translation)


def as_vertex_set(points) -> np.ndarray:
    """Validate a vertex set: (N, 3) finite floats, N >= 3."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {P.shape}")
    if P.shape[0] < 3:
        raise ValueError("vertex set needs at least 3 points")
    bad = ~np.all(np.isfinite(P), axis=1)
    if np.any(bad):
        raise ValueError(f"non-finite point at index {int(np.flatnonzero(bad)[0])}")
    return P


def transform_points(T: RigidTransform, points) -> np.ndarray:
    """Apply p -> R p + t to every point. Point count preserved."""
    P = as_vertex_set(points)
    return P @ T.rotation.T + T.translation


def canonicalize(p: Plane) -> Plane:
    """Flip (n, d) jointly into the -z hemisphere; point set is unchanged.

    Tie-break at n_z == 0: first nonzero of (n_x, n_y) is made positive.
    """
    n = np.asarray(p.n, dtype=np.float64)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise InvalidPlane("zero-norm normal")
    flip = False
    if n[2] > 0:
        flip = True
    elif n[2] == 0:
        if n[0] != 0:
            flip = n[0] < 0
        elif n[1] != 0:
            flip = n[1] < 0
        else:  # unreachable for unit normals
            raise InvalidPlane("zero normal")
    if flip:
        return Plane(-n, -p.d)
    return Plane(n, p.d)


def fit_plane_lsq(points) -> Plane:
    """Least-squares plane from >= 3 non-collinear points.

    Solves the normal equations of P n_hat = -1, then n = n_hat/||n_hat||,
    d = 1/||n_hat|| (d > 0 by construction, before canonicalization).
    Raises DegenerateGeometry when cond(P^T P) exceeds COND_BOUND and
    NearOriginPlane when the RMS residual ||P n_hat + 1||/sqrt(N) exceeds
    RESIDUAL_TOL (this formulation cannot represent planes through the
    origin; use fit_plane_svd for those).
    """
    P = as_vertex_set(points)
    A = P.T @ P
    if np.linalg.cond(A) > COND_BOUND:
        raise DegenerateGeometry("rank-deficient normal equations")
    b = -P.sum(axis=0)
    n_hat = np.linalg.solve(A, b)
    resid = float(np.linalg.norm(P @ n_hat + 1.0)) / np.sqrt(P.shape[0])
    if resid > RESIDUAL_TOL:
        raise NearOriginPlane("plane passes too close to the origin", resid)
    norm = np.linalg.norm(n_hat)
    return canonicalize(Plane(n_hat / norm, 1.0 / norm))


def fit_plane_svd(points) -> Plane:
    """SVD plane fit (centroid + smallest right singular vector).

    Handles planes through the origin, unlike fit_plane_lsq.
    """
    P = as_vertex_set(points)
    centroid = P.mean(axis=0)
    Q = P - centroid
    _, s, vt = np.linalg.svd(Q, full_matrices=False)
    if s[1] <= 0 or s[0] / s[1] > COND_BOUND:
        raise DegenerateGeometry("points are collinear")
    n = vt[2]
    return canonicalize(Plane(n, -float(n @ centroid)))


def polar_from_normals(normals: np.ndarray) -> np.ndarray:
    """(N, 3) canonical unit normals -> (N, 2) angles (theta1, theta2).

    theta1 = arcsin(n_y); theta2 = angle of (n_x, n_z) from the -z axis,
    positive toward +x. theta2 is undefined at n = (0, +-1, 0) and set to 0.
    """
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if np.any(normals[:, 2] > UNIT_TOL):
        raise OutOfRange("normal is not in the -z hemisphere; canonicalize first")
    theta1 = np.arcsin(np.clip(normals[:, 1], -1.0, 1.0))
    r_xz = np.hypot(normals[:, 0], normals[:, 2])
    theta2 = np.where(r_xz == 0.0, 0.0, np.arctan2(normals[:, 0], -normals[:, 2]))
    return np.stack([theta1, theta2], axis=1)


def normals_from_polar(angles: np.ndarray) -> np.ndarray:
    """(N, 2) angles -> (N, 3) unit normals in the -z hemisphere."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1, 2)
    half_pi = np.pi / 2
    if np.any(np.abs(angles) > half_pi):
        raise OutOfRange("theta1/theta2 outside [-pi/2, pi/2]")
    c1 = np.cos(angles[:, 0])
    return np.stack([c1 * np.sin(angles[:, 1]),
                     np.sin(angles[:, 0]),
                     -c1 * np.cos(angles[:, 1])], axis=1)


def to_polar(n) -> tuple[float, float]:
    """Polar angles (theta1, theta2) of one canonical unit normal."""
    t = polar_from_normals(np.asarray(n, dtype=np.float64).reshape(1, 3))[0]
    return float(t[0]), float(t[1])


def from_polar(theta1: float, theta2: float) -> np.ndarray:
    """Unit normal (cos t1 sin t2, sin t1, -cos t1 cos t2); n_z <= 0."""
    return normals_from_polar(np.array([[theta1, theta2]]))[0]
