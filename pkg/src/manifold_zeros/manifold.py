"""Riemannian geometry of the Stiefel manifold, the SPD cone and Grassmann
horizontal spaces.

Points and tangent vectors are plain ndarrays. Each manifold class exposes
the small interface the solvers need (``inner``, ``norm``, ``retract``,
``transport``, ``project``, ``dim``) plus point validation and repair.
The module-level functions are thin wrappers with explicit names.
"""

import numpy as np

from . import matlin
from .errors import InvalidPoint, RetractionFailed, ShapeMismatch

POINT_TOL = 1e-10
TANGENT_TOL = 1e-10
SPD_SYM_TOL = 1e-12
MAX_HALVINGS = 30


def manifold_dim(kind, m, p=None):
    """Dimension of ``stiefel`` St(p, m), ``spd`` S++(m) or ``grassmann`` Gr(p, m)."""
    if kind == "stiefel":
        return m * p - p * (p + 1) // 2
    if kind == "spd":
        return m * (m + 1) // 2
    if kind == "grassmann":
        return p * (m - p)
    raise ValueError(f"unknown manifold kind {kind!r}")


def _frob_inner(U, V):
    return float(np.vdot(U, V))


class Stiefel:
    """St(p, m) with the embedded metric tr(U^T V), qf retraction and
    projection-based vector transport."""

    kind = "stiefel"

    def __init__(self, m, p):
        if not (m > p >= 1):
            raise ValueError(f"Stiefel needs m > p >= 1, got m={m}, p={p}")
        self.m, self.p = m, p
        self.dim = manifold_dim("stiefel", m, p)

    def __repr__(self):
        return f"Stiefel(m={self.m}, p={self.p})"

    def _check_shape(self, X):
        if X.shape != (self.m, self.p):
            raise ShapeMismatch(f"expected {(self.m, self.p)}, got {X.shape}")

    def point_error(self, X):
        return float(np.linalg.norm(X.T @ X - np.eye(X.shape[1])))

    def validate_point(self, X):
        X = np.asarray(X, dtype=float)
        self._check_shape(X)
        err = self.point_error(X)
        if not err <= POINT_TOL:
            raise InvalidPoint(f"||X^T X - I||_F = {err:.3e} exceeds {POINT_TOL}")
        return X

    def repair(self, X):
        return matlin.qf(X)[0]

    def tangent_error(self, X, Z):
        return float(np.linalg.norm(matlin.sym(X.T @ Z)))

    def inner(self, X, U, V):
        return _frob_inner(U, V)

    def norm(self, X, U):
        return float(np.linalg.norm(U))

    def project(self, X, Z):
        return st_project(X, Z)

    def retract(self, X, U):
        return st_retract(X, U)

    def transport(self, X, eta, xi, Y=None):
        """Carry ``xi`` to ``Y = R_X(eta)`` by orthogonal projection."""
        if Y is None:
            Y = self.retract(X, eta)
        return self.project(Y, xi)


class GrassmannHorizontal(Stiefel):
    """Gr(p, m) via Stiefel representatives; tangent vectors are horizontal
    lifts (X^T U = 0)."""

    kind = "grassmann"

    def __init__(self, m, p):
        super().__init__(m, p)
        self.dim = manifold_dim("grassmann", m, p)

    def __repr__(self):
        return f"GrassmannHorizontal(m={self.m}, p={self.p})"

    def tangent_error(self, X, Z):
        return float(np.linalg.norm(X.T @ Z))

    def project(self, X, Z):
        return gr_horizontal_project(X, Z)


class Spd:
    """S++(m) with the affine-invariant metric tr(X^-1 U X^-1 V) and identity
    vector transport.

    ``retraction="second_order"`` (default) maps ``(X, U)`` to
    ``X + U + U X^-1 U / 2``, which is SPD for every symmetric ``U``.
    ``retraction="additive"`` uses ``X + U`` and halves ``U`` until the
    result is SPD.
    """

    kind = "spd"

    def __init__(self, m, retraction="second_order"):
        if m < 1:
            raise ValueError(f"Spd needs m >= 1, got {m}")
        if retraction not in ("second_order", "additive"):
            raise ValueError(f"unknown SPD retraction {retraction!r}")
        self.m = m
        self.retraction = retraction
        self.dim = manifold_dim("spd", m)

    def __repr__(self):
        return f"Spd(m={self.m}, retraction={self.retraction!r})"

    def point_error(self, X):
        asym = float(np.linalg.norm(X - X.T))
        try:
            matlin.cholesky(X)
        except ArithmeticError:
            return np.inf
        return asym

    def validate_point(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.m):
            raise ShapeMismatch(f"expected {(self.m, self.m)}, got {X.shape}")
        if not np.linalg.norm(X - X.T) <= SPD_SYM_TOL * max(1.0, np.linalg.norm(X)):
            raise InvalidPoint("SPD point is not symmetric")
        matlin.cholesky(X)
        return X

    def repair(self, X):
        return matlin.sym(X)

    def tangent_error(self, X, Z):
        return float(np.linalg.norm(Z - Z.T))

    def inner(self, X, U, V):
        L = matlin.cholesky(X)
        XiU = matlin.spd_solve(X, U, factor=L)
        XiV = XiU if V is U else matlin.spd_solve(X, V, factor=L)
        # tr(A B) = sum(A * B^T)
        return float(np.sum(XiU * XiV.T))

    def norm(self, X, U):
        return float(np.sqrt(max(self.inner(X, U, U), 0.0)))

    def project(self, X, Z):
        return matlin.sym(np.asarray(Z, dtype=float))

    def retract(self, X, U):
        if not np.any(U):
            return X.copy()
        if self.retraction == "second_order":
            Y = X + U + 0.5 * U @ matlin.spd_solve(X, U)
            return matlin.sym(Y)
        step = U
        for _ in range(MAX_HALVINGS + 1):
            Y = matlin.sym(X + step)
            try:
                matlin.cholesky(Y)
                return Y
            except ArithmeticError:
                step = 0.5 * step
        raise RetractionFailed(f"X + U not SPD after {MAX_HALVINGS} halvings")

    def transport(self, X, eta, xi, Y=None):
        return xi


def st_inner(xi, eta):
    return _frob_inner(xi, eta)


def st_project(X, Z):
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != X.shape:
        raise ShapeMismatch(f"cannot project {Z.shape} at {X.shape}")
    return Z - X @ matlin.sym(X.T @ Z)


def st_retract(X, xi):
    X = np.asarray(X, dtype=float)
    if not np.any(xi):
        return X.copy()
    return matlin.qf(X + xi)[0]


def st_transport(X, eta, xi):
    Y = st_retract(X, eta)
    return st_project(Y, xi)


def spd_inner(X, xi, eta):
    return Spd(np.shape(X)[0]).inner(np.asarray(X, dtype=float), xi, eta)


def spd_retract(X, xi, mode="second_order"):
    return Spd(np.shape(X)[0], retraction=mode).retract(np.asarray(X, dtype=float), xi)


def spd_transport(eta, xi):
    return xi


def gr_horizontal_project(X, Z):
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != X.shape:
        raise ShapeMismatch(f"cannot project {Z.shape} at {X.shape}")
    return Z - X @ (X.T @ Z)
