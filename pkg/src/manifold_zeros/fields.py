"""Tangent vector fields whose zeros the solvers look for.

* :class:`OjaField` on St(p, m): ``F(X) = A X - X X^T A X``.
* :class:`TraceRatioField` on St(p, m): ``F(X) = E(X) X - X X^T E(X) X`` with
  ``E(X) = A / phi_B - B phi_A / phi_B**2 + C`` and ``phi_S = tr(X^T S X)``.
* :class:`LogDetField` on S++(m): ``F(X) = 2 ln det(X) X``.

The two Stiefel fields also provide the horizontal lift of their Jacobian
on the Grassmann quotient, used by the Newton phase.
"""

import numpy as np

from . import matlin
from .errors import DegenerateDenominator, NotHorizontal, ShapeMismatch
from .manifold import Spd, Stiefel

SYM_TOL = 1e-12
HORIZONTAL_TOL = 1e-8
PHI_FLOOR = 1e-13


def _check_symmetric(name, S):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {S.shape}")
    if np.linalg.norm(S - S.T) > SYM_TOL * max(1.0, np.linalg.norm(S)):
        raise ValueError(f"{name} is not symmetric")
    return S


def _check_horizontal(X, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != X.shape:
        raise ShapeMismatch(f"direction {xi.shape} does not match point {X.shape}")
    if np.linalg.norm(X.T @ xi) > HORIZONTAL_TOL * np.linalg.norm(xi):
        raise NotHorizontal("X^T xi != 0")
    return xi


class OjaField:
    kind = "oja"
    has_jacobian = True

    def __init__(self, A):
        self.A = _check_symmetric("A", A)
        self.m = self.A.shape[0]

    def manifold_for(self, X):
        return Stiefel(*np.shape(X))

    def __call__(self, X):
        if X.shape[0] != self.m:
            raise ShapeMismatch(f"point has {X.shape[0]} rows, A is {self.m}x{self.m}")
        AX = self.A @ X
        return AX - X @ (X.T @ AX)

    def jacobian(self, X):
        """Return ``xi -> (I - X X^T)(A xi - xi X^T A X)`` for horizontal ``xi``."""
        M = X.T @ (self.A @ X)

        def apply(xi):
            W = self.A @ xi - xi @ M
            return W - X @ (X.T @ W)

        return apply

    def jac_lift(self, X, xi):
        xi = _check_horizontal(X, xi)
        return self.jacobian(X)(xi)


class TraceRatioField:
    kind = "trace-ratio"
    has_jacobian = True

    def __init__(self, A, B, C):
        self.A = _check_symmetric("A", A)
        self.B = _check_symmetric("B", B)
        self.C = _check_symmetric("C", C)
        if not (self.A.shape == self.B.shape == self.C.shape):
            raise ShapeMismatch("A, B, C must share a shape")
        matlin.cholesky(self.B)
        self.m = self.A.shape[0]

    def manifold_for(self, X):
        return Stiefel(*np.shape(X))

    def _parts(self, X):
        if X.shape[0] != self.m:
            raise ShapeMismatch(f"point has {X.shape[0]} rows, field is {self.m}x{self.m}")
        AX = self.A @ X
        BX = self.B @ X
        phi_a = float(np.vdot(X, AX))
        phi_b = float(np.vdot(X, BX))
        if phi_b <= PHI_FLOOR:
            raise DegenerateDenominator(f"tr(X^T B X) = {phi_b:.3e}")
        return AX, BX, phi_a, phi_b

    def E(self, X):
        _, _, phi_a, phi_b = self._parts(X)
        return self._E(phi_a, phi_b)

    def _E(self, phi_a, phi_b):
        return self.A / phi_b - self.B * (phi_a / phi_b**2) + self.C

    def __call__(self, X):
        _, _, phi_a, phi_b = self._parts(X)
        EX = self._E(phi_a, phi_b) @ X
        return EX - X @ (X.T @ EX)

    def jacobian(self, X):
        """Return the horizontal Jacobian lift at ``X`` as a closure.

        ``xi -> (I - X X^T)(E xi + G(X, xi) X - xi X^T E X)`` where ``G`` is the
        derivative of ``E`` along ``xi``; ``phi_S'(X; xi) = 2 tr(X^T S xi)``.
        ``G X`` is applied through ``A X`` and ``B X`` without forming ``G``.
        """
        AX, BX, phi_a, phi_b = self._parts(X)
        E = self._E(phi_a, phi_b)
        M = X.T @ (E @ X)

        def apply(xi):
            dphi_a = 2.0 * float(np.vdot(AX, xi))
            dphi_b = 2.0 * float(np.vdot(BX, xi))
            GX = (-dphi_b / phi_b**2) * AX \
                - ((dphi_a * phi_b**2 - 2.0 * phi_b * dphi_b * phi_a) / phi_b**4) * BX
            W = E @ xi + GX - xi @ M
            return W - X @ (X.T @ W)

        return apply

    def jac_lift(self, X, xi):
        xi = _check_horizontal(X, xi)
        return self.jacobian(X)(xi)


class LogDetField:
    """Geodesic monotone field ``2 ln det(X) X`` on the SPD cone."""

    kind = "logdet-spd"
    has_jacobian = False

    def __init__(self, retraction="second_order"):
        self.retraction = retraction

    def manifold_for(self, X):
        return Spd(np.shape(X)[0], retraction=self.retraction)

    def __call__(self, X):
        lndet, _ = matlin.chol_logdet(X)
        return 2.0 * lndet * X


def oja_eval(A, X):
    return OjaField(A)(np.asarray(X, dtype=float))


def oja_jac_lift(A, X, xi):
    return OjaField(A).jac_lift(np.asarray(X, dtype=float), xi)


def trace_ratio_eval(A, B, C, X):
    return TraceRatioField(A, B, C)(np.asarray(X, dtype=float))


def trace_ratio_jac_lift(A, B, C, X, xi):
    return TraceRatioField(A, B, C).jac_lift(np.asarray(X, dtype=float), xi)


def logdet_eval(X):
    return LogDetField()(np.asarray(X, dtype=float))


def residual_norm(field, X, manifold=None):
    """Riemannian norm of ``F(X)`` in the metric of ``manifold``."""
    if manifold is None:
        manifold = field.manifold_for(X)
    return manifold.norm(X, field(X))


def merit(field, X, manifold=None):
    return 0.5 * residual_norm(field, X, manifold) ** 2


def fd_field_derivative(field, manifold, X, xi, h=1e-8, central=False):
    """Difference quotient of ``F`` along the retraction curve ``t -> R_X(t xi)``.

    One-sided (default): ``(F(R_X(h xi)) - T_{h xi} F(X)) / h``, a tangent at
    ``R_X(h xi)``. Central: ``P_X[(F(R_X(h xi)) - F(R_X(-h xi))) / (2 h)]``, a
    tangent at ``X``; with a Grassmann manifold this is the horizontal lift
    oracle for the Jacobians.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if not np.any(xi):
        return np.zeros_like(np.asarray(X, dtype=float))
    if central:
        Fp = field(manifold.retract(X, h * xi))
        Fm = field(manifold.retract(X, -h * xi))
        return manifold.project(X, (Fp - Fm) / (2.0 * h))
    Y = manifold.retract(X, h * xi)
    return (field(Y) - manifold.transport(X, h * xi, field(X), Y=Y)) / h
