"""
Spatial discretization of (0,1) with homogeneous Dirichlet boundary
===================================================================
Uniform grid with n interior nodes x_i = i·h, h = 1/(n+1), ghost values
u_0 = u_{n+1} = 0. Fluxes live on the n+1 cells between consecutive nodes,
so the p-Laplacian is assembled in conservative form and satisfies the
summation-by-parts identity

    h·Σ_i p_laplacian(u)_i·v_i = −h·Σ_c φ(s^u_c)·s^v_c,   φ(s) = |s|^{p−2}s.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

EPS_REG = 1e-8  # Jacobian-only regularization of degenerate cells

# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    n: int
    h: float = field(init=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs n >= 2 interior nodes, got {self.n}")
        object.__setattr__(self, "h", 1.0 / (self.n + 1))

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @property
    def cell_centers(self) -> np.ndarray:
        return self.h * (np.arange(self.n + 1) + 0.5)


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on the interior nodes; boundary values are implicitly 0."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"GridFunction length {vals.shape} does not match grid n={self.grid.n}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return self.with_values(scalar * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.with_values(-self.values)


def zeros(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.n))


def sample(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    return GridFunction(grid, fn(grid.nodes))


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric-or-not tridiagonal matrix: lower[i] = A[i+1,i], upper[i] = A[i,i+1]."""
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = self.upper
        ab[1, :] = self.diag
        ab[2, :-1] = self.lower
        return solve_banded((1, 1), ab, rhs)

    def scaled(self, alpha: float) -> "Tridiagonal":
        return Tridiagonal(alpha * self.lower, alpha * self.diag, alpha * self.upper)

    def plus_diagonal(self, d: np.ndarray) -> "Tridiagonal":
        return Tridiagonal(self.lower, self.diag + d, self.upper)

    def __add__(self, other: "Tridiagonal") -> "Tridiagonal":
        return Tridiagonal(
            self.lower + other.lower, self.diag + other.diag, self.upper + other.upper
        )

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


# ---------------------------------------------------------------------------
# Difference operators
# ---------------------------------------------------------------------------

def signed_power(s: np.ndarray, p: float) -> np.ndarray:
    """φ(s) = |s|^{p−2}·s, continuous at 0 for p > 1."""
    s = np.asarray(s, dtype=float)
    return np.abs(s) ** (p - 1.0) * np.sign(s)


def forward_diff(u: GridFunction) -> np.ndarray:
    """Cell slopes (u_{i+1} − u_i)/h, length n+1, using zero ghost values."""
    padded = np.concatenate(([0.0], u.values, [0.0]))
    return np.diff(padded) / u.grid.h


def weighted_laplacian(grid: Grid, weights: np.ndarray) -> Tridiagonal:
    """Matrix of u ↦ (w_{i+1/2}(u_{i+1}−u_i) − w_{i−1/2}(u_i−u_{i−1}))/h²."""
    inv_h2 = 1.0 / grid.h ** 2
    diag = -(weights[:-1] + weights[1:]) * inv_h2
    off = weights[1:-1] * inv_h2
    return Tridiagonal(off.copy(), diag, off.copy())


def laplacian(grid: Grid) -> Tridiagonal:
    """K = −Δ_h, the positive definite discrete Dirichlet Laplacian."""
    return weighted_laplacian(grid, np.ones(grid.n + 1)).scaled(-1.0)


def p_laplacian(u: GridFunction, p: float) -> GridFunction:
    """Conservative discretization of (|u_x|^{p−2} u_x)_x."""
    if p <= 1.0:
        raise ValueError(f"p-Laplacian requires p > 1, got {p}")
    flux = signed_power(forward_diff(u), p)
    return u.with_values(np.diff(flux) / u.grid.h)


def p_laplacian_jacobian(u: GridFunction, p: float, eps_reg: float = EPS_REG) -> Tridiagonal:
    """Jacobian of `p_laplacian` with cell weights (p−1)·max(|s_c|, ε_reg)^{p−2}.

    Symmetric negative semidefinite. p = 2 is accepted and yields the plain
    Laplacian stencil.
    """
    if p < 2.0:
        raise ValueError(f"Jacobian regularization assumes p >= 2, got {p}")
    weights = (p - 1.0) * np.maximum(np.abs(forward_diff(u)), eps_reg) ** (p - 2.0)
    return weighted_laplacian(u.grid, weights)


def monotonicity_gap(x, y, p: float):
    """(φ(x) − φ(y))(x − y) − 2^{2−p}|x − y|^p; nonnegative for p ≥ 2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c_p = 2.0 ** (2.0 - p)
    gap = (signed_power(x, p) - signed_power(y, p)) * (x - y) - c_p * np.abs(x - y) ** p
    return gap if gap.ndim else float(gap)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridNorms:
    l2: float
    lp_grad: float
    h1: float
    h_neg1: float
    w1inf: float


def l2_norm(u: GridFunction) -> float:
    return math.sqrt(u.grid.h * float(np.dot(u.values, u.values)))


def lp_grad_norm(u: GridFunction, p: float) -> float:
    s = forward_diff(u)
    return float((u.grid.h * np.sum(np.abs(s) ** p)) ** (1.0 / p))


def h1_norm(u: GridFunction) -> float:
    s = forward_diff(u)
    return math.sqrt(u.grid.h * float(np.dot(s, s)))


def h_neg1_norm(u: GridFunction) -> float:
    if not np.any(u.values):
        return 0.0
    z = laplacian(u.grid).solve(u.values)
    return math.sqrt(max(u.grid.h * float(np.dot(u.values, z)), 0.0))


def w1inf_norm(u: GridFunction) -> float:
    return float(np.max(np.abs(forward_diff(u))))


def norms(u: GridFunction, p: float = 2.0) -> GridNorms:
    return GridNorms(
        l2=l2_norm(u),
        lp_grad=lp_grad_norm(u, p),
        h1=h1_norm(u),
        h_neg1=h_neg1_norm(u),
        w1inf=w1inf_norm(u),
    )
