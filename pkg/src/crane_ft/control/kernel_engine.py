"""Backstepping kernels, controller gains and the (f, g) fixed-point oracle.

Kernels live on the triangle 0 <= xi <= x <= 1 sampled on a uniform square
lattice. They are stored as dense (n+1, n+1) arrays indexed [i, j] with
x = x_i, xi = x_j; entries above the diagonal are zero.

Direct kernels K use the labels uu, uv, vu, vv and inverse kernels L the
labels aa, ab, ba, bb (alpha/beta). As 2x2 matrices the first letter is the
row and the second the column.
"""

import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import RegularGridInterpolator

from crane_ft.control.crane_model import CraneModel, DerivedConstants
from crane_ft.core.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    ShapeError,
)
from crane_ft.core.logging import logger
from crane_ft.core.monitoring import picard_iterations_total, record_kernel_solve

FloatArray = NDArray[np.float64]
ScalarField = Callable[[FloatArray], FloatArray]
NodeField = Callable[[FloatArray, FloatArray], FloatArray]

DIRECT_LABELS = ("uu", "uv", "vu", "vv")
INVERSE_LABELS = ("aa", "ab", "ba", "bb")

# Magnitude beyond which a sweep is declared divergent
DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class TriangularGrid:
    """Uniform lattice on the triangle 0 <= xi <= x <= 1."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ShapeError(
                "Triangular grid needs at least two intervals", details={"n": self.n}
            )

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @cached_property
    def x(self) -> FloatArray:
        return np.linspace(0.0, 1.0, self.n + 1)

    @property
    def node_count(self) -> int:
        return (self.n + 1) * (self.n + 2) // 2

    @cached_property
    def mask(self) -> NDArray[np.bool_]:
        """True on the stored (lower triangle) nodes."""
        return np.tril(np.ones((self.n + 1, self.n + 1), dtype=bool))

    def nodes(self) -> Iterator[Tuple[int, int]]:
        for i in range(self.n + 1):
            for j in range(i + 1):
                yield i, j

    @cached_property
    def trapezoid_weights(self) -> FloatArray:
        """W[i, j] such that sum_j W[i, j] f(x_j) ~ int_0^{x_i} f."""
        w = np.tril(np.full((self.n + 1, self.n + 1), self.dx))
        idx = np.arange(self.n + 1)
        w[:, 0] = self.dx / 2.0
        w[idx, idx] = self.dx / 2.0
        w[0, 0] = 0.0
        return w


@dataclass(frozen=True)
class KernelSet:
    """Named kernel fields sampled on one triangular grid."""

    grid: TriangularGrid
    fields: Mapping[str, FloatArray]

    def __post_init__(self) -> None:
        shape = (self.grid.n + 1, self.grid.n + 1)
        for label, values in self.fields.items():
            if values.shape != shape:
                raise ShapeError(
                    details={"label": label, "shape": list(values.shape)}
                )

    def __getitem__(self, label: str) -> FloatArray:
        return self.fields[label]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self.fields)

    def row_at_one(self, label: str) -> FloatArray:
        """Samples xi -> F(1, xi)."""
        return self.fields[label][self.grid.n, :]

    def diagonal(self, label: str) -> FloatArray:
        return np.diagonal(self.fields[label]).copy()

    def as_matrix(self) -> FloatArray:
        """Stack four fields into an (n+1, n+1, 2, 2) array."""
        if len(self.fields) != 4:
            raise ShapeError("Matrix view needs exactly four fields")
        a, b, c, d = (self.fields[k] for k in self.labels)
        return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)

    def max_abs_difference(self, other: "KernelSet") -> Dict[str, float]:
        """Per-field sup norm of the difference, resampled onto the coarser grid."""
        coarse, fine = (self, other) if self.grid.n <= other.grid.n else (other, self)
        fine = fine.resample(coarse.grid.n)
        return {
            a: float(np.max(np.abs(coarse[a] - fine[b])))
            for a, b in zip(coarse.labels, fine.labels)
        }

    def resample(self, n: int) -> "KernelSet":
        """Restrict to a coarser uniform lattice with n intervals."""
        if n == self.grid.n:
            return self
        target = TriangularGrid(n)
        if self.grid.n % n == 0:
            stride = self.grid.n // n
            fields = {k: v[::stride, ::stride].copy() for k, v in self.fields.items()}
            return KernelSet(target, fields)

        xx, ss = np.meshgrid(target.x, target.x, indexing="ij")
        points = np.column_stack([xx.ravel(), ss.ravel()])
        fields = {}
        for label, values in self.fields.items():
            interp = RegularGridInterpolator(
                (self.grid.x, self.grid.x), _reflect(values)
            )
            fields[label] = np.tril(interp(points).reshape(xx.shape))
        return KernelSet(target, fields)

    def rows(self) -> Iterator[Tuple[float, float, float, str]]:
        """(x, xi, value, label) for every stored node, label-major."""
        x = self.grid.x
        for label in self.labels:
            values = self.fields[label]
            for i, j in self.grid.nodes():
                yield float(x[i]), float(x[j]), float(values[i, j]), label


def _reflect(values: FloatArray) -> FloatArray:
    """Fill the upper triangle with the mirror image of the lower one."""
    lower = np.tril(values)
    return lower + np.tril(values, -1).T


@dataclass(frozen=True)
class CoefficientFunctions:
    """Speeds, couplings and boundary ratio of the 2x2 kernel system."""

    eps1: ScalarField
    eps2: ScalarField
    eps1_prime: ScalarField
    eps2_prime: ScalarField
    c1: ScalarField
    c2: ScalarField
    q: float = 1.0


def coefficient_functions(dc: DerivedConstants) -> CoefficientFunctions:
    """eps1 = eps2 = lambda, c1 = -lambda'/2 = C2 lambda/2, c2 = -c1, q = 1."""

    def lam(x: FloatArray) -> FloatArray:
        return dc.C1 * np.exp(-dc.C2 * np.asarray(x, dtype=float))

    def lam_prime(x: FloatArray) -> FloatArray:
        return -dc.C2 * lam(x)

    def c1(x: FloatArray) -> FloatArray:
        return dc.C2 * lam(x) / 2.0

    def c2(x: FloatArray) -> FloatArray:
        return -c1(x)

    return CoefficientFunctions(
        eps1=lam,
        eps2=lam,
        eps1_prime=lam_prime,
        eps2_prime=lam_prime,
        c1=c1,
        c2=c2,
        q=1.0,
    )


@dataclass(frozen=True)
class KernelEquation:
    """One transport equation of a Goursat system.

    speed(x) F_x + family speed(xi) F_xi = self_coef F + coupling_coef F_partner

    Fields of the "-" family (family = -1) carry their value on the diagonal,
    fields of the "+" family take their xi = 0 row from another field.
    """

    label: str
    family: int
    partner: str
    self_coef: NodeField
    coupling_coef: NodeField
    diagonal_value: Optional[ScalarField] = None
    bottom_source: Optional[str] = None
    bottom_factor: float = 1.0

    def rhs(
        self, x: FloatArray, xi: FloatArray, value: FloatArray, partner: FloatArray
    ) -> FloatArray:
        return self.self_coef(x, xi) * value + self.coupling_coef(x, xi) * partner


@dataclass(frozen=True)
class GoursatSystem:
    """Four coupled kernel equations sharing one characteristic speed."""

    speed: ScalarField
    equations: Sequence[KernelEquation]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(eq.label for eq in self.equations)

    def solve(self, grid: TriangularGrid) -> Dict[str, FloatArray]:
        """March in x-columns along characteristics (first order).

        Per column: "+" diagonal node, "-" nodes, "+" xi = 0 row, "+" interior.
        Feet of characteristics are interpolated linearly on the previous
        column and clipped onto the boundary where they leave the triangle.
        """
        n, dx, x = grid.n, grid.dx, grid.x
        plus = [eq for eq in self.equations if eq.family > 0]
        minus = [eq for eq in self.equations if eq.family < 0]
        F = {eq.label: np.zeros((n + 1, n + 1)) for eq in self.equations}
        lam = np.asarray(self.speed(x), dtype=float)

        for eq in minus:
            assert eq.diagonal_value is not None
            F[eq.label][0, 0] = float(eq.diagonal_value(x[:1])[0])
        for eq in plus:
            assert eq.bottom_source is not None
            F[eq.label][0, 0] = eq.bottom_factor * F[eq.bottom_source][0, 0]

        for i in range(1, n + 1):
            a = lam[i]
            h = dx / a
            col = x[:i]

            # "+" diagonal node: the diagonal is a characteristic
            xd = np.array([x[i - 1]])
            for eq in plus:
                val = F[eq.label][i - 1, i - 1]
                par = F[eq.partner][i - 1, i - 1]
                F[eq.label][i, i] = val + h * float(
                    eq.rhs(xd, xd, np.array([val]), np.array([par]))[0]
                )

            # "-" nodes, feet clipped onto the diagonal
            b = lam[:i]
            foot_xi = col + b * h
            inside = foot_xi <= x[i - 1]
            step = np.where(inside, h, (x[i] - col) / (a + b))
            foot_x = x[i] - a * step
            foot_xi = np.where(inside, foot_xi, foot_x)
            diag_x = x[i - 1 : i + 1]
            for eq in minus:
                assert eq.diagonal_value is not None
                prev, prev_par = F[eq.label][i - 1, :i], F[eq.partner][i - 1, :i]
                par_diag = [F[eq.partner][i - 1, i - 1], F[eq.partner][i, i]]
                val = np.where(
                    inside,
                    np.interp(foot_xi, col, prev),
                    eq.diagonal_value(foot_x),
                )
                par = np.where(
                    inside,
                    np.interp(foot_xi, col, prev_par),
                    np.interp(foot_x, diag_x, par_diag),
                )
                F[eq.label][i, :i] = val + step * eq.rhs(foot_x, foot_xi, val, par)
                F[eq.label][i, i] = float(eq.diagonal_value(x[i : i + 1])[0])

            # "+" boundary row
            for eq in plus:
                assert eq.bottom_source is not None
                F[eq.label][i, 0] = eq.bottom_factor * F[eq.bottom_source][i, 0]

            # "+" interior, feet clipped onto xi = 0
            if i > 1:
                inner = x[1:i]
                b = lam[1:i]
                foot_xi = inner - b * h
                inside = foot_xi >= 0.0
                step = np.where(inside, h, inner / b)
                foot_x = x[i] - a * step
                foot_xi = np.where(inside, foot_xi, 0.0)
                for eq in plus:
                    prev, prev_par = F[eq.label][i - 1, :i], F[eq.partner][i - 1, :i]
                    bottom = [F[eq.label][i - 1, 0], F[eq.label][i, 0]]
                    par_bottom = [F[eq.partner][i - 1, 0], F[eq.partner][i, 0]]
                    val = np.where(
                        inside,
                        np.interp(foot_xi, col, prev),
                        np.interp(foot_x, diag_x, bottom),
                    )
                    par = np.where(
                        inside,
                        np.interp(foot_xi, col, prev_par),
                        np.interp(foot_x, diag_x, par_bottom),
                    )
                    F[eq.label][i, 1:i] = val + step * eq.rhs(foot_x, foot_xi, val, par)

            column_max = max(np.max(np.abs(F[k][i, : i + 1])) for k in F)
            if not np.isfinite(column_max) or column_max > DIVERGENCE_BOUND:
                raise DivergenceError(
                    details={"column": i, "x": float(x[i]), "max": float(column_max)}
                )
        return F


def direct_kernel_system(coeffs: CoefficientFunctions) -> GoursatSystem:
    """Goursat system of the direct kernels K."""
    e1, e2, c1, c2, q = coeffs.eps1, coeffs.eps2, coeffs.c1, coeffs.c2, coeffs.q
    zero = np.zeros(1)

    def diag_uv(x: FloatArray) -> FloatArray:
        return c1(x) / (e1(x) + e2(x))

    def diag_vu(x: FloatArray) -> FloatArray:
        return -c2(x) / (e1(x) + e2(x))

    return GoursatSystem(
        speed=e1,
        equations=(
            KernelEquation(
                "uu",
                +1,
                "uv",
                self_coef=lambda x, xi: -coeffs.eps1_prime(xi),
                coupling_coef=lambda x, xi: -c2(xi),
                bottom_source="uv",
                bottom_factor=float(e2(zero)[0] / (q * e1(zero)[0])),
            ),
            KernelEquation(
                "uv",
                -1,
                "uu",
                self_coef=lambda x, xi: coeffs.eps2_prime(xi),
                coupling_coef=lambda x, xi: -c1(xi),
                diagonal_value=diag_uv,
            ),
            KernelEquation(
                "vu",
                -1,
                "vv",
                self_coef=lambda x, xi: coeffs.eps1_prime(xi),
                coupling_coef=lambda x, xi: c2(xi),
                diagonal_value=diag_vu,
            ),
            KernelEquation(
                "vv",
                +1,
                "vu",
                self_coef=lambda x, xi: -coeffs.eps2_prime(xi),
                coupling_coef=lambda x, xi: c1(xi),
                bottom_source="vu",
                bottom_factor=float(q * e1(zero)[0] / e2(zero)[0]),
            ),
        ),
    )


def inverse_kernel_system(coeffs: CoefficientFunctions) -> GoursatSystem:
    """Goursat system of the inverse kernels L.

    The coupling -lambda'(x)/2 = c1(x) depends on x, not on xi.
    """
    lam_prime, c1 = coeffs.eps1_prime, coeffs.c1

    def diag(x: FloatArray) -> FloatArray:
        return c1(x) / (coeffs.eps1(x) + coeffs.eps2(x))

    def plus_self(x: FloatArray, xi: FloatArray) -> FloatArray:
        return -lam_prime(xi)

    def minus_self(x: FloatArray, xi: FloatArray) -> FloatArray:
        return lam_prime(xi)

    def coupling(x: FloatArray, xi: FloatArray) -> FloatArray:
        return c1(x)

    return GoursatSystem(
        speed=coeffs.eps1,
        equations=(
            KernelEquation("aa", +1, "ba", plus_self, coupling, bottom_source="ab"),
            KernelEquation("ab", -1, "bb", minus_self, coupling, diagonal_value=diag),
            KernelEquation("ba", -1, "aa", minus_self, coupling, diagonal_value=diag),
            KernelEquation("bb", +1, "ab", plus_self, coupling, bottom_source="ba"),
        ),
    )


def _timed_solve(system: GoursatSystem, grid: TriangularGrid, kernel: str) -> KernelSet:
    start = time.perf_counter()
    fields = system.solve(grid)
    duration = time.perf_counter() - start
    record_kernel_solve(kernel, "goursat", duration)
    logger.info(
        "kernel_solve_completed",
        kernel=kernel,
        method="goursat",
        n=grid.n,
        seconds=round(duration, 6),
    )
    return KernelSet(grid, {label: fields[label] for label in system.labels})


def solve_direct_kernels(
    grid: TriangularGrid, coeffs: CoefficientFunctions
) -> KernelSet:
    """Direct kernels K by characteristic marching."""
    return _timed_solve(direct_kernel_system(coeffs), grid, "K")


def solve_inverse_kernels_goursat(
    grid: TriangularGrid, coeffs: CoefficientFunctions
) -> KernelSet:
    """Inverse kernels L by characteristic marching of their own system."""
    return _timed_solve(inverse_kernel_system(coeffs), grid, "L")


def invert_kernels_volterra(
    K: KernelSet, grid: Optional[TriangularGrid] = None
) -> KernelSet:
    """Inverse kernels from L(x, xi) = K(x, xi) + int_xi^x K(x, s) L(s, xi) ds.

    Trapezoid rule in s; each row x_i is solved for all xi at once since it
    only needs rows below it.
    """
    grid = grid or K.grid
    if grid.n != K.grid.n:
        K = K.resample(grid.n)
    start = time.perf_counter()
    n, dx = grid.n, grid.dx
    Km = K.as_matrix()
    Lm = np.zeros_like(Km)
    eye = np.eye(2)
    Lm[0, 0] = Km[0, 0]
    for i in range(1, n + 1):
        Lm[i, i] = Km[i, i]
        # weights over s = x_k for k < i, per column j < i
        w = np.tril(np.full((i, i), dx), -1)
        w[np.arange(i), np.arange(i)] = dx / 2.0
        # w[k, j]: dx for j < k, dx/2 at k = j
        partial = np.einsum("kj,kab,kjbc->jac", w, Km[i, :i], Lm[:i, :i])
        rhs = Km[i, :i] + partial
        A = eye - (dx / 2.0) * Km[i, i]
        Lm[i, :i] = np.linalg.solve(np.broadcast_to(A, rhs.shape), rhs)
    duration = time.perf_counter() - start
    record_kernel_solve("L", "volterra", duration)
    logger.info(
        "kernel_solve_completed",
        kernel="L",
        method="volterra",
        n=n,
        seconds=round(duration, 6),
    )
    fields = {
        "aa": Lm[..., 0, 0],
        "ab": Lm[..., 0, 1],
        "ba": Lm[..., 1, 0],
        "bb": Lm[..., 1, 1],
    }
    return KernelSet(grid, {k: np.tril(v).copy() for k, v in fields.items()})


# Picard oracle


@dataclass(frozen=True)
class _Characteristics:
    """Closed-form travel-time maps used by the oracle."""

    model: CraneModel

    def lam(self, x: FloatArray) -> FloatArray:
        c = self.model.constants
        return c.C1 * np.exp(-c.C2 * x)

    def kappa(self, x: FloatArray) -> FloatArray:
        return self.model.constants.C2 * self.lam(x) / 2.0

    def Lam(self, x: FloatArray) -> FloatArray:
        return np.asarray(self.model.big_lambda(np.clip(x, 0.0, 1.0)))

    def Lam_inv(self, tau: FloatArray) -> FloatArray:
        total = float(self.model.big_lambda(1.0))
        return np.asarray(self.model.big_lambda_inverse(np.clip(tau, 0.0, total)))


def _interpolant(grid: TriangularGrid, values: FloatArray) -> RegularGridInterpolator:
    return RegularGridInterpolator(
        (grid.x, grid.x), _reflect(values), bounds_error=False, fill_value=None
    )


def picard_fg_oracle(
    grid: TriangularGrid,
    model: CraneModel,
    tol: float = 1e-10,
    max_iter: int = 200,
    quadrature_points: int = 33,
) -> KernelSet:
    """Symmetric inverse kernels f = L_aa = L_bb and g = L_ab = L_ba by iteration.

    f is transported along "+" characteristics from xi = 0 where f = g,
    g along "-" characteristics from the diagonal where g = C2/4. Nodes are
    converged in layers of characteristic time Lambda(x) - Lambda(xi) of
    width Lambda(1)/8, halved when the iteration stops contracting.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive", details={"field": "tol"})
    start = time.perf_counter()
    ch = _Characteristics(model)
    C = model.constants.C2 / 4.0
    xx, ss = np.meshgrid(grid.x, grid.x, indexing="ij")
    mask = grid.mask
    X, Xi = xx[mask], ss[mask]
    LX, LXi = ch.Lam(X), ch.Lam(Xi)
    tau = LX - LXi
    lam_xi = ch.lam(Xi)
    unit = np.linspace(0.0, 1.0, quadrature_points)

    # "+" characteristics: sigma in [0, Lambda(xi)] from the xi = 0 row
    sig_f = LXi[:, None] * unit[None, :]
    f_x = ch.Lam_inv(tau[:, None] + sig_f)
    f_xi = ch.Lam_inv(sig_f)
    f_weight = ch.lam(f_xi) * ch.kappa(f_x)
    f_start = ch.Lam_inv(tau)
    f_pts = np.stack([f_x, f_xi], axis=-1)

    # "-" characteristics: sigma in [0, tau/2] from the diagonal
    mid = (LX + LXi) / 2.0
    sig_g = (tau / 2.0)[:, None] * unit[None, :]
    g_x = ch.Lam_inv(mid[:, None] + sig_g)
    g_xi = ch.Lam_inv(mid[:, None] - sig_g)
    g_weight = ch.lam(g_xi) * ch.kappa(g_x)
    g_base = ch.lam(ch.Lam_inv(mid)) * C
    g_pts = np.stack([g_x, g_xi], axis=-1)

    f = np.where(mask, C, 0.0)
    g = np.where(mask, C, 0.0)
    width = float(ch.Lam(np.array(1.0))) / 8.0
    done = 0.0
    iterations = 0
    previous = np.inf

    while True:
        layer = (tau <= done + width + 1e-15)
        g_int = _interpolant(grid, g)
        start_pts = np.column_stack([f_start, np.zeros_like(f_start)])
        f_new = (
            ch.lam(np.zeros(1)) * g_int(start_pts)
            + trapezoid(f_weight * g_int(f_pts), sig_f, axis=1)
        ) / lam_xi
        f_full = np.zeros_like(f)
        f_full[mask] = np.where(layer, f_new, f[mask])
        f_int = _interpolant(grid, f_full)
        g_new = (g_base + trapezoid(g_weight * f_int(g_pts), sig_g, axis=1)) / lam_xi
        g_full = np.zeros_like(g)
        g_full[mask] = np.where(layer, g_new, g[mask])

        diff = max(
            float(np.max(np.abs(f_full - f))), float(np.max(np.abs(g_full - g)))
        )
        f, g = f_full, g_full
        iterations += 1
        picard_iterations_total.inc()

        if iterations > max_iter:
            raise ConvergenceError(
                details={"iterations": iterations - 1, "last_difference": diff}
            )
        if diff < tol:
            done += width
            previous = np.inf
            if done >= float(tau.max()):
                break
            continue
        if diff > previous:
            width /= 2.0
            logger.debug("picard_layer_halved", width=width, difference=diff)
        previous = diff

    duration = time.perf_counter() - start
    record_kernel_solve("fg", "picard", duration)
    logger.info(
        "kernel_solve_completed",
        kernel="fg",
        method="picard",
        n=grid.n,
        iterations=iterations,
        seconds=round(duration, 6),
    )
    return KernelSet(grid, {"f": f, "g": g})


# Gains


@dataclass(frozen=True)
class GainProfile:
    """Controller gains a(x), b(x) and constants a0 = b0, mu."""

    x: FloatArray
    a: FloatArray
    b: FloatArray
    a0: float
    b0: float
    mu: float
    # (a lambda)_x and (b lambda)_x in closed form
    a_lambda_x: FloatArray = field(repr=False)
    b_lambda_x: FloatArray = field(repr=False)

    def resample(self, x: ArrayLike) -> "GainProfile":
        """Linear interpolation onto another x-grid."""
        x_new = np.asarray(x, dtype=float)
        return GainProfile(
            x=x_new,
            a=np.interp(x_new, self.x, self.a),
            b=np.interp(x_new, self.x, self.b),
            a0=self.a0,
            b0=self.b0,
            mu=self.mu,
            a_lambda_x=np.interp(x_new, self.x, self.a_lambda_x),
            b_lambda_x=np.interp(x_new, self.x, self.b_lambda_x),
        )


def compute_gains(
    L: KernelSet, grid: Optional[TriangularGrid], dc: DerivedConstants
) -> GainProfile:
    """Gains from the row L(1, .) by the trapezoidal rule."""
    if grid is not None and grid.n != L.grid.n:
        L = L.resample(grid.n)
    grid = L.grid
    x = grid.x
    lam = dc.C1 * np.exp(-dc.C2 * x)
    alpha_sum = L.row_at_one("aa") + L.row_at_one("ba")
    beta_sum = L.row_at_one("ab") + L.row_at_one("bb")
    a0 = 1.0 + float(trapezoid(alpha_sum, x))
    b0 = a0
    a = (a0 - cumulative_trapezoid(alpha_sum, x, initial=0.0)) / lam
    b = (b0 + cumulative_trapezoid(beta_sum, x, initial=0.0)) / lam
    mu = 2.0 + float(trapezoid(alpha_sum + beta_sum, x))
    logger.info("gains_computed", a0=a0, mu=mu, a_lambda_at_one=float(a[-1] * lam[-1]))
    return GainProfile(
        x=x,
        a=a,
        b=b,
        a0=a0,
        b0=b0,
        mu=mu,
        a_lambda_x=-alpha_sum,
        b_lambda_x=beta_sum,
    )


# Backstepping transforms


def _kernel_on(kernels: KernelSet, n: int) -> KernelSet:
    return kernels.resample(n) if kernels.grid.n != n else kernels


def apply_direct_transform(
    K: KernelSet, u: ArrayLike, v: ArrayLike
) -> Tuple[FloatArray, FloatArray]:
    """(alpha, beta) = (u, v) - int_0^x K(x, xi)(u, v)(xi) dxi."""
    u_arr, v_arr = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u_arr.shape != v_arr.shape or u_arr.ndim != 1:
        raise ShapeError(details={"u": list(u_arr.shape), "v": list(v_arr.shape)})
    Kn = _kernel_on(K, u_arr.size - 1)
    W = Kn.grid.trapezoid_weights
    alpha = u_arr - (W * Kn["uu"]) @ u_arr - (W * Kn["uv"]) @ v_arr
    beta = v_arr - (W * Kn["vu"]) @ u_arr - (W * Kn["vv"]) @ v_arr
    return alpha, beta


def apply_inverse_transform(
    L: KernelSet, alpha: ArrayLike, beta: ArrayLike
) -> Tuple[FloatArray, FloatArray]:
    """(u, v) = (alpha, beta) + int_0^x L(x, xi)(alpha, beta)(xi) dxi."""
    a_arr, b_arr = np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)
    if a_arr.shape != b_arr.shape or a_arr.ndim != 1:
        raise ShapeError(
            details={"alpha": list(a_arr.shape), "beta": list(b_arr.shape)}
        )
    Ln = _kernel_on(L, a_arr.size - 1)
    W = Ln.grid.trapezoid_weights
    u = a_arr + (W * Ln["aa"]) @ a_arr + (W * Ln["ab"]) @ b_arr
    v = b_arr + (W * Ln["ba"]) @ a_arr + (W * Ln["bb"]) @ b_arr
    return u, v


def boundary_feedback(K: KernelSet, u: ArrayLike, v: ArrayLike) -> float:
    """Boundary law int K_vu(1, xi) u + K_vv(1, xi) v of the pure PDE problem."""
    u_arr, v_arr = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    Kn = _kernel_on(K, u_arr.size - 1)
    x = Kn.grid.x
    integrand = Kn.row_at_one("vu") * u_arr + Kn.row_at_one("vv") * v_arr
    return float(trapezoid(integrand, x))
