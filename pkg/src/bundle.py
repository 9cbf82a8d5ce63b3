"""
Bundle - the unstable bundle as an attracting fixed point.

A line field E over T^2 is stored as a slope field U in a frame pair (H, V):
E(x) = span(H(x) + U(x) V(x)). The time-one map acts on slopes by the
Moebius transformation of its frame matrices,
    U'(z) = (A3 + A4 U~) / (A1 + A2 U~),   U~ = U o f^-1,
with A = M(f^-1 z). Iterating from U = 0 converges to E_u. The continuous
time version is the Riccati equation dr/dt = b r + q r^2 + c along the
suspension flow, integrated here as a cross-check.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    from .dynamics import (
        AnosovSystem, FramePair, RiccatiCoefficients, SystemKind, axes_frames,
        matrix_power_field, pullback, riccati_coefficients, transfer_matrices,
    )
    from .error_manager import (
        ConeExitError, ConfigurationError, ConvergenceError, PreconditionError, RiccatiBlowUpError,
    )
    from .spectral_core import PeriodicField
except ImportError:
    from dynamics import (
        AnosovSystem, FramePair, RiccatiCoefficients, SystemKind, axes_frames,
        matrix_power_field, pullback, riccati_coefficients, transfer_matrices,
    )
    from error_manager import (
        ConeExitError, ConfigurationError, ConvergenceError, PreconditionError, RiccatiBlowUpError,
    )
    from spectral_core import PeriodicField


CONE_FRACTION = 0.9
DENOMINATOR_FLOOR = 1e-12
RK4_STABILITY = 2.78        # real-axis stability limit of classical RK4
RESIDUAL_STEP = 1e-3        # tau step of the L_X stencil
RESIDUAL_SLICES = (0.25, 0.5, 0.75)


@dataclass
class BundleSection:
    """A slope field over the base grid, with the frames it is expressed in."""
    values: PeriodicField
    frames: FramePair
    representation: str = "slope_field"
    residual: float = float("nan")
    iterations: int = 0
    history: list = field(default_factory=list)
    cone_bound: float = math.inf

    @property
    def N(self) -> int:
        return self.values.N

    def direction_field(self) -> np.ndarray:
        """Unit vectors spanning the line field, shape (N, N, 2)."""
        vec = self.frames.H.values + self.values.values[..., None] * self.frames.V.values
        return vec / np.linalg.norm(vec, axis=-1)[..., None]

    def projector_field(self) -> np.ndarray:
        """Orthogonal projectors onto the line field, shape (N, N, 2, 2)."""
        d = self.direction_field()
        return d[..., :, None] * d[..., None, :]

    def ratios(self) -> list:
        """Successive contraction ratios of the iteration history."""
        h = self.history
        return [h[i + 1] / h[i] for i in range(len(h) - 1) if h[i] > 0]

    def to_dict(self) -> dict:
        return {
            "representation": self.representation,
            "residual": self.residual,
            "iterations": self.iterations,
            "history": list(self.history),
            "cone_bound": self.cone_bound,
            "frames": self.frames.to_dict(),
        }


def default_frames(sys: AnosovSystem, N: int) -> FramePair:
    """Coordinate axes ordered so the linear unstable slope has modulus <= 1."""
    e_u = sys.linear_splitting().e_u
    return axes_frames(N, swapped=abs(e_u[1]) > abs(e_u[0]))


def cone_bound(frames: FramePair) -> float:
    return CONE_FRACTION * frames.transversality()


def _moebius(A: np.ndarray, U: np.ndarray, where: str = "graph transform") -> np.ndarray:
    den = A[..., 0, 0] + A[..., 0, 1] * U
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.min(np.abs(den)) <= DENOMINATOR_FLOOR * scale:
        idx = np.unravel_index(int(np.argmin(np.abs(den))), den.shape)
        raise ConeExitError(f"{where}: Moebius denominator vanishes at grid index {tuple(int(i) for i in idx)}",
                            grid_index=[int(i) for i in idx])
    return (A[..., 1, 0] + A[..., 1, 1] * U) / den


def graph_transform_step(sys: AnosovSystem, U: BundleSection, t: float = 1.0,
                         pulled: Optional[np.ndarray] = None) -> BundleSection:
    """
    Push the line field forward by the time-t map (t a whole number of map
    periods) and resample it on the same grid.
    """
    steps = t / sys.period
    if steps < 1 or abs(steps - round(steps)) > 1e-12:
        raise ConfigurationError(f"t={t} is not a positive multiple of the period {sys.period}")
    A = transfer_matrices(sys, U.frames, pulled=True) if pulled is None else pulled
    values = U.values
    for _ in range(int(round(steps))):
        values = values.with_values(_moebius(A, pullback(sys, values).values))
    return BundleSection(values, U.frames, U.representation, cone_bound=U.cone_bound)


def compute_unstable_bundle(sys: AnosovSystem, tol: float = 1e-10, max_iter: int = 200, N: int = 64,
                            frames: Optional[FramePair] = None, output_manager=None) -> BundleSection:
    """
    Iterate the time-one graph transform from U = 0 until the sup change is
    below tol; the residual is the sup change of one further step.
    """
    frames = frames or default_frames(sys, N)
    bound = cone_bound(frames)
    pulled = transfer_matrices(sys, frames, pulled=True)
    current = BundleSection(PeriodicField(np.zeros((frames.N, frames.N)), 2), frames, cone_bound=bound)
    history = []
    for it in range(1, max_iter + 1):
        nxt = graph_transform_step(sys, current, sys.period, pulled)
        change = float(np.max(np.abs(nxt.values.values - current.values.values)))
        history.append(change)
        if output_manager:
            output_manager.print_iteration("graph transform", it, change)
        peak = np.abs(nxt.values.values)
        if np.max(peak) > bound:
            idx = np.unravel_index(int(np.argmax(peak)), peak.shape)
            raise ConeExitError(f"section left the cone (|U| = {np.max(peak):.3f} > {bound:.3f})",
                                grid_index=[int(i) for i in idx])
        current = nxt
        if change < tol:
            break
    else:
        raise ConvergenceError(f"graph transform did not reach tol={tol:.1e} in {max_iter} iterations",
                               history=history)
    check = graph_transform_step(sys, current, sys.period, pulled)
    current.residual = float(np.max(np.abs(check.values.values - current.values.values)))
    current.iterations = len(history)
    current.history = history
    return current


def stable_bundle(sys: AnosovSystem, tol: float = 1e-10, max_iter: int = 200, N: int = 64,
                  output_manager=None) -> BundleSection:
    """E_s as the unstable bundle of the inverse map."""
    inverse = sys.inverse_system()
    return compute_unstable_bundle(inverse, tol, max_iter, N, default_frames(inverse, N), output_manager)


# ---------------------------------------------------------------------------
# Riccati integration
# ---------------------------------------------------------------------------

def riccati_rhs(b: np.ndarray, q: np.ndarray, c: np.ndarray, r: np.ndarray) -> np.ndarray:
    return b * r + q * r * r + c


def rk4_riccati(b: np.ndarray, q: np.ndarray, c: np.ndarray, r0: np.ndarray, T: float, dt: float,
                bound: float = math.inf, t0: float = 0.0) -> np.ndarray:
    """
    Classical RK4 for dr/dt = b r + q r^2 + c with coefficients constant in t.

    Raises RiccatiBlowUpError once |r| exceeds `bound`.
    """
    steps = max(1, int(math.ceil(T / dt - 1e-12)))
    h = T / steps
    r = np.array(r0, dtype=float)
    for i in range(steps):
        k1 = riccati_rhs(b, q, c, r)
        k2 = riccati_rhs(b, q, c, r + 0.5 * h * k1)
        k3 = riccati_rhs(b, q, c, r + 0.5 * h * k2)
        k4 = riccati_rhs(b, q, c, r + h * k3)
        r = r + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(r)) or np.max(np.abs(r)) > bound:
            time = t0 + (i + 1) * h
            raise RiccatiBlowUpError(f"Riccati solution left the cone at t={time:.4f}", time=time)
    return r


def stability_bound(coeffs: RiccatiCoefficients, r_bound: float) -> float:
    """Largest RK4 step for which |b + 2 q r| dt stays inside the stability interval."""
    lipschitz = float(np.max(np.abs(coeffs.b.values)) + 2 * np.max(np.abs(coeffs.q.values)) * r_bound)
    return math.inf if lipschitz == 0 else RK4_STABILITY / lipschitz


def riccati_integrate(sys: AnosovSystem, coeffs: RiccatiCoefficients, r0: BundleSection, T: float,
                      dt: float = 0.02, output_manager=None) -> BundleSection:
    """
    Integrate the Riccati equation along the flow for whole roof periods,
    gluing each period back onto the base grid by the pullback.
    """
    bound = cone_bound(coeffs.frames)
    limit = stability_bound(coeffs, bound)
    if dt > limit:
        raise PreconditionError(f"dt={dt} exceeds the RK4 stability bound {limit:.4f}",
                                location={"stability_bound": limit})
    periods = max(1, int(round(T / coeffs.roof)))
    b, q, c = coeffs.b.values, coeffs.q.values, coeffs.c.values
    r = r0.values
    change = math.inf
    for period in range(periods):
        end = rk4_riccati(b, q, c, r.values, coeffs.roof, dt, bound, t0=period * coeffs.roof)
        glued = pullback(sys, r.with_values(end))
        change = float(np.max(np.abs(glued.values - r.values)))
        if output_manager:
            output_manager.print_iteration("riccati period", period + 1, change)
        r = glued
    return BundleSection(r, coeffs.frames, "slope_r", change, periods, cone_bound=bound)


def cross_validate(sys: AnosovSystem, section: BundleSection, coeffs: Optional[RiccatiCoefficients] = None,
                   dt: float = 0.02, periods: int = 40) -> float:
    """Sup difference between the graph-transform section and the Riccati solution from r = 0."""
    coeffs = coeffs or riccati_coefficients(sys, section.frames)
    start = BundleSection(section.values.with_values(np.zeros_like(section.values.values)), section.frames)
    solved = riccati_integrate(sys, coeffs, start, periods * coeffs.roof, dt)
    return float(np.max(np.abs(solved.values.values - section.values.values)))


# ---------------------------------------------------------------------------
# Invariance residual
# ---------------------------------------------------------------------------

def _flow_slopes(coeffs: RiccatiCoefficients, U: np.ndarray, tau: float) -> np.ndarray:
    """Slope of the line field at (x, tau) in the log-linear suspension frames."""
    return _moebius(matrix_power_field(coeffs.P, tau / coeffs.roof), U, "suspension slope")


def invariance_residual(sys: AnosovSystem, U: BundleSection,
                        coeffs: Optional[RiccatiCoefficients] = None) -> float:
    """
    Map: sup |step(U) - U|. Suspension: the larger of the Riccati defect
    |-X r + b r + q r^2 + c| on interior tau slices (4-point centered stencil
    in tau, step 1e-3) and the gluing defect sup |step(U) - U|.
    """
    gluing = graph_transform_step(sys, U, sys.period)
    gluing_defect = float(np.max(np.abs(gluing.values.values - U.values.values)))
    if sys.kind != SystemKind.SUSPENSION:
        return gluing_defect
    coeffs = coeffs or riccati_coefficients(sys, U.frames)
    h = RESIDUAL_STEP
    u = U.values.values
    interior = 0.0
    for frac in RESIDUAL_SLICES:
        tau = frac * coeffs.roof
        r = _flow_slopes(coeffs, u, tau)
        dr = (-_flow_slopes(coeffs, u, tau + 2 * h) + 8 * _flow_slopes(coeffs, u, tau + h)
              - 8 * _flow_slopes(coeffs, u, tau - h) + _flow_slopes(coeffs, u, tau - 2 * h)) / (12 * h)
        defect = -dr + riccati_rhs(coeffs.b.values, coeffs.q.values, coeffs.c.values, r)
        interior = max(interior, float(np.max(np.abs(defect))))
    return max(interior, gluing_defect)
