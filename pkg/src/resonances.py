"""
Resonances - anisotropic weights and weighted transfer-operator spectra.

The transfer operator of the map with potential V,

    L u = exp(V) * (u o f^-1),

is discretized on the Fourier modes |k| < N/2 and conjugated by the
weight E = Op(<k>^(-m(x,k))), where the order function m interpolates
between u < 0 on the E_u* cone (where frequencies accumulate) and s > 0 on
the E_s* cone; E is diagonal when m does not depend on x. Eigenvalues of
the conjugated matrix are the map resonances; for a suspension with
constant roof R, generator resonances are (log mu + 2 pi i l) / R.

Key Features:
- Escape orders averaged along the cotangent cocycle, with a sampled
  monotonicity certificate
- Column-parallel matrix assembly (joblib threads)
- Real cosine/sine basis for real potentials, exact conjugate symmetry
- Birkhoff estimate of s1 (potential and divergence) and the strip width delta
- Truncation sweeps and weight-independence checks
"""

import math
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.fft as sfft
import scipy.linalg
from joblib import Parallel, delayed

try:
    from .common import is_power_of_two
    from .dynamics import AnosovSystem, RateReport, ORBIT_SEEDS, SystemKind, sample_points
    from .error_manager import ConfigurationError, ConvergenceError, PreconditionError, ResolutionError
    from .parax import SymbolGrid, SymbolTerm, quantize
    from .spectral_core import (
        PeriodicField, constant_field, fourier_interpolate, grid_points, japanese_bracket,
        lattice, resample, single_mode, smooth_step, sup_norm, synthesize_field,
    )
except ImportError:
    from common import is_power_of_two
    from dynamics import AnosovSystem, RateReport, ORBIT_SEEDS, SystemKind, sample_points
    from error_manager import ConfigurationError, ConvergenceError, PreconditionError, ResolutionError
    from parax import SymbolGrid, SymbolTerm, quantize
    from spectral_core import (
        PeriodicField, constant_field, fourier_interpolate, grid_points, japanese_bracket,
        lattice, resample, single_mode, smooth_step, sup_norm, synthesize_field,
    )


MONOTONICITY_TOL = 1e-8
AVERAGING_TIMES = (1, 2, 4, 8, 16)
CERTIFICATE_POINTS = 64
CERTIFICATE_ANGLES = 360
OVERSAMPLING = 4
COLUMN_CHUNK = 32
BIRKHOFF_TOL = 1e-3
POTENTIAL_DECAY_OFFSET = 1.05
WEIGHT_GRID = 8              # base grid on which x-dependent orders are sampled
SYMBOL_DROP = 1e-13


# ---------------------------------------------------------------------------
# Escape weights
# ---------------------------------------------------------------------------

def _line_angle(v: np.ndarray) -> np.ndarray:
    """Angle of the line through v in [0, pi)."""
    return np.mod(np.arctan2(v[..., 1], v[..., 0]), np.pi)


@dataclass
class EscapeWeight:
    """
    Order function m(x, k) on frequency lines: u on the E_u* cone, s on the
    E_s* cone, a smooth monotone step in between on each of the two arcs.

    With average_T > 0 the step is averaged with (T - t) weights along the
    cotangent cocycle (x, k) -> (f(x), Df(x)^-T k) of the system, so for
    perturbed maps the order depends on the base point.
    """
    u: float
    s: float
    aperture: float
    theta_u: float
    theta_s: float
    cotangent: np.ndarray            # linear cotangent map A^-T
    average_T: int = 0
    certificate: float = math.inf
    history: list = field(default_factory=list)
    system: Optional[AnosovSystem] = field(default=None, repr=False, compare=False)

    @property
    def x_dependent(self) -> bool:
        return self.average_T > 0 and self.system is not None and not self.system.is_linear

    def _base_order(self, k: np.ndarray) -> np.ndarray:
        phi = _line_angle(k)
        arc = (self.theta_s - self.theta_u) % np.pi
        d = np.mod(phi - self.theta_u, np.pi)
        first = d <= arc
        psi = np.where(first, d, np.pi - d)
        length = np.where(first, arc, np.pi - arc)
        return self.u + (self.s - self.u) * smooth_step((psi - self.aperture) / (length - 2 * self.aperture))

    def _weights(self) -> np.ndarray:
        weights = np.arange(self.average_T, 0, -1, dtype=float)
        return weights / weights.sum()

    def order(self, k: np.ndarray) -> np.ndarray:
        """m at frequency vectors k (..., 2) for an order that does not depend on x; 0 at k = 0."""
        k = np.asarray(k, dtype=float)
        if self.average_T <= 0:
            m = self._base_order(k)
        else:
            if self.x_dependent:
                raise ConfigurationError("this escape order depends on x; use order_at")
            m = np.zeros(k.shape[:-1])
            v = k
            for w in self._weights():
                m = m + w * self._base_order(v)
                v = v @ self.cotangent.T
                v = v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), 1e-300)
        zero = np.all(k == 0, axis=-1)
        return np.where(zero, 0.0, m)

    def order_at(self, x: np.ndarray, k: np.ndarray) -> np.ndarray:
        """m(x_p, k_p...) for base points x (P, 2) and frequencies k (P, ..., 2)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        k = np.asarray(k, dtype=float)
        if k.ndim < 2 or k.shape[0] != x.shape[0]:
            raise ConfigurationError(f"frequencies of shape {k.shape} do not match {x.shape[0]} base points")
        if not self.x_dependent:
            return self.order(k)
        m = np.zeros(k.shape[:-1])
        v, p = k, x
        for w in self._weights():
            m = m + w * self._base_order(v)
            dual = np.linalg.inv(self.system.jacobian(p)).transpose(0, 2, 1)
            v = np.einsum("pij,p...j->p...i", dual, v)
            v = v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), 1e-300)
            p = self.system.forward(p)
        zero = np.all(k == 0, axis=-1)
        return np.where(zero, 0.0, m)

    def order_grid(self, N: int) -> np.ndarray:
        """m on the N lattice; x-dependent orders are sampled on the WEIGHT_GRID base grid."""
        ks = np.stack(lattice(N, 2), axis=-1)
        if not self.x_dependent:
            return self.order(ks)
        x = np.stack(grid_points(WEIGHT_GRID, 2), axis=-1).reshape(-1, 2)
        k = np.broadcast_to(ks.reshape(1, -1, 2), (x.shape[0], N * N, 2))
        return self.order_at(x, k).reshape(WEIGHT_GRID, WEIGHT_GRID, N, N)

    def _symbol(self, N: int, multiplier: np.ndarray, m_order: float, label: str) -> SymbolGrid:
        """
        Separable symbol from samples multiplier(x_p, k): one term per base
        Fourier mode of the WEIGHT_GRID sampling, Nyquist modes dropped.
        """
        if multiplier.ndim == 2:
            return SymbolGrid([SymbolTerm(constant_field(1.0, N, 2), multiplier, label)], m_order)
        g = WEIGHT_GRID
        coeffs = sfft.fft2(multiplier, axes=(0, 1)) / float(g * g)
        j = sfft.fftfreq(g, 1.0 / g).astype(int)
        scale = float(np.max(np.abs(coeffs)))
        terms = []
        for a in range(g):
            for b in range(g):
                if j[a] == -g // 2 or j[b] == -g // 2:
                    continue
                c = coeffs[a, b]
                if np.max(np.abs(c)) <= SYMBOL_DROP * scale:
                    continue
                mode = constant_field(1.0, N, 2) if j[a] == j[b] == 0 else single_mode(N, (int(j[a]), int(j[b])))
                terms.append(SymbolTerm(mode, c, f"{label} x-mode {j[a]},{j[b]}"))
        return SymbolGrid(terms, m_order)

    def as_symbols(self, N: int) -> tuple:
        """(m, G = m log<k>) as SymbolGrids on an N grid."""
        m = self.order_grid(N)
        G = m * np.log(japanese_bracket(N, 2))
        return (self._symbol(N, m, 0.0, "escape order"),
                self._symbol(N, G, max(abs(self.u), self.s), "escape log weight"))

    def weight_symbol(self, N: int) -> SymbolGrid:
        """E = <k>^(-m(x,k)) as a SymbolGrid on an N grid."""
        E = np.exp(-self.order_grid(N) * np.log(japanese_bracket(N, 2)))
        return self._symbol(N, E, max(abs(self.u), self.s), "escape weight")

    @property
    def min_truncation(self) -> int:
        """Smallest grid whose lattice resolves the aperture at radius N/2."""
        return int(math.ceil(2.0 / self.aperture))

    def to_dict(self) -> dict:
        return {"u": self.u, "s": self.s, "aperture_deg": math.degrees(self.aperture),
                "average_T": self.average_T, "certificate": self.certificate,
                "x_dependent": self.x_dependent}


def _monotonicity(sys: AnosovSystem, w: EscapeWeight, rng: Optional[np.random.Generator] = None) -> tuple:
    """Max of m(f x, Df(x)^-T k) - m(x, k) over sampled points and directions, and the worst sample."""
    x = sample_points(CERTIFICATE_POINTS, rng)
    angles = (np.arange(CERTIFICATE_ANGLES) + 0.5) * np.pi / CERTIFICATE_ANGLES
    k = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    dual = np.linalg.inv(sys.jacobian(x)).transpose(0, 2, 1)
    moved = np.einsum("pij,aj->pai", dual, k)
    here = np.broadcast_to(k, moved.shape)
    gain = w.order_at(sys.forward(x), moved) - w.order_at(x, here)
    p, a = np.unravel_index(int(np.argmax(gain)), gain.shape)
    worst = {"x": x[p].tolist(), "k": k[a].tolist(), "gain": float(gain[p, a])}
    return float(gain.max()), worst


def build_escape_weight(sys: AnosovSystem, u: float = -1.0, s: float = 1.0,
                        aperture: float = math.radians(15.0), output_manager=None,
                        average_T: Optional[int] = None,
                        rng: Optional[np.random.Generator] = None) -> EscapeWeight:
    """
    Angular escape order between the E_u* and E_s* lines of the linear part,
    certified non-increasing along the cotangent dynamics; falls back to
    (T - t) averaging for T = 1, 2, 4, 8, 16 when the plain weight fails.
    A fixed average_T skips the search and certifies that time only.
    """
    if not u < 0 < s:
        raise ConfigurationError(f"escape weight needs u < 0 < s, got u={u}, s={s}")
    if average_T is not None and average_T < 0:
        raise ConfigurationError(f"average_T must be non-negative, got {average_T}")
    if math.isfinite(sys.r_pert) and not s + abs(u) < sys.r_pert - 1:
        raise PreconditionError(
            f"s + |u| = {s + abs(u):g} must be below r - 1 = {sys.r_pert - 1:g} for this system",
            location={"u": u, "s": s, "r": sys.r_pert},
        )
    split = sys.linear_splitting()
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    theta_u = float(_line_angle(rot @ split.e_u))
    theta_s = float(_line_angle(rot @ split.e_s))
    arc = (theta_s - theta_u) % np.pi
    if min(arc, np.pi - arc) <= 2 * aperture:
        raise ConfigurationError(
            f"aperture {math.degrees(aperture):.1f} deg is too wide for dual lines "
            f"{math.degrees(min(arc, np.pi - arc)):.1f} deg apart"
        )
    cotangent = np.linalg.inv(sys.linear_matrix.astype(float)).T
    weight = EscapeWeight(u, s, aperture, theta_u, theta_s, cotangent, system=sys)
    times = (0,) + AVERAGING_TIMES if average_T is None else (int(average_T),)
    for T in times:
        weight.average_T = T
        value, worst = _monotonicity(sys, weight, rng)
        weight.history.append(value)
        if output_manager:
            output_manager.print_iteration("escape weight averaging", T, value)
        if value <= MONOTONICITY_TOL:
            weight.certificate = value
            return weight
    raise ConvergenceError(
        f"escape weight not monotone after averaging up to T={times[-1]}",
        history=weight.history, worst_sample=worst,
    )


# ---------------------------------------------------------------------------
# Weighted transfer matrices
# ---------------------------------------------------------------------------

def truncation_basis(N: int) -> np.ndarray:
    """Modes |k| < N/2 ordered 0, k1, -k1, k2, -k2, ... (pairs by +-k)."""
    half = N // 2
    r = np.arange(-half + 1, half)
    k0, k1 = np.meshgrid(r, r, indexing="ij")
    ks = np.stack([k0.ravel(), k1.ravel()], axis=-1)
    ks = ks[(ks ** 2).sum(axis=1) < half * half]
    positive = ks[(ks[:, 0] > 0) | ((ks[:, 0] == 0) & (ks[:, 1] > 0))]
    positive = positive[np.lexsort((positive[:, 1], positive[:, 0], (positive ** 2).sum(axis=1)))]
    out = [np.zeros(2, dtype=np.int64)]
    for k in positive:
        out.extend([k, -k])
    return np.array(out, dtype=np.int64)


def _real_basis_transform(n: int) -> np.ndarray:
    """Unitary U with columns e_0, cos and sin combinations of the (k, -k) pairs."""
    U = np.zeros((n, n), dtype=complex)
    U[0, 0] = 1.0
    c = 1.0 / math.sqrt(2.0)
    for i in range(1, n, 2):
        U[i, i], U[i + 1, i] = c, c
        U[i, i + 1], U[i + 1, i + 1] = -1j * c, 1j * c
    return U


@dataclass
class GeneratorMatrix:
    """Weighted, truncated transfer matrix and how it was built."""
    matrix: np.ndarray
    basis: np.ndarray
    N: int
    backend: str
    weight: dict
    real_basis: bool
    roof: float = 1.0


def _columns(eV: np.ndarray, y: np.ndarray, M: int, ks: np.ndarray, rows: tuple) -> np.ndarray:
    phase = np.exp(2j * np.pi * (y @ ks.T.astype(float)))
    vals = (eV[:, None] * phase).reshape(M, M, -1)
    coeffs = sfft.fft2(vals, axes=(0, 1)) / float(M * M)
    return coeffs[rows[0], rows[1], :]


def _weight_columns(E: SymbolGrid, ks: np.ndarray, rows: tuple) -> np.ndarray:
    G = E.N
    xs = np.stack(grid_points(G, 2), axis=-1).reshape(-1, 2)
    modes = np.exp(2j * np.pi * (xs @ ks.T.astype(float))).reshape(G, G, -1)
    coeffs = quantize(E, PeriodicField(modes, 2)).coefficients()
    return coeffs[rows[0], rows[1], :]


def weight_matrix(w: EscapeWeight, N: int, jobs: int = 1) -> np.ndarray:
    """
    Op(<k>^-m(x,k)) restricted to the modes |k| < N/2, quantized on a 2N
    grid so the shifts k + j of the base Fourier modes do not alias.
    """
    ks = truncation_basis(N)
    G = 2 * N
    E = w.weight_symbol(G)
    rows = (np.mod(ks[:, 0], G), np.mod(ks[:, 1], G))
    chunks = [ks[i:i + COLUMN_CHUNK] for i in range(0, len(ks), COLUMN_CHUNK)]
    parts = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(_weight_columns)(E, chunk, rows) for chunk in chunks
    )
    return np.concatenate(parts, axis=1)


def weighted_generator(sys: AnosovSystem, V: Optional[PeriodicField], w: EscapeWeight, N: int,
                       backend: str = "map", jobs: int = 1) -> GeneratorMatrix:
    """
    Matrix of E^-1 L E on the modes |k| < N/2, where L u = exp(W) u o f^-1
    with W = V (map backend) or roof * V (flow backend, constant roof).
    """
    if backend not in ("map", "flow"):
        raise ConfigurationError(f"unknown backend '{backend}'")
    if not is_power_of_two(int(N)):
        raise ConfigurationError(f"truncation N must be a power of two, got {N}")
    if N < w.min_truncation:
        raise ResolutionError(
            f"truncation N={N} cannot resolve a {math.degrees(w.aperture):.1f} deg cone",
            required_n=w.min_truncation,
        )
    roof = 1.0
    if backend == "flow":
        if sys.kind != SystemKind.SUSPENSION:
            raise ConfigurationError("the flow backend needs a suspension with a constant roof")
        roof = float(sys.roof)
    M = OVERSAMPLING * N
    V = V if V is not None else PeriodicField(np.zeros((M, M)), 2)
    if V.domain_dim != 2 or V.value_shape:
        raise ConfigurationError("potential must be a scalar field on T^2")
    W = resample(V, M)
    real = W.is_real
    eV = np.exp(roof * W.values).reshape(-1)
    xs = np.stack(grid_points(M, 2), axis=-1).reshape(-1, 2)
    y = sys.inverse(xs)
    ks = truncation_basis(N)
    rows = (np.mod(ks[:, 0], M), np.mod(ks[:, 1], M))
    chunks = [ks[i:i + COLUMN_CHUNK] for i in range(0, len(ks), COLUMN_CHUNK)]
    parts = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(_columns)(eV, y, M, chunk, rows) for chunk in chunks
    )
    P = np.concatenate(parts, axis=1)
    if w.x_dependent:
        E = weight_matrix(w, N, jobs)
        P = np.linalg.solve(E, P @ E)
    else:
        m = w.order(ks.astype(float))
        log_br = 0.5 * np.log1p((ks.astype(float) ** 2).sum(axis=1))
        scale = np.exp(m * log_br)       # <k>^m, E is diagonal
        P = scale[:, None] * P / scale[None, :]
    if real:
        U = _real_basis_transform(len(ks))
        P = (U.conj().T @ P @ U).real
    return GeneratorMatrix(P, ks, int(N), backend, w.to_dict(), real, roof)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass
class ResonanceReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    strip_re_min: float
    N: int = 0
    weight: dict = field(default_factory=dict)
    convention: str = "map"
    s1: float = float("nan")
    delta: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag), float(r)]
                            for z, r in zip(self.eigenvalues, self.residuals)],
            "weight": dict(self.weight),
            "N": self.N,
            "convention": self.convention,
            "s1": None if math.isnan(self.s1) else self.s1,
            "delta": None if math.isnan(self.delta) else self.delta,
            "strip_re_min": self.strip_re_min,
        }


def _sorted(values: np.ndarray, key_re: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.round(values.imag, 12), -np.round(key_re, 12)))
    return order


def compute_resonances(mat, strip_re_min: float = -math.inf, ell_max: int = 0) -> ResonanceReport:
    """
    Dense eigen-decomposition of a weighted transfer matrix (or any square
    array, read in the map convention). Map eigenvalues mu are kept when
    log|mu| > strip_re_min; for the flow backend the generator resonances
    (log mu + 2 pi i l) / roof, |l| <= ell_max, are kept when Re > strip_re_min.
    """
    if isinstance(mat, GeneratorMatrix):
        P, N, weight, backend, roof = mat.matrix, mat.N, mat.weight, mat.backend, mat.roof
    else:
        P, N, weight, backend, roof = np.asarray(mat), 0, {}, "map", 1.0
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ConfigurationError(f"resonance matrix must be square, got shape {P.shape}")
    try:
        mu, vecs = scipy.linalg.eig(P)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    norms = np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(P @ vecs - vecs * mu[None, :], axis=0) / np.where(norms > 0, norms, 1.0)
    nonzero = np.abs(mu) > 0
    with np.errstate(divide="ignore"):
        rate = np.where(nonzero, np.log(np.abs(mu)), -np.inf)
    if backend == "map":
        keep = rate > strip_re_min
        values, res = mu[keep], residuals[keep]
        order = _sorted(values, np.abs(values))
        return ResonanceReport(values[order], res[order], strip_re_min, N, weight, "map")
    keep = nonzero & (rate / roof > strip_re_min)
    base = np.log(mu[keep].astype(complex)) / roof
    res = residuals[keep]
    shifts = 2j * np.pi * np.arange(-ell_max, ell_max + 1) / roof
    values = (base[:, None] + shifts[None, :]).reshape(-1)
    res = np.repeat(res, len(shifts))
    order = _sorted(values, values.real)
    return ResonanceReport(values[order], res[order], strip_re_min, N, weight, "generator")


def hausdorff_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return math.inf
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def truncation_sweep(sys: AnosovSystem, V: Optional[PeriodicField], w: EscapeWeight,
                     Ns: Sequence[int], strip_re_min: float, jobs: int = 1,
                     output_manager=None) -> list:
    """Resonances in the strip for each N, with the Hausdorff move from the previous N."""
    rows, previous = [], None
    for N in Ns:
        report = compute_resonances(weighted_generator(sys, V, w, N, jobs=jobs), strip_re_min)
        move = math.nan if previous is None else hausdorff_distance(previous, report.eigenvalues)
        if output_manager:
            output_manager.print_iteration("truncation sweep", N, move)
        rows.append({"N": int(N), "eigenvalues": report.eigenvalues, "move": move})
        previous = report.eigenvalues
    return rows


# ---------------------------------------------------------------------------
# Strip estimates
# ---------------------------------------------------------------------------

class StripEstimate(NamedTuple):
    s1: float
    delta: float
    birkhoff_change: float
    birkhoff_converged: bool
    divergence_term: float = 0.0
    weight_within_budget: Optional[bool] = None


def divergence_density(sys: AnosovSystem, points: np.ndarray) -> np.ndarray:
    """-1/2 log|det Df| per unit time at points; 0 for area-preserving maps."""
    det = np.abs(np.linalg.det(sys.jacobian(np.asarray(points, dtype=float))))
    return -0.5 * np.log(det) / sys.period


def _birkhoff_max(sys: AnosovSystem, density, seeds: np.ndarray, steps: int) -> np.ndarray:
    """Max over seeds of the Birkhoff averages of density after steps and 2 * steps iterates."""
    x = seeds.copy()
    total = np.zeros((2, x.shape[0]))
    for i in range(2 * steps):
        total[0 if i < steps else 1] += density(x)
        x = sys.forward(x)
    return np.array([total[0].max() / steps, (total[0] + total[1]).max() / (2 * steps)])


def s1_and_delta(sys: AnosovSystem, V: Optional[PeriodicField], r: float, w: Optional[EscapeWeight],
                 rates: RateReport, T: float = 64.0, samples: int = ORBIT_SEEDS,
                 rng: Optional[np.random.Generator] = None) -> StripEstimate:
    """
    s1 = max over sampled orbits of the Birkhoff average of Re V - 1/2 div,
    the divergence taken as log|det Df| per unit time; delta =
    (r - 1) lambda_u lambda_s / (lambda_u + lambda_s) with lambda = nu_min.
    """
    if not rates.converged:
        raise PreconditionError("rates did not converge; strip estimate refused",
                                location={"relative_change": rates.relative_change})
    budget = None if w is None else bool(w.s + abs(w.u) < r - 1)
    lam_u, lam_s = rates.nu_u_min, rates.nu_s_min
    delta = (r - 1.0) * lam_u * lam_s / (lam_u + lam_s)
    steps = max(1, int(round(T / sys.period)))
    seeds = sample_points(samples, rng)
    _, divergence = _birkhoff_max(sys, partial(divergence_density, sys), seeds, steps)

    def density(x: np.ndarray) -> np.ndarray:
        value = divergence_density(sys, x)
        return value if V is None else value + fourier_interpolate(V, x).real

    first, second = _birkhoff_max(sys, density, seeds, steps)
    change = abs(second - first)
    return StripEstimate(float(second), float(delta), float(change), bool(change <= BIRKHOFF_TOL),
                         float(divergence), budget)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

def synthesize_potential(N: int, r_v: float, amplitude: float, rng: np.random.Generator) -> PeriodicField:
    """Real random-phase potential of Holder regularity just above r_v, sup norm = amplitude."""
    field_ = synthesize_field(N, 2, r_v + POTENTIAL_DECAY_OFFSET, rng, real=True)
    return field_.scale(amplitude / sup_norm(field_))


def conjugate_by_potential(sys: AnosovSystem, V: PeriodicField, b: PeriodicField, n_out: int) -> PeriodicField:
    """V + b o f^-1 - b on an n_out grid; its transfer operator is exp(-b) L_V exp(b)."""
    xs = np.stack(grid_points(n_out, 2), axis=-1).reshape(-1, 2)
    pulled = fourier_interpolate(b, sys.inverse(xs)).reshape(n_out, n_out)
    out = resample(V, n_out).values + pulled - resample(b, n_out).values
    if V.is_real and b.is_real:
        out = out.real
    return PeriodicField(out, 2)
