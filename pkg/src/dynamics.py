"""
Dynamics - Anosov test systems on T^2 and their constant-roof suspensions.

Every map is f = A o g2 o g1 with A a hyperbolic integer matrix and two
area-preserving shears built from a T^1 perturbation p = (p1, p2):
    g1(x) = (x1 + p1(x2), x2)
    g2(y) = (y1, y2 + p2(y1))
so det Df = det A everywhere and f^-1 has the closed form
g1^-1 o g2^-1 o A^-1. The suspension with constant roof lives on
T^2 x [0, roof] with (x, roof) glued to (f(x), 0).

Classes:
    SystemKind: map_on_T2 or suspension
    AnosovSystem: immutable system with orbit and Jacobian evaluators
    RateReport: expansion and contraction rates from orbit sampling
    FramePair: smooth approximations (H, V) of the unstable and stable directions
    RiccatiCoefficients: frame data of the time-one map and its generator
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.stats import qmc

try:
    from .common import CHUNK_SIZE, make_rng
    from .error_manager import ConfigurationError, PreconditionError, ResolutionError
    from .spectral_core import (
        PeriodicField, fourier_interpolate, fourier_shift, grid_points, holder_norm, low_pass,
    )
except ImportError:
    from common import CHUNK_SIZE, make_rng
    from error_manager import ConfigurationError, PreconditionError, ResolutionError
    from spectral_core import (
        PeriodicField, fourier_interpolate, fourier_shift, grid_points, holder_norm, low_pass,
    )


# Orbit sampling and cone verification
ORBIT_SEEDS = 256
CONE_CHECK_STEPS = 40
CONE_SLOPE = 1.0            # cone |b| <= CONE_SLOPE |a| in linear eigen-coordinates
DIRECTION_BURN_IN = 20
RATE_CONVERGENCE = 0.01
FRAME_DEGENERACY = 1e-3
DERIVATIVE_STEP = 1e-3
DECAY_OFFSET = 1.05         # perturbation coefficients decay like k^-(r_pert + DECAY_OFFSET)


class SystemKind(Enum):
    MAP_ON_T2 = "map_on_T2"
    SUSPENSION = "suspension"


@dataclass(frozen=True)
class LinearSplitting:
    """Eigen-data of the linear part; e_u and e_s are unit vectors."""
    lambda_u: float
    lambda_s: float
    e_u: np.ndarray
    e_s: np.ndarray

    @property
    def log_rate(self) -> float:
        return math.log(abs(self.lambda_u))


def _inv2(J: np.ndarray) -> np.ndarray:
    """Batched inverse of 2x2 matrices on the last two axes."""
    a, b = J[..., 0, 0], J[..., 0, 1]
    c, d = J[..., 1, 0], J[..., 1, 1]
    det = a * d - b * c
    out = np.empty_like(J)
    out[..., 0, 0] = d / det
    out[..., 0, 1] = -b / det
    out[..., 1, 0] = -c / det
    out[..., 1, 1] = a / det
    return out


def _normalize(v: np.ndarray) -> tuple:
    norms = np.linalg.norm(v, axis=-1)
    return v / norms[..., None], norms


@dataclass(frozen=True, eq=False)
class AnosovSystem:
    """
    A perturbed hyperbolic toral automorphism, optionally suspended.

    `inverted` systems evaluate f^-1 as their forward map; they share the
    perturbation of the system they invert.
    """
    kind: SystemKind
    A: np.ndarray
    perturbation: Optional[PeriodicField] = None
    r_pert: float = math.inf
    roof: Optional[float] = None
    manifest: dict = field(default_factory=dict)
    inverted: bool = False
    _modes: np.ndarray = field(init=False, repr=False)
    _coeffs: np.ndarray = field(init=False, repr=False)
    _A_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.int64)
        object.__setattr__(self, "A", A)
        det = int(round(np.linalg.det(A)))
        adj = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=np.int64)
        object.__setattr__(self, "_A_inv", adj * det)
        if self.perturbation is None:
            modes, coeffs = np.zeros(0, dtype=np.int64), np.zeros((0, 2), dtype=complex)
        else:
            c = self.perturbation.coefficients()
            mask = np.any(np.abs(c) > 1e-15 * max(float(np.max(np.abs(c))), 1e-300), axis=1)
            k = sfft.fftfreq(self.perturbation.N, 1.0 / self.perturbation.N).astype(np.int64)
            modes, coeffs = k[mask], c[mask]
        object.__setattr__(self, "_modes", modes)
        object.__setattr__(self, "_coeffs", coeffs)

    # -- basic properties ------------------------------------------------

    @property
    def period(self) -> float:
        """Flow time of one map iterate (1 for maps)."""
        return float(self.roof) if self.kind == SystemKind.SUSPENSION else 1.0

    @property
    def is_linear(self) -> bool:
        return self._modes.size == 0

    @property
    def linear_matrix(self) -> np.ndarray:
        return self._A_inv if self.inverted else self.A

    @property
    def volume_preserving(self) -> bool:
        return abs(round(np.linalg.det(self.A))) == 1

    def linear_splitting(self) -> LinearSplitting:
        vals, vecs = np.linalg.eig(self.linear_matrix.astype(float))
        order = np.argsort(-np.abs(vals))
        vals, vecs = vals[order].real, vecs[:, order].real
        e_u = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
        e_s = vecs[:, 1] / np.linalg.norm(vecs[:, 1])
        e_u = e_u if e_u[0] > 0 or (e_u[0] == 0 and e_u[1] > 0) else -e_u
        e_s = e_s if e_s[1] > 0 or (e_s[1] == 0 and e_s[0] > 0) else -e_s
        return LinearSplitting(float(vals[0]), float(vals[1]), e_u, e_s)

    def inverse_system(self) -> "AnosovSystem":
        return AnosovSystem(self.kind, self.A, self.perturbation, self.r_pert, self.roof,
                            dict(self.manifest), not self.inverted)

    # -- shears ------------------------------------------------------------

    def shear(self, y: np.ndarray, component: int) -> tuple:
        """(p_c(y), p_c'(y)) for the perturbation component c."""
        y = np.asarray(y, dtype=float)
        if self.is_linear:
            return np.zeros_like(y), np.zeros_like(y)
        flat = y.reshape(-1)
        val = np.empty(flat.size)
        der = np.empty(flat.size)
        c = self._coeffs[:, component]
        for start in range(0, flat.size, CHUNK_SIZE):
            E = np.exp(2j * np.pi * np.outer(flat[start:start + CHUNK_SIZE], self._modes))
            val[start:start + CHUNK_SIZE] = (E @ c).real
            der[start:start + CHUNK_SIZE] = (E @ (2j * np.pi * self._modes * c)).real
        return val.reshape(y.shape), der.reshape(y.shape)

    # -- base map ------------------------------------------------------------

    def _base_forward(self, x: np.ndarray) -> np.ndarray:
        p1, _ = self.shear(x[..., 1], 0)
        y1 = x[..., 0] + p1
        p2, _ = self.shear(y1, 1)
        z = np.stack([y1, x[..., 1] + p2], axis=-1)
        return np.mod(z @ self.A.T.astype(float), 1.0)

    def _base_inverse(self, z: np.ndarray) -> np.ndarray:
        y = np.mod(z @ self._A_inv.T.astype(float), 1.0)
        p2, _ = self.shear(y[..., 0], 1)
        w2 = y[..., 1] - p2
        p1, _ = self.shear(w2, 0)
        return np.mod(np.stack([y[..., 0] - p1, w2], axis=-1), 1.0)

    def _base_jacobian(self, x: np.ndarray) -> np.ndarray:
        p1, a = self.shear(x[..., 1], 0)
        _, b = self.shear(x[..., 0] + p1, 1)
        shears = np.empty(x.shape[:-1] + (2, 2))
        shears[..., 0, 0] = 1.0
        shears[..., 0, 1] = a
        shears[..., 1, 0] = b
        shears[..., 1, 1] = a * b + 1.0
        return np.einsum("ij,...jk->...ik", self.A.astype(float), shears)

    # -- represented map -------------------------------------------------------

    def forward(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._base_inverse(points) if self.inverted else self._base_forward(points)

    def inverse(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._base_forward(points) if self.inverted else self._base_inverse(points)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """Df at points; shape points.shape[:-1] + (2, 2)."""
        points = np.asarray(points, dtype=float)
        if self.inverted:
            return _inv2(self._base_jacobian(self._base_inverse(points)))
        return self._base_jacobian(points)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def sample_points(samples: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Low-discrepancy seeds on T^2 (scrambled Halton)."""
    seed = None if rng is None else int(rng.integers(0, 2 ** 31 - 1))
    sampler = qmc.Halton(d=2, scramble=True, seed=0 if seed is None else seed)
    return sampler.random(samples)


def _validate_matrix(A: Sequence[Sequence[float]]) -> np.ndarray:
    arr = np.asarray(A, dtype=float)
    if arr.shape != (2, 2):
        raise ConfigurationError(f"matrix must be 2x2, got shape {arr.shape}")
    if not np.all(arr == np.round(arr)):
        raise ConfigurationError(f"matrix must have integer entries, got {arr.tolist()}")
    A_int = np.round(arr).astype(np.int64)
    det = int(round(np.linalg.det(A_int)))
    trace = int(np.trace(A_int))
    if abs(det) != 1:
        raise PreconditionError(f"|det A| must be 1, got {det}", location={"matrix": A_int.tolist()})
    if abs(trace) <= 2:
        raise PreconditionError(f"A is not hyperbolic: |trace| = {abs(trace)} <= 2",
                                location={"matrix": A_int.tolist()})
    return A_int


def verify_cone_condition(sys: AnosovSystem, samples: int = ORBIT_SEEDS,
                          steps: int = CONE_CHECK_STEPS, rng: Optional[np.random.Generator] = None) -> int:
    """
    Check that Df maps the unstable cone into itself and Df^-1 the stable one
    along sampled orbits. Returns the number of points checked.
    """
    split = sys.linear_splitting()
    P = np.column_stack([split.e_u, split.e_s])
    P_inv = np.linalg.inv(P)
    Q = np.column_stack([split.e_s, split.e_u])
    Q_inv = np.linalg.inv(Q)
    x = sample_points(samples, rng)
    checked = 0
    for step in range(steps):
        for label, jac, basis, basis_inv in (
            ("unstable", sys.jacobian(x), P, P_inv),
            ("stable", _inv2(sys.jacobian(sys.inverse(x))), Q, Q_inv),
        ):
            B = np.einsum("ij,njk,kl->nil", basis_inv, jac, basis)
            ok = np.ones(x.shape[0], dtype=bool)
            signs = []
            for sgn in (1.0, -1.0):
                a = B[:, 0, 0] + sgn * CONE_SLOPE * B[:, 0, 1]
                b = B[:, 1, 0] + sgn * CONE_SLOPE * B[:, 1, 1]
                ok &= np.abs(b) <= CONE_SLOPE * np.abs(a)
                signs.append(np.sign(a))
            ok &= signs[0] == signs[1]
            if not np.all(ok):
                bad = int(np.argmin(ok))
                raise PreconditionError(
                    f"{label} cone not preserved at orbit step {step}, x={x[bad].tolist()}",
                    location={"x": x[bad].tolist(), "step": step, "cone": label},
                )
        checked += x.shape[0]
        x = sys.forward(x)
    return checked


def make_system(A: Sequence[Sequence[float]], perturbation: Optional[PeriodicField] = None,
                r_pert: float = math.inf, roof: Optional[float] = None,
                manifest: Optional[dict] = None, check_cone: bool = True) -> AnosovSystem:
    """
    Validate and build an AnosovSystem (a suspension when roof is given).
    """
    A_int = _validate_matrix(A)
    if perturbation is not None:
        if perturbation.domain_dim != 1 or perturbation.value_shape != (2,):
            raise ConfigurationError("perturbation must be a T^1 field with two components")
        if not perturbation.is_real:
            raise ConfigurationError("perturbation must be real")
    if roof is not None and not roof > 0:
        raise ConfigurationError(f"roof must be positive, got {roof}")
    kind = SystemKind.SUSPENSION if roof is not None else SystemKind.MAP_ON_T2
    sys = AnosovSystem(kind, A_int, perturbation, float(r_pert), None if roof is None else float(roof),
                       dict(manifest or {}))
    if check_cone and not sys.is_linear:
        verify_cone_condition(sys)
    return sys


def single_mode_perturbation(amplitude: float, mode: int = 1, N: int = 64) -> PeriodicField:
    """p1 = p2 = amplitude/(2 pi mode) sin(2 pi mode y); sup |p'| = amplitude."""
    y = np.arange(N) / N
    p = amplitude / (2 * np.pi * mode) * np.sin(2 * np.pi * mode * y)
    return PeriodicField(np.stack([p, p], axis=-1), 1)


def synthesize_perturbation(amplitude: float, r_pert: float, modes: int,
                            rng: np.random.Generator, N: Optional[int] = None) -> PeriodicField:
    """
    Random-phase shears with coefficients decaying like k^-(r_pert + 1.05),
    scaled so that sum 2 pi k |c_k| = amplitude for each component.
    """
    if modes < 1:
        raise ConfigurationError("perturbation needs at least one mode")
    N = N or max(64, 1 << int(math.ceil(math.log2(4 * modes))))
    k = np.arange(1, modes + 1)
    envelope = np.exp(-k.astype(float)) if math.isinf(r_pert) else k ** -(r_pert + DECAY_OFFSET)
    y = np.arange(N) / N
    comps = []
    for _ in range(2):
        phases = 2 * np.pi * rng.random(modes)
        scale = amplitude / (2 * np.pi * np.sum(k * envelope))
        comps.append(np.sum(scale * envelope[:, None] * np.sin(2 * np.pi * np.outer(k, y) + phases[:, None]),
                            axis=0))
    return PeriodicField(np.stack(comps, axis=-1), 1)


def system_from_manifest(manifest: dict, check_cone: bool = True) -> AnosovSystem:
    """
    Build a system from {matrix, roof?, perturbation_file? | synth?}.

    synth = {kind: random|single_mode, modes, amplitude, r_pert, seed}.
    """
    known = {"matrix", "roof", "perturbation_file", "r_pert", "synth"}
    unknown = set(manifest) - known
    if unknown:
        raise ConfigurationError(f"unknown system keys: {sorted(unknown)}")
    if "matrix" not in manifest:
        raise ConfigurationError("system manifest needs a matrix")
    if "perturbation_file" in manifest and "synth" in manifest:
        raise ConfigurationError("give either perturbation_file or synth, not both")
    perturbation, r_pert = None, math.inf
    if "perturbation_file" in manifest:
        try:
            from .artifact_io import read_pfld
        except ImportError:
            from artifact_io import read_pfld
        perturbation = read_pfld(manifest["perturbation_file"])
        r_pert = float(manifest.get("r_pert", math.inf))
    elif manifest.get("synth"):
        synth = dict(manifest["synth"])
        allowed = {"kind", "modes", "amplitude", "r_pert", "seed", "mode"}
        if set(synth) - allowed:
            raise ConfigurationError(f"unknown synth keys: {sorted(set(synth) - allowed)}")
        kind = synth.get("kind", "random")
        amplitude = float(synth.get("amplitude", 0.0))
        if kind == "single_mode":
            perturbation = single_mode_perturbation(amplitude, int(synth.get("mode", 1)))
        elif kind == "random":
            r_pert = float(synth.get("r_pert", math.inf))
            perturbation = synthesize_perturbation(amplitude, r_pert, int(synth.get("modes", 16)),
                                                   make_rng(synth.get("seed")))
        else:
            raise ConfigurationError(f"unknown synth kind '{kind}'")
        if amplitude == 0.0:
            perturbation = None
    return make_system(manifest["matrix"], perturbation, r_pert, manifest.get("roof"),
                       manifest, check_cone)


# ---------------------------------------------------------------------------
# Orbits and Jacobians
# ---------------------------------------------------------------------------

def flow_point(sys: AnosovSystem, x: Sequence[float], tau: float, t: float) -> tuple:
    """phi_t(x, tau) on the mapping torus (x, roof) ~ (f(x), 0)."""
    roof = sys.period
    total = tau + t
    m = int(math.floor(total / roof))
    p = np.asarray(x, dtype=float)[None, :]
    step = sys.forward if m >= 0 else sys.inverse
    for _ in range(abs(m)):
        p = step(p)
    return p[0], total - m * roof


def jacobian_cocycle(sys: AnosovSystem, x: Sequence[float], n_or_t: float, tau: float = 0.0) -> np.ndarray:
    """
    Df^n(x) for maps (negative n through the inverse); for suspensions the
    3x3 dphi_t at (x, tau) with the flow direction as the last coordinate.
    """
    if sys.kind == SystemKind.SUSPENSION:
        n = int(math.floor((tau + n_or_t) / sys.period))
    else:
        n = int(n_or_t)
        if n != n_or_t:
            raise ConfigurationError("map cocycles need an integer time")
    p = np.asarray(x, dtype=float)[None, :]
    D = np.eye(2)
    for _ in range(abs(n)):
        if n > 0:
            D = sys.jacobian(p)[0] @ D
            p = sys.forward(p)
        else:
            q = sys.inverse(p)
            D = _inv2(sys.jacobian(q))[0] @ D
            p = q
    if sys.kind == SystemKind.SUSPENSION:
        full = np.eye(3)
        full[:2, :2] = D
        return full
    return D


def _shift_axis(values: np.ndarray, axis: int, shifts: np.ndarray) -> np.ndarray:
    """Shift each line along `axis` by shifts[index on the other grid axis]."""
    N = values.shape[axis]
    k = sfft.fftfreq(N, 1.0 / N)
    coeffs = sfft.fft(values, axis=axis)
    if axis == 0:
        phase = np.exp(2j * np.pi * np.outer(k, shifts))
    else:
        phase = np.exp(2j * np.pi * np.outer(shifts, k))
    phase = phase.reshape(phase.shape + (1,) * (values.ndim - 2))
    return sfft.ifft(coeffs * phase, axis=axis)


def _permute(values: np.ndarray, M: np.ndarray) -> np.ndarray:
    """values at M z (mod 1) for grid points z; exact for integer M."""
    N = values.shape[0]
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    src = np.mod(np.einsum("ab,bij->aij", M, np.stack([i, j])), N)
    return values[src[0], src[1]]


def pullback(sys: AnosovSystem, u: PeriodicField) -> PeriodicField:
    """
    u o f^-1 sampled on the grid of u, by per-line Fourier shifts for the
    shears and an exact grid permutation for the linear part.
    """
    if u.domain_dim != 2:
        raise ConfigurationError("pullback acts on fields over T^2")
    N = u.N
    y = np.arange(N) / N
    values = u.values.astype(complex)
    if not sys.inverted:
        if not sys.is_linear:
            values = _shift_axis(values, 0, -sys.shear(y, 0)[0])
            values = _shift_axis(values, 1, -sys.shear(y, 1)[0])
        values = _permute(values, sys._A_inv)
    else:
        values = _permute(values, sys.A)
        if not sys.is_linear:
            values = _shift_axis(values, 1, sys.shear(y, 1)[0])
            values = _shift_axis(values, 0, sys.shear(y, 0)[0])
    return u.with_values(values.real if u.is_real else values)


# ---------------------------------------------------------------------------
# Direction fields and rates
# ---------------------------------------------------------------------------

def unstable_directions(sys: AnosovSystem, points: np.ndarray, burn: int = DIRECTION_BURN_IN) -> np.ndarray:
    """Unit E_u vectors at points, pushed forward along stored backward orbits."""
    split = sys.linear_splitting()
    orbit = [np.asarray(points, dtype=float)]
    for _ in range(burn):
        orbit.append(sys.inverse(orbit[-1]))
    v = np.broadcast_to(split.e_u, orbit[0].shape).copy()
    for p in reversed(orbit[1:]):
        v, _ = _normalize(np.einsum("...ij,...j->...i", sys.jacobian(p), v))
    return v * np.sign(v @ split.e_u)[..., None]


def stable_directions(sys: AnosovSystem, points: np.ndarray, burn: int = DIRECTION_BURN_IN) -> np.ndarray:
    """Unit E_s vectors at points, pulled back along stored forward orbits."""
    split = sys.linear_splitting()
    orbit = [np.asarray(points, dtype=float)]
    for _ in range(burn):
        orbit.append(sys.forward(orbit[-1]))
    v = np.broadcast_to(split.e_s, orbit[0].shape).copy()
    for p in reversed(orbit[:-1]):
        v, _ = _normalize(np.einsum("...ij,...j->...i", _inv2(sys.jacobian(p)), v))
    return v * np.sign(v @ split.e_s)[..., None]


def direction_field(sys: AnosovSystem, N: int, which: str = "unstable") -> PeriodicField:
    pts = np.stack(grid_points(N, 2), axis=-1).reshape(-1, 2)
    fn = unstable_directions if which == "unstable" else stable_directions
    return PeriodicField(fn(sys, pts).reshape(N, N, 2), 2)


@dataclass
class RateReport:
    """Uniform expansion/contraction rates per unit time."""
    nu_u_min: float
    nu_u_max: float
    nu_s_min: float
    nu_s_max: float
    lambda_u: float = float("nan")
    lambda_s: float = float("nan")
    mean_u: float = float("nan")
    mean_s: float = float("nan")
    T_used: float = 0.0
    sample_count: int = 0
    relative_change: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if math.isnan(self.lambda_u):
            self.lambda_u = self.nu_u_min
        if math.isnan(self.lambda_s):
            self.lambda_s = self.nu_s_min

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def orbit_integrals(sys: AnosovSystem, seeds: np.ndarray, steps: int,
                    burn: int = DIRECTION_BURN_IN) -> tuple:
    """
    Cumulative log expansion along E_u and log contraction along E_s over the
    same forward orbits, shape (seeds, steps) each.

    The unstable direction is aligned by `burn` forward steps before the
    orbit starts; the stable one is pulled back from `burn` steps past its end.
    """
    split = sys.linear_splitting()
    x = np.asarray(seeds, dtype=float).copy()
    v = np.broadcast_to(split.e_u, x.shape).copy()
    for _ in range(burn):
        v, _ = _normalize(np.einsum("nij,nj->ni", sys.jacobian(x), v))
        x = sys.forward(x)
    orbit = [x]
    for _ in range(steps + burn):
        orbit.append(sys.forward(orbit[-1]))
    grow_u = np.empty((x.shape[0], steps))
    for i in range(steps):
        v, norms = _normalize(np.einsum("nij,nj->ni", sys.jacobian(orbit[i]), v))
        grow_u[:, i] = np.log(norms)
    w = np.broadcast_to(split.e_s, x.shape).copy()
    grow_s = np.empty((x.shape[0], steps))
    for i in range(steps + burn - 1, -1, -1):
        w, norms = _normalize(np.einsum("nij,nj->ni", _inv2(sys.jacobian(orbit[i])), w))
        if i < steps:
            grow_s[:, i] = np.log(norms)
    return np.cumsum(grow_u, axis=1), np.cumsum(grow_s, axis=1)


def lyapunov_rates(sys: AnosovSystem, T: float = 64.0, samples: int = ORBIT_SEEDS,
                   rng: Optional[np.random.Generator] = None, burn: int = DIRECTION_BURN_IN,
                   output_manager=None) -> RateReport:
    """
    Min/max over sampled orbits of the finite-time growth rates along E_u and
    E_s, per unit flow time; converged when doubling T moves each by <= 1%.
    """
    n = max(1, int(round(T / sys.period)))
    grow_u, grow_s = orbit_integrals(sys, sample_points(samples, rng), 2 * n, burn)
    rates = []
    for steps in (n, 2 * n):
        nu_u = grow_u[:, steps - 1] / (steps * sys.period)
        nu_s = grow_s[:, steps - 1] / (steps * sys.period)
        rates.append((nu_u.min(), nu_u.max(), nu_s.min(), nu_s.max(), nu_u.mean(), nu_s.mean()))
    first, second = np.array(rates[0][:4]), np.array(rates[1][:4])
    change = float(np.max(np.abs(second - first) / np.abs(first)))
    if output_manager:
        output_manager.print_iteration("rate change T->2T", n, change)
    u_min, u_max, s_min, s_max, u_mean, s_mean = (float(v) for v in rates[0])
    return RateReport(u_min, u_max, s_min, s_max, mean_u=u_mean, mean_s=s_mean,
                      T_used=n * sys.period, sample_count=samples, relative_change=change,
                      converged=change <= RATE_CONVERGENCE)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

@dataclass
class FramePair:
    """Band-limited frames: H close to E_u, V close to E_s."""
    H: PeriodicField
    V: PeriodicField
    unstable_error: float = 0.0
    stable_error: float = 0.0
    stable_holder_error: float = 0.0
    cutoffs: tuple = (0, 0)
    label: str = "custom"
    constant: bool = False

    @property
    def N(self) -> int:
        return self.H.N

    def transversality(self) -> float:
        """min |det[H V]| / (|H| |V|) over the grid."""
        h, v = self.H.values, self.V.values
        det = h[..., 0] * v[..., 1] - h[..., 1] * v[..., 0]
        return float(np.min(np.abs(det) / (np.linalg.norm(h, axis=-1) * np.linalg.norm(v, axis=-1))))

    def at(self, points: np.ndarray) -> np.ndarray:
        """Frame matrices [H V] at arbitrary points, shape (m, 2, 2)."""
        m = points.shape[0]
        if self.constant:
            F = np.column_stack([self.H.values[(0, 0)], self.V.values[(0, 0)]])
            return np.broadcast_to(F, (m, 2, 2)).copy()
        out = np.empty((m, 2, 2))
        for col, fld in enumerate((self.H, self.V)):
            for row in range(2):
                out[:, row, col] = fourier_interpolate(fld.component(row), points)
        return out

    def on_grid(self) -> np.ndarray:
        return np.stack([self.H.values, self.V.values], axis=-1)

    def to_dict(self) -> dict:
        return {
            "label": self.label, "N": self.N,
            "unstable_error": self.unstable_error, "stable_error": self.stable_error,
            "stable_holder_error": self.stable_holder_error,
            "cutoffs": list(self.cutoffs), "transversality": self.transversality(),
        }


def constant_frames(h: Sequence[float], v: Sequence[float], N: int, label: str) -> FramePair:
    H = PeriodicField(np.broadcast_to(np.asarray(h, dtype=float), (N, N, 2)).copy(), 2)
    V = PeriodicField(np.broadcast_to(np.asarray(v, dtype=float), (N, N, 2)).copy(), 2)
    return FramePair(H, V, label=label, constant=True)


def axes_frames(N: int, swapped: bool = False) -> FramePair:
    if swapped:
        return constant_frames((0.0, 1.0), (1.0, 0.0), N, "axes_swapped")
    return constant_frames((1.0, 0.0), (0.0, 1.0), N, "axes")


def eigen_frames(sys: AnosovSystem, N: int) -> FramePair:
    split = sys.linear_splitting()
    return constant_frames(split.e_u, split.e_s, N, "eigen")


def _smooth_approximation(exact: PeriodicField, shifted_exact: np.ndarray, eps: float) -> tuple:
    """Lowest low-pass cutoff whose C0 error (grid and half-shifted grid) is below eps."""
    N = exact.N
    half = (0.5 / N, 0.5 / N)
    sweep = []
    cutoff = 2
    while cutoff <= 2 * N:
        approx = low_pass(exact, cutoff)
        err_grid = float(np.max(np.linalg.norm(exact.values - approx.values, axis=-1)))
        err_half = float(np.max(np.linalg.norm(shifted_exact - fourier_shift(approx, half).values, axis=-1)))
        err = max(err_grid, err_half)
        sweep.append((cutoff, err))
        if err < eps:
            return approx, err, cutoff, sweep
        cutoff *= 2
    (c_prev, e_prev), (c_last, e_last) = sweep[-2], sweep[-1]
    decay = math.log2(e_prev / e_last) if e_last > 0 and e_prev > e_last else 0.0
    if decay > 0:
        required = N * 2 ** int(math.ceil(math.log2(e_last / eps) / decay))
    else:
        required = 2 * N
    raise ResolutionError(
        f"frame error {e_last:.3e} exceeds eps={eps:.1e} at N={N}",
        required_n=int(required), sweep=sweep,
    )


def build_frames(sys: AnosovSystem, eps: float, N: int, output_manager=None) -> FramePair:
    """
    Band-limited frames within eps (C0) of the computed unstable and stable
    directions; the error is measured on the grid and on the half-shifted grid.
    """
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    pts = np.stack(grid_points(N, 2), axis=-1).reshape(-1, 2)
    shifted = np.mod(pts + 0.5 / N, 1.0)
    results = []
    for fn in (unstable_directions, stable_directions):
        exact = PeriodicField(fn(sys, pts).reshape(N, N, 2), 2)
        approx, err, cutoff, sweep = _smooth_approximation(exact, fn(sys, shifted).reshape(N, N, 2), eps)
        if output_manager:
            for c, e in sweep:
                output_manager.print_iteration(f"frame cutoff {fn.__name__}", c, e)
        results.append((exact, approx, err, cutoff))
    (_, H, err_u, cut_u), (exact_s, V, err_s, cut_s) = results
    holder = holder_norm(exact_s - V, 0.5)
    frames = FramePair(H, V, err_u, err_s, holder, (cut_u, cut_s), "smoothed", sys.is_linear)
    if frames.transversality() < FRAME_DEGENERACY:
        raise PreconditionError("smoothed frames are not transverse", location={"N": N})
    return frames


# ---------------------------------------------------------------------------
# Frame transfer matrices and Riccati coefficients
# ---------------------------------------------------------------------------

def transfer_matrices(sys: AnosovSystem, frames: FramePair, pulled: bool = False) -> np.ndarray:
    """
    M(x) = F(f x)^-1 Df(x) F(x) on the grid; with pulled=True evaluated at
    x = f^-1(z) for grid points z, which is what the graph transform needs.
    """
    N = frames.N
    grid = np.stack(grid_points(N, 2), axis=-1).reshape(-1, 2)
    F_grid = frames.on_grid().reshape(-1, 2, 2)
    if pulled:
        base = sys.inverse(grid)
        F_base, F_image = frames.at(base), F_grid
    else:
        base = grid
        F_base, F_image = F_grid, frames.at(sys.forward(grid))
    for F in (F_base, F_image):
        det = np.abs(np.linalg.det(F))
        if np.min(det) < FRAME_DEGENERACY:
            bad = int(np.argmin(det))
            raise PreconditionError("frame degeneracy: |det[H V]| below threshold",
                                    location={"x": grid[bad].tolist()})
    M = _inv2(F_image) @ sys.jacobian(base) @ F_base
    return M.reshape(N, N, 2, 2)


def frame_orientation(M: np.ndarray) -> np.ndarray:
    """-1 where the 2x2 matrices have negative trace, +1 elsewhere."""
    return np.where(np.trace(M, axis1=-2, axis2=-1) < 0, -1.0, 1.0)


def matrix_power_field(M: np.ndarray, s: float) -> np.ndarray:
    """M^s for a field of 2x2 matrices with real positive eigenvalues."""
    vals, vecs = np.linalg.eig(M)
    if np.max(np.abs(vals.imag)) > 1e-12 or np.min(vals.real) <= 0:
        raise PreconditionError("frame matrices need real positive eigenvalues for the suspension frames",
                                location={"min_eigenvalue": float(np.min(vals.real))})
    vals, vecs = vals.real, vecs.real
    scaled = vecs * (vals ** s)[..., None, :]
    return scaled @ np.linalg.inv(vecs)


@dataclass
class RiccatiCoefficients:
    """
    Time-one frame data M and its generator A_dot = d/dt P^(t/roof) at 0,
    with the scalar Riccati coefficients b, q, c of dr/dt = b r + q r^2 + c.

    P = sign * M is the orientation-corrected frame matrix: where M has two
    negative eigenvalues the suspension frames follow -M, which acts on
    slopes exactly as M does.
    """
    M: np.ndarray
    A_dot: np.ndarray
    b: PeriodicField
    q: PeriodicField
    c: PeriodicField
    roof: float
    frames: FramePair
    smallness: float
    gluing_defect: float
    sign: Optional[np.ndarray] = None

    @property
    def P(self) -> np.ndarray:
        if self.sign is None:
            return self.M
        return self.sign[..., None, None] * self.M

    def moebius(self) -> tuple:
        """(A1, A2, A3, A4) fields of the time-one map."""
        return self.M[..., 0, 0], self.M[..., 0, 1], self.M[..., 1, 0], self.M[..., 1, 1]

    def to_dict(self) -> dict:
        flipped = 0 if self.sign is None else int(np.sum(self.sign < 0))
        return {"roof": self.roof, "smallness": self.smallness, "gluing_defect": self.gluing_defect,
                "frames": self.frames.label, "flipped_points": flipped}


def riccati_coefficients(sys: AnosovSystem, frames: FramePair, h: float = DERIVATIVE_STEP) -> RiccatiCoefficients:
    """
    Frame data of the time-one map and, through the log-linear frames
    F(x, tau) = F(x) P(x)^(-tau/roof), the generator A_dot by a centered
    difference in t with one Richardson step. Orientation-reversing frame
    matrices (det M < 0) have no real log-linear path and are rejected.
    """
    roof = sys.period
    M = transfer_matrices(sys, frames)
    sign = frame_orientation(M)
    P = sign[..., None, None] * M

    def centered(step: float) -> np.ndarray:
        return (matrix_power_field(P, step / roof) - matrix_power_field(P, -step / roof)) / (2 * step)

    A_dot = (4 * centered(h / 2) - centered(h)) / 3
    gluing = float(np.max(np.abs(sign[..., None, None] * matrix_power_field(P, 1.0) - M)))
    b = PeriodicField(A_dot[..., 1, 1] - A_dot[..., 0, 0], 2)
    q = PeriodicField(-A_dot[..., 0, 1], 2)
    c = PeriodicField(A_dot[..., 1, 0], 2)
    smallness = float(np.max(np.abs(c.values)) + np.max(np.abs(q.values)))
    return RiccatiCoefficients(M, A_dot, b, q, c, roof, frames, smallness, gluing, sign)
