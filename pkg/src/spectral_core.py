"""
Spectral core - periodic-grid Fourier analysis for the paraspec toolbox.

Fields live on the uniform grid x_i = i/N of the unit torus T^n (n = 1, 2, 3).
Fourier coefficients use the normalization u_hat = fftn(u) / N^n, so a single
mode exp(2 pi i k.x) has u_hat(k) = 1 and the L2 norm is the root mean square
over the grid. The frequency variable is the integer lattice index k, with
<k> = (1 + |k|^2)^(1/2).

Littlewood-Paley blocks use a C-infinity profile built from the
exp(-1/(1-t^2)) mollifier in log2|k|, divided by its (everywhere positive)
total so that the blocks reconstruct the field exactly.

Key Features:
- PeriodicField container with grid validation
- Dyadic decomposition, partial sums S_k and reconstruction
- Sobolev norms and the Besov/Holder block-norm proxy
- Regularity-exponent estimation by dyadic regression (scipy.stats.linregress)
- Exact Fourier shifts and trigonometric interpolation at arbitrary points
- Synthetic test fields with prescribed decay

Classes:
    PeriodicField: Samples on a power-of-two torus grid
    DyadicBlocks: Littlewood-Paley pieces of a field
    RegularityEstimate: Fit result of estimate_regularity
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import stats

try:
    from .common import is_power_of_two, log2_int, SPECTRAL_FLOOR
    from .error_manager import ConfigurationError
except ImportError:
    from common import is_power_of_two, log2_int, SPECTRAL_FLOOR
    from error_manager import ConfigurationError


# Relative floor under which all block norms count as spectrally trivial
TRIVIAL_RELATIVE_FLOOR = 1e-13
MIN_FIT_BANDS = 3


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """
    Samples of a scalar, vector or matrix valued function on T^n.

    The first `domain_dim` axes of `values` are the grid axes (all equal to a
    power of two N); any trailing axes are the value shape.
    """
    values: np.ndarray
    domain_dim: int

    def __post_init__(self):
        values = np.asarray(self.values)
        object.__setattr__(self, "values", values)
        n = self.domain_dim
        if n not in (1, 2, 3):
            raise ConfigurationError(f"domain dimension must be 1, 2 or 3, got {n}")
        if values.ndim < n:
            raise ConfigurationError(
                f"values of rank {values.ndim} cannot carry a {n}-dimensional grid"
            )
        dims = values.shape[:n]
        if len(set(dims)) != 1:
            raise ConfigurationError(f"grid must be isotropic, got dims {dims}")
        if not is_power_of_two(int(dims[0])):
            raise ConfigurationError(f"grid size must be a power of two, got {dims[0]}")

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    @property
    def dims(self) -> tuple:
        return tuple(self.values.shape[: self.domain_dim])

    @property
    def value_shape(self) -> tuple:
        return tuple(self.values.shape[self.domain_dim:])

    @property
    def J(self) -> int:
        """Index of the last dyadic block, log2(N) - 1."""
        return log2_int(self.N) - 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @property
    def axes(self) -> tuple:
        return tuple(range(self.domain_dim))

    def coefficients(self) -> np.ndarray:
        """Fourier coefficients u_hat(k) = fftn(u) / N^n over the grid axes."""
        return sfft.fftn(self.values, axes=self.axes) / float(self.N ** self.domain_dim)

    def with_values(self, values: np.ndarray) -> "PeriodicField":
        return PeriodicField(values, self.domain_dim)

    def same_grid(self, other: "PeriodicField") -> bool:
        return self.domain_dim == other.domain_dim and self.dims == other.dims

    def component(self, *index: int) -> "PeriodicField":
        """Scalar component of a vector or matrix field."""
        sl = (slice(None),) * self.domain_dim + tuple(index)
        return PeriodicField(self.values[sl], self.domain_dim)

    def __add__(self, other: "PeriodicField") -> "PeriodicField":
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "PeriodicField") -> "PeriodicField":
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def scale(self, c: complex) -> "PeriodicField":
        return self.with_values(c * self.values)


def require_same_grid(*fields: PeriodicField) -> None:
    """Raise ConfigurationError unless every field shares one grid."""
    first = fields[0]
    for other in fields[1:]:
        if not first.same_grid(other):
            raise ConfigurationError(
                f"grid mismatch: {first.dims} (n={first.domain_dim}) vs "
                f"{other.dims} (n={other.domain_dim})"
            )


def from_coefficients(coeffs: np.ndarray, domain_dim: int, real: bool = False) -> PeriodicField:
    """Inverse of PeriodicField.coefficients; `real` drops the imaginary part."""
    N = coeffs.shape[0]
    axes = tuple(range(domain_dim))
    values = sfft.ifftn(coeffs, axes=axes) * float(N ** domain_dim)
    if real:
        values = values.real
    return PeriodicField(values, domain_dim)


def constant_field(value: complex, N: int, domain_dim: int) -> PeriodicField:
    dtype = complex if np.iscomplexobj(value) else float
    return PeriodicField(np.full((N,) * domain_dim, value, dtype=dtype), domain_dim)


def grid_points(N: int, domain_dim: int) -> tuple:
    """Coordinate arrays x_d = i_d / N, each of shape (N,)*n ('ij' indexing)."""
    x = np.arange(N) / N
    return tuple(np.meshgrid(*([x] * domain_dim), indexing="ij"))


@lru_cache(maxsize=32)
def lattice(N: int, domain_dim: int) -> tuple:
    """Integer frequency arrays k_d in [-N/2, N/2), each of shape (N,)*n."""
    k = sfft.fftfreq(N, 1.0 / N)
    grids = np.meshgrid(*([k] * domain_dim), indexing="ij")
    for g in grids:
        g.setflags(write=False)
    return tuple(grids)


@lru_cache(maxsize=32)
def lattice_norm(N: int, domain_dim: int) -> np.ndarray:
    ks = lattice(N, domain_dim)
    out = np.sqrt(sum(k * k for k in ks))
    out.setflags(write=False)
    return out


def japanese_bracket(N: int, domain_dim: int) -> np.ndarray:
    """<k> = (1 + |k|^2)^(1/2) on the lattice."""
    return np.sqrt(1.0 + lattice_norm(N, domain_dim) ** 2)


def _expand(mult: np.ndarray, target_ndim: int) -> np.ndarray:
    """Append singleton axes so a lattice multiplier broadcasts over value axes."""
    return mult.reshape(mult.shape + (1,) * (target_ndim - mult.ndim))


def apply_multiplier(u: PeriodicField, mult: np.ndarray) -> PeriodicField:
    """Fourier multiplier mult(k) applied to u (real output for real u and even mult)."""
    coeffs = u.coefficients() * _expand(mult, u.values.ndim)
    out = from_coefficients(coeffs, u.domain_dim)
    if u.is_real and np.isrealobj(mult):
        return out.with_values(out.values.real)
    return out


# ---------------------------------------------------------------------------
# Dyadic partition of unity
# ---------------------------------------------------------------------------

def bump_profile(t: np.ndarray) -> np.ndarray:
    """phi(t) = exp(-1/(1-t^2)) on |t| < 1, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@lru_cache(maxsize=16)
def dyadic_multipliers(N: int, domain_dim: int) -> np.ndarray:
    """
    Partition-of-unity multipliers psi_j(k), j = -1..J, stacked on axis 0.

    Block j >= 0 is supported in 2^(j-1) < |k| < 2^(j+1); block -1 only at k = 0.
    """
    J = log2_int(N) - 1
    knorm = lattice_norm(N, domain_dim)
    raw = np.zeros((J + 2,) + knorm.shape)
    raw[0] = bump_profile(knorm)
    with np.errstate(divide="ignore"):
        logk = np.where(knorm > 0, np.log2(np.where(knorm > 0, knorm, 1.0)), -np.inf)
    for j in range(J + 1):
        raw[j + 1] = np.where(knorm > 0, bump_profile(logk - j), 0.0)
    total = raw.sum(axis=0)
    mults = raw / total
    mults.setflags(write=False)
    return mults


@dataclass
class DyadicBlocks:
    """
    Littlewood-Paley pieces Delta_j u for j = -1..J.
    """
    blocks: list
    J: int
    profile: str = "exp-mollifier-log2"
    indices: list = field(default_factory=list)

    def __post_init__(self):
        if not self.indices:
            self.indices = list(range(-1, self.J + 1))

    def block(self, j: int) -> PeriodicField:
        return self.blocks[j + 1]

    def partial_sum(self, k: int) -> PeriodicField:
        """S_k u = sum of Delta_j u over j <= k (zero field when k < -1)."""
        first = self.blocks[0]
        total = np.zeros_like(first.values)
        for j in range(-1, min(k, self.J) + 1):
            total = total + self.block(j).values
        return first.with_values(total)

    def partial_sums(self) -> list:
        """[S_{-1}, S_0, ..., S_J] by cumulative summation."""
        stacked = np.cumsum(np.stack([b.values for b in self.blocks]), axis=0)
        return [self.blocks[0].with_values(s) for s in stacked]

    def reconstruct(self) -> PeriodicField:
        return self.partial_sum(self.J)

    def l2_norms(self) -> np.ndarray:
        return np.array([l2_norm(b) for b in self.blocks])

    def sup_norms(self) -> np.ndarray:
        return np.array([sup_norm(b) for b in self.blocks])


def lp_decompose(u: PeriodicField) -> DyadicBlocks:
    """
    Littlewood-Paley decomposition of u; the blocks sum to u exactly.
    """
    mults = dyadic_multipliers(u.N, u.domain_dim)
    coeffs = u.coefficients()
    blocks = []
    for psi in mults:
        piece = from_coefficients(coeffs * _expand(psi, coeffs.ndim), u.domain_dim)
        if u.is_real:
            piece = piece.with_values(piece.values.real)
        blocks.append(piece)
    return DyadicBlocks(blocks=blocks, J=u.J)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def l2_norm(u: PeriodicField) -> float:
    """L2 norm on the unit torus (root mean square over the grid)."""
    v = u.values.reshape(u.dims + (-1,))
    return float(np.sqrt(np.mean(np.sum(np.abs(v) ** 2, axis=-1))))


def sup_norm(u: PeriodicField) -> float:
    v = u.values.reshape(u.dims + (-1,))
    return float(np.max(np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))))


def sobolev_norm(u: PeriodicField, s: float) -> float:
    """||<k>^s u_hat||_l2, summed over value components."""
    coeffs = u.coefficients()
    weight = _expand(japanese_bracket(u.N, u.domain_dim) ** s, coeffs.ndim)
    return float(np.sqrt(np.sum(np.abs(weight * coeffs) ** 2)))


def holder_norm(u: PeriodicField, alpha: float) -> float:
    """Besov C^alpha_{inf,inf} proxy: sup_j 2^(j alpha) ||Delta_j u||_inf."""
    blocks = lp_decompose(u)
    return float(max(2.0 ** (j * alpha) * sup_norm(b) for j, b in zip(blocks.indices, blocks.blocks)))


# ---------------------------------------------------------------------------
# Regularity estimation
# ---------------------------------------------------------------------------

@dataclass
class RegularityEstimate:
    """Result of a dyadic regression; exponent is inf for trivial spectra."""
    scale: str
    exponent: float
    intercept: float
    residual: float
    stderr: float
    bands: list
    log2_norms: list
    trivial: bool = False

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "exponent": None if not np.isfinite(self.exponent) else float(self.exponent),
            "intercept": float(self.intercept),
            "residual": float(self.residual),
            "stderr": float(self.stderr),
            "bands": [int(b) for b in self.bands],
            "log2_norms": [float(v) for v in self.log2_norms],
            "trivial": bool(self.trivial),
        }


def default_band_range(J: int) -> tuple:
    """[3, J-2] when it spans three bands; otherwise the top usable three."""
    if J - 2 - 3 >= MIN_FIT_BANDS - 1:
        return 3, J - 2
    lo = max(0, J - 2 - (MIN_FIT_BANDS - 1))
    return lo, J - 2


def validate_band_range(J: int, band_range: Optional[Sequence[int]]) -> tuple:
    lo, hi = default_band_range(J) if band_range is None else (int(band_range[0]), int(band_range[1]))
    if lo < 0 or hi > J:
        raise ConfigurationError(f"band range [{lo}, {hi}] outside [0, {J}]")
    if hi - lo + 1 < MIN_FIT_BANDS:
        raise ConfigurationError(
            f"band range [{lo}, {hi}] has {hi - lo + 1} bands, need at least {MIN_FIT_BANDS}"
        )
    return lo, hi


def fit_block_norms(norms: Sequence[float], bands: Sequence[int], scale: str,
                    floor: float = SPECTRAL_FLOOR) -> RegularityEstimate:
    """Least-squares fit of log2 norms against band index; exponent = -slope."""
    norms = np.asarray(norms, dtype=float)
    bands = np.asarray(bands, dtype=float)
    if np.all(norms < floor):
        return RegularityEstimate(scale, float("inf"), float("nan"), 0.0, 0.0,
                                  bands.astype(int).tolist(), [float("-inf")] * len(bands), trivial=True)
    logs = np.log2(np.maximum(norms, SPECTRAL_FLOOR))
    fit = stats.linregress(bands, logs)
    resid = logs - (fit.intercept + fit.slope * bands)
    return RegularityEstimate(
        scale=scale,
        exponent=float(-fit.slope),
        intercept=float(fit.intercept),
        residual=float(np.sqrt(np.mean(resid ** 2))),
        stderr=float(fit.stderr),
        bands=bands.astype(int).tolist(),
        log2_norms=logs.tolist(),
    )


def estimate_regularity(u: PeriodicField, scale: str = "sobolev",
                        band_range: Optional[Sequence[int]] = None) -> RegularityEstimate:
    """
    Estimate the Sobolev or Holder exponent of u from the decay of its
    dyadic block norms (L2 blocks for sobolev, sup blocks for holder).
    """
    if scale not in ("sobolev", "holder"):
        raise ConfigurationError(f"unknown regularity scale '{scale}'")
    lo, hi = validate_band_range(u.J, band_range)
    blocks = lp_decompose(u)
    bands = list(range(lo, hi + 1))
    pieces = [blocks.block(j) for j in bands]
    norms = [l2_norm(b) if scale == "sobolev" else sup_norm(b) for b in pieces]
    floor = max(SPECTRAL_FLOOR, TRIVIAL_RELATIVE_FLOOR * l2_norm(u))
    return fit_block_norms(norms, bands, scale, floor)


# ---------------------------------------------------------------------------
# Derivatives, shifts and interpolation
# ---------------------------------------------------------------------------

def spectral_gradient(u: PeriodicField) -> PeriodicField:
    """Gradient of a scalar field; components on a trailing axis of length n."""
    if u.value_shape:
        raise ConfigurationError("spectral_gradient expects a scalar field")
    coeffs = u.coefficients()
    comps = []
    for k in lattice(u.N, u.domain_dim):
        d = from_coefficients(2j * np.pi * k * coeffs, u.domain_dim)
        comps.append(d.values.real if u.is_real else d.values)
    return PeriodicField(np.stack(comps, axis=-1), u.domain_dim)


def fourier_shift(u: PeriodicField, delta: Sequence[float]) -> PeriodicField:
    """Exact evaluation of the trigonometric interpolant at x + delta."""
    phase = np.exp(2j * np.pi * sum(k * d for k, d in zip(lattice(u.N, u.domain_dim), delta)))
    shifted = from_coefficients(u.coefficients() * _expand(phase, u.values.ndim), u.domain_dim)
    return shifted.with_values(shifted.values.real) if u.is_real else shifted


def fourier_interpolate(u: PeriodicField, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """
    Evaluate the trigonometric interpolant of u at arbitrary points.

    Args:
        u: Scalar field
        points: Array of shape (m, n) in torus coordinates

    Returns:
        Array of m values (real for real u)
    """
    if u.value_shape:
        raise ConfigurationError("fourier_interpolate expects a scalar field")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, N = u.domain_dim, u.N
    coeffs = u.coefficients()
    k = sfft.fftfreq(N, 1.0 / N)
    out = np.empty(points.shape[0], dtype=complex)
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk]
        E = [np.exp(2j * np.pi * np.outer(p[:, d], k)) for d in range(n)]
        if n == 1:
            vals = E[0] @ coeffs
        elif n == 2:
            vals = np.sum((E[0] @ coeffs) * E[1], axis=1)
        else:
            tmp = np.einsum("pa,abc->pbc", E[0], coeffs)
            tmp = np.einsum("pbc,pb->pc", tmp, E[1])
            vals = np.sum(tmp * E[2], axis=1)
        out[start:start + chunk] = vals
    return out.real if u.is_real else out


def low_pass(u: PeriodicField, cutoff: float) -> PeriodicField:
    """Smooth low-pass: keep |k| <= cutoff/2, remove |k| >= cutoff."""
    knorm = lattice_norm(u.N, u.domain_dim)
    mult = 1.0 - smooth_step((knorm - cutoff / 2.0) / (cutoff / 2.0))
    return apply_multiplier(u, mult)


def resample(u: PeriodicField, n_out: int) -> PeriodicField:
    """
    Trigonometric interpolant of u sampled on an n_out grid (zero padding or
    truncation of the spectrum; exact for fields band-limited below both grids).

    Only modes with |k_d| < min(N, n_out)/2 in every coordinate are carried
    over. The Nyquist modes k_d = -min(N, n_out)/2 are dropped, because they
    have no symmetric partner on the smaller grid and would break real fields.
    """
    if not is_power_of_two(int(n_out)):
        raise ConfigurationError(f"grid size must be a power of two, got {n_out}")
    if n_out == u.N:
        return u
    n = u.domain_dim
    coeffs = u.coefficients()
    k_in = lattice(u.N, n)
    keep = np.ones(u.dims, dtype=bool)
    for k in k_in:
        keep &= np.abs(k) < min(u.N, n_out) // 2
    out = np.zeros((n_out,) * n + u.value_shape, dtype=complex)
    idx = np.nonzero(keep)
    target = tuple(np.mod(np.rint(k[idx]).astype(int), n_out) for k in k_in)
    out[target] = coeffs[idx]
    return from_coefficients(out, n, real=u.is_real)


# ---------------------------------------------------------------------------
# Synthetic test fields
# ---------------------------------------------------------------------------

def synthesize_field(N: int, domain_dim: int, exponent: float, rng: np.random.Generator,
                     real: bool = True) -> PeriodicField:
    """
    Random-phase field with |u_hat(k)| = <k>^(-exponent).

    For the real part the Sobolev and Holder exponents are exponent - n/2.
    """
    shape = (N,) * domain_dim
    phases = np.exp(2j * np.pi * rng.random(shape))
    coeffs = japanese_bracket(N, domain_dim) ** (-exponent) * phases
    return from_coefficients(coeffs, domain_dim, real=real)


def weierstrass_field(N: int, alpha: float) -> PeriodicField:
    """sum_j 2^(-alpha j) cos(2 pi 2^j x) on T^1 for 2^j <= N/2."""
    x = np.arange(N) / N
    J = log2_int(N) - 1
    values = sum(2.0 ** (-alpha * j) * np.cos(2 * np.pi * 2 ** j * x) for j in range(J + 1))
    return PeriodicField(np.asarray(values, dtype=float), 1)


def single_mode(N: int, k: Sequence[int]) -> PeriodicField:
    """exp(2 pi i k.x) sampled on the grid."""
    xs = grid_points(N, len(k))
    return PeriodicField(np.exp(2j * np.pi * sum(kd * xd for kd, xd in zip(k, xs))), len(k))
