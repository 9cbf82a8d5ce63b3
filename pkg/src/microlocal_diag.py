"""
Microlocal diagnostics - wavefront proxies and threshold conditions.

A frequency direction is probed by splitting each dyadic band's spectral
energy between a two-sided cone around the direction and its complement.
A direction is flagged as carrying H^s wavefront when the cone-restricted
block norms decay significantly slower than 2^(-s j).

Threshold and rigidity quantities are evaluated from orbit growth rates:
the Birkhoff integrals of the log expansion along E_u and contraction
along E_s over sampled orbits.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

try:
    from .dynamics import AnosovSystem, RateReport, ORBIT_SEEDS, orbit_integrals, sample_points
    from .error_manager import ConfigurationError, PreconditionError
    from .parax import cone_angle
    from .spectral_core import (
        PeriodicField, dyadic_multipliers, l2_norm, validate_band_range, _expand,
    )
except ImportError:
    from dynamics import AnosovSystem, RateReport, ORBIT_SEEDS, orbit_integrals, sample_points
    from error_manager import ConfigurationError, PreconditionError
    from parax import cone_angle
    from spectral_core import (
        PeriodicField, dyadic_multipliers, l2_norm, validate_band_range, _expand,
    )


DEFAULT_APERTURE = math.radians(15.0)
SENSITIVITY_APERTURES = (math.radians(10.0), math.radians(20.0))
CONFIDENCE = 0.95
TRIVIAL_RELATIVE = 1e-13
CONTRAST_BANDS = (3, 7)
CONTACT_THRESHOLD = 2.0

LOCATIONS = ("source_Es_star", "sink_Eu_star", "reversed_source_Eu_star")


# ---------------------------------------------------------------------------
# Cone energies
# ---------------------------------------------------------------------------

@dataclass
class ConeEnergyProfile:
    direction: tuple
    aperture: float
    per_band: list = field(default_factory=list)  # (j, inside, outside)

    def inside(self) -> np.ndarray:
        return np.array([row[1] for row in self.per_band])

    def outside(self) -> np.ndarray:
        return np.array([row[2] for row in self.per_band])

    def to_dict(self) -> dict:
        return {
            "direction": [float(d) for d in self.direction],
            "aperture_deg": math.degrees(self.aperture),
            "per_band": [[int(j), float(i), float(o)] for j, i, o in self.per_band],
        }


def cone_mask(N: int, domain_dim: int, direction: Sequence[float], aperture: float) -> np.ndarray:
    """Hard two-sided cone indicator; k = 0 and boundary modes count as inside."""
    if aperture <= 0:
        raise ConfigurationError("cone aperture must be positive")
    return cone_angle(N, domain_dim, direction) <= aperture + 1e-12


def cone_energy(u: PeriodicField, direction: Sequence[float], aperture: float = DEFAULT_APERTURE,
                output_manager=None) -> ConeEnergyProfile:
    """
    Per dyadic band, the spectral energy sum |psi_j(k) u_hat(k)|^2 inside and
    outside the frequency cone around `direction`.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    mask = cone_mask(u.N, u.domain_dim, d, aperture)
    coeffs = u.coefficients()
    value_axes = tuple(range(u.domain_dim, coeffs.ndim))
    rows = []
    for j, psi in zip(range(-1, u.J + 1), dyadic_multipliers(u.N, u.domain_dim)):
        energy = np.abs(coeffs * _expand(psi, coeffs.ndim)) ** 2
        if value_axes:
            energy = energy.sum(axis=value_axes)
        inside = float(energy[mask].sum())
        outside = float(energy[~mask].sum())
        rows.append((j, inside, outside))
        if output_manager:
            output_manager.print_band_row("cone energy", j, inside, outside)
    return ConeEnergyProfile(tuple(d.tolist()), aperture, rows)


# ---------------------------------------------------------------------------
# Wavefront test
# ---------------------------------------------------------------------------

@dataclass
class WavefrontResult:
    direction: tuple
    s: float
    aperture: float
    status: str
    exponent: float = float("nan")
    stderr: float = float("nan")
    bands: list = field(default_factory=list)
    log2_norms: list = field(default_factory=list)
    sensitivity: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "direction": [float(d) for d in self.direction],
            "s": self.s,
            "aperture_deg": math.degrees(self.aperture),
            "status": self.status,
            "exponent": None if not np.isfinite(self.exponent) else self.exponent,
            "stderr": None if not np.isfinite(self.stderr) else self.stderr,
            "bands": list(self.bands),
            "log2_norms": list(self.log2_norms),
            "sensitivity": dict(self.sensitivity),
        }


def _classify(u: PeriodicField, direction, s: float, aperture: float, lo: int, hi: int) -> WavefrontResult:
    profile = cone_energy(u, direction, aperture)
    bands = list(range(lo, hi + 1))
    norms = np.sqrt(np.array([profile.per_band[j + 1][1] for j in bands]))
    floor = TRIVIAL_RELATIVE * max(l2_norm(u), 1e-300)
    result = WavefrontResult(profile.direction, s, aperture, "trivial", bands=bands)
    if np.all(norms <= floor):
        return result
    logs = np.log2(np.maximum(norms, 1e-300))
    result.log2_norms = logs.tolist()
    if norms[0] * 2.0 ** (-s * (hi - lo)) < floor:
        result.status = "beyond_resolution"
        return result
    fit = stats.linregress(bands, logs)
    result.exponent = float(-fit.slope)
    result.stderr = float(fit.stderr)
    t_crit = stats.t.ppf(0.5 + CONFIDENCE / 2.0, len(bands) - 2)
    result.status = "in_wf" if result.exponent + t_crit * result.stderr < s else "not_in_wf"
    return result


def wavefront_test(u: PeriodicField, direction: Sequence[float], s: float,
                   apertures: Sequence[float] = (DEFAULT_APERTURE,) + SENSITIVITY_APERTURES,
                   band_range: Optional[Sequence[int]] = None) -> WavefrontResult:
    """
    Decide whether `direction` carries H^s wavefront of u by a 95% confidence
    slope test on the cone-restricted block norms. The first aperture is the
    reported one; the others are re-run and listed under `sensitivity`.
    """
    lo, hi = validate_band_range(u.J, band_range)
    primary = _classify(u, direction, s, apertures[0], lo, hi)
    for ap in apertures[1:]:
        primary.sensitivity[f"{math.degrees(ap):g}"] = _classify(u, direction, s, ap, lo, hi).status
    return primary


def cone_decay_contrast(u: PeriodicField, direction: Sequence[float], aperture: float = math.radians(20.0),
                        bands: Sequence[int] = CONTRAST_BANDS) -> dict:
    """
    Decay exponents of the inside and outside cone block norms over `bands`;
    contrast = outside - inside (positive when the cone holds the roughness).
    """
    lo, hi = validate_band_range(u.J, bands)
    profile = cone_energy(u, direction, aperture)
    js = np.arange(lo, hi + 1)
    rows = [profile.per_band[j + 1] for j in js]
    inside = np.log2(np.maximum(np.sqrt([r[1] for r in rows]), 1e-300))
    outside = np.log2(np.maximum(np.sqrt([r[2] for r in rows]), 1e-300))
    e_in = float(-stats.linregress(js, inside).slope)
    e_out = float(-stats.linregress(js, outside).slope)
    return {"inside_exponent": e_in, "outside_exponent": e_out, "contrast": e_out - e_in,
            "bands": [int(lo), int(hi)], "aperture_deg": math.degrees(aperture)}


def dual_directions(sys: AnosovSystem) -> tuple:
    """(E_u*, E_s*) codirections of the linear part: e_u and e_s turned by 90 degrees."""
    split = sys.linear_splitting()
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    return rot @ split.e_u, rot @ split.e_s


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

@dataclass
class ThresholdSet:
    regularity_lower_bound: float
    rigidity_threshold: float
    contact_threshold: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rigidity_thresholds(rates: RateReport, dim="general", volume_preserving: bool = False) -> ThresholdSet:
    """
    Lower bound (nu_u_min + nu_s_min) / nu_s_max for the regularity of E_u, and
    the rigidity threshold (nu_u_max + nu_s_max) / nu_s_min above which E_u is
    smooth; 3-dimensional volume preserving flows also get the value 2.
    """
    if not rates.converged:
        raise PreconditionError("rates did not converge; thresholds refused",
                                location={"relative_change": rates.relative_change})
    lower = (rates.nu_u_min + rates.nu_s_min) / rates.nu_s_max
    rigid = (rates.nu_u_max + rates.nu_s_max) / rates.nu_s_min
    contact = CONTACT_THRESHOLD if dim == 3 and volume_preserving else None
    return ThresholdSet(float(lower), float(rigid), contact)


def bunching_margin(rates: RateReport, s: float, T: float) -> float:
    """(s - 3/2) |log contraction over T| - 1/2 log expansion over T; positive when bunched."""
    return (s - 1.5) * rates.nu_s_min * T - 0.5 * rates.nu_u_max * T


def location_margins(location: str, s: float, I_u: np.ndarray, I_s: np.ndarray) -> np.ndarray:
    """
    Signed exponents of the weighted orbit integrals at one radial set:
      sink at E_u*:            (s - 3/2) I_s - 1/2 I_u
      source at E_s*:          -(s + 1/2) I_u
      reversed source at E_u*: (3/2 - s) I_s + 1/2 I_u
    """
    if location == "sink_Eu_star":
        return (s - 1.5) * I_s - 0.5 * I_u
    if location == "source_Es_star":
        return -(s + 0.5) * I_u
    if location == "reversed_source_Eu_star":
        return (1.5 - s) * I_s + 0.5 * I_u
    raise ConfigurationError(f"unknown radial location '{location}' (expected one of {LOCATIONS})")


@dataclass
class ThresholdReport:
    location: str
    s: float
    T: float
    max_margin: float
    mean_margin: float
    certified: bool
    sample_count: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _orbit_growth(sys: AnosovSystem, T: float, samples: int, rng) -> tuple:
    steps = max(1, int(round(T / sys.period)))
    grow_u, grow_s = orbit_integrals(sys, sample_points(samples, rng), steps)
    return grow_u[:, -1], grow_s[:, -1], steps * sys.period


def threshold_sign_report(sys: AnosovSystem, s: float, T: float = 64.0, location: str = "sink_Eu_star",
                          samples: int = ORBIT_SEEDS, rng: Optional[np.random.Generator] = None,
                          output_manager=None) -> ThresholdReport:
    """
    Max over sampled orbits of the threshold margin per unit time; a negative
    max certifies eventual negativity at regularity s.
    """
    I_u, I_s, T_used = _orbit_growth(sys, T, samples, rng)
    margins = location_margins(location, s, I_u, I_s) / T_used
    if output_manager:
        output_manager.print_info_pair(f"{location} s={s:g}", f"{margins.max():+.6f}")
    return ThresholdReport(location, float(s), T_used, float(margins.max()), float(margins.mean()),
                           bool(margins.max() < 0), samples)


def threshold_sweep(sys: AnosovSystem, s_values: Sequence[float], T: float = 64.0,
                    location: str = "sink_Eu_star", samples: int = ORBIT_SEEDS,
                    rng: Optional[np.random.Generator] = None) -> list:
    """[(s, max margin)] for each s, reusing one set of orbit integrals."""
    I_u, I_s, T_used = _orbit_growth(sys, T, samples, rng)
    return [(float(s), float((location_margins(location, s, I_u, I_s) / T_used).max())) for s in s_values]
