"""
Parax - paraproducts, symbol regularization and torus quantization.

Symbols are stored separably, a(x,k) = sum_m a_m(x) mu_m(k), with each
multiplier mu_m a lattice function. Differential-form symbols carry the
monomial alpha of their multiplier (ik)^alpha so that composition and adjoint
expansions can differentiate them in k exactly.

Quantization is the left quantization on the torus:
    Op(a)u(x) = sum_m a_m(x) * IFFT(mu_m(k) u_hat(k))(x)
With the lattice convention Op(i k_d) = (1/2 pi) d/dx_d.

Named builtin multipliers (the symbol manifest vocabulary):
    identity
    japanese_bracket_pow s        <k>^s
    norm_pow p                    |k|^p (zero at k = 0)
    monomial a1,a2[,a3]           (ik)^alpha
    cone_cutoff d1,d2[,d3] ap     smooth two-sided angular cutoff, 1 inside ap, 0 beyond 2 ap (radians)
    band j                        dyadic multiplier psi_j
Expressions multiply with " * ".
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

try:
    from .common import CHUNK_SIZE
    from .error_manager import ConfigurationError, PreconditionError
    from .spectral_core import (
        PeriodicField, apply_multiplier, dyadic_multipliers, estimate_regularity,
        from_coefficients, japanese_bracket, l2_norm, lattice, lattice_norm,
        lp_decompose, require_same_grid, smooth_step, sobolev_norm, _expand,
    )
except ImportError:
    from common import CHUNK_SIZE
    from error_manager import ConfigurationError, PreconditionError
    from spectral_core import (
        PeriodicField, apply_multiplier, dyadic_multipliers, estimate_regularity,
        from_coefficients, japanese_bracket, l2_norm, lattice, lattice_norm,
        lp_decompose, require_same_grid, smooth_step, sobolev_norm, _expand,
    )


# Regularization keeps x-frequencies |eta| <= 2^j * KEEP and removes |eta| >= 2^j * CUT in band j
REGULARIZATION_KEEP = 1.0 / 8.0
REGULARIZATION_CUT = 1.0 / 4.0


# ---------------------------------------------------------------------------
# Builtin multipliers
# ---------------------------------------------------------------------------

def _unit(direction: Sequence[float]) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ConfigurationError("cone direction must be nonzero")
    return d / norm


def cone_angle(N: int, domain_dim: int, direction: Sequence[float]) -> np.ndarray:
    """Angle between k and the line through `direction` (0 at k = 0)."""
    d = _unit(direction)
    if d.size != domain_dim:
        raise ConfigurationError(f"direction {tuple(direction)} does not match dimension {domain_dim}")
    ks = lattice(N, domain_dim)
    knorm = lattice_norm(N, domain_dim)
    dot = np.abs(sum(kd * dd for kd, dd in zip(ks, d)))
    cosang = np.where(knorm > 0, dot / np.where(knorm > 0, knorm, 1.0), 1.0)
    return np.arccos(np.clip(cosang, 0.0, 1.0))


def cone_cutoff(N: int, domain_dim: int, direction: Sequence[float], aperture: float) -> np.ndarray:
    """Smooth two-sided cone cutoff: 1 for angle <= aperture, 0 for angle >= 2 aperture."""
    if aperture <= 0:
        raise ConfigurationError("cone aperture must be positive")
    ang = cone_angle(N, domain_dim, direction)
    return 1.0 - smooth_step((ang - aperture) / aperture)


def monomial_multiplier(N: int, domain_dim: int, alpha: Sequence[int]) -> np.ndarray:
    if len(alpha) != domain_dim:
        raise ConfigurationError(f"monomial {tuple(alpha)} does not match dimension {domain_dim}")
    out = np.ones((N,) * domain_dim, dtype=complex)
    for k, a in zip(lattice(N, domain_dim), alpha):
        if a:
            out = out * (1j * k) ** int(a)
    return out


def _parse_numbers(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def multiplier_from_expression(expression: str, N: int, domain_dim: int) -> np.ndarray:
    """Evaluate a builtin multiplier expression on the lattice."""
    total = np.ones((N,) * domain_dim, dtype=complex)
    for factor in expression.split("*"):
        parts = factor.split()
        if not parts:
            raise ConfigurationError(f"empty factor in multiplier expression '{expression}'")
        name, args = parts[0], parts[1:]
        if name == "identity":
            value = np.ones((N,) * domain_dim)
        elif name == "japanese_bracket_pow" and len(args) == 1:
            value = japanese_bracket(N, domain_dim) ** float(args[0])
        elif name == "norm_pow" and len(args) == 1:
            p = float(args[0])
            knorm = lattice_norm(N, domain_dim)
            value = np.where(knorm > 0, np.where(knorm > 0, knorm, 1.0) ** p, 0.0 if p > 0 else 1.0)
        elif name == "monomial" and len(args) == 1:
            value = monomial_multiplier(N, domain_dim, [int(a) for a in _parse_numbers(args[0])])
        elif name == "cone_cutoff" and len(args) == 2:
            value = cone_cutoff(N, domain_dim, _parse_numbers(args[0]), float(args[1]))
        elif name == "band" and len(args) == 1:
            j = int(args[0])
            mults = dyadic_multipliers(N, domain_dim)
            if not -1 <= j < mults.shape[0] - 1:
                raise ConfigurationError(f"band {j} outside [-1, {mults.shape[0] - 2}]")
            value = mults[j + 1]
        else:
            raise ConfigurationError(f"unknown multiplier expression '{factor.strip()}'")
        total = total * value
    return total


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------

@dataclass
class SymbolTerm:
    """One separable term a(x) * mu(k)."""
    coefficient: PeriodicField
    multiplier: np.ndarray
    expression: Optional[str] = None
    monomial: Optional[tuple] = None


@dataclass
class SymbolGrid:
    """
    A symbol a(x,k) = sum_m a_m(x) mu_m(k) with order and coefficient regularity.
    """
    terms: List[SymbolTerm]
    m_order: float
    regularity_tag: float = math.inf

    def __post_init__(self):
        if not self.terms:
            raise ConfigurationError("a symbol needs at least one term")
        first = self.terms[0].coefficient
        for term in self.terms:
            require_same_grid(first, term.coefficient)
            if term.coefficient.value_shape:
                raise ConfigurationError("symbol coefficients must be scalar fields")
            if term.multiplier.shape != first.dims:
                raise ConfigurationError(
                    f"multiplier shape {term.multiplier.shape} does not match grid {first.dims}"
                )
            if not np.all(np.isfinite(term.multiplier)):
                raise ConfigurationError("multipliers must be finite on the lattice")

    @property
    def N(self) -> int:
        return self.terms[0].coefficient.N

    @property
    def domain_dim(self) -> int:
        return self.terms[0].coefficient.domain_dim

    @property
    def is_differential(self) -> bool:
        return all(t.monomial is not None for t in self.terms)

    def evaluate(self, x_index: np.ndarray) -> np.ndarray:
        """a(x, k) for flat grid indices x_index; shape (len(x_index), N^n)."""
        coeffs = np.stack([t.coefficient.values.reshape(-1)[x_index] for t in self.terms])
        mults = np.stack([t.multiplier.reshape(-1) for t in self.terms])
        return coeffs.T @ mults

    def iter_chunks(self, chunk: int = CHUNK_SIZE) -> Iterable:
        total = self.N ** self.domain_dim
        rows = max(1, chunk * chunk // max(total, 1))
        for start in range(0, total, rows):
            idx = np.arange(start, min(start + rows, total))
            yield idx, self.evaluate(idx)


def make_symbol(N: int, domain_dim: int, terms: Sequence[tuple], m_order: float,
                regularity_tag: float = math.inf) -> SymbolGrid:
    """
    Build a SymbolGrid from (coefficient, expression) pairs.

    The coefficient may be a PeriodicField or a scalar constant.
    """
    built = []
    for coefficient, expression in terms:
        if not isinstance(coefficient, PeriodicField):
            coefficient = PeriodicField(np.full((N,) * domain_dim, coefficient), domain_dim)
        monomial = None
        if expression.startswith("monomial") and "*" not in expression:
            monomial = tuple(int(a) for a in _parse_numbers(expression.split()[1]))
        elif expression.strip() == "identity":
            monomial = (0,) * domain_dim
        built.append(SymbolTerm(coefficient, multiplier_from_expression(expression, N, domain_dim),
                                expression, monomial))
    return SymbolGrid(built, m_order, regularity_tag)


def differential_symbol(coefficients: dict, m_order: Optional[float] = None,
                        regularity_tag: float = math.inf) -> SymbolGrid:
    """
    p(x,k) = sum_alpha p_alpha(x) (ik)^alpha from a {alpha: PeriodicField} mapping.
    """
    if not coefficients:
        raise ConfigurationError("a differential symbol needs at least one coefficient")
    fields = list(coefficients.values())
    N, n = fields[0].N, fields[0].domain_dim
    terms = []
    for alpha, coeff in coefficients.items():
        alpha = tuple(int(a) for a in alpha)
        expr = "monomial " + ",".join(str(a) for a in alpha)
        terms.append(SymbolTerm(coeff, monomial_multiplier(N, n, alpha), expr, alpha))
    order = max(sum(a) for a in coefficients) if m_order is None else m_order
    return SymbolGrid(terms, float(order), regularity_tag)


def _preserves_real(term: SymbolTerm) -> bool:
    """True if the term maps real fields to real fields."""
    if not term.coefficient.is_real:
        return False
    mult = term.multiplier
    axes = tuple(range(mult.ndim))
    reflected = np.roll(np.flip(mult, axis=axes), 1, axis=axes)
    return bool(np.allclose(reflected, np.conj(mult), rtol=0, atol=1e-12 * (1 + np.max(np.abs(mult)))))


def quantize(a: SymbolGrid, u: PeriodicField) -> PeriodicField:
    """
    Left quantization Op(a)u = sum_m a_m(x) (mu_m u_hat)^.
    """
    require_same_grid(a.terms[0].coefficient, u)
    coeffs = u.coefficients()
    total = np.zeros(u.values.shape, dtype=complex)
    for term in a.terms:
        piece = from_coefficients(coeffs * _expand(term.multiplier, coeffs.ndim), u.domain_dim).values
        total += _expand(term.coefficient.values, piece.ndim) * piece
    if u.is_real and all(_preserves_real(t) for t in a.terms):
        total = total.real
    return PeriodicField(total, u.domain_dim)


# ---------------------------------------------------------------------------
# Paraproducts
# ---------------------------------------------------------------------------

def paraproduct(a: PeriodicField, b: PeriodicField) -> PeriodicField:
    """
    T_a b = sum_{k >= 0} (S_{k-1} a) Delta_k b.
    """
    require_same_grid(a, b)
    a_sums = lp_decompose(a).partial_sums()
    b_blocks = lp_decompose(b)
    total = np.zeros(np.broadcast_shapes(a.values.shape, b.values.shape),
                     dtype=np.result_type(a.values, b.values))
    for k in range(0, b_blocks.J + 1):
        total = total + a_sums[k].values * b_blocks.block(k).values
    return PeriodicField(total, a.domain_dim)


def bony_remainder(a: PeriodicField, b: PeriodicField) -> PeriodicField:
    """
    R(a,b) = ab - (T_a b + T_b a); symmetric in (a, b) bit for bit.
    """
    require_same_grid(a, b)
    para = paraproduct(a, b).values + paraproduct(b, a).values
    return PeriodicField(a.values * b.values - para, a.domain_dim)


def remainder_gain(a: PeriodicField, b: PeriodicField, band_range: Optional[Sequence[int]] = None) -> dict:
    """
    Regularity of R(a,b) against the Holder exponent of a and the Sobolev
    exponent of b (the C^r x H^s -> H^(s+r) mapping property).
    """
    r_est = estimate_regularity(a, "holder", band_range)
    s_est = estimate_regularity(b, "sobolev", band_range)
    rem_est = estimate_regularity(bony_remainder(a, b), "sobolev", band_range)
    return {
        "holder_a": r_est.exponent,
        "sobolev_b": s_est.exponent,
        "sobolev_remainder": rem_est.exponent,
        "target": r_est.exponent + s_est.exponent,
    }


# ---------------------------------------------------------------------------
# Regularization p -> p_sharp + p_flat
# ---------------------------------------------------------------------------

def regularization_cutoff(N: int, domain_dim: int, j: int) -> np.ndarray:
    """
    x-frequency cutoff used for band j: 1 on |eta| <= 2^j/8, 0 on |eta| >= 2^j/4.

    Bands -1 and 0 use the identity.
    """
    if j <= 0:
        return np.ones((N,) * domain_dim)
    keep = REGULARIZATION_KEEP * 2.0 ** j
    cut = REGULARIZATION_CUT * 2.0 ** j
    eta = lattice_norm(N, domain_dim)
    return 1.0 - smooth_step((eta - keep) / (cut - keep))


def regularize_symbol(p: SymbolGrid, r: Optional[float] = None) -> tuple:
    """
    Split p = p_sharp + p_flat.

    In band j the coefficient of p_sharp keeps only x-frequencies small
    against 2^j; p_flat collects the rest. Both are returned as SymbolGrids
    whose terms are indexed by (original term, band).
    """
    r = p.regularity_tag if r is None else r
    N, n = p.N, p.domain_dim
    mults = dyadic_multipliers(N, n)
    sharp_terms, flat_terms = [], []
    for term in p.terms:
        coeff_hat = term.coefficient.coefficients()
        for j in range(-1, mults.shape[0] - 1):
            band_mult = mults[j + 1] * term.multiplier
            if not np.any(band_mult):
                continue
            chi = regularization_cutoff(N, n, j)
            low = from_coefficients(coeff_hat * chi, n, real=term.coefficient.is_real)
            high = term.coefficient - low
            expr = f"band {j} * {term.expression}" if term.expression else None
            sharp_terms.append(SymbolTerm(low, band_mult, expr, None))
            flat_terms.append(SymbolTerm(high, band_mult, expr, None))
    sharp = SymbolGrid(sharp_terms, p.m_order, r)
    flat = SymbolGrid(flat_terms, p.m_order - (r if math.isfinite(r) else 0.0), r)
    return sharp, flat


# ---------------------------------------------------------------------------
# Composition and adjoint
# ---------------------------------------------------------------------------

def _derivative(u: PeriodicField, d: int) -> PeriodicField:
    """Op(i k_d) u = (1/2 pi) du/dx_d."""
    out = apply_multiplier(u, 1j * lattice(u.N, u.domain_dim)[d])
    return out.with_values(out.values.real) if u.is_real else out


def compose_symbols(p: SymbolGrid, q: SymbolGrid, order: int = 2) -> SymbolGrid:
    """
    Truncated composition symbol of Op(p)Op(q) for differential-form symbols:
        sum_{|gamma| < order} C(alpha, gamma) p_alpha (D^gamma q_beta) (ik)^(alpha - gamma + beta)
    Only |gamma| <= 1 is formed.
    """
    if not (p.is_differential and q.is_differential):
        raise ConfigurationError("compose_symbols needs differential-form symbols")
    require_same_grid(p.terms[0].coefficient, q.terms[0].coefficient)
    n = p.domain_dim
    collected: dict = {}

    def add(alpha: tuple, values: np.ndarray) -> None:
        collected[alpha] = collected.get(alpha, 0) + values

    for pt in p.terms:
        alpha = pt.monomial
        for qt in q.terms:
            beta = qt.monomial
            add(tuple(a + b for a, b in zip(alpha, beta)), pt.coefficient.values * qt.coefficient.values)
            if order >= 2:
                for i in range(n):
                    if alpha[i] == 0:
                        continue
                    dq = _derivative(qt.coefficient, i).values
                    gamma = tuple(a - (1 if d == i else 0) + b for d, (a, b) in enumerate(zip(alpha, beta)))
                    add(gamma, alpha[i] * pt.coefficient.values * dq)
    coefficients = {alpha: PeriodicField(np.asarray(vals), n) for alpha, vals in collected.items()}
    return differential_symbol(coefficients, p.m_order + q.m_order,
                               min(p.regularity_tag, q.regularity_tag))


def adjoint_symbol(p: SymbolGrid) -> SymbolGrid:
    """
    First-order adjoint expansion of a differential-form symbol:
        (a D^alpha)^* = (-1)^|alpha| [conj(a) (ik)^alpha + sum_i alpha_i (D_i conj a) (ik)^(alpha - e_i)]
    Exact when every |alpha| <= 1.
    """
    if not p.is_differential:
        raise ConfigurationError("adjoint_symbol needs a differential-form symbol")
    n = p.domain_dim
    collected: dict = {}
    for term in p.terms:
        alpha = term.monomial
        sign = (-1) ** sum(alpha)
        abar = term.coefficient.with_values(np.conj(term.coefficient.values))
        collected[alpha] = collected.get(alpha, 0) + sign * abar.values
        for i in range(n):
            if alpha[i] == 0:
                continue
            lowered = tuple(a - (1 if d == i else 0) for d, a in enumerate(alpha))
            collected[lowered] = collected.get(lowered, 0) + sign * alpha[i] * _derivative(abar, i).values
    coefficients = {alpha: PeriodicField(np.asarray(vals), n) for alpha, vals in collected.items()}
    return differential_symbol(coefficients, p.m_order, p.regularity_tag)


# ---------------------------------------------------------------------------
# Garding margin
# ---------------------------------------------------------------------------

@dataclass
class GardingReport:
    """Empirical sharp-Garding check over random test fields."""
    raw_min: float
    fitted_C: float
    margin_at_unit_C: float
    sigma: float
    trials: int
    exact_subcase: Optional[str] = None
    hard_nonnegative: Optional[bool] = None
    ratios: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "raw_min": self.raw_min, "fitted_C": self.fitted_C,
            "margin_at_unit_C": self.margin_at_unit_C, "sigma": self.sigma,
            "trials": self.trials, "exact_subcase": self.exact_subcase,
            "hard_nonnegative": self.hard_nonnegative,
        }


def _exact_subcase(a: SymbolGrid) -> Optional[str]:
    if all(np.allclose(t.multiplier, t.multiplier.reshape(-1)[0]) for t in a.terms):
        return "multiplication"
    if all(np.allclose(t.coefficient.values, t.coefficient.values.reshape(-1)[0]) for t in a.terms):
        return "fourier_multiplier"
    return None


def check_pointwise_sign(a: SymbolGrid, cutoff: float = 0.0, tol: float = 1e-12) -> None:
    """Raise PreconditionError at the worst (x, k) if Re a < 0 for |k| >= cutoff."""
    knorm = lattice_norm(a.N, a.domain_dim).reshape(-1)
    active = knorm >= cutoff
    scale = max(1.0, max(float(np.max(np.abs(t.multiplier))) * float(np.max(np.abs(t.coefficient.values)))
                         for t in a.terms))
    for idx, vals in a.iter_chunks():
        re = np.where(active[None, :], vals.real, np.inf)
        worst = np.unravel_index(np.argmin(re), re.shape)
        if re[worst] < -tol * scale:
            x_flat = int(idx[worst[0]])
            x = np.array(np.unravel_index(x_flat, (a.N,) * a.domain_dim)) / a.N
            k = [int(kd.reshape(-1)[worst[1]]) for kd in lattice(a.N, a.domain_dim)]
            raise PreconditionError(
                f"symbol real part {re[worst]:.3e} < 0 at x={x.tolist()}, k={k}",
                location={"x": x.tolist(), "k": k},
            )


def garding_margin(a: SymbolGrid, trials: int, rng: np.random.Generator,
                   cutoff: float = 0.0, unit_C: float = 1.0) -> GardingReport:
    """
    Minimum over random fields of Re<Op(a)u, u> + C ||u||^2_{H^sigma},
    sigma = m/2 - min(r, 2)/4, with C fitted as the smallest nonnegative
    constant making every trial nonnegative.
    """
    check_pointwise_sign(a, cutoff)
    sigma = a.m_order / 2.0 - min(a.regularity_tag, 2.0) / 4.0
    shape = (a.N,) * a.domain_dim
    raws, norms = [], []
    for _ in range(trials):
        u = PeriodicField(rng.standard_normal(shape), a.domain_dim)
        u = u.scale(1.0 / l2_norm(u))
        raws.append(float(np.mean(quantize(a, u).values * np.conj(u.values)).real))
        norms.append(sobolev_norm(u, sigma) ** 2)
    raws_arr, norms_arr = np.array(raws), np.array(norms)
    ratios = -raws_arr / norms_arr
    fitted = max(0.0, float(np.max(ratios)))
    subcase = _exact_subcase(a)
    return GardingReport(
        raw_min=float(np.min(raws_arr)),
        fitted_C=fitted,
        margin_at_unit_C=float(np.min(raws_arr + unit_C * norms_arr)),
        sigma=sigma,
        trials=trials,
        exact_subcase=subcase,
        hard_nonnegative=None if subcase is None else bool(np.min(raws_arr) >= -1e-12),
        ratios=ratios.tolist(),
    )


# ---------------------------------------------------------------------------
# Elliptic parametrix
# ---------------------------------------------------------------------------

@dataclass
class ParametrixResult:
    value: PeriodicField
    residual: PeriodicField
    target: PeriodicField
    relative_error: float
    gain: float

    def to_dict(self) -> dict:
        return {"relative_error": self.relative_error, "gain": self.gain}


def microlocal_cutoff(N: int, domain_dim: int, direction: Sequence[float], aperture: float,
                      cutoff: float) -> np.ndarray:
    """Cone cutoff times a smooth high-pass (0 for |k| <= cutoff, 1 for |k| >= 2 cutoff)."""
    knorm = lattice_norm(N, domain_dim)
    high = smooth_step((knorm - cutoff) / cutoff) if cutoff > 0 else np.ones_like(knorm)
    return cone_cutoff(N, domain_dim, direction, aperture) * high


def check_ellipticity(a: SymbolGrid, chi: np.ndarray, cutoff: float, threshold: float) -> None:
    """Raise PreconditionError naming (x, k) where |sigma| < threshold |k|^m on supp chi."""
    knorm = lattice_norm(a.N, a.domain_dim).reshape(-1)
    support = (chi.reshape(-1) > 0) & (knorm >= max(cutoff, 1.0))
    weight = np.where(support, np.where(knorm > 0, knorm, 1.0) ** (-a.m_order), 0.0)
    for idx, vals in a.iter_chunks():
        ratio = np.where(support[None, :], np.abs(vals) * weight[None, :], np.inf)
        worst = np.unravel_index(np.argmin(ratio), ratio.shape)
        if ratio[worst] < threshold:
            x = np.array(np.unravel_index(int(idx[worst[0]]), (a.N,) * a.domain_dim)) / a.N
            k = [int(kd.reshape(-1)[worst[1]]) for kd in lattice(a.N, a.domain_dim)]
            raise PreconditionError(
                f"symbol not elliptic on the cone: |sigma|/|k|^m = {ratio[worst]:.3e} at x={x.tolist()}, k={k}",
                location={"x": x.tolist(), "k": k},
            )


def _apply_inverse(a: SymbolGrid, chi: np.ndarray, g: PeriodicField) -> PeriodicField:
    """Op(chi / sigma) g, separably for one term and densely otherwise."""
    n = a.domain_dim
    if len(a.terms) == 1:
        term = a.terms[0]
        inv = np.where(chi > 0, chi / np.where(chi > 0, term.multiplier, 1.0), 0.0)
        filtered = apply_multiplier(g, inv)
        return filtered.with_values(filtered.values / term.coefficient.values)
    ghat = g.coefficients().reshape(-1)
    chi_flat = chi.reshape(-1)
    ks = np.stack([k.reshape(-1) for k in lattice(a.N, n)])
    xs = np.stack([x.reshape(-1) for x in np.meshgrid(*([np.arange(a.N) / a.N] * n), indexing="ij")])
    out = np.empty(a.N ** n, dtype=complex)
    for idx, vals in a.iter_chunks():
        inv = np.where(chi_flat[None, :] > 0, chi_flat[None, :] / np.where(vals != 0, vals, 1.0), 0.0)
        phase = np.exp(2j * np.pi * (xs[:, idx].T @ ks))
        out[idx] = np.sum(inv * phase * ghat[None, :], axis=1)
    return PeriodicField(out.reshape((a.N,) * n), n)


def elliptic_parametrix_apply(a: SymbolGrid, direction: Sequence[float], aperture: float,
                              f: PeriodicField, cutoff: float = 4.0, threshold: float = 1e-3,
                              band_range: Optional[Sequence[int]] = None) -> ParametrixResult:
    """
    Apply the one-step parametrix B = Op(chi_cone / sigma(a)) to Op(a) f and
    measure the residual Op(chi_cone) f - B Op(a) f.
    """
    require_same_grid(a.terms[0].coefficient, f)
    chi = microlocal_cutoff(a.N, a.domain_dim, direction, aperture, cutoff)
    check_ellipticity(a, chi, cutoff, threshold)
    af = quantize(a, f)
    value = _apply_inverse(a, chi, af)
    target = apply_multiplier(f, chi)
    residual = target.with_values(target.values - value.values)
    if f.is_real:
        value = value.with_values(value.values.real)
        residual = residual.with_values(residual.values.real)
    denom = l2_norm(target)
    rel = l2_norm(residual) / denom if denom > 0 else 0.0
    res_est = estimate_regularity(residual, "sobolev", band_range)
    tgt_est = estimate_regularity(target, "sobolev", band_range)
    gain = float(res_est.exponent - tgt_est.exponent)
    return ParametrixResult(value, residual, target, float(rel), gain)
