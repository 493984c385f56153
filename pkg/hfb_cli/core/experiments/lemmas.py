"""
Numerical checks of the linear estimates behind the uniform-in-N bounds.

Every verifier evaluates LHS / RHS over a seeded ensemble at each
refinement level and reports the per-level maxima and their log-log trend.
A level n means an n^d spatial sampling grid and time_factor * n time
samples of [0, T).
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_validator
from scipy.integrate import IntegrationWarning, quad

from hfb_cli.core.errors import QuadratureError, ValidationError
from hfb_cli.core.experiments.modal import (
    SOURCE_KINDS,
    ModalEnsemble,
    ModalSource,
    ModeSet,
    duhamel,
    free_solution,
    modal_lebesgue_norm,
    modal_mixed_norm,
    time_grid,
)
from hfb_cli.core.physics.lattice import japanese, magnitude, time_fourier
from hfb_cli.core.physics.norms import xsb_from_coefficients
from hfb_cli.core.runtime import Runtime

RELATION_TOL = 1e-12
TREND_TOL = 0.25
LEMMA_IDS = ("duhamel", "strichartz", "quartertime", "mlogm", "sobolev-angle")


class VerifyOptions(BaseModel):
    """Ensemble, refinement and exponent settings shared by the verifiers"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = 3
    L: float = PydanticField(2.0 * math.pi, gt=0.0)
    cutoff: int = PydanticField(1, ge=0)
    ensemble: int = PydanticField(50, ge=1)
    levels: Tuple[int, ...] = (12, 16)
    time_factor: int = PydanticField(4, ge=1)
    T: float = PydanticField(1.0, gt=0.0)
    tau_max: float = PydanticField(20.0, ge=0.0)
    n_frequencies: int = PydanticField(4, ge=1)
    pad: int = PydanticField(16, ge=4)
    kind: str = "random"

    b: float = 0.45
    delta: float = 0.4
    p: float = 4.0
    epsilon: float = PydanticField(0.1, gt=0.0)
    alpha: float = 0.55
    weighted: bool = False
    gamma1: float = 0.1
    gamma2: float = 0.1
    a: float = 1.0
    epsilon1: float = 0.25

    sobolev_p: float = 2.0
    sobolev_q: float = 10.0 / 3.0
    sobolev_alpha: float = 0.6

    mlogm_m: Tuple[float, ...] = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    mlogm_a: Tuple[float, ...] = (-2.0, -1.0, -0.5, -0.25, 0.0, 0.5, 1.0, 4.0)

    @field_validator("levels")
    @classmethod
    def _increasing_levels(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("refinement levels must be non-empty and strictly increasing")
        return value

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        if value not in SOURCE_KINDS:
            raise ValueError(f"kind must be one of {', '.join(SOURCE_KINDS)}")
        return value

    def mode_set(self) -> ModeSet:
        return ModeSet(self.d, self.L, self.cutoff)

    def ensemble_for(self, seed: int, kind: Optional[str] = None) -> ModalEnsemble:
        return ModalEnsemble(self.mode_set(), seed, kind or self.kind, self.n_frequencies, self.tau_max)

    def time_samples(self, level: int) -> int:
        return self.time_factor * int(level)


@dataclass
class LemmaCheck:
    """Per-level LHS / RHS ratios of one verifier run"""

    lemma: str
    ensemble: int
    ratios: Dict[float, List[float]]
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for level, values in self.ratios.items():
            if not np.all(np.isfinite(values)):
                raise ValidationError(f"{self.lemma}: non-finite ratio at level {level}", field="ratio")

    @property
    def levels(self) -> List[float]:
        return list(self.ratios)

    @property
    def max_ratios(self) -> Dict[float, float]:
        return {level: float(max(values)) for level, values in self.ratios.items()}

    @property
    def max_ratio(self) -> float:
        return max(self.max_ratios.values())

    @property
    def spread(self) -> float:
        """max over min of the per-level maxima"""
        maxima = list(self.max_ratios.values())
        return max(maxima) / min(maxima) if min(maxima) > 0 else math.inf

    @property
    def slope(self) -> float:
        """log-log slope of the per-level maxima against the level"""
        levels = np.asarray(self.levels, dtype=float)
        maxima = np.asarray(list(self.max_ratios.values()))
        if levels.size < 2 or np.any(maxima <= 0):
            return 0.0
        return float(np.polyfit(np.log(levels), np.log(maxima), 1)[0])

    def trend_flat(self, tol: float = TREND_TOL) -> bool:
        return abs(self.slope) <= tol

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"level": level, "sample": i, "ratio": ratio}
            for level, values in self.ratios.items()
            for i, ratio in enumerate(values)
        ]

    def summary(self) -> Dict[str, object]:
        return {
            "lemma": self.lemma,
            "ensemble": self.ensemble,
            "parameters": dict(self.parameters),
            "max_ratio_per_level": {str(level): value for level, value in self.max_ratios.items()},
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "trend_flat": self.trend_flat(),
        }


def _run_levels(
    levels: Sequence[float],
    samples: int,
    ratio: Callable[[float, int], float],
) -> Dict[float, List[float]]:
    runtime = Runtime()
    out: Dict[float, List[float]] = {}
    for level in levels:
        keyed = runtime.map_keyed(lambda i, lv=level: ratio(lv, i), range(samples))
        out[level] = [float(keyed[i]) for i in range(samples)]
    return out


def _xsb(coeffs: np.ndarray, times: np.ndarray, omega: np.ndarray, b: float, pad: int, weight: Optional[np.ndarray] = None) -> float:
    return xsb_from_coefficients(coeffs, times, omega, b, None, pad, weight)


def duhamel_ratio(source: ModalSource, omega: np.ndarray, b: float, T: float, nt: int, pad: int = 16) -> float:
    """||Duhamel(c F)||_{X^b} / ||c F||_{X^{b-1}} for one source"""
    times = time_grid(T, nt)
    extended = time_grid(T, nt, extended=True)
    forcing = source.evaluate(times)
    solution = duhamel(forcing, omega, T / nt)
    den = _xsb(forcing, times, omega, b - 1.0, pad)
    return _xsb(solution, extended, omega, b, pad) / den if den > 0 else 0.0


def verify_duhamel(b: float, opts: VerifyOptions = VerifyOptions(), seed: int = 0) -> LemmaCheck:
    """
    X^b energy estimate for the windowed Duhamel integral,
    ||c(t) int c(t-s) e^{-i(t-s)omega} F ds||_{X^b} <~ ||c F||_{X^{b-1}}.
    """
    if not 0.0 < b < 1.0:
        raise ValidationError(f"b={b} must lie in (0, 1)", field="b")
    ensemble = opts.ensemble_for(seed)
    omega = opts.mode_set().pair_frequencies()

    def ratio(level: float, i: int) -> float:
        return duhamel_ratio(ensemble.sample(i), omega, b, opts.T, opts.time_samples(int(level)), opts.pad)

    return LemmaCheck("duhamel", opts.ensemble, _run_levels(opts.levels, opts.ensemble, ratio), {"b": b, "T": opts.T})


def _quad(func: Callable[[float], float], lo: float, hi: float, pieces: int = 1, points: Optional[Sequence[float]] = None) -> float:
    edges = np.linspace(lo, hi, max(1, pieces) + 1)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            for left, right in zip(edges[:-1], edges[1:]):
                inside = [x for x in (points or ()) if left < x < right] or None
                value, _ = quad(func, left, right, points=inside, limit=400, epsabs=1e-13, epsrel=1e-10)
                total += value
        except IntegrationWarning as exc:
            raise QuadratureError(f"adaptive quadrature did not converge on [{lo:g}, {hi:g}]: {exc}") from exc
    return total


def _window_power(u: float, T: float) -> float:
    """|c_hat(u)|^2 for the indicator of [0, T)"""
    return T**2 * float(np.sinc(u * T / (2.0 * np.pi))) ** 2


def duhamel_single_mode_ratio(b: float, omega: float, tau0: float, T: float) -> float:
    """
    Closed-form ratio for F = e^{i tau0 t} on one mode with frequency omega.
    With s0 = omega + tau0 the two sides reduce to

        int <u>^{2b} |c(u)|^2 |c(u - s0)|^2 du   and   int <u>^{2b-2} |c(u - s0)|^2 du.
    """
    s0 = omega + tau0
    R = abs(s0) + 400.0 / T
    pieces = int(np.ceil(2.0 * R / (8.0 * np.pi / T)))
    num = _quad(lambda u: (1.0 + u * u) ** b * _window_power(u, T) * _window_power(u - s0, T), -R, R, pieces)
    den = _quad(lambda u: (1.0 + u * u) ** (b - 1.0) * _window_power(u - s0, T), -R, R, pieces)
    return math.sqrt(num / den)


def admissible_q(delta: float, p: float) -> float:
    """q with 2/p + 3/q = (5 - 4 delta)/2"""
    rest = (5.0 - 4.0 * delta) / 2.0 - 2.0 / p
    return 3.0 / rest if rest > 0 else math.inf


def check_strichartz_exponents(delta: float, p: float, q: float) -> None:
    if abs(2.0 / p + 3.0 / q - (5.0 - 4.0 * delta) / 2.0) > RELATION_TOL:
        raise ValidationError(
            f"(p, q) = ({p:g}, {q:g}) violates 2/p + 3/q = (5 - 4 delta)/2 for delta={delta:g}; "
            f"admissible q for p={p:g} is {admissible_q(delta, p):.12g}",
            field="q",
        )


def _require_three_dimensions(opts: VerifyOptions, lemma: str) -> None:
    if opts.d != 3:
        raise ValidationError(f"{lemma} is a three-dimensional estimate; got d={opts.d}", field="d")


def verify_strichartz(
    delta: float,
    p: float,
    q: Optional[float] = None,
    opts: VerifyOptions = VerifyOptions(),
    seed: int = 0,
) -> LemmaCheck:
    """||c F||_{L^p L^q L^2} / ||c F||_{X^delta} with 2/p + 3/q = (5 - 4 delta)/2 in three dimensions"""
    _require_three_dimensions(opts, "strichartz")
    q = admissible_q(delta, p) if q is None else q
    check_strichartz_exponents(delta, p, q)
    modes = opts.mode_set()
    ensemble = opts.ensemble_for(seed)
    omega = modes.pair_frequencies()

    def ratio(level: float, i: int) -> float:
        n = int(level)
        times = time_grid(opts.T, opts.time_samples(n))
        coeffs = ensemble.sample(i).evaluate(times)
        den = _xsb(coeffs, times, omega, delta, opts.pad)
        return modal_mixed_norm(coeffs, times, modes, n, p, q) / den if den > 0 else 0.0

    params = {"delta": delta, "p": p, "q": q, "T": opts.T}
    return LemmaCheck("strichartz", opts.ensemble, _run_levels(opts.levels, opts.ensemble, ratio), params)


def sigma_hat(mag1: np.ndarray, mag2: np.ndarray) -> np.ndarray:
    """|xi_1| |xi_2| / (|xi_1|^2 + |xi_2|^2), zero at the origin"""
    denom = mag1**2 + mag2**2
    return np.divide(mag1 * mag2, denom, out=np.zeros_like(denom), where=denom > 0)


def diagonal_time_sup(
    coeffs: np.ndarray,
    times: np.ndarray,
    modes: ModeSet,
    n: int,
    time_power: float = 0.25,
    space_power: Optional[float] = None,
    pad: int = 16,
) -> float:
    """
    sup_z ||(|d_t|^s [+ |grad|^r]) u(t, x, x + z)||_{L^2(dt dx)} for modal
    samples (nt, M*M), z ranging over the n^d sampling grid.

    The slice x -> u(t, x, x + z) has Fourier coefficient
    sum over xi_1 + xi_2 = zeta of a(t, xi_1, xi_2) e^{i xi_2 . z} / L^{d/2}.
    """
    points, _ = modes.sample_points(n)
    spectrum = time_fourier(times, coeffs, None, pad)
    sums, inverse = modes.total_momentum()
    eta = modes.vectors[np.arange(modes.pair_count) % modes.size]
    tau_symbol = np.abs(spectrum.tau) ** time_power if time_power else np.ones(spectrum.tau.size)
    zeta = (2.0 * np.pi / modes.L) * sums
    zeta_norm = magnitude([zeta[:, i] for i in range(modes.d)])
    acc = np.zeros(points.shape[0])
    for s in range(sums.shape[0]):
        pairs = np.flatnonzero(inverse == s)
        slice_hat = spectrum.values[:, pairs] @ np.exp(1j * eta[pairs] @ points.T)
        symbol = tau_symbol if space_power is None else tau_symbol + zeta_norm[s] ** space_power
        acc += np.sum(np.abs(symbol[:, None] * slice_hat) ** 2, axis=0)
    return float(np.sqrt(spectrum.measure * np.max(acc) / modes.L**modes.d))


def quartertime_single_mode_lhs(omega: float, tau0: float, T: float, volume: float) -> float:
    """
    Closed-form quarter-time norm of the Duhamel solution for F = e^{i tau0 t}
    on one mode pair; the slice modulus does not depend on z.
    """
    s0 = omega + tau0
    R = abs(s0) + abs(omega) + 400.0 / T
    pieces = int(np.ceil(2.0 * R / (8.0 * np.pi / T)))
    value = _quad(
        lambda tau: math.sqrt(abs(tau)) * _window_power(tau + omega, T) * _window_power(tau - tau0, T),
        -R,
        R,
        pieces,
        points=(0.0,),
    )
    return math.sqrt(value / (2.0 * np.pi) / volume)


def quartertime_terms(
    source: Optional[ModalSource],
    data: Optional[np.ndarray],
    opts: VerifyOptions,
    n: int,
) -> Tuple[float, float]:
    """(LHS, RHS) of the collapsing quarter-time estimate for one sample"""
    modes = opts.mode_set()
    omega = modes.pair_frequencies()
    nt = opts.time_samples(n)
    dt = opts.T / nt
    extended = time_grid(opts.T, nt, extended=True)
    times = extended[:nt]
    solution = np.zeros((2 * nt, modes.pair_count), dtype=complex)
    rhs = 0.0
    alpha = opts.alpha
    if data is not None:
        solution += free_solution(data, omega, extended, opts.T)
        rhs += float(np.linalg.norm(modes.pair_weight(alpha, alpha) * data))
    if source is not None:
        forcing = source.evaluate(times)
        solution += duhamel(forcing, omega, dt)
        if opts.weighted:
            mag1, mag2 = modes.pair_magnitudes()
            sig = sigma_hat(mag1, mag2)
            product_mag = mag1 * mag2
            w1 = product_mag ** ((1.0 + opts.a + opts.epsilon1) / 4.0) * sig**opts.gamma1
            w2 = product_mag ** ((1.0 + opts.epsilon1) / 4.0) * sig**opts.gamma2
            rhs += _xsb(forcing, times, omega, -(1.0 + opts.epsilon) / 2.0, opts.pad, w1)
            rhs += _xsb(forcing, times, omega, -(2.0 - opts.a + opts.epsilon) / 4.0, opts.pad, w2)
        else:
            rhs += _xsb(forcing, times, omega, -(1.0 + opts.epsilon) / 2.0, opts.pad, modes.pair_weight(alpha, alpha))
            rhs += _xsb(forcing, times, omega, -(1.0 + 2.0 * opts.epsilon) / 4.0, opts.pad, modes.pair_weight(alpha, alpha - 0.5))
    if opts.weighted:
        lhs = diagonal_time_sup(solution, extended, modes, n, opts.a / 4.0, opts.a / 2.0, opts.pad)
    else:
        lhs = diagonal_time_sup(solution, extended, modes, n, 0.25, None, opts.pad)
    return lhs, rhs


def check_weighted_parameters(opts: VerifyOptions) -> None:
    if not 0.0 < 2.0 * opts.epsilon < opts.epsilon1:
        raise ValidationError("the weighted estimate needs 0 < 2 epsilon < epsilon1", field="epsilon1")
    if not 1.0 <= opts.a < 2.0:
        raise ValidationError(f"a={opts.a} must lie in [1, 2)", field="a")
    if not 0.0 <= opts.gamma1 < (3.0 - opts.a - opts.epsilon1) / 4.0:
        raise ValidationError("gamma1 must lie in [0, (3 - a - epsilon1)/4)", field="gamma1")
    if not 0.0 <= opts.gamma2 < (3.0 - opts.epsilon1) / 4.0:
        raise ValidationError("gamma2 must lie in [0, (3 - epsilon1)/4)", field="gamma2")


def verify_quartertime(
    opts: VerifyOptions = VerifyOptions(),
    seed: int = 0,
    with_data: bool = True,
    with_source: bool = True,
) -> LemmaCheck:
    """
    sup_z || |d_t|^{1/4} u(t, x, x + z) || against the data and X^b source
    terms, u = c(t) e^{-it omega} u0 + Duhamel(c F). With opts.weighted the
    generalized weights (|d_t|^{a/4} + |grad|^{a/2}) and sigma-hat
    powers are used instead.
    """
    _require_three_dimensions(opts, "quartertime")
    if not (with_data or with_source):
        raise ValidationError("quartertime needs initial data, a source or both", field="with_data")
    if opts.weighted:
        check_weighted_parameters(opts)
    ensemble = opts.ensemble_for(seed)

    def ratio(level: float, i: int) -> float:
        source = ensemble.sample(i) if with_source else None
        data = ensemble.initial_data(i) if with_data else None
        lhs, rhs = quartertime_terms(source, data, opts, int(level))
        return lhs / rhs if rhs > 0 else 0.0

    params = {"alpha": opts.alpha, "epsilon": opts.epsilon, "T": opts.T, "weighted": float(opts.weighted)}
    if opts.weighted:
        params.update(gamma1=opts.gamma1, gamma2=opts.gamma2, a=opts.a, epsilon1=opts.epsilon1)
    return LemmaCheck("quartertime", opts.ensemble, _run_levels(opts.levels, opts.ensemble, ratio), params)


def mlogm_integral(M: float, A: float) -> float:
    """4 pi int_0^M r^2 / (1 + |A + r^2|) dr, the ball integral in three dimensions"""
    breaks = [math.sqrt(-A)] if A < 0 and math.sqrt(-A) < M else None
    value = _quad(lambda r: r * r / (1.0 + abs(A + r * r)), 0.0, M, 1, breaks)
    return 4.0 * math.pi * value


def verify_mlogm(Ms: Sequence[float], A_factors: Sequence[float]) -> LemmaCheck:
    """sup over A = factor * M^2 of the ball integral divided by M log M"""
    if any(M <= 1.0 for M in Ms):
        raise ValidationError("M log M needs every M > 1", field="mlogm_m")
    if any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise ValidationError("M values must be strictly increasing", field="mlogm_m")

    ratios = {float(M): [mlogm_integral(M, f * M * M) / (M * math.log(M)) for f in A_factors] for M in Ms}
    return LemmaCheck("mlogm", len(A_factors), ratios, {"A_factors": len(A_factors)})


def check_sobolev_exponents(p: float, q: float, alpha: float) -> None:
    if not 1.0 <= p <= q:
        raise ValidationError(f"Sobolev exponents need 1 <= p <= q (p={p:g}, q={q:g})", field="sobolev_q")
    if 1.0 / q < 1.0 / p - alpha / 3.0 - RELATION_TOL:
        raise ValidationError(f"1/q >= 1/p - alpha/3 fails for p={p:g}, q={q:g}, alpha={alpha:g}", field="sobolev_q")


def total_momentum_weight(modes: ModeSet, alpha: float) -> np.ndarray:
    """<xi_1 + xi_2>^alpha over flattened mode pairs"""
    sums = (modes.vectors[:, None, :] + modes.vectors[None, :, :]).reshape(-1, modes.d)
    return japanese([sums[:, i] for i in range(modes.d)], alpha)


def sobolev_angle_ratio(coeffs: np.ndarray, modes: ModeSet, n: int, p: float, q: float, alpha: float) -> float:
    """||F||_{L^q L^2} / ||<grad_x + grad_y>^alpha F||_{L^p L^2}"""
    den = modal_lebesgue_norm(total_momentum_weight(modes, alpha) * coeffs, modes, n, p)
    return modal_lebesgue_norm(coeffs, modes, n, q) / den if den > 0 else 0.0


def scalar_sobolev_ratio(coeffs: np.ndarray, modes: ModeSet, n: int, p: float, q: float, alpha: float) -> float:
    """||f||_{L^q} / ||<grad>^alpha f||_{L^p} for one function given by mode coefficients (M,)"""
    points, cell = modes.sample_points(n)
    E = modes.plane_waves(points)
    weight = japanese([modes.vectors[:, i] for i in range(modes.d)], alpha)
    num = (np.sum(np.abs(E @ coeffs) ** q) * cell) ** (1.0 / q)
    den = (np.sum(np.abs(E @ (weight * coeffs)) ** p) * cell) ** (1.0 / p)
    return float(num / den) if den > 0 else 0.0


def verify_sobolev_angle(
    p: float,
    q: float,
    alpha: float,
    opts: VerifyOptions = VerifyOptions(),
    seed: int = 0,
    kind: Optional[str] = None,
) -> LemmaCheck:
    """Sobolev embedding along the total momentum, ||F||_{L^q L^2} <~ ||<grad_x + grad_y>^alpha F||_{L^p L^2}"""
    _require_three_dimensions(opts, "sobolev-angle")
    check_sobolev_exponents(p, q, alpha)
    kind = kind or opts.kind
    if kind == "free":
        raise ValidationError("sobolev-angle takes random, diagonal or tensor kernels", field="kind")
    modes = opts.mode_set()
    ensemble = opts.ensemble_for(seed, kind)

    def ratio(level: float, i: int) -> float:
        return sobolev_angle_ratio(ensemble.sample(i).spatial(), modes, int(level), p, q, alpha)

    params = {"p": p, "q": q, "alpha": alpha}
    return LemmaCheck("sobolev-angle", opts.ensemble, _run_levels(opts.levels, opts.ensemble, ratio), params)
