"""
Space-time diagnostics: mixed Lebesgue norms, collapsing (diagonal) norms,
quarter-time-derivative norms, X^{s,b} norms and smooth frequency cut-offs.

All norms act on the sharply windowed series c(t) F, with c the indicator of
[0, T). Space integrals are Riemann sums; time-frequency sums carry the
measure dtau / (2 pi).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_serializer, field_validator

from hfb_cli.core.errors import ValidationError, log_warning
from hfb_cli.core.physics.lattice import (
    FieldWeight,
    Grid,
    Kernel,
    apply_weights,
    field_weights,
    japanese,
    kernel_weights,
    magnitude,
    time_fourier,
    to_fourier,
    uniform_step,
    window_mask,
)
from hfb_cli.core.physics.potentials import PotentialSpec
from hfb_cli.core.physics.trace import SpaceTimeTrace

Sign = Literal["plus_plus", "plus_minus"]
MODE_CHUNK = 4096
OFFSET_CHUNK = 16


def _parse_exponent(value: Union[float, str]) -> float:
    if isinstance(value, str):
        token = value.strip().lower().lstrip("+.")
        if token in ("inf", "infinity"):
            return float("inf")
        return float(value)
    return float(value)


class NormConfig(BaseModel):
    """Exponents of the diagnostic norms"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = 0.55
    beta_prime: Optional[float] = None
    b: float = PydanticField(0.48, gt=0.0, lt=1.0)
    pq_pairs: Tuple[Tuple[float, float], ...] = ((2.0, 6.0), (float("inf"), 2.0))
    collapse_weight_params: Tuple[float, float, float, float] = (0.1, 0.1, 1.0, 0.1)
    include_script_n: bool = True
    pad: int = PydanticField(4, ge=4)

    @field_validator("pq_pairs", mode="before")
    @classmethod
    def _parse_pairs(cls, value: Sequence[Sequence[Union[float, str]]]) -> Tuple[Tuple[float, float], ...]:
        pairs = tuple(tuple(_parse_exponent(e) for e in pair) for pair in value)
        for pair in pairs:
            if len(pair) != 2 or min(pair) < 1.0:
                raise ValueError(f"exponent pair {pair} must be two numbers >= 1")
        return pairs  # type: ignore[return-value]

    @field_serializer("pq_pairs")
    def _dump_pairs(self, pairs: Tuple[Tuple[float, float], ...]) -> List[List[Union[float, str]]]:
        return [["inf" if np.isinf(e) else e for e in pair] for pair in pairs]

    def beta_prime_for(self, beta: float) -> float:
        return self.beta_prime if self.beta_prime is not None else 0.5 * (beta + 1.0)


def _exponent_label(p: float) -> str:
    return "inf" if np.isinf(p) else f"{p:g}"


@dataclass
class NormReport:
    """Named scalar norms for one evaluation window"""

    T: float
    terms: Dict[str, float] = field(default_factory=dict)
    nt_lambda: float = 0.0
    nt_gamma_dot: float = 0.0
    nt_phi: float = 0.0
    script_n: Optional[float] = None

    def as_row(self) -> Dict[str, Optional[float]]:
        row: Dict[str, Optional[float]] = {
            "T": self.T,
            "nt_lambda": self.nt_lambda,
            "nt_gamma_dot": self.nt_gamma_dot,
            "nt_phi": self.nt_phi,
            "script_n": self.script_n,
        }
        row.update(self.terms)
        return row


def _lp(values: np.ndarray, p: float, weight: float, axis: int) -> np.ndarray:
    if np.isinf(p):
        return np.max(values, axis=axis, initial=0.0)
    return (np.sum(values**p, axis=axis) * weight) ** (1.0 / p)


def mixed_norm_array(
    samples: np.ndarray,
    times: np.ndarray,
    grid: Grid,
    p: float,
    q: float,
    T: Optional[float] = None,
    weight: Optional[FieldWeight] = None,
    order: str = "xy",
) -> float:
    """
    ||F||_{L^p(dt) L^q(dx) L^2(dy)} of kernel samples (nt, size, size), or
    ||F||_{L^p(dt) L^q(dx)} of field samples (nt, size).
    """
    samples = np.asarray(samples)
    kernel = samples.ndim == 3
    mask = window_mask(times, T)
    dt = uniform_step(times)
    data = samples[mask]
    if weight is not None:
        w = kernel_weights(grid, weight) if kernel else field_weights(grid, weight)
        data = apply_weights(data, grid, w, 2 if kernel else 1)
    if kernel:
        if order == "yx":
            data = np.swapaxes(data, 1, 2)
        elif order != "xy":
            raise ValidationError(f"unknown variable order {order!r}", field="order")
        inner = np.sqrt(np.sum(np.abs(data) ** 2, axis=2) * grid.cell)
    else:
        inner = np.abs(data)
    per_time = _lp(inner, q, grid.cell, axis=1)
    return float(_lp(per_time, p, dt, axis=0))


def mixed_norm(
    trace: SpaceTimeTrace,
    weight: Optional[FieldWeight],
    p: float,
    q: float,
    kind: str = "lambda",
    T: Optional[float] = None,
    order: str = "xy",
) -> float:
    """Mixed norm of the stored kernel snapshots (kind 'lambda' or 'gamma') or of phi"""
    if kind == "phi":
        return mixed_norm_array(trace.phi, trace.times, trace.grid, p, q, T, weight)
    return mixed_norm_array(trace.kernels(kind), trace.kernel_times, trace.grid, p, q, T, weight, order)


def collapse_weight(alpha: float, kind: str) -> FieldWeight:
    """<xi>^alpha for Lambda slices, <xi>^(alpha - 1/2) |xi|^(1/2) for Gamma slices"""
    if kind == "gamma":
        return lambda xi: japanese(xi, alpha - 0.5) * np.sqrt(magnitude(xi))
    return lambda xi: japanese(xi, alpha)


def _slice_offsets(trace: SpaceTimeTrace, convention: str) -> List[int]:
    """
    Stored offsets usable for a convention. The (x + w, x - w) slice is the
    (x, x - 2w) slice translated in x, so it needs offsets with even components.
    """
    if convention == "shift":
        return list(range(len(trace.offsets)))
    if convention == "symmetric":
        return [i for i, w in enumerate(trace.offsets) if all(c % 2 == 0 for c in w)]
    raise ValidationError(f"unknown diagonal convention {convention!r}", field="convention")


def _warn_partial(trace: SpaceTimeTrace, what: str) -> None:
    if not trace.full_offset_set:
        log_warning(
            f"{what}: sup over {len(trace.offsets)} of {trace.grid.size} lattice offsets is an under-approximation",
            help_text="trace every offset (offset_stride 1) for the exact supremum",
        )


def collapse_norm(
    trace: SpaceTimeTrace,
    alpha: float,
    kind: str = "lambda",
    T: Optional[float] = None,
    convention: str = "shift",
    warn: bool = True,
) -> float:
    """sup_w ||W(grad) c(t) K(t, x, x + w)||_{L^2(dt dx)} over the traced offsets"""
    if warn:
        _warn_partial(trace, "collapse norm")
    grid = trace.grid
    mask = window_mask(trace.times, T)
    dt = trace.dt
    w = field_weights(grid, collapse_weight(alpha, kind))
    block = trace.diag_block(kind)
    best = 0.0
    for idx in _slice_offsets(trace, convention):
        weighted = apply_weights(block[mask, idx], grid, w, 1)
        best = max(best, float(np.sum(np.abs(weighted) ** 2)) * dt * grid.cell)
    return float(np.sqrt(best))


def diag_time_norm(
    slices: np.ndarray,
    times: np.ndarray,
    grid: Grid,
    T: Optional[float] = None,
    time_power: float = 0.25,
    space_power: Optional[float] = None,
    pad: int = 4,
) -> np.ndarray:
    """
    Per-offset ||(|d_t|^s [+ |grad|^r]) c(t) f||_{L^2(dt dx)} for slices of
    shape (nt, n_offsets, size).
    """
    spatial = to_fourier(slices, grid, 1).reshape(slices.shape[0], slices.shape[1], grid.size)
    coeffs = spatial * (grid.cell / grid.volume**0.5)
    spectrum = time_fourier(times, coeffs, T, pad)
    tau = np.abs(spectrum.tau).reshape(-1, 1, 1)
    symbol = tau**time_power if time_power else np.ones_like(tau)
    if space_power is not None:
        symbol = symbol + magnitude(grid.xi).reshape(1, 1, -1) ** space_power
    power = np.abs(symbol * spectrum.values) ** 2
    return np.sqrt(spectrum.measure * np.sum(power, axis=(0, 2)))


def quarter_time_norm(
    trace: SpaceTimeTrace,
    kind: str = "lambda",
    T: Optional[float] = None,
    convention: str = "shift",
    pad: int = 4,
    warn: bool = True,
) -> float:
    """sup_w || |d_t|^{1/4} c(t) K(t, x, x + w) ||_{L^2(dt dx)}"""
    if warn:
        _warn_partial(trace, "quarter-time norm")
    indices = _slice_offsets(trace, convention)
    block = trace.diag_block(kind)
    best = 0.0
    for start in range(0, len(indices), OFFSET_CHUNK):
        chunk = indices[start : start + OFFSET_CHUNK]
        values = diag_time_norm(block[:, chunk], trace.times, trace.grid, T, 0.25, None, pad)
        best = max(best, float(np.max(values, initial=0.0)))
    return best


def mode_frequencies(grid: Grid, sign: Sign) -> np.ndarray:
    """|xi|^2 + |eta|^2 or |xi|^2 - |eta|^2 on the flattened (xi, eta) grid"""
    k2 = grid.k_squared.reshape(-1)
    if sign == "plus_plus":
        return (k2[:, None] + k2[None, :]).reshape(-1)
    if sign == "plus_minus":
        return (k2[:, None] - k2[None, :]).reshape(-1)
    raise ValidationError(f"unknown X-space sign {sign!r}", field="sign")


def kernel_modal_coefficients(kernels: np.ndarray, grid: Grid) -> np.ndarray:
    """(nt, size, size) kernels to orthonormal-basis coefficients (nt, size**2)"""
    spectrum = to_fourier(kernels, grid, 2).reshape(kernels.shape[0], -1)
    return spectrum * (grid.cell**2 / grid.volume)


def xsb_from_coefficients(
    coeffs: np.ndarray,
    times: np.ndarray,
    omega: np.ndarray,
    b: float,
    T: Optional[float] = None,
    pad: int = 4,
    spatial_weight: Optional[np.ndarray] = None,
) -> float:
    """
    ||<tau + omega_m>^b a_m(tau)|| summed over modes m, for coefficients
    a of shape (nt, modes) and mode frequencies omega.
    """
    total = 0.0
    modes = coeffs.shape[1]
    for start in range(0, modes, MODE_CHUNK):
        stop = min(modes, start + MODE_CHUNK)
        block = coeffs[:, start:stop]
        if spatial_weight is not None:
            block = block * spatial_weight[start:stop]
        spectrum = time_fourier(times, block, T, pad)
        symbol = japanese([spectrum.tau[:, None] + omega[None, start:stop]], 2.0 * b)
        total += spectrum.measure * float(np.sum(symbol * np.abs(spectrum.values) ** 2))
    return float(np.sqrt(total))


def _require_unit_stride(trace: SpaceTimeTrace) -> None:
    if trace.kernel_stride != 1:
        raise ValidationError(
            f"X^{{s,b}} norms need kernel snapshots at every step (stride is {trace.kernel_stride})",
            field="store_every",
        )


def xsb_norm(
    trace: SpaceTimeTrace,
    b: float,
    sign: Sign = "plus_plus",
    kind: str = "lambda",
    T: Optional[float] = None,
    weight: Optional[FieldWeight] = None,
    pad: int = 4,
) -> float:
    """
    X^b norm of c(t) K with symbol <tau + |xi|^2 +- |eta|^2>. With
    sign 'plus_minus' the stored Gamma is conjugated first.
    """
    _require_unit_stride(trace)
    grid = trace.grid
    kernels = trace.kernels(kind)
    if sign == "plus_minus":
        kernels = kernels.conj()
    coeffs = kernel_modal_coefficients(kernels, grid)
    spatial = None if weight is None else kernel_weights(grid, weight).reshape(-1)
    return xsb_from_coefficients(coeffs, trace.times, mode_frequencies(grid, sign), b, T, pad, spatial)


def dominant_symbol(trace: SpaceTimeTrace, b: float, sign: Sign = "plus_plus", kind: str = "lambda", T: Optional[float] = None, pad: int = 4) -> float:
    """<tau + omega>^b at the largest space-time Fourier coefficient"""
    _require_unit_stride(trace)
    grid = trace.grid
    kernels = trace.kernels(kind)
    if sign == "plus_minus":
        kernels = kernels.conj()
    coeffs = kernel_modal_coefficients(kernels, grid)
    spectrum = time_fourier(trace.times, coeffs, T, pad)
    j, m = np.unravel_index(np.argmax(np.abs(spectrum.values)), spectrum.values.shape)
    omega = mode_frequencies(grid, sign)[m]
    return float(japanese([np.asarray(spectrum.tau[j] + omega)], b))


def smooth_cutoff(r: np.ndarray) -> np.ndarray:
    """C^infinity profile equal to 1 on [0, 1] and 0 on [2, infinity)"""
    r = np.asarray(r, dtype=float)

    def bump(s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s)
        positive = s > 0
        out[positive] = np.exp(-1.0 / s[positive])
        return out

    upper = bump(2.0 - r)
    lower = bump(r - 1.0)
    out = np.where(r <= 1.0, 1.0, 0.0)
    middle = (r > 1.0) & (r < 2.0)
    out[middle] = upper[middle] / (upper[middle] + lower[middle])
    return out


def dyadic_index(M: float) -> int:
    """I with 2^I < M <= 2^(I+1)"""
    if M < 1:
        raise ValidationError(f"cutoff M={M} must be at least 1", field="M")
    return int(np.ceil(np.log2(M))) - 1


def projection_symbol(grid: Grid, mode: str, M: float) -> np.ndarray:
    """phi(|xi -+ eta| / 2^I) on the (xi, eta) grid, shape `shape * 2`"""
    scale = 2.0 ** dyadic_index(M)
    xi, eta = grid.pair_xi()
    if mode == "xi_minus_eta":
        r = magnitude([a - b for a, b in zip(xi, eta)])
    elif mode == "xi_plus_eta":
        r = magnitude([a + b for a, b in zip(xi, eta)])
    else:
        raise ValidationError(f"unknown projection mode {mode!r}", field="mode")
    return smooth_cutoff(r / scale)


def freq_projection(
    target: Union[Kernel, np.ndarray], mode: str, M: float, side: str = "low", grid: Optional[Grid] = None
) -> Union[Kernel, np.ndarray]:
    """
    Smooth projection onto |xi -+ eta| below (low) or above (high) the dyadic
    scale of M. low + high is the identity; neither side is idempotent.
    """
    if side not in ("low", "high"):
        raise ValidationError(f"unknown projection side {side!r}", field="side")
    if isinstance(target, Kernel):
        grid = target.grid
        values = target.values
    else:
        if grid is None:
            raise ValidationError("a grid is required to project raw snapshot arrays", field="grid")
        values = np.asarray(target)
    symbol = projection_symbol(grid, mode, M)
    low = apply_weights(values, grid, symbol, 2)
    out = low if side == "low" else values - low
    if isinstance(target, Kernel):
        return Kernel(grid, out, target.symmetry)
    return out


def sobolev_pair_weight(alpha: float) -> FieldWeight:
    """<xi>^alpha <eta>^alpha"""
    return lambda xi, eta: japanese(xi, alpha) * japanese(eta, alpha)


def _mixed_terms(
    trace: SpaceTimeTrace, kind: str, cfg: NormConfig, T: Optional[float], prefix: str, weight: FieldWeight
) -> Dict[str, float]:
    terms: Dict[str, float] = {}
    for p, q in cfg.pq_pairs:
        label = f"L{_exponent_label(p)}L{_exponent_label(q)}L2"
        for order in ("xy", "yx"):
            terms[f"{prefix}_{label}_{order}"] = mixed_norm(trace, weight, p, q, kind, T, order)
    return terms


def composite_norms(
    trace: SpaceTimeTrace, cfg: NormConfig, spec: Optional[PotentialSpec] = None, T: Optional[float] = None
) -> NormReport:
    """
    N_T(Lambda), the homogeneous N_T(Gamma), N_T(phi) and, when kernels are
    stored at every step and the potential is known, the composite norm built
    from frequency-projected X^b pieces and the (x + w, x - w) diagonal terms.
    """
    window = float(T) if T is not None else float(trace.times[-1] + trace.dt)
    report = NormReport(T=window)
    alpha = cfg.alpha
    pair_weight = sobolev_pair_weight(alpha)
    _warn_partial(trace, "diagonal norms")

    lam_terms = _mixed_terms(trace, "lambda", cfg, T, "lambda", pair_weight)
    lam_terms["lambda_collapse"] = collapse_norm(trace, alpha, "lambda", T, warn=False)
    lam_terms["lambda_quarter_time"] = quarter_time_norm(trace, "lambda", T, pad=cfg.pad, warn=False)
    report.nt_lambda = float(sum(lam_terms.values()))

    gamma_terms = _mixed_terms(trace, "gamma", cfg, T, "gamma", pair_weight)
    gamma_terms["gamma_collapse"] = collapse_norm(trace, alpha, "gamma", T, warn=False)
    report.nt_gamma_dot = float(sum(gamma_terms.values()))

    phi_terms: Dict[str, float] = {}
    phi_weight = lambda xi: japanese(xi, alpha)  # noqa: E731
    for p, q in cfg.pq_pairs:
        phi_terms[f"phi_L{_exponent_label(p)}L{_exponent_label(q)}"] = mixed_norm(trace, phi_weight, p, q, "phi", T)
    report.nt_phi = float(sum(phi_terms.values()))

    report.terms.update(lam_terms)
    report.terms.update(gamma_terms)
    report.terms.update(phi_terms)

    if cfg.include_script_n and spec is not None and trace.kernel_stride == 1:
        script_terms = _script_terms(trace, cfg, spec, T)
        report.terms.update(script_terms)
        report.script_n = float(sum(script_terms.values()))
    return report


def _script_terms(trace: SpaceTimeTrace, cfg: NormConfig, spec: PotentialSpec, T: Optional[float]) -> Dict[str, float]:
    grid = trace.grid
    M = spec.big_n ** cfg.beta_prime_for(spec.beta)
    b = cfg.b
    pair_w = kernel_weights(grid, sobolev_pair_weight(cfg.alpha))
    low_minus = projection_symbol(grid, "xi_minus_eta", M)
    low_plus = projection_symbol(grid, "xi_plus_eta", M)
    low_low = low_minus * low_plus

    coeffs = kernel_modal_coefficients(trace.lambda_snaps, grid)
    omega = mode_frequencies(grid, "plus_plus")

    def xsb(weight: Optional[np.ndarray]) -> float:
        flat = None if weight is None else weight.reshape(-1)
        return xsb_from_coefficients(coeffs, trace.times, omega, b, T, cfg.pad, flat)

    terms: Dict[str, float] = {
        "script_high_minus_xsb": xsb(pair_w * (1.0 - low_minus)),
        "script_high_plus_xsb": xsb(pair_w * (1.0 - low_plus)),
    }
    for p, q in cfg.pq_pairs:
        label = f"L{_exponent_label(p)}L{_exponent_label(q)}L2"
        for order in ("xy", "yx"):
            terms[f"script_low_{label}_{order}"] = mixed_norm_array(
                trace.lambda_snaps, trace.kernel_times, grid, p, q, T, pair_w * low_low, order
            )
    terms["script_collapse_sym"] = collapse_norm(trace, cfg.alpha, "lambda", T, convention="symmetric", warn=False)
    terms["script_quarter_time_sym"] = quarter_time_norm(trace, "lambda", T, convention="symmetric", pad=cfg.pad, warn=False)
    terms["script_xsb"] = xsb(None)
    terms["script_low_xsb_over_N"] = xsb(pair_w * low_low) / spec.big_n
    return terms


def xsb_dual_estimate(
    coeffs: np.ndarray,
    times: np.ndarray,
    omega: np.ndarray,
    b: float,
    T: Optional[float] = None,
    samples: int = 64,
    seed: int = 0,
    pad: int = 4,
) -> Tuple[float, float]:
    """
    ||F||_{X^{-b}} computed directly and as the dual value
    sup |<F, G>| / ||G||_{X^b} over the span of `samples` random G.
    Returns (direct, dual). dual never exceeds direct, grows with samples
    for a fixed seed and reaches direct once the samples span every mode.
    """
    spectrum = time_fourier(times, coeffs, T, pad)
    weight = japanese([spectrum.tau[:, None] + omega[None, :]], 1.0) ** b
    f_hat = spectrum.values
    measure = spectrum.measure
    direct = float(np.sqrt(measure * np.sum(np.abs(f_hat / weight) ** 2)))

    target = (f_hat / weight).reshape(-1)
    w = weight.reshape(-1)
    rng = np.random.default_rng(seed)
    count = max(1, min(samples, target.size))
    # one row per candidate G, weighted into the X^b inner product
    weighted = np.empty((count, target.size), dtype=complex)
    for i in range(count):
        weighted[i] = w * (rng.standard_normal(target.size) + 1j * rng.standard_normal(target.size))
    basis, _ = np.linalg.qr(weighted.T)
    dual = float(np.sqrt(measure) * np.linalg.norm(basis.conj().T @ target))
    return direct, dual
