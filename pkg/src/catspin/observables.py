"""Signals, noise, sensitivities and scans over final protocol states.

Sensitivity is the dimensionless Lambda = |dS/dphi| / DeltaS with the
linewidth conversion factor set to 1; the CLI applies an optional physical
scale.  Phase gradients use a central finite difference with step
h = min(1e-4, pi/(200 N)) plus one Richardson refinement step (evaluations
at phi +- h and phi +- h/2), which keeps the slope error orders of
magnitude below every tolerance used here.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from catspin.dicke import EnsembleDims, OperatorSet, SpinState
from catspin.protocols import Detection, ProtocolSpec, compile_protocol

# phi points per worker task; fixed so the task split (and therefore the
# output bytes) never depends on the worker count.
_CHUNK = 256

GAMMA_NOTE = "Gamma = 1 (dimensionless phase sensitivity)"


# --- single-state expectations ---------------------------------------------


def expect_jz(state: SpinState) -> float:
    """<J_z> from the diagonal populations."""
    return float(np.sum(state.dims.m_values() * state.populations()))


def variance_jz(state: SpinState) -> float:
    """<J_z^2> - <J_z>^2 (clipped at zero against rounding)."""
    m = state.dims.m_values()
    p = state.populations()
    mean = np.sum(m * p)
    return float(max(np.sum(m * m * p) - mean * mean, 0.0))


def collective_population(state: SpinState, m_index: int) -> float:
    """Population of the single Dicke state |E_m_index>."""
    if not 0 <= m_index <= state.dims.n_atoms:
        raise IndexError(
            f"collective index {m_index} outside [0, {state.dims.n_atoms}]"
        )
    return float(abs(state.amps[m_index]) ** 2)


def collective_distribution(state: SpinState) -> np.ndarray:
    """Populations of every Dicke state, in index order."""
    return state.populations()


# --- fringe machinery -------------------------------------------------------


@dataclass(frozen=True)
class FringePoint:
    """Signal, its standard deviation and its phase gradient at one phi."""

    phi: float
    signal: float
    sds: float
    pgs: float


def pgs_step(n_atoms: int) -> float:
    """Finite-difference step; must resolve fringes of period 2 pi / N."""
    return min(1e-4, math.pi / (200 * n_atoms))


def noise_floor(n_atoms: int) -> float:
    """SDS below this marks the operating point degenerate (0/0 extremum)."""
    return 1e-9 * n_atoms


def _resolve_csd_index(detection: Detection, dims: EnsembleDims) -> int:
    index = detection.index
    if index is None:
        raise ValueError("csd detection without a collective-state index")
    if index < 0:
        index += dims.dim
    if not 0 <= index <= dims.n_atoms:
        raise IndexError(f"csd index {detection.index} outside [0, {dims.n_atoms}]")
    return index


def _signal_and_sds(block: np.ndarray, detection: Detection, dims: EnsembleDims):
    """Per-column signal and SDS of a (dim, n_phi) amplitude block."""
    if detection.kind == "cd":
        m = dims.m_values()
        p = np.abs(block) ** 2
        s = m @ p
        var = (m * m) @ p - s * s
        sds = np.sqrt(np.maximum(var, 0.0))
        if detection.add_j:
            s = s + dims.j
        return s, sds
    idx = _resolve_csd_index(detection, dims)
    p = np.abs(block[idx]) ** 2
    # projector: Q^2 = Q, so the variance is p - p^2
    return p, np.sqrt(np.maximum(p - p * p, 0.0))


def _scan_arrays(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    phis: np.ndarray,
    mu_override=None,
    richardson: bool = True,
    threads: int | None = None,
):
    """signal, sds, pgs arrays over a phi grid, batched through the kernel."""
    phis = np.asarray(phis, dtype=float)
    if phis.size == 0:
        empty = np.empty(0)
        return empty, empty.copy(), empty.copy()
    kernel = compile_protocol(spec, dims, ops, mu_override)
    h = pgs_step(dims.n_atoms)

    def do_chunk(chunk: np.ndarray):
        shifts = [chunk, chunk + h, chunk - h]
        if richardson:
            shifts += [chunk + h / 2, chunk - h / 2]
        block = kernel.evaluate(np.concatenate(shifts))
        s, sds = _signal_and_sds(block, spec.detection, dims)
        n = len(chunk)
        d1 = (s[n : 2 * n] - s[2 * n : 3 * n]) / (2 * h)
        if richardson:
            d2 = (s[3 * n : 4 * n] - s[4 * n : 5 * n]) / h
            pgs = (4.0 * d2 - d1) / 3.0
        else:
            pgs = d1
        return s[:n], sds[:n], pgs

    chunks = [phis[i : i + _CHUNK] for i in range(0, len(phis), _CHUNK)]
    if threads is not None and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(do_chunk, chunks))
    else:
        parts = [do_chunk(c) for c in chunks]
    signal = np.concatenate([p[0] for p in parts])
    sds = np.concatenate([p[1] for p in parts])
    pgs = np.concatenate([p[2] for p in parts])
    return signal, sds, pgs


def fringe_scan(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    phi_grid,
    mu_override: float | None = None,
    richardson: bool = True,
    threads: int | None = None,
) -> list[FringePoint]:
    """Signal/SDS/PGS at every point of a sorted phi grid."""
    phis = np.asarray(phi_grid, dtype=float)
    if phis.size and not (np.all(np.isfinite(phis)) and np.all(np.diff(phis) >= 0)):
        raise ValueError("phi grid must be finite and sorted")
    signal, sds, pgs = _scan_arrays(
        spec, dims, ops, phis, mu_override, richardson, threads
    )
    return [
        FringePoint(phi=float(p), signal=float(s), sds=float(d), pgs=float(g))
        for p, s, d, g in zip(phis, signal, sds, pgs)
    ]


def point_sensitivity(point: FringePoint, dims: EnsembleDims) -> float | None:
    """Lambda at one fringe point, or None where the SDS is degenerate."""
    if point.sds < noise_floor(dims.n_atoms):
        return None
    return abs(point.pgs) / point.sds


# --- sensitivity ------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityResult:
    """Dimensionless sensitivity at an operating point.

    lam is None where the point is degenerate (SDS under the noise floor);
    the normalization note records the Gamma = 1 convention and whether the
    value was divided by N.
    """

    lam: float | None
    phi_star: float
    mu: float
    normalization: str = GAMMA_NOTE


def sensitivity_at(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    phi: float,
    mu_override: float | None = None,
    richardson: bool = True,
) -> SensitivityResult:
    """Lambda = |dS/dphi| / DeltaS at a single phi."""
    signal, sds, pgs = _scan_arrays(
        spec, dims, ops, np.array([phi]), mu_override, richardson
    )
    mu = _spec_mu(spec, mu_override)
    if sds[0] < noise_floor(dims.n_atoms):
        return SensitivityResult(lam=None, phi_star=float(phi), mu=mu)
    return SensitivityResult(
        lam=float(abs(pgs[0]) / sds[0]), phi_star=float(phi), mu=mu
    )


def _spec_mu(spec: ProtocolSpec, mu_override) -> float:
    if mu_override is not None:
        return float(mu_override)
    for pulse in spec.pulses:
        if pulse.kind == "squeeze":
            return pulse.mu
    return 0.0


def default_phi_window(n_points: int = 2001) -> np.ndarray:
    """Central-fringe search window phi in (0, pi/2]."""
    return np.linspace(0.0, math.pi / 2, n_points + 1)[1:]


def sensitivity_scan_mu(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    mu_grid,
    phi_window: np.ndarray | None = None,
    normalize_hl: bool = False,
    threads: int | None = None,
) -> list[SensitivityResult]:
    """Best Lambda over the phi window for each mu.

    Degenerate phi points are skipped; a mu where every point is degenerate
    yields an undefined entry.  With normalize_hl the values are divided by
    N, i.e. reported as a fraction of the Heisenberg limit.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    if np.any(mu_grid < 0) or np.any(mu_grid > math.pi / 2 + 1e-12):
        raise ValueError("mu grid must lie within [0, pi/2]")
    if phi_window is None:
        phi_window = default_phi_window()
    note = GAMMA_NOTE + ("; divided by N (HL fraction)" if normalize_hl else "")
    scale = dims.n_atoms if normalize_hl else 1.0

    results = []
    for mu in mu_grid:
        signal, sds, pgs = _scan_arrays(
            spec, dims, ops, phi_window, float(mu), threads=threads
        )
        valid = sds >= noise_floor(dims.n_atoms)
        if not valid.any():
            results.append(
                SensitivityResult(lam=None, phi_star=math.nan, mu=float(mu), normalization=note)
            )
            continue
        lam = np.where(valid, np.abs(pgs) / np.where(valid, sds, 1.0), -np.inf)
        best = int(np.argmax(lam))
        results.append(
            SensitivityResult(
                lam=float(lam[best] / scale),
                phi_star=float(phi_window[best]),
                mu=float(mu),
                normalization=note,
            )
        )
    return results


def parity_average(lambda_even: float, lambda_odd: float) -> float:
    """RMS average of the sensitivities for the two atom-number parities."""
    if lambda_even < 0 or lambda_odd < 0:
        raise ValueError("sensitivities must be nonnegative")
    return math.sqrt((lambda_even**2 + lambda_odd**2) / 2.0)


# --- central-fringe width ----------------------------------------------------


def central_fringe_fwhm(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    half_window: float = math.pi,
    n_points: int = 4001,
    mu_override: float | None = None,
) -> float:
    """Full width at half depth of the fringe lobe centered at phi = 0.

    The depth reference is the extreme signal value inside the window; the
    crossings nearest phi = 0 on each side are interpolated linearly.
    """
    phis = np.linspace(-half_window, half_window, n_points)
    signal, _, _ = _scan_arrays(spec, dims, ops, phis, mu_override)
    center = n_points // 2
    s0 = signal[center]
    span_max, span_min = signal.max(), signal.min()
    reference = span_max if (span_max - s0) >= (s0 - span_min) else span_min
    half_level = 0.5 * (s0 + reference)

    def first_crossing(direction: int) -> float:
        i = center
        while 0 < i < n_points - 1:
            a, b = i, i + direction
            if (signal[a] - half_level) * (signal[b] - half_level) <= 0:
                frac = (half_level - signal[a]) / (signal[b] - signal[a])
                return float(phis[a] + frac * (phis[b] - phis[a]))
            i += direction
        raise ValueError("no half-level crossing inside the window")

    return first_crossing(+1) - first_crossing(-1)


# --- excess-noise model -------------------------------------------------------


@dataclass(frozen=True)
class NoiseModelRow:
    """Analytic PGS/SDS multipliers of a protocol relative to a conventional
    interferometer operated at its maximum-slope point."""

    protocol: str
    pgs_scale: float
    sds_scale: float

    def __post_init__(self):
        if self.pgs_scale <= 0 or self.sds_scale <= 0:
            raise ValueError("PGS/SDS scale factors must be positive")


def noise_model_table(n_atoms: int) -> dict[str, NoiseModelRow]:
    """Scaling table behind the protocol-robustness comparison."""
    n = float(n_atoms)
    return {
        "crain": NoiseModelRow("crain", 1.0, 1.0),
        "tact": NoiseModelRow("tact", 1.0, 1.0 / math.sqrt(n / 2)),
        "esp": NoiseModelRow("esp", math.sqrt(n / 2), 1.0),
        "cd-scain": NoiseModelRow("cd-scain", n, math.sqrt(n)),
        "csd-scain": NoiseModelRow("csd-scain", 1.0, 1.0 / math.sqrt(n)),
    }


def baseline_pgs(n_atoms: int) -> float:
    """Conventional-interferometer slope N/2 at the operating point."""
    return n_atoms / 2.0


def baseline_sds(n_atoms: int) -> float:
    """Conventional-interferometer projection noise sqrt(N)/2."""
    return math.sqrt(n_atoms) / 2.0


def excess_noise_curve(
    row: NoiseModelRow, n_atoms: int, en_grid
) -> np.ndarray:
    """Lambda as a function of the excess-noise standard deviation.

    Lambda = |PGS| / sqrt(DeltaS_QPN^2 + DeltaS_EN^2), with the protocol's
    PGS and quantum projection noise taken from the scaling table.
    """
    en = np.asarray(en_grid, dtype=float)
    pgs = baseline_pgs(n_atoms) * row.pgs_scale
    qpn = baseline_sds(n_atoms) * row.sds_scale
    return pgs / np.sqrt(qpn**2 + en**2)


def excess_noise_crossover(row: NoiseModelRow, n_atoms: int) -> float:
    """DeltaS_EN at which excess noise equals the quantum projection noise,
    i.e. where Lambda has dropped by sqrt(2)."""
    return baseline_sds(n_atoms) * row.sds_scale
