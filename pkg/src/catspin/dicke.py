"""Collective-spin Hilbert space, Dicke-basis operators and elementary pulses.

An ensemble of N two-level atoms restricted to the permutation-symmetric
subspace is described by a total spin J = N/2.  States live in the
(N+1)-dimensional Dicke basis {|E_0>, ..., |E_N>}, where |E_k> is the
J_z eigenstate with eigenvalue m = k - J (|E_0> = all spins down).

Everything here is exact dense linear algebra: z-axis generators are
diagonal, x/y rotations go through a cached spectral factorization of the
real symmetric tridiagonal J_x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

# Largest ensemble the dense (N+1) x (N+1) machinery is sized for.  The
# one-time tridiagonal eigendecomposition and the cached dense rotation
# matrices stay well under a GB up to this point.
N_ATOMS_CAP = 4000


class DimensionError(ValueError):
    """Raised for invalid ensemble sizes or mismatched state/operator dims."""


@dataclass(frozen=True)
class EnsembleDims:
    """Size bookkeeping for an N-atom symmetric ensemble.

    Only the atom count is stored; the total spin j = N/2 and the basis
    dimension N+1 are derived so they can never fall out of sync.
    """

    n_atoms: int

    def __post_init__(self):
        if not isinstance(self.n_atoms, (int, np.integer)):
            raise DimensionError(f"n_atoms must be an integer, got {self.n_atoms!r}")
        if self.n_atoms < 1 or self.n_atoms > N_ATOMS_CAP:
            raise DimensionError(
                f"n_atoms must be in [1, {N_ATOMS_CAP}], got {self.n_atoms}"
            )

    @property
    def j(self) -> float:
        return self.n_atoms / 2

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    def m_values(self) -> np.ndarray:
        """J_z eigenvalues m = k - j for basis index k = 0 .. N."""
        return np.arange(self.dim) - self.j


@dataclass
class SpinState:
    """Complex amplitudes over the Dicke basis; index k holds <E_k|psi>."""

    dims: EnsembleDims
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (self.dims.dim,):
            raise DimensionError(
                f"amplitude vector has shape {self.amps.shape}, "
                f"expected ({self.dims.dim},)"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def populations(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def copy(self) -> "SpinState":
        return SpinState(self.dims, self.amps.copy())


def basis_state(dims: EnsembleDims, index: int) -> SpinState:
    """The Dicke state |E_index>."""
    if not 0 <= index <= dims.n_atoms:
        raise DimensionError(f"basis index {index} outside [0, {dims.n_atoms}]")
    amps = np.zeros(dims.dim, dtype=complex)
    amps[index] = 1.0
    return SpinState(dims, amps)


def _ladder_coefficients(dims: EnsembleDims) -> np.ndarray:
    """Raising coefficients sqrt((j-m)(j+m+1)) for m = -j .. j-1."""
    j = dims.j
    m = dims.m_values()[:-1]
    return np.sqrt((j - m) * (j + m + 1.0))


@dataclass(frozen=True)
class Eigensystem:
    """Spectral factorization A = vectors @ diag(values) @ vectors^dagger."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruction_error(self, matrix: np.ndarray) -> float:
        rebuilt = (self.vectors * self.values) @ self.vectors.conj().T
        return float(np.max(np.abs(rebuilt - matrix)))


@dataclass(frozen=True)
class OperatorSet:
    """Cached dense spin operators and spectral factorizations for one N.

    Immutable after construction; safe to share across scan workers.
    """

    dims: EnsembleDims
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jz_sq: np.ndarray
    jx_eigensystem: Eigensystem
    jy_eigensystem: Eigensystem
    m: np.ndarray = field(repr=False)

    def check_commutator(self) -> float:
        """Max-abs error of [jx, jy] - i*jz; exact structure check on demand."""
        comm = self.jx @ self.jy - self.jy @ self.jx
        return float(np.max(np.abs(comm - 1j * self.jz)))


def build_operator_set(dims: EnsembleDims) -> OperatorSet:
    """Build J_x, J_y, J_z for the Dicke basis of an N-atom ensemble.

    J_z is diagonal with entries m = -j .. j.  J_x and J_y are tridiagonal
    with off-diagonal elements A(j,m)/2 = sqrt((j-m)(j+m+1))/2.  The J_x
    eigensystem comes from a one-time real symmetric tridiagonal
    factorization; the J_y eigensystem reuses it through the exact diagonal
    similarity J_y = e^{-i(pi/2)J_z} J_x e^{+i(pi/2)J_z}.
    """
    m = dims.m_values()
    off = _ladder_coefficients(dims) / 2.0

    jx = np.zeros((dims.dim, dims.dim))
    idx = np.arange(dims.dim - 1)
    jx[idx + 1, idx] = off
    jx[idx, idx + 1] = off

    jy = np.zeros((dims.dim, dims.dim), dtype=complex)
    jy[idx + 1, idx] = -1j * off
    jy[idx, idx + 1] = 1j * off

    jz = np.diag(m)

    vals, vecs = eigh_tridiagonal(np.zeros(dims.dim), off)
    # The spectrum of J_x is exactly m = -j .. j; snapping removes the
    # O(eps*N) solver error so multiples of 2*pi rotate back exactly.
    vals = np.round(vals - m[0]) + m[0]
    jx_eig = Eigensystem(values=vals, vectors=vecs)

    phase = np.exp(-0.5j * np.pi * m)
    jy_eig = Eigensystem(values=vals, vectors=phase[:, None] * vecs)

    ops = OperatorSet(
        dims=dims,
        jx=jx,
        jy=jy,
        jz=jz,
        jz_sq=m**2,
        jx_eigensystem=jx_eig,
        jy_eigensystem=jy_eig,
        m=m,
    )
    for arr in (ops.jx, ops.jy, ops.jz, ops.jz_sq, vals, vecs, jy_eig.vectors, ops.m):
        arr.setflags(write=False)
    return ops


def _check_dims(state: SpinState, ops: OperatorSet):
    if state.dims != ops.dims:
        raise DimensionError(
            f"state is for N={state.dims.n_atoms}, operators for N={ops.dims.n_atoms}"
        )


def css_state(dims: EnsembleDims, theta: float, phi: float) -> SpinState:
    """Coherent spin state with every atom pointing along (theta, phi).

    Amplitude on |E_{N-k}> is sqrt(C(N,k)) e^{ik phi} cos^{N-k}(theta/2)
    sin^k(theta/2).  Binomials are taken in the log domain (via log-gamma)
    and exponentiated after subtracting the running maximum, which keeps the
    construction stable for N up to the cap.
    """
    n = dims.n_atoms
    k = np.arange(n + 1)

    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_c = np.where(n - k > 0, (n - k) * np.log(np.abs(c)), 0.0)
        log_s = np.where(k > 0, k * np.log(np.abs(s)), 0.0)
    log_mag = 0.5 * log_binom + log_c + log_s

    # Zero magnitude wherever cos or sin vanishes with a nonzero exponent
    # (the where() above still produces nan there from 0 * -inf).
    dead = ((c == 0.0) & (n - k > 0)) | ((s == 0.0) & (k > 0))
    log_mag = np.where(dead, -np.inf, log_mag)

    mag = np.exp(log_mag - np.max(log_mag))
    # Half-angle signs (theta outside [0, pi] folds in here) and azimuth.
    signs = np.sign(c) ** (n - k) * np.sign(s) ** k
    amps_k = mag * signs * np.exp(1j * k * phi)
    amps_k /= np.linalg.norm(amps_k)

    amps = amps_k[::-1].copy()  # entry k sits on |E_{N-k}>
    return SpinState(dims, amps)


def apply_rotation(
    state: SpinState, ops: OperatorSet, axis: str, angle: float
) -> SpinState:
    """Apply e^{-i angle J_axis}.

    z rotations are elementwise diagonal phases; x/y rotations go through
    the cached eigensystem as U e^{-i angle lambda} U^dagger.
    """
    _check_dims(state, ops)
    if not np.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle}")
    if axis == "z":
        return SpinState(state.dims, np.exp(-1j * angle * ops.m) * state.amps)
    if axis == "x":
        eig = ops.jx_eigensystem
    elif axis == "y":
        eig = ops.jy_eigensystem
    else:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    coeffs = eig.vectors.conj().T @ state.amps
    coeffs *= np.exp(-1j * angle * eig.values)
    return SpinState(state.dims, eig.vectors @ coeffs)


def apply_oats(state: SpinState, ops: OperatorSet, mu: float, sign: int) -> SpinState:
    """Apply the one-axis-twist unitary e^{+i sign mu J_z^2}.

    sign=-1 is the squeezing factor e^{-i mu J_z^2}; sign=+1 undoes it.
    """
    _check_dims(state, ops)
    if not np.isfinite(mu):
        raise ValueError(f"squeezing strength must be finite, got {mu}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return SpinState(state.dims, np.exp(1j * sign * mu * ops.jz_sq) * state.amps)


def apply_dark_phase(
    state: SpinState, ops: OperatorSet, phase: float, sign: int
) -> SpinState:
    """Apply the dark-zone phase e^{-i sign phase J_z} (elementwise in m)."""
    _check_dims(state, ops)
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return SpinState(state.dims, np.exp(-1j * sign * phase * ops.m) * state.amps)


def total_spin_expectation(state: SpinState, ops: OperatorSet) -> float:
    """<J_x^2 + J_y^2 + J_z^2>; equals j(j+1) on the symmetric subspace."""
    _check_dims(state, ops)
    jx_psi = ops.jx @ state.amps
    jy_psi = ops.jy @ state.amps
    jz_psi = ops.m * state.amps
    return float(
        np.vdot(jx_psi, jx_psi).real
        + np.vdot(jy_psi, jy_psi).real
        + np.vdot(jz_psi, jz_psi).real
    )


# --- pulses ---------------------------------------------------------------


@dataclass(frozen=True)
class Pulse:
    """One element of a protocol sequence.

    kind is 'rotate' (axis, angle), 'squeeze' (mu, sign: the applied
    unitary is e^{+i sign mu J_z^2}) or 'dark_phase' (fraction, sign: the
    applied unitary is e^{-i sign fraction*phi J_z} for scan phase phi).
    """

    kind: str
    axis: str | None = None
    angle: float | None = None
    mu: float | None = None
    fraction: float | None = None
    sign: int | None = None


def rotate_pulse(axis: str, angle: float) -> Pulse:
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be 'x', 'y' or 'z', got {axis!r}")
    if not np.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle}")
    return Pulse(kind="rotate", axis=axis, angle=float(angle))


def squeeze_pulse(mu: float, sign: int) -> Pulse:
    if not np.isfinite(mu):
        raise ValueError(f"squeezing strength must be finite, got {mu}")
    if sign not in (1, -1):
        raise ValueError(f"squeeze sign must be +1 or -1, got {sign}")
    return Pulse(kind="squeeze", mu=float(mu), sign=int(sign))


def dark_pulse(fraction: float, sign: int) -> Pulse:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"dark-zone fraction must be in (0, 1], got {fraction}")
    if sign not in (1, -1):
        raise ValueError(f"dark-zone sign must be +1 or -1, got {sign}")
    return Pulse(kind="dark_phase", fraction=float(fraction), sign=int(sign))


def apply_pulse(
    state: SpinState, ops: OperatorSet, pulse: Pulse, phi: float, mu_override=None
) -> SpinState:
    """Apply one pulse, binding the scan phase phi and optional mu override."""
    if pulse.kind == "rotate":
        return apply_rotation(state, ops, pulse.axis, pulse.angle)
    if pulse.kind == "squeeze":
        mu = pulse.mu if mu_override is None else float(mu_override)
        return apply_oats(state, ops, mu, pulse.sign)
    if pulse.kind == "dark_phase":
        return apply_dark_phase(state, ops, pulse.fraction * phi, pulse.sign)
    raise ValueError(f"unknown pulse kind {pulse.kind!r}")
