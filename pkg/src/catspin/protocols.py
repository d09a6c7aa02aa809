"""Pulse-sequence protocols: built-ins, execution, and a tiny-N product-space oracle.

The built-in sequences (CRAIN, SCAIN, CAC, COSAC, SCAC) are stored
right-to-left in temporal order, i.e. pulses[0] acts first on the initial
state |E_0> = |-z>.  Dark-zone pulses bind the scan phase phi, squeeze
pulses bind mu; everything else is fixed at construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from catspin.dicke import (
    DimensionError,
    EnsembleDims,
    OperatorSet,
    Pulse,
    SpinState,
    apply_pulse,
    basis_state,
    dark_pulse,
    rotate_pulse,
    squeeze_pulse,
)

PROTOCOL_IDS = ("crain", "scain", "cac", "cosac", "scac")

ORACLE_MAX_ATOMS = 4


@dataclass(frozen=True)
class Detection:
    """What is measured on the final state.

    kind 'cd' measures J_z (conventional detection; with add_j the signal is
    the spin-up population count j + J_z, the usual clock convention).
    kind 'csd' measures the population of the single Dicke state |E_index>;
    its index may be negative (python-style, -1 is the topmost state) or
    None, in which case builtin() fills the protocol's default.
    """

    kind: str
    index: int | None = None
    add_j: bool = False

    def __post_init__(self):
        if self.kind not in ("cd", "csd"):
            raise ValueError(f"detection kind must be 'cd' or 'csd', got {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "csd":
            out["index"] = self.index
        if self.add_j:
            out["add_j"] = True
        return out

    @staticmethod
    def from_dict(data: dict) -> "Detection":
        return Detection(
            kind=data["kind"],
            index=data.get("index"),
            add_j=bool(data.get("add_j", False)),
        )


@dataclass(frozen=True)
class ProtocolParams:
    """Knobs of the cat-state protocols: squeezing mu, auxiliary rotation
    axis, corrective rotation sign, and the detection used on the output."""

    mu: float = np.pi / 2
    ara: str = "x"
    xi: int = -1
    detection: Detection | None = None

    def __post_init__(self):
        if self.ara not in ("x", "y"):
            raise ValueError(f"auxiliary rotation axis must be 'x' or 'y', got {self.ara!r}")
        if self.xi not in (1, -1):
            raise ValueError(f"xi must be +1 or -1, got {self.xi}")
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class ProtocolSpec:
    """Named, ordered pulse sequence plus the detection convention."""

    name: str
    pulses: tuple[Pulse, ...]
    detection: Detection

    @property
    def scan_phi_indices(self) -> tuple[int, ...]:
        """Pulse positions that bind the scan phase phi."""
        return tuple(i for i, p in enumerate(self.pulses) if p.kind == "dark_phase")

    @property
    def scan_mu_indices(self) -> tuple[int, ...]:
        """Pulse positions that bind the squeezing strength mu."""
        return tuple(i for i, p in enumerate(self.pulses) if p.kind == "squeeze")

    def validate(self):
        """Check the structural conventions of the built-in families."""
        darks = [p for p in self.pulses if p.kind == "dark_phase"]
        base = self.name.split("-")[-1].lower()
        if base in ("crain", "scain"):
            if len(darks) != 2 or {d.sign for d in darks} != {1, -1} or any(
                d.fraction != 0.5 for d in darks
            ):
                raise ValueError(
                    f"{self.name}: expected two half-phase dark zones of opposite sign"
                )
        elif base in ("cac", "cosac", "scac"):
            if len(darks) != 1 or darks[0].fraction != 1.0:
                raise ValueError(f"{self.name}: expected one full-phase dark zone")

    def to_json(self) -> str:
        pulses = []
        for p in self.pulses:
            if p.kind == "rotate":
                pulses.append({"kind": "rotate", "axis": p.axis, "angle": p.angle})
            elif p.kind == "squeeze":
                pulses.append({"kind": "squeeze", "mu": p.mu, "mu_sign": p.sign})
            else:
                pulses.append(
                    {"kind": "dark_phase", "fraction": p.fraction, "sign": p.sign}
                )
        doc = {"name": self.name, "pulses": pulses, "detection": self.detection.to_dict()}
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ProtocolSpec":
        doc = json.loads(text)
        pulses = []
        for p in doc["pulses"]:
            kind = p["kind"]
            if kind == "rotate":
                pulses.append(rotate_pulse(p["axis"], p["angle"]))
            elif kind == "squeeze":
                pulses.append(squeeze_pulse(p["mu"], p["mu_sign"]))
            elif kind == "dark_phase":
                pulses.append(dark_pulse(p["fraction"], p["sign"]))
            else:
                raise ValueError(f"unknown pulse kind {kind!r}")
        return ProtocolSpec(
            name=doc["name"],
            pulses=tuple(pulses),
            detection=Detection.from_dict(doc["detection"]),
        )


def builtin(protocol_id: str, params: ProtocolParams | None = None) -> ProtocolSpec:
    """Build one of the five built-in protocols.

    CRAIN   pi/2 - dark(phi/2) - pi - dark(phi/2) - pi/2, all about x.
    SCAIN   CRAIN with squeeze + auxiliary rotation inserted after the first
            pi/2 and their correction (sign xi) + unsqueeze before the last.
    CAC     pi/2 - dark(phi) - pi/2 Ramsey clock; signal is j + <J_z>.
    COSAC   CAC pulses, detecting the population of |E_N>.
    SCAC    CAC with squeeze/rotation and correction/unsqueeze around the
            dark zone.
    """
    if params is None:
        params = ProtocolParams()
    pid = protocol_id.lower()
    mu, ara, xi = params.mu, params.ara, params.xi
    half = np.pi / 2

    if pid == "crain":
        pulses = (
            rotate_pulse("x", half),
            dark_pulse(0.5, +1),
            rotate_pulse("x", np.pi),
            dark_pulse(0.5, -1),
            rotate_pulse("x", half),
        )
        detection = params.detection or Detection("cd")
        name = "CRAIN"
    elif pid == "scain":
        pulses = (
            rotate_pulse("x", half),
            squeeze_pulse(mu, -1),
            rotate_pulse(ara, half),
            dark_pulse(0.5, +1),
            rotate_pulse("x", np.pi),
            dark_pulse(0.5, -1),
            rotate_pulse(ara, xi * half),
            squeeze_pulse(mu, +1),
            rotate_pulse("x", half),
        )
        detection = params.detection or Detection("cd")
        name = "SCAIN"
    elif pid == "cac":
        pulses = (
            rotate_pulse("x", half),
            dark_pulse(1.0, +1),
            rotate_pulse("x", half),
        )
        detection = params.detection or Detection("cd", add_j=True)
        name = "CAC"
    elif pid == "cosac":
        pulses = (
            rotate_pulse("x", half),
            dark_pulse(1.0, +1),
            rotate_pulse("x", half),
        )
        # index -1 marks "topmost collective state"; resolved against dims at
        # measurement time by observables.
        detection = params.detection or Detection("csd", index=-1)
        name = "COSAC"
    elif pid == "scac":
        pulses = (
            rotate_pulse("x", half),
            squeeze_pulse(mu, -1),
            rotate_pulse(ara, half),
            dark_pulse(1.0, +1),
            rotate_pulse(ara, xi * half),
            squeeze_pulse(mu, +1),
            rotate_pulse("x", half),
        )
        detection = params.detection or Detection("cd")
        name = "SCAC"
    else:
        raise ValueError(f"unknown protocol {protocol_id!r}; choose from {PROTOCOL_IDS}")

    if detection.kind == "csd" and detection.index is None:
        # interferometers read out the bottom state, clocks the top one
        default_index = 0 if pid in ("crain", "scain") else -1
        detection = Detection("csd", index=default_index, add_j=detection.add_j)

    spec = ProtocolSpec(name=name, pulses=pulses, detection=detection)
    spec.validate()
    return spec


def initial_state(dims: EnsembleDims) -> SpinState:
    """All spins down: |E_0> = |-z>."""
    return basis_state(dims, 0)


def run(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    phi: float,
    mu_override: float | None = None,
    n_pulses: int | None = None,
) -> SpinState:
    """Run the pulse sequence on |E_0> and return the final state.

    n_pulses truncates the sequence (used for stage-resolved snapshots);
    mu_override rebinds the squeeze strength of every squeeze pulse while
    keeping each pulse's sign.
    """
    if dims != ops.dims:
        raise DimensionError("dims and operator set disagree")
    state = initial_state(dims)
    pulses = spec.pulses if n_pulses is None else spec.pulses[:n_pulses]
    for pulse in pulses:
        state = apply_pulse(state, ops, pulse, phi, mu_override)
    return state


# --- batched scan kernel ----------------------------------------------------


@dataclass(frozen=True)
class CompiledProtocol:
    """Fixed pulses folded into dense segment matrices for phi scans.

    The final state is  M_k D_k(phi) ... M_1 D_1(phi) v0  where the D_i are
    the dark-zone diagonals and v0 already includes every pulse before the
    first dark zone.  Evaluating a phi grid is then a handful of
    (dim x dim) @ (dim x n_phi) products.
    """

    dims: EnsembleDims
    v0: np.ndarray
    segments: tuple[tuple[tuple[float, int], np.ndarray], ...]
    m: np.ndarray

    def evaluate(self, phis: np.ndarray) -> np.ndarray:
        """Final amplitudes for each phi, as a (dim, n_phi) array."""
        phis = np.atleast_1d(np.asarray(phis, dtype=float))
        block = np.repeat(self.v0[:, None], len(phis), axis=1)
        for (fraction, sign), matrix in self.segments:
            block = block * np.exp(
                (-1j * sign * fraction) * np.outer(self.m, phis)
            )
            block = matrix @ block
        return block


def _pulse_unitary(ops: OperatorSet, pulse: Pulse, mu_override) -> np.ndarray:
    """Dense unitary for a fixed pulse; diagonals returned as 1-d arrays."""
    if pulse.kind == "rotate":
        if pulse.axis == "z":
            return np.exp(-1j * pulse.angle * ops.m)
        eig = ops.jx_eigensystem if pulse.axis == "x" else ops.jy_eigensystem
        return (eig.vectors * np.exp(-1j * pulse.angle * eig.values)) @ eig.vectors.conj().T
    if pulse.kind == "squeeze":
        mu = pulse.mu if mu_override is None else float(mu_override)
        return np.exp(1j * pulse.sign * mu * ops.jz_sq)
    raise ValueError(f"not a fixed pulse: {pulse.kind}")


def compile_protocol(
    spec: ProtocolSpec,
    dims: EnsembleDims,
    ops: OperatorSet,
    mu_override: float | None = None,
) -> CompiledProtocol:
    """Fold every fixed pulse of the sequence into dense segment matrices."""
    if dims != ops.dims:
        raise DimensionError("dims and operator set disagree")

    acc = np.eye(dims.dim, dtype=complex)
    v0 = None
    segments = []
    pending_dark = None

    def close_segment():
        nonlocal acc, v0, pending_dark
        if pending_dark is None:
            v0 = acc[:, 0].copy()  # acc applied to |E_0>
        else:
            segments.append((pending_dark, acc))
        acc = np.eye(dims.dim, dtype=complex)

    for pulse in spec.pulses:
        if pulse.kind == "dark_phase":
            close_segment()
            pending_dark = (pulse.fraction, pulse.sign)
            continue
        u = _pulse_unitary(ops, pulse, mu_override)
        if u.ndim == 1:
            acc = u[:, None] * acc
        else:
            acc = u @ acc
    close_segment()

    return CompiledProtocol(
        dims=dims, v0=v0, segments=tuple(segments), m=ops.m
    )


# --- product-space oracle ---------------------------------------------------


def oracle_run(
    spec: ProtocolSpec,
    n_atoms: int,
    phi: float,
    mu_override: float | None = None,
) -> SpinState:
    """Brute-force check: evolve the full 2^N product space, then project
    onto the symmetric subspace.

    Single-spin operators are summed atom by atom and every unitary is a
    dense matrix exponential, so this shares nothing with the Dicke-basis
    path.  Limited to N <= 4.
    """
    if n_atoms > ORACLE_MAX_ATOMS:
        raise DimensionError(f"oracle supports N <= {ORACLE_MAX_ATOMS}, got {n_atoms}")
    dims = EnsembleDims(n_atoms)
    size = 2**n_atoms

    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = 0.5 * np.array([[-1, 0], [0, 1]], dtype=complex)  # index 0 = spin down
    singles = {"x": sx, "y": sy, "z": sz}

    def collective(axis):
        total = np.zeros((size, size), dtype=complex)
        for atom in range(n_atoms):
            op = np.eye(1, dtype=complex)
            for a in range(n_atoms):
                op = np.kron(singles[axis] if a == atom else np.eye(2), op)
            total += op
        return total

    big = {axis: collective(axis) for axis in "xyz"}
    big_zsq = big["z"] @ big["z"]

    psi = np.zeros(size, dtype=complex)
    psi[0] = 1.0  # all spins down
    for pulse in spec.pulses:
        if pulse.kind == "rotate":
            psi = expm(-1j * pulse.angle * big[pulse.axis]) @ psi
        elif pulse.kind == "squeeze":
            mu = pulse.mu if mu_override is None else float(mu_override)
            psi = expm(1j * pulse.sign * mu * big_zsq) @ psi
        elif pulse.kind == "dark_phase":
            psi = expm(-1j * pulse.sign * pulse.fraction * phi * big["z"]) @ psi

    # Isometry onto the Dicke basis: |E_n> is the normalized sum of the
    # C(N,n) product states with n spins up.
    ups = np.array([bin(b).count("1") for b in range(size)])
    proj = np.zeros((dims.dim, size))
    for n in range(dims.dim):
        members = ups == n
        proj[n, members] = 1.0 / np.sqrt(members.sum())
    amps = proj @ psi

    leak = abs(np.vdot(psi, psi).real - np.vdot(amps, amps).real)
    if leak > 1e-10:
        raise RuntimeError(f"oracle state leaked out of the symmetric subspace: {leak}")
    return SpinState(dims, amps)
