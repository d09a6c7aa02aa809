"""Command-line front end: deterministic scans written as CSV/JSON/raw artifacts.

Every command writes its outputs atomically (temp file + rename) and drops a
JSON run manifest beside each artifact.  Data files carry no timestamps, so
repeated runs are byte-identical; the manifest holds the wall-clock record.

Angles accept `0.5pi`-style literals (multiples of pi) as well as plain
radians; ranges are `start:stop:count`.  Exit codes: 0 ok, 1 usage error,
2 runtime/budget error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

import catspin
from catspin.cavity import (
    BudgetError,
    CavityParams,
    chi_cavity_design,
    improvement_factor,
    optimal_detuning,
    scattering_rate,
    squeezing_rate_chi,
    squeezing_time,
    steady_state_amplitude,
)
from catspin.dicke import DimensionError, EnsembleDims, build_operator_set
from catspin.husimi import default_grid, field_to_csv_rows, qpd_field
from catspin.observables import (
    collective_distribution,
    excess_noise_curve,
    fringe_scan,
    noise_model_table,
    parity_average,
    point_sensitivity,
    sensitivity_scan_mu,
)
from catspin.protocols import Detection, ProtocolParams, builtin, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

THREADS_ENV = "CATSPIN_THREADS"

NOISE_PROTOCOL_ORDER = ("crain", "tact", "esp", "cd-scain", "csd-scain")


class UsageError(Exception):
    """Bad flags or out-of-range values; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def fmt(value: float) -> str:
    """17-significant-digit float formatting; '.' decimal, locale-free."""
    return format(float(value), ".17g")


def parse_angle(text: str) -> float:
    """Parse '0.5pi' as 0.5*pi, otherwise plain radians."""
    text = text.strip().lower()
    try:
        if text.endswith("pi"):
            head = text[:-2]
            factor = 1.0 if head in ("", "+") else (-1.0 if head == "-" else float(head))
            return factor * math.pi
        return float(text)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


def parse_range(text: str, angle: bool = True) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range {text!r} must be start:stop:count")
    convert = parse_angle if angle else float
    try:
        start, stop, count = convert(parts[0]), convert(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None
    if count < 2:
        raise UsageError(f"range {text!r} needs at least 2 points")
    return start, stop, count


def _atomic_write(path: str, writer_func):
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        with open(tmp, "w", newline="") as fh:
            writer_func(fh)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _atomic_write_bytes(path: str, data: bytes):
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def write_manifest(path: str, command: str, options: dict, wall_time: float):
    manifest = {
        "command": command,
        "options": {k: v for k, v in sorted(options.items())},
        "versions": {
            "catspin": catspin.__version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": wall_time,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    _atomic_write(
        path + ".manifest.json",
        lambda fh: (json.dump(manifest, fh, indent=2, default=str), fh.write("\n")),
    )


# --- configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    """One validated command invocation; all computation is seed-free."""

    command: str
    options: dict


_COMMON_DEFAULTS = {
    "protocol": "scain",
    "mu": math.pi / 2,
    "ara": "x",
    "xi": -1,
    "detection": "cd",
    "csd_index": None,
    "threads": None,
    "gamma": 1.0,
}


def _add_protocol_flags(sub):
    sub.add_argument("--protocol", choices=["crain", "scain", "cac", "cosac", "scac"])
    sub.add_argument("--n", type=int, required=True, help="number of atoms")
    sub.add_argument("--mu", type=str, help="squeezing strength, e.g. 0.5pi")
    sub.add_argument("--ara", choices=["x", "y"], help="auxiliary rotation axis")
    sub.add_argument("--xi", type=int, choices=[1, -1], help="corrective rotation sign")
    sub.add_argument("--detection", choices=["cd", "csd"])
    sub.add_argument("--csd-index", type=int, dest="csd_index")


def _build_parser() -> _Parser:
    parser = _Parser(prog="catspin", description=__doc__)
    parser.add_argument("--config", help="JSON file with default options")
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("fringe", help="signal/SDS/PGS over a phi grid")
    _add_protocol_flags(p)
    p.add_argument("--phi-range", dest="phi_range", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--gamma", type=float, help="divide lambda by this linewidth factor")

    p = subs.add_parser("sensitivity", help="best Lambda per mu over the fringe window")
    _add_protocol_flags(p)
    p.add_argument("--mu-range", dest="mu_range", required=True)
    p.add_argument("--phi-window", dest="phi_window")
    p.add_argument("--normalize-hl", dest="normalize_hl", action="store_true", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--gamma", type=float)

    p = subs.add_parser("qpd", help="Husimi field of a protocol stage")
    _add_protocol_flags(p)
    p.add_argument("--phi", type=str, help="dark-zone scan phase")
    p.add_argument("--stage", required=True, help="stage letter A..")
    p.add_argument("--grid", help="THETAxPHI point counts, e.g. 181x361")
    p.add_argument("--format", choices=["csv", "raw"], dest="fmt")
    p.add_argument("--out", required=True)

    p = subs.add_parser("collective", help="Dicke-state populations of a stage")
    _add_protocol_flags(p)
    p.add_argument("--phi", type=str)
    p.add_argument("--stage", required=True)
    p.add_argument("--out", required=True)

    p = subs.add_parser("cavity", help="squeezing-cavity rates and budgets")
    p.add_argument("--n", type=float, help="number of atoms")
    p.add_argument("--coop-range", dest="coop_range", help="cooperativity sweep a:b:count")
    p.add_argument("--log", action="store_true", default=None, help="geometric sweep spacing")
    p.add_argument("--delta-tilde", dest="delta_tilde", type=float,
                   help="probe detuning / cavity half width (default: optimal)")
    p.add_argument("--params", help="JSON file of cavity parameters (report mode)")
    p.add_argument("--power", type=float, help="design-mode probe power (W)")
    p.add_argument("--mode-side", dest="mode_side", type=float)
    p.add_argument("--mirror-t", dest="mirror_t", type=float)
    p.add_argument("--out", required=True)

    p = subs.add_parser("excess-noise", help="Lambda vs excess noise per protocol")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--en-range", dest="en_range", required=True)
    p.add_argument("--log", action="store_true", default=None)
    p.add_argument("--out", required=True)

    p = subs.add_parser("parity-average", help="RMS-average even/odd sensitivities")
    p.add_argument("--even", type=float, required=True)
    p.add_argument("--odd", type=float, required=True)
    p.add_argument("--out")

    return parser


# flags whose values may legitimately start with '-' (angles, ranges);
# argparse would otherwise read them as options
_DASH_VALUE_FLAGS = {
    "--mu", "--phi", "--phi-range", "--mu-range", "--phi-window",
    "--en-range", "--coop-range", "--even", "--odd", "--delta-tilde",
}


def _join_dash_values(argv: list[str]) -> list[str]:
    out = []
    skip = False
    for i, token in enumerate(argv):
        if skip:
            skip = False
            continue
        if token in _DASH_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{token}={argv[i + 1]}")
            skip = True
        else:
            out.append(token)
    return out


def parse_config(argv: list[str]) -> RunConfig:
    """Parse flags, merging defaults < config file < explicit flags."""
    parser = _build_parser()
    args = parser.parse_args(_join_dash_values(argv))
    if args.command is None:
        raise UsageError("missing command")

    options = dict(_COMMON_DEFAULTS)
    file_options = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_options = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_options, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
    options.update(file_options)
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            options[key] = value

    for key in ("mu", "phi"):
        if isinstance(options.get(key), str):
            options[key] = parse_angle(options[key])

    config = RunConfig(command=args.command, options=options)
    _validate(config)
    return config


def _validate(config: RunConfig):
    opts = config.options
    if "n" in opts and opts.get("n") is not None:
        n = opts["n"]
        if n < 1:
            raise UsageError(f"--n must be >= 1, got {n}")
    if config.command in ("fringe", "sensitivity", "qpd", "collective"):
        if int(opts["n"]) != opts["n"]:
            raise UsageError("--n must be an integer atom count")
        mu = opts.get("mu", math.pi / 2)
        if not 0.0 <= mu <= math.pi / 2 + 1e-12:
            raise UsageError(f"--mu must lie in [0, 0.5pi], got {mu}")
        if opts.get("csd_index") is not None:
            if opts.get("detection") != "csd":
                raise UsageError("--csd-index only applies with --detection csd")
            if abs(opts["csd_index"]) > opts["n"] + 1:
                raise UsageError(f"--csd-index out of range for N={opts['n']}")
    if config.command == "sensitivity":
        lo, hi, _ = parse_range(opts["mu_range"])
        if not (0.0 <= lo <= hi <= math.pi / 2 + 1e-12):
            raise UsageError("--mu-range must lie within [0, 0.5pi]")
    if config.command == "cavity":
        modes = [opts.get("coop_range"), opts.get("params"),
                 opts.get("power") or opts.get("mode_side") or opts.get("mirror_t")]
        if sum(1 for m in modes if m) != 1:
            raise UsageError(
                "cavity needs exactly one of --coop-range (sweep), --params "
                "(report) or design knobs (--power/--mode-side/--mirror-t)"
            )
        if opts.get("coop_range") and not opts.get("n"):
            raise UsageError("cavity sweep needs --n")


# --- command implementations ----------------------------------------------------


def _protocol_setup(opts):
    n = int(opts["n"])
    dims = EnsembleDims(n)
    ops = build_operator_set(dims)
    detection = None
    if opts.get("detection") == "csd":
        detection = Detection("csd", index=opts.get("csd_index"))
    params = ProtocolParams(
        mu=float(opts.get("mu", math.pi / 2)),
        ara=opts.get("ara", "x"),
        xi=int(opts.get("xi", -1)),
        detection=detection,
    )
    spec = builtin(opts.get("protocol", "scain"), params)
    return dims, ops, spec


def _threads(opts) -> int | None:
    if opts.get("threads"):
        return int(opts["threads"])
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count()


def _cmd_fringe(opts) -> list[str]:
    dims, ops, spec = _protocol_setup(opts)
    start, stop, count = parse_range(opts["phi_range"])
    phis = np.linspace(start, stop, count)
    points = fringe_scan(spec, dims, ops, phis, threads=_threads(opts))
    gamma = float(opts.get("gamma", 1.0))

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["phi", "signal", "sds", "pgs", "lambda"])
        for pt in points:
            lam = point_sensitivity(pt, dims)
            writer.writerow(
                [fmt(pt.phi), fmt(pt.signal), fmt(pt.sds), fmt(pt.pgs),
                 "" if lam is None else fmt(lam / gamma)]
            )

    _atomic_write(opts["out"], write)
    return [opts["out"]]


def _cmd_sensitivity(opts) -> list[str]:
    dims, ops, spec = _protocol_setup(opts)
    start, stop, count = parse_range(opts["mu_range"])
    mus = np.linspace(start, stop, count)
    window = None
    if opts.get("phi_window"):
        a, b, c = parse_range(opts["phi_window"])
        window = np.linspace(a, b, c)
    results = sensitivity_scan_mu(
        spec, dims, ops, mus,
        phi_window=window,
        normalize_hl=bool(opts.get("normalize_hl")),
        threads=_threads(opts),
    )
    gamma = float(opts.get("gamma", 1.0))

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["mu", "lambda", "phi_star"])
        for res in results:
            writer.writerow(
                [fmt(res.mu),
                 "" if res.lam is None else fmt(res.lam / gamma),
                 "" if math.isnan(res.phi_star) else fmt(res.phi_star)]
            )

    _atomic_write(opts["out"], write)
    return [opts["out"]]


def _stage_pulse_count(stage: str, n_pulses: int) -> int:
    stage = stage.strip().upper()
    if len(stage) != 1 or not "A" <= stage <= "Z":
        raise UsageError(f"--stage must be a single letter, got {stage!r}")
    count = ord(stage) - ord("A")
    if count > n_pulses:
        last = chr(ord("A") + n_pulses)
        raise UsageError(f"stage {stage} beyond this protocol (A..{last})")
    return count


def _cmd_qpd(opts) -> list[str]:
    dims, ops, spec = _protocol_setup(opts)
    n_pulses = _stage_pulse_count(opts["stage"], len(spec.pulses))
    state = run(spec, dims, ops, float(opts.get("phi") or 0.0), n_pulses=n_pulses)
    if opts.get("grid"):
        try:
            n_theta, n_phi = (int(x) for x in opts["grid"].lower().split("x"))
        except ValueError:
            raise UsageError(f"--grid must be THETAxPHI, got {opts['grid']!r}") from None
        grid = default_grid(n_theta, n_phi)
    else:
        grid = default_grid()
    field = qpd_field(state, grid)
    out = opts["out"]
    stage = opts["stage"].strip().upper()

    if opts.get("fmt") == "raw":
        flat = np.ascontiguousarray(field.values, dtype="<f8")
        _atomic_write_bytes(out, flat.tobytes())
        meta = {
            "n_theta": int(grid.thetas.size),
            "n_phi": int(grid.phis.size),
            "n_atoms": dims.n_atoms,
            "stage_label": stage,
        }
        _atomic_write(
            out + ".json", lambda fh: (json.dump(meta, fh, indent=2), fh.write("\n"))
        )
        return [out, out + ".json"]

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "q"])
        for theta, phi, q in field_to_csv_rows(field):
            writer.writerow([fmt(theta), fmt(phi), fmt(q)])

    _atomic_write(out, write)
    return [out]


def _cmd_collective(opts) -> list[str]:
    dims, ops, spec = _protocol_setup(opts)
    n_pulses = _stage_pulse_count(opts["stage"], len(spec.pulses))
    state = run(spec, dims, ops, float(opts.get("phi") or 0.0), n_pulses=n_pulses)
    dist = collective_distribution(state)
    m = dims.m_values()

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["index", "m", "population"])
        for i, (mm, p) in enumerate(zip(m, dist)):
            writer.writerow([str(i), fmt(mm), fmt(p)])

    _atomic_write(opts["out"], write)
    return [opts["out"]]


def _cmd_cavity(opts) -> list[str]:
    out = opts["out"]
    if opts.get("coop_range"):
        n = float(opts["n"])
        start, stop, count = parse_range(opts["coop_range"], angle=False)
        if opts.get("log"):
            if start <= 0 or stop <= 0:
                raise UsageError("--log sweep needs positive bounds")
            coops = np.geomspace(start, stop, count)
        else:
            coops = np.linspace(start, stop, count)
        rows = []
        for coop in coops:
            delta = opts.get("delta_tilde") or optimal_detuning(n, float(coop))
            budget = improvement_factor(n, float(coop), float(delta))
            rows.append((coop, budget))

        def write(fh):
            writer = csv.writer(fh)
            writer.writerow(
                ["cooperativity", "theta", "f_exact_db", "f_approx_db", "f_ideal_db"]
            )
            ideal_db = 10.0 * math.log10(n)
            for coop, budget in rows:
                writer.writerow(
                    [fmt(coop), fmt(budget.theta_frac), fmt(budget.f_db),
                     fmt(budget.f_approx_db), fmt(ideal_db)]
                )

        _atomic_write(out, write)
        return [out]

    if opts.get("params"):
        try:
            with open(opts["params"]) as fh:
                params = CavityParams.from_json(fh.read())
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"cannot read cavity params: {exc}") from exc
        zeta = steady_state_amplitude(params)
        chi = squeezing_rate_chi(params)
        report = {
            "steady_state_amplitude": {"re": zeta.real, "im": zeta.imag},
            "intracavity_photons": abs(zeta) ** 2,
            "chi": chi,
            "t_sc": squeezing_time(abs(chi)),
            "scattering_rate": scattering_rate(params, abs(chi)),
            "cooperativity_consistency": params.cooperativity_consistency(),
        }
        _atomic_write(out, lambda fh: (json.dump(report, fh, indent=2), fh.write("\n")))
        return [out]

    # design mode: engineering knobs around the reference cavity
    chi = chi_cavity_design(
        delta_tilde=float(opts.get("delta_tilde") or 100.0),
        power=float(opts.get("power") or 1e-3),
        mode_side=float(opts.get("mode_side") or 20e-6),
        mirror_t=float(opts.get("mirror_t") or 1e-5),
    )
    report = {"chi": chi, "t_sc": squeezing_time(abs(chi))}
    _atomic_write(out, lambda fh: (json.dump(report, fh, indent=2), fh.write("\n")))
    return [out]


def _cmd_excess_noise(opts) -> list[str]:
    n = int(opts["n"])
    start, stop, count = parse_range(opts["en_range"], angle=False)
    if opts.get("log"):
        if start <= 0 or stop <= 0:
            raise UsageError("--log sweep needs positive bounds")
        en = np.geomspace(start, stop, count)
    else:
        en = np.linspace(start, stop, count)
    table = noise_model_table(n)
    curves = {name: excess_noise_curve(table[name], n, en) for name in NOISE_PROTOCOL_ORDER}

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["delta_s_en"] + [p.replace("-", "_") for p in NOISE_PROTOCOL_ORDER])
        for i, e in enumerate(en):
            writer.writerow([fmt(e)] + [fmt(curves[p][i]) for p in NOISE_PROTOCOL_ORDER])

    _atomic_write(opts["out"], write)
    return [opts["out"]]


def _cmd_parity_average(opts) -> list[str]:
    value = parity_average(float(opts["even"]), float(opts["odd"]))
    print(fmt(value))
    if opts.get("out"):
        _atomic_write(
            opts["out"],
            lambda fh: (json.dump({"parity_average": value}, fh, indent=2), fh.write("\n")),
        )
        return [opts["out"]]
    return []


_COMMANDS = {
    "fringe": _cmd_fringe,
    "sensitivity": _cmd_sensitivity,
    "qpd": _cmd_qpd,
    "collective": _cmd_collective,
    "cavity": _cmd_cavity,
    "excess-noise": _cmd_excess_noise,
    "parity-average": _cmd_parity_average,
}


def execute(config: RunConfig) -> int:
    """Run one validated command; writes artifacts and their manifests."""
    t0 = time.perf_counter()
    artifacts = _COMMANDS[config.command](config.options)
    wall = time.perf_counter() - t0
    for path in artifacts:
        write_manifest(path, config.command, config.options, wall)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        return execute(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetError, DimensionError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
