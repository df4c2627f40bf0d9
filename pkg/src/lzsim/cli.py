"""Command-line front end.

Subcommands: run (trajectory/final-state files for one scenario), sweep
(1-2 axis parameter scans), gaps (avoided-crossing sizes vs V0),
resonances (drive-harmonic catalog), validate (impulse-picture
applicability report), beats (envelope analysis of a trajectory CSV).

Scenarios come from plain key=value config files with [system] [drive]
[run] [sweep] sections; every config key can be overridden by a flag of
the same name.  Data files are CSV with LF endings and 12-significant-
digit decimals, so reruns are byte-identical; each invocation also writes
a JSON manifest (config text, resolved parameters, library versions,
output hashes) atomically next to the data.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .aia import (closed_form_two_level, compose_linear, compose_periodic,
                  periodic_time_average, validity_report)
from .analysis import (AXIS_NAMES, SweepAxis, SweepGrid, beat_analysis,
                       resonance_catalog, run_sweep)
from .errors import LZSimError, ParseError, ValidationError
from .hamiltonian import (LINEAR, PERIODIC, THREE_LEVEL, TWO_LEVEL,
                          DriveProtocol, SystemSpec, detuning, eigensystem,
                          gap_report)
from .propagator import (SweepWindow, TrajectoryRecord, channel_names,
                         default_window, initial_state, integrate,
                         project_adiabatic, time_average)

#: one printed decimal carries 12 significant digits; parsing it back and
#: re-printing reproduces the text, which is the determinism contract.
_FMT = "%.11e"

_TWO_LEVEL_STATES = ("g", "r", "adiabatic_minus", "adiabatic_plus")
_THREE_LEVEL_STATES = ("gg", "s", "rr", "adiabatic1", "adiabatic2",
                       "adiabatic3")
_SECTIONS = ("system", "drive", "run", "sweep")
_KEYS = {
    "system": ("levels", "Omega", "V0"),
    "drive": ("kind", "v", "Delta0", "delta", "omega"),
    "run": ("initial_state", "engine", "tolerance", "samples", "cycles",
            "window", "t_start", "output"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully resolved scenario: what to simulate and how to run it."""

    system: SystemSpec
    drive: DriveProtocol
    initial_state: str
    engine: str = "exact"
    tolerance: float = 1e-10
    samples: int = 2000
    cycles: int = None
    window: tuple = None    # (t_i, t_f) for linear ramps; None = default
    t_start: float = 0.0
    axes: tuple = ()        # sweep axes as (name, start, stop, points)
    output: str = "lzrun"


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce and audit one invocation."""

    command: str
    config_text: str
    resolved_config: str
    package_version: str
    library_versions: dict
    created_utc: str
    validity: dict
    outputs: tuple       # ({path, bytes, sha256}, ...)
    failed_points: tuple = ()


def _parse_sections(text):
    """Split config text into per-section key dicts, tracking line numbers."""
    data = {name: {} for name in _SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", line=lineno)
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ParseError("unknown section [%s]" % name, line=lineno)
            section = name
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=lineno)
        if section is None:
            raise ParseError("key outside of any [section]", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", line=lineno)
        if key in data[section]:
            raise ParseError("duplicate key %r in [%s]" % (key, section),
                             line=lineno)
        data[section][key] = value
    return data


def _field(section, key):
    return "%s.%s" % (section, key)


def _as_float(data, section, key, default=None):
    if key not in data[section]:
        if default is None:
            raise ValidationError("missing required value",
                                  field=_field(section, key))
        return default
    try:
        return float(data[section][key])
    except ValueError:
        raise ValidationError("not a number: %r" % data[section][key],
                              field=_field(section, key)) from None


def _as_int(data, section, key, default=None):
    value = _as_float(data, section, key,
                      default=float("nan") if default is None else default)
    if math.isnan(value):
        raise ValidationError("missing required value",
                              field=_field(section, key))
    if value != int(value):
        raise ValidationError("expected an integer",
                              field=_field(section, key))
    return int(value)


def _colon_floats(text, n, field):
    parts = text.split(":")
    if len(parts) != n:
        raise ValidationError("expected %d colon-separated numbers" % n,
                              field=field)
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError("not a number in %r" % text,
                              field=field) from None


def parse_config(text):
    """Parse and validate a scenario config; defaults are filled in."""
    data = _parse_sections(text)
    for section in ("system", "drive", "run"):
        for key in data[section]:
            if key not in _KEYS[section]:
                raise ValidationError("unknown key",
                                      field=_field(section, key))

    levels = _as_int(data, "system", "levels")
    if levels not in (2, 3):
        raise ValidationError("levels must be 2 or 3",
                              field="system.levels")
    Omega = _as_float(data, "system", "Omega", default=1.0)
    try:
        if levels == 2:
            if "V0" in data["system"]:
                raise ValidationError("V0 applies to the 3-level pair only",
                                      field="system.V0")
            system = SystemSpec.two_level(Omega=Omega)
        else:
            system = SystemSpec.three_level(
                Omega=Omega, V0=_as_float(data, "system", "V0", default=0.0))
    except ValueError as exc:
        raise ValidationError(str(exc), field="system.Omega") from None

    kind = data["drive"].get("kind")
    if kind not in (LINEAR, PERIODIC):
        raise ValidationError("kind must be 'linear' or 'periodic'",
                              field="drive.kind")
    try:
        if kind == LINEAR:
            for key in ("Delta0", "delta", "omega"):
                if key in data["drive"]:
                    raise ValidationError(
                        "%s applies to periodic drives only" % key,
                        field=_field("drive", key))
            drive = DriveProtocol.linear(v=_as_float(data, "drive", "v"))
        else:
            if "v" in data["drive"]:
                raise ValidationError("v applies to linear ramps only",
                                      field="drive.v")
            drive = DriveProtocol.periodic(
                Delta0=_as_float(data, "drive", "Delta0"),
                delta=_as_float(data, "drive", "delta"),
                omega=_as_float(data, "drive", "omega"))
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc), field="drive.kind") from None

    allowed = _TWO_LEVEL_STATES if levels == 2 else _THREE_LEVEL_STATES
    initial = data["run"].get("initial_state", allowed[0])
    if initial not in allowed:
        raise ValidationError(
            "initial_state %r is incompatible with a %d-level system; "
            "choose one of %s" % (initial, levels, allowed),
            field="run.initial_state")

    engine = data["run"].get("engine", "exact")
    if engine not in ("exact", "aia", "both"):
        raise ValidationError("engine must be exact, aia or both",
                              field="run.engine")
    tolerance = _as_float(data, "run", "tolerance", default=1e-10)
    samples = _as_int(data, "run", "samples", default=2000)
    if samples < 2:
        raise ValidationError("samples must be >= 2", field="run.samples")
    t_start = _as_float(data, "run", "t_start", default=0.0)

    window = None
    cycles = None
    if kind == LINEAR:
        if "cycles" in data["run"]:
            raise ValidationError("cycles applies to periodic drives only",
                                  field="run.cycles")
        if "window" in data["run"]:
            t_i, t_f = _colon_floats(data["run"]["window"], 2, "run.window")
            if not t_i < t_f:
                raise ValidationError("window start must precede its end",
                                      field="run.window")
            window = (t_i, t_f)
    else:
        if "window" in data["run"]:
            raise ValidationError("window applies to linear ramps only; "
                                  "periodic runs take cycles",
                                  field="run.window")
        cycles = _as_int(data, "run", "cycles")
        if cycles < 1:
            raise ValidationError("cycles must be >= 1", field="run.cycles")

    axes = []
    for key, value in data["sweep"].items():
        if key not in AXIS_NAMES:
            raise ValidationError("unknown sweep axis (choose from %s)"
                                  % (AXIS_NAMES,), field=_field("sweep", key))
        start, stop, points = _colon_floats(value, 3, _field("sweep", key))
        if points != int(points) or int(points) < 1:
            raise ValidationError("point count must be a positive integer",
                                  field=_field("sweep", key))
        axes.append((key, start, stop, int(points)))
    if len(axes) > 2:
        raise ValidationError("at most two sweep axes", field="sweep")
    for name, _, _, _ in axes:
        if name == "V0" and levels == 2:
            raise ValidationError("V0 axis needs a 3-level system",
                                  field="sweep.V0")
        if name == "v" and kind != LINEAR:
            raise ValidationError("v axis needs a linear ramp",
                                  field="sweep.v")
        if name in ("omega", "delta", "Delta0") and kind != PERIODIC:
            raise ValidationError("%s axis needs a periodic drive" % name,
                                  field=_field("sweep", name))

    return ScenarioConfig(system=system, drive=drive, initial_state=initial,
                          engine=engine, tolerance=tolerance,
                          samples=samples, cycles=cycles, window=window,
                          t_start=t_start, axes=tuple(axes),
                          output=data["run"].get("output", "lzrun"))


def serialize_config(config):
    """Canonical config text; parse(serialize(c)) resolves back to c."""
    out = ["[system]", "levels = %d" % config.system.dim,
           "Omega = %r" % config.system.Omega]
    if config.system.arity == THREE_LEVEL:
        out.append("V0 = %r" % config.system.V0)
    out.append("")
    out.append("[drive]")
    out.append("kind = %s" % config.drive.kind)
    if config.drive.kind == LINEAR:
        out.append("v = %r" % config.drive.v)
    else:
        out.extend(["Delta0 = %r" % config.drive.Delta0,
                    "delta = %r" % config.drive.delta,
                    "omega = %r" % config.drive.omega])
    out.extend(["", "[run]",
                "initial_state = %s" % config.initial_state,
                "engine = %s" % config.engine,
                "tolerance = %r" % config.tolerance,
                "samples = %d" % config.samples])
    if config.cycles is not None:
        out.append("cycles = %d" % config.cycles)
    if config.window is not None:
        out.append("window = %r:%r" % config.window)
    if config.t_start:
        out.append("t_start = %r" % config.t_start)
    out.append("output = %s" % config.output)
    if config.axes:
        out.extend(["", "[sweep]"])
        for name, start, stop, points in config.axes:
            out.append("%s = %r:%r:%d" % (name, start, stop, points))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# output files

def _write_csv(path, header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(cell if isinstance(cell, str) else _FMT % cell
                           for cell in row) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
    return path


def _file_entry(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        blob = fh.read()
    digest.update(blob)
    return {"path": os.path.basename(path), "bytes": len(blob),
            "sha256": digest.hexdigest()}


def _validity_summary(system, drive):
    try:
        report = validity_report(system, drive)
    except (LZSimError, ValueError) as exc:
        return {"verdict": None, "note": str(exc)}
    return {
        "verdict": bool(report.verdict),
        "criteria": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs,
                      "satisfied": bool(c.satisfied), "margin": c.margin}
                     for c in report.criteria],
        "tau_lz": report.tau_lz,
        "durations": report.durations,
    }


def _write_manifest(prefix, manifest):
    path = prefix + ".manifest.json"
    payload = {
        "command": manifest.command,
        "config_text": manifest.config_text,
        "resolved_config": manifest.resolved_config,
        "package_version": manifest.package_version,
        "library_versions": manifest.library_versions,
        "created_utc": manifest.created_utc,
        "validity": manifest.validity,
        "outputs": list(manifest.outputs),
        "failed_points": list(manifest.failed_points),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def _library_versions():
    import numba
    import scipy
    return {"numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _manifest_for(command, config_text, config, system, drive, outputs,
                  failed_points=()):
    return RunManifest(
        command=command,
        config_text=config_text,
        resolved_config=serialize_config(config),
        package_version=__version__,
        library_versions=_library_versions(),
        created_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        validity=_validity_summary(system, drive),
        outputs=tuple(_file_entry(p) for p in outputs),
        failed_points=tuple(failed_points),
    )


def _resolve_window(config):
    if config.drive.kind == PERIODIC:
        horizon = config.cycles * config.drive.period
        return SweepWindow(config.t_start, config.t_start + horizon,
                           samples=config.samples)
    if config.window is not None:
        return SweepWindow(config.window[0], config.window[1],
                           samples=config.samples)
    w = default_window(config.system, config.drive)
    return SweepWindow(w.t_i, w.t_f, samples=config.samples)


def _adiabatic_start(system, drive, label, t):
    state = initial_state(system, drive, label, t)
    frame = eigensystem(system, detuning(drive, t))
    return frame.eigvecs.T.conj() @ state.amplitudes


def _phase_rows(decomposition, dim):
    """Tabulate a decomposition: one row per factor, then one per phase."""
    zeta_cols = ["zeta_%d" % j for j in range(1, dim + 1)]
    header = ["kind", "crossing", "time"] + zeta_cols + ["value"]
    rows = []
    for mat, stamp in zip(decomposition.matrices, decomposition.timestamps):
        zetas = list(mat.zetas) if mat.zetas is not None else [""] * dim
        crossing = "" if mat.crossing is None else "%d" % mat.crossing
        rows.append([mat.kind, crossing, stamp, *zetas, ""])
    for key, value in sorted(decomposition.phases.items()):
        if isinstance(value, complex):
            continue
        rows.append(["phase:%s" % key, "", "", *([""] * dim), value])
    return header, rows


def _run_phase_file(prefix, config):
    system, drive = config.system, config.drive
    if drive.kind == LINEAR:
        if system.arity != THREE_LEVEL:
            return None
        w = _resolve_window(config)
        a0 = _adiabatic_start(system, drive, config.initial_state, w.t_i)
        _, decomp = compose_linear(system, drive, a0, window=w)
    else:
        a0 = _adiabatic_start(system, drive, config.initial_state,
                              config.t_start)
        _, decomp = compose_periodic(system, drive, a0, cycles=1,
                                     t_start=config.t_start)
    header, rows = _phase_rows(decomp, system.dim)
    return _write_csv(prefix + ".phases.csv", header, rows)


def _cmd_run(config, config_text):
    system, drive = config.system, config.drive
    if (config.engine != "exact" and drive.kind == LINEAR
            and system.arity == TWO_LEVEL):
        raise ValidationError(
            "the impulse engine on a linear ramp needs the 3-level pair; "
            "a single linearly swept atom crosses once (plain jump "
            "probability), so run it with engine = exact",
            field="run.engine")
    prefix = config.output
    os.makedirs(os.path.dirname(prefix) or ".", exist_ok=True)
    outputs = []
    diab, adiab = channel_names(system.dim)
    summary = {}

    if config.engine in ("exact", "both"):
        w = _resolve_window(config)
        traj = integrate(system, drive,
                         initial_state(system, drive, config.initial_state,
                                       w.t_i),
                         window=w, tol=config.tolerance)
        traj = project_adiabatic(system, drive, traj)
        header = ["t"] + list(diab) + list(adiab)
        rows = [[t, *pd, *pa] for t, pd, pa in
                zip(traj.times, traj.P_diab, traj.P_adiab)]
        outputs.append(_write_csv(prefix + ".trajectory.csv", header, rows))
        for name, value in zip(diab, traj.P_diab[-1]):
            summary["exact:%s" % name] = value
        for name, value in zip(adiab, traj.P_adiab[-1]):
            summary["exact:%s" % name] = value
        if drive.kind == PERIODIC:
            for name, value in time_average(traj).items():
                summary["exact:avg:%s" % name] = value

    if config.engine in ("aia", "both"):
        if drive.kind == PERIODIC:
            a0 = _adiabatic_start(system, drive, config.initial_state,
                                  config.t_start)
            final, _ = compose_periodic(system, drive, a0,
                                        cycles=config.cycles,
                                        t_start=config.t_start)
            for name, value in zip(adiab, np.abs(final) ** 2):
                summary["aia:%s" % name] = value
            avg = periodic_time_average(system, drive, a0,
                                        cycles=config.cycles,
                                        t_start=config.t_start)
            for name, value in avg.items():
                summary["aia:avg:%s" % name] = value
            if system.arity == TWO_LEVEL:
                cf = closed_form_two_level(system, drive, k=config.cycles,
                                           t_start=config.t_start)
                for key in ("P_plus_k", "P_max", "P_bar", "alpha", "phi_s",
                            "phi_G", "P_LZ", "stokes"):
                    summary["aia:%s" % key] = cf[key]
        else:
            w = _resolve_window(config)
            a0 = _adiabatic_start(system, drive, config.initial_state,
                                  w.t_i)
            final, _ = compose_linear(system, drive, a0, window=w)
            for name, value in zip(adiab, np.abs(final) ** 2):
                summary["aia:%s" % name] = value
            frame = eigensystem(system, detuning(drive, w.t_f))
            psi = frame.eigvecs @ final
            for name, value in zip(diab, np.abs(psi) ** 2):
                summary["aia:%s" % name] = value
        phase_path = _run_phase_file(prefix, config)
        if phase_path:
            outputs.append(phase_path)

    keys = sorted(summary)
    outputs.append(_write_csv(prefix + ".final.csv", keys,
                              [[summary[k] for k in keys]]))
    manifest = _manifest_for("run", config_text, config, system, drive,
                             outputs)
    _write_manifest(prefix, manifest)
    return 0


def _cmd_sweep(config, config_text, threads=None):
    if not config.axes:
        raise ValidationError("sweep needs a [sweep] section with 1-2 axes",
                              field="sweep")
    system, drive = config.system, config.drive
    prefix = config.output
    os.makedirs(os.path.dirname(prefix) or ".", exist_ok=True)
    axes = tuple(SweepAxis.linspace(name, start, stop, points)
                 for name, start, stop, points in config.axes)
    quantity = "final" if drive.kind == LINEAR else "average"
    window = None
    if config.window is not None:
        window = SweepWindow(config.window[0], config.window[1], samples=2)
    grid = SweepGrid(system=system, drive=drive, axes=axes,
                     initial_label=config.initial_state, quantity=quantity,
                     window=window, cycles=config.cycles or 100,
                     t_start=config.t_start, tol=config.tolerance)
    done = run_sweep(grid, config.engine, threads=threads)

    channels = sorted(done.outputs)
    header = [axis.name for axis in done.axes] + channels + ["failed"]
    rows = []
    for flat in range(int(np.prod(done.shape))):
        idx = np.unravel_index(flat, done.shape)
        cells = [done.axes[k].values[i] for k, i in enumerate(idx)]
        cells += [float(done.outputs[c][idx]) for c in channels]
        cells += ["1" if done.failed[idx] else "0"]
        rows.append(cells)
    path = _write_csv(prefix + ".sweep.csv", header, rows)
    manifest = _manifest_for("sweep", config_text, config, system, drive,
                             [path], failed_points=done.notes)
    _write_manifest(prefix, manifest)
    return 0 if not done.failed.any() else 3


def _cmd_gaps(args):
    start, stop, points = _colon_floats(args.V0_range, 3, "V0-range")
    if points != int(points) or int(points) < 1:
        raise ValidationError("point count must be a positive integer",
                              field="V0-range")
    rows = []
    for V0 in np.linspace(start, stop, int(points)):
        system = SystemSpec.three_level(Omega=args.Omega, V0=float(V0))
        report = gap_report(system)
        rows.append([float(V0), report.gap_zero, report.gap_half,
                     report.gap_full])
    path = args.output + ".gaps.csv"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    _write_csv(path, ["V0", "gap_zero", "gap_half", "gap_full"], rows)
    print(path)
    return 0


def _cmd_resonances(args):
    lo, hi = _colon_floats(args.omega_range, 2, "omega-range")
    catalog = resonance_catalog(args.Delta0, args.V0, (lo, hi))
    rows = [[line.condition, "%d" % line.n, line.omega_value,
             "%s<->%s" % line.transition]
            for line in catalog.families]
    if args.output:
        path = args.output + ".resonances.csv"
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        _write_csv(path, ["condition", "n", "omega", "transition"], rows)
        print(path)
    else:
        print("condition,n,omega,transition")
        for row in rows:
            print(",".join(cell if isinstance(cell, str) else _FMT % cell
                           for cell in row))
    return 0


def _cmd_validate(config):
    report = validity_report(config.system, config.drive)
    for c in report.criteria:
        status = "satisfied" if c.satisfied else "violated"
        print("%s: %.6g > %.6g  [%s, margin %.6g]"
              % (c.name, c.lhs, c.rhs, status, c.margin))
    for name, value in sorted(report.tau_lz.items()):
        print("impulse duration %s = %.6g" % (name, value))
    for name, value in sorted(report.durations.items()):
        print("segment duration %s = %.6g" % (name, value))
    print("verdict: %s" % ("applicable" if report.verdict
                           else "not applicable"))
    return 0


def _cmd_beats(args):
    with open(args.trajectory, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",")
    if data.ndim == 1:
        data = data[None, :]
    if header[0] != "t":
        raise ValidationError("first trajectory column must be t",
                              field="trajectory")
    cols = {name: data[:, i] for i, name in enumerate(header)}
    dim = 3 if "P_gg" in cols else 2
    diab, adiab = channel_names(dim)
    missing = [n for n in diab if n not in cols]
    if missing:
        raise ValidationError("trajectory lacks columns %s" % missing,
                              field="trajectory")
    P_diab = np.stack([cols[n] for n in diab], axis=1)
    P_adiab = (np.stack([cols[n] for n in adiab], axis=1)
               if all(n in cols for n in adiab) else None)
    traj = TrajectoryRecord(times=cols["t"], P_diab=P_diab, P_adiab=P_adiab,
                            amplitudes=np.zeros((data.shape[0], dim),
                                                np.complex128),
                            final_state=None, n_steps=0, norm_drift=0.0)
    report = beat_analysis(traj, channel=args.channel, tail=args.tail)
    print("envelope_frequency = %s" % (_FMT % report.envelope_frequency))
    print("carrier_frequency_trend = %s"
          % (_FMT % report.carrier_frequency_trend))
    print("present = %s" % report.present)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

class UsageError(Exception):
    """Bad command line (unknown flag, missing argument, bad subcommand)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems exit 1 (argparse's default would be 2)
        self.print_usage(sys.stderr)
        raise UsageError(message)


_OVERRIDES = (
    ("system", "levels", ()),
    ("system", "Omega", ("Ω",)),
    ("system", "V0", ()),
    ("drive", "kind", ()),
    ("drive", "v", ()),
    ("drive", "Delta0", ("Δ0",)),
    ("drive", "delta", ("δ",)),
    ("drive", "omega", ("ω",)),
    ("run", "initial_state", ()),
    ("run", "engine", ()),
    ("run", "tolerance", ()),
    ("run", "samples", ()),
    ("run", "cycles", ()),
    ("run", "window", ()),
    ("run", "t_start", ()),
    ("run", "output", ()),
)


def _add_override_flags(parser):
    for _, key, aliases in _OVERRIDES:
        names = ["--%s" % key] + ["--%s" % a for a in aliases]
        parser.add_argument(*names, dest="set_%s" % key, default=None,
                            metavar="VALUE")
    parser.add_argument("--sweep", action="append", default=[],
                        metavar="AXIS=START:STOP:POINTS",
                        help="add or replace one sweep axis")
    parser.add_argument("--threads", type=int, default=None)


def _apply_overrides(text, args):
    """Merge flag overrides into the config text, then reparse."""
    data = _parse_sections(text)
    for section, key, _ in _OVERRIDES:
        value = getattr(args, "set_%s" % key)
        if value is not None:
            data[section][key] = value
    for spec in args.sweep:
        if "=" not in spec:
            raise ValidationError("expected AXIS=START:STOP:POINTS",
                                  field="sweep")
        key, value = (part.strip() for part in spec.split("=", 1))
        data["sweep"][key] = value
    out = []
    for section in _SECTIONS:
        if not data[section]:
            continue
        out.append("[%s]" % section)
        out.extend("%s = %s" % pair for pair in data[section].items())
        out.append("")
    return "\n".join(out)


def _read_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError("cannot read config %s: %s" % (path, exc)) from None


def build_parser():
    parser = _Parser(prog="lzsim", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "sweep", "validate"):
        p = sub.add_parser(name)
        p.add_argument("config", help="scenario config file")
        _add_override_flags(p)

    p = sub.add_parser("gaps")
    p.add_argument("--V0-range", required=True, metavar="START:STOP:POINTS")
    p.add_argument("--Omega", "--Ω", type=float, default=1.0)
    p.add_argument("--output", default="lzrun")

    p = sub.add_parser("resonances")
    p.add_argument("--Delta0", "--Δ0", type=float, required=True)
    p.add_argument("--V0", type=float, required=True)
    p.add_argument("--omega-range", "--ω-range", dest="omega_range",
                   required=True, metavar="LOW:HIGH")
    p.add_argument("--output", default=None)

    p = sub.add_parser("beats")
    p.add_argument("trajectory", help="trajectory CSV from `lzsim run`")
    p.add_argument("--channel", default="P_s")
    p.add_argument("--tail", type=float, default=0.75)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("run", "sweep", "validate"):
            text = _read_config(args.config)
            text = _apply_overrides(text, args)
            config = parse_config(text)
            if args.command == "run":
                return _cmd_run(config, text)
            if args.command == "sweep":
                return _cmd_sweep(config, text, threads=args.threads)
            return _cmd_validate(config)
        if args.command == "gaps":
            return _cmd_gaps(args)
        if args.command == "resonances":
            return _cmd_resonances(args)
        if args.command == "beats":
            return _cmd_beats(args)
        raise UsageError("unknown command")
    except UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (ParseError, ValidationError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except LZSimError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
