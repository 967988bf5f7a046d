"""Scenario files, trajectory CSV emission and the bundled preset library.

Scenario files are plain sectioned key=value text (INI) with sections
``[plant]``, ``[gains]``, ``[force]``, ``[solver]``, ``[schedule]`` and an
optional ``[initial]``. Keys are case-sensitive and named after the model
symbols (``L0``, ``Gamma0``, ``k_p``, ...); unknown keys are rejected with a
suggestion when a case-insensitive or near match exists. ``parse_scenario``
and ``serialize_scenario`` round-trip exactly: floats are written with their
shortest exact decimal representation.

Trajectory CSV files are comma-separated with '.' decimals, LF line endings
and a mandatory header; the run status is carried in leading ``#`` comment
lines so the table itself stays consumable by any CSV reader.
"""

from __future__ import annotations

import configparser
import difflib
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .controller import ControllerGains
from .engine import (
    CHANNELS,
    ForceModel,
    ScenarioConfig,
    SolverSettings,
    TrajectoryRecord,
)
from .errors import ScenarioError
from .plant import ActuatorGeometry, FluidParams, PlantParams, PlantState

_PLANT_KEYS = ("L0", "n_L", "D_s", "d_c", "k0", "K0", "V0", "x0", "x_M",
               "Gamma0", "rho", "P_atm", "m", "R")
_GAIN_KEYS = ("k_p", "k_m", "k_i", "alpha")
_FORCE_KEYS = ("kind", "value")
_SOLVER_KEYS = ("method", "rel_tol", "abs_tol", "max_step", "fixed_step", "sample_dt")
_SCHEDULE_KEYS = ("duration", "x_star")
_INITIAL_KEYS = ("x", "p", "P1", "P2", "F_hat")

_SECTIONS = {
    "plant": _PLANT_KEYS,
    "gains": _GAIN_KEYS,
    "force": _FORCE_KEYS,
    "solver": _SOLVER_KEYS,
    "schedule": _SCHEDULE_KEYS,
    "initial": _INITIAL_KEYS,
}
_REQUIRED_SECTIONS = ("plant", "gains", "force", "schedule")


def _reject_unknown(section: str, keys, expected) -> None:
    for key in keys:
        if key in expected:
            continue
        hint = ""
        by_case = [k for k in expected if k.lower() == key.lower()]
        close = by_case or difflib.get_close_matches(key, expected, n=1)
        if close:
            hint = f"; expected {close[0]!r}"
        raise ScenarioError(f"unknown key {key!r} in section [{section}]{hint}")


def _get_float(sec, key: str) -> float:
    try:
        return float(sec[key])
    except ValueError:
        raise ScenarioError(
            f"key {key!r}: could not parse {sec[key]!r} as a number") from None


def _parse_schedule(text: str) -> tuple[tuple[float, float], ...]:
    if ":" not in text:
        return ((0.0, float(text)),)
    entries = []
    for item in text.split(","):
        t_s, _, x_s = item.partition(":")
        try:
            entries.append((float(t_s), float(x_s)))
        except ValueError:
            raise ScenarioError(
                f"schedule entry {item.strip()!r} is not 'time:x_star'") from None
    return tuple(entries)


def parse_scenario(text: str, name: str = "") -> ScenarioConfig:
    """Parse a scenario document into a validated :class:`ScenarioConfig`."""
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario parse error: {exc}") from None

    known = set(_SECTIONS)
    for section in cp.sections():
        if section not in known:
            close = difflib.get_close_matches(section, known, n=1)
            hint = f"; expected [{close[0]}]" if close else ""
            raise ScenarioError(f"unknown section [{section}]{hint}")
        _reject_unknown(section, cp[section], _SECTIONS[section])
    for section in _REQUIRED_SECTIONS:
        if section not in cp:
            raise ScenarioError(f"missing required section [{section}]")

    plant = cp["plant"]
    for key in ("L0", "n_L", "D_s", "d_c", "V0", "x0", "x_M", "Gamma0", "rho", "m", "R"):
        if key not in plant:
            raise ScenarioError(f"missing key {key!r} in section [plant]")
    if "k0" not in plant and "K0" not in plant:
        raise ScenarioError("section [plant] needs k0 or K0 (or both)")
    geometry = ActuatorGeometry.from_scale(
        L0=_get_float(plant, "L0"),
        n_L=int(plant["n_L"]),
        D_s=_get_float(plant, "D_s"),
        d_c=_get_float(plant, "d_c"),
        V0=_get_float(plant, "V0"),
        x0=_get_float(plant, "x0"),
        x_M=_get_float(plant, "x_M"),
        k0=_get_float(plant, "k0") if "k0" in plant else None,
        K0=_get_float(plant, "K0") if "K0" in plant else None,
    )
    fluid = FluidParams(Gamma0=_get_float(plant, "Gamma0"),
                        rho=_get_float(plant, "rho"),
                        P_atm=_get_float(plant, "P_atm") if "P_atm" in plant else 1e5)
    params = PlantParams(geometry=geometry, fluid=fluid,
                         m=_get_float(plant, "m"), R=_get_float(plant, "R"))

    g = cp["gains"]
    for key in _GAIN_KEYS:
        if key not in g:
            raise ScenarioError(f"missing key {key!r} in section [gains]")
    gains = ControllerGains(k_p=_get_float(g, "k_p"), k_m=_get_float(g, "k_m"),
                            k_i=_get_float(g, "k_i"), alpha=_get_float(g, "alpha"))

    f = cp["force"]
    for key in _FORCE_KEYS:
        if key not in f:
            raise ScenarioError(f"missing key {key!r} in section [force]")
    try:
        force = ForceModel(kind=f["kind"], value=_get_float(f, "value"))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    solver = SolverSettings()
    if "solver" in cp:
        s = cp["solver"]
        kwargs = {k: (_get_float(s, k) if k != "method" else s[k]) for k in s}
        try:
            solver = SolverSettings(**kwargs)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    sched = cp["schedule"]
    for key in _SCHEDULE_KEYS:
        if key not in sched:
            raise ScenarioError(f"missing key {key!r} in section [schedule]")
    setpoints = _parse_schedule(sched["x_star"])
    duration = _get_float(sched, "duration")

    initial = PlantState(0.0, 0.0, 0.0, 0.0)
    F_hat0 = None
    if "initial" in cp:
        init = cp["initial"]
        initial = PlantState(
            x=_get_float(init, "x") if "x" in init else 0.0,
            p=_get_float(init, "p") if "p" in init else 0.0,
            P1=_get_float(init, "P1") if "P1" in init else 0.0,
            P2=_get_float(init, "P2") if "P2" in init else 0.0,
        )
        if "F_hat" in init:
            F_hat0 = _get_float(init, "F_hat")

    scenario = ScenarioConfig(params=params, gains=gains, setpoints=setpoints,
                              force=force, duration=duration, solver=solver,
                              initial=initial, F_hat0=F_hat0, name=name)
    try:
        scenario.validate()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return scenario


def load_scenario(path: str | os.PathLike) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(), name=path.stem)


def serialize_scenario(scenario: ScenarioConfig) -> str:
    """Render a scenario as sectioned key=value text; inverse of parse."""
    geo = scenario.params.geometry
    fluid = scenario.params.fluid
    out = io.StringIO()

    def section(name: str, pairs) -> None:
        out.write(f"[{name}]\n")
        for key, val in pairs:
            out.write(f"{key} = {val!r}\n" if isinstance(val, float)
                      else f"{key} = {val}\n")
        out.write("\n")

    section("plant", [
        ("L0", geo.L0), ("n_L", geo.n_L), ("D_s", geo.D_s), ("d_c", geo.d_c),
        ("k0", geo.k0), ("K0", geo.K0), ("V0", geo.V0), ("x0", geo.x0),
        ("x_M", geo.x_M), ("Gamma0", fluid.Gamma0), ("rho", fluid.rho),
        ("P_atm", fluid.P_atm), ("m", scenario.params.m), ("R", scenario.params.R),
    ])
    g = scenario.gains
    section("gains", [("k_p", g.k_p), ("k_m", g.k_m), ("k_i", g.k_i),
                      ("alpha", g.alpha)])
    section("force", [("kind", scenario.force.kind), ("value", scenario.force.value)])
    s = scenario.solver
    section("solver", [("method", s.method), ("rel_tol", s.rel_tol),
                       ("abs_tol", s.abs_tol), ("max_step", s.max_step),
                       ("fixed_step", s.fixed_step), ("sample_dt", s.sample_dt)])
    if len(scenario.setpoints) == 1:
        x_star_text = repr(scenario.setpoints[0][1])
    else:
        x_star_text = ", ".join(f"{t!r}:{x!r}" for t, x in scenario.setpoints)
    section("schedule", [("duration", scenario.duration), ("x_star", x_star_text)])
    init = scenario.initial
    if (init != PlantState(0.0, 0.0, 0.0, 0.0)) or scenario.F_hat0 is not None:
        pairs = [("x", init.x), ("p", init.p), ("P1", init.P1), ("P2", init.P2)]
        if scenario.F_hat0 is not None:
            pairs.append(("F_hat", scenario.F_hat0))
        section("initial", pairs)
    return out.getvalue()


def save_scenario(scenario: ScenarioConfig, path: str | os.PathLike) -> None:
    _atomic_write(Path(path), serialize_scenario(scenario))


# --------------------------------------------------------------------------
# Trajectory CSV.

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def trajectory_to_csv(record: TrajectoryRecord) -> str:
    """Render a trajectory as CSV text (comma, '.' decimal, LF, header row).

    The run status travels in leading '#' comment lines, keeping the table
    itself plain CSV.
    """
    lines = [f"# status: {record.status}"]
    if record.detail:
        lines.append(f"# detail: {record.detail}")
    lines.append(",".join(CHANNELS))
    columns = [record[name] for name in CHANNELS]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def save_trajectory_csv(record: TrajectoryRecord, path: str | os.PathLike) -> None:
    _atomic_write(Path(path), trajectory_to_csv(record))


def trajectory_from_csv(text: str) -> TrajectoryRecord:
    """Parse CSV text produced by :func:`trajectory_to_csv`."""
    status, detail = "ok", ""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    body = []
    for ln in lines:
        if ln.startswith("# status:"):
            status = ln.partition(":")[2].strip()
        elif ln.startswith("# detail:"):
            detail = ln.partition(":")[2].strip()
        elif not ln.startswith("#"):
            body.append(ln)
    if not body:
        raise ScenarioError("trajectory CSV has no header row")
    header = body[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in body[1:]]
    arr = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    data = {name: arr[:, i].copy() for i, name in enumerate(header)}
    return TrajectoryRecord(data=data, status=status, detail=detail)


def load_trajectory_csv(path: str | os.PathLike) -> TrajectoryRecord:
    return trajectory_from_csv(Path(path).read_text())


# --------------------------------------------------------------------------
# Presets.

PRESET_ENV_VAR = "ANTAGO_PRESET_DIR"


def _preset_dir() -> Path:
    override = os.environ.get(PRESET_ENV_VAR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "presets"


def list_presets() -> list[str]:
    """Names of the available scenario presets (sorted)."""
    directory = _preset_dir()
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.glob("*.ini"))


def load_preset(name: str) -> ScenarioConfig:
    path = _preset_dir() / f"{name}.ini"
    if not path.is_file():
        known = ", ".join(list_presets()) or "(none found)"
        raise ScenarioError(f"unknown preset {name!r}; available: {known}")
    return load_scenario(path)
