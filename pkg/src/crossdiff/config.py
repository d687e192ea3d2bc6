"""Run configuration: TOML schema, validation, and initial-data construction.

A configuration file has a required `schema = 1` marker and sections
[model], [grid], [solver], plus optional [initial], [output], and [study].
Unknown keys anywhere are rejected with the offending key named.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import GridMismatch, ParseError
from .grid import Field, Grid1D, init_field, read_snapshot
from .model import HypothesisReport, InteractionMatrix, validate_hypotheses
from .solver import SolverConfig

_TOP_KEYS = {"schema", "model", "grid", "solver", "initial", "output", "study"}
_MODEL_KEYS = {"n", "K", "epsilon"}
_GRID_KEYS = {"L", "m"}
_SOLVER_KEYS = {
    "tau",
    "T",
    "newton_tol",
    "newton_max",
    "delta_stab",
    "theta",
    "output_every",
    "jacobian",
}
_INITIAL_KEYS = {"profile", "values", "base", "amplitude", "mode", "path"}
_OUTPUT_KEYS = {"dir"}
_STUDY_KEYS = {"amplitude", "deltas", "epsilons", "horizon", "refine"}
_PROFILES = {"constant", "cosine", "csv"}


@dataclass(frozen=True)
class InitialSpec:
    """Declarative initial data: a named profile or a CSV snapshot path."""

    kind: str
    values: tuple = ()
    base: tuple = ()
    amplitude: tuple = ()
    mode: int = 1
    path: str | None = None

    def build(self, grid: Grid1D, n_species: int) -> Field:
        if self.kind == "constant":
            vals = np.asarray(self.values, dtype=float)
            return init_field(grid, lambda x: np.tile(vals, (x.size, 1)))
        if self.kind == "cosine":
            base = np.asarray(self.base, dtype=float)
            amp = np.asarray(self.amplitude, dtype=float)
            mode = self.mode

            def profile(x):
                wave = np.cos(mode * np.pi * x / grid.L)
                return base[None, :] + amp[None, :] * wave[:, None]

            return init_field(grid, profile)
        if self.kind == "csv":
            _, fld = read_snapshot(self.path)
            if fld.cells != grid.m:
                raise GridMismatch(
                    f"snapshot has {fld.cells} cells but the grid has {grid.m}"
                )
            if fld.n + 1 != n_species:
                raise GridMismatch(
                    f"snapshot has {fld.n + 1} species but the model has {n_species}"
                )
            return fld
        raise ParseError(f"unknown initial profile {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run or study needs, parsed and validated."""

    model: InteractionMatrix
    hypotheses: HypothesisReport
    grid: Grid1D
    solver: SolverConfig
    initial: InitialSpec | None
    output_dir: str | None
    study: dict = field(default_factory=dict)

    def build_initial(self) -> Field:
        if self.initial is None:
            raise ParseError("no [initial] section in the configuration")
        return self.initial.build(self.grid, self.model.n_species)


def _reject_unknown(section: dict, allowed: set, where: str):
    for key in section:
        if key not in allowed:
            raise ParseError(f"unknown key {where}{key}")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ParseError(f"missing required key {where}{key}")
    return section[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where} must be a number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where} must be an integer, got {value!r}")
    return value


def _number_list(value, where: str) -> tuple:
    if not isinstance(value, list) or not value:
        raise ParseError(f"{where} must be a non-empty list of numbers")
    return tuple(_number(v, where) for v in value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text into a RunConfig.

    Raises ParseError with the offending key or location for malformed
    input; model validation errors (asymmetry, negative rates, ...)
    propagate unchanged.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ParseError(f"malformed configuration: {err}") from err

    _reject_unknown(data, _TOP_KEYS, "")
    schema = _need(data, "schema", "")
    if schema != 1:
        raise ParseError(f"unsupported schema {schema!r}, expected 1")

    msec = _need(data, "model", "")
    _reject_unknown(msec, _MODEL_KEYS, "model.")
    n = _integer(_need(msec, "n", "model."), "model.n")
    if n < 1:
        raise ParseError(f"model.n must be >= 1, got {n}")
    flat = _number_list(_need(msec, "K", "model."), "model.K")
    size = n + 1
    if len(flat) != size * size:
        raise ParseError(
            f"model.K must hold {size * size} row-major entries for n = {n}, got {len(flat)}"
        )
    eps = _number(msec.get("epsilon", 0.0), "model.epsilon")
    model, hypotheses = validate_hypotheses(np.asarray(flat).reshape(size, size))

    gsec = _need(data, "grid", "")
    _reject_unknown(gsec, _GRID_KEYS, "grid.")
    grid = Grid1D(
        L=_number(_need(gsec, "L", "grid."), "grid.L"),
        m=_integer(_need(gsec, "m", "grid."), "grid.m"),
    )

    ssec = _need(data, "solver", "")
    _reject_unknown(ssec, _SOLVER_KEYS, "solver.")
    solver = SolverConfig(
        tau=_number(_need(ssec, "tau", "solver."), "solver.tau"),
        t_end=_number(_need(ssec, "T", "solver."), "solver.T"),
        newton_tol=_number(ssec.get("newton_tol", 1e-10), "solver.newton_tol"),
        newton_max=_integer(ssec.get("newton_max", 50), "solver.newton_max"),
        delta_stab=_number(ssec.get("delta_stab", 0.0), "solver.delta_stab"),
        eps_model=eps,
        theta=_number(ssec.get("theta", 1e-10), "solver.theta"),
        output_every=_integer(ssec.get("output_every", 0), "solver.output_every"),
        jacobian=ssec.get("jacobian", "analytic"),
    )

    initial = None
    if "initial" in data:
        isec = data["initial"]
        _reject_unknown(isec, _INITIAL_KEYS, "initial.")
        kind = _need(isec, "profile", "initial.")
        if kind not in _PROFILES:
            raise ParseError(f"initial.profile must be one of {sorted(_PROFILES)}, got {kind!r}")
        if kind == "constant":
            values = _number_list(_need(isec, "values", "initial."), "initial.values")
            if len(values) != size:
                raise ParseError(f"initial.values must have {size} entries")
            initial = InitialSpec(kind="constant", values=values)
        elif kind == "cosine":
            base = _number_list(_need(isec, "base", "initial."), "initial.base")
            amp = _number_list(_need(isec, "amplitude", "initial."), "initial.amplitude")
            if len(base) != size or len(amp) != size:
                raise ParseError(f"initial.base and initial.amplitude must have {size} entries")
            mode = _integer(isec.get("mode", 1), "initial.mode")
            if mode < 1:
                raise ParseError(f"initial.mode must be >= 1, got {mode}")
            initial = InitialSpec(kind="cosine", base=base, amplitude=amp, mode=mode)
        else:
            path = _need(isec, "path", "initial.")
            if not isinstance(path, str):
                raise ParseError("initial.path must be a string")
            initial = InitialSpec(kind="csv", path=path)

    output_dir = None
    if "output" in data:
        osec = data["output"]
        _reject_unknown(osec, _OUTPUT_KEYS, "output.")
        output_dir = _need(osec, "dir", "output.")
        if not isinstance(output_dir, str):
            raise ParseError("output.dir must be a string")

    study = {}
    if "study" in data:
        tsec = data["study"]
        _reject_unknown(tsec, _STUDY_KEYS, "study.")
        if "amplitude" in tsec:
            study["amplitude"] = _number(tsec["amplitude"], "study.amplitude")
        if "deltas" in tsec:
            study["deltas"] = _number_list(tsec["deltas"], "study.deltas")
        if "epsilons" in tsec:
            study["epsilons"] = _number_list(tsec["epsilons"], "study.epsilons")
        if "horizon" in tsec:
            study["horizon"] = _number(tsec["horizon"], "study.horizon")
        if "refine" in tsec:
            if not isinstance(tsec["refine"], bool):
                raise ParseError("study.refine must be a boolean")
            study["refine"] = tsec["refine"]

    return RunConfig(
        model=model,
        hypotheses=hypotheses,
        grid=grid,
        solver=solver,
        initial=initial,
        output_dir=output_dir,
        study=study,
    )
