"""Run configuration: a JSON document validated into typed engine inputs.

Complex matrix entries are written as ``[re, im]`` pairs; plain real numbers
are accepted too.  Unknown fields are rejected everywhere.

Example::

    {
      "spec": {"system_dim": 2, "copy_dim": 2, "window": 3},
      "model": {"kind": "markov-blocks", "preset": "swap"},
      "initial_state": {"vector": [[0.6, 0], [0, 0.8]]},
      "observable": "special(1,-1)",
      "steps": 3,
      "seeds": {"base": 7, "ensemble": 100}
    }
"""

from __future__ import annotations

import json
import re
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError, QRepeatError
from .measurement import Observable
from .models import HamiltonianChainModel, InteractionModel, MarkovBlockModel
from .projection import DEFAULT_MAX_CONDITION
from .tensor import DEFAULT_CAP, ChainSpec, ReducedState
from .unravelling import DEPENDENCE_TOL, MIXING_TOL, PURE_TOL, special_observable

Entry = Union[float, tuple[float, float]]
Matrix = list[list[Entry]]

_SPECIAL = re.compile(r"^\s*special\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SpecConfig(_Strict):
    system_dim: int = Field(ge=1)
    copy_dim: int = Field(ge=1)
    window: int = Field(ge=1)
    cap: int = Field(DEFAULT_CAP, ge=1)


class MarkovBlocksConfig(_Strict):
    kind: Literal["markov-blocks"]
    preset: Optional[Literal["swap", "identity"]] = None
    unitary: Optional[Matrix] = None
    blocks: Optional[list[list[Matrix]]] = None


class CouplingTableEntry(_Strict):
    k: int = Field(ge=1)
    i: int = Field(ge=1)
    c: Matrix


class CouplingConfig(_Strict):
    preset: Optional[Literal["full-memory", "two-copy", "markov"]] = None
    c: Optional[Matrix] = None
    table: Optional[list[CouplingTableEntry]] = None


class HamiltonianConfig(_Strict):
    kind: Literal["hamiltonian-chain"]
    h0: Matrix
    gamma: float = 0.0
    lam: float = Field(alias="lambda")
    tau: float = Field(gt=0)
    coupling: CouplingConfig


class InitialStateConfig(_Strict):
    vector: Optional[list[Entry]] = None
    density: Optional[Matrix] = None


class ObservableConfig(_Strict):
    matrix: Matrix


class SeedsConfig(_Strict):
    base: int = Field(0, ge=0, lt=2**64)
    ensemble: int = Field(100, ge=1)


class TolerancesConfig(_Strict):
    verify: float = Field(1e-10, gt=0)
    max_condition: float = Field(DEFAULT_MAX_CONDITION, gt=0)
    ensemble_floor: float = Field(0.03, ge=0)
    ensemble_se_factor: float = Field(4.0, ge=0)
    pure: float = Field(PURE_TOL, gt=0)
    mixing: float = Field(MIXING_TOL, gt=0)
    dependence: float = Field(DEPENDENCE_TOL, gt=0)


class OutputConfig(_Strict):
    dir: str = "qrepeat-out"


class RunConfig(_Strict):
    spec: SpecConfig
    model: Union[MarkovBlocksConfig, HamiltonianConfig] = Field(discriminator="kind")
    initial_state: InitialStateConfig
    observable: Optional[Union[str, ObservableConfig]] = None
    steps: int = Field(ge=1)
    seeds: SeedsConfig = SeedsConfig()
    tolerances: TolerancesConfig = TolerancesConfig()
    output: OutputConfig = OutputConfig()

    def chain_spec(self) -> ChainSpec:
        s = self.spec
        return ChainSpec(s.system_dim, s.copy_dim, s.window, s.cap)

    def build_model(self) -> InteractionModel:
        return _build_model(self.model, self.spec)

    def build_initial_state(self) -> ReducedState:
        st = self.initial_state
        if st.vector is not None:
            return ReducedState.pure(_vector(st.vector))
        return ReducedState(_matrix(st.density))

    def build_observable(self) -> Optional[Observable]:
        return _build_observable(self.observable)

    def echo(self) -> dict:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


def _entry(x) -> complex:
    if isinstance(x, (tuple, list)):
        return complex(x[0], x[1])
    return complex(x)


def _vector(v) -> np.ndarray:
    return np.array([_entry(x) for x in v], dtype=complex)


def _matrix(m) -> np.ndarray:
    rows = [[_entry(x) for x in row] for row in m]
    if len({len(r) for r in rows}) > 1:
        raise ValueError("ragged matrix")
    return np.array(rows, dtype=complex)


def _build_observable(obs) -> Optional[Observable]:
    if obs is None:
        return None
    if isinstance(obs, str):
        m = _SPECIAL.match(obs)
        if m is None:
            raise ConfigError(f"expected 'special(l0,l1)', got {obs!r}", "observable")
        try:
            l0, l1 = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise ConfigError(f"non-numeric eigenvalues in {obs!r}", "observable") from None
        return special_observable(l0, l1)
    return Observable.from_matrix(_matrix(obs.matrix))


def _build_model(cfg, spec: SpecConfig) -> InteractionModel:
    if isinstance(cfg, MarkovBlocksConfig):
        given = [n for n in ("preset", "unitary", "blocks") if getattr(cfg, n) is not None]
        if len(given) != 1:
            raise ConfigError("give exactly one of preset, unitary, blocks", "model")
        if cfg.preset == "swap":
            if spec.system_dim != spec.copy_dim:
                raise ConfigError("the swap preset needs spec.system_dim == spec.copy_dim", "model.preset")
            return MarkovBlockModel.swap(spec.system_dim)
        if cfg.preset == "identity":
            return MarkovBlockModel.identity(spec.system_dim, spec.copy_dim)
        if cfg.unitary is not None:
            return MarkovBlockModel.from_unitary(_matrix(cfg.unitary), spec.system_dim, spec.copy_dim)
        blocks = np.array([[_matrix(b) for b in row] for row in cfg.blocks])
        return MarkovBlockModel(blocks)

    h0 = _matrix(cfg.h0)
    cp = cfg.coupling
    if (cp.preset is None) == (cp.table is None):
        raise ConfigError("give either preset (with c) or table", "model.coupling")
    if cp.preset is not None:
        if cp.c is None:
            raise ConfigError(f"preset {cp.preset!r} needs the operator c", "model.coupling.c")
        return HamiltonianChainModel.with_preset(h0, _matrix(cp.c), cp.preset, cfg.lam, cfg.tau, cfg.gamma)
    table = {(e.k, e.i): _matrix(e.c) for e in cp.table}
    return HamiltonianChainModel.from_table(h0, table, cfg.lam, cfg.tau, cfg.gamma)


def _loc(loc) -> str:
    parts = []
    for x in loc:
        if isinstance(x, int):
            parts.append(f"[{x}]")
        elif x in ("markov-blocks", "hamiltonian-chain", "str", "ObservableConfig"):
            continue
        else:
            parts.append(("." if parts else "") + str(x))
    return "".join(parts)


def _check_shapes(cfg: RunConfig) -> None:
    d, c = cfg.spec.system_dim, cfg.spec.copy_dim
    st = cfg.initial_state
    if (st.vector is None) == (st.density is None):
        raise ConfigError("give exactly one of vector, density", "initial_state")
    if st.vector is not None and len(st.vector) != d:
        raise ConfigError(f"length {len(st.vector)} != spec.system_dim {d}", "initial_state.vector")
    if st.density is not None and _matrix(st.density).shape != (d, d):
        raise ConfigError(f"expected {d}x{d}", "initial_state.density")
    if isinstance(cfg.observable, ObservableConfig) and _matrix(cfg.observable.matrix).shape != (c, c):
        raise ConfigError(f"expected {c}x{c} (spec.copy_dim)", "observable.matrix")
    m = cfg.model
    if isinstance(m, HamiltonianConfig):
        if _matrix(m.h0).shape != (d, d):
            raise ConfigError(f"expected {d}x{d} (spec.system_dim)", "model.h0")
        if c != 2:
            raise ConfigError("hamiltonian-chain models need spec.copy_dim == 2", "spec.copy_dim")
        if m.coupling.c is not None and _matrix(m.coupling.c).shape != (d, d):
            raise ConfigError(f"expected {d}x{d}", "model.coupling.c")
        for n, e in enumerate(m.coupling.table or []):
            if _matrix(e.c).shape != (d, d):
                raise ConfigError(f"expected {d}x{d}", f"model.coupling.table[{n}].c")
            if e.i > e.k:
                raise ConfigError(f"copy {e.i} is not yet coupled at step {e.k}", f"model.coupling.table[{n}]")
    elif m.unitary is not None and _matrix(m.unitary).shape != (d * c, d * c):
        raise ConfigError(f"expected {d * c}x{d * c}", "model.unitary")


def validate_config(data: dict) -> RunConfig:
    """Validate an already-decoded JSON object."""
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(err["msg"], _loc(err["loc"])) from None
    if cfg.steps > cfg.spec.window:
        raise ConfigError(f"steps={cfg.steps} exceeds spec.window={cfg.spec.window}", "steps, spec.window")
    try:
        _check_shapes(cfg)
        cfg.chain_spec()
        cfg.build_model()
        cfg.build_initial_state()
        cfg.build_observable()
    except ConfigError:
        raise
    except (QRepeatError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    return validate_config(data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
