"""Brute-force evolution ``mu_{k+1} = U_{k+1} mu_k U_{k+1}^*`` of the global state.

This is the oracle that the projection and measurement engines are checked
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import WindowError
from .models import InteractionModel, step_unitaries
from .tensor import ChainSpec, GlobalState, ReducedState, dagger, partial_trace_chain


@dataclass(frozen=True)
class EvolutionRun:
    spec: ChainSpec
    model: InteractionModel = field(repr=False)
    initial_system: ReducedState = field(repr=False)
    steps: int
    states: list = field(repr=False)
    reduced: list = field(repr=False)
    unitaries: list = field(repr=False)


def evolve_direct(model: InteractionModel, initial_system: ReducedState, steps: int, spec: ChainSpec) -> EvolutionRun:
    if steps > spec.window:
        raise WindowError(f"{steps} steps exceed the chain window {spec.window}")
    us = step_unitaries(model, spec, steps)
    mu = GlobalState.product(initial_system, spec)
    states = [mu]
    for u in us:
        rho = u @ mu.rho @ dagger(u)
        mu = GlobalState(spec, 0.5 * (rho + dagger(rho)))
        states.append(mu)
    reduced = [partial_trace_chain(s) for s in states]
    return EvolutionRun(spec, model, initial_system, steps, states, reduced, us)


def reduced_sequence(run: EvolutionRun) -> list[ReducedState]:
    return list(run.reduced)


def reduced_matrices(states) -> np.ndarray:
    """Stack the density matrices of a list of ReducedState into one array."""
    return np.stack([s.rho for s in states])
