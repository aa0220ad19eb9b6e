"""Gaussian random search over bounded, transformed parameters.

Each round draws a batch of proposals around the incumbent best in
transformed space (linear, log, or logit), evaluates them, and keeps the
best on strict improvement.  Failures score -inf and never poison the
search.  Everything is driven by one seeded generator, so a run is a
pure function of (objective, spec, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .corpus import make_rng

_STREAM_SEARCH = 6

Params = dict[str, float]


class Transform(Enum):
    LINEAR = "linear"
    LOG = "log"
    LOGIT = "logit"

    def forward(self, x: float) -> float:
        if self is Transform.LINEAR:
            return x
        if self is Transform.LOG:
            return math.log(x)
        return math.log(x / (1.0 - x))

    def inverse(self, y: float) -> float:
        if self is Transform.LINEAR:
            return y
        if self is Transform.LOG:
            return math.exp(y)
        # Stable sigmoid for both tails.
        if y >= 0:
            return 1.0 / (1.0 + math.exp(-y))
        e = math.exp(y)
        return e / (1.0 + e)


@dataclass(frozen=True)
class Param:
    name: str
    lo: float
    hi: float
    transform: Transform = Transform.LINEAR
    init: float = 0.0
    sigma: float = 1.0
    frozen: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: lo must be < hi")
        if not self.lo <= self.init <= self.hi:
            raise ValueError(f"{self.name}: init outside bounds")
        if not self.frozen and self.sigma <= 0:
            raise ValueError(f"{self.name}: sigma must be > 0 unless frozen")
        if self.transform is Transform.LOG and self.lo <= 0:
            raise ValueError(f"{self.name}: log transform needs lo > 0")
        if self.transform is Transform.LOGIT and not (0 < self.lo and self.hi < 1):
            raise ValueError(f"{self.name}: logit transform needs bounds inside (0, 1)")

    def clamp(self, x: float) -> float:
        return min(self.hi, max(self.lo, x))


@dataclass(frozen=True)
class ParamSpec:
    params: tuple[Param, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    def initial(self) -> Params:
        return {p.name: p.init for p in self.params}

    def __iter__(self):
        return iter(self.params)


@dataclass
class SearchState:
    best_params: Params
    best_score: float
    history: list[tuple[Params, float]] = field(default_factory=list)
    seed: int = 0
    outer_iterations: int = 40
    batch_size: int = 8


def initial_state(
    spec: ParamSpec, seed: int = 0, outer_iterations: int = 40, batch_size: int = 8
) -> SearchState:
    if outer_iterations < 0 or batch_size < 1:
        raise ValueError("need outer_iterations >= 0 and batch_size >= 1")
    return SearchState(
        best_params=spec.initial(),
        best_score=-math.inf,
        seed=seed,
        outer_iterations=outer_iterations,
        batch_size=batch_size,
    )


def propose(spec: ParamSpec, center: Params, rng: np.random.Generator) -> Params:
    """One Gaussian draw around the center in transformed space."""
    out: Params = {}
    for p in spec:
        x = center[p.name]
        if p.frozen:
            out[p.name] = x
        else:
            y = float(rng.normal(p.transform.forward(x), p.sigma))
            out[p.name] = p.clamp(p.transform.inverse(y))
    return out


def _safe_eval(objective: Callable[[Params], float], params: Params) -> float:
    try:
        score = float(objective(params))
    except Exception:
        return -math.inf
    if math.isnan(score):
        return -math.inf
    return score


def run_search(
    objective: Callable[[Params], float], spec: ParamSpec, state: SearchState
) -> SearchState:
    """Evaluate the initial point, then outer_iterations rounds of
    batch_size proposals centered on the incumbent; strict improvements
    move the incumbent at batch boundaries."""
    rng = make_rng(state.seed, _STREAM_SEARCH)
    init = dict(state.best_params)
    score = _safe_eval(objective, init)
    state.history.append((init, score))
    if score > state.best_score:
        state.best_score = score
        state.best_params = init

    for _ in range(state.outer_iterations):
        batch = [propose(spec, state.best_params, rng) for _ in range(state.batch_size)]
        round_best: tuple[float, Params] | None = None
        for params in batch:
            s = _safe_eval(objective, params)
            state.history.append((params, s))
            if round_best is None or s > round_best[0]:
                round_best = (s, params)
        if round_best is not None and round_best[0] > state.best_score:
            state.best_score, state.best_params = round_best[0], round_best[1]
    return state


# ---------------------------------------------------------------------------
# Parameter files: one per line, `name lo hi transform init sigma frozen`.


def parse_param_file(path) -> ParamSpec:
    params = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 7:
                raise ValueError(f"line {line_no}: expected 7 fields, got {len(parts)}")
            name, lo, hi, transform, init, sigma, frozen = parts
            params.append(
                Param(
                    name,
                    float(lo),
                    float(hi),
                    Transform(transform),
                    float(init),
                    float(sigma),
                    frozen not in ("0", "false", "False"),
                )
            )
    return ParamSpec(tuple(params))


def write_param_file(path, spec: ParamSpec, values: Params | None = None) -> None:
    """Write the spec, optionally with init replaced by searched values."""
    with open(path, "w") as fh:
        for p in spec:
            init = values[p.name] if values is not None else p.init
            fh.write(
                f"{p.name} {p.lo!r} {p.hi!r} {p.transform.value} "
                f"{init!r} {p.sigma!r} {int(p.frozen)}\n"
            )
