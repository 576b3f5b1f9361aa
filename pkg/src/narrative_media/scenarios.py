"""Built-in binary environments and their closed-form optima.

american_dream       p(y=1|t,a) = a(2-t)/2,        u = t*y - c*a
whac_a_mole          p(y=1|t,a) = beta(1-a) + (1-beta)t,  u = 1[a = y]
degenerate_inaction  p(y=1|t,a) = 1 - t,           u = t*y - c*a

All three use a uniform prior on t in {0, 1}.  Signal parameters follow the
direct-recommendation convention q_t = p(s=1 | t), where s=1 recommends a=1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model_core import Environment, ModelError, Narrative, Separability

SCENARIOS = ("american_dream", "whac_a_mole", "degenerate_inaction")
BINARY = (0, 1)
DEFAULT_DEGENERATE_COST = 0.2


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ModelError(f"scenario: unknown name {self.name!r}; expected one of {SCENARIOS}")
        params = dict(self.params)
        if self.name == "whac_a_mole":
            beta = _require(params, "beta")
            if not (1.0 / 3.0 < beta < 1.0):
                raise ModelError(f"beta: must lie in (1/3, 1), got {beta!r}")
            params = {"beta": beta}
        else:
            default = DEFAULT_DEGENERATE_COST if self.name == "degenerate_inaction" else None
            c = _require(params, "c", default)
            if not (0.0 < c < 1.0):
                raise ModelError(f"c: must lie in (0, 1), got {c!r}")
            params = {"c": c}
        object.__setattr__(self, "params", params)

    @property
    def param_name(self) -> str:
        return "beta" if self.name == "whac_a_mole" else "c"

    @property
    def value(self) -> float:
        return self.params[self.param_name]


def _require(params: dict, key: str, default=None) -> float:
    val = params.get(key, default)
    if val is None:
        raise ModelError(f"{key}: required parameter missing")
    try:
        val = float(val)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{key}: not a number ({val!r})") from exc
    if not math.isfinite(val):
        raise ModelError(f"{key}: must be finite")
    return val


def _binary_env(p_y1: np.ndarray, utility: np.ndarray, separability: Separability | None) -> Environment:
    kernel = np.stack([1.0 - p_y1, p_y1], axis=-1)
    return Environment(BINARY, BINARY, BINARY, BINARY, np.array([0.5, 0.5]), kernel, utility, separability)


def american_dream(c: float) -> Environment:
    return build(ScenarioSpec("american_dream", {"c": c}))


def whac_a_mole(beta: float) -> Environment:
    return build(ScenarioSpec("whac_a_mole", {"beta": beta}))


def degenerate_inaction(c: float = DEFAULT_DEGENERATE_COST) -> Environment:
    return build(ScenarioSpec("degenerate_inaction", {"c": c}))


def build(spec: ScenarioSpec) -> Environment:
    t = np.array([0.0, 1.0])[:, None]
    a = np.array([0.0, 1.0])[None, :]
    y = np.array([0.0, 1.0])
    if spec.name == "whac_a_mole":
        beta = spec.params["beta"]
        p_y1 = beta * (1.0 - a) + (1.0 - beta) * t
        v = np.eye(2)  # v[a, y] = 1[a = y]
        sep = Separability("state_separable", v=v, w=np.zeros(2))
        util = np.broadcast_to(v[None, :, :], (2, 2, 2))
        return _binary_env(p_y1, util, sep)
    c = spec.params["c"]
    if spec.name == "american_dream":
        p_y1 = 0.5 * a * (2.0 - t)
    else:
        p_y1 = np.broadcast_to(1.0 - t, (2, 2))
    v = t * y[None, :]  # v[t, y] = t*y
    cost = c * np.array([0.0, 1.0])
    util = v[:, None, :] - cost[None, :, None]
    return _binary_env(p_y1, util, Separability("action_separable", v=v, c=cost))


@dataclass(frozen=True)
class OracleRecord:
    """Closed-form optimum: argmax narratives (canonical head first), signal, values."""

    narratives: tuple[Narrative, ...]
    q0: float | None
    q1: float | None
    utility: float
    benchmark: float

    @property
    def narrative(self) -> Narrative:
        return self.narratives[0]


def american_dream_q0(c: float) -> float:
    return min(1.0, math.sqrt(1.0 / (2.0 * c)) - 1.0)


def american_dream_value(c: float) -> float:
    """Optimal anticipatory utility; zero once the cost reaches 1/2."""
    if c >= 0.5:
        return 0.0
    if c < 0.125:
        return 0.375 - c
    return 0.5 - math.sqrt(c / 2.0)


def closed_form_oracle(spec: ScenarioSpec) -> OracleRecord:
    if spec.name == "american_dream":
        c = spec.params["c"]
        bench = max(0.0, 0.25 - c / 2.0)
        if c >= 0.5:
            return OracleRecord(tuple(Narrative), None, None, 0.0, bench)
        return OracleRecord((Narrative.EMPOWERING,), american_dream_q0(c), 1.0, american_dream_value(c), bench)
    if spec.name == "whac_a_mole":
        beta = spec.params["beta"]
        q1 = 0.25 + 1.0 / (4.0 * beta)
        return OracleRecord(
            (Narrative.FATALISTIC,), 1.0 - q1, q1, (1.0 + beta) ** 2 / (8.0 * beta), 1.0 - beta
        )
    return OracleRecord((Narrative.EMPOWERING, Narrative.DENIAL), 0.0, 0.0, 0.25, 0.0)
