"""Finite environments, signal functions, consumer strategies and narrative beliefs.

All objects are immutable after construction.  Arrays are copied on the way in
and flagged read-only, so values can be shared freely between threads.

Index conventions used throughout the package:

* ``prior[t]``
* ``outcome_kernel[t, a, y]`` = p(y | t, a)
* ``utility[t, a, y]``
* ``SignalFunction.kernel[t, s]`` = p(s | t)
* ``ConsumerStrategy.kernel[s, a]`` = p(a | s)
* ``JointDistribution.tensor[t, s, a, y]``
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
DEFAULT_EPSILON = 1e-9


class ModelError(ValueError):
    """Rejected input or an undefined conditional probability."""


class Narrative(enum.Enum):
    """Causal model of the outcome: which of {state, action} are kept as parents of y."""

    TRUE = "true"
    EMPOWERING = "empowering"
    FATALISTIC = "fatalistic"
    DENIAL = "denial"

    @property
    def retained_causes(self) -> frozenset[str]:
        return _RETAINED[self]

    @property
    def code(self) -> int:
        # integer tag shared with the compiled kernels; also the canonical tie order
        return _CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Narrative":
        return _ORDER[code]

    @classmethod
    def parse(cls, text: "str | Narrative") -> "Narrative":
        if isinstance(text, Narrative):
            return text
        key = str(text).strip().lower()
        for n in cls:
            if key in (n.value, n.name.lower()):
                return n
        aliases = {"empowering": ("a", "action"), "fatalistic": ("t", "state"), "denial": ("none", "empty")}
        for name, keys in aliases.items():
            if key in keys:
                return cls(name)
        raise ModelError(f"unknown narrative {text!r}; expected one of {[n.value for n in cls]}")

    def __str__(self) -> str:
        return self.name


_RETAINED = {
    Narrative.TRUE: frozenset({"state", "action"}),
    Narrative.EMPOWERING: frozenset({"action"}),
    Narrative.FATALISTIC: frozenset({"state"}),
    Narrative.DENIAL: frozenset(),
}
_ORDER = (Narrative.TRUE, Narrative.EMPOWERING, Narrative.FATALISTIC, Narrative.DENIAL)
_CODES = {n: i for i, n in enumerate(_ORDER)}
NARRATIVES = _ORDER


def _frozen(x, ndim: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise ModelError(f"{name}: expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name}: entries must be finite")
    arr.setflags(write=False)
    return arr


def _check_stochastic(arr: np.ndarray, name: str, axis: int = -1) -> None:
    if np.any(arr < -PROB_TOL):
        raise ModelError(f"{name}: negative probability entry")
    if np.any(arr > 1.0 + PROB_TOL):
        raise ModelError(f"{name}: probability entry above 1")
    sums = np.atleast_1d(arr.sum(axis=axis))
    bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        where = f"row {idx}" if arr.ndim > 1 else "vector"
        raise ModelError(f"{name}: {where} sums to {float(sums[idx])!r}, not 1")


SEPARABILITY_KINDS = ("action_separable", "state_separable", "outcome_separable", "none")


@dataclass(frozen=True, eq=False)
class Separability:
    """Additive decomposition of the utility tensor.

    * action_separable:  u(t,a,y) = v[t,y] - c[a]
    * state_separable:   u(t,a,y) = v[a,y] + w[t]
    * outcome_separable: u(t,a,y) = v[t,a] + w[y]
    """

    kind: str
    v: np.ndarray | None = None
    c: np.ndarray | None = None
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SEPARABILITY_KINDS:
            raise ModelError(f"separability.kind: unknown tag {self.kind!r}")
        for name in ("v", "c", "w"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val, np.ndim(val), f"separability.{name}"))
        needed = {
            "action_separable": ("v", "c"),
            "state_separable": ("v", "w"),
            "outcome_separable": ("v", "w"),
            "none": (),
        }[self.kind]
        for name in needed:
            if getattr(self, name) is None:
                raise ModelError(f"separability.{name}: required for {self.kind}")

    def utility(self, n_states: int, n_actions: int, n_outcomes: int) -> np.ndarray | None:
        """Rebuild u(t,a,y) from the components (None for the 'none' tag)."""
        shape = (n_states, n_actions, n_outcomes)
        try:
            if self.kind == "action_separable":
                return np.broadcast_to(self.v[:, None, :] - self.c[None, :, None], shape)
            if self.kind == "state_separable":
                return np.broadcast_to(self.v[None, :, :] + self.w[:, None, None], shape)
            if self.kind == "outcome_separable":
                return np.broadcast_to(self.v[:, :, None] + self.w[None, None, :], shape)
        except (IndexError, ValueError) as exc:
            raise ModelError(f"separability components do not match shape {shape}: {exc}") from exc
        return None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        for name in ("v", "c", "w"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val.tolist()
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Separability":
        if "kind" not in data:
            raise ModelError("separability.kind: missing")
        return cls(kind=data["kind"], v=data.get("v"), c=data.get("c"), w=data.get("w"))


@dataclass(frozen=True, eq=False)
class Environment:
    states: tuple
    signals: tuple
    actions: tuple
    outcomes: tuple
    prior: np.ndarray
    outcome_kernel: np.ndarray
    utility: np.ndarray
    separability: Separability | None = None

    def __post_init__(self):
        for name in ("states", "signals", "actions", "outcomes"):
            labels = tuple(getattr(self, name))
            if not labels:
                raise ModelError(f"{name}: must be non-empty")
            if len(set(map(repr, labels))) != len(labels):
                raise ModelError(f"{name}: labels must be distinct")
            object.__setattr__(self, name, labels)
        prior = _frozen(self.prior, 1, "prior")
        kernel = _frozen(self.outcome_kernel, 3, "outcome_kernel")
        util = _frozen(self.utility, 3, "utility")
        shape = (len(self.states), len(self.actions), len(self.outcomes))
        if prior.shape != (len(self.states),):
            raise ModelError(f"prior: expected length {len(self.states)}, got {prior.shape[0]}")
        if kernel.shape != shape:
            raise ModelError(f"outcome_kernel: expected shape {shape}, got {kernel.shape}")
        if util.shape != shape:
            raise ModelError(f"utility: expected shape {shape}, got {util.shape}")
        _check_stochastic(prior, "prior", axis=0)
        _check_stochastic(kernel, "outcome_kernel")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "outcome_kernel", kernel)
        object.__setattr__(self, "utility", util)
        sep = self.separability
        if isinstance(sep, Mapping):
            sep = Separability.from_dict(sep)
            object.__setattr__(self, "separability", sep)
        if sep is not None:
            rebuilt = sep.utility(*shape)
            if rebuilt is not None and np.max(np.abs(rebuilt - util)) > PROB_TOL:
                raise ModelError(f"separability: utility does not decompose as {sep.kind}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return len(self.states), len(self.signals), len(self.actions), len(self.outcomes)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_signals(self) -> int:
        return len(self.signals)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    def with_signals(self, signals: Sequence) -> "Environment":
        return Environment(
            self.states, tuple(signals), self.actions, self.outcomes,
            self.prior, self.outcome_kernel, self.utility, self.separability,
        )

    def expected_utility(self) -> np.ndarray:
        """W[t, a] = sum_y p(y|t,a) u(t,a,y) under the true kernel."""
        return np.einsum("tay,tay->ta", self.outcome_kernel, self.utility)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "states": list(self.states),
            "signals": list(self.signals),
            "actions": list(self.actions),
            "outcomes": list(self.outcomes),
            "prior": self.prior.tolist(),
            "outcome_kernel": self.outcome_kernel.tolist(),
            "utility": self.utility.tolist(),
        }
        if self.separability is not None:
            out["separability"] = self.separability.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Environment":
        missing = [k for k in ("states", "signals", "actions", "outcomes", "prior", "outcome_kernel", "utility") if k not in data]
        if missing:
            raise ModelError(f"environment: missing key(s) {', '.join(missing)}")
        sep = data.get("separability")
        return cls(
            states=tuple(data["states"]),
            signals=tuple(data["signals"]),
            actions=tuple(data["actions"]),
            outcomes=tuple(data["outcomes"]),
            prior=data["prior"],
            outcome_kernel=data["outcome_kernel"],
            utility=data["utility"],
            separability=Separability.from_dict(sep) if sep is not None else None,
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Environment":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"environment: invalid JSON ({exc})") from exc
        if not isinstance(data, Mapping):
            raise ModelError("environment: top-level JSON value must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "Environment":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class SignalFunction:
    kernel: np.ndarray  # [t, s]

    def __post_init__(self):
        k = _frozen(self.kernel, 2, "signal kernel")
        _check_stochastic(k, "signal kernel")
        object.__setattr__(self, "kernel", k)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_signals(self) -> int:
        return self.kernel.shape[1]

    @classmethod
    def full_information(cls, n_states: int, n_signals: int | None = None) -> "SignalFunction":
        n_signals = n_states if n_signals is None else n_signals
        if n_signals < n_states:
            raise ModelError("full information needs at least one signal per state")
        return cls(np.eye(n_states, n_signals))

    @classmethod
    def uninformative(cls, n_states: int, n_signals: int, signal: int = 0) -> "SignalFunction":
        k = np.zeros((n_states, n_signals))
        k[:, signal] = 1.0
        return cls(k)

    @classmethod
    def binary(cls, q0: float, q1: float) -> "SignalFunction":
        """Binary experiment with q_t = p(s=1 | t)."""
        return cls(np.array([[1.0 - q0, q0], [1.0 - q1, q1]]))

    def is_uninformative(self, prior: np.ndarray, tol: float = 1e-9) -> bool:
        live = prior > 0
        rows = self.kernel[live]
        return bool(np.all(np.abs(rows - rows[0]) <= tol))


@dataclass(frozen=True, eq=False)
class ConsumerStrategy:
    kernel: np.ndarray  # [s, a]

    def __post_init__(self):
        k = _frozen(self.kernel, 2, "strategy kernel")
        _check_stochastic(k, "strategy kernel")
        object.__setattr__(self, "kernel", k)

    @property
    def n_signals(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    @classmethod
    def pure(cls, actions: Sequence[int], n_actions: int) -> "ConsumerStrategy":
        k = np.zeros((len(actions), n_actions))
        k[np.arange(len(actions)), list(actions)] = 1.0
        return cls(k)

    @classmethod
    def constant(cls, action: int, n_signals: int, n_actions: int) -> "ConsumerStrategy":
        return cls.pure([action] * n_signals, n_actions)

    @classmethod
    def obedient(cls, n_actions: int) -> "ConsumerStrategy":
        """Follow the recommendation: signal s means action s."""
        return cls(np.eye(n_actions))

    def support(self, threshold: float = 0.0) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(int(a) for a in np.flatnonzero(row > threshold)) for row in self.kernel)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    tensor: np.ndarray  # [t, s, a, y]
    env: Environment = field(repr=False)
    signal: SignalFunction = field(repr=False)
    strategy: ConsumerStrategy = field(repr=False)
    epsilon: float = 0.0

    def marginal(self, keep: str) -> np.ndarray:
        """Marginal over the named axes, e.g. ``"ta"`` or ``"y"``."""
        return np.einsum(f"tsay->{keep}", self.tensor)


@dataclass(frozen=True, eq=False)
class BeliefKernel:
    kernel: np.ndarray  # [t, a, y]
    narrative: Narrative
    source: JointDistribution = field(repr=False)


def _check_dims(env: Environment, I: SignalFunction | None = None, sigma: ConsumerStrategy | None = None) -> None:
    T, S, A, _ = env.shape
    if I is not None and I.kernel.shape != (T, S):
        raise ModelError(f"signal kernel: expected shape {(T, S)}, got {I.kernel.shape}")
    if sigma is not None and sigma.kernel.shape != (S, A):
        raise ModelError(f"strategy kernel: expected shape {(S, A)}, got {sigma.kernel.shape}")


def factorize(env: Environment, I: SignalFunction, sigma: ConsumerStrategy, epsilon: float = 0.0) -> JointDistribution:
    """p(t,s,a,y) = p(t) p(s|t) p(a|s) p(y|t,a)."""
    _check_dims(env, I, sigma)
    tensor = np.einsum("t,ts,sa,tay->tsay", env.prior, I.kernel, sigma.kernel, env.outcome_kernel)
    tensor.setflags(write=False)
    return JointDistribution(tensor, env, I, sigma, epsilon)


def smooth(sigma: ConsumerStrategy, epsilon: float) -> ConsumerStrategy:
    """Mix every row with the uniform distribution: (1-eps) row + eps uniform."""
    if not (0.0 < epsilon < 1.0):
        raise ModelError(f"epsilon: must lie in (0, 1), got {epsilon!r}")
    A = sigma.n_actions
    return ConsumerStrategy((1.0 - epsilon) * sigma.kernel + epsilon / A)


def fit_narrative(joint: JointDistribution, N: Narrative) -> BeliefKernel:
    """Outcome kernel implied by fitting the narrative's DAG to the joint.

    Conditional probabilities are taken on the (t, a) margin; the result is
    broadcast back to shape [t, a, y].
    """
    N = Narrative.parse(N)
    p_tay = np.einsum("tsay->tay", joint.tensor)
    T, A, Y = p_tay.shape
    if N is Narrative.TRUE:
        num, den = p_tay, p_tay.sum(axis=2, keepdims=True)
        cells = [(t, a) for t in range(T) for a in range(A)]
        flat_den = den[..., 0]
    elif N is Narrative.EMPOWERING:
        num = p_tay.sum(axis=0, keepdims=True)
        den = num.sum(axis=2, keepdims=True)
        cells = [("*", a) for a in range(A)]
        flat_den = den[0, :, 0]
    elif N is Narrative.FATALISTIC:
        num = p_tay.sum(axis=1, keepdims=True)
        den = num.sum(axis=2, keepdims=True)
        cells = [(t, "*") for t in range(T)]
        flat_den = den[:, 0, 0]
    else:
        num = p_tay.sum(axis=(0, 1), keepdims=True)
        den = num.sum(axis=2, keepdims=True)
        cells = [("*", "*")]
        flat_den = den.reshape(-1)
    zero = np.flatnonzero(flat_den.reshape(-1) <= 0.0)
    if zero.size:
        t, a = cells[int(zero[0])]
        raise ModelError(
            f"fit_narrative({N.name}): conditioning cell (t={t}, a={a}) has zero probability; smooth the strategy first"
        )
    kernel = np.broadcast_to(num / den, (T, A, Y)).copy()
    kernel.setflags(write=False)
    return BeliefKernel(kernel, N, joint)


def signal_probabilities(env: Environment, I: SignalFunction) -> np.ndarray:
    _check_dims(env, I)
    return env.prior @ I.kernel


def posterior_states(env: Environment, I: SignalFunction, s: int) -> np.ndarray:
    """Bayes posterior p(t | s); a null signal is an error."""
    _check_dims(env, I)
    if not 0 <= s < env.n_signals:
        raise ModelError(f"signal index {s} out of range")
    joint = env.prior * I.kernel[:, s]
    mass = joint.sum()
    if mass <= 0.0:
        raise ModelError(f"signal {env.signals[s]!r} has zero probability; posterior undefined")
    return joint / mass


def subjective_value(env: Environment, I: SignalFunction, belief: BeliefKernel, s: int, a: int) -> float:
    """V(s, a) = sum_{t,y} p(t|s) p_N(y|t,a) u(t,a,y)."""
    post = posterior_states(env, I, s)
    return float(np.einsum("t,ty,ty->", post, belief.kernel[:, a, :], env.utility[:, a, :]))


def value_table(env: Environment, I: SignalFunction, belief: BeliefKernel) -> tuple[np.ndarray, np.ndarray]:
    """Return (p(s), V[s, a]); rows of V at null signals are NaN."""
    ps = signal_probabilities(env, I)
    W = np.einsum("tay,tay->ta", belief.kernel, env.utility)
    weighted = np.einsum("t,ts,ta->sa", env.prior, I.kernel, W)
    V = np.full_like(weighted, np.nan)
    live = ps > 0
    V[live] = weighted[live] / ps[live, None]
    return ps, V


def anticipatory_utility(
    env: Environment,
    I: SignalFunction,
    N: Narrative,
    sigma: ConsumerStrategy,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Ex-ante expectation of max_a V(s, a), beliefs fit to the smoothed strategy."""
    joint = factorize(env, I, smooth(sigma, epsilon), epsilon)
    belief = fit_narrative(joint, N)
    ps, V = value_table(env, I, belief)
    live = ps > 0
    return float(np.sum(ps[live] * V[live].max(axis=1)))
