"""Data model: problems, integrands, contraction schemes, dead records, runs."""
from __future__ import annotations

import enum
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .numerics import NEG_INF, log_diff_exp, logsumexp

RUN_FORMAT = "nsquad-run/1"


class ContractionScheme(str, enum.Enum):
    EXPONENTIAL = "exponential"
    BETA_MEAN = "beta_mean"


class Termination(str, enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    REMAINING_MASS_NEGLIGIBLE = "remaining_mass_negligible"
    FULL_PLATEAU = "full_plateau"
    ABORTED = "aborted"


class ParameterError(ValueError):
    pass


class CompatibilityError(TypeError):
    """Integrand not declared as a level-set companion of the surrogate."""


class ChecksumError(ValueError):
    pass


def _check_iJ(i: int, J: int) -> None:
    if i < 1 or J < 1:
        raise ParameterError(f"need i >= 1 and J >= 1, got i={i}, J={J}")


def contraction_log_weight(scheme: ContractionScheme | str, i: int, J: int) -> float:
    """log xi_i, the deterministic prior-mass weight of the i-th dead sample."""
    _check_iJ(i, J)
    scheme = ContractionScheme(scheme)
    if scheme is ContractionScheme.EXPONENTIAL:
        return math.log(-math.expm1(-1.0 / J)) - (i - 1) / J
    return -(i - 1) * math.log1p(1.0 / J) - math.log(J + 1)


def contraction_log_weights(scheme: ContractionScheme | str, K: int, J: int) -> np.ndarray:
    """Vector of log xi_i for i = 1..K."""
    if J < 1:
        raise ParameterError(f"need J >= 1, got {J}")
    scheme = ContractionScheme(scheme)
    i = np.arange(K, dtype=float)  # i - 1
    if scheme is ContractionScheme.EXPONENTIAL:
        return math.log(-math.expm1(-1.0 / J)) - i / J
    return -i * math.log1p(1.0 / J) - math.log(J + 1)


def remaining_log_mass(scheme: ContractionScheme | str, K: int, J: int) -> float:
    """log(1 - sum_{i<=K} xi_i), the prior mass left after K removals."""
    if K < 0:
        raise ParameterError(f"need K >= 0, got {K}")
    if J < 1:
        raise ParameterError(f"need J >= 1, got {J}")
    scheme = ContractionScheme(scheme)
    if scheme is ContractionScheme.EXPONENTIAL:
        return -K / J
    return -K * math.log1p(1.0 / J)


def remaining_log_mass_by_sum(scheme: ContractionScheme | str, K: int, J: int) -> float:
    """Same quantity accumulated term by term; cross-check for the closed form."""
    if K == 0:
        return 0.0
    return log_diff_exp(0.0, logsumexp(contraction_log_weights(scheme, K, J)))


# ---------------------------------------------------------------------------
# problems and integrands


@dataclass(frozen=True)
class Integrand:
    """A non-decreasing function of the surrogate level.

    Being a function of the level is what makes it a level-set companion of
    the surrogate, so dead samples of any run can be replayed against it.
    ``of_level`` must accept numpy arrays.
    """

    name: str
    of_level: Callable[[np.ndarray], np.ndarray]
    upper: float = 1.0  # limit as level -> +inf, used by early stopping

    def __call__(self, levels):
        return np.asarray(self.of_level(np.asarray(levels, dtype=float)), dtype=float)


def indicator(kappa: float, name: str = "indicator") -> Integrand:
    return Integrand(name, lambda lv: (lv > kappa).astype(float), upper=1.0)


def identity(name: str = "identity") -> Integrand:
    return Integrand(name, lambda lv: lv, upper=math.inf)


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "rwm"  # rwm | pcn | slice | rejection
    steps: int | None = None  # default 20 (rwm/pcn) or 10 (slice)
    step_size: float | None = None
    beta: float = 0.3
    initial_width: float = 1.0
    max_tries: int = 1_000_000

    def n_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        return 10 if self.kind == "slice" else 20

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "steps": self.steps,
            "step_size": self.step_size,
            "beta": self.beta,
            "initial_width": self.initial_width,
            "max_tries": self.max_tries,
        }


@dataclass(frozen=True)
class Problem:
    """One benchmark instance: prior, level-set surrogate, integrands, event.

    Positions are numpy arrays. ``log_prior`` is an unnormalized log density
    (``-inf`` off the support) used by the random-walk and slice samplers;
    ``gaussian_prior`` marks positions that are i.i.d. standard normal vectors,
    which is what the pCN sampler requires.
    """

    name: str
    sample_prior: Callable[[np.random.Generator], np.ndarray]
    surrogate: Callable[[np.ndarray], float]
    integrands: Mapping[str, Integrand]
    event_threshold: float
    dimension: int | str
    params: Mapping[str, Any] = field(default_factory=dict)
    log_prior: Callable[[np.ndarray], float] | None = None
    gaussian_prior: bool = False
    prior_sd: float | None = None
    statistics: Mapping[str, Callable[[np.ndarray], float]] = field(default_factory=dict)
    sup_level: float = math.inf
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    primary_integrand: str = "indicator"
    # optional vectorized prior: (rng, n) -> (positions, levels)
    prior_batch: Callable | None = None
    # analytic survival function of the surrogate, lambda -> log mu(g > lambda)
    log_survival: Callable[[float], float] | None = None
    # exact values of the integrands, name -> value
    exact: Mapping[str, float] = field(default_factory=dict)
    # display form of a position for path/endpoint plots
    trajectory: Callable[[np.ndarray], np.ndarray] | None = None

    def level(self, position: np.ndarray) -> float:
        return float(self.surrogate(position))

    def integrand(self, name: str | None = None) -> Integrand:
        return self.integrands[name or self.primary_integrand]

    def statistic(self, name: str) -> Callable[[np.ndarray], float]:
        try:
            return self.statistics[name]
        except KeyError:
            raise KeyError(f"problem {self.name!r} has no statistic {name!r}; "
                           f"available: {sorted(self.statistics)}") from None

    def event(self, position: np.ndarray) -> bool:
        return self.level(position) > self.event_threshold


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True, eq=False)
class DeadRecord:
    position: np.ndarray
    level: float
    iteration: int
    tie_group: int

    def __eq__(self, other):
        if not isinstance(other, DeadRecord):
            return NotImplemented
        return (self.iteration == other.iteration and self.tie_group == other.tie_group
                and _same_float(self.level, other.level)
                and _same_array(self.position, other.position))


def _same_float(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


def _same_array(a: np.ndarray, b: np.ndarray) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.dtype == b.dtype and a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(eq=False)
class NSRun:
    problem_name: str
    J: int
    N: int
    scheme: ContractionScheme
    seed: int
    dead: list[DeadRecord]
    final_live: list[tuple[np.ndarray, float]]
    termination_reason: Termination
    problem_params: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    valid: bool = True
    warnings: dict = field(default_factory=dict)

    @property
    def levels(self) -> np.ndarray:
        return np.fromiter((d.level for d in self.dead), dtype=float, count=len(self.dead))

    @property
    def live_levels(self) -> np.ndarray:
        return np.array([lv for _, lv in self.final_live], dtype=float)

    def log_weights(self, scheme: ContractionScheme | str | None = None) -> np.ndarray:
        return contraction_log_weights(scheme or self.scheme, len(self.dead), self.J)

    def remaining_log_mass(self, K: int | None = None, scheme=None) -> float:
        return remaining_log_mass(scheme or self.scheme, len(self.dead) if K is None else K, self.J)

    def __eq__(self, other):
        if not isinstance(other, NSRun):
            return NotImplemented
        return (self.header_fields() == other.header_fields()
                and len(self.dead) == len(other.dead)
                and all(a == b for a, b in zip(self.dead, other.dead))
                and len(self.final_live) == len(other.final_live)
                and all(_same_float(la, lb) and _same_array(pa, pb)
                        for (pa, la), (pb, lb) in zip(self.final_live, other.final_live)))

    def header_fields(self) -> dict:
        return {
            "problem": self.problem_name,
            "problem_params": self.problem_params,
            "J": self.J,
            "N": self.N,
            "scheme": ContractionScheme(self.scheme).value,
            "seed": self.seed,
            "termination_reason": Termination(self.termination_reason).value,
            "valid": self.valid,
            "warnings": self.warnings,
            "config": self.config,
        }


# ---------------------------------------------------------------------------
# line-delimited serialization: header object, then one record per line


def _position_meta(run: NSRun) -> dict:
    sample = run.dead[0].position if run.dead else (run.final_live[0][0] if run.final_live else None)
    if sample is None:
        return {"dtype": "float64", "shape": []}
    sample = np.asarray(sample)
    return {"dtype": sample.dtype.str, "shape": list(sample.shape)}


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=True)


def dumps_run(run: NSRun) -> str:
    body = io.StringIO()
    for d in run.dead:
        body.write(_dumps([d.iteration, d.tie_group, float(d.level), np.asarray(d.position).tolist()]))
        body.write("\n")
    body_text = body.getvalue()
    header = {"format": RUN_FORMAT, **run.header_fields(),
              "position": _position_meta(run),
              "final_live": [[float(lv), np.asarray(p).tolist()] for p, lv in run.final_live],
              "n_dead": len(run.dead),
              "body_sha256": hashlib.sha256(body_text.encode()).hexdigest()}
    return _dumps(header) + "\n" + body_text


def loads_run(text: str) -> NSRun:
    head, _, body_text = text.partition("\n")
    try:
        header = json.loads(head)
    except json.JSONDecodeError as exc:
        raise ChecksumError(f"unreadable run header: {exc}") from None
    if header.get("format") != RUN_FORMAT:
        raise ChecksumError(f"not an {RUN_FORMAT} file")
    if hashlib.sha256(body_text.encode()).hexdigest() != header["body_sha256"]:
        raise ChecksumError("run body does not match its checksum")
    dtype = np.dtype(header["position"]["dtype"])
    dead = []
    for line in body_text.splitlines():
        it, tg, lv, pos = json.loads(line)
        dead.append(DeadRecord(np.asarray(pos, dtype=dtype), float(lv), int(it), int(tg)))
    if len(dead) != header["n_dead"]:
        raise ChecksumError("dead-record count mismatch")
    live = [(np.asarray(p, dtype=dtype), float(lv)) for lv, p in header["final_live"]]
    return NSRun(
        problem_name=header["problem"],
        J=header["J"],
        N=header["N"],
        scheme=ContractionScheme(header["scheme"]),
        seed=header["seed"],
        dead=dead,
        final_live=live,
        termination_reason=Termination(header["termination_reason"]),
        problem_params=header["problem_params"],
        config=header["config"],
        valid=header["valid"],
        warnings=header["warnings"],
    )


def write_run(run: NSRun, path: str | Path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps_run(run))
    tmp.replace(path)
    return path


def read_run(path: str | Path) -> NSRun:
    return loads_run(Path(path).read_text())


# ---------------------------------------------------------------------------
# random streams


class Streams:
    """Counter-based random streams for one run.

    The run seed is the Philox key; the stream for (batch b, slot s) starts
    at counter words ``[0, 0, s, b]``. Batch 0 is the initial ensemble (slots
    0..J-1); batch b >= 1 is the b-th replenishment and slot s the s-th
    particle replaced in it. Streams never overlap, so which slots are filled
    in which order, or concurrently, cannot change the numbers drawn.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)
        self._template = self._bitgen.state

    def _state(self, batch: int, slot: int) -> dict:
        st = dict(self._template)
        st["state"] = {"counter": np.array([0, 0, slot, batch], dtype=np.uint64),
                       "key": self._key.copy()}
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        return st

    def at(self, batch: int, slot: int) -> np.random.Generator:
        """Shared generator repositioned to the stream start. Not thread-safe."""
        self._bitgen.state = self._state(batch, slot)
        return self._gen

    def fresh(self, batch: int, slot: int) -> np.random.Generator:
        """Independent generator for the same stream, for concurrent use."""
        return np.random.Generator(np.random.Philox(
            key=self._key, counter=np.array([0, 0, slot, batch], dtype=np.uint64)))
