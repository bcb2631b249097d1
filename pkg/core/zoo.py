"""
Zeroth-order black-box attack on a probability oracle.

The attacker only sees per-class probabilities. Gradients and curvature are
estimated coordinate by coordinate with symmetric finite differences and
either a guarded Newton step (stochastic coordinate descent) or a
coordinate-wise ADAM update is applied. Perturbations stay inside a box of
half-width ``box_delta`` around the original vector.
"""

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.errors import ConfigInvalid, InvalidClass, OracleFailure, TooFewRows
from core.logger import get_logger

logger = get_logger("zoo")

ATTACK_MODES = ("untargeted", "targeted")
SOLVERS = ("adam", "newton")


@dataclass(frozen=True)
class AttackConfig:
    mode: str = "untargeted"
    rho: float = 0.0
    probe_k: float = 0.1
    step_h: float = 0.1
    alpha1: float = 0.9
    alpha2: float = 0.99
    epsilon: float = 1e-8
    budget: int = 1000
    box_delta: float = 3.0
    seed: int = 0
    target: Optional[int] = None
    solver: str = "adam"

    def __post_init__(self):
        if self.mode not in ATTACK_MODES:
            raise ConfigInvalid(f"attack mode must be one of {ATTACK_MODES}")
        if self.solver not in SOLVERS:
            raise ConfigInvalid(f"solver must be one of {SOLVERS}")
        if self.rho < 0:
            raise ConfigInvalid("rho must be >= 0")
        for name in ("probe_k", "step_h", "epsilon", "box_delta"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be > 0")
        if not (0 < self.alpha1 < 1 and 0 < self.alpha2 < 1):
            raise ConfigInvalid("alpha1 and alpha2 must lie in (0, 1)")
        if self.budget < 0:
            raise ConfigInvalid("budget must be >= 0")
        if self.mode == "targeted" and self.target is None:
            raise ConfigInvalid("targeted mode needs a target class")


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _check_class(probs: np.ndarray, b: int) -> None:
    if not isinstance(b, (int, np.integer)) or not 0 <= b < len(probs):
        raise InvalidClass(f"class {b!r} outside 0..{len(probs) - 1}")


def loss_targeted(probs: Sequence[float], target: int, rho: float) -> float:
    """max(max_{j != b} log p_j - log p_b, -rho)."""
    p = np.asarray(probs, dtype=float)
    _check_class(p, target)
    logp = np.log(p)
    others = np.delete(logp, target)
    return float(max(others.max() - logp[target], -rho))


def loss_untargeted(probs: Sequence[float], original: int, rho: float) -> float:
    """max(log p_b0 - max_{j != b0} log p_j, -rho)."""
    p = np.asarray(probs, dtype=float)
    _check_class(p, original)
    logp = np.log(p)
    others = np.delete(logp, original)
    return float(max(logp[original] - others.max(), -rho))


# ---------------------------------------------------------------------------
# Objectives and query accounting
# ---------------------------------------------------------------------------


class Objective(Protocol):
    def evaluate(self, a: np.ndarray) -> Tuple[float, bool]:
        """Loss at a and whether a counts as a successful adversarial point."""
        ...


class FunctionObjective:
    """Plain loss function; success once the loss reaches ``threshold``."""

    def __init__(self, fn: Callable[[np.ndarray], float], threshold: float = -math.inf):
        self.fn = fn
        self.threshold = threshold

    def evaluate(self, a: np.ndarray) -> Tuple[float, bool]:
        loss = float(self.fn(a))
        return loss, loss <= self.threshold


class ModelObjective:
    """
    Loss over a probability oracle ``proba(a) -> per-class probabilities``.

    Success: predicted class differs from the original (untargeted) or equals
    the target (targeted), and the loss has reached -rho.
    """

    def __init__(
        self,
        proba: Callable[[np.ndarray], np.ndarray],
        original: int,
        rho: float,
        mode: str = "untargeted",
        target: Optional[int] = None,
    ):
        self.proba = proba
        self.original = int(original)
        self.rho = rho
        self.mode = mode
        self.target = target

    def evaluate(self, a: np.ndarray) -> Tuple[float, bool]:
        probs = np.asarray(self.proba(a), dtype=float).reshape(-1)
        predicted = int(np.argmax(probs))
        if self.mode == "targeted":
            loss = loss_targeted(probs, self.target, self.rho)
            hit = predicted == self.target
        else:
            loss = loss_untargeted(probs, self.original, self.rho)
            hit = predicted != self.original
        return loss, hit and loss <= -self.rho


class QueryCounter:
    """Counts every oracle invocation; failures surface as OracleFailure."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.queries = 0

    def evaluate(self, a: np.ndarray) -> Tuple[float, bool]:
        self.queries += 1
        try:
            loss, success = self.objective.evaluate(np.array(a, dtype=float))
        except (InvalidClass, ConfigInvalid):
            raise
        except Exception as e:
            raise OracleFailure(f"oracle query failed: {e}") from e
        if not math.isfinite(loss):
            raise OracleFailure(f"oracle returned a non-finite loss ({loss})")
        return loss, success

    def __call__(self, a: np.ndarray) -> float:
        return self.evaluate(a)[0]


def _query(oracle: Callable[[np.ndarray], float], a: np.ndarray) -> float:
    try:
        value = float(oracle(a))
    except OracleFailure:
        raise
    except Exception as e:
        raise OracleFailure(f"oracle query failed: {e}") from e
    if not math.isfinite(value):
        raise OracleFailure(f"oracle returned a non-finite value ({value})")
    return value


def _unit_step(a: np.ndarray, j: int, delta: float) -> np.ndarray:
    out = np.array(a, dtype=float)
    out[j] += delta
    return out


def estimate_gradient(oracle: Callable[[np.ndarray], float], a: np.ndarray, j: int, probe_k: float) -> float:
    """(L(a + k e_j) - L(a - k e_j)) / 2k. Two oracle queries."""
    if probe_k <= 0:
        raise ConfigInvalid("probe_k must be > 0")
    plus = _query(oracle, _unit_step(a, j, probe_k))
    minus = _query(oracle, _unit_step(a, j, -probe_k))
    return (plus - minus) / (2.0 * probe_k)


def estimate_hessian(
    oracle: Callable[[np.ndarray], float],
    a: np.ndarray,
    j: int,
    probe_k: float,
    center: Optional[float] = None,
) -> float:
    """(L(a + k e_j) - 2 L(a) + L(a - k e_j)) / k^2. Three queries, two with a cached center."""
    if probe_k <= 0:
        raise ConfigInvalid("probe_k must be > 0")
    plus = _query(oracle, _unit_step(a, j, probe_k))
    minus = _query(oracle, _unit_step(a, j, -probe_k))
    mid = _query(oracle, np.asarray(a, dtype=float)) if center is None else center
    return (plus - 2.0 * mid + minus) / (probe_k * probe_k)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Per-coordinate first moment N, second moment tau and update count U."""

    N: np.ndarray
    tau: np.ndarray
    U: np.ndarray

    @classmethod
    def zeros(cls, p: int) -> "AdamState":
        return cls(np.zeros(p), np.zeros(p), np.zeros(p, dtype=int))


def adam_step(state: AdamState, j: int, g: float, cfg: AttackConfig) -> float:
    """Update the moments of coordinate j with gradient estimate g and return the step."""
    state.U[j] += 1
    state.N[j] = cfg.alpha1 * state.N[j] + (1.0 - cfg.alpha1) * g
    state.tau[j] = cfg.alpha2 * state.tau[j] + (1.0 - cfg.alpha2) * g * g
    n_hat = state.N[j] / (1.0 - cfg.alpha1 ** state.U[j])
    tau_hat = state.tau[j] / (1.0 - cfg.alpha2 ** state.U[j])
    return -cfg.step_h * n_hat / (math.sqrt(tau_hat) + cfg.epsilon)


def newton_step(g: float, h: float, step_h: float) -> float:
    """-g/h when the curvature is positive, otherwise a plain gradient step."""
    return -g / h if h > 0 else -step_h * g


@dataclass
class AttackOutcome:
    original: np.ndarray
    adversarial: np.ndarray
    queries: int
    final_loss: float
    success: bool
    l2_distortion: float
    loss_trace: List[float] = field(default_factory=list)
    updates: int = 0
    coordinates: List[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "queries": self.queries,
            "updates": self.updates,
            "final_loss": self.final_loss,
            "success": self.success,
            "l2_distortion": self.l2_distortion,
        }


def _run(objective: Objective, a0: np.ndarray, cfg: AttackConfig, solver: str) -> AttackOutcome:
    original = np.array(a0, dtype=float)
    a = original.copy()
    lo, hi = original - cfg.box_delta, original + cfg.box_delta
    p = a.size
    rng = np.random.default_rng(cfg.seed)
    counter = QueryCounter(objective)
    state = AdamState.zeros(p)

    loss, success = counter.evaluate(a)
    trace = [loss]
    coords: List[int] = []
    for _ in range(cfg.budget):
        if success:
            break
        j = int(rng.integers(p))
        coords.append(j)
        if solver == "newton":
            plus = counter(_unit_step(a, j, cfg.probe_k))
            minus = counter(_unit_step(a, j, -cfg.probe_k))
            g = (plus - minus) / (2.0 * cfg.probe_k)
            h = (plus - 2.0 * loss + minus) / (cfg.probe_k * cfg.probe_k)
            eta = newton_step(g, h, cfg.step_h)
        else:
            g = estimate_gradient(counter, a, j, cfg.probe_k)
            eta = adam_step(state, j, g, cfg)
        a[j] = min(max(a[j] + eta, lo[j]), hi[j])
        loss, success = counter.evaluate(a)
        trace.append(loss)

    return AttackOutcome(
        original=original,
        adversarial=a,
        queries=counter.queries,
        final_loss=loss,
        success=bool(success),
        l2_distortion=float(np.linalg.norm(a - original)),
        loss_trace=trace,
        updates=len(coords),
        coordinates=coords,
    )


def attack_scd(objective: Objective, a0: np.ndarray, cfg: AttackConfig) -> AttackOutcome:
    """
    Stochastic coordinate descent with a guarded Newton step per coordinate.

    Three queries per iteration: two probes, and the new center (the previous
    center is reused for the curvature estimate).
    """
    return _run(objective, a0, cfg, "newton")


def attack_adam_scd(objective: Objective, a0: np.ndarray, cfg: AttackConfig) -> AttackOutcome:
    """Coordinate-wise ADAM: uniform coordinate, symmetric-difference gradient, bias-corrected step."""
    return _run(objective, a0, cfg, "adam")


def run_attack(objective: Objective, a0: np.ndarray, cfg: AttackConfig) -> AttackOutcome:
    return _run(objective, a0, cfg, cfg.solver)


# ---------------------------------------------------------------------------
# Robust accuracy against a trained model
# ---------------------------------------------------------------------------


@dataclass
class AttackSummary:
    rho: float
    n_rows: int
    clean_accuracy: float
    attack_accuracy_rate: float
    success_rate: Optional[float]
    attacked: int
    outcomes: List[AttackOutcome] = field(default_factory=list, repr=False)

    def to_row(self) -> Dict[str, Any]:
        return {
            "confidence": self.rho,
            "rows": self.n_rows,
            "clean_accuracy": self.clean_accuracy,
            "attack_accuracy_rate": self.attack_accuracy_rate,
            "attack_success_rate": self.success_rate,
            "attacked": self.attacked,
        }


def attack_accuracy_rate(model, X: np.ndarray, y: np.ndarray, cfg: AttackConfig) -> AttackSummary:
    """
    Attack every correctly classified row (untargeted) and report robust accuracy.

    attack_accuracy_rate is the percentage of all rows the model still gets
    right afterwards, so with a zero budget it equals clean accuracy.
    success_rate is the percentage of attacked rows where the attack succeeded.
    """
    from core.ensembles import predict, predict_proba

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.shape[0] == 0:
        raise TooFewRows("no rows to attack")
    clean = predict(model, X)
    correct = clean == y

    def proba(a: np.ndarray) -> np.ndarray:
        return predict_proba(model, a)[0]

    outcomes: List[AttackOutcome] = []
    still_correct = 0
    for i in np.flatnonzero(correct):
        row_seed = int(np.random.default_rng([cfg.seed, int(i)]).integers(2 ** 31))
        row_cfg = replace(cfg, mode="untargeted", target=None, seed=row_seed)
        outcome = run_attack(ModelObjective(proba, int(y[i]), cfg.rho), X[i], row_cfg)
        outcomes.append(outcome)
        if int(predict(model, outcome.adversarial)[0]) == y[i]:
            still_correct += 1

    n = len(y)
    attacked = len(outcomes)
    successes = sum(o.success for o in outcomes)
    summary = AttackSummary(
        rho=cfg.rho,
        n_rows=n,
        clean_accuracy=100.0 * correct.mean(),
        attack_accuracy_rate=100.0 * still_correct / n,
        success_rate=100.0 * successes / attacked if attacked else None,
        attacked=attacked,
        outcomes=outcomes,
    )
    logger.info(
        "Attack rho=%.1f: clean %.2f%% -> robust %.2f%% (%d attacked, %d successes)",
        cfg.rho, summary.clean_accuracy, summary.attack_accuracy_rate, attacked, successes,
    )
    return summary


def outcome_lines(outcomes: Sequence[AttackOutcome], **extra: Any) -> str:
    """JSON lines, one per attacked sample."""
    return "".join(json.dumps({**extra, "sample": i, **o.to_dict()}, sort_keys=True) + "\n"
                   for i, o in enumerate(outcomes))
