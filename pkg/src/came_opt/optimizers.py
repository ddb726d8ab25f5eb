"""The optimizer family behind one stepping interface.

Four variants share a single update pipeline:

  adafactor       factored second moment, RMS-clipped update, momentum step
  came            adafactor pipeline plus a confidence denominator built from
                  a factored average of the squared residual (u_hat - m)^2
  raw_confidence  adafactor pipeline, step m / sqrt((m - u_hat)^2 + eps3)
                  with the full unfactored residual
  adam            classic bias-corrected first/second moments (baseline)

All parameters are 2-D float64 matrices; a logically 1-D parameter of n
entries is stored as an n x 1 column and uses unfactored accumulators, so
the memory claims of the factored variants survive the fallback. A step
either completes and advances the state exactly once, or raises and leaves
the state untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .factored_moment import (
    FactoredEMA,
    FullEMA,
    factored_reconstruct,
    factored_update,
    full_reconstruct,
    full_update,
)
from .tensor import Matrix, rms

VARIANTS = ("adafactor", "came", "adam", "raw_confidence")

Accumulator = Union[FactoredEMA, FullEMA]


class InvalidConfig(ValueError):
    """Hyperparameter validation failure, carrying the offending field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class OptimizerConfig:
    """Scalar hyperparameters shared by all variants.

    beta3 and eps2 only matter for came; eps3 only for raw_confidence;
    adam_eps only for adam. came_residual_vs_prev switches the instability
    residual to (u_hat - m_prev)^2, i.e. against the momentum before it
    absorbs the current update; the default squares the residual against
    the already-updated momentum.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    beta3: float = 0.9999
    eps1: float = 1e-30
    eps2: float = 1e-16
    eps3: float = 1e-16
    clip_d: float = 1.0
    warmup_steps: int = 0
    adam_eps: float = 1e-8
    came_residual_vs_prev: bool = False

    def validate(self) -> "OptimizerConfig":
        if not self.lr > 0.0:
            raise InvalidConfig("lr", f"must be positive, got {self.lr}")
        for name in ("beta1", "beta2", "beta3"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InvalidConfig(name, f"must be in (0, 1), got {value}")
        for name in ("eps1", "eps2", "eps3", "adam_eps"):
            value = getattr(self, name)
            if value < 0.0:
                raise InvalidConfig(name, f"must be nonnegative, got {value}")
        if not self.clip_d > 0.0:
            raise InvalidConfig("clip_d", f"must be positive, got {self.clip_d}")
        if self.warmup_steps < 0 or self.warmup_steps != int(self.warmup_steps):
            raise InvalidConfig(
                "warmup_steps", f"must be a nonnegative integer, got {self.warmup_steps}"
            )
        return self


@dataclass
class OptimizerState:
    """Per-parameter persistent state for one optimizer variant."""

    variant: str
    dims: Tuple[int, ...]  # logical parameter dims, length 1 or 2
    m: Matrix  # update momentum, parameter-shaped
    second_moment: Optional[Accumulator] = None
    instability: Optional[Accumulator] = None  # came only
    adam_v: Optional[Matrix] = None  # adam only
    t: int = 0


def storage_shape(dims: Tuple[int, ...]) -> Tuple[int, int]:
    """Map logical dims to the 2-D storage shape (1-D becomes a column)."""
    if len(dims) == 1:
        return (dims[0], 1)
    if len(dims) == 2:
        return (dims[0], dims[1])
    raise ValueError(f"parameters must be 1-D or 2-D, got dims {dims}")


def make_state(variant: str, dims: Tuple[int, ...], cfg: OptimizerConfig) -> OptimizerState:
    """Zero-initialized state for one parameter of the given logical dims."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown optimizer {variant!r}, expected one of {VARIANTS}")
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"parameter dims must be positive, got {dims}")
    rows, cols = storage_shape(dims)
    factored = len(dims) == 2

    state = OptimizerState(variant=variant, dims=dims, m=np.zeros((rows, cols)))
    if variant == "adam":
        state.adam_v = np.zeros((rows, cols))
        return state

    if factored:
        state.second_moment = FactoredEMA.fresh(rows, cols, cfg.beta2, cfg.eps1)
    else:
        state.second_moment = FullEMA.fresh(rows, cols, cfg.beta2, cfg.eps1)
    if variant == "came":
        if factored:
            state.instability = FactoredEMA.fresh(rows, cols, cfg.beta3, cfg.eps2)
        else:
            state.instability = FullEMA.fresh(rows, cols, cfg.beta3, cfg.eps2)
    return state


def clip_by_rms(u: Matrix, d: float) -> Matrix:
    """Scale u down so its RMS never exceeds d: u / max(1, rms(u)/d)."""
    if d <= 0.0:
        raise ValueError(f"clip threshold must be positive, got {d}")
    return u / max(1.0, rms(u) / d)


def warmup_lr(t: int, cfg: OptimizerConfig) -> float:
    """Linearly ramped learning rate: lr * min(1, t / warmup_steps)."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if cfg.warmup_steps > 0:
        return cfg.lr * min(1.0, t / cfg.warmup_steps)
    return cfg.lr


def _acc_update(acc: Accumulator, x: Matrix) -> Accumulator:
    if isinstance(acc, FactoredEMA):
        return factored_update(acc, x)
    return full_update(acc, x)


def _acc_reconstruct(acc: Accumulator) -> Matrix:
    if isinstance(acc, FactoredEMA):
        return factored_reconstruct(acc)
    return full_reconstruct(acc)


def _check_step_inputs(theta: Matrix, g: Matrix, state: OptimizerState, variant: str) -> None:
    if state.variant != variant:
        raise ValueError(f"state is for {state.variant!r}, not {variant!r}")
    expected = storage_shape(state.dims)
    if theta.shape != expected or g.shape != expected:
        raise ValueError(
            f"shape mismatch: state expects {expected}, "
            f"got theta {theta.shape} and gradient {g.shape}"
        )


def _require_positive(denom: Matrix, what: str) -> Matrix:
    # guaranteed by the epsilon floors; only reachable when they are set to 0
    if np.any(denom <= 0.0):
        raise ValueError(f"{what} has nonpositive entries; set its epsilon > 0")
    return denom


def _moment_pipeline(g: Matrix, state: OptimizerState, cfg: OptimizerConfig):
    """Shared lines of the factored variants, computed without touching state.

    Returns (new second moment, u_hat, new momentum). Folds g^2 into the
    second-moment accumulator, reconstructs the surrogate v, normalizes the
    gradient by sqrt(v), clips by RMS, and advances the momentum.
    """
    sm = _acc_update(state.second_moment, np.square(g))
    v = _require_positive(_acc_reconstruct(sm), "second-moment surrogate")
    u = g / np.sqrt(v)
    u_hat = clip_by_rms(u, cfg.clip_d)
    m_new = cfg.beta1 * state.m + (1.0 - cfg.beta1) * u_hat
    return sm, u_hat, m_new


def adafactor_step(
    theta: Matrix, g: Matrix, state: OptimizerState, cfg: OptimizerConfig
) -> Matrix:
    """One memory-efficient step: theta - lr_t * m after the shared pipeline."""
    _check_step_inputs(theta, g, state, "adafactor")
    t_next = state.t + 1
    sm, _, m_new = _moment_pipeline(g, state, cfg)
    theta_new = theta - warmup_lr(t_next, cfg) * m_new

    state.second_moment = sm
    state.m = m_new
    state.t = t_next
    return theta_new


def came_step(theta: Matrix, g: Matrix, state: OptimizerState, cfg: OptimizerConfig) -> Matrix:
    """One confidence-guided step: theta - lr_t * m / sqrt(S).

    S is the factored average of the instability (u_hat - m)^2, smoothed
    with (beta3, eps2). Small instability means a trustworthy momentum and
    a large step; large instability shrinks the step.
    """
    _check_step_inputs(theta, g, state, "came")
    t_next = state.t + 1
    sm, u_hat, m_new = _moment_pipeline(g, state, cfg)
    m_ref = state.m if cfg.came_residual_vs_prev else m_new
    instab = _acc_update(state.instability, np.square(u_hat - m_ref))
    s = _require_positive(_acc_reconstruct(instab), "instability surrogate")
    theta_new = theta - warmup_lr(t_next, cfg) * (m_new / np.sqrt(s))

    state.second_moment = sm
    state.instability = instab
    state.m = m_new
    state.t = t_next
    return theta_new


def raw_confidence_step(
    theta: Matrix, g: Matrix, state: OptimizerState, cfg: OptimizerConfig
) -> Matrix:
    """One step of the unfactored confidence variant: m / sqrt((m - u_hat)^2 + eps3)."""
    _check_step_inputs(theta, g, state, "raw_confidence")
    t_next = state.t + 1
    sm, u_hat, m_new = _moment_pipeline(g, state, cfg)
    residual = _require_positive(
        np.square(m_new - u_hat) + cfg.eps3, "confidence denominator"
    )
    theta_new = theta - warmup_lr(t_next, cfg) * (m_new / np.sqrt(residual))

    state.second_moment = sm
    state.m = m_new
    state.t = t_next
    return theta_new


def adam_step(theta: Matrix, g: Matrix, state: OptimizerState, cfg: OptimizerConfig) -> Matrix:
    """One bias-corrected Adam step (conventional baseline)."""
    _check_step_inputs(theta, g, state, "adam")
    t_next = state.t + 1
    m_new = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v_new = cfg.beta2 * state.adam_v + (1.0 - cfg.beta2) * np.square(g)
    m_hat = m_new / (1.0 - cfg.beta1**t_next)
    v_hat = v_new / (1.0 - cfg.beta2**t_next)
    theta_new = theta - warmup_lr(t_next, cfg) * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps))

    state.m = m_new
    state.adam_v = v_new
    state.t = t_next
    return theta_new


_STEP_FNS = {
    "adafactor": adafactor_step,
    "came": came_step,
    "adam": adam_step,
    "raw_confidence": raw_confidence_step,
}


def step_param(theta: Matrix, g: Matrix, state: OptimizerState, cfg: OptimizerConfig) -> Matrix:
    """Dispatch one step to the state's variant."""
    return _STEP_FNS[state.variant](theta, g, state, cfg)


def state_element_count(state: OptimizerState) -> int:
    """Number of persistent float64 slots this state actually stores."""
    count = state.m.size
    if state.adam_v is not None:
        count += state.adam_v.size
    for acc in (state.second_moment, state.instability):
        if acc is None:
            continue
        if isinstance(acc, FactoredEMA):
            count += acc.row_acc.size + acc.col_acc.size
        else:
            count += acc.acc.size
    return count
