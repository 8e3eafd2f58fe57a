import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.modules.errors import NonFiniteGradient
from src.modules.optimizer.settings import OptimizeConfig
from utils.dynamic_loader import get_instance

# method name -> (module under src.modules, class name)
STEP_RULES: Dict[str, Tuple[str, str]] = {
    "gd": ("optimizer.step_rule", "GradientDescentStep"),
    "adam": ("optimizer.step_rule", "AdamStep"),
}


@dataclass(frozen=True)
class StepState:
    """
    Optimizer memory between iterations. Gradient descent keeps only the counter.

    Attributes:
        t (int): Number of committed steps.
        m (Optional[np.ndarray]): First-moment estimate.
        v (Optional[np.ndarray]): Second-moment estimate.
    """

    t: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None


class StepRule(ABC):
    """
    Turns a gradient into a parameter update.

    Attributes:
        config (Dict[str, Any]): Configuration; reads config["step_rule"].
        step_size (float): Base step length.
    """

    def __init__(self, config: Dict[str, Any]) -> None:
        self.config: Dict[str, Any] = config
        self.logger: logging.Logger = logging.getLogger(self.__class__.__name__)
        try:
            self.step_size: float = float(config["step_rule"]["step_size"])
        except KeyError as e:
            self.logger.error(f"Missing required configuration key: {e}")
            raise KeyError(f"Missing required configuration key: {e}")

    def check(self, grad: np.ndarray) -> np.ndarray:
        grad = np.asarray(grad, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(grad)):
            self.logger.error(f"[{self.__class__.__name__}] Gradient contains non-finite entries.")
            raise NonFiniteGradient("Gradient contains NaN or infinite entries.")
        return grad

    @abstractmethod
    def delta(self, grad: np.ndarray, state: StepState) -> Tuple[np.ndarray, StepState]:
        """
        Computes the update for a gradient.

        Args:
            grad (np.ndarray): Finite gradient.
            state (StepState): Memory after the last committed step.

        Returns:
            Tuple[np.ndarray, StepState]: The update and the memory to commit if it is accepted.
        """
        pass


class GradientDescentStep(StepRule):
    """delta = -step_size * grad."""

    def delta(self, grad: np.ndarray, state: StepState) -> Tuple[np.ndarray, StepState]:
        grad = self.check(grad)
        return -self.step_size * grad, StepState(t=state.t + 1)


class AdamStep(StepRule):
    """
    Bias-corrected first/second moment update.
    """

    def __init__(self, config: Dict[str, Any]) -> None:
        super().__init__(config=config)
        rule = config["step_rule"]
        self.beta1: float = float(rule.get("beta1", 0.9))
        self.beta2: float = float(rule.get("beta2", 0.999))
        self.eps: float = float(rule.get("eps", 1e-8))

    def delta(self, grad: np.ndarray, state: StepState) -> Tuple[np.ndarray, StepState]:
        grad = self.check(grad)
        m = np.zeros_like(grad) if state.m is None else state.m
        v = np.zeros_like(grad) if state.v is None else state.v
        t = state.t + 1
        m = self.beta1 * m + (1.0 - self.beta1) * grad
        v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
        m_hat = m / (1.0 - self.beta1 ** t)
        v_hat = v / (1.0 - self.beta2 ** t)
        return -self.step_size * m_hat / (np.sqrt(v_hat) + self.eps), StepState(t=t, m=m, v=v)


def step_rule_for(cfg: OptimizeConfig) -> StepRule:
    """Instantiates the step rule named by cfg.method."""
    module, class_name = STEP_RULES[cfg.method]
    config = {
        "step_rule": {
            "module": module,
            "class": class_name,
            "step_size": cfg.step_size,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "eps": cfg.adam_eps,
        }
    }
    return get_instance(config, "step_rule", "class")


def step_update(grad: np.ndarray, state: StepState, cfg: OptimizeConfig) -> Tuple[np.ndarray, StepState]:
    """
    One update from the configured rule.

    Raises:
        NonFiniteGradient: If grad has NaN or inf entries.
    """
    return step_rule_for(cfg).delta(grad, state)
