"""Model parameters for the doubly nonlocal logistic equation."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Rates of the evolution law du/dt = kp*(a+ * u) - m*u - km*u*(a- * u).

    ``theta = (kappa_plus - mortality) / kappa_minus`` is the nontrivial
    constant equilibrium; it is positive exactly when birth beats mortality.
    """

    kappa_plus: float
    kappa_minus: float
    mortality: float

    def __post_init__(self):
        for name in ("kappa_plus", "kappa_minus", "mortality"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")

    @property
    def theta(self) -> float:
        return (self.kappa_plus - self.mortality) / self.kappa_minus

    @property
    def has_carrying_capacity(self) -> bool:
        return self.kappa_plus > self.mortality

    def require_carrying_capacity(self) -> float:
        """Return theta, rejecting the degenerate regime theta <= 0."""
        if not self.has_carrying_capacity:
            raise ValueError(
                "kappa_plus must exceed mortality for a positive carrying "
                f"capacity (got {self.kappa_plus} <= {self.mortality})"
            )
        return self.theta
