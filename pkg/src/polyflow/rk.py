"""Explicit Runge-Kutta tableaus."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RKTableau:
    name: str
    beta: np.ndarray  # strictly lower triangular stage coefficients
    c: np.ndarray  # update weights

    @property
    def stages(self):
        return len(self.c)

    @property
    def alpha(self):
        """Stage times as fractions of the step."""
        return self.beta.sum(axis=1)

    def check(self):
        if not np.allclose(np.triu(self.beta), 0.0):
            raise ValueError("tableau is not explicit")
        if abs(self.c.sum() - 1.0) > 1e-14:
            raise ValueError("weights do not sum to one")


TABLEAUS = {
    "euler": RKTableau("euler", np.zeros((1, 1)), np.array([1.0])),
    "ssprk3": RKTableau(
        "ssprk3",
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.25, 0.25, 0.0]]),
        np.array([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]),
    ),
    "rk4": RKTableau(
        "rk4",
        np.array([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1.0, 0]], dtype=float),
        np.array([1.0, 2.0, 2.0, 1.0]) / 6.0,
    ),
}


def get_tableau(name):
    try:
        return TABLEAUS[name]
    except KeyError:
        raise ValueError(f"unknown Runge-Kutta tableau {name!r}; "
                         f"choose from {sorted(TABLEAUS)}") from None
