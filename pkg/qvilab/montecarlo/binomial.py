"""Cox-Ross-Rubinstein oracle for the American put."""

from typing import Optional

import numpy as np


def binomial_oracle(r: float, s: float, K: float, T: float, steps: int,
                    spot: Optional[float] = None) -> float:
    """
    Price an American put on a CRR tree.

    Args:
        r: Risk-free rate
        s: Volatility (0 gives a deterministic underlying)
        K: Strike
        T: Maturity
        steps: Number of tree steps
        spot: Spot price (defaults to the strike)

    Returns:
        Option value at time 0
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if K <= 0 or s < 0 or T < 0:
        raise ValueError("need K > 0, s >= 0 and T >= 0")
    spot = K if spot is None else float(spot)
    if T == 0.0:
        return max(K - spot, 0.0)
    if s == 0.0:
        # K e^{-rt} - spot is monotone in t, so one of the two endpoints is optimal
        grow = spot * np.exp(r * T)
        return max(K - spot, np.exp(-r * T) * max(K - grow, 0.0))

    dt = T / steps
    u = np.exp(s * np.sqrt(dt))
    d = 1.0 / u
    p = (np.exp(r * dt) - d) / (u - d)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"risk-neutral probability {p:.4g} outside [0, 1]; use more steps")
    discount = np.exp(-r * dt)

    j = np.arange(steps + 1)
    values = np.maximum(K - spot * u ** j * d ** (steps - j), 0.0)
    for i in range(steps - 1, -1, -1):
        j = np.arange(i + 1)
        continuation = discount * (p * values[1:i + 2] + (1.0 - p) * values[:i + 1])
        values = np.maximum(continuation, K - spot * u ** j * d ** (i - j))
    return float(values[0])
