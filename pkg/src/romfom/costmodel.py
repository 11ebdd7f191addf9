"""Leading-order offline and online cost estimates of coupled models.

Costs are in relative units (constants dropped). ``k`` is the polynomial
order of the model, ``s`` the stencil size of a sparse row, ``r`` the
reduced dimension of the coupled model and ``r_g`` that of a global
reduced model reaching the same accuracy.
"""

from dataclasses import dataclass, replace
from math import factorial

import numpy as np

from .errors import ConfigError

__all__ = ["CostParams", "estimate_interface_size", "offline_costs", "offline_ratios",
           "online_ratio", "online_speedup", "speedup_grid"]


def estimate_interface_size(n_F, d, rule="surface"):
    """Number of interface DOFs of a ``d``-dimensional subdomain of ``n_F`` DOFs.

    ``rule="surface"`` uses ``round(n_F ** ((d - 1) / d))`` (surface of a
    volume); ``rule="power"`` uses ``n_F ** (d - 1)``.
    """
    if rule == "surface":
        return int(round(n_F ** ((d - 1) / d)))
    if rule == "power":
        return int(n_F ** (d - 1))
    raise ConfigError(f"unknown interface rule {rule!r}")


@dataclass(frozen=True)
class CostParams:
    """Problem sizes entering the cost expressions.

    ``n_I`` defaults to :func:`estimate_interface_size` (1D: 1) and
    ``r_g`` to ``r``.
    """

    n: int
    n_F: int
    r: int
    s: int
    k: int = 1
    n_T: int = 1
    n_I: int = None
    r_g: int = None
    d: int = 1
    n_t: int = 1
    interface_rule: str = "surface"

    def __post_init__(self):
        if self.n_I is None:
            object.__setattr__(self, "n_I",
                               estimate_interface_size(self.n_F, self.d, self.interface_rule))
        if self.r_g is None:
            object.__setattr__(self, "r_g", self.r)
        for name in ("n", "n_F", "r", "s", "k", "n_T", "r_g", "d", "n_t"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.n_I < 0:
            raise ConfigError("n_I must be nonnegative")
        if self.n_F > self.n:
            raise ConfigError(f"n_F={self.n_F} exceeds n={self.n}")


def offline_costs(p):
    """Leading terms of the least-squares costs of each model type."""
    kf = factorial(p.k)
    return {
        "sfom": p.n_F * (p.s**p.k / kf) ** 2 * p.n_T,
        "opinf": p.r * ((p.r + p.n_I) ** p.k / kf) ** 2 * p.n_T,
        "global_opinf": p.r_g ** (2 * p.k + 1) / kf**2 * p.n_T,
        "global_sfom": p.n * (p.s**p.k / kf) ** 2 * p.n_T,
    }


def offline_ratios(p):
    """Coupled offline cost over the global reduced and global sparse costs."""
    k2 = 2 * p.k
    vs_opinf = ((p.n_F / p.r) * (p.s / p.r) ** k2 + (1 + p.n_I / p.r) ** k2) \
        * (p.r_g / p.r) ** (-k2 - 1)
    vs_sfom = p.n_F / p.n + (p.r / p.n) * (1 + p.n_I / p.r) ** k2 * (p.s / p.r) ** (-k2)
    return {"vs_global_opinf": vs_opinf, "vs_global_sfom": vs_sfom}


def online_ratio(p):
    """Per-step cost of the coupled model over that of a full sparse model."""
    return (p.r / p.n) * ((p.r + p.n_I) / p.s) ** p.k + p.n_F / p.n


def online_speedup(p):
    return 1.0 / online_ratio(p)


def speedup_grid(p, x_name, x_values, y_name=None, y_values=None, quantity="online_speedup"):
    """Evaluate a quantity over one or two parameter axes.

    ``x_name``/``y_name`` are ``CostParams`` fields or the ratios ``"n_F/n"``,
    ``"r/n"`` and ``"r_g/r"``. Returns rows ``(x, [y,] value)``.
    """
    funcs = {
        "online_speedup": online_speedup,
        "online_ratio": online_ratio,
        "vs_global_opinf": lambda q: offline_ratios(q)["vs_global_opinf"],
        "vs_global_sfom": lambda q: offline_ratios(q)["vs_global_sfom"],
    }
    if quantity not in funcs:
        raise ConfigError(f"unknown quantity {quantity!r}")
    f = funcs[quantity]

    def with_value(q, name, v):
        if name == "n_F/n":
            return replace(q, n_F=max(1, int(round(v * q.n))), n_I=q.n_I)
        if name == "r/n":
            return replace(q, r=max(1, int(round(v * q.n))), r_g=q.r_g)
        if name == "r_g/r":
            return replace(q, r_g=max(1, int(round(v * q.r))))
        return replace(q, **{name: v})

    rows = []
    for x in x_values:
        px = with_value(p, x_name, x)
        if y_name is None:
            rows.append((x, f(px)))
            continue
        for y in y_values:
            rows.append((x, y, f(with_value(px, y_name, y))))
    return np.array(rows, dtype=np.float64)
