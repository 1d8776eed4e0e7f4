"""Benchmark system generators: mass-spring-damper chain and RLC ladder.

Both families are assembled from triplets into sparse matrices so they
scale to very large orders; systems below the dense crossover come out
dense through the usual container policy. Generators are deterministic:
identical parameters yield bit-identical matrices.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import PortHamiltonianSystem
from .errors import BadParams


def _broadcast(value, count, name, minimum, allow_zero):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(count, float(arr))
    if arr.shape != (count,):
        raise BadParams(f"{name} must be scalar or length {count}")
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"{name} must be finite")
    low = arr.min(initial=np.inf)
    if allow_zero:
        if low < minimum:
            raise BadParams(f"{name} must be >= {minimum}")
    elif low <= minimum:
        raise BadParams(f"{name} must be > {minimum}")
    return arr


@dataclass(frozen=True)
class MsdParams:
    """Mass-spring-damper chain: n/2 masses, springs and dampers.

    Masses are chained by springs, the last mass is anchored by the last
    spring, and each mass carries a damper to ground. Inputs are forces
    on the first two masses, outputs their velocities.
    """

    n: int
    masses: object = 4.0
    stiffnesses: object = 4.0
    dampings: object = 1.0

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise BadParams("n must be an even integer >= 2")
        count = self.n // 2
        object.__setattr__(self, "masses",
                           _broadcast(self.masses, count, "masses", 0.0, False))
        object.__setattr__(self, "stiffnesses",
                           _broadcast(self.stiffnesses, count, "stiffnesses", 0.0, False))
        object.__setattr__(self, "dampings",
                           _broadcast(self.dampings, count, "dampings", 0.0, True))


@dataclass(frozen=True)
class LadderParams:
    """RLC ladder network: n/2 LC pairs and n/2 + 1 resistors.

    Default element values follow the damped 100-state benchmark
    (C_i = L_i = 0.1, R_i = 3 except a terminal resistor of 1).
    """

    n: int
    capacitances: object = 0.1
    inductances: object = 0.1
    resistances: object = None

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise BadParams("n must be an even integer >= 4")
        count = self.n // 2
        if self.resistances is None:
            default = np.full(count + 1, 3.0)
            default[-1] = 1.0
            object.__setattr__(self, "resistances", default)
        object.__setattr__(self, "capacitances",
                           _broadcast(self.capacitances, count, "capacitances", 0.0, False))
        object.__setattr__(self, "inductances",
                           _broadcast(self.inductances, count, "inductances", 0.0, False))
        object.__setattr__(self, "resistances",
                           _broadcast(self.resistances, count + 1, "resistances", 0.0, True))


def build_msd(params):
    """Port-Hamiltonian mass-spring-damper chain of order params.n.

    State layout: x = (q_1, p_1, q_2, p_2, ...) with displacements on the
    odd and momenta on the even (1-based) coordinates.
    """
    n = params.n
    nm = n // 2
    m_i, k_i, c_i = params.masses, params.stiffnesses, params.dampings

    rows, cols, vals = [], [], []
    for i in range(nm):
        rows += [2 * i, 2 * i + 1]
        cols += [2 * i + 1, 2 * i]
        vals += [1.0, -1.0]
    J = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    R = sp.diags([c if (j % 2) else 0.0
                  for j, c in zip(range(n), np.repeat(c_i, 2))],
                 format="csc")

    rows, cols, vals = [], [], []
    for i in range(nm):
        diag = k_i[i] if i == 0 else k_i[i - 1] + k_i[i]
        rows.append(2 * i)
        cols.append(2 * i)
        vals.append(diag)
        rows.append(2 * i + 1)
        cols.append(2 * i + 1)
        vals.append(1.0 / m_i[i])
        if i < nm - 1:
            rows += [2 * i, 2 * i + 2]
            cols += [2 * i + 2, 2 * i]
            vals += [-k_i[i], -k_i[i]]
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()

    rows = [1] if n < 4 else [1, 3]
    cols = [0] if n < 4 else [0, 1]
    B = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, 2)).tocsc()

    return PortHamiltonianSystem(J, R, Q, B)


def build_ladder(params):
    """Port-Hamiltonian RLC ladder network of order params.n.

    State layout: x = (q_1, phi_1, q_2, phi_2, ...) alternating capacitor
    charges and inductor fluxes; inputs are the source current and the
    terminal voltage.
    """
    n = params.n
    nc = n // 2
    c_i, l_i, r_i = params.capacitances, params.inductances, params.resistances

    super_diag = -np.ones(n - 1)
    super_diag[-1] = 1.0
    J = sp.diags([super_diag, -super_diag], offsets=[1, -1], format="csc")

    r_diag = np.zeros(n)
    r_diag[1:-1:2] = r_i[:-2]
    r_diag[-1] = r_i[-2] + r_i[-1]
    R = sp.diags(r_diag, format="csc")

    q_diag = np.empty(n)
    q_diag[0::2] = 1.0 / c_i
    q_diag[1::2] = 1.0 / l_i
    Q = sp.diags(q_diag, format="csc")

    B = sp.coo_matrix(([1.0, 1.0], ([0, n - 1], [0, 1])), shape=(n, 2)).tocsc()

    return PortHamiltonianSystem(J, R, Q, B)
