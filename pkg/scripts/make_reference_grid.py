"""Build the shipped reference grid by Kron-reducing a small bus network.

Each generator sits behind its transient reactance on a terminal bus; terminal
buses are tied by lines (strong inside an area, weak between areas) and carry
constant-impedance loads. The reduced admittance among internal buses is
written as a grid description file, with mechanical powers chosen so that the
listed rotor angles are an exact equilibrium.

    python scripts/make_reference_grid.py OUT.json
"""
import json
import sys

import numpy as np

from modalwadc.grid import GridModel, electrical_power, grid_to_dict

OMEGA_S = 2 * np.pi * 60

# per generator: area, H (s), D (pu), x'd (pu), E (pu), rotor angle (rad), sigma
GENERATORS = [
    (0, 4.5, 0.0040, 0.25, 1.05, 0.30, 0.010),
    (0, 5.5, 0.0050, 0.22, 1.04, 0.25, 0.010),
    (1, 4.0, 0.0030, 0.28, 1.03, 0.15, 0.010),
    (1, 6.5, 0.0060, 0.20, 1.05, 0.10, 0.010),
    (2, 4.8, 0.0045, 0.25, 1.02, 0.05, 0.010),
    (2, 5.2, 0.0040, 0.24, 1.03, 0.00, 0.010),
    (3, 7.0, 0.0070, 0.18, 1.04, -0.10, 0.010),
    (3, 6.0, 0.0045, 0.21, 1.02, -0.05, 0.010),
]

# terminal-bus lines: (from, to, r, x)
LINES = [
    (0, 1, 0.004, 0.05), (2, 3, 0.004, 0.06), (4, 5, 0.004, 0.05), (6, 7, 0.005, 0.055),
    (1, 2, 0.03, 1.6), (3, 4, 0.03, 2.2), (5, 6, 0.03, 1.4), (0, 7, 0.05, 3.0),
]
LOAD = 0.9 - 0.25j    # constant-impedance load admittance at every terminal bus (pu)


def reduced_admittance():
    n = len(GENERATORS)
    Y = np.zeros((2 * n, 2 * n), dtype=complex)   # internal buses 0..n-1, terminals n..2n-1
    for i, g in enumerate(GENERATORS):
        y = 1 / (1j * g[3])
        t = n + i
        Y[i, i] += y
        Y[t, t] += y + LOAD
        Y[i, t] -= y
        Y[t, i] -= y
    for a, b, r, x in LINES:
        y = 1 / (r + 1j * x)
        a, b = n + a, n + b
        Y[a, a] += y
        Y[b, b] += y
        Y[a, b] -= y
        Y[b, a] -= y
    Ygg, Ygt, Ytg, Ytt = Y[:n, :n], Y[:n, n:], Y[n:, :n], Y[n:, n:]
    return Ygg - Ygt @ np.linalg.solve(Ytt, Ytg)


def build():
    Yr = reduced_admittance()
    g = np.array([row[1:] for row in GENERATORS], dtype=float)
    H, D, _, E, delta, sigma = g.T
    model = GridModel(2 * H / OMEGA_S, D, E, np.zeros(len(H)), np.abs(Yr), np.angle(Yr), sigma,
                      ref_index=len(H) - 1)
    return model.with_pm(electrical_power(delta, model)), delta


if __name__ == "__main__":
    model, delta = build()
    data = grid_to_dict(model)
    data["equilibrium_guess"] = [float(d) for d in delta]
    with open(sys.argv[1], "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
