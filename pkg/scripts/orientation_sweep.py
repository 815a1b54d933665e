#!/usr/bin/env python3
"""Classify the partial transposes of the Werner family.

Sweeps rho(lam) = lam |phi+><phi+| + (1 - lam) I/4 and classifies the
section generated by its second-factor partial transpose over spanning
local catalogs (three mutually unbiased qubit bases per side). The
operator stays positive after transposition up to lam = 1/3; beyond that
boundary the section is quantum only up to time reversal.
"""

from __future__ import annotations

import argparse
import json

import numpy as np

import contextua as cx


def build_model():
    rays = [[1, 0], [0, 1], [1, 1], [1, -1], [1, [0, 1]], [1, [0, -1]]]
    doc = {
        "kind": "bipartite",
        "dims": [2, 2],
        "rays": {"left": rays, "right": rays},
        "contexts": {
            "left": [[0, 1], [2, 3], [4, 5]],
            "right": [[0, 1], [2, 3], [4, 5]],
        },
    }
    return cx.build_bipartite_model(cx.parse_scenario(json.dumps(doc)))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=11)
    args = parser.parse_args()

    model = build_model()
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    pure = np.outer(phi, phi.conj())

    print(f"{'lam':>6}  {'eig floor':>10}  verdict")
    for lam in np.linspace(0.0, 1.0, args.steps):
        rho = lam * pure + (1 - lam) * np.eye(4) / 4
        w = cx.partial_transpose(rho, (2, 2))
        section = cx.section_from_bipartite_state(model.poset, w)
        result = cx.classify_section(section)
        print(f"{lam:6.2f}  {result.eigen_floor:10.5f}  {result.verdict}")


if __name__ == "__main__":
    main()
