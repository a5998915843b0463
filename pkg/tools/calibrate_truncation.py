#!/usr/bin/env python3
"""Calibrate the truncation-difference constant C on separated lattices.

Measures (W_alpha - W_eta) / (m * #charges * rate(eta)) on unit lattices
with uniform background over an (eta, alpha) grid and stores the maximum
(with a 25% safety margin) per kernel in
src/rieszgas/data/truncation_constants.json.  These are calibration values,
not ground truth; see the decisions notes.
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from rieszgas.errors import GeometryError  # noqa: E402
from rieszgas.field import FieldContext, eta_rate, truncation_difference  # noqa: E402
from rieszgas.geometry import Hyperrectangle  # noqa: E402
from rieszgas.kernels import KernelSpec  # noqa: E402
from rieszgas.model import DensityField, Support  # noqa: E402


def uniform_box_density(box: Hyperrectangle, m: float) -> DensityField:
    return DensityField(
        fn=lambda x: np.full(np.atleast_2d(x).shape[0], m),
        support=Support("box", tuple(box.center), box=box),
        holder_alpha=1.0, m_lower=m, m_upper=m,
        profile="uniform-box", profile_params={"density": m})


def calibrate(spec: KernelSpec, etas, ratios_out):
    d = spec.d
    if d == 1:
        charges = np.arange(-10, 11, dtype=float).reshape(-1, 1)
        A = Hyperrectangle.from_bounds([-4.6], [4.6])
        sup = Hyperrectangle.from_bounds([-12.0], [12.0])
    else:
        g = np.arange(-8, 9, dtype=float)
        charges = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        A = Hyperrectangle.from_bounds([-4.6, -4.6], [4.6, 4.6])
        sup = Hyperrectangle.from_bounds([-10.0] * 2, [10.0] * 2)
    mu = uniform_box_density(sup, 1.0)
    worst = 0.0
    for eta in etas:
        for frac in (0.25, 0.5):
            alpha = eta * frac
            ctx = FieldContext(spec=spec, charges=charges, background=mu, eta=eta)
            try:
                td = truncation_difference(ctx, A, alpha, eta)
            except GeometryError as exc:
                print(f"  skip eta={eta} ({exc})")
                continue
            ratio = td.delta_w / (1.0 * td.count_charges * eta_rate(spec, eta))
            ratios_out.append((eta, alpha, ratio))
            print(f"  eta={eta:.3f} alpha={alpha:.3f} pairs={td.count_pairs} "
                  f"delta_w={td.delta_w:.5g} ratio={ratio:.4f}")
            # delta_w is negative for positive backgrounds; C bounds |delta_w|
            worst = max(worst, abs(ratio))
    return worst


def main():
    cases = [
        (KernelSpec.log2d(), [0.1, 0.2, 0.3, 0.4]),
        (KernelSpec.log1d(), [0.1, 0.2, 0.3, 0.4]),
        (KernelSpec.riesz(1, 0.5), [0.1, 0.2, 0.3, 0.4]),
        (KernelSpec.riesz(1, 0.75), [0.1, 0.2, 0.3, 0.4]),
    ]
    table = {}
    for spec, etas in cases:
        key = f"{spec.kind}:d={spec.d}:s={spec.s:g}"
        print(key)
        ratios = []
        worst = calibrate(spec, etas, ratios)
        table[key] = {
            "C": round(worst * 1.25, 6),
            "eta_range": [min(etas), max(etas)],
            "samples": [[round(e, 4), round(a, 4), round(r, 6)]
                        for e, a, r in ratios],
            "note": "empirical calibration on a separated unit lattice; "
                    "not ground truth",
        }
    out = (pathlib.Path(__file__).resolve().parents[1]
           / "src/rieszgas/data/truncation_constants.json")
    out.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
