"""Regenerate the model files in src/lure_verify/data/.

The shipped networks are synthetic.  Hidden weights are seeded half-normal
magnitudes with a fraction of flipped signs, the output row is negative
(u ~ -K x, the sign pattern of a stabilising state feedback for this plant),
and the input columns of W1 are rescaled so that the sector bound equals
the target row exactly (up to rounding).

    python scripts/make_fixtures.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from lure_verify.bench import lipschitz_product_bound
from lure_verify.lure import LtiSystem
from lure_verify.model_io import dump_model
from lure_verify.nn import FeedforwardNet, network_sector_bound

DATA = Path(__file__).resolve().parent.parent / "src" / "lure_verify" / "data"

DEMO_PLANT = LtiSystem(A=[[-5.0, 1.0], [3.0, -5.0]], B=[[0.5], [1.0]],
                        C=[[1.0, 0.0], [0.0, 1.0]])


def calibrated_net(widths, target, seed, flip):
    rng = np.random.default_rng(seed)
    dims = [2] + list(widths)
    weights = []
    for i in range(len(widths)):
        W = np.abs(rng.normal(size=(dims[i + 1], dims[i]))) / np.sqrt(dims[i])
        if i < len(widths) - 1:
            W *= np.where(rng.random(W.shape) < flip, -1.0, 1.0)
        else:
            W = -W
        weights.append(W)
    gamma = network_sector_bound(FeedforwardNet(weights, "tanh")).upper[0]
    weights[0] = weights[0] * (np.asarray(target) / gamma)[None, :]
    return FeedforwardNet(weights, "tanh")


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    shallow = calibrated_net([10, 10, 1], [2.65, 1.61], seed=0, flip=0.3)
    lip_shallow = lipschitz_product_bound(shallow)
    # first seed whose deeper net has a clearly larger norm product
    seed = 0
    while True:
        wide = calibrated_net([10, 15, 15, 1], [2.75, 1.47], seed=100 + seed, flip=0.05)
        if lipschitz_product_bound(wide) > 1.15 * lip_shallow:
            break
        seed += 1
    narrow = calibrated_net([10, 15, 15, 1], [0.83, 1.19], seed=200, flip=0.05)

    dump_model(DEMO_PLANT, narrow, DATA / "demo_2x2.json",
               "2x2 positive plant with a 10/15/15/1 tanh controller; "
               "Gamma_hi = [0.83, 1.19]")
    dump_model(DEMO_PLANT, wide, DATA / "demo_2x2_wide.json",
               "2x2 positive plant with a 10/15/15/1 tanh controller; "
               "Gamma_hi = [2.75, 1.47]")
    dump_model(DEMO_PLANT, shallow, DATA / "net_10_10_1.json",
               "2x2 positive plant with a 10/10/1 tanh controller; "
               "Gamma_hi = [2.65, 1.61]")
    dump_model(LtiSystem([[1.0]], [[1.0]], [[1.0]]),
               FeedforwardNet([[[1.0]], [[0.5]]], "tanh"),
               DATA / "unstable_scalar.json",
               "unstable scalar plant; A + B Gamma_hi C = 1.5")
    dump_model(LtiSystem([[5.0]], [[1.0]], [[1.0]]),
               FeedforwardNet([[[1.0]], [[1.0]]], "relu"),
               DATA / "divergent_scalar.json",
               "x' = 5x + relu(x); leaves any bounded region within a few seconds")
    for name in sorted(DATA.glob("*.json")):
        print(name.name)


if __name__ == "__main__":
    main()
