"""Model files shipped with the package.

=========================  ==========================================
``demo_2x2``          2x2 positive plant, 10/15/15/1 tanh net,
                           Gamma_hi ~ [0.83, 1.19]
``demo_2x2_wide``     same plant, 10/15/15/1 tanh net,
                           Gamma_hi ~ [2.75, 1.47]
``net_10_10_1``            same plant, 10/10/1 tanh net,
                           Gamma_hi ~ [2.65, 1.61]
``unstable_scalar``        A = 1, B = C = 1, Gamma_hi = 0.5
``divergent_scalar``       A = 5, B = C = 1, relu, fast blow-up
=========================  ==========================================

The network weights are synthetic (seeded, see ``scripts/make_fixtures.py``)
and calibrated so that their sector bounds hit the listed values.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

FIXTURES = ("demo_2x2", "demo_2x2_wide", "net_10_10_1",
            "unstable_scalar", "divergent_scalar")


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return Path(str(resources.files("lure_verify") / "data" / f"{name}.json"))
