"""Python access to the ANAP simulator core."""

import json

from ._core import (
    AnapError,
    Simulator,
    update_information_reputation,
    update_own_experience,
    update_service_reputation,
)

__all__ = [
    "AnapError",
    "Simulator",
    "run_scenario",
    "update_information_reputation",
    "update_own_experience",
    "update_service_reputation",
]


def _as_json(scenario):
    return scenario if isinstance(scenario, str) else json.dumps(scenario)


def run_scenario(scenario, seed=1):
    """Run a scenario (dict or JSON text) to its end time.

    Returns (simulator, summary dict).
    """
    sim = Simulator(_as_json(scenario), seed)
    sim.run()
    return sim, json.loads(sim.summary_json(seed))
