import random

import pytest
from hypothesis import HealthCheck, settings

from fmsload.instance import RandomParams, generate_random

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_params(rng: random.Random) -> RandomParams:
    """At most 10 operations, 3 machines, 4 tools; budgets sometimes tight."""
    n_parts = rng.randint(1, 4)
    ops = rng.randint(1, max(1, min(3, 10 // n_parts)))
    machines = rng.randint(1, 3)
    tools = rng.randint(1, 4)
    return RandomParams(
        n_parts=n_parts,
        ops_per_part=ops,
        n_machines=machines,
        n_tools=tools,
        options_per_op=rng.randint(1, min(3, machines * tools)),
        budget_factor=rng.choice([0.4, 0.6, 0.8, 1.0, 1.0]),
    )


def small_instance(seed: int):
    rng = random.Random(seed)
    return generate_random(small_params(rng), seed)


@pytest.fixture(scope="session")
def paper():
    from fmsload.instance import paper_example

    return paper_example()


@pytest.fixture(scope="session")
def paper_result(paper):
    from fmsload.solver import solve

    return solve(paper)
