import json
import random

import pytest

from chambers.arrangement import Arrangement, rank_and_essential

# Three affine lines in R^2: y = 2, y = 0, y = x + 1.  Two of them are
# parallel, the third crosses both; 6 regions, none bounded.
THREE_LINES = {
    "n": 2,
    "hyperplanes": [
        {"normal": ["0", "1"], "offset": "2"},
        {"normal": ["0", "1"], "offset": "0"},
        {"normal": ["-1", "1"], "offset": "1"},
    ],
}


@pytest.fixture
def three_lines() -> Arrangement:
    return Arrangement.from_dict(THREE_LINES)


@pytest.fixture
def three_lines_file(tmp_path):
    path = tmp_path / "three_lines.json"
    path.write_text(json.dumps(THREE_LINES))
    return str(path)


def random_essential_arrangement(rng: random.Random, n: int, k: int,
                                 coeff_bound: int = 10) -> Arrangement:
    """Random essential arrangement with integer coefficients; retries until
    the normals span and no two hyperplanes coincide."""
    if k < n:
        raise ValueError("essential needs k >= n")
    while True:
        rows = []
        for _ in range(k):
            while True:
                normal = [rng.randint(-coeff_bound, coeff_bound) for _ in range(n)]
                if any(normal):
                    break
            rows.append(normal + [rng.randint(-coeff_bound, coeff_bound)])
        try:
            arrangement = Arrangement.from_coefficients(n, rows)
        except Exception:
            continue
        if rank_and_essential(arrangement)[1]:
            return arrangement


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False,
        help="also run tests marked slow (large benchmark instances)",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running large instances")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
