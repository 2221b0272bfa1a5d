import os

# single-threaded BLAS: the probe matrices are small enough that BLAS
# threading costs more than it buys, and the harness parallelizes runs
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
os.environ.setdefault("DCIES_THREADS", "2")

import pytest

from dcies.core import FactorSpec, normalize_dataset
from dcies.synthetic import MixingSpec, desk_specs, make_dataset


@pytest.fixture
def tiny_dataset():
    """Small identity-representation dataset with mixed factor kinds."""
    specs = (
        FactorSpec("a", "continuous"),
        FactorSpec("b", "continuous"),
        FactorSpec("c", "categorical", 3),
    )
    return normalize_dataset(make_dataset(specs, MixingSpec("identity"), 600, seed=7))


@pytest.fixture
def small_desk_dataset():
    """Desk factor set at a size suitable for probe unit tests."""
    return normalize_dataset(make_dataset(desk_specs(), MixingSpec("identity"), 3000, seed=5))
