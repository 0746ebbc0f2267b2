import os
import subprocess
import sys

import numpy as np

from spdmetric import _backend
from spdmetric._kernels_py import best_permutation_score


def test_env_forces_fallback():
    env = dict(os.environ, SPDMETRIC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import spdmetric; print(spdmetric.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_get_backends():
    assert "python" in _backend.available()
    assert _backend.BACKEND in _backend.available()
    assert _backend.get("python").best_permutation_score is best_permutation_score


def test_permutation_kernels_agree(backend, rng):
    for k in range(1, 8):
        C = rng.integers(0, 9, size=(k, k))
        assert _backend.get(backend).best_permutation_score(C) == best_permutation_score(C)
    assert _backend.get(backend).best_permutation_score(np.array([[0, 5], [7, 0]])) == 12
