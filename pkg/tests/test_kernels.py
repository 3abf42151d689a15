import os
import subprocess
import sys

import numpy as np
import pytest

from scenario_cert import _kernels, lp

try:
    _kernels.load_backend("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")


def random_lps(count, seed):
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n, rows = int(gen.integers(1, 6)), int(gen.integers(1, 25))
        A = gen.standard_normal((rows, n))
        b = gen.uniform(-1.0, 2.0, rows)
        out.append(lp.LinearProgram(gen.standard_normal(n), A, b, -3.0, 3.0))
    return out


@pytest.fixture
def restore_backend():
    original = _kernels.BACKEND
    yield
    _kernels.use_backend(original)


@needs_ext
def test_backends_agree(restore_backend):
    progs = random_lps(60, 11)
    results = {}
    for name in ("python", "cython"):
        _kernels.use_backend(name)
        results[name] = [lp.solve(p) for p in progs]
    for a, b in zip(results["python"], results["cython"]):
        assert a.status == b.status and a.iterations == b.iterations
        if a.optimal:
            np.testing.assert_allclose(a.x, b.x, rtol=0, atol=1e-12)
            assert a.active_rows == b.active_rows


@needs_ext
def test_pivot_kernels_identical():
    gen = np.random.default_rng(3)
    T = gen.standard_normal((6, 9))
    T[2, 4] = 1.7
    out = []
    for name in ("python", "cython"):
        mod = _kernels.load_backend(name)
        Tc, basis = T.copy(), np.arange(5, dtype=np.intp)
        mod.pivot(Tc, basis, 2, 4)
        out.append((Tc, basis))
    np.testing.assert_allclose(out[0][0], out[1][0], rtol=0, atol=1e-14)
    assert out[0][1].tolist() == out[1][1].tolist() and out[0][1][2] == 4


@pytest.mark.parametrize("name", ["python", pytest.param("cython", marks=needs_ext)])
def test_iteration_limit_reported(name):
    mod = _kernels.load_backend(name)
    # min -x1 with x1 <= 1 needs one pivot; a zero budget must stop first
    T = np.array([[1.0, 1.0, 1.0], [-1.0, 0.0, 0.0]])
    basis = np.array([1], dtype=np.intp)
    status, it = mod.simplex_loop(T, basis, 2, 1e-10, 0)
    assert status == _kernels.ITERATION_LIMIT and it == 0
    status, it = mod.simplex_loop(T, basis, 2, 1e-10, 10)
    assert status == _kernels.OPTIMAL and it == 1 and T[0, -1] == 1.0


def test_env_var_forces_fallback():
    code = "from scenario_cert import KERNEL_BACKEND; print(KERNEL_BACKEND)"
    env = dict(os.environ, SCENARIO_CERT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_default_prefers_extension():
    code = "from scenario_cert import KERNEL_BACKEND; print(KERNEL_BACKEND)"
    env = {k: v for k, v in os.environ.items() if k != "SCENARIO_CERT_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
