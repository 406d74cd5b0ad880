import subprocess
import sys

import numpy as np
import pytest

from ontoforge.vstore.kernels import CYTHON_KERNEL, NUMPY_KERNEL, backend_name


def unit_rows(rng, n, dim):
    m = rng.standard_normal((n, dim)).astype(np.float32)
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return np.ascontiguousarray(m)


needs_cython = pytest.mark.skipif(CYTHON_KERNEL is None, reason="compiled kernel not built")


class TestBackendSelection:
    def test_backend_name_is_known(self):
        assert backend_name() in ("numpy", "cython")

    def test_env_var_forces_numpy(self):
        code = (
            "from ontoforge.vstore.kernels import backend_name;"
            "print(backend_name())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "ONTOFORGE_PURE_PYTHON": "1"},
        )
        assert out.stdout.strip() == "numpy"


@needs_cython
class TestBackendParity:
    def setup_method(self):
        self.rng = np.random.default_rng(99)
        self.matrix = unit_rows(self.rng, 300, 32)
        self.query = unit_rows(self.rng, 1, 32)[0]

    def test_gather_dot_parity(self):
        ids = np.asarray(self.rng.choice(300, size=50, replace=False), dtype=np.int64)
        a = NUMPY_KERNEL.gather_dot(self.matrix, ids, self.query)
        b = CYTHON_KERNEL.gather_dot(self.matrix, ids, self.query)
        assert np.allclose(a, b, atol=1e-6)
        assert b.dtype == np.float32

    def test_dot_all_parity(self):
        a = NUMPY_KERNEL.dot_all(self.matrix, self.query)
        b = CYTHON_KERNEL.dot_all(self.matrix, self.query)
        assert np.allclose(a, b, atol=1e-6)

    def test_search_layer_parity(self):
        # one fully connected small layer: both backends must agree
        n = 80
        matrix = unit_rows(self.rng, n, 32)
        nbr = np.zeros((n, n - 1), dtype=np.int32)
        for i in range(n):
            nbr[i] = [j for j in range(n) if j != i]
        cnt = np.full(n, n - 1, dtype=np.int32)
        entries = np.array([0], dtype=np.int64)
        query = unit_rows(self.rng, 1, 32)[0]
        dist_a, ids_a = NUMPY_KERNEL.search_layer(matrix, nbr, cnt, query, entries, 20)
        dist_b, ids_b = CYTHON_KERNEL.search_layer(matrix, nbr, cnt, query, entries, 20)
        assert ids_a.tolist() == ids_b.tolist()
        assert np.allclose(dist_a, dist_b, atol=1e-6)

    def test_search_layer_distances_ascend(self):
        n = 60
        matrix = unit_rows(self.rng, n, 16)
        nbr = np.zeros((n, n - 1), dtype=np.int32)
        for i in range(n):
            nbr[i] = [j for j in range(n) if j != i]
        cnt = np.full(n, n - 1, dtype=np.int32)
        query = unit_rows(self.rng, 1, 16)[0]
        for kernel in (NUMPY_KERNEL, CYTHON_KERNEL):
            dists, ids = kernel.search_layer(
                matrix, nbr, cnt, query, np.array([3], dtype=np.int64), 10
            )
            assert len(ids) == 10
            assert all(dists[i] <= dists[i + 1] for i in range(len(dists) - 1))
