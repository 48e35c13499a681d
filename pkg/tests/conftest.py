import numpy as np
import pytest

from sjscc import autodiff as ad


def finite_difference(f, x: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x.

    Independent of the reverse-mode path: evaluates the forward function
    only.
    """
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        fp = f()
        x[idx] = orig - eps
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * eps)
    return g


def max_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom))


def assert_gradcheck(build_loss, params: dict[str, ad.Tensor], tol: float = 1e-4):
    """build_loss() must rebuild the graph from the current param data."""
    loss = build_loss()
    ad.backward(loss)
    analytic = {k: p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for k, p in params.items()}
    for name, p in params.items():
        numeric = finite_difference(lambda: build_loss().item(), p.data)
        err = max_rel_error(analytic[name], numeric)
        assert err < tol, f"gradient check failed for {name}: {err}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
