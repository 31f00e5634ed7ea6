import numpy as np
import pytest

from mulsedge import tensor as T


def numeric_grad(f, arrays, k, eps=1e-5):
    """Central finite difference of scalar ``f(arrays)`` w.r.t. ``arrays[k]``."""
    base = arrays[k]
    g = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = base[idx]
        base[idx] = old + eps
        up = f(arrays)
        base[idx] = old - eps
        down = f(arrays)
        base[idx] = old
        g[idx] = (up - down) / (2 * eps)
    return g


def rel_error(a, b):
    num = np.linalg.norm(a - b)
    den = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return num / den


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def check_primitive(op, arrays, rng, eps=1e-5):
    """Compare tape gradients of ``sum(op(*inputs) * R)`` with finite differences."""
    probe = op(*[T.Matrix(a) for a in arrays])
    weights = rng.standard_normal(probe.data.shape)

    def loss_value(arrs):
        return float((op(*[T.Matrix(a) for a in arrs]).data * weights).sum())

    params = [T.Matrix(a.copy(), requires_grad=True) for a in arrays]
    with T.Tape() as tape:
        out = op(*params)
        loss = T.sum_all(T.mul(out, T.Matrix(weights)))
    grads = T.backward(tape, loss)
    errs = []
    for k, p in enumerate(params):
        num = numeric_grad(loss_value, [a.copy() for a in arrays], k, eps)
        errs.append(rel_error(grads.get_or_zeros(p), num))
    return max(errs)


# -- shared small trained system -----------------------------------------------

from mulsedge.bench import calibrate_system  # noqa: E402
from mulsedge.data import SyntheticModality, SyntheticTaskSpec, generate_task  # noqa: E402
from mulsedge.perceiver import PerceiverModel, train  # noqa: E402
from mulsedge.protocol import Topology  # noqa: E402

SMALL_SPEC = SyntheticTaskSpec(
    4, (SyntheticModality(6, 5, 0.6, 1.0), SyntheticModality(8, 4, 0.8, 1.0)),
    n_train=200, n_cal=200, n_test=200, seed=7)


@pytest.fixture(scope="session")
def small_system():
    split = generate_task(SMALL_SPEC)
    model = PerceiverModel(SMALL_SPEC.registry(), seed=7)
    train(model, split, 0, epochs=40, seed=7)
    calib = calibrate_system(model, 0, split.cal)
    return model, split, calib, Topology.from_registry(model.registry)
