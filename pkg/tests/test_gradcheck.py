import numpy as np

from dtgrm import autodiff as ad
from dtgrm.gradcheck import Check, check_gradients, default_checks, faulty_check, numeric_grad, run_gradcheck

OPS = {
    "add", "sub", "mul", "neg", "square", "relu", "exp", "log", "clamp", "sum", "mean", "reshape",
    "index", "index_rows", "gather_neighbors", "weighted_rows", "concat", "matmul", "conv1d", "softmax",
    "cosine_rows", "embed_likelihoods", "s_graph", "l_graph", "normalize_adjacency", "gcn_apply",
    "drgc_layer", "drgc_layer[s-only]", "drgc_layer[l-only]", "drgc_layer[conv]", "backbone", "dtgrm_stage",
    "exchange_head", "cls_loss", "tmse_loss", "tmse_loss[detached]", "full_model",
}


def test_manifest_lists_every_operation_once():
    names = [c.name for c in default_checks()]
    assert len(names) == len(set(names))
    assert set(names) == OPS


def test_numeric_grad_of_quadratic():
    x = ad.Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    g = numeric_grad(lambda: ad.sum_(ad.square(x)), x)
    np.testing.assert_allclose(g, 2 * x.data, atol=1e-8)


def test_check_gradients_flags_a_wrong_backward():
    res = run_gradcheck([faulty_check()])
    assert len(res) == 1 and not res[0].passed and res[0].rel_error > 0.1


def test_full_model_check_passes():
    (full,) = [c for c in default_checks() if c.name == "full_model"]
    (res,) = run_gradcheck([full])
    assert res.passed and res.rel_error < 1e-4


def test_custom_check():
    def build(rng):
        a = ad.Tensor(rng.normal(size=(3,)), requires_grad=True)
        return [a], lambda: ad.sum_(ad.mul(a, a))

    (res,) = run_gradcheck([Check("custom", build)])
    assert res.passed
    a = ad.Tensor(np.ones(2), requires_grad=True)
    assert check_gradients([a], lambda: ad.sum_(ad.exp(a))) < 1e-6
