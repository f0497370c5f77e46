import numpy as np
import pytest
import scipy.sparse as sp

from ddsgd.io import (ContainerError, load_objective, load_problem, load_tomo, read_container, read_image_csv,
                      save_objective, save_problem, save_tomo, write_container, write_image_csv)
from ddsgd.objectives import make_objective, synthetic_problem
from ddsgd.tomo import discrete_gradient_operator, generate_tomo_problem


def test_container_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dense = rng.normal(size=(3, 4))
    vec = rng.normal(size=5)
    sparse = sp.random(6, 7, density=0.3, random_state=1, format="csr")
    write_container(tmp_path / "c.txt", {"kind": "test", "x": 3}, {"D": dense, "v": vec, "S": sparse})
    meta, arrays = read_container(tmp_path / "c.txt")
    assert meta == {"kind": "test", "x": "3"}
    np.testing.assert_array_equal(arrays["D"], dense)
    np.testing.assert_array_equal(arrays["v"].ravel(), vec)
    assert (arrays["S"] != sparse).nnz == 0


def test_container_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("hello\n")
    with pytest.raises(ContainerError):
        read_container(tmp_path / "bad.txt")
    (tmp_path / "trunc.txt").write_text("ddsgd-container 1\nmeta a 1\n")
    with pytest.raises(ContainerError):
        read_container(tmp_path / "trunc.txt")
    with pytest.raises(ContainerError):
        write_container(tmp_path / "x.txt", {"a b": 1}, {})


@pytest.mark.parametrize("variant", ["least-squares", "huber", "logistic", "tikhonov-gradient"])
def test_objective_round_trip(tmp_path, variant):
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 3))
    b = rng.choice([-1.0, 1.0], 4) if variant == "logistic" else rng.normal(size=4)
    D = discrete_gradient_operator((3,)) if variant == "tikhonov-gradient" else None
    obj = make_objective(variant, A, b, delta=0.07, mu=0.2, D=D, sigma=0.01)
    save_objective(obj, tmp_path / "o.txt")
    back = load_objective(tmp_path / "o.txt")
    x = rng.uniform(-1, 1, 3)
    assert back.evaluate(x) == obj.evaluate(x)
    np.testing.assert_array_equal(back.gradient(x), obj.gradient(x))
    assert (back.delta, back.mu, back.sigma, back.L) == (obj.delta, obj.mu, obj.sigma, obj.L)


def test_problem_round_trip(tmp_path):
    prob = synthetic_problem("huber", 5, seed=2, sigma=0.02, R=0.8)
    save_problem(prob, tmp_path / "p.txt")
    back = load_problem(tmp_path / "p.txt")
    x = np.linspace(-0.5, 0.5, prob.n)
    assert back.value(x) == prob.value(x)
    assert (back.m, back.n, back.R, back.sigma) == (prob.m, prob.n, prob.R, prob.sigma)
    np.testing.assert_array_equal(back.x_hat, prob.x_hat)


def test_tomo_round_trip(tmp_path):
    tp = generate_tomo_problem((6, 5), 3, 10, noise_std=0.01, seed=1)
    save_tomo(tp, tmp_path / "t.txt")
    back = load_tomo(tmp_path / "t.txt")
    assert back.dims == tp.dims and back.m == tp.m
    np.testing.assert_array_equal(back.x_true, tp.x_true)
    for a, b in zip(back.A, tp.A):
        assert (a != b).nnz == 0
    for a, b in zip(back.b, tp.b):
        np.testing.assert_array_equal(a, b)


def test_image_csv(tmp_path):
    img = np.arange(24.0) / 7
    write_image_csv(img, (2, 3, 4), tmp_path / "i.csv")
    back, dims = read_image_csv(tmp_path / "i.csv")
    assert dims == (2, 3, 4)
    np.testing.assert_array_equal(back.ravel(), img)
    with pytest.raises(ContainerError):
        write_image_csv(img, (5, 5), tmp_path / "j.csv")
