from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from hamflow.errors import PreconditionError
from hamflow.symplectic import (
    LagrangianPath,
    LagrangianSubspace,
    crossing_form,
    grassmann_distance,
    intersection,
    is_symplectic,
    maslov,
    maslov_index,
    omega,
    principal_sines,
    relative_crossing_form,
    relative_maslov,
    relative_maslov_index,
    standard_J,
    symplectic_path_crossing_form,
)

J1 = standard_J(1)
HORIZONTAL = LagrangianSubspace(np.array([[1.0], [0.0]]))
VERTICAL = LagrangianSubspace(np.array([[0.0], [1.0]]))


def rotation(theta):
    return expm(theta * J1)


def line_path(theta):
    """``lam -> span(cos theta(lam), sin theta(lam))``."""
    return LagrangianPath(lambda lam: HORIZONTAL.transformed(rotation(theta(lam))))


def random_symplectic(rng, n, scale=0.4):
    H = rng.standard_normal((2 * n, 2 * n))
    return expm(scale * standard_J(n) @ (H + H.T) / 2)


def flow_path(H, n, vertical=False):
    J = standard_J(n)
    blocks = [np.zeros((n, n)), np.eye(n)] if vertical else [np.eye(n), np.zeros((n, n))]
    base = LagrangianSubspace(np.vstack(blocks))
    return LagrangianPath(lambda lam: base.transformed(expm(lam * J @ H)))


def test_omega_and_J():
    assert omega([1, 0], [0, 1]) == pytest.approx(1.0)
    assert is_symplectic(rotation(0.3))
    assert not is_symplectic(np.diag([2.0, 2.0]))


def test_rejects_non_lagrangian_frames():
    with pytest.raises(PreconditionError):
        LagrangianSubspace(np.eye(4)[:, [0, 2]])  # q1 and p1 pair nontrivially
    with pytest.raises(PreconditionError):
        LagrangianSubspace(np.array([[2.0], [0.0]]))
    assert LagrangianSubspace.from_span([[2.0], [0.0]]).isotropy == 0.0


def test_complement_is_transversal():
    rng = np.random.default_rng(3)
    V = HORIZONTAL.transformed(random_symplectic(rng, 1))
    assert intersection(V, V.complement()).shape[1] == 0
    assert intersection(V, V).shape[1] == 1
    assert grassmann_distance(V, V) < 1e-12


def test_principal_sines_of_rotated_lines():
    for theta in (0.1, 0.7, 1.3):
        V = HORIZONTAL.transformed(rotation(theta))
        assert principal_sines(V, HORIZONTAL)[0] == pytest.approx(abs(np.sin(theta)), abs=1e-12)


def test_rotating_line_crossing_form_equals_angular_speed():
    gamma = line_path(lambda lam: np.pi * (lam + 0.1))
    Q = crossing_form(gamma, VERTICAL, 0.4)
    assert Q.L[0, 0] == pytest.approx(np.pi, rel=1e-6)


def test_rotating_line_maslov_index():
    gamma = line_path(lambda lam: np.pi * (lam + 0.1))
    res = maslov(gamma, VERTICAL)
    assert res.index == 1
    assert [c.lam for c in res.crossings] == pytest.approx([0.4], abs=1e-8)
    two_turns = line_path(lambda lam: 2 * np.pi * (lam + 0.05))
    assert maslov_index(two_turns, VERTICAL) == 2


def test_reversal_and_concatenation():
    gamma = line_path(lambda lam: np.pi * (lam + 0.1))
    assert maslov_index(gamma.reversed(), VERTICAL) == -1
    assert maslov_index(gamma.concatenate(gamma.reversed()), VERTICAL) == 0
    assert maslov_index(gamma.concatenate(gamma), VERTICAL) == maslov_index(
        line_path(lambda lam: np.pi * (lam + 0.1) + np.pi), VERTICAL
    ) + 1


@pytest.mark.parametrize("tau", [0.0, 0.25, 0.5, 1.0])
def test_homotopy_with_fixed_endpoints(tau):
    gamma = line_path(lambda lam: np.pi * (lam + 0.1) + 2.0 * tau * np.sin(2 * np.pi * lam))
    assert maslov_index(gamma, VERTICAL) == 1


def test_endpoint_crossing_rejected():
    gamma = line_path(lambda lam: np.pi * (lam + 0.5))
    with pytest.raises(PreconditionError):
        maslov_index(gamma, VERTICAL)


def test_symplectic_matrix_crossing_form():
    theta = lambda lam: np.pi * (lam + 0.5)  # noqa: E731
    Psi = lambda lam: rotation(theta(lam))  # noqa: E731
    q = symplectic_path_crossing_form(Psi, 0.5)
    assert q.L[0, 0] == pytest.approx(np.pi, rel=1e-6)
    path = LagrangianPath(lambda lam: VERTICAL.transformed(Psi(lam)))
    assert crossing_form(path, VERTICAL, 0.5).L[0, 0] == pytest.approx(q.L[0, 0], rel=1e-6)


def test_degenerate_crossing_is_regularized_by_rotation():
    # cubic tangency: theta - pi/2 = (lam - 1/2)^3 touches the vertical without a regular crossing
    gamma = line_path(lambda lam: np.pi / 2 + 4 * (lam - 0.5) ** 3)
    res = maslov(gamma, VERTICAL)
    assert res.delta != 0.0
    assert res.index == 1


@pytest.mark.parametrize("seed", range(5))
def test_naturality_under_symplectic_maps(seed):
    rng = np.random.default_rng(seed)
    n = 2
    H = rng.standard_normal((2 * n, 2 * n))
    gamma = flow_path(3.0 * (H + H.T), n)
    V = LagrangianSubspace(np.vstack([np.zeros((n, n)), np.eye(n)]))
    base = maslov_index(gamma, V)
    M = random_symplectic(rng, n)
    assert maslov_index(gamma.transformed(M), V.transformed(M)) == base


@pytest.mark.parametrize("seed", range(4))
def test_product_route_matches_direct_route(seed):
    rng = np.random.default_rng(100 + seed)
    n = 1 + seed % 2
    H1 = rng.standard_normal((2 * n, 2 * n))
    H2 = rng.standard_normal((2 * n, 2 * n))
    g1 = flow_path(4.0 * (H1 + H1.T), n)
    g2 = flow_path(-2.0 * (H2 + H2.T), n, vertical=True)
    direct = relative_maslov(g1, g2)
    product = relative_maslov(g1, g2, route="product")
    assert direct.index == product.index
    assert [c.lam for c in direct.crossings] == pytest.approx([c.lam for c in product.crossings], abs=1e-6)


def test_relative_index_against_constant_path_is_absolute_index():
    gamma = line_path(lambda lam: np.pi * (lam + 0.1))
    const = LagrangianPath.constant(VERTICAL)
    assert relative_maslov_index(gamma, const) == maslov_index(gamma, VERTICAL)
    Q = relative_crossing_form(gamma, const, 0.4)
    assert Q.L[0, 0] == pytest.approx(np.pi, rel=1e-6)
    assert relative_maslov_index(const, gamma) == -1
