from __future__ import annotations

import numpy as np
import pytest

from hamflow import catalog
from hamflow.verify import (
    BifurcationCertificate,
    VerifyConfig,
    bifurcation_certificate,
    maslov_by_t0,
    maslov_t0_independence,
    verify_main,
)

FAST = VerifyConfig(T_num=12.0, N=1200)


def test_verify_poschl_teller(pt):
    rep = verify_main(pt, FAST)
    assert (rep.sfl_crossings, rep.sfl_discretized, rep.maslov) == (-1, -1, -1)
    assert rep.agree
    assert rep.diagnostics["maslov_product"] == -1
    assert rep.diagnostics["max_kernel_dim"] <= pt.n
    assert "eigenvalue_trajectories" not in rep.diagnostics


def test_verify_constant(constant):
    rep = verify_main(constant, FAST)
    assert (rep.sfl_crossings, rep.sfl_discretized, rep.maslov, rep.agree) == (0, 0, 0, True)


def test_disagreement_attaches_trajectories(pt, monkeypatch):
    import hamflow.verify as verify

    class Fake:
        sfl = 7
        crossing_intervals = []
        lambdas = np.linspace(0, 1, 3)
        eigenvalues = [np.zeros(0)] * 3

    monkeypatch.setattr(verify, "discretized_flow", lambda *a, **k: Fake())
    rep = verify.verify_main(pt, FAST)
    assert not rep.agree
    assert "eigenvalue_trajectories" in rep.diagnostics and "detector" in rep.diagnostics


def test_t0_independence_autonomous(constant):
    assert maslov_t0_independence(constant, [-3.0, 0.0, 2.0])


def test_t0_values_deep_well(pt_deep):
    assert set(maslov_by_t0(pt_deep, [0.0, 0.7]).values()) == {-2}


@pytest.mark.parametrize(
    "name, maslov, bound, count",
    [("poschl_teller", -1, 1, 1), ("poschl_teller_deep", -2, 2, 2), ("constant_hyperbolic", 0, 0, 0)],
)
def test_certificates(name, maslov, bound, count):
    cert = bifurcation_certificate(catalog.build(name))
    assert (cert.maslov, cert.lower_bound, len(cert.sigma_locations)) == (maslov, bound, count)
    assert cert.sigma_finite
    assert cert.lower_bound <= len(cert.sigma_locations)
    assert cert.bifurcation_exists == (maslov != 0)


def test_certificate_on_block_sum_uses_half_dimension():
    cert = bifurcation_certificate(catalog.build("block_direct_sum"))
    assert (cert.maslov, cert.n, cert.lower_bound) == (-2, 2, 1)


def test_clustered_certificate_only_asserts_existence():
    cert = BifurcationCertificate(maslov=-3, n=1, lower_bound=3, sigma_finite=False, sigma_locations=[0.5])
    assert cert.bifurcation_exists and cert.certified_count == 1
