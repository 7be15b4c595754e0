import math

import numpy as np
import pytest

from dynephase import pom
from dynephase._accel import NUMBA_ENABLED
from dynephase.errors import StatisticalQualityError, ValidationError
from dynephase.moments import build_moment_table, moment
from dynephase.phasestats import phase_distribution
from dynephase.states import coherent_state
from dynephase.trajectories import (
    SdeConfig,
    TrajectorySample,
    empirical_moment,
    histogram_chi2,
    ostensible_identities,
    phase_uniformity_ks,
    simulate_ostensible,
    weighted_phase_histogram,
)

SMALL = SdeConfig(steps=1000, v0=1e-5, seed=11, trajectories=2000)


@pytest.fixture(scope="module")
def small():
    return simulate_ostensible(SMALL)


@pytest.fixture(scope="module")
def table():
    return build_moment_table(8)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"steps": 999},
        {"v0": 0.0},
        {"v0": 1.0},
        {"trajectories": 0},
        {"seed": -1},
        {"seed": 2**64},
        {"trajectories": 2**32 + 1},
        {"method": "milstein"},
        {"max_halvings": 31},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        SdeConfig(**kwargs)


def test_time_grid_is_log_uniform():
    lv, v = SMALL.time_grid()
    assert lv.shape == (SMALL.steps + 1,)
    assert v[0] == pytest.approx(SMALL.v0, rel=1e-14)
    assert v[-1] == 1.0
    assert np.allclose(np.diff(lv), -math.log(SMALL.v0) / SMALL.steps, rtol=1e-12)


def test_rejects_non_config():
    with pytest.raises(ValidationError):
        simulate_ostensible({"steps": 1000})


def test_replay_is_bit_identical(small):
    again = simulate_ostensible(SMALL)
    assert np.array_equal(small.phi_hat, again.phi_hat)
    assert np.array_equal(small.C, again.C)


def test_seed_changes_stream(small):
    other = simulate_ostensible(SdeConfig(steps=1000, v0=1e-5, seed=12, trajectories=2000))
    assert not np.array_equal(small.phi_hat, other.phi_hat)


def test_prefix_stability(small):
    # each trajectory owns its random stream, so fewer trajectories is a prefix
    head = simulate_ostensible(SdeConfig(steps=1000, v0=1e-5, seed=11, trajectories=300))
    assert np.array_equal(head.phi_hat, small.phi_hat[:300])
    assert np.array_equal(head.C, small.C[:300])


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba not available")
@pytest.mark.parametrize("method", ["rotation", "euler"])
def test_backends_agree(method):
    cfg = SdeConfig(steps=1000, v0=1e-5, seed=5, trajectories=500, method=method)
    a = simulate_ostensible(cfg, use_numba=True)
    b = simulate_ostensible(cfg, use_numba=False)
    assert a.backend == "numba" and b.backend == "numpy"
    assert np.max(np.abs(a.C - b.C)) < 1e-12
    dphi = np.angle(np.exp(1j * (a.phi_hat - b.phi_hat)))
    assert np.max(np.abs(dphi)) < 1e-12
    assert a.projections == b.projections and a.refined_steps == b.refined_steps


def test_samples_are_read_only_sequence(small):
    assert len(small) == SMALL.trajectories
    s = small[3]
    assert isinstance(s, TrajectorySample)
    assert s.phi_hat == small.phi_hat[3] and s.C == small.C[3]
    assert sum(1 for _ in small) == len(small)
    with pytest.raises(ValueError):
        small.C[0] = 0.0


def test_state_space_bounds(small):
    assert np.all((small.phi_hat >= 0) & (small.phi_hat < 2 * math.pi))
    assert np.all(np.abs(small.C) <= 1.0)
    # the rotation integrator never needs projection
    assert small.projections == 0


def test_euler_stays_in_disc():
    cfg = SdeConfig(steps=1000, v0=1e-5, seed=3, trajectories=2000, method="euler")
    s = simulate_ostensible(cfg)
    assert np.all(np.abs(s.C) < 1.0)
    assert s.refined_steps >= 0 and s.projections >= 0


def test_estimates(small):
    m1 = small.estimates("mark1")
    m2 = small.estimates("mark2")
    assert np.array_equal(m1, np.mod(small.phi_hat, 2 * math.pi))
    expected = np.mod(small.phi_hat + np.angle(1 + small.C), 2 * math.pi)
    assert np.allclose(np.exp(1j * m2), np.exp(1j * expected))
    with pytest.raises(ValidationError):
        small.estimates("mark3")


def test_csv_round_trip(small):
    text = small.to_csv()
    lines = text.split("\n")
    assert lines[0] == "phi_hat,re_C,im_C"
    p, r, i = (float(x) for x in lines[1].split(","))
    assert p == small.phi_hat[0] and complex(r, i) == small.C[0]
    assert "\r" not in text


def test_empirical_moment_validation(small):
    with pytest.raises(ValidationError):
        empirical_moment(small, 5, 4)
    with pytest.raises(ValidationError):
        empirical_moment(small, -1, 0)
    one = simulate_ostensible(SdeConfig(steps=1000, trajectories=1, seed=1))
    est, se = empirical_moment(one, 1, 1)
    assert se == math.inf and est == pytest.approx(abs(one.C[0]) ** 2)


@pytest.mark.slow
@pytest.mark.parametrize("n,m", [(n, m) for n in range(5) for m in range(5) if 0 < n + m <= 4])
def test_mc_moments_match_recursion(mc_samples, table, n, m):
    est, se = empirical_moment(mc_samples, n, m)
    exact = moment(table, n, m)
    assert abs(est - exact) < 3.0 * se, (n, m, est, exact, se)


@pytest.mark.slow
def test_mc_zeroth_moment(mc_samples):
    est, se = empirical_moment(mc_samples, 0, 0)
    assert est == 1.0 and se == 0.0


@pytest.mark.slow
def test_mc_phase_uniformity(mc_samples):
    stat, p = phase_uniformity_ks(mc_samples)
    assert p > 0.01


@pytest.mark.slow
def test_mc_ostensible_identities(mc_samples):
    ids = ostensible_identities(mc_samples)
    for key in ("mean_A", "mean_A2_plus_B", "corr_A_C"):
        est, se = ids[key]
        assert abs(est) < 4.0 * se, key
    assert ids["mean_abs_A2"][0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("estimator", ["mark1", "mark2"])
def test_vacuum_histogram_is_flat(mc_samples, estimator):
    hist = weighted_phase_histogram(mc_samples, 0.0, estimator, bins=32)
    assert hist.effective_sample_size == pytest.approx(len(mc_samples))
    assert math.fsum(hist.bin_mass) == pytest.approx(1.0, abs=1e-12)
    _, _, p = histogram_chi2(hist, np.full(32, 1.0 / 32))
    assert p > 0.01


@pytest.mark.slow
@pytest.mark.parametrize("scheme,estimator", [("mark1", "mark1"), ("mark2", "mark2")])
def test_weighted_histogram_matches_exact(mc_samples, scheme, estimator):
    beta = 2.0
    H = pom.build_h(scheme, 40)
    exact = phase_distribution(H, coherent_state(beta, truncation=40))
    hist = weighted_phase_histogram(mc_samples, beta, estimator, bins=32)
    _, dof, p = histogram_chi2(hist, exact.bin_probabilities(32))
    assert dof == 31
    assert p > 0.01


@pytest.mark.slow
def test_mark2_sharper_than_mark1(mc_samples):
    h1 = weighted_phase_histogram(mc_samples, 2.0, "mark1", bins=32)
    h2 = weighted_phase_histogram(mc_samples, 2.0, "mark2", bins=32)
    assert h2.bin_mass.max() > h1.bin_mass.max()


def test_low_ess_is_rejected(small):
    with pytest.raises(StatisticalQualityError):
        weighted_phase_histogram(small, 12.0)


def test_histogram_validation(small):
    with pytest.raises(ValidationError):
        weighted_phase_histogram(small, 1.0, bins=1)
    with pytest.raises(ValidationError):
        weighted_phase_histogram(small, -1.0)


def test_histogram_csv(small):
    hist = weighted_phase_histogram(small, 1.0, bins=16)
    lines = hist.to_csv().strip().split("\n")
    assert lines[0] == "phi,P,log10_P" and len(lines) == 17
    assert hist.integral() == pytest.approx(1.0, abs=1e-12)

