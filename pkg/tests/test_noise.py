import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from algest.noise import (
    ExperimentConfig, NoiseSpec, SerConfig, fit_slope, gen_noise, ser_experiment, ser_threshold,
    sinusoid_atom_values, snr_db, sweep, trial_rng,
)
from algest.noise import ar1, sinusoid_mean_square, unit_draws
from algest.sampled import Grid, SampledSignal

# -- generators --------------------------------------------------------------------


def test_white_zero_amplitude_is_silent():
    sig = gen_noise(NoiseSpec("white", amplitude=0.0), Grid.over(1.0, 100), seed=4)
    assert not sig.values.any()


def test_sinusoid_starts_at_zero():
    sig = gen_noise(NoiseSpec("sinusoid-sum", components=((1.0, 1e3, 0.0),)), Grid.over(1.0, 10))
    assert sig.values[0] == 0.0


def test_sinusoid_ignores_seed():
    spec = NoiseSpec("sinusoid-sum", components=((0.5, 40.0, 0.3), (0.2, 7.0, 1.0)))
    g = Grid.over(1.0, 50)
    assert np.array_equal(gen_noise(spec, g, seed=1).values, gen_noise(spec, g, seed=2).values)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_white_gaussian_moments(seed):
    sig = gen_noise(NoiseSpec("white", amplitude=2.0), Grid.over(1.0, 100_000), seed=seed)
    assert abs(sig.values.var() / 4.0 - 1) < 0.05
    assert abs(sig.values.mean()) < 0.05


def test_other_laws_have_unit_variance():
    rng = trial_rng(7)
    r = unit_draws(rng, 100_000, "rademacher")
    assert set(np.unique(r)) == {-1.0, 1.0}
    u = unit_draws(rng, 100_000, "uniform")
    assert np.abs(u).max() <= math.sqrt(3)
    for v in (r, u):
        assert abs(v.var() - 1) < 0.05 and abs(v.mean()) < 0.02


@pytest.mark.parametrize("rho", [-0.1, 0.05, 0.5])
def test_ar1_lag_correlation(rho):
    n = ar1(unit_draws(trial_rng(3), 200_000), rho)
    assert abs(n.var() - 1) < 0.03
    lag1 = np.corrcoef(n[:-1], n[1:])[0, 1]
    assert abs(lag1 - rho) < 0.01


def test_noise_is_keyed_by_coordinates():
    spec = NoiseSpec("white", amplitude=1.0)
    g = Grid.over(1.0, 64)
    a = gen_noise(spec, g, seed=5, cell=1, trial=2).values
    assert np.array_equal(a, gen_noise(spec, g, seed=5, cell=1, trial=2).values)
    assert not np.array_equal(a, gen_noise(spec, g, seed=5, cell=1, trial=3).values)
    assert not np.array_equal(a, gen_noise(spec, g, seed=5, cell=2, trial=2).values)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("white", amplitude=-1)
    with pytest.raises(ValueError):
        NoiseSpec("correlated", amplitude=1, rho=1.0)
    with pytest.raises(ValueError):
        NoiseSpec("sinusoid-sum", components=((1, 0, 0),))
    with pytest.raises(ValueError):
        NoiseSpec("pink")


# -- SNR -----------------------------------------------------------------------------

def test_snr_equal_power():
    g = Grid.over(1.0, 100)
    x = SampledSignal(g, np.sin(3 * g.times))
    assert snr_db(x, x.scaled(-1)) == pytest.approx(0.0, abs=1e-12)


def test_snr_shift_for_tenfold_noise():
    g = Grid.over(1.0, 100)
    x = SampledSignal(g, np.sin(3 * g.times))
    w = gen_noise(NoiseSpec("white", amplitude=0.3), g, seed=1)
    assert snr_db(x, w.scaled(10)) - snr_db(x, w) == pytest.approx(-20.0, abs=1e-9)


def test_snr_sentinels():
    g = Grid.over(1.0, 10)
    z = SampledSignal(g, np.zeros(11))
    x = SampledSignal(g, np.ones(11))
    assert snr_db(x, z) == math.inf
    assert snr_db(z, x) == -math.inf


def test_snr_sine_against_unit_white_noise():
    # mean square of sin(2t) on [0, 1] is 1/2 - sin(4)/8
    power = 0.5 - math.sin(4) / 8
    assert sinusoid_mean_square([(1.0, 2.0, 0.0)], 1.0) == pytest.approx(power, rel=1e-12)
    expected = 10 * math.log10(power)
    assert expected == pytest.approx(-2.25775, abs=1e-5)
    g = Grid.over(1.0, 100_000)
    x = SampledSignal(g, np.sin(2 * g.times))
    w = gen_noise(NoiseSpec("white", amplitude=1.0), g, seed=11)
    assert snr_db(x, w) == pytest.approx(expected, abs=0.05)


# -- exact sinusoid atoms ------------------------------------------------------------

def _oracle(k, j, omega, phi, t):
    def kern(u):
        return (t - u) ** (k - 1) / math.factorial(k - 1) * (-u) ** j

    s = scipy.integrate.quad(kern, 0, t, weight="sin", wvar=omega, limit=500)[0]
    c = scipy.integrate.quad(kern, 0, t, weight="cos", wvar=omega, limit=500)[0]
    return math.cos(phi) * s + math.sin(phi) * c


@pytest.mark.parametrize("omega", [3.0, 55.0, 500.0, 1e5])
def test_sinusoid_atoms_match_weighted_quadrature(omega):
    keys = [(1, 0), (2, 1), (3, 0), (3, 2), (4, 4)]
    got = sinusoid_atom_values(keys, [(0.7, omega, 0.4)], 1.0)
    for (k, j), v in zip(keys, got):
        want = 0.7 * _oracle(k, j, omega, 0.4, 1.0)
        assert abs(v - want) <= 1e-9 * max(1e-6, abs(want)) + 1e-13


def test_multi_tone_mean_square():
    comps = [(1.0, 3.0, 0.2), (0.5, 7.0, 1.1)]
    def f(u):
        return sum(a * math.sin(o * u + p) for a, o, p in comps) ** 2

    want = scipy.integrate.quad(f, 0, 2.0, limit=200)[0] / 2.0
    assert sinusoid_mean_square(comps, 2.0) == pytest.approx(want, rel=1e-10)


# -- slopes ------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_fit_slope_recovers_power_law(p, c):
    x = [10.0, 100.0, 1000.0, 1e4]
    fit = fit_slope(x, [c * v ** p for v in x])
    assert fit["slope"] == pytest.approx(p, abs=1e-9)
    assert fit["ci"][0] <= fit["slope"] <= fit["ci"][1]


def test_fit_slope_needs_three_cells():
    assert fit_slope([1, 2], [1, 2]) is None
    assert fit_slope([1, 2, 3, 4], [1, math.nan, -1.0, 3]) is None
    assert fit_slope([1, 2, 3, 4], [1, 2, math.nan, 4])["cells"] == 3


# -- sweeps ------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(values=[1000])
    with pytest.raises(ValueError):
        ExperimentConfig(vary="Omega", noise="white")
    with pytest.raises(ValueError):
        ExperimentConfig(amplitude_rule="cubic")
    assert ExperimentConfig(amplitude_rule="sqrt", vary="Nbar").cell_amplitude(100) == 10.0


@pytest.mark.parametrize("estimator,truth", [
    ("amplitude", {"theta": 1.0}),
    ("frequency", {"theta": 9.0}),
    ("phase", {"a": 1.0, "b": 0.5}),
])
def test_monte_carlo_variance_matches_prediction(estimator, truth):
    cfg = ExperimentConfig(estimator=estimator, truth=truth, omega=3.0, noise="white", vary="Nbar",
                           values=[1000, 4000], amplitude=0.02, trials=600, seed=9)
    rep = sweep(cfg)
    for row in rep.rows:
        assert abs(row["std_err"] / row["predicted_std"] - 1) < 0.15, row


def test_white_noise_slope_quick():
    cfg = ExperimentConfig(noise="white", vary="Nbar", values=[1000, 4000, 16000, 64000],
                           amplitude=1.0, trials=200, seed=1)
    fit = sweep(cfg).slopes["std_err"]
    assert fit["slope"] == pytest.approx(-0.5, abs=0.1)


def test_correlated_noise_slope():
    cfg = ExperimentConfig(noise="correlated", rho=0.1, vary="Nbar",
                           values=[1000, 4000, 16000, 64000], amplitude=1.0, trials=200, seed=2)
    rep = sweep(cfg)
    assert rep.slopes["std_err"]["slope"] == pytest.approx(-0.5, abs=0.15)
    for row in rep.rows:
        assert abs(row["std_err"] / row["predicted_std"] - 1) < 0.2


def test_sinusoid_sweep_slope_quick():
    cfg = ExperimentConfig(noise="sinusoid", vary="Omega", values=[1e2, 1e3, 1e4, 1e5],
                           amplitude=1.0, trials=20, seed=3)
    rep = sweep(cfg)
    assert rep.slopes["mean_err"]["slope"] == pytest.approx(-1.0, abs=0.15)
    assert all(r["predicted_std"] is None for r in rep.rows)


def test_sweep_reproducible_across_thread_counts():
    base = dict(noise="white", vary="Nbar", values=[500, 1000, 2000], trials=40, seed=17)
    one = sweep(ExperimentConfig(workers=1, **base))
    four = sweep(ExperimentConfig(workers=4, **base))
    strip = lambda text: text.split("\n", 1)[1]  # noqa: E731 (config echo records workers)
    assert strip(one.to_csv()) == strip(four.to_csv())
    assert all(np.array_equal(a, b, equal_nan=True) for a, b in zip(one.errors, four.errors))


def test_fully_erased_cells_are_excluded():
    cfg = ExperimentConfig(noise="white", vary="Nbar", values=[200, 400, 800], trials=5, eps_div=10.0)
    with pytest.warns(UserWarning, match="fully erased"):
        rep = sweep(cfg)
    assert all(r["erasures"] == 5 and r["mean_err"] is None for r in rep.rows)
    assert rep.slopes["mean_err"] is None
    assert rep.summary()["erasures"] == 15


def test_report_files(tmp_path):
    rep = sweep(ExperimentConfig(noise="white", vary="Nbar", values=[200, 400], trials=4))
    rep.write(tmp_path / "s.csv", tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1].startswith("swept,")
    assert len(lines) == 4


# -- SER -----------------------------------------------------------------------------

def test_ser_noiseless_is_zero():
    rep = ser_experiment(SerConfig(symbols=200, nbar=[50, 200], noiseless=True, chunk=64))
    for row in rep.rows:
        assert row["ser_algebraic"] == 0 and row["ser_correlation"] == 0


def test_ser_negative_control_near_chance():
    rep = ser_experiment(SerConfig(symbols=2000, nbar=[100], snr_db=[-20.0], seed=4))
    assert rep.rows[0]["ser_algebraic"] > 0.35


def test_ser_threshold_value():
    th = ser_threshold(SerConfig(), -20.0)
    assert th["sigma_sqrt_nbar"] == pytest.approx(63.42, rel=0.01)
    assert th["nbar_threshold"] == pytest.approx(21766, rel=0.02)
