import math

import numpy as np
import pytest

from oracles import forward_backward_two_steps, kalman_walk_loglik
from uqengine.core import LabeledValues, SeedPath, rng_create
from uqengine.inference import (
    IndependentNormalError,
    accuracy,
    adapt_particles,
    direct_loglik,
    fitscore,
    norm_distance,
    pf_estimate,
    pf_resample,
    rejection_smooth,
)
from uqengine.io.data import Dataset
from uqengine.models import Randomwalk, Straightwalk
from uqengine.models.base import Model, ModelOutput

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
WALK_INITIAL = LabeledValues(["position", "time"], [0.0, 0.0])
UNIT_ERROR = IndependentNormalError(["position"], 1.0)


class TestDirectLoglik:
    def test_zero_residuals(self):
        ds = Dataset([1.0, 2.0], {"position": [1.0, 2.0]})
        theta = LabeledValues(["mu"], [1.0])
        est = direct_loglik(Straightwalk, theta, ds, UNIT_ERROR, SeedPath((0, 1, 0, 0)),
                            initial=WALK_INITIAL)
        assert est.loglik == pytest.approx(2 * (-LOG_SQRT_2PI), rel=1e-12)

    def test_one_unit_residual(self):
        ds = Dataset([1.0, 2.0], {"position": [2.0, 2.0]})
        theta = LabeledValues(["mu"], [1.0])
        est = direct_loglik(Straightwalk, theta, ds, UNIT_ERROR, SeedPath((0, 1, 0, 0)),
                            initial=WALK_INITIAL)
        assert est.loglik == pytest.approx(2 * (-LOG_SQRT_2PI) - 0.5, rel=1e-12)

    def test_missing_cell_skipped(self):
        class TwoOutputWalk(Straightwalk):
            def run(self, time):
                out = super().run(time)
                value = out.values["position"]
                return self.output([value, value], ["position", "shadow"], time)

        nan = float("nan")
        ds = Dataset([1.0, 2.0], {"position": [1.0, nan], "shadow": [nan, 2.0]})
        theta = LabeledValues(["mu"], [1.0])
        error = IndependentNormalError(["position", "shadow"], 1.0)
        est = direct_loglik(TwoOutputWalk, theta, ds, error, SeedPath((0, 1, 0, 0)),
                            initial=WALK_INITIAL)
        # one observed cell per snapshot, both with zero residual
        assert est.loglik == pytest.approx(2 * (-LOG_SQRT_2PI), rel=1e-12)


class FailingModel(Model):
    def init(self, initial, parameters):
        pass

    def run(self, time):
        return None


class TestParticleFilter:
    def test_single_particle_deterministic_equals_direct(self):
        ds = Dataset([1.0, 2.0, 3.0], {"position": [1.5, 2.0, 2.5]})
        theta = LabeledValues(["mu"], [1.0])
        direct = direct_loglik(Straightwalk, theta, ds, UNIT_ERROR, SeedPath((3, 1, 0, 0)),
                               initial=WALK_INITIAL)
        pf = pf_estimate(Straightwalk, theta, ds, UNIT_ERROR, 1, SeedPath((3, 1, 0, 0)),
                         initial=WALK_INITIAL)
        assert pf.loglik == pytest.approx(direct.loglik, rel=1e-12)

    def test_unbiased_against_kalman(self):
        # sanity-size check; the acceptance suite runs the full version
        mu, sigma, epsilon = 0.5, 8.0, 2.0
        times = [1.0, 2.0]
        data = [14.0, 8.0]
        exact = kalman_walk_loglik(data, times, mu, sigma, epsilon, 10.0, 2.0)
        theta = LabeledValues(["mu", "sigma", "epsilon"], [mu, sigma, epsilon])
        ds = Dataset(times, {"position": data})
        error = IndependentNormalError(["position"], "epsilon")
        from uqengine.distributions import Delta, Normal, Tensor

        initial = Tensor({"position": Normal(10, 2), "time": Delta(0.0)})
        ratios = []
        for i in range(500):
            est = pf_estimate(Randomwalk, theta, ds, error, 16, SeedPath((11, i)),
                              initial=initial, smoothing=False)
            ratios.append(math.exp(est.loglik - exact))
        mean = float(np.mean(ratios))
        stderr = float(np.std(ratios, ddof=1) / math.sqrt(len(ratios)))
        assert abs(mean - 1.0) < 3 * stderr

    def test_uniform_weights_keep_loglik_sum(self):
        # deterministic model: every particle carries the same weight, so
        # the loglik is exactly the sum of the (shared) log-weights and
        # resampling is a plain bootstrap over interchangeable indices
        ds = Dataset([1.0, 2.0], {"position": [1.0, 2.0]})
        theta = LabeledValues(["mu"], [1.0])
        est = pf_estimate(Straightwalk, theta, ds, UNIT_ERROR, 8, SeedPath((5, 1)),
                          initial=WALK_INITIAL)
        assert est.loglik == pytest.approx(2 * (-LOG_SQRT_2PI), rel=1e-12)
        assert all(1 / 8 <= r <= 1.0 for r in est.redraw)

    def test_all_failed_flags_estimate(self):
        ds = Dataset([1.0], {"position": [1.0]})
        est = pf_estimate(FailingModel, LabeledValues([], []), ds, UNIT_ERROR, 4,
                          SeedPath((0, 1)), initial=None)
        assert est.failed
        assert math.isnan(est.loglik)

    def test_impossible_data_gives_neg_inf(self):
        class FarError:
            labels = ("position",)

            def __call__(self, prediction, theta):
                from uqengine.distributions import Tensor, Uniform

                p = float(prediction["position"])
                return Tensor({"position": Uniform(p - 0.01, p + 0.01)})

        ds = Dataset([1.0], {"position": [99.0]})
        theta = LabeledValues(["mu"], [1.0])
        est = pf_estimate(Straightwalk, theta, ds, FarError(), 4, SeedPath((0, 1)),
                          initial=WALK_INITIAL)
        assert est.loglik == -math.inf
        assert not est.failed

    def test_variance_shrinks_with_more_particles(self):
        theta = LabeledValues(["mu", "sigma", "epsilon"], [0.0, 8.0, 2.0])
        ds = Dataset([1.0, 2.0, 3.0], {"position": [12.0, 9.0, 11.0]})
        error = IndependentNormalError(["position"], "epsilon")
        init = LabeledValues(["position", "time"], [10.0, 0.0])

        def spread(particles, tag):
            values = [
                pf_estimate(Randomwalk, theta, ds, error, particles,
                            SeedPath((tag, i)), initial=init, smoothing=False).loglik
                for i in range(120)
            ]
            return np.var(values)

        assert spread(64, 21) < spread(8, 22)


class TestResample:
    def test_all_mass_on_one(self):
        indices = pf_resample([1.0, 0.0, 0.0, 0.0], rng_create(0))
        assert list(indices) == [0, 0, 0, 0]

    def test_binomial_frequency(self):
        rng = rng_create(1)
        zeros = sum(
            (pf_resample([1.0, 1.0], rng) == 0).sum() for _ in range(100_000)
        )
        assert abs(zeros / 200_000 - 0.5) < 0.005

    def test_multiplicities_match_multinomial(self):
        from scipy import stats

        rng = rng_create(2)
        P = 4
        counts = np.zeros(P)
        trials = 20_000
        for _ in range(trials):
            counts += np.bincount(pf_resample(np.ones(P), rng), minlength=P)
        expected = np.full(P, trials * P / P)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert stats.chi2.sf(chi2, df=P - 1) > 1e-3

    def test_degenerate_weights_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            pf_resample([0.0, 0.0], rng_create(0))


# -- rejection smoothing -----------------------------------------------------------

STAY = 0.8
OBS = ((0.8, 0.2), (0.3, 0.7))  # OBS[state][observed value]
LOG_OBS = tuple(tuple(math.log(v) for v in row) for row in OBS)


class TwoStateModel(Model):
    """Symmetric 2-state chain: stays put with probability STAY."""

    def init(self, initial, parameters):
        self.state = 1 if self.rng.uniform() < 0.5 else 0

    def run(self, time):
        if self.rng.uniform() > STAY:
            self.state = 1 - self.state
        return self.output([float(self.state)], ["x"], time)


class TableDistribution:
    labels = ("x",)
    __slots__ = ("state",)

    def __init__(self, state):
        self.state = state

    def logmpdf(self, label, value):
        return LOG_OBS[self.state][int(value)]


class TableError:
    def __call__(self, prediction, theta):
        return TableDistribution(int(prediction["x"]))


HMM_DATA = Dataset([1.0, 2.0], {"x": [0.0, 1.0]})


def hmm_exact_smoothing():
    transition = np.array([[STAY, 1 - STAY], [1 - STAY, STAY]])
    g1 = np.array([OBS[0][0], OBS[1][0]])
    g2 = np.array([OBS[0][1], OBS[1][1]])
    return forward_backward_two_steps([0.5, 0.5], transition, g1, g2)


class TestRejectionSmoothing:
    def test_single_snapshot_equals_filtering(self):
        ds = Dataset([1.0], {"x": [0.0]})
        est = pf_estimate(TwoStateModel, LabeledValues([], []), ds, TableError(), 16,
                          SeedPath((31, 0)), initial=None)
        smoothed = est.trajectories.smoothed_outputs(0)
        direct = est.trajectories.outputs[0][est.trajectories.parents[0]]
        assert np.array_equal(smoothed, direct)

    def test_deterministic_model_single_trajectory(self):
        ds = Dataset([1.0, 2.0], {"position": [1.0, 2.0]})
        theta = LabeledValues(["mu"], [1.0])
        est = pf_estimate(Straightwalk, theta, ds, UNIT_ERROR, 8, SeedPath((32, 0)),
                          initial=WALK_INITIAL)
        draws = rejection_smooth(est.trajectories, rng_create(0), count=5)
        for draw in draws:
            assert np.allclose(draw[:, 0], [1.0, 2.0])

    def test_two_snapshot_marginal_against_forward_backward(self):
        # sanity-size run; the acceptance suite uses 10^5 replications
        exact = hmm_exact_smoothing()
        runs = 10_000
        total = 0.0
        theta = LabeledValues([], [])
        error = TableError()
        for i in range(runs):
            est = pf_estimate(TwoStateModel, theta, HMM_DATA, error, 16,
                              SeedPath((33, i)), initial=None)
            total += est.trajectories.smoothed_outputs(0).mean()
        assert abs(total / runs - exact[1]) < 0.02

    def test_lineage_consistency(self):
        theta = LabeledValues(["mu", "sigma", "epsilon"], [0.0, 5.0, 2.0])
        ds = Dataset([1.0, 2.0, 3.0], {"position": [10.0, 11.0, 9.0]})
        error = IndependentNormalError(["position"], "epsilon")
        init = LabeledValues(["position", "time"], [10.0, 0.0])
        est = pf_estimate(Randomwalk, theta, ds, error, 16, SeedPath((34, 0)), initial=init)
        trajectory = est.trajectories.trajectory(3)
        lineage = est.trajectories.lineage(3)
        for n in range(3):
            assert trajectory[n, 0] == est.trajectories.outputs[n][lineage[n], 0]


class TestFitscore:
    def test_perfect_fit_is_zero(self):
        logw = [np.array([-1.0, -2.0])]
        assert fitscore(logw, logw, dimension=1) == 0.0

    def test_unit_residual_gaussian(self):
        # every residual exactly one noise scale: log O(D|y) - log O(y|y) = -1/2
        logw = [np.array([-LOG_SQRT_2PI - 0.5] * 4)]
        logp = [np.array([-LOG_SQRT_2PI] * 4)]
        assert fitscore(logw, logp, dimension=1) == pytest.approx(-0.5, rel=1e-12)
        assert fitscore(logw, logp, dimension=2) == pytest.approx(-0.25, rel=1e-12)

    def test_nonpositive_for_peaked_errors(self):
        rng = rng_create(7)
        for _ in range(50):
            residuals = rng.standard_normal(8)
            logw = [-LOG_SQRT_2PI - 0.5 * residuals**2]
            logp = [np.full(8, -LOG_SQRT_2PI)]
            assert fitscore(logw, logp, dimension=1) <= 0.0


class TestAccuracy:
    def test_equal_weights_zero(self):
        assert accuracy([np.log(np.ones(8))]) == 0.0

    def test_known_value(self):
        # weights [1,1,1,3]: sample std 1, mean 1.5, P=4 -> 1/2 * 1/1.5
        logw = [np.log(np.array([1.0, 1.0, 1.0, 3.0]))]
        assert accuracy(logw) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_scaling_with_particles(self):
        rng = rng_create(8)
        p_small, p_big = 32, 64
        small = np.mean([
            accuracy([np.log(rng.uniform(0.5, 1.5, p_small))]) for _ in range(400)
        ])
        big = np.mean([
            accuracy([np.log(rng.uniform(0.5, 1.5, p_big))]) for _ in range(400)
        ])
        assert big / small == pytest.approx(1 / math.sqrt(2), abs=0.08)

    def test_degenerate_all_zero(self):
        assert accuracy([np.full(4, -math.inf)]) == math.inf


class TestAdaptParticles:
    def test_below_threshold_frozen(self):
        assert adapt_particles(-3.0, 10.0, 8, 4, 256) == 8

    def test_doubling_branch(self):
        assert adapt_particles(-1.0, 10.0, 8, 4, 256) == 16

    def test_halving_branch(self):
        assert adapt_particles(-1.0, 0.1, 8, 4, 256) == 4

    def test_inside_envelope_unchanged(self):
        assert adapt_particles(-1.0, 1.0, 8, 4, 256) == 8

    def test_locked_frozen(self):
        assert adapt_particles(-1.0, 10.0, 8, 4, 256, locked=True) == 8

    def test_bounds_respected(self):
        assert adapt_particles(-1.0, 10.0, 256, 4, 256) == 256
        assert adapt_particles(-1.0, 0.0, 4, 4, 256) == 4


class TestNormDistance:
    @staticmethod
    def outputs(values, times):
        return [
            ModelOutput(t, LabeledValues(["y"], [v])) for t, v in zip(times, values)
        ]

    def test_identical_zero(self):
        ds = Dataset([1.0, 2.0], {"y": [3.0, 4.0]})
        assert norm_distance(ds, self.outputs([3.0, 4.0], [1.0, 2.0]), 2) == 0.0

    def test_l2_value(self):
        ds = Dataset([1.0, 2.0], {"y": [3.0, 4.0]})
        d = norm_distance(ds, self.outputs([0.0, 0.0], [1.0, 2.0]), 2)
        assert d == pytest.approx(math.sqrt(12.5), rel=1e-12)

    def test_linf_value(self):
        ds = Dataset([1.0, 2.0], {"y": [3.0, 4.0]})
        d = norm_distance(ds, self.outputs([0.0, 0.0], [1.0, 2.0]), math.inf)
        assert d == 4.0

    def test_no_overlap_rejected(self):
        # simulated outputs cover none of the snapshot times
        with pytest.raises(ValueError):
            norm_distance(
                Dataset([1.0, 2.0], {"y": [1.0, 1.0]}),
                self.outputs([0.0], [3.0]),
                2,
            )

    def test_bad_order_rejected(self):
        ds = Dataset([1.0], {"y": [1.0]})
        with pytest.raises(ValueError, match="order"):
            norm_distance(ds, self.outputs([1.0], [1.0]), 3)


class TestLogWeightBound:
    def test_per_snapshot_variance_bound_on_pf_diagnostics(self):
        # sum of per-snapshot log-weight variances dominates the variance
        # of the per-lineage summed log-weights on resampled ensembles
        theta = LabeledValues(["mu", "sigma", "epsilon"], [0.2, 6.0, 2.0])
        ds = Dataset([1.0, 2.0, 3.0], {"position": [11.0, 12.0, 10.0]})
        error = IndependentNormalError(["position"], "epsilon")
        init = LabeledValues(["position", "time"], [10.0, 0.0])
        rng = rng_create(55)
        for i in range(10):
            est = pf_estimate(Randomwalk, theta, ds, error, 32, SeedPath((55, i)),
                              initial=init)
            trajectories = est.trajectories
            per_particle = []
            for j in range(trajectories.particles):
                path = trajectories.lineage(j)
                total = 0.0
                for n in range(trajectories.snapshots):
                    y = trajectories.outputs[n][path[n], 0]
                    d = ds.columns["position"][n]
                    total += -0.5 * ((d - y) / 2.0) ** 2
                per_particle.append(total)
            summed_var = float(np.var(per_particle))
            snapshot_vars = 0.0
            for n in range(trajectories.snapshots):
                y = trajectories.outputs[n][:, 0]
                d = ds.columns["position"][n]
                snapshot_vars += float(np.var(-0.5 * ((d - y) / 2.0) ** 2))
            assert snapshot_vars >= summed_var - 1e-9
