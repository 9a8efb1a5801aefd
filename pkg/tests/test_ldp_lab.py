import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from divboot.divergence import divergence, mass_infimum_transform
from divboot.ldp_lab import (
    DivergenceTail,
    HalfspaceEvent,
    PointEstimate,
    RateExperimentConfig,
    SupNormBall,
    SupNormExterior,
    WholeSimplex,
    bahadur_experiment,
    default_tail_grid,
    event_rate,
    fit_rate,
    mc_event_logprob,
    neighborhood_experiment,
    rate_fit,
    theoretical_rate,
)
from divboot.models import ExpFamilyModel

HALF = np.array([0.5, 0.5])


def config(event, gamma=1.0, base=HALF, grid=(20, 40), replicas=40_000, seed=0):
    return RateExperimentConfig(np.asarray(base, float), gamma, event, grid, replicas, seed)


def within(point, exact, k=4.0):
    return abs(point.log_phat - math.log(exact)) <= k * point.stderr


# exact conditional probabilities for K=2, counts (n1, n2)

def exact_exponential(n1, n2, c):
    return stats.beta.sf(c, n1, n2)


def exact_poisson(n1, n2, member):
    """Sum over totals s >= 1 and first-cell counts k of Poisson x Binomial mass."""
    n = n1 + n2
    total = 0.0
    for s in range(1, int(n + 12 * math.sqrt(n) + 20)):
        k = np.arange(s + 1)
        q = np.column_stack([k / s, (s - k) / s])
        hit = member(q)
        total += stats.poisson.pmf(s, n) * stats.binom.pmf(k[hit], s, n1 / n).sum()
    return total


def exact_compound_half(n1, n2, c):
    # gamma = 1/2: jump counts N_i ~ Poisson(2 n_i), jumps Exp(1/2); given N,
    # Q1 ~ Beta(N1, N2) with atoms at 0 and 1 when a count is zero
    top = int(2 * max(n1, n2) + 12 * math.sqrt(2 * max(n1, n2)) + 20)
    N = np.arange(top)
    w1, w2 = stats.poisson.pmf(N, 2 * n1), stats.poisson.pmf(N, 2 * n2)
    total = 0.0
    for a in N:
        for b in N:
            if a == 0 and b == 0:
                continue
            if b == 0:
                tail = 1.0
            elif a == 0:
                tail = 0.0
            else:
                tail = stats.beta.sf(c, a, b)
            total += w1[a] * w2[b] * tail
    return total


class TestEvents:
    def test_halfspace(self):
        q = np.array([[0.6, 0.4], [0.59, 0.41]])
        np.testing.assert_array_equal(HalfspaceEvent(0, 0.6).contains(q), [True, False])
        np.testing.assert_array_equal(HalfspaceEvent(0, 0.6, upper=True).contains(q),
                                      [True, True])
        with pytest.raises(ValueError, match="nonempty interior"):
            HalfspaceEvent(0, 1.0)

    def test_ball_and_exterior_partition(self):
        q = np.random.default_rng(0).dirichlet([1, 1, 1], size=500)
        c = np.array([0.2, 0.3, 0.5])
        inside = SupNormBall(c, 0.1).contains(q)
        outside = SupNormExterior(c, 0.1).contains(q)
        assert np.all(inside ^ outside)

    def test_tail(self):
        ev = DivergenceTail(0.5, HALF, 0.02)
        q = np.array([[0.6, 0.4], [0.55, 0.45], [-0.1, 1.1]])
        # signed vectors have infinite divergence and belong to the tail
        np.testing.assert_array_equal(ev.contains(q), [True, False, True])

    def test_validation(self):
        with pytest.raises(ValueError):
            SupNormBall(HALF, 0.0)
        with pytest.raises(ValueError):
            DivergenceTail(0.5, HALF, -1.0)
        with pytest.raises(ValueError):
            DivergenceTail(0.5, np.array([1.0, 0.0]), 0.1)


class TestConfig:
    def test_grid_rules(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            config(WholeSimplex(), grid=(40, 20))
        with pytest.raises(ValueError, match="strictly increasing"):
            config(WholeSimplex(), grid=(20,))

    def test_replica_floor(self):
        with pytest.raises(ValueError, match="10000"):
            config(WholeSimplex(), replicas=9999)

    def test_unsupported_weights(self):
        with pytest.raises(ValueError, match="non-representable"):
            config(WholeSimplex(), gamma=1.5)

    def test_cell_outside(self):
        with pytest.raises(ValueError, match="outside the alphabet"):
            config(HalfspaceEvent(2, 0.6))

    def test_n_must_be_in_grid(self):
        with pytest.raises(ValueError, match="not in the configured grid"):
            mc_event_logprob(config(WholeSimplex()), 30)


class TestMonteCarlo:
    def test_whole_simplex(self):
        p = mc_event_logprob(config(WholeSimplex(), gamma=0.0), 20)
        assert p.log_phat == 0.0 and p.hits == p.replicas

    def test_zero_sum_is_a_miss(self):
        # Poisson weights on n=2 observations sum to zero with probability e^-2
        cfg = config(WholeSimplex(), gamma=1.0, grid=(2, 4), replicas=200_000)
        p = mc_event_logprob(cfg, 2)
        assert within(p, 1 - math.exp(-2))

    def test_censored(self):
        cfg = config(HalfspaceEvent(0, 0.999), gamma=0.0, grid=(200, 400), replicas=10_000)
        p = mc_event_logprob(cfg, 400)
        assert p.censored and p.log_phat == -math.inf and p.stderr == math.inf

    @pytest.mark.parametrize("n", [20, 40])
    def test_exponential_exact(self, n):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=0.0, replicas=200_000)
        assert within(mc_event_logprob(cfg, n), exact_exponential(n // 2, n // 2, 0.6))

    def test_exponential_exact_asymmetric(self):
        cfg = config(HalfspaceEvent(1, 0.5), gamma=0.0, base=[0.7, 0.3], grid=(30, 60),
                     replicas=200_000)
        # Q2 >= 0.5 with counts (21, 9): Q2 ~ Beta(9, 21)
        assert within(mc_event_logprob(cfg, 30), stats.beta.sf(0.5, 9, 21))

    @pytest.mark.parametrize("n", [20, 40])
    def test_poisson_exact(self, n):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=1.0, replicas=200_000)
        exact = exact_poisson(n // 2, n // 2, lambda q: q[:, 0] >= 0.6)
        assert within(mc_event_logprob(cfg, n), exact)

    def test_poisson_exact_tail(self):
        ev = DivergenceTail(0.5, HALF, 0.04)

        def member(q):
            # phi_0.5(Q, P) = 2 sum (sqrt q - sqrt p)^2, evaluated by hand
            return 2 * ((np.sqrt(q) - np.sqrt(0.5)) ** 2).sum(axis=1) > 0.04

        cfg = config(ev, gamma=1.0, replicas=200_000)
        assert within(mc_event_logprob(cfg, 40), exact_poisson(20, 20, member))

    def test_compound_exact(self):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=0.5, grid=(10, 20), replicas=200_000)
        assert within(mc_event_logprob(cfg, 20), exact_compound_half(10, 10, 0.6))

    @pytest.mark.parametrize("gamma", [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    def test_thread_count_irrelevant(self, gamma):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=gamma, replicas=50_000)
        assert mc_event_logprob(cfg, 40, threads=1) == mc_event_logprob(cfg, 40, threads=5)

    def test_cell_sums_match_observation_draws(self):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=-0.5, replicas=100_000)
        a = mc_event_logprob(cfg, 40)
        b = mc_event_logprob(cfg, 40, method="observations")
        assert abs(a.log_phat - b.log_phat) <= 4 * math.hypot(a.stderr, b.stderr)

    def test_superset_has_more_hits(self):
        small = mc_event_logprob(config(HalfspaceEvent(0, 0.62), gamma=0.5), 40)
        large = mc_event_logprob(config(HalfspaceEvent(0, 0.58), gamma=0.5), 40)
        assert large.hits >= small.hits


class TestTheoreticalRate:
    def test_halfspace_example(self):
        assert event_rate(HalfspaceEvent(0, 0.6), 1.0, HALF) == pytest.approx(0.0199341, abs=5e-8)

    def test_contains_base(self):
        assert event_rate(HalfspaceEvent(0, 0.4), 0.5, HALF) == 0.0
        assert event_rate(SupNormBall(HALF, 0.05), 0.5, HALF) == 0.0
        assert event_rate(WholeSimplex(), 0.5, HALF) == 0.0

    @pytest.mark.parametrize("gamma", [-1.0, 0.0, 0.5, 1.0, 2.0])
    def test_halfspace_against_face_search(self, gamma):
        P = np.array([0.2, 0.3, 0.5])
        c = 0.45

        def on_face(s):
            return float(divergence(gamma, np.array([c, s, 1 - c - s]), P))

        res = optimize.minimize_scalar(on_face, bounds=(1e-9, 1 - c - 1e-9), method="bounded",
                                       options={"xatol": 1e-12})
        expected = float(mass_infimum_transform(gamma, res.fun))
        assert event_rate(HalfspaceEvent(0, c), gamma, P) == pytest.approx(expected, abs=1e-10)

    def test_matched_tail_closed_form(self):
        # at gamma = 1/2 the rate of {phi_0.5(Q, P) > t} is t - t^2/8 for any P
        for P in (HALF, np.array([0.1, 0.9]), np.array([0.2, 0.3, 0.5])):
            for t in (0.01, 0.04):
                rate = event_rate(DivergenceTail(0.5, P, t), 0.5, P)
                assert rate == pytest.approx(t - t**2 / 8, rel=1e-7)

    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_tail_against_boundary_sweep(self, gamma):
        # sweep rays from the reference in the simplex plane, locate each
        # boundary crossing by root finding, take the best crossing
        P = np.array([0.2, 0.3, 0.5])
        t = 0.05
        ev = DivergenceTail(0.5, P, t)
        rate = event_rate(ev, gamma, P)
        u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
        v = np.array([1.0, 1.0, -2.0]) / math.sqrt(6)

        def crossing_value(w):
            d = math.cos(w) * u + math.sin(w) * v
            neg = d < 0
            reach = np.min(-P[neg] / d[neg]) * (1 - 1e-12)
            excess = lambda r: float(divergence(0.5, P + r * d, P)) - t
            if excess(reach) <= 0:
                return math.inf
            r = optimize.brentq(excess, 0.0, reach, xtol=1e-14)
            return float(divergence(gamma, P + r * d, P))

        angles = np.linspace(0, 2 * math.pi, 720, endpoint=False)
        values = [crossing_value(w) for w in angles]
        step = angles[1]
        best = math.inf
        for i in np.argsort(values)[:3]:
            res = optimize.minimize_scalar(crossing_value, method="bounded",
                                           bounds=(angles[i] - step, angles[i] + step),
                                           options={"xatol": 1e-10})
            best = min(best, res.fun, values[i])
        brute = float(mass_infimum_transform(gamma, best))
        assert rate <= brute + 1e-12
        assert rate == pytest.approx(brute, rel=1e-6)

    def test_ball_against_grid(self):
        P = np.array([0.2, 0.3, 0.5])
        center = np.array([0.4, 0.3, 0.3])
        ev = SupNormBall(center, 0.05)
        rate = event_rate(ev, 1.0, P)
        g = np.linspace(0, 1, 801)
        a, b = np.meshgrid(g, g)
        q = np.column_stack([a.ravel(), b.ravel(), 1 - a.ravel() - b.ravel()])
        q = q[(q[:, 2] > 0) & ev.contains(q)]
        brute = float(mass_infimum_transform(1.0, divergence(1.0, q, P).min()))
        assert rate <= brute + 1e-12
        assert rate == pytest.approx(brute, rel=1e-3)

    def test_exterior_k2_is_halfspace(self):
        ext = event_rate(SupNormExterior(HALF, 0.1), 0.5, HALF)
        assert ext == pytest.approx(event_rate(HalfspaceEvent(0, 0.6), 0.5, HALF), rel=1e-12)

    @settings(max_examples=25)
    @given(seed=st.integers(0, 10_000))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        P = rng.dirichlet([2, 2, 2]) * 0.97 + 0.01
        P /= P.sum()
        perm = rng.permutation(3)
        for gamma in (0.0, 0.5, 1.0):
            a = event_rate(HalfspaceEvent(0, 0.9), gamma, P)
            b = event_rate(HalfspaceEvent(int(np.flatnonzero(perm == 0)[0]), 0.9), gamma, P[perm])
            assert a == pytest.approx(b, rel=1e-10)

    @given(c1=st.floats(0.55, 0.9), dc=st.floats(0.0, 0.05))
    def test_superset_lowers_rate(self, c1, dc):
        assert (event_rate(HalfspaceEvent(0, c1 - dc), 0.5, HALF)
                <= event_rate(HalfspaceEvent(0, c1), 0.5, HALF) + 1e-15)

    def test_config_entry_point(self):
        cfg = config(HalfspaceEvent(0, 0.6), gamma=0.5)
        assert theoretical_rate(cfg) == pytest.approx(
            float(mass_infimum_transform(0.5, divergence(0.5, np.array([0.6, 0.4]), HALF))))


class TestFit:
    def _points(self, rate, grid=(50, 100, 150, 200, 250), se=0.01, b=-0.5):
        return [PointEstimate(n, 0.3 - rate * n + b * math.log(n), se, 1000, 10**6)
                for n in grid]

    def test_recovers_exact_slope(self):
        est = fit_rate(self._points(0.02), 0.02)
        assert est.slope == pytest.approx(-0.02, abs=1e-12)
        assert est.log_n_coef == pytest.approx(-0.5, abs=1e-9)
        assert est.verdict == "PASS"

    def test_intercept_only_design(self):
        est = fit_rate(self._points(0.02, b=0.0), 0.02, log_n_term=False)
        assert est.slope == pytest.approx(-0.02, abs=1e-12) and est.log_n_coef is None

    def test_fail_verdict(self):
        est = fit_rate(self._points(0.02, se=1e-4), 0.03)
        assert est.verdict == "FAIL" and not est.passed

    def test_hit_floor(self):
        pts = self._points(0.02)
        pts[-1] = PointEstimate(250, -12.0, 0.2, 49, 10**6)
        est = fit_rate(pts, 0.02)
        assert 250 not in est.used_n and est.log_n_coef is not None

    def test_insufficient(self):
        pts = [PointEstimate(50, -1.0, 0.1, 100, 10**5), PointEstimate(100, -math.inf, math.inf, 0, 10**5)]
        with pytest.raises(ValueError, match="at least 2"):
            fit_rate(pts, 0.01)

    def test_whole_simplex_slope_zero(self):
        est = rate_fit(config(WholeSimplex(), gamma=0.0, grid=(10, 20, 30)))
        assert est.slope == 0.0 and est.verdict == "PASS"


class TestExperiments:
    def test_default_grid(self):
        assert default_tail_grid(0.04) == (50, 100, 150, 200, 250, 300, 350, 400)

    def test_bahadur_null_equals_alternative(self):
        model = ExpFamilyModel(["d1", "d2"], [[0.0], [1.0]], [[-5, 5]])
        est = bahadur_experiment(model, [0.0], [0.0], 0.5, (50, 100, 150), replicas=10_000,
                                 z_draws=401)
        assert est.theoretical_rate == 0.0
        # the p-value hovers near 1/2 at every n
        assert all(abs(p.log_phat - math.log(0.5)) < 0.15 for p in est.points)
        assert abs(est.slope) < 3e-3

    def test_neighborhood_bracket(self):
        est = neighborhood_experiment(HALF, [0.55, 0.45], 1.0, 0.03, (50, 100, 150, 200),
                                      replicas=20_000)
        lo, hi = est.bracket
        assert lo <= -est.theoretical_rate <= hi
        assert est.verdict in ("PASS", "FAIL")

    def test_neighborhood_rejects_bad_constants(self):
        with pytest.raises(ValueError, match="alpha"):
            neighborhood_experiment(HALF, HALF, 1.0, 0.03, (50, 100), alpha=1.5)
