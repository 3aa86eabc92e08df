import math

import numpy as np
import pytest

from rallystats import (
    GameConfig,
    InfeasibleData,
    Player,
    RallyProbs,
    SeedSpec,
    TerminalScore,
)
from rallystats import estimate, simulate
from rallystats.estimate import FitMode, FitModel, GameRecord, RallyWinProbMLE

from oracles import enumerate_sideout, score_marginal

A, B = Player.A, Player.B


def rec(server, alpha, beta, last, duration=None):
    return GameRecord(server, TerminalScore(alpha, beta, last), duration)


def simulated_records(pa, pb, n, count, seed, s_a=0.5):
    sample = simulate.sample_games(
        RallyProbs(pa, pb), GameConfig(n=n, s_a=s_a), count, seed
    )
    return estimate.records_from_sample(sample)


class TestScoreLikelihood:
    def test_shutout_closed_form(self):
        n, p_a, p_b = 7, 0.62, 0.47
        q = (1 - p_a) * (1 - p_b)
        got = estimate.loglik_score([rec(A, n, 0, A)], p_a, p_b)
        assert got == pytest.approx(n * math.log(p_a) - n * math.log(1 - q), abs=1e-12)

    def test_permutation_invariance(self):
        records = simulated_records(0.6, 0.5, 9, 40, SeedSpec(21, 0))
        lik = estimate.loglik_score(records, 0.57, 0.44)
        lik_rev = estimate.loglik_score(records[::-1], 0.57, 0.44)
        assert lik == pytest.approx(lik_rev, abs=1e-12)

    def test_matches_enumeration_probabilities(self):
        p_a, p_b = 0.6, 0.45
        outcomes, _ = enumerate_sideout(p_a, p_b, 3, server=A, tol=1e-16)
        marg = score_marginal(outcomes)
        records = [
            rec(A, 3, 0, A), rec(A, 3, 2, A), rec(A, 1, 3, B), rec(A, 3, 2, A),
        ]
        expected = sum(
            math.log(marg[(r.score.alpha, r.score.beta, r.score.last_scorer)]) for r in records
        )
        assert estimate.loglik_score(records, p_a, p_b) == pytest.approx(expected, abs=1e-10)

    def test_malformed_record_rejected(self):
        with pytest.raises(InfeasibleData, match="record 0"):
            estimate.loglik_score([rec(A, 3, 5, A)], 0.5, 0.5)


class TestJointLikelihood:
    def test_minimum_duration_single_term(self):
        # D = alpha + beta means no interruptions are possible: shutout term
        n, p_a, p_b = 5, 0.6, 0.45
        got = estimate.loglik_score_duration([rec(A, n, 0, A, duration=n)], p_a, p_b)
        assert got == pytest.approx(n * math.log(p_a), abs=1e-12)

    def test_matches_enumeration_joint(self):
        p_a, p_b = 0.6, 0.45
        outcomes, _ = enumerate_sideout(p_a, p_b, 3, server=A, tol=1e-16)
        records = [
            rec(A, 3, 0, A, duration=3),
            rec(A, 3, 2, A, duration=9),
            rec(A, 1, 3, B, duration=7),
        ]
        expected = sum(
            math.log(outcomes[(r.score.alpha, r.score.beta, r.score.last_scorer, r.duration)])
            for r in records
        )
        got = estimate.loglik_score_duration(records, p_a, p_b)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_wrong_parity_infeasible(self):
        # first server A, A wins: the rally count must share the parity of
        # alpha + beta (the server-effect)
        with pytest.raises(InfeasibleData, match="parity or too short"):
            estimate.loglik_score_duration([rec(A, 5, 2, A, duration=8)], 0.6, 0.5)

    def test_too_short_infeasible(self):
        with pytest.raises(InfeasibleData):
            estimate.loglik_score_duration([rec(A, 5, 2, A, duration=5)], 0.6, 0.5)

    def test_missing_duration_infeasible(self):
        with pytest.raises(InfeasibleData, match="duration required"):
            estimate.loglik_score_duration([rec(A, 5, 2, A)], 0.6, 0.5)

    def test_b_game_swaps_roles(self):
        lik_b = estimate.loglik_score_duration([rec(B, 2, 5, B, duration=9)], 0.6, 0.45)
        lik_a = estimate.loglik_score_duration([rec(A, 5, 2, A, duration=9)], 0.45, 0.6)
        assert lik_b == pytest.approx(lik_a, abs=1e-12)


def _joint_argmax(records):
    """Analytic maximizer of the joint likelihood: the exponents of p_a,
    1-p_a, p_b, 1-p_b are separable, so each coordinate is a beta-style
    fraction.  Independent oracle for the numeric optimizer."""
    k_pa = k_qa = k_pb = k_qb = 0.0
    for r in records:
        delta = 1 if r.score.last_scorer is not r.first_server else 0
        m = (r.duration - r.score.alpha - r.score.beta - delta) // 2
        k_pa += r.score.alpha
        k_pb += r.score.beta
        k_qa += m + (1 if (r.first_server is A and delta) else 0)
        k_qb += m + (1 if (r.first_server is B and delta) else 0)
    return k_pa / (k_pa + k_qa), k_pb / (k_pb + k_qb)


class TestFit:
    def test_recovers_truth_with_durations(self):
        records = simulated_records(0.6, 0.5, 15, 200, SeedSpec(100, 1))
        res = estimate.fit(records, FitMode.SCORE_DURATION, FitModel.SERVER)
        assert res.converged
        assert res.p_a == pytest.approx(0.6, abs=0.03)
        assert res.p_b == pytest.approx(0.5, abs=0.03)

    def test_score_only_recovers_truth(self):
        # score-only estimates are noisy (sd ~ .037 at m = 400), so this
        # consistency check needs a larger sample than the duration one
        records = simulated_records(0.6, 0.5, 15, 2000, SeedSpec(101, 2))
        res = estimate.fit(records, FitMode.SCORE_ONLY, FitModel.SERVER)
        assert res.p_a == pytest.approx(0.6, abs=0.03)
        assert res.p_b == pytest.approx(0.5, abs=0.03)

    def test_matches_analytic_joint_argmax(self):
        records = simulated_records(0.63, 0.41, 11, 60, SeedSpec(102, 3))
        res = estimate.fit(records, FitMode.SCORE_DURATION, FitModel.SERVER)
        pa_star, pb_star = _joint_argmax(records)
        assert res.p_a == pytest.approx(pa_star, abs=1e-5)
        assert res.p_b == pytest.approx(pb_star, abs=1e-5)

    def test_no_server_model(self):
        records = simulated_records(0.58, 0.42, 15, 300, SeedSpec(103, 4))
        res = estimate.fit(records, FitMode.SCORE_DURATION, FitModel.NO_SERVER)
        assert res.p_a == pytest.approx(0.58, abs=0.03)
        assert res.p_b == pytest.approx(1 - res.p_a, abs=1e-12)

    def test_all_shutouts_pin_boundary(self):
        records = [rec(A, 15, 0, A, duration=15)] * 5
        res = estimate.fit(records, FitMode.SCORE_DURATION, FitModel.SERVER)
        assert res.boundary
        assert res.p_a > 1 - 1e-6

    def test_label_symmetry(self):
        records = simulated_records(0.6, 0.45, 9, 80, SeedSpec(104, 5))
        swapped = [
            GameRecord(
                r.first_server.other,
                TerminalScore(r.score.beta, r.score.alpha, r.score.last_scorer.other),
                r.duration,
            )
            for r in records
        ]
        res = estimate.fit(records, FitMode.SCORE_DURATION, FitModel.SERVER)
        res_swapped = estimate.fit(swapped, FitMode.SCORE_DURATION, FitModel.SERVER)
        assert res.p_a == pytest.approx(res_swapped.p_b, abs=1e-5)
        assert res.p_b == pytest.approx(res_swapped.p_a, abs=1e-5)

    @pytest.mark.parametrize("mode", [FitMode.SCORE_ONLY, FitMode.SCORE_DURATION])
    def test_likelihood_dominance_at_optimum(self, mode):
        lik = estimate.loglik_score if mode is FitMode.SCORE_ONLY else estimate.loglik_score_duration
        for seed in range(4):
            records = simulated_records(0.6, 0.5, 9, 50, SeedSpec(105, seed))
            res = estimate.fit(records, mode, FitModel.SERVER)
            assert res.log_likelihood >= lik(records, 0.6, 0.5) - 1e-9

    def test_duration_information_shrinks_mse(self):
        # the duration-augmented estimator beats the score-only one in
        # empirical MSE for both coordinates (m = 10 games per replication)
        truth = (0.6, 0.5)
        reps = 500
        err = {FitMode.SCORE_ONLY: [], FitMode.SCORE_DURATION: []}
        for i in range(reps):
            records = simulated_records(*truth, 15, 10, SeedSpec(9_000, i))
            for mode in err:
                res = estimate.fit(records, mode, FitModel.SERVER)
                err[mode].append((res.p_a - truth[0], res.p_b - truth[1]))
        mse = {m: np.mean(np.array(v) ** 2, axis=0) for m, v in err.items()}
        assert mse[FitMode.SCORE_DURATION][0] < mse[FitMode.SCORE_ONLY][0]
        assert mse[FitMode.SCORE_DURATION][1] < mse[FitMode.SCORE_ONLY][1]


class TestRecordsIO:
    def test_round_trip(self):
        records = simulated_records(0.6, 0.5, 9, 25, SeedSpec(106, 6))
        text = estimate.records_to_json_lines(records)
        back = estimate.records_from_json_lines(text.splitlines())
        assert back == records

    def test_optional_duration(self):
        r = GameRecord(A, TerminalScore(9, 3, A))
        back = estimate.records_from_json_lines([estimate.records_to_json_lines([r]).strip()])
        assert back[0].duration is None

    def test_parse_error_names_record(self):
        with pytest.raises(InfeasibleData, match="record 1"):
            estimate.records_from_json_lines(['{"first_server": "A", "alpha": 3, "beta": 0, "last_scorer": "A"}', "{bad"])


class TestEstimatorAPI:
    def test_params_round_trip(self):
        est = RallyWinProbMLE()
        params = est.get_params()
        assert params == {"mode": FitMode.SCORE_DURATION, "model": FitModel.SERVER}
        est.set_params(mode=FitMode.SCORE_ONLY)
        assert est.get_params()["mode"] is FitMode.SCORE_ONLY
        with pytest.raises(ValueError):
            est.set_params(bogus=1)

    def test_fit_sets_attributes(self):
        records = simulated_records(0.6, 0.5, 15, 100, SeedSpec(107, 7))
        est = RallyWinProbMLE().fit(records)
        assert est is est.fit(records)
        assert 0.0 < est.p_a_ < 1.0
        assert est.result_.mode is FitMode.SCORE_DURATION

    def test_sklearn_clone_compatible(self):
        sklearn_base = pytest.importorskip("sklearn.base")
        est = RallyWinProbMLE(mode=FitMode.SCORE_ONLY)
        clone = sklearn_base.clone(est)
        assert clone.get_params() == est.get_params()

    def test_predict_win_prob(self):
        records = simulated_records(0.6, 0.5, 15, 150, SeedSpec(108, 8))
        est = RallyWinProbMLE().fit(records)
        p = est.predict_win_prob(GameConfig(n=15), server=A, winner=A)
        assert 0.5 < p < 1.0  # A is the stronger side in truth
