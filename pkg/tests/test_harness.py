"""Inequality checks, the suite runner, and the violation search.

The frozen qutrit witness under tests/data pins a found violation end to end;
search tests keep budgets small enough for the default batch schedule to hit
the structured channels quickly.
"""

import json
import math
import pathlib

import numpy as np
import pytest

from alphacoh.channels import (
    KrausChannel,
    NotIncoherentChannelError,
    dephasing_channel,
    is_incoherent,
    load_channel,
)
from alphacoh.coherence import coherence_alpha
from alphacoh.harness import (
    ALL_CHECKS,
    BadWeightsError,
    CheckStats,
    TrialConfig,
    TrialRecord,
    check_convexity,
    check_holder_step,
    check_lemma1,
    check_monotonicity,
    check_observations,
    check_strong_monotonicity,
    rebuild_witness,
    reverify_violation,
    run_suite,
    search_violation,
)
from alphacoh.states import (
    haar_unitary,
    load_state,
    maximally_coherent,
    random_density,
    substream,
    validate_density,
)

DATA = pathlib.Path(__file__).parent / "data"
HADAMARD_CH = KrausChannel(
    (np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0),)
)


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d, dtype=complex),))


class TestTrialConfigValidation:
    def test_defaults_are_valid(self):
        cfg = TrialConfig()
        assert cfg.checks == ALL_CHECKS

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"dims": ()}, "dims"),
            ({"dims": (1,)}, "dims"),
            ({"alphas": ()}, "alphas"),
            ({"alphas": (2.5,)}, "alpha must lie"),
            ({"trials_per_cell": 0}, "trials_per_cell"),
            ({"n_kraus_range": (0, 3)}, "n_kraus_range"),
            ({"n_kraus_range": (3, 2)}, "n_kraus_range"),
            ({"tolerance": 0.0}, "tolerance"),
            ({"rank_policy": "low"}, "rank_policy"),
            ({"checks": ("strong_monotonicity", "nope")}, "unknown check"),
            ({"checks": ()}, "checks"),
            ({"kind": "l2"}, "unknown kind"),
        ],
    )
    def test_rejects(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            TrialConfig(**kwargs)

    def test_near_one_alpha_blocked_for_divergence_checks(self):
        with pytest.raises(ValueError, match="within 1e-6 of 1"):
            TrialConfig(alphas=(1.0,), checks=("lemma1",))

    def test_near_one_alpha_fine_for_measure_checks(self):
        cfg = TrialConfig(alphas=(1.0,), checks=("strong_monotonicity", "convexity"))
        assert cfg.alphas == (1.0,)


class TestStrongMonotonicity:
    def test_identity_channel_margin_zero(self, rng):
        rho = random_density(3, 3, rng(90))
        rec = check_strong_monotonicity("alpha", rho, identity_channel(3), 1.5)
        assert rec.margin == 0.0
        assert rec.passed

    def test_dephasing_channel_strips_everything(self, rng):
        rho = maximally_coherent(3)
        rec = check_strong_monotonicity("alpha", rho, dephasing_channel(3), 1.5)
        assert rec.rhs == pytest.approx(0.0, abs=1e-12)
        assert rec.lhs == pytest.approx(coherence_alpha(rho, 1.5).value, abs=1e-12)
        assert rec.passed

    def test_rejects_coherent_channel(self, rng):
        rho = random_density(2, 2, rng(91))
        with pytest.raises(NotIncoherentChannelError):
            check_strong_monotonicity("alpha", rho, HADAMARD_CH, 1.5)

    def test_record_fields_are_builtin_floats(self, rng):
        rho = random_density(3, 2, rng(92))
        rec = check_strong_monotonicity("tsallis", rho, dephasing_channel(3), 0.5)
        assert type(rec.lhs) is float
        assert type(rec.rhs) is float
        assert type(rec.margin) is float

    def test_passed_tracks_tolerance(self, rng):
        rho = random_density(3, 3, rng(93))
        rec = check_strong_monotonicity("alpha", rho, identity_channel(3), 0.5, tolerance=1e-9)
        assert rec.passed == (rec.margin >= -1e-9)


class TestMonotonicity:
    def test_identity_channel_margin_zero(self, rng):
        rho = random_density(2, 2, rng(94))
        rec = check_monotonicity("alpha", rho, identity_channel(2), 0.5)
        assert rec.margin == 0.0

    def test_dephasing_channel(self):
        rec = check_monotonicity("tsallis", maximally_coherent(2), dephasing_channel(2), 2.0)
        assert rec.rhs == pytest.approx(0.0, abs=1e-12)
        assert rec.check_name == "monotonicity"

    def test_rejects_coherent_channel(self, rng):
        with pytest.raises(NotIncoherentChannelError):
            check_monotonicity("alpha", random_density(2, 2, rng(95)), HADAMARD_CH, 1.5)


class TestConvexity:
    def test_singleton_mixture_margin_zero(self, rng):
        rho = random_density(3, 3, rng(96))
        rec = check_convexity("alpha", [1.0], [rho], 1.5)
        assert rec.margin == 0.0

    def test_duplicate_states_margin_zero(self, rng):
        rho = random_density(3, 3, rng(97))
        rec = check_convexity("tsallis", [0.5, 0.5], [rho, rho], 0.5)
        assert abs(rec.margin) < 1e-12

    def test_random_mixture_passes(self, rng):
        gen = rng(98)
        states = [random_density(3, 3, gen) for _ in range(3)]
        rec = check_convexity("alpha", gen.dirichlet(np.ones(3)), states, 1.5)
        assert rec.passed

    @pytest.mark.parametrize(
        "weights, n_states",
        [([0.5, 0.4], 2), ([0.7, 0.5], 2), ([-0.1, 1.1], 2), ([1.0], 2), ([], 0)],
    )
    def test_bad_weights(self, weights, n_states, rng):
        gen = rng(99)
        states = [random_density(2, 2, gen) for _ in range(n_states)]
        with pytest.raises(BadWeightsError):
            check_convexity("alpha", weights, states, 1.5)


class TestLemma1:
    def test_identity_channel_margin_zero(self, rng):
        gen = rng(100)
        rho, sigma = random_density(3, 3, gen), random_density(3, 3, gen)
        rec = check_lemma1(rho, sigma, identity_channel(3), 1.5)
        assert abs(rec.margin) < 1e-12
        assert rec.kind == "f_alpha"

    def test_equal_states_pass(self, rng):
        gen = rng(101)
        rho = random_density(3, 3, gen)
        from alphacoh.channels import random_channel

        rec = check_lemma1(rho, rho, random_channel(3, 3, gen), 0.5)
        assert rec.passed and not rec.degenerate

    def test_divergent_pair_is_degenerate(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        sigma = np.diag([0.0, 1.0]).astype(complex)
        rec = check_lemma1(rho, sigma, identity_channel(2), 1.5)
        assert rec.degenerate
        assert rec.passed
        assert rec.margin == math.inf


class TestHolderStep:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.5, 2.0])
    def test_single_kraus_equality(self, alpha, rng):
        # one branch collapses the power-mean bound to an identity
        rho = random_density(3, 3, rng(102, int(alpha * 10)))
        rec = check_holder_step(rho, identity_channel(3), alpha)
        assert abs(rec.margin) <= 1e-10

    def test_multi_branch_passes(self, rng):
        gen = rng(103)
        from alphacoh.channels import random_incoherent_channel

        rho = random_density(3, 3, gen)
        rec = check_holder_step(rho, random_incoherent_channel(3, 3, gen), 1.5)
        assert rec.passed

    def test_rejects_near_one(self, rng):
        with pytest.raises(ValueError, match="within 1e-6"):
            check_holder_step(random_density(2, 2, rng(104)), identity_channel(2), 1.0)

    def test_rejects_coherent_channel(self, rng):
        with pytest.raises(NotIncoherentChannelError):
            check_holder_step(random_density(2, 2, rng(105)), HADAMARD_CH, 1.5)


class TestObservations:
    def make_args(self, gen, d=3):
        from alphacoh.channels import random_channel

        return dict(
            rho=random_density(d, d, gen),
            sigma=random_density(d, d, gen),
            ch=random_channel(d, 2, gen),
            unitary=haar_unitary(d, gen),
            delta_diag=gen.dirichlet(np.ones(2)),
        )

    def test_returns_five_named_records(self, rng):
        args = self.make_args(rng(106))
        records = check_observations(**args, alpha=1.5)
        names = [r.check_name for r in records]
        assert names == [
            "obs1_one_sided",
            "obs2_isometry",
            "obs3_contraction",
            "obs4_joint_convexity",
            "obs5_tensor_ancilla",
        ]
        assert all(r.passed for r in records)

    def test_equal_states_and_identity_unitary(self, rng):
        gen = rng(107)
        rho = random_density(3, 3, gen)
        records = check_observations(
            rho, rho, identity_channel(3), np.eye(3), [1.0], alpha=0.5
        )
        by_name = {r.check_name: r for r in records}
        # F(rho, rho) = 1 makes every comparison an equality
        assert abs(by_name["obs1_one_sided"].margin) < 1e-10
        assert by_name["obs2_isometry"].margin == 0.0
        assert abs(by_name["obs3_contraction"].margin) < 1e-12
        assert abs(by_name["obs5_tensor_ancilla"].margin) < 1e-10

    def test_divergent_base_marks_degenerate(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        sigma = np.diag([0.0, 1.0]).astype(complex)
        records = check_observations(
            rho, sigma, identity_channel(2), np.eye(2), [1.0], alpha=1.5
        )
        assert records[0].degenerate and records[0].passed

    def test_bad_ensemble_weights(self, rng):
        args = self.make_args(rng(108))
        bad = [(0.9, args["rho"], args["sigma"])]
        with pytest.raises(BadWeightsError):
            check_observations(**args, alpha=1.5, ensemble=bad)


class TestCheckStats:
    def test_absorb_counts(self):
        stats = CheckStats()
        rec = TrialRecord("x", 2, 0.5, "alpha", 1.0, 0.5, 0.5, True, 0, 0)
        deg = TrialRecord("x", 2, 0.5, "alpha", math.inf, math.inf, math.inf, True, 0, 1, True)
        fail = TrialRecord("x", 2, 0.5, "alpha", 0.0, 1.0, -1.0, False, 0, 2)
        for r in (rec, deg, fail):
            stats.absorb(r)
        assert (stats.trials, stats.passes, stats.failures, stats.degenerate) == (3, 1, 1, 1)
        assert stats.worst_margin == -1.0

    def test_degenerate_only_leaves_inf_margin(self):
        stats = CheckStats()
        stats.absorb(
            TrialRecord("x", 2, 0.5, "alpha", math.inf, math.inf, math.inf, True, 0, 0, True)
        )
        assert stats.worst_margin == math.inf


SMALL_CFG = TrialConfig(
    dims=(2, 3),
    alphas=(0.5, 1.5),
    trials_per_cell=5,
    master_seed=7,
)


class TestRunSuite:
    def test_family_suite_passes(self):
        summary = run_suite(SMALL_CFG)
        assert summary.all_passed
        assert len(summary.records) > 0
        expected_checks = set(ALL_CHECKS) - {"observations"} | {
            "obs1_one_sided",
            "obs2_isometry",
            "obs3_contraction",
            "obs4_joint_convexity",
            "obs5_tensor_ancilla",
        }
        assert set(summary.stats) == expected_checks

    def test_deterministic_rerun(self):
        a = run_suite(SMALL_CFG)
        b = run_suite(SMALL_CFG)
        assert a.records == b.records

    def test_worker_count_does_not_change_records(self):
        cfg = TrialConfig(
            dims=(2,), alphas=(0.5,), trials_per_cell=4, master_seed=3,
            checks=("strong_monotonicity", "convexity"),
        )
        assert run_suite(cfg, workers=1).records == run_suite(cfg, workers=2).records

    def test_record_counts_match_grid(self):
        cfg = TrialConfig(
            dims=(2, 3), alphas=(0.5,), trials_per_cell=3, checks=("monotonicity",)
        )
        summary = run_suite(cfg)
        assert len(summary.records) == 2 * 1 * 3
        assert summary.stats["monotonicity"].trials == 6

    def test_trial_errors_are_aggregated(self, monkeypatch):
        import alphacoh.harness as harness

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic draw failure")

        monkeypatch.setattr(harness, "random_density", boom)
        cfg = TrialConfig(
            dims=(2,), alphas=(0.5,), trials_per_cell=2, checks=("monotonicity",)
        )
        summary = run_suite(cfg)
        assert not summary.all_passed
        assert all(r.error.startswith("RuntimeError") for r in summary.records)

    def test_quantifier_violation_shows_up_and_rebuilds(self):
        # frozen failing cell: the quantifier loses strong monotonicity on a
        # random draw at this dimension and order
        cfg = TrialConfig(
            dims=(4,),
            alphas=(0.1,),
            trials_per_cell=30,
            checks=("strong_monotonicity",),
            kind="tsallis",
            master_seed=1,
        )
        summary = run_suite(cfg)
        assert not summary.all_passed
        failing = [r for r in summary.records if not r.passed]
        assert failing
        worst = min(failing, key=lambda r: r.margin)
        assert worst.margin == pytest.approx(-0.012724250935573445, abs=1e-15)
        rho, ch = rebuild_witness(cfg, worst)
        replay = check_strong_monotonicity(
            cfg.kind, rho, ch, worst.alpha, tolerance=cfg.tolerance
        )
        assert replay.lhs == worst.lhs
        assert replay.rhs == worst.rhs

    def test_rebuild_witness_rejects_other_checks(self):
        cfg = TrialConfig(dims=(2,), alphas=(0.5,), trials_per_cell=1, checks=("convexity",))
        summary = run_suite(cfg)
        with pytest.raises(ValueError, match="no state/channel witness"):
            rebuild_witness(cfg, summary.records[0])

    def test_rebuild_witness_is_bit_exact(self):
        cfg = TrialConfig(
            dims=(3,), alphas=(1.5,), trials_per_cell=3, checks=("strong_monotonicity",)
        )
        summary = run_suite(cfg)
        rec = summary.records[2]
        rho, ch = rebuild_witness(cfg, rec)
        replay = check_strong_monotonicity(cfg.kind, rho, ch, rec.alpha, tolerance=cfg.tolerance)
        assert replay.margin == rec.margin


class TestSearchViolation:
    def test_finds_qutrit_witness(self):
        report = search_violation(3, 60_000, kind="tsallis", seed=0)
        assert report.found
        assert report.gap > 1e-6
        assert report.trials_used <= 60_000
        validate_density(report.state)
        assert is_incoherent(report.channel)
        assert reverify_violation(report) == report.gap
        # the strongly monotone family must pass on the same witness
        family = check_strong_monotonicity("alpha", report.state, report.channel, report.alpha)
        assert family.passed

    def test_negative_control_family_never_violates(self):
        report = search_violation(3, 20_000, kind="alpha", seed=0)
        assert not report.found
        assert report.best_gap < 1e-9
        assert report.trials_used == 20_000

    def test_near_one_alphas_exhaust(self):
        report = search_violation(3, 5_000, kind="tsallis", alphas=(1.0, 1.0 + 5e-7), seed=2)
        assert not report.found
        assert report.best_gap < 1e-9

    def test_qubit_search_exhausts(self):
        report = search_violation(2, 20_000, kind="tsallis", seed=0)
        assert not report.found
        assert report.best_gap < 1e-9

    def test_gap_threshold_is_respected(self):
        report = search_violation(3, 60_000, kind="tsallis", seed=0, gap_threshold=1.0)
        assert not report.found
        assert report.best_gap > 1e-6  # it did see violations, none that large

    def test_argument_gates(self):
        with pytest.raises(ValueError, match="dimension"):
            search_violation(1, 10)
        with pytest.raises(ValueError, match="trial budget"):
            search_violation(2, 0)
        with pytest.raises(ValueError, match="alpha must lie"):
            search_violation(2, 10, alphas=(2.5,))


class TestFrozenWitness:
    def test_stored_qutrit_violation_replays(self):
        meta = json.loads((DATA / "qutrit_witness_meta.json").read_text())
        rho = load_state(DATA / "qutrit_witness_state.json")
        ch = load_channel(DATA / "qutrit_witness_channel.json")
        assert is_incoherent(ch)
        rec = check_strong_monotonicity(meta["kind"], rho, ch, meta["alpha"])
        assert not rec.passed
        assert -rec.margin == pytest.approx(meta["gap"], abs=1e-12)
        assert rec.lhs == pytest.approx(meta["coherence_before"], abs=1e-12)
        assert rec.rhs == pytest.approx(meta["average_after"], abs=1e-12)
        assert meta["gap"] > 1e-6

    def test_family_passes_on_stored_witness(self):
        meta = json.loads((DATA / "qutrit_witness_meta.json").read_text())
        rho = load_state(DATA / "qutrit_witness_state.json")
        ch = load_channel(DATA / "qutrit_witness_channel.json")
        rec = check_strong_monotonicity("alpha", rho, ch, meta["alpha"])
        assert rec.passed
