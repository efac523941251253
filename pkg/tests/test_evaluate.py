import numpy as np
import pytest

from langground import evaluate
from langground.corpus import CorpusEntry, gen_synthetic_corpus, tokenize
from langground.evaluate import (
    correctly_grounded,
    cross_level_matrix,
    is_composite,
    kfold_cv,
    score_grounder,
    stratified_folds,
    timing_harness,
    train_grounder,
)


def entry(text, level, reward):
    return CorpusEntry(text, tokenize(text), level, reward)


def separable_corpus():
    """Tiny corpus whose commands identify their tasks uniquely."""
    rows = [
        ("step north once", 0, "goNorth"),
        ("step south once", 0, "goSouth"),
        ("door then into crimson side", 1, "agentInRegion agent0 roomIsRed"),
        ("door then into emerald side", 1, "agentInRegion agent0 roomIsGreen"),
        ("crimson target", 2, "agentInRegion agent0 roomIsRed"),
        ("emerald target", 2, "agentInRegion agent0 roomIsGreen"),
    ]
    return [entry(*row) for row in rows for _ in range(2)]


class TestFolds:
    def test_partition_exact(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 3, seed=0)
        folds = stratified_folds(entries, 10, seed=1)
        flat = sorted(i for fold in folds for i in fold)
        assert flat == list(range(len(entries)))

    def test_stratification_covers_levels(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 5, seed=0)
        for fold in stratified_folds(entries, 5, seed=2):
            levels = {entries[i].level for i in fold}
            assert levels == {0, 1, 2}


class TestKfold:
    def test_separable_corpus_is_perfect_with_ibm2(self, small_env):
        entries = separable_corpus()
        # folds stratify by level, not task: pick a (deterministic) seed
        # whose split leaves one copy of every task on each side, which is
        # the premise of a per-class separable 2-fold run
        seed = next(
            s for s in range(100)
            if all(
                len({(entries[i].level, entries[i].reward) for i in fold})
                == len(entries) // 2
                for fold in stratified_folds(entries, 2, s)
            )
        )
        report = kfold_cv(entries, "ibm2", k=2, seed=seed, env=small_env)
        assert report.level_accuracy == 1.0
        assert report.reward_accuracy == 1.0

    def test_reward_accuracy_never_exceeds_level_accuracy(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 4, seed=1)
        report = kfold_cv(entries, "ibm2", k=4, seed=0, env=regular_env)
        assert report.reward_accuracy <= report.level_accuracy + 1e-12
        for fold in report.per_fold:
            assert fold["reward_accuracy"] <= fold["level_accuracy"] + 1e-12

    def test_parallel_equals_serial(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 3, seed=2)
        serial = kfold_cv(entries, "ibm2", k=3, seed=4, env=regular_env)
        parallel = kfold_cv(entries, "ibm2", k=3, seed=4, env=regular_env,
                            workers=2)
        assert serial.to_dict() == parallel.to_dict()

    def test_bit_exact_reproducibility(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 3, seed=2)
        a = kfold_cv(entries, "multi-nn", k=3, seed=4, env=regular_env,
                     epochs=8)
        b = kfold_cv(entries, "multi-nn", k=3, seed=4, env=regular_env,
                     epochs=8)
        assert a.to_dict() == b.to_dict()

    def test_k_validation(self, regular_env):
        entries = gen_synthetic_corpus(regular_env, 1, seed=0)
        with pytest.raises(ValueError):
            kfold_cv(entries, "ibm2", k=1, seed=0, env=regular_env)
        with pytest.raises(ValueError):
            kfold_cv(entries[:3], "ibm2", k=10, seed=0, env=regular_env)


class TestCrossLevel:
    def test_matrix_shape_and_range(self, small_env):
        entries = gen_synthetic_corpus(small_env, 6, seed=3)
        report = cross_level_matrix(entries, "ibm2", small_env, trials=2, seed=0)
        matrix = np.array(report.matrix)
        assert matrix.shape == (3, 3)
        assert ((matrix >= 0.0) & (matrix <= 1.0)).all()

    def test_single_level_training_restricts_output_space(self, small_env):
        entries = [e for e in gen_synthetic_corpus(small_env, 5, seed=4)]
        level1 = [e for e in entries if e.level == 1]
        grounder = train_grounder("ibm2", level1, small_env, levels=(1,))
        for e in entries[::5]:
            level, _, _ = grounder.infer(e.tokens)
            assert level == 1

    def test_go_tasks_dropped_from_mapped_eval(self, small_env):
        from langground.evaluate import _mapped_test_set

        entries = gen_synthetic_corpus(small_env, 2, seed=0)
        mapped = _mapped_test_set(entries, eval_level=0, train_level=2)
        assert mapped
        for e in mapped:
            assert e.level == 2
            assert not e.reward.startswith("go")


class TestTiming:
    def test_quartiles_monotone_and_ratio_near_one_for_trivial(self, small_env):
        # terminal-at-start task: all planners return instantly, ratio ~ 1
        entries = [entry("stay here in the red room", 2,
                         "agentInRegion agent0 roomIsRed")]
        grounder = train_grounder("ibm2", entries, small_env)
        report = timing_harness(entries, grounder, small_env, repeats=3)
        for key, (q1, med, q3) in report.quartiles.items():
            assert q1 <= med <= q3
            assert 0.2 < med < 5.0

    def test_composite_filter(self, regular_env):
        trivial = entry("stay", 2, "agentInRegion agent0 roomIsRed")
        composite = entry("go to the green room", 2,
                          "agentInRegion agent0 roomIsGreen")
        go = entry("go north", 0, "goNorth")
        assert not is_composite(trivial, regular_env)
        assert is_composite(composite, regular_env)
        assert not is_composite(go, regular_env)

    def test_correctly_grounded_filters(self, small_env):
        entries = separable_corpus()
        grounder = train_grounder("ibm2", entries, small_env)
        usable = correctly_grounded(grounder, entries)
        assert usable == entries  # separable corpus grounds perfectly

    def test_speedup_on_small_env(self, small_env):
        entries = [e for e in gen_synthetic_corpus(small_env, 2, seed=5)
                   if is_composite(e, small_env)]
        grounder = train_grounder("ibm2", entries, small_env)
        usable = correctly_grounded(grounder, entries)[:4]
        assert usable
        report = timing_harness(usable, grounder, small_env)
        assert report.samples
        for sample in report.samples:
            assert set(sample.plan_seconds) == {"base", "nh", "amdp"}
            lengths = set(sample.steps.values())
            assert len(lengths) == 1  # optimal on the small instance


class TestReports:
    def test_report_files_written(self, tmp_path, small_env):
        from langground import reports

        entries = gen_synthetic_corpus(small_env, 3, seed=6)
        cv = kfold_cv(entries, "ibm2", k=3, seed=0, env=small_env)
        paths = reports.write_cv_report([cv], tmp_path)
        matrix = cross_level_matrix(entries, "ibm2", small_env, trials=1)
        paths += reports.write_cross_level_report(matrix, tmp_path)
        usable = [e for e in entries if is_composite(e, small_env)][:2]
        grounder = train_grounder("ibm2", entries, small_env)
        timing = timing_harness(usable, grounder, small_env)
        paths += reports.write_timing_report(timing, tmp_path)
        for path in paths:
            assert path.exists() and path.stat().st_size > 0
        suffixes = {p.suffix for p in paths}
        assert suffixes == {".json", ".csv", ".png"}


class TestScoreGrounder:
    def test_empty_entries(self, small_env):
        grounder = train_grounder("ibm2", separable_corpus(), small_env)
        assert score_grounder(grounder, []) == (0.0, 0.0)
