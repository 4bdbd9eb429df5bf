"""End-to-end acceptance suite; each test prints one PASS/FAIL line.

Covers, in order: the score-decomposition identity (A1), analytic-gradient
correctness against finite differences (A2), evaluator agreement with a
naive brute-force recomputation plus random-score calibration (A3),
planted-translation recovery on the synthetic corpus with the
translation model beating the plain-metric baseline on the one-to-many
construction (A4), score-part ablation ordering (A5), open versus
known-target retrieval orderings (A6), bit-level determinism and
checkpoint persistence (A7), and the evaluation-report format (A8).
"""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from test_corpus import write_corpus

from transcompat.cli import main as cli_main
from transcompat.corpus import load_corpus
from transcompat.evaluator import (
    EvalConfig,
    auc_from_scores,
    evaluate,
    filter_candidates_by_relations,
    hit_from_scores,
    read_report,
    write_report,
)
from transcompat.models import (
    TrainConfig,
    build_model,
    load_model,
    model_scores,
    save_model,
)
from transcompat.relations import RelationTable
from transcompat.sampling import build_eval_candidates, sample_five_tuples
from transcompat.scoring import dist_breakdown
from transcompat.synth import SynthConfig, generate_synthetic, load_synth_config
from transcompat.trainer import batch_loss_and_grads, train, tuple_gradients
from transcompat.utils import rng_for

SEEDS = (0, 1, 2)
MODEL_AND_BASELINE = ("transnfcm", "trinet")


def verdict(label: str, ok: bool, detail: str) -> bool:
    print(f"{label}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    """Synthetic corpora and default-recipe training runs for three seeds.

    Times the complete experiment (generation, training both model kinds,
    and the open-mode evaluations) so the runtime budget can be asserted.
    """
    root = tmp_path_factory.mktemp("acceptance")
    started = time.perf_counter()
    runs = {}
    for seed in SEEDS:
        out = root / f"corpus{seed}"
        generate_synthetic(SynthConfig(seed=seed), out)
        corpus = load_corpus(out)
        models = {
            kind: train(corpus, TrainConfig(model=kind, seed=seed)).model
            for kind in MODEL_AND_BASELINE
        }
        open_sets = build_eval_candidates(
            corpus, models["transnfcm"].table, "test", 100, "open", seed
        )
        o2m_pairs = [
            tuple(pair)
            for pair in load_synth_config(out)["one_to_many"]["relation_pairs"]
        ]
        o2m_sets = filter_candidates_by_relations(open_sets, corpus, o2m_pairs)
        open_config = EvalConfig(ks=(10,), mode="open", split="test")
        overall = {
            kind: evaluate(models[kind], corpus, open_sets, open_config).auc
            for kind in MODEL_AND_BASELINE
        }
        o2m_open = {
            kind: evaluate(models[kind], corpus, o2m_sets, open_config).auc
            for kind in MODEL_AND_BASELINE
        }
        runs[seed] = SimpleNamespace(
            dir=out,
            corpus=corpus,
            models=models,
            open_sets=open_sets,
            o2m_pairs=o2m_pairs,
            overall=overall,
            o2m_open=o2m_open,
        )
    elapsed = time.perf_counter() - started
    return SimpleNamespace(root=root, runs=runs, elapsed=elapsed)


class TestA1DecompositionIdentity:
    def test_total_equals_recomposed_terms(self):
        """norm + global + category terms recompose the squared residual
        to within 1e-9 relative error over 10,000 random triples."""
        rng = rng_for(202, "acceptance", "decomposition")
        started = time.perf_counter()
        worst = 0.0
        for _ in range(10_000):
            dim = int(rng.integers(2, 257))
            x, y, r = rng.standard_normal((3, dim)) * rng.uniform(0.1, 10.0)
            parts = dist_breakdown(x, y, r)
            err = abs(parts.total - parts.recomposed) / max(1.0, abs(parts.total))
            worst = max(worst, err)
        elapsed = time.perf_counter() - started
        ok = worst <= 1e-9 and elapsed < 5.0
        assert verdict(
            "A1 decomposition identity",
            ok,
            f"max rel err {worst:.2e} over 10,000 triples, dims 2-256, {elapsed:.2f}s",
        )


class TestA2GradientCorrectness:
    H = 1e-5
    RTOL = 1e-4

    def fd_worst_error(self, model, corpus, five_tuple):
        """Max relative error between analytic and central-difference grads,
        or None when the tuple sits too close to a hinge kink."""
        loss, grads = tuple_gradients(model, corpus, five_tuple)
        if 0.0 < abs(loss) < 1e-3:
            return None
        worst = 0.0
        for name, g in grads.items():
            flat_p = model.params[name].reshape(-1)
            flat_g = np.asarray(g).reshape(-1)
            for idx in range(flat_p.size):
                orig = flat_p[idx]
                flat_p[idx] = orig + self.H
                up = batch_loss_and_grads(model, corpus, [five_tuple], want_grads=False)[0]
                flat_p[idx] = orig - self.H
                down = batch_loss_and_grads(model, corpus, [five_tuple], want_grads=False)[0]
                flat_p[idx] = orig
                fd = (up - down) / (2.0 * self.H)
                denom = max(abs(fd), abs(flat_g[idx]), 1e-8)
                worst = max(worst, abs(fd - flat_g[idx]) / denom)
        return worst

    def test_batch_gradients_match_finite_differences(self, tmp_path):
        """Every parameter of every model kind on 120 random tiny instances
        (embedding dim 4, feature dim 6), 64-bit central differences."""
        rng = rng_for(33, "acceptance", "gradients")
        items, pairs = [], []
        for ci, cat in enumerate("ABC"):
            for j in range(6):
                row = ci * 6 + j
                items.append((f"{cat.lower()}{j}", cat, {"visual": row, "textual": row}))
        for j in range(6):
            pairs.append((f"a{j}", f"b{j}", "train"))
            pairs.append((f"b{j}", f"c{(j + 1) % 6}", "train"))
        write_corpus(
            tmp_path,
            items,
            pairs,
            {"visual": rng.standard_normal((18, 6)), "textual": rng.standard_normal((18, 6))},
        )
        corpus = load_corpus(tmp_path)
        table = RelationTable.from_corpus(corpus)
        tuples, _ = sample_five_tuples(corpus.splits["train"].pairs, corpus, table, seed=7)

        started = time.perf_counter()
        worst = 0.0
        instances = 0
        skipped = 0
        for kind in ("transnfcm", "trinet", "sianet", "bpr", "csn"):
            config = TrainConfig(
                model=kind, embed_dim=4, mask_l1=0.0, dropout=0.0, seed=11
            )
            model = build_model(corpus, config)
            for five_tuple in tuples:
                err = self.fd_worst_error(model, corpus, five_tuple)
                instances += 1
                if err is None:
                    skipped += 1
                else:
                    worst = max(worst, err)
        elapsed = time.perf_counter() - started
        ok = (
            instances >= 100
            and skipped <= instances // 10
            and worst <= self.RTOL
            and elapsed < 30.0
        )
        assert verdict(
            "A2 gradient correctness",
            ok,
            f"max rel err {worst:.2e} on {instances} instances "
            f"({skipped} skipped at kinks), {elapsed:.1f}s",
        )


class TestA3MetricOracles:
    def test_evaluate_matches_brute_force_exactly(self, planted):
        """evaluate() equals a naive per-candidate loop on a 20-query corpus."""
        run = planted.runs[0]
        model = run.models["transnfcm"]
        corpus = run.corpus
        sets = run.open_sets[:20]
        config = EvalConfig(ks=(5, 10, 20, 40), mode="open", split="test")
        report = evaluate(model, corpus, sets, config)

        brute_aucs = []
        brute_hits = {k: 0 for k in config.ks}
        for cs in sets:
            gold = model_scores(model, corpus, cs.query_id, [cs.gold_id])[0]
            negs = np.array(
                [
                    model_scores(model, corpus, cs.query_id, [neg])[0]
                    for neg in cs.negative_ids
                ]
            )
            brute_aucs.append(auc_from_scores(gold, negs))
            for k in config.ks:
                brute_hits[k] += hit_from_scores(gold, negs, k)

        same_auc = report.auc == float(np.mean(brute_aucs))
        same_hits = all(
            report.hits[k] == brute_hits[k] / len(sets) for k in config.ks
        )
        same_count = report.n_queries == len(sets)
        ok = same_auc and same_hits and same_count
        assert verdict(
            "A3 metric oracles (brute force)",
            ok,
            f"AUC {report.auc:.6f} and Hit@K identical over {len(sets)} queries",
        )

    def test_random_scores_calibrate_to_half(self):
        """Mean AUC of random scorers over 2,000 queries sits within three
        standard deviations of 0.5. Per-query AUC under a random scorer is
        rank-uniform on {0, 1/n, ..., 1} (variance (n+2)/(12n), not the
        binomial variance of independent comparisons, which share the gold
        score within a query), so the mean of 2,000 queries has sigma
        sqrt((n+2)/(12n)/2000)."""
        rng = rng_for(77, "acceptance", "calibration")
        n_queries, n_negatives = 2_000, 100
        aucs = [
            auc_from_scores(rng.standard_normal(), rng.standard_normal(n_negatives))
            for _ in range(n_queries)
        ]
        sigma = np.sqrt((n_negatives + 2) / (12.0 * n_negatives) / n_queries)
        deviation = abs(float(np.mean(aucs)) - 0.5)
        ok = deviation <= 3.0 * sigma
        assert verdict(
            "A3 metric oracles (calibration)",
            ok,
            f"mean AUC deviates {deviation:.4f} from 0.5, 3 sigma = {3 * sigma:.4f}",
        )


class TestA4PlantedTranslationRecovery:
    def test_translation_model_recovers_planted_structure(self, planted):
        """Default recipe, 30 epochs, three seeds: test AUC >= 0.95 overall
        and >= 0.05 ahead of the plain-metric baseline on the one-to-many
        construction, all inside the three-minute budget."""
        tn_overall = float(np.mean([planted.runs[s].overall["transnfcm"] for s in SEEDS]))
        tn_o2m = float(np.mean([planted.runs[s].o2m_open["transnfcm"] for s in SEEDS]))
        tri_o2m = float(np.mean([planted.runs[s].o2m_open["trinet"] for s in SEEDS]))
        gap = tn_o2m - tri_o2m
        ok = tn_overall >= 0.95 and gap >= 0.05 and planted.elapsed < 180.0
        assert verdict(
            "A4 planted-translation recovery",
            ok,
            f"seed-averaged AUC {tn_overall:.4f} (>= 0.95), one-to-many gap "
            f"{gap:+.4f} (>= 0.05), {planted.elapsed:.0f}s (< 180s)",
        )


class TestA5AblationOrdering:
    def test_full_score_beats_each_part(self, planted):
        """The full score's AUC is within 0.01 of (or above) the best of the
        global-affinity-only and translation-fit-only ablations."""
        parts = {"all": [], "global": [], "category": []}
        for seed in SEEDS:
            run = planted.runs[seed]
            for part in parts:
                config = EvalConfig(ks=(10,), mode="open", split="test", part=part)
                parts[part].append(
                    evaluate(run.models["transnfcm"], run.corpus, run.open_sets, config).auc
                )
        means = {part: float(np.mean(vals)) for part, vals in parts.items()}
        ok = means["all"] >= max(means["global"], means["category"]) - 0.01
        assert verdict(
            "A5 ablation ordering",
            ok,
            f"all {means['all']:.4f} vs global {means['global']:.4f} "
            f"and category {means['category']:.4f}",
        )


class TestA6KnownTargetMode:
    def test_open_mode_gap_at_least_known_target_gap(self, planted):
        """On the one-to-many construction the translation model wins in both
        retrieval modes, and its lead is at least as large when the target
        category is unknown (open) as when it is given (known-target)."""
        kt_config = EvalConfig(ks=(10,), mode="known-target", split="test")
        o2m_kt = {kind: [] for kind in MODEL_AND_BASELINE}
        for seed in SEEDS:
            run = planted.runs[seed]
            kt_sets = build_eval_candidates(
                run.corpus, run.models["transnfcm"].table, "test", 100, "known-target", seed
            )
            sub = filter_candidates_by_relations(kt_sets, run.corpus, run.o2m_pairs)
            for kind in MODEL_AND_BASELINE:
                o2m_kt[kind].append(evaluate(run.models[kind], run.corpus, sub, kt_config).auc)

        open_tn = float(np.mean([planted.runs[s].o2m_open["transnfcm"] for s in SEEDS]))
        open_tri = float(np.mean([planted.runs[s].o2m_open["trinet"] for s in SEEDS]))
        kt_tn = float(np.mean(o2m_kt["transnfcm"]))
        kt_tri = float(np.mean(o2m_kt["trinet"]))
        open_gap, kt_gap = open_tn - open_tri, kt_tn - kt_tri
        ok = open_tn >= open_tri and kt_tn >= kt_tri and open_gap >= kt_gap
        assert verdict(
            "A6 known-target mode",
            ok,
            f"open {open_tn:.4f} vs {open_tri:.4f} (gap {open_gap:+.4f}), "
            f"known-target {kt_tn:.4f} vs {kt_tri:.4f} (gap {kt_gap:+.4f})",
        )


class TestA7DeterminismAndPersistence:
    def test_identical_runs_and_lossless_round_trip(self, planted, tmp_path):
        """Same (seed, config, corpus) twice: bit-identical checkpoints and
        reports; save -> load -> save is a fixed point."""
        run = planted.runs[0]
        config = TrainConfig(epochs=2, embed_dim=8, val_negatives=10, seed=11)
        ckpts, reports = [], []
        for attempt in range(2):
            model = train(run.corpus, config).model
            ckpt = tmp_path / f"attempt{attempt}.ckpt"
            save_model(model, ckpt)
            ckpts.append(ckpt.read_bytes())
            sets = build_eval_candidates(run.corpus, model.table, "test", 20, "open", 11)
            report_path = tmp_path / f"attempt{attempt}.json"
            write_report(
                evaluate(model, run.corpus, sets, EvalConfig(ks=(5, 10))), report_path
            )
            reports.append(report_path.read_bytes())

        reread = tmp_path / "reread.ckpt"
        save_model(load_model(tmp_path / "attempt0.ckpt"), reread)
        round_trip = reread.read_bytes() == ckpts[0]
        ok = ckpts[0] == ckpts[1] and reports[0] == reports[1] and round_trip
        assert verdict(
            "A7 determinism and persistence",
            ok,
            f"checkpoints identical: {ckpts[0] == ckpts[1]}, reports identical: "
            f"{reports[0] == reports[1]}, round trip lossless: {round_trip}",
        )


class TestA8ReportFormat:
    def test_report_carries_percent_auc_and_hit_columns(self, planted, tmp_path):
        """The eval command's report exposes AUC and Hit@{5,10,20,40} as
        percentages. Real-data runs at this protocol land around 76.9 AUC
        and 38.1 Hit@10; those magnitudes are the reference for the columns
        and are deliberately not asserted."""
        run = planted.runs[0]
        ckpt = tmp_path / "model.ckpt"
        save_model(run.models["transnfcm"], ckpt)
        report_path = tmp_path / "report.json"
        code = cli_main(
            [
                "eval",
                "--data", str(run.dir),
                "--checkpoint", str(ckpt),
                "--report", str(report_path),
                "--negatives", "100",
                "--k", "5,10,20,40",
            ]
        )
        report = read_report(report_path)
        has_columns = (
            report.auc_pct is not None
            and sorted(report.hits_pct) == [5, 10, 20, 40]
            and all(0.0 <= v <= 100.0 for v in report.hits_pct.values())
        )
        ok = code == 0 and has_columns and 0.0 <= report.auc_pct <= 100.0
        assert verdict(
            "A8 report format",
            ok,
            f"AUC {report.auc_pct:.1f}% with Hit@{{5,10,20,40}}% columns "
            f"(reference magnitudes 76.9 / 38.1 documented, not asserted)",
        )
