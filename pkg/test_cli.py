"""
Pruebas de extremo a extremo de la CLI: códigos de salida, cabeceras de
reproducibilidad, determinismo y el circuito completo sobre colecciones
sintéticas.
"""

import json
import logging
import math

import pytest
from pydantic import ValidationError

from qpplab import __version__
from qpplab.commands.common import experiment_config, read_fold_models
from qpplab.main import build_parser, main
from qpplab.schemas.experiment import ExperimentConfig
from qpplab.schemas.reports import CorrelationRecord, CorrelationReport
from qpplab.schemas.stats import CorrelationResult, Marker
from qpplab.services.reporting import parse_records, records_to_tsv
from qpplab.services.synth import PREDICTOR_COLUMN

RUN = """q1 Q0 d1 1 3.0 bm25
q1 Q0 d2 2 2.0 bm25
q1 Q0 d3 3 1.0 bm25
q2 Q0 d4 1 5.0 bm25
q2 Q0 d5 2 4.0 bm25
"""

QRELS = """q1 0 d1 1
q2 0 d5 2
"""


@pytest.fixture(autouse=True)
def restore_logging():
    """main() reconfigura el logging raíz; se restaura al terminar cada prueba."""
    root = logging.getLogger()
    handlers = root.handlers[:]
    level = root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def _data_lines(path):
    return [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]


# ============================================================
# EVAL Y CÓDIGOS DE SALIDA
# ============================================================

def test_eval_writes_header_and_table(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    qrels = _write(tmp_path / "qrels.txt", QRELS)
    out = tmp_path / "eval.tsv"
    assert main(["eval", "--run", run, "--qrels", qrels, "--measures", "P@2,MRR@10", "--out", str(out)]) == 0

    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith(f"# qpplab {__version__} eval seed=0 flags=")
    assert lines[1:] == ["qid\tP@2\tMRR@10", "q1\t0.5\t1.0", "q2\t0.5\t0.5", "MEAN\t0.5\t0.75"]


def test_eval_is_thread_independent(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    qrels = _write(tmp_path / "qrels.txt", QRELS)
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"eval_{threads}.tsv"
        assert main(["eval", "--run", run, "--qrels", qrels, "--threads", threads, "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_malformed_run_exits_with_parse_code(tmp_path):
    run = _write(tmp_path / "run.txt", "q1 Q0 d1 uno 3.0 bm25\n")
    qrels = _write(tmp_path / "qrels.txt", QRELS)
    assert main(["eval", "--run", run, "--qrels", qrels]) == 2


def test_disjoint_queries_exit_with_alignment_code(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    qrels = _write(tmp_path / "qrels.txt", "q9 0 d1 1\n")
    assert main(["eval", "--run", run, "--qrels", qrels]) == 3


def test_duplicate_feature_column_exits_with_merge_code(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    a = _write(tmp_path / "a.tsv", "qid\tB_bi\nq1\t0.1\nq2\t0.2\n")
    b = _write(tmp_path / "b.tsv", "qid\tB_bi\nq1\t0.3\nq2\t0.4\n")
    assert main(["predict", "--run", run, "--features", f"{a},{b}"]) == 4


def test_usage_errors_exit_with_one(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    assert main(["eval", "--run", run, "--qrels", str(tmp_path / "missing.txt")]) == 1
    assert main(["predict", "--run", run]) == 1
    assert main(["eval", "--run", run]) == 1
    assert main(["nope"]) == 1


def test_version_flag():
    assert main(["--version"]) == 0


def test_predict_sota_markdown(tmp_path, capsys):
    run = _write(tmp_path / "run.txt", RUN)
    corpus = _write(tmp_path / "corpus.tsv", "qid\ts_corpus\nq1\t2.0\nq2\t1.0\n")
    assert main(["predict", "--run", run, "--sota", "--corpus-scores", corpus,
                 "--k-uqc", "2", "--k-nqc", "2", "--k-wig", "1", "--format", "markdown"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "| qid | UQC | NQC | WIG |"
    assert lines[3] == "| q1 | 0.500 | 0.250 | 1.000 |"


def test_wig_variant_tokens(tmp_path):
    """El token documentado de la variante por defecto es paper_mean_diff."""
    run = _write(tmp_path / "run.txt", RUN)
    corpus = _write(tmp_path / "corpus.tsv", "qid\ts_corpus\nq1\t2.0\nq2\t1.0\n")
    base = ["predict", "--run", run, "--sota", "--corpus-scores", corpus, "--k-wig", "1"]
    default, explicit = tmp_path / "default.tsv", tmp_path / "explicit.tsv"
    assert main(base + ["--out", str(default)]) == 0
    assert main(base + ["--wig-variant", "paper_mean_diff", "--out", str(explicit)]) == 0
    assert _data_lines(default)[1:] == _data_lines(explicit)[1:]
    assert main(base + ["--wig-variant", "classic", "--out", str(tmp_path / "classic.tsv")]) == 0
    assert main(base + ["--wig-variant", "mean_diff"]) == 1


# ============================================================
# ARCHIVO DE CONFIGURACIÓN
# ============================================================

def test_config_file_overrides_flags(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    qrels = _write(tmp_path / "qrels.txt", QRELS)
    config = _write(tmp_path / "exp.conf", "# experimento\nmeasures = P@1\nformat=tsv\n")
    out = tmp_path / "eval.tsv"
    assert main(["eval", "--run", run, "--qrels", qrels, "--measures", "P@2",
                 "--config", config, "--out", str(out)]) == 0
    assert _data_lines(out)[0] == "qid\tP@1"
    assert '"measures":["P@1"]' in out.read_text(encoding="utf-8").splitlines()[0]


def test_config_file_unknown_key(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    qrels = _write(tmp_path / "qrels.txt", QRELS)
    config = _write(tmp_path / "exp.conf", "learning_rate=0.1\n")
    assert main(["eval", "--run", run, "--qrels", qrels, "--config", config]) == 1


# ============================================================
# SYNTH Y CIRCUITO COMPLETO
# ============================================================

def _synth(directory, seed, informativeness, n_queries=40):
    return main(["synth", "--seed", str(seed), "--n-queries", str(n_queries), "--n-docs", "20",
                 "--informativeness", str(informativeness), "--out", str(directory)])


def _predictor_correlation(tmp_path, directory):
    evals = tmp_path / f"{directory.name}_eval.tsv"
    records = tmp_path / f"{directory.name}_records.tsv"
    assert main(["eval", "--run", str(directory / "run_r1.txt"), "--qrels", str(directory / "qrels.txt"),
                 "--measures", "NDCG", "--out", str(evals)]) == 0
    assert main(["correlate", "--features", str(directory / "predictor_r1.tsv"), "--evals", str(evals),
                 "--coefficient", "pearson", "--out", str(records)]) == 0
    report = parse_records(records.read_text(encoding="utf-8"))
    assert len(report.records) == 1
    assert report.records[0].predictor == PREDICTOR_COLUMN
    return report.records[0].result


def test_synth_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _synth(first, 7, 0.5, n_queries=10) == 0
    assert _synth(second, 7, 0.5, n_queries=10) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()
    manifest = json.loads((first / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["params"]["seed"] == 7
    assert manifest["header"].startswith("# qpplab")


def test_synth_rejects_invalid_parameters(tmp_path):
    assert _synth(tmp_path / "bad", 0, 1.5) == 1
    assert main(["synth", "--n-queries", "2", "--out", str(tmp_path / "bad2")]) == 1
    assert main(["synth"]) == 1


def test_informative_synthetic_predictor_correlates(tmp_path):
    """Con informatividad 1 el predictor sigue a NDCG en las 20 semillas."""
    for seed in range(20):
        directory = tmp_path / f"informative{seed}"
        assert _synth(directory, seed, 1.0, n_queries=200) == 0
        result = _predictor_correlation(tmp_path, directory)
        assert result.coefficient >= 0.95
        assert result.marker == Marker.ddagger


def test_uninformative_synthetic_predictor_is_mostly_not_significant(tmp_path):
    """Con informatividad 0 el predictor queda sin marcador en al menos 18 de 20 semillas."""
    not_significant = 0
    for seed in range(20):
        directory = tmp_path / f"null{seed}"
        assert _synth(directory, 100 + seed, 0.0, n_queries=200) == 0
        result = _predictor_correlation(tmp_path, directory)
        if result.marker == Marker.none:
            assert result.p_value >= 0.05
            not_significant += 1
    assert not_significant >= 18


def test_synth_feeds_predict_with_every_family(tmp_path):
    directory = tmp_path / "full"
    assert _synth(directory, 11, 1.0, n_queries=12) == 0
    out = tmp_path / "features.tsv"
    assert main([
        "predict", "--run", str(directory / "run_r1.txt"), "--sota",
        "--corpus-scores", str(directory / "corpus_scores.tsv"),
        "--term-stats", str(directory / "term_stats.tsv"),
        "--feedback-run", str(directory / "run_r1_fb.txt"), "--qf-depth", "10",
        "--letor", "--letor-sidecar", str(directory / "letor.tsv"), "--letor-k", "10",
        "--aggregators", "Mean,Max",
        "--features", str(directory / "predictor_r1.tsv"),
        "--out", str(out),
    ]) == 0
    header = _data_lines(out)[0].split("\t")
    assert header[:5] == ["qid", "UQC", "NQC", "WIG", "QF"]
    assert header[-1] == PREDICTOR_COLUMN
    assert len(_data_lines(out)) == 13


# ============================================================
# REGRESS, SELECT Y ANOVA
# ============================================================

def _tables(tmp_path, n=20):
    qids = [f"q{i:02d}" for i in range(n)]
    ndcg = [((i * 37) % n) / n for i in range(n)]
    features = "qid\tUQC\n" + "".join(f"{q}\t{v!r}\n" for q, v in zip(qids, ndcg))
    evals = "qid\tNDCG\n" + "".join(f"{q}\t{v!r}\n" for q, v in zip(qids, ndcg))
    lower = "qid\tNDCG\n" + "".join(f"{q}\t{v / 2!r}\n" for q, v in zip(qids, ndcg))
    return (_write(tmp_path / "features.tsv", features), _write(tmp_path / "evals.tsv", evals),
            _write(tmp_path / "lower.tsv", lower))


def test_regress_recovers_identical_feature(tmp_path):
    features, evals, _ = _tables(tmp_path)
    out = tmp_path / "errors.tsv"
    predictions = tmp_path / "predictions.tsv"
    assert main(["regress", "--features", features, "--evals", evals, "--learners", "lr",
                 "--predictions-out", str(predictions), "--out", str(out)]) == 0
    row = _data_lines(out)[1].split("\t")
    assert row[:3] == ["All", "lr", "NDCG"]
    assert float(row[3]) == pytest.approx(1.0, abs=1e-9)
    assert float(row[5]) == pytest.approx(0.0, abs=1e-9)
    assert _data_lines(predictions)[0] == "qid\tAll/lr"


def test_regress_rejects_unknown_learner(tmp_path):
    features, evals, _ = _tables(tmp_path)
    assert main(["regress", "--features", features, "--evals", evals, "--learners", "svm"]) == 1


def test_select_with_dominated_ranker(tmp_path):
    features, evals, lower = _tables(tmp_path)
    out = tmp_path / "summary.tsv"
    choices = tmp_path / "choices.tsv"
    sweep = tmp_path / "sweep.tsv"
    assert main(["select", "--evals1", evals, "--evals2", lower, "--predictor", features,
                 "--predictor-r1", features, "--predictor-r2", features,
                 "--sweep-out", str(sweep), "--choices-out", str(choices), "--out", str(out)]) == 0
    rows = {line.split("\t")[0]: line.split("\t") for line in _data_lines(out)[1:]}
    assert rows["Oracle"][1] == rows["R1"][1]
    assert float(rows["Oracle"][2]) == 0.0
    choice_lines = _data_lines(choices)
    assert choice_lines[0] == "qid\toracle\tthreshold\tpairwise"
    assert all(line.split("\t")[1] == "R1" for line in choice_lines[1:])
    assert _data_lines(sweep)[0] == "T\tmean_meta\tfraction_R2"


def test_select_requires_paired_predictors(tmp_path):
    features, evals, lower = _tables(tmp_path)
    assert main(["select", "--evals1", evals, "--evals2", lower, "--predictor-r1", features]) == 1


def test_anova_on_correlation_records(tmp_path):
    a = math.sqrt(4.554 / 3040)
    d = math.sqrt(6.662 / 608)
    records = []
    for label, k in zip(("C1", "C2", "C3", "C4"), (-3, -1, 1, 3)):
        for i in range(152):
            value = k * a + (d if i % 2 == 0 else -d)
            records.append(CorrelationRecord(
                ranker=f"R{i % 8}", collection=label, predictor=f"P{i}", measure="NDCG",
                coefficient="pearson",
                result=CorrelationResult(coefficient=value, p_value=0.5, n=100, marker=Marker.none),
            ))
    path = _write(tmp_path / "records.tsv", records_to_tsv(CorrelationReport(records=records)))
    out = tmp_path / "anova.tsv"
    assert main(["anova", "--records", path, "--factors", "collection", "--out", str(out)]) == 0
    row = _data_lines(out)[1].split("\t")
    assert row[:2] == ["Collection", "3"]
    assert float(row[4]) == pytest.approx(137.6, abs=0.5)
    assert float(row[5]) < 2e-16


def test_report_boxplot_from_records(tmp_path):
    records = [
        CorrelationRecord(ranker=r, collection=c, predictor="UQC", measure="NDCG", coefficient="pearson",
                          result=CorrelationResult(coefficient=v, p_value=0.5, n=50, marker=Marker.none))
        for r, c, v in (("BM25", "C1", 0.1), ("BM25", "C2", 0.2), ("QL", "C1", 0.4), ("QL", "C2", 0.5))
    ]
    path = _write(tmp_path / "records.tsv", records_to_tsv(CorrelationReport(records=records)))
    out = tmp_path / "box.tsv"
    assert main(["report", "--records", path, "--kind", "boxplot", "--out", str(out)]) == 0
    lines = _data_lines(out)
    assert lines[0] == "group\tn\tmin\tq1\tmedian\tq3\tmax"
    assert [line.split("\t")[0] for line in lines[1:]] == ["QL", "BM25"]


# ============================================================
# CONFIGURACIÓN EFECTIVA
# ============================================================

def test_experiment_config_from_flags(tmp_path):
    run = _write(tmp_path / "run.txt", RUN)
    corpus = _write(tmp_path / "corpus.tsv", "qid\ts_corpus\nq1\t2.0\n")
    args = build_parser().parse_args(["predict", "--run", run, "--sota", "--corpus-scores", corpus,
                                      "--k-wig", "3", "--seed", "9"])
    experiment = experiment_config(args)
    assert experiment.inputs == {"run": (run,), "corpus_scores": (corpus,)}
    assert experiment.predictor.k_wig == 3
    assert experiment.forest is None
    assert experiment.seed == 9


def test_experiment_config_requires_existing_inputs(tmp_path):
    with pytest.raises(ValidationError):
        ExperimentConfig(command="eval", inputs={"run": (str(tmp_path / "missing.txt"),)})
    run = _write(tmp_path / "run.txt", RUN)
    assert main(["predict", "--run", run, "--sota", "--corpus-scores", run, "--k-nqc", "0"]) == 1


# ============================================================
# MODELOS GUARDADOS Y TABLA DE T-TESTS
# ============================================================

def _routing_features(tmp_path, directory):
    """Features SOTA de R1 y R2 sobre una colección sintética."""
    paths = []
    for ranker in ("r1", "r2"):
        out = tmp_path / f"features_{ranker}.tsv"
        assert main(["predict", "--run", str(directory / f"run_{ranker}.txt"), "--sota",
                     "--corpus-scores", str(directory / "corpus_scores.tsv"), "--out", str(out)]) == 0
        paths.append(str(out))
    return paths


def _routing_evals(tmp_path, directory):
    paths = []
    for ranker in ("r1", "r2"):
        out = tmp_path / f"eval_{ranker}.tsv"
        assert main(["eval", "--run", str(directory / f"run_{ranker}.txt"), "--qrels", str(directory / "qrels.txt"),
                     "--measures", "NDCG", "--out", str(out)]) == 0
        paths.append(str(out))
    return paths


def test_regress_model_out_writes_loadable_fold_models(tmp_path):
    features, evals, _ = _tables(tmp_path)
    models = tmp_path / "models"
    assert main(["regress", "--features", features, "--evals", evals, "--learners", "lr",
                 "--model-out", str(models), "--out", str(tmp_path / "errors.tsv")]) == 0
    cross = read_fold_models(str(models / "All_lr.json"))
    assert cross.model_a.feature_names == ("UQC",)
    assert sorted(cross.training_ids("a") + cross.training_ids("b")) == [f"q{i:02d}" for i in range(20)]


def test_select_replays_saved_models(tmp_path):
    directory = tmp_path / "coll"
    assert _synth(directory, 21, 0.7, n_queries=30) == 0
    f1, f2 = _routing_features(tmp_path, directory)
    e1, e2 = _routing_evals(tmp_path, directory)
    base = ["select", "--evals1", e1, "--evals2", e2, "--features-r1", f1, "--features-r2", f2]
    models = tmp_path / "models"
    fitted, replayed = tmp_path / "fitted.tsv", tmp_path / "replayed.tsv"
    assert main(base + ["--model-out", str(models), "--out", str(fitted)]) == 0
    assert main(base + ["--models-r1", str(models / "R1.json"), "--models-r2", str(models / "R2.json"),
                        "--out", str(replayed)]) == 0

    def learned_rows(path):
        return [line.split("\t")[1:] for line in _data_lines(path) if line.startswith("learned")]

    assert learned_rows(fitted)
    assert learned_rows(fitted) == learned_rows(replayed)
    lines = _data_lines(fitted)
    assert "system\tbaseline\tt\tdf\tp\tp_bonferroni\tm" in lines
    paired = lines[lines.index("system\tbaseline\tt\tdf\tp\tp_bonferroni\tm") + 1:]
    assert [row.split("\t")[1] for row in paired] == ["R1", "R2"]
    assert all(row.split("\t")[-1] in ("2", "n/a") for row in paired)


def test_select_models_flags_go_together(tmp_path):
    features, evals, lower = _tables(tmp_path)
    base = ["select", "--evals1", evals, "--evals2", lower]
    assert main(base + ["--features-r1", features, "--features-r2", features,
                        "--models-r1", str(tmp_path / "R1.json")]) == 1
    assert main(base + ["--models-r1", str(tmp_path / "R1.json"), "--models-r2", str(tmp_path / "R2.json")]) == 1


# ============================================================
# INDEPENDENCIA DEL NÚMERO DE HILOS
# ============================================================

def _same_output_for_threads(tmp_path, name, argv):
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"{name}_{threads}.tsv"
        assert main(argv + ["--threads", threads, "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_every_subcommand_is_thread_independent(tmp_path):
    directory = tmp_path / "coll"
    assert _synth(directory, 5, 0.6, n_queries=30) == 0
    f1, f2 = _routing_features(tmp_path, directory)
    e1, e2 = _routing_evals(tmp_path, directory)
    forest = ["--n-trees", "8", "--max-depth", "4", "--min-leaf", "2"]

    _same_output_for_threads(tmp_path, "predict", [
        "predict", "--run", str(directory / "run_r1.txt"), "--sota",
        "--corpus-scores", str(directory / "corpus_scores.tsv"),
        "--feedback-run", str(directory / "run_r1_fb.txt"), "--qf-depth", "10",
        "--letor", "--letor-sidecar", str(directory / "letor.tsv"), "--letor-k", "10",
    ])
    _same_output_for_threads(tmp_path, "correlate", ["correlate", "--features", f1, "--evals", e1])
    _same_output_for_threads(tmp_path, "regress", ["regress", "--features", f1, "--evals", e1,
                                                   "--learners", "lr,rf"] + forest)
    _same_output_for_threads(tmp_path, "select", [
        "select", "--evals1", e1, "--evals2", e2,
        "--predictor", str(directory / "predictor_r1.tsv"),
        "--predictor-r1", str(directory / "predictor_r1.tsv"), "--predictor-r2", str(directory / "predictor_r2.tsv"),
        "--features-r1", f1, "--features-r2", f2, "--learner", "rf",
    ] + forest)
