import json
import re

import numpy as np
import pytest

from mgctm.baselines import LdaModel
from mgctm.cli import main
from mgctm.corpus import load_bow, load_labels
from mgctm.model import HyperConfig, init_model, random_model_params
from mgctm.serialize import load_hidden, load_model, save_lda, save_model


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_two_block_corpus(tmp_path, docs_per_block=6):
    """Corpus whose two halves use disjoint four-word vocabularies."""
    rows = []
    num_docs = 2 * docs_per_block
    for d in range(num_docs):
        base = 0 if d < docs_per_block else 4
        for w in range(base, base + 4):
            rows.append(f"{d + 1} {w + 1} {2 if w == base else 1}")
    bow = tmp_path / "corpus.bow"
    bow.write_text(f"{num_docs} 8 {len(rows)}\n" + "\n".join(rows) + "\n")
    labels = tmp_path / "corpus.labels"
    labels.write_text(
        "\n".join("0" if d < docs_per_block else "1" for d in range(num_docs)) + "\n"
    )
    vocab = tmp_path / "corpus.vocab"
    vocab.write_text("\n".join(f"w{i}" for i in range(8)) + "\n")
    return {"bow": str(bow), "labels": str(labels), "vocab": str(vocab)}


def synth_args(tmp_path, **over):
    paths = {
        "corpus": str(tmp_path / "s.bow"),
        "vocab": str(tmp_path / "s.vocab"),
        "labels": str(tmp_path / "s.labels"),
    }
    opts = {
        "clusters": 2,
        "local_topics": 1,
        "global_topics": 1,
        "vocab_size": 12,
        "docs": 18,
        "doc_length": 25,
        "seed": 5,
    }
    opts.update(over)
    argv = [
        "synth",
        "--corpus", paths["corpus"],
        "--vocab", paths["vocab"],
        "--labels", paths["labels"],
        "--clusters", str(opts["clusters"]),
        "--local-topics", str(opts["local_topics"]),
        "--global-topics", str(opts["global_topics"]),
        "--vocab-size", str(opts["vocab_size"]),
        "--docs", str(opts["docs"]),
        "--doc-length", str(opts["doc_length"]),
        "--seed", str(opts["seed"]),
    ]
    return argv, paths


class TestSynth:
    def test_writes_loadable_corpus(self, tmp_path, capsys):
        argv, paths = synth_args(tmp_path)
        hidden = str(tmp_path / "s.hidden")
        code, out, err = run(capsys, *argv, "--hidden", hidden)
        assert code == 0
        assert out == "documents=18 vocab=12\n"
        corpus = load_bow(
            paths["corpus"], vocab_path=paths["vocab"], labels_path=paths["labels"]
        )
        assert corpus.num_docs == 18
        assert corpus.vocab.tokens[0] == "w0"
        truth = load_labels(paths["labels"])
        np.testing.assert_array_equal(corpus.labels(), truth)
        loaded = load_hidden(hidden)
        np.testing.assert_array_equal(loaded.cluster, truth)

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        argv, paths = synth_args(tmp_path)
        assert run(capsys, *argv)[0] == 0
        first = {k: open(v, "rb").read() for k, v in paths.items()}
        assert run(capsys, *argv)[0] == 0
        second = {k: open(v, "rb").read() for k, v in paths.items()}
        assert first == second

    def test_zero_docs_rejected_without_output(self, tmp_path, capsys):
        argv, paths = synth_args(tmp_path, docs=0)
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert "error:" in err
        assert not (tmp_path / "s.bow").exists()

    def test_params_file_source(self, tmp_path, capsys):
        params = random_model_params(2, 2, 1, 9, seed=1)
        model_path = str(tmp_path / "gen.json")
        save_model(params, model_path)
        code, out, _ = run(
            capsys,
            "synth",
            "--corpus", str(tmp_path / "p.bow"),
            "--vocab", str(tmp_path / "p.vocab"),
            "--labels", str(tmp_path / "p.labels"),
            "--params", model_path,
            "--docs", "7",
            "--doc-length", "11",
        )
        assert code == 0
        assert out == "documents=7 vocab=9\n"

    def test_missing_required_flag(self, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "synth",
            "--corpus", str(tmp_path / "x.bow"),
            "--vocab", str(tmp_path / "x.vocab"),
            "--labels", str(tmp_path / "x.labels"),
            "--clusters", "2",
            "--local-topics", "1",
            "--global-topics", "1",
            "--vocab-size", "5",
            "--doc-length", "10",
        )
        assert code == 2
        assert "--docs is required" in err


class TestTrain:
    def train_args(self, tmp_path, capsys, model="model.json", **over):
        argv, paths = synth_args(tmp_path)
        assert main(argv) == 0
        capsys.readouterr()
        model_path = str(tmp_path / model)
        flags = {
            "clusters": "2",
            "local-topics": "1",
            "global-topics": "1",
            "max-em-iters": "3",
            "e-step-iters": "3",
            "tol": "0",
        }
        flags.update({k.replace("_", "-"): str(v) for k, v in over.items()})
        argv = ["train", "--corpus", paths["corpus"], "--model", model_path]
        for key, value in flags.items():
            argv += [f"--{key}", value]
        return argv, model_path, paths

    def test_prints_trace_and_saves_model(self, tmp_path, capsys):
        argv, model_path, _ = self.train_args(tmp_path, capsys)
        code, out, _ = run(capsys, *argv)
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 5
        for i, line in enumerate(lines[:4]):
            assert re.fullmatch(rf"iter={i} elbo=-?\d+\.\d{{6}}", line)
        assert lines[4] == "converged=false iterations=3"
        values = [float(l.split("elbo=")[1]) for l in lines[:4]]
        assert values == sorted(values)
        params, report = load_model(model_path)
        assert report.iterations_run == 3
        assert len(report.elbo_trace) == 4
        params.validate()

    def test_zero_iterations_saves_initial_model(self, tmp_path, capsys):
        argv, model_path, paths = self.train_args(tmp_path, capsys, max_em_iters="0")
        code, out, _ = run(capsys, *argv)
        assert code == 0
        saved, _ = load_model(model_path)
        corpus = load_bow(paths["corpus"])
        config = HyperConfig(2, 1, 1, seed=0)
        expected, _ = init_model(config, corpus)
        np.testing.assert_array_equal(saved.local_topics, expected.local_topics)
        np.testing.assert_array_equal(saved.global_topics, expected.global_topics)
        np.testing.assert_array_equal(saved.pi, expected.pi)

    def test_missing_corpus_flag_writes_nothing(self, tmp_path, capsys):
        model_path = str(tmp_path / "m.json")
        code, _, err = run(
            capsys,
            "train",
            "--model", model_path,
            "--clusters", "2",
            "--local-topics", "1",
            "--global-topics", "1",
        )
        assert code == 2
        assert "--corpus is required" in err
        assert not (tmp_path / "m.json").exists()

    def test_nonexistent_corpus_path(self, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "train",
            "--corpus", str(tmp_path / "missing.bow"),
            "--model", str(tmp_path / "m.json"),
            "--clusters", "2",
            "--local-topics", "1",
            "--global-topics", "1",
        )
        assert code == 2
        assert "error:" in err

    def test_lda_naive_init(self, tmp_path, capsys):
        argv, model_path, _ = self.train_args(
            tmp_path, capsys, **{"init": "lda-naive", "max_em_iters": "2"}
        )
        code, out, _ = run(capsys, *argv)
        assert code == 0
        assert "converged=" in out

    def test_config_file_fills_unset_flags(self, tmp_path, capsys):
        argv, paths = synth_args(tmp_path)
        assert main(argv) == 0
        capsys.readouterr()
        config_path = tmp_path / "run.json"
        config_path.write_text(
            json.dumps(
                {
                    "format": "run-config",
                    "version": 1,
                    "clusters": 2,
                    "local_topics": 1,
                    "global_topics": 1,
                    "max_em_iters": 2,
                    "e_step_iters": 2,
                    "tol": 0.0,
                }
            )
        )
        model_path = str(tmp_path / "m.json")
        code, out, _ = run(
            capsys,
            "train",
            "--corpus", paths["corpus"],
            "--model", model_path,
            "--config", str(config_path),
        )
        assert code == 0
        assert out.count("iter=") == 3

        # An explicit flag beats the config file.
        code, out, _ = run(
            capsys,
            "train",
            "--corpus", paths["corpus"],
            "--model", model_path,
            "--config", str(config_path),
            "--max-em-iters", "1",
        )
        assert code == 0
        assert out.count("iter=") == 2

    def test_config_unknown_key_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text(
            json.dumps({"format": "run-config", "version": 1, "bogus": 3})
        )
        code, _, err = run(
            capsys,
            "train",
            "--corpus", "whatever.bow",
            "--model", "m.json",
            "--config", str(config_path),
        )
        assert code == 2
        assert "unknown keys" in err

    def test_config_bad_json_and_format(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code, _, err = run(capsys, "train", "--config", str(bad))
        assert code == 2
        assert "not valid JSON" in err

        wrong = tmp_path / "wrong.json"
        wrong.write_text(json.dumps({"format": "something-else", "version": 1}))
        code, _, err = run(capsys, "train", "--config", str(wrong))
        assert code == 2
        assert "run-config" in err

    def test_unknown_flag_returns_parse_error(self, capsys):
        code = main(["train", "--frobnicate", "1"])
        capsys.readouterr()
        assert code == 2


class TestEval:
    def test_kmeans_on_separable_corpus(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, out, _ = run(
            capsys,
            "eval",
            "--method", "kmeans",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
        )
        assert code == 0
        assert out == "ac=100.00\nnmi=100.00\n"

    def test_single_cluster_scores_zero_nmi(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, out, _ = run(
            capsys,
            "eval",
            "--method", "kmeans",
            "--clusters", "1",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
        )
        assert code == 0
        assert out == "ac=50.00\nnmi=0.00\n"

    def test_mgctm_train_then_eval(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        model_path = str(tmp_path / "m.json")
        code, _, _ = run(
            capsys,
            "train",
            "--corpus", paths["bow"],
            "--model", model_path,
            "--clusters", "2",
            "--local-topics", "1",
            "--global-topics", "1",
            "--max-em-iters", "12",
            "--e-step-iters", "5",
            "--tol", "0",
        )
        assert code == 0
        code, out, _ = run(
            capsys,
            "eval",
            "--method", "mgctm",
            "--model", model_path,
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
        )
        assert code == 0
        match = re.fullmatch(r"ac=(\d+\.\d{2})\nnmi=(\d+\.\d{2})\n", out)
        assert match
        assert float(match.group(1)) >= 90.0

    def test_mgctm_vocab_mismatch(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        model_path = str(tmp_path / "m.json")
        save_model(random_model_params(2, 1, 1, 5), model_path)
        code, _, err = run(
            capsys,
            "eval",
            "--method", "mgctm",
            "--model", model_path,
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
        )
        assert code == 2
        assert "vocabulary sizes differ" in err

    def test_lda_naive_from_saved_model(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        theta = np.zeros((12, 2)) + 0.1
        theta[:6, 0] = 5.0
        theta[6:, 1] = 5.0
        lda_path = str(tmp_path / "lda.json")
        save_lda(LdaModel(np.full((2, 8), 0.125), theta, 0.1), lda_path)
        code, out, _ = run(
            capsys,
            "eval",
            "--method", "lda-naive",
            "--model", lda_path,
            "--labels", paths["labels"],
        )
        assert code == 0
        assert out == "ac=100.00\nnmi=100.00\n"

    def test_prediction_label_count_mismatch(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        theta = np.ones((5, 2))
        lda_path = str(tmp_path / "lda.json")
        save_lda(LdaModel(np.full((2, 8), 0.125), theta, 0.1), lda_path)
        code, _, err = run(
            capsys,
            "eval",
            "--method", "lda-naive",
            "--model", lda_path,
            "--labels", paths["labels"],
        )
        assert code == 2
        assert "5 predictions for 12 labels" in err

    def test_empty_labels_rejected(self, tmp_path, capsys):
        labels = tmp_path / "empty.labels"
        labels.write_text("")
        code, _, err = run(
            capsys, "eval", "--method", "kmeans", "--labels", str(labels)
        )
        assert code == 2
        assert "empty" in err

    def test_method_required(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, _, err = run(capsys, "eval", "--labels", paths["labels"])
        assert code == 2
        assert "--method is required" in err


class TestTopics:
    def make_model(self, tmp_path):
        local = np.zeros((2, 1, 4))
        local[0, 0] = [0.0, 0.0, 0.0, 1.0]
        local[1, 0] = [0.1, 0.2, 0.3, 0.4]
        glob = np.array([[0.25, 0.25, 0.25, 0.25]])
        from mgctm.model import ModelParams

        params = ModelParams(
            pi=np.array([0.5, 0.5]),
            gamma=np.array([1.0, 1.0]),
            local_priors=np.ones((2, 1)),
            global_prior=np.ones(1),
            local_topics=local,
            global_topics=glob,
        )
        model_path = str(tmp_path / "m.json")
        save_model(params, model_path)
        vocab_path = tmp_path / "v.vocab"
        vocab_path.write_text("ant\nbee\ncat\ndog\n")
        return model_path, str(vocab_path)

    def test_full_listing(self, tmp_path, capsys):
        model_path, vocab_path = self.make_model(tmp_path)
        code, out, _ = run(
            capsys,
            "topics",
            "--model", model_path,
            "--vocab", vocab_path,
            "--top-n", "2",
        )
        assert code == 0
        assert out.split("\n") == [
            "# global topics",
            "topic 0: ant bee",
            "# cluster 0 local topics",
            "topic 0: dog ant",
            "# cluster 1 local topics",
            "topic 0: dog cat",
            "",
        ]

    def test_scope_global_only(self, tmp_path, capsys):
        model_path, vocab_path = self.make_model(tmp_path)
        code, out, _ = run(
            capsys,
            "topics",
            "--model", model_path,
            "--vocab", vocab_path,
            "--scope", "global",
        )
        assert code == 0
        assert "# global topics" in out
        assert "local topics" not in out

    def test_scope_local_single_cluster(self, tmp_path, capsys):
        model_path, vocab_path = self.make_model(tmp_path)
        code, out, _ = run(
            capsys,
            "topics",
            "--model", model_path,
            "--vocab", vocab_path,
            "--scope", "local",
            "--cluster", "1",
        )
        assert code == 0
        assert "# cluster 1 local topics" in out
        assert "# cluster 0" not in out
        assert "# global topics" not in out

    def test_top_n_capped_at_vocab(self, tmp_path, capsys):
        model_path, vocab_path = self.make_model(tmp_path)
        code, out, _ = run(
            capsys,
            "topics",
            "--model", model_path,
            "--vocab", vocab_path,
            "--scope", "global",
            "--top-n", "99",
        )
        assert code == 0
        assert "topic 0: ant bee cat dog" in out

    def test_cluster_out_of_range(self, tmp_path, capsys):
        model_path, vocab_path = self.make_model(tmp_path)
        code, _, err = run(
            capsys,
            "topics",
            "--model", model_path,
            "--vocab", vocab_path,
            "--cluster", "7",
        )
        assert code == 2
        assert "out of range" in err

    def test_vocab_size_mismatch(self, tmp_path, capsys):
        model_path, _ = self.make_model(tmp_path)
        short = tmp_path / "short.vocab"
        short.write_text("ant\nbee\n")
        code, _, err = run(
            capsys, "topics", "--model", model_path, "--vocab", str(short)
        )
        assert code == 2
        assert "model expects 4" in err


class TestBench:
    def test_two_methods_two_seeds(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        out_path = tmp_path / "report.tsv"
        code, out, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "kmeans,lda-naive",
            "--seeds", "0,1",
            "--out", str(out_path),
            "--max-em-iters", "15",
        )
        assert code == 0
        lines = out_path.read_text().strip().split("\n")
        assert lines[0] == "method\tseed\tac\tnmi\tstatus"
        assert lines[1] == "kmeans\t0\t100.00\t100.00\tok"
        assert lines[2] == "kmeans\t1\t100.00\t100.00\tok"
        assert lines[3] == "kmeans\tmean\t100.00\t100.00\tok"
        assert lines[4].startswith("lda-naive\t0\t")
        assert lines[6].startswith("lda-naive\tmean\t")
        assert len(lines) == 7
        assert "kmeans.ac=100.00" in out
        assert "kmeans.nmi=100.00" in out
        assert "lda-naive.ac=" in out

    def test_duplicate_method_warned_and_deduped(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        out_path = tmp_path / "report.tsv"
        code, _, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "kmeans,kmeans",
            "--out", str(out_path),
        )
        assert code == 0
        assert "duplicate method 'kmeans' ignored" in err
        lines = out_path.read_text().strip().split("\n")
        assert len(lines) == 3

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        out_path = tmp_path / "report.tsv"
        argv = (
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "kmeans,lda-kmeans",
            "--lda-topics", "2",
            "--max-em-iters", "10",
            "--out", str(out_path),
        )
        assert run(capsys, *argv)[0] == 0
        first = out_path.read_bytes()
        assert run(capsys, *argv)[0] == 0
        assert out_path.read_bytes() == first

    def test_mgctm_method_runs(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        out_path = tmp_path / "report.tsv"
        code, out, _ = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "mgctm",
            "--max-em-iters", "5",
            "--out", str(out_path),
        )
        assert code == 0
        assert "mgctm.ac=" in out
        lines = out_path.read_text().strip().split("\n")
        assert lines[1].startswith("mgctm\t0\t")

    def test_partial_failure_reports_and_exits_nonzero(self, tmp_path, capsys):
        rows = ["1 1 2", "1 2 1", "2 3 2", "2 4 1"]
        bow = tmp_path / "tiny.bow"
        bow.write_text("2 4 4\n" + "\n".join(rows) + "\n")
        labels = tmp_path / "tiny.labels"
        labels.write_text("0\n1\n")
        out_path = tmp_path / "report.tsv"
        code, out, err = run(
            capsys,
            "bench",
            "--corpus", str(bow),
            "--labels", str(labels),
            "--methods", "kmeans,lda-naive",
            "--clusters", "3",
            "--max-em-iters", "5",
            "--out", str(out_path),
        )
        assert code == 1
        assert "kmeans seed=0 failed" in err
        lines = out_path.read_text().strip().split("\n")
        assert "kmeans\t0\t-\t-\tfailed" in lines
        assert "kmeans\tmean\t-\t-\tfailed" in lines
        assert any(l.startswith("lda-naive\t0\t") and l.endswith("ok") for l in lines)
        assert "kmeans.ac=" not in out
        assert "lda-naive.ac=" in out

    def test_unknown_method_rejected(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, _, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "qmeans",
            "--out", str(tmp_path / "r.tsv"),
        )
        assert code == 2
        assert "unknown method" in err

    def test_empty_method_list_rejected(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, _, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", ",",
            "--out", str(tmp_path / "r.tsv"),
        )
        assert code == 2
        assert "selected nothing" in err

    def test_bad_seed_list_rejected(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        code, _, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", paths["labels"],
            "--methods", "kmeans",
            "--seeds", "0,x",
            "--out", str(tmp_path / "r.tsv"),
        )
        assert code == 2
        assert "--seeds must be integers" in err

    def test_label_count_mismatch_rejected(self, tmp_path, capsys):
        paths = write_two_block_corpus(tmp_path)
        bad_labels = tmp_path / "bad.labels"
        bad_labels.write_text("0\n1\n")
        code, _, err = run(
            capsys,
            "bench",
            "--corpus", paths["bow"],
            "--labels", str(bad_labels),
            "--methods", "kmeans",
            "--out", str(tmp_path / "r.tsv"),
        )
        assert code == 2
        assert "labels file has 2 entries for 12 documents" in err
