import numpy as np
import pytest

from wordshift.cli import (EXIT_INPUT, EXIT_MISSING_ARTIFACT, EXIT_OK,
                           EXIT_USAGE, main, parse_config_file)


@pytest.fixture
def toy_corpus(tmp_path):
    """Two-snapshot corpus where 'tape' changes its contexts in 1970."""
    rng = np.random.default_rng(77)
    left = [f"l{i}" for i in range(10)]
    right = [f"r{i}" for i in range(10)]

    def doc(words):
        return " ".join(rng.choice(words, size=8))

    snap0 = [doc(left + ["tape"]) for _ in range(120)]
    snap1 = [doc(left + ["tape"]) for _ in range(120)]
    (tmp_path / "c1950.txt").write_text("\n".join(snap0) + "\n")
    (tmp_path / "c1970.txt").write_text("\n".join(snap1) + "\n")
    manifest = tmp_path / "corpus.tsv"
    manifest.write_text("1950\tc1950.txt\n1970\tc1970.txt\n")
    return manifest


def run(args):
    return main([str(a) for a in args])


class TestTrain:
    def test_writes_embedding_files_with_header(self, toy_corpus, tmp_path):
        out = tmp_path / "out"
        code = run(["train", "--manifest", toy_corpus, "--dim", 8,
                    "--window", 2, "--epochs", 1, "--min-count", 2,
                    "--seed", 4, "--out", out])
        assert code == EXIT_OK
        for label in ("1950", "1970"):
            lines = (out / f"embeddings_{label}.txt").read_text().splitlines()
            vocab_size, dim = lines[0].split()
            assert dim == "8"
            assert len(lines) == int(vocab_size) + 1
        assert (out / "run_manifest.tsv").exists()

    def test_same_seed_identical_artifacts(self, toy_corpus, tmp_path):
        args = ["train", "--manifest", toy_corpus, "--dim", 8, "--window", 2,
                "--epochs", 1, "--min-count", 2, "--seed", 4, "--deterministic"]
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run(args + ["--out", out1]) == EXIT_OK
        assert run(args + ["--out", out2]) == EXIT_OK
        for f in ("embeddings_1950.txt", "embeddings_1970.txt"):
            assert (out1 / f).read_bytes() == (out2 / f).read_bytes()

    def test_unreadable_corpus_exits_2_without_partial_files(self, tmp_path):
        manifest = tmp_path / "corpus.tsv"
        manifest.write_text("1950\tmissing.txt\n")
        out = tmp_path / "out"
        assert run(["train", "--manifest", manifest, "--out", out]) == EXIT_INPUT
        assert not list(out.glob("embeddings_*")) if out.exists() else True

    def test_missing_manifest_flag_is_usage_error(self, tmp_path):
        assert run(["train", "--out", tmp_path / "o"]) == EXIT_USAGE


class TestDetect:
    def test_missing_embeddings_exit_3_names_file(self, toy_corpus, tmp_path, capsys):
        out = tmp_path / "out"
        code = run(["detect", "--manifest", toy_corpus, "--method",
                    "distributional", "--min-count", 2, "--out", out])
        assert code == EXIT_MISSING_ARTIFACT
        assert "embeddings_1950.txt" in capsys.readouterr().err

    def test_frequency_on_identical_snapshots_finds_nothing(self, tmp_path):
        text = "\n".join("a b c d e f" for _ in range(30)) + "\n"
        (tmp_path / "s.txt").write_text(text)
        manifest = tmp_path / "corpus.tsv"
        manifest.write_text("0\ts.txt\n1\ts.txt\n2\ts.txt\n")
        out = tmp_path / "out"
        code = run(["detect", "--manifest", manifest, "--method", "frequency",
                    "--min-count", 1, "--bootstrap", 200, "--out", out])
        assert code == EXIT_OK
        lines = (out / "report_frequency.csv").read_text().splitlines()
        assert all(line.split(",")[2] == "false" for line in lines[1:])

    def test_gamma_infinity_empties_significant_set(self, toy_corpus, tmp_path):
        out = tmp_path / "out"
        code = run(["detect", "--manifest", toy_corpus, "--method", "frequency",
                    "--min-count", 2, "--bootstrap", 100, "--gamma", "inf",
                    "--out", out])
        assert code == EXIT_OK
        lines = (out / "report_frequency.csv").read_text().splitlines()[1:]
        assert all(line.split(",")[2] == "false" for line in lines)
        assert all(float(line.split(",")[4]) == 1.0 for line in lines)

    def test_end_to_end_distributional(self, toy_corpus, tmp_path):
        out = tmp_path / "out"
        code = run(["detect", "--manifest", toy_corpus, "--method",
                    "frequency,distributional", "--min-count", 2, "--dim", 8,
                    "--window", 2, "--epochs", 1, "--bootstrap", 100,
                    "--end-to-end", "--out", out])
        assert code == EXIT_OK
        assert (out / "report_distributional.csv").exists()
        assert (out / "series_distributional.csv").exists()
        assert (out / "embeddings_1950.txt").exists()

    def test_detect_reports_byte_identical_across_runs(self, toy_corpus, tmp_path):
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            code = run(["detect", "--manifest", toy_corpus, "--method",
                        "frequency,distributional", "--min-count", 2,
                        "--dim", 8, "--window", 2, "--epochs", 1,
                        "--bootstrap", 200, "--seed", 9, "--deterministic",
                        "--end-to-end", "--out", out])
            assert code == EXIT_OK
            outs.append(out)
        for f in ("report_frequency.csv", "report_distributional.csv",
                  "series_distributional.csv"):
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()

    def test_syntactic_requires_tagged(self, toy_corpus, tmp_path):
        code = run(["detect", "--manifest", toy_corpus, "--method", "syntactic",
                    "--min-count", 2, "--out", tmp_path / "o"])
        assert code == EXIT_USAGE


class TestBench:
    def test_bad_grid_value_is_usage_error(self, tmp_path):
        code = run(["bench", "--p-grid", "0.5,1.5", "--out", tmp_path / "o"])
        assert code == EXIT_USAGE

    def test_unknown_method_is_usage_error(self, tmp_path):
        code = run(["bench", "--method", "quantum", "--out", tmp_path / "o"])
        assert code == EXIT_USAGE

    def test_tiny_generated_bench(self, tmp_path):
        out = tmp_path / "out"
        code = run(["bench", "--gen-tokens", 30000, "--snapshots", 4,
                    "--pairs", 2, "--p-grid", "1.0",
                    "--method", "frequency,distributional",
                    "--dim", 12, "--window", 3, "--epochs", 2,
                    "--subsample", "1e-4",
                    "--min-count", 3, "--bootstrap", 100, "--seed", 3,
                    "--out", out])
        assert code == EXIT_OK
        lines = (out / "bench_report.csv").read_text().splitlines()
        assert lines[0] == "method,p_replacement,pair_id,donor,receptor,rank,mrr_contrib"
        assert sum(1 for line in lines if ",summary," in line) == 2
        assert any(line.startswith("distributional,") for line in lines[1:])
        manifest = (out / "run_manifest.tsv").read_text()
        assert "bench_report" in manifest
        assert "bench_base_corpus" in manifest


class TestDetectPerturbed:
    def test_receptor_significant_on_step_perturbed_corpus(self, tmp_path):
        # materialized perturbation, independent of the bench wrappers:
        # every donor occurrence becomes the receptor in the later half
        from conftest import cross_topic_pair
        from wordshift.corpus import load_snapshot, build_common_vocabulary
        from wordshift.synthbench import duplicate_corpus
        from wordshift.textgen import GeneratorConfig, generate_corpus

        base_path = tmp_path / "base.txt"
        fw = generate_corpus(base_path, GeneratorConfig(
            tokens=60_000, topics=6, words_per_topic=50, function_words=40,
            seed=13))
        base = load_snapshot(base_path, label="base")
        vocab = build_common_vocabulary(duplicate_corpus(base, 6), 3)
        donor, receptor = cross_topic_pair(base, fw, vocab)

        perturbed_path = tmp_path / "perturbed.txt"
        text = base_path.read_text()
        perturbed_path.write_text("\n".join(
            " ".join(receptor if tok == donor else tok for tok in line.split())
            for line in text.splitlines()) + "\n")
        manifest = tmp_path / "corpus.tsv"
        manifest.write_text("".join(
            f"{t}\t{'base.txt' if t < 3 else 'perturbed.txt'}\n"
            for t in range(6)))

        out = tmp_path / "out"
        code = run(["detect", "--manifest", manifest, "--method",
                    "distributional", "--min-count", 3, "--dim", 16,
                    "--window", 4, "--subsample", "1e-4", "--epochs", 3,
                    "--bootstrap", 400, "--seed", 5, "--end-to-end",
                    "--out", out])
        assert code == EXIT_OK
        rows = (out / "report_distributional.csv").read_text().splitlines()[1:]
        receptor_row = next(r for r in rows if r.startswith(receptor + ","))
        _, _, significant, _, pvalue, _ = receptor_row.split(",")
        assert significant == "true"
        assert float(pvalue) < 0.05


class TestConfigFile:
    def test_parse_and_override(self, toy_corpus, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# toy run\n"
            f"manifest = {toy_corpus}\n"
            "dim = 8\n"
            "window = 2\n"
            "epochs = 1\n"
            "min_count = 2\n"
            "method = frequency\n"
        )
        values = parse_config_file(cfg)
        assert values["dim"] == 8
        assert values["method"] == ["frequency"]

        out = tmp_path / "out"
        code = run(["train", "--config", cfg, "--dim", 4, "--out", out])
        assert code == EXIT_OK
        header = (out / "embeddings_1950.txt").read_text().splitlines()[0]
        assert header.endswith(" 4")  # flag overrides file value

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frobnicate = 9\n")
        assert run(["train", "--config", cfg]) == EXIT_USAGE


class TestRunManifest:
    def test_checksums_match_files(self, toy_corpus, tmp_path):
        import hashlib
        out = tmp_path / "out"
        assert run(["train", "--manifest", toy_corpus, "--dim", 8,
                    "--window", 2, "--epochs", 1, "--min-count", 2,
                    "--out", out]) == EXIT_OK
        for line in (out / "run_manifest.tsv").read_text().splitlines():
            name, path, digest = line.split("\t")
            actual = hashlib.sha256(open(path, "rb").read()).hexdigest()
            assert actual == digest
