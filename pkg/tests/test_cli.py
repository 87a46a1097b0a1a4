"""End-to-end tests of the command-line interface and its exit codes."""

import hashlib
import json
import os

import numpy as np
import pytest

from lagonn.cli import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, EXIT_PENDING, main
from lagonn.encoders import EmbeddingStore, hash_encode, text_key


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def make_corpus(tmp_path, per_label=100, test_per_label=5):
    """Word-separable binary corpus for hash-encoder runs."""
    root = tmp_path / "corpus"
    root.mkdir()
    labels_path = root / "labels.jsonl"
    write_jsonl(labels_path, [{"id": 0, "name": "negative"}, {"id": 1, "name": "positive"}])

    def rows(count, offset):
        out = []
        for i in range(count):
            label = i % 2
            word = "zulu" if label else "alpha"
            out.append(
                {"id": i, "text": f"{word} {word} note{offset + i}", "label": label}
            )
        return out

    train_path = root / "train.jsonl"
    test_path = root / "test.jsonl"
    write_jsonl(train_path, rows(2 * per_label, 0))
    write_jsonl(test_path, rows(2 * test_per_label, 9000))
    return str(train_path), str(test_path), str(labels_path)


def run_args(train, test, labels, out, **overrides):
    args = [
        "run",
        "--dataset", train, test,
        "--labels", labels,
        "--encoder", "hash:16",
        "--variants", "PROBE",
        "--regimes", "BALANCED",
        "--seeds", "0",
        "--steps", "2",
        "--adapter-pairs", "4",
        "--adapter-epochs", "2",
        "--out", out,
    ]
    for flag, value in overrides.items():
        key = "--" + flag.replace("_", "-")
        args.extend([key] + [str(v) for v in (value if isinstance(value, list) else [value])])
    return args


class TestMakeSynthetic:
    def test_outputs_and_byte_determinism(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main([
                "make-synthetic",
                "--per-class", "20",
                "--classes", "2",
                "--dim", "8",
                "--margin", "4.0",
                "--seed", "5",
                "--test-per-class", "4",
                "--out", str(out),
            ])
            assert code == EXIT_OK
            outs.append(out)
        for fname in ("train.jsonl", "test.jsonl", "labels.jsonl", "store.bin"):
            a, b = outs[0] / fname, outs[1] / fname
            assert a.exists() and b.exists()
            assert read_bytes(a) == read_bytes(b), fname

    def test_seed_changes_output(self, tmp_path):
        blobs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}"
            assert main([
                "make-synthetic", "--per-class", "10", "--dim", "8",
                "--seed", seed, "--test-per-class", "2", "--out", str(out),
            ]) == EXIT_OK
            blobs.append(read_bytes(out / "store.bin"))
        assert blobs[0] != blobs[1]

    def test_invalid_margin(self, tmp_path):
        code = main([
            "make-synthetic", "--margin", "-1.0", "--out", str(tmp_path / "x"),
        ])
        assert code == EXIT_CONFIG


class TestRun:
    def test_smoke_single_run(self, tmp_path, capsys):
        train, test, labels = make_corpus(tmp_path)
        out = tmp_path / "shards"
        assert main(run_args(train, test, labels, str(out))) == EXIT_OK
        shard = out / "PROBE_BALANCED_0.csv"
        assert shard.exists()
        lines = shard.read_text().strip().split("\n")
        assert lines[0] == "variant,regime,seed,step,metric,value"
        assert len(lines) == 3  # 2 steps
        assert "1/1 runs completed" in capsys.readouterr().out

    def test_rerun_byte_identical(self, tmp_path):
        train, test, labels = make_corpus(tmp_path)
        out = tmp_path / "shards"
        assert main(run_args(train, test, labels, str(out))) == EXIT_OK
        first = read_bytes(out / "PROBE_BALANCED_0.csv")
        assert main(run_args(train, test, labels, str(out))) == EXIT_OK
        assert read_bytes(out / "PROBE_BALANCED_0.csv") == first

    def test_grid_naming(self, tmp_path):
        train, test, labels = make_corpus(tmp_path)
        out = tmp_path / "shards"
        code = main(
            run_args(
                train, test, labels, str(out),
                variants=["PROBE", "LAGONN_CHEAP"],
                seeds=["0", "1"],
                steps="1",
            )
        )
        assert code == EXIT_OK
        names = sorted(os.listdir(out))
        assert names == [
            "LAGONN_CHEAP_BALANCED_0.csv",
            "LAGONN_CHEAP_BALANCED_1.csv",
            "PROBE_BALANCED_0.csv",
            "PROBE_BALANCED_1.csv",
        ]

    def test_unknown_variant_names_valid_ones(self, tmp_path, capsys):
        train, test, labels = make_corpus(tmp_path, per_label=5)
        code = main(
            run_args(train, test, labels, str(tmp_path / "o"), variants="LAGONN_TURBO")
        )
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "LAGONN_TURBO" in err
        for name in ("PROBE", "LAGONN", "SETFIT", "LAGONN_LITE"):
            assert name in err

    def test_unknown_regime(self, tmp_path, capsys):
        train, test, labels = make_corpus(tmp_path, per_label=5)
        code = main(
            run_args(train, test, labels, str(tmp_path / "o"), regimes="MILD")
        )
        assert code == EXIT_CONFIG
        assert "EXTREME" in capsys.readouterr().err

    def test_insufficient_pool_is_config_error(self, tmp_path):
        train, test, labels = make_corpus(tmp_path, per_label=20)
        code = main(run_args(train, test, labels, str(tmp_path / "o"), steps="1"))
        assert code == EXIT_CONFIG  # BALANCED step 1 needs 50 per label

    def test_one_oversized_regime_fails_grid_before_any_run(self, tmp_path, capsys):
        # pool covers BALANCED for 2 steps but not MODERATE (needs 150)
        train, test, labels = make_corpus(tmp_path, per_label=120)
        out = tmp_path / "shards"
        code = main(
            run_args(
                train, test, labels, str(out),
                variants=["LAGONN", "PROBE"], regimes=["BALANCED", "MODERATE"],
            )
        )
        assert code == EXIT_CONFIG
        assert "MODERATE" in capsys.readouterr().err
        assert not list(out.glob("*.csv"))

    def test_seed_env_override(self, tmp_path, monkeypatch):
        train, test, labels = make_corpus(tmp_path)
        out = tmp_path / "shards"
        monkeypatch.setenv("LAGONN_SEED", "7")
        assert main(run_args(train, test, labels, str(out), steps="1")) == EXIT_OK
        assert os.listdir(out) == ["PROBE_BALANCED_7.csv"]

    def test_seed_env_override_invalid(self, tmp_path, monkeypatch, capsys):
        train, test, labels = make_corpus(tmp_path, per_label=5)
        monkeypatch.setenv("LAGONN_SEED", "seven")
        code = main(run_args(train, test, labels, str(tmp_path / "o")))
        assert code == EXIT_CONFIG
        assert "LAGONN_SEED" in capsys.readouterr().err

    def test_divergence_exit_code(self, tmp_path):
        train, test, labels = make_corpus(tmp_path)
        code = main(
            run_args(
                train, test, labels, str(tmp_path / "o"),
                variants="LOGREG",
                steps="1",
                adapter_lr="1e300",
                adapter_epochs="1",
            )
        )
        assert code == EXIT_DIVERGENCE

    def test_parallel_jobs_match_sequential(self, tmp_path):
        train, test, labels = make_corpus(tmp_path)
        seq = tmp_path / "seq"
        par = tmp_path / "par"
        base = dict(seeds=["0", "1"], steps="1")
        assert main(run_args(train, test, labels, str(seq), **base)) == EXIT_OK
        assert main(run_args(train, test, labels, str(par), jobs="2", **base)) == EXIT_OK
        assert sorted(os.listdir(seq)) == sorted(os.listdir(par))
        for name in os.listdir(seq):
            assert read_bytes(seq / name) == read_bytes(par / name), name


class TestRunWithStores:
    def build_store(self, path, texts, dim=8):
        store = EmbeddingStore(dim, {})
        for text in texts:
            store.put(text_key(text), hash_encode(text, dim))
        store.save(str(path))

    def test_missing_raw_text_pends_before_any_run(self, tmp_path, capsys):
        train, test, labels = make_corpus(tmp_path, per_label=50, test_per_label=2)
        texts = [json.loads(line)["text"] for line in open(train)]
        texts += [json.loads(line)["text"] for line in open(test)][:-1]  # drop one
        missing_text = json.loads(open(test).readlines()[-1])["text"]
        store_path = tmp_path / "store.bin"
        self.build_store(store_path, texts)
        out = tmp_path / "o"
        code = main(
            run_args(
                train, test, labels, str(out), encoder=f"store:{store_path}", steps="1"
            )
        )
        assert code == EXIT_PENDING
        manifest = out / "pending.jsonl"
        assert manifest.exists()
        rows = [json.loads(line) for line in open(manifest)]
        assert [r["text"] for r in rows] == [missing_text]
        expected_sha = hashlib.sha256(missing_text.encode()).hexdigest()
        assert rows[0]["sha256"] == expected_sha
        assert not [n for n in os.listdir(out) if n.endswith(".csv")]

    def test_synthetic_store_run_completes(self, tmp_path):
        data = tmp_path / "data"
        assert main([
            "make-synthetic",
            "--per-class", "50",
            "--dim", "8",
            "--seed", "3",
            "--test-per-class", "5",
            "--out", str(data),
        ]) == EXIT_OK
        out = tmp_path / "shards"
        code = main([
            "run",
            "--dataset", str(data / "train.jsonl"), str(data / "test.jsonl"),
            "--labels", str(data / "labels.jsonl"),
            "--encoder", f"synth:{data / 'store.bin'}",
            "--variants", "LAGONN_CHEAP",
            "--regimes", "BALANCED",
            "--seeds", "0",
            "--steps", "1",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        shard = out / "LAGONN_CHEAP_BALANCED_0.csv"
        assert shard.exists()
        value = float(shard.read_text().strip().split("\n")[1].split(",")[-1])
        assert 0.0 <= value <= 100.0

    def test_plain_store_rejects_decorating_variant_texts(self, tmp_path, capsys):
        """A plain store has raw texts only; decorated lookups pend (exit 2)."""
        train, test, labels = make_corpus(tmp_path, per_label=50, test_per_label=2)
        texts = [json.loads(line)["text"] for line in open(train)]
        texts += [json.loads(line)["text"] for line in open(test)]
        store_path = tmp_path / "store.bin"
        self.build_store(store_path, texts)
        out = tmp_path / "o"
        code = main(
            run_args(
                train, test, labels, str(out),
                encoder=f"store:{store_path}",
                variants="LAGONN_CHEAP",
                steps="1",
            )
        )
        assert code == EXIT_PENDING
        rows = [json.loads(line) for line in open(out / "pending.jsonl")]
        assert rows  # decorated strings are reported for the next export cycle
        assert all("[SEP]" in r["text"] for r in rows)


class TestReport:
    def write_shards(self, out_dir, values_by_seed):
        from lagonn.harness import RunResult, write_shard

        os.makedirs(out_dir, exist_ok=True)
        for seed, values in values_by_seed.items():
            results = [
                RunResult("PROBE", "BALANCED", seed, step, "average_precision", v)
                for step, v in enumerate(values, start=1)
            ]
            write_shard(os.path.join(out_dir, f"PROBE_BALANCED_{seed}.csv"), results)

    def test_two_seed_aggregation(self, tmp_path, capsys):
        shards = tmp_path / "shards"
        self.write_shards(str(shards), {0: [30.0], 1: [32.0]})
        out = tmp_path / "report"
        assert main(["report", "--shards", str(shards), "--out", str(out)]) == EXIT_OK
        text = (out / "report.txt").read_text()
        assert "31.0+- 1.0" in text
        csv_text = (out / "report.csv").read_text()
        assert csv_text.splitlines()[0] == "variant,regime,metric,column,mean,std"
        assert "PROBE,BALANCED,average_precision,step1,31.0,1.0" in csv_text
        assert "31.0+- 1.0" in capsys.readouterr().out

    def test_single_seed_zero_std(self, tmp_path):
        shards = tmp_path / "shards"
        self.write_shards(str(shards), {0: [44.0, 46.0]})
        out = tmp_path / "report"
        assert main(["report", "--shards", str(shards), "--out", str(out)]) == EXIT_OK
        assert "45.0+- 0.0" in (out / "report.txt").read_text()

    def test_empty_dir_is_error(self, tmp_path, capsys):
        shards = tmp_path / "empty"
        shards.mkdir()
        code = main(["report", "--shards", str(shards), "--out", str(tmp_path / "r")])
        assert code == EXIT_CONFIG
        assert "no result shards" in capsys.readouterr().err

    def test_missing_dir_is_error(self, tmp_path):
        code = main(["report", "--shards", str(tmp_path / "nope"), "--out", str(tmp_path / "r")])
        assert code == EXIT_CONFIG

    def test_ragged_shards_are_error(self, tmp_path, capsys):
        from lagonn.harness import RunResult, write_shard

        shards = tmp_path / "shards"
        shards.mkdir()
        write_shard(
            str(shards / "a.csv"),
            [RunResult("PROBE", "BALANCED", 0, 1, "average_precision", 10.0)],
        )
        write_shard(
            str(shards / "b.csv"),
            [RunResult("LOGREG", "BALANCED", 1, 1, "average_precision", 10.0)],
        )
        code = main(["report", "--shards", str(shards), "--out", str(tmp_path / "r")])
        assert code == EXIT_CONFIG
        assert "ragged" in capsys.readouterr().err


class TestArgParsing:
    def test_missing_required_flag_exits_one(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["run", "--labels", "x.jsonl"])
        assert excinfo.value.code == EXIT_CONFIG

    def test_no_command_exits_one(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == EXIT_CONFIG

    def test_bad_mode_choice_exits_one(self, tmp_path):
        train, test, labels = make_corpus(tmp_path, per_label=3)
        with pytest.raises(SystemExit) as excinfo:
            main(run_args(train, test, labels, str(tmp_path / "o"), mode="FULL"))
        assert excinfo.value.code == EXIT_CONFIG

    def test_console_script_installed(self):
        import shutil

        exe = shutil.which("lagonn")
        assert exe is not None
