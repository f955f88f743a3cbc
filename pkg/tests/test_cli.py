import csv
import json
import subprocess
import sys

import pytest

from chaosfit.cli import _parse_schedule, main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def run_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(f"""
model: {{name: synthetic, params: {{n_instants: 2}}}}
fit: {{nu: 40}}
seed: 3
output: {{dir: {tmp_path / 'out'}}}
validation: {{model_samples: 500, pce_samples: 500, bins: 10}}
convergence: {{schedule: [10, 20, 30, 40], variable: v, time_index: 1}}
""")
    return path


def test_full_workflow(run_yaml, tmp_path, capsys):
    out = tmp_path / "out"
    cfg = ["--config", str(run_yaml)]
    assert main(cfg + ["sample", "--count", "12"]) == 0
    assert len(read_csv(out / "samples.csv")) == 12
    assert main(cfg + ["simulate"]) == 0
    sims = read_csv(out / "simulations.csv")
    assert len(sims) == 12 * 2 and set(sims[0]) == {"sample_index", "variable", "time_index", "value"}

    assert main(cfg + ["fit"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["simulations"] == 40 and len(report["fits"]) == 2
    assert sorted(p.name for p in (out / "models").iterdir()) == ["v_t00.pce", "v_t01.pce"]

    capsys.readouterr()
    assert main(cfg + ["moments"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert [r["time_index"] for r in printed] == [0, 1]

    assert main(cfg + ["mc", "--count", "100"]) == 0
    assert len(read_csv(out / "surrogate_samples.csv")) == 200
    assert len(read_csv(out / "surrogate_stats.csv")) == 2

    assert main(cfg + ["validate"]) == 0
    rows = read_csv(out / "validation.csv")
    assert len(rows) == 2 and "relerr_median" in rows[0]
    assert len(read_csv(out / "histograms.csv")) == 2 * 2 * 10

    assert main(cfg + ["converge"]) == 0
    conv = json.loads((out / "convergence.json").read_text())
    assert conv["nus"] == [10, 20, 30, 40] and len(conv["distances"]) == 3

    assert main(cfg + ["compare-ls"]) == 0
    assert len(read_csv(out / "compare_ls.csv")) == 2


def test_overrides_and_kl(tmp_path):
    out = tmp_path / "kl"
    assert main(["--out", str(out), "kl", "--terms", "6"]) == 0
    terms = read_csv(out / "kl_terms.csv")
    assert [t["parity"] for t in terms] == ["odd", "even"] * 3
    errs = [float(r["max_abs_error"]) for r in read_csv(out / "kl_covariance_error.csv")]
    assert errs[-1] < errs[1]


def test_seed_override_changes_samples(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--model", "synthetic", "--seed", "1", "--out", str(a), "sample", "--count", "3"])
    main(["--model", "synthetic", "--seed", "2", "--out", str(b), "sample", "--count", "3"])
    assert (a / "samples.csv").read_text() != (b / "samples.csv").read_text()


def test_errors_give_nonzero_exit(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "missing.yaml"), "fit"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("fit: {nu: 0}\n")
    assert main(["--config", str(bad), "fit"]) == 2
    assert main(["--out", str(tmp_path / "empty"), "--model", "synthetic", "moments"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["no-such-command"])


def test_schedule_parsing():
    assert _parse_schedule("5:8") == [5, 6, 7, 8]
    assert _parse_schedule("10:30:10") == [10, 20, 30]
    assert _parse_schedule("4,9") == [4, 9]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chaosfit", "--out", str(tmp_path), "kl", "--terms", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "kl_basis.txt").exists()
