import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from raptorflash.cli import main
from raptorflash.errors import ConfigError
from raptorflash.sim import (
    CSV_COLUMNS,
    ExperimentConfig,
    build_scheme,
    bsc_corrupt,
    load_config,
    run_experiment,
    trial_rng,
)

RAPTOR_ONLY = {
    "scheme": "RaptorOnly",
    "grid": [0, 2],
    "code": {"K": 24, "erased": 6},
    "trials": 300,
    "min_failures": 20,
    "master_seed": 9,
    "batch_size": 32,
}


def test_bsc_extremes():
    bits = np.random.default_rng(0).integers(0, 2, 500, dtype=np.uint8)
    assert np.array_equal(bsc_corrupt(bits, 0.0, 1), bits)
    assert np.array_equal(bsc_corrupt(bits, 1.0, 1), bits ^ 1)
    with pytest.raises(ValueError):
        bsc_corrupt(bits, 1.5, 1)


def test_bsc_binomial_concentration():
    flips = int(bsc_corrupt(np.zeros(10**6, np.uint8), 0.01, 2026).sum())
    sigma = (10**6 * 0.01 * 0.99) ** 0.5
    assert abs(flips - 10**4) < 5 * sigma


@given(st.integers(0, 2**63 - 1), st.floats(0.0, 1.0))
def test_bsc_deterministic(seed, p):
    bits = np.zeros(200, np.uint8)
    assert np.array_equal(bsc_corrupt(bits, p, seed), bsc_corrupt(bits, p, seed))


def test_trial_streams_independent_of_order():
    a = [trial_rng(5, 1, t).random() for t in range(10)]
    b = [trial_rng(5, 1, t).random() for t in reversed(range(10))][::-1]
    assert a == b
    assert trial_rng(5, 1, 0).random() != trial_rng(5, 2, 0).random()


@pytest.mark.parametrize(
    "patch, path",
    [
        ({"trials": 0}, "trials"),
        ({"grid": []}, "grid"),
        ({"grid": [0, "x"]}, "grid[1]"),
        ({"grid": [1.5]}, "grid[0]"),
        ({"scheme": "Nope"}, "scheme"),
        ({"stop_metric": "sometimes"}, "stop_metric"),
        ({"colour": 1}, "colour"),
        ({"code": {"erased": 2}}, "code.K"),
        ({"code": {"K": 24, "lt_mode": "x"}}, "code.lt_mode"),
    ],
)
def test_config_errors_name_field(patch, path):
    data = dict(RAPTOR_ONLY, **patch)
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(data)
    assert exc.value.path == path
    assert str(exc.value).startswith(path + ":")


def test_bwpc_config_paths():
    data = {"scheme": "BwPcRaptor", "grid": [0.001], "code": {"n_B": 16, "N_r": 2, "row": {"n": 1057}}}
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(data)
    assert exc.value.path == "code.row.t"


def test_stop_rule_soundness():
    cfg = ExperimentConfig.from_dict(RAPTOR_ONLY)
    report = run_experiment(cfg)
    scheme = build_scheme(cfg)
    for point, res in enumerate(report.points):
        # replay trials one by one to find where the rule should fire
        fails = n = 0
        while n < cfg.trials and fails < cfg.min_failures:
            fails += scheme.trial(trial_rng(cfg.master_seed, point, n), cfg.grid[point])[1]
            n += 1
        assert res.trials == n and res.failures == fails
        assert res.failures <= res.trials
        assert res.wilson_lo <= res.failures / res.trials <= res.wilson_hi


def test_max_trials_cap():
    cfg = ExperimentConfig.from_dict(dict(RAPTOR_ONLY, grid=[30], trials=50))
    (res,) = run_experiment(cfg).points
    assert res.trials == 50 and res.failures == 0
    assert res.analytic_PRaptor == 2.0**-30


def _strip_seconds(lines):
    return [line.rsplit(",", 1)[0] for line in lines]


def test_worker_count_does_not_change_results(tmp_path):
    cfg = ExperimentConfig.from_dict(RAPTOR_ONLY)
    one = run_experiment(cfg, workers=1, output=str(tmp_path / "a.csv"))
    two = run_experiment(cfg, workers=2)
    assert _strip_seconds(one.csv_lines()) == _strip_seconds(two.csv_lines())
    on_disk = (tmp_path / "a.csv").read_text().splitlines()
    assert on_disk[0] == ",".join(CSV_COLUMNS)
    assert _strip_seconds(on_disk) == _strip_seconds(one.csv_lines())


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_load_config_roundtrip(tmp_path):
    cfg = load_config(_write(tmp_path, RAPTOR_ONLY))
    assert cfg.key() == ExperimentConfig.from_dict(RAPTOR_ONLY).key()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_cli_simulate_and_analyze(tmp_path, capsys):
    path = _write(tmp_path, RAPTOR_ONLY)
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--config", path, "--output", str(out), "--quiet"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[0].split(",") == list(CSV_COLUMNS)
    assert main(["analyze", "--config", path]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[1].split(",")[10] == "1"  # 2^-0 at zero surplus


def test_cli_exit_codes(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, dict(RAPTOR_ONLY, trials=0))]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 4
    construct = {"scheme": "LongBchBaseline", "grid": [0.01], "code": {"bch": {"n": 15, "t": 8, "m": 4}}}
    assert main(["analyze", "--config", _write(tmp_path, construct)]) == 3


def test_cli_vectors(capsys):
    assert main(["vectors"]) == 0
    vec = json.loads(capsys.readouterr().out)
    assert vec["erasure_example"]["lut"] == [1, 1, 1, 0, 1]
    assert vec["bch_15_7_2"]["generator"] == "0b111010001"
    assert vec["conditional_failure"]["N_s=2,N-K=10,i=7"] == 2.0**-6


def test_cli_recover(tmp_path, capsys):
    block = str(tmp_path / "blk.fblk")
    args = ["recover", "--block", block, "--create", "--p", "4", "--w", "8", "--fail", "1,7,20"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert report["recovered"] == [1, 7, 20] and report["matches_original"]
    assert report["lut_bits"] == (32 + 12) * 3


def test_cli_roundtrip(tmp_path, capsys):
    cfg = {"scheme": "BwPcRaptor", "grid": [0.01],
           "code": {"n_B": 8, "N_i": 2, "row": {"k": 64, "t": 2}, "N_r": 12}}
    assert main(["roundtrip", "--config", _write(tmp_path, cfg), "--p-e", "0.004", "--seed", "3"]) == 0
    trace = json.loads(capsys.readouterr().out)
    assert trace["page_bits"] == 64 * 8 + 2 * 8 * 14
    assert trace["outer"]["decoded"] and trace["outer"]["bit_errors"] == 0
