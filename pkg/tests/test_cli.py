"""Config parsing, artifact emission, and the command-line surface."""

import json

import numpy as np
import pytest

from qssm.analysis import DEFAULT_CONVENTION
from qssm.cli import (
    CSV_HEADER,
    ConfigError,
    compare_report,
    curve_csv,
    load_curve,
    main,
    parse_config,
    run_experiment,
    symbol_table_csv,
    validate_analysis,
)
from qssm.montecarlo import SimConfig, sweep

MINIMAL = {
    "configs": [
        {"scheme": "qssm", "L": 4, "M": 4, "snr": {"start": 0, "stop": 24, "step": 2}}
    ]
}


def test_parse_minimal_config_fills_defaults():
    spec = parse_config(json.dumps(MINIMAL))
    name, config = spec.configs[0]
    assert name == "qssm_L4_4qam"
    assert config.n_t == 32 and config.n_r == 32
    assert config.spacing == 0.5
    assert config.angle_mode == "dft_grid"
    assert config.trials == 1_000_000
    assert config.convention is DEFAULT_CONVENTION
    assert config.snr_db == tuple(float(s) for s in range(0, 25, 2))
    assert spec.levels == (1e-3, 1e-4)


def test_parse_rejects_bad_documents():
    with pytest.raises(ConfigError):
        parse_config("not json")
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"configs": []}))
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"configs": [{"scheme": "qssm", "L": 4}]}))
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(
            json.dumps({"configs": [{"scheme": "qssm", "L": 4, "M": 4, "trails": 5}]})
        )
    with pytest.raises(ConfigError, match="configs\\[1\\]"):
        parse_config(
            json.dumps(
                {
                    "configs": [
                        {"scheme": "qssm", "L": 4, "M": 4},
                        {"scheme": "qssm", "L": 4, "M": 5},
                    ]
                }
            )
        )
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(
            json.dumps(
                {
                    "configs": [
                        {"name": "x", "scheme": "qssm", "L": 4, "M": 4},
                        {"name": "x", "scheme": "qssm", "L": 2, "M": 4},
                    ]
                }
            )
        )


def test_parse_comparison_rate_check():
    accepted = {
        "configs": [
            {"name": "a", "scheme": "qssm", "L": 2, "M": 4},
            {"name": "b", "scheme": "ssm", "L": 4, "M": 4},
        ],
        "comparisons": [{"a": "a", "b": "b"}],
    }
    spec = parse_config(json.dumps(accepted))
    assert spec.comparisons == (("a", "b"),)

    mismatched = {
        "configs": [
            {"name": "a", "scheme": "qssm", "L": 4, "M": 4},
            {"name": "b", "scheme": "ssm", "L": 4, "M": 4},
        ],
        "comparisons": [{"a": "a", "b": "b"}],
    }
    with pytest.raises(ConfigError, match="6 b/s/Hz.*4 b/s/Hz"):
        parse_config(json.dumps(mismatched))


def test_symbol_table_matches_bit_mapping():
    text = symbol_table_csv(4, 4, "qam")
    lines = text.strip().splitlines()
    assert lines[0] == "label,k1,k2,x_re,x_im"
    assert len(lines) == 65
    rows = {line.split(",")[0]: line.split(",") for line in lines[1:]}
    assert rows["000000"][1:3] == ["1", "1"]
    assert float(rows["000000"][3]) == pytest.approx(-1 / np.sqrt(2))
    assert rows["011011"][1:3] == ["2", "3"]
    assert float(rows["011011"][4]) == pytest.approx(+1 / np.sqrt(2))


def _tiny_spec_dict(trials=2000, seed=1):
    return {
        "configs": [
            {
                "name": "qssm_small",
                "scheme": "qssm",
                "L": 2,
                "M": 4,
                "snr_db": [0.0, 6.0, 12.0, 18.0, 24.0, 30.0],
                "trials": trials,
                "seed": seed,
            },
            {
                "name": "ssm_small",
                "scheme": "ssm",
                "L": 4,
                "M": 4,
                "snr_db": [0.0, 6.0, 12.0, 18.0, 24.0, 30.0],
                "trials": trials,
                "seed": seed,
            },
        ],
        "comparisons": [{"a": "qssm_small", "b": "ssm_small"}],
        "levels": [0.05],
    }


def test_run_experiment_artifacts(tmp_path):
    spec = parse_config(json.dumps(_tiny_spec_dict()))
    written = run_experiment(spec, out_dir=str(tmp_path / "out"))
    csv_path = written["qssm_small.csv"]
    lines = csv_path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 7
    manifest = json.loads(written["qssm_small.manifest.json"].read_text())
    assert manifest["config"]["L"] == 2
    assert manifest["config_hash"]
    assert manifest["seed"] == 1
    report = written["compare_qssm_small_vs_ssm_small.txt"].read_text()
    assert "gain of qssm_small over ssm_small" in report

    # byte-identical rerun
    before = csv_path.read_bytes()
    run_experiment(spec, out_dir=str(tmp_path / "out"))
    assert csv_path.read_bytes() == before


def test_two_curve_recipe_analytic_ordering(tmp_path):
    # more spatial bits -> higher bound at every SNR, visible in the CSV columns
    spec = parse_config(
        json.dumps(
            {
                "configs": [
                    {"name": "L4", "scheme": "qssm", "L": 4, "M": 4,
                     "snr": {"start": 0, "stop": 40, "step": 8}, "trials": 500, "seed": 1},
                    {"name": "L8", "scheme": "qssm", "L": 8, "M": 4,
                     "snr": {"start": 0, "stop": 40, "step": 8}, "trials": 500, "seed": 1},
                ]
            }
        )
    )
    written = run_experiment(spec, out_dir=str(tmp_path))
    bounds = {}
    for name in ("L4", "L8"):
        rows = written[f"{name}.csv"].read_text().splitlines()[1:]
        bounds[name] = [float(r.split(",")[4]) for r in rows]
    assert all(b8 > b4 for b4, b8 in zip(bounds["L4"], bounds["L8"]))


def test_csv_roundtrip_preserves_values(tmp_path):
    config = SimConfig(
        scheme="qssm", L=2, M=4, snr_db=(0.0, 8.0, 16.0), trials=1000, seed=3
    )
    curve = sweep(config)
    spec = parse_config(
        json.dumps(
            {
                "configs": [
                    {
                        "name": "c",
                        "scheme": "qssm",
                        "L": 2,
                        "M": 4,
                        "snr_db": [0.0, 8.0, 16.0],
                        "trials": 1000,
                        "seed": 3,
                    }
                ]
            }
        )
    )
    written = run_experiment(spec, out_dir=str(tmp_path))
    loaded = load_curve(written["c.csv"])
    assert loaded.config == config
    assert loaded.config_hash == curve.config_hash
    assert np.array_equal(loaded.values("sim"), curve.values("sim"))
    assert np.array_equal(loaded.values("analytic"), curve.values("analytic"))


def test_csv_serialises_17_significant_digits():
    config = SimConfig(scheme="qssm", L=2, M=4, snr_db=(0.0,), trials=3, seed=0)
    curve = sweep(config)
    text = curve_csv(curve)
    value = text.splitlines()[1].split(",")[1]
    assert float(value) == curve.points[0].estimate.abep


def test_compare_report_structure():
    config = SimConfig(scheme="qssm", L=2, M=4, snr_db=(0.0, 10.0, 20.0, 30.0), trials=4000, seed=2)
    curve = sweep(config)
    report = compare_report(curve, curve, [0.05], "left", "right")
    assert "left" in report and "right" in report
    line = report.strip().splitlines()[-1]
    assert "+0.000" in line
    with pytest.raises(ValueError, match="does not cross"):
        compare_report(curve, curve, [1e-12])


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("QSSM_OUT_DIR", str(tmp_path / "from_env"))
    spec = parse_config(
        json.dumps(
            {"configs": [{"scheme": "qssm", "L": 2, "M": 4, "snr_db": [0.0], "trials": 100}]}
        )
    )
    written = run_experiment(spec)
    assert (tmp_path / "from_env").exists()
    assert all(p.parent == tmp_path / "from_env" for p in written.values())


def test_main_table_and_validate(tmp_path, capsys):
    assert main(["table", "--L", "2", "--M", "4", "--kind", "qam"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("label,k1,k2,x_re,x_im")
    assert len(out.strip().splitlines()) == 17

    report_path = tmp_path / "validation.txt"
    assert main(["validate", "--trials", "20000", "--seed", "1", "--out", str(report_path)]) == 0
    report = report_path.read_text()
    assert "max relative error" in report
    assert "verdict" in report


def test_validate_verdict_stable_across_seeds():
    # trial count large enough that the conclusion is noise-proof
    verdicts = set()
    for seed in (1, 2, 3):
        report = validate_analysis(trials=400_000, seed=seed)
        verdicts.add(report.splitlines()[-1].split()[1])
    assert len(verdicts) == 1
    assert verdicts.pop() == DEFAULT_CONVENTION.value


def test_main_exit_codes(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["run", str(missing)]) == 4  # unreadable file

    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad)]) == 2

    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"configs": [{"scheme": "qssm", "L": 3, "M": 4}]}))
    assert main(["run", str(invalid)]) == 2
    capsys.readouterr()


def test_main_sweep_and_compare(tmp_path, capsys):
    out_dir = tmp_path / "res"
    common = ["--snr", "0:30:6", "--trials", "2000", "--out-dir", str(out_dir)]
    assert main(["sweep", "--scheme", "qssm", "--L", "2", "--M", "4", "--name", "qa", *common]) == 0
    assert main(["sweep", "--scheme", "ssm", "--L", "4", "--M", "4", "--name", "sa", *common]) == 0
    capsys.readouterr()
    code = main(
        ["compare", str(out_dir / "qa.csv"), str(out_dir / "sa.csv"), "--levels", "0.05"]
    )
    assert code == 0
    assert "gain of qa over sa" in capsys.readouterr().out

    # rate mismatch between result files is refused
    assert main(["sweep", "--scheme", "qssm", "--L", "4", "--M", "4", "--name", "qb", *common]) == 0
    capsys.readouterr()
    assert main(["compare", str(out_dir / "qb.csv"), str(out_dir / "sa.csv")]) == 2


def test_convention_override_changes_bound(tmp_path):
    base = {
        "configs": [
            {"name": "c", "scheme": "qssm", "L": 2, "M": 4, "snr_db": [20.0], "trials": 100, "seed": 0}
        ]
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base))
    assert main(["run", str(path), "--out-dir", str(tmp_path / "a")]) == 0
    assert (
        main(
            [
                "run",
                str(path),
                "--out-dir",
                str(tmp_path / "b"),
                "--convention",
                "paper_eq21",
            ]
        )
        == 0
    )
    bound_a = float((tmp_path / "a" / "c.csv").read_text().splitlines()[1].split(",")[4])
    bound_b = float((tmp_path / "b" / "c.csv").read_text().splitlines()[1].split(",")[4])
    assert bound_b < bound_a  # the 3 dB-optimistic normalisation gives a lower bound
