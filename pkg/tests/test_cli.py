import json
import subprocess
import sys

import pytest

from demiclosure.cli import ConfigError, RunConfig, main, parse_config

ZERO_SOLVE = {"version": 1, "command": "solve", "operators": [{"kind": "zero"}, {"kind": "zero"}]}
BALL = {"kind": "normal_cone", "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}}
LINE = {"kind": "normal_cone", "set": {"kind": "affine", "anchor": [0.5, 0.0], "basis": [[0.0, 1.0]]}}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# -- parsing ------------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config(json.dumps(ZERO_SOLVE))
    assert cfg.command == "solve"
    assert cfg.tol == 1e-10 and cfg.max_iter == 100_000 and cfg.seed == 0x5EED
    assert cfg.format == "both" and cfg.out is None


def test_round_trip():
    doc = {**ZERO_SOLVE, "operators": [BALL, LINE], "z0": [3.0, -2.0], "tol": 1e-9,
           "probes": [0, 1], "seed": 7}
    cfg = parse_config(json.dumps(doc))
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert parse_config(again.to_json()) == again


def test_negative_radius_names_field():
    bad = {**ZERO_SOLVE, "operators": [{"kind": "normal_cone", "set": {"kind": "ball", "center": [0.0],
                                                                     "radius": -1}}, {"kind": "zero"}]}
    with pytest.raises(ConfigError, match="radius"):
        parse_config(json.dumps(bad))


def test_parse_error_has_position():
    with pytest.raises(ConfigError, match=r"line 2, column \d+"):
        parse_config('{"version": 1,\n "command": }')


@pytest.mark.parametrize("doc, field", [
    ({**ZERO_SOLVE, "bogus": 1}, "bogus"),
    ({**ZERO_SOLVE, "operators": [{"kind": "zero", "extra": 2}, {"kind": "zero"}]}, "extra"),
    ({**ZERO_SOLVE, "version": 2}, "version"),
    ({**ZERO_SOLVE, "tol": -1.0}, "tol"),
    ({**ZERO_SOLVE, "operators": [{"kind": "linear"}, {"kind": "zero"}]}, "matrix"),
])
def test_schema_violations_name_field(doc, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(json.dumps(doc))


def test_semantic_errors():
    with pytest.raises(ConfigError, match="exactly two"):
        parse_config(json.dumps({**ZERO_SOLVE, "operators": [{"kind": "zero"}]}))
    with pytest.raises(ConfigError, match="operators.0"):
        parse_config(json.dumps({**ZERO_SOLVE, "operators": [
            {"kind": "linear", "matrix": [[-1.0]]}, {"kind": "zero"}]}))
    with pytest.raises(ConfigError, match="check"):
        parse_config(json.dumps({"version": 1, "command": "check"}))


# -- exit statuses -------------------------------------------------------------------


def test_demo_zarantonello(capsys):
    code, out, _ = run(["demo", "zarantonello", "--n", "1000"], capsys)
    assert code == 0
    assert "0.7071067811865476" in out
    assert json.loads(out)["ok"] is True


def test_demo_counterexample(capsys):
    code, out, _ = run(["demo", "counterexample"], capsys)
    assert code == 0
    assert "0.2928932188134524" in out


def test_demo_svaiter_and_feasibility(capsys, tmp_path):
    assert run(["demo", "svaiter"], capsys)[0] == 0
    assert run(["demo", "feasibility", "--out", str(tmp_path), "--format", "json"], capsys)[0] == 0
    assert (tmp_path / "feasibility.json").exists()
    cfg = write(tmp_path, {"version": 1, "command": "demo", "demo": "svaiter",
                           "operators": [{"kind": "linear", "matrix": [[0.0, -1.0], [1.0, 0.0]]},
                                         {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]]}],
                           "z0": [1.0, 1.0]})
    assert run(["demo", "svaiter", "--config", str(cfg)], capsys)[0] == 0


def test_demo_failure_status(capsys, tmp_path):
    # parallel lines never meet: the run cannot converge
    para = {"kind": "normal_cone", "set": {"kind": "affine", "anchor": [0.0, 1.0], "basis": [[1.0, 0.0]]}}
    flat = {"kind": "normal_cone", "set": {"kind": "affine", "anchor": [0.0, 0.0], "basis": [[1.0, 0.0]]}}
    cfg = write(tmp_path, {"version": 1, "command": "demo", "demo": "svaiter",
                           "operators": [flat, para], "z0": [0.0, 0.0], "max_iter": 50})
    assert run(["demo", "svaiter", "--config", str(cfg)], capsys)[0] == 2


def test_solve_statuses(capsys, tmp_path):
    cfg = write(tmp_path, {**ZERO_SOLVE, "operators": [BALL, LINE], "z0": [2.0, 2.0]})
    code, out, _ = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["converged"] is True
    assert doc["report"]["shadow_limit"][0] == pytest.approx(0.5, abs=1e-8)
    assert (tmp_path / "o" / "solve.json").exists()
    assert b"\r" not in (tmp_path / "o" / "solve_trace.csv").read_bytes()

    para = {"kind": "normal_cone", "set": {"kind": "ball", "center": [5.0, 0.0], "radius": 1.0}}
    cfg = write(tmp_path, {**ZERO_SOLVE, "operators": [BALL, para], "z0": [2.0, 2.0]}, "bad.json")
    assert run(["solve", "--config", str(cfg), "--max-iter", "40"], capsys)[0] == 2


def test_solve_missing_config(capsys):
    code, _, err = run(["solve", "--config", "missing.json"], capsys)
    assert code == 1
    assert "missing.json" in err


def test_consensus_statuses(capsys, tmp_path):
    boxes = [{"kind": "normal_cone", "set": {"kind": "box", "lower": [lo], "upper": [hi]}}
             for lo, hi in [(0.0, 2.0), (1.0, 3.0), (1.5, 2.5)]]
    cfg = write(tmp_path, {"version": 1, "command": "consensus", "operators": boxes, "z0": [0.0]})
    code, out, _ = run(["consensus", "--config", str(cfg)], capsys)
    assert code == 0
    assert 1.5 - 1e-8 <= json.loads(out)["point"][0] <= 2.0 + 1e-8

    apart = [boxes[0], {"kind": "normal_cone", "set": {"kind": "box", "lower": [5.0], "upper": [6.0]}}]
    cfg = write(tmp_path, {"version": 1, "command": "consensus", "operators": apart}, "apart.json")
    assert run(["consensus", "--config", str(cfg), "--max-iter", "30"], capsys)[0] == 2


def _check_doc(seq, anchor):
    return {"version": 1, "command": "check",
            "check": {"certificate": "firm", "maps": [{"kind": "identity"}], "sequences": [seq],
                      "D": {"anchor": anchor}}}


def test_check_statuses(capsys, tmp_path):
    seq = [[1.0 + 2.0**-k, 2.0] for k in range(1, 100)]
    good = write(tmp_path, _check_doc(seq, [0.0, 0.0]), "good.json")
    code, out, _ = run(["check", "--config", str(good)], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "pass"

    bad = write(tmp_path, _check_doc(seq, [3.0, 3.0]), "bad.json")
    code, out, _ = run(["check", "--config", str(bad)], capsys)
    assert code == 2 and json.loads(out)["verdict"] == "hypothesis-failed(D-residual)"


def test_check_data_file_and_multi(capsys, tmp_path):
    seq = [[0.5 + 2.0**-k] for k in range(1, 80)]
    (tmp_path / "data.json").write_text(json.dumps({"sequences": [seq, seq]}))
    cfg = write(tmp_path, {"version": 1, "command": "check",
                           "check": {"certificate": "multi_nonexp", "data": "data.json",
                                     "maps": [{"kind": "identity"}, {"kind": "identity"}]}})
    assert run(["check", "--config", str(cfg)], capsys)[0] == 0

    graph = {"x": [[0.5, 0.0]] * 10, "u": [[0.5, 0.0]] * 10}
    cfg = write(tmp_path, {"version": 1, "command": "check",
                           "check": {"certificate": "theorem22", "graph": graph,
                                     "operator": {"kind": "linear", "matrix": [[1.0, 0.0], [0.0, 1.0]]},
                                     "C": {"anchor": [0.0, 0.0], "basis": [[1.0, 0.0]]},
                                     "D": {"anchor": [0.0, 0.0], "basis": [[0.0, 1.0]]}}}, "t22.json")
    code, out, _ = run(["check", "--config", str(cfg)], capsys)
    assert code == 2 and "D-residual" in json.loads(out)["verdict"]

    cfg = write(tmp_path, {"version": 1, "command": "check",
                           "check": {"certificate": "classical", "maps": [{"kind": "identity"}],
                                     "sequences": [[[1.0], [1.0]]], "x_strong": [0.0]}}, "cl.json")
    assert run(["check", "--config", str(cfg)], capsys)[0] == 0


def test_check_config_errors(capsys, tmp_path):
    cfg = write(tmp_path, {"version": 1, "command": "check",
                           "check": {"certificate": "firm", "maps": [{"kind": "identity"}],
                                     "sequences": [[[1.0, 2.0]]],
                                     "C": {"anchor": [0.0, 0.0]}, "D": {"anchor": [0.0, 0.0]}}})
    code, _, err = run(["check", "--config", str(cfg)], capsys)
    assert code == 1 and "ranks" in err
    cfg = write(tmp_path, {"version": 1, "command": "check",
                           "check": {"certificate": "firm", "data": "nowhere.json",
                                     "maps": [{"kind": "identity"}]}}, "nd.json")
    assert run(["check", "--config", str(cfg)], capsys)[0] == 1


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["demo"],
    ["demo", "nope"],
    ["solve"],
    ["consensus"],
    ["check"],
    ["demo", "zarantonello", "--seed", "xyz"],
    ["demo", "zarantonello", "--probes", "a,b"],
    ["demo", "zarantonello", "--format", "xml"],
    ["demo", "zarantonello", "--n", "0"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 1


def test_subcommand_mismatch(capsys, tmp_path):
    cfg = write(tmp_path, ZERO_SOLVE)
    assert run(["consensus", "--config", str(cfg)], capsys)[0] == 1


def test_flags_override_config(tmp_path):
    from demiclosure.cli import build_parser, config_from_args

    cfg_path = write(tmp_path, {**ZERO_SOLVE, "tol": 1e-6})
    args = build_parser().parse_args(["solve", "--config", str(cfg_path), "--tol", "1e-8",
                                      "--probes", "0,1", "--seed", "ff", "--max-iter", "9"])
    cfg = config_from_args(args)
    assert (cfg.tol, cfg.probes, cfg.seed, cfg.max_iter) == (1e-8, [0, 1], 255, 9)


def test_floats_round_trip_exactly(capsys):
    code, out, _ = run(["demo", "zarantonello", "--n", "50"], capsys)
    from demiclosure.experiments import zarantonello_run

    doc = json.loads(out)
    assert doc["scalars"] == zarantonello_run(50).scalars


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "demiclosure", "demo", "counterexample"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["scalars"]["gap"] == 0.2928932188134524


def test_runconfig_is_plain_data():
    cfg = RunConfig(command="demo", demo="zarantonello")
    assert parse_config(cfg.to_json()) == cfg
