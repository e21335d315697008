import csv
import io
import math

import pytest

from rcm_lab.cli import COLUMNS, execute, main, parse_invocation


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def body(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


def parse_csv(text):
    rows = list(csv.reader(io.StringIO("\n".join(body(text)))))
    return rows[0], rows[1:]


def test_valid_invocations(tmp_path):
    inv = parse_invocation("simulate --model unit-disk --rho 500 --b 0 --trials 1000 --seed 7".split())
    assert inv.subcommand == "simulate" and inv.settings["rho"] == 500.0 and inv.settings["seed"] == 7
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("[sweep]\nrho-grid = 100,200\nseed = 3\ntrials = 20\n")
    inv = parse_invocation(["sweep", "--config", str(cfg), "--out", str(tmp_path / "r.csv")])
    assert inv.settings["rho_grid"] == [100.0, 200.0] and inv.output[0].endswith("r.csv")


def test_overrides_win_over_file(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("[simulate]\nrho = 300\nseed = 1\n")
    inv = parse_invocation(["simulate", "--config", str(cfg), "--rho", "400"])
    assert inv.settings["rho"] == 400.0


@pytest.mark.parametrize("argv,flag", [
    ("simulate --rho -5 --seed 1", "--rho"),
    ("simulate --rho 500", "--seed"),
    ("sweep --rho-grid 300,200 --seed 1", "--rho-grid"),
    ("simulate --rho 500 --seed 1 --trials 0", "--trials"),
    ("chenstein --epsilon 0.7", "--epsilon"),
    ("chenstein --domain square", "--domain"),
    ("simulate --rho abc --seed 1", "--rho"),
    ("simulate --rho 2 --b -3 --seed 1", "--b"),
])
def test_bad_flags_exit_2(argv, flag, capsys):
    with pytest.raises(SystemExit) as e:
        parse_invocation(argv.split())
    assert e.value.code == 2
    assert flag in capsys.readouterr().err


def test_unknown_flag_is_error(capsys):
    with pytest.raises(SystemExit) as e:
        parse_invocation(["theory", "--bogus", "1"])
    assert e.value.code == 2


def test_help_lists_every_flag(capsys):
    with pytest.raises(SystemExit):
        parse_invocation(["simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--model", "--sigma", "--alpha", "--file", "--rho", "--rho-grid", "--b", "--epsilon",
                 "--trials", "--seed", "--workers", "--M", "--domain", "--builder", "--eps-miss", "--out",
                 "--format", "--dump-trials", "--emit-config", "output columns"):
        assert flag in text


def test_theory_output(capsys):
    code, out, _ = run(["theory", "--b", "0"], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert tuple(header) == COLUMNS["theory"]
    vals = {r[0]: float(r[1]) for r in rows}
    assert vals["mean_isolated_limit"] == 1.0
    assert vals["prob_no_isolated_limit"] == pytest.approx(0.367879, abs=1e-6)
    assert "# seed=" in out and "# config_hash=" in out and "# version=" in out


def test_validate_model_rejects_increasing_knots(tmp_path, capsys):
    f = tmp_path / "bad.tab"
    f.write_text("0 1\n1 0.4\n2 0.6\n")
    code, _, err = run(["validate-model", "--model", "tabulated", "--file", str(f)], capsys)
    assert code == 1 and "monotonicity" in err


def test_validate_model_ok(capsys):
    code, out, _ = run(["validate-model", "--model", "rayleigh"], capsys)
    assert code == 0
    _, rows = parse_csv(out)
    assert float(rows[-1][2]) == pytest.approx(math.pi)


def test_numerical_failure_exit_1(tmp_path, capsys):
    # decay fails for a heavy tabulated tail
    f = tmp_path / "heavy.tab"
    f.write_text("\n".join(f"{x} {min(1.0, 1 / x**2)}" for x in [0.5 * 1.05**i for i in range(250)]))
    code, _, err = run(["validate-model", "--model", "tabulated", "--file", str(f)], capsys)
    assert code == 1 and "decay" in err


def test_simulate_deterministic(tmp_path, capsys):
    argv = "simulate --rho 150 --trials 60 --seed 4".split()
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv + ["--workers", "3"], capsys)
    assert body(a) == body(b)
    header, rows = parse_csv(a)
    assert tuple(header) == COLUMNS["simulate"]
    assert {r[2] for r in rows} >= {"mean_W", "p_no_isolated", "p_connected", "tv_limit", "p_giant", "xi_2"}


def test_env_workers_fallback(monkeypatch):
    monkeypatch.setenv("RCM_LAB_WORKERS", "3")
    assert parse_invocation("simulate --rho 150 --seed 1".split()).settings["workers"] == 3
    assert parse_invocation("simulate --rho 150 --seed 1 --workers 2".split()).settings["workers"] == 2


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "s.csv"
    dump = tmp_path / "t.jsonl"
    code, _, _ = run(f"sweep --rho-grid 100,200 --trials 30 --seed 2 --out {out} --dump-trials {dump}".split(), capsys)
    assert code == 0
    text = out.read_bytes().decode()
    assert "\r" not in text
    header, rows = parse_csv(text)
    assert tuple(header) == COLUMNS["sweep"]
    assert all(len(r) == len(header) for r in rows)
    assert {float(r[0]) for r in rows} == {100.0, 200.0}
    assert len(dump.read_text().splitlines()) == 60
    code, _, _ = run(f"sweep --rho-grid 100,200 --trials 30 --seed 2 --out {tmp_path / 'j.jsonl'} --format jsonl".split(), capsys)
    assert (tmp_path / "j.jsonl").read_text().startswith('{"meta"')


def test_chenstein_output(capsys):
    code, out, _ = run("chenstein --rho-grid 1000,10000".split(), capsys)
    header, rows = parse_csv(out)
    assert code == 0 and tuple(header) == COLUMNS["chenstein"]
    assert float(rows[1][-1]) < float(rows[0][-1])


@pytest.mark.parametrize("argv", [
    "simulate --rho 500 --trials 50 --seed 9 --model lognormal --sigma 6 --domain square",
    "sweep --rho-grid 100,200,400 --seed 1 --builder exact --eps-miss 0.05 --M 10",
    "chenstein --rho-grid 1000,2000 --epsilon 0.2 --b 1",
])
def test_emit_config_round_trip(tmp_path, argv):
    path = tmp_path / "out.cfg"
    first = parse_invocation(argv.split() + ["--emit-config", str(path)])
    assert execute(first) == 0
    second = parse_invocation([first.subcommand, "--config", str(path)])
    assert second.settings == first.settings
