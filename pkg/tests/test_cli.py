import numpy as np
import pytest

from embedcap.capacity import capacity_zero_order
from embedcap.cli import DEFAULT_SEED, SEED_ENV, main, parse_model_spec
from embedcap.renewal_models import InterarrivalModel as M, sample_interarrivals


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_trace(path, model, n, seed):
    gaps = sample_interarrivals(model, n, np.random.default_rng(seed))
    np.savetxt(path, np.cumsum(gaps), fmt="%.12f")
    return path


# -- model grammar -----------------------------------------------------------

@pytest.mark.parametrize("text,expected", [
    ("exponential", M.exponential()),
    ("exp", M.exponential()),
    ("erlang:xi=2", M.erlang(2)),
    ("gamma:xi=0.3@2.5", M.gamma(0.3, rate=2.5)),
    ("weibull:b=0.6", M.weibull(0.6)),
    ("pareto:b=3,rate=4", M.pareto(3, rate=4.0)),
    ("lognormal:sigma=1", M.lognormal(1.0)),
    ("shifted-exponential:a=0.8", M.shifted_exponential(0.8)),
    ("uniform@10", M.uniform(rate=10.0)),
])
def test_parse_model_spec(text, expected):
    assert parse_model_spec(text) == expected


@pytest.mark.parametrize("text,fragment", [
    ("erlang:xi=2.5", "xi"),
    ("weibull:b=-1", "b"),
    ("weibull:q=1", "q"),
    ("erlang", "xi"),
    ("nosuch", "nosuch"),
    ("gamma:xi=abc", "xi"),
])
def test_parse_model_spec_errors_name_parameter(text, fragment):
    with pytest.raises(ValueError, match=fragment):
        parse_model_spec(text)


# -- capacity ----------------------------------------------------------------

def test_capacity_examples(capsys):
    assert run(capsys, "capacity", "--model", "exponential", "--delta", "1", "--method", "zero") == (
        0, "1.0,zero,0.5\n", "")
    code, out, _ = run(capsys, "capacity", "--model", "erlang:xi=2", "--delta", "2", "--method", "zero")
    delta, method, value = out.strip().split(",")
    assert (code, delta, method) == (0, "2.0", "zero")
    assert float(value) == pytest.approx(0.7805, abs=1e-4)


def test_capacity_infinite_variance_error(capsys):
    code, out, err = run(capsys, "capacity", "--model", "pareto:b=1.5", "--delta", "1", "--method", "linear:1")
    assert code != 0 and out == ""
    assert "infinite second moment" in err


def test_capacity_physical_delay(capsys):
    _, a, _ = run(capsys, "capacity", "-m", "erlang:xi=2", "--max-delay", "0.5", "--rate", "4")
    _, b, _ = run(capsys, "capacity", "-m", "erlang:xi=2@4", "--max-delay", "0.5")
    _, c, _ = run(capsys, "capacity", "-m", "erlang:xi=2", "-d", "2")
    assert a == b == c


def test_capacity_needs_exactly_one_delay(capsys):
    code, out, err = run(capsys, "capacity", "-m", "exponential", "-d", "1", "--max-delay", "1")
    assert code != 0 and out == "" and "error" in err
    code, out, _ = run(capsys, "capacity", "-m", "exponential")
    assert code != 0 and out == ""


def test_capacity_monte_carlo_row_has_stderr(capsys):
    code, out, _ = run(capsys, "capacity", "-m", "exponential", "-d", "1", "--method", "zero,mc-chain:1e5",
                       "--seed", "5")
    rows = [r.split(",") for r in out.splitlines()]
    assert code == 0 and len(rows) == 2
    assert len(rows[0]) == 3 and len(rows[1]) == 4
    assert float(rows[1][2]) == pytest.approx(0.5, abs=0.02)


def test_bad_model_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["capacity", "-m", "erlang:xi=0", "-d", "1"])
    assert info.value.code != 0
    out, err = capsys.readouterr()
    assert out == "" and "xi" in err


# -- sweep -------------------------------------------------------------------

def test_sweep_exponential_closed_form(capsys):
    code, out, _ = run(capsys, "sweep", "-m", "exponential", "--delta-min", "0.1", "--delta-max", "10",
                       "--points", "7", "--log", "--methods", "zero,linear:1")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "delta,method,capacity,stderr"
    assert len(lines) == 1 + 14
    deltas = []
    for row in lines[1:]:
        d, _, c, se = row.split(",")
        assert float(c) == pytest.approx(float(d) / (1 + float(d)), abs=1e-8)
        assert se == ""
        deltas.append(float(d))
    assert deltas == sorted(deltas)
    assert deltas[0] == pytest.approx(0.1) and deltas[-1] == pytest.approx(10.0)


def test_sweep_two_points(capsys):
    code, out, _ = run(capsys, "sweep", "-m", "uniform", "--delta-min", "1", "--delta-max", "2", "--points", "2",
                       "--methods", "zero,linear:1,linear:2")
    assert code == 0 and len(out.splitlines()) == 1 + 2 * 3


def test_sweep_zero_vs_chain_erlang(capsys):
    code, out, _ = run(capsys, "sweep", "-m", "erlang:xi=2", "--delta-min", "0.5", "--delta-max", "4",
                       "--points", "4", "--methods", "zero,mc-chain:1e6", "--seed", "11")
    rows = [r.split(",") for r in out.splitlines()[1:]]
    zero = [float(r[2]) for r in rows if r[1] == "zero"]
    sim = [float(r[2]) for r in rows if r[1].startswith("mc-chain")]
    assert code == 0 and len(zero) == len(sim) == 4
    assert max(abs(a - b) for a, b in zip(zero, sim)) <= 0.02


@pytest.mark.parametrize("argv", [
    ["--delta-min", "2", "--delta-max", "1"],
    ["--delta-min", "1", "--delta-max", "2", "--points", "1"],
])
def test_sweep_bad_grid(capsys, argv):
    code, out, err = run(capsys, "sweep", "-m", "exponential", *argv)
    assert code != 0 and out == "" and err.startswith("embedcap sweep: error")


# -- order -------------------------------------------------------------------

def test_order_examples(capsys):
    assert run(capsys, "order", "erlang:xi=2", "exponential") == (0, "less_variable,C1>=C2\n", "")
    code, out, _ = run(capsys, "order", "exponential", "exponential")
    assert code == 0 and out.startswith("less_variable,")
    code, out, _ = run(capsys, "order", "weibull:b=0.6", "gamma:xi=3", "--criterion", "lorenz")
    assert code == 0 and out.strip().split(",")[0] in {"incomparable", "more_variable", "less_variable"}


# -- matrix ------------------------------------------------------------------

def test_matrix_dump(capsys):
    code, out, _ = run(capsys, "matrix", "-m", "erlang:xi=2", "-d", "1.5", "--order", "2")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "h,k,entry" and len(lines) == 1 + 25
    entries = {(int(h), int(k)): float(v) for h, k, v in (r.split(",") for r in lines[1:])}
    assert entries[(1, 2)] == pytest.approx(entries[(2, 1)], abs=1e-12)
    code, four, _ = run(capsys, "matrix", "-m", "erlang:xi=2", "-d", "1.5", "--order", "1", "--fourier")
    fentries = {(int(h), int(k)): float(v) for h, k, v in (r.split(",") for r in four.splitlines()[1:])}
    assert fentries[(0, 0)] == pytest.approx(entries[(0, 0)], abs=1e-4)


def test_matrix_fourier_unsupported_family(capsys):
    code, out, err = run(capsys, "matrix", "-m", "weibull:b=0.6", "-d", "1", "--fourier")
    assert code != 0 and out == "" and "error" in err


# -- trace -------------------------------------------------------------------

@pytest.fixture
def weibull_files(tmp_path):
    a = write_trace(tmp_path / "src.txt", M.weibull(0.6), 10_000, 101)
    b = write_trace(tmp_path / "dst.txt", M.weibull(0.6), 10_000, 202)
    return a, b


def test_trace_scrambled_pipeline(capsys, weibull_files):
    a, b = weibull_files
    code, out, err = run(capsys, "trace", str(a), str(b), "--scramble", "--seed", "7")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "delta,empirical_capacity,theoretical_capacity,abs_error"
    assert len(lines) == 1 + 5
    assert "weibull shape" in err
    for row in lines[1:]:
        d, _, _, e = map(float, row.split(","))
        if d <= 2:
            assert e <= 0.02


def test_trace_output_file_and_rerun(capsys, weibull_files, tmp_path):
    a, b = weibull_files
    out1, out2 = tmp_path / "o1.csv", tmp_path / "o2.csv"
    assert run(capsys, "trace", str(a), str(b), "--scramble", "--seed", "3", "-o", str(out1))[:2] == (0, "")
    assert run(capsys, "trace", str(a), str(b), "--scramble", "--seed", "3", "-o", str(out2))[0] == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_text().startswith("delta,")


def test_trace_missing_file(capsys, tmp_path):
    missing = tmp_path / "absent.txt"
    code, out, err = run(capsys, "trace", str(missing), str(missing))
    assert code != 0 and out == "" and str(missing) in err


def test_trace_n_larger_than_file(capsys, tmp_path):
    a = write_trace(tmp_path / "a.txt", M.exponential(), 100, 1)
    code, out, err = run(capsys, "trace", str(a), str(a), "--n", "1000")
    assert code != 0 and out == "" and "error" in err


def test_trace_parse_error_has_line(capsys, tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("1.0\n2.0\nxyz\n")
    code, out, err = run(capsys, "trace", str(f), str(f))
    assert code != 0 and out == "" and f"{f}:3:" in err


# -- determinism -------------------------------------------------------------

def test_monte_carlo_byte_identical(capsys):
    argv = ["capacity", "-m", "weibull:b=0.6", "-d", "1", "--method", "mc-chain:1e5,mc-bgm:1e4", "--seed", "9"]
    assert run(capsys, *argv) == run(capsys, *argv)


def test_seed_env_var(capsys, monkeypatch):
    argv = ["capacity", "-m", "uniform", "-d", "1", "--method", "mc-chain:1e5"]
    monkeypatch.delenv(SEED_ENV, raising=False)
    default = run(capsys, *argv)[1]
    assert default == run(capsys, *argv, "--seed", str(DEFAULT_SEED))[1]
    monkeypatch.setenv(SEED_ENV, "1234")
    env = run(capsys, *argv)[1]
    assert env == run(capsys, *argv, "--seed", "1234")[1]
    assert env != default
    monkeypatch.setenv(SEED_ENV, "notanumber")
    code, out, err = run(capsys, *argv)
    assert code != 0 and out == "" and SEED_ENV in err
