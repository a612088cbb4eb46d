import csv
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probmeshless import cli
from probmeshless.config import SCHEMA, dump_config, format_value, load_config, parse_config
from probmeshless.errors import ConfigurationError, NumericalError


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --------------------------------------------------------------------------- config round trip

_word = st.builds(lambda a, b: a + b, st.sampled_from("abcdefghijklmnopqrstuvwxyz_/"),
                  st.text("abcdefghijklmnopqrstuvwxyz0123456789_/.-", max_size=12)).filter(
    lambda s: s not in ("true", "false"))
_float = st.floats(allow_nan=False, allow_infinity=False, width=64)


def _value_for(key):
    kind, allowed = SCHEMA[key]
    if allowed is not None:
        return st.sampled_from(allowed)
    if kind is int:
        return st.integers(-10 ** 6, 10 ** 6)
    if kind is float:
        return st.one_of(_float, st.integers(-1000, 1000))
    if kind in (str, "path"):
        return _word
    if kind == "ints":
        return st.one_of(st.integers(1, 500), st.lists(st.integers(1, 500), min_size=1, max_size=5))
    if kind == "floats":
        return st.lists(_float, min_size=1, max_size=6)
    return st.lists(st.sampled_from(["pmm", "plugin"]), min_size=1, max_size=2)


@st.composite
def configs(draw):
    keys = draw(st.lists(st.sampled_from(sorted(SCHEMA)), unique=True, max_size=12))
    return {k: draw(_value_for(k)) for k in keys}


@settings(max_examples=200)
@given(configs())
def test_parse_dump_parse_is_identity(values):
    text = "".join(f"{k} = {format_value(v)}\n" for k, v in values.items())
    first = parse_config(text)
    second = parse_config(dump_config(first))
    assert first == second
    assert dump_config(second) == dump_config(first)


def test_comments_blank_lines_and_lists():
    cfg = parse_config("# header\n\nproblem = poisson_1d   # trailing\ndesign.m = 10, 20,40\n"
                       "inference.likelihoods = pmm,\n")
    assert cfg.get("problem") == "poisson_1d"
    assert cfg.get("design.m") == [10, 20, 40]
    assert cfg.get("inference.likelihoods") == ["pmm"]


@pytest.mark.parametrize("text, fragment", [
    ("problem = poisson_1d\nbogus.key = 1\n", "<string>:2: unknown field 'bogus.key'"),
    ("seed = 1\nseed = 2\n", "set twice (first on line 1)"),
    ("problem poisson_1d\n", "<string>:1: expected 'key = value'"),
    ("\nseed = abc\n", "<string>:2: field 'seed': expected an integer"),
    ("kernel.family = gaussian_process\n", "field 'kernel.family': 'gaussian_process' is not one of"),
    ("seed =\n", "field 'seed' has no value"),
    ("Seed = 1\n", "malformed key"),
])
def test_config_errors_carry_line_and_field(text, fragment):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert fragment in str(exc.value)


def test_missing_referenced_file_is_reported(tmp_path):
    path = write_cfg(tmp_path, "design.source = file\ndesign.file = nowhere.csv\n")
    with pytest.raises(ConfigurationError, match="design.file.*does not exist"):
        load_config(path)


def test_relative_paths_resolve_against_config_directory(tmp_path):
    (tmp_path / "d.csv").write_text("x1,role\n0.5,interior\n")
    cfg = load_config(write_cfg(tmp_path, "design.file = d.csv\n"))
    assert cfg.get("design.file") == str(tmp_path / "d.csv")


def test_unreadable_config_is_a_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.cfg")


# --------------------------------------------------------------------------- exit codes

def test_exit_code_zero_on_success(tmp_path):
    cfg = write_cfg(tmp_path, "problem = poisson_1d\nseed = 0\ndesign.m = 10\nforward.samples = 2\n")
    assert cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("argv", [
    ["forward"],
    ["no-such-command"],
    ["forward", "--config", "/definitely/not/here.cfg"],
])
def test_exit_code_two_on_usage_or_config_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if len(argv) > 1 else argv) == 2


def test_exit_code_two_on_invalid_field(tmp_path):
    cfg = write_cfg(tmp_path, "problem = poisson_1d\nkernel.support_scale = wide\n")
    assert cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_three_on_numerical_failure(tmp_path):
    # at large theta the three branches collapse into one
    cfg = write_cfg(tmp_path, "problem = allen_cahn_2d\nseed = 0\nallen_cahn.theta = 2.0\n")
    assert cli.main(["allen-cahn", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_numerical_errors_map_to_exit_three(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise NumericalError("singular")
    monkeypatch.setitem(cli.COMMANDS, "design", boom)
    cfg = write_cfg(tmp_path, "problem = poisson_1d\n")
    assert cli.main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_console_script_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, "problem = poisson_1d\nbad = 1\n")
    proc = subprocess.run([sys.executable, "-m", "probmeshless.cli", "forward", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "unknown field 'bad'" in proc.stderr


# --------------------------------------------------------------------------- commands

FORWARD = "problem = poisson_1d\nseed = 3\nkernel.family = natural_poisson_1d\ndesign.m = 10, 39\nforward.samples = 3\n"


def test_forward_writes_solution_samples_and_convergence(tmp_path):
    cfg = write_cfg(tmp_path, FORWARD)
    assert cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    sol = read_csv(tmp_path / "o" / "solution.csv")
    assert list(sol[0]) == ["x", "mu", "sigma2", "exact"]
    assert len(sol) == 100
    samples = read_csv(tmp_path / "o" / "samples.csv")
    assert list(samples[0]) == ["x", "sample_1", "sample_2", "sample_3"]
    conv = read_csv(tmp_path / "o" / "convergence.csv")
    assert [int(r["m"]) for r in conv] == [10, 39]
    assert float(conv[1]["l2_error"]) < float(conv[0]["l2_error"])
    assert float(conv[1]["sigma2_l1"]) < float(conv[0]["sigma2_l1"])
    assert parse_config((tmp_path / "o" / "config.resolved").read_text()) == parse_config(FORWARD)


def test_forward_is_bit_identical_on_rerun(tmp_path):
    cfg = write_cfg(tmp_path, FORWARD)
    for d in ("a", "b"):
        assert cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("solution.csv", "samples.csv", "convergence.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_cfg(tmp_path, FORWARD)
    cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "4"])
    cli.main(["forward", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "3"])
    a, b, c = ((tmp_path / d / "samples.csv").read_bytes() for d in "abc")
    assert a != b and a == c
    assert "seed = 4" in (tmp_path / "b" / "config.resolved").read_text()


def test_inverse_grid_writes_posteriors_and_intervals(tmp_path):
    cfg = write_cfg(tmp_path, "problem = parametric_poisson_1d\nseed = 0\ndesign.m = 5, 40\n"
                              "inference.method = grid\ninference.grid_n = 300\n")
    assert cli.main(["inverse", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    post = read_csv(tmp_path / "o" / "posterior_m5.csv")
    assert list(post[0]) == ["theta", "pmm", "plugin"]
    theta = np.array([float(r["theta"]) for r in post])
    dens = np.array([float(r["pmm"]) for r in post])
    assert np.trapezoid(dens, theta) == pytest.approx(1.0, rel=1e-10)
    ci = read_csv(tmp_path / "o" / "credible_intervals.csv")
    assert [(r["m"], r["method"]) for r in ci] == [("5", "pmm"), ("5", "plugin"), ("40", "pmm"), ("40", "plugin")]
    sd = {(r["m"], r["method"]): float(r["sd"]) for r in ci}
    assert sd[("5", "pmm")] > sd[("40", "pmm")]


def test_inverse_pcn_and_pseudo_marginal_write_traces(tmp_path):
    base = "problem = parametric_poisson_1d\nseed = 1\ndesign.m = 10\ninference.iters = 200\ninference.burn = 50\n"
    for method, extra in (("pcn", ""), ("pseudo_marginal", "inference.lengthscale = half_cauchy\n"
                                                           "inference.proposal_sd = 0.02\n")):
        cfg = write_cfg(tmp_path, base + f"inference.method = {method}\n" + extra, f"{method}.cfg")
        out = tmp_path / method
        assert cli.main(["inverse", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_csv(out / "trace_m10_pmm.csv")
        assert len(rows) == 200
        if method == "pseudo_marginal":
            assert all(float(r["lengthscale"]) > 0 for r in rows)
        assert (out / "trace_m10_pmm.csv.meta.json").exists()


def test_half_cauchy_lengthscale_needs_pseudo_marginal(tmp_path):
    cfg = write_cfg(tmp_path, "problem = parametric_poisson_1d\nseed = 0\ndesign.m = 5\n"
                              "inference.lengthscale = half_cauchy\n")
    assert cli.main(["inverse", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_pcn_with_uniform_prior_is_a_configuration_error(tmp_path):
    cfg = write_cfg(tmp_path, "problem = parametric_poisson_1d\nseed = 0\ndesign.m = 5\ninference.method = pcn\n"
                              "prior.kind = uniform\nprior.a = 0.1\nprior.b = 3\ninference.iters = 10\n")
    assert cli.main(["inverse", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_mcmc_without_seed_is_a_configuration_error(tmp_path):
    cfg = write_cfg(tmp_path, "problem = parametric_poisson_1d\ndesign.m = 5\ninference.method = pcn\n"
                              "inference.iters = 10\n")
    assert cli.main(["inverse", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_design_command_writes_monotone_loss_trace(tmp_path):
    cfg = write_cfg(tmp_path, "problem = poisson_1d\nseed = 0\ndesign.m = 5\ndesign.sweeps = 2\n"
                              "design.candidates = 9\n")
    assert cli.main(["design", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    loss = [float(r["loss"]) for r in read_csv(tmp_path / "o" / "loss_trace.csv")]
    assert len(loss) == 3 and all(b <= a for a, b in zip(loss, loss[1:]))
    head = (tmp_path / "o" / "design_optimised.csv").read_text().splitlines()[0]
    assert head == "x1,role"


def test_design_file_round_trips_through_forward(tmp_path):
    cfg = write_cfg(tmp_path, "problem = poisson_1d\nseed = 0\ndesign.m = 5\ndesign.sweeps = 1\n")
    cli.main(["design", "--config", str(cfg), "--out", str(tmp_path)])
    fwd = write_cfg(tmp_path, "problem = poisson_1d\ndesign.source = file\ndesign.file = design_optimised.csv\n",
                    "fwd.cfg")
    assert cli.main(["forward", "--config", str(fwd), "--out", str(tmp_path / "f")]) == 0


def test_allen_cahn_small_run_writes_every_artifact(tmp_path):
    cfg = write_cfg(tmp_path, "problem = allen_cahn_2d\nseed = 0\nallen_cahn.grid_n = 12\nallen_cahn.bank_size = 4\n"
                              "observation.fine_grid_n = 20\ndesign.m = 4\ninference.iters = 20\ninference.burn = 5\n"
                              "inference.n_importance = 20\n")
    out = tmp_path / "o"
    assert cli.main(["allen-cahn", "--config", str(cfg), "--out", str(out)]) == 0
    for label in ("negative stable", "unstable", "positive stable"):
        rows = read_csv(out / f"crude_{label.replace(' ', '_')}.csv")
        assert len(rows) == 14 * 14 and list(rows[0]) == ["x1", "x2", "u"]
    assert len(read_csv(out / "observations.csv")) == 16
    for lik in ("pmm", "plugin"):
        rows = read_csv(out / f"trace_m4_{lik}.csv")
        assert len(rows) == 20 and all(r["solution_index"] in ("0", "1", "2") for r in rows)
    assert list(read_csv(out / "posterior_m4.csv")[0]) == ["bin_lo", "bin_hi", "pmm", "plugin"]
    assert len(read_csv(out / "summary.csv")) == 2


def test_allen_cahn_rejects_empirical_bayes(tmp_path):
    cfg = write_cfg(tmp_path, "problem = allen_cahn_2d\nseed = 0\nallen_cahn.grid_n = 12\nallen_cahn.bank_size = 3\n"
                              "observation.fine_grid_n = 20\ninference.lengthscale = empirical_bayes\n")
    assert cli.main(["allen-cahn", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_selftest_command_passes(tmp_path, capsys):
    assert cli.main(["selftest", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") >= 5
    assert all(r["passed"] == "1" for r in read_csv(tmp_path / "selftest.csv"))
