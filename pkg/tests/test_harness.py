import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from infgp_bo import cli
from infgp_bo.benchmarks import RegretTrace
from infgp_bo.config import ExperimentConfig, fields_help, from_mapping, load_config, parse_text
from infgp_bo.errors import ConfigError
from infgp_bo.harness import aggregate, export_surface_weights, read_aggregate, run_experiment, weights_matrix
from infgp_bo.svgplot import band_plot

SMALL = """
benchmark = quadratic
dim = 1
algorithms = infgp_ts, gp_ei
budget = 3
replications = 2
seed = 11
workers = 1
weights_every = 1
gibbs.B = 15
baseline.iters = 30
baseline.burn_in = 10
"""

SVG = "{http://www.w3.org/2000/svg}"


def make_trace(rs, start=0):
    tr = RegretTrace(1)
    for i, r in enumerate(rs):
        tr.add(start + i, [0.0], 0.0, r)
    return tr


# ---------------------------------------------------------------------------
# config


def test_defaults_roundtrip():
    cfg = ExperimentConfig()
    again = parse_text(cfg.to_text())
    assert again.values == cfg.values


def test_parse_values():
    cfg = parse_text(SMALL + "acquisition.C1 = 0.5\nprior.b_phi = none\n")
    assert cfg["budget"] == 3 and cfg.algorithms == ("infgp_ts", "gp_ei")
    assert cfg.acquisition_config().C1 == 0.5
    assert cfg.gibbs_config().B == 15
    assert cfg.prior_overrides() == {}


def test_comments_and_blank_lines():
    cfg = parse_text("# a comment\n\nbudget = 7  # trailing\n")
    assert cfg["budget"] == 7


@pytest.mark.parametrize(
    "text,field",
    [
        ("budget = 0", "budget"),
        ("budget = many", "budget"),
        ("colour = red", "colour"),
        ("algorithms = gp_ei, magic", "algorithms"),
        ("acquisition.C1 = 2", "acquisition.C1"),
        ("acquisition.lambda1 = 1", "acquisition.lambda1"),
        ("gibbs.B = 0", "gibbs.B"),
        ("gibbs.phi_mode = spiral", "gibbs.phi_mode"),
        ("prior.a_tau = -1", "prior.a_tau"),
        ("benchmark = branin", "benchmark"),
        ("budget 5", None),
        ("budget = 5\nbudget = 6", "budget"),
    ],
)
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as err:
        parse_text(text)
    if field is not None:
        assert err.value.field == field


def test_output_dir_env_override(monkeypatch, tmp_path):
    monkeypatch.setenv("INFGP_BO_OUTPUT", str(tmp_path / "env"))
    assert ExperimentConfig().output_dir == tmp_path / "env"


def test_with_values():
    cfg = from_mapping({"budget": "4"}).with_values(benchmark="ackley_ns", gibbs__B=9)
    assert cfg["benchmark"] == "ackley_ns" and cfg.gibbs_config().B == 9 and cfg["budget"] == 4


def test_fields_help_lists_every_section():
    text = fields_help()
    for key in ("budget", "acquisition.C1", "gibbs.B", "prior.a_tau", "baseline.iters", "objective.alpha"):
        assert key in text


# ---------------------------------------------------------------------------
# aggregation and weights


def test_aggregate_matches_direct_recomputation(rng):
    traces = [make_trace(rng.uniform(0, 1, 6), start=-2) for _ in range(5)]
    iters, mean, se, count = aggregate(traces)
    cum = np.array([t.R_cum for t in traces])
    np.testing.assert_array_equal(iters, np.arange(-2, 4))
    np.testing.assert_allclose(mean, cum.mean(0), atol=1e-12)
    np.testing.assert_allclose(se, cum.std(0, ddof=1) / np.sqrt(5), atol=1e-12)
    assert np.all(count == 5)


def test_aggregate_truncated_and_single():
    full, short = make_trace([1.0, 1.0, 1.0]), make_trace([2.0])
    _, mean, se, count = aggregate([full, short, None])
    np.testing.assert_allclose(mean, [1.5, 2.0, 3.0])
    np.testing.assert_array_equal(count, [2, 1, 1])
    assert se[1] == 0.0 and se[2] == 0.0


def test_weights_export_pads_and_keeps_simplex():
    cps = [(10, np.array([0.5, 0.5])), (20, np.array([0.2, 0.3, 0.5]))]
    iters, mat = weights_matrix(cps)
    np.testing.assert_array_equal(iters, [10, 20])
    np.testing.assert_allclose(mat.sum(1), 1.0)
    lines = export_surface_weights(cps).splitlines()
    assert lines[0] == "iter,w1,w2,w3"
    assert lines[1].split(",")[-1] == "0.0"


# ---------------------------------------------------------------------------
# svg


def test_band_plot_structure():
    x = np.arange(5)
    svg = band_plot(x, {"a": (np.arange(5.0), np.ones(5)), "b<&>": (np.zeros(5), np.zeros(5))}, title="t")
    root = ET.fromstring(svg)
    bands = root.findall(f".//{SVG}polygon[@class='band']")
    means = root.findall(f".//{SVG}polyline[@class='mean']")
    assert [b.get("data-label") for b in bands] == ["a", "b<&>"]
    assert len(means) == 2
    pts = [tuple(map(float, p.split(","))) for p in means[0].get("points").split()]
    assert len(pts) == 5
    ys = [p[1] for p in pts]
    assert ys == sorted(ys, reverse=True)  # increasing values are drawn upwards


# ---------------------------------------------------------------------------
# end to end


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = parse_text(SMALL)
    summary = run_experiment(cfg, out)
    return cfg, summary, out / "quadratic"


def test_run_layout(small_run):
    _, summary, out = small_run
    for name in ("config.txt", "aggregate.csv", "regret.svg", "summary.json"):
        assert (out / name).exists()
    for alg in ("infgp_ts", "gp_ei"):
        for rep in range(2):
            assert (out / alg / f"rep_{rep:03d}.csv").exists()
    assert (out / "infgp_ts" / "weights_000.csv").exists()
    assert not (out / "gp_ei" / "weights_000.csv").exists()
    assert summary.n_failures == 0
    assert load_config(out / "config.txt").values == parse_text(SMALL).values


def test_run_aggregate_recomputes_from_traces(small_run):
    _, _, out = small_run
    agg = read_aggregate(out / "aggregate.csv")
    for alg in ("infgp_ts", "gp_ei"):
        cum = np.array([RegretTrace.from_csv(out / alg / f"rep_{r:03d}.csv").R_cum for r in range(2)])
        np.testing.assert_allclose(agg[alg]["mean"], cum.mean(0), atol=1e-12)
        np.testing.assert_allclose(agg[alg]["se"], cum.std(0, ddof=1) / np.sqrt(2), atol=1e-12)


def test_run_summary_json(small_run):
    _, summary, out = small_run
    data = json.loads((out / "summary.json").read_text())
    assert data["algorithms"] == ["infgp_ts", "gp_ei"]
    assert data["final_mean"]["gp_ei"] == pytest.approx(np.mean(summary.final_regret["gp_ei"]))


def test_run_weights_rows_are_simplices(small_run):
    _, _, out = small_run
    rows = (out / "infgp_ts" / "weights_000.csv").read_text().splitlines()[1:]
    assert len(rows) == 3
    for row in rows:
        w = np.array([float(v) for v in row.split(",")[1:]])
        assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)


def test_rerun_is_byte_identical(small_run, tmp_path):
    cfg, _, out = small_run
    run_experiment(cfg, tmp_path)
    for alg in ("infgp_ts", "gp_ei"):
        for rep in range(2):
            name = f"{alg}/rep_{rep:03d}.csv"
            assert (tmp_path / "quadratic" / name).read_bytes() == (out / name).read_bytes()
    assert (tmp_path / "quadratic" / "aggregate.csv").read_bytes() == (out / "aggregate.csv").read_bytes()


def test_parallel_matches_sequential(small_run, tmp_path):
    cfg, _, out = small_run
    run_experiment(cfg, tmp_path, workers=2)
    name = "infgp_ts/rep_001.csv"
    assert (tmp_path / "quadratic" / name).read_bytes() == (out / name).read_bytes()


# ---------------------------------------------------------------------------
# cli


def test_cli_validate(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text(SMALL)
    assert cli.main(["validate", "--config", str(good)]) == cli.EXIT_OK
    bad = tmp_path / "bad.txt"
    bad.write_text("budget = -3\n")
    assert cli.main(["validate", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "budget" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.txt")]) == cli.EXIT_CONFIG


def test_cli_run(tmp_path, capsys):
    path = tmp_path / "cfg.txt"
    path.write_text(SMALL.replace("algorithms = infgp_ts, gp_ei", "algorithms = gp_ucb").replace("replications = 2", "replications = 1"))
    assert cli.main(["run", "--config", str(path), "--output", str(tmp_path / "out")]) == cli.EXIT_OK
    assert (tmp_path / "out" / "quadratic" / "gp_ucb" / "rep_000.csv").exists()
    assert "quadratic" in capsys.readouterr().out


def test_cli_all_failed_is_runtime_error(tmp_path, monkeypatch):
    import infgp_bo.harness as harness

    def boom(*args, **kwargs):
        raise RuntimeError("simulated")

    monkeypatch.setattr(harness, "optimize", boom)
    path = tmp_path / "cfg.txt"
    path.write_text(SMALL)
    assert cli.main(["run", "--config", str(path), "--output", str(tmp_path / "out")]) == cli.EXIT_RUNTIME
    data = json.loads((tmp_path / "out" / "quadratic" / "summary.json").read_text())
    assert "simulated" in data["failures"]["gp_ei"]["0"]
