import json

import numpy as np
import pytest

from ntkspectra.errors import ConfigError
from ntkspectra.expcli import (CATALOG, EXPERIMENT_IDS, ResultTable, build_config, list_experiments, read_table,
                               run, validate)
from ntkspectra.expcli.cli import main
from ntkspectra.expcli.figures import fit_kappa_law


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_empty_config_lists_missing_fields():
    problems = validate({})
    for key in ("id", "density", "n", "seed"):
        assert "missing required field: %s" % key in problems


def test_unknown_id_and_fields():
    problems = validate({"id": "fig99", "colour": 1})
    assert any("unknown experiment id" in p for p in problems)
    assert any("unknown fields: colour" in p for p in problems)


def test_invalid_subconfigs():
    problems = validate({"id": "custom", "density": {"kind": "piecewise", "weights": [1, -2]}, "n": 0, "seed": -1})
    assert any(p.startswith("invalid density") for p in problems)
    assert "n must be a positive integer" in problems
    assert "seed must be a non-negative integer" in problems


def test_validate_has_no_side_effects(tmp_path):
    cfg = {"id": "fig4", "n": 100}
    before = json.dumps(cfg)
    validate(cfg)
    assert json.dumps(cfg) == before
    assert list(tmp_path.iterdir()) == []


def test_catalog_covers_every_id_with_criteria():
    rows = list_experiments()
    assert [r["id"] for r in rows] == list(EXPERIMENT_IDS)
    for r in rows:
        assert r["criteria"] and r["runtime_s"] > 0 and r["memory_mb"] > 0
        assert r["figure"]
    covered = set()
    for r in rows:
        covered.update(r["criteria"])
    assert covered == set(range(1, 11))


def test_fig11_entry_cites_setup():
    entry = next(r for r in list_experiments() if r["id"] == "fig11")
    assert entry["figure"] == "Figure 11"
    assert "m=256" in entry["setup"] and "η=0.05" in entry["setup"]


def test_build_config_merges_defaults():
    cfg = build_config({"id": "fig7", "train": {"eta": 0.002}}, seed=3)
    assert cfg.seed == 3
    assert cfg.params["train"]["eta"] == 0.002
    assert cfg.params["train"]["delta"] == 0.05
    assert cfg.params["net"]["width"] == 4000
    paper = build_config({"id": "fig4"}, paper_scale=True)
    assert paper.params["n"] == 50000


def test_config_hash_is_stable():
    a = build_config({"id": "fig6"}, seed=1)
    b = build_config({"id": "fig6"}, seed=1)
    c = build_config({"id": "fig6"}, seed=2)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_build_config_rejects_invalid():
    with pytest.raises(ConfigError, match="missing required field"):
        build_config({})


def test_fit_kappa_law_exact():
    k = np.repeat([4, 6, 8], 3)
    p = np.tile([1.0, 2.0, 4.0], 3)
    t = 7.0 * k ** 2 / p
    c, r2 = fit_kappa_law(k, p, t)
    assert c == pytest.approx(7.0) and r2 == pytest.approx(1.0)
    c2, _ = fit_kappa_law(k, p, np.where(np.arange(9) == 0, -1, t))
    assert c2 == pytest.approx(7.0)


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "fig11" in out and "Figure 12" in out
    assert main(["--json", "list"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == len(EXPERIMENT_IDS)


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "sample", _write(tmp_path, {})]) == 2
    assert "missing required field" in capsys.readouterr().err
    assert main(["--out", str(tmp_path), "sample", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["--out", str(tmp_path), "sample", str(tmp_path / "bad.json")]) == 2
    assert main(["reproduce", "fig99"]) == 2


def test_cli_budget_exit_code(tmp_path, capsys):
    cfg = {"id": "custom", "density": {"kind": "uniform"}, "n": 10 ** 6, "seed": 0}
    assert main(["--quiet", "--out", str(tmp_path), "gram", _write(tmp_path, cfg)]) == 4
    assert "8000000000000 bytes" in capsys.readouterr().err


def test_cli_numerical_fault_exit_code(tmp_path):
    cfg = {"id": "custom", "density": {"kind": "uniform"}, "n": 100, "seed": 0,
           "target": {"kind": "cosine", "kappa": 1}, "net": {"width": 100, "tau": 1.0},
           "train": {"eta": 50.0, "max_iters": 1000}}
    assert main(["--quiet", "--out", str(tmp_path), "train", _write(tmp_path, cfg)]) == 3


def test_cli_subcommands(tmp_path):
    base = {"id": "custom", "density": {"kind": "piecewise", "weights": [1, 2, 4]}, "n": 200, "seed": 0, "k": 6,
            "target": {"kind": "sine", "kappa": 2}, "net": {"width": 200, "tau": 0.5},
            "train": {"eta": 0.004, "max_iters": 50, "record_every": 10}}
    path = _write(tmp_path, base)
    out = tmp_path / "out"
    for cmd in ("sample", "gram", "eigsys", "modes", "train", "predict"):
        assert main(["--quiet", "--threads", "1", "--out", str(out), cmd, path]) == 0, cmd
    names = {p.name for p in (out / "custom").iterdir()}
    assert {"sample.csv", "gram.npy", "eigenvalues.csv", "eigenvectors.csv", "modes.csv", "trace.csv",
            "convergence.csv", "net.bin", "prediction.csv", "summary.csv"} <= names
    prov, cols, rows = read_table(out / "custom" / "trace.csv")
    assert cols == ["iter", "loss", "region_0_mse", "region_1_mse", "region_2_mse", "residual_norm"]
    assert len(rows) == 6
    assert prov["experiment"] == "custom" and "config_hash" in prov and prov["seed"] == "0"


def test_reproduce_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["--quiet", "--json", "--seed", "4", "--out", str(tmp_path / name), "reproduce", "fig6"]) == 0
    files = sorted(p.name for p in (tmp_path / "a" / "fig6").iterdir())
    assert "fig6_tail.csv" in files and "fig6_tail.json" in files
    for f in files:
        assert (tmp_path / "a" / "fig6" / f).read_bytes() == (tmp_path / "b" / "fig6" / f).read_bytes()
    text = (tmp_path / "a" / "fig6" / "fig6_tail.csv").read_text()
    assert text.startswith("# experiment: fig6\n# config_hash: ")
    assert "# seed: 4\n" in text


def test_reproduce_with_override_file(tmp_path):
    path = _write(tmp_path, {"id": "fig4", "n": 600, "k": 9})
    assert main(["--quiet", "--out", str(tmp_path), "reproduce", "fig4", path]) == 0
    prov, cols, rows = read_table(tmp_path / "fig4" / "fig4_uniform.csv")
    assert cols == ["q", "formula_lambda", "empirical_lambda", "rel_err"]
    assert len(rows) == 9
    other = _write(tmp_path, {"id": "fig5"}, "other.json")
    assert main(["--quiet", "--out", str(tmp_path), "reproduce", "fig4", other]) == 2


def test_run_custom_on_sphere():
    cfg = build_config({"id": "custom", "density": {"kind": "hemisphere", "ratio": 3}, "n": 150, "seed": 0, "k": 4})
    res = run(cfg)
    assert res.table("custom_eigenvalues").column("frequency").tolist() == [0, 1, 1, 1]


def test_result_table_rejects_bad_rows():
    t = ResultTable("x", ["a", "b"])
    with pytest.raises(ValueError):
        t.add(1)


def test_small_figure_runners():
    res = run(build_config({"id": "fig10", "n": 400, "k": 8}))
    assert res.summary["min_fourier_correlation"] > 0.9
    res = run(build_config({"id": "fig8", "n": 400, "k": 4}))
    assert res.table("fig8_energy").column("dense_energy").min() > 0.5
    res = run(build_config({"id": "fig5", "n": 300, "k": 3}))
    assert len(res.table("fig5_eigenvalues").rows) == 3


def test_catalog_defaults_are_valid():
    for exp_id, entry in CATALOG.items():
        if exp_id != "custom":
            assert validate(dict(entry["defaults"], id=exp_id)) == []


def test_seed_flag_satisfies_required_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"density": {"kind": "uniform", "d": 2}, "n": 50, "k": 3}))
    assert main(["--quiet", "--out", str(tmp_path), "eigsys", str(cfg)]) == 2
    assert main(["--quiet", "--seed", "3", "--out", str(tmp_path), "eigsys", str(cfg)]) == 0
