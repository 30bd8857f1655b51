import math

import numpy as np
import pytest

from latdisc import cli, experiments
from latdisc.config import ExperimentConfig, build_config, parse_domain, read_config_file
from latdisc.errors import InvalidArgument


def test_parse_domain_grammar():
    d = parse_domain("superellipse:omega=6, a=1.5 ,b=2,theta=0.73")
    assert (d.omega, d.base.a, d.base.b, d.theta) == (6, 1.5, 2.0, 0.73)
    d = parse_domain("disk")
    assert d.omega == 2 and d.base.a == 1.0
    assert parse_domain("disk:r=2").base.b == 2.0
    for bad in ("cube", "superellipse:omega=3", "superellipse:omega=4,c=1", "superellipse:omega=x",
                "superellipse:omega=4,omega=6"):
        with pytest.raises(InvalidArgument):
            parse_domain(bad)


def test_config_validation(tmp_path):
    with pytest.raises(InvalidArgument):
        ExperimentConfig(mode="scaling", j_max=17)
    with pytest.raises(InvalidArgument):
        ExperimentConfig(mode="unknown")
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nmode = scaling\njmax = 9   # trailing\nthetas = 0.1, 0.2\n")
    cfg = build_config(read_config_file(p))
    assert cfg.j_max == 9 and cfg.thetas == (0.1, 0.2)
    with pytest.raises(InvalidArgument):
        build_config({"mode": "scaling", "bogus": "1"})


def test_theta_sampling_seeded():
    a = ExperimentConfig(mode="scaling", theta_count=5, seed=3).theta_values()
    b = ExperimentConfig(mode="scaling", theta_count=5, seed=3).theta_values()
    assert a == b and all(0 <= t < math.pi / 2 for t in a)
    assert ExperimentConfig(mode="scaling", domain="superellipse:theta=0.4").theta_values() == [0.4]


def test_fit_exponent():
    x = np.log(2.0) * np.arange(6, 12)
    fit = experiments.fit_exponent(zip(x, 0.75 * x + 1.0))
    assert fit.slope == pytest.approx(0.75) and fit.stderr < 1e-12
    y = 0.75 * x
    y[3] += 1.0
    assert experiments.fit_exponent(zip(x, y)).stderr > 0.05
    with pytest.raises(InvalidArgument):
        experiments.fit_exponent([(1.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, 3.0)])
    with pytest.raises(InvalidArgument):
        experiments.fit_exponent([(1.0, 0.0), (2.0, 1.0)])


def test_block_samples_inside_block():
    t = experiments.block_samples(7, 64)
    assert t.min() >= 128 and t.max() < 256 and len(set(t)) == 64


def test_scaling_rows_reproducible_per_row():
    rows = experiments.scaling_rows(parse_domain("superellipse:omega=4"), [0.3], 3, 6, 8)
    r = rows[1]
    # each row is recomputable from its parameters alone
    again = experiments._block((parse_domain("superellipse:omega=4,theta=0.3"), r.j, 8))
    assert again.sup_remainder == r.sup_remainder
    assert all(0 < x.sup_norm for x in rows)


def test_cli_deterministic_output(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["scaling", "--domain", "superellipse:omega=4", "--jmin", "3", "--jmax", "6", "--samples", "8",
            "--theta-count", "2", "--seed", "5"]
    assert cli.main(args + ["--out", str(out1)]) == 0
    assert cli.main(args + ["--out", str(out2)]) == 0
    text = out1.read_text()
    assert text == out2.read_text()
    assert text.startswith("# latdisc ")
    assert "# caveat:" in text and "# zeta = 1/3831" in text
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0].startswith("omega,theta,j") and len(body) == 1 + 2 * 4


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["scaling", "--jmax", "20"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["nonsense"])
    assert e.value.code == 1
    # too few blocks for a fit is a usage error
    assert cli.main(["scaling", "--jmin", "3", "--jmax", "4"]) == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("jmin = 4\njmax = 6\nq = 1\n")
    assert cli.main(["vdc", "--config", str(cfg), "--out", str(tmp_path / "v.csv")]) == 0
    assert "q,T,Mstar,H,lhs,rhs,ratio" in (tmp_path / "v.csv").read_text()


def test_threshold_failure_exit_code(monkeypatch):
    monkeypatch.setattr(experiments, "RANDOL_TOL", -1.0)
    assert cli.main(["randol", "--domain", "superellipse:omega=4", "--out", "/dev/null"]) == 2


def test_vdc_stability_rule():
    mk = lambda H, ratio: experiments.expsum.VdcReport(1, 1.0, 16.0, H, ratio, 1.0)  # noqa: E731
    assert experiments.vdc_stable([mk(2, 1.0), mk(4, 3.9)])
    assert not experiments.vdc_stable([mk(2, 1.0), mk(4, 4.1)])
    assert not experiments.vdc_stable([experiments.expsum.VdcReport(1, 1.0, 16.0, 2, 1.0, 0.0)])
