import json

import numpy as np
import pytest

from boltzspec import VelocityGrid
from boltzspec.cli import main, mixture_invariants, read_snapshot, resample, write_snapshot
from boltzspec.config import parse_config
from boltzspec.diagnostics import maxwellian
from boltzspec.grid import State


@pytest.fixture(scope="module")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("table_cache")


def config_text(outdir, cache, extra=""):
    return f"""
[physics]
lam = 1.0
beta = 1.0
[domain]
L = 6.0
[grid]
n = 8
[integrator]
method = "rk4"
dt = 0.05
t_end = 0.3
[initial]
kind = "maxwellian"
temperature = 1.2
[output]
directory = "{outdir}"
[table]
cache_dir = "{cache}"
{extra}
"""


def write_config(tmp_path, cache_dir, name="run.toml", extra="", outname="out"):
    path = tmp_path / name
    path.write_text(config_text(tmp_path / outname, cache_dir, extra))
    return path


class TestSnapshotIO:
    def test_round_trip(self, tmp_path):
        grid = VelocityGrid(3, 5.0, 8)
        s = State(grid, np.random.default_rng(0).uniform(0.1, 1.0, grid.shape), t=0.75)
        write_snapshot(tmp_path / "s.bspc", s)
        back = read_snapshot(tmp_path / "s.bspc")
        assert back.grid == grid
        assert back.t == 0.75
        assert np.array_equal(back.values, s.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bspc"
        p.write_bytes(b"NOPE" + bytes(36))
        with pytest.raises(ValueError):
            read_snapshot(p)


class TestResample:
    def test_identity_on_same_grid(self):
        grid = VelocityGrid(3, 6.0, 8)
        s = maxwellian(grid, 1.0, 0.0, 1.2)
        r = resample(s, grid)
        assert np.max(np.abs(r.values - s.values)) < 1e-12

    def test_refinement_accuracy(self):
        coarse = VelocityGrid(3, 6.0, 8)
        fine = VelocityGrid(3, 6.0, 16)
        s = maxwellian(coarse, 1.0, 0.0, 4.0)  # broad enough to resolve at n=8
        r = resample(s, fine)
        ref = maxwellian(fine, 1.0, 0.0, 4.0)
        # interpolant error is the coarse truncation error
        assert fine.l2_norm(r.values - ref.values) < 1e-2 * fine.l2_norm(ref.values)

    def test_mass_preserved(self):
        coarse = VelocityGrid(3, 6.0, 8)
        fine = VelocityGrid(3, 6.0, 16)
        s = maxwellian(coarse, 1.0, 0.0, 1.2)
        r = resample(s, fine)
        m_c = np.sum(s.values) * coarse.cell_weight
        m_f = np.sum(r.values) * fine.cell_weight
        assert m_f == pytest.approx(m_c, rel=1e-10)


class TestMixtureInvariants:
    def test_two_gaussian(self):
        text = """
[initial]
kind = "sum-of-gaussians"
[[initial.components]]
mass = 0.5
velocity = [1.0, 0.0, 0.0]
temperature = 1.2
[[initial.components]]
mass = 0.5
velocity = [-1.0, 0.0, 0.0]
temperature = 1.2
"""
        m0, u0, T0 = mixture_invariants(parse_config(text))
        assert m0 == pytest.approx(1.0)
        assert np.max(np.abs(u0)) < 1e-15
        # mixture temperature picks up the bulk kinetic energy spread
        assert T0 == pytest.approx(1.2 + 1.0 / 3.0)


class TestRunCommand:
    def test_equilibrium_run_outputs(self, tmp_path, cache_dir, capsys):
        cfg_path = write_config(tmp_path, cache_dir)
        assert main(["run", str(cfg_path)]) == 0
        out = tmp_path / "out"
        assert (out / "moments.csv").exists()
        assert (out / "manifest.json").exists()
        assert (out / "final.bspc").exists()

        series = np.genfromtxt(out / "moments.csv", delimiter=",", skip_header=2)
        inv0, invT = series[0, 1:6], series[-1, 1:6]
        drift = np.max(np.abs(invT - inv0)) / np.max(np.abs(inv0))
        assert drift <= 1e-10
        # Maxwellian IC stays near its own equilibrium
        assert series[-1, 6] < 2e-3  # L2_error_vs_M0 column

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["derived"]["n_steps"] == 6
        assert manifest["config"]["grid"]["n"] == 8
        assert manifest["derived"]["aborted"] is False

    def test_warm_cache_rerun(self, tmp_path, cache_dir, capsys):
        cfg_path = write_config(tmp_path, cache_dir, outname="out_a")
        main(["run", str(cfg_path)])
        capsys.readouterr()
        cfg_path2 = write_config(tmp_path, cache_dir, name="run2.toml", outname="out_b")
        assert main(["run", str(cfg_path2)]) == 0
        assert "cache hit" in capsys.readouterr().out
        manifest = json.loads((tmp_path / "out_b" / "manifest.json").read_text())
        assert manifest["derived"]["table_cache_hit"] is True

    def test_csv_deterministic_after_header(self, tmp_path, cache_dir):
        p1 = write_config(tmp_path, cache_dir, name="d1.toml", outname="det1")
        p2 = write_config(tmp_path, cache_dir, name="d2.toml", outname="det2")
        main(["run", str(p1)])
        main(["run", str(p2)])
        lines1 = (tmp_path / "det1" / "moments.csv").read_text().splitlines()
        lines2 = (tmp_path / "det2" / "moments.csv").read_text().splitlines()
        assert lines1[1:] == lines2[1:]

    def test_restart_from_snapshot(self, tmp_path, cache_dir):
        first = write_config(tmp_path, cache_dir, name="first.toml", outname="leg1")
        main(["run", str(first)])
        snap = tmp_path / "leg1" / "final.bspc"
        extra = ""
        cont = tmp_path / "cont.toml"
        cont.write_text(
            f"""
[domain]
L = 6.0
[grid]
n = 8
[integrator]
dt = 0.05
t_end = 0.6
[initial]
kind = "file"
path = "{snap}"
[output]
directory = "{tmp_path / 'leg2'}"
[table]
cache_dir = "{cache_dir}"
"""
        )
        assert main(["run", str(cont)]) == 0
        final = read_snapshot(tmp_path / "leg2" / "final.bspc")
        assert final.t == pytest.approx(0.6)

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text('[physics]\nbeta = 0.1\n[initial]\nkind = "maxwellian"\n')
        assert main(["run", str(bad)]) == 2
        assert "invalid config" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.toml")]) == 1


class TestSweepCommand:
    def test_dt_sweep_order(self, tmp_path, cache_dir):
        cfg_path = write_config(tmp_path, cache_dir, name="sweep.toml", outname="sweep_out")
        assert main(["sweep", str(cfg_path), "--axis", "dt", "--values", "0.1,0.05,0.025"]) == 0
        rows = np.genfromtxt(tmp_path / "sweep_out" / "sweep.csv", delimiter=",", skip_header=2)
        errs = rows[:, 1]
        assert errs[0] > errs[1]  # finer dt closer to the reference
        order = rows[1, 3]
        assert 3.0 < order < 5.5

    def test_n_sweep_nonincreasing(self, tmp_path, cache_dir):
        cfg_path = write_config(tmp_path, cache_dir, name="nsweep.toml", outname="nsweep_out")
        assert main(["sweep", str(cfg_path), "--axis", "N", "--values", "8,12,16"]) == 0
        rows = np.genfromtxt(tmp_path / "nsweep_out" / "sweep.csv", delimiter=",", skip_header=2)
        errs = rows[:, 1]
        assert errs[0] >= errs[1] >= errs[2]
        assert errs[2] == 0.0  # reference run compared against itself
        assert np.all(rows[:, 2] < 1e-9)  # invariant drift per run

    def test_single_value_sweep_matches_run(self, tmp_path, cache_dir):
        run_cfg = write_config(tmp_path, cache_dir, name="single.toml", outname="single_run")
        main(["run", str(run_cfg)])
        sweep_cfg = write_config(tmp_path, cache_dir, name="single_sw.toml", outname="single_sweep")
        main(["sweep", str(sweep_cfg), "--axis", "dt", "--values", "0.05"])
        a = read_snapshot(tmp_path / "single_run" / "final.bspc")
        b = read_snapshot(tmp_path / "single_sweep" / "dt=0.05" / "final.bspc")
        assert np.array_equal(a.values, b.values)


class TestTableCacheCommand:
    def test_build_then_clear(self, tmp_path, capsys):
        own_cache = tmp_path / "cache"
        cfg_path = write_config(tmp_path, own_cache, name="cache.toml", outname="cache_out")
        assert main(["table-cache", "build", str(cfg_path)]) == 0
        assert len(list(own_cache.glob("*.bwtb"))) == 1
        capsys.readouterr()
        assert main(["table-cache", "build", str(cfg_path)]) == 0
        assert "already cached" in capsys.readouterr().out
        assert main(["table-cache", "clear", str(cfg_path)]) == 0
        assert len(list(own_cache.glob("*.bwtb"))) == 0

    def test_build_requires_config(self, capsys):
        assert main(["table-cache", "build"]) == 2

    def test_clear_env_cache(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("BOLTZSPEC_CACHE_DIR", str(tmp_path / "envcache"))
        assert main(["table-cache", "clear"]) == 0
        assert "cleared 0" in capsys.readouterr().out
