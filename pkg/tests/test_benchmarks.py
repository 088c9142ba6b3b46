import io
import math

import numpy as np
import pytest

from swlbm import benchmarks as bm
from swlbm.solver import CellType, DepthBoundary, DischargeInflow, VelocityBoundary


def _bernoulli_scan(z, q=4.42, h_out=2.0, g=9.81, step=1e-6):
    """Largest root of the Bernoulli residual on a uniform depth grid."""
    head = h_out + q * q / (2 * g * h_out**2)
    hc = (q * q / g) ** (1 / 3)
    h = np.arange(hc, 3.0, step)
    r = q * q / (2 * g * h * h) + h + z - head
    k = np.flatnonzero(np.sign(r[:-1]) != np.sign(r[1:]))[-1]
    # linear interpolation inside the bracketing cell
    return h[k] - r[k] * step / (r[k + 1] - r[k])


@pytest.mark.parametrize("x", [2.0, 8.5, 9.3, 10.0, 11.2, 20.0])
@pytest.mark.parametrize("g", [9.81, 40.5])
def test_hump_oracle_matches_residual_scan(x, g):
    h = bm.hump_analytic_depth(x, g=g)
    assert abs(h - _bernoulli_scan(float(bm.hump_bed(x)), g=g)) < 1e-6


def test_hump_oracle_shape():
    assert bm.hump_analytic_depth(2.0) == pytest.approx(2.0, abs=1e-12)
    crest = bm.hump_analytic_depth(10.0)
    # surface over the hump drops below the downstream level
    assert crest + 0.2 < 2.0
    x = np.linspace(0, 25, 11)
    assert bm.hump_analytic_depth(x).shape == x.shape


def test_hump_oracle_regimes():
    with pytest.raises(bm.RegimeError):
        bm.hump_analytic_depth(10.0, g=1.0)  # outlet supercritical
    with pytest.raises(bm.RegimeError):
        bm.hump_analytic_depth(10.0, g=4.0)  # subcritical outlet, chokes on the crest
    with pytest.raises(ValueError):
        bm.hump_analytic_depth(10.0, g=0.0)


def test_hump_bed():
    assert bm.hump_bed(10.0) == pytest.approx(0.2)
    assert bm.hump_bed(8.0) == pytest.approx(0.0)
    assert bm.hump_bed(5.0) == 0.0


def test_unit_conversion():
    assert bm.physical_gravity(0.009, 0.05, 0.05 / 15) == pytest.approx(40.5)
    assert bm.physical_gravity(0.009, 0.2, 0.2 / 15) == pytest.approx(10.125)


def test_parse_lattice():
    assert bm.parse_lattice("500x50") == (500, 50)
    assert bm.parse_lattice("250×50") == (250, 50)
    assert bm.parse_lattice(125) == (125, 50)
    assert bm.parse_lattice((4, 2)) == (4, 2)
    for bad in ("axb", "1x2x3", ""):
        with pytest.raises(ValueError):
            bm.parse_lattice(bad)


def test_hump_case_defaults():
    cfg = bm.hump_case()
    assert cfg.grid.shape == (500, 50)
    assert cfg.grid.dx == pytest.approx(0.05) and cfg.grid.e == pytest.approx(15.0)
    assert cfg.tau_hat == 1.5 and cfg.threshold == 5e-6
    assert cfg.spec.g == pytest.approx(40.5)
    assert cfg.boundaries["west"] == DischargeInflow(4.42)
    assert cfg.boundaries["east"] == DepthBoundary(2.0)
    assert np.all(cfg.grid.mask[0] == CellType.INFLOW) and np.all(cfg.grid.mask[-1] == CellType.OUTFLOW)
    assert cfg.initial_depth.max() == 2.0 and cfg.initial_depth.min() == pytest.approx(1.8, abs=1e-3)
    assert bm.hump_case(lam=4.0).spec.family.value == "D2Q9Lambda"


def test_tidal_formulas():
    assert bm.tidal_H(0.0) == pytest.approx(40.5)
    assert bm.tidal_inflow_depth(0.0) == pytest.approx(40.5 + 8)
    x = np.linspace(0, 14000, 15)
    h, u = bm.tidal_analytic(x, 10800.0)
    assert np.allclose(h, bm.tidal_H(x) + 4)
    for t in (0.0, 1234.5, 9117.5):
        h, u = bm.tidal_analytic(x, t)
        assert u[-1] == 0.0
        assert h[0] == pytest.approx(bm.tidal_inflow_depth(t), rel=1e-15)


def test_tidal_case_mapping():
    for label, dx in (("500x50", 28.0), ("750x50", 14.0), ("1000x50", 7.0)):
        cfg = bm.tidal_case(label)
        assert cfg.grid.dx == dx and cfg.grid.nx == int(14000 / dx) + 1
        assert cfg.grid.periodic_y and cfg.spec.e == 200.0 and cfg.tau_hat == 0.6
        assert bm.physical_gravity(1 / 600, dx, dx / 200) == pytest.approx(cfg.spec.g)
    cfg = bm.tidal_case("500x4")
    assert isinstance(cfg.boundaries["east"], VelocityBoundary)
    assert cfg.initial_depth[0, 0] == pytest.approx(48.5)
    assert bm.tidal_case("500x4", initial="bed").initial_depth[0, 0] == pytest.approx(40.5)
    with pytest.raises(ValueError):
        bm.tidal_case("600x50")
    with pytest.raises(ValueError):
        bm.tidal_case("500x4", initial="flat")


def test_expansion_geometry():
    mask = bm.expansion_mask()
    assert mask.shape == (120, 60)
    assert int(np.sum(mask != CellType.SOLID)) == 5600
    assert int(np.sum(mask == CellType.INFLOW)) == 20
    assert np.all(mask[0, 20:40] == CellType.INFLOW)
    assert np.all(mask[:40, :20] == CellType.SOLID) and np.all(mask[:40, 40:] == CellType.SOLID)
    assert np.all(mask[40:, :] != CellType.SOLID)
    cfg = bm.expansion_case()
    assert cfg.grid.e == pytest.approx(2.0) and cfg.tau_hat == 1.0
    assert cfg.boundaries["west"] == DischargeInflow(0.032)
    assert cfg.boundaries["east"] == DepthBoundary(0.16)
    assert not cfg.force.active


def test_recirculation_detector():
    mask = bm.expansion_mask()
    ux = np.ones(mask.shape)
    assert bm.recirculation(ux, mask) == (False, False)
    ux[60, 5] = -0.01
    assert bm.recirculation(ux, mask) == (True, False)
    ux[60, 55] = -0.01
    assert bm.recirculation(ux, mask) == (True, True)


def test_hump_short_run_produces_reports():
    r = bm.run_hump(0.009, "125x50", max_iterations=200, output_every=100)
    assert r.status == "max_iterations" and r.iterations == 200
    assert [rep.step for rep in r.reports] == [100, 200]
    assert all(rep.r_global > 0 for rep in r.reports)


def test_table_layout():
    t1 = bm.PAPER_TABLES["T1"]["rows"]
    assert len(t1) == 15 and (0.009, "500x50", 59700) in t1
    assert [r[2] for r in bm.PAPER_TABLES["T3"]["rows"]] == [6.68e-2, 6.39e-2, 5.27e-2]
    with pytest.raises(ValueError):
        bm.reproduce_table("T9")


def test_reproduce_table_single_cell_and_csv():
    rows = bm.reproduce_table("T4", rows=[5], workers=1)
    (row,) = rows
    assert row.parameter == 0.5 and row.status == "diverged" and row.classification_match
    buf = io.StringIO()
    bm.write_table_csv(rows, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("table,parameter,lattice,status")
    assert lines[1].startswith("T4,0.5,120x60,diverged")


def test_tidal_short_run_tracks_analytic():
    r = bm.run_tidal("500x4", t_end=600 * 0.14)
    assert r.steps == 600
    assert r.depth_error < 1e-3 and math.isfinite(r.velocity_error)
