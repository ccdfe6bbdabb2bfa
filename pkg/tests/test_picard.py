"""Free evolution, Duhamel integrals, and the Picard iterate recursion."""

import json
import math

import numpy as np
import pytest

from picardlab import (
    BlowUpError,
    Field,
    FieldSeries,
    TimeGrid,
    band_limited_field,
    duhamel,
    energy_inequality_check,
    free_evolution,
    iterate_from_previous,
    picard_chain,
    picard_iterate,
    sobolev_norm,
    space_time_norm,
)
from picardlab.grid import as_spectral
from picardlab.picard import series_to_physical
from picardlab.randomization import (
    RademacherDraw,
    active_blocks,
    draw_rademacher,
    randomize,
)

from conftest import two_block_datum


def _identity_data(phi0):
    """RandomizedData whose resummation equals phi0 (all signs +1)."""
    blocks = active_blocks(phi0)
    values = {(ch, k): 1 for k in blocks for ch in ("eps", "nu")}
    return randomize(phi0, None, RademacherDraw(0, 0, tuple(blocks), values))


def _random_data(grid, band=3.0, seed=8, sample_index=3):
    phi0 = band_limited_field(grid, band=band, seed=seed)
    blocks = active_blocks(phi0)
    return randomize(phi0, None, draw_rademacher(21, blocks, sample_index=sample_index))


def _energy(u_hat, dudt_hat, grid):
    w = grid.abs_xi[None, :, :] ** 2
    per_node = np.sum(w * np.abs(u_hat) ** 2 + np.abs(dudt_hat) ** 2, axis=(1, 2))
    return grid.dx**2 * per_node


def test_timegrid_validation():
    with pytest.raises(ValueError):
        TimeGrid(t_final=0.0, n_steps=4)
    with pytest.raises(ValueError):
        TimeGrid(t_final=1.0, n_steps=0)
    tg = TimeGrid(t_final=1.0, n_steps=4)
    assert tg.dt == 0.25
    assert tg.n_nodes == 5
    assert np.allclose(tg.times, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_free_evolution_closed_form(grid64):
    """phi0 = cos(x1) (|xi| = 1): u = cos(t)cos(x1), dt u = -sin(t)cos(x1),
    d1 u = -cos(t)sin(x1)."""
    data = _identity_data(Field(grid64, np.cos(grid64.x1), "physical"))
    tg = TimeGrid(t_final=1.5, n_steps=16)
    u, du_dt, du = free_evolution(data, tg, d_choice="x1")
    u_p = series_to_physical(u).values
    dt_p = series_to_physical(du_dt).values
    d1_p = series_to_physical(du).values
    for m, t in enumerate(tg.times):
        assert np.max(np.abs(u_p[m] - math.cos(t) * np.cos(grid64.x1))) < 1e-12
        assert np.max(np.abs(dt_p[m] + math.sin(t) * np.cos(grid64.x1))) < 1e-12
        assert np.max(np.abs(d1_p[m] + math.cos(t) * np.sin(grid64.x1))) < 1e-12


def test_free_evolution_at_time_zero(grid64):
    data = _random_data(grid64)
    tg = TimeGrid(t_final=0.5, n_steps=8)
    u, du_dt, _ = free_evolution(data, tg)
    assert np.array_equal(u.values[0], data.phi0_rand.values)
    assert np.max(np.abs(du_dt.values[0])) == 0.0


def test_free_energy_conserved(grid64):
    data = _random_data(grid64)
    tg = TimeGrid(t_final=1.0, n_steps=128)
    u, du_dt, _ = free_evolution(data, tg)
    e = _energy(u.values, du_dt.values, grid64)
    drift = np.max(np.abs(e - e[0])) / e[0]
    assert drift <= 1e-10


def test_free_evolution_d_choice_validation(grid64):
    data = _random_data(grid64)
    with pytest.raises(ValueError):
        free_evolution(data, TimeGrid(0.5, 8), d_choice="x3")


def _duhamel_error(grid, n_steps):
    """Max-norm error of duhamel against the closed form for source cos(x1)."""
    tg = TimeGrid(t_final=1.0, n_steps=n_steps)
    src_one = np.cos(grid.x1)
    src = FieldSeries(grid, tg, np.broadcast_to(src_one, (tg.n_nodes, 64, 64)),
                      "physical")
    out = series_to_physical(duhamel(src, tg, d_choice="x1")).values
    err = 0.0
    for m, t in enumerate(tg.times):
        expect = -(1.0 - math.cos(t)) * np.sin(grid.x1)
        err = max(err, float(np.max(np.abs(out[m] - expect))))
    return err


def test_duhamel_closed_form(grid64):
    assert _duhamel_error(grid64, 256) <= 1e-6


def test_duhamel_second_order_in_time(grid64):
    e1 = _duhamel_error(grid64, 128)
    e2 = _duhamel_error(grid64, 256)
    order = math.log2(e1 / e2)
    assert order >= 1.9


def test_duhamel_zero_source(grid64):
    tg = TimeGrid(t_final=0.7, n_steps=32)
    src = FieldSeries(grid64, tg, np.zeros((tg.n_nodes, 64, 64)), "physical")
    out = duhamel(src, tg)
    assert np.max(np.abs(out.values)) == 0.0


def test_duhamel_linearity(grid64):
    tg = TimeGrid(t_final=0.7, n_steps=32)
    rng = np.random.default_rng(12)
    s1 = rng.standard_normal((tg.n_nodes, 64, 64))
    s2 = rng.standard_normal((tg.n_nodes, 64, 64))
    a, b = 0.75, -1.5
    f1 = FieldSeries(grid64, tg, s1, "physical")
    f2 = FieldSeries(grid64, tg, s2, "physical")
    combo = FieldSeries(grid64, tg, a * s1 + b * s2, "physical")
    lhs = duhamel(combo, tg).values
    rhs = a * duhamel(f1, tg).values + b * duhamel(f2, tg).values
    scale = np.max(np.abs(lhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(scale, 1.0)


def test_duhamel_timegrid_mismatch(grid64):
    tg = TimeGrid(t_final=0.7, n_steps=32)
    other = TimeGrid(t_final=0.7, n_steps=16)
    src = FieldSeries(grid64, tg, np.zeros((tg.n_nodes, 64, 64)), "physical")
    with pytest.raises(ValueError):
        duhamel(src, other)


def test_chain_matches_stepwise_bit_for_bit(grid64):
    data = _random_data(grid64)
    tg = TimeGrid(t_final=0.4, n_steps=32)
    chain = picard_chain(3, data, tg)
    assert [r.n for r in chain] == [0, 1, 2, 3]
    stepped = iterate_from_previous(chain[1], data, tg)
    assert np.array_equal(stepped.u.values, chain[2].u.values)
    assert np.array_equal(stepped.du.values, chain[2].du.values)
    assert stepped.norms == chain[2].norms
    top = picard_iterate(3, data, tg)
    assert np.array_equal(top.u.values, chain[3].u.values)


def test_du_is_exact_spatial_derivative_of_u(grid64):
    """With d = x1 the tracked du series equals i xi1 u mode for mode."""
    data = _random_data(grid64)
    tg = TimeGrid(t_final=0.4, n_steps=32)
    for rec in picard_chain(2, data, tg, d_choice="x1"):
        expect = 1j * grid64.xi1[None, :, :] * rec.u.values
        scale = max(float(np.max(np.abs(expect))), 1.0)
        assert np.max(np.abs(rec.du.values - expect)) <= 1e-10 * scale


def test_space_time_norm_constant(grid64):
    tg = TimeGrid(t_final=2.0, n_steps=64)
    c = -0.3
    series = FieldSeries(grid64, tg, np.full((tg.n_nodes, 64, 64), c), "physical")
    length = grid64.box_length
    got = space_time_norm(series, 2.0, 4.0)
    assert got == pytest.approx(math.sqrt(2.0) * abs(c) * math.sqrt(length), rel=1e-12)
    assert space_time_norm(series, np.inf, 2.0) == pytest.approx(abs(c) * length, rel=1e-12)


def test_space_time_norm_sup_spike(grid64):
    tg = TimeGrid(t_final=1.0, n_steps=4)
    vals = np.zeros((tg.n_nodes, 64, 64))
    vals[2, 5, 7] = -9.0
    series = FieldSeries(grid64, tg, vals, "physical")
    assert space_time_norm(series, np.inf, np.inf) == 9.0
    with pytest.raises(ValueError):
        space_time_norm(series, 0.5, 2.0)
    with pytest.raises(ValueError):
        space_time_norm(series, 2.0, 0.5)


def test_blowup_guard_raises(grid64):
    phi0 = two_block_datum(grid64)
    big = Field(grid64, 1e13 * phi0.values, "spectral")
    data = _identity_data(big)
    with pytest.raises(BlowUpError) as err:
        picard_chain(0, data, TimeGrid(0.5, 8))
    assert err.value.n == 0


def test_chain_validation(grid64):
    data = _random_data(grid64)
    tg = TimeGrid(0.5, 8)
    with pytest.raises(ValueError):
        picard_chain(-1, data, tg)
    with pytest.raises(ValueError):
        picard_chain(1, data, tg, d_choice="bogus")


def test_zero_data_gives_zero_iterates(grid64):
    zero = Field(grid64, np.zeros((64, 64)), "physical")
    values = {(ch, (0, 0)): 1 for ch in ("eps", "nu")}
    data = randomize(zero, None, RademacherDraw(0, 0, ((0, 0),), values))
    tg = TimeGrid(0.5, 16)
    chain = picard_chain(2, data, tg)
    for rec in chain:
        assert np.max(np.abs(rec.u.values)) == 0.0
        assert all(v == 0.0 for v in rec.norms.values())
    check = energy_inequality_check(chain[2], chain[1], chain[0])
    assert check.c_measured == 0.0 and check.ok


def test_iterate_record_json_roundtrip(grid64):
    data = _random_data(grid64)
    rec = picard_iterate(1, data, TimeGrid(0.4, 16), config_hash="abc123")
    payload = json.loads(rec.to_json())
    assert payload["n"] == 1
    assert payload["config_hash"] == "abc123"
    assert payload["seed"] == data.draw.seed
    assert payload["sample_index"] == data.draw.sample_index
    assert set(payload["norms"]) == {"linf_h1_u", "linf_l2_dudt", "l2t_l4_du"}
    assert payload["norms"] == rec.norms


def test_energy_constant_stable_under_refinement(grid64):
    """The measured energy-inequality constant is a property of the iterates,
    not of the time step: refining dt moves it by under 10%, and it stays
    within a small uniform band across iterate levels."""
    data = _random_data(grid64)
    results = {}
    for steps in (64, 128):
        tg = TimeGrid(t_final=0.25, n_steps=steps)
        chain = picard_chain(4, data, tg)
        results[steps] = [
            energy_inequality_check(chain[n], chain[n - 1], chain[0]).c_measured
            for n in range(1, 5)
        ]
    for c_coarse, c_fine in zip(results[64], results[128]):
        assert c_coarse == pytest.approx(c_fine, rel=0.10)
    cs = results[128]
    assert max(cs) / min(cs) <= 3.0
