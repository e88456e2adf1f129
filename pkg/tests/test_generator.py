import math

import mpmath as mp
import numpy as np
import pytest

from tlme.bath import BathSpec
from tlme.evolve import propagate
from tlme.generator import (
    ConvergenceError,
    Scheme,
    assemble_generator,
    drive_liouvillian,
    explicit_sum_generator,
)
from tlme.stable import build_stable
from tlme.superop import GROUND, SIGMA_Z, TRACE_ROW, apply


def test_drive_inactive_is_zero():
    assert np.all(drive_liouvillian(0.2, active=False) == 0)
    with pytest.raises(ValueError):
        drive_liouvillian(-0.1)


def test_drive_output_traceless_hermitian():
    out = apply(drive_liouvillian(0.3), GROUND)
    assert abs(np.trace(out)) < 1e-15
    np.testing.assert_allclose(out, out.conj().T)
    # -i [g sigma_x, |d><d|] has imaginary off-diagonals of size g
    assert out[0, 1] == pytest.approx(-0.3j)


def test_drive_alone_inverts_population():
    g_d = 0.2
    L = drive_liouvillian(g_d)
    T = math.pi / (2 * g_d)
    traj = propagate(GROUND, [(L, T)], dt=T / 2000)
    assert traj.p_excited[-1] == pytest.approx(1.0, abs=1e-6)


def test_scheme_orders():
    assert Scheme.born_markov().orders == ((0, 1),)
    assert Scheme.born_only(2).orders == ((0, 1), (1, 1), (2, 1))
    assert Scheme.markov_only(5).orders == ((0, 1), (0, 2), (0, 3))
    with pytest.raises(ValueError):
        Scheme("lindblad")
    with pytest.raises(ValueError):
        Scheme.born_only(3)
    with pytest.raises(ValueError):
        Scheme.full(6)


def test_born_markov_is_one_iteration(unit_table):
    t = unit_table.scaled(0.2)
    g = assemble_generator(t, Scheme.born_markov())
    np.testing.assert_array_equal(g.matrix, t[(0, 1)])
    assert g.iterations == 1


def test_zero_coupling_gives_drive():
    t = build_stable(0.0)
    L = drive_liouvillian(0.2)
    g = assemble_generator(t, Scheme.full(5), drive=L)
    np.testing.assert_array_equal(g.matrix, L)


@pytest.mark.parametrize("g_c", [0.05, 0.1, 0.2])
def test_fixed_point_converges_quickly(unit_table, g_c):
    for drive in (None, drive_liouvillian(0.2)):
        g = assemble_generator(unit_table.scaled(g_c), Scheme.full(5), drive=drive)
        assert g.iterations < 50
        assert np.max(np.abs(TRACE_ROW @ g.matrix)) < 1e-10
        assert np.all(np.isfinite(g.matrix))


def test_strong_coupling_reports_residual(unit_table):
    with pytest.raises(ConvergenceError) as err:
        assemble_generator(unit_table.scaled(3.0), Scheme.full(5), max_iter=30)
    assert err.value.residual > 0


def test_missing_blocks_rejected():
    t = build_stable(0.1, cutoff=1)
    with pytest.raises(ValueError):
        assemble_generator(t, Scheme.born_only(2))


def test_explicit_sum_term_list(unit_table):
    ex = explicit_sum_generator(unit_table, 5)
    expected = {
        ((0, 1),),
        ((0, 2),),
        ((0, 3),),
        ((1, 1), (0, 1)),
        ((1, 2), (0, 1)),
        ((1, 1), (0, 2)),
        ((2, 1), (0, 1), (0, 1)),
        ((1, 1), (1, 1), (0, 1)),
    }
    assert set(ex.terms) == expected and len(ex.terms) == 8 and ex.complete
    assert all(term[-1][0] == 0 for term in ex.terms)
    one = explicit_sum_generator(unit_table, 1)
    assert one.terms == (((0, 1),),)
    np.testing.assert_array_equal(one.matrix, unit_table[(0, 1)])


def test_zero_temperature_decay_matches_exact_pole():
    # with no thermal excitation the excited amplitude has an exact pole s(g);
    # the cutoff-5 generator misses it at order g^8
    wc = 10.0
    J = lambda w: w / (1 + (w / wc) ** 2)

    def exact_rate(g):
        mp.mp.dps = 20

        def F(s):
            u = 1 + 1j * s
            inner = mp.quad(lambda w: J(w) / (w - u), [0, 1, 5, mp.inf])
            return s - 1j * g**2 * (inner + 2j * mp.pi * J(u))

        return 2 * float(mp.re(mp.findroot(F, mp.mpc(-math.pi * g**2 * J(1), 0))))

    table = build_stable(1.0, BathSpec(beta=math.inf), 5, regulator=0.0)
    errs = []
    for g in (0.025, 0.05, 0.1):
        G = assemble_generator(table.scaled(g), Scheme.full(5)).matrix
        errs.append(abs(G[0, 0].real - exact_rate(g)))
    assert errs[0] / errs[1] < 2.0**-7
    assert errs[1] / errs[2] < 2.0**-7
    assert errs[2] < 3e-5
