import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shla.chart import (ChartError, builtin_flat_torus, builtin_oscillator, exact_entry, load_chart,
                        omega_inverse_at, oscillator_H, validate)
from shla.expr import evaluate
from shla.randgen import random_torus_chart


def flat_doc(**over):
    doc = {
        "k": 1, "r": 2,
        "coords": {"y": ["y1", "y2"], "q": ["q1", "q2"]},
        "periods": {"y1": 1, "y2": 1, "q1": 1, "q2": 1},
        "omega": [["0", "1"], ["-1", "0"]],
        "R": [["0", "0"], ["0", "0"]],
        "params": {},
    }
    doc.update(over)
    return doc


def test_flat_torus_document_loads():
    ch = load_chart(flat_doc())
    assert ch.k == 1 and ch.r == 2 and ch.is_torus
    assert [ch.period(c) for c in ch.coords] == [1, 1, 1, 1]


def test_builtin_flat_torus():
    ch = validate(builtin_flat_torus(), n=256)
    pts = ch.sample(10)
    inv = omega_inverse_at(ch, pts)
    assert np.allclose(inv, [[0, -1], [1, 0]])
    assert all(ch.period(c) == 1.0 for c in ch.coords)


def test_q_dependence_rejected():
    with pytest.raises(ChartError, match="q-dependence"):
        load_chart(flat_doc(omega=[["0", "q1"], ["-q1", "0"]]))


def test_skew_rejected():
    with pytest.raises(ChartError, match="skew-symmetry") as info:
        load_chart(flat_doc(omega=[["0", "1"], ["1", "0"]]))
    assert "omega[0][1]" in str(info.value)


def test_degenerate_rejected():
    with pytest.raises(ChartError, match="degenerate"):
        load_chart(flat_doc(omega=[["0", "0"], ["0", "0"]]))


def test_not_closed_rejected():
    doc = {
        "k": 2, "r": 1,
        "coords": {"y": ["y1", "y2", "y3", "y4"], "q": ["q1"]},
        "periods": {c: 1 for c in ["y1", "y2", "y3", "y4", "q1"]},
        "omega": [["0", "1+y3/8", "0", "0"], ["-1-y3/8", "0", "0", "0"],
                  ["0", "0", "0", "1"], ["0", "0", "-1", "0"]],
        "R": [["0"], ["0"], ["0"], ["0"]],
    }
    with pytest.raises(ChartError, match="closedness"):
        load_chart(doc)


def test_schema_violation():
    bad = flat_doc()
    del bad["omega"]
    with pytest.raises(ChartError, match="schema"):
        load_chart(bad)
    with pytest.raises(ChartError, match="schema"):
        load_chart(flat_doc(k=-1))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_chart("/nonexistent/chart.json")


def test_unknown_identifier():
    with pytest.raises(ChartError, match="unknown identifier"):
        load_chart(flat_doc(R=[["theta", "0"], ["0", "0"]]))


def test_oscillator_values():
    ch = builtin_oscillator(Fraction(3, 2))
    H1, H2 = oscillator_H(Fraction(3, 2))
    env = {"y2": 0.3, "alpha": 1.5}
    assert evaluate(H1, env) == pytest.approx(0.1)
    assert evaluate(H2, env) == pytest.approx(0.1)
    assert evaluate(ch.R[1][1], env) == pytest.approx(0.0, abs=1e-15)
    assert str(exact_entry(ch, ch.omega[0][1])) == "1"
    lo, hi = ch.bounds["y2"]
    assert (lo, hi) == (Fraction(1, 4), Fraction(1, 3))
    assert not ch.contains({"y1": 0.1, "y2": 0.2, "q1": 0, "q2": 0})
    assert ch.contains({"y1": 0.1, "y2": 0.3, "q1": 0, "q2": 0})
    pts = ch.sample(256)
    assert np.all((pts["y2"] > 0.25) & (pts["y2"] < 1 / 3))
    validate(ch, n=256)
    assert np.allclose(omega_inverse_at(ch, pts), [[0, -1], [1, 0]])


def test_oscillator_rejects_small_alpha():
    with pytest.raises(ChartError):
        builtin_oscillator(1)
    with pytest.raises(ChartError):
        builtin_oscillator(Fraction(1, 2))


@given(st.fractions(min_value=Fraction(21, 20), max_value=10, max_denominator=40))
def test_oscillator_family_valid(alpha):
    ch = builtin_oscillator(alpha)
    validate(ch, n=32)
    w = ch.omega_at({"y1": 0.0, "y2": 0.3, "q1": 0.0, "q2": 0.0})
    assert w[0, 1] == pytest.approx(1 / (2 * (float(alpha) - 1)))


@pytest.mark.parametrize("seed", range(3))
def test_random_chart_inverse_and_roundtrip(seed):
    ch = validate(random_torus_chart(2, 1, seed))
    pts = ch.sample(64)
    w = ch.omega_at(pts)
    res = np.einsum("nij,njk->nik", w, omega_inverse_at(ch, pts)) - np.eye(4)
    assert np.max(np.abs(res)) < 1e-12
    again = load_chart(json.dumps(ch.to_json()))
    assert again.chart_hash() == ch.chart_hash()
    # symbolic adjugate inverse agrees with numeric
    sym_inv = np.stack([np.stack([np.broadcast_to(v, 64) for v in ch.eval(row, pts)], -1) for row in ch.omega_inv], 1)
    assert np.allclose(sym_inv, omega_inverse_at(ch, pts), atol=1e-12)


def test_sampling_deterministic():
    ch = builtin_flat_torus()
    a, b = ch.sample(16, seed=3), ch.sample(16, seed=3)
    assert all(np.array_equal(a[c], b[c]) for c in ch.coords)
