"""Smoke tests for the python layer; scales are kept tiny."""

import math

import mfj


def test_version():
    assert mfj.version() == "0.1.0"
    assert mfj.__version__ == "0.1.0"


def test_certificate_splits_the_reference_problems():
    good = mfj.certificate("example_3_1", T=0.25)
    assert good["pass"] is True
    assert good["condition_set"].startswith("H32")
    assert len(good["margins"]) == len(good["margin_names"])

    bad = mfj.certificate("example_3_2")
    assert bad["pass"] is False


def test_solve_small_instance():
    rep = mfj.solve("example_3_1", T=0.25, steps=30, particles=300, seed=3)
    assert rep["status"] == "Solved"
    assert abs(rep["alpha_reached"] - 1.0) < 1e-12
    assert len(rep["mean_x"]) == 31
    # Coarse agreement with the closed-form initial mean value.
    assert abs(rep["y0"] - 1.2511496961049988) < 0.2


def test_portfolio_run():
    out = mfj.portfolio_run(steps=200)
    assert out["foc_max"] < 1e-10
    assert out["checks"]["phi-printed"] is True
    assert out["checks"]["psi-printed"] is False
    assert out["checks"]["psi-corrected"] is True
    assert math.isfinite(out["u0_at_x0"])


def test_lq_run_is_deterministic():
    a = mfj.lq_run(steps=50, particles=100, seed=5)
    b = mfj.lq_run(steps=50, particles=100, seed=5)
    assert a["y0_star"] == b["y0_star"]
    assert a["iterations"] >= 1
    assert abs(a["y0_star"] - 0.4347436788155094) < 5e-2


def test_bad_problem_raises():
    try:
        mfj.solve("no_such_system")
    except RuntimeError as e:
        assert "unknown problem" in str(e)
    else:
        raise AssertionError("expected a RuntimeError")
