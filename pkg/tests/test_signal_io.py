"""signal_io: series loading, benchmark generation, config parsing."""

import numpy as np
import pytest
from scipy.optimize import fsolve

from symid.errors import (
    DivergedTrajectory,
    MissingColumn,
    MissingFile,
    NonFiniteValue,
    PreconditionViolation,
    SchemaViolation,
    SeriesTooShort,
)
from symid.signal_io import (
    RosslerParams,
    TimeSeries,
    config_from_dict,
    generate_rossler,
    load_series,
    parse_config,
    write_series,
)


def _write(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadSeries:
    def test_three_row_readback(self, tmp_path):
        path = _write(tmp_path, "t,v\n0,1\n1,2\n2,3\n")
        ts = load_series(path, "v")
        assert list(ts.samples) == [1.0, 2.0, 3.0]
        assert ts.dt == 1.0
        assert ts.label == "v"

    def test_blank_cell_rejected(self, tmp_path):
        path = _write(tmp_path, "t,v\n0,1\n1,\n2,3\n")
        with pytest.raises(NonFiniteValue) as err:
            load_series(path, "v")
        assert err.value.row == 3
        assert err.value.column == "v"

    def test_non_numeric_and_inf_rejected(self, tmp_path):
        with pytest.raises(NonFiniteValue):
            load_series(_write(tmp_path, "t,v\n0,1\n1,abc\n"), "v")
        with pytest.raises(NonFiniteValue):
            load_series(_write(tmp_path, "t,v\n0,1\n1,inf\n"), "v")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_series(tmp_path / "nope.csv", "v")

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path, "t,v\n0,1\n1,2\n")
        with pytest.raises(MissingColumn):
            load_series(path, "w")
        with pytest.raises(MissingColumn):
            load_series(path, 5)

    def test_column_by_index(self, tmp_path):
        path = _write(tmp_path, "a,b\n1,10\n2,20\n")
        ts = load_series(path, 1)
        assert list(ts.samples) == [10.0, 20.0]
        assert ts.label == "b"

    def test_too_short(self, tmp_path):
        with pytest.raises(SeriesTooShort):
            load_series(_write(tmp_path, "t,v\n0,1\n"), "v")

    def test_uneven_time_column_rejected(self, tmp_path):
        path = _write(tmp_path, "t,v\n0,1\n1,2\n3,3\n")
        with pytest.raises(PreconditionViolation):
            load_series(path, "v")

    def test_rossler_export_has_300_points(self, tmp_path):
        _, _, x3 = generate_rossler(RosslerParams())
        path = write_series(tmp_path / "x3.csv", x3)
        back = load_series(path, "x3")
        assert len(back) == 300

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_round_trip_exact(self, tmp_path, seed):
        rng = np.random.default_rng(seed)
        ts = TimeSeries(rng.normal(scale=rng.uniform(1e-8, 1e8), size=50),
                        dt=float(rng.uniform(1e-4, 10.0)), label="obs")
        back = load_series(write_series(tmp_path / "rt.csv", ts), "obs")
        assert back == ts  # samples, dt and label all exact


class TestTimeSeries:
    def test_invariants(self):
        with pytest.raises(PreconditionViolation):
            TimeSeries([1.0])
        with pytest.raises(PreconditionViolation):
            TimeSeries([1.0, np.inf])
        with pytest.raises(PreconditionViolation):
            TimeSeries([1.0, 2.0], dt=0.0)

    def test_samples_immutable(self):
        ts = TimeSeries([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            ts.samples[0] = 9.0


class TestGenerateRossler:
    def test_degenerate_count_rejected(self):
        with pytest.raises(PreconditionViolation):
            RosslerParams(n=1)

    def test_first_sample_is_x0(self):
        p = RosslerParams(x0=(0.5, -1.0, 2.0), n=10)
        x1, x2, x3 = generate_rossler(p)
        assert (x1.samples[0], x2.samples[0], x3.samples[0]) == (0.5, -1.0, 2.0)

    def test_equilibrium_stays_put(self):
        # independent root-finder locates the fixed point of the vector field
        def rhs(v):
            x1, x2, x3 = v
            return [-(x2 + x3), x1 + 0.2 * x2, 0.2 + x3 * (x1 - 2.6)]

        root = fsolve(rhs, [0.0, 0.0, 0.1], full_output=False)
        assert np.linalg.norm(rhs(root)) < 1e-8
        series = generate_rossler(RosslerParams(x0=tuple(root), n=200))
        for s, v in zip(series, root):
            assert np.max(np.abs(s.samples - v)) < 1e-6

    def test_benchmark_run_bounded_and_aperiodic(self):
        # benchmark setup: a=b=0.2, c=2.6, 300 samples spanning many
        # orbits at the default step
        x1, x2, x3 = generate_rossler(RosslerParams())
        for s in (x1, x2, x3):
            assert np.all(np.isfinite(s.samples))
            assert np.max(np.abs(s.samples)) < 1e3
        # no sample-exact periodicity at any period up to half the run
        x = x3.samples
        for period in range(1, 150):
            assert np.max(np.abs(x[period:] - x[:-period])) > 1e-6

    def test_deterministic(self):
        a = generate_rossler(RosslerParams())
        b = generate_rossler(RosslerParams())
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.samples, sb.samples)

    def test_divergence_guard(self):
        p = RosslerParams(x0=(1e5, 1e5, 1e5), dt=0.5, n=50)
        with pytest.raises(DivergedTrajectory):
            generate_rossler(p)

    def test_fourth_order_convergence(self):
        # error vs a dt/8 reference should shrink ~16x per halving of dt
        def final_state(dt, t_end=2.0):
            n = int(round(t_end / dt)) + 1
            series = generate_rossler(RosslerParams(x0=(1.0, 1.0, 0.5), dt=dt, n=n))
            return np.array([s.samples[-1] for s in series])

        ref = final_state(0.1 / 8)
        err_h = np.linalg.norm(final_state(0.1) - ref)
        err_h2 = np.linalg.norm(final_state(0.05) - ref)
        ratio = err_h / err_h2
        assert 10.0 < ratio < 24.0


class TestConfig:
    def test_empty_document_needs_seed(self, tmp_path):
        path = _write(tmp_path, "", name="cfg.yaml")
        with pytest.raises(SchemaViolation) as err:
            parse_config(path)
        assert err.value.field == "seed"

    def test_reference_ga_settings_accepted_verbatim(self):
        cfg = config_from_dict({
            "seed": 1,
            "ga": {"population": 200, "alpha": 0.3, "beta": 0.1, "stall_limit": 5},
        })
        assert cfg.ga.population == 200
        assert cfg.ga.alpha == 0.3
        assert cfg.ga.beta == 0.1
        assert cfg.ga.stall_limit == 5

    def test_length_bounds_ordering(self):
        with pytest.raises(SchemaViolation) as err:
            config_from_dict({"seed": 1, "fragments": {"min_len": 50, "max_len": 5}})
        assert err.value.field == "fragments.min_len"

    def test_unknown_field_named(self):
        with pytest.raises(SchemaViolation) as err:
            config_from_dict({"seed": 1, "ga": {"populaton": 10}})
        assert "populaton" in err.value.field

    def test_defaults_resolved(self):
        cfg = config_from_dict({"seed": 9})
        assert cfg.spectral.pairs == 10
        assert cfg.spectral.betas == [2.0 ** (-i) for i in range(10)]
        assert cfg.embedding.dim == 3
        assert cfg.fragments.points == 60

    def test_echo_round_trips(self, tmp_path):
        cfg = config_from_dict({"seed": 4, "ga": {"population": 20}})
        path = _write(tmp_path, cfg.echo(), name="echo.yaml")
        again = parse_config(path)
        assert again.to_dict() == cfg.to_dict()

    def test_range_violations(self):
        for bad in (
            {"seed": 1, "ga": {"alpha": 1.5}},
            {"seed": 1, "ga": {"population": 1}},
            {"seed": 1, "ga": {"elitism": 300}},
            {"seed": 1, "markers": {"spacing": 1}},
            {"seed": 1, "spectral": {"pairs": 40}},
            {"seed": 1, "generator": {"dt": 0}},
            {"seed": 1, "generator": {"observable": "x9"}},
            {"seed": "one"},
        ):
            with pytest.raises(SchemaViolation):
                config_from_dict(bad)
