import numpy as np
import pytest

from oracles import TOY_A, TOY_B, toy_run
from swingbench.ann import Mlp, forward, layer_specs, mlp_init
from swingbench.cpss import Cpss
from swingbench.errors import NumericalError
from swingbench.identifier import (IdDataset, IdentifierConfig, TappedDelays, build_dataset,
                                   dataset_rmse, predict_one_step, train_identifier,
                                   validate_identifier)
from swingbench.scenarios import Scenario, get_scenario
from swingbench.sim import TimeSeries


def series(omega, u):
    n = len(omega)
    return TimeSeries(0.01, {"t": np.arange(n) * 0.01, "omega_pu": np.asarray(omega, float),
                             "upss_pu": np.asarray(u, float)})


def zero_net(cfg=IdentifierConfig()):
    net = mlp_init(layer_specs(cfg.n_inputs, cfg.hidden, 1), 0)
    for p in net.params():
        p[...] = 0.0
    return net


# taps

def test_taps_order_and_readiness():
    taps = TappedDelays(3, 2)
    for i in range(2):
        taps.push(0.1 * i, 0.01 * i)
        assert not taps.ready
    taps.push(0.2, 0.02)
    assert taps.ready
    np.testing.assert_allclose(taps.vector(100.0), [0.2, 0.1, 0.0, 2.0, 1.0])


def test_taps_not_ready_rejected():
    with pytest.raises(ValueError):
        TappedDelays(2, 2).vector(1.0)


# dataset

def test_constant_run_gives_zero_rows():
    ds = build_dataset(series(np.ones(20), np.zeros(20)), IdentifierConfig())
    assert np.all(ds.inputs == 0.0) and np.all(ds.targets == 0.0)


@pytest.mark.parametrize("n", [8, 9, 30])
def test_row_count(n):
    cfg = IdentifierConfig()
    ds = build_dataset(series(np.ones(n), np.zeros(n)), cfg)
    assert len(ds) == n - max(cfg.n_u, cfg.n_w)


def test_run_too_short():
    with pytest.raises(ValueError, match="too short"):
        build_dataset(series(np.ones(7), np.zeros(7)), IdentifierConfig())


def test_recurrence_targets_exact():
    cfg = IdentifierConfig()
    ds = build_dataset(toy_run(200), cfg)
    expected = TOY_A * ds.inputs[:, cfg.n_u] + cfg.scale_w * TOY_B * ds.inputs[:, 0]
    # omega is stored as 1 + dw, so dw carries one rounding of 1.0 (~1e-16 p.u.)
    np.testing.assert_allclose(ds.targets, expected, rtol=0, atol=1e-12)


def test_row_layout():
    cfg = IdentifierConfig()
    run = toy_run(50)
    ds = build_dataset(run, cfg)
    k = 10  # row index r corresponds to tick k = r + depth - 1
    r = k - (cfg.depth - 1)
    u, dw = run["upss_pu"], run["omega_pu"] - 1.0
    np.testing.assert_allclose(ds.inputs[r], [u[k], u[k - 1], u[k - 2],
                                              100 * dw[k], 100 * dw[k - 1], 100 * dw[k - 2]])
    assert ds.targets[r] == pytest.approx(100 * dw[k + 1], abs=1e-15)


def test_rows_are_causal():
    cfg = IdentifierConfig()
    run = toy_run(60)
    ds = build_dataset(run, cfg)
    run["omega_pu"][40:] += 0.5
    run["upss_pu"][40:] -= 0.5
    ds2 = build_dataset(run, cfg)
    last_clean = 39 - 1 - (cfg.depth - 1)  # row whose target is sample 39
    np.testing.assert_array_equal(ds.inputs[:last_clean + 1], ds2.inputs[:last_clean + 1])
    np.testing.assert_array_equal(ds.targets[:last_clean + 1], ds2.targets[:last_clean + 1])


def test_dataset_csv_round_trip(tmp_path):
    cfg = IdentifierConfig()
    ds = build_dataset(toy_run(40), cfg)
    ds.to_csv(tmp_path / "d.csv", cfg)
    head = (tmp_path / "d.csv").read_text().splitlines()[0]
    assert head == "u_k,u_k1,u_k2,dw_k,dw_k1,dw_k2,target_dw_next"
    back = IdDataset.from_csv(tmp_path / "d.csv", cfg)
    assert np.array_equal(back.inputs, ds.inputs) and np.array_equal(back.targets, ds.targets)


def test_dataset_header_tracks_tap_counts():
    assert IdentifierConfig(n_u=2, n_w=4).columns() == [
        "u_k", "u_k1", "dw_k", "dw_k1", "dw_k2", "dw_k3", "target_dw_next"]


# training

def test_memorizes_repeated_pair():
    X = np.tile([0.01, 0.02, -0.01, 0.3, 0.2, 0.1], (64, 1))
    _, rep = train_identifier(IdDataset(X, np.full(64, 0.3)), IdentifierConfig())
    assert rep.epoch_cost[-1] < 1e-10


def test_zero_learning_rate_keeps_parameters():
    cfg = IdentifierConfig(eta=0.0, epochs=5)
    ds = build_dataset(toy_run(300), cfg)
    start = mlp_init(layer_specs(6, (10,), 1), 0)
    net, rep = train_identifier(ds, cfg, start.copy())
    assert net.same_parameters(start)
    assert np.ptp(rep.epoch_cost) <= 1e-12 * rep.epoch_cost[0]


def test_learns_linear_recurrence():
    cfg = IdentifierConfig(scale_w=5.0)
    _, rep = train_identifier(build_dataset(toy_run(), cfg), cfg)
    assert rep.rmse < 1e-3


def test_cost_decreases_on_excitation_data(trained_ni):
    _, rep, _ = trained_ni
    assert rep.epoch_cost[-1] < rep.epoch_cost[0]
    assert rep.skipped_updates == 0


def test_training_deterministic():
    cfg = IdentifierConfig(epochs=3)
    ds = build_dataset(toy_run(500), cfg)
    a, ra = train_identifier(ds, cfg)
    b, rb = train_identifier(ds, cfg)
    assert a.same_parameters(b) and ra.epoch_cost == rb.epoch_cost


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_divergence_aborts_with_report():
    cfg = IdentifierConfig(eta=50.0, clip=float("inf"), epochs=50)
    with pytest.raises(NumericalError, match="diverged") as exc:
        train_identifier(build_dataset(toy_run(500), cfg), cfg)
    assert exc.value.report is not None and exc.value.report.epoch_cost


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train_identifier(IdDataset(np.empty((0, 6)), np.empty(0)), IdentifierConfig())


def test_train_report_csv(tmp_path, trained_ni):
    _, rep, _ = trained_ni
    rep.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_cost" and len(lines) == 1 + len(rep.epoch_cost) + 1


# prediction

def test_zero_network_predicts_nominal_speed():
    taps = TappedDelays(3, 3)
    for i in range(3):
        taps.push(0.05, 0.01 * i)
    assert predict_one_step(zero_net(), taps, IdentifierConfig()) == 1.0


def test_prediction_needs_full_taps():
    with pytest.raises(ValueError):
        predict_one_step(zero_net(), TappedDelays(3, 3), IdentifierConfig())


def test_trained_identifier_quiet_at_equilibrium(trained_ni):
    taps = TappedDelays(3, 3)
    for _ in range(3):
        taps.push(0.0, 0.0)
    assert abs(predict_one_step(trained_ni[0], taps, IdentifierConfig()) - 1.0) < 1e-5


def test_scale_change_keeps_per_unit_predictions(plant, excitation_run, trained_ni):
    cfg50 = IdentifierConfig(scale_w=50.0)
    ni50, _ = train_identifier(build_dataset(excitation_run, cfg50), cfg50)
    v = get_scenario("V")
    a = validate_identifier(trained_ni[0], v, IdentifierConfig(), Cpss(), plant)
    b = validate_identifier(ni50, v, cfg50, Cpss(), plant)
    assert a.rmse < 1e-4 and b.rmse < 1e-4
    assert np.sqrt(np.mean((a.omega_hat - b.omega_hat) ** 2)) < 1e-4


# validation

def test_zero_network_rmse_equals_speed_rms(plant):
    res = validate_identifier(zero_net(), get_scenario("V"), IdentifierConfig(), Cpss(), plant)
    assert res.rmse == pytest.approx(np.sqrt(np.mean((res.omega - 1.0) ** 2)), rel=1e-12)
    assert res.rmse == res.baseline_rmse


def test_event_free_validation(plant, trained_ni):
    quiet = Scenario("quiet", 0.8, 1.0, (), 5.0)
    cfg = IdentifierConfig()
    assert validate_identifier(zero_net(), quiet, cfg, Cpss(), plant).rmse < 1e-12
    # a trained net is left with its constant equilibrium offset only
    res = validate_identifier(trained_ni[0], quiet, cfg, Cpss(), plant)
    offset = abs(float(forward(trained_ni[0], np.zeros(6))[0][0])) / cfg.scale_w
    assert res.rmse == pytest.approx(offset, rel=1e-6)
    assert res.rmse < 1e-5


def test_validation_trace_csv(tmp_path, plant, trained_ni):
    res = validate_identifier(trained_ni[0], Scenario("q", 0.8, 1.0, (), 1.0),
                              IdentifierConfig(), Cpss(), plant)
    res.to_csv(tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "t,omega_pu,omega_hat_pu" and len(lines) == len(res.t) + 1
    # first scored sample is the one after the taps fill
    assert res.t[0] == pytest.approx(0.03)


def test_online_adaptation_works_on_a_copy(plant, trained_ni):
    ni = trained_ni[0]
    before = ni.copy()
    cfg = IdentifierConfig(online=True)
    a = validate_identifier(ni, get_scenario("V"), cfg, Cpss(), plant)
    b = validate_identifier(ni, get_scenario("V"), cfg, Cpss(), plant)
    assert ni.same_parameters(before)
    assert np.isfinite(a.rmse) and a.rmse == b.rmse
    offline = validate_identifier(ni, get_scenario("V"), IdentifierConfig(), Cpss(), plant)
    assert a.rmse != offline.rmse


def test_dataset_rmse_of_exact_model():
    cfg = IdentifierConfig()
    ds = build_dataset(toy_run(300), cfg)
    from oracles import exact_toy_identifier
    assert dataset_rmse(exact_toy_identifier(cfg.scale_w), ds) < 1e-13
