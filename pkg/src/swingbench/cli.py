"""Command-line front end: ``swingbench <command> [options]``.

Pipeline: ``excite -> train-id -> validate-id -> train-nc -> compare``, plus
single ``simulate`` runs and ``bridge`` hosting.  Each command writes its
output files and a ``<output>.meta.json`` sidecar holding the resolved
configuration, the seed and the package version.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
3 protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ann import Mlp, load_weights, save_weights
from .bridge import StabilizerServer, parse_endpoint, run_plant_with_bridge
from .config import Config, load_config, resolve_seed
from .controller import AnnStabilizer, train_controller, write_episode_reports
from .cpss import Cpss, NoStabilizer
from .errors import ConfigError, NumericalError, ProtocolError
from .excitation import generate_training_run
from .identifier import IdDataset, build_dataset, train_identifier, validate_identifier
from .scenarios import compare_report, compute_metrics, run_scenario
from .sim import TimeSeries, read_csv

log = logging.getLogger("swingbench")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PROTOCOL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_meta(out_path, command: str, cfg: Config, seed, extra: dict | None = None) -> Path:
    meta = {
        "artifact": "swingbench",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": cfg.resolved(),
    }
    if extra:
        meta.update(extra)
    path = Path(f"{out_path}.meta.json")
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8",
                    newline="\n")
    return path


def _setup(args) -> tuple[Config, int | None]:
    cfg = load_config(args.config)
    seed = resolve_seed(getattr(args, "seed", None), cfg)
    return cfg.with_seed(seed), seed


def _load_net(path, n_inputs: int, what: str) -> Mlp:
    if path is None:
        raise ConfigError(f"{what} weights are required")
    try:
        net = load_weights(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} weights {path}: {exc}") from None
    if net.n_inputs != n_inputs:
        raise ConfigError(f"{what} weights {path} take {net.n_inputs} inputs, "
                          f"config expects {n_inputs}")
    return net


def _stabilizer(kind: str, cfg: Config, nc_path=None, ni_path=None):
    if kind == "none":
        return NoStabilizer()
    if kind == "cpss":
        return Cpss(cfg.cpss)
    if ni_path is not None:
        _load_net(ni_path, cfg.identifier.n_inputs, "identifier")
    return AnnStabilizer(_load_net(nc_path, cfg.controller.n_inputs, "controller"),
                         cfg.controller)


def _metrics_dict(m) -> dict:
    return {"peak_dw": m.peak_dw, "settling_time_s": m.settling_time,
            "itae": m.itae, "settled": m.settled}


def cmd_simulate(args) -> int:
    cfg, seed = _setup(args)
    scenario = cfg.scenario_named(args.scenario)
    plant = cfg.plant_config
    if args.bridge:
        parse_endpoint(args.bridge)
        ts = run_plant_with_bridge(plant, scenario, args.bridge, args.timeout)
        kind = "bridged"
    else:
        kind = args.stabilizer
        ts = run_scenario(scenario, _stabilizer(kind, cfg, args.weights_nc, args.weights_ni), plant)
    ts.to_csv(args.out)
    m = compute_metrics(ts, scenario.t_event)
    _write_meta(args.out, "simulate", cfg, seed, {
        "scenario": scenario.name, "stabilizer": kind, "truncated": ts.truncated,
        "metrics": _metrics_dict(m)})
    state = "lost synchronism" if ts.truncated else ("settled" if m.settled else "not settled")
    print(f"{scenario.name} {kind}: peak_dw={m.peak_dw:.4e} settling={m.settling_time:.3f} s "
          f"itae={m.itae:.4e} ({state}) -> {args.out}")
    return EXIT_OK


def cmd_excite(args) -> int:
    cfg, seed = _setup(args)
    if args.duration is not None:
        cfg = replace(cfg, excitation=replace(cfg.excitation, duration=args.duration))
    ts = generate_training_run(cfg.plant_config, cfg.excitation)
    ts.to_csv(args.out)
    _write_meta(args.out, "excite", cfg, seed, {"samples": len(ts)})
    print(f"excitation run: {len(ts)} samples, peak |dw| = {abs(ts.dw).max():.3e} -> {args.out}")
    return EXIT_OK


def _load_training_data(path, cfg: Config) -> IdDataset:
    try:
        names, _ = read_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read training data {path}: {exc}") from None
    if names == cfg.identifier.columns():
        return IdDataset.from_csv(path, cfg.identifier)
    if "omega_pu" in names and "upss_pu" in names:
        return build_dataset(TimeSeries.from_csv(path), cfg.identifier)
    raise ConfigError(f"{path}: neither a trajectory nor an identifier dataset")


def cmd_train_id(args) -> int:
    cfg, seed = _setup(args)
    data = _load_training_data(args.data, cfg)
    if args.dataset_out:
        data.to_csv(args.dataset_out, cfg.identifier)
    net, report = train_identifier(data, cfg.identifier)
    save_weights(net, args.out)
    if args.report:
        report.to_csv(args.report)
    _write_meta(args.out, "train-id", cfg, seed, {
        "data": str(args.data), "rows": len(data), "rmse_scaled": report.rmse,
        "skipped_updates": report.skipped_updates})
    print(f"identifier: {len(data)} rows, final scaled RMSE {report.rmse:.3e} -> {args.out}")
    return EXIT_OK


def cmd_validate_id(args) -> int:
    cfg, seed = _setup(args)
    ni = _load_net(args.weights, cfg.identifier.n_inputs, "identifier")
    scenario = cfg.scenario_named(args.scenario)
    res = validate_identifier(ni, scenario, cfg.identifier,
                              _stabilizer(args.stabilizer, cfg, args.nc_weights),
                              cfg.plant_config)
    res.to_csv(args.out)
    _write_meta(args.out, "validate-id", cfg, seed, {
        "scenario": scenario.name, "stabilizer": args.stabilizer,
        "rmse_pu": res.rmse, "baseline_rmse_pu": res.baseline_rmse})
    print(f"one-step RMSE {res.rmse:.3e} p.u. (constant-speed baseline "
          f"{res.baseline_rmse:.3e}) -> {args.out}")
    return EXIT_OK


def cmd_train_nc(args) -> int:
    cfg, seed = _setup(args)
    if args.episodes is not None:
        cfg = replace(cfg, controller=replace(cfg.controller, episodes=args.episodes))
    ni = _load_net(args.id_weights, cfg.identifier.n_inputs, "identifier")
    try:
        nc, reports = train_controller(ni, cfg.plant_config, cfg.controller, cfg.identifier)
    except NumericalError as exc:
        if args.report and exc.report:
            write_episode_reports(exc.report, args.report)
        raise
    save_weights(nc, args.out)
    if args.report:
        write_episode_reports(reports, args.report)
    aborted = sum(r.aborted for r in reports)
    _write_meta(args.out, "train-nc", cfg, seed, {
        "id_weights": str(args.id_weights), "episodes": len(reports),
        "aborted_episodes": aborted})
    print(f"controller: {len(reports)} episodes ({aborted} rolled back) -> {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, seed = _setup(args)
    scenario = cfg.scenario_named(args.scenario)
    ann = _stabilizer("annpss", cfg, args.nc_weights, args.id_weights)
    res = compare_report(scenario, Cpss(cfg.cpss), ann, cfg.plant_config)
    paired = args.paired or str(Path(args.report).with_suffix("")) + "_paired.csv"
    res.write(args.report, paired)
    _write_meta(args.report, "compare", cfg, seed, {
        "scenario": scenario.name, "paired": paired, "ranking": res.ranking(),
        "metrics": {k: _metrics_dict(m) for k, m in res.metrics.items()}})
    for _, name, peak, settle, itae, ok in res.rows():
        print(f"{scenario.name} {name:7s} peak_dw={peak:.4e} settling={settle:.3f} s "
              f"itae={itae:.4e} settled={str(ok).lower()}")
    print(f"ranking: {' < '.join(res.ranking())} -> {args.report}")
    return EXIT_OK


def cmd_bridge(args) -> int:
    cfg, seed = _setup(args)
    if args.role == "serve-cpss":
        stab = Cpss(cfg.cpss)
    else:
        stab = _stabilizer("annpss", cfg, args.nc_weights, args.id_weights)
    replay = args.replay or f"bridge-{args.port}.replay"
    server = StabilizerServer(stab, args.host, args.port, args.timeout, replay)
    print(f"serving {stab.name} on {server.endpoint}", file=sys.stderr, flush=True)
    steps = server.serve_one()
    _write_meta(replay, "bridge " + args.role, cfg, seed, {"steps": steps})
    print(f"session complete: {steps} steps", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swingbench", description="SMIB stabilizer benchmark.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help="section.key = value file")
        if seed:
            sp.add_argument("--seed", type=int, help="global seed (fallback: SWINGBENCH_SEED)")

    sp = sub.add_parser("simulate", help="run one scenario")
    common(sp)
    sp.add_argument("--scenario", default="S1")
    sp.add_argument("--stabilizer", choices=("none", "cpss", "annpss"), default="cpss")
    sp.add_argument("--weights-ni")
    sp.add_argument("--weights-nc")
    sp.add_argument("--bridge", metavar="HOST:PORT", help="use a stabilizer served over the bridge")
    sp.add_argument("--timeout", type=float, default=10.0)
    sp.add_argument("--out", default="trajectory.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("excite", help="open-loop multisine run for identification")
    common(sp)
    sp.add_argument("--duration", type=float)
    sp.add_argument("--out", default="excitation.csv")
    sp.set_defaults(func=cmd_excite)

    sp = sub.add_parser("train-id", help="train the neural identifier")
    common(sp)
    sp.add_argument("--data", required=True, help="excitation trajectory or dataset CSV")
    sp.add_argument("--out", default="ni.weights")
    sp.add_argument("--report", help="per-epoch cost CSV")
    sp.add_argument("--dataset-out", help="also write the tapped-delay dataset CSV")
    sp.set_defaults(func=cmd_train_id)

    sp = sub.add_parser("validate-id", help="score one-step predictions on a scenario")
    common(sp)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--scenario", default="V")
    sp.add_argument("--stabilizer", choices=("none", "cpss", "annpss"), default="cpss")
    sp.add_argument("--nc-weights", help="controller weights when --stabilizer annpss")
    sp.add_argument("--out", default="validation.csv")
    sp.set_defaults(func=cmd_validate_id)

    sp = sub.add_parser("train-nc", help="train the neural controller through the identifier")
    common(sp)
    sp.add_argument("--id-weights", required=True)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--out", default="nc.weights")
    sp.add_argument("--report", help="per-episode CSV")
    sp.set_defaults(func=cmd_train_nc)

    sp = sub.add_parser("compare", help="CPSS versus neural stabilizer on one scenario")
    common(sp)
    sp.add_argument("--scenario", default="S1")
    sp.add_argument("--id-weights")
    sp.add_argument("--nc-weights", required=True)
    sp.add_argument("--report", default="compare.csv")
    sp.add_argument("--paired", help="paired trace CSV (default: <report>_paired.csv)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bridge", help="host a stabilizer for one bridged session")
    common(sp)
    sp.add_argument("role", choices=("serve-cpss", "serve-annpss"))
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, required=True)
    sp.add_argument("--id-weights")
    sp.add_argument("--nc-weights")
    sp.add_argument("--timeout", type=float, default=10.0)
    sp.add_argument("--replay", help="session log (default: bridge-<port>.replay)")
    sp.set_defaults(func=cmd_bridge)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"swingbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ProtocolError as exc:
        print(f"swingbench: protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ConfigError, ValueError, OSError) as exc:
        print(f"swingbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
