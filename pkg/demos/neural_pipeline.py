"""End-to-end neural stabilizer: excite, identify, train the controller, compare.

Uses the library directly with default settings (about 20 s).  The same
stages are available from the command line, see the README.

Run:  python3 demos/neural_pipeline.py
"""

from swingbench import PlantConfig
from swingbench.controller import AnnStabilizer, ControllerConfig, train_controller
from swingbench.cpss import Cpss
from swingbench.excitation import ExcitationConfig, generate_training_run
from swingbench.identifier import (IdentifierConfig, build_dataset, train_identifier,
                                   validate_identifier)
from swingbench.scenarios import compare_report, get_scenario


def main():
    pc, cfg_id, cfg_nc = PlantConfig(), IdentifierConfig(), ControllerConfig()

    run = generate_training_run(pc, ExcitationConfig())
    print(f"1. multisine run: {len(run)} samples, peak |dw| {abs(run.dw).max():.2e}")

    ni, rep = train_identifier(build_dataset(run, cfg_id), cfg_id)
    val = validate_identifier(ni, get_scenario("V"), cfg_id, Cpss(), pc)
    print(f"2. identifier: training RMSE {rep.rmse:.2e} (scaled); one-step RMSE on the "
          f"validation fault {val.rmse:.2e} p.u. vs {val.baseline_rmse:.2e} for 'no change'")

    nc, episodes = train_controller(ni, pc, cfg_nc, cfg_id)
    first, last = episodes[0].itae, sum(e.itae for e in episodes[-10:]) / 10
    print(f"3. controller: {len(episodes)} episodes, ITAE first {first:.3e}, last-10 mean {last:.3e}")

    print("4. comparison (ITAE, settling time):")
    for name in ("S1", "S2", "S3"):
        res = compare_report(get_scenario(name), Cpss(), AnnStabilizer(nc, cfg_nc), pc)
        for stab, m in res.metrics.items():
            settle = f"{m.settling_time:5.2f} s" if m.settled else "unsettled"
            print(f"   {name} {stab:6s} ITAE {m.itae:.3e}  {settle}")


if __name__ == "__main__":
    main()
