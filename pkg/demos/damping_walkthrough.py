"""Why the machine needs a stabilizer, and what the conventional one buys.

Run:  python3 demos/damping_walkthrough.py
"""

import math

from swingbench import PlantConfig
from swingbench.cpss import Cpss, CpssParams, NoStabilizer, frequency_response, sections
from swingbench.plant import dominant_mode, init_equilibrium
from swingbench.scenarios import compute_metrics, get_scenario, run_scenario


def main():
    pc = PlantConfig()
    state, inputs = init_equilibrium(pc.gen, pc.net, 0.8, 1.0)
    lam = dominant_mode(state, inputs, pc.gen, pc.net)
    zeta = -lam.real / abs(lam)
    print(f"operating point: delta = {math.degrees(state.delta):.1f} deg, "
          f"E'q = {state.eqp:.3f}, Efd = {state.efd:.3f}")
    print(f"electromechanical mode: {lam.imag / (2 * math.pi):.3f} Hz, "
          f"sigma = {lam.real:+.4f} 1/s, damping ratio {100 * zeta:.2f} %")

    # phase lead the CPSS contributes around the mode
    p = CpssParams()
    f = lam.imag / (2 * math.pi)
    lead = sum(math.degrees(math.atan2(r.imag, r.real))
               for r in (frequency_response(s, f, p.h_c) for s in sections(p)))
    print(f"CPSS phase at the mode frequency: {lead:+.1f} deg")

    sc = get_scenario("S1")
    print(f"\nscenario S1: fault at 0.2 s for 0.5 s, +10 % mechanical power at 8 s")
    for stab in (NoStabilizer(), Cpss()):
        m = compute_metrics(run_scenario(sc, stab, pc), sc.t_event)
        settle = f"{m.settling_time:6.2f} s" if m.settled else "  never"
        print(f"  {stab.name:5s} peak |dw| {m.peak_dw:.2e}  settles {settle}  ITAE {m.itae:.3e}")


if __name__ == "__main__":
    main()
