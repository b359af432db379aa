"""Bracket stability of H+ above the threshold under node-budget and window refinement.

usage: python3 scripts/convergence_ssf.py [lambda ...]
"""

import sys

from edge_spectral_lab.effective import H_PLUS, SsfSolver
from edge_spectral_lab.fiber import FiberSpec
from edge_spectral_lab.potentials import PotentialModel, volume_function


def main(argv):
    lams = [float(a) for a in argv] or [1e-2, 1e-3]
    solver = SsfSolver(PotentialModel(), FiberSpec(), 1)
    print("lambda,node_budget,eps_scale,nodes,lower,upper,trace_norm,bN")
    for lam in lams:
        bN = volume_function(solver.P, lam)
        for budget, eps_scale in ((600, 1.0), (1200, 1.0), (2400, 1.0), (1200, 0.5)):
            res = solver.solve(lam, 0.2, eps_scale=eps_scale, node_budget=budget)
            br = res.bracket(H_PLUS)
            print(f"{lam:.3e},{budget},{eps_scale},{res.scheme.n},{br.lower},{br.upper},"
                  f"{res.spectrum.trace_norm:.10e},{bN:.6e}", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
