"""
Exponential Stability Suite
Non-aligned small data: the equilibrium found by pseudo-time marching is
independent of the start, the computable margin is positive and the
relative energy decays monotonically
"""

import numpy as np

from diagnostics import fit_decay_rate
from equilibrium import smallness_margin, certified_decay_rate, steady_solve
from simulation import Simulation

from .base import VerificationSuite


class StabilitySuite(VerificationSuite):
    """Global exponential stability under small data"""

    DESCRIPTION = "Exponential stability of equilibria for small data"
    NAME = 'stability'
    DEFAULTS = {
        'thetaB_spec': 'cosine_x(0.1)',
        'perturbation': 0.1,
        'tol_steady': 1e-9,
        'max_T': 50.0,
        't_end': 3.0,
        'seed': 1,
        'slack': 1e-12,
    }

    def evaluate(self):
        o = self.options
        rest = self.member_config(physics={'thetaB_spec': o['thetaB_spec']},
                                  initial={'theta0_spec': 'zero', 'u0_spec': 'zero'})
        perturbed = self.member_config(
            physics={'thetaB_spec': o['thetaB_spec']},
            run={'t_end': o['t_end'], 'seed': o['seed']},
            initial={'theta0_spec': f"random({o['perturbation']})",
                     'u0_spec': f"random_divfree({o['perturbation']})"},
        )

        def solve(config, label):
            sim = Simulation(config, self.output_dir / label, banner=False)
            return steady_solve(sim.closure, sim.params, sim.initial_state(), o['tol_steady'],
                                o['max_T'], sim.potential), sim

        (eq1, sim), (eq2, _) = self.run_ensemble([
            ('rest', lambda: solve(rest, 'steady_rest')),
            ('perturbed', lambda: solve(perturbed, 'steady_perturbed')),
        ])
        distance = max(float(np.max(np.abs(eq1.thetas.values - eq2.thetas.values))),
                       max((eq1.us - eq2.us).max_abs()))
        self.check('equilibrium_independent_of_start', distance <= 10.0 * o['tol_steady'],
                   distance=distance)

        margin = smallness_margin(eq1, sim.closure, sim.potential, sim.params)
        self.check('positive_margin', margin > 0, margin=margin, rate_bound=certified_decay_rate(margin))

        result = self.run_member('relative_energy', perturbed, equilibrium=eq1)
        if not self.check_member_errors([result]):
            return
        self.add_violations(result.log)
        t = result.log.times
        energy = result.log.column('rel_energy')
        allowance = o['slack'] * max(1.0, energy[0])
        increases = np.diff(energy[1:])
        worst = float(increases.max()) if increases.size else 0.0
        self.check('relative_energy_monotone', worst <= allowance,
                   counterexample=result.state, label='relative_energy', max_increase=worst)

        fit = fit_decay_rate(t, energy, noise_floor=1e-12 * energy[0])
        self.check('decay_rate_positive', fit.K > 0, **fit.to_dict())
