"""
Aligned Stability Suite
Boundary temperature gradient parallel to gravity: the product condition
on the gradients holds and perturbations decay exponentially to the
closed-form rest state
"""

import numpy as np

from diagnostics import fit_decay_rate
from equilibrium import aligned_equilibrium, stability_check, steady_solve
from simulation import Simulation

from .base import VerificationSuite


class RayleighSuite(VerificationSuite):
    """Exponential decay to the aligned equilibrium under the gradient-product condition"""

    DESCRIPTION = "Stability of the aligned-gradient rest state"
    NAME = 'rayleigh'
    DEFAULTS = {
        'thetaB_spec': 'affine(1, 0, -1)',
        'g_spec': 'linear_y(-1)',
        'mu': 1.0,
        'kappa': 1.0,
        't_end': 2.0,
        'skip': 0.1,
        'theta0_spec': 'random(0.1)',
        'u0_spec': 'random_divfree(0.1)',
        'seed': 1,
        'r2_min': 0.99,
        'final_ratio': 1e-8,
        'tol_steady': 1e-8,
        'max_T': 50.0,
    }

    def evaluate(self):
        o = self.options
        config = self.member_config(
            physics={'mu': o['mu'], 'kappa': o['kappa'], 'thetaB_spec': o['thetaB_spec'], 'g_spec': o['g_spec']},
            run={'t_end': o['t_end'], 'seed': o['seed']},
            initial={'theta0_spec': o['theta0_spec'], 'u0_spec': o['u0_spec']},
        )
        sim = Simulation(config, self.output_dir / 'setup', banner=False)
        report = stability_check(sim.grid, sim.closure, sim.potential, sim.params)
        self.check('condition_satisfied', report.satisfied and report.aligned, **report.to_dict())

        eq = aligned_equilibrium(sim.grid, sim.closure, potential=sim.potential)
        result = self.run_member('relative_energy', config, equilibrium=eq)
        if not self.check_member_errors([result]):
            return
        self.add_violations(result.log)

        t = result.log.times
        energy = result.log.column('rel_energy')
        e0 = energy[0]
        keep = t >= t[0] + o['skip']
        fit = fit_decay_rate(t[keep], energy[keep], noise_floor=1e-12 * e0)
        self.check('decay_fit', fit.K > 0 and fit.r_squared >= o['r2_min'], **fit.to_dict())
        self.check('final_energy', energy[-1] <= o['final_ratio'] * e0,
                   counterexample=result.state, label='relative_energy',
                   initial=float(e0), final=float(energy[-1]))

        steady = steady_solve(sim.closure, sim.params, sim.initial_state(), o['tol_steady'], o['max_T'],
                              sim.potential)
        distance = float(np.max(np.abs(steady.thetas.values - eq.thetas.values)))
        self.check('steady_matches_closed_form', distance <= 10.0 * o['tol_steady'], distance=distance)
