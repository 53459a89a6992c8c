"""
Energy Budget Suite
Kinetic and thermal energy balance residuals shrink at second order when the
grid and the step are refined together, and the kinetic balance never shows
a gain beyond scheme error
"""

from typing import List

import numpy as np

from .base import MemberResult, VerificationSuite


class BudgetSuite(VerificationSuite):
    """Two-grid refinement of the per-step energy balance residuals"""

    DESCRIPTION = "Second-order energy balance residuals under refinement"
    NAME = 'budget'
    DEFAULTS = {
        'grid': (16, 16),
        'refinement': 2,
        'mu': 0.02,
        'kappa': 0.02,
        'alpha': 0.5,
        'g_spec': 'linear_y(-1)',
        'thetaB_spec': 'affine(1, 0, -1)',
        'perturbation': 0.1,
        'dt_max': 0.02,
        't_end': 0.2,
        'ratio_range': (3.0, 5.0),
    }

    COLUMNS = (('ke_budget_refinement', 'ke_budget_res'),
               ('thermal_budget_refinement', 'thermal_budget_res'))

    def evaluate(self):
        o = self.options
        r = int(o['refinement'])
        nx, ny = o['grid']
        jobs = []
        for label, factor in (('coarse', 1), ('fine', r)):
            config = self.member_config(
                grid={'nx': nx * factor, 'ny': ny * factor},
                physics={'mu': o['mu'], 'kappa': o['kappa'], 'alpha': o['alpha'],
                         'g_spec': o['g_spec'], 'thetaB_spec': o['thetaB_spec']},
                numerics={'dt_max': o['dt_max'] / factor, 'advection': 'upwind', 'bc_coupling': 'implicit'},
                run={'t_end': o['t_end']},
                initial={'theta0_spec': f"perturbed({o['perturbation']})", 'u0_spec': 'zero'},
            )
            jobs.append((label, lambda l=label, c=config: self.run_member(l, c)))
        results: List[MemberResult] = self.run_ensemble(jobs)
        if not self.check_member_errors(results):
            return

        signs = 0
        first = None
        for result in results:
            self.add_violations(result.log)
            events = [e for e in result.log.events if e.kind == 'energy_sign']
            signs += len(events)
            if events and first is None:
                first = (result.label, events[0])
        self.check('energy_sign', signs == 0,
                   counterexample=first[1].state if first else None,
                   label=first[0] if first else '', events=signs)

        coarse, fine = results
        expected = float(r * r)
        low, high = o['ratio_range']
        for name, column in self.COLUMNS:
            worst_coarse = float(np.max(np.abs(coarse.log.column(column))))
            worst_fine = float(np.max(np.abs(fine.log.column(column))))
            ratio = worst_coarse / worst_fine if worst_fine > 0.0 else float('inf')
            self.check(name, low <= ratio <= high, coarse=worst_coarse, fine=worst_fine,
                       ratio=ratio, expected=expected)
