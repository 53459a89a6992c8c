"""
Maximum Principle Suite
Per-step containment of the temperature in the envelope of its previous
interior values and the new wall trace
"""

from typing import List

from .base import MemberResult, VerificationSuite


class MaxPrincipleSuite(VerificationSuite):
    """Zero envelope violations across alpha values with upwind transport"""

    DESCRIPTION = "Discrete maximum/minimum principle of the temperature step"
    NAME = 'maxprinciple'
    DEFAULTS = {
        'alphas': [0.1, 0.5, 0.9],
        'seeds': [1],
        'grid': (32, 32),
        't_end': 5.0,
        'thetaB_spec': 'cosine_x(1)',
        'theta0_spec': 'random(1)',
        'u0_spec': 'random_divfree(1)',
    }

    def evaluate(self):
        o = self.options
        jobs = []
        for alpha in o['alphas']:
            for seed in o['seeds']:
                label = f"alpha{alpha:g}_seed{seed}"
                config = self.member_config(
                    grid={'nx': o['grid'][0], 'ny': o['grid'][1]},
                    physics={'alpha': alpha, 'thetaB_spec': o['thetaB_spec']},
                    numerics={'advection': 'upwind'},
                    run={'t_end': o['t_end'], 'seed': seed},
                    initial={'theta0_spec': o['theta0_spec'], 'u0_spec': o['u0_spec']},
                )
                jobs.append((label, lambda l=label, c=config: self.run_member(l, c)))
        results: List[MemberResult] = self.run_ensemble(jobs)
        self.check_member_errors(results)

        first = None
        total = 0
        for result in results:
            self.add_violations(result.log)
            events = [e for e in result.log.events if e.kind == 'max_principle']
            total += len(events)
            if events and first is None:
                first = (result.label, events[0])
        self.check('envelope_containment', total == 0,
                   counterexample=first[1].state if first else None,
                   label=first[0] if first else '',
                   events=total, members=len(results),
                   truncation_events=self.report.violations.get('truncation', 0))
