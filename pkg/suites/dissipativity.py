"""
Dissipativity Suite
Runs from small, moderate and large initial data settle into the same
bounded region
"""

from typing import List

from diagnostics import absorbing_radii

from .base import MemberResult, VerificationSuite


class DissipativitySuite(VerificationSuite):
    """Absorbing radii must not depend on the initial amplitude"""

    DESCRIPTION = "Bounded absorbing set independent of initial data"
    NAME = 'dissipativity'
    DEFAULTS = {
        'amplitudes': [1.0, 10.0, 100.0],
        'velocity_fraction': 0.1,
        'discard': 20.0,
        't_end': 50.0,
        'agreement': 0.2,
        'seed': 1,
    }

    def evaluate(self):
        o = self.options
        jobs = []
        for amplitude in o['amplitudes']:
            label = f"amplitude{amplitude:g}"
            config = self.member_config(
                run={'t_end': o['t_end'], 'seed': o['seed']},
                initial={'theta0_spec': f"random({amplitude})",
                         'u0_spec': f"random_divfree({amplitude * o['velocity_fraction']})"},
            )
            jobs.append((label, lambda l=label, c=config: self.run_member(l, c)))
        results: List[MemberResult] = self.run_ensemble(jobs)
        if not self.check_member_errors(results):
            return

        for result in results:
            self.add_violations(result.log)
        radii = absorbing_radii([r.log for r in results], o['discard'])
        spread = (max(radii) - min(radii)) / max(radii) if max(radii) > 0 else 0.0
        self.check('radius_agreement', spread <= o['agreement'],
                   radii=dict(zip((r.label for r in results), radii)), spread=spread,
                   radius=max(radii))
        self.check('uniform_bound', self.report.violations.get('theta_bound', 0) == 0,
                   violations=self.report.violations.get('theta_bound', 0))
