"""
Uniform Bounds Suite
Temperature stays below max|Theta_0| + 2/(1 - alpha^2) max|thetaB| and inside
the sharper case-analysis envelope over long runs
"""

from typing import List

from .base import MemberResult, VerificationSuite


class BoundsSuite(VerificationSuite):
    """alpha x seed x grid ensemble checked against the uniform temperature bound"""

    DESCRIPTION = "Uniform-in-time temperature bounds"
    NAME = 'bounds'
    DEFAULTS = {
        'alphas': [0.1, 0.5, 0.9],
        'seeds': [1, 2, 3],
        'grids': [(24, 24), (32, 32)],
        't_end': 50.0,
        'theta0_spec': 'random(1)',
        'u0_spec': 'random_divfree(1)',
    }

    def evaluate(self):
        o = self.options
        jobs = []
        for nx, ny in o['grids']:
            for alpha in o['alphas']:
                for seed in o['seeds']:
                    label = f"{nx}x{ny}_alpha{alpha:g}_seed{seed}"
                    config = self.member_config(
                        grid={'nx': nx, 'ny': ny},
                        physics={'alpha': alpha},
                        run={'t_end': o['t_end'], 'seed': seed},
                        initial={'theta0_spec': o['theta0_spec'], 'u0_spec': o['u0_spec']},
                    )
                    jobs.append((label, lambda l=label, c=config: self.run_member(l, c)))
        results: List[MemberResult] = self.run_ensemble(jobs)
        self.check_member_errors(results)

        worst_ratio = 0.0
        bound_failures = []
        envelope_failures = []
        for result in results:
            log = result.log
            self.add_violations(log)
            tol = log.tolerance
            peak = max(abs(log.column('theta_inf').min()), abs(log.column('theta_sup').max()))
            worst_ratio = max(worst_ratio, peak / log.theta_bound if log.theta_bound > 0 else 0.0)
            if peak > log.theta_bound + tol:
                bound_failures.append(result)
            lower, upper = log.envelope
            if log.column('theta_sup').max() > upper + tol or log.column('theta_inf').min() < lower - tol:
                envelope_failures.append(result)

        first = bound_failures[0] if bound_failures else None
        self.check('uniform_bound', not bound_failures,
                   counterexample=first.state if first else None, label=first.label if first else '',
                   violations=len(bound_failures), worst_ratio=worst_ratio, members=len(results))
        first = envelope_failures[0] if envelope_failures else None
        self.check('sharp_envelope', not envelope_failures,
                   counterexample=first.state if first else None, label=first.label if first else '',
                   violations=len(envelope_failures))
