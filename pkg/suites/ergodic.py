"""
Ergodic Averages Suite
Running time means of kinetic energy and mean temperature settle on a
subcritical run
"""

from diagnostics import ergodic_average

from .base import VerificationSuite


class ErgodicSuite(VerificationSuite):
    """Convergence certificate of running means after a discarded transient"""

    DESCRIPTION = "Convergence of running time averages"
    NAME = 'ergodic'
    DEFAULTS = {
        't_end': 100.0,
        'discard': 20.0,
        'gap_tol': 1e-6,
        'seed': 1,
        'theta0_spec': 'random(1)',
        'u0_spec': 'random_divfree(1)',
    }

    def evaluate(self):
        o = self.options
        config = self.member_config(
            run={'t_end': o['t_end'], 'seed': o['seed']},
            initial={'theta0_spec': o['theta0_spec'], 'u0_spec': o['u0_spec']},
        )
        result = self.run_member('run', config)
        if not self.check_member_errors([result]):
            return
        self.add_violations(result.log)

        frame = result.log.to_frame()
        tail = frame[frame['t'] >= frame['t'].iloc[0] + o['discard']]
        for column in ('KE', 'mean_theta'):
            running, gap = ergodic_average(tail['t'].values, tail[column].values)
            self.check(f"running_mean_{column}", gap <= o['gap_tol'],
                       gap=gap, mean=float(running[-1]), samples=len(tail))
