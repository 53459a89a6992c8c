"""
Uniqueness Suite
Two temperatures driven by the same velocity approach each other; the
weighted energy of their difference never grows
"""

import numpy as np

from core_types import ScalarField
from diagnostics import fit_decay_rate
from elliptic import poincare_constant
from flow import eigenmode_velocity
from heat import frozen_velocity_contraction
from simulation import Simulation

from .base import VerificationSuite


class UniquenessSuite(VerificationSuite):
    """Contraction of the temperature map for a frozen velocity"""

    DESCRIPTION = "Contraction of temperature evolutions with shared velocity"
    NAME = 'uniqueness'
    DEFAULTS = {
        'T': 0.5,
        'swirl_amplitude': 1.0,
        'seed': 1,
        'rate_tolerance': 0.05,
    }

    def evaluate(self):
        o = self.options
        sim = Simulation(self.config, self.output_dir / 'setup', banner=False)
        grid, params, closure = sim.grid, sim.params, sim.closure
        rng = np.random.default_rng(o['seed'])

        base = ScalarField(grid, rng.uniform(-1.0, 1.0, grid.shape))
        same = frozen_velocity_contraction(base, base.copy(), None, closure, params, o['T'])
        self.check('identical_data', max(same.energies) == 0.0, max_energy=max(same.energies))

        X, Y = grid.centers()
        mode = ScalarField(grid, np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly))
        decoupled = closure.with_alpha(0.0)
        eigen = frozen_velocity_contraction(mode, ScalarField.zeros(grid), None, decoupled, params, o['T'])
        fit = fit_decay_rate(eigen.times, eigen.energies)
        expected = 2.0 * params.kappa * poincare_constant(grid) ** 2
        error = abs(fit.K / expected - 1.0)
        self.check('eigenmode_rate', eigen.monotone and error <= o['rate_tolerance'],
                   measured=fit.K, expected=expected, relative_error=error)

        swirl = eigenmode_velocity(grid, o['swirl_amplitude'])
        other = ScalarField(grid, rng.uniform(-1.0, 1.0, grid.shape))
        mixed = frozen_velocity_contraction(base, other, swirl, closure, params, o['T'])
        self.check('swirl_monotone', mixed.monotone, max_increase=mixed.max_increase)
        self.check('swirl_rate_slack', mixed.slack_ok, slack=mixed.slack)
