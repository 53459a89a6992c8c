"""
Configuration File for the Boussinesq Solver
Define the grid, physics, numerics, run controls and initial data here.
Copy to config.py and customize; main.py falls back to this file.
"""

# =============================================================================
# GRID
# =============================================================================
#
# nx, ny: cells per axis (>= 4)
# lx, ly: side lengths of the rectangle [0, lx] x [0, ly]
#

grid = {
    'nx': 64,
    'ny': 64,
    'lx': 1.0,
    'ly': 1.0,
}


# =============================================================================
# PHYSICS
# =============================================================================
#
# Boundary closure: Theta = thetaB - alpha * mean(Theta) on the walls.
# Give exactly one of:
#   - alpha: coupling coefficient, 0 < alpha < 1
#   - gamma: adiabatic exponent, alpha = gamma - 1, 1 < gamma < 2
#
# g_spec:      linear_y(c) | linear_x(c) | harmonic_xy(c)
# thetaB_spec: constant(c) | affine(c, a, b) | bilinear(c) | cosine_x(amp)
#

physics = {
    'mu': 1.0,
    'kappa': 1.0,
    'alpha': 0.5,
    # 'gamma': 1.5,
    'g_spec': 'linear_y(-1)',
    'thetaB_spec': 'affine(1, 0, -1)',
}


# =============================================================================
# NUMERICS
# =============================================================================

numerics = {
    'dt_cfl': 0.5,
    'dt_max': 0.02,
    'lin_tol': 1e-10,
    'bc_coupling': 'implicit',   # implicit | lagged
    'advection': 'upwind',       # upwind | limited
}


# =============================================================================
# RUN CONTROL
# =============================================================================

run = {
    't_end': 2.0,
    'output_every': 10,
    'checkpoint_every': 0,   # 0 disables periodic checkpoints
    'snapshot_every': 0,     # 0 disables PNG snapshots
    'seed': 1,
    'out_dir': 'output',
}


# =============================================================================
# INITIAL DATA
# =============================================================================
#
# theta0_spec: zero | constant(c) | random(amp) | eigenmode(amp) | equilibrium | perturbed(amp) | file(path)
#   perturbed adds amp * sin(2 pi x/lx) sin(pi y/ly) to the aligned equilibrium; the wall value is unchanged
# u0_spec:     zero | random_divfree(amp) | eigenmode(amp) | file(path)
#

initial = {
    'theta0_spec': 'random(0.1)',
    'u0_spec': 'random_divfree(0.1)',
}


# =============================================================================
# LOGGING
# =============================================================================

log_level = 'INFO'


# =============================================================================
# HELPER FUNCTIONS
# =============================================================================

def blocks():
    """Section dictionaries in the layout config_from_blocks expects"""
    return {
        'grid': grid,
        'physics': physics,
        'numerics': numerics,
        'run': run,
        'initial': initial,
    }


def validate_config():
    """
    Validate configuration

    Returns:
        The validated RunConfig

    Raises:
        ConfigError: If a section is malformed or a constraint is violated
    """
    from simconfig import config_from_blocks

    config = config_from_blocks(blocks(), source=__name__)
    print("✓ Configuration valid")
    return config


if __name__ == "__main__":
    # Test configuration
    config = validate_config()

    print("\nRun configured:")
    print(f"  • {config.describe()}")
    print(f"  • output: {config.out_dir}")
