"""
:Version: 1.0.0

starkmbl
========

Desk-scale numerics of Stark many-body localization.
----------------------------------------------------

``starkmbl`` simulates open spin-1/2 chains with long-range Ising couplings in a tilted longitudinal field: the
setting where a linear field gradient, rather than disorder, keeps the chain from thermalizing. It covers **level
statistics**, **quench dynamics** with a generalized imbalance, **DEER** interferometry, Trotterized evolution, an
experimental **noise model**, and the **strong-tilt effective Hamiltonian**. All energies are in units of the
nearest-neighbor coupling J0 and all times in units of 1/J0.


Basic Usage
-----------

Build a Hamiltonian from a coupling matrix and a field profile, then ask for its level statistics. Pooling the
gap ratios of the two parity blocks keeps independent spectra apart.

    >>> from starkmbl import power_law_couplings, linear_field, build_ising, level_statistics
    >>> H = build_ising(power_law_couplings(10, 1.3), linear_field(10, 5.0, 2.4))
    >>> level_statistics(H, 'parity')
    <LevelStatsReport mean_r=0.... levels=1024 excluded=...>

Quench a product state and watch its memory:

    >>> from starkmbl import QuenchConfig, SpinPattern, run_quench
    >>> cfg = QuenchConfig(power_law_couplings(10, 1.3), linear_field(10, 5.0, 2.4), SpinPattern.neel(10))
    >>> record = run_quench(cfg).imbalance
    >>> record.window
    (5.0, 7.0)

The late-time mean over that window, ``record.late_time_mean``, stays near 2 for strong tilts and drops towards 0
when the chain thermalizes.

The same runs are available from the command line, driven by a JSON configuration:

- ``starkmbl levels`` for gap-ratio statistics.

- ``starkmbl quench`` for magnetizations and the generalized imbalance (optionally noise-averaged).

- ``starkmbl deer`` for DEER against spin echo.

- ``starkmbl quad`` for relaxation in a quadratic field.

- ``starkmbl stability`` for long-time runs of several initial patterns.

- ``starkmbl sweff`` for the third-order effective-Hamiltonian terms.

- ``starkmbl sweep`` to repeat any of the above over a parameter grid.

Every output file starts with ``#`` lines recording the resolved configuration and seed.
"""

__version__ = '1.0.0'

from . import utils
from .enums import *
from .datastructs import *
from .model import *
from .spinspace import *
from .spectrum import *
from .propagate import *
from .observables import *
from .protocols import *
from .noise import *
from .sweff import *
