"""Mean curvature flow of graphs of length-decreasing maps between model surfaces.

Submodules: ``manifolds`` (model spaces), ``grid`` (atlas, halo exchange, jets),
``maps`` (initial data), ``frames`` (singular values and adapted frames),
``geometry`` (second fundamental form and residual checks), ``flow`` (time
stepping), ``monitors``, ``oracle`` (reduced 1D solver), ``config``,
``output`` and ``cli``.

The package root stays import-light so that the command line can set thread
counts before numpy loads.
"""

__version__ = "0.1.0"
