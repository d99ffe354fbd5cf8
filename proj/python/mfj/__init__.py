"""Coupled mean-field forward-backward systems with jumps.

Thin python layer over the C++ core: monotonicity certificates, the
continuation solver for the registry problems, and the two control
applications.
"""

from ._core import (
    certificate,
    lq_run,
    portfolio_run,
    solve,
    version,
)

__all__ = ["certificate", "solve", "portfolio_run", "lq_run", "version"]
__version__ = version()
