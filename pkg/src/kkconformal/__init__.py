"""Numerical verification of conformally flat Kaluza-Klein metrics.

Modules: ``jet`` (order-3 Taylor arithmetic), ``tensor`` (index helpers),
``geom`` (curvature from a metric), ``kk`` (the Kaluza-Klein assembly),
``models`` (the catalog), ``verify`` (residual reports), ``reduce`` (Cotton and
Weyl reduction formulas with a two-path comparator), ``specfile`` and ``cli``.
"""

__version__ = "0.1.0"
