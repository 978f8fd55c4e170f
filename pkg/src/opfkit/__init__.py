"""Optimal power flow toolkit.

Modules
-------
netmodel     case parsing, validation, per-unit network model, admittance
kernels      trigonometric and all-pass coupling kernels with derivatives
dcflow       DC power flow / DC OPF and pre-rotation references
formulation  nonlinear OPF assembly (objective, constraints, derivatives)
ipm          primal-dual interior-point solver on a reduced sparse KKT
verify       exact-AC auditing, feasibility and comparison reports
cli          batch driver
"""

__version__ = "0.1.0"
