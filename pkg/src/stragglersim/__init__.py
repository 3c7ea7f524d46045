"""Deterministic discrete-event simulator for federated learning with straggler clients.

The package simulates cross-device federated training where some clients are
much slower than others, either because they hold more data or because they
sit on slower hardware and networks. It implements synchronous baselines
(FedAvg, FedAdam, with over-selection and time-limited variants), a buffered
asynchronous baseline (FedBuff with EMA / distillation / proximal / Adam
modifications), and two straggler-aware algorithms (FARe-DUST and
FeAST-on-MSG), all driven by a Monte Carlo lognormal latency model and a
virtual-time event engine. A verification harness numerically checks the
convergence properties of the auxiliary-model update on a controlled
quadratic testbed.
"""

__version__ = "0.1.0"
