"""Simulator and analytics for straggler mitigation with a movable
(pinched) radiator in federated learning over a corridor of users.

Modules: ``spatial`` (position draws and bottleneck distances),
``analytics`` (closed-form moments and concentration), ``phy`` (link budget
and the high-SNR expansion), ``participation`` (deadline-limited coverage),
``flcore`` (gates, quantization with error feedback, aggregation, training
loops), ``montecarlo`` (empirical confrontation of every bound), ``config``
and ``cli`` (experiment plumbing).
"""

__version__ = "0.1.0"
