"""Online load balancing with recourse, built on generalized network flow.

Layers, bottom up:

* :mod:`gainflow.traces` — jobs, event traces, seeded instance generators.
* :mod:`gainflow.simplex` — bundled dense LP solver (float / exact rational).
* :mod:`gainflow.genflow` — the online flow-with-gains engine.
* :mod:`gainflow.oracle` — offline ground truth (T*, optima, enumerations).
* :mod:`gainflow.matching` — online bipartite matching with right-side updates.
* :mod:`gainflow.fractional` — (1+eps)-competitive fractional schedules.
* :mod:`gainflow.round_simple` / :mod:`round_two_eps` / :mod:`round_loglog`
  — the three online rounding schemes.
* :mod:`gainflow.adversary` — fully-dynamic lower-bound instances.
* :mod:`gainflow.harness` / :mod:`gainflow.cli` — replay pipelines, metrics,
  and the command-line driver.
"""

__version__ = "0.1.0"
