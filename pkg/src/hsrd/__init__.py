"""Numerical toolkit for one-shot hybrid (classical-quantum) state redistribution.

Subpackages:
  numkit    dense complex linear algebra, metrics, Haar sampling, Uhlmann extraction
  sdp       small dense SDP layer with certified duality gaps
  qstate    register model, hybrid sources, source-state construction
  entropy   one-shot (smooth min/max) and von Neumann entropy engine
  region    one-shot and asymptotic rate-region bound evaluation
  decouple  randomized partial decoupling simulation and bi-decoupling search
  protocol  explicit encoder/decoder construction and protocol audits
  cli       command-line interface
"""

__version__ = "0.1.0"
