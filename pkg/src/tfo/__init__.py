"""Causal analysis of the basketball two-for-one strategy.

Pipeline stages: play-by-play ingestion (:mod:`tfo.pbp`), opportunity
labeling (:mod:`tfo.label`), covariate assembly (:mod:`tfo.dataset`),
GLM fitting (:mod:`tfo.glm`), ATE estimation and diagnostics
(:mod:`tfo.ate`), honest causal forests (:mod:`tfo.forest`), rank-weighted
effect evaluation (:mod:`tfo.rate`), and sensitivity analyses
(:mod:`tfo.sensitivity`).  :mod:`tfo.synth` generates fixtures and
known-truth data for all of them.
"""

__version__ = "0.1.0"
