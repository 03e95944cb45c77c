"""Cached end-to-end pipeline for one instance and the two reference instances."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .blocks import Cocycle, Instance, Renormalization
from .rat import LimitModel, rat_limit_build
from .spectral import (
    AdaptednessReport,
    DiffusionReport,
    EigenReport,
    ExtendedPeriod,
    PeriodData,
    adaptedness_scan,
    block_eigen,
    centered_cf,
    diffusion_matrix,
    period_extend,
    period_matrix,
)
from .surd import Surd
from .temporal import DistTower, DriftResult, TemporalDist, drift_extract, exact_means


def golden() -> Instance:
    """``alpha = (sqrt 5 - 1)/2``, ``Q = 2``, ``Phi = (+1, -1)``."""
    return Instance(Surd(-1, 1, 2, 5), Cocycle(np.array([[1], [-1]])))


def silver_d2() -> Instance:
    """``alpha = sqrt 2 - 1``, ``Q = 3``, ``Phi = ((1,0), (0,1), (-1,-1))``."""
    return Instance(Surd(-1, 1, 1, 2), Cocycle(np.array([[1, 0], [0, 1], [-1, -1]])))


REFERENCE = {"A": golden, "B": silver_d2}


class Analysis:
    """Lazily computed renormalization data for one instance.

    Levels on the extended-period grid are ``K + L n``; ``grid_dist(n)``
    returns ``V`` at ``s = (0, 0)`` on that grid.
    """

    def __init__(self, inst: Instance, grid_max: int = 40) -> None:
        self.inst = inst
        self.ren = Renormalization(inst)
        self.grid_max = grid_max
        self._raw = DistTower(self.ren)
        self._grid = DistTower(self.ren)
        self._grid_cache: dict[int, TemporalDist] = {}

    @cached_property
    def period(self) -> PeriodData:
        return period_matrix(self.ren)

    @cached_property
    def eigen(self) -> EigenReport:
        return block_eigen(self.period)

    @cached_property
    def extended(self) -> ExtendedPeriod:
        return period_extend(self.ren, self.period, self.eigen)

    def grid_level(self, n: int) -> int:
        return self.extended.grid_level(n)

    @cached_property
    def drift(self) -> DriftResult:
        levels = [self.grid_level(n) for n in range(self.grid_max + 1)]
        return drift_extract(exact_means(self.ren, levels))

    @cached_property
    def mu0(self) -> np.ndarray:
        """Drift per extended period at ``s = (0, 0)``."""
        return np.array(self.drift.mu, dtype=float)[0, 0]

    @cached_property
    def xi0(self) -> np.ndarray:
        return np.array(self.drift.xi, dtype=float)[0, 0]

    @cached_property
    def limit(self) -> LimitModel:
        return rat_limit_build(self.extended, self.drift.mu, self.drift.xi)

    @cached_property
    def diffusion(self) -> DiffusionReport:
        return diffusion_matrix(self.limit.b, self.limit.H)

    @cached_property
    def adaptedness(self) -> AdaptednessReport:
        return adaptedness_scan(centered_cf(self.limit.H, self.limit.b), self.inst.d)

    def _tower_at(self, tower: DistTower, k: int) -> DistTower:
        if k < tower.k:
            tower = DistTower(self.ren)
        tower.advance_to(k)
        return tower

    def raw_family(self, k: int) -> list[TemporalDist]:
        """``V_k(i, eps)`` in flat order ``i*Q + eps``."""
        self._raw = self._tower_at(self._raw, k)
        return list(self._raw.family)

    def raw_dist(self, k: int, i: int = 0, eps: int = 0) -> TemporalDist:
        return self.raw_family(k)[i * self.inst.Q + eps]

    def grid_dist(self, n: int) -> TemporalDist:
        if n not in self._grid_cache:
            self._grid = self._tower_at(self._grid, self.grid_level(n))
            self._grid_cache[n] = self._grid.get(0, 0)
        return self._grid_cache[n]
