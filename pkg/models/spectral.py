import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralGrid:
    """Periodic box [0, L_1) x ... with N_k cells per axis and its multiplier table"""

    extents: Tuple[float, ...]
    cells: Tuple[int, ...]
    s: float
    xi_mag: np.ndarray = field(init=False, repr=False)
    symbol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        from services.spectral_service import SpectralService

        if len(self.extents) != len(self.cells) or len(self.cells) not in (1, 2, 3):
            raise ValueError("spectral grid needs matching extents and cells in 1 to 3 dimensions")
        if any(L <= 0 for L in self.extents) or any(N <= 0 for N in self.cells):
            raise ValueError("spectral grid extents and cells must be positive")
        axes = [2 * math.pi * np.fft.fftfreq(N, d=L / N) for L, N in zip(self.extents, self.cells)]
        mesh = np.meshgrid(*axes, indexing="ij")
        xi_mag = np.sqrt(sum(k * k for k in mesh))
        symbol = SpectralService.multiplier_S(self.s, xi_mag)
        xi_mag.setflags(write=False)
        symbol.setflags(write=False)
        object.__setattr__(self, "xi_mag", xi_mag)
        object.__setattr__(self, "symbol", symbol)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))
