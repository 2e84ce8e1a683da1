from __future__ import annotations

import numpy as np

from .._validation import check_complex_1d
from .regressor import regressor_matrix, stack_blocks


def check_targets(y, n: int) -> np.ndarray:
    y = check_complex_1d(y, "y")
    if y.shape[0] != n:
        raise ValueError(f"X has {n} rows but y has {y.shape[0]} targets")
    return y


class PostDistorterMixin:
    """Block-level conveniences for regressors fitted on window rows.

    Subclasses implement ``fit(X, y)`` and ``predict(X)`` on regressor
    matrices (see :func:`regressor_matrix`) with complex targets/outputs.
    """

    def fit_blocks(self, z_blocks, symbol_blocks):
        X = stack_blocks(z_blocks, self.memory_depth)
        y = np.concatenate([np.asarray(a, dtype=complex) for a in symbol_blocks])
        return self.fit(X, y)

    def predict_block(self, z) -> np.ndarray:
        return self.predict(regressor_matrix(z, self.memory_depth))
