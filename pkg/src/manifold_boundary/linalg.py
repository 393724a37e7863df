"""Dense small-matrix utilities: symmetric eigendecomposition and span projection.

Sized for the d x d second-moment matrices of local neighbourhoods (d <= 10 or
so); everything is plain float64 numpy.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# Relative eigenvalue gap below which the top eigenspace is considered
# ill-separated from the rest of the spectrum.
DEGENERACY_GAP = 1e-12


@dataclass(frozen=True)
class SymMatrix:
    """A real symmetric matrix, symmetrized as (A + A') / 2 at construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("matrix entries must be finite")
        object.__setattr__(self, "entries", 0.5 * (a + a.T))

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending; column j of `eigenvectors` pairs with
    eigenvalue j.  Each column is flipped so its largest-magnitude entry is
    positive, which makes output files reproducible."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def top_basis(self, m):
        """First m eigenvector columns (an orthonormal basis of the top span)."""
        if not 1 <= m <= self.dim:
            raise InvalidInputError(f"basis size must be in [1, {self.dim}], got {m}")
        return self.eigenvectors[:, :m]

    def is_degenerate(self, top):
        """True when the spectral gap below eigenvalue `top` is negligible,
        i.e. the top-`top` span is not well determined by the data."""
        if not 1 <= top <= self.dim:
            raise InvalidInputError(f"top must be in [1, {self.dim}], got {top}")
        if top == self.dim:
            return False
        gap = self.eigenvalues[top - 1] - self.eigenvalues[top]
        return bool(gap < DEGENERACY_GAP * self.eigenvalues[0])


def eigh_descending(mats):
    """Eigendecompose symmetric matrices stacked on leading axes.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending
    along the last axis and the matching eigenvector columns sign-fixed so the
    largest-magnitude entry of each column is positive.
    """
    w, v = np.linalg.eigh(mats)
    w = w[..., ::-1]
    v = v[..., :, ::-1]
    lead = np.argmax(np.abs(v), axis=-2)
    picked = np.take_along_axis(v, lead[..., None, :], axis=-2)
    flip = np.where(picked < 0.0, -1.0, 1.0)
    return np.ascontiguousarray(w), np.ascontiguousarray(v * flip)


def sym_eigen(m):
    """Full eigendecomposition of a symmetric matrix.

    Deterministic for identical input bits.  When eigenvalues tie, only the
    span of the leading columns is meaningful; consumers should not rely on
    individual tied eigenvectors.
    """
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)
    w, v = eigh_descending(m.entries)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def project_onto_span(vectors, basis):
    """Orthogonal projection of row vectors onto the span of `basis` columns.

    `basis` must have orthonormal columns (e.g. from `sym_eigen`).  Accepts a
    single vector or a stack of row vectors; the output has the same shape.
    """
    basis = np.asarray(basis, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if basis.ndim != 2:
        raise InvalidInputError(f"basis must be a 2-d array, got shape {basis.shape}")
    d, m = basis.shape
    if m > d:
        raise InvalidInputError(f"basis has {m} columns but lives in dimension {d}")
    if vectors.shape[-1] != d:
        raise InvalidInputError(
            f"vectors have dimension {vectors.shape[-1]}, basis expects {d}"
        )
    coeff = vectors @ basis
    return coeff @ basis.T
