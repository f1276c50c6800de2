"""Dimension-generic symmetric tensor algebra in Mandel notation.

Second-order symmetric tensors are stored as Mandel vectors and fourth-order tensors with
minor symmetries as Mandel matrices, so double contractions are plain dot products.

Ordering: 2D (11, 22, √2·12); 3D (11, 22, 33, √2·23, √2·13, √2·12).
"""

import logging
from dataclasses import dataclass
from functools import cache

import numpy as np
from numpy.typing import NDArray

from .error_handling import DimensionMismatch, UnsupportedDimension, ZeroMacroStrain

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
SUPPORTED_DIMS = (2, 3)

_MANDEL_PAIRS: dict[int, tuple[tuple[int, int], ...]] = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)),
}


def check_dim(dim: int) -> int:
    """Validate a spatial dimension."""
    if dim not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"Dimension {dim} is not supported (expected 2 or 3)")
    return dim


def mandel_size(dim: int) -> int:
    """Number of Mandel components d(d+1)/2."""
    return check_dim(dim) * (dim + 1) // 2


def mandel_pairs(dim: int) -> tuple[tuple[int, int], ...]:
    """Index pairs (i, j) in Mandel ordering."""
    return _MANDEL_PAIRS[check_dim(dim)]


@cache
def mandel_weights(dim: int) -> NDArray[np.float64]:
    """Per-component scale factors: 1 on the diagonal, √2 off it."""
    weights = np.array([1.0 if i == j else SQRT2 for i, j in mandel_pairs(dim)])
    weights.setflags(write=False)
    return weights


@cache
def identity_vector(dim: int) -> NDArray[np.float64]:
    """Second-order identity in Mandel form."""
    vec = np.zeros(mandel_size(dim))
    vec[:dim] = 1.0
    vec.setflags(write=False)
    return vec


@cache
def projector_j(dim: int) -> NDArray[np.float64]:
    """Spherical projector J = (1/d) I⊗I as a Mandel matrix."""
    ident = identity_vector(dim)
    mat = np.outer(ident, ident) / dim
    mat.setflags(write=False)
    return mat


@cache
def projector_k(dim: int) -> NDArray[np.float64]:
    """Deviatoric projector K = 𝓘 − J as a Mandel matrix."""
    mat = np.eye(mandel_size(dim)) - projector_j(dim)
    mat.setflags(write=False)
    return mat


def quad_dot(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Quadruple contraction A::B of two Mandel matrices."""
    return float(np.sum(a * b))


@dataclass(frozen=True)
class ProjectorDims:
    """Dimensions of the spaces spanned by 𝓘, J and K."""

    n_i: int
    n_j: int
    n_k: int

    @classmethod
    def for_dim(cls, dim: int) -> "ProjectorDims":
        n_i = mandel_size(dim)
        return cls(n_i=n_i, n_j=1, n_k=n_i - 1)


@dataclass(frozen=True, eq=False)
class SymTensor2:
    """Symmetric second-order tensor stored as a Mandel vector."""

    dim: int
    comps: NDArray[np.float64]

    def __post_init__(self) -> None:
        comps = np.array(self.comps, dtype=np.float64).reshape(-1)
        if comps.size != mandel_size(self.dim):
            raise DimensionMismatch(
                f"Expected {mandel_size(self.dim)} Mandel components for d={self.dim}, "
                f"got {comps.size}"
            )
        comps.setflags(write=False)
        object.__setattr__(self, "comps", comps)

    @classmethod
    def zeros(cls, dim: int) -> "SymTensor2":
        return cls(dim, np.zeros(mandel_size(dim)))

    @classmethod
    def identity(cls, dim: int) -> "SymTensor2":
        return cls(dim, identity_vector(dim))

    @classmethod
    def from_matrix(cls, matrix: NDArray[np.float64] | list[list[float]]) -> "SymTensor2":
        """Build from a full symmetric d×d matrix."""
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"Expected a square matrix, got shape {mat.shape}")
        dim = check_dim(mat.shape[0])
        if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(mat).max())):
            raise DimensionMismatch("Matrix is not symmetric")
        pairs = mandel_pairs(dim)
        comps = np.array([mat[i, j] for i, j in pairs]) * mandel_weights(dim)
        return cls(dim, comps)

    def to_matrix(self) -> NDArray[np.float64]:
        """Full symmetric d×d matrix."""
        mat = np.zeros((self.dim, self.dim))
        for value, (i, j) in zip(self.comps / mandel_weights(self.dim), mandel_pairs(self.dim)):
            mat[i, j] = value
            mat[j, i] = value
        return mat

    @property
    def trace(self) -> float:
        return float(self.comps[: self.dim].sum())

    def norm(self) -> float:
        return float(np.sqrt(self.comps @ self.comps))

    def ddot(self, other: "SymTensor2") -> float:
        """Double contraction τ:σ."""
        _check_same_dim(self.dim, other.dim)
        return float(self.comps @ other.comps)

    def __add__(self, other: "SymTensor2") -> "SymTensor2":
        _check_same_dim(self.dim, other.dim)
        return SymTensor2(self.dim, self.comps + other.comps)

    def __sub__(self, other: "SymTensor2") -> "SymTensor2":
        _check_same_dim(self.dim, other.dim)
        return SymTensor2(self.dim, self.comps - other.comps)

    def __mul__(self, scalar: float) -> "SymTensor2":
        return SymTensor2(self.dim, self.comps * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor2":
        return SymTensor2(self.dim, -self.comps)

    def __repr__(self) -> str:
        return f"SymTensor2(dim={self.dim}, comps={self.comps.tolist()})"


@dataclass(frozen=True)
class IsoTensor4:
    """Isotropic fourth-order tensor a·J + b·K."""

    dim: int
    a: float
    b: float

    def __post_init__(self) -> None:
        check_dim(self.dim)

    @classmethod
    def stiffness(cls, dim: int, kappa: float, mu: float) -> "IsoTensor4":
        """Elasticity tensor L = dκJ + 2μK."""
        return cls(dim, dim * kappa, 2.0 * mu)

    @classmethod
    def identity(cls, dim: int) -> "IsoTensor4":
        return cls(dim, 1.0, 1.0)

    def compose(self, other: "IsoTensor4") -> "IsoTensor4":
        """Product A:B, componentwise on (a, b) since J:J=J, K:K=K, J:K=0."""
        _check_same_dim(self.dim, other.dim)
        return IsoTensor4(self.dim, self.a * other.a, self.b * other.b)

    def __matmul__(self, other: "IsoTensor4") -> "IsoTensor4":
        return self.compose(other)

    def to_full(self) -> "FullTensor4":
        return FullTensor4(self.dim, self.a * projector_j(self.dim) + self.b * projector_k(self.dim))


@dataclass(frozen=True, eq=False)
class FullTensor4:
    """Fourth-order tensor with minor and major symmetries as an m×m Mandel matrix."""

    dim: int
    mandel: NDArray[np.float64]

    def __post_init__(self) -> None:
        size = mandel_size(self.dim)
        mat = np.array(self.mandel, dtype=np.float64)
        if mat.shape != (size, size):
            raise DimensionMismatch(
                f"Expected a {size}x{size} Mandel matrix for d={self.dim}, got {mat.shape}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "mandel", mat)

    @classmethod
    def zeros(cls, dim: int) -> "FullTensor4":
        size = mandel_size(dim)
        return cls(dim, np.zeros((size, size)))

    @classmethod
    def from_index_form(cls, tensor: NDArray[np.float64]) -> "FullTensor4":
        """Build from a d×d×d×d array with minor symmetries."""
        arr = np.asarray(tensor, dtype=np.float64)
        dim = check_dim(arr.shape[0])
        if arr.shape != (dim,) * 4:
            raise DimensionMismatch(f"Expected shape {(dim,) * 4}, got {arr.shape}")
        return cls(dim, index_to_mandel(arr, dim))

    def to_index_form(self) -> NDArray[np.float64]:
        pairs = mandel_pairs(self.dim)
        weights = mandel_weights(self.dim)
        out = np.zeros((self.dim,) * 4)
        for a, (i, j) in enumerate(pairs):
            for b, (k, m) in enumerate(pairs):
                value = self.mandel[a, b] / (weights[a] * weights[b])
                for p, q in {(i, j), (j, i)}:
                    for r, s in {(k, m), (m, k)}:
                        out[p, q, r, s] = value
        return out

    def quad_dot(self, other: "FullTensor4") -> float:
        """Quadruple contraction A::B."""
        _check_same_dim(self.dim, other.dim)
        return quad_dot(self.mandel, other.mandel)

    def apply(self, tau: SymTensor2) -> SymTensor2:
        """Double contraction A:τ."""
        _check_same_dim(self.dim, tau.dim)
        return SymTensor2(self.dim, self.mandel @ tau.comps)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.mandel, self.mandel.T, rtol=0.0, atol=atol))

    def norm(self) -> float:
        return float(np.linalg.norm(self.mandel))

    def __add__(self, other: "FullTensor4") -> "FullTensor4":
        _check_same_dim(self.dim, other.dim)
        return FullTensor4(self.dim, self.mandel + other.mandel)

    def __sub__(self, other: "FullTensor4") -> "FullTensor4":
        _check_same_dim(self.dim, other.dim)
        return FullTensor4(self.dim, self.mandel - other.mandel)

    def __repr__(self) -> str:
        return f"FullTensor4(dim={self.dim}, mandel={self.mandel.tolist()})"


def index_to_mandel(tensor: NDArray[np.float64], dim: int) -> NDArray[np.float64]:
    """Convert index-form fourth-order arrays (..., d, d, d, d) to Mandel (..., m, m)."""
    pairs = mandel_pairs(dim)
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    weights = mandel_weights(dim)
    picked = tensor[..., rows[:, None], cols[:, None], rows[None, :], cols[None, :]]
    result: NDArray[np.float64] = picked * np.outer(weights, weights)
    return result


def sph_dev_split(tau: SymTensor2) -> tuple[SymTensor2, SymTensor2]:
    """Spherical and deviatoric parts of τ."""
    sph = SymTensor2(tau.dim, (tau.trace / tau.dim) * identity_vector(tau.dim))
    return sph, tau - sph


def strain_invariants(eps: SymTensor2) -> tuple[float, float]:
    """Hydrostatic strain ε0 = tr ε / d and equivalent strain ε_eq."""
    _, dev = sph_dev_split(eps)
    eps0 = eps.trace / eps.dim
    eps_eq = float(np.sqrt((eps.dim - 1) / eps.dim * dev.ddot(dev)))
    return eps0, eps_eq


def parallel_decompose(eps: SymTensor2, eps_bar: SymTensor2) -> tuple[float, float]:
    """Components of ε along and orthogonal to the macroscopic strain ε̄."""
    _check_same_dim(eps.dim, eps_bar.dim)
    bar_norm = eps_bar.norm()
    if bar_norm == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero norm")
    eps_par = eps.ddot(eps_bar) / bar_norm
    eps_perp = (eps - eps_bar * (eps_par / bar_norm)).norm()
    return eps_par, eps_perp


def iso_project(tensor: FullTensor4) -> tuple[IsoTensor4, FullTensor4]:
    """Split A into its isotropic part a·J + b·K and the orthogonal remainder."""
    dims = ProjectorDims.for_dim(tensor.dim)
    a = quad_dot(tensor.mandel, projector_j(tensor.dim)) / dims.n_j
    b = quad_dot(tensor.mandel, projector_k(tensor.dim)) / dims.n_k
    iso = IsoTensor4(tensor.dim, a, b)
    return iso, tensor - iso.to_full()


def iso_apply(tensor: IsoTensor4, tau: SymTensor2) -> SymTensor2:
    """Apply a·J + b·K to τ: a·sph(τ) + b·dev(τ)."""
    _check_same_dim(tensor.dim, tau.dim)
    sph, dev = sph_dev_split(tau)
    return sph * tensor.a + dev * tensor.b


# Field versions operating on (..., m) Mandel arrays.


def field_trace(values: NDArray[np.float64], dim: int) -> NDArray[np.float64]:
    return values[..., :dim].sum(axis=-1)


def field_sph_dev(
    values: NDArray[np.float64], dim: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Pointwise spherical and deviatoric parts."""
    sph = (field_trace(values, dim) / dim)[..., None] * identity_vector(dim)
    return sph, values - sph


def field_ddot(values: NDArray[np.float64], other: NDArray[np.float64]) -> NDArray[np.float64]:
    """Pointwise double contraction; `other` may be a single Mandel vector."""
    result: NDArray[np.float64] = np.einsum("...m,...m->...", values, other)
    return result


def field_invariants(
    values: NDArray[np.float64], dim: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Pointwise (ε0, ε_eq)."""
    _, dev = field_sph_dev(values, dim)
    eps0 = field_trace(values, dim) / dim
    eps_eq = np.sqrt((dim - 1) / dim * field_ddot(dev, dev))
    return eps0, eps_eq


def iso_apply_field(
    a: NDArray[np.float64] | float,
    b: NDArray[np.float64] | float,
    values: NDArray[np.float64],
    dim: int,
) -> NDArray[np.float64]:
    """Pointwise a(x)·sph(τ(x)) + b(x)·dev(τ(x))."""
    sph, dev = field_sph_dev(values, dim)
    result: NDArray[np.float64] = np.asarray(a)[..., None] * sph + np.asarray(b)[..., None] * dev
    return result


def _check_same_dim(d1: int, d2: int) -> None:
    if d1 != d2:
        raise DimensionMismatch(f"Dimension mismatch: {d1} != {d2}")


def field_to_matrix(values: NDArray[np.generic], dim: int) -> NDArray[np.generic]:
    """Pointwise Mandel vectors (..., m) to full matrices (..., d, d); complex input allowed."""
    out = np.zeros((*values.shape[:-1], dim, dim), dtype=values.dtype)
    for a, ((i, j), w) in enumerate(zip(mandel_pairs(dim), mandel_weights(dim))):
        out[..., i, j] = values[..., a] / w
        out[..., j, i] = values[..., a] / w
    return out
