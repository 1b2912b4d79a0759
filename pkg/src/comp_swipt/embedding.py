"""Real embedding of Hermitian matrices.

The solver works over real symmetric blocks only. A Hermitian H = R + iJ maps
to the symmetric matrix

    embed(H) = [[R, -J],
                [J,  R]]

whose eigenvalues are those of H, each doubled in multiplicity. Traces double
as well, and <embed(A), embed(B)> = 2 Re<A, B>, so builders that want complex
inner products preserved use embed(.)/2 as coefficient data.
"""

import numpy as np


def hermitize(h: np.ndarray) -> np.ndarray:
    """(h + h^H)/2, which is exactly Hermitian in floating point.

    BLAS products like a @ a.conj().T are Hermitian only up to rounding
    (summation order differs across the diagonal), so constructors pass
    through here before embedding.
    """
    h = np.asarray(h, dtype=complex)
    return 0.5 * (h + h.conj().T)


def is_hermitian(h: np.ndarray, atol: float = 0.0) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return np.allclose(h, h.conj().T, rtol=0.0, atol=atol)


def embed_hermitian(h: np.ndarray) -> np.ndarray:
    """Map Hermitian h (n x n complex) to the real symmetric 2n x 2n embedding.

    Raises ValueError if h is not exactly Hermitian; callers construct their
    data from outer products and sums of such, which are exactly Hermitian in
    floating point.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("embed_hermitian: input is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed_symmetric(m: np.ndarray) -> np.ndarray:
    """Recover the Hermitian matrix a real symmetric 2n x 2n block represents.

    For m = embed(w) this returns w exactly. For a generic symmetric m (as an
    interior-point iterate may be), it returns the Hermitian matrix with the
    same inner products against embedded data: (m11 + m22)/2 + i (m21 - m12)/2,
    which is PSD whenever m is.
    """
    m = np.asarray(m, dtype=float)
    n2 = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n2 or n2 % 2:
        raise ValueError("unembed_symmetric: expected square matrix of even size")
    n = n2 // 2
    re = 0.5 * (m[:n, :n] + m[n:, n:])
    im = 0.5 * (m[n:, :n] - m[:n, n:])
    w = re + 1j * im
    return 0.5 * (w + w.conj().T)
