"""Binary LDPC encoding and normalized min-sum (NMS) decoding.

The default code is the quasi-cyclic (128, 64) short block code used for
telecommand links (CCSDS family); its parity-check matrix ships as a data
file so any conforming (n, k) matrix can be substituted.

The decoder always runs exactly ``i_max`` flooding iterations (no early
stopping) and records the posterior LLRs after every iteration: the tail
detector consumes the whole trajectory, so outputs must be comparable
across decoder calls.  All LLR quantities saturate at ``LLR_CLIP``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

LLR_CLIP = 30.0      # saturation bound for channel LLRs, messages, posteriors
DEFAULT_ALPHA = 0.75  # check-message normalization factor


@dataclass
class DecodeResult:
    """Output of one NMS decode.

    llr_trajectory: (i_max, n) posterior LLRs after each iteration
    converged:      final hard decision has a zero syndrome
    hard_bits:      (n,) hard decision of the final posterior (LLR 0 -> bit 0)
    """

    llr_trajectory: np.ndarray
    converged: bool
    hard_bits: np.ndarray


class ParityCheckMatrix:
    """Sparse binary parity-check matrix with encoder/decoder index tables."""

    def __init__(self, n: int, k: int, rows):
        self.n = n
        self.k = k
        self.rows = [np.asarray(r, dtype=np.int64) for r in rows]
        if len(self.rows) != n - k:
            raise ValueError(f"expected {n - k} check rows, got {len(self.rows)}")
        self.dense = np.zeros((n - k, n), dtype=np.uint8)
        for i, r in enumerate(self.rows):
            if r.size and (r.min() < 0 or r.max() >= n):
                raise ValueError(f"check row {i} has out-of-range column index")
            self.dense[i, r] = 1
        self._build_encoder()
        self._build_decoder_tables()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "ParityCheckMatrix":
        """Load the 'n k' header + one column-index line per check row."""
        with open(path, encoding="utf-8") as fh:
            n, k = (int(tok) for tok in fh.readline().split())
            rows = [[int(tok) for tok in line.split()] for line in fh if line.strip()]
        return cls(n, k, rows)

    @classmethod
    def default(cls) -> "ParityCheckMatrix":
        return _default_code()

    def _build_encoder(self):
        # GF(2) elimination; pivot columns become parity positions and the
        # remaining (information) positions are the systematic ones.
        A = self.dense.copy()
        m = A.shape[0]
        pivots = []
        r = 0
        for c in range(self.n):
            hit = np.flatnonzero(A[r:, c])
            if hit.size == 0:
                continue
            piv = r + hit[0]
            if piv != r:
                A[[r, piv]] = A[[piv, r]]
            elim = np.flatnonzero(A[:, c])
            elim = elim[elim != r]
            A[elim] ^= A[r]
            pivots.append(c)
            r += 1
            if r == m:
                break
        if r != m:
            raise ValueError(f"parity-check matrix rank {r} < {m} over GF(2)")
        self.parity_positions = np.array(pivots, dtype=np.int64)
        mask = np.ones(self.n, dtype=bool)
        mask[self.parity_positions] = False
        self.info_positions = np.flatnonzero(mask)
        # parity = P @ info over GF(2) in the reduced system
        self._parity_map = A[:, self.info_positions].copy()

    def _build_decoder_tables(self):
        m = self.n - self.k
        edge_var = np.concatenate(self.rows)
        n_edges = edge_var.size
        deg_c = np.array([r.size for r in self.rows])
        deg_v = np.bincount(edge_var, minlength=self.n)
        self.edge_var = edge_var.astype(np.int64)
        self.n_edges = n_edges

        # per-check and per-variable edge-id tables, padded with a sentinel
        # edge (index n_edges) whose v->c message is +inf and c->v message 0
        self.check_edges = np.full((m, deg_c.max()), n_edges, dtype=np.int64)
        pos = 0
        for i, d in enumerate(deg_c):
            self.check_edges[i, :d] = np.arange(pos, pos + d)
            pos += d
        self.var_edges = np.full((self.n, deg_v.max()), n_edges, dtype=np.int64)
        fill = np.zeros(self.n, dtype=np.int64)
        for e, v in enumerate(edge_var):
            self.var_edges[v, fill[v]] = e
            fill[v] += 1

    # -- linear-algebra operations ----------------------------------------

    def encode(self, info: np.ndarray) -> np.ndarray:
        info = np.asarray(info, dtype=np.uint8)
        if info.shape != (self.k,):
            raise ValueError(f"expected {self.k} info bits, got shape {info.shape}")
        word = np.zeros(self.n, dtype=np.uint8)
        word[self.info_positions] = info
        word[self.parity_positions] = (self._parity_map @ info) % 2
        return word

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.n,):
            raise ValueError(f"expected {self.n} bits, got shape {bits.shape}")
        return (self.dense @ bits) % 2

    def extract_info(self, bits: np.ndarray) -> np.ndarray:
        """Information bits at the systematic positions."""
        return np.asarray(bits)[self.info_positions]


@lru_cache(maxsize=1)
def _default_code() -> ParityCheckMatrix:
    ref = resources.files("gfra.data").joinpath("tc_ldpc_128_64.txt")
    with resources.as_file(ref) as path:
        return ParityCheckMatrix.from_file(path)


def encode(info, code: ParityCheckMatrix | None = None) -> np.ndarray:
    code = code or ParityCheckMatrix.default()
    return code.encode(info)


def syndrome(bits, code: ParityCheckMatrix | None = None) -> np.ndarray:
    code = code or ParityCheckMatrix.default()
    return code.syndrome(bits)


def nms_decode(channel_llrs, i_max: int, alpha: float = DEFAULT_ALPHA,
               code: ParityCheckMatrix | None = None) -> DecodeResult:
    """Decode one block; see :func:`nms_decode_batch`."""
    batch = nms_decode_batch(np.asarray(channel_llrs, dtype=np.float64)[None, :],
                             i_max, alpha, code)
    return DecodeResult(batch.llr_trajectory[0], bool(batch.converged[0]),
                        batch.hard_bits[0])


@dataclass
class BatchDecodeResult:
    """Stacked decode outputs for a batch of blocks."""

    llr_trajectory: np.ndarray  # (B, i_max, n)
    converged: np.ndarray       # (B,) bool
    hard_bits: np.ndarray       # (B, n) uint8

    def __getitem__(self, b: int) -> DecodeResult:
        return DecodeResult(self.llr_trajectory[b], bool(self.converged[b]),
                            self.hard_bits[b])


def nms_decode_batch(channel_llrs: np.ndarray, i_max: int,
                     alpha: float = DEFAULT_ALPHA,
                     code: ParityCheckMatrix | None = None) -> BatchDecodeResult:
    """Flooding normalized min-sum over a (B, n) batch of LLR vectors.

    Check messages are scaled by ``alpha``; every LLR quantity saturates at
    +/-LLR_CLIP.  Runs exactly ``i_max`` iterations and stores the posterior
    after each one; convergence is judged only on the final hard decision.
    """
    code = code or ParityCheckMatrix.default()
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    if llrs.ndim != 2 or llrs.shape[1] != code.n:
        raise ValueError(f"expected (B, {code.n}) LLR array, got {llrs.shape}")
    if not np.isfinite(llrs).all():
        raise ValueError("channel LLRs must be finite")
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")

    B = llrs.shape[0]
    E = code.n_edges
    llrs = np.clip(llrs, -LLR_CLIP, LLR_CLIP)
    degree_idx = np.arange(code.check_edges.shape[1])

    m_vc = np.empty((B, E + 1))          # variable-to-check, sentinel last
    m_cv = np.zeros((B, E + 1))          # check-to-variable
    trajectory = np.empty((B, i_max, code.n), dtype=np.float64)
    posterior = llrs

    for it in range(i_max):
        m_vc[:, :E] = np.clip(posterior[:, code.edge_var] - m_cv[:, :E],
                              -LLR_CLIP, LLR_CLIP)
        m_vc[:, E] = np.inf

        grouped = m_vc[:, code.check_edges]              # (B, C, d)
        signs = np.where(grouped < 0, -1.0, 1.0)
        row_sign = signs.prod(axis=-1)
        mag = np.abs(grouped)
        part = np.partition(mag, 1, axis=-1)
        min1, min2 = part[..., 0], part[..., 1]
        excl_min = np.where(degree_idx == mag.argmin(axis=-1)[..., None],
                            min2[..., None], min1[..., None])
        new_msgs = np.clip(alpha * row_sign[..., None] * signs * excl_min,
                           -LLR_CLIP, LLR_CLIP)
        m_cv[:, code.check_edges.reshape(-1)] = new_msgs.reshape(B, -1)
        m_cv[:, E] = 0.0

        posterior = np.clip(llrs + m_cv[:, code.var_edges].sum(axis=-1),
                            -LLR_CLIP, LLR_CLIP)
        trajectory[:, it, :] = posterior

    hard = (posterior < 0).astype(np.uint8)
    synd = (hard @ code.dense.T) % 2
    converged = ~synd.any(axis=1)
    return BatchDecodeResult(trajectory, converged, hard)
