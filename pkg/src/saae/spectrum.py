"""Frequency-domain scoring of signal windows.

The pipeline: one-sided amplitude spectra per sensor channel, two min-max
normalizations (within each spectrum and across a batch, per frequency bin),
selection of the high-amplitude information set U and low-amplitude noise set
I, and a small trainable two-layer scoring head that maps the normalized
amplitude features of every frequency bin to a weight in (0, 1). The head is
fitted with a pairwise regression loss that pushes U-bin scores above I-bin
scores within each spectrum and makes the score gap between two spectra track
their mean normalized-amplitude gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataValidationError, DimensionError
from .layers import Adam, sigmoid

EPS_DEGENERATE = 1e-12
U_FRACTION = 0.2
I_FRACTION = 0.5
LOG_CLAMP = 1e-12

# Fan-in scaled zero-mean init; the hidden layer is rectified so it takes the
# larger gain.
GAIN_RELU = np.sqrt(2.0)
GAIN_LINEAR = 1.0


# ---------------------------------------------------------------------------
# amplitude spectra
# ---------------------------------------------------------------------------

def amplitude_spectrum(window) -> np.ndarray:
    """One-sided amplitude spectrum of a (T, Ch) window, channels concatenated.

    Each channel contributes ``T//2 + 1`` magnitude bins (DC through Nyquist);
    the result has length ``Ch * (T//2 + 1)`` with channel 0's bins first.
    """
    data = np.asarray(getattr(window, "data", window), dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise DataValidationError(f"window must be (T, Ch), got shape {data.shape}")
    T, ch = data.shape
    if T < 2 or ch < 1:
        raise DataValidationError(f"window needs T >= 2 and Ch >= 1, got T={T}, Ch={ch}")
    if not np.all(np.isfinite(data)):
        raise DataValidationError("window contains non-finite values")
    amps = np.abs(np.fft.rfft(data, axis=0))  # (T//2+1, Ch)
    return amps.T.reshape(-1)


def batch_spectra(data: np.ndarray) -> np.ndarray:
    """Amplitude spectra for a stack of windows, shape (n, T, Ch) -> (n, m)."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 3:
        raise DataValidationError(f"expected (n, T, Ch), got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DataValidationError("window batch contains non-finite values")
    amps = np.abs(np.fft.rfft(data, axis=1))  # (n, bins, Ch)
    n = data.shape[0]
    return amps.transpose(0, 2, 1).reshape(n, -1)


def spectrum_length(T: int, ch: int) -> int:
    return ch * (T // 2 + 1)


# ---------------------------------------------------------------------------
# normalization and set selection
# ---------------------------------------------------------------------------

def normalize_intra(batch: np.ndarray) -> np.ndarray:
    """Min-max rescale each spectrum over its own bins; flat rows map to zeros."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    lo = batch.min(axis=1, keepdims=True)
    hi = batch.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(batch)
    ok = (span > EPS_DEGENERATE)[:, 0]
    out[ok] = (batch[ok] - lo[ok]) / span[ok]
    return out


def normalize_inter(batch: np.ndarray) -> np.ndarray:
    """Min-max rescale each frequency bin across the batch; flat columns map to zeros."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] < 2:
        raise DataValidationError(
            "inter-spectrum normalization needs at least 2 spectra; use a larger batch"
        )
    lo = batch.min(axis=0, keepdims=True)
    hi = batch.max(axis=0, keepdims=True)
    span = hi - lo
    out = np.zeros_like(batch)
    ok = (span > EPS_DEGENERATE)[0]
    out[:, ok] = (batch[:, ok] - lo[:, ok]) / span[:, ok]
    return out


def set_sizes(m: int, u_frac: float = U_FRACTION, i_frac: float = I_FRACTION):
    return int(np.ceil(u_frac * m)), int(np.floor(i_frac * m))


def select_sets(intra_norm: np.ndarray, u_frac: float = U_FRACTION,
                i_frac: float = I_FRACTION):
    """Pick the information set U (largest bins) and noise set I (smallest).

    |U| = ceil(u_frac*m), |I| = floor(i_frac*m). Ties rank the lower frequency
    index first, and I is drawn from the bins left after U so the sets stay
    disjoint even on flat spectra. Returns sorted index arrays.
    """
    v = np.asarray(intra_norm, dtype=float).reshape(-1)
    m = v.size
    if m < 4:
        raise DataValidationError(f"need m >= 4 bins to form both sets, got {m}")
    n_u, n_i = set_sizes(m, u_frac, i_frac)
    desc = np.argsort(-v, kind="stable")
    info = desc[:n_u]
    taken = np.zeros(m, dtype=bool)
    taken[info] = True
    asc = np.argsort(v, kind="stable")
    noise = asc[~taken[asc]][:n_i]
    return np.sort(info), np.sort(noise)


@dataclass
class SpectrumRecord:
    """One window's spectrum with both normalized forms and its U/I index sets."""

    amps: np.ndarray        # (m,) nonnegative amplitudes
    intra_norm: np.ndarray  # (m,) in [0, 1], normalized within the spectrum
    inter_norm: np.ndarray  # (m,) in [0, 1], normalized across the batch
    info_set: np.ndarray    # sorted indices, ceil(0.2 m) of them
    noise_set: np.ndarray   # sorted indices, floor(0.5 m) of them

    @property
    def m(self) -> int:
        return self.amps.size

    def features(self) -> np.ndarray:
        """Concatenated scoring input [intra_norm ; inter_norm], length 2m."""
        return np.concatenate([self.intra_norm, self.inter_norm])


def build_records(amps: np.ndarray, u_frac: float = U_FRACTION,
                  i_frac: float = I_FRACTION) -> list[SpectrumRecord]:
    """Assemble SpectrumRecords for a batch of raw spectra (n, m), n >= 2."""
    amps = np.atleast_2d(np.asarray(amps, dtype=float))
    if np.any(amps < 0):
        raise DataValidationError("amplitudes must be nonnegative")
    intra = normalize_intra(amps)
    inter = normalize_inter(amps)
    records = []
    for i in range(amps.shape[0]):
        u, s = select_sets(intra[i], u_frac, i_frac)
        records.append(SpectrumRecord(amps[i], intra[i], inter[i], u, s))
    return records


# ---------------------------------------------------------------------------
# the trainable guide
# ---------------------------------------------------------------------------

@dataclass
class SpectrumGuide:
    """Two-stage affine scoring head: 2m -> 2m (rectified) -> m -> logistic.

    ``pin`` short-circuits the network and emits that constant for every bin;
    it exists so the guide can be forced to weight 1 when checking that
    spectrum guidance reduces to the unguided trainer.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    pin: Optional[float] = None

    @classmethod
    def create(cls, m: int, rng: np.random.Generator) -> "SpectrumGuide":
        d = 2 * m
        W1 = rng.normal(0.0, GAIN_RELU / np.sqrt(d), size=(d, d))
        W2 = rng.normal(0.0, GAIN_LINEAR / np.sqrt(d), size=(d, m))
        return cls(W1=W1, b1=np.zeros(d), W2=W2, b2=np.zeros(m))

    @classmethod
    def pinned(cls, m: int, value: float = 1.0) -> "SpectrumGuide":
        d = 2 * m
        return cls(W1=np.zeros((d, d)), b1=np.zeros(d),
                   W2=np.zeros((d, m)), b2=np.zeros(m), pin=value)

    @property
    def m(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def _score_batch(guide: SpectrumGuide, feats: np.ndarray):
    """feats: (n, 2m) -> per-bin scores (n, m) plus the backward cache."""
    if feats.shape[1] != 2 * guide.m:
        raise DimensionError(
            f"guide expects {2 * guide.m} features, got {feats.shape[1]}"
        )
    if guide.pin is not None:
        return np.full((feats.shape[0], guide.m), guide.pin), None
    h_pre = feats @ guide.W1 + guide.b1
    h = np.maximum(h_pre, 0.0)
    s = sigmoid(h @ guide.W2 + guide.b2)
    return s, (feats, h_pre, h, s)


def _score_backward(guide: SpectrumGuide, ds: np.ndarray, cache) -> dict:
    feats, h_pre, h, s = cache
    dz = ds * s * (1.0 - s)
    dW2 = h.T @ dz
    db2 = dz.sum(axis=0)
    dh = (dz @ guide.W2.T) * (h_pre > 0)
    dW1 = feats.T @ dh
    db1 = dh.sum(axis=0)
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


def score(guide: SpectrumGuide, rec: SpectrumRecord):
    """Per-frequency weights in (0,1) and their mean (the window's weight)."""
    if rec.m != guide.m:
        raise DimensionError(f"guide built for m={guide.m}, record has m={rec.m}")
    s, _ = _score_batch(guide, rec.features()[None, :])
    per_freq = s[0]
    return per_freq, float(per_freq.mean())


def _pair_terms_from_scores(s_a, s_b, rec_a: SpectrumRecord, rec_b: SpectrumRecord):
    bracket = (s_a[rec_a.noise_set].mean() - s_a[rec_a.info_set].mean()
               + s_b[rec_b.noise_set].mean() - s_b[rec_b.info_set].mean() + 2.0)
    gap = s_a.mean() - s_b.mean() - (rec_a.inter_norm.mean() - rec_b.inter_norm.mean())
    return float(bracket), float(np.abs(gap)), float(gap)


def spectrum_pair_loss_terms(guide: SpectrumGuide, a: SpectrumRecord, b: SpectrumRecord):
    """The two components of the pairwise loss: the set-gap bracket and |score
    gap - amplitude gap| (proportionality constant fixed at 1)."""
    if a.m != b.m:
        raise DimensionError(f"records disagree on m: {a.m} vs {b.m}")
    s_a, _ = _score_batch(guide, a.features()[None, :])
    s_b, _ = _score_batch(guide, b.features()[None, :])
    bracket, absgap, _ = _pair_terms_from_scores(s_a[0], s_b[0], a, b)
    return bracket, absgap


def spectrum_pair_loss(guide: SpectrumGuide, a: SpectrumRecord, b: SpectrumRecord) -> float:
    bracket, absgap = spectrum_pair_loss_terms(guide, a, b)
    return bracket + absgap


def _pair_loss_and_grads(guide: SpectrumGuide, records: list[SpectrumRecord],
                         pairs: np.ndarray):
    """Mean pairwise loss over index pairs plus parameter gradients."""
    feats = np.stack([r.features() for r in records])
    s, cache = _score_batch(guide, feats)
    m = guide.m
    k = len(pairs)
    ds = np.zeros_like(s)
    total = 0.0
    for ia, ib in pairs:
        ra, rb = records[ia], records[ib]
        bracket, absgap, gap = _pair_terms_from_scores(s[ia], s[ib], ra, rb)
        total += bracket + absgap
        sgn = np.sign(gap)
        ds[ia, ra.noise_set] += 1.0 / (k * ra.noise_set.size)
        ds[ia, ra.info_set] -= 1.0 / (k * ra.info_set.size)
        ds[ib, rb.noise_set] += 1.0 / (k * rb.noise_set.size)
        ds[ib, rb.info_set] -= 1.0 / (k * rb.info_set.size)
        ds[ia] += sgn / (k * m)
        ds[ib] -= sgn / (k * m)
    loss = total / k
    if guide.pin is not None:
        zeros = {n: np.zeros_like(p) for n, p in guide.params().items()}
        return loss, zeros
    return loss, _score_backward(guide, ds, cache)


def sample_pairs(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k unordered index pairs from n records, without replacement when possible."""
    total = n * (n - 1) // 2
    replace = k > total
    flat = rng.choice(total, size=k, replace=replace)
    ii, jj = np.triu_indices(n, 1)
    return np.column_stack([ii[flat], jj[flat]])


def update_guide(guide: SpectrumGuide, batch: np.ndarray, pair_count: int,
                 rng: np.random.Generator, opt: Adam,
                 u_frac: float = U_FRACTION, i_frac: float = I_FRACTION):
    """One Adam step on the guide from ``pair_count`` random spectrum pairs.

    ``batch`` holds raw amplitude spectra (n, m), n >= 2. Returns the guide
    and the mean pair loss evaluated before the step; ``pair_count == 0`` is
    a no-op reported as loss 0.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise DataValidationError("empty spectrum batch")
    if pair_count == 0:
        return guide, 0.0
    if batch.shape[0] < 2:
        raise DataValidationError("pair sampling needs at least 2 spectra")
    records = build_records(batch, u_frac, i_frac)
    pairs = sample_pairs(len(records), pair_count, rng)
    loss, grads = _pair_loss_and_grads(guide, records, pairs)
    opt.step(guide.params(), grads)
    return guide, loss


# ---------------------------------------------------------------------------
# per-class weights
# ---------------------------------------------------------------------------

def class_weights(sample_weights, labels) -> dict:
    """Mean sample weight per class over the minibatch; absent classes get no entry."""
    w = np.asarray(sample_weights, dtype=float)
    y = np.asarray(labels, dtype=int)
    if w.shape != y.shape:
        raise DataValidationError("sample_weights and labels must align")
    return {int(c): float(w[y == c].mean()) for c in np.unique(y)}
