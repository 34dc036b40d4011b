"""Per-coefficient change PMFs, discrete/continuous sampling and entropy.

Each DCT coefficient of a block is visited in row-scan order.  Given the
Cholesky factor of the block's conditional covariance and the innovations
of earlier coefficients, the coefficient's stego signal is Gaussian with
mean m' and deviation sigma'.  Scaled by the quantization step, the signal
is binned around the rounded scaled mean into the change alphabet
-K..K (tails beyond the alphabet fold into the end symbols), one change is
drawn from the folded PMF, and a continuous candidate consistent with the
drawn bin is recovered by truncated-Gaussian inverse-CDF sampling so the
chain can continue exactly.  End-symbol candidates are drawn from the full
folded tail, which keeps the continuous output an exact draw of the
Gaussian joint.

Conventions: rounding is half-away-from-zero; bins are half-open on the
left, (u_k, u_{k+1}]; the chain consumes exactly two uniforms per
coefficient (one discrete, one continuous), so streams are positionally
reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

# Acceptance probability below which the faithful accept-reject loop is
# replaced by the statistically identical inverse-CDF draw.
LOOP_ACCEPT_FLOOR = 0.01

_MIN_BIN_PROB = 1e-300
_SQRT_HALF = math.sqrt(0.5)
_BELOW_ONE = math.nextafter(1.0, 0.0)
_TINY = 5e-324


class SamplerError(Exception):
    """Invalid sampling parameters."""


class DegenerateBinError(SamplerError):
    """Requested change bin carries (essentially) no probability."""


def round_half_away(x):
    """Round to the nearest integer, halves away from zero."""
    return int(math.floor(abs(x) + 0.5) * (1 if x >= 0 else -1))


def _phi(z):
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(z * _SQRT_HALF))


def _phi_bar(z):
    """Standard normal upper tail probability, accurate for large z."""
    return 0.5 * math.erfc(z * _SQRT_HALF)


def _inv_phi(p):
    return float(ndtri(p))


@dataclass(frozen=True)
class Pmf:
    """Folded change PMF over the alphabet k_min..k_max.

    ``center_round`` is the rounded scaled mean used for the bin edges:
    u_k = center_round - 0.5 + k.
    """

    k_min: int
    k_max: int
    probs: np.ndarray
    center_round: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (self.k_max - self.k_min + 1,):
            raise SamplerError("probability vector does not match alphabet")
        if np.any(p < 0):
            raise SamplerError("negative probability")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise SamplerError("probabilities do not sum to 1")
        object.__setattr__(self, "probs", p)

    def prob(self, k):
        if not (self.k_min <= k <= self.k_max):
            return 0.0
        return float(self.probs[k - self.k_min])


def _folded_cdf(m_hat, sigma_hat, k_range):
    """(center_round, cumulative list) of the folded PMF in scaled units.

    cumulative[j] = P(change <= -K + j); the final entry is exactly 1, so
    both tails fold into the end symbols.
    """
    center = round_half_away(m_hat)
    base = center - 0.5 - m_hat
    inv = 1.0 / sigma_hat
    cdf = [_phi((base + k) * inv) for k in range(-k_range + 1, k_range + 1)]
    cdf.append(1.0)
    return center, cdf


def _point_mass(m_hat, k_range):
    """(center, one-hot probs list, atom) for a zero-deviation signal."""
    center = round_half_away(m_hat)
    atom = min(max(center, -k_range), k_range)
    probs = [0.0] * (2 * k_range + 1)
    probs[atom + k_range] = 1.0
    return center, probs, atom


def pmf(m_prime, sigma_prime, q_step, k_range):
    """Folded change PMF for a Gaussian stego signal N(m', sigma'^2).

    The signal scaled by the quantization step has mean m_hat = m'/q and
    deviation sigma_hat = sigma'/q; bin k covers (u_k, u_{k+1}] with
    u_k = [m_hat] - 0.5 + k, each with probability
    (erf((u_{k+1}-m_hat)/(sqrt2 sigma_hat)) - erf((u_k-m_hat)/...)) / 2,
    and mass beyond +-k_range folds into the end symbols.  sigma' = 0
    degenerates to a point mass at round(m_hat) clamped into the alphabet.
    """
    if sigma_prime < 0:
        raise SamplerError("sigma_prime must be >= 0")
    if q_step <= 0:
        raise SamplerError("q_step must be positive")
    if k_range < 1:
        raise SamplerError("alphabet half-width must be >= 1")
    m_hat = m_prime / q_step
    sigma_hat = sigma_prime / q_step
    if sigma_hat == 0.0:  # includes underflow of a subnormal sigma_prime
        center, probs, _ = _point_mass(m_hat, k_range)
        return Pmf(k_min=-k_range, k_max=k_range, probs=np.array(probs),
                   center_round=center)
    center, cdf = _folded_cdf(m_hat, sigma_hat, k_range)
    probs = np.maximum(np.diff(np.asarray(cdf), prepend=0.0), 0.0)
    return Pmf(k_min=-k_range, k_max=k_range, probs=probs, center_round=center)


def entropy(p):
    """Shannon entropy of a folded PMF in bits, with 0 log 0 = 0."""
    probs = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=np.float64)
    total = 0.0
    for q in probs:
        if q > 0.0:
            total -= q * math.log2(q)
    return total


def costs_from_pmf(p):
    """Embedding costs rho(k) = ln(pi(0) / pi(k)); zero mass maps to +inf."""
    p0 = p.prob(0)
    with np.errstate(divide="ignore"):
        return np.log(p0) - np.log(p.probs)


def sample_discrete(p, gen):
    """Draw one change from the folded PMF via inverse CDF.

    Zero-probability symbols can never be selected.
    """
    cdf = np.cumsum(p.probs)
    cdf[-1] = 1.0
    u = gen.random()
    return p.k_min + int(np.searchsorted(cdf, u, side="right"))


def _truncated_standard_normal(lo_z, hi_z, u):
    """Inverse-CDF draw of a standard normal conditioned on (lo_z, hi_z].

    Uses whichever tail has better floating-point resolution, so draws stay
    accurate for bins far from the mean.
    """
    if lo_z == -math.inf and hi_z == math.inf:
        return _inv_phi(min(max(u, _TINY), _BELOW_ONE))
    if hi_z <= -lo_z:  # bin mass concentrated on the lower half-line
        p_lo = _phi(lo_z)
        p_hi = _phi(hi_z)
        p = p_lo + u * (p_hi - p_lo)
        z = _inv_phi(min(max(p, _TINY), _BELOW_ONE))
    else:
        q_hi = _phi_bar(hi_z)
        q_lo = _phi_bar(lo_z)
        p = q_hi + (1.0 - u) * (q_lo - q_hi)
        z = -_inv_phi(min(max(p, _TINY), _BELOW_ONE))
    return min(max(z, lo_z), hi_z)


def rejection_sample_continuous(m_prime, sigma_prime, k, q_step, gen,
                                force_loop=False, force_icdf=False,
                                lo_override=None, hi_override=None):
    """Continuous candidate consistent with the sampled change bin.

    Draws from N(m', sigma'^2) conditioned on the scaled value falling in
    (u_k, u_{k+1}], then returns the unscaled draw.  The faithful
    accept-reject loop is used while the bin probability is at least 1%;
    below that the draw switches to the identical truncated-Gaussian
    inverse CDF (``force_loop``/``force_icdf`` select a path explicitly).
    ``lo_override``/``hi_override`` replace the bin edges in scaled units,
    which callers use to widen end-of-alphabet bins into full tails.
    """
    if sigma_prime < 0:
        raise SamplerError("sigma_prime must be >= 0")
    if q_step <= 0:
        raise SamplerError("q_step must be positive")
    m_hat = m_prime / q_step
    sigma_hat = sigma_prime / q_step
    center = round_half_away(m_hat)
    lo = (center - 0.5 + k) if lo_override is None else lo_override
    hi = (center + 0.5 + k) if hi_override is None else hi_override
    if sigma_hat == 0.0:
        # A zero-deviation signal is the point mass at round(m_hat); its
        # continuous candidate is the mean itself (alphabet clamping is the
        # chain's responsibility).
        if k == center:
            return m_prime
        raise DegenerateBinError("zero-deviation signal outside requested bin")
    lo_z = (lo - m_hat) / sigma_hat
    hi_z = (hi - m_hat) / sigma_hat
    accept = _phi(hi_z) - _phi(lo_z)
    if accept < _MIN_BIN_PROB:
        raise DegenerateBinError(f"bin probability {accept:.3e} below 1e-300")
    use_loop = force_loop or (accept >= LOOP_ACCEPT_FLOOR and not force_icdf)
    if use_loop:
        while True:
            z = _inv_phi(min(max(gen.random(), _TINY), _BELOW_ONE))
            if lo_z < z <= hi_z:
                return m_prime + sigma_prime * z
    z = _truncated_standard_normal(lo_z, hi_z, gen.random())
    return m_prime + sigma_prime * z


@dataclass
class ChainState:
    """Progress of the 64-step per-block sampling chain."""

    continuous_samples: list = field(default_factory=list)
    discrete_changes: list = field(default_factory=list)
    noise_units: list = field(default_factory=list)
    index: int = 0


def _step_params(chol, base_mean, noise, i):
    """Conditional (m', sigma') of coefficient i given earlier innovations."""
    sigma = abs(float(chol[i, i]))
    if i:
        m = float(base_mean[i]) + float(np.dot(chol[i, :i], noise[:i]))
    else:
        m = float(base_mean[0])
    return m, sigma


def _draw_coefficient(m_prime, sigma_prime, q_step, k_range, u_disc, u_cont):
    """One chain draw from two uniforms: (center, probs, k, s, z).

    The continuous candidate for the end symbols -K/+K is drawn from the
    full folded tail so the chain reproduces the exact Gaussian joint.
    """
    m_hat = m_prime / q_step
    sigma_hat = sigma_prime / q_step
    if sigma_hat == 0.0:  # includes underflow of a subnormal sigma_prime
        center, probs, atom = _point_mass(m_hat, k_range)
        return center, probs, atom, m_prime, 0.0
    center, cdf = _folded_cdf(m_hat, sigma_hat, k_range)
    j = 0
    while cdf[j] <= u_disc:
        j += 1
    k = j - k_range
    base = center - 0.5 - m_hat
    inv = 1.0 / sigma_hat
    lo_z = -math.inf if k == -k_range else (base + k) * inv
    hi_z = math.inf if k == k_range else (base + k + 1.0) * inv
    z = _truncated_standard_normal(lo_z, hi_z, u_cont)
    prev = 0.0
    probs = []
    for value in cdf:
        probs.append(max(value - prev, 0.0))
        prev = value
    return center, probs, k, m_prime + sigma_prime * z, z


def chain_step(chol, base_mean, state, q_step_i, k_range, gen):
    """Advance the per-block chain by one coefficient.

    Returns (Pmf, k, s_continuous, state); the state is updated in place
    and also returned for convenience.  Two uniforms are consumed from
    ``gen`` regardless of degeneracy, matching ``run_block_chain``.
    """
    i = state.index
    if i >= 64:
        raise SamplerError("chain already complete")
    noise = np.asarray(state.noise_units, dtype=np.float64)
    m_prime, sigma_prime = _step_params(chol, base_mean, noise, i)
    u_disc = gen.random()
    u_cont = gen.random()
    center, probs, k, s, z = _draw_coefficient(
        m_prime, sigma_prime, q_step_i, k_range, u_disc, u_cont)
    state.continuous_samples.append(s)
    state.discrete_changes.append(k)
    state.noise_units.append(z)
    state.index = i + 1
    p = Pmf(k_min=-k_range, k_max=k_range, probs=np.array(probs),
            center_round=center)
    return p, k, s, state


def run_block_chain(chol, base_mean, q_steps, k_range, gen,
                    collect_probs=False, collect_params=False):
    """Run the full 64-coefficient chain for one block.

    Returns a dict with the discrete changes, continuous candidates and
    per-coefficient entropies; ``collect_probs`` adds the folded PMFs and
    ``collect_params`` the conditional (m_hat, sigma_hat) pairs.  Draws the
    block's 128 uniforms up front; the output is bit-identical to 64
    ``chain_step`` calls on the same stream.
    """
    uniforms = gen.random(128)
    changes = np.zeros(64, dtype=np.int64)
    samples = np.zeros(64)
    noise = np.zeros(64)
    bits = np.zeros(64)
    probs_out = [] if collect_probs else None
    params_out = np.zeros((64, 2)) if collect_params else None
    for i in range(64):
        m_prime, sigma_prime = _step_params(chol, base_mean, noise, i)
        q = float(q_steps[i])
        center, probs, k, s, z = _draw_coefficient(
            m_prime, sigma_prime, q, k_range,
            float(uniforms[2 * i]), float(uniforms[2 * i + 1]))
        changes[i] = k
        samples[i] = s
        noise[i] = z
        h = 0.0
        for p in probs:
            if p > 0.0:
                h -= p * math.log2(p)
        bits[i] = h
        if collect_probs:
            probs_out.append(np.array(probs))
        if collect_params:
            params_out[i, 0] = m_prime / q
            params_out[i, 1] = sigma_prime / q
    out = {"changes": changes, "samples": samples, "entropy_bits": bits}
    if collect_probs:
        out["probs"] = probs_out
    if collect_params:
        out["params"] = params_out
    return out
