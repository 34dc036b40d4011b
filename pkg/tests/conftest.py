import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from jpegns import RawImage, SensorParams


def quadrature_change_pmf(m_prime, sigma_prime, q_step, k_range):
    """Independent adaptive-quadrature oracle for the folded change PMF.

    Integrates the scaled Gaussian density over each bin, clipping to
    +-12 sigma around the mean so the integrator never has to find an
    isolated spike on an infinite interval (the clipped tail mass is below
    1e-30, far inside the comparison tolerance).
    """
    m_hat = m_prime / q_step
    sigma_hat = sigma_prime / q_step
    center = int(np.floor(abs(m_hat) + 0.5) * (1 if m_hat >= 0 else -1))
    density = norm(loc=m_hat, scale=sigma_hat).pdf
    lo_mass, hi_mass = m_hat - 12.0 * sigma_hat, m_hat + 12.0 * sigma_hat
    probs = []
    for k in range(-k_range, k_range + 1):
        lo = lo_mass if k == -k_range else center - 0.5 + k
        hi = hi_mass if k == k_range else center + 0.5 + k
        lo, hi = max(lo, lo_mass), min(hi, hi_mass)
        if hi <= lo:
            probs.append(0.0)
            continue
        val, _ = quad(density, lo, hi, epsabs=1e-13, limit=200)
        probs.append(val)
    return np.array(probs)


@pytest.fixture
def paper_params():
    """Noise parameters of the reference sensor pair: gain 1.15, offset -1150."""
    return SensorParams(a1=0.0, b1=0.0, a2=1.15, b2=-1150.0)


@pytest.fixture
def small_params():
    """Sub-quantization-step stego variance (about 0.5 around x = 2000)."""
    return SensorParams(a1=0.0, b1=0.0, a2=5e-4, b2=-0.5)


@pytest.fixture
def bright_raw(paper_params):
    """48x48 RAW with values in [1500, 3500]: positive variance everywhere."""
    rng = np.random.default_rng(1234)
    data = np.floor(rng.uniform(1500.0, 3500.0, size=(48, 48)))
    return RawImage(data=data, cfa="RGGB", bit_depth=12, params=paper_params)


def cov_standard_error(sigma, n_draws):
    """Entrywise standard error of an empirical covariance of Gaussians."""
    d = np.diag(sigma)
    return np.sqrt((np.outer(d, d) + sigma**2) / n_draws)
