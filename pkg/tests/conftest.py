import numpy as np
import pytest

from phred.core import InterpolationData, ph_to_state_space
from phred.irka import _singular_vector_directions
from phred.models import LadderParams, MsdParams, build_ladder, build_msd


@pytest.fixture(scope="session")
def msd6():
    return build_msd(MsdParams(6))


@pytest.fixture(scope="session")
def msd100():
    return build_msd(MsdParams(100))


@pytest.fixture(scope="session")
def ladder100():
    return build_ladder(LadderParams(100))


@pytest.fixture(scope="session")
def msd100_ss(msd100):
    return ph_to_state_space(msd100)


def spread_data(ss, n_pairs=3, n_real=2, lo=-1.5, hi=0.5):
    """Well-conditioned interpolation data: spread conjugate pairs plus
    real points, directions from the dominant singular vectors."""
    re = 10 ** np.linspace(lo, hi, n_pairs)
    im = 10 ** np.linspace(lo + 0.5, hi + 1.0, n_pairs)
    reals = 10 ** np.linspace(lo + 0.2, hi + 0.3, n_real)
    pts = np.concatenate([re + 1j * im, re - 1j * im, reals]).astype(complex)
    return InterpolationData(pts, _singular_vector_directions(ss, pts))
