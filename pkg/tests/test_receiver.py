import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from emi_linksim.dsp import IqBuffer, complex_gaussian, seeded_rng
from emi_linksim.harness import reference_for
from emi_linksim.ofdm import PRESETS, ResourceGrid
from emi_linksim.receiver import OfdmReceiver, receive
from emi_linksim.validation import check_grid, check_iq, check_link

NR = PRESETS["nr-like"]


@pytest.fixture(scope="module")
def tx():
    bits, grid, frame = reference_for("nr-like", 3)
    buf = IqBuffer(np.concatenate([np.zeros(77), frame, np.zeros(NR.symbol_len)]), NR.sample_rate_hz)
    return bits, grid, buf


def test_params_round_trip():
    rx = OfdmReceiver(link="lte-a-like", sync_threshold=0.2)
    assert rx.get_params() == {"link": "lte-a-like", "sync_threshold": 0.2, "correct_frequency": True}
    rx.set_params(sync_threshold=0.3)
    assert clone(rx).get_params()["sync_threshold"] == 0.3


def test_unfitted():
    with pytest.raises(NotFittedError):
        OfdmReceiver().transform(np.zeros(10))


def test_fit_transform_predict_score(tx):
    bits, grid, buf = tx
    rx = OfdmReceiver().fit(grid)
    eq = rx.transform(buf)
    assert isinstance(eq, ResourceGrid) and eq.symbols.shape == NR.shape
    assert np.array_equal(rx.predict(buf), bits)
    assert rx.score(buf, bits) == 1.0


def test_raw_array_input(tx):
    bits, grid, buf = tx
    rx = OfdmReceiver().fit(grid)
    assert rx.score(np.asarray(buf.samples), bits) == 1.0


def test_reception_fields(tx):
    _, grid, buf = tx
    r = receive(buf, grid)
    assert r.frame_start == 77 and not r.sync_failed
    assert r.channel.shape == NR.shape


def test_sync_loss_is_reported_not_raised(tx):
    _, grid, _ = tx
    noise = IqBuffer(complex_gaussian(seeded_rng(2), NR.frame_len + 5000), NR.sample_rate_hz)
    r = OfdmReceiver().fit(grid).receive(noise)
    assert r.sync_failed
    assert r.bits.size == NR.payload_bits()


def test_wrong_rate(tx):
    _, grid, buf = tx
    with pytest.raises(ValueError, match="expected"):
        OfdmReceiver().fit(grid).transform(buf.replace(sample_rate_hz=1e6))


def test_grid_for_other_link(tx):
    _, grid, _ = tx
    with pytest.raises(ValueError, match="lte-a-like"):
        OfdmReceiver(link="lte-a-like").fit(grid)


class TestValidation:
    def test_check_link(self):
        assert check_link("nr-like") is NR
        assert check_link(NR) is NR
        with pytest.raises(TypeError):
            check_link(3)

    def test_check_iq(self):
        with pytest.raises(ValueError, match="1-D"):
            check_iq(np.zeros((2, 2)), 1.0)
        with pytest.raises(ValueError, match="sample_rate_hz"):
            check_iq(np.zeros(4))

    def test_check_grid(self):
        with pytest.raises(TypeError):
            check_grid(np.zeros(NR.shape))
