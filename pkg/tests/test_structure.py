import numpy as np
import pytest

from privex.errors import NotBinaryInput
from privex.prob_core import Channel, bec, bsc
from privex.structure import biso_pairing, detect_biso, detect_erasure, erasure_structure


def test_biso_examples():
    assert detect_biso(bsc(0.2))
    assert detect_biso(bec(0.3))
    assert not detect_biso(Channel([[0.7, 0.2, 0.1], [0.6, 0.3, 0.1]]))


def test_biso_needs_binary_input():
    with pytest.raises(NotBinaryInput):
        detect_biso(Channel(np.full((3, 2), 0.5)))


def test_pairing_is_involution():
    row = np.array([0.1, 0.2, 0.4, 0.3])
    perm = biso_pairing(row, row[[3, 2, 1, 0]])
    assert perm is not None
    perm = np.asarray(perm)
    assert np.all(perm[perm] == np.arange(4))


def test_erasure_examples():
    assert detect_erasure(bec(0.3)) == pytest.approx(0.3)
    assert detect_erasure(Channel.identity(("a", "b"))) == 0.0
    assert detect_erasure(bsc(0.1)) is None


def test_ternary_erasure_structure():
    d = 0.4
    rows = np.array([[1 - d, 0, 0, d], [0, 1 - d, 0, d], [0, 0, 1 - d, d]])
    delta, e, perm = erasure_structure(Channel(rows))
    assert delta == pytest.approx(d) and e == 3
