import bicount
import pytest
from bicount.exceptions import BicountException


def test_init_twice():
    workers = bicount._init_params["workers"]
    bicount.init(workers)
    with pytest.raises(BicountException, match="multiple times"):
        bicount.init(workers + 1)
    with pytest.raises(ValueError, match="positive"):
        bicount.init(0)
