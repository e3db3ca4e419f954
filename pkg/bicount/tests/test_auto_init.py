if __name__ == "__main__":
    import pytest
    import bicount
    from bicount.exceptions import BicountException

    bicount.nodal
    bicount.Pipeline
    with pytest.raises(BicountException, match="bicount used prior to manual initialization"):
        bicount.init(bicount._init_params["workers"] + 1)
