import pytest

# running `pytest` from the repository root should not fail when only the
# engine is installed; these tests need the exporter (and torch)
pytest.importorskip("wavetok_exporter")
pytest.importorskip("wavetok")
