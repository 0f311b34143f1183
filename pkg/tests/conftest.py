import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.game_core import shift_weights
from src.generators import fixture


@pytest.fixture
def fig1():
    return fixture('fig1')


@pytest.fixture
def fig3():
    return fixture('fig3')


@pytest.fixture
def fig3_11(fig3):
    """fig3 normalized at threshold (1,1)"""
    return shift_weights(fig3, (1, 1))


@pytest.fixture
def fig3_22(fig3):
    return shift_weights(fig3, (2, 2))


@pytest.fixture
def barrier():
    return fixture('barrier')
