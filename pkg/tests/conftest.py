from __future__ import annotations

import pytest

from crowdol.metrics import FundingConfig, impact_report


@pytest.fixture(scope="session")
def tight_report():
    return impact_report(FundingConfig.tight(), 0.005)


@pytest.fixture(scope="session")
def relaxed_report():
    return impact_report(FundingConfig.relaxed(), 0.005)
