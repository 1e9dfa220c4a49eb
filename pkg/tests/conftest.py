import pytest

from riskscope.fixtures import (
    adult_style_dataset,
    patient_count_query,
    patient_dataset,
)


@pytest.fixture(scope="session")
def patient():
    return patient_dataset()


@pytest.fixture(scope="session")
def patient_query(patient):
    return patient_count_query().validated(patient.schema)


@pytest.fixture(scope="session")
def adult_1k():
    return adult_style_dataset(1000, seed=7)


@pytest.fixture(scope="session")
def adult_10k():
    return adult_style_dataset(10000, seed=7)
