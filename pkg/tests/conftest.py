import numpy as np
import pytest

from kdvbvp.domain import class_template, validate_class

CLASSES = (1, 2, 3, 4)


@pytest.fixture(params=CLASSES, ids=lambda k: f"k{k}")
def k(request):
    return request.param


def template(k, **kw):
    return validate_class(*class_template(k, **kw))


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
