import sys
from pathlib import Path

import pytest

from mlhnet import mlh, voxel_oracle
from mlhnet.mesh_io import generate_primitive, load_mesh

sys.path.insert(0, str(Path(__file__).parent))

from helpers import install_audit  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> (outcome, title, detail)
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session", autouse=True)
def descriptor_audit():
    """Every descriptor computed during the session is checked for the layer
    ordering and sentinel invariants (see the acceptance module)."""
    undo = install_audit([mlh, voxel_oracle])
    yield
    undo()


@pytest.fixture
def cube_path():
    return FIXTURES / "cube.off"


@pytest.fixture
def unit_cube():
    return load_mesh(FIXTURES / "cube.off")


@pytest.fixture
def centered_box():
    return generate_primitive("box", {"extents": (1, 1, 1)})


def pytest_collection_modifyitems(session, config, items):
    # the invariant audit must see descriptors from every other test
    last = [it for it in items if it.get_closest_marker("audit_last")]
    items[:] = [it for it in items if not it.get_closest_marker("audit_last")] + last


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return rep
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        outcome = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        ACCEPTANCE_RESULTS[number] = (outcome, title, detail)
    return rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        outcome, title, detail = ACCEPTANCE_RESULTS[number]
        line = f"criterion {number:2d} {outcome}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
