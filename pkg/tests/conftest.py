import numpy as np
import pytest

from gml import models as M
from gml import ndtape as nd


def numeric_grad(f, x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of scalar ``f`` at ``x0``."""
    x = np.array(x0, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise relative error with an absolute floor for near-zero entries."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


def tape_grad(build, *arrays):
    """Gradients of ``build(*tensors)`` w.r.t. every input array, via the tape."""
    ts = [nd.parameter(a) for a in arrays]
    with nd.Tape() as tape:
        loss = build(*ts)
        grads = tape.backward(loss)
    return [grads.get(t.node_id, np.zeros(t.shape)) for t in ts]


def check_grads(build, *arrays, h: float = 1e-6) -> float:
    """Worst relative error between tape and finite-difference gradients."""
    analytic = tape_grad(build, *arrays)
    worst = 0.0
    for k, a in enumerate(arrays):

        def f(xk, k=k):
            args = [nd.constant(xk if j == k else arrays[j]) for j in range(len(arrays))]
            return build(*args).item()

        worst = max(worst, rel_err(analytic[k], numeric_grad(f, a, h)))
    return worst


def model_gradcheck(spec, g, seed=0):
    """Worst relative gradient error over all parameters of a randomly perturbed model."""
    params = M.init_params(spec, seed)
    ops = M.GraphOperators(g)
    rng = np.random.default_rng(seed)
    for k, v in params.items():
        v.values = v.values + rng.normal(scale=0.3, size=v.shape)
    n_out = g.num_graphs if spec.task == "graph" else g.num_nodes
    weights = nd.constant(rng.normal(size=(n_out, spec.num_classes)))

    def loss_of():
        logits, _ = M.forward(spec, params, ops)
        return nd.sum(nd.hadamard(nd.softmax_rows(logits), weights))

    with nd.Tape() as tape:
        grads = tape.backward(loss_of())
    worst = 0.0
    for name, t in params.items():
        orig = t.values.copy()

        def f(v, t=t):
            t.values = v
            return loss_of().item()

        num = numeric_grad(f, orig)
        t.values = orig
        worst = max(worst, rel_err(grads[t.node_id], num))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------- acceptance report
#
# Tests marked ``@pytest.mark.criterion(n, "summary")`` are collected into one
# PASS/FAIL line per criterion, printed at the end of the run. A test may add
# a free-text ``detail`` with ``record_property("detail", ...)``.

_VERDICTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, summary): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when == "teardown":
        return
    number, summary = mark.args
    entry = _VERDICTS.setdefault(number, {"summary": summary, "ok": True, "detail": []})
    if report.failed or report.skipped:
        entry["ok"] = False
        reason = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else str(report.longrepr)
        entry["detail"].append(reason.splitlines()[0][:200])
    if report.when == "call":
        entry["detail"].extend(str(v) for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        e = _VERDICTS[number]
        line = f"[{'PASS' if e['ok'] else 'FAIL'}] criterion {number}: {e['summary']}"
        terminalreporter.write_line(line)
        for d in e["detail"]:
            terminalreporter.write_line(f"         {d}")
