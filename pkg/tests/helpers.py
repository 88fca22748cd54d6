"""Shared oracles for the test-suite: random differentiable graphs and gradient comparison."""

import numpy as np

from threeplayer import autodiff as ad

REL_TOL = 1e-4
ABS_FLOOR = 1e-7
# random graphs have large third derivatives; 1e-3 truncation error would dominate
FD_EPS = 1e-5

# no gradient_reversal here: by design its backward is not the derivative of its forward
UNARY = ("relu", "tanh", "sigmoid", "exp_tanh", "log_sigmoid", "square", "neg", "clip")


def assert_grads_close(got, want, rel=REL_TOL, floor=ABS_FLOOR):
    assert set(got) == set(want)
    for name in want:
        g, w = np.asarray(got[name]), np.asarray(want[name])
        assert g.shape == w.shape, name
        err = np.abs(g - w)
        bound = np.maximum(rel * np.maximum(np.abs(g), np.abs(w)), floor)
        assert np.all(err <= bound), f"{name}: max err {err.max():.3e}\n{g}\n{w}"


def _unary(kind, h):
    if kind == "relu":
        return ad.relu(h)
    if kind == "tanh":
        return ad.tanh(h)
    if kind == "sigmoid":
        return ad.sigmoid(h)
    if kind == "exp_tanh":
        return ad.exp(ad.tanh(h))
    if kind == "log_sigmoid":
        return ad.log(ad.sigmoid(h))
    if kind == "square":
        # tanh keeps stacked products from exploding (FD rounding scales with |f|)
        return ad.tanh(h) * h
    if kind == "neg":
        return -h
    if kind == "clip":
        return ad.clip(h, -0.8, 0.8)
    raise AssertionError(kind)


def _kink_distance(root):
    """Smallest distance of any relu/clip input to its kink within the graph."""
    best, stack, seen = np.inf, [root], set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.op == "relu":
            best = min(best, np.abs(node.parents[0].value).min())
        elif node.op == "clip":
            v = node.parents[0].value
            best = min(best, np.abs(v - 0.8).min(), np.abs(v + 0.8).min())
        stack.extend(node.parents)
    return best


def random_graph_loss(rng, params=None, max_depth=6, max_batch=8, max_width=16, margin=1e-3):
    """Draw a random layered graph ending in a scalar.

    Returns ``(build, params)`` where ``build`` maps a parameter mapping
    (arrays or leaf nodes) to the scalar root. Draws whose relu/clip inputs
    sit within ``margin`` of a kink are redrawn, since central differences
    are meaningless there.
    """
    for _ in range(200):
        if params is None:
            depth = int(rng.integers(1, max_depth + 1))
            widths = [int(w) for w in rng.integers(1, max_width + 1, size=depth + 1)]
            p = {}
            for k in range(depth):
                p[f"W{k}"] = rng.normal(0.0, 1.0 / np.sqrt(widths[k]), size=(widths[k], widths[k + 1]))
                p[f"b{k}"] = rng.normal(0.0, 0.3, size=widths[k + 1])
        else:
            p = params
            depth = len(p) // 2
            widths = [p["W0"].shape[0]] + [p[f"W{k}"].shape[1] for k in range(depth)]
        batch = int(rng.integers(1, max_batch + 1))
        x = rng.normal(size=(batch, widths[0]))
        ops = [str(rng.choice(UNARY)) for _ in range(depth)]
        mix = [int(rng.integers(0, 4)) for _ in range(depth)]
        weights = rng.normal(size=(batch, widths[-1]))
        labels = rng.integers(0, widths[-1], size=batch)

        def build(prm, x=x, ops=ops, mix=mix, weights=weights, labels=labels, depth=depth):
            h = ad.const(x)
            for k in range(depth):
                a = ad.matmul(h, prm[f"W{k}"]) + prm[f"b{k}"]
                h = _unary(ops[k], a)
                if mix[k] == 1:
                    h = h - a * 0.5
                elif mix[k] == 2 and h.shape[1] > 1:
                    h = ad.concat([ad.slice_cols(h, 0, 1), ad.slice_cols(h, 1, h.shape[1]) * ad.slice_cols(a, 1, a.shape[1])], axis=1)
                elif mix[k] == 3:
                    h = ad.reshape(ad.reshape(h, (-1,)), h.shape) + ad.mean(a, axis=0)
            score = ad.sum(ad.mean(h * weights, axis=1))
            if h.shape[1] > 1:
                score = score - ad.mean(ad.sum(ad.log_softmax(h) * np.eye(h.shape[1])[labels], axis=1))
            return score

        lv = ad.leaves(p)
        if _kink_distance(build(lv)) >= margin:
            return build, p
    raise RuntimeError("could not draw a graph away from kinks")
