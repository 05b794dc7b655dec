"""
Binary decision trees with exact split search.

Split search sorts the node's samples along every feature at once and scans
all boundaries between adjacent distinct values; thresholds are midpoints and
samples with x <= threshold go left. Ties go to the lowest feature index,
then the lowest threshold.

Two criteria are provided: the regularized second-order gain used by
gradient boosting, and weighted misclassification error used by AdaBoost.
"""

from dataclasses import dataclass

import numpy as np

LEVEL_WISE = "level_wise"
LEAF_WISE = "leaf_wise"


@dataclass(frozen=True)
class Split:
    """Best split of one node."""

    feature: int
    threshold: float
    score: float
    left: np.ndarray
    right: np.ndarray


class DecisionTree:
    """
    Flat array tree. Leaves have feature -1 and carry a value; internal nodes
    carry feature, threshold and child ids.
    """

    def __init__(self, growth_policy=LEVEL_WISE):
        self.growth_policy = growth_policy
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.depth = []

    def add_leaf(self, value, depth):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.depth.append(int(depth))
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left_value, right_value):
        """Turn a leaf into an internal node with two new leaves."""
        depth = self.depth[node] + 1
        left = self.add_leaf(left_value, depth)
        right = self.add_leaf(right_value, depth)
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right
        self.value[node] = 0.0
        return left, right

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return sum(1 for f in self.feature if f < 0)

    @property
    def max_depth(self):
        return max((d for d, f in zip(self.depth, self.feature) if f < 0), default=0)

    def apply(self, X):
        """Leaf id reached by every row of X."""
        X = np.asarray(X, dtype=np.float64)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            internal = feature[node] >= 0
            if not internal.any():
                return node
            r, n = rows[internal], node[internal]
            go_left = X[r, feature[n]] <= threshold[n]
            node[internal] = np.where(go_left, left[n], right[n])

    def predict(self, X):
        return np.asarray(self.value)[self.apply(X)]

    def structure(self, node=0):
        """Nested tuple describing the tree shape, independent of node numbering."""
        if self.feature[node] < 0:
            return ("leaf", self.value[node])
        return (
            self.feature[node],
            self.threshold[node],
            self.structure(self.left[node]),
            self.structure(self.right[node]),
        )

    def to_dict(self):
        return {
            "growth_policy": self.growth_policy,
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "value": list(self.value),
            "depth": list(self.depth),
        }

    @classmethod
    def from_dict(cls, data):
        tree = cls(data["growth_policy"])
        tree.feature = [int(v) for v in data["feature"]]
        tree.threshold = [float(v) for v in data["threshold"]]
        tree.left = [int(v) for v in data["left"]]
        tree.right = [int(v) for v in data["right"]]
        tree.value = [float(v) for v in data["value"]]
        tree.depth = [int(v) for v in data["depth"]]
        return tree


def _sorted_columns(X, idx):
    values = X[idx]
    order = np.argsort(values, axis=0, kind="stable")
    return order, np.take_along_axis(values, order, axis=0)


def _boundaries(xs, n, min_samples):
    # boundary i puts the first i+1 sorted samples on the left
    counts = np.arange(1, n)[:, None]
    return (xs[:-1] < xs[1:]) & (counts >= min_samples) & (n - counts >= min_samples)


def _make_split(idx, order, xs, flat_position, n, score):
    feature, i = divmod(int(flat_position), n - 1)
    lo, hi = xs[i, feature], xs[i + 1, feature]
    threshold = (lo + hi) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    left = np.sort(idx[order[: i + 1, feature]])
    right = np.sort(idx[order[i + 1:, feature]])
    return Split(feature, float(threshold), float(score), left, right)


def best_gain_split(X, idx, g, h, lam, gamma, min_samples):
    """
    Highest regularized gain split of the samples idx, or None without a
    positive-gain split.

    gain = 1/2 [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)] - gamma
    """
    n = len(idx)
    if n < max(2, 2 * min_samples):
        return None
    order, xs = _sorted_columns(X, idx)
    g_node, h_node = g[idx], h[idx]
    G, H = g_node.sum(), h_node.sum()
    GL = np.cumsum(g_node[order], axis=0)[:-1]
    HL = np.cumsum(h_node[order], axis=0)[:-1]
    GR, HR = G - GL, H - HL
    gain = 0.5 * (GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G ** 2 / (H + lam)) - gamma
    gain = np.where(_boundaries(xs, n, min_samples), gain, -np.inf)

    ranked = gain.T.ravel()
    position = int(np.argmax(ranked))
    if not ranked[position] > 0.0:
        return None
    return _make_split(idx, order, xs, position, n, ranked[position])


def best_error_split(X, idx, class_weights, min_samples=1):
    """
    Split of the samples idx with the lowest weighted misclassification error,
    or None when no split strictly lowers the node error. class_weights is
    the (N, K) matrix of sample weight placed in each sample's own class.
    """
    n = len(idx)
    if n < max(2, 2 * min_samples):
        return None
    order, xs = _sorted_columns(X, idx)
    node_weights = class_weights[idx]
    total = node_weights.sum(axis=0)
    node_error = total.sum() - total.max()

    CL = np.cumsum(node_weights[order], axis=0)[:-1]
    CR = total - CL
    error = (CL.sum(axis=-1) - CL.max(axis=-1)) + (CR.sum(axis=-1) - CR.max(axis=-1))
    error = np.where(_boundaries(xs, n, min_samples), error, np.inf)

    ranked = error.T.ravel()
    position = int(np.argmin(ranked))
    if not ranked[position] < node_error - 1e-12:
        return None
    return _make_split(idx, order, xs, position, n, ranked[position])


def newton_leaf(g, h, idx, lam, lr):
    """Leaf value -G / (H + lam), already scaled by the learning rate."""
    return -lr * g[idx].sum() / (h[idx].sum() + lam)


def grow_gradient_tree(X, g, h, policy, lr, lam=1.0, gamma=0.0, min_samples=2,
                       max_depth=4, max_leaves=16):
    """
    Fit one regression tree to gradients g and hessians h.

    level_wise expands every frontier node breadth-first down to max_depth;
    leaf_wise repeatedly splits the leaf of highest gain (lowest node id on
    ties) until max_leaves leaves exist. Returns (tree, per-row leaf values);
    a leaf_wise tree also records its split decisions in tree.growth_log.
    """
    all_idx = np.arange(X.shape[0])
    tree = DecisionTree(policy)
    root = tree.add_leaf(newton_leaf(g, h, all_idx, lam, lr), 0)
    leaves = {root: all_idx}

    def find(idx):
        return best_gain_split(X, idx, g, h, lam, gamma, min_samples)

    def apply_split(node, split):
        left, right = tree.split(
            node,
            split.feature,
            split.threshold,
            newton_leaf(g, h, split.left, lam, lr),
            newton_leaf(g, h, split.right, lam, lr),
        )
        del leaves[node]
        leaves[left], leaves[right] = split.left, split.right
        return left, right

    if policy == LEVEL_WISE:
        frontier = [root]
        for _ in range(max_depth):
            next_frontier = []
            for node in frontier:
                split = find(leaves[node])
                if split is not None:
                    next_frontier.extend(apply_split(node, split))
            frontier = next_frontier
            if not frontier:
                break
    elif policy == LEAF_WISE:
        tree.growth_log = []
        candidates = {root: find(all_idx)}
        while len(leaves) < max_leaves:
            open_nodes = [node for node, split in candidates.items() if split is not None]
            if not open_nodes:
                break
            node = min(open_nodes, key=lambda n: (-candidates[n].score, n))
            split = candidates.pop(node)
            tree.growth_log.append({
                "node": node,
                "gain": split.score,
                "frontier": [s.score for n, s in sorted(candidates.items()) if s is not None],
            })
            for child in apply_split(node, split):
                candidates[child] = find(leaves[child])
    else:
        raise ValueError(f"unknown growth policy {policy!r}")

    values = np.empty(X.shape[0], dtype=np.float64)
    for node, idx in leaves.items():
        values[idx] = tree.value[node]
    return tree, values


def grow_error_tree(X, labels, weights, num_classes, max_depth=1):
    """
    Weighted classification tree of bounded depth (a stump at depth 1).

    Leaves predict the class of largest weight (lowest index on ties); nodes
    split only when the weighted error strictly drops.
    """
    class_weights = np.zeros((X.shape[0], num_classes), dtype=np.float64)
    class_weights[np.arange(X.shape[0]), labels] = weights

    def majority(idx):
        return int(np.argmax(class_weights[idx].sum(axis=0)))

    all_idx = np.arange(X.shape[0])
    tree = DecisionTree(LEVEL_WISE)
    frontier = [(tree.add_leaf(majority(all_idx), 0), all_idx)]
    for _ in range(max_depth):
        next_frontier = []
        for node, idx in frontier:
            split = best_error_split(X, idx, class_weights)
            if split is None:
                continue
            left, right = tree.split(
                node, split.feature, split.threshold, majority(split.left), majority(split.right)
            )
            next_frontier += [(left, split.left), (right, split.right)]
        frontier = next_frontier
        if not frontier:
            break
    return tree
