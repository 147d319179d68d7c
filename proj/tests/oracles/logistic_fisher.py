"""Closed-form Fisher of a logistic unit p = sigmoid(w*x) and the standard
error of its N-sample squared-gradient estimate. Also the hand values for
the relative change and the combined score. Frozen into fisher_test.cpp."""
import math

N = 50000
for x, w in [(2.0, 0.0), (1.0, 1.0), (0.5, -1.0)]:
    p = 1.0 / (1.0 + math.exp(-w * x))
    f = x * x * p * (1 - p)
    # E[g^4] with g = (p - y) x, y ~ Bernoulli(p)
    m4 = x ** 4 * (p * (1 - p) ** 4 + (1 - p) * p ** 4)
    se = math.sqrt((m4 - f * f) / N)
    print(f"x={x} w={w} fisher={f!r} se={se!r}")

eps = 1e-8
print("delta [2],[1]:", repr(abs(2.0 - 1.0) / (min(2.0, 1.0) + eps)))
print("delta [0],[3]:", repr(3.0 / (0.0 + eps)))
print("drf [1],[3], ln2:", repr(1.0 + math.exp(-math.log(2.0)) * (2.0 / (1.0 + eps))))
