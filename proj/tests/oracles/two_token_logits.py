"""Scalar-arithmetic evaluation of one post-norm encoder block plus linear
head on two tokens. Frozen into nn_model_test.cpp (TwoTokenHandEvaluation)."""
import math

X = [[1.0, 0.0, -1.0, 2.0], [0.0, 2.0, 1.0, -1.0]]
Wq = [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, -1]]
Wk = [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, -1, 0, 1]]
Wv = [[2, 0, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1]]
Wo = [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]]
bo = [0, 1, 0, -1]
W1 = [[1, -1, 0], [0, 1, 1], [1, 0, -1], [0, 0, 1]]
b1 = [0, 0, -1]
W2 = [[1, 0, 0, 1], [0, 1, -1, 0], [1, 1, 0, 0]]
b2 = [0, 0, 1, 0]
Wd = [[1, 0, -1], [0, 1, 1], [1, 1, 0], [0, -1, 2]]
bd = [0, 0, 1]
D = 4
EPS = 1e-5


def mm(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def addb(A, b):
    return [[A[i][j] + b[j] for j in range(len(b))] for i in range(len(A))]


def ln(row):
    m = sum(row) / len(row)
    v = sum((x - m) ** 2 for x in row) / len(row)
    return [(x - m) / math.sqrt(v + EPS) for x in row]


Q = mm(X, Wq)
K = mm(X, Wk)
V = mm(X, Wv)
A = []
for i in range(2):
    s = [sum(Q[i][d] * K[j][d] for d in range(D)) / math.sqrt(D) for j in range(2)]
    mx = max(s)
    e = [math.exp(x - mx) for x in s]
    A.append([x / sum(e) for x in e])
H = mm(A, V)
M = addb(mm(H, Wo), bo)
X1 = [ln([X[i][j] + M[i][j] for j in range(D)]) for i in range(2)]
hid = [[max(0.0, x) for x in r] for r in addb(mm(X1, W1), b1)]
F = addb(mm(hid, W2), b2)
X2 = [ln([X1[i][j] + F[i][j] for j in range(D)]) for i in range(2)]
logits = addb(mm(X2, Wd), bd)
for r in logits:
    print(" ".join(repr(v) for v in r))
