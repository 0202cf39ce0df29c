#!/usr/bin/env python3
"""Reference computations used to freeze expected values into the C++ tests.

Each block below recomputes a quantity with an independent implementation
(numpy/scipy) and emits it as constants in tests/oracle_values.hpp.  The
header is committed; rerun this script only when a case definition changes.

    python3 tests/oracles/gen_oracles.py > tests/oracle_values.hpp
"""
import numpy as np
from scipy.stats import rankdata

EPS_NORM = 1e-12  # epsilon used by the row-normalization rho(z) = z / (||z|| + eps)


def fmt(x):
    return format(float(x), ".17g")


def emit_matrix(name, m):
    m = np.asarray(m, dtype=np.float64)
    flat = ", ".join(fmt(v) for v in m.ravel())
    print(f"inline constexpr int {name}_rows = {m.shape[0]};")
    print(f"inline constexpr int {name}_cols = {m.shape[1]};")
    print(f"inline constexpr double {name}[] = {{{flat}}};")
    print()


def emit_scalar(name, v):
    print(f"inline constexpr double {name} = {fmt(v)};")
    print()


def emit_vector(name, v):
    flat = ", ".join(fmt(x) for x in np.asarray(v, dtype=np.float64).ravel())
    print(f"inline constexpr double {name}[] = {{{flat}}};")
    print()


print("// Generated by tests/oracles/gen_oracles.py -- do not edit by hand.")
print("#pragma once")
print()
print("namespace oracle {")
print()

rng = np.random.default_rng(987654321)

# ---------------------------------------------------------------- SVD case --
# Random 8x5 matrix, k = 3.  Expected outputs: singular values, the rank-3
# Frobenius reconstruction error (root of the discarded squared spectrum),
# and U_k * diag(sigma_k) with each left singular vector's largest-magnitude
# entry made positive.
A = np.round(rng.normal(size=(8, 5)), 6)
U, S, Vt = np.linalg.svd(A, full_matrices=False)
for k in range(U.shape[1]):
    j = np.argmax(np.abs(U[:, k]))
    if U[j, k] < 0:
        U[:, k] = -U[:, k]
        Vt[k, :] = -Vt[k, :]
K = 3
proj = U[:, :K] * S[:K]
recon_err = float(np.sqrt(np.sum(S[K:] ** 2)))
emit_matrix("svd_input", A)
emit_vector("svd_sigma", S)
emit_matrix("svd_proj_k3", proj)
emit_scalar("svd_recon_err_k3", recon_err)

# ------------------------------------------------- domain regularizer cases --
# Closed-form two-dimensional case: batch {(c,-c), (-c,c)} with c = 1.
# The mean row is (0,0), so H is uniform; both rows contribute the same KL.
c = 1.0
Z2 = np.array([[c, -c], [-c, c]])


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def regularizer(Z):
    H = softmax(Z.mean(axis=0))
    total = 0.0
    for i in range(Z.shape[0]):
        Zi = softmax(Z[i])
        total += float(np.sum(H * (np.log(H) - np.log(Zi))))
    return total / Z.shape[0]


emit_scalar("reg_twodim_value", regularizer(Z2))

Z4 = np.round(rng.normal(size=(4, 3)), 6)
emit_matrix("reg_batch", Z4)
emit_scalar("reg_batch_value", regularizer(Z4))

# ------------------------------------------------------- AdamW scalar trace --
# Three steps on a scalar parameter with a fixed gradient sequence.
# Update: m,v moments with bias correction; theta <- theta*(1 - lr*wd)
#                                                   - lr * mhat/(sqrt(vhat)+eps)
theta = 1.0
grads = [0.3, -0.2, 0.05]
lr, wd, b1, b2, eps = 0.1, 0.01, 0.9, 0.999, 1e-8
m = v = 0.0
trace = []
for t, g in enumerate(grads, start=1):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1 ** t)
    vhat = v / (1 - b2 ** t)
    theta = theta * (1 - lr * wd) - lr * mhat / (np.sqrt(vhat) + eps)
    trace.append(theta)
emit_vector("adamw_trace", trace)

# -------------------------------------------------- reconstruction loss case --
# n = 2, h = 3, identity reconstruction head:
#   (1/2n) sum_i [ ||rho(zh_i) - rho(zt_i)||^2 + ||rho(zt_i) - rho(zh_i)||^2 ]
ZH = np.array([[1.0, 2.0, -0.5], [0.25, -1.0, 3.0]])
ZT = np.array([[-0.5, 1.5, 2.0], [2.0, 0.0, -1.0]])


def rho(z):
    return z / (np.linalg.norm(z) + EPS_NORM)


n = ZH.shape[0]
loss = 0.0
for i in range(n):
    d1 = rho(ZH[i]) - rho(ZT[i])
    d2 = rho(ZT[i]) - rho(ZH[i])
    loss += float(d1 @ d1) + float(d2 @ d2)
loss /= 2 * n
emit_matrix("recon_zhat", ZH)
emit_matrix("recon_ztilde", ZT)
emit_scalar("recon_identity_head_value", loss)

# ------------------------------------------------------ encoder forward case --
# 5-node graph (cycle 0-1-2-3-4 plus chord 1-3), two message-passing layers:
#   z^(l) = relu(z^(l-1) W1_l^T + M(z^(l-1)) W2_l^T)
# where M is the neighbor-mean operator.  Also the projected embeddings and
# the two-layer head output head2( relu(head1(.)) ) on the final embeddings.
edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]
N, d = 5, 3
adj = [[] for _ in range(N)]
for u, v in edges:
    adj[u].append(v)
    adj[v].append(u)
adj = [sorted(set(a)) for a in adj]
X = np.round(rng.normal(size=(N, d)), 6)
W10 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
W20 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
W11 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
W21 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
P = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
G1 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)
G2 = np.round(rng.normal(size=(3, 3)) * 0.7, 6)


def nmean(Z):
    out = np.zeros_like(Z)
    for i, a in enumerate(adj):
        if a:
            out[i] = Z[a].mean(axis=0)
    return out


Z1 = np.maximum(X @ W10.T + nmean(X) @ W20.T, 0.0)
Z2f = np.maximum(Z1 @ W11.T + nmean(Z1) @ W21.T, 0.0)
ZP = Z2f @ P.T
ZG = np.maximum(Z2f @ G1.T, 0.0) @ G2.T
emit_matrix("fwd_x", X)
emit_matrix("fwd_w10", W10)
emit_matrix("fwd_w20", W20)
emit_matrix("fwd_w11", W11)
emit_matrix("fwd_w21", W21)
emit_matrix("fwd_proj", P)
emit_matrix("fwd_g1", G1)
emit_matrix("fwd_g2", G2)
emit_matrix("fwd_z2", Z2f)
emit_matrix("fwd_zproj", ZP)
emit_matrix("fwd_zhead", ZG)

# ---------------------------------------------------------- stability case --
# Two small graphs with a tied-weight 3-level check.  phi is the L-level
# unrolled tree embedding with the activation applied once at the root:
#   phi_i = relu( sum_{l=0..L-1} x_i^(l) W1^T (W2^T)^l )
# where x^(l) are the level-wise neighbor means of the raw features.  delta is
# the distance between root-mean embeddings; the pairwise bound accumulates
# C1*C2^l * ||x_i^(l) - x_j^(l)|| over root pairs; the global bound is the
# closed form 2*Bx*C1*(C2^L - 1)/(C2 - 1).
Xa = np.round(rng.normal(size=(3, 3)), 6)   # path 0-1-2, node task on 1
Xb = np.round(rng.normal(size=(3, 3)), 6)   # star 0-(1,2), graph task
adj_a = [[1], [0, 2], [1]]
adj_b = [[1, 2], [0], [0]]
W1t = np.round(rng.normal(size=(3, 3)) * 0.8, 6)
W2t = np.round(rng.normal(size=(3, 3)) * 0.8, 6)
L = 3


def levels(X, adj, L):
    xs = [X]
    for _ in range(1, L):
        prev = xs[-1]
        nxt = np.zeros_like(prev)
        for i, a in enumerate(adj):
            if a:
                nxt[i] = prev[a].mean(axis=0)
        xs.append(nxt)
    return xs


def phi_root(X, adj, L):
    xs = levels(X, adj, L)
    acc = xs[L - 1] @ W1t.T
    for l in range(L - 2, -1, -1):
        acc = acc @ W2t.T + xs[l] @ W1t.T
    return np.maximum(acc, 0.0)


la, lb = levels(Xa, adj_a, L), levels(Xb, adj_b, L)
pa, pb = phi_root(Xa, adj_a, L), phi_root(Xb, adj_b, L)
roots_a, roots_b = [1], [0, 1, 2]
za = pa[roots_a].mean(axis=0)
zb = pb[roots_b].mean(axis=0)
delta = float(np.linalg.norm(za - zb))
C1 = float(np.linalg.svd(W1t, compute_uv=False)[0])
C2 = float(np.linalg.svd(W2t, compute_uv=False)[0])
Bx = max(float(np.linalg.norm(Xa, axis=1).max()), float(np.linalg.norm(Xb, axis=1).max()))
pair = 0.0
for i in roots_a:
    for j in roots_b:
        for l in range(L):
            pair += C1 * C2**l * float(np.linalg.norm(la[l][i] - lb[l][j]))
pair /= len(roots_a) * len(roots_b)
glob = 2 * Bx * C1 * (C2**L - 1) / (C2 - 1)
emit_matrix("stab_xa", Xa)
emit_matrix("stab_xb", Xb)
emit_matrix("stab_w1", W1t)
emit_matrix("stab_w2", W2t)
emit_scalar("stab_delta", delta)
emit_scalar("stab_pairwise", pair)
emit_scalar("stab_global", glob)
emit_scalar("stab_c1", C1)
emit_scalar("stab_c2", C2)
emit_scalar("stab_bx", Bx)

# ----------------------------------------------------------------- AUC case --
# 20 scores with deliberate ties; midrank AUC cross-checked via rankdata.
scores = np.round(rng.normal(size=20), 1)  # one-decimal rounding forces ties
labels = (rng.uniform(size=20) < 0.45).astype(int)
if labels.sum() == 0:
    labels[0] = 1
if labels.sum() == len(labels):
    labels[0] = 0
ranks = rankdata(scores, method="average")
npos = int(labels.sum())
nneg = len(labels) - npos
auc = (float(ranks[labels == 1].sum()) - npos * (npos + 1) / 2) / (npos * nneg)
emit_vector("auc_scores", scores)
print(f"inline constexpr int auc_labels[] = {{{', '.join(str(int(l)) for l in labels)}}};")
print()
emit_scalar("auc_value", auc)

print("}  // namespace oracle")
