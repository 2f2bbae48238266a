"""Dense brute-force references used across the test suite."""
import numpy as np

from flagseq.objective import masks


def af_dense(s, r, tau, omega, N, periodic, lo, L):
    """|r^H J_tau Diag(h(omega)) s| from an explicit matrix on window [lo, lo+L)."""
    n_abs = lo + np.arange(L)
    h = np.exp(2j * np.pi * omega * (n_abs + 1) / N)
    U = np.zeros((L, L), complex)
    for n in range(L):
        m = n + tau
        if periodic:
            m %= L
        elif not 0 <= m < L:
            continue
        U[m, n] = h[n]
    return r.conj() @ U @ s, U


def u_matrix(op, tau, omega):
    L = op.L
    n_abs = op.lo + np.arange(L)
    h = np.exp(2j * np.pi * omega * (n_abs + 1) / op.N)
    U = np.zeros((L, L), complex)
    for n in range(L):
        m = n + tau
        if op.periodic:
            m %= L
        elif not 0 <= m < L:
            continue
        U[m, n] = h[n]
    return U


def dense_blocks(op, M, varrho):
    """[((k, l), B)] with B acting on stacked [p_0; c_0; p_1; c_1; ...] vectors."""
    L = op.L
    out = []
    for k in range(M):
        for l in range(M):
            for tau in op.taus:
                for om in op.omegas:
                    w, wb, wt = masks(l, k, tau, om, varrho)
                    U = u_matrix(op, tau, om)
                    B = np.zeros((2 * M * L, 2 * M * L), complex)
                    B[2 * k * L:(2 * k + 1) * L, 2 * l * L:(2 * l + 1) * L] += w * U
                    B[2 * k * L:(2 * k + 1) * L, (2 * l + 1) * L:(2 * l + 2) * L] += wb * U
                    B[(2 * k + 1) * L:(2 * k + 2) * L, 2 * l * L:(2 * l + 1) * L] += wb * U
                    B[(2 * k + 1) * L:(2 * k + 2) * L, (2 * l + 1) * L:(2 * l + 2) * L] += wt * U
                    out.append(((k, l), B))
    return out


def stack(P, C):
    return np.concatenate([np.concatenate([P[m], C[m]]) for m in range(P.shape[0])])


def pair_weights(alpha, M):
    return np.array([[alpha if k == l else 1 - alpha for l in range(M)] for k in range(M)])


def dense_wimsl(op, M, config, Ps, Pr, Cs, Cr):
    x1, x2 = stack(Ps, Cs), stack(Pr, Cr)
    w = pair_weights(config.alpha, M)
    return sum(w[k, l] * abs(x2.conj() @ B @ x1) ** 2 for (k, l), B in dense_blocks(op, M, config.varrho))


def peak_masks(op, M):
    L = op.L
    out = []
    for i in range(M):
        Mm = np.zeros((2 * M * L, 2 * M * L))
        Mm[2 * i * L:(2 * i + 1) * L, 2 * i * L:(2 * i + 1) * L] = np.diag(op.peak_support.astype(float))
        out.append(Mm)
    return out


def dense_omega(op, M, config, Ps, Pr, Cs, Cr):
    x1, x2 = stack(Ps, Cs), stack(Pr, Cr)
    w = pair_weights(config.alpha, M)
    bp = config.beta_prime
    Om = sum(w[k, l] * np.conj(x2.conj() @ B @ x1) * B for (k, l), B in dense_blocks(op, M, config.varrho))
    Om = Om + sum(bp * np.conj(x2.conj() @ Mm @ x1) * Mm for Mm in peak_masks(op, M))
    return Om


def dense_lambda(op, M, config):
    w = pair_weights(config.alpha, M)
    cols = [np.sqrt(w[k, l]) * B.reshape(-1) for (k, l), B in dense_blocks(op, M, config.varrho)]
    cols += [np.sqrt(config.beta_prime) * Mm.reshape(-1) for Mm in peak_masks(op, M)]
    X = np.array(cols).T
    return np.linalg.svd(X, compute_uv=False)[0] ** 2
