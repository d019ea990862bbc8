"""Independent convex-modeling re-implementation of the lower-stage steering
program, used to freeze cross-solver reference values for the C++ tests.

Decision variables are V and the full gain K; nothing here shares code with
the C++ library.
"""
import sys

import cvxpy as cp
import numpy as np


def double_integrator():
    dt = 0.2
    A = np.block([[np.eye(2), dt * np.eye(2)], [np.zeros((2, 2)), np.eye(2)]])
    B = np.vstack([dt**2 * np.eye(2), dt * np.eye(2)])
    D = 1e-3 * np.eye(4)
    return dict(
        A=A, B=B, D=D, N=15, Sw=np.eye(4),
        mu0=np.array([-10.0, 1.0, 0.0, 0.0]),
        S0=np.diag([0.1, 0.1, 0.01, 0.01]),
        muf=np.zeros(4),
        Sf=0.25 * np.diag([0.1, 0.1, 0.01, 0.01]),
        Q=np.diag([10.0, 10.0, 1.0, 1.0]), R=1e3 * np.eye(2),
        halfspaces=[(np.array([0.2, -1.0, 0.0, 0.0]), 0.2),
                    (np.array([0.2, 1.0, 0.0, 0.0]), 0.2)],
        budget=0.10,
    )


def concatenate(A, B, D, N):
    n, m = B.shape
    r = D.shape[1]
    Acat = np.zeros(((N + 1) * n, n))
    Bcat = np.zeros(((N + 1) * n, N * m))
    Dcat = np.zeros(((N + 1) * n, N * r))
    Acat[:n] = np.eye(n)
    for k in range(1, N + 1):
        Acat[k * n:(k + 1) * n] = A @ Acat[(k - 1) * n:k * n]
        Bcat[k * n:(k + 1) * n] = A @ Bcat[(k - 1) * n:k * n]
        Bcat[k * n:(k + 1) * n, (k - 1) * m:k * m] = B
        Dcat[k * n:(k + 1) * n] = A @ Dcat[(k - 1) * n:k * n]
        Dcat[k * n:(k + 1) * n, (k - 1) * r:k * r] = D
    return Acat, Bcat, Dcat


def sqrtm_psd(M):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.sqrt(np.clip(w, 0, None))) @ U.T


def solve(p, mode="dr", solver="CLARABEL"):
    A, B, D, N = p["A"], p["B"], p["D"], p["N"]
    n, m = B.shape
    Acat, Bcat, Dcat = concatenate(A, B, D, N)
    SW = np.kron(np.eye(N), p["Sw"])
    SY = Acat @ p["S0"] @ Acat.T + Dcat @ SW @ Dcat.T
    F = sqrtm_psd(SY)
    Qbar = np.zeros(((N + 1) * n, (N + 1) * n))
    for k in range(N):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = p["Q"]
    Rbar = np.kron(np.eye(N), p["R"])
    V = cp.Variable(N * m)
    K = cp.Variable((N * m, (N + 1) * n))
    I = np.eye((N + 1) * n)
    Xbar = Acat @ p["mu0"] + Bcat @ V
    M = (I + Bcat @ K) @ F
    Qh = sqrtm_psd(Qbar)
    Rh = sqrtm_psd(Rbar)
    cost = (cp.quad_form(Xbar, Qbar) + cp.quad_form(V, Rbar)
            + cp.sum_squares(Qh @ M) + cp.sum_squares(Rh @ K @ F))
    EN = np.zeros((n, (N + 1) * n))
    EN[:, N * n:] = np.eye(n)
    cons = [EN @ Xbar == p["muf"]]
    G = EN @ M
    lmi = cp.bmat([[p["Sf"], G], [G.T, np.eye((N + 1) * n)]])
    cons.append(0.5 * (lmi + lmi.T) >> 0)
    Mh = len(p["halfspaces"])
    delta = p["budget"] / (N * Mh) if Mh else 0.0
    from scipy.stats import norm
    q = np.sqrt((1 - delta) / delta) if mode == "dr" else norm.ppf(1 - delta)
    for a, b in p["halfspaces"]:
        for k in range(1, N + 1):
            Ek = np.zeros((n, (N + 1) * n))
            Ek[:, k * n:(k + 1) * n] = np.eye(n)
            c = Ek.T @ a
            cons.append(c @ Xbar + q * cp.norm(M.T @ c) <= b)
    prob = cp.Problem(cp.Minimize(cost), cons)
    prob.solve(solver=solver)
    return prob.status, prob.value, V.value, K.value


if __name__ == "__main__":
    mode = sys.argv[1] if len(sys.argv) > 1 else "dr"
    status, value, V, K = solve(double_integrator(), mode)
    print(status, repr(value))
