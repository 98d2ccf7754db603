"""Method of moving asymptotes, classic form with a primal-dual subsolver.

Each update builds the separable convex approximation

    minimize   sum_j [ p0_j/(upp_j - x_j) + q0_j/(x_j - low_j) ]
               + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
    subject to sum_j [ P_ij/(upp_j - x_j) + Q_ij/(x_j - low_j) ]
               - a_i z - y_i <= b_i,      alfa <= x <= beta, y >= 0, z >= 0

and solves it with an interior-point Newton method driven far enough that
the subproblem KKT residual drops below ~1e-9.  The slack variables y make
every subproblem feasible; the penalty weights c keep them at zero whenever
the true constraints can be met.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MmaOptions:
    asy_init: float = 0.5      # initial asymptote distance, fraction of range
    asy_incr: float = 1.2      # relaxation on smooth progress
    asy_decr: float = 0.7      # tightening on oscillation
    asy_min: float = 1e-5      # floor keeps late-stage 2-cycles below tolerance
    asy_max: float = 10.0
    albefa: float = 0.1        # inner-bound offset from the asymptotes
    raa0: float = 1e-5         # curvature floor of the approximation
    c_penalty: float = 1e3     # constraint violation penalty weight
    epsimin: float = 1e-10     # interior-point target (KKT residual < 0.9e-9)


@dataclass
class MmaState:
    low: np.ndarray
    upp: np.ndarray
    x_prev1: np.ndarray
    x_prev2: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    iteration: int = 0


@dataclass
class _Subproblem:
    low: np.ndarray
    upp: np.ndarray
    alfa: np.ndarray
    beta: np.ndarray
    p0: np.ndarray
    q0: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    b: np.ndarray
    a0: float = 1.0
    a: np.ndarray = field(default=None)
    c: np.ndarray = field(default=None)
    d: np.ndarray = field(default=None)


class MmaOptimizer:
    """Stateful update rule: call update() once per optimization iteration."""

    def __init__(self, x_min: np.ndarray, x_max: np.ndarray, n_constraints: int,
                 move: np.ndarray | float = 0.2, options: MmaOptions | None = None):
        x_min = np.asarray(x_min, dtype=float)
        x_max = np.asarray(x_max, dtype=float)
        if np.any(x_max <= x_min):
            raise ValueError("upper bounds must exceed lower bounds")
        n = x_min.size
        self.n = n
        self.m = n_constraints
        self.move = np.broadcast_to(np.asarray(move, dtype=float), (n,)).copy()
        self.opts = options or MmaOptions()
        self.state = MmaState(
            low=x_min.copy(), upp=x_max.copy(),
            x_prev1=np.zeros(n), x_prev2=np.zeros(n),
            x_min=x_min, x_max=x_max)
        self.kkt_residual = np.inf  # subproblem KKT residual of the last update

    # -- subproblem construction --------------------------------------------

    def build_subproblem(self, x: np.ndarray, df0: np.ndarray,
                         g: np.ndarray, dg: np.ndarray) -> _Subproblem:
        """Asymptote update plus the separable approximation at x."""
        s = self.state
        o = self.opts
        rng = np.maximum(s.x_max - s.x_min, 1e-10)
        if s.iteration <= 2:
            low = x - o.asy_init * rng
            upp = x + o.asy_init * rng
        else:
            osc = (x - s.x_prev1) * (s.x_prev1 - s.x_prev2)
            factor = np.ones(self.n)
            factor[osc > 0] = o.asy_incr
            factor[osc < 0] = o.asy_decr
            low = x - factor * (s.x_prev1 - s.low)
            upp = x + factor * (s.upp - s.x_prev1)
            low = np.clip(low, x - o.asy_max * rng, x - o.asy_min * rng)
            upp = np.clip(upp, x + o.asy_min * rng, x + o.asy_max * rng)

        alfa = np.maximum.reduce([low + o.albefa * (x - low),
                                  x - self.move * rng, s.x_min])
        beta = np.minimum.reduce([upp - o.albefa * (upp - x),
                                  x + self.move * rng, s.x_max])

        ux, xl = upp - x, x - low
        p0 = np.maximum(df0, 0.0)
        q0 = np.maximum(-df0, 0.0)
        pq0 = 0.001 * (p0 + q0) + o.raa0 / rng
        p0 = (p0 + pq0) * ux ** 2
        q0 = (q0 + pq0) * xl ** 2

        dg = np.atleast_2d(dg)
        P = np.maximum(dg, 0.0)
        Q = np.maximum(-dg, 0.0)
        PQ = 0.001 * (P + Q) + o.raa0 / rng
        P = (P + PQ) * ux ** 2
        Q = (Q + PQ) * xl ** 2
        b = P @ (1.0 / ux) + Q @ (1.0 / xl) - np.asarray(g, dtype=float)

        return _Subproblem(low=low, upp=upp, alfa=alfa, beta=beta,
                           p0=p0, q0=q0, P=P, Q=Q, b=b,
                           a0=1.0, a=np.zeros(self.m),
                           c=np.full(self.m, o.c_penalty), d=np.ones(self.m))

    # -- public update -------------------------------------------------------

    def update(self, x: np.ndarray, f0: float, df0: np.ndarray,
               g: np.ndarray, dg: np.ndarray) -> np.ndarray:
        """One MMA step; returns the next iterate inside the box."""
        x = np.asarray(x, dtype=float)
        if not (np.all(np.isfinite(df0)) and np.all(np.isfinite(dg))
                and np.all(np.isfinite(g)) and np.isfinite(f0)):
            raise FloatingPointError("non-finite objective/constraint data passed to MMA")
        s = self.state
        s.iteration += 1
        sub = self.build_subproblem(x, df0, g, dg)
        x_new, kkt = solve_subproblem(sub, self.opts.epsimin)
        if not np.all(np.isfinite(x_new)):
            # feasibility restoration: drop the objective, minimize violation
            sub = self.build_subproblem(x, np.zeros(self.n), g, dg)
            x_new, kkt = solve_subproblem(sub, self.opts.epsimin)
            if not np.all(np.isfinite(x_new)):
                raise FloatingPointError("MMA subproblem solve failed")
        self.kkt_residual = kkt
        s.low, s.upp = sub.low, sub.upp
        s.x_prev2 = s.x_prev1
        s.x_prev1 = x.copy()
        return np.clip(x_new, s.x_min, s.x_max)


def solve_subproblem(sub: _Subproblem, epsimin: float = 1e-10
                     ) -> tuple[np.ndarray, float]:
    """Primal-dual interior-point solve; returns (x, final KKT residual)."""
    n = sub.p0.size
    m = sub.b.size
    en, em = np.ones(n), np.ones(m)

    x = 0.5 * (sub.alfa + sub.beta)
    y = em.copy()
    z = 1.0
    lam = em.copy()
    xsi = np.maximum(1.0 / (x - sub.alfa), en)
    eta = np.maximum(1.0 / (sub.beta - x), en)
    mu = np.maximum(em, 0.5 * sub.c)
    zet = 1.0
    slack = em.copy()

    def residual(x, y, z, lam, xsi, eta, mu, zet, slack, epsi):
        ux, xl = sub.upp - x, x - sub.low
        plam = sub.p0 + sub.P.T @ lam
        qlam = sub.q0 + sub.Q.T @ lam
        gvec = sub.P @ (1.0 / ux) + sub.Q @ (1.0 / xl)
        rex = plam / ux ** 2 - qlam / xl ** 2 - xsi + eta
        rey = sub.c + sub.d * y - mu - lam
        rez = sub.a0 - zet - sub.a @ lam
        relam = gvec - sub.a * z - y + slack - sub.b
        rexsi = xsi * (x - sub.alfa) - epsi
        reeta = eta * (sub.beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * slack - epsi
        full = np.concatenate([rex, rey, [rez], relam, rexsi, reeta,
                               remu, [rezet], res])
        return full, np.linalg.norm(full), np.abs(full).max()

    epsi = 1.0
    while epsi > epsimin:
        _, resnorm, resmax = residual(x, y, z, lam, xsi, eta, mu, zet, slack, epsi)
        inner = 0
        while resmax > 0.9 * epsi and inner < 200:
            inner += 1
            ux, xl = sub.upp - x, x - sub.low
            plam = sub.p0 + sub.P.T @ lam
            qlam = sub.q0 + sub.Q.T @ lam
            gvec = sub.P @ (1.0 / ux) + sub.Q @ (1.0 / xl)
            # GG[i, j] = d(constraint_i)/dx_j of the approximation
            GG = sub.P / ux ** 2 - sub.Q / xl ** 2

            delx = plam / ux ** 2 - qlam / xl ** 2 \
                - epsi / (x - sub.alfa) + epsi / (sub.beta - x)
            dely = sub.c + sub.d * y - lam - epsi / y
            delz = sub.a0 - sub.a @ lam - epsi / z
            dellam = gvec - sub.a * z - y - sub.b + epsi / lam

            diagx = 2.0 * (plam / ux ** 3 + qlam / xl ** 3) \
                + xsi / (x - sub.alfa) + eta / (sub.beta - x)
            diagy = sub.d + mu / y
            diaglamyi = slack / lam + 1.0 / diagy

            # reduced (m+1) x (m+1) system in (dlam, dz)
            blam = dellam + dely / diagy - GG @ (delx / diagx)
            AA = np.zeros((m + 1, m + 1))
            AA[:m, :m] = (GG / diagx) @ GG.T + np.diag(diaglamyi)
            AA[:m, m] = sub.a
            AA[m, :m] = sub.a
            AA[m, m] = -zet / z
            rhs = np.concatenate([blam, [delz]])
            sol = np.linalg.solve(AA, rhs)
            dlam = sol[:m]
            dz = sol[m]
            dx = -(delx + GG.T @ dlam) / diagx
            dy = (dlam - dely) / diagy
            dxsi = -xsi + (epsi - xsi * dx) / (x - sub.alfa)
            deta = -eta + (epsi + eta * dx) / (sub.beta - x)
            dmu = -mu + (epsi - mu * dy) / y
            dzet = -zet + (epsi - zet * dz) / z
            ds = -slack + (epsi - slack * dlam) / lam

            # largest step keeping every positive variable at > ~1% of itself
            steps = [(-1.01 * dy / y).max(initial=-np.inf),
                     -1.01 * dz / z,
                     (-1.01 * dlam / lam).max(initial=-np.inf),
                     (-1.01 * dxsi / xsi).max(initial=-np.inf),
                     (-1.01 * deta / eta).max(initial=-np.inf),
                     (-1.01 * dmu / mu).max(initial=-np.inf),
                     -1.01 * dzet / zet,
                     (-1.01 * ds / slack).max(initial=-np.inf),
                     (-1.01 * dx / (x - sub.alfa)).max(initial=-np.inf),
                     (1.01 * dx / (sub.beta - x)).max(initial=-np.inf)]
            step = 1.0 / max(1.0, max(steps))

            old = (x, y, z, lam, xsi, eta, mu, zet, slack)
            newnorm = 2.0 * resnorm
            for _ in range(50):
                x = old[0] + step * dx
                y = old[1] + step * dy
                z = old[2] + step * dz
                lam = old[3] + step * dlam
                xsi = old[4] + step * dxsi
                eta = old[5] + step * deta
                mu = old[6] + step * dmu
                zet = old[7] + step * dzet
                slack = old[8] + step * ds
                _, newnorm, resmax = residual(x, y, z, lam, xsi, eta, mu,
                                              zet, slack, epsi)
                if newnorm < resnorm:
                    break
                step *= 0.5
            resnorm = newnorm
        epsi *= 0.1

    _, _, kkt = residual(x, y, z, lam, xsi, eta, mu, zet, slack, 0.0)
    return x, float(kkt)
