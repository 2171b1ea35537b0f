"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured quantities and
then asserts, so a failing criterion stays visible in the pytest output.
Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""
import time

import numpy as np
import pytest

from retool import bifurcation as bf
from retool import cli, lie
from retool import examples as ex
from retool import model as md
from retool import resolve as rs
from retool.dynamics import BundleState, integrate_bundle
from retool.pencil import HessianPencil, Verdict, certify_at, certify_definite, eig_sym


def report(label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


def definite(lam: float) -> bool:
    p = ex.lagrange_top_pencil(ex.TopParams(lam=lam))
    return certify_definite(p).verdict in (Verdict.POSITIVE, Verdict.NEGATIVE)


def test_fast_top_threshold():
    t0 = time.perf_counter()
    lo, hi = 3.0, 6.0
    assert not definite(lo) and definite(hi)
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if definite(mid):
            hi = mid
        else:
            lo = mid
    lam_star = 0.5 * (lo + hi)
    cert = certify_definite(ex.lagrange_top_pencil(ex.TopParams(lam=hi)))
    ratio = float(cert.eta_star[0]) / hi
    thr2, k_opt = ex.fast_top_threshold(ex.TopParams())
    dt = time.perf_counter() - t0
    ok = (abs(lam_star - 4.0) <= 1e-5 and abs(np.sqrt(thr2) - 4.0) < 1e-12
          and abs(ratio + 0.25) <= 1e-4 and abs(k_opt + 0.25) < 1e-15 and dt < 5.0)
    report("1 fast-top threshold", ok,
           f"lambda*={lam_star:.8f} ratio={ratio:.6f} formula=({np.sqrt(thr2)}, {k_opt}) t={dt:.2f}s")
    assert ok


def test_toy_reproduction():
    t0 = time.perf_counter()
    p = md.slice_pencil(ex.toy_so3_s1())
    cert = certify_definite(p)
    edge = [certify_at(p, e) for e in (-1.0, 1.0)]
    dt = time.perf_counter() - t0
    ok = (cert.verdict is Verdict.NEGATIVE and cert.eta_star[0] > 1.0
          and all(c.verdict is Verdict.INCONCLUSIVE and abs(c.margin) < 1e-8 for c in edge)
          and dt < 1.0)
    report("2 toy model", ok,
           f"{cert.verdict.value} eta*={cert.eta_star[0]:g}; edges "
           f"{[(c.verdict.value, c.margin) for c in edge]} t={dt:.3f}s")
    assert ok


def test_vortex_pencil():
    t0 = time.perf_counter()
    m = ex.two_vortices(2.0, 1.0)
    errs = []
    for eta in (-1.0, 0.0, 1.0):
        H = md.hbar_eta_derivs(m, [eta], np.zeros(0), np.zeros(2))[3]
        errs.append(np.abs(H - (1 - 2 * eta) * np.eye(2)).max())
    p = md.slice_pencil(m)
    crossing = bf.detect_crossing(lambda e: p.extreme_eigs([e])[0], -1.0, 2.0, 31, tol=1e-13)
    loc = [c.location for c in crossing]
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-10 and len(loc) == 1 and abs(loc[0] - 0.5) < 1e-10 and dt < 1.0
    report("3 vortex pencil", ok, f"max entry error={max(errs):.2e} degeneracy at {loc} t={dt:.3f}s")
    assert ok


def test_sleeping_branch():
    t0 = time.perf_counter()
    m = ex.lagrange_top()
    base = rs.solve_re(m, (np.zeros(1), np.array([-1.25]), np.zeros(4)), "S1")
    rho = np.linspace(-0.5, 0.5, 21)
    br = rs.continue_branch(m, base, "S1", [rho])
    v_max = max(np.abs(n.point.v).max() for n in br.nodes)
    res = max(max(n.point.r1, n.point.r2) for n in br.nodes)
    jy_err = max(np.abs(n.jy - (m.mu + m.splitting.embed_dual(n.point.rho, "m"))).max() for n in br.nodes)
    dt = time.perf_counter() - t0
    ok = (br.all_converged and len(br.nodes) == 21 and v_max == 0.0 and res < 1e-10
          and jy_err < 1e-12 and dt < 5.0)
    report("4 sleeping branch", ok,
           f"nodes={len(br.nodes)} max|v|={v_max:g} max residual={res:.2e} J_Y error={jy_err:.1e} t={dt:.2f}s")
    assert ok


def test_top_bifurcation():
    t0 = time.perf_counter()
    m = ex.lagrange_top()
    cert = certify_definite(md.slice_pencil(m))
    base = rs.solve_re(m, (np.zeros(1), cert.eta_star, np.zeros(4)))
    cc = bf.generic_crossing_search(m, base, [1.0], basis=ex.TOP_BLOCK_BASIS)
    rank = np.linalg.matrix_rank(cc.matrix, tol=1e-10 * np.abs(cc.matrix).max())
    eta_dir = np.array([1.0])
    p = md.slice_pencil(m)
    t_scan = bf.detect_crossing(lambda t: p.extreme_eigs(cert.eta_star + t * eta_dir)[0],
                                -2.0 * abs(cc.t_star), 2.0 * abs(cc.t_star))
    t_hit = min((c.location for c in t_scan), key=lambda t: abs(t - cc.t_star))
    eta_c = cert.eta_star + t_hit * eta_dir
    kd = bf.kernel_analysis(m, eta_c)
    line = bf.ParameterLine(np.zeros(1), np.zeros(1), eta_c, eta_dir, -0.05, 0.05)
    ys = [r * kd.basis[:, 0] for r in np.logspace(-3, -1, 6)]
    rep = bf.lyapunov_schmidt(m, kd, line, ys)
    pts = rep.points
    norms = [np.linalg.norm(q.point.v) for q in pts]
    res = max(max(q.point.r1, q.point.r2) for q in pts) if pts else np.inf
    dt = time.perf_counter() - t0
    ok = (rank == 1 and np.abs(cc.matrix).max() > 0 and abs(t_hit - cc.t_star) < 1e-8
          and len(pts) >= 5 and all(1e-3 - 1e-12 <= n <= 1e-1 + 1e-12 for n in norms)
          and res < 1e-8 and all(q.isotropy_dim == 0 for q in pts) and dt < 30.0)
    report("5 top bifurcation", ok,
           f"t*={cc.t_star:.10f} rank={rank} points={len(pts)} |v| in [{min(norms):.1e}, {max(norms):.1e}] "
           f"max residual={res:.1e} isotropy={[q.isotropy_dim for q in pts]} t={dt:.2f}s")
    assert ok


def test_vortex_bifurcation():
    t0 = time.perf_counter()
    m = ex.two_vortices(2.0, 1.0)
    kd = bf.kernel_analysis(m, [0.5])
    line = bf.ParameterLine(np.zeros(0), np.zeros(0), np.array([0.5]), np.ones(1), -0.3, 0.3)
    ys = [r * kd.basis[:, 0] for r in np.logspace(-3, -1, 6)]
    rep = bf.lyapunov_schmidt(m, kd, line, ys)
    errs, cosines = [], []
    for q in rep.points:
        x1, x2 = ex.vortex_configuration(m, q.point.v)
        cosines.append(float(x1 @ x2))
        xi = md.velocity(m, q.point.rho, q.point.v, q.point.eta)
        ref = ex.vortex_velocity(ex.VortexParams(2.0, 1.0), x1, x2)
        errs.append(np.linalg.norm(xi - ref) / np.linalg.norm(ref))
    dt = time.perf_counter() - t0
    ok = (kd.dim == 2 and kd.cohomogeneity_one and len(rep.points) >= 1
          and all(c > -1.0 + 1e-9 for c in cosines) and max(errs) < 1e-4 and dt < 30.0)
    report("6 vortex bifurcation", ok,
           f"kernel dim={kd.dim} ({kd.reason}) points={len(rep.points)} "
           f"min 1+cos={min(cosines) + 1:.1e} max rel velocity error={max(errs):.1e} t={dt:.2f}s")
    assert ok


def test_dynamics_invariants():
    t0 = time.perf_counter()
    m = ex.toy_so3_s1(1.0)
    rng = np.random.default_rng(1)
    rho0, v0 = 0.5 * rng.standard_normal(2), 0.1 * rng.standard_normal(4)
    runs = [integrate_bundle(m, [5.0], BundleState(np.eye(3), rho0, v0), 10.0, h, sample_every=100)
            for h in (1e-3, 5e-4)]
    drift, imp = runs[0].max_jy_drift, runs[0].max_implied_residual
    factor = runs[0].max_jy_drift / runs[1].max_jy_drift
    dt = time.perf_counter() - t0
    ok = drift < 1e-6 and imp < 1e-7 and 12.0 <= factor <= 20.0 and not runs[0].aborted and dt < 10.0
    report("7 dynamics invariants", ok,
           f"J_Y drift={drift:.2e} implied residual={imp:.2e} halving factor={factor:.2f} t={dt:.2f}s")
    assert ok


def _random_pencil(rng, n, k):
    def sym():
        a = rng.standard_normal((n, n))
        return 0.5 * (a + a.T)
    return HessianPencil(sym(), tuple(sym() for _ in range(k)))


def test_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    # concavity of the smallest eigenvalue along random segments
    violations = 0
    for _ in range(200):
        p = _random_pencil(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
        a, b = rng.normal(size=p.n_eta) * 3, rng.normal(size=p.n_eta) * 3
        s = rng.uniform()
        lhs = p.extreme_eigs(s * a + (1 - s) * b)[0]
        rhs = s * p.extreme_eigs(a)[0] + (1 - s) * p.extreme_eigs(b)[0]
        violations += lhs < rhs - 1e-9
    # coadjoint pairing identity
    coad_err = 0.0
    for alg in (lie.so3(), lie.t2()):
        for xi, mu, eta in lie.random_triples(alg, 50, rng):
            lhs = lie.coad(alg, xi, mu) @ eta
            rhs = mu @ lie.lie_bracket(alg, xi, eta)
            coad_err = max(coad_err, abs(lhs - rhs) / max(1.0, abs(rhs)))
    # finite differences against analytic gradients
    grad_err = 0.0
    for m in (ex.lagrange_top(quartic=0.3), ex.toy_so3_s1(0.7), ex.two_vortices(2.0, 1.0)):
        h = m.hamiltonian
        for _ in range(10):
            rho = 0.2 * rng.standard_normal(m.dim_mstar)
            v = 0.2 * rng.standard_normal(m.N_dim)
            x = np.concatenate([rho, v])
            f = lambda z: h.value(z[: m.dim_mstar], z[m.dim_mstar:])  # noqa: E731
            fd = md._fd_grad(f, x)
            an = np.concatenate(h.grad(rho, v))
            grad_err = max(grad_err, np.linalg.norm(fd - an) / max(1e-3, np.linalg.norm(an)))
    # signature of the vortex slice Hessian under a change of slice coordinates
    m = ex.two_vortices(2.0, 1.0)
    sig_ok = True
    for eta in np.linspace(-1, 2, 13):
        if abs(eta - 0.5) < 1e-9:
            continue
        H = md.hbar_eta_derivs(m, [eta], np.zeros(0), np.zeros(2))[3]
        P = rng.standard_normal((2, 2)) + 3 * np.eye(2)
        w1, w2 = np.linalg.eigvalsh(H), np.linalg.eigvalsh(P.T @ H @ P)
        sig_ok &= bool(np.array_equal(np.sign(w1), np.sign(w2)))
    dt = time.perf_counter() - t0
    ok = violations == 0 and coad_err < 1e-12 and grad_err < 1e-5 and sig_ok and dt < 30.0
    report("8 property suites", ok,
           f"concavity violations={violations} coad error={coad_err:.1e} "
           f"gradient error={grad_err:.1e} signatures agree={sig_ok} t={dt:.2f}s")
    assert ok


def test_hypothesis_diagnostics(tmp_path, capsys):
    t0 = time.perf_counter()
    so3 = lie.so3()
    res = lie.check_cocentral(so3, np.eye(3)[:, 2:], np.eye(3))
    witness_ok = False
    if not res.cocentral:
        a, b, c = res.witness
        witness_ok = (abs(a[2]) < 1e-14 and np.linalg.norm(c) > 1e-6
                      and np.allclose(c, lie.lie_bracket(so3, a, b), atol=1e-14))
    t2 = lie.t2()
    subs = [np.zeros((2, 0)), np.eye(2)[:, :1], np.eye(2)[:, 1:], np.array([[1.0], [1.0]]), np.eye(2)]
    torus_ok = all(lie.check_cocentral(t2, s, np.eye(2)).cocentral for s in subs)
    code = cli.run(["bifurcate", "--model", "toy_so3_s1", "--window", "0,2", "--out", str(tmp_path), "--quiet"])
    err = capsys.readouterr().err
    dt = time.perf_counter() - t0
    ok = (not res.cocentral and witness_ok and torus_ok and code == 2 and "co-central" in err and dt < 1.0)
    print(f"[{'PASS' if ok else 'FAIL'}] 9 hypothesis diagnostics: so3 cocentral={res.cocentral} "
          f"witness ok={witness_ok} torus all true={torus_ok} exit code={code} t={dt:.3f}s")
    assert ok
