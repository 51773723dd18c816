"""Assembly of the grouped mixed system on the unit cube.

The first-group form couples the heat-flux field with the stress/pressure
pair; the constraint form pairs (sigma, s, p) against (u, theta). Boundary
integrals reduce to componentwise face integrals because every cube face
carries a constant axis-aligned frame. Matrix rows always index the test
function of the grouped system; the standalone sub-form builders return
matrices with rows indexing the first form argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import DiscreteSpaces
from .tensors import projection_matrix2, projection_matrix3

FORM_IDS = ("a", "b", "c", "d", "e", "f", "g", "h", "dbar", "A", "B", "MV", "MQ")


@dataclass(frozen=True)
class ModelParams:
    """Knudsen number, modified accommodation factor, velocity prescription strength."""

    kn: float = 1.0
    chi_tilde: float = 1.0
    epsilon_w: float = 0.0

    def __post_init__(self):
        if not self.kn > 0:
            raise ValueError("kn must be positive")
        if not self.chi_tilde > 0:
            raise ValueError("chi_tilde must be positive")
        if self.epsilon_w < 0:
            raise ValueError("epsilon_w must be nonnegative")


def _zeros6():
    return np.zeros(6)


@dataclass
class BoundaryData:
    """Constant wall data per cube face, ordered as spaces.faces (x0 x1 y0 y1 z0 z1)."""

    u_n_w: np.ndarray = field(default_factory=_zeros6)
    u_t1_w: np.ndarray = field(default_factory=_zeros6)
    u_t2_w: np.ndarray = field(default_factory=_zeros6)
    p_w: np.ndarray = field(default_factory=_zeros6)
    theta_w: np.ndarray = field(default_factory=_zeros6)

    def __post_init__(self):
        for name in ("u_n_w", "u_t1_w", "u_t2_w", "p_w", "theta_w"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape == ():
                arr = np.full(6, float(arr))
            if arr.shape != (6,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be 6 finite per-face values")
            setattr(self, name, arr)


@dataclass
class VolumeSources:
    """Volume data: mass source, body force, energy source as callables of points."""

    m_src: callable = None
    b: callable = None
    r_src: callable = None

    def mass(self, pts):
        return np.zeros(pts.shape[0]) if self.m_src is None else np.asarray(self.m_src(pts), float)

    def body(self, pts):
        return np.zeros((pts.shape[0], 3)) if self.b is None else np.asarray(self.b(pts), float)

    def energy(self, pts):
        return np.zeros(pts.shape[0]) if self.r_src is None else np.asarray(self.r_src(pts), float)


@dataclass
class MixedSystem:
    """Assembled saddle-point data: forms, norm matrices, loads, parameters."""

    A: np.ndarray
    B: np.ndarray
    M_V: np.ndarray
    M_Q: np.ndarray
    F: np.ndarray
    G: np.ndarray
    params: ModelParams
    spaces: DiscreteSpaces


# -- frame component weights -----------------------------------------------


def _stress_face_weights(spaces, fd):
    """Component weights of sigma frame entries on one face (5-vectors)."""
    E = spaces.E
    n, t1, t2 = fd.frame.n, fd.frame.t1, fd.frame.t2
    return {
        "nn": np.einsum("aij,i,j->a", E, n, n),
        "nt1": np.einsum("aij,i,j->a", E, n, t1),
        "nt2": np.einsum("aij,i,j->a", E, n, t2),
        "t1t1": np.einsum("aij,i,j->a", E, t1, t1),
        "t1t2": np.einsum("aij,i,j->a", E, t1, t2),
        "t2t2": np.einsum("aij,i,j->a", E, t2, t2),
    }


def _add(M, bi, bj, nr, nc, blk):
    M[bi * nr : (bi + 1) * nr, bj * nc : (bj + 1) * nc] += blk


# -- sub-forms ---------------------------------------------------------------


def _form_a(spaces, params):
    """Heat-flux form: rows and columns over the 3-component vector block."""
    sb = spaces.scalar
    n = sb.n
    kn, chi = params.kn, params.chi_tilde
    A = np.zeros((3 * n, 3 * n))
    grad_sum = sum(sb.dmat(al, al) for al in range(3))
    for i in range(3):
        for j in range(3):
            blk = np.zeros((n, n))
            if i == j:
                blk += 0.5 * (24.0 / 25.0) * kn * grad_sum
            blk += 0.5 * (24.0 / 25.0) * kn * sb.dmat(j, i)
            blk += (12.0 / 25.0) * kn * sb.dmat(i, j)
            if i == j:
                blk += (4.0 / 15.0) / kn * sb.mass()
            _add(A, i, j, n, n, blk)
    for f, fd in enumerate(sb.faces):
        Mf = sb.face_mass(f)
        nvec, t1, t2 = fd.frame.n, fd.frame.t1, fd.frame.t2
        for i in range(3):
            for j in range(3):
                w = 0.5 / chi * nvec[i] * nvec[j]
                w += (12.0 / 25.0) * chi * (t1[i] * t1[j] + t2[i] * t2[j])
                if w != 0.0:
                    _add(A, i, j, n, n, w * Mf)
    return A


def _form_c(spaces, params):
    """Coupling form c(r, sigma): rows vector block, columns stress block."""
    sb = spaces.scalar
    n = sb.n
    E = spaces.E
    C = np.zeros((3 * n, 5 * n))
    for i in range(3):
        for a in range(5):
            blk = np.zeros((n, n))
            for al in range(3):
                if E[a, i, al] != 0.0:
                    blk += (2.0 / 5.0) * E[a, i, al] * sb.vmat(al).T
            _add(C, i, a, n, n, blk)
    for f, fd in enumerate(sb.faces):
        Mf = sb.face_mass(f)
        w = _stress_face_weights(spaces, fd)
        nvec, t1, t2 = fd.frame.n, fd.frame.t1, fd.frame.t2
        for i in range(3):
            for a in range(5):
                coeff = -(3.0 / 20.0) * nvec[i] * w["nn"][a]
                coeff -= (1.0 / 5.0) * (t1[i] * w["nt1"][a] + t2[i] * w["nt2"][a])
                if coeff != 0.0:
                    _add(C, i, a, n, n, coeff * Mf)
    return C


def _stf_grad_coupling(spaces):
    """H[a,k,b,l] = <Stf(E_a otimes e_k), Stf(E_b otimes e_l)> (Frobenius)."""
    P3 = projection_matrix3("Stf", 3)
    E = spaces.E
    C3 = np.zeros((5, 3, 27))
    for a in range(5):
        for k in range(3):
            ek = np.zeros(3)
            ek[k] = 1.0
            dyad = np.einsum("ij,k->ijk", E[a], ek).ravel()
            C3[a, k] = P3 @ dyad
    return np.einsum("akx,blx->akbl", C3, C3)


def _form_d(spaces, params, include_epsilon_term=True):
    """Stress form: rows and columns over the 5-component stf block."""
    sb = spaces.scalar
    n = sb.n
    kn, chi, eps = params.kn, params.chi_tilde, params.epsilon_w
    H = _stf_grad_coupling(spaces)
    D = np.zeros((5 * n, 5 * n))
    for a in range(5):
        for b in range(5):
            blk = np.zeros((n, n))
            for k in range(3):
                for l in range(3):
                    if abs(H[a, k, b, l]) > 1e-15:
                        blk += kn * H[a, k, b, l] * sb.dmat(k, l)
            if a == b:
                blk += 0.5 / kn * sb.mass()
            _add(D, a, b, n, n, blk)
    for f, fd in enumerate(sb.faces):
        Mf = sb.face_mass(f)
        w = _stress_face_weights(spaces, fd)
        w_tot = w["t1t1"] + 0.5 * w["nn"]
        comp = (9.0 / 8.0) * chi * np.outer(w["nn"], w["nn"])
        comp += chi * np.outer(w_tot, w_tot)
        comp += chi * np.outer(w["t1t2"], w["t1t2"])
        comp += (1.0 / chi) * (np.outer(w["nt1"], w["nt1"]) + np.outer(w["nt2"], w["nt2"]))
        if include_epsilon_term:
            comp += eps * chi * np.outer(w["nn"], w["nn"])
        for a in range(5):
            for b in range(5):
                if abs(comp[a, b]) > 1e-15:
                    _add(D, a, b, n, n, comp[a, b] * Mf)
    return D


def _form_b(spaces, params):
    """b(theta, r): rows scalar block, columns vector block."""
    sb = spaces.scalar
    n = sb.n
    B = np.zeros((n, 3 * n))
    for j in range(3):
        B[:, j * n : (j + 1) * n] = sb.vmat(j)
    return B


def _form_e(spaces, params):
    """e(u, psi): rows vector block, columns stress block."""
    sb = spaces.scalar
    n = sb.n
    E = spaces.E
    M = np.zeros((3 * n, 5 * n))
    for i in range(3):
        for a in range(5):
            blk = np.zeros((n, n))
            for al in range(3):
                if E[a, i, al] != 0.0:
                    blk += E[a, i, al] * sb.vmat(al)
            _add(M, i, a, n, n, blk)
    return M


def _form_f(spaces, params):
    """f(p, psi): rows constrained pressure block, columns stress block."""
    sb = spaces.scalar
    n = sb.n
    coeff = params.epsilon_w * params.chi_tilde
    raw = np.zeros((n, 5 * n))
    if coeff != 0.0:
        for f, fd in enumerate(sb.faces):
            Mf = sb.face_mass(f)
            w = _stress_face_weights(spaces, fd)
            for a in range(5):
                if abs(w["nn"][a]) > 1e-15:
                    raw[:, a * n : (a + 1) * n] += coeff * w["nn"][a] * Mf
    return spaces.Cp.T @ raw


def _form_g(spaces, params):
    """g(p, v): rows constrained pressure block, columns vector block."""
    sb = spaces.scalar
    n = sb.n
    raw = np.zeros((n, 3 * n))
    for i in range(3):
        raw[:, i * n : (i + 1) * n] = sb.vmat(i).T
    return spaces.Cp.T @ raw


def _form_h(spaces, params):
    """h(p, q): boundary pressure mass, constrained coordinates."""
    sb = spaces.scalar
    coeff = params.epsilon_w * params.chi_tilde
    raw = np.zeros((sb.n, sb.n))
    if coeff != 0.0:
        for f in range(len(sb.faces)):
            raw += coeff * sb.face_mass(f)
    return spaces.Cp.T @ raw @ spaces.Cp


def _form_dbar(spaces, params):
    """Stress/pressure form with the total-pressure boundary term, assembled directly."""
    sb = spaces.scalar
    n = sb.n
    n_p = spaces.n_p
    eps, chi = params.epsilon_w, params.chi_tilde
    D = np.zeros((5 * n + n_p, 5 * n + n_p))
    D[: 5 * n, : 5 * n] = _form_d(spaces, params, include_epsilon_term=False)
    if eps != 0.0:
        for f, fd in enumerate(sb.faces):
            Mf = sb.face_mass(f)
            w_nn = _stress_face_weights(spaces, fd)["nn"]
            MfC = Mf @ spaces.Cp
            for a in range(5):
                for b in range(5):
                    if abs(w_nn[a] * w_nn[b]) > 1e-15:
                        D[a * n : (a + 1) * n, b * n : (b + 1) * n] += (
                            eps * chi * w_nn[a] * w_nn[b] * Mf
                        )
                D[a * n : (a + 1) * n, 5 * n :] += eps * chi * w_nn[a] * MfC
                D[5 * n :, a * n : (a + 1) * n] += eps * chi * w_nn[a] * MfC.T
            D[5 * n :, 5 * n :] += eps * chi * spaces.Cp.T @ Mf @ spaces.Cp
    return D


def _assemble_A(spaces, params):
    n = spaces.n_scalar
    nV = spaces.n_V
    vb = spaces.v_blocks
    A = np.zeros((nV, nV))
    A[vb["s"], vb["s"]] = _form_a(spaces, params)
    C = _form_c(spaces, params)
    A[vb["sigma"], vb["s"]] += C.T
    A[vb["s"], vb["sigma"]] -= C
    A[vb["sigma"], vb["sigma"]] += _form_d(spaces, params)
    Fm = _form_f(spaces, params)
    A[vb["sigma"], vb["p"]] += Fm.T
    A[vb["p"], vb["sigma"]] += Fm
    A[vb["p"], vb["p"]] += _form_h(spaces, params)
    return A


def _assemble_B(spaces, params):
    qb, vb = spaces.q_blocks, spaces.v_blocks
    B = np.zeros((spaces.n_Q, spaces.n_V))
    B[qb["u"], vb["sigma"]] = -_form_e(spaces, params)
    B[qb["u"], vb["p"]] = -_form_g(spaces, params).T
    B[qb["theta"], vb["s"]] = -_form_b(spaces, params)
    return B


def _assemble_MV(spaces):
    sb = spaces.scalar
    n = sb.n
    h1 = sb.h1()
    M = np.zeros((spaces.n_V, spaces.n_V))
    for a in range(5):
        _add(M, a, a, n, n, h1)
    off = 5 * n
    for i in range(3):
        M[off + i * n : off + (i + 1) * n, off + i * n : off + (i + 1) * n] = h1
    M[spaces.v_blocks["p"], spaces.v_blocks["p"]] = spaces.Cp.T @ h1 @ spaces.Cp
    return M


def _assemble_MQ(spaces):
    sb = spaces.scalar
    n = sb.n
    mass = sb.mass()
    M = np.zeros((spaces.n_Q, spaces.n_Q))
    for i in range(4):
        _add(M, i, i, n, n, mass)
    return M


def assemble_form(form_id: str, spaces: DiscreteSpaces, params: ModelParams) -> np.ndarray:
    """Assemble one bilinear form or norm matrix by identifier."""
    builders = {
        "a": _form_a,
        "b": _form_b,
        "c": _form_c,
        "d": _form_d,
        "e": _form_e,
        "f": _form_f,
        "g": _form_g,
        "h": _form_h,
        "dbar": _form_dbar,
        "A": _assemble_A,
        "B": _assemble_B,
        "MV": lambda sp, pa: _assemble_MV(sp),
        "MQ": lambda sp, pa: _assemble_MQ(sp),
    }
    if form_id not in builders:
        raise ValueError(f"unknown form_id {form_id!r}")
    return builders[form_id](spaces, params)


# -- load functionals --------------------------------------------------------


def assemble_load(
    spaces: DiscreteSpaces,
    params: ModelParams,
    sources: VolumeSources | None = None,
    bdata: BoundaryData | None = None,
):
    """Right-hand sides (F, G) from wall data and volume sources."""
    sources = sources or VolumeSources()
    bdata = bdata or BoundaryData()
    sb = spaces.scalar
    n = sb.n
    chi, eps = params.chi_tilde, params.epsilon_w

    F = np.zeros(spaces.n_V)
    G = np.zeros(spaces.n_Q)
    pts = sb.points
    wq = sb.weights
    m_vals = sources.mass(pts)
    b_vals = sources.body(pts)
    r_vals = sources.energy(pts)

    raw_p = sb.phi.T @ (wq * m_vals)
    for f, fd in enumerate(sb.faces):
        fint = fd.phi.T @ fd.weights
        w = _stress_face_weights(spaces, fd)
        nvec = fd.frame.n
        eff_un = bdata.u_n_w[f] - eps * chi * bdata.p_w[f]
        # wall temperature drives the heat-flux test functions
        for i in range(3):
            F[spaces.v_blocks["s"]][i * n : (i + 1) * n] += -bdata.theta_w[f] * nvec[i] * fint
        # wall velocity and pressure drive the stress test functions
        for a in range(5):
            coeff = (
                bdata.u_t1_w[f] * w["nt1"][a]
                + bdata.u_t2_w[f] * w["nt2"][a]
                + eff_un * w["nn"][a]
            )
            F[spaces.v_blocks["sigma"]][a * n : (a + 1) * n] += -coeff * fint
        raw_p -= eff_un * fint
    F[spaces.v_blocks["p"]] = spaces.Cp.T @ raw_p

    for i in range(3):
        G[spaces.q_blocks["u"]][i * n : (i + 1) * n] = -(sb.phi.T @ (wq * b_vals[:, i]))
    G[spaces.q_blocks["theta"]] = -(sb.phi.T @ (wq * (r_vals - m_vals)))
    return F, G


def assemble_system(
    spaces: DiscreteSpaces,
    params: ModelParams,
    sources: VolumeSources | None = None,
    bdata: BoundaryData | None = None,
) -> MixedSystem:
    """Assemble all matrices and loads of the mixed problem."""
    F, G = assemble_load(spaces, params, sources, bdata)
    return MixedSystem(
        A=_assemble_A(spaces, params),
        B=_assemble_B(spaces, params),
        M_V=_assemble_MV(spaces),
        M_Q=_assemble_MQ(spaces),
        F=F,
        G=G,
        params=params,
        spaces=spaces,
    )


# -- closures and wall-relation residuals ------------------------------------


def _gradients_at(sig, s, dphi):
    """Pointwise gradients from coefficients: Dsigma (q,3,3,3) and Ds (q,3,3)."""
    gs = np.einsum("iI,kqI->qik", s, dphi)
    gsig = np.einsum("aI,kqI->qak", sig, dphi)
    return gsig, gs


def compute_closures(sigma, s, spaces, params, face: int | None = None):
    """Highest-order moments from the regularized closure relations.

    Evaluates m = -2 Kn Stf D sigma, R = -(24/5) Kn stf D s and
    Delta = -12 Kn div s at the volume quadrature points (or at the
    quadrature points of one face), differentiating the polynomial
    basis exactly.
    """
    sb = spaces.scalar
    dphi = sb.dphi if face is None else sb.faces[face].dphi
    gsig, gs = _gradients_at(np.asarray(sigma), np.asarray(s), dphi)
    E = spaces.E
    dsig = np.einsum("qak,aij->qijk", gsig, E)
    P3 = projection_matrix3("Stf", 3)
    nq = dsig.shape[0]
    m3 = -2.0 * params.kn * (dsig.reshape(nq, 27) @ P3.T).reshape(nq, 3, 3, 3)
    P2 = projection_matrix2("stf", 3)
    R2 = -(24.0 / 5.0) * params.kn * (gs.reshape(nq, 9) @ P2.T).reshape(nq, 3, 3)
    delta = -12.0 * params.kn * np.einsum("qii->q", gs)
    return m3, R2, delta


def bc_residuals(U, P, spaces, params, bdata: BoundaryData | None = None):
    """L2 boundary norms of the seven Onsager wall relations.

    The tangential stress and tangential R relations aggregate both
    tangent directions into one norm each. u and theta traces come from
    the discrete polynomial representatives (diagnostic only).
    """
    bdata = bdata or BoundaryData()
    chi, eps = params.chi_tilde, params.epsilon_w
    sig, s, p = spaces.split_V(np.asarray(U))
    u, theta = spaces.split_Q(np.asarray(P))
    sq = {k: 0.0 for k in range(1, 8)}
    for f, fd in enumerate(spaces.faces):
        w = _stress_face_weights(spaces, fd)
        phi = fd.phi
        wq = fd.weights
        nvec, t1, t2 = fd.frame.n, fd.frame.t1, fd.frame.t2
        sig_vals = {key: (w[key] @ sig) @ phi.T for key in w}
        s_comp = {
            "n": (nvec @ s) @ phi.T,
            "t1": (t1 @ s) @ phi.T,
            "t2": (t2 @ s) @ phi.T,
        }
        u_comp = {
            "n": (nvec @ u) @ phi.T,
            "t1": (t1 @ u) @ phi.T,
            "t2": (t2 @ u) @ phi.T,
        }
        p_vals = phi @ p
        th_vals = phi @ theta
        m3, R2, delta = compute_closures(sig, s, spaces, params, face=f)
        m_nnn = np.einsum("qijk,i,j,k->q", m3, nvec, nvec, nvec)
        m_nnt = {
            1: np.einsum("qijk,i,j,k->q", m3, nvec, nvec, t1),
            2: np.einsum("qijk,i,j,k->q", m3, nvec, nvec, t2),
        }
        m_nt1t1 = np.einsum("qijk,i,j,k->q", m3, nvec, t1, t1)
        m_nt1t2 = np.einsum("qijk,i,j,k->q", m3, nvec, t1, t2)
        R_nn = np.einsum("qij,i,j->q", R2, nvec, nvec)
        R_nt = {
            1: np.einsum("qij,i,j->q", R2, nvec, t1),
            2: np.einsum("qij,i,j->q", R2, nvec, t2),
        }

        du = {i: u_comp[f"t{i}"] - getattr(bdata, f"u_t{i}_w")[f] for i in (1, 2)}
        r1 = (u_comp["n"] - bdata.u_n_w[f]) - eps * chi * (
            (p_vals - bdata.p_w[f]) + sig_vals["nn"]
        )
        r2 = [
            sig_vals[f"nt{i}"] - chi * (du[i] + 0.2 * s_comp[f"t{i}"] + m_nnt[i])
            for i in (1, 2)
        ]
        r3 = [
            R_nt[i] - chi * (-du[i] + 2.2 * s_comp[f"t{i}"] - m_nnt[i])
            for i in (1, 2)
        ]
        dth = th_vals - bdata.theta_w[f]
        r4 = s_comp["n"] - chi * (
            2.0 * dth + 0.5 * sig_vals["nn"] + 0.4 * R_nn + (2.0 / 15.0) * delta
        )
        r5 = m_nnn - chi * (
            -0.4 * dth + 1.4 * sig_vals["nn"] - 0.08 * R_nn - (2.0 / 75.0) * delta
        )
        r6 = (0.5 * m_nnn + m_nt1t1) - chi * (0.5 * sig_vals["nn"] + sig_vals["t1t1"])
        r7 = m_nt1t2 - chi * sig_vals["t1t2"]

        sq[1] += np.sum(wq * r1**2)
        sq[2] += sum(np.sum(wq * r**2) for r in r2)
        sq[3] += sum(np.sum(wq * r**2) for r in r3)
        sq[4] += np.sum(wq * r4**2)
        sq[5] += np.sum(wq * r5**2)
        sq[6] += np.sum(wq * r6**2)
        sq[7] += np.sum(wq * r7**2)
    keys = [
        "normal_velocity",
        "tangential_stress",
        "tangential_R",
        "normal_heat_flux",
        "m_nnn",
        "m_nnn_t1t1",
        "m_nt1t2",
    ]
    return {k: float(np.sqrt(sq[i + 1])) for i, k in enumerate(keys)}
