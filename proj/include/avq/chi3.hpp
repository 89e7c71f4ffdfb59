#pragma once
// Third-order susceptibility chi^(3)_zzzz(t, tau, 0) via the double-AVQDS CUL
// circuit: stage 1 prepares (|1> P1 P0 |G> + i |0> P4 P5 |G>)/sqrt(2) and
// evolves it to tau, stage 2 applies X and controlled-P3 and evolves over the
// t grid, and the ancilla readout yields
// Im <G| P0 P1 U_tau^+ U_t^+ P2 U_t P3 U_tau P4 P5 |G> per term. The term
// table enumerates the three distinct bracket families (the fourth coincides
// with the third for zzzz), circuits are deduplicated by the signed products
// P1 P0 and P4 P5 together with P3, and readouts differing only in P2 share
// one trajectory. Exact-diagonalization oracles cover the time-domain grid,
// the pipeline with exact propagation, and the six-Lorentzian 2D spectrum.

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ansatz.hpp"
#include "core.hpp"
#include "exact.hpp"
#include "greens.hpp"
#include "models.hpp"
#include "pauli.hpp"
#include "resources.hpp"
#include "spectral.hpp"
#include "statevector.hpp"
#include "timeseries.hpp"
#include "variational.hpp"

namespace avq {

// ----------------------------------------------------------------- term table

struct Chi3TermSpec {
  std::array<PauliWord, 6> P;  // gate assignment P0..P5, system register
  int j = 0, k = 0, l = 0, m = 0;  // site indices
  int p = 0, q = 0, r = 0, s = 0;  // encoding-term indices
  int family = 1;                  // 1, 2, 3 (3 carries the folded 4th term)
  double weight = 0;               // sign * multiplicity * eta product
};

// S^z_site = sum_p eta_p word_p with real eta
inline std::vector<std::pair<double, PauliWord>> spin_z_terms(int site, int N) {
  std::vector<std::pair<double, PauliWord>> out;
  const PauliSum sz = spin_operator('z', site, N);
  for (const auto& t : sz.terms()) {
    if (std::abs(t.coeff.imag()) > 1e-14)
      throw Error("spin-z decomposition has a complex coefficient");
    out.push_back({t.coeff.real(), t.word});
  }
  return out;
}

// zzzz enumeration over sites, encoding terms, and bracket families
inline std::vector<Chi3TermSpec> chi3_term_specs(int N) {
  const int nq = 2 * N;
  PauliWord id;
  id.nq = nq;
  std::vector<std::vector<std::pair<double, PauliWord>>> sz;
  sz.reserve(N);
  for (int site = 0; site < N; ++site) sz.push_back(spin_z_terms(site, N));
  const int nz = static_cast<int>(sz[0].size());

  std::vector<Chi3TermSpec> out;
  for (int family = 1; family <= 3; ++family)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < N; ++l)
          for (int m = 0; m < N; ++m)
            for (int p = 0; p < nz; ++p)
              for (int q = 0; q < nz; ++q)
                for (int r = 0; r < nz; ++r)
                  for (int s = 0; s < nz; ++s) {
                    Chi3TermSpec spec;
                    spec.j = j;
                    spec.k = k;
                    spec.l = l;
                    spec.m = m;
                    spec.p = p;
                    spec.q = q;
                    spec.r = r;
                    spec.s = s;
                    spec.family = family;
                    const double eta = sz[j][p].first * sz[k][q].first *
                                       sz[l][r].first * sz[m][s].first;
                    const PauliWord& Pa = sz[j][p].second;
                    const PauliWord& Pb = sz[k][q].second;
                    const PauliWord& Pg = sz[l][r].second;
                    const PauliWord& Pd = sz[m][s].second;
                    spec.P = {id, id, Pa, Pb, Pg, Pd};
                    if (family == 1) {
                      spec.weight = eta;
                    } else if (family == 2) {
                      spec.P = {Pd, Pg, Pa, Pb, id, id};
                      spec.weight = eta;
                    } else {
                      spec.P = {id, Pg, Pa, Pb, Pd, id};
                      spec.weight = -2.0 * eta;
                    }
                    out.push_back(spec);
                  }
  return out;
}

// ------------------------------------------------------------- circuit prefix

namespace detail {

inline int phase_code(cplx ph) {
  for (int k = 0; k < 4; ++k)
    if (std::abs(ph - phase_from_exponent(k)) < 1e-12) return k;
  throw Error("word product phase is not a power of i");
}

inline void append_x(Ansatz& a, int qubit) {
  FixedGate g;
  g.kind = FixedGate::Kind::pauli;
  g.word.nq = a.qubit_count();
  g.word.x = 1ull << qubit;
  a.append_fixed(g);
}

inline void append_cword(Ansatz& a, int control, const PauliWord& w) {
  FixedGate g;
  g.kind = FixedGate::Kind::controlled_pauli;
  g.word = widen_word(w, a.qubit_count());
  g.qubit = control;
  g.control_value = 1;
  a.append_fixed(g);
}

}  // namespace detail

// H, S, c-P5, c-P4, X, c-P0, c-P1 on the joint register, preparing
// (|1> P1 P0 |G> + i |0> P4 P5 |G>)/sqrt(2); with `simplify`, identity gates
// are dropped and equal P4, P0 merge into one uncontrolled P0
inline void append_chi3_prefix(Ansatz& a, const Chi3TermSpec& spec,
                               bool simplify = true) {
  const int anc = a.qubit_count() - 1;
  for (const PauliWord& w : spec.P)
    if (w.nq != anc) throw Error("chi3 gate register mismatch");
  FixedGate g;
  g.kind = FixedGate::Kind::hadamard;
  g.qubit = anc;
  a.append_fixed(g);
  g.kind = FixedGate::Kind::sgate;
  a.append_fixed(g);

  const auto& P = spec.P;
  if (!simplify) {
    detail::append_cword(a, anc, P[5]);
    detail::append_cword(a, anc, P[4]);
    detail::append_x(a, anc);
    detail::append_cword(a, anc, P[0]);
    detail::append_cword(a, anc, P[1]);
    return;
  }
  if (!P[4].is_identity() && P[4] == P[0]) {
    // c-P4 before X and c-P0 after X hit complementary branches
    if (!P[5].is_identity()) detail::append_cword(a, anc, P[5]);
    detail::append_x(a, anc);
    FixedGate u;
    u.kind = FixedGate::Kind::pauli;
    u.word = widen_word(P[0], a.qubit_count());
    a.append_fixed(u);
    if (!P[1].is_identity()) detail::append_cword(a, anc, P[1]);
    return;
  }
  if (!P[5].is_identity()) detail::append_cword(a, anc, P[5]);
  if (!P[4].is_identity()) detail::append_cword(a, anc, P[4]);
  detail::append_x(a, anc);
  if (!P[0].is_identity()) detail::append_cword(a, anc, P[0]);
  if (!P[1].is_identity()) detail::append_cword(a, anc, P[1]);
}

// ---------------------------------------------------------------- readout

// Im value from a joint state (|0> A + i |1> B)/sqrt(2): direct branch form
// -2 Re<b0|P2 b1> checked against the shell X, c-P2, H giving 2 p1 - 1
inline double chi3_readout(const StateVector& joint, const PauliWord& p2,
                           double tol = 1e-9) {
  return -detail::checked_readout(joint, p2, tol);
}

// ------------------------------------------------------------------ dedup

struct Chi3ReadoutSlot {
  PauliWord p2;
  std::vector<std::size_t> term_indices;  // into Chi3Plan::terms
};

struct Chi3Trajectory {
  Chi3TermSpec rep;  // realizes the shared signed products
  PauliWord p3;
  int stage1_group = 0;  // trajectories sharing prod10 and prod45
  std::vector<Chi3ReadoutSlot> readouts;
};

struct Chi3Plan {
  int N = 0;
  std::vector<Chi3TermSpec> terms;
  std::vector<Chi3Trajectory> trajectories;
  std::vector<std::pair<int, int>> term_slot;  // (trajectory, readout) per term
  int stage1_count = 0;
  int series_count = 0;
};

inline Chi3Plan chi3_plan(int N) {
  Chi3Plan plan;
  plan.N = N;
  plan.terms = chi3_term_specs(N);
  plan.term_slot.resize(plan.terms.size());

  using Stage1Key = std::tuple<int, std::uint64_t, std::uint64_t, int,
                               std::uint64_t, std::uint64_t>;
  using Stage2Key =
      std::tuple<int, std::uint64_t, std::uint64_t, int, std::uint64_t,
                 std::uint64_t, std::uint64_t, std::uint64_t>;
  std::map<Stage1Key, int> stage1;
  std::map<Stage2Key, int> stage2;

  for (std::size_t ti = 0; ti < plan.terms.size(); ++ti) {
    const Chi3TermSpec& spec = plan.terms[ti];
    const PhasedWord prod10 = multiply(spec.P[1], spec.P[0]);
    const PhasedWord prod45 = multiply(spec.P[4], spec.P[5]);
    const Stage1Key k1{detail::phase_code(prod10.phase), prod10.word.x,
                       prod10.word.z, detail::phase_code(prod45.phase),
                       prod45.word.x, prod45.word.z};
    const Stage2Key k2{std::get<0>(k1), std::get<1>(k1), std::get<2>(k1),
                       std::get<3>(k1), std::get<4>(k1), std::get<5>(k1),
                       spec.P[3].x,     spec.P[3].z};
    auto s1 = stage1.emplace(k1, static_cast<int>(stage1.size()));
    auto s2 = stage2.emplace(k2, static_cast<int>(plan.trajectories.size()));
    if (s2.second) {
      Chi3Trajectory traj;
      traj.rep = spec;
      traj.p3 = spec.P[3];
      traj.stage1_group = s1.first->second;
      plan.trajectories.push_back(traj);
    }
    Chi3Trajectory& traj = plan.trajectories[s2.first->second];
    int slot = -1;
    for (std::size_t ri = 0; ri < traj.readouts.size(); ++ri)
      if (traj.readouts[ri].p2 == spec.P[2]) slot = static_cast<int>(ri);
    if (slot < 0) {
      slot = static_cast<int>(traj.readouts.size());
      traj.readouts.push_back({spec.P[2], {}});
    }
    traj.readouts[slot].term_indices.push_back(ti);
    plan.term_slot[ti] = {s2.first->second, slot};
  }
  plan.stage1_count = static_cast<int>(stage1.size());
  for (const auto& traj : plan.trajectories)
    plan.series_count += static_cast<int>(traj.readouts.size());
  return plan;
}

// ----------------------------------------------------- exact-propagation path

// Im <G| P0 P1 e^{iH(t+tau)} P2 e^{-iHt} P3 e^{-iHtau} P4 P5 |G> on the
// physical register
inline double chi3_exact_value(const EigenSystem& es, const StateVector& G,
                               const Chi3TermSpec& rep, const PauliWord& p2,
                               double t, double tau) {
  StateVector right = apply_pauli(G, rep.P[5]);
  apply_pauli_inplace(right, rep.P[4]);
  right = exact_evolve(right, es, tau);
  apply_pauli_inplace(right, rep.P[3]);
  right = exact_evolve(right, es, t);
  apply_pauli_inplace(right, p2);
  StateVector left = apply_pauli(G, rep.P[0]);
  apply_pauli_inplace(left, rep.P[1]);
  left = exact_evolve(left, es, t + tau);
  return inner(left, right).imag();
}

// CUL assembly with AVQDS replaced by exact evolution (pipeline isolation):
// chi(t, tau) = (2/N) sum_terms weight * I_term on the given meshes
inline RealGrid2D chi3_assembly_exact(const PauliSum& H, int N,
                                      const std::vector<double>& ts,
                                      const std::vector<double>& taus) {
  const int nq = 2 * N;
  const auto es = diagonalize(H, nq);
  const StateVector G = ground_state(*es);
  const Chi3Plan plan = chi3_plan(N);

  RealGrid2D grid;
  grid.init(ts, taus);
  for (const Chi3Trajectory& traj : plan.trajectories) {
    std::vector<double> wsum(traj.readouts.size(), 0.0);
    for (std::size_t ri = 0; ri < traj.readouts.size(); ++ri)
      for (std::size_t ti : traj.readouts[ri].term_indices)
        wsum[ri] += plan.terms[ti].weight;
    for (std::size_t row = 0; row < taus.size(); ++row) {
      if (taus[row] < 0) continue;
      StateVector seed = apply_pauli(G, traj.rep.P[5]);
      apply_pauli_inplace(seed, traj.rep.P[4]);
      seed = exact_evolve(seed, *es, taus[row]);
      apply_pauli_inplace(seed, traj.p3);
      StateVector bra0 = apply_pauli(G, traj.rep.P[0]);
      apply_pauli_inplace(bra0, traj.rep.P[1]);
      for (std::size_t col = 0; col < ts.size(); ++col) {
        if (ts[col] < 0) continue;
        const StateVector ket = exact_evolve(seed, *es, ts[col]);
        const StateVector bra = exact_evolve(bra0, *es, ts[col] + taus[row]);
        for (std::size_t ri = 0; ri < traj.readouts.size(); ++ri) {
          const StateVector pket = apply_pauli(ket, traj.readouts[ri].p2);
          grid.v(row, col) += wsum[ri] * inner(bra, pket).imag();
        }
      }
    }
  }
  grid.v *= 2.0 / N;
  return grid;
}

// --------------------------------------------------------------- eigen oracle

namespace detail {

struct Chi3Triple {
  int mu, nu, la;
  cplx S;
};

inline std::pair<std::shared_ptr<const EigenSystem>, std::vector<Chi3Triple>>
chi3_triples(const PauliSum& H, int N) {
  const int nq = 2 * N;
  const auto es = diagonalize(H, nq);
  const Eigen::MatrixXcd Mz =
      es->evecs.adjoint() * pauli_to_matrix(total_sz(N), nq) * es->evecs;
  const long D = Mz.rows();
  std::vector<Chi3Triple> trips;
  for (int mu = 0; mu < D; ++mu) {
    if (std::abs(Mz(0, mu)) < 1e-13) continue;
    for (int nu = 0; nu < D; ++nu) {
      if (std::abs(Mz(mu, nu)) < 1e-13) continue;
      for (int la = 0; la < D; ++la) {
        const cplx S = Mz(0, mu) * Mz(mu, nu) * Mz(nu, la) * Mz(la, 0);
        if (std::abs(S) > 1e-13) trips.push_back({mu, nu, la, S});
      }
    }
  }
  return {es, trips};
}

}  // namespace detail

// chi(t, tau) = (2/N) sum_{mu nu la} Im[S (e1 + e2 - 2 e3)] with
// e1 = e^{iE0(t+tau) - iEmu t - iEnu tau}, e2 = e^{iEnu(t+tau) - iEla t -
// iE0 tau}, e3 = e^{iEmu(t+tau) - iEnu t - iEla tau}
inline RealGrid2D chi3_exact(const PauliSum& H, int N,
                             const std::vector<double>& ts,
                             const std::vector<double>& taus) {
  const auto [es, trips] = detail::chi3_triples(H, N);
  const Eigen::VectorXd& E = es->evals;
  const long D = E.size();

  RealGrid2D grid;
  grid.init(ts, taus);
  std::vector<cplx> ext(D), exu(D);
  for (std::size_t row = 0; row < taus.size(); ++row) {
    if (taus[row] < 0) continue;
    for (long n = 0; n < D; ++n) exu[n] = std::exp(cplx{0, -E(n) * taus[row]});
    for (std::size_t col = 0; col < ts.size(); ++col) {
      if (ts[col] < 0) continue;
      for (long n = 0; n < D; ++n) ext[n] = std::exp(cplx{0, -E(n) * ts[col]});
      double acc = 0;
      for (const auto& tr : trips) {
        const cplx e1 = std::conj(ext[0] * exu[0]) * ext[tr.mu] * exu[tr.nu];
        const cplx e2 = std::conj(ext[tr.nu] * exu[tr.nu]) * ext[tr.la] * exu[0];
        const cplx e3 =
            std::conj(ext[tr.mu] * exu[tr.mu]) * ext[tr.nu] * exu[tr.la];
        acc += (tr.S * (e1 + e2 - 2.0 * e3)).imag();
      }
      grid.v(row, col) += acc;
    }
  }
  grid.v *= 2.0 / N;
  return grid;
}

// six-Lorentzian-product frequency-domain oracle with finite broadening:
// chi(wt, wtau) = (i/N) sum S [L0mu(wt)L0nu(wtau) - Lmunu(wt)L0nu(wtau)
//   - 2 Lmunu(wt)Lmula(wtau) + 2 Lnula(wt)Lmula(wtau)
//   + Lnula(wt)Lnu0(wtau) - Lla0(wt)Lnu0(wtau)],  Lab(w) = 1/(w+ie+Ea-Eb)
inline ComplexGrid2D chi3_spectrum_oracle(const PauliSum& H, int N,
                                          const std::vector<double>& wts,
                                          const std::vector<double>& wtaus,
                                          double eps) {
  const auto [es, trips] = detail::chi3_triples(H, N);
  const Eigen::VectorXd& E = es->evals;

  ComplexGrid2D out;
  out.init(wts, wtaus);
  auto L = [&](double w, int a, int b) {
    return 1.0 / cplx{w + E(a) - E(b), eps};
  };
  for (std::size_t row = 0; row < wtaus.size(); ++row) {
    const double wu = wtaus[row];
    for (std::size_t col = 0; col < wts.size(); ++col) {
      const double wt = wts[col];
      cplx acc{0, 0};
      for (const auto& tr : trips) {
        const cplx bracket =
            L(wt, 0, tr.mu) * L(wu, 0, tr.nu) -
            L(wt, tr.mu, tr.nu) * L(wu, 0, tr.nu) -
            2.0 * L(wt, tr.mu, tr.nu) * L(wu, tr.mu, tr.la) +
            2.0 * L(wt, tr.nu, tr.la) * L(wu, tr.mu, tr.la) +
            L(wt, tr.nu, tr.la) * L(wu, tr.nu, 0) -
            L(wt, tr.la, 0) * L(wu, tr.nu, 0);
        acc += tr.S * bracket;
      }
      out.v(row, col) = cplx{0, 1.0 / N} * acc;
    }
  }
  return out;
}

// ------------------------------------------------------------- 2D transform

// Pade transform along t for each tau row, then along tau for each wt column
// (or the transpose order); pole flags poison the dependent axis
inline ComplexGrid2D chi3_2d_spectrum(const RealGrid2D& grid, double eps_t,
                                      double eps_tau,
                                      const std::vector<double>& wts,
                                      const std::vector<double>& wtaus,
                                      bool t_first = true) {
  if (grid.t.size() < 2 || grid.tau.size() < 2)
    throw Error("2D transform needs at least two samples per axis");
  if (!is_uniform_mesh(grid.t) || !is_uniform_mesh(grid.tau))
    throw Error("2D transform requires uniform meshes");
  const double dt = grid.t[1] - grid.t[0];
  const double du = grid.tau[1] - grid.tau[0];
  const long R = static_cast<long>(grid.tau.size());
  const long C = static_cast<long>(grid.t.size());

  ComplexGrid2D out;
  out.init(wts, wtaus);

  if (t_first) {
    std::vector<PadeApproximant> rows;
    rows.reserve(R);
    for (long r = 0; r < R; ++r) {
      std::vector<cplx> c(C);
      for (long n = 0; n < C; ++n) c[n] = cplx{grid.v(r, n), 0};
      rows.push_back(fit_pade(c, dt));
    }
    for (std::size_t wc = 0; wc < wts.size(); ++wc) {
      std::vector<cplx> col(R);
      bool poisoned = false;
      for (long r = 0; r < R; ++r) {
        const PadeValue v = eval_pade(rows[r], wts[wc], eps_t);
        col[r] = v.value;
        poisoned = poisoned || v.pole;
      }
      const PadeApproximant pu = fit_pade(col, du);
      for (std::size_t wr = 0; wr < wtaus.size(); ++wr) {
        const PadeValue v = eval_pade(pu, wtaus[wr], eps_tau);
        out.v(wr, wc) = v.value;
        out.pole(wr, wc) = (poisoned || v.pole) ? 1 : 0;
      }
    }
  } else {
    std::vector<PadeApproximant> cols;
    cols.reserve(C);
    for (long n = 0; n < C; ++n) {
      std::vector<cplx> c(R);
      for (long r = 0; r < R; ++r) c[r] = cplx{grid.v(r, n), 0};
      cols.push_back(fit_pade(c, du));
    }
    for (std::size_t wr = 0; wr < wtaus.size(); ++wr) {
      std::vector<cplx> row(C);
      bool poisoned = false;
      for (long n = 0; n < C; ++n) {
        const PadeValue v = eval_pade(cols[n], wtaus[wr], eps_tau);
        row[n] = v.value;
        poisoned = poisoned || v.pole;
      }
      const PadeApproximant pt = fit_pade(row, dt);
      for (std::size_t wc = 0; wc < wts.size(); ++wc) {
        const PadeValue v = eval_pade(pt, wts[wc], eps_t);
        out.v(wr, wc) = v.value;
        out.pole(wr, wc) = (poisoned || v.pole) ? 1 : 0;
      }
    }
  }
  return out;
}

struct Peak2D {
  double wt = 0, wtau = 0;
  double height = 0;
};

// strict local maxima of |v| at interior grid points, at least rel_threshold
// of the global maximum, sorted by descending height
inline std::vector<Peak2D> find_peaks_2d(const ComplexGrid2D& g,
                                         double rel_threshold = 0.1) {
  const long R = g.v.rows(), C = g.v.cols();
  double top = 0;
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) top = std::max(top, std::abs(g.v(r, c)));
  std::vector<Peak2D> out;
  for (long r = 1; r + 1 < R; ++r)
    for (long c = 1; c + 1 < C; ++c) {
      const double h = std::abs(g.v(r, c));
      if (h < rel_threshold * top) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1 && is_max; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (std::abs(g.v(r + dr, c + dc)) >= h) is_max = false;
        }
      if (is_max) out.push_back({g.wt[c], g.wtau[r], h});
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const Peak2D& a, const Peak2D& b) {
                     return a.height > b.height;
                   });
  return out;
}

// ----------------------------------------------------------- AVQDS pipeline

// The spin-1 Hamiltonian carries weight-3 and weight-4 words while the
// dynamics pool is 1- and 2-local, so the entangled two-branch states of
// the second evolution stage have an irreducible McLachlan floor above any
// tight cut; saturated steps are accepted by default for this circuit
// family.
inline AvqdsConfig chi3_default_avqds() {
  AvqdsConfig cfg;
  cfg.allow_saturation = true;
  return cfg;
}

struct Chi3Config {
  AvqdsConfig avqds = chi3_default_avqds();
  bool oracle = true;
  double readout_tol = 1e-9;
  bool simplify = true;
};

struct Chi3ReadoutSeries {
  PauliWord p2;
  std::vector<double> I;  // aligned with the t grid
};

struct Chi3Trace {
  int trajectory = -1;  // index into Chi3Plan::trajectories, -1 standalone
  double tau = 0;
  std::vector<double> t;
  std::vector<Chi3ReadoutSeries> readouts;
  std::vector<TrajectoryRecord> stage1_records;  // clock carries tau progress
  std::vector<TrajectoryRecord> stage2_records;  // t = 0 row prepended
  double stage1_infidelity = 0;
  double max_infidelity = 0;
  long shell_cnots = 0;  // fixed controlled-word cost, readout excluded
};

namespace detail {

inline TrajectoryRecord snapshot_record(const Ansatz& a, const PauliSum& Hj,
                                        double t, double tikhonov) {
  const EomAssembly as = assemble_eom(a, Hj);
  const EomSolution sol = solve_eom(as, EomMode::real_time, tikhonov);
  TrajectoryRecord rec;
  rec.t = t;
  rec.dt = 0;
  rec.n_theta = a.rotation_count();
  rec.L2 = sol.L2;
  rec.energy = as.energy;
  rec.var_H = as.variance;
  rec.cnots = cnot_count(a);
  rec.depth = circuit_depth(a);
  return rec;
}

inline void check_time_grid(const std::vector<double>& g, const char* what) {
  if (g.empty()) throw Error(std::string(what) + " grid is empty");
  if (g.front() < 0)
    throw Error(std::string(what) + " grid must be nonnegative");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (g[i] <= g[i - 1])
      throw Error(std::string(what) + " grid must be increasing");
}

struct Chi3Stage1 {
  Ansatz joint;
  std::vector<TrajectoryRecord> records;
  double infidelity = 0;
};

// widen the ground circuit, append the term prefix, AVQDS-evolve to tau
inline Chi3Stage1 chi3_stage1_run(
    const Ansatz& ground, const Chi3TermSpec& spec, const PauliSum& Hj,
    const std::vector<PauliWord>& pool_j, double tau, const Chi3Config& cfg,
    const std::shared_ptr<const EigenSystem>& es_joint) {
  Chi3Stage1 out{widen_ansatz(ground), {}, 0};
  append_chi3_prefix(out.joint, spec, cfg.simplify);
  out.records.push_back(
      snapshot_record(out.joint, Hj, 0.0, cfg.avqds.tikhonov));
  if (tau <= 0) return out;
  EvolvingReference ref;
  if (cfg.oracle) ref = EvolvingReference(es_joint, out.joint.prepare());
  AvqdsDriver driver(out.joint, Hj, pool_j, cfg.avqds, Segment::tau);
  try {
    driver.advance_to(tau);
  } catch (const Error& e) {
    throw Error("chi3 stage 1 (tau=" + std::to_string(tau) +
                "): " + e.what());
  }
  if (cfg.oracle) out.infidelity = ref.infidelity(out.joint.prepare(), tau);
  out.records.insert(out.records.end(), driver.records().begin(),
                     driver.records().end());
  return out;
}

// stage 2 on a copy of the stage-1 terminal circuit: X and controlled-P3,
// then every readout word sampled at each grid time
inline Chi3Trace chi3_stage2_run(
    Ansatz joint, const PauliSum& Hj, const std::vector<PauliWord>& pool_j,
    const PauliWord& p3, const std::vector<PauliWord>& p2s, double tau,
    const std::vector<double>& ts, const Chi3Config& cfg,
    const std::shared_ptr<const EigenSystem>& es_joint) {
  const int anc = joint.qubit_count() - 1;
  Chi3Trace trace;
  trace.tau = tau;
  trace.t = ts;

  append_x(joint, anc);
  if (!cfg.simplify || !p3.is_identity()) append_cword(joint, anc, p3);
  trace.shell_cnots = shell_cnot_cost(joint);

  EvolvingReference ref;
  if (cfg.oracle) ref = EvolvingReference(es_joint, joint.prepare());
  trace.stage2_records.push_back(
      snapshot_record(joint, Hj, 0.0, cfg.avqds.tikhonov));
  for (const PauliWord& p2 : p2s) trace.readouts.push_back({p2, {}});

  AvqdsDriver driver(joint, Hj, pool_j, cfg.avqds, Segment::t);
  try {
    for (double t : ts) {
      driver.advance_to(t);
      const StateVector s = joint.prepare();
      if (cfg.oracle)
        trace.max_infidelity =
            std::max(trace.max_infidelity, ref.infidelity(s, t));
      for (auto& r : trace.readouts)
        r.I.push_back(chi3_readout(s, r.p2, cfg.readout_tol));
    }
  } catch (const Error& e) {
    throw Error("chi3 stage 2 (tau=" + std::to_string(tau) +
                "): " + e.what());
  }
  trace.stage2_records.insert(trace.stage2_records.end(),
                              driver.records().begin(),
                              driver.records().end());
  return trace;
}

}  // namespace detail

// single-term pipeline: one stage-1 run to tau, one stage-2 trajectory over
// the t grid, the term's own P2 as the only readout slot
inline Chi3Trace chi3_term_cul(const PauliSum& H, const Ansatz& ground,
                               const Chi3TermSpec& spec, double tau,
                               const std::vector<double>& t_grid,
                               const Chi3Config& cfg) {
  const int nq = ground.qubit_count();
  for (const PauliWord& w : spec.P)
    if (w.nq != nq) throw Error("chi3 gate register mismatch");
  if (tau < 0) throw Error("tau must be nonnegative");
  detail::check_time_grid(t_grid, "t");
  const int nqj = nq + 1;
  const PauliSum Hj = embed(H, nqj);
  std::vector<PauliWord> pool_j;
  for (const PauliWord& w : pool_spin_dyn(nq))
    pool_j.push_back(widen_word(w, nqj));
  std::shared_ptr<const EigenSystem> es_joint;
  if (cfg.oracle) es_joint = diagonalize(Hj, nqj);

  detail::Chi3Stage1 s1 =
      detail::chi3_stage1_run(ground, spec, Hj, pool_j, tau, cfg, es_joint);
  Chi3Trace trace =
      detail::chi3_stage2_run(std::move(s1.joint), Hj, pool_j, spec.P[3],
                              {spec.P[2]}, tau, t_grid, cfg, es_joint);
  trace.stage1_records = std::move(s1.records);
  trace.stage1_infidelity = s1.infidelity;
  return trace;
}

inline TimeSeries chi3_trace_series(const Chi3Trace& trace,
                                    std::size_t slot = 0) {
  if (slot >= trace.readouts.size()) throw Error("readout slot out of range");
  TimeSeries s;
  for (std::size_t i = 0; i < trace.t.size(); ++i)
    s.push(trace.t[i], cplx{trace.readouts[slot].I[i], 0});
  return s;
}

struct Chi3Run {
  Chi3Plan plan;
  std::vector<double> t_grid, tau_grid;
  std::vector<Chi3Trace> traces;  // tau-major: tau index * trajectories + traj
};

// full CUL sweep: per tau sample, one fresh stage-1 run per signed-product
// group, then one stage-2 trajectory per distinct P3 with shared readouts
inline Chi3Run chi3_run_cul(const PauliSum& H, const Ansatz& ground, int N,
                            const std::vector<double>& t_grid,
                            const std::vector<double>& tau_grid,
                            const Chi3Config& cfg) {
  const int nq = 2 * N;
  if (ground.qubit_count() != nq) throw Error("ground register mismatch");
  detail::check_time_grid(t_grid, "t");
  detail::check_time_grid(tau_grid, "tau");
  const int nqj = nq + 1;
  const PauliSum Hj = embed(H, nqj);
  std::vector<PauliWord> pool_j;
  for (const PauliWord& w : pool_spin_dyn(nq))
    pool_j.push_back(widen_word(w, nqj));
  std::shared_ptr<const EigenSystem> es_joint;
  if (cfg.oracle) es_joint = diagonalize(Hj, nqj);

  Chi3Run run;
  run.plan = chi3_plan(N);
  run.t_grid = t_grid;
  run.tau_grid = tau_grid;

  std::vector<std::vector<int>> groups;
  for (std::size_t gi = 0; gi < run.plan.trajectories.size(); ++gi) {
    const int g = run.plan.trajectories[gi].stage1_group;
    if (g >= static_cast<int>(groups.size())) groups.resize(g + 1);
    groups[g].push_back(static_cast<int>(gi));
  }

  run.traces.resize(tau_grid.size() * run.plan.trajectories.size());
  for (std::size_t ui = 0; ui < tau_grid.size(); ++ui) {
    const double tau = tau_grid[ui];
    for (const std::vector<int>& group : groups) {
      const detail::Chi3Stage1 s1 = detail::chi3_stage1_run(
          ground, run.plan.trajectories[group[0]].rep, Hj, pool_j, tau, cfg,
          es_joint);
      for (int gi : group) {
        const Chi3Trajectory& traj = run.plan.trajectories[gi];
        std::vector<PauliWord> p2s;
        for (const auto& slot : traj.readouts) p2s.push_back(slot.p2);
        Chi3Trace trace =
            detail::chi3_stage2_run(s1.joint, Hj, pool_j, traj.p3, p2s, tau,
                                    t_grid, cfg, es_joint);
        trace.trajectory = gi;
        trace.stage1_records = s1.records;
        trace.stage1_infidelity = s1.infidelity;
        run.traces[ui * run.plan.trajectories.size() + gi] = std::move(trace);
      }
    }
  }
  return run;
}

// ------------------------------------------------------------------ assembly

namespace detail {

// bilinear resample of a (record tau x record t) value table
inline Eigen::MatrixXd resample_grid(const std::vector<double>& t_rec,
                                     const std::vector<double>& tau_rec,
                                     const Eigen::MatrixXd& v,
                                     const std::vector<double>& t_mesh,
                                     const std::vector<double>& tau_mesh) {
  const long R = static_cast<long>(tau_rec.size());
  Eigen::MatrixXd rowpass(R, static_cast<long>(t_mesh.size()));
  for (long r = 0; r < R; ++r) {
    TimeSeries s;
    s.t = t_rec;
    for (long n = 0; n < v.cols(); ++n) s.v.push_back(cplx{v(r, n), 0});
    for (std::size_t c = 0; c < t_mesh.size(); ++c)
      rowpass(r, static_cast<long>(c)) = interp_linear(s, t_mesh[c]).real();
  }
  Eigen::MatrixXd out(static_cast<long>(tau_mesh.size()),
                      static_cast<long>(t_mesh.size()));
  for (long c = 0; c < out.cols(); ++c) {
    TimeSeries s;
    s.t = tau_rec;
    for (long r = 0; r < R; ++r) s.v.push_back(cplx{rowpass(r, c), 0});
    for (std::size_t r = 0; r < tau_mesh.size(); ++r)
      out(static_cast<long>(r), c) = interp_linear(s, tau_mesh[r]).real();
  }
  return out;
}

}  // namespace detail

// chi(t, tau) on the target meshes: every deduplicated contribution is
// interpolated from its record grid, then summed with term weights and 2/N
inline RealGrid2D assemble_chi3(const Chi3Run& run,
                                const std::vector<double>& t_mesh,
                                const std::vector<double>& tau_mesh) {
  const int ntraj = static_cast<int>(run.plan.trajectories.size());
  if (run.traces.size() != run.tau_grid.size() * run.plan.trajectories.size())
    throw Error("missing term series");
  for (const Chi3Trace& trace : run.traces) {
    if (trace.trajectory < 0 || trace.trajectory >= ntraj)
      throw Error("missing term series");
    if (trace.readouts.size() !=
        run.plan.trajectories[trace.trajectory].readouts.size())
      throw Error("missing term series");
    for (const Chi3ReadoutSeries& r : trace.readouts)
      if (r.I.size() != run.t_grid.size())
        throw Error("missing term series");
  }
  RealGrid2D grid;
  grid.init(t_mesh, tau_mesh);
  for (int gi = 0; gi < ntraj; ++gi) {
    const Chi3Trajectory& traj = run.plan.trajectories[gi];
    for (std::size_t ri = 0; ri < traj.readouts.size(); ++ri) {
      double wsum = 0;
      for (std::size_t ti : traj.readouts[ri].term_indices)
        wsum += run.plan.terms[ti].weight;
      Eigen::MatrixXd rec(static_cast<long>(run.tau_grid.size()),
                          static_cast<long>(run.t_grid.size()));
      for (std::size_t ui = 0; ui < run.tau_grid.size(); ++ui) {
        const Chi3Trace& trace = run.traces[ui * ntraj + gi];
        for (std::size_t n = 0; n < run.t_grid.size(); ++n)
          rec(static_cast<long>(ui), static_cast<long>(n)) =
              trace.readouts[ri].I[n];
      }
      grid.v += wsum * detail::resample_grid(run.t_grid, run.tau_grid, rec,
                                             t_mesh, tau_mesh);
    }
  }
  grid.v *= 2.0 / run.plan.N;
  return grid;
}

// end-to-end convenience: run the CUL sweep and assemble onto the meshes
inline RealGrid2D assemble_chi3(const PauliSum& H, const Ansatz& ground, int N,
                                const std::vector<double>& t_grid,
                                const std::vector<double>& tau_grid,
                                const std::vector<double>& t_mesh,
                                const std::vector<double>& tau_mesh,
                                const Chi3Config& cfg) {
  return assemble_chi3(chi3_run_cul(H, ground, N, t_grid, tau_grid, cfg),
                       t_mesh, tau_mesh);
}

// relative L2 distance between two grids on identical meshes
inline double grid_rel_l2(const RealGrid2D& a, const RealGrid2D& b) {
  if (a.v.rows() != b.v.rows() || a.v.cols() != b.v.cols())
    throw Error("grid shape mismatch");
  const double ref = b.v.norm();
  if (ref == 0) return a.v.norm();
  return (a.v - b.v).norm() / ref;
}

}  // namespace avq
