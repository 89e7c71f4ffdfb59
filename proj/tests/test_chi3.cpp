#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "avq/chi3.hpp"

using namespace avq;

namespace {

constexpr double kOmegaAf = 1.0066298495288168;  // E1 - E0 magnon gap

const PauliSum& spin_h() {
  static const PauliSum H = spin_chain_hamiltonian(2, 1.0, 0.2);
  return H;
}

const Ansatz& spin_ground() {
  static const Ansatz a = [] {
    Ansatz g(spin_reference(2));
    AvqiteConfig cfg;
    cfg.L2_cut = 6e-5;
    cfg.energy_tol = 1e-10;
    avqite_prepare(g, spin_h(), pool_spin_gs(4), cfg);
    return g;
  }();
  return a;
}

const Chi3Plan& plan2() {
  static const Chi3Plan p = chi3_plan(2);
  return p;
}

bool same_word(const PauliWord& a, const PauliWord& b) {
  return a.nq == b.nq && a.x == b.x && a.z == b.z;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

StateVector random_state(int nq, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<cplx> amp(std::size_t{1} << nq);
  for (auto& a : amp) a = cplx{g(rng), g(rng)};
  StateVector s(nq, std::move(amp));
  s.normalize();
  return s;
}

Ansatz random_spin_ansatz(int steps, std::mt19937& rng) {
  Ansatz a(spin_reference(2));
  const std::vector<PauliWord> pool = pool_spin_dyn(4);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> angle(-1.2, 1.2);
  for (int i = 0; i < steps; ++i)
    a.append_rotation(pool[pick(rng)], Segment::ground, angle(rng));
  return a;
}

// joint state c0 |0>|zero> + c1 |1>|one> with the ancilla on the top wire
StateVector stitch_branches(const StateVector& zero, cplx c0,
                            const StateVector& one, cplx c1) {
  const std::size_t dim = zero.dim();
  std::vector<cplx> amp(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    amp[i] = c0 * zero[i];
    amp[i + dim] = c1 * one[i];
  }
  return StateVector(zero.qubit_count() + 1, std::move(amp));
}

StateVector apply_chain(StateVector s, const PauliWord& first,
                        const PauliWord& second) {
  s = apply_pauli(s, first);
  return apply_pauli(s, second);
}

// brute-force family forms on the bare statevector, no eigen-sum sharing
double brute_chi3(double t, double tau) {
  const PauliSum Mz = total_sz(2);
  const auto es = diagonalize(spin_h(), 4);
  const StateVector G = ground_state(*es);
  auto mz = [&](const StateVector& s) { return apply_sum(s, Mz); };
  const StateVector mzG = mz(G);
  const StateVector mz2G = mz(mzG);

  const StateVector r1 = mz(exact_evolve(mz(exact_evolve(mz2G, *es, tau)), *es, t));
  const double f1 = inner(exact_evolve(G, *es, t + tau), r1).imag();
  const StateVector r2 = mz(exact_evolve(mz(exact_evolve(G, *es, tau)), *es, t));
  const double f2 = inner(exact_evolve(mz2G, *es, t + tau), r2).imag();
  const StateVector r3 = mz(exact_evolve(mz(exact_evolve(mzG, *es, tau)), *es, t));
  const double f3 = -2.0 * inner(exact_evolve(mzG, *es, t + tau), r3).imag();
  return (2.0 / 2) * (f1 + f2 + f3);
}

}  // namespace

TEST_CASE("spin-z decomposition is two half-weight Z words") {
  for (int site : {0, 1}) {
    const auto terms = spin_z_terms(site, 2);
    REQUIRE(terms.size() == 2);
    for (const auto& [c, w] : terms) {
      CHECK(c == Catch::Approx(0.5));
      CHECK(w.x == 0);
      CHECK(w.nq == 4);
    }
    CHECK(terms[0].second.z == (std::uint64_t{1} << (2 * site)));
    CHECK(terms[1].second.z == (std::uint64_t{1} << (2 * site + 1)));
  }
}

TEST_CASE("chi3 term table carries three families per site tuple") {
  const auto terms = chi3_term_specs(2);
  REQUIRE(terms.size() == 768);

  std::map<int, int> fam_count;
  std::map<std::tuple<int, int, int, int, int, int, int, int>, double> tuple_sum;
  std::vector<std::vector<std::pair<double, PauliWord>>> sz;
  for (int site = 0; site < 2; ++site) sz.push_back(spin_z_terms(site, 2));
  PauliWord id;
  id.nq = 4;

  for (const auto& sp : terms) {
    ++fam_count[sp.family];
    tuple_sum[{sp.j, sp.k, sp.l, sp.m, sp.p, sp.q, sp.r, sp.s}] += sp.weight;
    const PauliWord& al = sz[sp.j][sp.p].second;
    const PauliWord& be = sz[sp.k][sp.q].second;
    const PauliWord& ga = sz[sp.l][sp.r].second;
    const PauliWord& de = sz[sp.m][sp.s].second;
    CHECK(same_word(sp.P[2], al));
    CHECK(same_word(sp.P[3], be));
    switch (sp.family) {
      case 1:
        CHECK(same_word(sp.P[0], id));
        CHECK(same_word(sp.P[1], id));
        CHECK(same_word(sp.P[4], ga));
        CHECK(same_word(sp.P[5], de));
        CHECK(sp.weight == Catch::Approx(1.0 / 16));
        break;
      case 2:
        CHECK(same_word(sp.P[0], de));
        CHECK(same_word(sp.P[1], ga));
        CHECK(same_word(sp.P[4], id));
        CHECK(same_word(sp.P[5], id));
        CHECK(sp.weight == Catch::Approx(1.0 / 16));
        break;
      case 3:
        CHECK(same_word(sp.P[0], id));
        CHECK(same_word(sp.P[1], ga));
        CHECK(same_word(sp.P[4], de));
        CHECK(same_word(sp.P[5], id));
        CHECK(sp.weight == Catch::Approx(-2.0 / 16));
        break;
      default:
        FAIL("unexpected family");
    }
  }
  CHECK(fam_count[1] == 256);
  CHECK(fam_count[2] == 256);
  CHECK(fam_count[3] == 256);
  REQUIRE(tuple_sum.size() == 256);
  for (const auto& [key, sum] : tuple_sum) CHECK(std::abs(sum) < 1e-15);
}

TEST_CASE("chi3 shell prepares the inclined two-branch state") {
  std::mt19937 rng(11);
  const auto& terms = plan2().terms;
  std::uniform_int_distribution<std::size_t> pick(0, terms.size() - 1);
  for (int rep = 0; rep < 6; ++rep) {
    const Chi3TermSpec& sp = terms[pick(rng)];
    const Ansatz base = random_spin_ansatz(4, rng);
    const StateVector sys = base.prepare();

    Ansatz simplified = widen_ansatz(base);
    append_chi3_prefix(simplified, sp, true);
    Ansatz plain = widen_ansatz(base);
    append_chi3_prefix(plain, sp, false);

    const StateVector got = simplified.prepare();
    const StateVector raw = plain.prepare();
    const double r = 1.0 / std::sqrt(2.0);
    const StateVector want =
        stitch_branches(apply_chain(sys, sp.P[5], sp.P[4]), cplx{0, r},
                        apply_chain(sys, sp.P[0], sp.P[1]), cplx{r, 0});
    for (std::size_t i = 0; i < got.dim(); ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-12);
      CHECK(std::abs(raw[i] - want[i]) < 1e-12);
    }
  }
}

TEST_CASE("chi3 shell merges equal outer gates into one plain word") {
  std::mt19937 rng(23);
  Chi3TermSpec sp;
  PauliWord shared;
  shared.nq = 4;
  shared.x = 0b0110;
  shared.z = 0b0011;
  PauliWord other;
  other.nq = 4;
  other.z = 0b1000;
  PauliWord id;
  id.nq = 4;
  sp.P = {shared, other, id, id, shared, other};

  const Ansatz base = random_spin_ansatz(3, rng);
  Ansatz merged = widen_ansatz(base);
  append_chi3_prefix(merged, sp, true);
  Ansatz plain = widen_ansatz(base);
  append_chi3_prefix(plain, sp, false);
  const StateVector a = merged.prepare();
  const StateVector b = plain.prepare();
  for (std::size_t i = 0; i < a.dim(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  CHECK(cnot_count(merged) == cnot_count(plain));
}

TEST_CASE("chi3 readout returns Im<A|P2|B> with the dual-route check") {
  std::mt19937 rng(31);
  const double r = 1.0 / std::sqrt(2.0);
  for (int rep = 0; rep < 5; ++rep) {
    const StateVector A = random_state(4, rng);
    const StateVector B = random_state(4, rng);
    const StateVector joint =
        stitch_branches(A, cplx{r, 0}, B, cplx{0, r});
    PauliWord p2;
    p2.nq = 4;
    std::uniform_int_distribution<std::uint64_t> bits(0, 15);
    p2.x = bits(rng);
    p2.z = bits(rng);
    const double want = inner(A, apply_pauli(B, p2)).imag();
    CHECK(std::abs(chi3_readout(joint, p2) - want) < 1e-12);
  }
}

TEST_CASE("chi3 term value reduces to a static bracket at zero times") {
  const auto es = diagonalize(spin_h(), 4);
  const StateVector G = spin_ground().prepare();
  const auto& terms = plan2().terms;
  for (std::size_t i = 0; i < terms.size(); i += 61) {
    const Chi3TermSpec& sp = terms[i];
    StateVector right = G;
    for (int g = 5; g >= 0; --g) right = apply_pauli(right, sp.P[g]);
    const double want = inner(G, right).imag();
    CHECK(std::abs(chi3_exact_value(*es, G, sp, sp.P[2], 0, 0) - want) < 1e-12);
  }

  Chi3Config cfg;
  for (std::size_t i : {std::size_t{0}, std::size_t{300}, std::size_t{700}}) {
    const Chi3Trace tr =
        chi3_term_cul(spin_h(), spin_ground(), terms[i], 0.0, {0.0}, cfg);
    StateVector right = G;
    for (int g = 5; g >= 0; --g) right = apply_pauli(right, terms[i].P[g]);
    CHECK(std::abs(tr.readouts[0].I[0] - inner(G, right).imag()) < 1e-9);
  }
}

TEST_CASE("chi3 plan folds shared circuits without changing any value") {
  const Chi3Plan& plan = plan2();
  CHECK(plan.stage1_count == 29);
  CHECK(plan.trajectories.size() == 116);
  CHECK(plan.series_count == 464);
  REQUIRE(plan.term_slot.size() == 768);

  for (std::size_t i = 0; i < plan.terms.size(); ++i) {
    const auto [gi, si] = plan.term_slot[i];
    REQUIRE(gi >= 0);
    REQUIRE(gi < static_cast<int>(plan.trajectories.size()));
    const Chi3Trajectory& traj = plan.trajectories[gi];
    REQUIRE(si >= 0);
    REQUIRE(si < static_cast<int>(traj.readouts.size()));
    const Chi3ReadoutSlot& slot = traj.readouts[si];
    CHECK(same_word(slot.p2, plan.terms[i].P[2]));
    CHECK(std::find(slot.term_indices.begin(), slot.term_indices.end(), i) !=
          slot.term_indices.end());
    CHECK(traj.stage1_group >= 0);
    CHECK(traj.stage1_group < plan.stage1_count);
  }

  const auto es = diagonalize(spin_h(), 4);
  const StateVector G = spin_ground().prepare();
  for (std::size_t i = 0; i < plan.terms.size(); i += 37) {
    const auto [gi, si] = plan.term_slot[i];
    const Chi3Trajectory& traj = plan.trajectories[gi];
    for (auto [t, tau] : {std::pair{0.7, 0.3}, std::pair{2.0, 1.0}}) {
      const double direct =
          chi3_exact_value(*es, G, plan.terms[i], plan.terms[i].P[2], t, tau);
      const double folded =
          chi3_exact_value(*es, G, traj.rep, traj.readouts[si].p2, t, tau);
      CHECK(std::abs(direct - folded) < 1e-12);
    }
  }
}

TEST_CASE("chi3 eigenbasis oracle reproduces pinned references") {
  const std::vector<std::tuple<double, double, double>> refs = {
      {0.0, 0.0, 0.0},
      {1.0, 0.0, -2.187144741103e-02},
      {0.0, 1.0, 0.0},
      {0.7, 0.3, -1.410897391692e-02},
      {2.5, 1.5, 4.606937666100e-02},
      {10.0, 10.0, -3.563697601873e-02},
      {6.0, 10.0, -1.721882138925e-04},
  };
  for (const auto& [t, tau, want] : refs) {
    const RealGrid2D g = chi3_exact(spin_h(), 2, {t}, {tau});
    CHECK(std::abs(g.v(0, 0) - want) < 1e-12);
  }

  const RealGrid2D th = chi3_exact(spin_h(), 2, {-1.0, 1.0}, {-0.5, 0.5});
  CHECK(th.v(0, 0) == 0.0);
  CHECK(th.v(0, 1) == 0.0);
  CHECK(th.v(1, 0) == 0.0);
  CHECK(th.v(1, 1) != 0.0);
}

TEST_CASE("chi3 eigenbasis oracle matches a brute propagator evaluation") {
  for (auto [t, tau] : {std::pair{1.0, 0.0}, std::pair{0.7, 0.3},
                        std::pair{2.5, 1.5}}) {
    const RealGrid2D g = chi3_exact(spin_h(), 2, {t}, {tau});
    CHECK(std::abs(g.v(0, 0) - brute_chi3(t, tau)) < 1e-10);
  }
}

TEST_CASE("per-trajectory assembly equals the eigenbasis oracle") {
  std::vector<double> ts = linspace_step(0, 6, 0.5);
  std::vector<double> taus = ts;
  taus.push_back(10.0);
  const RealGrid2D a = chi3_assembly_exact(spin_h(), 2, ts, taus);
  const RealGrid2D b = chi3_exact(spin_h(), 2, ts, taus);
  CHECK(max_abs(a.v - b.v) < 1e-12);
  CHECK(max_abs(b.v.col(0)) < 1e-15);
}

TEST_CASE("dominant chi3 transitions connect the magnon levels") {
  const auto [es, trips] = detail::chi3_triples(spin_h(), 2);
  CHECK(trips.size() == 43);
  const auto top = std::max_element(
      trips.begin(), trips.end(), [](const auto& l, const auto& r) {
        return std::abs(l.S) < std::abs(r.S);
      });
  REQUIRE(top != trips.end());
  const double e_pair = -1.019803902718557;
  CHECK(std::abs(es->evals(top->mu) - e_pair) < 1e-9);
  CHECK(std::abs(es->evals(top->la) - e_pair) < 1e-9);
  CHECK(std::abs(es->evals(top->nu) - (-1.0)) < 1e-9);
  CHECK(std::abs(es->evals(top->mu) - es->evals(0) - kOmegaAf) < 1e-9);
}

TEST_CASE("chi3 time trace oscillates at the magnon period") {
  const std::vector<double> ts = linspace_step(0, 40, 0.025);
  const RealGrid2D g = chi3_exact(spin_h(), 2, ts, {0.0});
  std::vector<double> maxima;
  for (std::size_t j = 1; j + 1 < ts.size(); ++j)
    if (g.v(0, j) > g.v(0, j - 1) && g.v(0, j) > g.v(0, j + 1))
      maxima.push_back(ts[j]);
  REQUIRE(maxima.size() >= 4);
  const double spacing =
      (maxima.back() - maxima.front()) / double(maxima.size() - 1);
  const double period = 2.0 * M_PI / kOmegaAf;
  CHECK(std::abs(spacing - period) < 0.02 * period);
}

TEST_CASE("2D Pade transform is order independent and finds the four peaks") {
  const std::vector<double> ts = linspace_step(0, 40, 0.5);
  const RealGrid2D g = chi3_exact(spin_h(), 2, ts, ts);
  const std::vector<double> wts = linspace_step(-0.4, 1.6, 0.025);
  const std::vector<double> wtaus = linspace_step(-1.6, 1.6, 0.025);

  const ComplexGrid2D s1 = chi3_2d_spectrum(g, 0.1, 0.1, wts, wtaus, true);
  const ComplexGrid2D s2 = chi3_2d_spectrum(g, 0.1, 0.1, wts, wtaus, false);
  CHECK((s1.v - s2.v).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s1.pole.cast<int>().sum() == 0);

  const ComplexGrid2D so = chi3_spectrum_oracle(spin_h(), 2, wts, wtaus, 0.1);
  const std::vector<std::pair<double, double>> expected = {
      {0.0, -kOmegaAf}, {0.0, kOmegaAf}, {kOmegaAf, kOmegaAf}, {0.0, 0.0}};
  for (const ComplexGrid2D* spec : {&s1, &so}) {
    const auto peaks = find_peaks_2d(*spec, 0.25);
    REQUIRE(peaks.size() == 4);
    for (const auto& [ewt, ewtau] : expected) {
      const bool found = std::any_of(
          peaks.begin(), peaks.end(), [&](const Peak2D& p) {
            return std::abs(p.wt - ewt) < 0.05 && std::abs(p.wtau - ewtau) < 0.05;
          });
      CHECK(found);
    }
  }

  const auto pk = find_peaks_2d(s1, 0.25);
  const auto pko = find_peaks_2d(so, 0.25);
  for (const auto& p : pk) {
    const auto match = std::min_element(
        pko.begin(), pko.end(), [&](const Peak2D& l, const Peak2D& r) {
          return std::hypot(l.wt - p.wt, l.wtau - p.wtau) <
                 std::hypot(r.wt - p.wt, r.wtau - p.wtau);
        });
    CHECK(std::abs(p.height - match->height) < 0.02 * match->height);
  }
}

TEST_CASE("separable cosine input resolves to its single frequency pair") {
  const double w1 = 0.9, w2 = 0.55;
  const std::vector<double> ts = linspace_step(0, 40, 0.5);
  RealGrid2D g;
  g.init(ts, ts);
  for (std::size_t r = 0; r < ts.size(); ++r)
    for (std::size_t c = 0; c < ts.size(); ++c)
      g.v(r, c) = std::cos(w1 * ts[c] + w2 * ts[r]);
  const std::vector<double> wts = linspace_step(0.2, 1.6, 0.025);
  const std::vector<double> wtaus = linspace_step(-1.6, 1.6, 0.025);
  const ComplexGrid2D s = chi3_2d_spectrum(g, 0.1, 0.1, wts, wtaus, true);
  const auto peaks = find_peaks_2d(s, 0.25);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0].wt - w1) < 0.026);
  CHECK(std::abs(peaks[0].wtau - w2) < 0.026);
}

TEST_CASE("a longitudinal-field system has zero third-order response") {
  const PauliSum Hz = cplx{0.9, 0} * total_sz(2);
  const std::vector<double> ts = linspace_step(0, 10, 0.5);
  const RealGrid2D g = chi3_exact(Hz, 2, ts, ts);
  CHECK(max_abs(g.v) < 1e-15);
  const std::vector<double> w = linspace_step(-1, 1, 0.05);
  const ComplexGrid2D so = chi3_spectrum_oracle(Hz, 2, w, w, 0.1);
  CHECK(so.v.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("chi3 stage-two trajectory follows the exact dynamics") {
  const std::vector<double> ts = linspace_step(0, 2, 0.25);
  const double tau = 0.5;
  Chi3Config cfg;
  const Chi3TermSpec& sp = plan2().terms[0];
  const Chi3Trace tr = chi3_term_cul(spin_h(), spin_ground(), sp, tau, ts, cfg);

  CHECK(tr.stage1_infidelity < 1e-8);
  CHECK(tr.max_infidelity < 1e-4);
  CHECK(tr.shell_cnots == 3);

  const auto es = diagonalize(spin_h(), 4);
  const StateVector G = spin_ground().prepare();
  double worst = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double want = chi3_exact_value(*es, G, sp, sp.P[2], ts[i], tau);
    worst = std::max(worst, std::abs(tr.readouts[0].I[i] - want));
  }
  CHECK(worst < 2e-3);

  REQUIRE(!tr.stage2_records.empty());
  CHECK(tr.stage2_records.front().cnots == 22);
  int saturated = 0;
  long prev_cnots = 0;
  for (const auto& r : tr.stage2_records) {
    CHECK(r.cnots >= prev_cnots);
    prev_cnots = r.cnots;
    if (r.saturated) {
      ++saturated;
      CHECK(r.L2 >= cfg.avqds.L2_cut);
    } else if (r.dt > 0) {
      CHECK(r.L2 < cfg.avqds.L2_cut);
    }
  }
  CHECK(saturated >= 1);
  CHECK(saturated <= 4);

  const TimeSeries series = chi3_trace_series(tr, 0);
  REQUIRE(series.t.size() == ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(series.t[i] == Catch::Approx(ts[i]));
    CHECK(series.v[i].real() == Catch::Approx(tr.readouts[0].I[i]));
  }
}

TEST_CASE("a synthetic run assembles to the eigenbasis oracle grid") {
  const Chi3Plan& plan = plan2();
  const std::vector<double> t_grid = {0.0, 0.5, 1.0, 1.5};
  const std::vector<double> tau_grid = {0.0, 0.7};
  const auto es = diagonalize(spin_h(), 4);
  const StateVector G = spin_ground().prepare();

  Chi3Run run;
  run.plan = plan;
  run.t_grid = t_grid;
  run.tau_grid = tau_grid;
  for (double tau : tau_grid) {
    for (std::size_t gi = 0; gi < plan.trajectories.size(); ++gi) {
      const Chi3Trajectory& traj = plan.trajectories[gi];
      Chi3Trace tr;
      tr.trajectory = static_cast<int>(gi);
      tr.tau = tau;
      tr.t = t_grid;
      for (const Chi3ReadoutSlot& slot : traj.readouts) {
        Chi3ReadoutSeries rs;
        rs.p2 = slot.p2;
        for (double t : t_grid)
          rs.I.push_back(chi3_exact_value(*es, G, traj.rep, slot.p2, t, tau));
        tr.readouts.push_back(std::move(rs));
      }
      run.traces.push_back(std::move(tr));
    }
  }

  const RealGrid2D got = assemble_chi3(run, t_grid, tau_grid);
  const RealGrid2D want = chi3_exact(spin_h(), 2, t_grid, tau_grid);
  CHECK(max_abs(got.v - want.v) < 1e-10);
  CHECK(grid_rel_l2(got, want) < 1e-9);
}

TEST_CASE("chi3 pipeline rejects malformed inputs") {
  const Chi3TermSpec& sp = plan2().terms[0];
  Chi3Config cfg;

  Chi3TermSpec wrong = sp;
  wrong.P[2].nq = 6;
  CHECK_THROWS_WITH(chi3_term_cul(spin_h(), spin_ground(), wrong, 0, {0.0}, cfg),
                    Catch::Matchers::ContainsSubstring("register mismatch"));

  CHECK_THROWS_WITH(chi3_term_cul(spin_h(), spin_ground(), sp, -0.5, {0.0}, cfg),
                    Catch::Matchers::ContainsSubstring("nonnegative"));
  CHECK_THROWS_WITH(chi3_term_cul(spin_h(), spin_ground(), sp, 0, {}, cfg),
                    Catch::Matchers::ContainsSubstring("grid is empty"));
  CHECK_THROWS_WITH(
      chi3_term_cul(spin_h(), spin_ground(), sp, 0, {-1.0, 0.0}, cfg),
      Catch::Matchers::ContainsSubstring("nonnegative"));
  CHECK_THROWS_WITH(
      chi3_term_cul(spin_h(), spin_ground(), sp, 0, {1.0, 0.5}, cfg),
      Catch::Matchers::ContainsSubstring("increasing"));

  const Chi3Trace tr =
      chi3_term_cul(spin_h(), spin_ground(), sp, 0.0, {0.0}, cfg);
  CHECK_THROWS_WITH(chi3_trace_series(tr, 99),
                    Catch::Matchers::ContainsSubstring("slot out of range"));

  Chi3Run empty;
  empty.plan = plan2();
  empty.t_grid = {0.0, 1.0};
  empty.tau_grid = {0.0};
  CHECK_THROWS_WITH(assemble_chi3(empty, {0.0, 1.0}, {0.0}),
                    Catch::Matchers::ContainsSubstring("missing term series"));

  RealGrid2D tiny;
  tiny.init({0.0}, {0.0, 1.0});
  CHECK_THROWS_WITH(chi3_2d_spectrum(tiny, 0.1, 0.1, {0.0, 0.1}, {0.0, 0.1}),
                    Catch::Matchers::ContainsSubstring("two samples"));
  RealGrid2D skew;
  skew.init({0.0, 0.5, 1.5, 2.0}, {0.0, 1.0});
  CHECK_THROWS_WITH(chi3_2d_spectrum(skew, 0.1, 0.1, {0.0, 0.1}, {0.0, 0.1}),
                    Catch::Matchers::ContainsSubstring("uniform"));
}

TEST_CASE("chi3 aborts carry the stage and tau label") {
  Chi3Config cfg;
  cfg.oracle = false;
  cfg.avqds.allow_saturation = false;
  cfg.avqds.max_rounds = 3;
  const Chi3TermSpec& sp = plan2().terms[0];
  CHECK_THROWS_WITH(
      chi3_term_cul(spin_h(), spin_ground(), sp, 0.5, {0.0, 0.5}, cfg),
      Catch::Matchers::ContainsSubstring("chi3 stage 2 (tau=0.5"));
}
