#pragma once
// McLachlan variational core: tangent-frame M/V/C assembly, regularized
// EOM solves, adaptive ansatz growth with disjoint-support batching,
// RK4 real-time stepping, and imaginary-time ground-state preparation.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ansatz.hpp"
#include "core.hpp"
#include "pauli.hpp"
#include "resources.hpp"
#include "statevector.hpp"

namespace avq {

using RowMatrixXcd =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fully evolved tangent frame: row mu of T is D_mu = d|Psi>/d theta_mu,
// obtained by one forward sweep that applies each gate to the state and
// to every tangent row created so far, appending -i A_mu |psi> after
// rotation mu.
struct McLachlanFrame {
  StateVector psi;
  RowMatrixXcd T;
  Eigen::VectorXcd d;  // d_mu = <D_mu|psi>
};

inline McLachlanFrame build_frame(const Ansatz& a) {
  const std::size_t dim = std::size_t{1} << a.qubit_count();
  const int nt = a.rotation_count();
  McLachlanFrame f;
  f.psi = a.reference();
  f.T.resize(nt, dim);
  int built = 0;
  for (const auto& it : a.order()) {
    if (it.is_rotation) {
      const auto& r = a.rotations()[it.index];
      kernel_apply_rotation(f.psi.data(), dim, r.gen, r.theta);
      for (int m = 0; m < built; ++m)
        kernel_apply_rotation(f.T.data() + std::size_t(m) * dim, dim, r.gen,
                              r.theta);
      cplx* row = f.T.data() + std::size_t(built) * dim;
      std::copy(f.psi.data(), f.psi.data() + dim, row);
      kernel_apply_pauli(row, dim, r.gen);
      for (std::size_t b = 0; b < dim; ++b) row[b] *= cplx{0, -1};
      ++built;
    } else {
      const auto& g = a.fixed_gates()[it.index];
      apply_fixed_gate(f.psi, g);
      for (int m = 0; m < built; ++m)
        kernel_apply_fixed_gate(f.T.data() + std::size_t(m) * dim, dim, g);
    }
  }
  Eigen::Map<const Eigen::VectorXcd> pv(f.psi.data(), dim);
  f.d = f.T.conjugate() * pv;
  return f;
}

struct EomAssembly {
  McLachlanFrame frame;
  StateVector hpsi;
  double energy = 0;
  double variance = 0;
  Eigen::MatrixXd M;  // 2 Re[<D_mu|D_nu> + d_mu d_nu]
  Eigen::VectorXd V;  // real-time rhs, 2 Im[<D_mu|H psi> + conj(d_mu) E]
  Eigen::VectorXd C;  // imaginary-time rhs, -Re<D_mu|H psi> + E Re d_mu
};

inline EomAssembly assemble_eom(const Ansatz& a, const PauliSum& H) {
  EomAssembly as;
  as.frame = build_frame(a);
  const std::size_t dim = as.frame.psi.dim();
  const int nt = a.rotation_count();
  as.hpsi = apply_sum(as.frame.psi, H);
  Eigen::Map<const Eigen::VectorXcd> pv(as.frame.psi.data(), dim);
  Eigen::Map<const Eigen::VectorXcd> hv(as.hpsi.data(), dim);
  as.energy = pv.dot(hv).real();
  as.variance = std::max(0.0, hv.squaredNorm() - as.energy * as.energy);
  const Eigen::MatrixXcd G = as.frame.T * as.frame.T.adjoint();
  const Eigen::VectorXcd& d = as.frame.d;
  as.M = 2.0 * (G.real() + (d * d.transpose()).real());
  const Eigen::VectorXcd th = as.frame.T.conjugate() * hv;  // <D_mu|H psi>
  as.V = 2.0 * (th.imag() - as.energy * d.imag());
  as.C = -th.real() + as.energy * d.real();
  return as;
}

inline Eigen::MatrixXd compute_M(const Ansatz& a) {
  const McLachlanFrame f = build_frame(a);
  const Eigen::MatrixXcd G = f.T * f.T.adjoint();
  return 2.0 * (G.real() + (f.d * f.d.transpose()).real());
}

inline Eigen::VectorXd compute_V(const Ansatz& a, const PauliSum& H) {
  return assemble_eom(a, H).V;
}

inline Eigen::VectorXd compute_C(const Ansatz& a, const PauliSum& H) {
  return assemble_eom(a, H).C;
}

enum class EomMode { real_time, imag_time };

// Weight of the rhs term in the McLachlan distance: L2 = 2 var - w rhs.dot(td)
inline double eom_distance_weight(EomMode m) {
  return m == EomMode::real_time ? 1.0 : 4.0;
}

struct EomSolution {
  Eigen::VectorXd theta_dot;
  double L2 = 0;      // clipped to >= 0
  double L2_raw = 0;  // unclipped, used for expansion bookkeeping
  double var_H = 0;
  Eigen::LDLT<Eigen::MatrixXd> factor;  // of M + delta I
};

inline EomSolution solve_eom_mode(const Eigen::MatrixXd& M,
                                  const Eigen::VectorXd& rhs, double var_H,
                                  double delta, EomMode mode) {
  const int nt = static_cast<int>(M.rows());
  if (M.cols() != nt || rhs.size() != nt) throw Error("EOM dimension mismatch");
  EomSolution sol;
  sol.var_H = var_H;
  if (nt) {
    Eigen::MatrixXd A = M;
    A.diagonal().array() += delta;
    sol.factor.compute(A);
    if (sol.factor.info() != Eigen::Success)
      throw Error("EOM factorization failed");
    sol.theta_dot = sol.factor.solve(rhs);
  } else {
    sol.theta_dot.resize(0);
  }
  if (!sol.theta_dot.allFinite()) throw Error("EOM solve produced non-finite rates");
  sol.L2_raw = 2.0 * var_H -
               eom_distance_weight(mode) * (nt ? rhs.dot(sol.theta_dot) : 0.0);
  sol.L2 = std::max(0.0, sol.L2_raw);
  return sol;
}

// (M + delta I) theta_dot = V;  L2 = 2 var_H - V.theta_dot
inline EomSolution solve_eom(const Eigen::MatrixXd& M, const Eigen::VectorXd& V,
                             double var_H, double delta) {
  return solve_eom_mode(M, V, var_H, delta, EomMode::real_time);
}

inline EomSolution solve_eom(const EomAssembly& as, EomMode mode,
                             double delta) {
  return solve_eom_mode(as.M, mode == EomMode::real_time ? as.V : as.C,
                        as.variance, delta, mode);
}

// Trial distances for appending each pool generator at angle zero, via the
// bordered-system update: appending row (m_nu, M_nunu) and rhs entry r_nu
// changes rhs' A'^-1 rhs' by (r_nu - m_nu.theta_dot)^2 / s with
// s = (M_nunu + delta) - m_nu A^-1 m_nu.
inline std::vector<double> scan_pool(const EomAssembly& as,
                                     const EomSolution& sol,
                                     const std::vector<PauliWord>& pool,
                                     EomMode mode, double delta) {
  const std::size_t dim = as.frame.psi.dim();
  const int nt = static_cast<int>(as.M.rows());
  const double w = eom_distance_weight(mode);
  Eigen::Map<const Eigen::VectorXcd> pv(as.frame.psi.data(), dim);
  Eigen::Map<const Eigen::VectorXcd> hv(as.hpsi.data(), dim);
  const Eigen::VectorXd g = as.frame.d.imag();  // d_mu = i g_mu
  std::vector<double> trial(pool.size());
  std::vector<cplx> buf(dim);
  Eigen::Map<Eigen::VectorXcd> tv(buf.data(), dim);
  for (std::size_t nu = 0; nu < pool.size(); ++nu) {
    std::copy(as.frame.psi.data(), as.frame.psi.data() + dim, buf.data());
    kernel_apply_pauli(buf.data(), dim, pool[nu]);
    const double gn = pv.dot(tv).real();        // <psi|A_nu|psi>
    const cplx tH = tv.dot(hv);                 // <A_nu psi|H psi>
    const double r = mode == EomMode::real_time
                         ? 2.0 * (tH.real() - gn * as.energy)
                         : tH.imag();
    double s, resid;
    if (nt) {
      const Eigen::VectorXcd dt_ = as.frame.T.conjugate() * tv;  // <D_mu|A_nu psi>
      const Eigen::VectorXd m = 2.0 * (dt_.imag() - gn * g);
      s = (2.0 * (1.0 - gn * gn) + delta) - m.dot(sol.factor.solve(m));
      resid = r - m.dot(sol.theta_dot);
    } else {
      s = 2.0 * (1.0 - gn * gn) + delta;
      resid = r;
    }
    s = std::max(s, 1e-14);
    trial[nu] = sol.L2_raw - w * resid * resid / s;
  }
  return trial;
}

struct ExpandConfig {
  double L2_cut = 1e-3;
  double tikhonov = 1e-6;
  int max_new_ops = 0;  // per expansion call; 0 = unbounded
  int max_rounds = 64;
  bool allow_saturation = false;
  Segment segment = Segment::ground;
};

struct ExpandReport {
  std::vector<int> appended;     // pool indices in append order
  std::vector<int> round_sizes;  // ops appended per round
  int rounds = 0;
  bool saturated = false;  // pool floor reached with L2 still >= cut
  EomAssembly assembly;  // final assembly and solution, ready for stepping
  EomSolution solution;
};

// Grows the ansatz until the McLachlan distance falls below cfg.L2_cut:
// each round scans every pool candidate at trial angle zero, appends the
// minimizer, then the next-smallest candidates with pairwise disjoint
// supports (up to full coverage of the pool support), then recomputes.
// A finite max_new_ops caps the total appends per call; a capped call may
// return with the distance still above the cut. With allow_saturation a
// state whose best candidate improves the distance by less than 0.1%
// returns a saturated report at the pool's representability floor instead
// of throwing; the caller steps at the floor and retries next step.
inline ExpandReport adaptive_expand(Ansatz& a, const PauliSum& H,
                                    const std::vector<PauliWord>& pool,
                                    EomMode mode, const ExpandConfig& cfg) {
  if (pool.empty()) throw Error("adaptive expansion with empty pool");
  std::uint64_t pool_support = 0;
  for (const auto& w : pool) pool_support |= w.support();
  ExpandReport rep;
  Ansatz backup = a;
  EomAssembly prev_assembly;
  EomSolution prev_solution;
  bool have_prev = false;
  for (;;) {
    rep.assembly = assemble_eom(a, H);
    rep.solution = solve_eom(rep.assembly, mode, cfg.tikhonov);
    if (rep.solution.L2 < cfg.L2_cut) return rep;
    if (cfg.allow_saturation && have_prev &&
        rep.solution.L2_raw > prev_solution.L2_raw - 0.1 * cfg.L2_cut) {
      // the last batch bought less than a tenth of the cut: the pool floor
      // is reached; drop the batch and report the state before it
      a = backup;
      const int batch = rep.round_sizes.back();
      rep.round_sizes.pop_back();
      rep.appended.resize(rep.appended.size() - batch);
      --rep.rounds;
      rep.assembly = prev_assembly;
      rep.solution = prev_solution;
      rep.saturated = true;
      return rep;
    }
    if (cfg.max_new_ops > 0 &&
        static_cast<int>(rep.appended.size()) >= cfg.max_new_ops)
      return rep;
    if (rep.rounds >= cfg.max_rounds) {
      if (cfg.allow_saturation) {
        rep.saturated = true;
        return rep;
      }
      std::ostringstream msg;
      msg << "adaptive expansion hit round limit " << cfg.max_rounds
          << " at distance " << rep.solution.L2;
      throw Error(msg.str());
    }
    const std::vector<double> trial =
        scan_pool(rep.assembly, rep.solution, pool, mode, cfg.tikhonov);
    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
      return trial[l] < trial[r];
    });
    const double scale = std::max(1.0, std::abs(rep.solution.L2_raw));
    if (trial[order[0]] > rep.solution.L2_raw - 1e-12 * scale) {
      if (cfg.allow_saturation) {
        rep.saturated = true;
        return rep;
      }
      std::ostringstream msg;
      msg << "irreducible variational distance " << rep.solution.L2
          << ": no pool candidate improves (pool size " << pool.size() << ")";
      throw Error(msg.str());
    }
    backup = a;
    prev_assembly = rep.assembly;
    prev_solution = rep.solution;
    have_prev = true;
    std::uint64_t covered = 0;
    int appended = 0;
    for (int idx : order) {
      if (cfg.max_new_ops > 0 &&
          static_cast<int>(rep.appended.size()) >= cfg.max_new_ops)
        break;
      const std::uint64_t sup = pool[idx].support();
      if (covered & sup) continue;
      a.append_rotation(pool[idx], cfg.segment, 0.0);
      rep.appended.push_back(idx);
      covered |= sup;
      ++appended;
      if ((covered & pool_support) == pool_support) break;
    }
    rep.round_sizes.push_back(appended);
    ++rep.rounds;
  }
}

struct AvqdsConfig {
  double L2_cut = 1e-3;
  double dtheta_max = 0.01;
  double tikhonov = 1e-6;
  int max_new_ops = 0;  // per expansion call; 0 = unbounded
  int max_rounds = 64;
  bool allow_saturation = false;
  double dt_init = 0.005;
  double dt_max = 0.1;
  double dt_min = 1e-8;
  double dt_grow = 1.1;
  double dt_shrink = 0.5;
};

struct StepDiagnostics {
  double t = 0;  // time at step start (driver fills)
  double dt_used = 0;
  double dt_next = 0;
  double L2 = 0;       // at step start
  double energy = 0;   // at step start
  double var_H = 0;    // at step start
  double max_dtheta = 0;
  int n_theta = 0;
  bool saturated = false;  // step taken at the pool's distance floor
};

// One RK4 step of (M + delta I) theta_dot = V with the ansatz structure
// frozen; M and V are rebuilt at every stage. dt shrinks by dt_shrink until
// max|dtheta| <= dtheta_max, reusing the k1 stage passed in from the
// preceding expansion; the returned dt_next grows by dt_grow (capped) after
// an unshrunk step.
inline StepDiagnostics avqds_step(Ansatz& a, const PauliSum& H,
                                  const AvqdsConfig& cfg, double dt,
                                  const EomAssembly& as0,
                                  const EomSolution& sol0) {
  if (!(sol0.L2 < cfg.L2_cut) && !cfg.allow_saturation) {
    std::ostringstream msg;
    msg << "real-time step started at distance " << sol0.L2
        << " >= cut " << cfg.L2_cut << " (expand first)";
    throw Error(msg.str());
  }
  const int nt = a.rotation_count();
  const std::vector<double> theta0v = a.thetas();
  Eigen::Map<const Eigen::VectorXd> theta0(theta0v.data(), nt);
  const Eigen::VectorXd& k1 = sol0.theta_dot;
  const double rate1 = nt ? k1.lpNorm<Eigen::Infinity>() : 0.0;
  bool shrunk = false;
  auto stage_rates = [&](const Eigen::VectorXd& th) {
    std::vector<double> tv(th.data(), th.data() + nt);
    a.set_thetas(tv);
    const EomAssembly as = assemble_eom(a, H);
    return solve_eom(as, EomMode::real_time, cfg.tikhonov).theta_dot;
  };
  Eigen::VectorXd dtheta(nt);
  for (;;) {
    while (rate1 * dt > cfg.dtheta_max && dt > cfg.dt_min) {
      dt *= cfg.dt_shrink;
      shrunk = true;
    }
    if (dt < cfg.dt_min) {
      a.set_thetas(theta0v);
      std::ostringstream msg;
      msg << "time step underflow: dt " << dt << " < " << cfg.dt_min
          << " at distance " << sol0.L2 << ", N_theta " << nt;
      throw Error(msg.str());
    }
    if (nt == 0) {
      dtheta.resize(0);
      break;
    }
    const Eigen::VectorXd k2 = stage_rates(theta0 + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = stage_rates(theta0 + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = stage_rates(theta0 + dt * k3);
    dtheta = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (dtheta.lpNorm<Eigen::Infinity>() <= cfg.dtheta_max) break;
    dt *= cfg.dt_shrink;
    shrunk = true;
  }
  std::vector<double> thetan(nt);
  for (int i = 0; i < nt; ++i) thetan[i] = theta0v[i] + dtheta[i];
  a.set_thetas(thetan);
  StepDiagnostics diag;
  diag.dt_used = dt;
  diag.dt_next = shrunk ? dt : std::min(dt * cfg.dt_grow, cfg.dt_max);
  diag.L2 = sol0.L2;
  diag.energy = as0.energy;
  diag.var_H = as0.variance;
  diag.max_dtheta = nt ? dtheta.lpNorm<Eigen::Infinity>() : 0.0;
  diag.n_theta = nt;
  return diag;
}

struct TrajectoryRecord {
  double t = 0;
  double dt = 0;
  int n_theta = 0;
  double L2 = 0;
  double energy = 0;
  double var_H = 0;
  long cnots = 0;
  int depth = 0;
  bool saturated = false;
};

// Drives one AVQDS trajectory: before every step the ansatz is expanded
// below the distance cut, then one adaptive RK4 step advances the clock;
// advance_to lands exactly on the requested time.
class AvqdsDriver {
 public:
  using StepCallback =
      std::function<void(const StepDiagnostics&, const Ansatz&)>;

  AvqdsDriver(Ansatz& a, const PauliSum& H, std::vector<PauliWord> pool,
              AvqdsConfig cfg, Segment seg)
      : a_(a), H_(H), pool_(std::move(pool)), cfg_(cfg), seg_(seg),
        dt_(cfg.dt_init) {}

  double time() const { return t_; }
  const std::vector<TrajectoryRecord>& records() const { return records_; }
  Ansatz& ansatz() { return a_; }

  void advance_to(double t_target, const StepCallback& cb = {}) {
    while (t_ < t_target - 1e-12) {
      ExpandConfig ec;
      ec.L2_cut = cfg_.L2_cut;
      ec.tikhonov = cfg_.tikhonov;
      ec.max_new_ops = cfg_.max_new_ops;
      ec.max_rounds = cfg_.max_rounds;
      ec.allow_saturation = cfg_.allow_saturation;
      ec.segment = seg_;
      const ExpandReport rep = adaptive_expand(a_, H_, pool_, EomMode::real_time, ec);
      const double dt_try = std::min(dt_, t_target - t_);
      const bool clamped = dt_try < dt_;
      StepDiagnostics diag =
          avqds_step(a_, H_, cfg_, dt_try, rep.assembly, rep.solution);
      diag.t = t_;
      diag.saturated = rep.saturated;
      t_ += diag.dt_used;
      if (diag.dt_used < dt_try || !clamped) dt_ = diag.dt_next;
      TrajectoryRecord rec;
      rec.t = t_;
      rec.dt = diag.dt_used;
      rec.n_theta = diag.n_theta;
      rec.L2 = diag.L2;
      rec.energy = diag.energy;
      rec.var_H = diag.var_H;
      rec.cnots = cnot_count(a_);
      rec.depth = circuit_depth(a_);
      rec.saturated = rep.saturated;
      records_.push_back(rec);
      if (cb) cb(diag, a_);
    }
  }

 private:
  Ansatz& a_;
  const PauliSum& H_;
  std::vector<PauliWord> pool_;
  AvqdsConfig cfg_;
  Segment seg_;
  double t_ = 0;
  double dt_ = 0;
  std::vector<TrajectoryRecord> records_;
};

struct AvqiteConfig {
  double L2_cut = 1e-3;
  double tikhonov = 1e-6;
  int max_new_ops = 1;  // per imaginary-time step; 0 = unbounded
  int max_rounds = 64;
  double dbeta_init = 0.02;
  double dbeta_max = 0.2;
  double dbeta_min = 1e-12;
  double dtheta_max = 0.05;
  double energy_tol = 1e-8;  // |dE| per unit imaginary time
  long max_steps = 100000;
};

struct AvqiteResult {
  double energy = 0;
  double variance = 0;
  double L2 = 0;
  long steps = 0;
  std::vector<TrajectoryRecord> records;  // t field carries beta
};

// Imaginary-time ground-state preparation: Euler flow of
// (M + delta I) theta_dot = C with adaptive expansion against the
// imaginary-time distance, monotone energy, and adaptive dbeta.
inline AvqiteResult avqite_prepare(Ansatz& a, const PauliSum& H,
                                   const std::vector<PauliWord>& pool,
                                   const AvqiteConfig& cfg) {
  AvqiteResult out;
  double beta = 0;
  double dbeta = cfg.dbeta_init;
  auto energy_of = [&]() { return expectation(a.prepare(), H); };
  for (long step = 0; step < cfg.max_steps; ++step) {
    ExpandConfig ec;
    ec.L2_cut = cfg.L2_cut;
    ec.tikhonov = cfg.tikhonov;
    ec.max_new_ops = cfg.max_new_ops;
    ec.max_rounds = cfg.max_rounds;
    ec.segment = Segment::ground;
    const ExpandReport rep =
        adaptive_expand(a, H, pool, EomMode::imag_time, ec);
    const double E = rep.assembly.energy;
    const int nt = a.rotation_count();
    const Eigen::VectorXd& td = rep.solution.theta_dot;
    const double rate = nt ? td.lpNorm<Eigen::Infinity>() : 0.0;
    double db = dbeta;
    if (rate * db > cfg.dtheta_max) db = cfg.dtheta_max / rate;
    const std::vector<double> theta0 = a.thetas();
    double Enew = E;
    bool halved = false;
    if (nt && rate > 0) {
      for (;;) {
        std::vector<double> thetan(theta0);
        for (int i = 0; i < nt; ++i) thetan[i] += db * td[i];
        a.set_thetas(thetan);
        Enew = energy_of();
        if (Enew <= E + 1e-13 * std::max(1.0, std::abs(E))) break;
        a.set_thetas(theta0);
        db *= 0.5;
        halved = true;
        if (db < cfg.dbeta_min) {
          std::ostringstream msg;
          msg << "imaginary-time stagnation at energy " << E
              << ", distance " << rep.solution.L2 << ", |C| "
              << rep.assembly.C.norm();
          throw Error(msg.str());
        }
      }
    }
    beta += db;
    ++out.steps;
    TrajectoryRecord rec;
    rec.t = beta;
    rec.dt = db;
    rec.n_theta = nt;
    rec.L2 = rep.solution.L2;
    rec.energy = Enew;
    rec.var_H = rep.assembly.variance;
    rec.cnots = cnot_count(a);
    rec.depth = circuit_depth(a);
    out.records.push_back(rec);
    const double dE_rate = (E - Enew) / db;
    if (dE_rate < cfg.energy_tol && rep.solution.L2 < cfg.L2_cut) {
      out.energy = Enew;
      out.variance = rep.assembly.variance;
      out.L2 = rep.solution.L2;
      return out;
    }
    if (!halved) dbeta = std::min(dbeta * 1.1, cfg.dbeta_max);
    else dbeta = db;
  }
  throw Error("imaginary-time evolution did not converge within step limit");
}

}  // namespace avq
