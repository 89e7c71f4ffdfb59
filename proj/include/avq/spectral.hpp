#pragma once
// Frequency-domain post-processing: damped discrete Fourier transforms,
// Pade continuation of uniformly sampled time series, spectral functions,
// and dense Lehmann-representation oracles for fermionic Green's functions.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "core.hpp"
#include "exact.hpp"
#include "models.hpp"
#include "pauli.hpp"
#include "timeseries.hpp"

namespace avq {

// G(omega) = dt * sum_n w_n c_n exp(i (omega + i eps) t_n), trapezoid end
// weights w_0 = w_N = 1/2, all others 1
inline cplx discrete_ft(const TimeSeries& s, double omega, double eps) {
  if (s.size() < 2) throw Error("transform needs at least two samples");
  if (!is_uniform_mesh(s.t)) throw Error("transform requires a uniform mesh");
  const double dt = s.t[1] - s.t[0];
  cplx acc{0, 0};
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double w = (n == 0 || n + 1 == s.size()) ? 0.5 : 1.0;
    const cplx phase = std::exp(cplx{-eps * s.t[n], omega * s.t[n]});
    acc += w * s.v[n] * phase;
  }
  return acc * dt;
}

// Rational model of the one-sided series sum_n c_n z^n with z = e^{i omega' dt}:
// numerator degree N/2, denominator degree N/2 with b_0 fixed to 1.
struct PadeApproximant {
  Eigen::VectorXcd a;  // numerator coefficients a_0 .. a_{N/2}
  Eigen::VectorXcd b;  // denominator coefficients b_1 .. b_{N/2}
  double dt = 0;
  cplx c0{0, 0};   // first sample, for the trapezoid end correction
  cplx cN{0, 0};   // last sample, same
  int N = 0;       // last sample index (even)
};

// Fit from samples c_0..c_N on a uniform mesh with step dt.  The denominator
// solves sum_{m=1}^{N/2} b_m c_{n-m} = -c_n for n = N/2+1..N in the
// least-squares sense (ridge 1e-12 on the normal system); the numerator then
// follows as a_n = sum_{m=0}^{n} b_m c_{n-m}.
inline PadeApproximant fit_pade(const std::vector<cplx>& c, double dt) {
  if (c.size() < 4) throw Error("Pade fit needs at least four samples");
  const int N = static_cast<int>(c.size()) - 1;
  if (N % 2 != 0) throw Error("Pade fit needs an even sample-interval count");
  if (dt <= 0) throw Error("mesh step must be positive");
  const int M = N / 2;

  // ridge least squares via the stacked system [A; sqrt(lambda) I] b = [rhs; 0]
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * M, M);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(2 * M);
  for (int r = 0; r < M; ++r) {
    const int n = M + 1 + r;
    for (int m = 1; m <= M; ++m) A(r, m - 1) = c[n - m];
    rhs(r) = -c[n];
  }
  const double sqrt_ridge = 1e-6;  // ridge 1e-12
  for (int m = 0; m < M; ++m) A(M + m, m) = sqrt_ridge;
  const Eigen::VectorXcd b = A.colPivHouseholderQr().solve(rhs);
  if (!b.allFinite()) throw Error("Pade normal system is degenerate");

  PadeApproximant p;
  p.b = b;
  p.a.resize(M + 1);
  for (int n = 0; n <= M; ++n) {
    cplx acc = c[n];  // m = 0 term, b_0 = 1
    for (int m = 1; m <= n; ++m) acc += b(m - 1) * c[n - m];
    p.a(n) = acc;
  }
  p.dt = dt;
  p.c0 = c.front();
  p.cN = c.back();
  p.N = N;
  return p;
}

struct PadeValue {
  cplx value{0, 0};
  bool pole = false;
};

// Evaluate the continued transform at omega with damping eps:
// z = exp(i (omega + i eps) dt), G = dt * (a(z)/b(z) - c_0/2 - c_N z^N / 2).
// The end corrections make the result comparable to discrete_ft.
inline PadeValue eval_pade(const PadeApproximant& p, double omega,
                           double eps) {
  if (p.dt <= 0) throw Error("approximant is not fitted");
  const cplx z = std::exp(cplx{-eps * p.dt, omega * p.dt});
  cplx num{0, 0};
  for (int n = static_cast<int>(p.a.size()) - 1; n >= 0; --n)
    num = num * z + p.a(n);
  cplx den{0, 0};
  for (int m = static_cast<int>(p.b.size()) - 1; m >= 0; --m)
    den = den * z + p.b(m);
  den = den * z + cplx{1, 0};  // b_0
  PadeValue out;
  out.pole = std::abs(den) < 1e-12;
  const cplx zN = std::pow(z, p.N);
  out.value = p.dt * (num / den - 0.5 * p.c0 - 0.5 * p.cN * zN);
  return out;
}

inline double spectral_function(cplx g) {
  constexpr double pi = 3.14159265358979323846;
  return -g.imag() / pi;
}

struct SpectrumSeries {
  std::vector<double> omega;
  std::vector<cplx> G;
  std::vector<double> A;      // -Im G / pi
  std::vector<char> pole;     // Pade pole flags (all zero for DFT spectra)
  double eps = 0;
};

inline SpectrumSeries make_spectrum_dft(const TimeSeries& s,
                                        const std::vector<double>& omegas,
                                        double eps) {
  SpectrumSeries out;
  out.omega = omegas;
  out.eps = eps;
  for (double w : omegas) {
    const cplx g = discrete_ft(s, w, eps);
    out.G.push_back(g);
    out.A.push_back(spectral_function(g));
    out.pole.push_back(0);
  }
  return out;
}

inline SpectrumSeries make_spectrum_pade(const PadeApproximant& p,
                                         const std::vector<double>& omegas,
                                         double eps) {
  SpectrumSeries out;
  out.omega = omegas;
  out.eps = eps;
  for (double w : omegas) {
    const PadeValue pv = eval_pade(p, w, eps);
    out.G.push_back(pv.value);
    out.A.push_back(spectral_function(pv.value));
    out.pole.push_back(pv.pole ? 1 : 0);
  }
  return out;
}

// strict local maxima of A with height at least rel_threshold * max(A)
inline std::vector<double> find_peaks(const SpectrumSeries& s,
                                      double rel_threshold = 0.1) {
  std::vector<double> out;
  if (s.A.size() < 3) return out;
  const double top = *std::max_element(s.A.begin(), s.A.end());
  for (std::size_t i = 1; i + 1 < s.A.size(); ++i)
    if (s.A[i] > s.A[i - 1] && s.A[i] > s.A[i + 1] &&
        s.A[i] >= rel_threshold * top)
      out.push_back(s.omega[i]);
  return out;
}

// ------------------------------------------------- Lehmann representation
//
// Dense-spectrum oracle for the retarded single-particle Green's function of
// the Hubbard chain, spin-up sector.  Exact on registers small enough to
// diagonalize.

struct LehmannAmplitudes {
  std::shared_ptr<const EigenSystem> es;
  double e0 = 0;
  Eigen::MatrixXcd aplus;   // aplus(nu, j)  = <nu| c+_j |0>
  Eigen::MatrixXcd aminus;  // aminus(nu, j) = <nu| c_j |0>
  int N = 0;
};

inline LehmannAmplitudes lehmann_amplitudes(const PauliSum& H, int N) {
  const int nq = 2 * N;
  LehmannAmplitudes L;
  L.N = N;
  L.es = diagonalize(H, nq);
  L.e0 = L.es->evals(0);
  const long dim = L.es->evecs.rows();
  const Eigen::VectorXcd psi0 = L.es->evecs.col(0);
  L.aplus.resize(dim, N);
  L.aminus.resize(dim, N);
  StateVector sv(nq, std::vector<cplx>(dim, cplx{0, 0}));
  for (int j = 0; j < N; ++j) {
    std::copy(psi0.data(), psi0.data() + dim, sv.data());
    StateVector up = apply_sum(sv, jw_creation(j, nq));
    Eigen::Map<const Eigen::VectorXcd> upv(up.data(), dim);
    L.aplus.col(j) = L.es->evecs.adjoint() * upv;
    StateVector dn = apply_sum(sv, jw_annihilation(j, nq));
    Eigen::Map<const Eigen::VectorXcd> dnv(dn.data(), dim);
    L.aminus.col(j) = L.es->evecs.adjoint() * dnv;
  }
  return L;
}

struct LehmannKWeights {
  Eigen::VectorXcd u;  // u_nu = sum_j e^{ikj} <nu|c+_j|0>
  Eigen::VectorXcd w;  // w_nu = sum_j e^{-ikj} <nu|c_j|0>
};

inline LehmannKWeights lehmann_k_weights(const LehmannAmplitudes& L,
                                         double k) {
  const long dim = L.aplus.rows();
  LehmannKWeights kw;
  kw.u = Eigen::VectorXcd::Zero(dim);
  kw.w = Eigen::VectorXcd::Zero(dim);
  for (int j = 0; j < L.N; ++j) {
    const cplx fwd = std::exp(cplx{0, k * j});
    kw.u += fwd * L.aplus.col(j);
    kw.w += std::conj(fwd) * L.aminus.col(j);
  }
  return kw;
}

// G^R_k(omega) = (1/N) sum_nu [ |u_nu|^2 / (omega + i eps - dE_nu)
//                             + |w_nu|^2 / (omega + i eps + dE_nu) ],
// dE_nu = E_nu - E_0
inline SpectrumSeries lehmann_gfk(const LehmannAmplitudes& L, double k,
                                  const std::vector<double>& omegas,
                                  double eps) {
  const long dim = L.aplus.rows();
  const LehmannKWeights kw = lehmann_k_weights(L, k);
  const Eigen::VectorXcd& u = kw.u;
  const Eigen::VectorXcd& w = kw.w;
  SpectrumSeries out;
  out.omega = omegas;
  out.eps = eps;
  for (double om : omegas) {
    cplx g{0, 0};
    for (long nu = 0; nu < dim; ++nu) {
      const double dE = L.es->evals(nu) - L.e0;
      const double wu = std::norm(u(nu)), ww = std::norm(w(nu));
      if (wu > 1e-30) g += wu / cplx{om - dE, eps};
      if (ww > 1e-30) g += ww / cplx{om + dE, eps};
    }
    g /= static_cast<double>(L.N);
    out.G.push_back(g);
    out.A.push_back(spectral_function(g));
    out.pole.push_back(0);
  }
  return out;
}

// time-domain counterpart for one orbital pair (spin-up sites p, q):
// G^R_pq(t) = -i [ sum_nu e^{-i dE_nu t} conj(aplus(nu,p)) aplus(nu,q)
//                + sum_nu e^{+i dE_nu t} conj(aminus(nu,q)) aminus(nu,p) ]
inline TimeSeries lehmann_gf_time(const LehmannAmplitudes& L, int p, int q,
                                  const std::vector<double>& ts) {
  const long dim = L.aplus.rows();
  TimeSeries out;
  for (double t : ts) {
    cplx g{0, 0};
    for (long nu = 0; nu < dim; ++nu) {
      const double dE = L.es->evals(nu) - L.e0;
      const cplx add = std::conj(L.aplus(nu, p)) * L.aplus(nu, q);
      const cplx rem = std::conj(L.aminus(nu, q)) * L.aminus(nu, p);
      if (std::abs(add) > 1e-30) g += add * std::exp(cplx{0, -dE * t});
      if (std::abs(rem) > 1e-30) g += rem * std::exp(cplx{0, dE * t});
    }
    out.t.push_back(t);
    out.v.push_back(cplx{0, -1} * g);
  }
  return out;
}

// G^R_k(t) = -(i/N) sum_nu [ |u_nu|^2 e^{-i dE_nu t} + |w_nu|^2 e^{+i dE_nu t} ]
inline TimeSeries lehmann_gfk_time(const LehmannAmplitudes& L, double k,
                                   const std::vector<double>& ts) {
  const long dim = L.aplus.rows();
  const LehmannKWeights kw = lehmann_k_weights(L, k);
  TimeSeries out;
  for (double t : ts) {
    cplx g{0, 0};
    for (long nu = 0; nu < dim; ++nu) {
      const double dE = L.es->evals(nu) - L.e0;
      const double wu = std::norm(kw.u(nu)), ww = std::norm(kw.w(nu));
      if (wu > 1e-30) g += wu * std::exp(cplx{0, -dE * t});
      if (ww > 1e-30) g += ww * std::exp(cplx{0, dE * t});
    }
    out.t.push_back(t);
    out.v.push_back(cplx{0, -1} * g / static_cast<double>(L.N));
  }
  return out;
}

struct LehmannRow {
  long nu = 0;        // eigenstate index
  double dE = 0;      // pole position in omega
  double weight = 0;  // |S|^2 for that eigenstate (unnormalized)
};

struct LehmannTable {
  std::vector<LehmannRow> rows;  // filtered by weight threshold
  double weight_sum = 0;         // (1/N) * unfiltered sum, equals 1 at any k
};

// Individual degenerate-level weights depend on the eigenbasis choice inside
// each degenerate block; only per-pole totals are basis independent.
inline LehmannTable lehmann_table(const LehmannAmplitudes& L, double k,
                                  double threshold = 0.02) {
  const long dim = L.aplus.rows();
  const LehmannKWeights kw = lehmann_k_weights(L, k);
  LehmannTable out;
  for (long nu = 0; nu < dim; ++nu) {
    const double dE = L.es->evals(nu) - L.e0;
    const double wu = std::norm(kw.u(nu));
    const double ww = std::norm(kw.w(nu));
    out.weight_sum += (wu + ww) / L.N;
    if (wu > threshold) out.rows.push_back({nu, dE, wu});
    if (ww > threshold) out.rows.push_back({nu, -dE, ww});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const LehmannRow& x, const LehmannRow& y) {
                     return x.dE < y.dE;
                   });
  return out;
}

// total weight within |dE - pole| < tol, basis independent
inline double lehmann_pole_weight(const LehmannTable& tab, double pole,
                                  double tol = 1e-6) {
  double acc = 0;
  for (const auto& r : tab.rows)
    if (std::abs(r.dE - pole) < tol) acc += r.weight;
  return acc;
}

}  // namespace avq
