#pragma once
// Dense exact-diagonalization oracle: Pauli-sum <-> dense conversion,
// eigendecomposition with a per-Hamiltonian cache, exact time evolution,
// reference-trajectory propagation and infidelity tracking.

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "core.hpp"
#include "pauli.hpp"
#include "statevector.hpp"

namespace avq {

inline constexpr int kDenseQubitCap = 14;   // dense conversion refuses above
inline constexpr int kPauliScanCap = 8;     // matrix_to_pauli scan refuses above

inline Eigen::MatrixXcd pauli_to_matrix(const PauliSum& sum, int nq) {
  if (nq > kDenseQubitCap)
    throw Error("dense conversion capped at " + std::to_string(kDenseQubitCap) +
                " qubits");
  const std::size_t dim = std::size_t{1} << nq;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : sum.terms()) {
    if (t.word.nq > nq) throw Error("word does not fit the register");
    const std::uint64_t x = t.word.x, z = t.word.z;
    const cplx pref = t.coeff * phase_from_exponent(popcount64(x & z));
    for (std::size_t c = 0; c < dim; ++c) {
      cplx v = pref;
      if (parity64(z & c)) v = -v;
      m(c ^ x, c) += v;  // P|c> = phi(c)|c^x>
    }
  }
  return m;
}

// projects a dense Hermitian matrix onto the Pauli basis
inline PauliSum matrix_to_pauli(const Eigen::MatrixXcd& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) throw Error("matrix is not square");
  const std::size_t dim = static_cast<std::size_t>(m.rows());
  const int nq = log2_exact(dim);
  if (nq > kPauliScanCap)
    throw Error("matrix_to_pauli scan capped at " +
                std::to_string(kPauliScanCap) + " qubits");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw Error("matrix is not Hermitian");
  PauliSum out(nq);
  const double inv = 1.0 / static_cast<double>(dim);
  for (std::uint64_t x = 0; x < dim; ++x) {
    for (std::uint64_t z = 0; z < dim; ++z) {
      const PauliWord w{x, z, nq};
      // c_P = Tr(P m)/2^n with Tr(P m) = sum_c phi(c^x) m(c^x, c)
      cplx tr{0, 0};
      for (std::size_t c = 0; c < dim; ++c) {
        cplx v = m(c ^ x, c);
        if (parity64(z & (c ^ x))) v = -v;
        tr += v;
      }
      tr *= phase_from_exponent(popcount64(x & z));
      const cplx coeff = tr * inv;
      if (std::abs(coeff) > tol) out.add_term(coeff, w);
    }
  }
  out.canonicalize();
  return out;
}

// re-register a sum on a wider register (masks unchanged)
inline PauliSum embed(const PauliSum& sum, int new_nq) {
  PauliSum out(new_nq);
  for (const auto& t : sum.terms()) {
    if (t.word.nq > new_nq) throw Error("cannot shrink a Pauli sum");
    PauliWord w = t.word;
    w.nq = new_nq;
    out.add_term(t.coeff, w);
  }
  out.canonicalize();
  return out;
}

struct EigenSystem {
  int nq = 0;
  Eigen::VectorXd evals;
  Eigen::MatrixXcd evecs;  // columns are eigenvectors
};

// diagonalization cache keyed by (content hash, register size)
inline std::shared_ptr<const EigenSystem> diagonalize(const PauliSum& H,
                                                      int nq) {
  static std::map<std::pair<std::uint64_t, int>,
                  std::shared_ptr<const EigenSystem>>
      cache;
  static std::mutex mtx;
  const auto key = std::make_pair(H.content_hash(), nq);
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto es = std::make_shared<EigenSystem>();
  es->nq = nq;
  const Eigen::MatrixXcd m = pauli_to_matrix(H, nq);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  es->evals = solver.eigenvalues();
  es->evecs = solver.eigenvectors();
  std::lock_guard<std::mutex> lock(mtx);
  cache[key] = es;
  return es;
}

inline StateVector ground_state(const EigenSystem& es) {
  std::vector<cplx> amp(es.evecs.rows());
  for (Eigen::Index i = 0; i < es.evecs.rows(); ++i) amp[i] = es.evecs(i, 0);
  return StateVector(es.nq, std::move(amp));
}

inline double ground_energy(const EigenSystem& es) { return es.evals(0); }

// |psi(t)> = V exp(-i E t) V^dag |psi(0)>
inline StateVector exact_evolve(const StateVector& s, const EigenSystem& es,
                                double t) {
  if (s.dim() != static_cast<std::size_t>(es.evecs.rows()))
    throw Error("dimension mismatch in exact_evolve");
  Eigen::Map<const Eigen::VectorXcd> v(s.amplitudes().data(), s.dim());
  Eigen::VectorXcd coeff = es.evecs.adjoint() * v;
  for (Eigen::Index i = 0; i < coeff.size(); ++i)
    coeff(i) *= std::exp(cplx{0, -es.evals(i) * t});
  Eigen::VectorXcd out = es.evecs * coeff;
  std::vector<cplx> amp(out.data(), out.data() + out.size());
  return StateVector(es.nq, std::move(amp));
}

// fixed initial state, evaluated at arbitrary t through the eigenbasis
class EvolvingReference {
 public:
  EvolvingReference() = default;
  EvolvingReference(std::shared_ptr<const EigenSystem> es, const StateVector& s0)
      : es_(std::move(es)) {
    Eigen::Map<const Eigen::VectorXcd> v(s0.amplitudes().data(), s0.dim());
    coeff_ = es_->evecs.adjoint() * v;
  }

  StateVector at(double t) const {
    Eigen::VectorXcd c = coeff_;
    for (Eigen::Index i = 0; i < c.size(); ++i)
      c(i) *= std::exp(cplx{0, -es_->evals(i) * t});
    Eigen::VectorXcd out = es_->evecs * c;
    std::vector<cplx> amp(out.data(), out.data() + out.size());
    return StateVector(es_->nq, std::move(amp));
  }

  // 1 - |<psi | exact(t)>|^2 without materializing the full state twice
  double infidelity(const StateVector& psi, double t) const {
    const StateVector ref = at(t);
    return std::max(0.0, 1.0 - fidelity(psi, ref));
  }

 private:
  std::shared_ptr<const EigenSystem> es_;
  Eigen::VectorXcd coeff_;
};

// uniform-mesh reference trajectory (t_n = n dt up to and including t_max)
inline std::vector<std::pair<double, StateVector>> propagate_reference(
    const StateVector& s0, std::shared_ptr<const EigenSystem> es, double t_max,
    double dt = 0.002) {
  if (dt <= 0 || t_max < 0) throw Error("bad propagation mesh");
  EvolvingReference ref(std::move(es), s0);
  std::vector<std::pair<double, StateVector>> out;
  const std::size_t steps = static_cast<std::size_t>(t_max / dt + 0.5);
  out.reserve(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    out.emplace_back(t, ref.at(t));
  }
  return out;
}

}  // namespace avq
