#pragma once
// Dense statevector on n qubits (basis index bit q = qubit q, qubit 0 = LSB)
// with the gate set needed here: Pauli words, Pauli rotations, controlled
// Pauli words, Hadamard, S, and expectation/variance of Pauli sums.
// The raw kernels operate on amplitude arrays so they can also be applied
// to rows of tangent-state matrices.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "pauli.hpp"

namespace avq {

// ------------------------------------------------------------ raw kernels

inline void kernel_apply_pauli(cplx* amp, std::size_t dim, const PauliWord& w) {
  const std::uint64_t x = w.x, z = w.z;
  const cplx gphase = phase_from_exponent(popcount64(x & z));
  if (x == 0) {
    for (std::size_t b = 0; b < dim; ++b) {
      cplx v = amp[b] * gphase;
      if (parity64(z & b)) v = -v;
      amp[b] = v;
    }
    return;
  }
  const std::uint64_t pivot = x & (~x + 1);
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & pivot) continue;
    const std::size_t bp = b ^ x;
    cplx va = amp[b] * gphase, vb = amp[bp] * gphase;
    if (parity64(z & b)) va = -va;
    if (parity64(z & bp)) vb = -vb;
    amp[bp] = va;  // P|b> lands on |b^x>
    amp[b] = vb;
  }
}

// amp <- (cos(theta) - i sin(theta) P) amp
inline void kernel_apply_rotation(cplx* amp, std::size_t dim,
                                  const PauliWord& w, double theta) {
  const double c = std::cos(theta), sn = std::sin(theta);
  const cplx mis{0, -sn};
  const std::uint64_t x = w.x, z = w.z;
  const cplx gphase = phase_from_exponent(popcount64(x & z));
  if (x == 0) {
    const cplx f0 = cplx{c, 0} + mis * gphase;
    const cplx f1 = cplx{c, 0} - mis * gphase;
    for (std::size_t b = 0; b < dim; ++b) amp[b] *= parity64(z & b) ? f1 : f0;
    return;
  }
  const std::uint64_t pivot = x & (~x + 1);
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & pivot) continue;
    const std::size_t bp = b ^ x;
    cplx pa = amp[b] * gphase, pb = amp[bp] * gphase;
    if (parity64(z & b)) pa = -pa;   // phase of P|b>
    if (parity64(z & bp)) pb = -pb;  // phase of P|bp>
    const cplx nb = cplx{c, 0} * amp[b] + mis * pb;
    const cplx nbp = cplx{c, 0} * amp[bp] + mis * pa;
    amp[b] = nb;
    amp[bp] = nbp;
  }
}

inline void kernel_apply_controlled_pauli(cplx* amp, std::size_t dim,
                                          int control, const PauliWord& w,
                                          int control_value) {
  const std::uint64_t cbit = 1ull << control;
  const std::uint64_t want = control_value ? cbit : 0;
  const std::uint64_t x = w.x, z = w.z;
  const cplx gphase = phase_from_exponent(popcount64(x & z));
  if (x == 0) {
    for (std::size_t b = 0; b < dim; ++b) {
      if ((b & cbit) != want) continue;
      cplx v = amp[b] * gphase;
      if (parity64(z & b)) v = -v;
      amp[b] = v;
    }
    return;
  }
  const std::uint64_t pivot = x & (~x + 1);
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & pivot) continue;
    if ((b & cbit) != want) continue;  // x never touches the control
    const std::size_t bp = b ^ x;
    cplx va = amp[b] * gphase, vb = amp[bp] * gphase;
    if (parity64(z & b)) va = -va;
    if (parity64(z & bp)) vb = -vb;
    amp[bp] = va;
    amp[b] = vb;
  }
}

inline void kernel_apply_hadamard(cplx* amp, std::size_t dim, int q) {
  const std::uint64_t bit = 1ull << q;
  const double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & bit) continue;
    const std::size_t bp = b | bit;
    const cplx a0 = amp[b], a1 = amp[bp];
    amp[b] = (a0 + a1) * inv;
    amp[bp] = (a0 - a1) * inv;
  }
}

inline void kernel_apply_sgate(cplx* amp, std::size_t dim, int q) {
  const std::uint64_t bit = 1ull << q;
  for (std::size_t b = 0; b < dim; ++b)
    if (b & bit) amp[b] *= cplx{0, 1};
}

// --------------------------------------------------------------- the state

class StateVector {
 public:
  StateVector() = default;
  StateVector(int nq, std::vector<cplx> amp) : nq_(nq), amp_(std::move(amp)) {
    if (amp_.size() != (std::size_t{1} << nq_))
      throw Error("amplitude count does not match qubit count");
  }

  static StateVector zero_state(int nq) {
    StateVector s;
    s.nq_ = nq;
    s.amp_.assign(std::size_t{1} << nq, {0, 0});
    s.amp_[0] = {1, 0};
    return s;
  }

  static StateVector basis_state(int nq, std::uint64_t index) {
    if (index >= (std::uint64_t{1} << nq)) throw Error("basis index out of range");
    StateVector s;
    s.nq_ = nq;
    s.amp_.assign(std::size_t{1} << nq, {0, 0});
    s.amp_[index] = {1, 0};
    return s;
  }

  // bits[i] is the value of qubit i ('0'/'1'), e.g. "11000011"
  static StateVector from_bitstring(const std::string& bits) {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1')
        index |= 1ull << i;
      else if (bits[i] != '0')
        throw Error("bitstring must contain only 0/1");
    }
    return basis_state(static_cast<int>(bits.size()), index);
  }

  int qubit_count() const { return nq_; }
  std::size_t dim() const { return amp_.size(); }
  const std::vector<cplx>& amplitudes() const { return amp_; }
  std::vector<cplx>& amplitudes() { return amp_; }
  cplx* data() { return amp_.data(); }
  const cplx* data() const { return amp_.data(); }
  cplx& operator[](std::size_t i) { return amp_[i]; }
  const cplx& operator[](std::size_t i) const { return amp_[i]; }

  double norm() const {
    double s = 0;
    for (const auto& a : amp_) s += std::norm(a);
    return std::sqrt(s);
  }

  void normalize() {
    const double n = norm();
    if (n == 0) throw Error("cannot normalize zero state");
    const double inv = 1.0 / n;
    for (auto& a : amp_) a *= inv;
  }

  void scale(cplx s) {
    for (auto& a : amp_) a *= s;
  }

 private:
  int nq_ = 0;
  std::vector<cplx> amp_;
};

inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw Error("dimension mismatch in inner product");
  cplx s{0, 0};
  const auto& av = a.amplitudes();
  const auto& bv = b.amplitudes();
  for (std::size_t i = 0; i < av.size(); ++i) s += std::conj(av[i]) * bv[i];
  return s;
}

inline double fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(inner(a, b));
}

inline void apply_pauli_inplace(StateVector& s, const PauliWord& w) {
  if (w.nq != s.qubit_count()) throw Error("word size mismatch");
  kernel_apply_pauli(s.data(), s.dim(), w);
}

inline StateVector apply_pauli(StateVector s, const PauliWord& w) {
  apply_pauli_inplace(s, w);
  return s;
}

// |s> <- exp(-i theta P)|s> = cos(theta)|s> - i sin(theta) P|s>
inline void apply_rotation_inplace(StateVector& s, const PauliWord& w,
                                   double theta) {
  if (w.nq != s.qubit_count()) throw Error("word size mismatch");
  kernel_apply_rotation(s.data(), s.dim(), w, theta);
}

inline StateVector apply_rotation(StateVector s, const PauliWord& w,
                                  double theta) {
  apply_rotation_inplace(s, w, theta);
  return s;
}

// controlled Pauli word: applies w to components where qubit `control`
// equals `control_value`; w must not touch the control qubit
inline void apply_controlled_pauli_inplace(StateVector& s, int control,
                                           const PauliWord& w,
                                           int control_value = 1) {
  if (w.nq != s.qubit_count()) throw Error("word size mismatch");
  if (control < 0 || control >= s.qubit_count())
    throw Error("control qubit out of range");
  if ((w.support() >> control) & 1)
    throw Error("control qubit overlaps word support");
  kernel_apply_controlled_pauli(s.data(), s.dim(), control, w, control_value);
}

inline void apply_hadamard_inplace(StateVector& s, int q) {
  if (q < 0 || q >= s.qubit_count()) throw Error("qubit out of range");
  kernel_apply_hadamard(s.data(), s.dim(), q);
}

// S = diag(1, i) on qubit q
inline void apply_sgate_inplace(StateVector& s, int q) {
  if (q < 0 || q >= s.qubit_count()) throw Error("qubit out of range");
  kernel_apply_sgate(s.data(), s.dim(), q);
}

// |out> = O|s> for a Pauli sum O
inline StateVector apply_sum(const StateVector& s, const PauliSum& O) {
  if (O.qubit_count() != s.qubit_count() && !O.empty())
    throw Error("sum size mismatch");
  StateVector out = s;
  auto& acc = out.amplitudes();
  std::fill(acc.begin(), acc.end(), cplx{0, 0});
  for (const auto& t : O.terms()) {
    const std::uint64_t x = t.word.x, z = t.word.z;
    const cplx pref = t.coeff * phase_from_exponent(popcount64(x & z));
    const auto& amp = s.amplitudes();
    for (std::size_t b = 0; b < amp.size(); ++b) {
      cplx v = amp[b] * pref;
      if (parity64(z & b)) v = -v;
      acc[b ^ x] += v;
    }
  }
  return out;
}

inline double expectation(const StateVector& s, const PauliSum& O) {
  if (!O.is_hermitian()) throw Error("expectation of non-Hermitian operator");
  const StateVector Os = apply_sum(s, O);
  return inner(s, Os).real();
}

inline double expectation(const StateVector& s, const PauliWord& w) {
  StateVector ws = apply_pauli(s, w);
  return inner(s, ws).real();
}

// (<H>, var H) computed from a single H|s>
inline std::pair<double, double> mean_and_variance(const StateVector& s,
                                                   const PauliSum& O) {
  if (!O.is_hermitian()) throw Error("variance of non-Hermitian operator");
  const StateVector Os = apply_sum(s, O);
  const double mean = inner(s, Os).real();
  double h2 = 0;
  for (const auto& a : Os.amplitudes()) h2 += std::norm(a);
  return {mean, h2 - mean * mean};
}

// probability that qubit q reads `value`
inline double qubit_probability(const StateVector& s, int q, int value) {
  if (q < 0 || q >= s.qubit_count()) throw Error("qubit out of range");
  const std::uint64_t bit = 1ull << q;
  double p = 0;
  const auto& amp = s.amplitudes();
  for (std::size_t b = 0; b < amp.size(); ++b)
    if (((b & bit) != 0) == (value != 0)) p += std::norm(amp[b]);
  return p;
}

// unnormalized branch <q = value| s > on the remaining qubits
inline StateVector extract_branch(const StateVector& s, int q, int value) {
  if (q < 0 || q >= s.qubit_count()) throw Error("qubit out of range");
  const int nq = s.qubit_count() - 1;
  std::vector<cplx> amp(std::size_t{1} << nq);
  const std::uint64_t bit = 1ull << q;
  const std::uint64_t low = bit - 1;
  for (std::size_t b = 0; b < amp.size(); ++b) {
    const std::uint64_t full = (b & low) | ((b & ~low) << 1) | (value ? bit : 0);
    amp[b] = s.amplitudes()[full];
  }
  return StateVector(nq, std::move(amp));
}

// raw little-endian dump: interleaved re/im 64-bit doubles, index order
inline void dump_amplitudes(const StateVector& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (const auto& a : s.amplitudes()) {
    const double re = a.real(), im = a.imag();
    out.write(reinterpret_cast<const char*>(&re), sizeof re);
    out.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
}

inline StateVector load_amplitudes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open " + path);
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 16 != 0) throw Error("amplitude dump has odd size");
  const std::size_t dim = bytes / 16;
  const int nq = log2_exact(dim);
  in.seekg(0);
  std::vector<cplx> amp(dim);
  for (auto& a : amp) {
    double re, im;
    in.read(reinterpret_cast<char*>(&re), sizeof re);
    in.read(reinterpret_cast<char*>(&im), sizeof im);
    a = {re, im};
  }
  return StateVector(nq, std::move(amp));
}

}  // namespace avq
