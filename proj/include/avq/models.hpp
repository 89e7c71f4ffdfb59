#pragma once
// Model builders: particle-hole symmetric Fermi-Hubbard chains under
// Jordan-Wigner, and the spin-1 antiferromagnetic chain with a
// Dzyaloshinskii-Moriya term under a Gray-code qubit encoding.
// Also the operator pools used by the adaptive algorithms.
//
// Hubbard register layout: spin-up orbital of site i -> qubit i,
// spin-down -> qubit N + i (sites are 0-based internally).
// Spin register layout: site j -> qubits (2j, 2j+1); per-site code
// |m=+1> = (q_{2j+1} q_{2j}) = 00, |m=0> = 01, |m=-1> = 11, 10 unused.

#include <vector>

#include "core.hpp"
#include "exact.hpp"
#include "pauli.hpp"
#include "statevector.hpp"

namespace avq {

// ---------------------------------------------------------------- fermions

// c_p = (prod_{j<p} Z_j) (X_p + i Y_p)/2
inline PauliSum jw_annihilation(int p, int nq) {
  if (p < 0 || p >= nq) throw Error("mode index out of range");
  PauliWord xw, yw;
  xw.nq = yw.nq = nq;
  const std::uint64_t string = (1ull << p) - 1;
  xw.z = yw.z = string;
  xw.x = 1ull << p;
  yw.x = 1ull << p;
  yw.z |= 1ull << p;
  PauliSum out(nq);
  out.add_term({0.5, 0.0}, xw);
  out.add_term({0.0, 0.5}, yw);
  out.canonicalize();
  return out;
}

inline PauliSum jw_creation(int p, int nq) { return jw_annihilation(p, nq).dagger(); }

inline PauliSum jw_number(int p, int nq) {
  return jw_creation(p, nq) * jw_annihilation(p, nq);
}

// H = -t sum_{sigma,i} (c+_{sigma,i} c_{sigma,i+1} + h.c.)
//     + U sum_i n_up n_dn - U/2 sum_i (n_up + n_dn),  open boundary
inline PauliSum hubbard_hamiltonian(int N, double t, double U) {
  if (N < 2) throw Error("need at least two sites");
  const int nq = 2 * N;
  PauliSum H(nq);
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i + 1 < N; ++i) {
      const int p = s * N + i, q = s * N + i + 1;
      PauliSum hop = jw_creation(p, nq) * jw_annihilation(q, nq) +
                     jw_creation(q, nq) * jw_annihilation(p, nq);
      hop *= cplx{-t, 0};
      H += hop;
    }
  }
  for (int i = 0; i < N; ++i) {
    const PauliSum nu = jw_number(i, nq), nd = jw_number(N + i, nq);
    H += cplx{U, 0} * (nu * nd);
    H += cplx{-U / 2, 0} * (nu + nd);
  }
  H.canonicalize();
  return H;
}

// half filling: up electrons on sites 0..N/2-1, down on sites N/2..N-1
inline StateVector hubbard_reference(int N) {
  if (N % 2 != 0) throw Error("half-filled reference needs even N");
  std::uint64_t index = 0;
  for (int i = 0; i < N / 2; ++i) index |= 1ull << i;
  for (int i = N / 2; i < N; ++i) index |= 1ull << (N + i);
  return StateVector::basis_state(2 * N, index);
}

// ------------------------------------------------------------------- spins

// spin-1 matrices in the basis {m=+1, m=0, m=-1}, embedded into the
// Gray-coded 2-qubit space (local index = 2*q_b + q_a; 2 is the unused row)
inline Eigen::MatrixXcd spin1_embedded(char axis) {
  Eigen::Matrix3cd s3 = Eigen::Matrix3cd::Zero();
  const double r = 1.0 / std::sqrt(2.0);
  switch (axis) {
    case 'z':
      s3.diagonal() << 1, 0, -1;
      break;
    case 'x':
      s3(0, 1) = s3(1, 0) = s3(1, 2) = s3(2, 1) = r;
      break;
    case 'y':
      s3(0, 1) = s3(1, 2) = cplx{0, -r};
      s3(1, 0) = s3(2, 1) = cplx{0, r};
      break;
    default:
      throw Error("axis must be one of x, y, z");
  }
  static constexpr int rows[3] = {0, 1, 3};  // +1 -> 00, 0 -> 01, -1 -> 11
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(4, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(rows[i], rows[j]) = s3(i, j);
  return out;
}

// S^axis on site j of an N-site chain (register of 2N qubits)
inline PauliSum spin_operator(char axis, int site, int N) {
  if (site < 0 || site >= N) throw Error("site index out of range");
  const PauliSum local = matrix_to_pauli(spin1_embedded(axis));
  PauliSum out(2 * N);
  for (const auto& t : local.terms()) {
    PauliWord w;
    w.nq = 2 * N;
    w.x = t.word.x << (2 * site);
    w.z = t.word.z << (2 * site);
    out.add_term(t.coeff, w);
  }
  out.canonicalize();
  return out;
}

// H = J sum_i S_i . S_{i+1} - D sum_i (S_i x S_{i+1})_y,  open boundary
inline PauliSum spin_chain_hamiltonian(int N, double J, double D) {
  if (N < 2) throw Error("need at least two sites");
  PauliSum H(2 * N);
  for (int i = 0; i + 1 < N; ++i) {
    for (char axis : {'x', 'y', 'z'}) {
      H += cplx{J, 0} *
           (spin_operator(axis, i, N) * spin_operator(axis, i + 1, N));
    }
    H += cplx{-D, 0} *
         (spin_operator('z', i, N) * spin_operator('x', i + 1, N) +
          cplx{-1, 0} * (spin_operator('x', i, N) * spin_operator('z', i + 1, N)));
  }
  H.canonicalize();
  return H;
}

inline PauliSum total_sz(int N) {
  PauliSum out(2 * N);
  for (int j = 0; j < N; ++j) out += spin_operator('z', j, N);
  out.canonicalize();
  return out;
}

// |0...0> encodes all sites in m=+1
inline StateVector spin_reference(int N) {
  return StateVector::zero_state(2 * N);
}

// -------------------------------------------------------------------- pools

// non-identity words of a Hamiltonian, unit coefficients
inline std::vector<PauliWord> pool_hamiltonian(const PauliSum& H) {
  std::vector<PauliWord> out;
  for (const auto& t : H.terms())
    if (!t.word.is_identity()) out.push_back(t.word);
  return out;
}

// qubit-UCCSD-style pool: all two-qubit and four-qubit X/Y words with an
// odd number of Y factors
inline std::vector<PauliWord> pool_uccsd_qubit(int nq) {
  std::vector<PauliWord> out;
  auto push = [&](std::initializer_list<std::pair<char, int>> f) {
    out.push_back(make_word(f, nq));
  };
  for (int i = 0; i < nq; ++i)
    for (int j = i + 1; j < nq; ++j) {
      push({{'X', i}, {'Y', j}});
      push({{'Y', i}, {'X', j}});
    }
  const char letters[2] = {'X', 'Y'};
  for (int i = 0; i < nq; ++i)
    for (int j = i + 1; j < nq; ++j)
      for (int k = j + 1; k < nq; ++k)
        for (int l = k + 1; l < nq; ++l)
          for (int m = 0; m < 16; ++m) {
            if ((popcount64(m) & 1) == 0) continue;  // odd number of Y
            push({{letters[(m >> 0) & 1], i},
                  {letters[(m >> 1) & 1], j},
                  {letters[(m >> 2) & 1], k},
                  {letters[(m >> 3) & 1], l}});
          }
  return out;
}

// spin ground-state pool: { Y_i } U { Y_i Z_{i+1} } U { Z_i Y_{i+1} }
inline std::vector<PauliWord> pool_spin_gs(int nq) {
  std::vector<PauliWord> out;
  for (int i = 0; i < nq; ++i) out.push_back(make_word({{'Y', i}}, nq));
  for (int i = 0; i + 1 < nq; ++i) {
    out.push_back(make_word({{'Y', i}, {'Z', i + 1}}, nq));
    out.push_back(make_word({{'Z', i}, {'Y', i + 1}}, nq));
  }
  return out;
}

// spin dynamics pool: every one-qubit word plus every two-qubit word
inline std::vector<PauliWord> pool_spin_dyn(int nq) {
  std::vector<PauliWord> out;
  for (int i = 0; i < nq; ++i)
    for (char p : {'X', 'Y', 'Z'}) out.push_back(make_word({{p, i}}, nq));
  for (int i = 0; i < nq; ++i)
    for (int j = i + 1; j < nq; ++j)
      for (char p : {'X', 'Y', 'Z'})
        for (char q : {'X', 'Y', 'Z'})
          out.push_back(make_word({{p, i}, {q, j}}, nq));
  return out;
}

}  // namespace avq
