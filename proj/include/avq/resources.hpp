#pragma once
// CNOT and depth accounting for pseudo-Trotter circuits under all-to-all
// connectivity. Only variational rotation steps are counted; fixed gates
// (measurement shell, controlled insertions) are costed separately once.

#include <algorithm>
#include <vector>

#include "ansatz.hpp"

namespace avq {

// a weight-p Pauli rotation compiles to 2(p-1) CNOTs; weight-1 costs none
inline long cnot_count(const Ansatz& a) {
  long total = 0;
  for (const auto& r : a.rotations()) {
    const int p = r.gen.weight();
    if (p > 1) total += 2L * (p - 1);
  }
  return total;
}

// greedy layering: each rotation lands on the earliest layer after every
// earlier rotation that shares a qubit with it; reference prep is layer 0
inline int circuit_depth(const Ansatz& a) {
  std::vector<int> last(a.qubit_count(), 0);
  int depth = 0;
  for (const auto& it : a.order()) {
    if (!it.is_rotation) continue;
    const auto& r = a.rotations()[it.index];
    const std::uint64_t sup = r.gen.support();
    int layer = 0;
    for (int q = 0; q < a.qubit_count(); ++q)
      if ((sup >> q) & 1) layer = std::max(layer, last[q]);
    ++layer;
    for (int q = 0; q < a.qubit_count(); ++q)
      if ((sup >> q) & 1) last[q] = layer;
    depth = std::max(depth, layer);
  }
  return depth;
}

// fixed-shell cost, reported once per circuit: each controlled Pauli word of
// weight p is charged p CNOT-equivalents (one controlled single-qubit Pauli
// per factor under all-to-all connectivity)
inline long shell_cnot_cost(const Ansatz& a) {
  long total = 0;
  for (const auto& g : a.fixed_gates())
    if (g.kind == FixedGate::Kind::controlled_pauli) total += g.word.weight();
  return total;
}

struct ResourceRecord {
  double time = 0;
  long cnots = 0;
  int depth = 0;
  int n_theta = 0;
};

using ResourceTrace = std::vector<ResourceRecord>;

}  // namespace avq
