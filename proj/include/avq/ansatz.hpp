#pragma once
// Pseudo-Trotter ansatz: an ordered circuit of Pauli rotations
// exp(-i theta_mu A_mu) interleaved with fixed gates (Pauli words,
// ancilla-controlled Pauli words, Hadamard, S), applied to a fixed
// reference state. Rotations carry a segment tag naming the unitary
// block they belong to (ground preparation, tau propagation, t
// propagation).

#include <vector>

#include "core.hpp"
#include "pauli.hpp"
#include "statevector.hpp"

namespace avq {

enum class Segment { ground, tau, t };

inline const char* segment_name(Segment s) {
  switch (s) {
    case Segment::ground: return "ground";
    case Segment::tau: return "tau";
    case Segment::t: return "t";
  }
  return "?";
}

struct RotationStep {
  PauliWord gen;
  double theta = 0.0;
  Segment seg = Segment::ground;
};

struct FixedGate {
  enum class Kind { pauli, controlled_pauli, hadamard, sgate };
  Kind kind = Kind::pauli;
  PauliWord word{};        // pauli / controlled_pauli payload
  int qubit = -1;          // H/S target; control qubit for controlled_pauli
  int control_value = 1;
};

inline void kernel_apply_fixed_gate(cplx* amp, std::size_t dim,
                                    const FixedGate& g) {
  switch (g.kind) {
    case FixedGate::Kind::pauli:
      kernel_apply_pauli(amp, dim, g.word);
      break;
    case FixedGate::Kind::controlled_pauli:
      kernel_apply_controlled_pauli(amp, dim, g.qubit, g.word, g.control_value);
      break;
    case FixedGate::Kind::hadamard:
      kernel_apply_hadamard(amp, dim, g.qubit);
      break;
    case FixedGate::Kind::sgate:
      kernel_apply_sgate(amp, dim, g.qubit);
      break;
  }
}

inline void apply_fixed_gate(StateVector& s, const FixedGate& g) {
  switch (g.kind) {
    case FixedGate::Kind::pauli:
      apply_pauli_inplace(s, g.word);
      break;
    case FixedGate::Kind::controlled_pauli:
      apply_controlled_pauli_inplace(s, g.qubit, g.word, g.control_value);
      break;
    case FixedGate::Kind::hadamard:
      apply_hadamard_inplace(s, g.qubit);
      break;
    case FixedGate::Kind::sgate:
      apply_sgate_inplace(s, g.qubit);
      break;
  }
}

class Ansatz {
 public:
  struct Item {
    bool is_rotation;
    int index;  // into rotations() or fixed_gates()
  };

  Ansatz() = default;
  explicit Ansatz(StateVector reference) : ref_(std::move(reference)) {}

  const StateVector& reference() const { return ref_; }
  int qubit_count() const { return ref_.qubit_count(); }

  int rotation_count() const { return static_cast<int>(rot_.size()); }
  const std::vector<RotationStep>& rotations() const { return rot_; }
  const std::vector<FixedGate>& fixed_gates() const { return fix_; }
  const std::vector<Item>& order() const { return order_; }

  double theta(int mu) const { return rot_.at(mu).theta; }
  void set_theta(int mu, double v) { rot_.at(mu).theta = v; }

  std::vector<double> thetas() const {
    std::vector<double> out(rot_.size());
    for (std::size_t i = 0; i < rot_.size(); ++i) out[i] = rot_[i].theta;
    return out;
  }

  void set_thetas(const std::vector<double>& v) {
    if (v.size() != rot_.size()) throw Error("theta count mismatch");
    for (std::size_t i = 0; i < rot_.size(); ++i) rot_[i].theta = v[i];
  }

  int append_rotation(const PauliWord& gen, Segment seg, double theta = 0.0) {
    if (gen.nq != ref_.qubit_count()) throw Error("generator register mismatch");
    rot_.push_back({gen, theta, seg});
    order_.push_back({true, static_cast<int>(rot_.size()) - 1});
    return static_cast<int>(rot_.size()) - 1;
  }

  void append_fixed(const FixedGate& g) {
    const int nq = ref_.qubit_count();
    switch (g.kind) {
      case FixedGate::Kind::pauli:
        if (g.word.nq != nq) throw Error("fixed gate register mismatch");
        break;
      case FixedGate::Kind::controlled_pauli:
        if (g.word.nq != nq) throw Error("fixed gate register mismatch");
        if (g.qubit < 0 || g.qubit >= nq) throw Error("control qubit out of range");
        if ((g.word.support() >> g.qubit) & 1)
          throw Error("control qubit overlaps word support");
        break;
      case FixedGate::Kind::hadamard:
      case FixedGate::Kind::sgate:
        if (g.qubit < 0 || g.qubit >= nq) throw Error("gate qubit out of range");
        break;
    }
    fix_.push_back(g);
    order_.push_back({false, static_cast<int>(fix_.size()) - 1});
  }

  StateVector prepare() const {
    StateVector s = ref_;
    for (const auto& it : order_) {
      if (it.is_rotation) {
        const auto& r = rot_[it.index];
        apply_rotation_inplace(s, r.gen, r.theta);
      } else {
        apply_fixed_gate(s, fix_[it.index]);
      }
    }
    return s;
  }

  // d|Psi>/d theta_mu: insert (-i A_mu) right after rotation mu
  StateVector derivative_state(int mu) const {
    if (mu < 0 || mu >= rotation_count()) throw Error("rotation index out of range");
    StateVector s = ref_;
    for (const auto& it : order_) {
      if (it.is_rotation) {
        const auto& r = rot_[it.index];
        apply_rotation_inplace(s, r.gen, r.theta);
        if (it.index == mu) {
          apply_pauli_inplace(s, r.gen);
          s.scale(cplx{0, -1});
        }
      } else {
        apply_fixed_gate(s, fix_[it.index]);
      }
    }
    return s;
  }

 private:
  StateVector ref_;
  std::vector<RotationStep> rot_;
  std::vector<FixedGate> fix_;
  std::vector<Item> order_;
};

}  // namespace avq
