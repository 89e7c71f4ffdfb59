#pragma once
// Pauli words and weighted Pauli sums on symplectic (x,z) bitmasks.
//
// Conventions:
//   - qubit q <-> bit q of the masks (and of basis indices; qubit 0 is the LSB)
//   - a word is the operator prod_q i^{x_q z_q} X^{x_q} Z^{z_q}, i.e. Y = iXZ,
//     so the stored masks alone define a Hermitian operator with no extra phase
//   - action on a basis state:  P|b> = i^{|x&z|} (-1)^{|z&b|} |b ^ x>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace avq {

struct PauliWord {
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  int nq = 0;

  friend bool operator==(const PauliWord&, const PauliWord&) = default;

  bool is_identity() const { return x == 0 && z == 0; }
  std::uint64_t support() const { return x | z; }
  int weight() const { return popcount64(x | z); }

  // phase of P|b> relative to |b ^ x>, as an exponent k of i^k
  int phase_exponent(std::uint64_t b) const {
    return (popcount64(x & z) + 2 * parity64(z & b)) & 3;
  }
};

inline cplx phase_from_exponent(int k) {
  static constexpr cplx table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return table[k & 3];
}

// single-qubit factor letters
inline char pauli_letter(const PauliWord& w, int q) {
  const bool bx = (w.x >> q) & 1, bz = (w.z >> q) & 1;
  if (bx && bz) return 'Y';
  if (bx) return 'X';
  if (bz) return 'Z';
  return 'I';
}

inline PauliWord make_word(std::initializer_list<std::pair<char, int>> factors,
                           int nq) {
  PauliWord w;
  w.nq = nq;
  for (auto [p, q] : factors) {
    if (q < 0 || q >= nq) throw Error("qubit index out of range");
    switch (std::toupper(p)) {
      case 'X': w.x |= 1ull << q; break;
      case 'Y': w.x |= 1ull << q; w.z |= 1ull << q; break;
      case 'Z': w.z |= 1ull << q; break;
      case 'I': break;
      default: throw Error(std::string("unknown Pauli letter: ") + p);
    }
  }
  return w;
}

// same letters on a larger register (new qubits act as identity)
inline PauliWord widen_word(const PauliWord& w, int nq) {
  if (nq < w.nq) throw Error("cannot shrink word register");
  return PauliWord{w.x, w.z, nq};
}

// "X0 Y2 Z3" or "I"
inline PauliWord parse_word(const std::string& text, int nq) {
  PauliWord w;
  w.nq = nq;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    if (tok == "I") continue;
    if (tok.size() < 2) throw Error("bad Pauli factor: " + tok);
    const char p = tok[0];
    int q = 0;
    try {
      q = std::stoi(tok.substr(1));
    } catch (const std::exception&) {
      throw Error("bad qubit index in factor: " + tok);
    }
    if (q < 0 || q >= nq) throw Error("qubit index out of range: " + tok);
    const std::uint64_t bit = 1ull << q;
    if ((w.x | w.z) & bit) throw Error("repeated qubit in word: " + tok);
    switch (std::toupper(p)) {
      case 'X': w.x |= bit; break;
      case 'Y': w.x |= bit; w.z |= bit; break;
      case 'Z': w.z |= bit; break;
      default: throw Error("bad Pauli factor: " + tok);
    }
  }
  return w;
}

inline std::string format_word(const PauliWord& w) {
  if (w.is_identity()) return "I";
  std::string out;
  for (int q = 0; q < w.nq; ++q) {
    const char c = pauli_letter(w, q);
    if (c == 'I') continue;
    if (!out.empty()) out += ' ';
    out += c;
    out += std::to_string(q);
  }
  return out;
}

// true iff the words commute (symplectic form vanishes mod 2)
inline bool commutes(const PauliWord& a, const PauliWord& b) {
  return ((popcount64(a.x & b.z) + popcount64(a.z & b.x)) & 1) == 0;
}

struct PhasedWord {
  cplx phase;  // one of {1, i, -1, -i}
  PauliWord word;
};

// product a*b = phase * word
inline PhasedWord multiply(const PauliWord& a, const PauliWord& b) {
  if (a.nq != b.nq) throw Error("word size mismatch in multiply");
  PauliWord w;
  w.nq = a.nq;
  w.x = a.x ^ b.x;
  w.z = a.z ^ b.z;
  const int k = popcount64(a.x & a.z) + popcount64(b.x & b.z) -
                popcount64(w.x & w.z) + 2 * popcount64(a.z & b.x);
  return {phase_from_exponent(((k % 4) + 4) & 3), w};
}

struct WeightedPauli {
  cplx coeff;
  PauliWord word;
};

inline bool word_less(const PauliWord& a, const PauliWord& b) {
  return a.z != b.z ? a.z < b.z : a.x < b.x;
}

// Canonically ordered sum of weighted Pauli words. Terms are kept sorted,
// duplicates merged, coefficients below `merge_tol` dropped.
class PauliSum {
 public:
  static constexpr double merge_tol = 1e-12;

  PauliSum() = default;
  explicit PauliSum(int nq) : nq_(nq) {}
  PauliSum(std::initializer_list<WeightedPauli> terms, int nq) : nq_(nq) {
    for (const auto& t : terms) add_term(t.coeff, t.word);
    canonicalize();
  }

  int qubit_count() const { return nq_; }
  const std::vector<WeightedPauli>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  void add_term(cplx c, const PauliWord& w) {
    if (nq_ == 0) nq_ = w.nq;
    if (w.nq != nq_) throw Error("word size mismatch in PauliSum");
    terms_.push_back({c, w});
    dirty_ = true;
  }

  void canonicalize() {
    if (!dirty_) return;
    std::sort(terms_.begin(), terms_.end(),
              [](const WeightedPauli& a, const WeightedPauli& b) {
                return word_less(a.word, b.word);
              });
    std::vector<WeightedPauli> merged;
    merged.reserve(terms_.size());
    for (const auto& t : terms_) {
      if (!merged.empty() && merged.back().word == t.word)
        merged.back().coeff += t.coeff;
      else
        merged.push_back(t);
    }
    terms_.clear();
    for (const auto& t : merged)
      if (std::abs(t.coeff) > merge_tol) terms_.push_back(t);
    dirty_ = false;
  }

  PauliSum& operator+=(const PauliSum& o) {
    for (const auto& t : o.terms_) add_term(t.coeff, t.word);
    canonicalize();
    return *this;
  }

  PauliSum& operator*=(cplx s) {
    for (auto& t : terms_) t.coeff *= s;
    canonicalize();
    return *this;
  }

  friend PauliSum operator+(PauliSum a, const PauliSum& b) { return a += b; }
  friend PauliSum operator*(cplx s, PauliSum a) { return a *= s; }

  friend PauliSum operator*(const PauliSum& a, const PauliSum& b) {
    if (a.nq_ != b.nq_ && !a.empty() && !b.empty())
      throw Error("size mismatch in PauliSum product");
    PauliSum out(std::max(a.nq_, b.nq_));
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_) {
        auto [ph, w] = multiply(ta.word, tb.word);
        out.add_term(ta.coeff * tb.coeff * ph, w);
      }
    out.canonicalize();
    return out;
  }

  PauliSum dagger() const {
    PauliSum out(nq_);
    for (const auto& t : terms_) out.add_term(std::conj(t.coeff), t.word);
    out.canonicalize();
    return out;
  }

  bool is_hermitian(double tol = 1e-10) const {
    for (const auto& t : terms_)
      if (std::abs(t.coeff.imag()) > tol) return false;
    return true;
  }

  // number of terms with a non-identity word
  std::size_t nonidentity_count() const {
    std::size_t n = 0;
    for (const auto& t : terms_)
      if (!t.word.is_identity()) ++n;
    return n;
  }

  cplx identity_coeff() const {
    for (const auto& t : terms_)
      if (t.word.is_identity()) return t.coeff;
    return {0, 0};
  }

  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : terms_) {
      h = fnv1a(&t.word.x, sizeof t.word.x, h);
      h = fnv1a(&t.word.z, sizeof t.word.z, h);
      const double re = t.coeff.real(), im = t.coeff.imag();
      h = fnv1a(&re, sizeof re, h);
      h = fnv1a(&im, sizeof im, h);
    }
    h = fnv1a(&nq_, sizeof nq_, h);
    return h;
  }

 private:
  std::vector<WeightedPauli> terms_;
  int nq_ = 0;
  bool dirty_ = false;
};

inline std::string format_coeff(cplx c) {
  std::ostringstream out;
  out.precision(17);
  if (std::abs(c.imag()) <= 1e-15 * std::max(1.0, std::abs(c.real()))) {
    out << c.real();
  } else {
    out << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i";
  }
  return out.str();
}

inline cplx parse_coeff(const std::string& s) {
  // "<re>" or "<re>+<im>i" / "<re>-<im>i"
  if (!s.empty() && s.back() == 'i') {
    const std::string body = s.substr(0, s.size() - 1);
    std::size_t split = std::string::npos;
    for (std::size_t i = body.size(); i-- > 1;) {
      const char c = body[i];
      if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
        split = i;
        break;
      }
    }
    if (split == std::string::npos) throw Error("bad complex coefficient: " + s);
    const double re = std::stod(body.substr(0, split));
    const double im = std::stod(body.substr(split));
    return {re, im};
  }
  return {std::stod(s), 0.0};
}

// "0.5*Z0 Z1 + -0.25*X0 Y2"
inline std::string format_sum(const PauliSum& sum) {
  if (sum.empty()) return "0*I";
  std::string out;
  for (const auto& t : sum.terms()) {
    if (!out.empty()) out += " + ";
    out += format_coeff(t.coeff);
    out += '*';
    out += format_word(t.word);
  }
  return out;
}

inline PauliSum parse_sum(const std::string& text, int nq) {
  PauliSum out(nq);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(" + ", pos);
    const std::string term = text.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    pos = next == std::string::npos ? text.size() : next + 3;
    if (term.find_first_not_of(" \t") == std::string::npos) continue;
    const std::size_t star = term.find('*');
    if (star == std::string::npos) throw Error("missing '*' in term: " + term);
    const cplx c = parse_coeff(term.substr(0, star));
    const PauliWord w = parse_word(term.substr(star + 1), nq);
    if (std::abs(c) > PauliSum::merge_tol || !w.is_identity())
      out.add_term(c, w);
  }
  out.canonicalize();
  return out;
}

}  // namespace avq
