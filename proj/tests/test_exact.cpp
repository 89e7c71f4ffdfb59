#include <catch2/catch_amalgamated.hpp>

#include "avq/exact.hpp"
#include "avq/models.hpp"
#include "oracle.hpp"

using namespace avq;
using Catch::Approx;

TEST_CASE("pauli_to_matrix matches the kron oracle") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const int nq = 1 + trial % 3;
    const PauliSum s = oracle::random_hermitian_sum(nq, 4, rng);
    const Eigen::MatrixXcd got = pauli_to_matrix(s, nq);
    const Eigen::MatrixXcd want = oracle::dense_sum(s);
    REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("matrix_to_pauli round trips random Hermitian sums") {
  std::mt19937 rng(32);
  for (int nq = 1; nq <= 3; ++nq) {
    const PauliSum s = oracle::random_hermitian_sum(nq, 6, rng);
    const PauliSum back = matrix_to_pauli(pauli_to_matrix(s, nq));
    const Eigen::MatrixXcd diff =
        oracle::dense_sum(back) - oracle::dense_sum(s);
    REQUIRE(diff.cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(back.size() == s.size());
  }
}

TEST_CASE("matrix_to_pauli on small diagonal gates") {
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(2, 2);
  z(0, 0) = 1;
  z(1, 1) = -1;
  const PauliSum sz = matrix_to_pauli(z);
  REQUIRE(sz.size() == 1);
  CHECK(sz.terms()[0].word == parse_word("Z0", 1));

  Eigen::MatrixXcd cz = Eigen::MatrixXcd::Identity(4, 4);
  cz(3, 3) = -1;
  const PauliSum scz = matrix_to_pauli(cz);
  REQUIRE(scz.size() == 4);  // (I + Z0 + Z1 - Z0Z1)/2
  for (const auto& t : scz.terms())
    CHECK(std::abs(std::abs(t.coeff.real()) - 0.5) < 1e-14);
}

TEST_CASE("matrix_to_pauli rejects bad input") {
  CHECK_THROWS_AS(matrix_to_pauli(Eigen::MatrixXcd::Zero(3, 3)), Error);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
  m(0, 1) = 1;  // not Hermitian
  CHECK_THROWS_AS(matrix_to_pauli(m), Error);
}

TEST_CASE("diagonalize and exact_evolve agree with the oracle") {
  std::mt19937 rng(33);
  const PauliSum H = oracle::random_hermitian_sum(3, 6, rng);
  const auto es = diagonalize(H, 3);
  // unitarity + energy conservation + small-step composition
  const StateVector s0 = oracle::random_state(3, rng);
  const StateVector s1 = exact_evolve(s0, *es, 0.7);
  CHECK(s1.norm() == Approx(1.0).margin(1e-12));
  CHECK(expectation(s1, H) == Approx(expectation(s0, H)).margin(1e-10));
  StateVector stepped = s0;
  for (int i = 0; i < 7; ++i) stepped = exact_evolve(stepped, *es, 0.1);
  REQUIRE((oracle::to_vector(stepped) - oracle::to_vector(s1))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  // derivative check: i d/dt |psi> = H |psi>
  const double h = 1e-6;
  const StateVector plus = exact_evolve(s0, *es, h);
  const StateVector minus = exact_evolve(s0, *es, -h);
  Eigen::VectorXcd fd =
      (oracle::to_vector(plus) - oracle::to_vector(minus)) / (2 * h);
  const Eigen::VectorXcd want =
      cplx{0, -1} * (oracle::dense_sum(H) * oracle::to_vector(s0));
  REQUIRE((fd - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("diagonalization cache returns the same object") {
  const PauliSum H = hubbard_hamiltonian(2, 1.0, 4.0);
  const auto a = diagonalize(H, 4);
  const auto b = diagonalize(H, 4);
  CHECK(a.get() == b.get());
}

TEST_CASE("EvolvingReference matches exact_evolve at arbitrary times") {
  std::mt19937 rng(34);
  const PauliSum H = oracle::random_hermitian_sum(2, 4, rng);
  const auto es = diagonalize(H, 2);
  const StateVector s0 = oracle::random_state(2, rng);
  const EvolvingReference ref(es, s0);
  for (double t : {0.0, 0.3, 1.7, 5.2}) {
    const StateVector a = ref.at(t);
    const StateVector b = exact_evolve(s0, *es, t);
    REQUIRE((oracle::to_vector(a) - oracle::to_vector(b)).cwiseAbs().maxCoeff() <
            1e-12);
  }
  CHECK(ref.infidelity(s0, 0.0) == Approx(0.0).margin(1e-14));
}

TEST_CASE("propagate_reference walks the requested mesh") {
  const PauliSum H = hubbard_hamiltonian(2, 1.0, 4.0);
  const auto es = diagonalize(H, 4);
  const StateVector s0 = hubbard_reference(2);
  const auto traj = propagate_reference(s0, es, 0.01, 0.002);
  REQUIRE(traj.size() == 6);
  CHECK(traj.front().first == 0.0);
  CHECK(traj.back().first == Approx(0.01));
  for (const auto& [t, s] : traj) CHECK(s.norm() == Approx(1.0).margin(1e-12));
}

TEST_CASE("dense conversion cap") {
  PauliSum s(15);
  s.add_term({1, 0}, parse_word("Z14", 15));
  s.canonicalize();
  CHECK_THROWS_AS(pauli_to_matrix(s, 15), Error);
}

TEST_CASE("embed widens the register") {
  const PauliSum H = hubbard_hamiltonian(2, 1.0, 4.0);
  const PauliSum He = embed(H, 5);
  CHECK(He.qubit_count() == 5);
  CHECK(He.size() == H.size());
  // block structure: expectation on |0>(x)psi equals the system expectation
  std::mt19937 rng(35);
  const StateVector sys = oracle::random_state(4, rng);
  std::vector<cplx> amp(32, cplx{0, 0});
  for (int b = 0; b < 16; ++b) amp[b] = sys[b];
  const StateVector joint(5, std::move(amp));
  CHECK(expectation(joint, He) == Approx(expectation(sys, H)).margin(1e-12));
}
