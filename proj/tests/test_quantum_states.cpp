// State-model layer: density-operator validation, classical-quantum
// ensembles, the block-diagonal joint embedding, and the ideal (uniform and
// decoupled) reference state.  The joint-embedding tests rebuild the expected
// matrices with independent index arithmetic rather than reusing the library
// helpers.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <qkdcrit/complex_matrix.hpp>
#include <qkdcrit/cq_state.hpp>
#include <qkdcrit/density_operator.hpp>
#include <qkdcrit/errors.hpp>
#include <qkdcrit/hermitian_eig.hpp>
#include <qkdcrit/protocol_sim.hpp>
#include <qkdcrit/rng.hpp>
#include <qkdcrit/security_criteria.hpp>

using namespace qkdcrit;

namespace {

ComplexMatrix mat2(cplx a, cplx b, cplx c, cplx d) {
  ComplexMatrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

/// Block-diagonal embedding written from scratch: label x contributes
/// p_x rho_x in the block with row/column offset x * dim_e.
ComplexMatrix joint_by_hand(const CqState& s) {
  std::size_t de = s.dim_e();
  std::size_t dim = (std::size_t{1} << s.n_bits()) * de;
  ComplexMatrix out(dim, dim);
  for (std::size_t x = 0; x < s.label_count(); ++x) {
    const ComplexMatrix& rho = s.state(x).matrix();
    for (std::size_t i = 0; i < de; ++i)
      for (std::size_t j = 0; j < de; ++j)
        out(x * de + i, x * de + j) = s.prob(x) * rho(i, j);
  }
  return out;
}

}  // namespace

TEST_CASE("density operator validation", "[quantum-states]") {
  SECTION("accepts a hand-built qubit state") {
    REQUIRE_NOTHROW(DensityOperator(mat2(0.75, 0.25, 0.25, 0.25)));
  }

  SECTION("rejects trace different from one") {
    REQUIRE_THROWS_AS(DensityOperator(ComplexMatrix::diagonal({0.7, 0.7})),
                      NotStateError);
  }

  SECTION("rejects indefinite matrices with unit trace") {
    REQUIRE_THROWS_AS(DensityOperator(ComplexMatrix::diagonal({1.5, -0.5})),
                      NotStateError);
  }

  SECTION("rejects non-Hermitian matrices") {
    REQUIRE_THROWS_AS(DensityOperator(mat2(0.5, 0.3, 0.0, 0.5)),
                      NotHermitianError);
  }

  SECTION("rejects non-square and empty input") {
    // Non-square input fails the hermitize step before state validation runs.
    REQUIRE_THROWS_AS(DensityOperator(ComplexMatrix(2, 3)),
                      DimensionMismatchError);
    REQUIRE_THROWS_AS(DensityOperator(ComplexMatrix(0, 0)), NotStateError);
  }

  SECTION("pure() normalizes and builds the projector") {
    DensityOperator d = DensityOperator::pure({2.0, 0.0});
    CHECK(d.matrix().max_abs_diff(mat2(1, 0, 0, 0)) <= 1e-15);
    REQUIRE_THROWS_AS(DensityOperator::pure({0.0, 0.0}), NotStateError);
  }

  SECTION("maximally_mixed is identity over dim") {
    DensityOperator d = DensityOperator::maximally_mixed(4);
    CHECK(d.matrix().max_abs_diff(ComplexMatrix::diagonal(
              {0.25, 0.25, 0.25, 0.25})) <= 1e-15);
  }

  SECTION("random_density yields valid states of requested rank") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      DensityOperator d = random_density(4, rng);
      CHECK(d.matrix().trace().real() == Catch::Approx(1.0).margin(1e-9));
      DensityOperator low = random_density(4, rng, /*rank=*/1);
      Spectrum s = hermitian_eig(low.matrix());
      // Rank-1 states have one nonzero eigenvalue.
      CHECK(s.values[0] == Catch::Approx(1.0).margin(1e-9));
      CHECK(std::abs(s.values[1]) <= 1e-9);
    }
  }
}

TEST_CASE("cq-state construction contracts", "[quantum-states]") {
  DensityOperator mix = DensityOperator::maximally_mixed(2);

  SECTION("probability/state count mismatch") {
    REQUIRE_THROWS_AS(CqState(1, {0.5, 0.5}, {mix}), DimensionMismatchError);
  }

  SECTION("more labels than the key space holds") {
    REQUIRE_THROWS_AS(CqState(1, {0.25, 0.25, 0.5}, {mix, mix, mix}),
                      DimensionMismatchError);
  }

  SECTION("negative probability") {
    REQUIRE_THROWS_AS(CqState(1, {1.2, -0.2}, {mix, mix}),
                      NegativeProbabilityError);
  }

  SECTION("probabilities must sum to one") {
    REQUIRE_THROWS_AS(CqState(1, {0.3, 0.3}, {mix, mix}), NotStateError);
  }

  SECTION("conditional states must share a dimension") {
    DensityOperator big = DensityOperator::maximally_mixed(4);
    REQUIRE_THROWS_AS(CqState(1, {0.5, 0.5}, {mix, big}),
                      DimensionMismatchError);
  }

  SECTION("uniform_key requires the full label set") {
    REQUIRE_THROWS_AS(CqState::uniform_key(2, {mix, mix}),
                      DimensionMismatchError);
    CqState s = CqState::uniform_key(1, {mix, mix});
    CHECK(s.prob(0) == 0.5);
    CHECK(s.prob(1) == 0.5);
    CHECK(s.key_space_size() == 2.0);
  }

  SECTION("label strings are least-significant-bit first") {
    DensityOperator one = DensityOperator::maximally_mixed(1);
    CqState s(3, {0.5, 0.5}, {one, one});
    CHECK(s.label_string(1) == "100");
    CHECK(s.label_string(4) == "001");
  }
}

TEST_CASE("cq_to_joint matches a hand-rolled embedding", "[quantum-states]") {
  SECTION("single deterministic label") {
    Rng rng(21);
    DensityOperator rho = random_density(3, rng);
    CqState s(0, {1.0}, {rho});
    DensityOperator joint = cq_to_joint(s);
    CHECK(joint.matrix().max_abs_diff(rho.matrix()) <= 1e-14);
  }

  SECTION("uniform bit with identical conditionals is a product") {
    Rng rng(22);
    DensityOperator rho = random_density(2, rng);
    CqState s = CqState::uniform_key(1, {rho, rho});
    ComplexMatrix expect =
        tensor(ComplexMatrix::diagonal({0.5, 0.5}), rho.matrix());
    CHECK(cq_to_joint(s).matrix().max_abs_diff(expect) <= 1e-14);
  }

  SECTION("random ensembles against the independent loop") {
    Rng rng(23);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<DensityOperator> states;
      std::vector<double> probs = {0.25, 0.35, 0.15, 0.25};
      for (std::size_t i = 0; i < probs.size(); ++i)
        states.push_back(random_density(2, rng));
      CqState s(2, probs, states);
      CHECK(cq_to_joint(s).matrix().max_abs_diff(joint_by_hand(s)) <= 1e-14);
    }
  }

  SECTION("intercepted-run memory embeds at the right block offsets") {
    SimConfig cfg;
    cfg.n_raw = 14;
    cfg.eve_strategy = EveStrategy::kInterceptResend;
    cfg.rng_seed = 42;
    ProtocolRun run = run_bb84(cfg);
    REQUIRE(run.eve_memory.has_value());
    const CqState& mem = *run.eve_memory;
    CHECK(cq_to_joint(mem).matrix().max_abs_diff(joint_by_hand(mem)) <=
          1e-12);
  }
}

TEST_CASE("ideal_state is uniform on the key and decoupled",
          "[quantum-states]") {
  SECTION("one bit, trivial environment") {
    DensityOperator sig = DensityOperator::maximally_mixed(1);
    DensityOperator ideal = ideal_state(1, sig);
    CHECK(ideal.matrix().max_abs_diff(ComplexMatrix::diagonal({0.5, 0.5})) <=
          1e-15);
  }

  SECTION("two bits, mixed qubit environment") {
    DensityOperator sig = DensityOperator::maximally_mixed(2);
    DensityOperator ideal = ideal_state(2, sig);
    std::vector<double> eighth(8, 0.125);
    CHECK(ideal.matrix().max_abs_diff(ComplexMatrix::diagonal(eighth)) <=
          1e-15);
  }

  SECTION("general environment: trace one, block-repeated sigma") {
    Rng rng(31);
    DensityOperator sig = random_density(3, rng);
    DensityOperator ideal = ideal_state(2, sig);
    CHECK(ideal.matrix().trace().real() == Catch::Approx(1.0).margin(1e-12));
    // Every conditional block is sigma/4.
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          cplx got = ideal.matrix()(x * 3 + i, x * 3 + j);
          cplx expect = 0.25 * sig.matrix()(i, j);
          REQUIRE(std::abs(got - expect) <= 1e-14);
        }
    }
  }
}

TEST_CASE("marginals and ideal-state guessing behave", "[quantum-states]") {
  Rng rng(41);
  std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  std::vector<DensityOperator> states;
  for (std::size_t i = 0; i < 4; ++i) states.push_back(random_density(2, rng));
  CqState s(2, probs, states);

  SECTION("eve_marginal equals the probability-weighted sum") {
    ComplexMatrix expect(2, 2);
    for (std::size_t x = 0; x < 4; ++x)
      expect += states[x].matrix() * cplx(probs[x], 0.0);
    CHECK(s.eve_marginal().max_abs_diff(expect) <= 1e-13);
  }

  SECTION("partial trace of the joint over the key register is the marginal") {
    DensityOperator joint = cq_to_joint(s);
    ComplexMatrix reduced = partial_trace(joint.matrix(), {4, 2}, {1});
    CHECK(reduced.max_abs_diff(s.eve_marginal()) <= 1e-12);
  }

  SECTION("guessing the key of an ideal ensemble is uniform-random") {
    // Identical conditionals carry no key information.
    DensityOperator sig = random_density(2, rng);
    CqState ideal = CqState::uniform_key(2, {sig, sig, sig, sig});
    GuessingBounds g = guessing_probability(ideal);
    CHECK(g.upper == Catch::Approx(0.25).margin(1e-9));
    CHECK(g.lower == Catch::Approx(0.25).margin(1e-9));
  }
}

TEST_CASE("cq-state JSON round-trip", "[quantum-states]") {
  Rng rng(51);
  std::vector<DensityOperator> states = {random_density(2, rng),
                                         random_density(2, rng)};
  CqState s(1, {0.6, 0.4}, states);
  CqState back = CqState::from_json(s.to_json());

  REQUIRE(back.n_bits() == 1);
  REQUIRE(back.label_count() == 2);
  CHECK(back.prob(0) == 0.6);
  CHECK(back.prob(1) == 0.4);
  for (std::size_t x = 0; x < 2; ++x)
    CHECK(back.state(x).matrix().max_abs_diff(states[x].matrix()) == 0.0);
}
