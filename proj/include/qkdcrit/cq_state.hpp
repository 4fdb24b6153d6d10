#pragma once

// Classical-quantum states: an ensemble {p_x, rho_x} indexed by key labels.
// Labels are n-bit strings; label x is the integer x rendered LSB-first.
// The ensemble may enumerate fewer than 2^n labels (missing labels carry
// probability zero), which the distance and guessing routines handle.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "complex_matrix.hpp"
#include "density_operator.hpp"
#include "errors.hpp"
#include "json.hpp"

namespace qkdcrit {

class CqState {
public:
  static constexpr double kProbSumTol = 1e-9;

  CqState(std::size_t n_bits, std::vector<double> probs,
          std::vector<DensityOperator> states)
      : n_bits_(n_bits), probs_(std::move(probs)), states_(std::move(states)) {
    if (n_bits_ > 32)
      throw DimensionCapError("cq state: label width exceeds 32 bits");
    if (probs_.empty() || probs_.size() != states_.size())
      throw DimensionMismatchError(
          "cq state: probs and states must be non-empty and equal length");
    if (n_bits_ < 32 && probs_.size() > (std::size_t{1} << n_bits_))
      throw DimensionMismatchError(
          "cq state: more labels than 2^n_bits allows");
    double sum = 0.0;
    for (double& p : probs_) {
      if (p < -1e-12)
        throw NegativeProbabilityError("cq state: negative label probability");
      if (p < 0.0) p = 0.0;
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbSumTol)
      throw NotStateError("cq state: label probabilities sum to " +
                          std::to_string(sum));
    std::size_t d = states_.front().dim();
    for (const auto& s : states_)
      if (s.dim() != d)
        throw DimensionMismatchError(
            "cq state: conditional states have mixed dimensions");
  }

  /// Uniform key over all 2^n labels with the given conditional states.
  static CqState uniform_key(std::size_t n_bits,
                             std::vector<DensityOperator> states) {
    std::size_t want = std::size_t{1} << n_bits;
    if (states.size() != want)
      throw DimensionMismatchError("uniform_key: need exactly 2^n states");
    std::vector<double> p(want, 1.0 / static_cast<double>(want));
    return CqState(n_bits, std::move(p), std::move(states));
  }

  std::size_t n_bits() const { return n_bits_; }
  std::size_t label_count() const { return probs_.size(); }
  std::size_t dim_e() const { return states_.front().dim(); }
  double prob(std::size_t x) const { return probs_.at(x); }
  const DensityOperator& state(std::size_t x) const { return states_.at(x); }
  const std::vector<double>& probs() const { return probs_; }

  /// Number of distinct key values the label space addresses (2^n).
  double key_space_size() const {
    return std::pow(2.0, static_cast<double>(n_bits_));
  }

  /// Side-information marginal sum_x p_x rho_x.
  ComplexMatrix eve_marginal() const {
    ComplexMatrix m(dim_e(), dim_e());
    for (std::size_t x = 0; x < probs_.size(); ++x) {
      if (probs_[x] == 0.0) continue;
      ComplexMatrix term = states_[x].matrix();
      term *= cplx(probs_[x], 0.0);
      m += term;
    }
    return m.hermitized();
  }

  /// Label as an LSB-first bit string ("10" = integer 1 at n=2).
  std::string label_string(std::size_t x) const {
    std::string s(n_bits_, '0');
    for (std::size_t i = 0; i < n_bits_; ++i)
      if ((x >> i) & 1u) s[i] = '1';
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json states = nlohmann::json::array();
    for (std::size_t x = 0; x < probs_.size(); ++x) {
      labels.push_back(label_string(x));
      states.push_back(states_[x].matrix().to_json());
    }
    return nlohmann::json{{"n_bits", n_bits_},
                          {"labels", labels},
                          {"probs", probs_},
                          {"states", states}};
  }

  static CqState from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("n_bits") || !j.contains("probs") ||
        !j.contains("states"))
      throw ParseError("cq state JSON: need n_bits/probs/states");
    std::size_t n = j.at("n_bits").get<std::size_t>();
    std::vector<double> probs = j.at("probs").get<std::vector<double>>();
    std::vector<DensityOperator> states;
    for (const auto& sj : j.at("states"))
      states.emplace_back(ComplexMatrix::from_json(sj));
    CqState out(n, std::move(probs), std::move(states));
    if (j.contains("labels")) {
      const auto& labels = j.at("labels");
      if (labels.size() != out.label_count())
        throw ParseError("cq state JSON: labels length mismatch");
      for (std::size_t x = 0; x < out.label_count(); ++x)
        if (labels.at(x).get<std::string>() != out.label_string(x))
          throw ParseError("cq state JSON: label " + std::to_string(x) +
                           " does not match its index encoding");
    }
    return out;
  }

private:
  std::size_t n_bits_;
  std::vector<double> probs_;
  std::vector<DensityOperator> states_;
};

/// Embed a cq ensemble as the block-diagonal joint state
///   rho_SE = sum_x p_x |x><x| (x) rho_x
/// over the full 2^n-label space (absent labels contribute zero blocks).
inline DensityOperator cq_to_joint(const CqState& s) {
  std::size_t blocks = std::size_t{1} << s.n_bits();
  std::size_t de = s.dim_e();
  if (blocks > kMaxDim / de)
    throw DimensionCapError("cq_to_joint: joint dimension exceeds cap");
  std::size_t dim = blocks * de;
  ComplexMatrix joint(dim, dim);
  for (std::size_t x = 0; x < s.label_count(); ++x) {
    double p = s.prob(x);
    if (p == 0.0) continue;
    const ComplexMatrix& rho = s.state(x).matrix();
    for (std::size_t i = 0; i < de; ++i)
      for (std::size_t j = 0; j < de; ++j)
        joint(x * de + i, x * de + j) = p * rho(i, j);
  }
  return DensityOperator::from_trusted(std::move(joint));
}

/// The ideal key state omega_n (x) sigma_E: uniform classical key of n bits,
/// side information decoupled.
inline DensityOperator ideal_state(std::size_t n_bits,
                                   const DensityOperator& sigma_e) {
  if (n_bits > 12)
    throw DimensionCapError("ideal_state: key register capped at 12 bits");
  std::size_t blocks = std::size_t{1} << n_bits;
  std::size_t de = sigma_e.dim();
  if (blocks > kMaxDim / de)
    throw DimensionCapError("ideal_state: joint dimension exceeds cap");
  double w = 1.0 / static_cast<double>(blocks);
  ComplexMatrix joint(blocks * de, blocks * de);
  const ComplexMatrix& sig = sigma_e.matrix();
  for (std::size_t x = 0; x < blocks; ++x)
    for (std::size_t i = 0; i < de; ++i)
      for (std::size_t j = 0; j < de; ++j)
        joint(x * de + i, x * de + j) = w * sig(i, j);
  return DensityOperator::from_trusted(std::move(joint));
}

}  // namespace qkdcrit
