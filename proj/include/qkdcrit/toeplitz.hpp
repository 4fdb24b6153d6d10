#pragma once

// Toeplitz hashing over GF(2).  The l x n matrix is constant along
// diagonals and fully determined by n + l - 1 seed bits:
//   entry(i, j) = seed[i - j + n - 1].
// The family is 2-universal: for fixed x != y, a uniformly random seed
// collides T x = T y with probability exactly 2^-l (each of the l output
// rows hits an independent fresh seed bit through the lowest set bit of
// x xor y).

#include <bit>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace qkdcrit {

class ToeplitzHash {
public:
  ToeplitzHash(std::size_t rows, std::size_t cols,
               std::vector<std::uint8_t> seed_bits)
      : rows_(rows), cols_(cols), seed_(std::move(seed_bits)) {
    if (cols_ == 0)
      throw DimensionMismatchError("toeplitz: need at least one input bit");
    if (cols_ > 64)
      throw DimensionCapError("toeplitz: input width capped at 64 bits");
    if (rows_ > cols_)
      throw DimensionMismatchError("toeplitz: more output than input bits");
    if (seed_.size() != rows_ + cols_ - 1)
      throw DimensionMismatchError("toeplitz: seed must have n + l - 1 bits");
    for (auto b : seed_)
      if (b > 1) throw ParseError("toeplitz: seed bits must be 0/1");
    row_masks_.resize(rows_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        if (entry(i, j)) row_masks_[i] |= (std::uint64_t{1} << j);
  }

  static ToeplitzHash random(std::size_t rows, std::size_t cols, Rng& rng) {
    if (cols == 0)
      throw DimensionMismatchError("toeplitz: need at least one input bit");
    std::vector<std::uint8_t> seed(rows + cols - 1);
    for (auto& b : seed) b = static_cast<std::uint8_t>(rng.bit());
    return ToeplitzHash(rows, cols, std::move(seed));
  }

  /// Square matrix equal to the identity (seed has a single 1 at n-1).
  static ToeplitzHash identity(std::size_t n) {
    std::vector<std::uint8_t> seed(2 * n - 1, 0);
    seed[n - 1] = 1;
    return ToeplitzHash(n, n, std::move(seed));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<std::uint8_t>& seed_bits() const { return seed_; }

  int entry(std::size_t i, std::size_t j) const {
    return seed_[i - j + cols_ - 1];
  }

  std::vector<std::uint8_t> apply(const std::vector<std::uint8_t>& input) const {
    if (input.size() != cols_)
      throw DimensionMismatchError("toeplitz: input length mismatch");
    std::uint64_t x = 0;
    for (std::size_t j = 0; j < cols_; ++j)
      if (input[j] & 1) x |= (std::uint64_t{1} << j);
    std::uint64_t z = apply_index(x);
    std::vector<std::uint8_t> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      out[i] = static_cast<std::uint8_t>((z >> i) & 1);
    return out;
  }

  /// Hash an input given as an integer whose bit j is input bit j; output
  /// packs row i into bit i.  Used for exhaustive label sweeps.
  std::uint64_t apply_index(std::uint64_t x) const {
    std::uint64_t z = 0;
    for (std::size_t i = 0; i < rows_; ++i)
      z |= static_cast<std::uint64_t>(std::popcount(row_masks_[i] & x) & 1)
           << i;
    return z;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"rows", rows_}, {"cols", cols_}, {"seed_bits", seed_}};
  }

  static ToeplitzHash from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
        !j.contains("seed_bits"))
      throw ParseError("toeplitz JSON: need rows/cols/seed_bits");
    return ToeplitzHash(j.at("rows").get<std::size_t>(),
                        j.at("cols").get<std::size_t>(),
                        j.at("seed_bits").get<std::vector<std::uint8_t>>());
  }

private:
  std::size_t rows_, cols_;
  std::vector<std::uint8_t> seed_;
  std::vector<std::uint64_t> row_masks_;
};

}  // namespace qkdcrit
