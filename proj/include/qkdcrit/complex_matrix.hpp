#pragma once

// Dense complex matrix with just the operations the security analysis needs.
// Row-major std::vector<std::complex<double>> storage; dimensions are capped
// at kMaxDim because every algorithm downstream is written for small systems.

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "json.hpp"

namespace qkdcrit {

using cplx = std::complex<double>;

inline constexpr std::size_t kMaxDim = 4096;

class ComplexMatrix {
public:
  ComplexMatrix() : rows_(0), cols_(0) {}

  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, cplx(0.0, 0.0)) {
    check_dims(rows, cols);
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(const std::vector<double>& d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Rank-one projector |v><v| / <v|v> when normalize is set, else |v><v|.
  static ComplexMatrix outer(const std::vector<cplx>& v, bool normalize = false) {
    ComplexMatrix m(v.size(), v.size());
    double nrm2 = 0.0;
    for (const auto& c : v) nrm2 += std::norm(c);
    double scale = normalize ? (nrm2 > 0.0 ? 1.0 / nrm2 : 0.0) : 1.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j)
        m(i, j) = v[i] * std::conj(v[j]) * scale;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return a_[i * cols_ + j];
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }

  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }

  ComplexMatrix& operator*=(cplx s) {
    for (auto& v : a_) v *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) {
    a += b;
    return a;
  }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) {
    a -= b;
    return a;
  }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) {
    a *= s;
    return a;
  }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) {
    a *= s;
    return a;
  }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_)
      throw DimensionMismatchError("matrix product: inner dimensions differ");
    ComplexMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx(0.0, 0.0)) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    }
    return c;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
  }

  cplx trace() const {
    if (!is_square()) throw DimensionMismatchError("trace of non-square matrix");
    cplx t = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : a_) s += std::norm(v);
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  double max_abs_diff(const ComplexMatrix& o) const {
    require_same_shape(o, "max_abs_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k)
      m = std::max(m, std::abs(a_[k] - o.a_[k]));
    return m;
  }

  bool is_hermitian(double tol = 1e-12) const {
    if (!is_square()) return false;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (std::abs((*this)(i, i).imag()) > tol) return false;
      for (std::size_t j = i + 1; j < cols_; ++j)
        if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
    }
    return true;
  }

  /// (A + A^dagger)/2 — used to scrub roundoff asymmetry before eigensolves.
  ComplexMatrix hermitized() const {
    if (!is_square())
      throw DimensionMismatchError("hermitized: matrix not square");
    ComplexMatrix m(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      m(i, i) = (*this)(i, i).real();
      for (std::size_t j = i + 1; j < cols_; ++j) {
        cplx v = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
        m(i, j) = v;
        m(j, i) = std::conj(v);
      }
    }
    return m;
  }

  /// Largest |[A,B]| entry; cheap commutation test.
  static double commutator_max_abs(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a * b).max_abs_diff(b * a);
  }

  nlohmann::json to_json() const {
    std::vector<double> re(a_.size()), im(a_.size());
    for (std::size_t k = 0; k < a_.size(); ++k) {
      re[k] = a_[k].real();
      im[k] = a_[k].imag();
    }
    return nlohmann::json{{"dims", {rows_, cols_}}, {"re", re}, {"im", im}};
  }

  static ComplexMatrix from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dims") || !j.contains("re") ||
        !j.contains("im"))
      throw ParseError("matrix JSON: need dims/re/im fields");
    const auto& dims = j.at("dims");
    if (!dims.is_array() || dims.size() != 2)
      throw ParseError("matrix JSON: dims must be [rows, cols]");
    std::size_t r = dims.at(0).get<std::size_t>();
    std::size_t c = dims.at(1).get<std::size_t>();
    ComplexMatrix m(r, c);
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (re.size() != r * c || im.size() != r * c)
      throw ParseError("matrix JSON: re/im length does not match dims");
    for (std::size_t k = 0; k < r * c; ++k)
      m.a_[k] = cplx(re.at(k).get<double>(), im.at(k).get<double>());
    return m;
  }

private:
  static void check_dims(std::size_t rows, std::size_t cols) {
    if (rows > kMaxDim || cols > kMaxDim)
      throw DimensionCapError("matrix dimension exceeds cap of " +
                              std::to_string(kMaxDim));
  }

  void require_same_shape(const ComplexMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionMismatchError(std::string(op) + ": shapes differ");
  }

  std::size_t rows_, cols_;
  std::vector<cplx> a_;
};

/// Kronecker product a (x) b.  Index convention: composite row index is
/// i_a * b.rows + i_b, i.e. the left factor is the high-order subsystem.
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
  std::size_t r = a.rows() * b.rows();
  std::size_t c = a.cols() * b.cols();
  if (r > kMaxDim || c > kMaxDim)
    throw DimensionCapError("tensor product exceeds dimension cap");
  ComplexMatrix m(r, c);
  for (std::size_t ia = 0; ia < a.rows(); ++ia)
    for (std::size_t ja = 0; ja < a.cols(); ++ja) {
      const cplx av = a(ia, ja);
      if (av == cplx(0.0, 0.0)) continue;
      for (std::size_t ib = 0; ib < b.rows(); ++ib)
        for (std::size_t jb = 0; jb < b.cols(); ++jb)
          m(ia * b.rows() + ib, ja * b.cols() + jb) = av * b(ib, jb);
    }
  return m;
}

/// Partial trace over the subsystems NOT listed in keep.  dims lists the
/// subsystem dimensions in tensor order (left factor first, matching
/// tensor() above); keep lists subsystem indices to retain, in their tensor
/// order.  The kept subsystems stay in that order in the result.
inline ComplexMatrix partial_trace(const ComplexMatrix& m,
                                   const std::vector<std::size_t>& dims,
                                   const std::vector<std::size_t>& keep) {
  if (!m.is_square())
    throw DimensionMismatchError("partial_trace: matrix not square");
  std::size_t prod = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw DimensionMismatchError("partial_trace: zero subsystem dim");
    prod *= d;
  }
  if (prod != m.rows())
    throw DimensionMismatchError(
        "partial_trace: subsystem dims do not factor the matrix dimension");
  std::vector<bool> kept(dims.size(), false);
  for (std::size_t s : keep) {
    if (s >= dims.size())
      throw OutOfRangeError("partial_trace: keep index out of range");
    if (kept[s]) throw OutOfRangeError("partial_trace: duplicate keep index");
    kept[s] = true;
  }
  // keep must be sorted so the output ordering is well defined.
  for (std::size_t k = 1; k < keep.size(); ++k)
    if (keep[k - 1] >= keep[k])
      throw OutOfRangeError("partial_trace: keep indices must be increasing");

  std::size_t keep_dim = 1, trace_dim = 1;
  for (std::size_t s = 0; s < dims.size(); ++s)
    (kept[s] ? keep_dim : trace_dim) *= dims[s];

  // Strides of each subsystem in the full index.
  std::vector<std::size_t> stride(dims.size(), 1);
  for (std::size_t s = dims.size(); s-- > 1;)
    stride[s - 1] = stride[s] * dims[s];

  // Decompose a kept (resp. traced) multi-index into a full-index offset.
  auto offsets = [&](bool want_kept) {
    std::vector<std::size_t> subs;
    for (std::size_t s = 0; s < dims.size(); ++s)
      if (kept[s] == want_kept) subs.push_back(s);
    std::size_t total = want_kept ? keep_dim : trace_dim;
    std::vector<std::size_t> off(total, 0);
    for (std::size_t x = 0; x < total; ++x) {
      std::size_t rem = x, o = 0;
      for (std::size_t si = subs.size(); si-- > 0;) {
        std::size_t s = subs[si];
        o += (rem % dims[s]) * stride[s];
        rem /= dims[s];
      }
      off[x] = o;
    }
    return off;
  };
  const auto keep_off = offsets(true);
  const auto trace_off = offsets(false);

  ComplexMatrix out(keep_dim, keep_dim);
  for (std::size_t i = 0; i < keep_dim; ++i)
    for (std::size_t j = 0; j < keep_dim; ++j) {
      cplx sum = 0.0;
      for (std::size_t t = 0; t < trace_dim; ++t)
        sum += m(keep_off[i] + trace_off[t], keep_off[j] + trace_off[t]);
      out(i, j) = sum;
    }
  return out;
}

}  // namespace qkdcrit
