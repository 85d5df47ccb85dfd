#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/errors.hpp"

namespace voxflow {

using Dims = std::vector<std::size_t>;

inline std::size_t element_count(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major tensor. Production code uses `Tensor` (32-bit); the
/// double instantiation exists for gradient and Jacobian checks.
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() : dims_{1}, data_(1, Real{0}) {}

  explicit BasicTensor(Dims dims, Real fill = Real{0})
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    check_dims();
  }

  BasicTensor(Dims dims, std::vector<Real> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != element_count(dims_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match dims " + dims_to_string(dims_));
    }
  }

  static BasicTensor scalar(Real v) { return BasicTensor(Dims{1}, std::vector<Real>{v}); }

  static BasicTensor matrix(std::initializer_list<std::initializer_list<Real>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n ? rows.begin()->size() : 0;
    std::vector<Real> data;
    data.reserve(n * m);
    for (const auto& row : rows) {
      if (row.size() != m) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicTensor(Dims{n, m}, std::move(data));
  }

  static BasicTensor vector(std::initializer_list<Real> values) {
    return BasicTensor(Dims{values.size()}, std::vector<Real>(values));
  }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  // Matrix access for rank-2 tensors.
  Real& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  const Real& at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  std::size_t rows() const { return dims_.at(0); }
  std::size_t cols() const { return rank() >= 2 ? dims_[1] : 1; }

  BasicTensor reshaped(Dims dims) const {
    if (element_count(dims) != data_.size()) {
      throw DimensionError("cannot reshape " + dims_to_string(dims_) + " to " +
                           dims_to_string(dims));
    }
    return BasicTensor(std::move(dims), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](Real v) { return std::isfinite(v); });
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicTensor<Other>(dims_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void check_dims() const {
    if (dims_.empty()) throw DimensionError("tensor needs at least one dimension");
    for (auto d : dims_) {
      if (d == 0) throw DimensionError("tensor dims must be positive: " + dims_to_string(dims_));
    }
  }

  Dims dims_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;

namespace kernels {

template <typename Real>
void require_matrix(const BasicTensor<Real>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be a matrix, got " +
                         dims_to_string(t.dims()));
  }
}

/// out[i,j] = sum_k input[i,k] * weight[k,j] + bias[j]
template <typename Real>
BasicTensor<Real> affine(const BasicTensor<Real>& input, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>* bias) {
  require_matrix(input, "affine input");
  require_matrix(weight, "affine weight");
  const std::size_t n = input.rows(), k = input.cols(), m = weight.cols();
  if (weight.rows() != k) {
    throw DimensionError("affine: input " + dims_to_string(input.dims()) +
                         " incompatible with weight " + dims_to_string(weight.dims()));
  }
  if (bias && (bias->rank() != 1 || bias->size() != m)) {
    throw DimensionError("affine: bias " + dims_to_string(bias->dims()) +
                         " incompatible with output width " + std::to_string(m));
  }
  BasicTensor<Real> out(Dims{n, m});
  const Real* w = weight.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    Real* o = out.data().data() + i * m;
    if (bias) std::copy_n(bias->data().data(), m, o);
    const Real* row = input.data().data() + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Real a = row[kk];
      const Real* wrow = w + kk * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += a * wrow[j];
    }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> matmul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return affine<Real>(a, b, nullptr);
}

// a^T * b for a [n x k], b [n x m] -> [k x m]. Rows are summed in blocks in
// Real, block totals in double.
template <typename Real>
BasicTensor<Real> matmul_tn(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != n) throw DimensionError("matmul_tn: row counts differ");
  constexpr std::size_t kBlock = 256;
  std::vector<double> total(k * m, 0.0);
  std::vector<Real> block(k * m);
  for (std::size_t start = 0; start < n; start += kBlock) {
    std::fill(block.begin(), block.end(), Real{0});
    const std::size_t stop = std::min(n, start + kBlock);
    for (std::size_t i = start; i < stop; ++i) {
      const Real* arow = a.data().data() + i * k;
      const Real* brow = b.data().data() + i * m;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const Real av = arow[kk];
        if (av == Real{0}) continue;
        Real* acc = block.data() + kk * m;
        for (std::size_t j = 0; j < m; ++j) acc[j] += av * brow[j];
      }
    }
    for (std::size_t i = 0; i < k * m; ++i) total[i] += static_cast<double>(block[i]);
  }
  BasicTensor<Real> out(Dims{k, m});
  for (std::size_t i = 0; i < k * m; ++i) out[i] = static_cast<Real>(total[i]);
  return out;
}

// a * b^T for a [n x m], b [k x m] -> [n x k]
template <typename Real>
BasicTensor<Real> matmul_nt(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  const std::size_t m = a.cols(), k = b.rows();
  if (b.cols() != m) throw DimensionError("matmul_nt: column counts differ");
  BasicTensor<Real> bt(Dims{m, k});
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < m; ++c) bt[c * k + r] = b[r * m + c];
  }
  return affine<Real>(a, bt, nullptr);
}

// Columns [begin, begin+count) of a matrix.
template <typename Real>
BasicTensor<Real> slice_cols(const BasicTensor<Real>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols input");
  if (begin + count > x.cols() || count == 0) {
    throw DimensionError("slice_cols out of range");
  }
  const std::size_t n = x.rows(), m = x.cols();
  BasicTensor<Real> out(Dims{n, count});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.data().data() + i * m + begin, count, out.data().data() + i * count);
  }
  return out;
}

template <typename Real>
BasicTensor<Real> concat_cols(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_matrix(a, "concat_cols lhs");
  require_matrix(b, "concat_cols rhs");
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  const std::size_t n = a.rows(), ma = a.cols(), mb = b.cols();
  BasicTensor<Real> out(Dims{n, ma + mb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data().data() + i * ma, ma, out.data().data() + i * (ma + mb));
    std::copy_n(b.data().data() + i * mb, mb, out.data().data() + i * (ma + mb) + ma);
  }
  return out;
}

template <typename Real>
BasicTensor<Real> concat_rows(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_matrix(a, "concat_rows lhs");
  require_matrix(b, "concat_rows rhs");
  if (a.cols() != b.cols()) throw DimensionError("concat_rows: column counts differ");
  std::vector<Real> data(a.storage());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return BasicTensor<Real>(Dims{a.rows() + b.rows(), a.cols()}, std::move(data));
}

// Per-row sum of a matrix, accumulated in double -> [n]
template <typename Real>
BasicTensor<Real> row_sum(const BasicTensor<Real>& x) {
  require_matrix(x, "row_sum input");
  const std::size_t n = x.rows(), m = x.cols();
  BasicTensor<Real> out(Dims{n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += x[i * m + j];
    out[i] = static_cast<Real>(acc);
  }
  return out;
}

template <typename Real>
double sum_all(const BasicTensor<Real>& x) {
  double acc = 0.0;
  for (auto v : x.data()) acc += v;
  return acc;
}

template <typename Real, typename Fn>
BasicTensor<Real> map(const BasicTensor<Real>& x, Fn&& fn) {
  BasicTensor<Real> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return out;
}

template <typename Real, typename Fn>
BasicTensor<Real> zip(const BasicTensor<Real>& a, const BasicTensor<Real>& b, Fn&& fn) {
  if (a.dims() != b.dims()) {
    throw DimensionError("elementwise op on " + dims_to_string(a.dims()) + " and " +
                         dims_to_string(b.dims()));
  }
  BasicTensor<Real> out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

}  // namespace kernels

/// Dense layer: input [n x d_in] * weight [d_in x d_out] + bias [d_out].
template <typename Real>
BasicTensor<Real> affine_forward(const BasicTensor<Real>& input, const BasicTensor<Real>& weight,
                                 const BasicTensor<Real>& bias) {
  return kernels::affine(input, weight, &bias);
}

}  // namespace voxflow
