// Dense/sparse linear algebra kernels and the seeded random stream used
// throughout the engine. All floating point is IEEE double; no fast-math.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hosr {

// Fatal misuse of an interface (dimension mismatch, bad argument).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problems with input files or data contents.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Compressed sparse row matrix. Column indices are strictly increasing
// within each row; row_ptr is nondecreasing with row_ptr.back() == nnz.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // size rows + 1
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  SparseMatrix() = default;
  SparseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), row_ptr(r + 1, 0) {}

  std::size_t nnz() const { return col_idx.size(); }

  // Entries must arrive row by row with strictly increasing columns.
  void append(std::size_t row, std::uint32_t col, double value) {
    col_idx.push_back(col);
    values.push_back(value);
    for (std::size_t r = row + 1; r <= rows; ++r) row_ptr[r] = col_idx.size();
  }

  DenseMatrix to_dense() const {
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
        out(i, col_idx[p]) = values[p];
    return out;
  }

  void validate() const {
    if (row_ptr.size() != rows + 1) throw ConfigError("sparse: row_ptr size mismatch");
    if (row_ptr.front() != 0 || row_ptr.back() != nnz())
      throw ConfigError("sparse: row_ptr endpoints inconsistent with nnz");
    for (std::size_t i = 0; i < rows; ++i) {
      if (row_ptr[i] > row_ptr[i + 1]) throw ConfigError("sparse: row_ptr decreasing");
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
        if (col_idx[p] >= cols) throw ConfigError("sparse: column index out of range");
        if (p > row_ptr[i] && col_idx[p - 1] >= col_idx[p])
          throw ConfigError("sparse: columns not strictly increasing within row");
      }
    }
  }
};

// Deterministic 64-bit stream (splitmix64). Same seed gives the same
// sequence on every platform; distributions below avoid libstdc++'s
// implementation-defined ones for that reason.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, bound) without modulo bias.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw ConfigError("uniform_int: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  std::uint32_t uniform_index(std::size_t bound) {
    return static_cast<std::uint32_t>(uniform_int(bound));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent stream deterministically.
  RandomStream fork() { return RandomStream(next_u64()); }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// result[i] = sum_j L[i,j] * X[j]; cost proportional to nnz(L) * X.cols.
inline DenseMatrix spmm(const SparseMatrix& l, const DenseMatrix& x) {
  if (l.cols != x.rows)
    throw ConfigError("spmm: dimension mismatch (" + std::to_string(l.cols) +
                      " vs " + std::to_string(x.rows) + ")");
  DenseMatrix out(l.rows, x.cols);
  for (std::size_t i = 0; i < l.rows; ++i) {
    double* oi = out.data.data() + i * out.cols;
    for (std::size_t p = l.row_ptr[i]; p < l.row_ptr[i + 1]; ++p) {
      const double v = l.values[p];
      const double* xj = x.data.data() + static_cast<std::size_t>(l.col_idx[p]) * x.cols;
      for (std::size_t c = 0; c < x.cols; ++c) oi[c] += v * xj[c];
    }
  }
  return out;
}

inline DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    throw ConfigError("gemm: dimension mismatch (" + std::to_string(a.cols) +
                      " vs " + std::to_string(b.rows) + ")");
  DenseMatrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    double* oi = out.data.data() + i * out.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = ai[k];
      if (av == 0.0) continue;
      const double* bk = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += av * bk[j];
    }
  }
  return out;
}

// a^T * b for a: n x p, b: n x q  ->  p x q. Used by backprop.
inline DenseMatrix gemm_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows) throw ConfigError("gemm_at_b: dimension mismatch");
  DenseMatrix out(a.cols, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    const double* bi = b.data.data() + i * b.cols;
    for (std::size_t r = 0; r < a.cols; ++r) {
      const double av = ai[r];
      if (av == 0.0) continue;
      double* orow = out.data.data() + r * out.cols;
      for (std::size_t c = 0; c < b.cols; ++c) orow[c] += av * bi[c];
    }
  }
  return out;
}

// a * b^T for a: n x d, b: m x d  ->  n x m. Used by backprop.
inline DenseMatrix gemm_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) throw ConfigError("gemm_a_bt: dimension mismatch");
  DenseMatrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * b.cols;
      double acc = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) acc += ai[c] * bj[c];
      out(i, j) = acc;
    }
  }
  return out;
}

enum class Nonlinearity { kTanh, kRelu, kSigmoid };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline DenseMatrix elementwise(Nonlinearity kind, const DenseMatrix& x) {
  DenseMatrix out(x.rows, x.cols);
  switch (kind) {
    case Nonlinearity::kTanh:
      for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::tanh(x.data[i]);
      break;
    case Nonlinearity::kRelu:
      for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
      break;
    case Nonlinearity::kSigmoid:
      for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = sigmoid(x.data[i]);
      break;
  }
  return out;
}

// Row-wise softmax with max-subtraction.
inline DenseMatrix softmax_rows(const DenseMatrix& x) {
  DenseMatrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    double* oi = out.data.data() + i * out.cols;
    double mx = xi[0];
    for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      sum += oi[j];
    }
    for (std::size_t j = 0; j < x.cols; ++j) oi[j] /= sum;
  }
  return out;
}

// -ln sigmoid(m), computed without overflow for any margin.
inline double softplus_neg(double m) {
  // softplus(-m) = log(1 + exp(-m))
  if (m > 0.0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

}  // namespace hosr
