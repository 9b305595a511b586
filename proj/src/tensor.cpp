#include "spinn/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "spinn/errors.hpp"

namespace spinn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace memory {
namespace {
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

std::size_t live_bytes() { return g_live.load(std::memory_order_relaxed); }
std::size_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(live_bytes(), std::memory_order_relaxed); }

namespace detail {
void on_allocate(std::size_t bytes) {
  const std::size_t now = g_live.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak &&
         !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}
void on_deallocate(std::size_t bytes) {
  g_live.fetch_sub(bytes, std::memory_order_relaxed);
}
}  // namespace detail
}  // namespace memory

namespace {
thread_local CountingScope* t_scope = nullptr;
}

CountingScope::CountingScope() : outer_(t_scope) { t_scope = this; }
CountingScope::~CountingScope() { t_scope = outer_; }

void charge(std::uint64_t adds, std::uint64_t mults) {
  for (CountingScope* s = t_scope; s != nullptr; s = s->outer_) {
    s->counts_.adds += adds;
    s->counts_.mults += mults;
  }
}

// ---------------------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (std::size_t e : shape_) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " +
                                     shape_string(shape_));
  }
}

Tensor Tensor::uninitialized(Shape shape) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  Tensor t;
  t.data_.resize(shape_size(shape));
  t.shape_ = std::move(shape);
  return t;
}

Tensor::Tensor(Shape shape, std::span<const double> values) : Tensor(std::move(shape)) {
  if (values.size() != data_.size()) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                         std::to_string(data_.size()) + " values, got " +
                         std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), data_.begin());
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), std::span<const double>(values.begin(), values.size())) {}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor({values.size(), 1}, values);
}

Tensor Tensor::column(std::initializer_list<double> values) {
  return column(std::span<const double>(values.begin(), values.size()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, values);
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
  os << "Tensor" << shape_string(t.shape()) << "{";
  const std::size_t shown = std::min<std::size_t>(t.size(), 16);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << t[i];
  if (shown < t.size()) os << ", ...";
  return os << "}";
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

AxisGrid::AxisGrid(std::vector<std::vector<double>> coords, std::vector<AxisBounds> bounds)
    : coords_(std::move(coords)), bounds_(std::move(bounds)) {
  if (coords_.size() != bounds_.size()) {
    throw DimensionError("axis grid has " + std::to_string(coords_.size()) +
                         " coordinate vectors but " + std::to_string(bounds_.size()) +
                         " bounds");
  }
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto& c = coords_[i];
    if (c.empty()) throw DimensionError("axis " + std::to_string(i) + " is empty");
    if (!std::is_sorted(c.begin(), c.end())) {
      throw UsageError("axis " + std::to_string(i) + " coordinates are not sorted");
    }
    if (c.front() < bounds_[i].lo || c.back() > bounds_[i].hi) {
      throw UsageError("axis " + std::to_string(i) + " coordinates leave their bounds");
    }
  }
}

AxisGrid AxisGrid::uniform(const std::vector<AxisBounds>& bounds,
                           const std::vector<std::size_t>& counts) {
  if (bounds.size() != counts.size()) {
    throw DimensionError("uniform grid: bounds and counts disagree in length");
  }
  std::vector<std::vector<double>> coords(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const std::size_t n = counts[i];
    if (n == 0) throw UsageError("uniform grid: zero points on an axis");
    coords[i].resize(n);
    if (n == 1) {
      coords[i][0] = bounds[i].lo;
      continue;
    }
    const double h = (bounds[i].hi - bounds[i].lo) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) coords[i][k] = bounds[i].lo + h * static_cast<double>(k);
    coords[i][n - 1] = bounds[i].hi;
  }
  return AxisGrid(std::move(coords), bounds);
}

Shape AxisGrid::grid_shape() const {
  Shape s;
  for (const auto& c : coords_) s.push_back(c.size());
  return s;
}

std::size_t AxisGrid::grid_points() const { return shape_size(grid_shape()); }

std::size_t AxisGrid::stored_values() const {
  std::size_t n = 0;
  for (const auto& c : coords_) n += c.size();
  return n;
}

Tensor AxisGrid::axis_column(std::size_t i) const { return Tensor::column(coords_.at(i)); }

Tensor AxisGrid::points() const {
  const std::size_t d = dims();
  const Shape gs = grid_shape();
  const std::size_t total = shape_size(gs);
  Tensor out({total, d});
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t k = 0; k < d; ++k) out(p, k) = coords_[k][idx[k]];
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < gs[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a matrix, got shape " +
                         shape_string(t.shape()));
  }
}

}  // namespace

namespace {

// C[m,p] += Σ_kk A(i,kk)·B(kk,j), where A(i,kk) = A[i·a_rs + kk·a_ks] and B is
// row-major with leading dimension ldb. Every C element accumulates its k terms
// one at a time in ascending kk, so the result is bit-identical to the naive
// triple loop; the blocking only changes which elements are in flight.
#if defined(__AVX512F__)
constexpr std::size_t kLanes = 8;
#else
constexpr std::size_t kLanes = 4;
#endif
using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));
constexpr std::size_t kRows = 4;
constexpr std::size_t kVecs = 3;
constexpr std::size_t kCols = kVecs * kLanes;
constexpr std::size_t kDepth = 256;

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store(double* p, Vec v) { std::memcpy(p, &v, sizeof v); }

void micro(std::size_t k0, std::size_t k1, const double* A, std::size_t a_rs, std::size_t a_ks,
           const double* B, std::size_t ldb, double* C, std::size_t ldc) {
  Vec acc[kRows][kVecs];
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] = load(C + r * ldc + v * kLanes);
  for (std::size_t kk = k0; kk < k1; ++kk) {
    const double* b = B + kk * ldb;
    Vec bv[kVecs];
    for (std::size_t v = 0; v < kVecs; ++v) bv[v] = load(b + v * kLanes);
    for (std::size_t r = 0; r < kRows; ++r) {
      const double s = A[r * a_rs + kk * a_ks];
      for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] += s * bv[v];
    }
  }
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t v = 0; v < kVecs; ++v) store(C + r * ldc + v * kLanes, acc[r][v]);
}

// Edge blocks with runtime extents.
void micro_edge(std::size_t rows, std::size_t cols, std::size_t k0, std::size_t k1,
                const double* A, std::size_t a_rs, std::size_t a_ks, const double* B,
                std::size_t ldb, double* C, std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* c = C + r * ldc;
    for (std::size_t kk = k0; kk < k1; ++kk) {
      const double s = A[r * a_rs + kk * a_ks];
      const double* b = B + kk * ldb;
      for (std::size_t j = 0; j < cols; ++j) c[j] += s * b[j];
    }
  }
}

void gemm(std::size_t m, std::size_t p, std::size_t k, const double* A, std::size_t a_rs,
          std::size_t a_ks, const double* B, std::size_t ldb, double* C) {
  for (std::size_t k0 = 0; k0 < k; k0 += kDepth) {
    const std::size_t k1 = std::min(k, k0 + kDepth);
    for (std::size_t i = 0; i < m; i += kRows) {
      const std::size_t rows = std::min(kRows, m - i);
      for (std::size_t j = 0; j < p; j += kCols) {
        const std::size_t cols = std::min(kCols, p - j);
        double* c = C + i * p + j;
        const double* a = A + i * a_rs;
        if (rows == kRows && cols == kCols) {
          micro(k0, k1, a, a_rs, a_ks, B + j, ldb, c, p);
        } else {
          micro_edge(rows, cols, k0, k1, a, a_rs, a_ks, B + j, ldb, c, p);
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  Tensor out({m, p});
  gemm(m, p, k, a.data().data(), k, 1, b.data().data(), p, out.data().data());
  charge(m * p * (k - 1), m * p * k);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt inner extents differ: " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()) + "^T");
  }
  // Transpose the right operand once so the kernel streams rows.
  std::vector<double> bt(k * p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t kk = 0; kk < k; ++kk) bt[kk * p + j] = b(j, kk);
  Tensor out({m, p});
  gemm(m, p, k, a.data().data(), k, 1, bt.data(), p, out.data().data());
  charge(m * p * (k - 1), m * p * k);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t k = a.dim(0), m = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul_tn inner extents differ: " + shape_string(a.shape()) +
                         "^T x " + shape_string(b.shape()));
  }
  Tensor out({m, p});
  gemm(m, p, k, a.data().data(), 1, m, b.data().data(), p, out.data().data());
  charge(m * p * (k - 1), m * p * k);
  return out;
}

bool is_row_broadcast(const Shape& a, const Shape& b) {
  if (a.empty()) return false;
  const std::size_t m = a.back();
  return (b.size() == 1 && b[0] == m) || (b.size() == 2 && b[0] == 1 && b[1] == m);
}

Tensor ew(EwOp op, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  if (!same && !is_row_broadcast(a.shape(), b.shape())) {
    throw DimensionError("elementwise op: shape " + shape_string(b.shape()) +
                         " does not broadcast onto " + shape_string(a.shape()));
  }
  Tensor out = Tensor::uninitialized(a.shape());
  const std::size_t n = a.size();
  const std::size_t m = same ? n : b.size();
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  for (std::size_t base = 0; base < n; base += m) {
    switch (op) {
      case EwOp::Add:
        for (std::size_t j = 0; j < m; ++j) C[base + j] = A[base + j] + B[j];
        break;
      case EwOp::Sub:
        for (std::size_t j = 0; j < m; ++j) C[base + j] = A[base + j] - B[j];
        break;
      case EwOp::Mul:
        for (std::size_t j = 0; j < m; ++j) C[base + j] = A[base + j] * B[j];
        break;
    }
  }
  if (op == EwOp::Mul) {
    charge(0, n);
  } else {
    charge(n, 0);
  }
  return out;
}

double tanh_k(int k, double x) {
  const double t = std::tanh(x);
  const double s = 1.0 - t * t;
  switch (k) {
    case 0: return t;
    case 1: return s;
    case 2: return -2.0 * t * s;
    case 3: return -2.0 * s * (1.0 - 3.0 * t * t);
    default: throw UsageError("tanh_k: order " + std::to_string(k) + " not in 0..3");
  }
}

Tensor tanh_k(int k, const Tensor& a) {
  if (k < 0 || k > 3) throw UsageError("tanh_k: order " + std::to_string(k) + " not in 0..3");
  Tensor out = Tensor::uninitialized(a.shape());
  const double* A = a.data().data();
  double* C = out.data().data();
  const std::size_t n = a.size();
  switch (k) {
    case 0:
      for (std::size_t i = 0; i < n; ++i) C[i] = std::tanh(A[i]);
      break;
    case 1:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = std::tanh(A[i]);
        C[i] = 1.0 - t * t;
      }
      break;
    default:
      for (std::size_t i = 0; i < n; ++i) C[i] = tanh_k(k, A[i]);
      break;
  }
  charge(kTanhAdds * n, kTanhMults * n);
  return out;
}

double reduce(ReduceOp op, const Tensor& a) {
  const std::size_t n = a.size();
  if (op == ReduceOp::Mean && n == 0) throw DomainError("mean of an empty tensor");
  double s = 0.0;
  for (double v : a.data()) s += v;
  charge(n > 0 ? n - 1 : 0, 0);
  if (op == ReduceOp::Mean) {
    charge(0, 1);
    return s * (1.0 / static_cast<double>(n));
  }
  return s;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::uninitialized(a.shape());
  const double* A = a.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < a.size(); ++i) C[i] = c * A[i];
  charge(0, a.size());
  return out;
}

Tensor square(const Tensor& a) {
  Tensor out = Tensor::uninitialized(a.shape());
  const double* A = a.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < a.size(); ++i) C[i] = A[i] * A[i];
  charge(0, a.size());
  return out;
}

Tensor sum_rows(const Tensor& a, const Shape& target) {
  if (!is_row_broadcast(a.shape(), target)) {
    throw DimensionError("sum_rows: " + shape_string(target) + " is not a row of " +
                         shape_string(a.shape()));
  }
  Tensor out(target);
  const std::size_t m = out.size();
  double* C = out.data().data();
  const double* A = a.data().data();
  for (std::size_t base = 0; base < a.size(); base += m)
    for (std::size_t j = 0; j < m; ++j) C[j] += A[base + j];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t check_factors(std::span<const Tensor> factors) {
  if (factors.size() < 2) {
    throw DimensionError("merge needs at least two factor matrices, got " +
                         std::to_string(factors.size()));
  }
  const std::size_t r = factors[0].rank() == 2 ? factors[0].dim(1) : 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const Tensor& f = factors[i];
    if (f.rank() != 2 || f.dim(1) != r) {
      throw DimensionError("merge factor " + std::to_string(i) + " has shape " +
                           shape_string(f.shape()) + ", expected [n," +
                           std::to_string(r) + "]");
    }
  }
  return r;
}

}  // namespace

OpCounts merge_cost(std::span<const std::size_t> extents, std::size_t rank) {
  OpCounts c;
  std::uint64_t prefix = extents.empty() ? 0 : extents[0];
  for (std::size_t k = 1; k < extents.size(); ++k) {
    prefix *= extents[k];
    c.mults += rank * prefix;
  }
  c.adds = (rank - 1) * prefix;
  return c;
}

Tensor merge(std::span<const Tensor> factors) {
  const std::size_t r = check_factors(factors);
  const std::size_t d = factors.size();

  // Pairwise contraction: P_k[i_1..i_k, j] = P_{k-1}[.., j] * F_k[i_k, j] for
  // all but the last factor, then a dot product over j against the last one.
  Buffer prod(factors[0].data().begin(), factors[0].data().end());
  std::size_t lines = factors[0].dim(0);
  for (std::size_t k = 1; k + 1 < d; ++k) {
    const std::size_t nk = factors[k].dim(0);
    Buffer next(lines * nk * r);
    const double* F = factors[k].data().data();
    for (std::size_t l = 0; l < lines; ++l) {
      const double* p = prod.data() + l * r;
      for (std::size_t i = 0; i < nk; ++i) {
        double* q = next.data() + (l * nk + i) * r;
        const double* f = F + i * r;
        for (std::size_t j = 0; j < r; ++j) q[j] = p[j] * f[j];
      }
    }
    prod = std::move(next);
    lines *= nk;
  }

  Shape out_shape;
  std::vector<std::size_t> extents;
  for (const Tensor& f : factors) {
    out_shape.push_back(f.dim(0));
    extents.push_back(f.dim(0));
  }
  Tensor out(out_shape);
  const Tensor& last = factors[d - 1];
  const std::size_t nl = last.dim(0);
  const double* L = last.data().data();
  double* C = out.data().data();
  for (std::size_t l = 0; l < lines; ++l) {
    const double* p = prod.data() + l * r;
    for (std::size_t i = 0; i < nl; ++i) {
      const double* f = L + i * r;
      double s = p[0] * f[0];
      for (std::size_t j = 1; j < r; ++j) s += p[j] * f[j];
      C[l * nl + i] = s;
    }
  }
  const OpCounts cost = merge_cost(extents, r);
  charge(cost.adds, cost.mults);
  return out;
}

Tensor merge(std::initializer_list<Tensor> factors) {
  return merge(std::span<const Tensor>(factors.begin(), factors.size()));
}

std::vector<Tensor> merge_adjoint(std::span<const Tensor> factors, const Tensor& upstream) {
  const std::size_t r = check_factors(factors);
  const std::size_t d = factors.size();
  Shape grid;
  for (const Tensor& f : factors) grid.push_back(f.dim(0));
  if (upstream.shape() != grid) {
    throw DimensionError("merge adjoint: upstream shape " + shape_string(upstream.shape()) +
                         " differs from grid " + shape_string(grid));
  }

  std::vector<Tensor> adj;
  adj.reserve(d);
  for (const Tensor& f : factors) adj.emplace_back(f.shape());

  // Walk the grid one innermost line at a time. For a line with fixed outer
  // indices (i_1..i_{d-1}):
  //   last factor:   adj_d[i_d, j] += A[.., i_d] * Π_{k<d} F_k[i_k, j]
  //   other factors: adj_k[i_k, j] += (Σ_{i_d} A[.., i_d] F_d[i_d, j]) * Π_{l<d, l≠k} F_l[i_l, j]
  const std::size_t outer_dims = d - 1;
  const std::size_t nl = grid[d - 1];
  std::size_t lines = 1;
  for (std::size_t k = 0; k < outer_dims; ++k) lines *= grid[k];

  std::vector<std::size_t> idx(outer_dims, 0);
  std::vector<double> prefix((outer_dims + 1) * r);  // prefix[k] = Π_{l<k} F_l
  std::vector<double> suffix((outer_dims + 1) * r);  // suffix[k] = Π_{k<=l<outer} F_l
  std::vector<double> line_sum(r);
  const double* A = upstream.data().data();
  const double* L = factors[d - 1].data().data();
  double* adjL = adj[d - 1].data().data();

  for (std::size_t line = 0; line < lines; ++line) {
    std::fill(prefix.begin(), prefix.begin() + r, 1.0);
    for (std::size_t k = 0; k < outer_dims; ++k) {
      const double* f = factors[k].data().data() + idx[k] * r;
      for (std::size_t j = 0; j < r; ++j) prefix[(k + 1) * r + j] = prefix[k * r + j] * f[j];
    }
    std::fill(suffix.begin() + outer_dims * r, suffix.end(), 1.0);
    for (std::size_t k = outer_dims; k-- > 0;) {
      const double* f = factors[k].data().data() + idx[k] * r;
      for (std::size_t j = 0; j < r; ++j) suffix[k * r + j] = suffix[(k + 1) * r + j] * f[j];
    }
    const double* full = prefix.data() + outer_dims * r;

    std::fill(line_sum.begin(), line_sum.end(), 0.0);
    const double* a_line = A + line * nl;
    for (std::size_t i = 0; i < nl; ++i) {
      const double a = a_line[i];
      const double* f = L + i * r;
      double* g = adjL + i * r;
      for (std::size_t j = 0; j < r; ++j) {
        g[j] += a * full[j];
        line_sum[j] += a * f[j];
      }
    }
    for (std::size_t k = 0; k < outer_dims; ++k) {
      double* g = adj[k].data().data() + idx[k] * r;
      const double* pre = prefix.data() + k * r;
      const double* suf = suffix.data() + (k + 1) * r;
      for (std::size_t j = 0; j < r; ++j) g[j] += line_sum[j] * (pre[j] * suf[j]);
    }

    for (std::size_t k = outer_dims; k-- > 0;) {
      if (++idx[k] < grid[k]) break;
      idx[k] = 0;
    }
  }
  return adj;
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

void write_le(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      os.write(bytes, 8);
    }
  }
}

void read_le(std::istream& is, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double& v : values) {
      unsigned char bytes[8];
      is.read(reinterpret_cast<char*>(bytes), 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      v = std::bit_cast<double>(bits);
    }
  }
}

}  // namespace

void write_grid(std::ostream& os, const GridFile& grid) {
  nlohmann::json header;
  header["field"] = grid.field;
  header["shape"] = grid.values.shape();
  header["dtype"] = "float64-le";
  auto bounds = nlohmann::json::array();
  for (const auto& b : grid.bounds) bounds.push_back({b.lo, b.hi});
  header["bounds"] = bounds;
  header["meta"] = grid.meta;
  os << header.dump() << '\n';
  write_le(os, grid.values.data());
  if (!os) throw FileError("grid export: write failed");
}

GridFile read_grid(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FileError("grid import: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FileError(std::string("grid import: malformed header (") + e.what() + ")");
  }
  GridFile grid;
  grid.meta = header.value("meta", nlohmann::json::object());
  grid.field = header.at("field").get<std::string>();
  Shape shape = header.at("shape").get<Shape>();
  for (const auto& b : header.at("bounds")) {
    grid.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  }
  grid.values = Tensor(shape);
  read_le(is, grid.values.data());
  if (!is) throw FileError("grid import: payload shorter than header shape");
  return grid;
}

void write_grid_file(const std::string& path, const GridFile& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError("cannot open " + path + " for writing");
  write_grid(os, grid);
}

GridFile read_grid_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open " + path);
  return read_grid(is);
}

}  // namespace spinn
