#pragma once

// Dense row-major tensors of doubles and the fixed kernel set used by the
// autodiff tape, the Taylor jets and the PDE losses.
//
// Every kernel is a pure function of its inputs. Summation order is fixed
// (left to right over the reduced index) so results are bit-reproducible.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace spinn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// ---------------------------------------------------------------------------
// Buffer accounting. Every Tensor allocation goes through TrackingAllocator so
// the live and peak byte counts reflect all tensor storage in the process.

namespace memory {

std::size_t live_bytes();
std::size_t peak_bytes();
// Resets the peak to the current live count.
void reset_peak();

namespace detail {
void on_allocate(std::size_t bytes);
void on_deallocate(std::size_t bytes);
}  // namespace detail

}  // namespace memory

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    memory::detail::on_allocate(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::detail::on_deallocate(n * sizeof(T));
    ::operator delete(p);
  }
  // Default-initialize on resize so kernels that overwrite every element skip
  // the zero fill.
  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, TrackingAllocator<double>>;

// ---------------------------------------------------------------------------
// Elementary-operation counting. While a CountingScope is alive on the current
// thread, every kernel charges its ADDS and MULTS to it. The charges follow the
// same convention as the flops estimator so the two can be compared exactly.

struct OpCounts {
  std::uint64_t adds = 0;
  std::uint64_t mults = 0;

  std::uint64_t total() const { return adds + mults; }
  OpCounts& operator+=(const OpCounts& o) {
    adds += o.adds;
    mults += o.mults;
    return *this;
  }
  friend OpCounts operator+(OpCounts a, const OpCounts& b) { return a += b; }
  friend OpCounts operator*(std::uint64_t k, OpCounts a) {
    a.adds *= k;
    a.mults *= k;
    return a;
  }
  bool operator==(const OpCounts&) const = default;
};

// Cost charged per tanh-family element (tanh, tanh', tanh'', tanh''').
inline constexpr std::uint64_t kTanhAdds = 4;
inline constexpr std::uint64_t kTanhMults = 4;

class CountingScope {
 public:
  CountingScope();
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

  const OpCounts& counts() const { return counts_; }

 private:
  friend void charge(std::uint64_t adds, std::uint64_t mults);
  OpCounts counts_;
  CountingScope* outer_;
};

// Charges the innermost active scope (and, through it, its outer scopes).
void charge(std::uint64_t adds, std::uint64_t mults);

// ---------------------------------------------------------------------------

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  // Contents unspecified; for kernels that write every element.
  static Tensor uninitialized(Shape shape);
  // Column vector [n, 1].
  static Tensor column(std::span<const double> values);
  static Tensor column(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t nbytes() const { return data_.size() * sizeof(double); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  // Two-index access for rank-2 tensors.
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }

  // Value of a single-element tensor.
  double item() const;
  // Same data viewed under a new shape of equal size.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  Shape shape_;
  Buffer data_;
};

std::ostream& operator<<(std::ostream& os, const Tensor& t);

bool all_finite(const Tensor& t);

// ---------------------------------------------------------------------------
// Lattice-structured collocation coordinates: d sorted 1-d coordinate vectors.
// Storage is the sum of the per-axis counts; the implied grid is their product.

struct AxisBounds {
  double lo = 0.0;
  double hi = 1.0;
};

class AxisGrid {
 public:
  AxisGrid() = default;
  AxisGrid(std::vector<std::vector<double>> coords, std::vector<AxisBounds> bounds);

  // n uniformly spaced points per axis including both endpoints.
  static AxisGrid uniform(const std::vector<AxisBounds>& bounds,
                          const std::vector<std::size_t>& counts);

  std::size_t dims() const { return coords_.size(); }
  const std::vector<double>& axis(std::size_t i) const { return coords_.at(i); }
  const AxisBounds& bounds(std::size_t i) const { return bounds_.at(i); }
  const std::vector<AxisBounds>& all_bounds() const { return bounds_; }
  Shape grid_shape() const;
  std::size_t grid_points() const;
  std::size_t stored_values() const;

  // Axis i coordinates as a [n_i, 1] column.
  Tensor axis_column(std::size_t i) const;
  // Every lattice point, row-major over the grid, as [N, d].
  Tensor points() const;

 private:
  std::vector<std::vector<double>> coords_;
  std::vector<AxisBounds> bounds_;
};

// ---------------------------------------------------------------------------
// Kernels.

enum class EwOp { Add, Sub, Mul };

// [m,k]·[k,p] → [m,p].
Tensor matmul(const Tensor& a, const Tensor& b);
// a·bᵀ for [m,k], [p,k] → [m,p].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// aᵀ·b for [k,m], [k,p] → [m,p].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Elementwise a op b. b may equal a's shape, or be a row vector ([m] or [1,m])
// broadcast over a's last axis.
Tensor ew(EwOp op, const Tensor& a, const Tensor& b);
inline Tensor add(const Tensor& a, const Tensor& b) { return ew(EwOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ew(EwOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ew(EwOp::Mul, a, b); }
bool is_row_broadcast(const Shape& a, const Shape& b);

// k-th derivative of tanh, k in 0..3.
Tensor tanh_k(int k, const Tensor& a);
double tanh_k(int k, double x);

enum class ReduceOp { Sum, Mean };
double reduce(ReduceOp op, const Tensor& a);
inline double sum(const Tensor& a) { return reduce(ReduceOp::Sum, a); }
inline double mean(const Tensor& a) { return reduce(ReduceOp::Mean, a); }
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& a);

// Sum of the rows of a [.., m] tensor into shape `target` ([m] or [1,m]).
Tensor sum_rows(const Tensor& a, const Shape& target);

// Rank-r outer-product merge: out[i_1..i_d] = Σ_j Π_k F_k[i_k, j].
Tensor merge(std::span<const Tensor> factors);
Tensor merge(std::initializer_list<Tensor> factors);
// Adjoints of every factor given the upstream adjoint of the merged grid.
std::vector<Tensor> merge_adjoint(std::span<const Tensor> factors,
                                  const Tensor& upstream);

// Ops charged by merge() for the given per-axis extents and rank.
OpCounts merge_cost(std::span<const std::size_t> extents, std::size_t rank);

// ---------------------------------------------------------------------------
// Binary grid export: one JSON header line, then little-endian doubles.

struct GridFile {
  std::string field;
  Tensor values;
  std::vector<AxisBounds> bounds;
  nlohmann::json meta = nlohmann::json::object();  // e.g. the run config
};

void write_grid(std::ostream& os, const GridFile& grid);
GridFile read_grid(std::istream& is);
void write_grid_file(const std::string& path, const GridFile& grid);
GridFile read_grid_file(const std::string& path);

}  // namespace spinn
