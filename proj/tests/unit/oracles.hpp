#pragma once

// Independent reference computations shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spinn/mlp.hpp"
#include "spinn/tensor.hpp"

namespace oracle {

inline spinn::Tensor random_tensor(spinn::Shape shape, spinn::SplitMix64& rng, double lo = -1.0,
                                   double hi = 1.0) {
  spinn::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Plain triple loop, k ascending.
inline spinn::Tensor matmul(const spinn::Tensor& a, const spinn::Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  spinn::Tensor c({m, p});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += a(i, q) * b(q, j);
      c(i, j) = s;
    }
  return c;
}

inline spinn::Tensor transpose(const spinn::Tensor& a) {
  spinn::Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

// Σ_j Π_i F_i[idx_i, j] at one multi-index.
inline double cp_point(const std::vector<spinn::Tensor>& f, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t j = 0; j < f[0].dim(1); ++j) {
    double p = 1.0;
    for (std::size_t i = 0; i < f.size(); ++i) p *= f[i](idx[i], j);
    s += p;
  }
  return s;
}

// Fourth-order central-difference gradient of a scalar function of several tensors.
inline std::vector<spinn::Tensor> fd_gradient(
    const std::function<double(const std::vector<spinn::Tensor>&)>& fn,
    const std::vector<spinn::Tensor>& x, double h = 1e-6) {
  std::vector<spinn::Tensor> g;
  for (std::size_t k = 0; k < x.size(); ++k) {
    spinn::Tensor gk(x[k].shape());
    for (std::size_t e = 0; e < x[k].size(); ++e) {
      auto at = [&](double s) {
        auto y = x;
        y[k][e] += s;
        return fn(y);
      };
      gk[e] = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
    }
    g.push_back(std::move(gk));
  }
  return g;
}

// max |a − b| / max(floor, |b|)
inline double max_rel_err(const spinn::Tensor& a, const spinn::Tensor& b, double floor = 1.0) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    w = std::max(w, std::abs(a[i] - b[i]) / std::max(floor, std::abs(b[i])));
  return w;
}

}  // namespace oracle
