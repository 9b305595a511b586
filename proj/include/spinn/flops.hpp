#pragma once

// Elementary-operation counts for both architectures.
//
// Counting convention (shared with the runtime counters in tensor.hpp):
//   affine layer, batch B, k → m:  B·m·k MULTS, B·m·k ADDS (k−1 accumulations + bias)
//   bias-free matmul (tangents):   B·m·k MULTS, B·m·(k−1) ADDS
//   tanh-family element:           4 ADDS, 4 MULTS
//   elementwise add / mul / scale: 1 ADD or 1 MULT per element
//   rank-r merge over n_1..n_d:    r·Σ_{k=2..d} Π_{i≤k} n_i MULTS, (r−1)·Π n_i ADDS
//
// Derivative rows count the work a second-order (or first-order) jet adds on
// top of the forward pass, on every coordinate axis. The monolithic network
// carries all d directions in one pass, so tanh derivatives are formed once.

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinn/tensor.hpp"

namespace spinn {

enum class SpecKind { Separable, Monolithic };

struct ArchSpec {
  SpecKind kind = SpecKind::Separable;
  // Full width chain, input first: {1, 50, ..., 50} per body or {3, 100, ..., 1}.
  std::vector<std::size_t> widths;
  std::size_t dims = 3;
  std::size_t rank = 50;  // separable: equals widths.back()
  std::size_t n = 90;     // lattice points per axis

  std::size_t batch() const;  // points fed to one network pass
};

ArchSpec default_spinn_arch(std::size_t n = 90);
ArchSpec default_pinn_arch(std::size_t n = 90);
void validate(const ArchSpec& spec);

// Plain forward pass of one MLP on `batch` rows.
OpCounts mlp_forward_ops(const std::vector<std::size_t>& widths, std::size_t batch);
// Extra work of an order-1 or order-2 jet pass over the forward pass, carrying
// `directions` tangent directions that share the value channel.
OpCounts mlp_jet_extra_ops(const std::vector<std::size_t>& widths, std::size_t batch, int order,
                           std::size_t directions = 1);

OpCounts count_forward(const ArchSpec& spec);
OpCounts count_derivatives(const ArchSpec& spec, int order);

// Exactly what spinn_fields / pinn_fields charge when every axis gets first and
// second derivatives: separable runs d body jets and 1 + 2d merges; monolithic
// runs one pass carrying d tangent directions. Equals forward + second row.
OpCounts count_field_evaluation(const ArchSpec& spec);

struct FlopsReport {
  OpCounts forward;
  OpCounts first;
  OpCounts second;

  OpCounts total() const { return forward + first + second; }
};

FlopsReport flops_report(const ArchSpec& spec);

struct CostModel {
  double separated;
  double non_separated;
  double ratio;  // separated / non_separated
};

// C_sep = n·d·c_f·ops_f + c_g·ops_g and C_nonsep = n^d·c_f·ops_f_nonsep, where
// ops_f_nonsep defaults to ops_f (the same per-point network on both sides).
CostModel cost_model(double n, double d, double ops_f, double ops_g, double c_f, double c_g);
CostModel cost_model(double n, double d, double ops_f, double ops_g, double c_f, double c_g,
                     double ops_f_nonsep);

std::string flops_table_markdown(const FlopsReport& spinn, const FlopsReport& pinn);
nlohmann::json flops_json(const ArchSpec& spinn_spec, const FlopsReport& spinn,
                          const ArchSpec& pinn_spec, const FlopsReport& pinn);

}  // namespace spinn
