#include "spinn/flops.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "spinn/errors.hpp"

namespace spinn {

std::size_t ArchSpec::batch() const {
  if (kind == SpecKind::Separable) return n;
  std::size_t b = 1;
  for (std::size_t i = 0; i < dims; ++i) b *= n;
  return b;
}

ArchSpec default_spinn_arch(std::size_t n) {
  return {SpecKind::Separable, {1, 50, 50, 50, 50, 50, 50}, 3, 50, n};
}

ArchSpec default_pinn_arch(std::size_t n) {
  return {SpecKind::Monolithic, {3, 100, 100, 100, 100, 100, 1}, 3, 1, n};
}

void validate(const ArchSpec& spec) {
  if (spec.widths.size() < 2) throw UsageError("arch spec needs at least two widths");
  if (spec.kind == SpecKind::Separable) {
    if (spec.widths.front() != 1) throw UsageError("separable bodies take one input coordinate");
    if (spec.widths.back() != spec.rank) throw UsageError("body output width must equal the rank");
  } else if (spec.widths.front() != spec.dims) {
    throw UsageError("monolithic network input width must equal d");
  }
}

OpCounts mlp_forward_ops(const std::vector<std::size_t>& widths, std::size_t batch) {
  OpCounts c;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::uint64_t k = widths[l], m = widths[l + 1];
    c.mults += batch * m * k;
    c.adds += batch * m * k;
    if (l + 2 < widths.size()) {
      c.adds += kTanhAdds * batch * m;
      c.mults += kTanhMults * batch * m;
    }
  }
  return c;
}

OpCounts mlp_jet_extra_ops(const std::vector<std::size_t>& widths, std::size_t batch, int order,
                           std::size_t directions) {
  if (order != 1 && order != 2) throw UsageError("jet order must be 1 or 2");
  OpCounts c;
  const std::uint64_t channels = static_cast<std::uint64_t>(order) * directions;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::uint64_t k = widths[l], m = widths[l + 1];
    c.mults += channels * batch * m * k;
    c.adds += channels * batch * m * (k - 1);
    if (l + 2 < widths.size()) {
      const std::uint64_t e = batch * m;
      // Shared by all directions: tanh'(v), and for order 2 tanh'' = −2·tanh·tanh'.
      c.adds += kTanhAdds * e;
      c.mults += kTanhMults * e;
      if (order == 2) c.mults += 2 * e;
      // Per direction: tanh'·v'; for order 2 also v'², tanh''·v'², tanh'·v'' and their sum.
      c.mults += directions * e;
      if (order == 2) {
        c.mults += directions * 3 * e;
        c.adds += directions * e;
      }
    }
  }
  return c;
}

namespace {

OpCounts merge_ops(const ArchSpec& spec) {
  const std::vector<std::size_t> extents(spec.dims, spec.n);
  return merge_cost(extents, spec.rank);
}

}  // namespace

OpCounts count_forward(const ArchSpec& spec) {
  validate(spec);
  OpCounts c = mlp_forward_ops(spec.widths, spec.batch());
  if (spec.kind == SpecKind::Separable) {
    c = spec.dims * c;
    c += merge_ops(spec);
  }
  return c;
}

OpCounts count_derivatives(const ArchSpec& spec, int order) {
  validate(spec);
  if (spec.kind == SpecKind::Monolithic) {
    return mlp_jet_extra_ops(spec.widths, spec.batch(), order, spec.dims);
  }
  // Each body is differentiated along its own axis; one merge per derivative
  // grid: d for order 1, 2d for order 2.
  OpCounts c = spec.dims * mlp_jet_extra_ops(spec.widths, spec.batch(), order, 1);
  c += (static_cast<std::uint64_t>(order) * spec.dims) * merge_ops(spec);
  return c;
}

OpCounts count_field_evaluation(const ArchSpec& spec) {
  return count_forward(spec) + count_derivatives(spec, 2);
}

FlopsReport flops_report(const ArchSpec& spec) {
  return {count_forward(spec), count_derivatives(spec, 1), count_derivatives(spec, 2)};
}

CostModel cost_model(double n, double d, double ops_f, double ops_g, double c_f, double c_g) {
  return cost_model(n, d, ops_f, ops_g, c_f, c_g, ops_f);
}

CostModel cost_model(double n, double d, double ops_f, double ops_g, double c_f, double c_g,
                     double ops_f_nonsep) {
  if (c_f < 2.0 || c_f > 3.0 || c_g < 2.0 || c_g > 3.0) {
    throw UsageError("cost-model constants c_f, c_g must lie in [2, 3]");
  }
  CostModel m;
  m.separated = n * d * c_f * ops_f + c_g * ops_g;
  m.non_separated = std::pow(n, d) * c_f * ops_f_nonsep;
  m.ratio = m.separated / m.non_separated;
  return m;
}

namespace {

std::string mega(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", static_cast<double>(v) / 1e6);
  std::string s = buf;
  // Thousands separators.
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

nlohmann::json counts_json(const OpCounts& c) {
  return {{"adds", c.adds}, {"mults", c.mults}, {"flops", c.total()}};
}

nlohmann::json report_json(const ArchSpec& spec, const FlopsReport& r) {
  return {{"widths", spec.widths},
          {"dims", spec.dims},
          {"rank", spec.rank},
          {"n", spec.n},
          {"forward", counts_json(r.forward)},
          {"first_derivative", counts_json(r.first)},
          {"second_derivative", counts_json(r.second)},
          {"total", counts_json(r.total())}};
}

}  // namespace

std::string flops_table_markdown(const FlopsReport& spinn, const FlopsReport& pinn) {
  std::ostringstream os;
  os << "| | SPINN ADDS (1e6) | SPINN MULTS (1e6) | PINN ADDS (1e6) | PINN MULTS (1e6) |\n"
     << "|---|---:|---:|---:|---:|\n";
  auto row = [&](const char* name, const OpCounts& s, const OpCounts& p) {
    os << "| " << name << " | " << mega(s.adds) << " | " << mega(s.mults) << " | " << mega(p.adds)
       << " | " << mega(p.mults) << " |\n";
  };
  row("forward pass", spinn.forward, pinn.forward);
  row("1st-order derivative", spinn.first, pinn.first);
  row("2nd-order derivative", spinn.second, pinn.second);
  os << "| MFLOPs (total) | " << mega(spinn.total().total()) << " | | "
     << mega(pinn.total().total()) << " | |\n";
  char ratio[64];
  std::snprintf(ratio, sizeof ratio, "%.1f",
                static_cast<double>(pinn.total().total()) / static_cast<double>(spinn.total().total()));
  os << "\nPINN / SPINN total FLOPs ratio: " << ratio << "x\n";
  return os.str();
}

nlohmann::json flops_json(const ArchSpec& spinn_spec, const FlopsReport& spinn,
                          const ArchSpec& pinn_spec, const FlopsReport& pinn) {
  nlohmann::json j;
  j["convention"] = {{"tanh_adds", kTanhAdds}, {"tanh_mults", kTanhMults}};
  j["spinn"] = report_json(spinn_spec, spinn);
  j["pinn"] = report_json(pinn_spec, pinn);
  j["ratio_total_flops"] =
      static_cast<double>(pinn.total().total()) / static_cast<double>(spinn.total().total());
  return j;
}

}  // namespace spinn
