#include "doctest.h"
#include "spinn/errors.hpp"
#include "spinn/flops.hpp"
#include "spinn/models.hpp"

using namespace spinn;

TEST_CASE("a 1 → 1 linear layer costs one add and one mult per point") {
  const OpCounts c = mlp_forward_ops({1, 1}, 1);
  CHECK(c.adds == 1);
  CHECK(c.mults == 1);
}

TEST_CASE("cost model examples") {
  const CostModel a = cost_model(90, 3, 1, 0, 2, 2);
  CHECK(a.separated == doctest::Approx(540));
  CHECK(a.non_separated == doctest::Approx(1458000));
  CHECK(a.ratio == doctest::Approx(270.0 / 729000.0));
  const CostModel b = cost_model(2, 2, 1, 0, 2, 2);
  CHECK(b.ratio == doctest::Approx(1.0));
  CHECK_THROWS_AS(cost_model(2, 2, 1, 0, 1.5, 2), UsageError);
  CHECK_THROWS_AS(cost_model(2, 2, 1, 0, 2, 3.5), UsageError);
}

TEST_CASE("separated advantage grows with n") {
  double prev = 2.0;
  for (double n : {4.0, 8.0, 16.0, 32.0, 64.0, 90.0}) {
    const CostModel m = cost_model(n, 3, 1000, 50 * n * n * n, 2.5, 2.5);
    CHECK(m.ratio < prev);
    prev = m.ratio;
  }
}

TEST_CASE("cost model brackets the counted ratio within the constant range") {
  const ArchSpec s = default_spinn_arch(), p = default_pinn_arch();
  const double fwd = static_cast<double>(count_field_evaluation(s).total());
  const double per_body = static_cast<double>(mlp_forward_ops(s.widths, 1).total());
  const double per_point = static_cast<double>(mlp_forward_ops(p.widths, 1).total());
  const std::vector<std::size_t> ext(3, 90);
  const double merge = static_cast<double>(merge_cost(ext, 50).total());
  const CostModel m = cost_model(90, 3, per_body, merge, 2.5, 2.5, per_point);
  const double counted = fwd / static_cast<double>(count_field_evaluation(p).total());
  CHECK(m.ratio / counted > 1.0 / 3.0);
  CHECK(m.ratio / counted < 3.0);
}

TEST_CASE("estimator equals the runtime counter") {
  for (std::size_t n : {3, 5}) {
    const ArchSpec spec{SpecKind::Separable, {1, 7, 7, 3}, 3, 3, n};
    const SeparableModel m = init_separable(3, {7, 7}, 3, 1);
    const AxisGrid grid = AxisGrid::uniform({{0, 1}, {0, 1}, {0, 1}}, {n, n, n});
    Tape t;
    const auto nodes = std::get<SeparableNodes>(spinn::bind(t, Model{m}));
    {
      CountingScope s;
      spinn_fields(t, nodes, grid, FieldRequest::value_only(3));
      CHECK(s.counts() == count_forward(spec));
    }
    {
      CountingScope s;
      spinn_fields(t, nodes, grid, FieldRequest::all(3));
      CHECK(s.counts() == count_field_evaluation(spec));
    }
  }
  const ArchSpec spec{SpecKind::Monolithic, {3, 7, 7, 1}, 3, 1, 4};
  const VanillaModel m = init_vanilla(3, {7, 7}, 2);
  const AxisGrid grid = AxisGrid::uniform({{0, 1}, {0, 1}, {0, 1}}, {4, 4, 4});
  Tape t;
  const auto nodes = std::get<MlpNodes>(spinn::bind(t, Model{m}));
  CountingScope s;
  pinn_fields(t, nodes, grid.points(), FieldRequest::all(3));
  CHECK(s.counts() == count_field_evaluation(spec));
}

TEST_CASE("default table ratio and row structure") {
  const FlopsReport s = flops_report(default_spinn_arch()), p = flops_report(default_pinn_arch());
  const double ratio = static_cast<double>(p.total().total()) / static_cast<double>(s.total().total());
  CHECK(ratio >= 500);
  const std::string md = flops_table_markdown(s, p);
  CHECK(md.find("forward pass") != std::string::npos);
  CHECK(md.find("1st-order derivative") != std::string::npos);
  CHECK(md.find("2nd-order derivative") != std::string::npos);
  CHECK(md.find("MFLOPs (total)") != std::string::npos);
  const auto j = flops_json(default_spinn_arch(), s, default_pinn_arch(), p);
  CHECK(j["spinn"]["forward"]["adds"].get<std::uint64_t>() == s.forward.adds);
}

TEST_CASE("invalid arch specs are rejected") {
  CHECK_THROWS_AS(count_forward({SpecKind::Separable, {2, 5, 4}, 3, 4, 8}), UsageError);
  CHECK_THROWS_AS(count_forward({SpecKind::Separable, {1, 5, 4}, 3, 3, 8}), UsageError);
  CHECK_THROWS_AS(count_forward({SpecKind::Monolithic, {2, 5, 1}, 3, 1, 8}), UsageError);
}
