#include <doctest.h>

#include <set>

#include "hbab/design.hpp"

using namespace hbab;

namespace {

ExperimentSpec spec_23() {
  return ExperimentSpec({{"a", {"x", "y"}}}, {{"b", {"p", "q", "r"}}});
}

}  // namespace

TEST_CASE("cell counts") {
  CHECK(enumerate_cells(uniform_spec(2, 2, 4)).size() == 256);
  CHECK(enumerate_cells(ExperimentSpec({{"a", {"x", "y"}}}, {})).size() == 2);
  CHECK(enumerate_cells(spec_23()).size() == 6);
}

TEST_CASE("cells are lexicographic with the last factor fastest") {
  const auto cells = enumerate_cells(spec_23());
  CHECK(cells[0].value_index == std::vector<int>{0, 0});
  CHECK(cells[1].value_index == std::vector<int>{0, 1});
  CHECK(cells[3].value_index == std::vector<int>{1, 0});
  for (std::size_t k = 0; k < cells.size(); ++k) {
    CHECK(cell_at(spec_23(), k) == cells[k]);
    CHECK(index_of(spec_23(), cells[k]) == k);
  }
}

TEST_CASE("design matrix shapes") {
  const auto big = build_design_matrix(uniform_spec(2, 2, 4), 2);
  CHECK(big.rows() == 256);
  CHECK(big.cols() == 113);
  const auto one = build_design_matrix(ExperimentSpec({{"a", {"x", "y"}}}, {}), 1);
  CHECK(one.rows() == 2);
  CHECK(one.cols() == 3);
  const auto small = build_design_matrix(spec_23(), 2);
  CHECK(small.rows() == 6);
  CHECK(small.cols() == 12);
}

TEST_CASE("interactions need two factors") {
  CHECK_THROWS_WITH_AS(build_design_matrix(ExperimentSpec({{"a", {"x", "y"}}}, {}), 2),
                       doctest::Contains("interactions require"), DesignError);
}

TEST_CASE("row sums and labels") {
  for (int order : {1, 2}) {
    const auto spec = uniform_spec(2, 1, 3);
    const auto X = build_design_matrix(spec, order);
    const double F = 3;
    const double expected = 1 + F + (order == 2 ? F * (F - 1) / 2 : 0);
    for (Eigen::Index k = 0; k < X.rows(); ++k) CHECK(X.entries.row(k).sum() == expected);

    std::set<std::string> names;
    int mains = 0;
    for (const auto& l : X.column_labels) {
      names.insert(column_name(spec, l));
      mains += l.kind == ColumnKind::main;
    }
    CHECK(names.size() == X.column_labels.size());
    CHECK(mains == 9);
  }
}

TEST_CASE("row entries recover the cell") {
  const auto spec = spec_23();
  const auto X = build_design_matrix(spec, 2);
  const auto cells = enumerate_cells(spec);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::vector<int> recovered(spec.num_factors(), -1);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const auto& l = X.column_labels[static_cast<std::size_t>(j)];
      if (l.kind != ColumnKind::main || X.entries(static_cast<Eigen::Index>(k), j) == 0.0)
        continue;
      CHECK(recovered[static_cast<std::size_t>(l.factor_a)] == -1);
      recovered[static_cast<std::size_t>(l.factor_a)] = l.value_a;
    }
    CHECK(recovered == cells[k].value_index);
  }
}

TEST_CASE("comparison counts") {
  // 2 titles x 2 images, 4 countries x 4 devices
  const ExperimentSpec fig({{"title", {"t1", "t2"}}, {"image", {"i1", "i2"}}},
                           {{"country", {"c1", "c2", "c3", "c4"}},
                            {"device", {"d1", "d2", "d3", "d4"}}});
  CHECK(enumerate_comparisons(fig).size() == 96);
  CHECK(enumerate_comparisons(uniform_spec(2, 2, 4)).size() == 1920);
  const auto single = enumerate_comparisons(ExperimentSpec({{"a", {"x", "y"}}}, {}));
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Comparison{0, 0, 1});
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(ExperimentSpec({}, {{"b", {"p", "q"}}}), DesignError);
  CHECK_THROWS_AS(ExperimentSpec({{"a", {"x"}}}, {}), DesignError);
  CHECK_THROWS_AS(ExperimentSpec({{"a", {"x", "x"}}}, {}), DesignError);
  CHECK_THROWS_AS(ExperimentSpec({{"a", {"x", "y"}}}, {{"a", {"p", "q"}}}), DesignError);
}

TEST_CASE("spec file round trip") {
  const auto spec = spec_23();
  const auto back = parse_experiment_spec(experiment_spec_to_json(spec));
  CHECK(back.content_factors().size() == 1);
  CHECK(back.context_factors()[0].values == spec.context_factors()[0].values);
  CHECK(content_label(spec, 1) == "a=y");
  CHECK(context_label(spec, 2) == "b=r");
  CHECK(context_label(ExperimentSpec({{"a", {"x", "y"}}}, {}), 0) == "all");
  CHECK_THROWS_AS(parse_experiment_spec("{\"factors\": 3}"), DesignError);
  CHECK_THROWS_AS(parse_experiment_spec(
                      R"({"factors":[{"name":"a","role":"both","values":["x","y"]}]})"),
                  DesignError);
}
