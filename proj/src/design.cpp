#include "hbab/design.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hbab {

namespace {

void validate_factor(const Factor& f, std::set<std::string>& names) {
  if (f.name.empty()) throw DesignError("factor name must not be empty");
  if (!names.insert(f.name).second) throw DesignError("duplicate factor name '" + f.name + "'");
  if (f.values.size() < 2)
    throw DesignError("factor '" + f.name + "' needs at least 2 values");
  std::set<std::string> labels(f.values.begin(), f.values.end());
  if (labels.size() != f.values.size())
    throw DesignError("factor '" + f.name + "' has duplicate value labels");
}

std::size_t product_of_sizes(const std::vector<Factor>& factors) {
  std::size_t n = 1;
  for (const auto& f : factors) n *= f.values.size();
  return n;
}

// Mixed-radix decode, last factor fastest.
void decode(std::size_t index, const std::vector<Factor>& factors, std::vector<int>& out,
            std::size_t offset) {
  for (std::size_t i = factors.size(); i-- > 0;) {
    const std::size_t n = factors[i].values.size();
    out[offset + i] = static_cast<int>(index % n);
    index /= n;
  }
}

std::string combo_label(const std::vector<Factor>& factors, std::size_t combo) {
  std::vector<int> idx(factors.size());
  decode(combo, factors, idx, 0);
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += '|';
    out += factors[i].name + '=' + factors[i].values[idx[i]];
  }
  return out.empty() ? std::string("all") : out;
}

}  // namespace

ExperimentSpec::ExperimentSpec(std::vector<Factor> content, std::vector<Factor> context)
    : content_(std::move(content)), context_(std::move(context)) {
  if (content_.empty()) throw DesignError("at least one content factor is required");
  std::set<std::string> names;
  for (const auto& f : content_) validate_factor(f, names);
  for (const auto& f : context_) validate_factor(f, names);
}

const Factor& ExperimentSpec::factor(std::size_t i) const {
  return i < content_.size() ? content_[i] : context_.at(i - content_.size());
}

std::size_t ExperimentSpec::num_content_combos() const { return product_of_sizes(content_); }
std::size_t ExperimentSpec::num_context_combos() const { return product_of_sizes(context_); }

std::size_t ExperimentSpec::find_factor(const std::string& name) const {
  for (std::size_t i = 0; i < num_factors(); ++i)
    if (factor(i).name == name) return i;
  return num_factors();
}

Cell cell_at(const ExperimentSpec& spec, std::size_t cell) {
  Cell c;
  c.value_index.resize(spec.num_factors());
  decode(spec.content_of(cell), spec.content_factors(), c.value_index, 0);
  decode(spec.context_of(cell), spec.context_factors(), c.value_index,
         spec.content_factors().size());
  return c;
}

std::size_t index_of(const ExperimentSpec& spec, const Cell& cell) {
  if (cell.value_index.size() != spec.num_factors())
    throw DesignError("cell has wrong number of factors");
  std::size_t index = 0;
  for (std::size_t i = 0; i < spec.num_factors(); ++i) {
    const auto n = spec.factor(i).values.size();
    const int v = cell.value_index[i];
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw DesignError("cell value out of range");
    index = index * n + static_cast<std::size_t>(v);
  }
  return index;
}

std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  cells.reserve(spec.num_cells());
  for (std::size_t k = 0; k < spec.num_cells(); ++k) cells.push_back(cell_at(spec, k));
  return cells;
}

DesignMatrix build_design_matrix(const ExperimentSpec& spec, int interaction_order) {
  if (interaction_order != 1 && interaction_order != 2)
    throw DesignError("interaction order must be 1 or 2");
  const std::size_t F = spec.num_factors();
  if (interaction_order == 2 && F < 2) throw DesignError("interactions require >= 2 factors");

  DesignMatrix X;
  X.interaction_order = interaction_order;
  X.column_labels.push_back({ColumnKind::intercept});

  // main_offset[i] = first main-effect column of factor i
  std::vector<int> main_offset(F);
  for (std::size_t i = 0; i < F; ++i) {
    main_offset[i] = static_cast<int>(X.column_labels.size());
    for (std::size_t v = 0; v < spec.factor(i).values.size(); ++v)
      X.column_labels.push_back({ColumnKind::main, static_cast<int>(i), static_cast<int>(v)});
  }

  // pair_offset[i][j] (i < j) = first interaction column of the pair
  std::vector<std::vector<int>> pair_offset(F, std::vector<int>(F, -1));
  if (interaction_order == 2) {
    for (std::size_t i = 0; i < F; ++i)
      for (std::size_t j = i + 1; j < F; ++j) {
        pair_offset[i][j] = static_cast<int>(X.column_labels.size());
        for (std::size_t vi = 0; vi < spec.factor(i).values.size(); ++vi)
          for (std::size_t vj = 0; vj < spec.factor(j).values.size(); ++vj)
            X.column_labels.push_back({ColumnKind::interaction, static_cast<int>(i),
                                       static_cast<int>(vi), static_cast<int>(j),
                                       static_cast<int>(vj)});
      }
  }

  const auto rows = static_cast<Eigen::Index>(spec.num_cells());
  const auto cols = static_cast<Eigen::Index>(X.column_labels.size());
  X.entries = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const Cell c = cell_at(spec, static_cast<std::size_t>(k));
    X.entries(k, 0) = 1.0;
    for (std::size_t i = 0; i < F; ++i) X.entries(k, main_offset[i] + c.value_index[i]) = 1.0;
    if (interaction_order == 2) {
      for (std::size_t i = 0; i < F; ++i)
        for (std::size_t j = i + 1; j < F; ++j) {
          const int nj = static_cast<int>(spec.factor(j).values.size());
          X.entries(k, pair_offset[i][j] + c.value_index[i] * nj + c.value_index[j]) = 1.0;
        }
    }
  }
  return X;
}

std::vector<Comparison> enumerate_comparisons(const ExperimentSpec& spec) {
  const std::size_t M = spec.num_content_combos();
  const std::size_t C = spec.num_context_combos();
  std::vector<Comparison> out;
  out.reserve(C * M * (M - 1) / 2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t a = 0; a < M; ++a)
      for (std::size_t b = a + 1; b < M; ++b) out.push_back({c, a, b});
  return out;
}

std::string content_label(const ExperimentSpec& spec, std::size_t content_combo) {
  return combo_label(spec.content_factors(), content_combo);
}

std::string context_label(const ExperimentSpec& spec, std::size_t context_combo) {
  return combo_label(spec.context_factors(), context_combo);
}

std::string column_name(const ExperimentSpec& spec, const ColumnLabel& label) {
  auto part = [&](int f, int v) {
    const auto& factor = spec.factor(static_cast<std::size_t>(f));
    return factor.name + '=' + factor.values[static_cast<std::size_t>(v)];
  };
  switch (label.kind) {
    case ColumnKind::intercept:
      return "intercept";
    case ColumnKind::main:
      return part(label.factor_a, label.value_a);
    case ColumnKind::interaction:
      return part(label.factor_a, label.value_a) + ':' + part(label.factor_b, label.value_b);
  }
  return {};
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DesignError(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("factors") || !doc["factors"].is_array())
    throw DesignError("experiment spec needs a 'factors' array");
  std::vector<Factor> content, context;
  for (const auto& f : doc["factors"]) {
    if (!f.is_object() || !f.contains("name") || !f.contains("role") || !f.contains("values"))
      throw DesignError("each factor needs 'name', 'role' and 'values'");
    Factor factor;
    try {
      factor.name = f["name"].get<std::string>();
      factor.values = f["values"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw DesignError("factor name must be a string and values a list of strings");
    }
    const auto role = f["role"].is_string() ? f["role"].get<std::string>() : std::string{};
    if (role == "content")
      content.push_back(std::move(factor));
    else if (role == "context")
      context.push_back(std::move(factor));
    else
      throw DesignError("factor role must be 'content' or 'context'");
  }
  return ExperimentSpec(std::move(content), std::move(context));
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DesignError("cannot open experiment spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_spec(ss.str());
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.num_factors(); ++i) {
    const auto& f = spec.factor(i);
    factors.push_back({{"name", f.name},
                       {"role", spec.role(i) == FactorRole::content ? "content" : "context"},
                       {"values", f.values}});
  }
  return nlohmann::json{{"factors", factors}}.dump(2);
}

ExperimentSpec uniform_spec(int content, int context, int levels) {
  auto make = [levels](const std::string& prefix, int count) {
    std::vector<Factor> out;
    for (int i = 0; i < count; ++i) {
      Factor f{prefix + std::to_string(i + 1), {}};
      for (int v = 0; v < levels; ++v) f.values.push_back("v" + std::to_string(v + 1));
      out.push_back(std::move(f));
    }
    return out;
  };
  return ExperimentSpec(make("content", content), make("context", context));
}

}  // namespace hbab
