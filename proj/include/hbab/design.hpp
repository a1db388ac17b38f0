#ifndef HBAB_DESIGN_HPP
#define HBAB_DESIGN_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hbab {

class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FactorRole { content, context };

struct Factor {
  std::string name;
  std::vector<std::string> values;
};

// Factorial layout of a multivariate test. Content factors are ordered
// before context factors wherever cells are indexed.
class ExperimentSpec {
 public:
  ExperimentSpec(std::vector<Factor> content, std::vector<Factor> context);

  const std::vector<Factor>& content_factors() const { return content_; }
  const std::vector<Factor>& context_factors() const { return context_; }

  std::size_t num_factors() const { return content_.size() + context_.size(); }
  const Factor& factor(std::size_t i) const;
  FactorRole role(std::size_t i) const {
    return i < content_.size() ? FactorRole::content : FactorRole::context;
  }

  std::size_t num_cells() const { return num_content_combos() * num_context_combos(); }
  std::size_t num_content_combos() const;
  std::size_t num_context_combos() const;

  // Cell index layout: cell = content_combo * num_context_combos + context_combo.
  std::size_t cell_index(std::size_t content_combo, std::size_t context_combo) const {
    return content_combo * num_context_combos() + context_combo;
  }
  std::size_t content_of(std::size_t cell) const { return cell / num_context_combos(); }
  std::size_t context_of(std::size_t cell) const { return cell % num_context_combos(); }

  // Looks up a factor by name; returns num_factors() when absent.
  std::size_t find_factor(const std::string& name) const;

 private:
  std::vector<Factor> content_;
  std::vector<Factor> context_;
};

// Value index per factor, content factors first.
struct Cell {
  std::vector<int> value_index;

  bool operator==(const Cell&) const = default;
};

enum class ColumnKind { intercept, main, interaction };

struct ColumnLabel {
  ColumnKind kind = ColumnKind::intercept;
  int factor_a = -1;
  int value_a = -1;
  int factor_b = -1;
  int value_b = -1;

  bool operator==(const ColumnLabel&) const = default;
};

struct DesignMatrix {
  Eigen::MatrixXd entries;  // rows = cells, cols = coefficients; 0/1
  std::vector<ColumnLabel> column_labels;
  int interaction_order = 1;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

struct Comparison {
  std::size_t context_combo = 0;
  std::size_t content_a = 0;
  std::size_t content_b = 0;

  bool operator==(const Comparison&) const = default;
};

// Lexicographic enumeration; the last factor varies fastest.
std::vector<Cell> enumerate_cells(const ExperimentSpec& spec);

DesignMatrix build_design_matrix(const ExperimentSpec& spec, int interaction_order);

// For every context combination, all unordered pairs (a < b) of content
// combinations.
std::vector<Comparison> enumerate_comparisons(const ExperimentSpec& spec);

// Human-readable names, e.g. "title=A|image=B".
std::string content_label(const ExperimentSpec& spec, std::size_t content_combo);
std::string context_label(const ExperimentSpec& spec, std::size_t context_combo);
std::string column_name(const ExperimentSpec& spec, const ColumnLabel& label);

// Builds the cell's value indices from the content/context combination indices.
Cell cell_at(const ExperimentSpec& spec, std::size_t cell);

// Inverse of cell_at.
std::size_t index_of(const ExperimentSpec& spec, const Cell& cell);

// Experiment spec file: JSON of the form
//   {"factors": [{"name": "title", "role": "content", "values": ["a", "b"]}, ...]}
ExperimentSpec parse_experiment_spec(const std::string& json_text);
ExperimentSpec load_experiment_spec(const std::string& path);
std::string experiment_spec_to_json(const ExperimentSpec& spec);

// Uniform factorial helper: `content` and `context` factors each with `levels` values.
ExperimentSpec uniform_spec(int content, int context, int levels);

}  // namespace hbab

#endif  // HBAB_DESIGN_HPP
