#pragma once

#include <string>
#include <vector>

#include "groundlex/lexicon.hpp"

namespace groundlex {

// Flat view of every free parameter of a Lexicon, in a fixed order:
// per entry, the initial vector, then the transition rows, then the output
// distributions state-major. Used for expected counts, gradients, and
// finite-difference probes. Rows correspond to the sum-to-one distributions,
// which is the granularity at which damping constants are chosen.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const Lexicon& lexicon);

  std::size_t parameter_count() const { return parameter_count_; }
  std::size_t row_count() const { return row_offsets_.size(); }

  // Row r occupies [row_offset(r), row_offset(r) + row_size(r)).
  std::size_t row_offset(std::size_t row) const { return row_offsets_[row]; }
  std::size_t row_size(std::size_t row) const { return row_sizes_[row]; }

  std::string describe(std::size_t flat_index, const Lexicon& lexicon) const;

  double get(const Lexicon& lexicon, std::size_t flat_index) const;
  void set(Lexicon& lexicon, std::size_t flat_index, double value) const;

 private:
  friend class ParamTable;
  struct EntrySpan {
    std::size_t begin = 0;  // flat offset of the entry's first parameter
    int states = 0;
    std::vector<int> bins;  // per feature
  };
  std::vector<EntrySpan> entries_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> row_sizes_;
  std::size_t parameter_count_ = 0;

  // flat index helpers
  std::size_t initial_index(int entry, int k) const;
  std::size_t transition_index(int entry, int i, int k) const;
  std::size_t output_index(int entry, int i, int n, int h) const;

  friend struct ParamRef;
};

// Dense value table over a ParamLayout (counts or gradient components).
class ParamTable {
 public:
  ParamTable() = default;
  explicit ParamTable(const ParamLayout& layout)
      : layout_(&layout), values_(layout.parameter_count(), 0.0) {}

  const ParamLayout& layout() const { return *layout_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& initial(int entry, int k) {
    return values_[layout_->initial_index(entry, k)];
  }
  double& transition(int entry, int i, int k) {
    return values_[layout_->transition_index(entry, i, k)];
  }
  double& output(int entry, int i, int n, int h) {
    return values_[layout_->output_index(entry, i, n, h)];
  }
  double initial(int entry, int k) const {
    return values_[layout_->initial_index(entry, k)];
  }
  double transition(int entry, int i, int k) const {
    return values_[layout_->transition_index(entry, i, k)];
  }
  double output(int entry, int i, int n, int h) const {
    return values_[layout_->output_index(entry, i, n, h)];
  }

  void add_scaled(const ParamTable& other, double scale);
  void fill(double value) { std::fill(values_.begin(), values_.end(), value); }

  // Elementwise division by the lexicon's current parameter values; turns
  // discrimination-weighted counts into the gradient w.r.t. raw parameters.
  void divide_by_parameters(const Lexicon& lexicon);

  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }

 private:
  const ParamLayout* layout_ = nullptr;
  std::vector<double> values_;
};

// Copies every distribution of `lexicon` into a flat vector (same order as
// ParamLayout) or back. The inverse direction does not renormalize.
std::vector<double> flatten_parameters(const Lexicon& lexicon,
                                       const ParamLayout& layout);
void unflatten_parameters(Lexicon& lexicon, const ParamLayout& layout,
                          const std::vector<double>& values);

}  // namespace groundlex
