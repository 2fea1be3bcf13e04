#include "groundlex/param_table.hpp"

#include <sstream>

namespace groundlex {

ParamLayout::ParamLayout(const Lexicon& lexicon) {
  std::size_t offset = 0;
  for (const WordModel& entry : lexicon.entries) {
    const PosConfig& pos = lexicon.pos_of(entry);
    EntrySpan span;
    span.begin = offset;
    span.states = pos.state_count;
    for (const FeatureSpec& f : pos.features) span.bins.push_back(f.bins);

    const std::size_t states = static_cast<std::size_t>(pos.state_count);
    // initial
    row_offsets_.push_back(offset);
    row_sizes_.push_back(states);
    offset += states;
    // transition rows
    for (std::size_t i = 0; i < states; ++i) {
      row_offsets_.push_back(offset);
      row_sizes_.push_back(states);
      offset += states;
    }
    // output distributions, state-major then feature
    for (std::size_t i = 0; i < states; ++i) {
      for (int bins : span.bins) {
        row_offsets_.push_back(offset);
        row_sizes_.push_back(static_cast<std::size_t>(bins));
        offset += static_cast<std::size_t>(bins);
      }
    }
    entries_.push_back(std::move(span));
  }
  parameter_count_ = offset;
}

std::size_t ParamLayout::initial_index(int entry, int k) const {
  const EntrySpan& span = entries_[static_cast<std::size_t>(entry)];
  return span.begin + static_cast<std::size_t>(k);
}

std::size_t ParamLayout::transition_index(int entry, int i, int k) const {
  const EntrySpan& span = entries_[static_cast<std::size_t>(entry)];
  const std::size_t states = static_cast<std::size_t>(span.states);
  return span.begin + states + static_cast<std::size_t>(i) * states +
         static_cast<std::size_t>(k);
}

std::size_t ParamLayout::output_index(int entry, int i, int n, int h) const {
  const EntrySpan& span = entries_[static_cast<std::size_t>(entry)];
  const std::size_t states = static_cast<std::size_t>(span.states);
  std::size_t per_state = 0;
  for (int bins : span.bins) per_state += static_cast<std::size_t>(bins);
  std::size_t offset = span.begin + states + states * states +
                       static_cast<std::size_t>(i) * per_state;
  for (int f = 0; f < n; ++f) offset += static_cast<std::size_t>(span.bins[f]);
  return offset + static_cast<std::size_t>(h);
}

std::string ParamLayout::describe(std::size_t flat_index,
                                  const Lexicon& lexicon) const {
  for (std::size_t m = 0; m < entries_.size(); ++m) {
    const EntrySpan& span = entries_[m];
    const std::size_t states = static_cast<std::size_t>(span.states);
    std::size_t per_state = 0;
    for (int bins : span.bins) per_state += static_cast<std::size_t>(bins);
    const std::size_t total = states + states * states + states * per_state;
    if (flat_index < span.begin || flat_index >= span.begin + total) continue;

    std::ostringstream msg;
    msg << "entry " << m << " ('" << lexicon.entries[m].word << "') ";
    std::size_t local = flat_index - span.begin;
    if (local < states) {
      msg << "initial[" << local << "]";
      return msg.str();
    }
    local -= states;
    if (local < states * states) {
      msg << "transition[" << local / states << "][" << local % states << "]";
      return msg.str();
    }
    local -= states * states;
    const std::size_t state = local / per_state;
    local %= per_state;
    for (std::size_t n = 0; n < span.bins.size(); ++n) {
      const std::size_t z = static_cast<std::size_t>(span.bins[n]);
      if (local < z) {
        msg << "output[" << state << "][" << n << "][" << local << "]";
        return msg.str();
      }
      local -= z;
    }
  }
  return "parameter " + std::to_string(flat_index);
}

double ParamLayout::get(const Lexicon& lexicon, std::size_t flat_index) const {
  std::vector<double> flat = flatten_parameters(lexicon, *this);
  return flat[flat_index];
}

void ParamLayout::set(Lexicon& lexicon, std::size_t flat_index,
                      double value) const {
  std::vector<double> flat = flatten_parameters(lexicon, *this);
  flat[flat_index] = value;
  unflatten_parameters(lexicon, *this, flat);
}

void ParamTable::add_scaled(const ParamTable& other, double scale) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] += scale * other.values_[i];
  }
}

void ParamTable::divide_by_parameters(const Lexicon& lexicon) {
  std::vector<double> flat = flatten_parameters(lexicon, *layout_);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    values_[i] /= flat[i];
  }
}

std::vector<double> flatten_parameters(const Lexicon& lexicon,
                                       const ParamLayout& layout) {
  std::vector<double> flat;
  flat.reserve(layout.parameter_count());
  for (const WordModel& entry : lexicon.entries) {
    flat.insert(flat.end(), entry.initial.begin(), entry.initial.end());
    for (const auto& row : entry.transition) {
      flat.insert(flat.end(), row.begin(), row.end());
    }
    for (const auto& per_state : entry.output) {
      for (const auto& dist : per_state) {
        flat.insert(flat.end(), dist.begin(), dist.end());
      }
    }
  }
  if (flat.size() != layout.parameter_count()) {
    throw ConfigError("flatten_parameters: layout does not match lexicon");
  }
  return flat;
}

void unflatten_parameters(Lexicon& lexicon, const ParamLayout& layout,
                          const std::vector<double>& values) {
  if (values.size() != layout.parameter_count()) {
    throw ConfigError("unflatten_parameters: size mismatch");
  }
  std::size_t i = 0;
  for (WordModel& entry : lexicon.entries) {
    for (double& v : entry.initial) v = values[i++];
    for (auto& row : entry.transition) {
      for (double& v : row) v = values[i++];
    }
    for (auto& per_state : entry.output) {
      for (auto& dist : per_state) {
        for (double& v : dist) v = values[i++];
      }
    }
  }
}

}  // namespace groundlex
