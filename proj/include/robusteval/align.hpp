#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "robusteval/error.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

/// Sample ids shared by every input, sorted, plus the position of each shared
/// id inside each input.
struct Alignment {
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> positions;  // positions[input][k]
  std::vector<std::string> dropped;                 // ids missing from at least one input, sorted
};

inline Alignment align(std::span<const std::vector<std::string>> inputs) {
  require(!inputs.empty(), Errc::empty_input, "nothing to align");
  std::vector<std::map<std::string, std::size_t>> index(inputs.size());
  std::set<std::string> all;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    detail::check_unique_ids(inputs[i], "alignment input " + std::to_string(i));
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      index[i].emplace(inputs[i][k], k);
      all.insert(inputs[i][k]);
    }
  }
  Alignment out;
  out.positions.resize(inputs.size());
  for (const auto& id : all) {
    const bool shared = std::all_of(index.begin(), index.end(), [&](const auto& m) { return m.contains(id); });
    if (!shared) {
      out.dropped.push_back(id);
      continue;
    }
    out.ids.push_back(id);
    for (std::size_t i = 0; i < inputs.size(); ++i) out.positions[i].push_back(index[i].at(id));
  }
  require(!out.ids.empty(), Errc::empty_intersection, "inputs share no sample_id");
  return out;
}

inline Alignment align(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::vector<std::vector<std::string>> both{a, b};
  return align(both);
}

template <class Range, class Proj>
std::vector<std::string> ids_of(const Range& items, Proj proj) {
  std::vector<std::string> ids;
  for (const auto& it : items) ids.push_back(proj(it));
  return ids;
}

}  // namespace robusteval
