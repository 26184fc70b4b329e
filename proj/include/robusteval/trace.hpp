#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

/// A named layer whose outputs are grouped into `neurons` groups of
/// `elements_per_neuron` values each (one group per output channel for
/// feature maps, one element per unit for dense layers).
struct LayerGeometry {
  std::string name;
  std::size_t neurons = 0;
  std::size_t elements_per_neuron = 1;

  bool operator==(const LayerGeometry&) const = default;
};

/// Per-sample, per-layer, per-neuron outputs. Layer l is stored as a flat
/// [sample][neuron][element] array.
class ActivationTrace {
 public:
  ActivationTrace() = default;

  ActivationTrace(std::vector<LayerGeometry> layers, std::vector<std::string> sample_ids,
                  std::vector<std::vector<float>> values)
      : layers_(std::move(layers)), sample_ids_(std::move(sample_ids)), values_(std::move(values)) {
    require(values_.size() == layers_.size(), Errc::geometry_mismatch, "trace has value arrays for " +
                                                                           std::to_string(values_.size()) +
                                                                           " layers, geometry lists " +
                                                                           std::to_string(layers_.size()));
    detail::check_unique_ids(sample_ids_, "activation trace");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& g = layers_[l];
      require(g.neurons > 0 && g.elements_per_neuron > 0, Errc::geometry_mismatch,
              "layer '" + g.name + "' must have positive neuron and element counts");
      require(values_[l].size() == sample_ids_.size() * g.neurons * g.elements_per_neuron,
              Errc::geometry_mismatch, "layer '" + g.name + "' value count does not match geometry");
      require(all_finite<float>(values_[l]), Errc::non_finite, "layer '" + g.name + "' has non-finite values");
    }
  }

  const std::vector<LayerGeometry>& layers() const noexcept { return layers_; }
  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
  std::size_t sample_count() const noexcept { return sample_ids_.size(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return sample_ids_.empty(); }

  std::size_t total_neurons() const noexcept {
    std::size_t n = 0;
    for (const auto& g : layers_) n += g.neurons;
    return n;
  }

  std::span<const float> layer_values(std::size_t layer) const { return values_.at(layer); }

  std::span<const float> neuron_elements(std::size_t layer, std::size_t sample, std::size_t neuron) const {
    const auto& g = layers_[layer];
    const std::size_t e = g.elements_per_neuron;
    return std::span<const float>(values_[layer]).subspan((sample * g.neurons + neuron) * e, e);
  }

  /// phi(x, n): the neuron's scalar output, the mean over its elements.
  double neuron_value(std::size_t layer, std::size_t sample, std::size_t neuron) const {
    const auto el = neuron_elements(layer, sample, neuron);
    if (el.size() == 1) return el[0];
    double s = 0.0;
    for (float v : el) s += v;
    return s / static_cast<double>(el.size());
  }

  bool same_geometry(const ActivationTrace& other) const noexcept { return layers_ == other.layers_; }

  /// Samples at the given indices, in the given order.
  ActivationTrace select(std::span<const std::size_t> indices) const {
    std::vector<std::string> ids;
    std::vector<std::vector<float>> vals(layers_.size());
    for (std::size_t idx : indices) {
      require(idx < sample_count(), Errc::invalid_argument, "trace sample index out of range");
      ids.push_back(sample_ids_[idx]);
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::size_t stride = layers_[l].neurons * layers_[l].elements_per_neuron;
        auto first = values_[l].begin() + static_cast<std::ptrdiff_t>(idx * stride);
        vals[l].insert(vals[l].end(), first, first + static_cast<std::ptrdiff_t>(stride));
      }
    }
    return ActivationTrace(layers_, std::move(ids), std::move(vals));
  }

  /// Concatenation of two traces with identical geometry and disjoint ids.
  ActivationTrace append(const ActivationTrace& other) const {
    require(same_geometry(other), Errc::geometry_mismatch, "cannot append traces with differing geometry");
    auto ids = sample_ids_;
    ids.insert(ids.end(), other.sample_ids_.begin(), other.sample_ids_.end());
    auto vals = values_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      vals[l].insert(vals[l].end(), other.values_[l].begin(), other.values_[l].end());
    }
    return ActivationTrace(layers_, std::move(ids), std::move(vals));
  }

  bool operator==(const ActivationTrace&) const = default;

 private:
  std::vector<LayerGeometry> layers_;
  std::vector<std::string> sample_ids_;
  std::vector<std::vector<float>> values_;
};

// ---------------------------------------------------------------------------
// Manifest + one .rtt per layer. Layer file i holds shape [S, N_i, E_i] and the
// sample ids in its header; files live next to the manifest.
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceFormat = "robusteval-trace";

inline void write_trace(const std::filesystem::path& manifest, const ActivationTrace& trace) {
  require(!trace.empty(), Errc::empty_input, "refusing to write an empty trace");
  const auto dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  nlohmann::json doc;
  doc["format"] = kTraceFormat;
  doc["version"] = 1;
  doc["sample_ids"] = trace.sample_ids();
  doc["neuron_grouping"] = "channel";
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < trace.layer_count(); ++l) {
    const auto& g = trace.layers()[l];
    const std::string file = stem + ".layer" + std::to_string(l) + ".rtt";
    const auto vals = trace.layer_values(l);
    write_rtt(dir / file,
              TensorBlock({trace.sample_count(), g.neurons, g.elements_per_neuron},
                          std::vector<float>(vals.begin(), vals.end())),
              trace.sample_ids());
    layers.push_back({{"name", g.name},
                      {"file", file},
                      {"neurons", g.neurons},
                      {"elements_per_neuron", g.elements_per_neuron}});
  }
  detail::write_file(manifest, doc.dump(2) + "\n");
}

inline ActivationTrace load_trace(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": invalid trace manifest: " + e.what());
  }
  std::vector<LayerGeometry> layers;
  std::vector<std::string> ids;
  std::vector<std::vector<float>> values;
  try {
    require(doc.value("format", "") == kTraceFormat, Errc::bad_header,
            manifest.string() + ": not a robusteval trace manifest");
    ids = doc.at("sample_ids").get<std::vector<std::string>>();
    for (const auto& l : doc.at("layers")) {
      LayerGeometry g{l.at("name").get<std::string>(), l.at("neurons").get<std::size_t>(),
                      l.value("elements_per_neuron", std::size_t{1})};
      auto rtt = read_rtt(manifest.parent_path() / l.at("file").get<std::string>());
      require(rtt.block.shape() == Shape{ids.size(), g.neurons, g.elements_per_neuron}, Errc::geometry_mismatch,
              manifest.string() + ": layer '" + g.name + "' tensor shape " + shape_string(rtt.block.shape()) +
                  " disagrees with manifest");
      require(rtt.sample_ids.empty() || rtt.sample_ids == ids, Errc::geometry_mismatch,
              manifest.string() + ": layer '" + g.name + "' sample ids disagree with manifest");
      layers.push_back(std::move(g));
      values.push_back(rtt.block.values());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": malformed trace manifest: " + e.what());
  }
  return ActivationTrace(std::move(layers), std::move(ids), std::move(values));
}

}  // namespace robusteval
