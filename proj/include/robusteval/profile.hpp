#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/trace.hpp"

namespace robusteval {

inline constexpr std::size_t kDefaultSections = 100;

struct NeuronBounds {
  double low = 0.0;
  double high = 0.0;

  bool operator==(const NeuronBounds&) const = default;
};

struct ProfileLayer {
  std::string name;
  std::size_t neurons = 0;

  bool operator==(const ProfileLayer&) const = default;
};

/// Per-neuron [low, high] activation range learned from a reference trace.
/// Bounds are stored layer-major, neuron-minor.
class NeuronProfile {
 public:
  NeuronProfile() = default;

  NeuronProfile(std::vector<ProfileLayer> layers, std::vector<NeuronBounds> bounds, std::size_t k)
      : layers_(std::move(layers)), bounds_(std::move(bounds)), k_(k) {
    require(k_ >= 1, Errc::invalid_argument, "section count k must be >= 1");
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.neurons;
    require(n == bounds_.size(), Errc::geometry_mismatch, "profile bounds do not match layer neuron counts");
    for (const auto& b : bounds_) {
      require(std::isfinite(b.low) && std::isfinite(b.high), Errc::non_finite, "profile bounds must be finite");
      require(b.low <= b.high, Errc::invalid_argument, "profile bound has low > high");
    }
  }

  const std::vector<ProfileLayer>& layers() const noexcept { return layers_; }
  const std::vector<NeuronBounds>& bounds() const noexcept { return bounds_; }
  std::size_t neuron_count() const noexcept { return bounds_.size(); }
  std::size_t k() const noexcept { return k_; }

  NeuronProfile with_sections(std::size_t k) const { return NeuronProfile(layers_, bounds_, k); }

  bool matches(const ActivationTrace& trace) const {
    if (trace.layer_count() != layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (trace.layers()[l].name != layers_[l].name || trace.layers()[l].neurons != layers_[l].neurons) {
        return false;
      }
    }
    return true;
  }

  bool operator==(const NeuronProfile&) const = default;

 private:
  std::vector<ProfileLayer> layers_;
  std::vector<NeuronBounds> bounds_;
  std::size_t k_ = kDefaultSections;
};

inline NeuronProfile build_neuron_profile(const ActivationTrace& reference, std::size_t k = kDefaultSections) {
  require(!reference.empty(), Errc::empty_input, "reference trace has no samples");
  require(k >= 1, Errc::invalid_argument, "section count k must be >= 1");
  std::vector<ProfileLayer> layers;
  std::vector<NeuronBounds> bounds;
  for (std::size_t l = 0; l < reference.layer_count(); ++l) {
    const auto& g = reference.layers()[l];
    layers.push_back({g.name, g.neurons});
    for (std::size_t n = 0; n < g.neurons; ++n) {
      NeuronBounds b{reference.neuron_value(l, 0, n), reference.neuron_value(l, 0, n)};
      for (std::size_t s = 1; s < reference.sample_count(); ++s) {
        const double v = reference.neuron_value(l, s, n);
        b.low = std::min(b.low, v);
        b.high = std::max(b.high, v);
      }
      bounds.push_back(b);
    }
  }
  return NeuronProfile(std::move(layers), std::move(bounds), k);
}

inline constexpr const char* kProfileFormat = "robusteval-profile";

inline nlohmann::json profile_to_json(const NeuronProfile& p) {
  nlohmann::json doc;
  doc["format"] = kProfileFormat;
  doc["version"] = 1;
  doc["k"] = p.k();
  auto& layers = doc["layers"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& l : p.layers()) {
    std::vector<double> low, high;
    for (std::size_t n = 0; n < l.neurons; ++n) {
      low.push_back(p.bounds()[offset + n].low);
      high.push_back(p.bounds()[offset + n].high);
    }
    offset += l.neurons;
    layers.push_back({{"name", l.name}, {"neurons", l.neurons}, {"low", low}, {"high", high}});
  }
  return doc;
}

inline NeuronProfile profile_from_json(const nlohmann::json& doc) {
  try {
    require(doc.value("format", "") == kProfileFormat, Errc::bad_header, "not a robusteval profile document");
    std::vector<ProfileLayer> layers;
    std::vector<NeuronBounds> bounds;
    for (const auto& l : doc.at("layers")) {
      ProfileLayer pl{l.at("name").get<std::string>(), l.at("neurons").get<std::size_t>()};
      const auto low = l.at("low").get<std::vector<double>>();
      const auto high = l.at("high").get<std::vector<double>>();
      require(low.size() == pl.neurons && high.size() == pl.neurons, Errc::geometry_mismatch,
              "profile layer '" + pl.name + "' bound arrays do not match neuron count");
      for (std::size_t n = 0; n < pl.neurons; ++n) bounds.push_back({low[n], high[n]});
      layers.push_back(std::move(pl));
    }
    return NeuronProfile(std::move(layers), std::move(bounds), doc.at("k").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, std::string("malformed profile document: ") + e.what());
  }
}

inline void write_profile(const std::filesystem::path& path, const NeuronProfile& p) {
  detail::write_file(path, profile_to_json(p).dump(2) + "\n");
}

inline NeuronProfile load_profile(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, path.string() + ": invalid profile JSON: " + e.what());
  }
  return profile_from_json(doc);
}

}  // namespace robusteval
