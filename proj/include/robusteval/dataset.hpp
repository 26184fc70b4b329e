#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

/// Labeled inputs with stable sample ids.
struct LabeledSet {
  std::vector<std::string> ids;
  std::vector<TensorBlock> inputs;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return inputs.size(); }

  void validate() const {
    require(!inputs.empty(), Errc::empty_input, "dataset is empty");
    require(ids.size() == inputs.size() && labels.size() == inputs.size(), Errc::shape_mismatch,
            "dataset ids, inputs and labels disagree in length");
    detail::check_unique_ids(ids, "dataset");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      require(inputs[i].shape() == inputs[0].shape(), Errc::shape_mismatch, "dataset inputs differ in shape");
      require(labels[i] < classes, Errc::invalid_argument, "label of '" + ids[i] + "' is >= class count");
    }
  }
};

inline std::string sample_name(std::size_t i) {
  std::ostringstream s;
  s << "s" << std::setw(5) << std::setfill('0') << i;
  return s.str();
}

/// Two anisotropic Gaussian classes in [0,1]^2. Class c has mean
/// center + (2c-1)*offset per axis. The default separates the classes with a
/// narrow, low-variance gap on axis 0 and a wide, noisy gap on axis 1, so an
/// accurate classifier need not be a robust one.
struct TwoGaussianSpec {
  std::size_t samples = 400;
  std::array<double, 2> center{0.5, 0.5};
  std::array<double, 2> offset{0.03, 0.18};
  std::array<double, 2> stddev{0.008, 0.1};
  std::uint64_t seed = 0;
};

inline LabeledSet two_gaussian(const TwoGaussianSpec& spec) {
  require(spec.samples > 0, Errc::invalid_argument, "two_gaussian needs at least one sample");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledSet set;
  set.classes = 2;
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % 2;
    const double sign = label == 1 ? 1.0 : -1.0;
    std::vector<float> x(2);
    for (std::size_t a = 0; a < 2; ++a) {
      const double v = spec.center[a] + sign * spec.offset[a] + spec.stddev[a] * normal(rng);
      x[a] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    set.ids.push_back(sample_name(i));
    set.inputs.emplace_back(Shape{2}, std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

inline constexpr const char* kDatasetFormat = "robusteval-dataset";

inline void write_dataset(const std::filesystem::path& manifest, const LabeledSet& set) {
  set.validate();
  const std::string file = manifest.stem().string() + ".inputs.rtt";
  write_rtt(manifest.parent_path() / file, stack(set.inputs), set.ids);
  nlohmann::json doc{{"format", kDatasetFormat}, {"version", 1},       {"inputs", file},
                     {"classes", set.classes},   {"labels", set.labels}, {"sample_ids", set.ids}};
  detail::write_file(manifest, doc.dump(2) + "\n");
}

inline LabeledSet load_dataset(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": invalid dataset manifest: " + e.what());
  }
  LabeledSet set;
  try {
    require(doc.value("format", "") == kDatasetFormat, Errc::bad_header,
            manifest.string() + ": not a robusteval dataset manifest");
    auto rtt = read_rtt(manifest.parent_path() / doc.at("inputs").get<std::string>());
    set.inputs = unstack(rtt.block);
    set.ids = doc.at("sample_ids").get<std::vector<std::string>>();
    set.labels = doc.at("labels").get<std::vector<std::size_t>>();
    set.classes = doc.at("classes").get<std::size_t>();
    require(rtt.sample_ids.empty() || rtt.sample_ids == set.ids, Errc::shape_mismatch,
            manifest.string() + ": tensor sample ids disagree with manifest");
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": malformed dataset manifest: " + e.what());
  }
  set.validate();
  return set;
}

}  // namespace robusteval
