#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

inline constexpr double kLinfLoadTolerance = 1e-6;

struct SamplePair {
  std::string sample_id;
  std::size_t label = 0;
  TensorBlock clean;
  TensorBlock perturbed;
  // Clean input classified correctly and perturbed input misclassified by the
  // designated model.
  bool success = false;
};

struct PerturbationMeta {
  std::string generator;
  std::optional<Norm> norm;
  std::optional<double> epsilon;
  std::string model = "f";
};

class SamplePairSet {
 public:
  SamplePairSet() = default;

  SamplePairSet(PerturbationMeta meta, std::vector<SamplePair> pairs)
      : meta_(std::move(meta)), pairs_(std::move(pairs)) {
    std::vector<std::string> ids;
    for (const auto& p : pairs_) {
      require(p.clean.shape() == p.perturbed.shape(), Errc::shape_mismatch,
              "pair '" + p.sample_id + "': clean and perturbed shapes differ");
      ids.push_back(p.sample_id);
    }
    detail::check_unique_ids(ids, "sample pair set");
    if (meta_.norm == Norm::linf && meta_.epsilon) {
      for (const auto& p : pairs_) {
        const double d = lp_distance<float>(p.perturbed.data(), p.clean.data(), Norm::linf);
        require(d <= *meta_.epsilon + kLinfLoadTolerance, Errc::budget_violation,
                "pair '" + p.sample_id + "': l-inf distance " + std::to_string(d) + " exceeds budget");
      }
    }
  }

  const PerturbationMeta& meta() const noexcept { return meta_; }
  const std::vector<SamplePair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }

  /// Successful pairs ordered by sample_id.
  std::vector<const SamplePair*> successful() const {
    std::vector<const SamplePair*> out;
    for (const auto& p : pairs_) {
      if (p.success) out.push_back(&p);
    }
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->sample_id < b->sample_id; });
    return out;
  }

  /// All pairs ordered by sample_id.
  std::vector<const SamplePair*> ordered() const {
    std::vector<const SamplePair*> out;
    for (const auto& p : pairs_) out.push_back(&p);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->sample_id < b->sample_id; });
    return out;
  }

 private:
  PerturbationMeta meta_;
  std::vector<SamplePair> pairs_;
};

// ---------------------------------------------------------------------------
// On disk: JSON manifest plus two stacked .rtt files ([S, ...sample shape]).
// ---------------------------------------------------------------------------

inline constexpr const char* kPairsFormat = "robusteval-pairs";

inline void write_pairs(const std::filesystem::path& manifest, const SamplePairSet& set) {
  require(set.size() > 0, Errc::empty_input, "refusing to write an empty pair set");
  const auto dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  std::vector<TensorBlock> clean, perturbed;
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  std::vector<bool> success;
  for (const auto& p : set.pairs()) {
    clean.push_back(p.clean);
    perturbed.push_back(p.perturbed);
    ids.push_back(p.sample_id);
    labels.push_back(p.label);
    success.push_back(p.success);
  }
  write_rtt(dir / (stem + ".clean.rtt"), stack(clean), ids);
  write_rtt(dir / (stem + ".perturbed.rtt"), stack(perturbed), ids);

  nlohmann::json doc;
  doc["format"] = kPairsFormat;
  doc["version"] = 1;
  doc["generator"] = set.meta().generator;
  doc["model"] = set.meta().model;
  doc["norm"] = set.meta().norm ? nlohmann::json(to_string(*set.meta().norm)) : nlohmann::json(nullptr);
  doc["epsilon"] = set.meta().epsilon ? nlohmann::json(*set.meta().epsilon) : nlohmann::json(nullptr);
  doc["clean"] = stem + ".clean.rtt";
  doc["perturbed"] = stem + ".perturbed.rtt";
  doc["sample_ids"] = ids;
  doc["labels"] = labels;
  doc["success"] = success;
  detail::write_file(manifest, doc.dump(2) + "\n");
}

inline SamplePairSet load_pairs(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": invalid pair manifest: " + e.what());
  }
  try {
    require(doc.value("format", "") == kPairsFormat, Errc::bad_header,
            manifest.string() + ": not a robusteval pair manifest");
    PerturbationMeta meta;
    meta.generator = doc.at("generator").get<std::string>();
    meta.model = doc.value("model", std::string("f"));
    if (!doc.at("norm").is_null()) meta.norm = parse_norm(doc["norm"].get<std::string>());
    if (!doc.at("epsilon").is_null()) meta.epsilon = doc["epsilon"].get<double>();

    const auto ids = doc.at("sample_ids").get<std::vector<std::string>>();
    const auto labels = doc.at("labels").get<std::vector<std::size_t>>();
    const auto success = doc.at("success").get<std::vector<bool>>();
    auto clean = read_rtt(manifest.parent_path() / doc.at("clean").get<std::string>());
    auto perturbed = read_rtt(manifest.parent_path() / doc.at("perturbed").get<std::string>());
    require(clean.block.shape() == perturbed.block.shape(), Errc::shape_mismatch,
            manifest.string() + ": clean and perturbed tensors differ in shape");
    const auto cs = unstack(clean.block);
    const auto ps = unstack(perturbed.block);
    require(cs.size() == ids.size() && labels.size() == ids.size() && success.size() == ids.size(),
            Errc::shape_mismatch, manifest.string() + ": per-pair arrays disagree in length");
    require((clean.sample_ids.empty() || clean.sample_ids == ids) &&
                (perturbed.sample_ids.empty() || perturbed.sample_ids == ids),
            Errc::shape_mismatch, manifest.string() + ": tensor sample ids disagree with manifest");
    std::vector<SamplePair> pairs;
    for (std::size_t i = 0; i < ids.size(); ++i) pairs.push_back({ids[i], labels[i], cs[i], ps[i], success[i]});
    return SamplePairSet(std::move(meta), std::move(pairs));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, manifest.string() + ": malformed pair manifest: " + e.what());
  }
}

}  // namespace robusteval
