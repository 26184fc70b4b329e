#pragma once

#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

inline constexpr int kReportSchemaVersion = 1;

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1, Errc::io,
          "sha256 digest failed");
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return "sha256:" + s.str();
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(detail::read_file(path)); }

/// Consolidated metric report. Each metric entry carries the digests of the
/// inputs it consumed; a failing metric records its error and leaves the
/// others untouched.
class EvaluationReport {
 public:
  explicit EvaluationReport(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  /// Registers an input file under a label and returns its digest. Labels of
  /// composite inputs (trace manifests, pair sets) should be registered once
  /// per file that was read.
  std::string add_input(const std::string& label, const std::filesystem::path& path) {
    auto d = file_digest(path);
    inputs_[label] = {{"path", path.generic_string()}, {"digest", d}};
    return d;
  }

  void add_input_digest(const std::string& label, const std::string& path, const std::string& digest) {
    inputs_[label] = {{"path", path}, {"digest", digest}};
  }

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  nlohmann::json& config() { return config_; }

  void set_metric(const std::string& name, nlohmann::json value, const std::vector<std::string>& input_labels) {
    metrics_[name] = {{"value", std::move(value)}, {"inputs", digests_for(input_labels)}};
  }

  void set_error(const std::string& name, const std::string& message, const std::vector<std::string>& input_labels) {
    metrics_[name] = {{"error", message}, {"inputs", digests_for(input_labels)}};
  }

  /// Evaluates fn() and stores its result as metric `name`; exceptions become
  /// a per-metric error entry.
  template <class Fn>
  bool record(const std::string& name, const std::vector<std::string>& input_labels, Fn&& fn) {
    try {
      set_metric(name, fn(), input_labels);
      return true;
    } catch (const std::exception& e) {
      set_error(name, e.what(), input_labels);
      return false;
    }
  }

  const nlohmann::json& metrics() const noexcept { return metrics_; }

  nlohmann::json to_json(bool with_timestamp = true) const {
    nlohmann::json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["tool"] = "robusteval";
    doc["subcommand"] = subcommand_;
    doc["config"] = config_;
    doc["inputs"] = inputs_.empty() ? nlohmann::json::object() : inputs_;
    doc["metrics"] = metrics_.empty() ? nlohmann::json::object() : metrics_;
    if (with_timestamp) doc["generated_at"] = timestamp();
    return doc;
  }

  void write(const std::filesystem::path& path, bool with_timestamp = true) const {
    detail::write_file(path, to_json(with_timestamp).dump(2) + "\n");
  }

 private:
  nlohmann::json digests_for(const std::vector<std::string>& labels) const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& l : labels) {
      require(inputs_.contains(l), Errc::invalid_argument, "metric references unregistered input '" + l + "'");
      out[l] = inputs_.at(l).at("digest");
    }
    return out;
  }

  static std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
  }

  std::string subcommand_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json metrics_ = nlohmann::json::object();
};

/// Report JSON with the volatile timestamp removed; the basis of the
/// determinism contract.
inline std::string stable_report_text(nlohmann::json doc) {
  doc.erase("generated_at");
  return doc.dump(2);
}

}  // namespace robusteval
