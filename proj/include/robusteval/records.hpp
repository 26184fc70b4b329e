#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

inline constexpr double kProbSumTolerance = 1e-5;

/// Index of the largest probability; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

// Input-condition tag grammar:
//   clean
//   attack:<method>:<norm>:<epsilon>      white-box perturbed set
//   blackbox:<method>:<norm>:<epsilon>    externally generated perturbed set
//   corruption:<kind>:<severity>
struct Condition {
  enum class Kind { clean, attack, blackbox, corruption };

  Kind kind = Kind::clean;
  std::string method;   // attack method or corruption kind
  std::string norm;     // "1" | "2" | "inf" for attacks
  std::string epsilon;  // textual, as it appears in the tag
  int severity = 0;

  static Condition parse(const std::string& tag) {
    std::vector<std::string> parts;
    std::stringstream ss(tag);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    Condition c;
    if (parts.size() == 1 && parts[0] == "clean") return c;
    if (parts.size() == 4 && (parts[0] == "attack" || parts[0] == "blackbox")) {
      c.kind = parts[0] == "attack" ? Kind::attack : Kind::blackbox;
      c.method = parts[1];
      c.norm = to_string(parse_norm(parts[2]));
      c.epsilon = parts[3];
      return c;
    }
    if (parts.size() == 3 && parts[0] == "corruption") {
      c.kind = Kind::corruption;
      c.method = parts[1];
      try {
        c.severity = std::stoi(parts[2]);
      } catch (const std::exception&) {
        fail(Errc::invalid_argument, "condition '" + tag + "' has a non-integer severity");
      }
      require(c.severity >= 1, Errc::invalid_argument, "condition '" + tag + "' severity must be >= 1");
      return c;
    }
    fail(Errc::invalid_argument, "unrecognized condition tag '" + tag + "'");
  }

  std::string str() const {
    switch (kind) {
      case Kind::clean: return "clean";
      case Kind::attack: return "attack:" + method + ":" + norm + ":" + epsilon;
      case Kind::blackbox: return "blackbox:" + method + ":" + norm + ":" + epsilon;
      case Kind::corruption: return "corruption:" + method + ":" + std::to_string(severity);
    }
    return "clean";
  }
};

/// Shortest round-trip text for a double, as JSON would print it.
inline std::string number_text(double v) { return nlohmann::json(v).dump(); }

struct PredictionRecord {
  std::string sample_id;
  std::size_t label = 0;
  std::vector<double> probs;
  std::string condition = "clean";
  std::string model = "f";

  std::size_t predicted() const { return argmax(probs); }
  bool correct() const { return predicted() == label; }
};

inline void validate(const PredictionRecord& r) {
  const std::string who = "record '" + r.sample_id + "' (" + r.condition + ")";
  require(!r.probs.empty(), Errc::invalid_argument, who + ": empty probability vector");
  require(r.label < r.probs.size(), Errc::invalid_argument, who + ": label out of range");
  require(all_finite<double>(r.probs), Errc::non_finite, who + ": non-finite probability");
  double sum = 0.0;
  for (double p : r.probs) {
    require(p >= 0.0 && p <= 1.0, Errc::invalid_argument, who + ": probability outside [0,1]");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= kProbSumTolerance, Errc::invalid_argument,
          who + ": probabilities sum to " + number_text(sum));
  Condition::parse(r.condition);
}

inline nlohmann::json to_json(const PredictionRecord& r) {
  return {{"sample_id", r.sample_id}, {"y", r.label}, {"probs", r.probs}, {"condition", r.condition},
          {"model", r.model}};
}

inline PredictionRecord record_from_json(const nlohmann::json& j) {
  PredictionRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.label = j.at("y").get<std::size_t>();
    r.probs = j.at("probs").get<std::vector<double>>();
    r.condition = j.value("condition", std::string("clean"));
    r.model = j.value("model", std::string("f"));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, std::string("malformed prediction record: ") + e.what());
  }
  validate(r);
  return r;
}

namespace detail {

template <class F>
void for_each_jsonl(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::bad_header, path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    try {
      f(j);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace detail

inline std::vector<PredictionRecord> load_records(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(record_from_json(j)); });
  return out;
}

inline void write_records(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::string text;
  for (const auto& r : records) {
    validate(r);
    text += to_json(r).dump() + "\n";
  }
  detail::write_file(path, text);
}

/// Subset of records matching a model and condition tag, in file order.
inline std::vector<PredictionRecord> select_records(std::span<const PredictionRecord> records,
                                                    const std::string& model, const std::string& condition) {
  std::vector<PredictionRecord> out;
  for (const auto& r : records) {
    if (r.model == model && r.condition == condition) out.push_back(r);
  }
  return out;
}

/// Predicted labels of one sample over an ordered noise sequence.
struct FrameSequence {
  std::string sample_id;
  std::string corruption;
  std::string model = "f";
  std::vector<std::size_t> labels;
};

inline std::vector<FrameSequence> load_sequences(const std::filesystem::path& path) {
  std::vector<FrameSequence> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j) {
    FrameSequence s;
    try {
      s.sample_id = j.at("sample_id").get<std::string>();
      s.corruption = j.at("corruption").get<std::string>();
      s.model = j.value("model", std::string("f"));
      s.labels = j.at("labels").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::bad_header, std::string("malformed frame sequence: ") + e.what());
    }
    out.push_back(std::move(s));
  });
  return out;
}

inline void write_sequences(const std::filesystem::path& path, std::span<const FrameSequence> seqs) {
  std::string text;
  for (const auto& s : seqs) {
    nlohmann::json j{{"sample_id", s.sample_id}, {"corruption", s.corruption}, {"model", s.model},
                     {"labels", s.labels}};
    text += j.dump() + "\n";
  }
  detail::write_file(path, text);
}

}  // namespace robusteval
