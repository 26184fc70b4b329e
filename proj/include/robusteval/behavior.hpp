#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robusteval/align.hpp"
#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/records.hpp"

namespace robusteval {

inline double clean_accuracy(std::span<const PredictionRecord> records) {
  require(!records.empty(), Errc::empty_input, "clean accuracy needs at least one record");
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.correct() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

struct AdversarialAccuracy {
  double robust_acc = 0.0;     // table convention: perturbed inputs still classified correctly
  double misclass_rate = 0.0;  // indicator as written in the AAW formula
  std::size_t n = 0;
};

/// Serves both white-box (AAW) and black-box (AAB) perturbed sets.
inline AdversarialAccuracy adversarial_accuracy(std::span<const PredictionRecord> records) {
  require(!records.empty(), Errc::empty_input, "adversarial accuracy needs at least one record");
  AdversarialAccuracy a;
  a.n = records.size();
  a.robust_acc = clean_accuracy(records);
  a.misclass_rate = 1.0 - a.robust_acc;
  return a;
}

struct ConfidenceStats {
  double acac = 0.0;
  double actc = 0.0;
  double nte = 0.0;
  std::size_t m = 0;
};

/// ACAC / ACTC / NTE over samples that are correct when clean and wrong when
/// perturbed. The adversarial class is the perturbed argmax.
inline ConfidenceStats adv_confidence_stats(std::span<const PredictionRecord> clean,
                                            std::span<const PredictionRecord> perturbed) {
  auto id = [](const PredictionRecord& r) { return r.sample_id; };
  const auto al = align(ids_of(clean, id), ids_of(perturbed, id));
  CompensatedSum acac, actc, nte;
  ConfidenceStats s;
  for (std::size_t k = 0; k < al.ids.size(); ++k) {
    const auto& c = clean[al.positions[0][k]];
    const auto& p = perturbed[al.positions[1][k]];
    require(c.label == p.label, Errc::invalid_argument, "label disagreement for sample '" + c.sample_id + "'");
    if (!c.correct() || p.correct()) continue;
    const std::size_t adv = p.predicted();
    double runner_up = 0.0;
    for (std::size_t j = 0; j < p.probs.size(); ++j) {
      if (j != adv) runner_up = std::max(runner_up, p.probs[j]);
    }
    acac.add(p.probs[adv]);
    actc.add(p.probs[p.label]);
    nte.add(p.probs[adv] - runner_up);
    ++s.m;
  }
  require(s.m > 0, Errc::no_successful_samples, "no successful adversarial examples");
  const double m = static_cast<double>(s.m);
  s.acac = acac.value() / m;
  s.actc = actc.value() / m;
  s.nte = nte.value() / m;
  return s;
}

struct CorruptionError {
  std::vector<double> errors;  // E_{s,c}, s = 1..t
  double mce = 0.0;
  double rmce = 0.0;
};

/// cells[corruption][severity] -> records. Every severity 1..t must be present
/// and non-empty. No baseline-model normalization is applied.
inline std::map<std::string, CorruptionError> corruption_errors(
    const std::map<std::string, std::map<int, std::vector<PredictionRecord>>>& cells, double clean_error,
    int severities = 5) {
  require(severities >= 1, Errc::invalid_argument, "severity count must be >= 1");
  require(!cells.empty(), Errc::empty_input, "no corruption records");
  std::map<std::string, CorruptionError> out;
  for (const auto& [kind, by_severity] : cells) {
    CorruptionError ce;
    CompensatedSum sum;
    for (int s = 1; s <= severities; ++s) {
      auto it = by_severity.find(s);
      require(it != by_severity.end() && !it->second.empty(), Errc::empty_input,
              "corruption '" + kind + "' is missing severity " + std::to_string(s));
      const double e = 1.0 - clean_accuracy(it->second);
      ce.errors.push_back(e);
      sum.add(e);
    }
    ce.mce = sum.value() / static_cast<double>(severities);
    ce.rmce = ce.mce - clean_error;
    out.emplace(kind, std::move(ce));
  }
  return out;
}

/// Fraction of adjacent frame pairs whose labels differ, over q sequences of
/// equal length n >= 2.
inline double flip_probability(std::span<const std::vector<std::size_t>> sequences) {
  require(!sequences.empty(), Errc::empty_input, "flip probability needs at least one sequence");
  std::size_t flips = 0, pairs = 0;
  for (const auto& seq : sequences) {
    require(seq.size() >= 2, Errc::invalid_argument, "frame sequence shorter than 2");
    for (std::size_t j = 1; j < seq.size(); ++j) flips += seq[j] != seq[j - 1] ? 1 : 0;
    pairs += seq.size() - 1;
  }
  return static_cast<double>(flips) / static_cast<double>(pairs);
}

struct FlipRate {
  std::map<std::string, double> per_corruption;  // FR_c = FP_c (baseline flip probability 1)
  double mfr = 0.0;
};

inline FlipRate mean_flip_rate(const std::map<std::string, std::vector<std::vector<std::size_t>>>& by_corruption) {
  require(!by_corruption.empty(), Errc::empty_input, "no frame sequences");
  FlipRate fr;
  CompensatedSum sum;
  for (const auto& [kind, seqs] : by_corruption) {
    const double fp = flip_probability(seqs);
    fr.per_corruption[kind] = fp;
    sum.add(fp);
  }
  fr.mfr = sum.value() / static_cast<double>(by_corruption.size());
  return fr;
}

/// Jensen-Shannon divergence in nats; bounded by ln 2.
inline double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), Errc::shape_mismatch, "JSD needs equal-length distributions");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

struct DefenseDelta {
  double cav = 0.0;
  double crr = 0.0;
  double csr = 0.0;
  std::optional<double> ccv;  // undefined when no sample is correct under both models
  std::optional<double> cos;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Compares a base model f against a defended model f^d on the same clean
/// inputs, aligned by sample_id.
inline DefenseDelta defense_delta(std::span<const PredictionRecord> base, std::span<const PredictionRecord> defended) {
  auto id = [](const PredictionRecord& r) { return r.sample_id; };
  const auto al = align(ids_of(base, id), ids_of(defended, id));
  DefenseDelta d;
  d.n = al.ids.size();
  std::size_t fixed = 0, spoiled = 0;
  CompensatedSum ccv, cos;
  for (std::size_t k = 0; k < d.n; ++k) {
    const auto& f = base[al.positions[0][k]];
    const auto& fd = defended[al.positions[1][k]];
    require(f.label == fd.label, Errc::invalid_argument, "label disagreement for sample '" + f.sample_id + "'");
    require(f.probs.size() == fd.probs.size(), Errc::shape_mismatch,
            "class count disagreement for sample '" + f.sample_id + "'");
    const bool fc = f.correct(), dc = fd.correct();
    if (!fc && dc) ++fixed;
    if (fc && !dc) ++spoiled;
    if (fc && dc) {
      ++d.m;
      ccv.add(std::abs(f.probs[f.label] - fd.probs[fd.label]));
      cos.add(jensen_shannon(f.probs, fd.probs));
    }
  }
  const double n = static_cast<double>(d.n);
  d.crr = static_cast<double>(fixed) / n;
  d.csr = static_cast<double>(spoiled) / n;
  // ACC(f^d) - ACC(f) equals (fixed - spoiled) / n; written as crr - csr so the
  // identity holds bit-exactly.
  d.cav = d.crr - d.csr;
  if (d.m > 0) {
    d.ccv = ccv.value() / static_cast<double>(d.m);
    d.cos = cos.value() / static_cast<double>(d.m);
  }
  return d;
}

}  // namespace robusteval
