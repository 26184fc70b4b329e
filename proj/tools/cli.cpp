#include "cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robusteval/robusteval.hpp"

namespace robusteval::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Report session: input registration with display paths
// ---------------------------------------------------------------------------

class Session {
 public:
  Session(std::string subcommand, fs::path base = {}) : report(std::move(subcommand)), base_(std::move(base)) {}

  EvaluationReport report;

  std::string display(const fs::path& p) const {
    if (base_.empty()) return p.generic_string();
    return fs::relative(p, base_).generic_string();
  }

  /// Registers a file (plus any .rtt companions named by a JSON manifest, or
  /// every file of a model directory) and returns the labels used.
  std::vector<std::string> input(const fs::path& p) {
    std::vector<std::string> labels;
    const fs::path manifest = fs::is_directory(p) ? p / "model.json" : p;
    add(manifest, labels);
    if (manifest.extension() == ".json") {
      json doc;
      try {
        doc = json::parse(detail::read_file(manifest));
      } catch (const json::exception&) {
        return labels;  // the loader reports the malformed manifest
      }
      std::set<std::string> companions;
      collect_rtt(doc, companions);
      for (const auto& c : companions) add(manifest.parent_path() / c, labels);
    }
    return labels;
  }

  std::vector<std::string> inputs(std::initializer_list<fs::path> paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) {
      if (p.empty()) continue;
      auto l = input(p);
      out.insert(out.end(), l.begin(), l.end());
    }
    return out;
  }

 private:
  void add(const fs::path& p, std::vector<std::string>& labels) {
    const std::string label = display(p);
    report.add_input_digest(label, label, file_digest(p));
    labels.push_back(label);
  }

  static void collect_rtt(const json& j, std::set<std::string>& out) {
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s.size() > 4 && s.ends_with(".rtt")) out.insert(s);
    } else if (j.is_structured()) {
      for (const auto& v : j) collect_rtt(v, out);
    }
  }

  fs::path base_;
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json neuron_metric_json(const NeuronMetric& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    json j{{"name", l.name}, {"mean", l.mean}, {"per_neuron", l.per_neuron}};
    if (l.scalar_fallback) j["scalar_fallback"] = true;
    layers.push_back(j);
  }
  return {{"mean", m.mean}, {"samples", m.samples}, {"layers", layers}};
}

// ---------------------------------------------------------------------------
// Knobs shared by the standalone subcommands and `all`
// ---------------------------------------------------------------------------

struct AttackKnobs {
  std::string method = "pgd";
  std::string norm = "inf";
  double epsilon = 0.07;
  double alpha = 0.0;  // 0 selects epsilon / 4
  std::size_t iterations = 20;
  bool random_start = true;
  std::uint64_t seed = 0;
  double l1_sparsity = 0.01;

  AttackConfig resolve() const {
    AttackConfig c;
    c.method = parse_attack_method(method);
    c.norm = parse_norm(norm);
    c.epsilon = epsilon;
    c.alpha = alpha > 0.0 ? alpha : epsilon / 4.0;
    c.iterations = c.method == AttackMethod::fgsm ? 1 : iterations;
    c.random_start = c.method == AttackMethod::pgd && random_start;
    c.seed = seed;
    c.l1_sparsity = l1_sparsity;
    c.validate();
    return c;
  }
};

json to_json(const AttackConfig& c) {
  return {{"method", to_string(c.method)}, {"norm", to_string(c.norm)},         {"epsilon", c.epsilon},
          {"alpha", c.alpha},              {"iterations", c.iterations},       {"random_start", c.random_start},
          {"seed", c.seed},                {"l1_sparsity", c.l1_sparsity}};
}

void add_attack_options(CLI::App* sub, AttackKnobs& k) {
  sub->add_option("--method", k.method, "fgsm | pgd | bim")->capture_default_str();
  sub->add_option("--norm", k.norm, "1 | 2 | inf")->capture_default_str();
  sub->add_option("--epsilon", k.epsilon, "perturbation budget")->capture_default_str();
  sub->add_option("--alpha", k.alpha, "step size (0: epsilon/4)")->capture_default_str();
  sub->add_option("--iterations", k.iterations, "attack iterations")->capture_default_str();
  sub->add_option("--random-start", k.random_start, "uniform start in the epsilon ball (pgd only)")
      ->capture_default_str();
  sub->add_option("--attack-seed", k.seed, "attack seed")->capture_default_str();
  sub->add_option("--l1-sparsity", k.l1_sparsity, "fraction of coordinates moved per l1 step")
      ->capture_default_str();
}

struct StructureKnobs {
  std::size_t directions = 10;  // clamped to the input dimension by `all`
  double step = 0.01;
  double max_dist = 0.0;  // 0: sqrt(dim)
  std::uint64_t seed = 0;
  double alpha = kDefaultEbd2Alpha;
  std::size_t cap = kDefaultEbd2Cap;
  double eni_epsilon = 0.0;  // 0: taken from the pair set
};

void add_structure_options(CLI::App* sub, StructureKnobs& k) {
  sub->add_option("--directions", k.directions, "EBD direction count m")->capture_default_str();
  sub->add_option("--step", k.step, "EBD marching step (l2, input units)")->capture_default_str();
  sub->add_option("--max-dist", k.max_dist, "EBD marching budget (l2; 0: sqrt(dim))")->capture_default_str();
  sub->add_option("--ebd-seed", k.seed, "EBD direction seed")->capture_default_str();
  sub->add_option("--ebd2-alpha", k.alpha, "EBD-2 step size")->capture_default_str();
  sub->add_option("--ebd2-cap", k.cap, "EBD-2 iteration cap")->capture_default_str();
  sub->add_option("--eni-epsilon", k.eni_epsilon, "ENI l-inf bound (0: pair-set epsilon)")->capture_default_str();
}

// ---------------------------------------------------------------------------
// Metric sections
// ---------------------------------------------------------------------------

void coverage_section(Session& s, const std::string& prefix, const fs::path& trace_path, const fs::path& profile_path,
                      std::optional<std::size_t> k) {
  const auto trace = load_trace(trace_path);
  auto profile = load_profile(profile_path);
  if (k) profile = profile.with_sections(*k);
  const auto labels = s.inputs({trace_path, profile_path});
  std::optional<CoverageResult> r;
  std::string err;
  try {
    r = coverage(trace, profile);
  } catch (const std::exception& e) {
    err = e.what();
  }
  for (const std::string name : {"kmncov", "nbcov", "snacov"}) {
    s.report.record(prefix + name, labels, [&]() -> json {
      if (!r) fail(Errc::geometry_mismatch, err);
      if (name == "kmncov") return {{"value", r->kmncov}, {"covered_sections", r->covered_sections}, {"k", r->k},
                                    {"neurons", r->neurons}};
      if (name == "nbcov") return {{"value", r->nbcov}, {"upper_corner", r->upper_corner},
                                   {"lower_corner", r->lower_corner}, {"neurons", r->neurons}};
      return {{"value", r->snacov}, {"upper_corner", r->upper_corner}, {"neurons", r->neurons}};
    });
  }
}

void impercept_section(Session& s, const std::string& prefix, const fs::path& pairs_path, std::size_t window) {
  const auto pairs = load_pairs(pairs_path);
  const auto labels = s.input(pairs_path);
  for (Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
    s.report.record(prefix + "ald_" + to_string(p), labels, [&]() -> json {
      return {{"value", ald_p(pairs, p)}, {"m", pairs.successful().size()}};
    });
  }
  s.report.record(prefix + "ass", labels, [&]() -> json {
    return {{"value", ass(pairs)}, {"m", pairs.successful().size()}};
  });
  s.report.record(prefix + "psd", labels, [&]() -> json {
    return {{"value", psd(pairs, window)}, {"m", pairs.successful().size()}, {"window", window}};
  });
}

struct BehaviorInputs {
  std::vector<fs::path> records;
  std::vector<fs::path> sequences;
  std::string base = "f";
  std::string defended = "fd";
  int severities = kSeverityLevels;
};

void behavior_section(Session& s, const std::string& prefix, const BehaviorInputs& in) {
  std::vector<PredictionRecord> all;
  std::vector<std::string> rec_labels, seq_labels;
  for (const auto& p : in.records) {
    auto r = load_records(p);
    all.insert(all.end(), r.begin(), r.end());
    rec_labels = concat(rec_labels, s.input(p));
  }
  std::vector<FrameSequence> seqs;
  for (const auto& p : in.sequences) {
    auto q = load_sequences(p);
    seqs.insert(seqs.end(), q.begin(), q.end());
    seq_labels = concat(seq_labels, s.input(p));
  }

  // model -> condition tag -> records
  std::map<std::string, std::map<std::string, std::vector<PredictionRecord>>> by;
  for (auto& r : all) by[r.model][r.condition].push_back(r);

  for (const auto& [model, conds] : by) {
    const std::string mp = prefix + model + ".";
    const auto clean_it = conds.find("clean");
    const std::vector<PredictionRecord>* clean = clean_it == conds.end() ? nullptr : &clean_it->second;
    s.report.record(mp + "ca", rec_labels, [&]() -> json {
      require(clean != nullptr, Errc::empty_input, "no clean records for model '" + model + "'");
      return {{"value", clean_accuracy(*clean)}, {"n", clean->size()}};
    });

    std::map<std::string, std::map<int, std::vector<PredictionRecord>>> cells;
    for (const auto& [tag, recs] : conds) {
      const auto c = Condition::parse(tag);
      if (c.kind == Condition::Kind::attack || c.kind == Condition::Kind::blackbox) {
        const std::string family = c.kind == Condition::Kind::attack ? "aaw" : "aab";
        s.report.record(mp + family + "." + tag, rec_labels, [&]() -> json {
          const auto a = adversarial_accuracy(recs);
          return {{"robust_acc", a.robust_acc}, {"misclass_rate", a.misclass_rate}, {"n", a.n}};
        });
        if (c.kind == Condition::Kind::attack) {
          s.report.record(mp + "adv_confidence." + tag, rec_labels, [&]() -> json {
            require(clean != nullptr, Errc::empty_input, "no clean records for model '" + model + "'");
            const auto st = adv_confidence_stats(*clean, recs);
            return {{"acac", st.acac}, {"actc", st.actc}, {"nte", st.nte}, {"m", st.m}};
          });
        }
      } else if (c.kind == Condition::Kind::corruption) {
        cells[c.method][c.severity] = recs;
      }
    }
    if (!cells.empty()) {
      s.report.record(mp + "corruption", rec_labels, [&]() -> json {
        require(clean != nullptr, Errc::empty_input, "no clean records for model '" + model + "'");
        const double clean_error = 1.0 - clean_accuracy(*clean);
        json out = json::object();
        for (const auto& [kind, ce] : corruption_errors(cells, clean_error, in.severities)) {
          out[kind] = {{"errors", ce.errors}, {"mce", ce.mce}, {"rmce", ce.rmce}};
        }
        return {{"per_corruption", out}, {"clean_error", clean_error}, {"severities", in.severities}};
      });
    }

    std::map<std::string, std::vector<std::vector<std::size_t>>> frames;
    for (const auto& q : seqs) {
      if (q.model == model) frames[q.corruption].push_back(q.labels);
    }
    if (!frames.empty()) {
      s.report.record(mp + "mfr", seq_labels, [&]() -> json {
        const auto fr = mean_flip_rate(frames);
        return {{"value", fr.mfr}, {"per_corruption", fr.per_corruption}};
      });
    }
  }

  const auto base = by.find(in.base), def = by.find(in.defended);
  if (base != by.end() && def != by.end()) {
    s.report.record(prefix + "defense", rec_labels, [&]() -> json {
      const auto bc = base->second.find("clean"), dc = def->second.find("clean");
      require(bc != base->second.end() && dc != def->second.end(), Errc::empty_input,
              "defense metrics need clean records of both models");
      const auto d = defense_delta(bc->second, dc->second);
      return {{"base", in.base}, {"defended", in.defended}, {"cav", d.cav}, {"crr", d.crr},
              {"csr", d.csr},    {"ccv", optional_json(d.ccv)},          {"cos", optional_json(d.cos)},
              {"n", d.n},        {"m", d.m}};
    });
  }
}

struct StructureInputs {
  fs::path model;
  fs::path data;
  fs::path pairs;        // optional: ENI, and NS when no traces are given
  fs::path clean_trace;  // optional, with adv_trace
  fs::path adv_trace;
};

void structure_section(Session& s, const std::string& prefix, const StructureInputs& in, const StructureKnobs& k) {
  const auto model = load_model(in.model);
  const auto data = load_dataset(in.data);
  std::optional<SamplePairSet> pairs;
  if (!in.pairs.empty()) pairs = load_pairs(in.pairs);
  std::optional<ActivationTrace> clean_trace, adv_trace;
  require(in.clean_trace.empty() == in.adv_trace.empty(), Errc::invalid_argument,
          "--clean-trace and --adv-trace must be given together");
  if (!in.clean_trace.empty()) {
    clean_trace = load_trace(in.clean_trace);
    adv_trace = load_trace(in.adv_trace);
  }
  const auto& net = model.network;
  const auto base = s.inputs({in.model, in.data});

  s.report.record(prefix + "ebd", base, [&]() -> json {
    EbdConfig c{k.directions, k.seed, k.step, k.max_dist};
    const auto r = ebd(net, data, c);
    return {{"value", r.ebd},          {"distances", r.distances}, {"capped", r.capped_count},
            {"skipped", r.skipped},    {"directions", r.directions}, {"step", r.step},
            {"max_dist", r.max_dist}};
  });
  s.report.record(prefix + "ebd2", base, [&]() -> json {
    const auto r = ebd2(net, data, k.alpha, k.cap);
    json per = json::object();
    for (const auto& [c, v] : r.per_class) per[std::to_string(c)] = v;
    return {{"value", r.mean_steps}, {"per_class", per},   {"capped", r.capped_count},
            {"skipped", r.skipped},  {"alpha", r.alpha},   {"cap", r.cap}};
  });

  if (pairs) {
    const auto labels = concat(s.inputs({in.model}), s.input(in.pairs));
    s.report.record(prefix + "eni", labels, [&]() -> json {
      double eps = k.eni_epsilon;
      if (eps <= 0.0) {
        require(pairs->meta().epsilon.has_value(), Errc::invalid_argument,
                "ENI needs --eni-epsilon for a pair set without a budget");
        eps = *pairs->meta().epsilon;
      }
      const auto r = eni(net, *pairs, eps);
      return {{"value", r.eni}, {"used", r.used}, {"skipped", r.skipped}, {"epsilon", r.epsilon}};
    });
  }

  std::vector<std::string> trace_labels;
  if (clean_trace) {
    trace_labels = s.inputs({in.clean_trace, in.adv_trace});
  } else if (pairs) {
    clean_trace = capture_trace(net, *pairs, false);
    adv_trace = capture_trace(net, *pairs, true);
    trace_labels = concat(s.inputs({in.model}), s.input(in.pairs));
  }
  if (clean_trace) {
    s.report.record(prefix + "neuron_sensitivity", trace_labels,
                    [&]() -> json { return neuron_metric_json(neuron_sensitivity(*clean_trace, *adv_trace)); });
    s.report.record(prefix + "neuron_uncertainty", trace_labels,
                    [&]() -> json { return neuron_metric_json(neuron_uncertainty(*clean_trace)); });
  }
}

// ---------------------------------------------------------------------------
// Producers
// ---------------------------------------------------------------------------

NetworkSpec mlp_spec(std::size_t input, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  return NetworkSpec{{input},
                     {DenseLayer{input, hidden}, ReluLayer{}, DenseLayer{hidden, hidden}, ReluLayer{},
                      DenseLayer{hidden, classes}},
                     classes,
                     seed};
}

std::string attack_condition(const PerturbationMeta& meta, bool blackbox) {
  const auto colon = meta.generator.find(':');
  if (!meta.norm) {
    // Corruption pair sets carry "<kind>:<severity>".
    require(colon != std::string::npos, Errc::invalid_argument,
            "cannot derive a condition tag from generator '" + meta.generator + "'");
    return "corruption:" + meta.generator;
  }
  require(meta.epsilon.has_value(), Errc::invalid_argument, "attack pair set has no epsilon");
  return std::string(blackbox ? "blackbox:" : "attack:") + meta.generator + ":" + to_string(*meta.norm) + ":" +
         number_text(*meta.epsilon);
}

std::vector<FrameSequence> frame_sequences(const Network<float>& net, const LabeledSet& set,
                                           const CorruptionConfig& cfg, std::size_t frames,
                                           const std::string& model_name) {
  std::vector<FrameSequence> out(set.size());
  for_each_sample(net, set.size(), [&](std::size_t i) {
    FrameSequence fs{set.ids[i], to_string(cfg.kind), model_name, {}};
    for (const auto& x : corrupt_sequence(set.inputs[i], cfg, frames, i)) {
      fs.labels.push_back(predicted_class(net, x));
    }
    out[i] = std::move(fs);
  });
  return out;
}

struct TrainKnobs {
  std::size_t hidden = 16;
  std::uint64_t init_seed = 7;
  std::string recipe = "vanilla";
  TrainConfig cfg;

  TrainConfig resolve() const {
    TrainConfig c = cfg;
    c.recipe = parse_recipe(recipe);
    return c;
  }
};

void add_train_options(CLI::App* sub, TrainKnobs& k) {
  sub->add_option("--hidden", k.hidden, "hidden width of the two hidden layers")->capture_default_str();
  sub->add_option("--init-seed", k.init_seed, "parameter initialization seed")->capture_default_str();
  sub->add_option("--recipe", k.recipe, "vanilla | adversarial")->capture_default_str();
  sub->add_option("--train-epsilon", k.cfg.epsilon, "adversarial training l-inf budget")->capture_default_str();
  sub->add_option("--train-steps", k.cfg.attack_steps, "PGD steps per adversarial batch")->capture_default_str();
  sub->add_option("--train-alpha", k.cfg.attack_alpha, "PGD step size (0: 2.5*eps/steps)")->capture_default_str();
  sub->add_option("--lr", k.cfg.learning_rate, "SGD learning rate")->capture_default_str();
  sub->add_option("--batch", k.cfg.batch_size, "minibatch size")->capture_default_str();
  sub->add_option("--epochs", k.cfg.epochs, "training epochs")->capture_default_str();
  sub->add_option("--train-seed", k.cfg.seed, "batch order / attack seed")->capture_default_str();
}

// ---------------------------------------------------------------------------
// `all`: generate the desk-scale fixture, then score it from files
// ---------------------------------------------------------------------------

struct AllKnobs {
  fs::path workdir = "robusteval-run";
  std::uint64_t seed = 0;
  std::size_t train_samples = 400;
  std::size_t test_samples = 200;
  double epsilon = 0.07;
  std::size_t k = kDefaultSections;
  std::size_t window = kDefaultPsdWindow;
  int severity = 3;  // noise severity of the flip-rate sequences
  std::size_t frames = 10;
  TrainKnobs train;
  AttackKnobs attack;
  StructureKnobs structure;
};

void run_all(const AllKnobs& k, const fs::path& report_path) {
  const fs::path w = fs::absolute(k.workdir);
  fs::create_directories(w);

  TwoGaussianSpec tr;
  tr.samples = k.train_samples;
  tr.seed = k.seed + 1;
  TwoGaussianSpec te = tr;
  te.samples = k.test_samples;
  te.seed = k.seed + 2;
  write_dataset(w / "data/train.json", two_gaussian(tr));
  write_dataset(w / "data/test.json", two_gaussian(te));
  const auto train_set = load_dataset(w / "data/train.json");
  const auto test = load_dataset(w / "data/test.json");
  const std::size_t dim = train_set.inputs.front().size();

  struct ModelPlan {
    std::string name;
    Recipe recipe;
    std::uint64_t init_seed;
    std::uint64_t train_seed;
  };
  const std::vector<ModelPlan> plans{{"f", Recipe::vanilla, k.seed + 7, k.seed + 3},
                                     {"fd", Recipe::adversarial, k.seed + 7, k.seed + 3},
                                     {"surrogate", Recipe::vanilla, k.seed + 11, k.seed + 13}};
  for (const auto& p : plans) {
    TrainConfig tc = k.train.cfg;
    tc.recipe = p.recipe;
    tc.epsilon = p.recipe == Recipe::adversarial ? k.epsilon : 0.0;
    tc.seed = p.train_seed;
    save_model(w / "models" / p.name, train(mlp_spec(dim, k.train.hidden, train_set.classes, p.init_seed),
                                            train_set, tc));
  }

  AttackKnobs ak = k.attack;
  ak.epsilon = k.epsilon;
  ak.seed = k.seed + 5;
  const AttackConfig ac = ak.resolve();

  std::vector<PredictionRecord> clean_recs, attack_recs, blackbox_recs, corruption_recs;
  std::vector<FrameSequence> sequences;
  const auto surrogate = load_model(w / "models/surrogate");
  const auto transfer = generate_pairs(surrogate.network, test, ac, "surrogate");
  write_pairs(w / "pairs/surrogate_pgd.json", transfer);

  for (const std::string name : {"f", "fd"}) {
    const auto m = load_model(w / "models" / name);
    const auto& net = m.network;
    auto clean = predict_records(net, test, "clean", name);
    clean_recs.insert(clean_recs.end(), clean.begin(), clean.end());

    const auto pairs = generate_pairs(net, test, ac, name);
    write_pairs(w / "pairs" / (name + "_pgd.json"), pairs);
    auto adv = predict_records(net, pairs, attack_condition(pairs.meta(), false), name);
    attack_recs.insert(attack_recs.end(), adv.begin(), adv.end());

    const auto moved = reflag_pairs(net, transfer, name);
    auto bb = predict_records(net, moved, attack_condition(moved.meta(), true), name);
    blackbox_recs.insert(blackbox_recs.end(), bb.begin(), bb.end());

    for (auto kind : kAllCorruptions) {
      for (int sev = 1; sev <= kSeverityLevels; ++sev) {
        const CorruptionConfig cc{kind, sev, k.seed + 17};
        const auto cp = corrupt_pairs(net, test, cc, name);
        auto cr = predict_records(net, cp, attack_condition(cp.meta(), false), name);
        corruption_recs.insert(corruption_recs.end(), cr.begin(), cr.end());
      }
    }
    for (auto kind : {CorruptionKind::gaussian_noise, CorruptionKind::uniform_noise}) {
      auto seq = frame_sequences(net, test, CorruptionConfig{kind, k.severity, k.seed + 19}, k.frames, name);
      sequences.insert(sequences.end(), seq.begin(), seq.end());
    }

    write_trace(w / "traces" / (name + "_test.json"), capture_trace(net, pairs, false));
    write_trace(w / "traces" / (name + "_adv.json"), capture_trace(net, pairs, true));
    if (name == "f") {
      write_trace(w / "traces/f_train.json", capture_trace(net, train_set));
      write_profile(w / "profiles/f.json", build_neuron_profile(load_trace(w / "traces/f_train.json"), k.k));
    }
  }
  write_records(w / "records/clean.jsonl", clean_recs);
  write_records(w / "records/attack.jsonl", attack_recs);
  write_records(w / "records/blackbox.jsonl", blackbox_recs);
  write_records(w / "records/corruption.jsonl", corruption_recs);
  write_sequences(w / "records/sequences.jsonl", sequences);

  // Scoring reads back every artifact from disk.
  Session s("all", w);
  StructureKnobs sk = k.structure;
  sk.directions = std::min(sk.directions, dim);
  TrainConfig echo = k.train.cfg;
  echo.epsilon = k.epsilon;
  s.report.set_config({{"seed", k.seed},
                       {"train_samples", k.train_samples},
                       {"test_samples", k.test_samples},
                       {"epsilon", k.epsilon},
                       {"hidden", k.train.hidden},
                       {"train", echo.to_json()},
                       {"init", "uniform(-sqrt(6/fan_in), sqrt(6/fan_in)), zero bias"},
                       {"attack", to_json(ac)},
                       {"coverage", {{"k", k.k}}},
                       {"psd_window", k.window},
                       {"corruption", {{"severities", kSeverityLevels},
                                       {"gaussian_sigma", kGaussianSigma},
                                       {"uniform_half_width", kUniformHalfWidth},
                                       {"blur_radius", kBlurRadius},
                                       {"contrast_factor", kContrastFactor},
                                       {"brightness_shift", kBrightnessShift},
                                       {"sequence_severity", k.severity},
                                       {"frames", k.frames}}},
                       {"structure", {{"directions", sk.directions},
                                      {"step", sk.step},
                                      {"max_dist", EbdConfig{sk.directions, sk.seed, sk.step, sk.max_dist}
                                                       .resolved_max_dist(dim)},
                                      {"ebd_seed", sk.seed},
                                      {"ebd2_alpha", sk.alpha},
                                      {"ebd2_cap", sk.cap},
                                      {"eni_epsilon", sk.eni_epsilon > 0.0 ? sk.eni_epsilon : k.epsilon}}},
                       {"threads_affect_results", false}});

  coverage_section(s, "coverage.f.clean.", w / "traces/f_test.json", w / "profiles/f.json", std::nullopt);
  coverage_section(s, "coverage.f.adversarial.", w / "traces/f_adv.json", w / "profiles/f.json", std::nullopt);
  impercept_section(s, "imperceptibility.f.", w / "pairs/f_pgd.json", k.window);
  impercept_section(s, "imperceptibility.fd.", w / "pairs/fd_pgd.json", k.window);
  behavior_section(s, "behavior.",
                   BehaviorInputs{{w / "records/clean.jsonl", w / "records/attack.jsonl", w / "records/blackbox.jsonl",
                                   w / "records/corruption.jsonl"},
                                  {w / "records/sequences.jsonl"},
                                  "f",
                                  "fd",
                                  kSeverityLevels});
  for (const std::string name : {"f", "fd"}) {
    structure_section(s, "structure." + name + ".",
                      StructureInputs{w / "models" / name, w / "data/test.json", w / "pairs" / (name + "_pgd.json"),
                                      w / "traces" / (name + "_test.json"), w / "traces" / (name + "_adv.json")},
                      sk);
  }
  s.report.write(report_path);
}

// ---------------------------------------------------------------------------

const CLI::Validator kAtLeastOne(
    [](std::string& v) -> std::string {
      try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used == v.size() && n >= 1) return {};
      } catch (const std::exception&) {
      }
      return "value " + v + " must be an integer >= 1";
    },
    "INT>=1");

int usage_error(const CLI::App& app, const std::string& message) {
  std::cerr << "error: " << message << "\n\n" << app.help();
  return 2;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"robusteval: robustness metrics from traces, prediction records and sample pairs"};
  app.name("robusteval");
  app.require_subcommand(1);
  fs::path report = "report.json";
  app.add_option("-o,--report", report, "report output path")->capture_default_str();

  // dataset
  auto* ds = app.add_subcommand("dataset", "write a two-Gaussian 2-D dataset");
  fs::path ds_out;
  TwoGaussianSpec ds_spec;
  ds->add_option("--out", ds_out, "dataset manifest path")->required();
  ds->add_option("--samples", ds_spec.samples, "sample count")->capture_default_str();
  ds->add_option("--seed", ds_spec.seed, "sampling seed")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a toy classifier on a dataset");
  fs::path tr_data, tr_out;
  TrainKnobs tk;
  tr->add_option("--data", tr_data, "dataset manifest")->required();
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  add_train_options(tr, tk);

  // export
  auto* ex = app.add_subcommand("export", "write prediction records and/or an activation trace for a model");
  fs::path ex_model, ex_data, ex_pairs, ex_records, ex_trace;
  std::string ex_side = "perturbed", ex_condition, ex_name = "f";
  bool ex_blackbox = false;
  ex->add_option("--model", ex_model, "checkpoint directory")->required();
  auto* ex_data_opt = ex->add_option("--data", ex_data, "dataset manifest (clean inputs)");
  auto* ex_pairs_opt = ex->add_option("--pairs", ex_pairs, "pair-set manifest");
  ex_data_opt->excludes(ex_pairs_opt);
  ex->add_option("--side", ex_side, "clean | perturbed (with --pairs)")->capture_default_str();
  ex->add_option("--records", ex_records, "prediction-record output (JSON Lines)");
  ex->add_option("--trace", ex_trace, "trace manifest output");
  ex->add_option("--condition", ex_condition, "condition tag (derived when omitted)");
  ex->add_flag("--blackbox", ex_blackbox, "tag perturbed records as black-box");
  ex->add_option("--model-name", ex_name, "model identity in records")->capture_default_str();

  // profile
  auto* pr = app.add_subcommand("profile", "build a neuron profile from reference traces");
  std::vector<fs::path> pr_traces;
  fs::path pr_out;
  std::size_t pr_k = kDefaultSections;
  pr->add_option("--trace", pr_traces, "reference trace manifest (repeatable)")->required();
  pr->add_option("--out", pr_out, "profile output path")->required();
  pr->add_option("--k", pr_k, "section count")->capture_default_str()->check(kAtLeastOne);

  // attack
  auto* at = app.add_subcommand("attack", "generate adversarial pairs against a model");
  fs::path at_model, at_data, at_out, at_records;
  std::string at_name = "f";
  AttackKnobs ak;
  at->add_option("--model", at_model, "checkpoint directory")->required();
  at->add_option("--data", at_data, "dataset manifest")->required();
  at->add_option("--out", at_out, "pair-set manifest output")->required();
  at->add_option("--records", at_records, "perturbed prediction records output");
  at->add_option("--model-name", at_name, "model identity")->capture_default_str();
  add_attack_options(at, ak);

  // corrupt
  auto* co = app.add_subcommand("corrupt", "generate corrupted variants and frame sequences");
  fs::path co_model, co_data, co_records, co_pairs, co_sequences;
  std::vector<std::string> co_kinds{"all"};
  std::vector<int> co_sev;
  std::size_t co_frames = 10;
  std::uint64_t co_seed = 0;
  std::string co_name = "f";
  co->add_option("--model", co_model, "checkpoint directory")->required();
  co->add_option("--data", co_data, "dataset manifest")->required();
  co->add_option("--kind", co_kinds, "corruption kinds or 'all'")->capture_default_str();
  co->add_option("--severity", co_sev, "severities 1..5 (default all)")->check(CLI::Range(1, kSeverityLevels));
  co->add_option("--records", co_records, "prediction-record output");
  co->add_option("--pairs", co_pairs, "pair-set output (single kind and severity)");
  co->add_option("--sequences", co_sequences, "frame-sequence output for flip rate");
  co->add_option("--frames", co_frames, "frames per sequence")->capture_default_str();
  co->add_option("--seed", co_seed, "noise seed")->capture_default_str();
  co->add_option("--model-name", co_name, "model identity")->capture_default_str();

  // coverage
  auto* cv = app.add_subcommand("coverage", "neuron coverage of a test trace");
  fs::path cv_trace, cv_profile;
  std::optional<std::size_t> cv_k;
  cv->add_option("--trace", cv_trace, "test trace manifest")->required();
  cv->add_option("--profile", cv_profile, "neuron profile")->required();
  cv->add_option("--k", cv_k, "override the profile's section count")->check(kAtLeastOne);

  // impercept
  auto* im = app.add_subcommand("impercept", "perturbation imperceptibility of a pair set");
  fs::path im_pairs;
  std::size_t im_window = kDefaultPsdWindow;
  im->add_option("--pairs", im_pairs, "pair-set manifest")->required();
  im->add_option("--window", im_window, "PSD window side (odd)")->capture_default_str();

  // behavior
  auto* be = app.add_subcommand("behavior", "behavioral metrics from prediction records");
  BehaviorInputs bi;
  be->add_option("--records", bi.records, "prediction-record files (repeatable)")->required();
  be->add_option("--sequences", bi.sequences, "frame-sequence files (repeatable)");
  be->add_option("--base", bi.base, "base model identity")->capture_default_str();
  be->add_option("--defended", bi.defended, "defended model identity")->capture_default_str();
  be->add_option("--severities", bi.severities, "corruption severity count")->capture_default_str()
      ->check(kAtLeastOne);

  // structure
  auto* st = app.add_subcommand("structure", "boundary, consistency and neuron metrics for a model");
  StructureInputs si;
  StructureKnobs sk;
  st->add_option("--model", si.model, "checkpoint directory")->required();
  st->add_option("--data", si.data, "labeled samples")->required();
  st->add_option("--pairs", si.pairs, "pair set for ENI (and neuron metrics without traces)");
  st->add_option("--clean-trace", si.clean_trace, "clean trace manifest");
  st->add_option("--adv-trace", si.adv_trace, "perturbed trace manifest");
  add_structure_options(st, sk);

  // all
  auto* al = app.add_subcommand("all", "build the toy fixture in a work directory and emit every metric");
  AllKnobs ak_all;
  al->add_option("--workdir", ak_all.workdir, "work directory")->capture_default_str();
  al->add_option("--seed", ak_all.seed, "base seed")->capture_default_str();
  al->add_option("--train-samples", ak_all.train_samples, "training samples")->capture_default_str();
  al->add_option("--test-samples", ak_all.test_samples, "test samples")->capture_default_str();
  al->add_option("--epsilon", ak_all.epsilon, "attack and adversarial-training budget")->capture_default_str();
  al->add_option("--k", ak_all.k, "coverage section count")->capture_default_str()->check(kAtLeastOne);
  al->add_option("--window", ak_all.window, "PSD window side")->capture_default_str();
  al->add_option("--frames", ak_all.frames, "frames per flip-rate sequence")->capture_default_str();
  al->add_option("--hidden", ak_all.train.hidden, "hidden width")->capture_default_str();
  al->add_option("--epochs", ak_all.train.cfg.epochs, "training epochs")->capture_default_str();
  al->add_option("--lr", ak_all.train.cfg.learning_rate, "SGD learning rate")->capture_default_str();
  add_structure_options(al, ak_all.structure);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*ds) {
      Session s("dataset");
      write_dataset(ds_out, two_gaussian(ds_spec));
      s.report.set_config({{"samples", ds_spec.samples},
                           {"seed", ds_spec.seed},
                           {"center", ds_spec.center},
                           {"offset", ds_spec.offset},
                           {"stddev", ds_spec.stddev}});
      s.input(ds_out);
      s.report.write(report);
    } else if (*tr) {
      const auto data = load_dataset(tr_data);
      const auto cfg = tk.resolve();
      const auto spec = mlp_spec(data.inputs.front().size(), tk.hidden, data.classes, tk.init_seed);
      Session s("train");
      s.input(tr_data);
      s.report.set_config({{"hidden", tk.hidden}, {"init_seed", tk.init_seed}, {"train", cfg.to_json()},
                           {"spec", spec_to_json(spec)}});
      const auto model = train(spec, data, cfg);
      save_model(tr_out, model);
      const auto clean = predict_records(model.network, data, "clean", "f");
      s.report.record("train.accuracy", {tr_data.generic_string()},
                      [&]() -> json { return {{"value", clean_accuracy(clean)}, {"n", clean.size()}}; });
      s.report.write(report);
    } else if (*ex) {
      if (ex_data.empty() && ex_pairs.empty()) return usage_error(*ex, "export needs --data or --pairs");
      if (ex_records.empty() && ex_trace.empty()) return usage_error(*ex, "export needs --records and/or --trace");
      if (ex_side != "clean" && ex_side != "perturbed") return usage_error(*ex, "--side must be clean or perturbed");
      const auto model = load_model(ex_model);
      Session s("export");
      s.inputs({ex_model, ex_data, ex_pairs});
      std::string condition = ex_condition;
      LabeledSet set;
      if (!ex_pairs.empty()) {
        const auto pairs = load_pairs(ex_pairs);
        const bool perturbed = ex_side == "perturbed";
        for (const auto& p : pairs.pairs()) {
          set.ids.push_back(p.sample_id);
          set.inputs.push_back(perturbed ? p.perturbed : p.clean);
          set.labels.push_back(p.label);
        }
        set.classes = model.network.spec().classes;
        if (condition.empty()) condition = perturbed ? attack_condition(pairs.meta(), ex_blackbox) : "clean";
      } else {
        set = load_dataset(ex_data);
        if (condition.empty()) condition = "clean";
      }
      Condition::parse(condition);
      s.report.set_config({{"side", ex_side}, {"condition", condition}, {"model_name", ex_name}});
      if (!ex_records.empty()) write_records(ex_records, predict_records(model.network, set, condition, ex_name));
      if (!ex_trace.empty()) write_trace(ex_trace, capture_trace(model.network, set));
      s.report.write(report);
    } else if (*pr) {
      std::optional<ActivationTrace> ref;
      Session s("profile");
      for (const auto& t : pr_traces) {
        auto tr_ = load_trace(t);
        ref = ref ? ref->append(tr_) : tr_;
        s.input(t);
      }
      const auto profile = build_neuron_profile(*ref, pr_k);
      write_profile(pr_out, profile);
      s.report.set_config({{"k", pr_k}});
      s.report.record("profile.neurons", {}, [&]() -> json {
        return {{"value", profile.neuron_count()}, {"reference_samples", ref->sample_count()}};
      });
      s.report.write(report);
    } else if (*at) {
      const auto cfg = ak.resolve();
      const auto model = load_model(at_model);
      const auto data = load_dataset(at_data);
      Session s("attack");
      const auto labels = s.inputs({at_model, at_data});
      s.report.set_config({{"attack", to_json(cfg)}, {"model_name", at_name}});
      const auto pairs = generate_pairs(model.network, data, cfg, at_name);
      write_pairs(at_out, pairs);
      if (!at_records.empty()) {
        write_records(at_records,
                      predict_records(model.network, pairs, attack_condition(pairs.meta(), false), at_name));
      }
      s.report.record("attack.success_rate", labels, [&]() -> json {
        return {{"value", static_cast<double>(pairs.successful().size()) / static_cast<double>(pairs.size())},
                {"successful", pairs.successful().size()},
                {"n", pairs.size()}};
      });
      s.report.write(report);
    } else if (*co) {
      std::vector<CorruptionKind> kinds;
      for (const auto& k : co_kinds) {
        if (k == "all") {
          kinds.assign(kAllCorruptions.begin(), kAllCorruptions.end());
        } else {
          kinds.push_back(parse_corruption(k));
        }
      }
      std::vector<int> sevs = co_sev;
      if (sevs.empty()) {
        for (int v = 1; v <= kSeverityLevels; ++v) sevs.push_back(v);
      }
      if (!co_pairs.empty() && (kinds.size() != 1 || sevs.size() != 1)) {
        return usage_error(*co, "--pairs needs exactly one --kind and one --severity");
      }
      if (co_records.empty() && co_pairs.empty() && co_sequences.empty()) {
        return usage_error(*co, "corrupt needs --records, --pairs or --sequences");
      }
      if (!co_sequences.empty() && co_frames < 2) return usage_error(*co, "--frames must be >= 2");
      const auto model = load_model(co_model);
      const auto data = load_dataset(co_data);
      Session s("corrupt");
      s.inputs({co_model, co_data});
      json kinds_json = json::array();
      for (auto k : kinds) kinds_json.push_back(to_string(k));
      s.report.set_config({{"kinds", kinds_json}, {"severities", sevs}, {"frames", co_frames}, {"seed", co_seed},
                           {"model_name", co_name}});
      std::vector<PredictionRecord> recs;
      std::vector<FrameSequence> seqs;
      for (auto kind : kinds) {
        for (int sev : sevs) {
          const CorruptionConfig cc{kind, sev, co_seed};
          const auto cp = corrupt_pairs(model.network, data, cc, co_name);
          if (!co_pairs.empty()) write_pairs(co_pairs, cp);
          auto r = predict_records(model.network, cp, attack_condition(cp.meta(), false), co_name);
          recs.insert(recs.end(), r.begin(), r.end());
          if (!co_sequences.empty()) {
            auto q = frame_sequences(model.network, data, cc, co_frames, co_name);
            seqs.insert(seqs.end(), q.begin(), q.end());
          }
        }
      }
      if (!co_records.empty()) write_records(co_records, recs);
      if (!co_sequences.empty()) write_sequences(co_sequences, seqs);
      s.report.write(report);
    } else if (*cv) {
      Session s("coverage");
      s.report.set_config({{"k", cv_k ? *cv_k : load_profile(cv_profile).k()}});
      coverage_section(s, "coverage.", cv_trace, cv_profile, cv_k);
      s.report.write(report);
    } else if (*im) {
      require(im_window % 2 == 1, Errc::invalid_argument, "PSD window side must be odd");
      Session s("impercept");
      s.report.set_config({{"window", im_window}});
      impercept_section(s, "imperceptibility.", im_pairs, im_window);
      s.report.write(report);
    } else if (*be) {
      Session s("behavior");
      s.report.set_config({{"base", bi.base}, {"defended", bi.defended}, {"severities", bi.severities},
                           {"headline", "robust_acc"}, {"jsd_log", "natural"}});
      behavior_section(s, "behavior.", bi);
      s.report.write(report);
    } else if (*st) {
      Session s("structure");
      s.report.set_config({{"directions", sk.directions},
                           {"step", sk.step},
                           {"max_dist", sk.max_dist > 0.0 ? json(sk.max_dist) : json("sqrt(dim)")},
                           {"ebd_seed", sk.seed},
                           {"ebd2_alpha", sk.alpha},
                           {"ebd2_cap", sk.cap},
                           {"eni_epsilon", sk.eni_epsilon > 0.0 ? json(sk.eni_epsilon) : json("pairs")}});
      structure_section(s, "structure.", si, sk);
      s.report.write(report);
    } else if (*al) {
      require(ak_all.window % 2 == 1, Errc::invalid_argument, "PSD window side must be odd");
      run_all(ak_all, report);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace robusteval::cli
