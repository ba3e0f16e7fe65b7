#include "genverify/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "genverify/consensus.hpp"
#include "genverify/decoding.hpp"
#include "genverify/error.hpp"
#include "genverify/format.hpp"
#include "genverify/imaging.hpp"
#include "genverify/parallel.hpp"
#include "genverify/phash.hpp"
#include "genverify/rng.hpp"
#include "genverify/simnet.hpp"
#include "genverify/trainsync.hpp"

namespace genverify {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kModelDomain = 0x6d6f64656c;   // "model"
constexpr std::uint64_t kPromptDomain = 0x70726f6d7074;  // "prompt"
constexpr std::uint64_t kTrialDomain = 0x747269616c;    // "trial"
constexpr std::uint64_t kTrainDomain = 0x747261696e;    // "train"

// Reads `--config` files: nested objects map to subcommand sections, arrays
// to repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("config: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ParseError("config: top-level value must be an object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw ParseError("config: unsupported value for '" + key + "'");
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        flatten(value, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& e : value) item.inputs.push_back(scalar(e, key));
      } else {
        item.inputs.push_back(scalar(value, key));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir;
  bool check = false;
  unsigned threads = 1;
};

class CheckFailed : public Error {
 public:
  using Error::Error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

std::string with_config(const std::string& body, const json& cfg) { return body + "# config: " + cfg.dump() + "\n"; }

void emit(const Globals& g, const std::string& name, const std::string& body, const json& cfg, std::ostream& out) {
  const std::string text = with_config(body, cfg);
  out << text;
  if (!g.out_dir.empty()) write_file(fs::path(g.out_dir) / (name + ".csv"), text);
}

json base_config(const Globals& g, std::string_view command) {
  return json{{"command", command}, {"seed", g.seed}, {"threads", g.threads}, {"check", g.check}};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed("check failed: " + what);
}

// ---------------------------------------------------------------------------
// hash

struct HashOptions {
  std::vector<std::string> inputs;
  std::string kind = "ahash";
  bool all_kinds = false;
  std::string manifest;
  bool no_timing = false;
};

void cmd_hash(const Globals& g, const HashOptions& o, std::ostream& out) {
  std::vector<ManifestClass> classes;
  if (!o.manifest.empty()) classes = load_manifest(o.manifest).classes;
  if (!o.inputs.empty()) {
    ManifestClass c;
    c.prompt_id = classes.empty() ? 0 : classes.back().prompt_id + 1;
    for (const auto& p : o.inputs) c.images.emplace_back(p);
    classes.push_back(std::move(c));
  }
  if (classes.empty()) throw InvalidArgument("hash: no input images (give paths or --manifest)");

  std::vector<HashKind> kinds;
  if (o.all_kinds) {
    kinds.assign(kAllHashKinds.begin(), kAllHashKinds.end());
  } else {
    kinds.push_back(parse_hash_kind(o.kind));
  }

  struct Job {
    std::size_t cls;
    const fs::path* path;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& p : classes[c].images) jobs.push_back({c, &p});
  }
  struct Result {
    std::vector<PerceptualHash> hashes;
    std::vector<std::int64_t> micros;
  };
  std::vector<Result> results(jobs.size());
  parallel_for(jobs.size(), g.threads, [&](std::size_t i) {
    const Image img = load_image_file(*jobs[i].path);
    for (HashKind k : kinds) {
      const auto t0 = std::chrono::steady_clock::now();
      results[i].hashes.push_back(compute_hash(img, k));
      const auto t1 = std::chrono::steady_clock::now();
      results[i].micros.push_back(
          o.no_timing ? 0 : std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count());
    }
  });

  std::ostringstream csv;
  csv << "path,kind,hex_hash,elapsed_us\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      csv << jobs[i].path->string() << ',' << to_string(kinds[k]) << ',' << encode_hex(results[i].hashes[k]) << ','
          << results[i].micros[k] << '\n';
    }
  }

  csv << "class,kind,n,consensus_pct_t0,consensus_pct_t1,consensus_pct_t2,outliers,outliers_t1,outliers_t2,aDist\n";
  bool clean = true;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::size_t total_n = 0;
    std::array<std::size_t, 3> total_out{};
    double total_dist = 0.0;
    auto row = [&](const std::string& label, std::size_t n, const std::array<std::size_t, 3>& outl, double adist) {
      csv << label << ',' << to_string(kinds[k]) << ',' << n;
      for (std::size_t t = 0; t < 3; ++t) {
        csv << ',' << format_fixed(100.0 * static_cast<double>(n - outl[t]) / static_cast<double>(n), 2);
      }
      csv << ',' << outl[0] << ',' << outl[1] << ',' << outl[2] << ',' << format_fixed(adist, 3) << '\n';
    };
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<PerceptualHash> hs;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].cls == c) hs.push_back(results[i].hashes[k]);
      }
      if (hs.empty()) continue;
      std::array<std::size_t, 3> outl{};
      double adist = 0.0;
      for (int t = 0; t < 3; ++t) {
        const ToleranceDecision d = tolerant_mode(hs, t);
        outl[static_cast<std::size_t>(t)] = d.outliers.size();
        if (t == 0) adist = d.avg_outlier_distance;
      }
      clean = clean && outl[2] == 0;
      total_n += hs.size();
      for (std::size_t t = 0; t < 3; ++t) total_out[t] += outl[t];
      total_dist += adist * static_cast<double>(outl[0]);
      row(std::to_string(classes[c].prompt_id), hs.size(), outl, adist);
    }
    row("all", total_n, total_out, total_out[0] == 0 ? 0.0 : total_dist / static_cast<double>(total_out[0]));
  }

  json cfg = base_config(g, "hash");
  cfg["inputs"] = o.inputs;
  cfg["manifest"] = o.manifest;
  std::vector<std::string> kind_names;
  for (HashKind k : kinds) kind_names.emplace_back(to_string(k));
  cfg["kinds"] = kind_names;
  emit(g, "hash", csv.str(), cfg, out);
  if (g.check) require(clean, "a class has outliers at tolerance 2");
}

// ---------------------------------------------------------------------------
// prob

struct ProbOptions {
  std::vector<double> p{0.977};
  std::vector<int> n{3, 5, 7};
  std::string rule = "majority";
  std::optional<double> target;
  int n_max = 101;
};

void cmd_prob(const Globals& g, const ProbOptions& o, std::ostream& out) {
  const QuorumRule rule = parse_quorum_rule(o.rule);
  for (double p : o.p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("prob: p must lie in [0, 1], got " + format_shortest(p));
  }
  for (int n : o.n) {
    if (n < 1) throw InvalidArgument("prob: n must be >= 1");
  }
  if (o.target && !(*o.target >= 0.0 && *o.target <= 1.0)) throw InvalidArgument("prob: target must lie in [0, 1]");
  if (o.n_max < 1) throw InvalidArgument("prob: n-max must be >= 1");

  std::ostringstream csv;
  write_probability_csv(csv, probability_table(o.p, o.n, rule));
  bool found_all = true;
  if (o.target) {
    csv << "p,rule,target,min_verifiers\n";
    for (double p : o.p) {
      const auto m = min_verifiers(p, rule, *o.target, o.n_max);
      found_all = found_all && m.has_value();
      csv << format_shortest(p) << ',' << to_string(rule) << ',' << format_shortest(*o.target) << ','
          << (m ? std::to_string(*m) : std::string("none")) << '\n';
    }
  }
  json cfg = base_config(g, "prob");
  cfg["p"] = o.p;
  cfg["n"] = o.n;
  cfg["rule"] = to_string(rule);
  cfg["target"] = o.target ? json(*o.target) : json(nullptr);
  cfg["n_max"] = o.n_max;
  emit(g, "prob", csv.str(), cfg, out);
  if (g.check) require(found_all, "no verifier count up to n-max reaches the target");
}

// ---------------------------------------------------------------------------
// collide

struct CollideOptions {
  int classes = 100;
  int per_class = 50;
  std::string kind = "ahash";
  std::vector<int> tolerances{0, 1, 2};
  std::string manifest;
  int image_size = 128;
  double max_rate = 0.001;
};

void cmd_collide(const Globals& g, const CollideOptions& o, std::ostream& out) {
  const HashKind kind = parse_hash_kind(o.kind);
  if (o.tolerances.empty()) throw InvalidArgument("collide: no tolerances");
  CollisionReport report;
  if (!o.manifest.empty()) {
    const CorpusManifest m = load_manifest(o.manifest);
    report = collision_report(hash_manifest(m, kind, g.threads), o.tolerances, g.threads);
  } else {
    if (o.classes < 1) throw InvalidArgument("collide: classes must be >= 1");
    if (o.per_class < 2) throw InvalidArgument("collide: per-class must be >= 2");
    if (o.image_size < 9) throw InvalidArgument("collide: image-size must be >= 9");
    GeneratorConfig gen;
    gen.width = gen.height = o.image_size;
    report = collision_experiment(o.classes, o.per_class, kind, o.tolerances, g.seed, gen, g.threads);
  }

  std::ostringstream csv;
  write_collision_csv(csv, report);
  csv << "tolerance,comparisons,collisions,rate\n";
  const CollisionStats& agg = report.aggregate;
  bool ok = true;
  std::map<int, double> by_tol;
  for (std::size_t i = 0; i < agg.tolerances.size(); ++i) {
    csv << agg.tolerances[i] << ',' << agg.comparisons << ',' << agg.collisions[i] << ',' << format_shortest(agg.rate(i))
        << '\n';
    by_tol[agg.tolerances[i]] = agg.rate(i);
    if (agg.tolerances[i] <= 2 && !(agg.rate(i) < o.max_rate)) ok = false;
  }
  double prev = -1.0;
  for (const auto& [t, r] : by_tol) {
    if (r < prev) ok = false;
    prev = r;
  }

  json cfg = base_config(g, "collide");
  cfg["kind"] = to_string(kind);
  cfg["tolerances"] = o.tolerances;
  if (o.manifest.empty()) {
    cfg["classes"] = o.classes;
    cfg["per_class"] = o.per_class;
    cfg["image_size"] = o.image_size;
  } else {
    cfg["manifest"] = o.manifest;
  }
  cfg["max_rate"] = o.max_rate;
  emit(g, "collide", csv.str(), cfg, out);
  if (g.check) require(ok, "collision rate at tolerance <= 2 reaches max-rate, or rates are not monotone");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  int n_verifiers = 3;
  std::string rule = "majority";
  int tolerance = 2;
  std::string adversary = "none";
  std::uint64_t trials = 1000;
  std::optional<double> emulate_p;
  double flip_rate = 0.0;
  std::string kind = "ahash";
  double min_detect = 0.999;
};

bool within_3_sigma(double empirical, double q, std::uint64_t trials) {
  const double sigma = std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
  return std::abs(empirical - q) <= 3.0 * sigma;
}

void cmd_simulate(const Globals& g, const SimulateOptions& o, std::ostream& out) {
  const QuorumRule rule = parse_quorum_rule(o.rule);
  if (o.trials < 1) throw InvalidArgument("simulate: trials must be >= 1");
  json cfg = base_config(g, "simulate");
  cfg["n_verifiers"] = o.n_verifiers;
  cfg["rule"] = to_string(rule);
  cfg["trials"] = o.trials;
  std::ostringstream csv;
  bool ok = true;

  if (o.emulate_p) {
    const double p = *o.emulate_p;
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("simulate: emulate-p must lie in [0, 1]");
    if (o.n_verifiers < 1) throw InvalidArgument("simulate: n-verifiers must be >= 1");
    const MonteCarloRow row = monte_carlo_row(p, o.n_verifiers, rule, o.trials, g.seed, g.threads);
    write_monte_carlo_csv(csv, std::span<const MonteCarloRow>(&row, 1));
    ok = within_3_sigma(row.empirical, row.closed_form, row.trials);
    cfg["emulate_p"] = p;
  } else {
    SimulationConfig sc;
    sc.n_verifiers = o.n_verifiers;
    sc.rule = rule;
    sc.tolerance = o.tolerance;
    sc.worker = parse_node_kind(o.adversary);
    sc.flip_rate = o.flip_rate;
    sc.kind = parse_hash_kind(o.kind);
    sc.trials = o.trials;
    sc.seed = g.seed;
    sc.threads = g.threads;
    if (!(o.flip_rate >= 0.0 && o.flip_rate <= 1.0)) throw InvalidArgument("simulate: flip-rate must lie in [0, 1]");
    const SimulationSummary s = simulate_rounds(sc);
    csv << "n_verifiers,rule,tolerance,adversary,flip_rate,trials,accepted,acceptance_rate,closed_form_acceptance,"
           "verifier_match_rate,fraud_rounds,fraud_detected,fraud_detection_rate,honest_flagged\n";
    csv << sc.n_verifiers << ',' << to_string(rule) << ',' << sc.tolerance << ',' << to_string(sc.worker) << ','
        << format_shortest(sc.flip_rate) << ',' << s.trials << ',' << s.accepted << ','
        << format_shortest(s.acceptance_rate) << ',' << format_fixed(s.closed_form_acceptance, 6) << ','
        << format_shortest(s.verifier_match_rate) << ',' << s.fraud_rounds << ',' << s.fraud_detected << ','
        << format_shortest(s.fraud_detection_rate) << ',' << s.honest_flagged << '\n';
    if (s.fraud_rounds > 0) {
      ok = s.fraud_detection_rate >= o.min_detect;
    } else {
      ok = within_3_sigma(s.acceptance_rate, s.closed_form_acceptance, s.trials);
    }
    cfg["tolerance"] = sc.tolerance;
    cfg["adversary"] = to_string(sc.worker);
    cfg["flip_rate"] = sc.flip_rate;
    cfg["kind"] = to_string(sc.kind);
    cfg["min_detect"] = o.min_detect;
  }
  emit(g, "simulate", csv.str(), cfg, out);
  if (g.check) require(ok, "simulated rates disagree with the closed form or miss the detection floor");
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOptions {
  std::string strategy = "all";
  std::vector<int> beams{5, 10};
  std::vector<int> max_tokens{30, 60};
  int runs = 100;
  double jitter = 1e-6;
  int vocab = 128;
  int context_window = 8;
  double temperature = 1.0;
  int prompt_len = 4;
};

void cmd_decode(const Globals& g, const DecodeOptions& o, std::ostream& out) {
  if (o.strategy != "all" && o.strategy != "greedy" && o.strategy != "beam" && o.strategy != "multinomial") {
    throw InvalidArgument("decode: unknown strategy '" + o.strategy + "'");
  }
  if (o.max_tokens.empty()) throw InvalidArgument("decode: no max-tokens values");
  if (o.prompt_len < 0) throw InvalidArgument("decode: prompt-len must be >= 0");
  const ToyLM model(o.vocab, o.context_window, derive_seed({g.seed, kModelDomain}));
  CounterRng prompt_rng(derive_seed({g.seed, kPromptDomain}));
  std::vector<Token> prompt;
  for (int i = 0; i < o.prompt_len; ++i) {
    prompt.push_back(static_cast<Token>(prompt_rng.below(static_cast<std::uint64_t>(o.vocab))));
  }

  struct Spec {
    std::string label;
    DecodeStrategy strategy;
    int max_tokens;
  };
  std::vector<Spec> specs;
  const bool all = o.strategy == "all";
  const std::vector<int> head{o.max_tokens.front()};
  if (all || o.strategy == "greedy") {
    for (int m : o.max_tokens) specs.push_back({"greedy", Greedy{}, m});
  }
  if (all || o.strategy == "beam") {
    for (int m : all ? head : o.max_tokens) {
      for (int w : o.beams) specs.push_back({"beam" + std::to_string(w), Beam{w}, m});
    }
  }
  if (all || o.strategy == "multinomial") {
    for (int m : all ? head : o.max_tokens) specs.push_back({"multinomial", Multinomial{o.temperature, 0}, m});
  }

  std::vector<DeterminismRow> rows(specs.size());
  parallel_for(specs.size(), g.threads, [&](std::size_t i) {
    DecodeConfig cfg;
    cfg.strategy = specs[i].strategy;
    cfg.max_tokens = specs[i].max_tokens;
    cfg.jitter = o.jitter;
    rows[i] = determinism_trial(model, prompt, specs[i].label, cfg, o.runs, derive_seed({g.seed, kTrialDomain, i}));
  });

  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool sampled = std::holds_alternative<Multinomial>(specs[i].strategy);
    if (!sampled && !rows[i].deterministic) ok = false;
    if (sampled && o.runs >= 2 && rows[i].deterministic) ok = false;
  }

  std::ostringstream csv;
  write_determinism_csv(csv, rows);
  json cfg = base_config(g, "decode");
  cfg["strategy"] = o.strategy;
  cfg["beams"] = o.beams;
  cfg["max_tokens"] = o.max_tokens;
  cfg["runs"] = o.runs;
  cfg["jitter"] = o.jitter;
  cfg["vocab"] = o.vocab;
  cfg["context_window"] = o.context_window;
  cfg["temperature"] = o.temperature;
  cfg["prompt"] = prompt;
  emit(g, "decode", csv.str(), cfg, out);
  if (g.check) require(ok, "a greedy/beam row was non-deterministic or a multinomial row was deterministic");
}

// ---------------------------------------------------------------------------
// trainsim

struct TrainsimOptions {
  std::string mode = "ablate";
  std::uint64_t task_seed = 0;
  std::optional<double> jitter;
  int resync_every = 300;
  int dim = 768;
  int steps = 2000;
  int checkpoint_every = 50;
  double learning_rate = 5e-4;
  int batch = 4;
  int exemplars = 5;
};

void cmd_trainsim(const Globals& g, const TrainsimOptions& o, std::ostream& out) {
  if (o.mode != "deter" && o.mode != "ablate" && o.mode != "sync") {
    throw InvalidArgument("trainsim: unknown mode '" + o.mode + "' (expected deter, ablate or sync)");
  }
  const double jitter = o.jitter ? *o.jitter : (o.mode == "sync" ? 1e-5 : 0.0);
  TrainConfig tc;
  tc.dim = o.dim;
  tc.max_steps = o.steps;
  tc.checkpoint_every = o.checkpoint_every;
  tc.learning_rate = o.learning_rate;
  tc.batch_size = o.batch;
  tc.exemplar_count = o.exemplars;
  tc.validate();
  const std::uint64_t entropy = derive_seed({g.seed, kTrainDomain});

  std::vector<TrainingRun> runs = ablation_runs(o.task_seed, jitter);
  if (o.mode != "ablate") runs.resize(o.mode == "deter" ? 3 : 2);
  std::vector<Trajectory> trajs = train_all(o.task_seed, tc, runs, entropy, g.threads);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  bool ok = true;
  if (o.mode == "sync") {
    const SyncPolicy policy{o.resync_every, trajs[0].run_id};
    std::vector<Trajectory> synced(3);
    parallel_for(synced.size(), g.threads, [&](std::size_t j) {
      synced[j] = train_synced(o.task_seed, tc, runs[0].stoch, policy, trajs[0], "SyncDeter" + std::to_string(j + 1),
                               derive_seed({entropy, runs.size() + j}));
    });
    for (auto& s : synced) trajs.push_back(std::move(s));
    for (std::size_t i = 1; i < trajs.size(); ++i) pairs.emplace_back(0, i);
    const double unsynced_final = drift(trajs[0], trajs[1]).back().distance;
    for (std::size_t i = 2; i < trajs.size(); ++i) {
      const auto d = drift(trajs[0], trajs[i]);
      for (const auto& p : d) {
        if (p.step % o.resync_every == 0 && p.distance != 0.0) ok = false;
      }
      if (!(d.back().distance < unsynced_final)) ok = false;
    }
  } else if (o.mode == "deter") {
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      for (std::size_t j = i + 1; j < trajs.size(); ++j) pairs.emplace_back(i, j);
    }
    if (jitter == 0.0) {
      for (const auto& [a, b] : pairs) {
        for (const auto& p : drift(trajs[a], trajs[b])) ok = ok && p.distance == 0.0;
      }
    }
  } else {
    for (std::size_t i = 1; i < trajs.size(); ++i) pairs.emplace_back(0, i);
    for (std::size_t i = 1; i < trajs.size(); ++i) {
      const double final_drift = drift(trajs[0], trajs[i]).back().distance;
      if (i < 3 && jitter == 0.0 && final_drift != 0.0) ok = false;
      if (i >= 3 && !(final_drift > 0.0)) ok = false;
    }
  }

  std::ostringstream drift_csv;
  bool header = true;
  for (const auto& [a, b] : pairs) {
    write_drift_csv(drift_csv, trajs[a].run_id, trajs[b].run_id, drift(trajs[a], trajs[b]), header);
    header = false;
  }
  std::ostringstream traj_csv;
  write_trajectory_csv(traj_csv, trajs);
  std::ostringstream pca_csv;
  const PcaResult pca = pca_project(trajs);
  write_pca_csv(pca_csv, pca.points);

  json cfg = base_config(g, "trainsim");
  cfg["mode"] = o.mode;
  cfg["task_seed"] = o.task_seed;
  cfg["jitter"] = jitter;
  cfg["resync_every"] = o.resync_every;
  cfg["dim"] = tc.dim;
  cfg["steps"] = tc.max_steps;
  cfg["checkpoint_every"] = tc.checkpoint_every;
  cfg["learning_rate"] = tc.learning_rate;
  cfg["batch"] = tc.batch_size;
  cfg["exemplars"] = tc.exemplar_count;

  const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  write_file(dir / "trajectories.csv", with_config(traj_csv.str(), cfg));
  write_file(dir / "drift.csv", with_config(drift_csv.str(), cfg));
  write_file(dir / "pca.csv", with_config(pca_csv.str(), cfg));
  out << with_config(drift_csv.str(), cfg);
  if (g.check) require(ok, "trajectory drift violates the " + o.mode + " expectations");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reproducibility and consensus experiments for generative AI verification", "genverify"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON config file; command-line flags override it");

  Globals g;
  app.add_option("--seed", g.seed, "Master seed for every randomized stream")->capture_default_str();
  app.add_option("--out", g.out_dir, "Directory that receives CSV reports");
  app.add_flag("--check", g.check, "Exit nonzero when the experiment's property check fails");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  HashOptions ho;
  auto* hash = app.add_subcommand("hash", "Perceptual hashes of images and per-class tolerant consensus");
  hash->add_option("inputs", ho.inputs, "PPM or PNG image paths");
  hash->add_option("--kind", ho.kind, "ahash, phash, dhash or chash")->capture_default_str();
  hash->add_flag("--all-kinds", ho.all_kinds, "Compute all four hash kinds");
  hash->add_option("--manifest", ho.manifest, "JSON corpus manifest");
  hash->add_flag("--no-timing", ho.no_timing, "Report elapsed_us as 0");

  ProbOptions po;
  auto* prob = app.add_subcommand("prob", "Closed-form quorum probabilities");
  prob->add_option("--p", po.p, "Per-verifier match probabilities")->delimiter(',')->capture_default_str();
  prob->add_option("--n,--n-range", po.n, "Verifier counts")->delimiter(',')->capture_default_str();
  prob->add_option("--rule", po.rule, "majority or super")->capture_default_str();
  prob->add_option("--target", po.target, "Report the smallest n reaching this probability");
  prob->add_option("--n-max", po.n_max, "Search bound for --target")->capture_default_str();

  CollideOptions co;
  auto* collide = app.add_subcommand("collide", "Intra-class perceptual hash collision rates");
  collide->add_option("--classes", co.classes)->capture_default_str();
  collide->add_option("--per-class", co.per_class)->capture_default_str();
  collide->add_option("--kind", co.kind)->capture_default_str();
  collide->add_option("--tolerances", co.tolerances)->delimiter(',')->capture_default_str();
  collide->add_option("--manifest", co.manifest, "JSON corpus manifest instead of synthetic classes");
  collide->add_option("--image-size", co.image_size, "Synthetic image side length")->capture_default_str();
  collide->add_option("--max-rate", co.max_rate, "--check bound on the rate at tolerance <= 2")->capture_default_str();

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Verification rounds with honest or adversarial workers");
  simulate->add_option("--n-verifiers,--n", so.n_verifiers)->capture_default_str();
  simulate->add_option("--rule", so.rule)->capture_default_str();
  simulate->add_option("--tolerance", so.tolerance)->capture_default_str();
  simulate->add_option("--adversary", so.adversary, "none, guesser, lazy or noisy")->capture_default_str();
  simulate->add_option("--trials", so.trials)->capture_default_str();
  simulate->add_option("--emulate-p", so.emulate_p, "Bernoulli verifiers matching with this probability");
  simulate->add_option("--flip-rate", so.flip_rate, "Per-pixel +-1 noise rate of verifiers")->capture_default_str();
  simulate->add_option("--kind", so.kind)->capture_default_str();
  simulate->add_option("--min-detect", so.min_detect, "--check floor on the fraud-detection rate")
      ->capture_default_str();

  DecodeOptions dopt;
  auto* decode_cmd = app.add_subcommand("decode", "Determinism of decoding strategies under logit jitter");
  decode_cmd->add_option("--strategy", dopt.strategy, "greedy, beam, multinomial or all")->capture_default_str();
  decode_cmd->add_option("--beams", dopt.beams)->delimiter(',')->capture_default_str();
  decode_cmd->add_option("--max-tokens", dopt.max_tokens)->delimiter(',')->capture_default_str();
  decode_cmd->add_option("--runs", dopt.runs)->capture_default_str();
  decode_cmd->add_option("--jitter", dopt.jitter)->capture_default_str();
  decode_cmd->add_option("--vocab", dopt.vocab)->capture_default_str();
  decode_cmd->add_option("--context-window", dopt.context_window)->capture_default_str();
  decode_cmd->add_option("--temperature", dopt.temperature)->capture_default_str();
  decode_cmd->add_option("--prompt-len", dopt.prompt_len)->capture_default_str();

  TrainsimOptions to;
  auto* trainsim = app.add_subcommand("trainsim", "Simulated embedding fine-tunes: ablation and resync");
  trainsim->add_option("--mode", to.mode, "deter, ablate or sync")->capture_default_str();
  trainsim->add_option("--task-seed", to.task_seed)->capture_default_str();
  trainsim->add_option("--jitter", to.jitter, "Hardware jitter amplitude (default 0, or 1e-5 in sync mode)");
  trainsim->add_option("--resync-every", to.resync_every)->capture_default_str();
  trainsim->add_option("--dim", to.dim)->capture_default_str();
  trainsim->add_option("--steps", to.steps)->capture_default_str();
  trainsim->add_option("--checkpoint-every", to.checkpoint_every)->capture_default_str();
  trainsim->add_option("--lr", to.learning_rate)->capture_default_str();
  trainsim->add_option("--batch", to.batch)->capture_default_str();
  trainsim->add_option("--exemplars", to.exemplars)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "genverify: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (hash->parsed()) cmd_hash(g, ho, out);
    if (prob->parsed()) cmd_prob(g, po, out);
    if (collide->parsed()) cmd_collide(g, co, out);
    if (simulate->parsed()) cmd_simulate(g, so, out);
    if (decode_cmd->parsed()) cmd_decode(g, dopt, out);
    if (trainsim->parsed()) cmd_trainsim(g, to, out);
  } catch (const CheckFailed& e) {
    err << "genverify: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "genverify: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}

}  // namespace genverify
