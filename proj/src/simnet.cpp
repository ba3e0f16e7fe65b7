#include "genverify/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "genverify/error.hpp"
#include "genverify/format.hpp"
#include "genverify/parallel.hpp"
#include "genverify/rng.hpp"

namespace genverify {

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::Honest: return "honest";
    case NodeKind::NoisyHonest: return "noisy";
    case NodeKind::MaliciousGuesser: return "guesser";
    case NodeKind::Lazy: return "lazy";
  }
  return "unknown";
}

NodeKind parse_node_kind(std::string_view name) {
  if (name == "honest" || name == "none") return NodeKind::Honest;
  if (name == "noisy") return NodeKind::NoisyHonest;
  if (name == "guesser" || name == "malicious") return NodeKind::MaliciousGuesser;
  if (name == "lazy") return NodeKind::Lazy;
  throw InvalidArgument("unknown node kind '" + std::string(name) + "' (expected honest, noisy, guesser or lazy)");
}

namespace {

constexpr std::uint64_t kClassDomain = 0x636c617373ULL;  // "class"
constexpr std::uint64_t kNoiseDomain = 0x6e6f697365ULL;  // "noise"
constexpr Rgb kLazyColor{128, 128, 128};

bool is_honest(NodeKind kind) { return kind == NodeKind::Honest || kind == NodeKind::NoisyHonest; }

struct Field {
  int width;
  int height;
  std::vector<double> r, g, b;

  Field(int w, int h, double r0, double g0, double b0)
      : width(w), height(h), r(static_cast<std::size_t>(w) * h, r0), g(r.size(), g0), b(r.size(), b0) {}

  void add_blobs(CounterRng& rng, int count, double amplitude) {
    std::vector<double> gx(static_cast<std::size_t>(width));
    std::vector<double> gy(static_cast<std::size_t>(height));
    for (int k = 0; k < count; ++k) {
      const double cx = rng.uniform(0.0, width);
      const double cy = rng.uniform(0.0, height);
      const double sigma = rng.uniform(width / 12.0, width / 4.0);
      const double ar = rng.uniform(-amplitude, amplitude);
      const double ag = rng.uniform(-amplitude, amplitude);
      const double ab = rng.uniform(-amplitude, amplitude);
      const double inv = 1.0 / (2.0 * sigma * sigma);
      for (int x = 0; x < width; ++x) gx[x] = std::exp(-(x + 0.5 - cx) * (x + 0.5 - cx) * inv);
      for (int y = 0; y < height; ++y) gy[y] = std::exp(-(y + 0.5 - cy) * (y + 0.5 - cy) * inv);
      for (int y = 0; y < height; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * width;
        const double wy = gy[y];
        for (int x = 0; x < width; ++x) {
          const double w = wy * gx[x];
          r[row + x] += ar * w;
          g[row + x] += ag * w;
          b[row + x] += ab * w;
        }
      }
    }
  }

  static std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5); }

  Image to_image() const {
    std::vector<Rgb> px(r.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {quantize(r[i]), quantize(g[i]), quantize(b[i])};
    return Image(width, height, std::move(px));
  }
};

void add_pixel_noise(Image& img, double rate, std::uint64_t node_seed) {
  if (rate <= 0.0) return;
  CounterRng rng(derive_seed({node_seed, kNoiseDomain}));
  for (Rgb& p : img.pixels()) {
    if (!rng.bernoulli(rate)) continue;
    const int delta = rng.below(2) == 0 ? -1 : 1;
    auto bump = [delta](std::uint8_t& c) { c = static_cast<std::uint8_t>(std::clamp(c + delta, 0, 255)); };
    bump(p.r);
    bump(p.g);
    bump(p.b);
  }
}

}  // namespace

SyntheticGenerator::SyntheticGenerator(GeneratorConfig config) : config_(config) {
  if (config_.width < 1 || config_.height < 1) throw InvalidArgument("generator size must be positive");
  if (config_.class_blobs < 0 || config_.seed_blobs < 0) throw InvalidArgument("blob counts must be non-negative");
}

Image SyntheticGenerator::render(std::int64_t prompt_id, std::uint64_t seed) const {
  const std::uint64_t class_key = derive_seed({kClassDomain, static_cast<std::uint64_t>(prompt_id)});
  CounterRng class_rng(class_key);
  CounterRng image_rng(derive_seed({class_key, seed}));
  Field f(config_.width, config_.height, class_rng.uniform(60.0, 196.0), class_rng.uniform(60.0, 196.0),
          class_rng.uniform(60.0, 196.0));
  f.add_blobs(class_rng, config_.class_blobs, 60.0);
  f.add_blobs(image_rng, config_.seed_blobs, 110.0);
  return f.to_image();
}

Image SyntheticGenerator::generate(std::int64_t prompt_id, std::uint64_t seed, const NodeProfile& node) const {
  switch (node.kind) {
    case NodeKind::Honest:
      return render(prompt_id, seed);
    case NodeKind::NoisyHonest: {
      if (!(node.flip_rate >= 0.0 && node.flip_rate <= 1.0)) throw InvalidArgument("flip_rate must be in [0, 1]");
      Image img = render(prompt_id, seed);
      add_pixel_noise(img, node.flip_rate, node.seed);
      return img;
    }
    case NodeKind::MaliciousGuesser:
      return render(prompt_id, node.seed);
    case NodeKind::Lazy:
      return Image(config_.width, config_.height, kLazyColor);
  }
  throw InvalidArgument("unknown node kind");
}

RoundOutcome run_round(const SyntheticGenerator& gen, const Task& task, std::span<const NodeProfile> workers,
                       std::span<const NodeProfile> verifiers, QuorumRule rule) {
  if (workers.empty()) throw InvalidArgument("run_round: need at least one worker");
  if (verifiers.size() < 2) throw InvalidArgument("run_round: need at least two verifiers");

  std::vector<VerifierReport> reports;
  reports.reserve(workers.size() + verifiers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) {
    reports.push_back({"worker-" + std::to_string(i),
                       compute_hash(gen.generate(task.prompt_id, task.seed, workers[i]), task.hash_kind)});
  }
  for (std::size_t j = 0; j < verifiers.size(); ++j) {
    reports.push_back({"verifier-" + std::to_string(j),
                       compute_hash(gen.generate(task.prompt_id, task.seed, verifiers[j]), task.hash_kind)});
  }

  RoundOutcome out;
  out.task_id = task.task_id;
  out.decision = decide(reports, task.tolerance, rule);
  out.ground_truth_honest = std::all_of(workers.begin(), workers.end(), [](const NodeProfile& w) { return is_honest(w.kind); });
  if (out.decision.accepted) {
    const auto& dissent = out.decision.dissenting_ids;
    for (std::size_t i = 0; i < workers.size(); ++i) {
      const std::string& id = reports[i].verifier_id;
      if (!std::binary_search(dissent.begin(), dissent.end(), id)) continue;
      out.flagged_workers.push_back(id);
      if (!is_honest(workers[i].kind)) out.detected_fraud = true;
    }
  }
  out.reports = std::move(reports);
  return out;
}

namespace {

constexpr std::uint64_t kMonteCarloChunk = 1U << 16;

}  // namespace

double monte_carlo_type1(double p, int n, QuorumRule rule, std::uint64_t trials, std::uint64_t seed,
                         unsigned threads) {
  if (trials < 1) throw InvalidArgument("monte_carlo_type1: trials must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must be in [0, 1]");
  const int k_min = quorum_threshold(n, rule);
  const std::uint64_t chunks = (trials + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<std::uint64_t> accepted(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    CounterRng rng(derive_seed({seed, c}));
    const std::uint64_t begin = c * kMonteCarloChunk;
    const std::uint64_t end = std::min(trials, begin + kMonteCarloChunk);
    std::uint64_t hits = 0;
    for (std::uint64_t t = begin; t < end; ++t) {
      int matched = 0;
      for (int v = 0; v < n; ++v) matched += rng.bernoulli(p) ? 1 : 0;
      hits += matched >= k_min ? 1 : 0;
    }
    accepted[c] = hits;
  });
  std::uint64_t total = 0;
  for (auto a : accepted) total += a;
  return static_cast<double>(total) / static_cast<double>(trials);
}

MonteCarloRow monte_carlo_row(double p, int n, QuorumRule rule, std::uint64_t trials, std::uint64_t seed,
                              unsigned threads) {
  MonteCarloRow row{p, n, rule, trials};
  row.empirical = monte_carlo_type1(p, n, rule, trials, seed, threads);
  row.closed_form = quorum_probability({p, n, rule});
  row.abs_err = std::abs(row.empirical - row.closed_form);
  return row;
}

void write_monte_carlo_csv(std::ostream& out, std::span<const MonteCarloRow> rows) {
  out << "p,n,rule,trials,empirical,closed_form,abs_err\n";
  for (const auto& r : rows) {
    out << format_shortest(r.p) << ',' << r.n << ',' << to_string(r.rule) << ',' << r.trials << ','
        << format_fixed(r.empirical, 6) << ',' << format_fixed(r.closed_form, 6) << ',' << format_fixed(r.abs_err, 6)
        << '\n';
  }
}

double round_acceptance_probability(double p, int n_verifiers, bool worker_matches, QuorumRule rule) {
  const int k_min = quorum_threshold(n_verifiers + 1, rule) - (worker_matches ? 1 : 0);
  double sum = 0.0;
  for (int k = std::max(k_min, 0); k <= n_verifiers; ++k) sum += binomial_pmf(n_verifiers, k, p);
  return std::min(sum, 1.0);
}

SimulationSummary simulate_rounds(const SimulationConfig& config) {
  if (config.trials < 1) throw InvalidArgument("simulate: trials must be >= 1");
  if (config.n_verifiers < 2) throw InvalidArgument("simulate: need at least two verifiers");
  if (config.tolerance < 0) throw InvalidArgument("simulate: negative tolerance");
  const SyntheticGenerator gen(config.generator);

  struct TrialResult {
    bool accepted = false;
    bool detected = false;
    bool honest_flagged = false;
    int verifier_matches = 0;
  };
  std::vector<TrialResult> results(config.trials);

  parallel_for(config.trials, config.threads, [&](std::size_t t) {
    const Task task{static_cast<std::int64_t>(t), static_cast<std::int64_t>(t % 1000),
                    derive_seed({config.seed, t, 1}), config.kind, config.tolerance};
    const NodeProfile worker{config.worker, config.flip_rate, derive_seed({config.seed, t, 2})};
    std::vector<NodeProfile> verifiers;
    for (int v = 0; v < config.n_verifiers; ++v) {
      verifiers.push_back({config.flip_rate > 0.0 ? NodeKind::NoisyHonest : NodeKind::Honest, config.flip_rate,
                           derive_seed({config.seed, t, 3 + static_cast<std::uint64_t>(v)})});
    }
    const NodeProfile workers[] = {worker};
    const RoundOutcome round = run_round(gen, task, workers, verifiers, config.rule);

    const PerceptualHash reference = compute_hash(gen.render(task.prompt_id, task.seed), task.hash_kind);
    TrialResult r;
    r.accepted = round.decision.accepted;
    r.detected = round.detected_fraud;
    r.honest_flagged = round.ground_truth_honest && !round.flagged_workers.empty();
    // Match rate is measured against the honest reference, not the voted mode.
    for (std::size_t v = 1; v < round.reports.size(); ++v) {
      r.verifier_matches += hamming_unchecked(round.reports[v].hash, reference) <= task.tolerance ? 1 : 0;
    }
    results[t] = r;
  });

  SimulationSummary s;
  s.trials = config.trials;
  std::uint64_t matches = 0;
  const bool dishonest_worker = !is_honest(config.worker);
  for (const auto& r : results) {
    s.accepted += r.accepted ? 1 : 0;
    s.fraud_detected += r.detected ? 1 : 0;
    s.honest_flagged += r.honest_flagged ? 1 : 0;
    matches += static_cast<std::uint64_t>(r.verifier_matches);
  }
  s.fraud_rounds = dishonest_worker ? config.trials : 0;
  s.acceptance_rate = static_cast<double>(s.accepted) / static_cast<double>(s.trials);
  s.fraud_detection_rate =
      s.fraud_rounds == 0 ? 0.0 : static_cast<double>(s.fraud_detected) / static_cast<double>(s.fraud_rounds);
  s.verifier_match_rate =
      static_cast<double>(matches) / (static_cast<double>(s.trials) * static_cast<double>(config.n_verifiers));
  s.closed_form_acceptance =
      round_acceptance_probability(s.verifier_match_rate, config.n_verifiers, !dishonest_worker, config.rule);
  return s;
}

// ---------------------------------------------------------------------------
// Collisions

void CollisionStats::merge(const CollisionStats& other) {
  if (tolerances.empty() && comparisons == 0) {
    tolerances = other.tolerances;
    collisions.assign(other.collisions.size(), 0);
  }
  if (other.tolerances != tolerances) throw InvalidArgument("cannot merge collision stats with different tolerances");
  comparisons += other.comparisons;
  for (std::size_t i = 0; i < collisions.size(); ++i) collisions[i] += other.collisions[i];
}

CollisionStats count_collisions(std::span<const PerceptualHash> hashes, std::span<const int> tolerances) {
  CollisionStats s;
  s.tolerances.assign(tolerances.begin(), tolerances.end());
  s.collisions.assign(tolerances.size(), 0);
  if (tolerances.empty()) throw InvalidArgument("count_collisions: no tolerances");
  for (int t : tolerances) {
    if (t < 0) throw InvalidArgument("count_collisions: negative tolerance");
  }
  for (std::size_t i = 1; i < hashes.size(); ++i) {
    if (hashes[i].kind() != hashes[0].kind()) throw InvalidArgument("count_collisions: mixed hash kinds");
  }
  const std::size_t n = hashes.size();
  s.comparisons = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (n < 2) return s;

  const int max_t = *std::max_element(tolerances.begin(), tolerances.end());
  const int bits = hashes[0].bits();
  // Histogram of distances up to max_t, then prefix sums per tolerance.
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(std::min(max_t, bits)) + 1, 0);
  const int cap = static_cast<int>(hist.size()) - 1;

  if (hashes[0].word_count() == 1) {
    std::vector<std::uint64_t> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = hashes[i].word(0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::uint64_t wi = w[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        const int d = std::popcount(wi ^ w[j]);
        if (d <= cap) ++hist[static_cast<std::size_t>(d)];
      }
    }
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const int d = hamming_unchecked(hashes[i], hashes[j]);
        if (d <= cap) ++hist[static_cast<std::size_t>(d)];
      }
    }
  }
  for (std::size_t k = 0; k < tolerances.size(); ++k) {
    const int t = std::min(tolerances[k], cap);
    std::uint64_t c = 0;
    for (int d = 0; d <= t; ++d) c += hist[static_cast<std::size_t>(d)];
    s.collisions[k] = c;
  }
  return s;
}

CollisionReport collision_report(std::span<const ClassHashes> classes, std::span<const int> tolerances,
                                 unsigned threads) {
  CollisionReport report;
  report.classes.resize(classes.size());
  parallel_for(classes.size(), threads, [&](std::size_t c) {
    report.classes[c] = {classes[c].class_id, count_collisions(classes[c].hashes, tolerances)};
  });
  report.aggregate.tolerances.assign(tolerances.begin(), tolerances.end());
  report.aggregate.collisions.assign(tolerances.size(), 0);
  for (const auto& c : report.classes) report.aggregate.merge(c.stats);
  return report;
}

CollisionReport collision_experiment(const SyntheticGenerator& gen, std::span<const ClassSeeds> classes,
                                     HashKind kind, std::span<const int> tolerances, unsigned threads) {
  std::vector<ClassHashes> hashed(classes.size());
  parallel_for(classes.size(), threads, [&](std::size_t c) {
    hashed[c].class_id = classes[c].prompt_id;
    hashed[c].hashes.reserve(classes[c].seeds.size());
    for (std::uint64_t s : classes[c].seeds) hashed[c].hashes.push_back(compute_hash(gen.render(classes[c].prompt_id, s), kind));
  });
  return collision_report(hashed, tolerances, threads);
}

CollisionReport collision_experiment(int classes, int per_class, HashKind kind, std::span<const int> tolerances,
                                     std::uint64_t seed, const GeneratorConfig& gen, unsigned threads) {
  if (classes < 1) throw InvalidArgument("collision experiment needs at least one class");
  if (per_class < 2) throw InvalidArgument("collision experiment needs per_class >= 2");
  std::vector<ClassSeeds> specs(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    specs[c].prompt_id = c;
    for (int i = 0; i < per_class; ++i) {
      specs[c].seeds.push_back(derive_seed({seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)}));
    }
  }
  return collision_experiment(SyntheticGenerator(gen), specs, kind, tolerances, threads);
}

void write_collision_csv(std::ostream& out, const CollisionReport& report) {
  out << "class_id,comparisons";
  for (int t : report.aggregate.tolerances) out << ",collisions_t" << t;
  out << '\n';
  auto row = [&out](const std::string& id, const CollisionStats& s) {
    out << id << ',' << s.comparisons;
    for (auto c : s.collisions) out << ',' << c;
    out << '\n';
  };
  for (const auto& c : report.classes) row(std::to_string(c.class_id), c.stats);
  row("all", report.aggregate);
}

// ---------------------------------------------------------------------------
// Manifest

CorpusManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array()) {
    throw ParseError("manifest: expected an object with a \"classes\" array");
  }
  CorpusManifest m;
  for (const auto& cls : doc["classes"]) {
    if (!cls.is_object() || !cls.contains("prompt_id") || !cls["prompt_id"].is_number_integer()) {
      throw ParseError("manifest: every class needs an integer \"prompt_id\"");
    }
    if (!cls.contains("images") || !cls["images"].is_array()) {
      throw ParseError("manifest: every class needs an \"images\" array");
    }
    ManifestClass mc;
    mc.prompt_id = cls["prompt_id"].get<std::int64_t>();
    for (const auto& img : cls["images"]) {
      if (!img.is_string()) throw ParseError("manifest: image entries must be path strings");
      std::filesystem::path p(img.get<std::string>());
      mc.images.push_back(p.is_absolute() ? p : base_dir / p);
    }
    if (mc.images.empty()) throw ParseError("manifest: class " + std::to_string(mc.prompt_id) + " has no images");
    m.classes.push_back(std::move(mc));
  }
  if (m.classes.empty()) throw ParseError("manifest: no classes");
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str(), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<ClassHashes> hash_manifest(const CorpusManifest& manifest, HashKind kind, unsigned threads) {
  struct Job {
    std::size_t cls;
    std::size_t img;
  };
  std::vector<Job> jobs;
  std::vector<ClassHashes> out(manifest.classes.size());
  for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
    out[c].class_id = manifest.classes[c].prompt_id;
    out[c].hashes.assign(manifest.classes[c].images.size(), PerceptualHash(kind));
    for (std::size_t i = 0; i < manifest.classes[c].images.size(); ++i) jobs.push_back({c, i});
  }
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [c, i] = jobs[j];
    out[c].hashes[i] = compute_hash(load_image_file(manifest.classes[c].images[i]), kind);
  });
  return out;
}

}  // namespace genverify
