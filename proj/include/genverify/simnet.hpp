#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genverify/consensus.hpp"
#include "genverify/imaging.hpp"
#include "genverify/phash.hpp"

namespace genverify {

enum class NodeKind { Honest, NoisyHonest, MaliciousGuesser, Lazy };

std::string_view to_string(NodeKind kind) noexcept;
NodeKind parse_node_kind(std::string_view name);

/// Behavior of one simulated node. flip_rate is only read for NoisyHonest;
/// seed is the node's private randomness (noise pattern, or the guessed
/// generation seed of a MaliciousGuesser).
struct NodeProfile {
  NodeKind kind = NodeKind::Honest;
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
};

struct Task {
  std::int64_t task_id = 0;
  std::int64_t prompt_id = 0;
  std::uint64_t seed = 0;  // generation seed
  HashKind hash_kind = HashKind::AHash;
  int tolerance = 2;
};

struct GeneratorConfig {
  int width = 128;
  int height = 128;
  int class_blobs = 3;  // shared by every image of a prompt
  int seed_blobs = 6;   // specific to (prompt, seed)
};

/// Seeded procedural stand-in for a text-to-image model. Images are smooth
/// sums of separable Gaussian blobs over a prompt-keyed background, so their
/// perceptual hashes are structured rather than uniform noise.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(GeneratorConfig config = {});

  const GeneratorConfig& config() const noexcept { return config_; }

  /// Honest output for (prompt_id, seed).
  Image render(std::int64_t prompt_id, std::uint64_t seed) const;

  /// Output of `node` asked to run (prompt_id, seed).
  Image generate(std::int64_t prompt_id, std::uint64_t seed, const NodeProfile& node) const;

 private:
  GeneratorConfig config_;
};

struct RoundOutcome {
  std::int64_t task_id = 0;
  ConsensusDecision decision;
  bool ground_truth_honest = true;           // every worker is Honest or NoisyHonest
  bool detected_fraud = false;               // accepted mode excludes a dishonest worker
  std::vector<std::string> flagged_workers;  // workers outside the accepted mode's ball
  std::vector<VerifierReport> reports;       // workers first, then verifiers
};

/// One verification round: workers and verifiers all run the task, and
/// decide() is applied to the union of their hashes. Report ids are
/// "worker-<i>" and "verifier-<j>".
RoundOutcome run_round(const SyntheticGenerator& gen, const Task& task, std::span<const NodeProfile> workers,
                       std::span<const NodeProfile> verifiers, QuorumRule rule);

/// Fraction of `trials` Bernoulli rounds that reach quorum when each of n
/// verifiers independently matches with probability p. Trials are split into
/// fixed chunks with derived streams, so the result does not depend on
/// `threads`.
double monte_carlo_type1(double p, int n, QuorumRule rule, std::uint64_t trials, std::uint64_t seed,
                         unsigned threads = 1);

struct MonteCarloRow {
  double p = 0.0;
  int n = 0;
  QuorumRule rule = QuorumRule::SimpleMajority;
  std::uint64_t trials = 0;
  double empirical = 0.0;
  double closed_form = 0.0;
  double abs_err = 0.0;
};

MonteCarloRow monte_carlo_row(double p, int n, QuorumRule rule, std::uint64_t trials, std::uint64_t seed,
                              unsigned threads = 1);

/// CSV `p,n,rule,trials,empirical,closed_form,abs_err`.
void write_monte_carlo_csv(std::ostream& out, std::span<const MonteCarloRow> rows);

/// Acceptance probability of a round with n verifiers matching independently
/// with probability p plus one worker that matches iff `worker_matches`.
double round_acceptance_probability(double p, int n_verifiers, bool worker_matches, QuorumRule rule);

struct SimulationConfig {
  int n_verifiers = 3;
  QuorumRule rule = QuorumRule::SimpleMajority;
  int tolerance = 2;
  NodeKind worker = NodeKind::Honest;
  double flip_rate = 0.0;  // verifier (and NoisyHonest worker) pixel noise rate
  HashKind kind = HashKind::AHash;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  unsigned threads = 1;
};

struct SimulationSummary {
  std::uint64_t trials = 0;
  std::uint64_t accepted = 0;
  std::uint64_t fraud_rounds = 0;    // rounds whose worker is dishonest
  std::uint64_t fraud_detected = 0;
  std::uint64_t honest_flagged = 0;  // honest workers placed outside the mode
  double acceptance_rate = 0.0;
  double fraud_detection_rate = 0.0;
  double verifier_match_rate = 0.0;  // verifier hashes within tolerance of the honest reference
  double closed_form_acceptance = 0.0;
};

SimulationSummary simulate_rounds(const SimulationConfig& config);

/// Pair counts for one group of hashes, bucketed by tolerance.
struct CollisionStats {
  std::uint64_t comparisons = 0;
  std::vector<int> tolerances;
  std::vector<std::uint64_t> collisions;  // parallel to tolerances

  double rate(std::size_t i) const noexcept {
    return comparisons == 0 ? 0.0 : static_cast<double>(collisions[i]) / static_cast<double>(comparisons);
  }
  void merge(const CollisionStats& other);
};

/// Counts unordered pairs (i < j) with hamming distance <= t for each t.
CollisionStats count_collisions(std::span<const PerceptualHash> hashes, std::span<const int> tolerances);

struct ClassCollisions {
  std::int64_t class_id = 0;
  CollisionStats stats;
};

struct CollisionReport {
  std::vector<ClassCollisions> classes;
  CollisionStats aggregate;
};

struct ClassSeeds {
  std::int64_t prompt_id = 0;
  std::vector<std::uint64_t> seeds;
};

struct ClassHashes {
  std::int64_t class_id = 0;
  std::vector<PerceptualHash> hashes;
};

CollisionReport collision_report(std::span<const ClassHashes> classes, std::span<const int> tolerances,
                                 unsigned threads = 1);

/// Generates and hashes every (prompt, seed) image, then counts intra-class
/// collisions.
CollisionReport collision_experiment(const SyntheticGenerator& gen, std::span<const ClassSeeds> classes,
                                     HashKind kind, std::span<const int> tolerances, unsigned threads = 1);

/// classes x per_class synthetic images; image i of class c uses generation
/// seed derive_seed({seed, c, i}).
CollisionReport collision_experiment(int classes, int per_class, HashKind kind, std::span<const int> tolerances,
                                     std::uint64_t seed, const GeneratorConfig& gen = {}, unsigned threads = 1);

/// CSV `class_id,comparisons,collisions_t<t>...` with a final `all` row.
void write_collision_csv(std::ostream& out, const CollisionReport& report);

/// Real-image corpus: `{"classes": [{"prompt_id": int, "images": ["path", ...]}]}`.
struct ManifestClass {
  std::int64_t prompt_id = 0;
  std::vector<std::filesystem::path> images;
};

struct CorpusManifest {
  std::vector<ManifestClass> classes;
};

/// Relative image paths are resolved against `base_dir`. Throws ParseError
/// on malformed JSON or an empty class list.
CorpusManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
CorpusManifest load_manifest(const std::filesystem::path& path);

/// Loads and hashes every manifest image.
std::vector<ClassHashes> hash_manifest(const CorpusManifest& manifest, HashKind kind, unsigned threads = 1);

}  // namespace genverify
