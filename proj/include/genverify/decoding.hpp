#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "genverify/consensus.hpp"
#include "genverify/rng.hpp"

namespace genverify {

using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

/// Next-token scorer. logits() must be a pure function of the context.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual int vocab_size() const = 0;
  virtual std::vector<double> logits(std::span<const Token> context) const = 0;
};

/// Hash-table language model. The score of token t after `context` is
///
///   h     = derive_seed({table_seed, position, w, c_1, ..., c_w, t})
///   u     = (h >> 11) * 2^-53
///   score = -5 + (10 - 1e-9) * u + 1e-9 * (V - 1 - t) / V
///
/// where position = context.size(), c_1..c_w are the last
/// w = min(context_window, position) tokens and V = vocab_size. Scores lie in
/// [-5, 5); the last term separates tokens whose hashes coincide.
class ToyLM final : public LanguageModel {
 public:
  ToyLM(int vocab_size, int context_window, std::uint64_t table_seed);

  int vocab_size() const override { return vocab_size_; }
  int context_window() const noexcept { return context_window_; }
  std::uint64_t table_seed() const noexcept { return table_seed_; }

  std::vector<double> logits(std::span<const Token> context) const override;

 private:
  int vocab_size_;
  int context_window_;
  std::uint64_t table_seed_;
};

struct Greedy {};

struct Beam {
  int width = 1;
};

struct Multinomial {
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;
};

using DecodeStrategy = std::variant<Greedy, Beam, Multinomial>;

/// `jitter` adds uniform noise in [-jitter, +jitter] to every logit at decode
/// time, emulating accumulation-order differences between GPUs. The noise
/// stream is keyed by `jitter_seed`, or by OS entropy when unset.
struct DecodeConfig {
  DecodeStrategy strategy = Greedy{};
  int max_tokens = 30;
  double jitter = 0.0;
  std::optional<std::uint64_t> jitter_seed;
};

/// Returned sequences hold only the generated tokens (the prompt excluded).
TokenSequence greedy_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg);
TokenSequence beam_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg);
TokenSequence multinomial_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg);

/// Dispatches on cfg.strategy.
TokenSequence decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg);

/// Smallest gap between the best and second-best logit over the steps of a
/// jitter-free greedy run.
double greedy_min_margin(const LanguageModel& model, std::span<const Token> prompt, int max_tokens);

/// Draws one token from softmax(logits / temperature).
Token sample_token(std::span<const double> logits, double temperature, CounterRng& rng);

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);

/// Sum of log-softmax scores of `tokens` generated after `prompt`.
double sequence_log_prob(const LanguageModel& model, std::span<const Token> prompt, std::span<const Token> tokens);

struct SequenceReport {
  std::string verifier_id;
  TokenSequence tokens;
};

struct SequenceDecision {
  bool accepted = false;
  TokenSequence mode;
  int matched_count = 0;
  int total = 0;
  QuorumRule rule = QuorumRule::SimpleMajority;
  std::vector<std::string> dissenting_ids;  // sorted
};

/// Exact-match quorum; ties between equally supported sequences go to the
/// lexicographically smallest token list.
SequenceDecision sequence_consensus(std::span<const SequenceReport> reports, QuorumRule rule);

struct DeterminismRow {
  std::string strategy;
  int max_tokens = 0;
  int runs = 0;
  int distinct_outputs = 0;
  bool deterministic = false;
};

/// Decodes `runs` times, each with its own jitter stream
/// derive_seed({seed, run}); a Multinomial strategy additionally gets
/// rng_seed = derive_seed({seed, run, 1}) per run.
DeterminismRow determinism_trial(const LanguageModel& model, std::span<const Token> prompt, std::string label,
                                 const DecodeConfig& base, int runs, std::uint64_t seed);

/// CSV `strategy,max_tokens,runs,distinct_outputs,deterministic`.
void write_determinism_csv(std::ostream& out, std::span<const DeterminismRow> rows);

}  // namespace genverify
