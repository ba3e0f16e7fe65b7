#pragma once

#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genverify/phash.hpp"

namespace genverify {

enum class QuorumRule {
  SimpleMajority,  // matched > n / 2
  SuperMajority,   // matched > 2n / 3
};

std::string_view to_string(QuorumRule rule) noexcept;

/// Accepts "majority" / "simple" and "super" / "supermajority".
QuorumRule parse_quorum_rule(std::string_view name);

/// Smallest matched count that satisfies the rule for n reports.
int quorum_threshold(int n, QuorumRule rule);

bool quorum_met(int matched, int n, QuorumRule rule);

struct VerifierReport {
  std::string verifier_id;
  PerceptualHash hash;
};

struct ConsensusDecision {
  bool accepted = false;
  PerceptualHash mode_hash{HashKind::AHash};
  int matched_count = 0;
  int total = 0;
  QuorumRule rule = QuorumRule::SimpleMajority;
  int tolerance = 0;
  std::vector<std::string> dissenting_ids;  // sorted
};

/// Quorum decision over one round of reports. Order-independent. Throws
/// InvalidArgument on empty input, duplicate ids or mixed hash kinds.
ConsensusDecision decide(std::span<const VerifierReport> reports, int tolerance, QuorumRule rule);

struct VerificationModel {
  double p = 1.0;  // chance one verifier lands within tolerance of the mode
  int n = 1;
  QuorumRule rule = QuorumRule::SimpleMajority;
};

/// C(n, k) exactly for n <= 64; log-gamma above.
double binomial_coefficient(int n, int k);

/// P[X = k] for X ~ Binomial(n, p).
double binomial_pmf(int n, int k, double p);

/// P[X >= quorum_threshold(n, rule)] for X ~ Binomial(n, p).
double quorum_probability(const VerificationModel& model);

/// P[X < quorum_threshold(n, rule)], summed independently of the tail.
double quorum_failure_probability(const VerificationModel& model);

/// Smallest n in [1, n_max] whose quorum probability reaches `target`.
std::optional<int> min_verifiers(double p, QuorumRule rule, double target, int n_max);

struct ProbabilityRow {
  double p = 0.0;
  int n = 0;
  QuorumRule rule = QuorumRule::SimpleMajority;
  double probability = 0.0;
};

/// Cross product of p_values x n_values, p-major.
std::vector<ProbabilityRow> probability_table(std::span<const double> p_values, std::span<const int> n_values,
                                              QuorumRule rule);

/// CSV `p,n,rule,probability`, probabilities with 6 decimals.
void write_probability_csv(std::ostream& out, std::span<const ProbabilityRow> rows);

}  // namespace genverify
