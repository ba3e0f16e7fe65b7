#include "genverify/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "genverify/error.hpp"
#include "genverify/format.hpp"

namespace genverify {

std::string_view to_string(QuorumRule rule) noexcept {
  return rule == QuorumRule::SimpleMajority ? "majority" : "super";
}

QuorumRule parse_quorum_rule(std::string_view name) {
  if (name == "majority" || name == "simple") return QuorumRule::SimpleMajority;
  if (name == "super" || name == "supermajority") return QuorumRule::SuperMajority;
  throw InvalidArgument("unknown quorum rule '" + std::string(name) + "' (expected majority or super)");
}

int quorum_threshold(int n, QuorumRule rule) {
  if (n < 1) throw InvalidArgument("quorum needs at least one report");
  // Strict inequalities: k > n/2  <=>  2k > n;  k > 2n/3  <=>  3k > 2n.
  return rule == QuorumRule::SimpleMajority ? n / 2 + 1 : (2 * n) / 3 + 1;
}

bool quorum_met(int matched, int n, QuorumRule rule) { return matched >= quorum_threshold(n, rule); }

ConsensusDecision decide(std::span<const VerifierReport> reports, int tolerance, QuorumRule rule) {
  if (reports.empty()) throw InvalidArgument("decide: no reports");
  std::set<std::string_view> ids;
  std::vector<PerceptualHash> hashes;
  hashes.reserve(reports.size());
  for (const auto& r : reports) {
    if (!ids.insert(r.verifier_id).second) throw InvalidArgument("decide: duplicate verifier id '" + r.verifier_id + "'");
    hashes.push_back(r.hash);
  }
  const ToleranceDecision mode = tolerant_mode(hashes, tolerance);

  ConsensusDecision d;
  d.mode_hash = mode.mode_hash;
  d.matched_count = static_cast<int>(mode.matched_count);
  d.total = static_cast<int>(reports.size());
  d.rule = rule;
  d.tolerance = tolerance;
  d.accepted = quorum_met(d.matched_count, d.total, rule);
  for (const auto& o : mode.outliers) d.dissenting_ids.push_back(reports[o.index].verifier_id);
  std::sort(d.dissenting_ids.begin(), d.dissenting_ids.end());
  return d;
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string(what) + " must be in [0, 1]");
}

}  // namespace

double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n <= 64) {
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    // c * (n - i) is divisible by (i + 1) at every step.
    for (int i = 0; i < k; ++i) c = c * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    return static_cast<double>(c);
  }
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

double binomial_pmf(int n, int k, double p) {
  check_probability(p, "p");
  if (k < 0 || k > n) return 0.0;
  return binomial_coefficient(n, k) * std::pow(p, k) * std::pow(1.0 - p, n - k);
}

namespace {

// Sums the smaller side of the split at k_min and complements it, keeping
// both tails accurate near 0 and 1.
std::pair<double, double> split_tails(const VerificationModel& model) {
  check_probability(model.p, "p");
  const int k_min = quorum_threshold(model.n, model.rule);
  double upper = 0.0;
  for (int k = model.n; k >= k_min; --k) upper += binomial_pmf(model.n, k, model.p);
  double lower = 0.0;
  for (int k = 0; k < k_min; ++k) lower += binomial_pmf(model.n, k, model.p);
  if (upper >= lower) return {std::max(0.0, 1.0 - lower), std::min(lower, 1.0)};
  return {std::min(upper, 1.0), std::max(0.0, 1.0 - upper)};
}

}  // namespace

double quorum_probability(const VerificationModel& model) { return split_tails(model).first; }

double quorum_failure_probability(const VerificationModel& model) { return split_tails(model).second; }

std::optional<int> min_verifiers(double p, QuorumRule rule, double target, int n_max) {
  check_probability(p, "p");
  check_probability(target, "target");
  for (int n = 1; n <= n_max; ++n) {
    if (quorum_probability({p, n, rule}) >= target) return n;
  }
  return std::nullopt;
}

std::vector<ProbabilityRow> probability_table(std::span<const double> p_values, std::span<const int> n_values,
                                              QuorumRule rule) {
  std::vector<ProbabilityRow> rows;
  rows.reserve(p_values.size() * n_values.size());
  for (double p : p_values) {
    check_probability(p, "p");
    for (int n : n_values) {
      if (n < 1) throw InvalidArgument("verifier count must be positive");
      rows.push_back({p, n, rule, quorum_probability({p, n, rule})});
    }
  }
  return rows;
}

void write_probability_csv(std::ostream& out, std::span<const ProbabilityRow> rows) {
  out << "p,n,rule,probability\n";
  for (const auto& r : rows) {
    out << format_shortest(r.p) << ',' << r.n << ',' << to_string(r.rule) << ',' << format_fixed(r.probability, 6)
        << '\n';
  }
}

}  // namespace genverify
