#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "genverify/decoding.hpp"
#include "genverify/error.hpp"

using namespace genverify;

namespace {

// Logits fixed per position, ignoring content.
class TableModel final : public LanguageModel {
 public:
  TableModel(int vocab, std::vector<std::vector<double>> rows) : vocab_(vocab), rows_(std::move(rows)) {}
  int vocab_size() const override { return vocab_; }
  std::vector<double> logits(std::span<const Token> context) const override {
    return rows_.at(std::min(context.size(), rows_.size() - 1));
  }

 private:
  int vocab_;
  std::vector<std::vector<double>> rows_;
};

// Two-step, three-token model: step one slightly prefers 0, but after 0 the
// next token is flat while after 1 it is nearly certain.
class TrapModel final : public LanguageModel {
 public:
  int vocab_size() const override { return 3; }
  std::vector<double> logits(std::span<const Token> context) const override {
    if (context.empty()) return {1.0, 0.9, -3.0};
    if (context.back() == 0) return {0.0, 0.0, 0.0};
    return {10.0, 0.0, 0.0};
  }
};

DecodeConfig greedy_cfg(int max_tokens, double jitter = 0.0, std::optional<std::uint64_t> js = std::nullopt) {
  DecodeConfig c;
  c.strategy = Greedy{};
  c.max_tokens = max_tokens;
  c.jitter = jitter;
  c.jitter_seed = js;
  return c;
}

DecodeConfig beam_cfg(int width, int max_tokens) {
  DecodeConfig c;
  c.strategy = Beam{width};
  c.max_tokens = max_tokens;
  return c;
}

DecodeConfig multi_cfg(std::uint64_t seed, int max_tokens, double temperature = 1.0) {
  DecodeConfig c;
  c.strategy = Multinomial{temperature, seed};
  c.max_tokens = max_tokens;
  return c;
}

TokenSequence random_prompt(CounterRng& rng, int vocab, int len) {
  TokenSequence p;
  for (int i = 0; i < len; ++i) p.push_back(static_cast<Token>(rng.below(static_cast<std::uint64_t>(vocab))));
  return p;
}

// Enumerates every sequence; ties go to the lexicographically first one.
TokenSequence exhaustive_best(const LanguageModel& m, const TokenSequence& prompt, int len) {
  const int v = m.vocab_size();
  TokenSequence cur(static_cast<std::size_t>(len), 0), best;
  double best_score = -INFINITY;
  while (true) {
    const double s = sequence_log_prob(m, prompt, cur);
    if (s > best_score) {
      best_score = s;
      best = cur;
    }
    int i = len - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == v - 1) cur[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
  }
  return best;
}

SequenceReport rep(std::string id, TokenSequence t) { return {std::move(id), std::move(t)}; }

}  // namespace

TEST_SUITE("decoding") {
  TEST_CASE("toy model logits are pure and bounded") {
    const ToyLM m(16, 3, 9);
    const TokenSequence ctx{1, 2, 3, 4};
    const auto a = m.logits(ctx);
    CHECK(a.size() == 16);
    CHECK(m.logits(ctx) == a);
    for (double x : a) {
      CHECK(x >= -5.0);
      CHECK(x < 5.0);
    }
    // only the last context_window tokens and the position matter
    CHECK(m.logits(TokenSequence{9, 2, 3, 4}) == a);
    CHECK_FALSE(m.logits(TokenSequence{1, 2, 3, 5}) == a);
    CHECK_FALSE(m.logits(TokenSequence{2, 3, 4}) == a);
    CHECK_FALSE(ToyLM(16, 3, 10).logits(ctx) == a);
  }

  TEST_CASE("toy model two-token hand values") {
    // evaluated from the documented hash recipe by an independent script
    const ToyLM m(2, 2, 42);
    const auto e = m.logits(TokenSequence{});
    CHECK(e[0] == doctest::Approx(-1.9538439170353419).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(-3.826985143236172).epsilon(1e-15));
    const auto one = m.logits(TokenSequence{1});
    CHECK(one[0] == doctest::Approx(-3.1453487819135764).epsilon(1e-15));
    CHECK(one[1] == doctest::Approx(0.7366892093290769).epsilon(1e-15));
    const auto three = m.logits(TokenSequence{0, 1, 1});
    CHECK(three[0] == doctest::Approx(-0.33581651053137934).epsilon(1e-15));
    CHECK(three[1] == doctest::Approx(4.687800778772745).epsilon(1e-15));
  }

  TEST_CASE("toy model rejects bad shapes") {
    CHECK_THROWS_AS(ToyLM(1, 3, 0), InvalidArgument);
    CHECK_THROWS_AS(ToyLM(4, 0, 0), InvalidArgument);
  }

  TEST_CASE("greedy on a decreasing model emits zeros") {
    const TableModel m(4, {{3.0, 2.0, 1.0, 0.0}});
    CHECK(greedy_decode(m, TokenSequence{2, 1}, greedy_cfg(6)) == TokenSequence(6, 0));
  }

  TEST_CASE("greedy exact ties go to the smallest id") {
    const TableModel m(3, {{0.5, 1.0, 1.0}});
    CHECK(greedy_decode(m, {}, greedy_cfg(3)) == TokenSequence{1, 1, 1});
  }

  TEST_CASE("greedy is deterministic and bounded in length") {
    const ToyLM m(64, 4, 3);
    const TokenSequence prompt{5, 6};
    const auto a = greedy_decode(m, prompt, greedy_cfg(30));
    CHECK(a.size() == 30);
    CHECK(greedy_decode(m, prompt, greedy_cfg(30)) == a);
    for (Token t : a) {
      CHECK(t >= 0);
      CHECK(t < 64);
    }
  }

  TEST_CASE("small jitter under the margin never changes greedy output") {
    const ToyLM m(128, 8, 11);
    const TokenSequence prompt{1, 2, 3, 4};
    const double margin = greedy_min_margin(m, prompt, 30);
    REQUIRE(margin > 2e-6);
    const auto clean = greedy_decode(m, prompt, greedy_cfg(30));
    for (std::uint64_t r = 0; r < 100; ++r) {
      CHECK(greedy_decode(m, prompt, greedy_cfg(30, 1e-6, r)) == clean);
    }
  }

  TEST_CASE("margin property over random models") {
    CounterRng rng(2024);
    int tested = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const int v = 2 + static_cast<int>(rng.below(30));
      const ToyLM m(v, 1 + static_cast<int>(rng.below(4)), rng());
      const auto prompt = random_prompt(rng, v, static_cast<int>(rng.below(4)));
      const int len = 1 + static_cast<int>(rng.below(20));
      const double margin = greedy_min_margin(m, prompt, len);
      if (!(margin > 0.0)) continue;
      ++tested;
      const auto clean = greedy_decode(m, prompt, greedy_cfg(len));
      CHECK(greedy_decode(m, prompt, greedy_cfg(len, 0.49 * margin, rng())) == clean);
    }
    CHECK(tested > 150);
  }

  TEST_CASE("greedy margin matches a brute-force scan") {
    const ToyLM m(8, 2, 5);
    const TokenSequence prompt{3};
    TokenSequence ctx = prompt;
    double expect = INFINITY;
    for (int s = 0; s < 10; ++s) {
      auto l = m.logits(ctx);
      std::vector<double> sorted = l;
      std::sort(sorted.rbegin(), sorted.rend());
      expect = std::min(expect, sorted[0] - sorted[1]);
      ctx.push_back(static_cast<Token>(std::max_element(l.begin(), l.end()) - l.begin()));
    }
    CHECK(greedy_min_margin(m, prompt, 10) == expect);
  }

  TEST_CASE("beam width one is greedy") {
    CounterRng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
      const int v = 2 + static_cast<int>(rng.below(40));
      const ToyLM m(v, 1 + static_cast<int>(rng.below(6)), rng());
      const auto prompt = random_prompt(rng, v, static_cast<int>(rng.below(5)));
      const int len = 1 + static_cast<int>(rng.below(12));
      REQUIRE(beam_decode(m, prompt, beam_cfg(1, len)) == greedy_decode(m, prompt, greedy_cfg(len)));
    }
  }

  TEST_CASE("beam beats greedy on the trap model") {
    const TrapModel m;
    const auto g = greedy_decode(m, {}, greedy_cfg(2));
    CHECK(g == TokenSequence{0, 0});
    const auto b = beam_decode(m, {}, beam_cfg(2, 2));
    CHECK(b == TokenSequence{1, 0});
    CHECK(b == exhaustive_best(m, {}, 2));
    CHECK(sequence_log_prob(m, {}, b) > sequence_log_prob(m, {}, g));
  }

  TEST_CASE("full-width beam equals exhaustive search") {
    CounterRng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      const int v = 2 + static_cast<int>(rng.below(3));
      const int len = 1 + static_cast<int>(rng.below(4));
      const ToyLM m(v, 1 + static_cast<int>(rng.below(3)), rng());
      const auto prompt = random_prompt(rng, v, static_cast<int>(rng.below(3)));
      const int width = static_cast<int>(std::lround(std::pow(v, len)));
      REQUIRE(beam_decode(m, prompt, beam_cfg(width, len)) == exhaustive_best(m, prompt, len));
    }
  }

  TEST_CASE("beam is deterministic at widths 5 and 10") {
    const ToyLM m(128, 8, 21);
    const TokenSequence prompt{7, 7, 7};
    for (int w : {5, 10}) {
      const auto a = beam_decode(m, prompt, beam_cfg(w, 30));
      CHECK(a.size() == 30);
      CHECK(beam_decode(m, prompt, beam_cfg(w, 30)) == a);
      CHECK(sequence_log_prob(m, prompt, a) >= sequence_log_prob(m, prompt, greedy_decode(m, prompt, greedy_cfg(30))) - 1e-12);
    }
  }

  TEST_CASE("beam rejects width zero") {
    const ToyLM m(4, 1, 0);
    CHECK_THROWS_AS(beam_decode(m, {}, beam_cfg(0, 3)), InvalidArgument);
    CHECK_THROWS_AS(greedy_decode(m, {}, greedy_cfg(0)), InvalidArgument);
    CHECK_THROWS_AS(greedy_decode(m, {}, greedy_cfg(3, -1.0, 0)), InvalidArgument);
  }

  TEST_CASE("multinomial is reproducible per seed and diverges across seeds") {
    const ToyLM m(128, 8, 4);
    const TokenSequence prompt{1, 2, 3, 4};
    CHECK(multinomial_decode(m, prompt, multi_cfg(17, 30)) == multinomial_decode(m, prompt, multi_cfg(17, 30)));
    std::set<TokenSequence> seen;
    for (std::uint64_t s = 0; s < 20; ++s) seen.insert(multinomial_decode(m, prompt, multi_cfg(s, 30)));
    CHECK(seen.size() >= 2);
  }

  TEST_CASE("multinomial at tiny temperature matches greedy") {
    CounterRng rng(5);
    int tested = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const ToyLM m(32, 4, rng());
      const TokenSequence prompt{0, 1};
      if (greedy_min_margin(m, prompt, 20) < 1e-3) continue;
      ++tested;
      CHECK(multinomial_decode(m, prompt, multi_cfg(rng(), 20, 1e-6)) == greedy_decode(m, prompt, greedy_cfg(20)));
    }
    CHECK(tested > 50);
  }

  TEST_CASE("multinomial rejects non-positive temperature") {
    const ToyLM m(4, 1, 0);
    CHECK_THROWS_AS(multinomial_decode(m, {}, multi_cfg(0, 3, 0.0)), InvalidArgument);
    CHECK_THROWS_AS(multinomial_decode(m, {}, greedy_cfg(3)), InvalidArgument);
    CounterRng rng(1);
    CHECK_THROWS_AS(sample_token(std::vector<double>{0.0, 1.0}, -1.0, rng), InvalidArgument);
  }

  TEST_CASE("sampled frequencies match softmax within 3 sigma") {
    const std::vector<double> logits{0.0, 1.0, 2.0, -1.0};
    for (double temp : {1.0, 0.5}) {
      double z = 0.0;
      for (double l : logits) z += std::exp(l / temp);
      CounterRng rng(derive_seed({77, static_cast<std::uint64_t>(temp * 10)}));
      std::vector<int> counts(logits.size(), 0);
      const int n = 10000;
      for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_token(logits, temp, rng))];
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = std::exp(logits[i] / temp) / z;
        const double sigma = std::sqrt(n * p * (1 - p));
        CHECK(std::abs(counts[i] - n * p) <= 3 * sigma);
      }
    }
  }

  TEST_CASE("log softmax normalizes and survives large logits") {
    const auto lp = log_softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(lp[0] == doctest::Approx(-std::log(2.0)));
    double s = 0.0;
    for (double x : log_softmax(std::vector<double>{0.3, -2.0, 4.0})) s += std::exp(x);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("sequence consensus examples") {
    const TokenSequence s{1, 2, 3}, s1{1, 2, 4}, s2{1, 5, 3};
    {
      const std::vector<SequenceReport> r{rep("a", s), rep("b", s), rep("c", s)};
      const auto d = sequence_consensus(r, QuorumRule::SimpleMajority);
      CHECK(d.accepted);
      CHECK(d.matched_count == 3);
      CHECK(d.total == 3);
      CHECK(d.dissenting_ids.empty());
    }
    {
      const std::vector<SequenceReport> r{rep("a", s), rep("b", s), rep("c", s1)};
      const auto d = sequence_consensus(r, QuorumRule::SimpleMajority);
      CHECK(d.accepted);
      CHECK(d.mode == s);
      CHECK(d.dissenting_ids == std::vector<std::string>{"c"});
    }
    {
      const std::vector<SequenceReport> r{rep("a", s), rep("b", s1), rep("c", s2)};
      const auto d = sequence_consensus(r, QuorumRule::SimpleMajority);
      CHECK_FALSE(d.accepted);
      CHECK(d.matched_count == 1);
      CHECK(d.mode == s);  // lexicographically smallest of the three
    }
    {
      const std::vector<SequenceReport> r{rep("a", s), rep("b", s), rep("c", s1), rep("d", s)};
      CHECK(sequence_consensus(r, QuorumRule::SuperMajority).accepted);
      const std::vector<SequenceReport> r2{rep("a", s), rep("b", s), rep("c", s1), rep("d", s1)};
      CHECK_FALSE(sequence_consensus(r2, QuorumRule::SimpleMajority).accepted);
    }
  }

  TEST_CASE("sequence consensus rejects bad input") {
    CHECK_THROWS_AS(sequence_consensus(std::vector<SequenceReport>{}, QuorumRule::SimpleMajority), InvalidArgument);
    const std::vector<SequenceReport> dup{rep("a", {1}), rep("a", {1})};
    CHECK_THROWS_AS(sequence_consensus(dup, QuorumRule::SimpleMajority), InvalidArgument);
  }

  TEST_CASE("determinism trials reproduce the strategy table") {
    const ToyLM m(128, 8, 31);
    const TokenSequence prompt{3, 1, 4, 1};
    DecodeConfig g = greedy_cfg(30, 1e-6);
    const auto gr = determinism_trial(m, prompt, "greedy", g, 50, 1);
    CHECK(gr.deterministic);
    CHECK(gr.distinct_outputs == 1);
    DecodeConfig b = beam_cfg(5, 30);
    b.jitter = 1e-6;
    CHECK(determinism_trial(m, prompt, "beam5", b, 20, 1).deterministic);
    const auto mr = determinism_trial(m, prompt, "multinomial", multi_cfg(0, 30), 50, 1);
    CHECK_FALSE(mr.deterministic);
    CHECK(mr.distinct_outputs > 1);
    CHECK(determinism_trial(m, prompt, "multinomial", multi_cfg(0, 30), 50, 1).distinct_outputs ==
          mr.distinct_outputs);
    CHECK_THROWS_AS(determinism_trial(m, prompt, "x", g, 0, 1), InvalidArgument);

    std::ostringstream os;
    const std::vector<DeterminismRow> rows{gr, mr};
    write_determinism_csv(os, rows);
    CHECK(os.str() == "strategy,max_tokens,runs,distinct_outputs,deterministic\ngreedy,30,50,1,yes\nmultinomial,30,50," +
                          std::to_string(mr.distinct_outputs) + ",no\n");
  }
}
