#include "genverify/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "genverify/error.hpp"

namespace genverify {

ToyLM::ToyLM(int vocab_size, int context_window, std::uint64_t table_seed)
    : vocab_size_(vocab_size), context_window_(context_window), table_seed_(table_seed) {
  if (vocab_size < 2) throw InvalidArgument("ToyLM: vocab_size must be >= 2");
  if (context_window < 1) throw InvalidArgument("ToyLM: context_window must be >= 1");
}

std::vector<double> ToyLM::logits(std::span<const Token> context) const {
  const std::size_t w = std::min(context.size(), static_cast<std::size_t>(context_window_));
  std::vector<std::uint64_t> key;
  key.reserve(w + 4);
  key.push_back(table_seed_);
  key.push_back(context.size());
  key.push_back(w);
  for (std::size_t i = context.size() - w; i < context.size(); ++i) {
    key.push_back(static_cast<std::uint32_t>(context[i]));
  }
  key.push_back(0);

  const double v = vocab_size_;
  std::vector<double> out(static_cast<std::size_t>(vocab_size_));
  for (int t = 0; t < vocab_size_; ++t) {
    key.back() = static_cast<std::uint64_t>(t);
    const double u = static_cast<double>(derive_seed(std::span<const std::uint64_t>(key)) >> 11) * 0x1.0p-53;
    out[static_cast<std::size_t>(t)] = -5.0 + (10.0 - 1e-9) * u + 1e-9 * (v - 1.0 - t) / v;
  }
  return out;
}

namespace {

class Jitter {
 public:
  explicit Jitter(const DecodeConfig& cfg)
      : amplitude_(cfg.jitter), rng_(cfg.jitter_seed ? *cfg.jitter_seed : (cfg.jitter > 0.0 ? entropy_seed() : 0)) {
    if (!(cfg.jitter >= 0.0)) throw InvalidArgument("decode: jitter must be non-negative");
  }

  void apply(std::vector<double>& logits) {
    if (amplitude_ == 0.0) return;
    for (double& l : logits) l += rng_.uniform(-amplitude_, amplitude_);
  }

 private:
  double amplitude_;
  CounterRng rng_;
};

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

void check_common(const DecodeConfig& cfg) {
  if (cfg.max_tokens < 1) throw InvalidArgument("decode: max_tokens must be >= 1");
}

std::vector<Token> with_prompt(std::span<const Token> prompt, std::size_t reserve) {
  std::vector<Token> ctx(prompt.begin(), prompt.end());
  ctx.reserve(prompt.size() + reserve);
  return ctx;
}

}  // namespace

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

TokenSequence greedy_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg) {
  check_common(cfg);
  Jitter jitter(cfg);
  std::vector<Token> ctx = with_prompt(prompt, static_cast<std::size_t>(cfg.max_tokens));
  for (int step = 0; step < cfg.max_tokens; ++step) {
    auto l = model.logits(ctx);
    jitter.apply(l);
    ctx.push_back(static_cast<Token>(argmax(l)));
  }
  return TokenSequence(ctx.begin() + static_cast<std::ptrdiff_t>(prompt.size()), ctx.end());
}

double greedy_min_margin(const LanguageModel& model, std::span<const Token> prompt, int max_tokens) {
  std::vector<Token> ctx(prompt.begin(), prompt.end());
  double margin = std::numeric_limits<double>::infinity();
  for (int step = 0; step < max_tokens; ++step) {
    const auto l = model.logits(ctx);
    const std::size_t best = argmax(l);
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i != best) second = std::max(second, l[i]);
    }
    margin = std::min(margin, l[best] - second);
    ctx.push_back(static_cast<Token>(best));
  }
  return margin;
}

TokenSequence beam_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg) {
  check_common(cfg);
  const auto* beam = std::get_if<Beam>(&cfg.strategy);
  const int width = beam ? beam->width : 1;
  if (width < 1) throw InvalidArgument("beam_decode: width must be >= 1");
  Jitter jitter(cfg);

  struct Hypothesis {
    TokenSequence tokens;
    double score = 0.0;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    Token token;
  };

  std::vector<Hypothesis> beams{Hypothesis{}};
  std::vector<Token> ctx;
  for (int step = 0; step < cfg.max_tokens; ++step) {
    std::vector<Candidate> cands;
    cands.reserve(beams.size() * static_cast<std::size_t>(model.vocab_size()));
    for (std::size_t b = 0; b < beams.size(); ++b) {
      ctx.assign(prompt.begin(), prompt.end());
      ctx.insert(ctx.end(), beams[b].tokens.begin(), beams[b].tokens.end());
      auto l = model.logits(ctx);
      jitter.apply(l);
      const auto lp = log_softmax(l);
      for (std::size_t t = 0; t < lp.size(); ++t) cands.push_back({beams[b].score + lp[t], b, static_cast<Token>(t)});
    }
    // Higher score first; equal scores fall back to the lexicographically
    // smaller sequence (parent tokens, then the appended token).
    auto better = [&beams](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return beams[a.parent].tokens < beams[b.parent].tokens;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);

    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis h{beams[cands[i].parent].tokens, cands[i].score};
      h.tokens.push_back(cands[i].token);
      next.push_back(std::move(h));
    }
    beams = std::move(next);
  }
  // All hypotheses have max_tokens tokens; the first is the best.
  return beams.front().tokens;
}

Token sample_token(std::span<const double> logits, double temperature, CounterRng& rng) {
  if (!(temperature > 0.0)) throw InvalidArgument("multinomial: temperature must be > 0");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp((logits[i] - m) / temperature);
    sum += w[i];
  }
  const double u = rng.uniform() * sum;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    acc += w[i];
    last = i;
    if (u < acc) return static_cast<Token>(i);
  }
  return static_cast<Token>(last);
}

TokenSequence multinomial_decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg) {
  check_common(cfg);
  const auto* mn = std::get_if<Multinomial>(&cfg.strategy);
  if (mn == nullptr) throw InvalidArgument("multinomial_decode: config strategy is not Multinomial");
  if (!(mn->temperature > 0.0)) throw InvalidArgument("multinomial: temperature must be > 0");
  Jitter jitter(cfg);
  CounterRng rng(mn->rng_seed);
  std::vector<Token> ctx = with_prompt(prompt, static_cast<std::size_t>(cfg.max_tokens));
  for (int step = 0; step < cfg.max_tokens; ++step) {
    auto l = model.logits(ctx);
    jitter.apply(l);
    ctx.push_back(sample_token(l, mn->temperature, rng));
  }
  return TokenSequence(ctx.begin() + static_cast<std::ptrdiff_t>(prompt.size()), ctx.end());
}

TokenSequence decode(const LanguageModel& model, std::span<const Token> prompt, const DecodeConfig& cfg) {
  struct Visitor {
    const LanguageModel& model;
    std::span<const Token> prompt;
    const DecodeConfig& cfg;
    TokenSequence operator()(const Greedy&) const { return greedy_decode(model, prompt, cfg); }
    TokenSequence operator()(const Beam&) const { return beam_decode(model, prompt, cfg); }
    TokenSequence operator()(const Multinomial&) const { return multinomial_decode(model, prompt, cfg); }
  };
  return std::visit(Visitor{model, prompt, cfg}, cfg.strategy);
}

double sequence_log_prob(const LanguageModel& model, std::span<const Token> prompt, std::span<const Token> tokens) {
  std::vector<Token> ctx(prompt.begin(), prompt.end());
  double total = 0.0;
  for (Token t : tokens) {
    const auto lp = log_softmax(model.logits(ctx));
    total += lp.at(static_cast<std::size_t>(t));
    ctx.push_back(t);
  }
  return total;
}

SequenceDecision sequence_consensus(std::span<const SequenceReport> reports, QuorumRule rule) {
  if (reports.empty()) throw InvalidArgument("sequence_consensus: no reports");
  std::set<std::string_view> ids;
  std::map<TokenSequence, int> support;  // ordered: ties resolve to the smallest key
  for (const auto& r : reports) {
    if (!ids.insert(r.verifier_id).second) {
      throw InvalidArgument("sequence_consensus: duplicate verifier id '" + r.verifier_id + "'");
    }
    ++support[r.tokens];
  }
  auto best = support.begin();
  for (auto it = support.begin(); it != support.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  SequenceDecision d;
  d.mode = best->first;
  d.matched_count = best->second;
  d.total = static_cast<int>(reports.size());
  d.rule = rule;
  d.accepted = quorum_met(d.matched_count, d.total, rule);
  for (const auto& r : reports) {
    if (r.tokens != d.mode) d.dissenting_ids.push_back(r.verifier_id);
  }
  std::sort(d.dissenting_ids.begin(), d.dissenting_ids.end());
  return d;
}

DeterminismRow determinism_trial(const LanguageModel& model, std::span<const Token> prompt, std::string label,
                                 const DecodeConfig& base, int runs, std::uint64_t seed) {
  if (runs < 1) throw InvalidArgument("determinism_trial: runs must be >= 1");
  std::set<TokenSequence> outputs;
  for (int r = 0; r < runs; ++r) {
    DecodeConfig cfg = base;
    cfg.jitter_seed = derive_seed({seed, static_cast<std::uint64_t>(r)});
    if (auto* mn = std::get_if<Multinomial>(&cfg.strategy)) {
      mn->rng_seed = derive_seed({seed, static_cast<std::uint64_t>(r), 1});
    }
    outputs.insert(decode(model, prompt, cfg));
  }
  DeterminismRow row;
  row.strategy = std::move(label);
  row.max_tokens = base.max_tokens;
  row.runs = runs;
  row.distinct_outputs = static_cast<int>(outputs.size());
  row.deterministic = outputs.size() == 1;
  return row;
}

void write_determinism_csv(std::ostream& out, std::span<const DeterminismRow> rows) {
  out << "strategy,max_tokens,runs,distinct_outputs,deterministic\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.max_tokens << ',' << r.runs << ',' << r.distinct_outputs << ','
        << (r.deterministic ? "yes" : "no") << '\n';
  }
}

}  // namespace genverify
