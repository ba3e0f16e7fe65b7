#include "genverify/trainsync.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "genverify/error.hpp"
#include "genverify/format.hpp"
#include "genverify/parallel.hpp"
#include "genverify/rng.hpp"

namespace genverify {

std::string_view to_string(StochasticSource source) noexcept {
  switch (source) {
    case StochasticSource::HorizontalFlip: return "horizontal_flip";
    case StochasticSource::TemplateChoice: return "template_choice";
    case StochasticSource::DataShuffle: return "data_shuffle";
    case StochasticSource::LatentNoise: return "latent_noise";
    case StochasticSource::TimestepChoice: return "timestep_choice";
    case StochasticSource::NoiseSchedule: return "noise_schedule";
  }
  return "unknown";
}

StochasticSource parse_stochastic_source(std::string_view name) {
  for (auto s : kAllSources) {
    if (name == to_string(s)) return s;
  }
  throw InvalidArgument("unknown stochasticity source '" + std::string(name) + "'");
}

bool StochasticityConfig::deterministic_mode() const noexcept {
  return hardware_jitter == 0.0 && std::all_of(sources.begin(), sources.end(), [](const SourceControl& s) { return s.fixed; });
}

StochasticityConfig StochasticityConfig::deterministic(std::uint64_t seed) {
  StochasticityConfig cfg;
  for (std::size_t i = 0; i < cfg.sources.size(); ++i) cfg.sources[i] = SourceControl::pinned(derive_seed({seed, i}));
  return cfg;
}

void TrainConfig::validate() const {
  if (dim < 1) throw InvalidArgument("train: dim must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("train: bad learning rate");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (checkpoint_every < 1) throw InvalidArgument("train: checkpoint_every must be >= 1");
  if (max_steps < checkpoint_every) throw InvalidArgument("train: max_steps must be >= checkpoint_every");
  if (max_steps % checkpoint_every != 0) throw InvalidArgument("train: checkpoint_every must divide max_steps");
  if (exemplar_count < 3 || exemplar_count > 10) throw InvalidArgument("train: exemplar_count must be in [3, 10]");
}

const Checkpoint* Trajectory::at_step(int step) const noexcept {
  auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), step,
                             [](const Checkpoint& c, int s) { return c.step < s; });
  return it != checkpoints.end() && it->step == step ? &*it : nullptr;
}

namespace {

constexpr int kTemplateCount = 8;
constexpr int kTimesteps = 1000;
constexpr double kNoiseScale = 0.1;
constexpr std::uint64_t kTaskDomain = 0x7461736b;       // "task"
constexpr std::uint64_t kSourceDomain = 0x736f75726365; // "source"
constexpr std::uint64_t kJitterDomain = 0x6a6974746572; // "jitter"

std::vector<double> normal_vector(CounterRng& rng, int dim, double scale) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// sqrt(1 - alpha_bar(t)) for the linear beta schedule 1e-4 .. 0.02.
const std::array<double, kTimesteps>& noise_levels() {
  static const std::array<double, kTimesteps> levels = [] {
    std::array<double, kTimesteps> out{};
    double alpha_bar = 1.0;
    for (int t = 0; t < kTimesteps; ++t) {
      const double beta = 1e-4 + (0.02 - 1e-4) * t / (kTimesteps - 1);
      alpha_bar *= 1.0 - beta;
      out[static_cast<std::size_t>(t)] = std::sqrt(1.0 - alpha_bar);
    }
    return out;
  }();
  return levels;
}

class Trainer {
 public:
  Trainer(std::uint64_t task_seed, const TrainConfig& cfg, const StochasticityConfig& stoch,
          std::optional<std::uint64_t> entropy)
      : cfg_(cfg), stoch_(stoch), task_(SurrogateTask::make(task_seed, cfg)) {
    if (!(stoch.hardware_jitter >= 0.0) || !std::isfinite(stoch.hardware_jitter)) {
      throw InvalidArgument("train: hardware_jitter must be finite and non-negative");
    }
    const bool needs_entropy = !stoch.deterministic_mode();
    const std::uint64_t fresh = needs_entropy ? (entropy ? *entropy : entropy_seed()) : 0;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const SourceControl& sc = stoch.sources[i];
      keys_[i] = sc.fixed ? derive_seed({sc.seed, i, kSourceDomain}) : derive_seed({fresh, i, kSourceDomain});
    }
    jitter_key_ = derive_seed({fresh, kJitterDomain});
    x_ = task_.initial;
    batch_mean_.assign(static_cast<std::size_t>(cfg.dim), 0.0);
  }

  std::vector<double>& embedding() { return x_; }

  // One optimizer step; `step` counts from 1.
  void step(int step) {
    const auto s = static_cast<std::uint64_t>(step);
    const int k = cfg_.exemplar_count;
    const std::size_t dim = x_.size();
    CounterRng flip(derive_seed({key(StochasticSource::HorizontalFlip), s}));
    CounterRng tmpl(derive_seed({key(StochasticSource::TemplateChoice), s}));
    CounterRng noise(derive_seed({key(StochasticSource::LatentNoise), s}));
    CounterRng timestep(derive_seed({key(StochasticSource::TimestepChoice), s}));
    CounterRng schedule(derive_seed({key(StochasticSource::NoiseSchedule), s}));

    std::fill(batch_mean_.begin(), batch_mean_.end(), 0.0);
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const std::uint64_t sample = (s - 1) * static_cast<std::uint64_t>(cfg_.batch_size) + static_cast<std::uint64_t>(b);
      const int exemplar = shuffled(sample / static_cast<std::uint64_t>(k))[sample % static_cast<std::uint64_t>(k)];
      const bool flipped = flip.below(2) == 1;
      const auto& tau = task_.templates[tmpl.below(kTemplateCount)];
      const double sigma = noise_levels()[timestep.below(kTimesteps)] * (1.0 + 0.2 * (schedule.uniform() - 0.5));
      const auto& e = task_.exemplars[static_cast<std::size_t>(exemplar)];
      for (std::size_t d = 0; d < dim; ++d) {
        const double offset = flipped ? e[dim - 1 - d] : e[d];
        batch_mean_[d] += task_.concept_vec[d] + offset + tau[d] + kNoiseScale * sigma * noise.normal();
      }
    }
    const double inv_b = 1.0 / cfg_.batch_size;
    for (std::size_t d = 0; d < dim; ++d) x_[d] -= cfg_.learning_rate * (x_[d] - batch_mean_[d] * inv_b);

    if (stoch_.hardware_jitter > 0.0) {
      CounterRng jitter(derive_seed({jitter_key_, s}));
      const double a = stoch_.hardware_jitter;
      for (double& v : x_) v += jitter.uniform(-a, a);
    }
  }

 private:
  std::uint64_t key(StochasticSource src) const { return keys_[static_cast<std::size_t>(src)]; }

  const std::vector<int>& shuffled(std::uint64_t epoch) {
    if (epoch != perm_epoch_ || perm_.empty()) {
      perm_.resize(static_cast<std::size_t>(cfg_.exemplar_count));
      std::iota(perm_.begin(), perm_.end(), 0);
      CounterRng rng(derive_seed({key(StochasticSource::DataShuffle), epoch}));
      for (std::size_t i = perm_.size() - 1; i > 0; --i) std::swap(perm_[i], perm_[rng.below(i + 1)]);
      perm_epoch_ = epoch;
    }
    return perm_;
  }

  const TrainConfig& cfg_;
  const StochasticityConfig& stoch_;
  SurrogateTask task_;
  std::array<std::uint64_t, 6> keys_{};
  std::uint64_t jitter_key_ = 0;
  std::vector<double> x_;
  std::vector<double> batch_mean_;
  std::vector<int> perm_;
  std::uint64_t perm_epoch_ = 0;
};

Trajectory run_training(std::uint64_t task_seed, const TrainConfig& cfg, const StochasticityConfig& stoch,
                        const SyncPolicy* policy, const Trajectory* source, std::string run_id,
                        std::optional<std::uint64_t> entropy) {
  cfg.validate();
  if (policy != nullptr) {
    if (policy->resync_every < 1 || policy->resync_every % cfg.checkpoint_every != 0) {
      throw InvalidArgument("train_synced: resync_every must be a positive multiple of checkpoint_every");
    }
    for (int s = policy->resync_every; s <= cfg.max_steps; s += policy->resync_every) {
      const Checkpoint* c = source->at_step(s);
      if (c == nullptr) {
        throw InvalidArgument("train_synced: source trajectory '" + source->run_id + "' has no checkpoint at step " +
                              std::to_string(s));
      }
      if (c->embedding.size() != static_cast<std::size_t>(cfg.dim)) {
        throw InvalidArgument("train_synced: source checkpoint dimension mismatch");
      }
    }
  }

  Trainer trainer(task_seed, cfg, stoch, entropy);
  Trajectory traj;
  traj.run_id = std::move(run_id);
  traj.checkpoints.reserve(static_cast<std::size_t>(cfg.max_steps / cfg.checkpoint_every));
  for (int s = 1; s <= cfg.max_steps; ++s) {
    trainer.step(s);
    if (policy != nullptr && s % policy->resync_every == 0) trainer.embedding() = source->at_step(s)->embedding;
    if (s % cfg.checkpoint_every == 0) traj.checkpoints.push_back({s, trainer.embedding()});
  }
  return traj;
}

}  // namespace

SurrogateTask SurrogateTask::make(std::uint64_t task_seed, const TrainConfig& cfg) {
  CounterRng rng(derive_seed({task_seed, kTaskDomain}));
  SurrogateTask t;
  t.concept_vec = normal_vector(rng, cfg.dim, 1.0);
  for (int i = 0; i < cfg.exemplar_count; ++i) t.exemplars.push_back(normal_vector(rng, cfg.dim, 0.5));
  for (int i = 0; i < kTemplateCount; ++i) t.templates.push_back(normal_vector(rng, cfg.dim, 0.2));
  t.initial = normal_vector(rng, cfg.dim, 1.0);
  return t;
}

double SurrogateTask::loss(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& e : exemplars) {
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double r = x[d] - concept_vec[d] - e[d];
      total += r * r;
    }
  }
  return 0.5 * total / static_cast<double>(exemplars.size());
}

Trajectory train(std::uint64_t task_seed, const TrainConfig& train_cfg, const StochasticityConfig& stoch_cfg,
                 std::string run_id, std::optional<std::uint64_t> entropy) {
  return run_training(task_seed, train_cfg, stoch_cfg, nullptr, nullptr, std::move(run_id), entropy);
}

Trajectory train_synced(std::uint64_t task_seed, const TrainConfig& train_cfg, const StochasticityConfig& stoch_cfg,
                        const SyncPolicy& policy, const Trajectory& source, std::string run_id,
                        std::optional<std::uint64_t> entropy) {
  return run_training(task_seed, train_cfg, stoch_cfg, &policy, &source, std::move(run_id), entropy);
}

std::vector<DriftPoint> drift(const Trajectory& a, const Trajectory& b) {
  if (a.checkpoints.size() != b.checkpoints.size()) {
    throw InvalidArgument("drift: trajectories have different checkpoint counts");
  }
  std::vector<DriftPoint> out;
  out.reserve(a.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    const auto& ca = a.checkpoints[i];
    const auto& cb = b.checkpoints[i];
    if (ca.step != cb.step) throw InvalidArgument("drift: checkpoint steps are misaligned");
    if (ca.embedding.size() != cb.embedding.size()) throw InvalidArgument("drift: embedding dimensions differ");
    double sq = 0.0;
    for (std::size_t d = 0; d < ca.embedding.size(); ++d) {
      const double r = ca.embedding[d] - cb.embedding[d];
      sq += r * r;
    }
    out.push_back({ca.step, std::sqrt(sq)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

constexpr double kJacobiTolerance = 1e-10;
constexpr int kJacobiMaxSweeps = 10000;

struct EigenSystem {
  std::vector<double> values;   // unsorted
  std::vector<double> vectors;  // column-major: vectors[k * n + i] is entry i of eigenvector k
  int sweeps = 0;
};

// Cyclic Jacobi for a dense symmetric n x n matrix (row-major, destroyed).
EigenSystem jacobi_eigen(std::vector<double> a, std::size_t n) {
  EigenSystem es;
  es.vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) es.vectors[i * n + i] = 1.0;
  auto at = [&a, n](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

  double total = 0.0;
  for (double v : a) total += v * v;
  const double norm = std::sqrt(total);

  // One more sweep after the tolerance is met; convergence is quadratic, so
  // that sweep takes the eigenvectors to working precision.
  bool polish = false;
  for (; es.sweeps < kJacobiMaxSweeps; ++es.sweeps) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * at(p, q) * at(p, q);
    }
    if (off == 0.0 || polish) break;
    if (std::sqrt(off) <= kJacobiTolerance * norm) polish = true;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        double* vp = &es.vectors[p * n];
        double* vq = &es.vectors[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }
  es.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) es.values[i] = at(i, i);
  return es;
}

}  // namespace

PcaResult pca_project(std::span<const Trajectory> trajectories, int components) {
  if (components != 2) throw InvalidArgument("pca_project: only 2 components are supported");
  std::vector<const Checkpoint*> pool;
  std::vector<const std::string*> owner;
  for (const auto& t : trajectories) {
    for (const auto& c : t.checkpoints) {
      pool.push_back(&c);
      owner.push_back(&t.run_id);
    }
  }
  if (pool.size() < 2) throw InvalidArgument("pca_project: need at least two checkpoints");
  const std::size_t n = pool.size();
  const std::size_t dim = pool.front()->embedding.size();
  for (const auto* c : pool) {
    if (c->embedding.size() != dim) throw InvalidArgument("pca_project: embedding dimensions differ");
  }

  std::vector<double> mean(dim, 0.0);
  for (const auto* c : pool) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += c->embedding[d];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> x(n * dim);  // centered, row-major
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) x[i * dim + d] = pool[i]->embedding[d] - mean[d];
  }

  PcaResult result;
  result.axes = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  std::vector<std::array<double, 2>> proj(n, {0.0, 0.0});

  double trace = 0.0;
  for (double v : x) trace += v * v;
  trace /= static_cast<double>(n);

  if (trace > 0.0) {
    const bool gram = n < dim;
    const std::size_t m = gram ? n : dim;
    std::vector<double> a(m * m, 0.0);
    if (gram) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t d = 0; d < dim; ++d) acc += x[i * dim + d] * x[j * dim + d];
          a[i * n + j] = a[j * n + i] = acc / static_cast<double>(n);
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = &x[i * dim];
        for (std::size_t p = 0; p < dim; ++p) {
          for (std::size_t q = p; q < dim; ++q) a[p * dim + q] += row[p] * row[q];
        }
      }
      for (std::size_t p = 0; p < dim; ++p) {
        for (std::size_t q = p; q < dim; ++q) a[q * dim + p] = a[p * dim + q] /= static_cast<double>(n);
      }
    }
    const EigenSystem es = jacobi_eigen(std::move(a), m);
    result.sweeps = es.sweeps;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return es.values[i] > es.values[j]; });

    for (std::size_t k = 0; k < 2 && k < m; ++k) {
      const double lambda = es.values[order[k]];
      if (!(lambda > 1e-12 * trace)) break;
      result.variances[k] = lambda;
      const double* ev = &es.vectors[order[k] * m];
      std::vector<double>& axis = result.axes[k];
      if (gram) {
        // v = X^T u / sqrt(n * lambda); scores = sqrt(n * lambda) * u.
        const double scale = std::sqrt(static_cast<double>(n) * lambda);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t d = 0; d < dim; ++d) axis[d] += x[i * dim + d] * ev[i];
        }
        for (double& v : axis) v /= scale;
        for (std::size_t i = 0; i < n; ++i) proj[i][k] = scale * ev[i];
      } else {
        axis.assign(ev, ev + dim);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t d = 0; d < dim; ++d) acc += x[i * dim + d] * axis[d];
          proj[i][k] = acc;
        }
      }
      std::size_t lead = 0;
      for (std::size_t d = 1; d < dim; ++d) {
        if (std::abs(axis[d]) > std::abs(axis[lead])) lead = d;
      }
      if (axis[lead] < 0.0) {
        for (double& v : axis) v = -v;
        for (auto& p : proj) p[k] = -p[k];
      }
    }
  }

  result.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) result.points.push_back({*owner[i], pool[i]->step, proj[i][0], proj[i][1]});
  return result;
}

// ---------------------------------------------------------------------------
// CSV

void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories) {
  std::size_t dim = 0;
  for (const auto& t : trajectories) {
    if (!t.checkpoints.empty()) dim = std::max(dim, t.checkpoints.front().embedding.size());
  }
  out << "run_id,step,dim";
  for (std::size_t d = 0; d < dim; ++d) out << ",v" << d;
  out << '\n';
  for (const auto& t : trajectories) {
    for (const auto& c : t.checkpoints) {
      out << t.run_id << ',' << c.step << ',' << c.embedding.size();
      for (double v : c.embedding) out << ',' << format_sig17(v);
      out << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectory_csv(std::istream& in) {
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line.rfind("run_id,step,dim", 0) != 0) throw ParseError("trajectory CSV: missing header", 0);
      header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() < 3) throw ParseError("trajectory CSV: short record on line " + std::to_string(line_no));
    Checkpoint c;
    std::size_t dim = 0;
    try {
      c.step = std::stoi(fields[1]);
      dim = static_cast<std::size_t>(std::stoul(fields[2]));
    } catch (const std::exception&) {
      throw ParseError("trajectory CSV: bad step or dim on line " + std::to_string(line_no));
    }
    if (fields.size() != 3 + dim) throw ParseError("trajectory CSV: wrong value count on line " + std::to_string(line_no));
    c.embedding.reserve(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      char* end = nullptr;
      const double v = std::strtod(fields[3 + d].c_str(), &end);
      if (end == fields[3 + d].c_str() || *end != '\0') {
        throw ParseError("trajectory CSV: bad value on line " + std::to_string(line_no));
      }
      c.embedding.push_back(v);
    }
    auto [it, inserted] = index.emplace(fields[0], out.size());
    if (inserted) out.push_back(Trajectory{fields[0], {}});
    out[it->second].checkpoints.push_back(std::move(c));
  }
  if (!header) throw ParseError("trajectory CSV: missing header", 0);
  return out;
}

void write_pca_csv(std::ostream& out, std::span<const PcaPoint> points) {
  out << "run_id,step,pc1,pc2\n";
  for (const auto& p : points) {
    out << p.run_id << ',' << p.step << ',' << format_sig17(p.pc1) << ',' << format_sig17(p.pc2) << '\n';
  }
}

void write_drift_csv(std::ostream& out, std::string_view run_a, std::string_view run_b,
                     std::span<const DriftPoint> points, bool header) {
  if (header) out << "run_a,run_b,step,distance\n";
  for (const auto& p : points) out << run_a << ',' << run_b << ',' << p.step << ',' << format_sig17(p.distance) << '\n';
}

// ---------------------------------------------------------------------------
// Experiments

std::vector<TrainingRun> ablation_runs(std::uint64_t task_seed, double hardware_jitter) {
  StochasticityConfig base = StochasticityConfig::deterministic(task_seed);
  base.hardware_jitter = hardware_jitter;
  std::vector<TrainingRun> runs;
  for (int r = 1; r <= 3; ++r) runs.push_back({"DeterR" + std::to_string(r), base});

  StochasticityConfig flip = base;
  flip[StochasticSource::HorizontalFlip] = SourceControl::free();
  runs.push_back({"StocHF", flip});

  StochasticityConfig shuffle = base;
  shuffle[StochasticSource::DataShuffle] = SourceControl::free();
  runs.push_back({"Shuffle", shuffle});

  StochasticityConfig noseed = base;
  for (auto s : {StochasticSource::LatentNoise, StochasticSource::TimestepChoice, StochasticSource::NoiseSchedule}) {
    noseed[s] = SourceControl::free();
  }
  runs.push_back({"Noseed", noseed});
  return runs;
}

std::vector<Trajectory> train_all(std::uint64_t task_seed, const TrainConfig& cfg, std::span<const TrainingRun> runs,
                                  std::optional<std::uint64_t> entropy, unsigned threads) {
  std::vector<Trajectory> out(runs.size());
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    std::optional<std::uint64_t> e;
    if (entropy) e = derive_seed({*entropy, i});
    out[i] = train(task_seed, cfg, runs[i].stoch, runs[i].run_id, e);
  });
  return out;
}

}  // namespace genverify
