#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace genverify {

/// The controllable randomness of a textual-inversion style fine-tune.
enum class StochasticSource {
  HorizontalFlip,
  TemplateChoice,
  DataShuffle,
  LatentNoise,
  TimestepChoice,
  NoiseSchedule,
};

inline constexpr std::array<StochasticSource, 6> kAllSources = {
    StochasticSource::HorizontalFlip, StochasticSource::TemplateChoice, StochasticSource::DataShuffle,
    StochasticSource::LatentNoise,    StochasticSource::TimestepChoice, StochasticSource::NoiseSchedule,
};

std::string_view to_string(StochasticSource source) noexcept;
StochasticSource parse_stochastic_source(std::string_view name);

/// Either pinned to a seed or drawn fresh for every run.
struct SourceControl {
  bool fixed = true;
  std::uint64_t seed = 0;

  static SourceControl pinned(std::uint64_t seed) { return {true, seed}; }
  static SourceControl free() { return {false, 0}; }
};

struct StochasticityConfig {
  std::array<SourceControl, 6> sources{};
  double hardware_jitter = 0.0;  // per-coordinate uniform perturbation per step

  SourceControl& operator[](StochasticSource s) { return sources[static_cast<std::size_t>(s)]; }
  const SourceControl& operator[](StochasticSource s) const { return sources[static_cast<std::size_t>(s)]; }

  /// All six sources fixed and no hardware jitter.
  bool deterministic_mode() const noexcept;

  /// Every source pinned to derive_seed({seed, index}).
  static StochasticityConfig deterministic(std::uint64_t seed);
};

struct TrainConfig {
  int dim = 768;
  double learning_rate = 5e-4;
  int max_steps = 2000;
  int batch_size = 4;
  int checkpoint_every = 50;
  int exemplar_count = 5;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

struct Checkpoint {
  int step = 0;
  std::vector<double> embedding;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct Trajectory {
  std::string run_id;
  std::vector<Checkpoint> checkpoints;

  /// Checkpoint at exactly `step`, or nullptr.
  const Checkpoint* at_step(int step) const noexcept;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct SyncPolicy {
  int resync_every = 300;
  std::string source_run;
};

/// The seeded surrogate objective: a hidden concept vector, exemplar
/// offsets, prompt-template offsets and the initial embedding.
struct SurrogateTask {
  std::vector<double> concept_vec;
  std::vector<std::vector<double>> exemplars;
  std::vector<std::vector<double>> templates;
  std::vector<double> initial;

  static SurrogateTask make(std::uint64_t task_seed, const TrainConfig& cfg);

  /// 0.5 * mean_i |x - (concept + exemplar_i)|^2
  double loss(std::span<const double> x) const;
};

/// Simulated fine-tune. Free sources and hardware jitter draw from streams
/// keyed by `entropy` (OS entropy when unset); pinned sources use their own
/// seeds, so a deterministic-mode run is a pure function of
/// (task_seed, configs).
Trajectory train(std::uint64_t task_seed, const TrainConfig& train_cfg, const StochasticityConfig& stoch_cfg,
                 std::string run_id, std::optional<std::uint64_t> entropy = std::nullopt);

/// As train(), but after every step that is a multiple of
/// policy.resync_every the embedding is overwritten with the source
/// trajectory's checkpoint at that step. Throws InvalidArgument if the
/// source lacks any of those checkpoints.
Trajectory train_synced(std::uint64_t task_seed, const TrainConfig& train_cfg, const StochasticityConfig& stoch_cfg,
                        const SyncPolicy& policy, const Trajectory& source, std::string run_id,
                        std::optional<std::uint64_t> entropy = std::nullopt);

struct DriftPoint {
  int step = 0;
  double distance = 0.0;
};

/// Per-checkpoint Euclidean distance; throws InvalidArgument on misaligned steps.
std::vector<DriftPoint> drift(const Trajectory& a, const Trajectory& b);

struct PcaPoint {
  std::string run_id;
  int step = 0;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct PcaResult {
  std::vector<PcaPoint> points;                 // trajectory order, then checkpoint order
  std::array<std::vector<double>, 2> axes;      // unit principal directions (zero if degenerate)
  std::array<double, 2> variances{};            // eigenvalues of the pooled covariance
  int sweeps = 0;                               // Jacobi sweeps used
};

/// Pools every checkpoint, centers by the pooled mean and projects onto the
/// top two covariance eigenvectors (cyclic Jacobi on the smaller of the
/// covariance and Gram matrices, off-diagonal tolerance 1e-10 followed by one
/// polishing sweep, at most 10,000 sweeps). Each axis is signed so its largest-magnitude coordinate is
/// positive. A zero-variance pool projects to all zeros.
PcaResult pca_project(std::span<const Trajectory> trajectories, int components = 2);

/// CSV `run_id,step,dim,v0..v{dim-1}` with 17 significant digits.
void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_trajectory_csv(std::istream& in);

/// CSV `run_id,step,pc1,pc2`.
void write_pca_csv(std::ostream& out, std::span<const PcaPoint> points);

/// CSV `run_a,run_b,step,distance`.
void write_drift_csv(std::ostream& out, std::string_view run_a, std::string_view run_b,
                     std::span<const DriftPoint> points, bool header);

/// Named runs of the desk-scale training experiments.
struct TrainingRun {
  std::string run_id;
  StochasticityConfig stoch;
};

/// DeterR1..3 plus StocHF (flip free), Shuffle (data_shuffle free) and
/// Noseed (latent noise, timestep and schedule free).
std::vector<TrainingRun> ablation_runs(std::uint64_t task_seed, double hardware_jitter);

/// Trains every run in parallel. Run i draws free streams from
/// derive_seed({entropy, i}) when entropy is set.
std::vector<Trajectory> train_all(std::uint64_t task_seed, const TrainConfig& cfg, std::span<const TrainingRun> runs,
                                  std::optional<std::uint64_t> entropy, unsigned threads);

}  // namespace genverify
