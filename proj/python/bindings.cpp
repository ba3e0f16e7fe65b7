#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "genverify/cli.hpp"
#include "genverify/consensus.hpp"
#include "genverify/decoding.hpp"
#include "genverify/error.hpp"
#include "genverify/imaging.hpp"
#include "genverify/phash.hpp"
#include "genverify/simnet.hpp"
#include "genverify/trainsync.hpp"

namespace py = pybind11;
using namespace genverify;

namespace {

Image image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("image array must have shape (height, width, 3)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  const auto* d = a.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  return Image(w, h, std::move(px));
}

std::vector<PerceptualHash> hashes_from_hex(HashKind kind, const std::vector<std::string>& hex) {
  std::vector<PerceptualHash> out;
  out.reserve(hex.size());
  for (const auto& h : hex) out.push_back(decode_hex(kind, h));
  return out;
}

py::dict tolerant_mode_py(const std::string& kind, const std::vector<std::string>& hex, int tolerance) {
  const auto d = tolerant_mode(hashes_from_hex(parse_hash_kind(kind), hex), tolerance);
  py::list outliers;
  for (const auto& o : d.outliers) outliers.append(py::make_tuple(o.index, o.distance));
  py::dict r;
  r["mode"] = encode_hex(d.mode_hash);
  r["matched_count"] = d.matched_count;
  r["outliers"] = outliers;
  r["avg_outlier_distance"] = d.avg_outlier_distance;
  return r;
}

py::dict collide_py(int classes, int per_class, const std::string& kind, const std::vector<int>& tolerances,
                    std::uint64_t seed, int image_size, unsigned threads) {
  GeneratorConfig gc;
  gc.width = gc.height = image_size;
  const auto r = collision_experiment(classes, per_class, parse_hash_kind(kind), tolerances, seed, gc, threads);
  py::dict out;
  out["comparisons"] = r.aggregate.comparisons;
  out["tolerances"] = r.aggregate.tolerances;
  out["collisions"] = r.aggregate.collisions;
  std::vector<double> rates;
  for (std::size_t i = 0; i < tolerances.size(); ++i) rates.push_back(r.aggregate.rate(i));
  out["rates"] = rates;
  return out;
}

TokenSequence decode_py(int vocab, int context_window, std::uint64_t table_seed, const TokenSequence& prompt,
                        const std::string& strategy, int max_tokens, int beam_width, double temperature,
                        std::uint64_t rng_seed, double jitter, std::optional<std::uint64_t> jitter_seed) {
  const ToyLM model(vocab, context_window, table_seed);
  DecodeConfig cfg;
  cfg.max_tokens = max_tokens;
  cfg.jitter = jitter;
  cfg.jitter_seed = jitter_seed;
  if (strategy == "greedy") {
    cfg.strategy = Greedy{};
  } else if (strategy == "beam") {
    cfg.strategy = Beam{beam_width};
  } else if (strategy == "multinomial") {
    cfg.strategy = Multinomial{temperature, rng_seed};
  } else {
    throw InvalidArgument("unknown strategy '" + strategy + "'");
  }
  return decode(model, prompt, cfg);
}

TrainConfig train_config(int dim, int steps, int checkpoint_every, double lr) {
  TrainConfig c;
  c.dim = dim;
  c.max_steps = steps;
  c.checkpoint_every = checkpoint_every;
  c.learning_rate = lr;
  return c;
}

py::dict trajectory_dict(const Trajectory& t) {
  std::vector<int> steps;
  std::vector<std::vector<double>> emb;
  for (const auto& c : t.checkpoints) {
    steps.push_back(c.step);
    emb.push_back(c.embedding);
  }
  py::dict d;
  d["run_id"] = t.run_id;
  d["steps"] = steps;
  d["embeddings"] = emb;
  return d;
}

std::vector<py::dict> ablation_py(std::uint64_t task_seed, int dim, int steps, int checkpoint_every, double jitter,
                                  std::optional<std::uint64_t> entropy, unsigned threads) {
  const auto runs = ablation_runs(task_seed, jitter);
  const auto trajs = train_all(task_seed, train_config(dim, steps, checkpoint_every, 5e-4), runs, entropy, threads);
  std::vector<py::dict> out;
  for (const auto& t : trajs) out.push_back(trajectory_dict(t));
  return out;
}

py::tuple run_cli_py(const std::vector<std::string>& args) {
  std::vector<std::string> full{"genverify"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_genverify, m) {
  m.doc() = "Perceptual hashing, quorum consensus and reproducibility experiments";

  // Translators are tried newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def(
      "hash_image",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& rgb, const std::string& kind) {
        return encode_hex(compute_hash(image_from_array(rgb), parse_hash_kind(kind)));
      },
      py::arg("rgb"), py::arg("kind") = "ahash", "Hex perceptual hash of an (height, width, 3) uint8 array.");
  m.def(
      "hash_file",
      [](const std::string& path, const std::string& kind) {
        return encode_hex(compute_hash(load_image_file(path), parse_hash_kind(kind)));
      },
      py::arg("path"), py::arg("kind") = "ahash", "Hex perceptual hash of a PPM or PNG file.");
  m.def(
      "hamming",
      [](const std::string& kind, const std::string& a, const std::string& b) {
        const HashKind k = parse_hash_kind(kind);
        return hamming(decode_hex(k, a), decode_hex(k, b));
      },
      py::arg("kind"), py::arg("a"), py::arg("b"));
  m.def("tolerant_mode", &tolerant_mode_py, py::arg("kind"), py::arg("hashes"), py::arg("tolerance"));

  m.def(
      "quorum_probability",
      [](double p, int n, const std::string& rule) { return quorum_probability({p, n, parse_quorum_rule(rule)}); },
      py::arg("p"), py::arg("n"), py::arg("rule") = "majority");
  m.def(
      "min_verifiers",
      [](double p, const std::string& rule, double target, int n_max) {
        return min_verifiers(p, parse_quorum_rule(rule), target, n_max);
      },
      py::arg("p"), py::arg("rule"), py::arg("target"), py::arg("n_max") = 101);
  m.def(
      "monte_carlo_type1",
      [](double p, int n, const std::string& rule, std::uint64_t trials, std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        return monte_carlo_type1(p, n, parse_quorum_rule(rule), trials, seed, threads);
      },
      py::arg("p"), py::arg("n"), py::arg("rule") = "majority", py::arg("trials") = 100000, py::arg("seed") = 0,
      py::arg("threads") = 1);
  m.def("collision_experiment", &collide_py, py::arg("classes"), py::arg("per_class"), py::arg("kind") = "ahash",
        py::arg("tolerances") = std::vector<int>{0, 1, 2}, py::arg("seed") = 0, py::arg("image_size") = 128,
        py::arg("threads") = 1);

  m.def(
      "toy_logits",
      [](int vocab, int context_window, std::uint64_t table_seed, const TokenSequence& context) {
        return ToyLM(vocab, context_window, table_seed).logits(context);
      },
      py::arg("vocab"), py::arg("context_window"), py::arg("table_seed"), py::arg("context"));
  m.def("decode", &decode_py, py::arg("vocab"), py::arg("context_window"), py::arg("table_seed"), py::arg("prompt"),
        py::arg("strategy") = "greedy", py::arg("max_tokens") = 30, py::arg("beam_width") = 5,
        py::arg("temperature") = 1.0, py::arg("rng_seed") = 0, py::arg("jitter") = 0.0,
        py::arg("jitter_seed") = py::none());

  m.def(
      "train_deterministic",
      [](std::uint64_t task_seed, int dim, int steps, int checkpoint_every, double lr) {
        return trajectory_dict(
            train(task_seed, train_config(dim, steps, checkpoint_every, lr), StochasticityConfig::deterministic(task_seed), "DeterR1"));
      },
      py::arg("task_seed"), py::arg("dim") = 768, py::arg("steps") = 2000, py::arg("checkpoint_every") = 50,
      py::arg("learning_rate") = 5e-4);
  m.def("train_ablation", &ablation_py, py::arg("task_seed"), py::arg("dim") = 768, py::arg("steps") = 2000,
        py::arg("checkpoint_every") = 50, py::arg("jitter") = 0.0, py::arg("entropy") = 0, py::arg("threads") = 1,
        "The six named ablation runs (DeterR1..3, StocHF, Shuffle, Noseed).");

  m.def("run_cli", &run_cli_py, py::arg("args"), "Runs the command-line driver; returns (exit_code, stdout, stderr).");
}
