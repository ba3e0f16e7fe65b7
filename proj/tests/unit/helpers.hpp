#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "genverify/imaging.hpp"
#include "genverify/phash.hpp"
#include "genverify/rng.hpp"

namespace testutil {

inline std::vector<std::uint8_t> from_hex(std::string_view hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

inline std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

inline genverify::Image gray_image(int w, int h, const std::vector<int>& luma) {
  std::vector<genverify::Rgb> px;
  for (int v : luma) px.push_back({static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v)});
  return genverify::Image(w, h, std::move(px));
}

inline genverify::Image random_image(int w, int h, std::uint64_t seed) {
  genverify::CounterRng rng(seed);
  genverify::Image img(w, h);
  for (auto& p : img.pixels()) {
    p = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
         static_cast<std::uint8_t>(rng.below(256))};
  }
  return img;
}

// Direct-sum DCT-II: X[v][u] = a(u) a(v) sum_y sum_x s[y][x] cos(pi (2x+1) u / 2n) cos(pi (2y+1) v / 2n).
inline std::vector<double> dct_oracle(const std::vector<double>& s, int n) {
  std::vector<double> out(static_cast<std::size_t>(n * n));
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      double acc = 0.0;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          acc += s[static_cast<std::size_t>(y * n + x)] * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * n)) *
                 std::cos(std::numbers::pi * (2 * y + 1) * v / (2.0 * n));
        }
      }
      const double au = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      const double av = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      out[static_cast<std::size_t>(v * n + u)] = au * av * acc;
    }
  }
  return out;
}

struct ModeOracle {
  genverify::PerceptualHash mode{genverify::HashKind::AHash};
  std::size_t support = 0;
  std::vector<std::pair<std::size_t, int>> outliers;
};

// Tries every member as the center and recounts with a bit-by-bit distance.
inline ModeOracle tolerant_mode_oracle(const std::vector<genverify::PerceptualHash>& hs, int tol) {
  auto dist = [](const genverify::PerceptualHash& a, const genverify::PerceptualHash& b) {
    int d = 0;
    for (int i = 0; i < a.bits(); ++i) d += a.bit(i) != b.bit(i) ? 1 : 0;
    return d;
  };
  ModeOracle best;
  bool have = false;
  for (const auto& c : hs) {
    std::size_t support = 0;
    for (const auto& m : hs) support += dist(c, m) <= tol ? 1 : 0;
    if (!have || support > best.support ||
        (support == best.support && genverify::encode_hex(c) < genverify::encode_hex(best.mode))) {
      best.mode = c;
      best.support = support;
      have = true;
    }
  }
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const int d = dist(best.mode, hs[i]);
    if (d > tol) best.outliers.emplace_back(i, d);
  }
  return best;
}

inline genverify::PerceptualHash random_hash(genverify::HashKind kind, genverify::CounterRng& rng) {
  genverify::PerceptualHash h(kind);
  for (int w = 0; w < h.word_count(); ++w) h.set_word(w, rng());
  return h;
}

}  // namespace testutil
