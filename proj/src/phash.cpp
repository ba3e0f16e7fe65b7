#include "genverify/phash.hpp"

#include <algorithm>
#include <cctype>

#include "genverify/error.hpp"

namespace genverify {

std::string_view to_string(HashKind kind) noexcept {
  switch (kind) {
    case HashKind::AHash: return "ahash";
    case HashKind::PHash: return "phash";
    case HashKind::DHash: return "dhash";
    case HashKind::CHash: return "chash";
  }
  return "unknown";
}

HashKind parse_hash_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (HashKind kind : kAllHashKinds) {
    if (lower == to_string(kind)) return kind;
  }
  throw InvalidArgument("unknown hash kind '" + std::string(name) + "' (expected ahash, phash, dhash or chash)");
}

namespace {

// bit i = sample_i > mean, written into bits [offset, offset + n).
void threshold_into(PerceptualHash& h, int offset, std::span<const double> samples, double mean) {
  for (std::size_t i = 0; i < samples.size(); ++i) h.set_bit(offset + static_cast<int>(i), samples[i] > mean);
}

// Averaged as offsets from the first sample so equal samples give their own value back.
double mean_of(std::span<const double> v) {
  const double ref = v.front();
  double acc = 0.0;
  for (double x : v) acc += x - ref;
  return ref + acc / static_cast<double>(v.size());
}

}  // namespace

PerceptualHash ahash(const GrayImage& luma) {
  const GrayImage small = resample_area(luma, 8, 8);
  PerceptualHash h(HashKind::AHash);
  threshold_into(h, 0, small.samples(), mean_of(small.samples()));
  return h;
}

PerceptualHash ahash(const Image& img) { return ahash(to_gray(img)); }

PerceptualHash phash(const GrayImage& luma) {
  const DctBlock dct = dct2(resample_area(luma, 32, 32));
  std::array<double, 64> low{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) low[static_cast<std::size_t>(r * 8 + c)] = dct.at(r, c);
  }
  const double ac_mean = mean_of(std::span<const double>(low).subspan(1));
  PerceptualHash h(HashKind::PHash);
  threshold_into(h, 0, low, ac_mean);
  return h;
}

PerceptualHash phash(const Image& img) { return phash(to_gray(img)); }

PerceptualHash dhash(const GrayImage& luma) {
  const GrayImage small = resample_area(luma, 9, 8);
  PerceptualHash h(HashKind::DHash);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) h.set_bit(r * 8 + c, small.at(c + 1, r) > small.at(c, r));
  }
  return h;
}

PerceptualHash dhash(const Image& img) { return dhash(to_gray(img)); }

PerceptualHash chash(const Image& img) {
  PerceptualHash h(HashKind::CHash);
  int offset = 0;
  for (Channel ch : {Channel::Red, Channel::Green, Channel::Blue}) {
    const GrayImage small = resample_area(channel_plane(img, ch), 8, 8);
    threshold_into(h, offset, small.samples(), mean_of(small.samples()));
    offset += 64;
  }
  return h;
}

PerceptualHash compute_hash(const Image& img, HashKind kind) {
  switch (kind) {
    case HashKind::AHash: return ahash(img);
    case HashKind::PHash: return phash(img);
    case HashKind::DHash: return dhash(img);
    case HashKind::CHash: return chash(img);
  }
  throw InvalidArgument("unknown hash kind");
}

int hamming(const PerceptualHash& a, const PerceptualHash& b) {
  if (a.kind() != b.kind()) {
    throw InvalidArgument("hamming: kind mismatch (" + std::string(to_string(a.kind())) + " vs " +
                          std::string(to_string(b.kind())) + ")");
  }
  return hamming_unchecked(a, b);
}

std::string encode_hex(const PerceptualHash& h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(h.bits() / 4));
  for (std::uint64_t w : h.words()) {
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kDigits[(w >> shift) & 0xF]);
  }
  return out;
}

PerceptualHash decode_hex(HashKind kind, std::string_view hex) {
  PerceptualHash h(kind);
  const auto expected = static_cast<std::size_t>(h.bits() / 4);
  if (hex.size() != expected) {
    throw ParseError("hex hash for " + std::string(to_string(kind)) + " must be " + std::to_string(expected) +
                     " characters, got " + std::to_string(hex.size()));
  }
  for (int w = 0; w < h.word_count(); ++w) {
    std::uint64_t word = 0;
    for (int k = 0; k < 16; ++k) {
      const std::size_t pos = static_cast<std::size_t>(w * 16 + k);
      const char c = hex[pos];
      std::uint64_t nibble;
      if (c >= '0' && c <= '9') {
        nibble = static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        nibble = static_cast<std::uint64_t>(c - 'a' + 10);
      } else {
        throw ParseError(std::string("invalid hex character '") + c + "'", pos);
      }
      word = (word << 4) | nibble;
    }
    h.set_word(w, word);
  }
  return h;
}

ToleranceDecision tolerant_mode(std::span<const PerceptualHash> hashes, int tolerance) {
  if (hashes.empty()) throw InvalidArgument("tolerant_mode: empty hash list");
  if (tolerance < 0) throw InvalidArgument("tolerant_mode: negative tolerance");
  const HashKind kind = hashes.front().kind();
  for (const auto& h : hashes) {
    if (h.kind() != kind) throw InvalidArgument("tolerant_mode: mixed hash kinds");
  }

  std::size_t best = 0;
  std::size_t best_support = 0;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    std::size_t support = 0;
    for (const auto& other : hashes) support += hamming_unchecked(hashes[i], other) <= tolerance ? 1 : 0;
    if (support > best_support || (support == best_support && hashes[i] < hashes[best])) {
      best = i;
      best_support = support;
    }
  }

  ToleranceDecision out;
  out.mode_hash = hashes[best];
  out.matched_count = best_support;
  long total = 0;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    const int d = hamming_unchecked(hashes[best], hashes[i]);
    if (d > tolerance) {
      out.outliers.push_back({i, d});
      total += d;
    }
  }
  if (!out.outliers.empty()) out.avg_outlier_distance = static_cast<double>(total) / static_cast<double>(out.outliers.size());
  return out;
}

}  // namespace genverify
