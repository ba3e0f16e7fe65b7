#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "genverify/imaging.hpp"

namespace genverify {

enum class HashKind { AHash, PHash, DHash, CHash };

constexpr int bit_length(HashKind kind) noexcept { return kind == HashKind::CHash ? 192 : 64; }

std::string_view to_string(HashKind kind) noexcept;

/// Parses "ahash" | "phash" | "dhash" | "chash" (case-insensitive).
HashKind parse_hash_kind(std::string_view name);

inline constexpr std::array<HashKind, 4> kAllHashKinds = {HashKind::AHash, HashKind::PHash, HashKind::DHash,
                                                          HashKind::CHash};

/// Fixed-length bit vector tagged with its hash kind.
///
/// Bit i lives in word i / 64 at position 63 - i % 64, so the words read
/// most-significant-first are the serialized byte order: bit 0 is the high bit
/// of the first hex digit. Unused words are always zero, which makes
/// word-wise comparison identical to comparing hex encodings.
class PerceptualHash {
 public:
  static constexpr int kMaxWords = 3;

  explicit PerceptualHash(HashKind kind) noexcept : kind_(kind) {}

  HashKind kind() const noexcept { return kind_; }
  int bits() const noexcept { return bit_length(kind_); }
  int word_count() const noexcept { return bits() / 64; }

  bool bit(int i) const noexcept { return (words_[i >> 6] >> (63 - (i & 63))) & 1U; }
  void set_bit(int i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (63 - (i & 63));
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  std::span<const std::uint64_t> words() const noexcept {
    return {words_.data(), static_cast<std::size_t>(word_count())};
  }
  std::uint64_t word(int i) const noexcept { return words_[i]; }
  void set_word(int i, std::uint64_t w) noexcept { words_[i] = w; }

  friend bool operator==(const PerceptualHash&, const PerceptualHash&) = default;
  /// Orders by kind, then by hex encoding.
  friend auto operator<=>(const PerceptualHash&, const PerceptualHash&) = default;

 private:
  HashKind kind_;
  std::array<std::uint64_t, kMaxWords> words_{};
};

/// Mean-threshold hash of the 8x8 box-downsampled luma.
PerceptualHash ahash(const Image& img);
PerceptualHash ahash(const GrayImage& luma);

/// DCT hash: 32x32 luma, 8x8 low-frequency block, thresholded against the
/// mean of its 63 AC coefficients.
PerceptualHash phash(const Image& img);
PerceptualHash phash(const GrayImage& luma);

/// Horizontal gradient hash over a 9x8 grid.
PerceptualHash dhash(const Image& img);
PerceptualHash dhash(const GrayImage& luma);

/// Per-channel mean-threshold planes, R then G then B (192 bits).
PerceptualHash chash(const Image& img);

PerceptualHash compute_hash(const Image& img, HashKind kind);

/// Differing bit count. Throws InvalidArgument on kind mismatch.
int hamming(const PerceptualHash& a, const PerceptualHash& b);

/// Word-wise XOR + popcount with no kind check; the inner kernel of the
/// comparison loops.
inline int hamming_unchecked(const PerceptualHash& a, const PerceptualHash& b) noexcept {
  int d = 0;
  for (int i = 0; i < a.word_count(); ++i) d += std::popcount(a.word(i) ^ b.word(i));
  return d;
}

/// Lowercase fixed-width hex (16 chars for 64-bit kinds, 48 for cHash).
std::string encode_hex(const PerceptualHash& h);

/// Inverse of encode_hex; throws ParseError on bad length or characters.
PerceptualHash decode_hex(HashKind kind, std::string_view hex);

struct Outlier {
  std::size_t index = 0;
  int distance = 0;

  friend bool operator==(const Outlier&, const Outlier&) = default;
};

/// Tolerance-aware mode of a list of hashes.
struct ToleranceDecision {
  PerceptualHash mode_hash{HashKind::AHash};
  std::size_t matched_count = 0;
  std::vector<Outlier> outliers;       // members farther than the tolerance, in input order
  double avg_outlier_distance = 0.0;   // 0 when there are no outliers
};

/// Candidate support = members within `tolerance` of it (itself included);
/// the mode is the candidate with maximum support, ties going to the
/// smallest hex encoding. Throws InvalidArgument on an empty list or mixed
/// kinds.
ToleranceDecision tolerant_mode(std::span<const PerceptualHash> hashes, int tolerance);

}  // namespace genverify
