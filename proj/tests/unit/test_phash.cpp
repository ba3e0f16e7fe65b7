#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "genverify/error.hpp"
#include "genverify/phash.hpp"
#include "helpers.hpp"

using namespace genverify;
using testutil::gray_image;

namespace {

Image half_plane_8x8() {
  std::vector<int> luma;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) luma.push_back(x < 4 ? 0 : 255);
  }
  return gray_image(8, 8, luma);
}

PerceptualHash from_hex64(std::string_view hex) { return decode_hex(HashKind::AHash, hex); }

// pHash recomputed from the direct-sum DCT on a 32x32 luma block.
std::string phash_oracle(const GrayImage& luma32) {
  const auto c = testutil::dct_oracle({luma32.samples().begin(), luma32.samples().end()}, 32);
  double mean = 0.0;
  for (int r = 0; r < 8; ++r) {
    for (int k = 0; k < 8; ++k) {
      if (r != 0 || k != 0) mean += c[static_cast<std::size_t>(r * 32 + k)];
    }
  }
  mean /= 63.0;
  PerceptualHash h(HashKind::PHash);
  for (int r = 0; r < 8; ++r) {
    for (int k = 0; k < 8; ++k) h.set_bit(r * 8 + k, c[static_cast<std::size_t>(r * 32 + k)] > mean);
  }
  return encode_hex(h);
}

}  // namespace

TEST_SUITE("phash") {
  TEST_CASE("bit lengths and names") {
    CHECK(bit_length(HashKind::AHash) == 64);
    CHECK(bit_length(HashKind::PHash) == 64);
    CHECK(bit_length(HashKind::DHash) == 64);
    CHECK(bit_length(HashKind::CHash) == 192);
    for (HashKind k : kAllHashKinds) CHECK(parse_hash_kind(to_string(k)) == k);
    CHECK(parse_hash_kind("AHash") == HashKind::AHash);
    CHECK_THROWS_AS(parse_hash_kind("whash"), InvalidArgument);
  }

  TEST_CASE("ahash vectors") {
    CHECK(encode_hex(ahash(Image(8, 8, Rgb{90, 90, 90}))) == "0000000000000000");
    CHECK(encode_hex(ahash(Image(64, 48, Rgb{3, 200, 17}))) == "0000000000000000");
    CHECK(encode_hex(ahash(half_plane_8x8())) == "0f0f0f0f0f0f0f0f");
    const Image img = testutil::random_image(100, 70, 5);
    CHECK(hamming(ahash(img), ahash(img)) == 0);
  }

  TEST_CASE("phash of a constant image sets only the DC bit") {
    CHECK(encode_hex(phash(Image(32, 32, Rgb{100, 100, 100}))) == "8000000000000000");
    CHECK(encode_hex(phash(Image(64, 64, Rgb{1, 1, 1}))) == "8000000000000000");
    CHECK(encode_hex(phash(Image(32, 32, Rgb{0, 0, 0}))) == "0000000000000000");
  }

  TEST_CASE("phash of the lowest horizontal cosine sets bits [0,0] and [0,1]") {
    std::vector<double> s;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) s.push_back(128.0 + 60.0 * std::cos(std::numbers::pi * (2 * x + 1) / 64.0));
    }
    const GrayImage g(32, 32, s);
    CHECK(encode_hex(phash(g)) == "c000000000000000");
    CHECK(phash_oracle(g) == "c000000000000000");
  }

  TEST_CASE("phash agrees with the direct-sum DCT oracle") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Image img = testutil::random_image(32, 32, seed);
      CHECK(encode_hex(phash(img)) == phash_oracle(to_gray(img)));
    }
  }

  TEST_CASE("phash is invariant to doubling the luma") {
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> a;
      std::vector<double> b;
      for (int i = 0; i < 32 * 32; ++i) {
        const double v = rng.uniform(0.0, 127.0);
        a.push_back(v);
        b.push_back(2.0 * v);
      }
      CHECK(phash(GrayImage(32, 32, a)) == phash(GrayImage(32, 32, b)));
    }
  }

  TEST_CASE("dhash vectors") {
    std::vector<int> ramp;
    std::vector<int> stripes;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 9; ++x) {
        ramp.push_back(10 * x + y);
        stripes.push_back(x % 2 == 0 ? 0 : 255);
      }
    }
    CHECK(encode_hex(dhash(gray_image(9, 8, ramp))) == "ffffffffffffffff");
    CHECK(encode_hex(dhash(Image(9, 8, Rgb{40, 40, 40}))) == "0000000000000000");
    CHECK(encode_hex(dhash(gray_image(9, 8, stripes))) == "aaaaaaaaaaaaaaaa");
  }

  TEST_CASE("chash vectors") {
    CHECK(encode_hex(chash(Image(16, 16, Rgb{10, 20, 30}))) == std::string(48, '0'));
    std::vector<Rgb> px;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) px.push_back(x < 4 ? Rgb{255, 0, 0} : Rgb{0, 0, 255});
    }
    CHECK(encode_hex(chash(Image(8, 8, px))) == "f0f0f0f0f0f0f0f0" "0000000000000000" "0f0f0f0f0f0f0f0f");

    const Image gray = gray_image(8, 8, {0,  10, 20, 30, 40, 50, 60, 70, 5,  15, 25, 35, 45, 55, 65, 75,
                                         90, 80, 70, 60, 50, 40, 30, 20, 1,  2,  3,  4,  5,  6,  7,  8,
                                         200, 0, 200, 0, 200, 0, 200, 0, 9, 9, 9, 9, 99, 99, 99, 99,
                                         120, 121, 122, 123, 124, 125, 126, 127, 255, 0, 0, 0, 0, 0, 0, 255});
    const std::string c = encode_hex(chash(gray));
    const std::string a = encode_hex(ahash(gray));
    CHECK(c.substr(0, 16) == a);
    CHECK(c.substr(16, 16) == a);
    CHECK(c.substr(32, 16) == a);
  }

  TEST_CASE("every kind is deterministic") {
    const Image img = testutil::random_image(77, 51, 3);
    for (HashKind k : kAllHashKinds) CHECK(compute_hash(img, k) == compute_hash(img, k));
  }

  TEST_CASE("hamming examples") {
    const auto zero = from_hex64("0000000000000000");
    const auto ones = from_hex64("ffffffffffffffff");
    CHECK(hamming(zero, zero) == 0);
    CHECK(hamming(zero, ones) == 64);
    CHECK(hamming(from_hex64("0f0f0f0f0f0f0f0f"), from_hex64("0f0f0f0f0f0f0f0e")) == 1);
    CHECK_THROWS_AS(hamming(zero, PerceptualHash(HashKind::CHash)), InvalidArgument);
    CHECK_THROWS_AS(hamming(zero, PerceptualHash(HashKind::PHash)), InvalidArgument);
  }

  TEST_CASE("hamming is a metric") {
    CounterRng rng(8);
    for (HashKind k : {HashKind::AHash, HashKind::CHash}) {
      for (int i = 0; i < 500; ++i) {
        const auto a = testutil::random_hash(k, rng);
        const auto b = testutil::random_hash(k, rng);
        const auto c = testutil::random_hash(k, rng);
        CHECK(hamming(a, b) == hamming(b, a));
        CHECK((hamming(a, b) == 0) == (a == b));
        CHECK(hamming(a, c) <= hamming(a, b) + hamming(b, c));
      }
    }
  }

  TEST_CASE("hex serialization") {
    CHECK(encode_hex(PerceptualHash(HashKind::AHash)) == "0000000000000000");
    CHECK(encode_hex(PerceptualHash(HashKind::CHash)).size() == 48);
    PerceptualHash h(HashKind::AHash);
    h.set_bit(0, true);
    CHECK(encode_hex(h) == "8000000000000000");
    h.set_bit(63, true);
    CHECK(encode_hex(h) == "8000000000000001");

    CounterRng rng(9);
    for (HashKind k : kAllHashKinds) {
      for (int i = 0; i < 200; ++i) {
        const auto r = testutil::random_hash(k, rng);
        CHECK(decode_hex(k, encode_hex(r)) == r);
      }
    }
    CHECK_THROWS_AS(decode_hex(HashKind::AHash, "zzzzzzzzzzzzzzzz"), ParseError);
    CHECK_THROWS_AS(decode_hex(HashKind::AHash, "0F0F0F0F0F0F0F0F"), ParseError);
    CHECK_THROWS_AS(decode_hex(HashKind::AHash, "0f0f"), ParseError);
    CHECK_THROWS_AS(decode_hex(HashKind::CHash, "0f0f0f0f0f0f0f0f"), ParseError);
  }

  TEST_CASE("tolerant_mode examples") {
    const auto A = from_hex64("0000000000000000");
    const auto A1 = from_hex64("0000000000000001");
    const auto B = from_hex64("000000000000001f");  // d(A,B)=5
    {
      const std::vector<PerceptualHash> v{A, A, A};
      const auto d = tolerant_mode(v, 0);
      CHECK(d.mode_hash == A);
      CHECK(d.matched_count == 3);
      CHECK(d.outliers.empty());
      CHECK(d.avg_outlier_distance == 0.0);
    }
    {
      const std::vector<PerceptualHash> v{A, A, A, B};
      const auto d = tolerant_mode(v, 2);
      CHECK(d.mode_hash == A);
      CHECK(d.matched_count == 3);
      REQUIRE(d.outliers.size() == 1);
      CHECK(d.outliers[0] == Outlier{3, 5});
      CHECK(d.avg_outlier_distance == 5.0);
    }
    {
      const auto C = from_hex64("000000000000007e");  // d(A,C)=6, d(A1,C)=7
      REQUIRE(hamming(A, C) == 6);
      REQUIRE(hamming(A1, C) == 7);
      const std::vector<PerceptualHash> v{A1, A, C};
      const auto d = tolerant_mode(v, 1);
      CHECK(d.mode_hash == A);
      CHECK(d.matched_count == 2);
      REQUIRE(d.outliers.size() == 1);
      CHECK(d.outliers[0] == Outlier{2, 6});
    }
    CHECK_THROWS_AS(tolerant_mode(std::vector<PerceptualHash>{}, 0), InvalidArgument);
    CHECK_THROWS_AS(tolerant_mode(std::vector<PerceptualHash>{A, PerceptualHash(HashKind::PHash)}, 0), InvalidArgument);
    CHECK_THROWS_AS(tolerant_mode(std::vector<PerceptualHash>{A}, -1), InvalidArgument);
  }

  TEST_CASE("tolerant_mode matches the exhaustive oracle") {
    CounterRng rng(12);
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t n = 1 + rng.below(8);
      const int tol = static_cast<int>(rng.below(5));
      // Small perturbations of a few centers so supports actually overlap.
      std::vector<PerceptualHash> centers;
      for (int c = 0; c < 3; ++c) centers.push_back(testutil::random_hash(HashKind::AHash, rng));
      std::vector<PerceptualHash> hs;
      for (std::size_t i = 0; i < n; ++i) {
        PerceptualHash h = centers[rng.below(3)];
        for (int f = static_cast<int>(rng.below(4)); f > 0; --f) {
          const int b = static_cast<int>(rng.below(64));
          h.set_bit(b, !h.bit(b));
        }
        hs.push_back(h);
      }
      const auto d = tolerant_mode(hs, tol);
      const auto o = testutil::tolerant_mode_oracle(hs, tol);
      CHECK(d.mode_hash == o.mode);
      CHECK(d.matched_count == o.support);
      REQUIRE(d.outliers.size() == o.outliers.size());
      for (std::size_t i = 0; i < o.outliers.size(); ++i) {
        CHECK(d.outliers[i].index == o.outliers[i].first);
        CHECK(d.outliers[i].distance == o.outliers[i].second);
        CHECK(d.outliers[i].distance > tol);
      }
      CHECK(d.matched_count + d.outliers.size() == hs.size());
    }
  }

  TEST_CASE("tolerance at the bit length leaves no outliers") {
    CounterRng rng(13);
    for (HashKind k : {HashKind::AHash, HashKind::CHash}) {
      std::vector<PerceptualHash> hs;
      for (int i = 0; i < 8; ++i) hs.push_back(testutil::random_hash(k, rng));
      const auto d = tolerant_mode(hs, bit_length(k));
      CHECK(d.outliers.empty());
      CHECK(d.matched_count == hs.size());
    }
  }

  TEST_CASE("single-pixel changes move aHash by at most a couple of bits") {
    const Image base = testutil::random_image(256, 256, 21);
    const PerceptualHash h0 = ahash(base);
    CounterRng rng(22);
    int small = 0;
    for (int t = 0; t < 200; ++t) {
      Image img = base;
      Rgb& p = img.at(static_cast<int>(rng.below(256)), static_cast<int>(rng.below(256)));
      const int delta = rng.below(2) == 0 ? -1 : 1;
      for (std::uint8_t* c : {&p.r, &p.g, &p.b}) *c = static_cast<std::uint8_t>(std::clamp(*c + delta, 0, 255));
      small += hamming(h0, ahash(img)) <= 2 ? 1 : 0;
    }
    CHECK(small >= 198);
  }
}
