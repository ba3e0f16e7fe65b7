#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace genverify {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Owned 8-bit RGB raster, row-major.
class Image {
 public:
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<Rgb> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const Rgb> pixels() const noexcept { return pixels_; }
  std::span<Rgb> pixels() noexcept { return pixels_; }

  /// Raw interleaved r,g,b bytes.
  std::vector<std::uint8_t> bytes() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<Rgb> pixels_;
};

/// Real-valued single-channel raster with samples in [0, 255], row-major.
class GrayImage {
 public:
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  double at(int x, int y) const { return samples_[index(x, y)]; }
  double& at(int x, int y) { return samples_[index(x, y)]; }

  std::span<const double> samples() const noexcept { return samples_; }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<double> samples_;
};

/// n x n orthonormal DCT-II coefficients. Row index is the vertical
/// frequency, column index the horizontal frequency; (0, 0) is DC.
class DctBlock {
 public:
  DctBlock(int n, std::vector<double> coeffs);

  int size() const noexcept { return n_; }
  double at(int row, int col) const {
    return coeffs_[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(col)];
  }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

 private:
  int n_;
  std::vector<double> coeffs_;
};

enum class ImageFormat { PpmP6, Png };

/// Decodes a binary PPM (P6, maxval 255) or an 8-bit RGB/RGBA PNG (alpha is
/// dropped). Throws ParseError on malformed data and UnsupportedFormat on
/// other bit depths / color types / maxvals.
Image load_image(std::span<const std::uint8_t> bytes, ImageFormat format);

/// Sniffs the format from the magic bytes.
Image load_image(std::span<const std::uint8_t> bytes);

/// Reads and decodes a file; errors name the path.
Image load_image_file(const std::filesystem::path& path);

/// Serializes as binary PPM (P6, maxval 255).
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// BT.601 luma, unrounded: 0.299 r + 0.587 g + 0.114 b.
GrayImage to_gray(const Image& img);

enum class Channel { Red, Green, Blue };

/// A single color channel as a real-valued plane.
GrayImage channel_plane(const Image& img, Channel channel);

/// Area-weighted downsampling. Each output cell averages every input sample it
/// overlaps, weighting fractional edge pixels by covered area. Throws
/// InvalidArgument when asked to upscale.
GrayImage resize_box(const GrayImage& img, int out_width, int out_height);

/// The same area-overlap resampling without the downsampling restriction.
/// Hash pipelines use it so inputs smaller than the hash grid still hash.
GrayImage resample_area(const GrayImage& img, int out_width, int out_height);

/// Orthonormal 2-D DCT-II of a square block (n >= 2), evaluated separably.
DctBlock dct2(const GrayImage& block);

/// Inverse of dct2 (orthonormal DCT-III). Samples are not clamped.
std::vector<double> idct2(const DctBlock& block);

}  // namespace genverify
