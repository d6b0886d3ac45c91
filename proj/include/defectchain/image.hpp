#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace defectchain {

// Row-major 8-bit grayscale image.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[std::size_t(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[std::size_t(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Fixed-point luma: (77 R + 150 G + 29 B + 128) >> 8.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Reads binary or ASCII PGM/PPM (P2, P3, P5, P6) with maxval <= 255. Color
// images are converted with luma().
GrayImage read_pnm(const std::filesystem::path& path);
GrayImage decode_pnm(std::span<const std::uint8_t> bytes);

// Writes a binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

}  // namespace defectchain
