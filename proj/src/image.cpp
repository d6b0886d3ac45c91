#include "defectchain/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "defectchain/error.hpp"

namespace defectchain {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      pixels_(std::size_t(width) * std::size_t(height), fill) {
  if (width < 0 || height < 0) throw DataError("negative image dimensions");
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0 ||
      pixels_.size() != std::size_t(width) * std::size_t(height)) {
    throw DataError("pixel buffer does not match image dimensions");
  }
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((77u * r + 150u * g + 29u * b + 128u) >> 8);
}

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw DataError("malformed PNM header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1 << 24)) throw DataError("PNM value out of range");
    }
    return static_cast<int>(v);
  }

  std::uint8_t raw() {
    if (pos_ >= bytes_.size()) throw DataError("truncated PNM data");
    return bytes_[pos_++];
  }

  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw DataError("malformed PNM header");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("not a PNM image");
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw DataError(std::string("unsupported PNM variant P") + kind);
  }
  PnmReader in(bytes.subspan(2));
  const int w = in.number();
  const int h = in.number();
  const int maxval = in.number();
  if (w <= 0 || h <= 0) throw DataError("PNM image has zero size");
  if (maxval <= 0 || maxval > 255) throw DataError("only 8-bit PNM is supported");
  const bool binary = kind == '5' || kind == '6';
  const bool color = kind == '3' || kind == '6';
  if (binary) in.single_space();

  auto sample = [&]() -> std::uint8_t {
    const int v = binary ? in.raw() : in.number();
    if (v > maxval) throw DataError("PNM sample exceeds maxval");
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };

  std::vector<std::uint8_t> px(std::size_t(w) * h);
  for (auto& p : px) {
    if (color) {
      const auto r = sample();
      const auto g = sample();
      const auto b = sample();
      p = luma(r, g, b);
    } else {
      p = sample();
    }
  }
  return GrayImage(w, h, std::move(px));
}

GrayImage read_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  const auto bytes = encode_pgm(img);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace defectchain
