#include "panofuse/raster_io.h"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace panofuse {

namespace {

namespace fs = std::filesystem;

std::uint32_t ToLittleEndian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
           (v >> 24);
  }
}

void WriteFloats(std::ostream& out, std::span<const float> values) {
  std::vector<std::uint32_t> words(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    words[i] = ToLittleEndian(std::bit_cast<std::uint32_t>(values[i]));
  }
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
}

void ReadFloats(std::istream& in, std::span<float> values,
                const fs::path& path) {
  std::vector<std::uint32_t> words(values.size());
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (static_cast<size_t>(in.gcount()) != words.size() * sizeof(std::uint32_t)) {
    throw IoError("truncated raster payload in " + path.string());
  }
  for (size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(ToLittleEndian(words[i]));
  }
}

std::ofstream OpenForWrite(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream OpenForRead(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

int ParseDigits(const char* p, int n, const fs::path& path) {
  int v = 0;
  for (int i = 0; i < n; ++i) {
    if (p[i] < '0' || p[i] > '9') {
      throw IoError("malformed F32R header in " + path.string());
    }
    v = v * 10 + (p[i] - '0');
  }
  return v;
}

std::uint8_t To8(double v) {
  if (!std::isfinite(v)) return 0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageF ToFloat(const ImageD& image) {
  ImageF out(image.width(), image.height(), image.channels());
  for (size_t i = 0; i < image.data().size(); ++i) {
    out[i] = static_cast<float>(image[i]);
  }
  return out;
}

ImageD ToDouble(const ImageF& image) {
  ImageD out(image.width(), image.height(), image.channels());
  for (size_t i = 0; i < image.data().size(); ++i) out[i] = image[i];
  return out;
}

void WriteF32R(const fs::path& path, const ImageF& image) {
  if (image.width() > 99999 || image.height() > 99999 ||
      image.channels() > 9) {
    throw InvalidInput("raster too large for the F32R header");
  }
  std::array<char, 48> header{};
  std::snprintf(header.data(), header.size(), "F32R%05d%05d%1d\n",
                image.width(), image.height(), image.channels());
  auto out = OpenForWrite(path);
  out.write(header.data(), 16);
  WriteFloats(out, image.data());
  if (!out) throw IoError("failed writing " + path.string());
}

void WriteF32R(const fs::path& path, const ImageD& image) {
  WriteF32R(path, ToFloat(image));
}

ImageF ReadF32R(const fs::path& path) {
  auto in = OpenForRead(path);
  std::array<char, 16> header{};
  in.read(header.data(), 16);
  if (in.gcount() != 16 || std::memcmp(header.data(), "F32R", 4) != 0 ||
      header[15] != '\n') {
    throw IoError("not an F32R raster: " + path.string());
  }
  const int w = ParseDigits(header.data() + 4, 5, path);
  const int h = ParseDigits(header.data() + 9, 5, path);
  const int c = ParseDigits(header.data() + 14, 1, path);
  if (w <= 0 || h <= 0 || c <= 0) {
    throw IoError("empty F32R raster: " + path.string());
  }
  ImageF image(w, h, c);
  ReadFloats(in, image.data(), path);
  return image;
}

void WritePfm(const fs::path& path, const ImageF& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw InvalidInput("PFM supports 1 or 3 channels");
  }
  auto out = OpenForWrite(path);
  out << (image.channels() == 1 ? "Pf" : "PF") << "\n"
      << image.width() << " " << image.height() << "\n-1.0\n";
  for (int y = image.height() - 1; y >= 0; --y) WriteFloats(out, image.row(y));
  if (!out) throw IoError("failed writing " + path.string());
}

void WritePfm(const fs::path& path, const ImageD& image) {
  WritePfm(path, ToFloat(image));
}

ImageF ReadPfm(const fs::path& path) {
  auto in = OpenForRead(path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "Pf" && magic != "PF") || w <= 0 || h <= 0) {
    throw IoError("not a PFM raster: " + path.string());
  }
  if (scale >= 0.0) {
    throw IoError("big-endian PFM is not supported: " + path.string());
  }
  in.get();  // single whitespace byte after the scale
  ImageF image(w, h, magic == "Pf" ? 1 : 3);
  for (int y = h - 1; y >= 0; --y) ReadFloats(in, image.row(y), path);
  return image;
}

ImageD ReadRaster(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return ToDouble(ReadPfm(path));
  if (ext == ".f32r") return ToDouble(ReadF32R(path));
  throw IoError("unsupported raster extension '" + ext + "' for " +
                path.string());
}

ImageD ReadPng(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  ImageD image(static_cast<int>(png.width), static_cast<int>(png.height), 3);
  for (size_t i = 0; i < buffer.size(); ++i) image[i] = buffer[i] / 255.0;
  return image;
}

void WritePng(const fs::path& path, const Image<std::uint8_t>& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw InvalidInput("PNG export supports 1 or 3 channels");
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.data().data(), 0,
                               nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

Image<std::uint8_t> Quantize8(const ImageD& image) {
  Image<std::uint8_t> out(image.width(), image.height(), image.channels());
  for (size_t i = 0; i < image.data().size(); ++i) out[i] = To8(image[i]);
  return out;
}

Image<std::uint8_t> LinearGray(const ImageD& image, double lo, double hi) {
  Image<std::uint8_t> out(image.width(), image.height(), 1);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y) = To8((image.at(x, y) - lo) / span);
    }
  }
  return out;
}

Image<std::uint8_t> TurboColorize(const ImageD& depth, double lo, double hi) {
  static constexpr double kR[6] = {0.13572138,    4.61539260,  -42.66032258,
                                   132.13108234,  -152.94239396, 59.28637943};
  static constexpr double kG[6] = {0.09140261,  2.19418839, 4.84296658,
                                   -14.18503333, 4.27729857, 2.82956604};
  static constexpr double kB[6] = {0.10667330,   12.64194608,  -60.58204836,
                                   110.36276771, -89.90310912, 27.34824973};
  const auto poly = [](const double* k, double t) {
    return k[0] + t * (k[1] + t * (k[2] + t * (k[3] + t * (k[4] + t * k[5]))));
  };
  Image<std::uint8_t> out(depth.width(), depth.height(), 3);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth.at(x, y);
      if (!std::isfinite(d)) continue;
      const double t = std::clamp((d - lo) / span, 0.0, 1.0);
      out.at(x, y, 0) = To8(poly(kR, t));
      out.at(x, y, 1) = To8(poly(kG, t));
      out.at(x, y, 2) = To8(poly(kB, t));
    }
  }
  return out;
}

}  // namespace panofuse
