#include "salboost/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "salboost/error.hpp"

namespace salboost {

GrayImage to_gray(const RgbImage& image) {
  GrayImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Rgb c = image.data[i];
    const double y = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, y)));
  }
  return out;
}

RgbImage rgb_image_of(const PointCloud& cloud) {
  RgbImage out(cloud.width(), cloud.height());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    out.data[i] = cloud[i].valid() ? cloud[i].rgb : Rgb{};
  return out;
}

namespace {

struct NetpbmHeader {
  char kind = 0;  // '2', '3', '5', '6'
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  unsigned maxval = 0;
  std::size_t data_offset = 0;
};

/// Parses the magic and three header integers, skipping '#' comments.
NetpbmHeader read_netpbm_header(const std::string& path, const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw ParseError::at_byte(path, 0, "not a netpbm file");
  NetpbmHeader h;
  h.kind = bytes[1];
  if (h.kind != '2' && h.kind != '3' && h.kind != '5' && h.kind != '6')
    throw ParseError::at_byte(path, 1, std::string("unsupported netpbm kind P") + h.kind);
  std::size_t pos = 2;
  auto next_int = [&]() -> unsigned long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw ParseError::at_byte(path, pos, "expected an integer in the header");
    unsigned long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<unsigned long>(bytes[pos] - '0');
      if (v > 1u << 24) throw ParseError::at_byte(path, pos, "header value too large");
      ++pos;
    }
    return v;
  };
  h.width = static_cast<std::uint32_t>(next_int());
  h.height = static_cast<std::uint32_t>(next_int());
  h.maxval = static_cast<unsigned>(next_int());
  if (h.maxval == 0 || h.maxval > 255)
    throw ParseError::at_byte(path, pos, "only 8-bit netpbm (maxval 1..255) is supported");
  // Exactly one whitespace byte separates the header from a binary raster.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ParseError::at_byte(path, pos, "missing whitespace after header");
  h.data_offset = pos + 1;
  return h;
}

std::vector<std::uint8_t> read_samples(const std::string& path, const std::string& bytes,
                                       const NetpbmHeader& h, std::size_t count) {
  std::vector<std::uint8_t> out(count);
  const bool binary = h.kind == '5' || h.kind == '6';
  if (binary) {
    if (bytes.size() < h.data_offset + count)
      throw ParseError::at_byte(path, bytes.size(),
                                "raster truncated: need " + std::to_string(count) + " bytes");
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<unsigned char>(bytes[h.data_offset + i]);
      if (v > h.maxval) throw ParseError::at_byte(path, h.data_offset + i, "sample exceeds maxval");
      out[i] = v;
    }
  } else {
    std::size_t pos = h.data_offset;
    for (std::size_t i = 0; i < count; ++i) {
      while (pos < bytes.size() && (std::isspace(static_cast<unsigned char>(bytes[pos])) || bytes[pos] == '#')) {
        if (bytes[pos] == '#')
          while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        else
          ++pos;
      }
      if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
        throw ParseError::at_byte(path, pos, "expected sample " + std::to_string(i));
      unsigned v = 0;
      while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        v = v * 10 + static_cast<unsigned>(bytes[pos] - '0');
        if (v > h.maxval) throw ParseError::at_byte(path, pos, "sample exceeds maxval");
        ++pos;
      }
      out[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (h.maxval != 255)
    for (auto& v : out) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / h.maxval));
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

GrayImage load_pgm(const std::string& path) {
  const std::string bytes = slurp(path);
  const auto h = read_netpbm_header(path, bytes);
  if (h.kind != '2' && h.kind != '5') throw ParseError::at_byte(path, 0, "not a PGM (P2/P5) file");
  GrayImage img(h.width, h.height);
  img.data = read_samples(path, bytes, h, img.size());
  return img;
}

RgbImage load_ppm(const std::string& path) {
  const std::string bytes = slurp(path);
  const auto h = read_netpbm_header(path, bytes);
  if (h.kind != '3' && h.kind != '6') throw ParseError::at_byte(path, 0, "not a PPM (P3/P6) file");
  RgbImage img(h.width, h.height);
  const auto s = read_samples(path, bytes, h, img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = Rgb{s[3 * i], s[3 * i + 1], s[3 * i + 2]};
  return img;
}

RgbImage load_image(const std::string& path) {
  const std::string bytes = slurp(path);
  const auto h = read_netpbm_header(path, bytes);
  if (h.kind == '3' || h.kind == '6') return load_ppm(path);
  const GrayImage g = load_pgm(path);
  RgbImage out(g.width, g.height);
  for (std::size_t i = 0; i < g.size(); ++i) out.data[i] = Rgb{g.data[i], g.data[i], g.data[i]};
  return out;
}

void save_pgm(const GrayImage& image, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (binary ? "P5\n" : "P2\n") << image.width << ' ' << image.height << "\n255\n";
  if (binary) {
    out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.size()));
  } else {
    for (std::uint32_t r = 0; r < image.height; ++r) {
      for (std::uint32_t c = 0; c < image.width; ++c) out << (c ? " " : "") << int{image(r, c)};
      out << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path);
}

void save_ppm(const RgbImage& image, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (binary ? "P6\n" : "P3\n") << image.width << ' ' << image.height << "\n255\n";
  for (std::uint32_t r = 0; r < image.height; ++r) {
    for (std::uint32_t c = 0; c < image.width; ++c) {
      const Rgb p = image(r, c);
      if (binary) {
        const char px[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
        out.write(px, 3);
      } else {
        out << (c ? " " : "") << int{p.r} << ' ' << int{p.g} << ' ' << int{p.b};
      }
    }
    if (!binary) out << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace salboost
