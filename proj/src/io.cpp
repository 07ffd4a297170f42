#include "salboost/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

#include "salboost/error.hpp"

namespace salboost {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path);
  return ss.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Line-oriented cursor over a text region that tracks 1-based line numbers
/// and the byte offset of the next unread line.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    if (pos_ >= text_.size()) return std::nullopt;
    const std::size_t end = text_.find('\n', pos_);
    std::string_view line =
        text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  }
  std::size_t line() const { return line_; }
  std::size_t offset() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars rejects a leading '+', and "-nan" needs the sign stripped.
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    if (tok == "-nan" || tok == "-NaN") tok.remove_prefix(1);
  }
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::uint32_t pack_rgb(Rgb c) {
  return (static_cast<std::uint32_t>(c.r) << 16) | (static_cast<std::uint32_t>(c.g) << 8) | c.b;
}

Rgb unpack_rgb(std::uint32_t v) {
  return Rgb{static_cast<std::uint8_t>((v >> 16) & 0xff), static_cast<std::uint8_t>((v >> 8) & 0xff),
             static_cast<std::uint8_t>(v & 0xff)};
}

// ----------------------------------------------------------------------------
// PCD

struct PcdField {
  std::string name;
  std::size_t size = 4;
  char type = 'F';
  std::size_t count = 1;
  std::size_t offset = 0;  // bytes, binary layout
  std::size_t column = 0;  // first token, ascii layout
};

enum class Role { X, Y, Z, Rgb, NX, NY, NZ };

struct PcdHeader {
  std::vector<PcdField> fields;
  std::uint32_t width = 0;
  std::uint32_t height = 1;
  std::size_t points = 0;
  std::string data;
  std::size_t point_bytes = 0;
  std::size_t columns = 0;
  bool have_width = false;
  bool have_points = false;
};

double read_binary_scalar(const char* p, const PcdField& f) {
  switch (f.type) {
    case 'F':
      if (f.size == 4) {
        float v;
        std::memcpy(&v, p, 4);
        return v;
      }
      {
        double d;
        std::memcpy(&d, p, 8);
        return d;
      }
    case 'U':
      switch (f.size) {
        case 1: return static_cast<std::uint8_t>(*p);
        case 2: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
        case 4: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
        default: { std::uint64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
      }
    default:
      switch (f.size) {
        case 1: return static_cast<std::int8_t>(*p);
        case 2: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
        case 4: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
        default: { std::int64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
      }
  }
}

PcdHeader parse_pcd_header(const std::string& path, LineReader& lines) {
  PcdHeader h;
  std::vector<std::string> names;
  std::vector<std::size_t> sizes, counts;
  std::vector<char> types;
  bool done = false;
  while (auto line = lines.next()) {
    const auto toks = split_ws(*line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const std::string_view key = toks[0];
    auto fail = [&](const std::string& what) {
      return ParseError::at_line(path, lines.line(), what);
    };
    auto need_args = [&](std::size_t n) {
      if (toks.size() < n + 1) throw fail(std::string(key) + " needs " + std::to_string(n) + " value(s)");
    };
    auto to_size = [&](std::string_view t) {
      std::size_t v = 0;
      if (!parse_number(t, v)) throw fail("expected a non-negative integer, got '" + std::string(t) + "'");
      return v;
    };
    if (key == "VERSION") {
      need_args(1);
      if (toks[1] != "0.7" && toks[1] != ".7") throw fail("unsupported PCD version " + std::string(toks[1]));
    } else if (key == "FIELDS" || key == "COLUMNS") {
      need_args(1);
      for (std::size_t i = 1; i < toks.size(); ++i) names.emplace_back(toks[i]);
    } else if (key == "SIZE") {
      need_args(1);
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto s = to_size(toks[i]);
        if (s != 1 && s != 2 && s != 4 && s != 8) throw fail("unsupported field size " + std::string(toks[i]));
        sizes.push_back(s);
      }
    } else if (key == "TYPE") {
      need_args(1);
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (toks[i].size() != 1 || (toks[i][0] != 'F' && toks[i][0] != 'U' && toks[i][0] != 'I'))
          throw fail("unsupported field type " + std::string(toks[i]));
        types.push_back(toks[i][0]);
      }
    } else if (key == "COUNT") {
      need_args(1);
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto c = to_size(toks[i]);
        if (c == 0) throw fail("field count must be positive");
        counts.push_back(c);
      }
    } else if (key == "WIDTH") {
      need_args(1);
      h.width = static_cast<std::uint32_t>(to_size(toks[1]));
      h.have_width = true;
    } else if (key == "HEIGHT") {
      need_args(1);
      h.height = static_cast<std::uint32_t>(to_size(toks[1]));
    } else if (key == "VIEWPOINT") {
      // Sensor pose is not applied to the data.
    } else if (key == "POINTS") {
      need_args(1);
      h.points = to_size(toks[1]);
      h.have_points = true;
    } else if (key == "DATA") {
      need_args(1);
      h.data = std::string(toks[1]);
      if (h.data == "binary_compressed") throw fail("compressed PCD data is not supported");
      if (h.data != "ascii" && h.data != "binary") throw fail("unknown DATA kind " + h.data);
      done = true;
      break;
    } else {
      throw fail("unknown header key " + std::string(key));
    }
  }
  if (!done) throw ParseError::at_line(path, lines.line(), "missing DATA line");
  if (names.empty()) throw ParseError::at_line(path, lines.line(), "missing FIELDS");
  if (counts.empty()) counts.assign(names.size(), 1);
  if (sizes.size() != names.size() || types.size() != names.size() || counts.size() != names.size())
    throw ParseError::at_line(path, lines.line(), "FIELDS/SIZE/TYPE/COUNT lengths disagree");
  if (!h.have_width) throw ParseError::at_line(path, lines.line(), "missing WIDTH");
  if (!h.have_points) h.points = static_cast<std::size_t>(h.width) * h.height;
  if (h.height == 0 || static_cast<std::size_t>(h.width) * h.height != h.points)
    throw ParseError::at_line(path, lines.line(), "WIDTH x HEIGHT does not equal POINTS");
  std::size_t offset = 0, column = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (types[i] == 'F' && sizes[i] != 4 && sizes[i] != 8)
      throw ParseError::at_line(path, lines.line(), "float field " + names[i] + " must have size 4 or 8");
    h.fields.push_back(PcdField{names[i], sizes[i], types[i], counts[i], offset, column});
    offset += sizes[i] * counts[i];
    column += counts[i];
  }
  h.point_bytes = offset;
  h.columns = column;
  return h;
}

struct FieldMap {
  const PcdField* x = nullptr;
  const PcdField* y = nullptr;
  const PcdField* z = nullptr;
  const PcdField* rgb = nullptr;
  const PcdField* nx = nullptr;
  const PcdField* ny = nullptr;
  const PcdField* nz = nullptr;
};

FieldMap map_fields(const std::string& path, const PcdHeader& h) {
  FieldMap m;
  for (const auto& f : h.fields) {
    if (f.name == "x") m.x = &f;
    else if (f.name == "y") m.y = &f;
    else if (f.name == "z") m.z = &f;
    else if (f.name == "rgb" || f.name == "rgba") m.rgb = &f;
    else if (f.name == "normal_x") m.nx = &f;
    else if (f.name == "normal_y") m.ny = &f;
    else if (f.name == "normal_z") m.nz = &f;
  }
  if (!m.x || !m.y || !m.z) throw ParseError(path + ": PCD lacks x y z fields");
  for (const PcdField* f : {m.x, m.y, m.z, m.nx, m.ny, m.nz}) {
    if (f && (f->type != 'F' || f->count != 1))
      throw ParseError(path + ": field " + f->name + " must be a single float");
  }
  if (m.rgb && (m.rgb->size != 4 || m.rgb->count != 1 || m.rgb->type == 'I'))
    throw ParseError(path + ": field " + m.rgb->name + " must be a packed 4-byte F or U");
  const bool any_normal = m.nx || m.ny || m.nz;
  if (any_normal && !(m.nx && m.ny && m.nz))
    throw ParseError(path + ": normal fields must come as a triple");
  return m;
}

PointCloud load_pcd(const std::string& path, const std::string& text) {
  LineReader lines(text);
  const PcdHeader h = parse_pcd_header(path, lines);
  const FieldMap m = map_fields(path, h);
  const bool has_rgb = m.rgb != nullptr;
  const bool has_normals = m.nx != nullptr;
  std::vector<Point3> pts(h.points);

  if (h.data == "binary") {
    const std::size_t start = lines.offset();
    const std::size_t need = h.points * h.point_bytes;
    if (text.size() < start + need)
      throw ParseError::at_byte(path, text.size(),
                                "binary payload truncated: expected " + std::to_string(need) +
                                    " bytes from offset " + std::to_string(start));
    const char* base = text.data() + start;
    for (std::size_t i = 0; i < h.points; ++i) {
      const char* rec = base + i * h.point_bytes;
      Point3& p = pts[i];
      p.position = Vec3(read_binary_scalar(rec + m.x->offset, *m.x),
                        read_binary_scalar(rec + m.y->offset, *m.y),
                        read_binary_scalar(rec + m.z->offset, *m.z));
      if (has_rgb) {
        std::uint32_t v;
        std::memcpy(&v, rec + m.rgb->offset, 4);
        p.rgb = unpack_rgb(v);
      }
      if (has_normals)
        p.normal = Vec3(read_binary_scalar(rec + m.nx->offset, *m.nx),
                        read_binary_scalar(rec + m.ny->offset, *m.ny),
                        read_binary_scalar(rec + m.nz->offset, *m.nz));
    }
  } else {
    std::size_t i = 0;
    while (i < h.points) {
      auto line = lines.next();
      if (!line)
        throw ParseError::at_line(path, lines.line(),
                                  "expected " + std::to_string(h.points) + " points, found " +
                                      std::to_string(i));
      const auto toks = split_ws(*line);
      if (toks.empty()) continue;
      if (toks.size() != h.columns)
        throw ParseError::at_line(path, lines.line(),
                                  "expected " + std::to_string(h.columns) + " values, got " +
                                      std::to_string(toks.size()));
      auto scalar = [&](const PcdField* f) {
        double v;
        if (!parse_number(toks[f->column], v))
          throw ParseError::at_line(path, lines.line(),
                                    "bad value '" + std::string(toks[f->column]) + "' for " + f->name);
        return v;
      };
      Point3& p = pts[i];
      p.position = Vec3(scalar(m.x), scalar(m.y), scalar(m.z));
      if (has_rgb) {
        const std::string_view tok = toks[m.rgb->column];
        std::uint32_t bits = 0;
        if (m.rgb->type == 'F') {
          float f;
          if (!parse_number(tok, f))
            throw ParseError::at_line(path, lines.line(), "bad rgb value '" + std::string(tok) + "'");
          bits = std::bit_cast<std::uint32_t>(f);
        } else if (!parse_number(tok, bits)) {
          throw ParseError::at_line(path, lines.line(), "bad rgb value '" + std::string(tok) + "'");
        }
        p.rgb = unpack_rgb(bits);
      }
      if (has_normals) p.normal = Vec3(scalar(m.nx), scalar(m.ny), scalar(m.nz));
      ++i;
    }
  }
  return PointCloud(std::move(pts), h.width, h.height, has_rgb, has_normals);
}

void save_pcd(const PointCloud& cloud, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const bool rgb = cloud.has_rgb();
  const bool normals = cloud.has_normals();
  out << "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z";
  if (rgb) out << " rgb";
  if (normals) out << " normal_x normal_y normal_z";
  out << "\nSIZE 8 8 8" << (rgb ? " 4" : "") << (normals ? " 8 8 8" : "");
  out << "\nTYPE F F F" << (rgb ? " U" : "") << (normals ? " F F F" : "");
  out << "\nCOUNT 1 1 1" << (rgb ? " 1" : "") << (normals ? " 1 1 1" : "");
  out << "\nWIDTH " << cloud.width() << "\nHEIGHT " << cloud.height()
      << "\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " << cloud.size() << "\nDATA "
      << (binary ? "binary" : "ascii") << "\n";
  if (binary) {
    std::vector<char> rec;
    for (const auto& p : cloud.points()) {
      rec.clear();
      auto put = [&](const void* src, std::size_t n) {
        const auto* c = static_cast<const char*>(src);
        rec.insert(rec.end(), c, c + n);
      };
      put(p.position.data(), 24);
      if (rgb) {
        const std::uint32_t v = pack_rgb(p.rgb);
        put(&v, 4);
      }
      if (normals) put(p.normal.data(), 24);
      out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
  } else {
    for (const auto& p : cloud.points()) {
      out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
          << format_double(p.position.z());
      if (rgb) out << ' ' << pack_rgb(p.rgb);
      if (normals)
        out << ' ' << format_double(p.normal.x()) << ' ' << format_double(p.normal.y()) << ' '
            << format_double(p.normal.z());
      out << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path);
}

// ----------------------------------------------------------------------------
// PLY (ascii)

PointCloud load_ply(const std::string& path, const std::string& text) {
  LineReader lines(text);
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
  };
  std::vector<Element> elements;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> organized;
  bool header_done = false;
  while (auto line = lines.next()) {
    const auto toks = split_ws(*line);
    if (toks.empty()) continue;
    auto fail = [&](const std::string& what) { return ParseError::at_line(path, lines.line(), what); };
    if (lines.line() == 1) {
      if (toks[0] != "ply") throw fail("missing ply magic");
      continue;
    }
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") throw fail("only ascii PLY is supported");
    } else if (toks[0] == "comment" || toks[0] == "obj_info") {
      if (toks.size() == 4 && toks[1] == "organized") {
        std::uint32_t w, h;
        if (!parse_number(toks[2], w) || !parse_number(toks[3], h)) throw fail("bad organized comment");
        organized = std::make_pair(w, h);
      }
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw fail("element needs a name and a count");
      Element e;
      e.name = std::string(toks[1]);
      if (!parse_number(toks[2], e.count)) throw fail("bad element count");
      elements.push_back(std::move(e));
    } else if (toks[0] == "property") {
      if (elements.empty()) throw fail("property before element");
      if (toks.size() < 3) throw fail("malformed property");
      if (toks[1] == "list") {
        if (elements.back().name == "vertex") throw fail("list property on vertex element");
        elements.back().props.emplace_back(toks.back());
      } else {
        static const std::vector<std::string_view> known = {
            "char", "uchar", "short", "ushort", "int", "uint", "float", "double",
            "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64"};
        if (std::find(known.begin(), known.end(), toks[1]) == known.end())
          throw fail("unsupported property type " + std::string(toks[1]));
        elements.back().props.emplace_back(toks[2]);
      }
    } else if (toks[0] == "end_header") {
      header_done = true;
      break;
    } else {
      throw fail("unknown header line '" + std::string(toks[0]) + "'");
    }
  }
  if (!header_done) throw ParseError::at_line(path, lines.line(), "missing end_header");

  std::vector<Point3> pts;
  bool has_rgb = false, has_normals = false;
  bool seen_vertex = false;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i)
        if (!lines.next()) throw ParseError::at_line(path, lines.line(), "truncated " + e.name + " data");
      continue;
    }
    seen_vertex = true;
    auto find = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
      for (auto n : names)
        for (std::size_t k = 0; k < e.props.size(); ++k)
          if (e.props[k] == n) return k;
      return std::nullopt;
    };
    const auto ix = find({"x"}), iy = find({"y"}), iz = find({"z"});
    if (!ix || !iy || !iz) throw ParseError(path + ": PLY vertex lacks x y z");
    const auto ir = find({"red", "r"}), ig = find({"green", "g"}), ib = find({"blue", "b"});
    const auto inx = find({"nx", "normal_x"}), iny = find({"ny", "normal_y"}),
               inz = find({"nz", "normal_z"});
    has_rgb = ir && ig && ib;
    has_normals = inx && iny && inz;
    pts.resize(e.count);
    std::size_t i = 0;
    while (i < e.count) {
      auto line = lines.next();
      if (!line) throw ParseError::at_line(path, lines.line(), "truncated vertex data");
      const auto toks = split_ws(*line);
      if (toks.empty()) continue;
      if (toks.size() != e.props.size())
        throw ParseError::at_line(path, lines.line(),
                                  "expected " + std::to_string(e.props.size()) + " values, got " +
                                      std::to_string(toks.size()));
      auto num = [&](std::size_t k) {
        double v;
        if (!parse_number(toks[k], v))
          throw ParseError::at_line(path, lines.line(), "bad value '" + std::string(toks[k]) + "'");
        return v;
      };
      auto channel = [&](std::size_t k) {
        const double v = num(k);
        if (!(v >= 0 && v <= 255)) throw ParseError::at_line(path, lines.line(), "color out of range");
        return static_cast<std::uint8_t>(v);
      };
      Point3& p = pts[i];
      p.position = Vec3(num(*ix), num(*iy), num(*iz));
      if (has_rgb) p.rgb = Rgb{channel(*ir), channel(*ig), channel(*ib)};
      if (has_normals) p.normal = Vec3(num(*inx), num(*iny), num(*inz));
      ++i;
    }
  }
  if (!seen_vertex) throw ParseError(path + ": PLY has no vertex element");
  if (organized) {
    if (static_cast<std::size_t>(organized->first) * organized->second != pts.size())
      throw ParseError(path + ": organized comment does not match vertex count");
    return PointCloud(std::move(pts), organized->first, organized->second, has_rgb, has_normals);
  }
  return PointCloud::unorganized(std::move(pts), has_rgb, has_normals);
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  if (cloud.organized()) out << "comment organized " << cloud.width() << ' ' << cloud.height() << '\n';
  out << "element vertex " << cloud.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_rgb()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (const auto& p : cloud.points()) {
    out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
        << format_double(p.position.z());
    if (cloud.has_rgb())
      out << ' ' << int{p.rgb.r} << ' ' << int{p.rgb.g} << ' ' << int{p.rgb.b};
    if (cloud.has_normals())
      out << ' ' << format_double(p.normal.x()) << ' ' << format_double(p.normal.y()) << ' '
          << format_double(p.normal.z());
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace

PointCloud load_cloud(const std::string& path) {
  const std::string text = read_file(path);
  if (text.starts_with("ply")) return load_ply(path, text);
  return load_pcd(path, text);
}

void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::PcdAscii: save_pcd(cloud, path, false); break;
    case CloudFormat::PcdBinary: save_pcd(cloud, path, true); break;
    case CloudFormat::PlyAscii: save_ply(cloud, path); break;
  }
}

}  // namespace salboost
