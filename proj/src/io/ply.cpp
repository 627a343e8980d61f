#include "radmesh/io/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "radmesh/error.hpp"

namespace radmesh::io {

static_assert(std::endian::native == std::endian::little, "binary PLY assumes a little-endian host");

namespace {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

Scalar parse_scalar(const std::string& t) {
  if (t == "char" || t == "int8") return Scalar::I8;
  if (t == "uchar" || t == "uint8") return Scalar::U8;
  if (t == "short" || t == "int16") return Scalar::I16;
  if (t == "ushort" || t == "uint16") return Scalar::U16;
  if (t == "int" || t == "int32") return Scalar::I32;
  if (t == "uint" || t == "uint32") return Scalar::U32;
  if (t == "float" || t == "float32") return Scalar::F32;
  if (t == "double" || t == "float64") return Scalar::F64;
  throw Error(ErrorCode::Format, "unknown PLY type " + t);
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8:
    case Scalar::U8: return 1;
    case Scalar::I16:
    case Scalar::U16: return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

template <class T>
double load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode(Scalar s, const char* p) {
  switch (s) {
    case Scalar::I8: return load<std::int8_t>(p);
    case Scalar::U8: return load<std::uint8_t>(p);
    case Scalar::I16: return load<std::int16_t>(p);
    case Scalar::U16: return load<std::uint16_t>(p);
    case Scalar::I32: return load<std::int32_t>(p);
    case Scalar::U32: return load<std::uint32_t>(p);
    case Scalar::F32: return load<float>(p);
    case Scalar::F64: return load<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

double read_binary(std::istream& in, Scalar s, const std::string& path) {
  char buf[8];
  if (!in.read(buf, static_cast<std::streamsize>(scalar_size(s)))) {
    throw Error(ErrorCode::Format, "truncated PLY body in " + path);
  }
  return decode(s, buf);
}

}  // namespace

std::vector<Point3> read_points_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::Format, path + " is not a PLY file");
  }
  bool ascii = false;
  std::vector<Element> elements;
  bool have_format = false;
  while (true) {
    if (!std::getline(in, line)) throw Error(ErrorCode::Format, "unterminated PLY header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw Error(ErrorCode::Format, "unsupported PLY format " + fmt + " in " + path);
      }
      have_format = true;
    } else if (key == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) throw Error(ErrorCode::Format, "bad element line in " + path);
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorCode::Format, "property before element in " + path);
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.list = true;
        p.count_type = parse_scalar(count_type);
        p.type = parse_scalar(item_type);
      } else {
        p.type = parse_scalar(type);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    }
  }
  if (!have_format) throw Error(ErrorCode::Format, "PLY header without format in " + path);

  std::vector<Point3> points;
  for (const Element& e : elements) {
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      if (e.props[i].list) continue;
      if (e.props[i].name == "x") ix = static_cast<int>(i);
      if (e.props[i].name == "y") iy = static_cast<int>(i);
      if (e.props[i].name == "z") iz = static_cast<int>(i);
    }
    const bool is_vertex = e.name == "vertex";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      throw Error(ErrorCode::Format, "vertex element lacks x, y, z in " + path);
    }
    if (is_vertex) points.resize(e.count);
    std::vector<double> values(e.props.size());
    for (std::size_t item = 0; item < e.count; ++item) {
      if (ascii) {
        if (!std::getline(in, line)) throw Error(ErrorCode::Format, "truncated PLY body in " + path);
        std::istringstream ls(line);
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const Property& p = e.props[i];
          if (p.list) {
            std::size_t n = 0;
            ls >> n;
            double skip;
            for (std::size_t j = 0; j < n; ++j) ls >> skip;
          } else {
            ls >> values[i];
          }
          if (!ls) throw Error(ErrorCode::Format, "bad PLY value in " + path);
        }
      } else {
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const Property& p = e.props[i];
          if (p.list) {
            const double n = read_binary(in, p.count_type, path);
            if (n < 0) throw Error(ErrorCode::Format, "negative list length in " + path);
            in.ignore(static_cast<std::streamsize>(n) * static_cast<std::streamsize>(scalar_size(p.type)));
          } else {
            values[i] = read_binary(in, p.type, path);
          }
        }
      }
      if (is_vertex) points[item] = {values[ix], values[iy], values[iz]};
    }
    if (is_vertex) break;
  }
  for (const Point3& p : points) {
    if (!is_finite(p)) throw Error(ErrorCode::Format, "non-finite vertex in " + path);
  }
  return points;
}

void write_points_ply(const std::string& path, std::span<const Point3> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const Point3& p : points) {
    const double xyz[3] = {p.x, p.y, p.z};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

void write_mesh_ply(const std::string& path, const geometry::TetMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << mesh.num_points()
      << "\nproperty double x\nproperty double y\nproperty double z\nelement tetra "
      << mesh.num_tets() << "\nproperty list uchar uint vertex_indices\nend_header\n";
  for (const Point3& p : mesh.points()) {
    const double xyz[3] = {p.x, p.y, p.z};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& t : mesh.tets()) {
    const unsigned char n = 4;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(t.verts.data()), 16);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

}  // namespace radmesh::io
