#include "fvmatch/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fvmatch {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool has_extension(const std::string& path, const std::string& ext) {
  if (path.size() < ext.size()) return false;
  return lower(path.substr(path.size() - ext.size())) == ext;
}

/// Line reader that tracks line numbers and skips blanks/comments.
class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  /// Next non-empty, non-comment line. `#SIGNAL` directives are not comments.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_number_;
      std::size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos) continue;
      if (line[start] == '#' && line.compare(start, 7, "#SIGNAL") != 0) continue;
      if (start > 0 || line.back() == '\r') {
        std::size_t end = line.find_last_not_of(" \t\r");
        line = line.substr(start, end - start + 1);
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_ + ":" + std::to_string(line_number_) + ": " + what);
  }

  int line() const { return line_number_; }

 private:
  std::istream& in_;
  std::string path_;
  int line_number_ = 0;
};

std::vector<double> parse_doubles(LineReader& reader, const std::string& line, std::size_t count,
                                  const std::string& what) {
  std::istringstream ss(line);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    if (!(ss >> out[i])) reader.fail("expected " + std::to_string(count) + " " + what);
  return out;
}

FShapeFile load_off(std::istream& in, const std::string& path) {
  LineReader reader(in, path);
  std::string line;
  if (!reader.next(line)) reader.fail("empty file");
  if (line != "OFF") reader.fail("expected OFF header, got '" + line + "'");
  if (!reader.next(line)) reader.fail("missing count line");
  std::istringstream counts(line);
  long nv = 0, nf = 0, ne = 0;
  if (!(counts >> nv >> nf >> ne) || nv < 0 || nf < 0)
    reader.fail("malformed count line '" + line + "'");

  FShapeFile out;
  out.vertices.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file in vertex block");
    auto v = parse_doubles(reader, line, 3, "vertex coordinates");
    out.vertices.emplace_back(v[0], v[1], v[2]);
  }
  out.triangles.reserve(static_cast<std::size_t>(nf));
  for (long i = 0; i < nf; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file in face block");
    std::istringstream ss(line);
    int arity = 0;
    if (!(ss >> arity)) reader.fail("malformed face line '" + line + "'");
    if (arity != 3) reader.fail("only triangle faces are supported, face has " +
                                std::to_string(arity) + " vertices");
    std::array<int, 3> t{};
    if (!(ss >> t[0] >> t[1] >> t[2])) reader.fail("malformed face line '" + line + "'");
    out.triangles.push_back(t);
  }

  if (!reader.next(line)) reader.fail("missing #SIGNAL block");
  std::istringstream sig(line);
  std::string tag, kind;
  long count = 0;
  if (!(sig >> tag >> kind >> count) || tag != "#SIGNAL" || (kind != "vertex" && kind != "face"))
    reader.fail("expected '#SIGNAL vertex|face N', got '" + line + "'");
  out.element = (kind == "vertex") ? ElementKind::P1 : ElementKind::P0;
  const long expected = (out.element == ElementKind::P1) ? nv : nf;
  if (count != expected)
    throw CountMismatch(path + ": #SIGNAL declares " + std::to_string(count) + " values, mesh has " +
                        std::to_string(expected) + " " + kind + (expected == 1 ? "" : "s"));
  out.signal.resize(count);
  for (long i = 0; i < count; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file in #SIGNAL block");
    std::istringstream vs(line);
    if (!(vs >> out.signal[i])) reader.fail("malformed signal value '" + line + "'");
  }
  return out;
}

FShapeFile load_ply(std::istream& in, const std::string& path) {
  LineReader reader(in, path);
  std::string line;
  if (!reader.next(line)) reader.fail("empty file");
  if (line != "ply") reader.fail("expected 'ply' header");
  if (!reader.next(line) || line.rfind("format ascii", 0) != 0)
    reader.fail("only ASCII PLY is supported");

  long nv = -1, nf = -1;
  std::vector<std::string> vertex_props;
  bool face_signal = false, face_list_seen = false;
  std::string current;
  while (true) {
    if (!reader.next(line)) reader.fail("unexpected end of header");
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment") continue;
    if (word == "element") {
      std::string name;
      long count = 0;
      if (!(ss >> name >> count)) reader.fail("malformed element line '" + line + "'");
      current = name;
      if (name == "vertex") nv = count;
      else if (name == "face") nf = count;
      else reader.fail("unsupported element '" + name + "'");
    } else if (word == "property") {
      std::string type, name;
      ss >> type;
      if (type == "list") {
        std::string count_type, index_type;
        if (!(ss >> count_type >> index_type >> name))
          reader.fail("malformed list property '" + line + "'");
        if (current == "face") face_list_seen = true;
      } else {
        if (!(ss >> name)) reader.fail("malformed property line '" + line + "'");
        if (current == "vertex") vertex_props.push_back(name);
        else if (current == "face" && name == "signal") face_signal = true;
        else if (current == "face") reader.fail("unsupported face property '" + name + "'");
      }
    } else {
      reader.fail("unexpected header line '" + line + "'");
    }
  }
  if (nv < 0) reader.fail("missing vertex element");
  if (nf < 0) reader.fail("missing face element");
  if (!face_list_seen) reader.fail("face element lacks a vertex_indices list property");

  int xi = -1, yi = -1, zi = -1, si = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i] == "x") xi = static_cast<int>(i);
    else if (vertex_props[i] == "y") yi = static_cast<int>(i);
    else if (vertex_props[i] == "z") zi = static_cast<int>(i);
    else if (vertex_props[i] == "signal") si = static_cast<int>(i);
  }
  if (xi < 0 || yi < 0 || zi < 0) reader.fail("vertex element must provide x, y, z");
  const bool vertex_signal = si >= 0;
  if (vertex_signal && face_signal)
    reader.fail("signal property appears on both vertex and face elements");
  if (!vertex_signal && !face_signal) reader.fail("no 'signal' property found");

  FShapeFile out;
  out.element = vertex_signal ? ElementKind::P1 : ElementKind::P0;
  out.vertices.reserve(static_cast<std::size_t>(nv));
  if (vertex_signal) out.signal.resize(nv);
  for (long i = 0; i < nv; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file in vertex block");
    auto vals = parse_doubles(reader, line, vertex_props.size(), "vertex properties");
    out.vertices.emplace_back(vals[static_cast<std::size_t>(xi)], vals[static_cast<std::size_t>(yi)],
                              vals[static_cast<std::size_t>(zi)]);
    if (vertex_signal) out.signal[i] = vals[static_cast<std::size_t>(si)];
  }
  if (face_signal) out.signal.resize(nf);
  out.triangles.reserve(static_cast<std::size_t>(nf));
  for (long i = 0; i < nf; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file in face block");
    std::istringstream ss(line);
    int arity = 0;
    if (!(ss >> arity)) reader.fail("malformed face line '" + line + "'");
    if (arity != 3) reader.fail("only triangle faces are supported");
    std::array<int, 3> t{};
    if (!(ss >> t[0] >> t[1] >> t[2])) reader.fail("malformed face line '" + line + "'");
    out.triangles.push_back(t);
    if (face_signal) {
      if (!(ss >> out.signal[i])) reader.fail("missing face signal value");
    }
  }
  return out;
}

}  // namespace

std::string format_g17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

FShapeFile load_fshape(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  if (has_extension(path, ".off")) return load_off(in, path);
  if (has_extension(path, ".ply")) return load_ply(in, path);
  // sniff the header
  std::string first;
  std::getline(in, first);
  in.seekg(0);
  if (first.rfind("OFF", 0) == 0) return load_off(in, path);
  if (first.rfind("ply", 0) == 0) return load_ply(in, path);
  throw ParseError(path + ": unrecognized format (expected OFF or ASCII PLY)");
}

void save_fshape(const FShapeFile& fshape, const std::string& path) {
  const long expected = fshape.element == ElementKind::P1
                            ? static_cast<long>(fshape.vertices.size())
                            : static_cast<long>(fshape.triangles.size());
  if (fshape.signal.size() != expected)
    throw CountMismatch("signal has " + std::to_string(fshape.signal.size()) +
                        " values, expected " + std::to_string(expected));
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (has_extension(path, ".ply")) {
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << fshape.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (fshape.element == ElementKind::P1) out << "property double signal\n";
    out << "element face " << fshape.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    if (fshape.element == ElementKind::P0) out << "property double signal\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < fshape.vertices.size(); ++i) {
      const Vec3& v = fshape.vertices[i];
      out << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' ' << format_g17(v.z());
      if (fshape.element == ElementKind::P1)
        out << ' ' << format_g17(fshape.signal[static_cast<Eigen::Index>(i)]);
      out << '\n';
    }
    for (std::size_t k = 0; k < fshape.triangles.size(); ++k) {
      const auto& t = fshape.triangles[k];
      out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2];
      if (fshape.element == ElementKind::P0)
        out << ' ' << format_g17(fshape.signal[static_cast<Eigen::Index>(k)]);
      out << '\n';
    }
  } else {
    out << "OFF\n";
    out << fshape.vertices.size() << ' ' << fshape.triangles.size() << " 0\n";
    for (const Vec3& v : fshape.vertices)
      out << format_g17(v.x()) << ' ' << format_g17(v.y()) << ' ' << format_g17(v.z()) << '\n';
    for (const auto& t : fshape.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "#SIGNAL " << (fshape.element == ElementKind::P1 ? "vertex " : "face ")
        << fshape.signal.size() << '\n';
    for (Eigen::Index i = 0; i < fshape.signal.size(); ++i)
      out << format_g17(fshape.signal[i]) << '\n';
  }
  if (!out.good()) throw IoError("write to '" + path + "' failed");
}

BuiltFShape build_fshape(const FShapeFile& file) {
  const long expected = file.element == ElementKind::P1 ? static_cast<long>(file.vertices.size())
                                                        : static_cast<long>(file.triangles.size());
  if (file.signal.size() != expected)
    throw CountMismatch("signal has " + std::to_string(file.signal.size()) + " values, expected " +
                        std::to_string(expected));
  for (const auto& t : file.triangles)
    for (int idx : t)
      if (idx < 0 || idx >= static_cast<int>(file.vertices.size()))
        throw InvalidMesh("face references vertex " + std::to_string(idx) + " out of range");

  std::vector<Vec3> vertices = file.vertices;
  std::vector<std::array<int, 3>> triangles = file.triangles;
  std::vector<int> old_to_new;
  compact_mesh(vertices, triangles, old_to_new);

  BuiltFShape out;
  out.element = file.element;
  if (file.element == ElementKind::P1) {
    out.signal.resize(static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t i = 0; i < old_to_new.size(); ++i)
      if (old_to_new[i] >= 0) out.signal[old_to_new[i]] = file.signal[static_cast<Eigen::Index>(i)];
  } else {
    out.signal = file.signal;
  }
  out.mesh = std::make_shared<TriangleMesh>(std::move(vertices), std::move(triangles));
  for (int k = 0; k < out.mesh->num_triangles(); ++k)
    if (out.mesh->is_degenerate(k))
      throw DegenerateTriangle("loaded mesh contains degenerate triangle " + std::to_string(k));
  if (!out.signal.allFinite()) throw ValidationError("signal contains a non-finite value");
  return out;
}

FShapeFile to_file(const TriangleMesh& mesh, ElementKind element, const Eigen::VectorXd& signal) {
  FShapeFile out;
  out.vertices = mesh.vertices();
  out.triangles = mesh.triangles();
  out.element = element;
  out.signal = signal;
  return out;
}

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw LengthMismatch("CSV row has " + std::to_string(row.size()) + " cells, header has " +
                           std::to_string(header.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (!std::isnan(row[i])) out << format_g17(row[i]);
    }
    out << '\n';
  }
  if (!out.good()) throw IoError("write to '" + path + "' failed");
}

}  // namespace fvmatch
