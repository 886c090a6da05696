#include "sblq/io.hpp"

#include <fstream>
#include <sstream>

#include "sblq/errors.hpp"

namespace sblq::io {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
  return out;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "' must be an array of reals");
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError("field '" + field + "' must contain only reals");
    out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "' must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix out(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r], field);
    if (static_cast<std::size_t>(row.size()) != cols) {
      throw ParseError("field '" + field + "' has rows of unequal length");
    }
    out.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return out;
}

std::string format_real(double value) { return json(value).dump(); }

}  // namespace sblq::io
