#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sblq/spectral.hpp"

namespace sblq::io {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path);

// Writes to "<path>.tmp" and renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

json to_json(const Vector& v);
json to_json(const Matrix& m);  // array of rows
Vector vector_from_json(const json& j, const std::string& field);
Matrix matrix_from_json(const json& j, const std::string& field);

// Shortest round-trip decimal representation, as used by the JSON writer.
std::string format_real(double value);

}  // namespace sblq::io
