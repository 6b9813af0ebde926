#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "ogl/model.hpp"

namespace ogl::io {

using Json = nlohmann::ordered_json;

/// Whole file as text; ValidationError when it cannot be opened.
std::string read_text(const std::string& path);
/// Writes text, creating parent directories as needed.
void write_text(const std::string& path, const std::string& content);

Json parse_json(const std::string& text, const std::string& source);
Json read_json(const std::string& path);
/// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);

/// {"p": 5, "groups": [[1, 2], [3, 4]]}, 1-based indices.
GroupCollection groups_from_json(const Json& j);
Json groups_to_json(const GroupCollection& groups);

/// {"beta": [...]} or a bare array.
Vector vector_from_json(const Json& j, const std::string& key);
Json vector_to_json(const Vector& v);

/// {"n", "p", "X": row-major flat array or array of rows, "y",
///  "beta0": array or null, "sigma": number or null, "normalization"}.
ProblemInstance instance_from_json(const Json& j);
Json instance_to_json(const ProblemInstance& instance);

/// Part vectors per group, restricted to the group's members:
/// [{"group": 1, "members": [...], "values": [...], "norm": x}, ...].
Json decomposition_to_json(const Decomposition& d, const GroupCollection& groups);

/// Weights with +inf written as null.
Json weights_to_json(const std::vector<double>& weights);

/// Fixed 17-significant-digit formatting shared by every CSV writer.
std::string format_double(double x);
std::string matrix_csv(const Matrix& m);
std::string vector_csv(const Vector& v, const std::string& header);

}  // namespace ogl::io
