#include "ogl/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ogl::io {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("file not found or unreadable: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw ValidationError("cannot create directory " + target.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
  if (!out) throw ValidationError("failed writing " + path);
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in " + source + ": " + e.what());
  }
}

Json read_json(const std::string& path) { return parse_json(read_text(path), path); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

namespace {

double as_number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + " must be a number");
  return j.get<double>();
}

Index as_count(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ValidationError(what + " must be an integer");
  return j.get<Index>();
}

const Json& field(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError("missing field '" + key + "'");
  return j.at(key);
}

Vector numbers(const Json& arr, const std::string& what) {
  if (!arr.is_array()) throw ValidationError(what + " must be an array of numbers");
  Vector v(static_cast<Index>(arr.size()));
  for (std::size_t k = 0; k < arr.size(); ++k) v[static_cast<Index>(k)] = as_number(arr[k], what + " entry");
  return v;
}

}  // namespace

GroupCollection groups_from_json(const Json& j) {
  const Index p = as_count(field(j, "p"), "p");
  const Json& list = field(j, "groups");
  if (!list.is_array()) throw ValidationError("'groups' must be an array of index arrays");
  std::vector<std::vector<Index>> groups;
  for (const auto& g : list) {
    if (!g.is_array()) throw ValidationError("each group must be an array of 1-based indices");
    std::vector<Index> members;
    for (const auto& i : g) members.push_back(as_count(i, "group member"));
    groups.push_back(std::move(members));
  }
  return GroupCollection::from_one_based(groups, p);
}

Json groups_to_json(const GroupCollection& groups) {
  Json j;
  j["p"] = groups.p();
  j["groups"] = groups.to_one_based();
  return j;
}

Vector vector_from_json(const Json& j, const std::string& key) {
  if (j.is_array()) return numbers(j, key);
  return numbers(field(j, key), key);
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

ProblemInstance instance_from_json(const Json& j) {
  ProblemInstance inst;
  const Index n = as_count(field(j, "n"), "n");
  const Index p = as_count(field(j, "p"), "p");
  require(n >= 1 && p >= 1, "instance: n and p must be positive");
  const Json& X = field(j, "X");
  if (!X.is_array()) throw ValidationError("'X' must be an array");
  inst.X.resize(n, p);
  if (!X.empty() && X.front().is_array()) {
    require(static_cast<Index>(X.size()) == n, "instance: X has " + std::to_string(X.size()) + " rows, expected n");
    for (Index i = 0; i < n; ++i) {
      const Vector row = numbers(X[static_cast<std::size_t>(i)], "X row");
      require(row.size() == p, "instance: X row " + std::to_string(i + 1) + " does not have p entries");
      inst.X.row(i) = row.transpose();
    }
  } else {
    const Vector flat = numbers(X, "X");
    require(flat.size() == n * p, "instance: X has " + std::to_string(flat.size()) + " entries, expected n * p");
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < p; ++c) inst.X(i, c) = flat[i * p + c];
  }
  inst.y = numbers(field(j, "y"), "y");
  if (j.contains("beta0") && !j.at("beta0").is_null()) inst.beta0 = numbers(j.at("beta0"), "beta0");
  if (j.contains("sigma") && !j.at("sigma").is_null()) inst.sigma = as_number(j.at("sigma"), "sigma");
  if (j.contains("normalization")) {
    if (!j.at("normalization").is_string()) throw ValidationError("'normalization' must be a string");
    inst.normalization = normalization_from_string(j.at("normalization").get<std::string>());
  }
  inst.validate();
  return inst;
}

Json instance_to_json(const ProblemInstance& instance) {
  Json j;
  j["n"] = instance.n();
  j["p"] = instance.p();
  Json flat = Json::array();
  for (Index i = 0; i < instance.n(); ++i)
    for (Index c = 0; c < instance.p(); ++c) flat.push_back(instance.X(i, c));
  j["X"] = std::move(flat);
  j["y"] = vector_to_json(instance.y);
  j["beta0"] = instance.beta0 ? vector_to_json(*instance.beta0) : Json(nullptr);
  j["sigma"] = instance.sigma ? Json(*instance.sigma) : Json(nullptr);
  j["normalization"] = to_string(instance.normalization);
  return j;
}

Json decomposition_to_json(const Decomposition& d, const GroupCollection& groups) {
  require(d.groups() == groups.size(), "decomposition and groups disagree on the group count");
  Json arr = Json::array();
  for (Index g = 0; g < groups.size(); ++g) {
    Json e;
    e["group"] = g + 1;
    std::vector<Index> members;
    for (Index i : groups[g]) members.push_back(i + 1);
    e["members"] = members;
    e["values"] = vector_to_json(groups.restrict(d.parts[static_cast<std::size_t>(g)], g));
    e["norm"] = d.parts[static_cast<std::size_t>(g)].norm();
    arr.push_back(std::move(e));
  }
  return arr;
}

Json weights_to_json(const std::vector<double>& weights) {
  Json arr = Json::array();
  for (double w : weights) arr.push_back(std::isinf(w) ? Json(nullptr) : Json(w));
  return arr;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(m(i, c));
    }
    out += '\n';
  }
  return out;
}

std::string vector_csv(const Vector& v, const std::string& header) {
  std::string out = header + "\n";
  for (Index i = 0; i < v.size(); ++i) out += format_double(v[i]) + "\n";
  return out;
}

}  // namespace ogl::io
