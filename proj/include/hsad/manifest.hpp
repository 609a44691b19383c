#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsad/binary_io.hpp"
#include "hsad/error.hpp"

namespace hsad {

// One manifest record. Fields not modelled here are kept in `extra` and
// written back unchanged.
struct ExampleMeta {
  std::string example_id;
  std::string question;
  std::string generated_answer;
  std::string reference_answer;
  std::optional<double> similarity_score;
  std::optional<int> label;
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

inline nlohmann::json to_json(const ExampleMeta& meta) {
  nlohmann::json j = meta.extra;
  j["example_id"] = meta.example_id;
  j["question"] = meta.question;
  j["generated_answer"] = meta.generated_answer;
  j["reference_answer"] = meta.reference_answer;
  if (meta.similarity_score) j["similarity_score"] = *meta.similarity_score;
  if (meta.label) j["label"] = *meta.label;
  return j;
}

inline ExampleMeta meta_from_json(const nlohmann::json& j, const std::string& where) {
  require(j.is_object(), ErrorCode::kParse, where + ": record is not a JSON object");
  ExampleMeta meta;
  auto text = [&](const char* key, std::string& dst, bool required) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      require(!required, ErrorCode::kParse, where + ": missing " + key);
      return;
    }
    require(it->is_string(), ErrorCode::kParse, where + ": " + key + " must be a string");
    dst = it->get<std::string>();
  };
  text("example_id", meta.example_id, true);
  require(!meta.example_id.empty(), ErrorCode::kParse, where + ": empty example_id");
  text("question", meta.question, false);
  text("generated_answer", meta.generated_answer, false);
  text("reference_answer", meta.reference_answer, false);
  if (auto it = j.find("similarity_score"); it != j.end() && !it->is_null()) {
    require(it->is_number(), ErrorCode::kParse, where + ": similarity_score must be a number");
    const double s = it->get<double>();
    require(std::isfinite(s), ErrorCode::kParse, where + ": similarity_score not finite");
    meta.similarity_score = s;
  }
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    require(it->is_number_integer() || it->is_boolean(), ErrorCode::kParse,
            where + ": label must be 0 or 1");
    const int v = it->is_boolean() ? int(it->get<bool>()) : it->get<int>();
    require(v == 0 || v == 1, ErrorCode::kParse, where + ": label must be 0 or 1");
    meta.label = v;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known = {"example_id", "question", "generated_answer",
                                                "reference_answer", "similarity_score", "label"};
    if (!known.contains(it.key())) meta.extra[it.key()] = it.value();
  }
  return meta;
}

inline std::vector<ExampleMeta> parse_manifest(std::istream& in) {
  std::vector<ExampleMeta> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    auto meta = meta_from_json(j, where);
    require(seen.insert(meta.example_id).second, ErrorCode::kParse,
            where + ": duplicate example_id '" + meta.example_id + "'");
    out.push_back(std::move(meta));
  }
  return out;
}

inline std::vector<ExampleMeta> read_manifest(const std::string& path) {
  std::istringstream in(io::read_file(path));
  return parse_manifest(in);
}

inline std::string encode_manifest(const std::vector<ExampleMeta>& metas) {
  std::string out;
  for (const auto& m : metas) {
    out += to_json(m).dump();
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::vector<ExampleMeta>& metas, const std::string& path) {
  io::write_file(path, encode_manifest(metas));
}

}  // namespace hsad
