// SPDX-License-Identifier: Apache-2.0
//
// JSON-lines dataset files. Line 1 is the header, every further line one
// sequence. Writing emits the canonical form (fixed key order, shortest
// round-trip numbers), so canonical files survive read/write byte for byte.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sgn/errors.hpp"
#include "sgn/skeleton.hpp"

namespace sgn {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

SkeletonSequence parse_record(const json& j, std::size_t line, std::size_t J) {
  if (!j.is_object()) fail_line(line, "record is not a JSON object");
  for (const char* key : {"id", "label", "split", "frames"}) {
    if (!j.contains(key)) fail_line(line, std::string("missing field '") + key + "'");
  }
  SkeletonSequence s;
  if (!j["id"].is_string()) fail_line(line, "'id' must be a string");
  s.id = j["id"].get<std::string>();
  if (!j["label"].is_number_integer()) fail_line(line, "'label' must be an integer");
  s.label = j["label"].get<int>();
  if (!j["split"].is_string()) fail_line(line, "'split' must be a string");
  try {
    s.split = parse_split(j["split"].get<std::string>());
  } catch (const SchemaError& e) {
    fail_line(line, e.what());
  }
  if (j.contains("person")) {
    if (!j["person"].is_number_integer()) fail_line(line, "'person' must be an integer");
    s.person_id = j["person"].get<int>();
  }
  if (j.contains("source")) {
    if (!j["source"].is_string()) fail_line(line, "'source' must be a string");
    s.source_id = j["source"].get<std::string>();
  }
  const json& frames = j["frames"];
  if (!frames.is_array() || frames.empty()) fail_line(line, "'frames' must be a non-empty array");
  s.frames.reserve(frames.size());
  for (const json& f : frames) {
    if (!f.is_array()) fail_line(line, "frame is not an array of joints");
    if (f.size() != J) {
      throw SchemaError("line " + std::to_string(line) + ": sequence '" + s.id + "' has " +
                        std::to_string(f.size()) + " joints, dataset J=" + std::to_string(J));
    }
    Frame frame(J);
    for (std::size_t k = 0; k < J; ++k) {
      const json& p = f[k];
      if (!p.is_array() || p.size() != 3) fail_line(line, "joint is not an [x,y,z] triple");
      for (int a = 0; a < 3; ++a) {
        if (!p[a].is_number()) fail_line(line, "coordinate is not a number");
        frame[k][a] = p[a].get<double>();
      }
    }
    s.frames.push_back(std::move(frame));
  }
  return s;
}

}  // namespace

DatasetManifest read_dataset(std::istream& in) {
  DatasetManifest m;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail_line(line, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("version") || !j.contains("J") || !j.contains("K")) {
        fail_line(line, "expected header {\"version\",\"J\",\"K\",\"class_names\"}");
      }
      if (!j["version"].is_number_integer() || j["version"].get<int>() != 1) {
        throw VersionError("line " + std::to_string(line) + ": unsupported dataset version " +
                           j["version"].dump());
      }
      if (!j["J"].is_number_unsigned() || !j["K"].is_number_unsigned()) {
        fail_line(line, "J and K must be positive integers");
      }
      m.J = j["J"].get<std::size_t>();
      m.K = j["K"].get<std::size_t>();
      if (j.contains("class_names")) {
        if (!j["class_names"].is_array()) fail_line(line, "'class_names' must be an array");
        for (const json& n : j["class_names"]) {
          if (!n.is_string()) fail_line(line, "class names must be strings");
          m.class_names.push_back(n.get<std::string>());
        }
      }
      have_header = true;
      continue;
    }
    m.sequences.push_back(parse_record(j, line, m.J));
  }
  if (!have_header) throw ParseError("line 1: missing dataset header");
  m.validate();
  return m;
}

DatasetManifest parse_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(const DatasetManifest& m, std::ostream& out) {
  m.validate();
  json header;
  header["version"] = 1;
  header["J"] = m.J;
  header["K"] = m.K;
  header["class_names"] = m.class_names;
  out << header.dump() << '\n';
  for (const SkeletonSequence& s : m.sequences) {
    json r;
    r["id"] = s.id;
    r["label"] = s.label;
    r["split"] = std::string(split_name(s.split));
    if (s.person_id) r["person"] = *s.person_id;
    if (!s.source_id.empty() && s.source_id != s.id) r["source"] = s.source_id;
    json frames = json::array();
    for (const Frame& f : s.frames) {
      json joints = json::array();
      for (const Point3& p : f) joints.push_back({p[0], p[1], p[2]});
      frames.push_back(std::move(joints));
    }
    r["frames"] = std::move(frames);
    out << r.dump() << '\n';
  }
}

void write_dataset(const DatasetManifest& m, const std::string& path) {
  m.validate();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_dataset(m, out);
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw DataError("write failed for '" + path + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sgn
