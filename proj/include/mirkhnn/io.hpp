#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/trajectory.hpp"

namespace mirkhnn {

using Json = nlohmann::json;

/// Round-trip decimal representation (17 significant digits).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write through a temporary file so readers never see partial output.
inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw InvalidArgument("cannot create directory '" + path.parent_path().string() + "'");
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw InvalidArgument("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline Json to_json_array(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const Json& a) {
  if (!a.is_array()) throw InvalidArgument("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw InvalidArgument("expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

/// CSV with header `t,y1,...,yn`, one row per sample.
inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "t";
  for (Eigen::Index i = 0; i < traj.dim(); ++i) out += ",y" + std::to_string(i + 1);
  out += "\n";
  for (long n = 0; n <= traj.transitions(); ++n) {
    out += format_double(traj.time(n));
    for (Eigen::Index i = 0; i < traj.dim(); ++i) out += "," + format_double(traj.states[n][i]);
    out += "\n";
  }
  return out;
}

inline Trajectory trajectory_from_csv(const std::string& text, std::string system_name = "") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t", 0) != 0)
    throw InvalidArgument("trajectory CSV: missing header");
  std::vector<double> times;
  Trajectory traj;
  traj.system_name = std::move(system_name);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument("trajectory CSV: bad number '" + cell + "'");
      }
    }
    if (row.size() < 2) throw InvalidArgument("trajectory CSV: row too short");
    times.push_back(row[0]);
    traj.states.push_back(Eigen::Map<Eigen::VectorXd>(row.data() + 1, Eigen::Index(row.size() - 1)));
  }
  if (times.size() < 2) throw InvalidArgument("trajectory CSV: need at least two samples");
  traj.t0 = times.front();
  traj.h = (times.back() - times.front()) / double(times.size() - 1);
  traj.validate();
  return traj;
}

}  // namespace mirkhnn
