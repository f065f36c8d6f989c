#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace distcurrents {

/// One raw assignment as it appeared in the file, kept for the report echo.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
};

struct MapSpec {
  /// One expression per component, everything reading x1..xn.
  std::vector<std::string> exprs;
  /// Alternative source: a field file carrying its own geometry.
  std::string file;
};

struct BoxSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> resolution;
};

struct OperationSpec {
  std::string kind;
  std::string psi;
  std::vector<int> alpha;
  std::vector<int> beta;
  /// Target-space components of the composition map.
  std::vector<std::string> target;
  /// Resolutions of a convergence series.
  std::vector<int> levels;
  std::string series = "minor";
  /// Target value whose level set is exported when a csv path is set.
  std::vector<double> level;
  bool beta_given = false;  // an explicitly empty beta differs from none
  int layers = 0;
  int threads = 0;
  std::uint64_t seed = 1;
  int samples = 256;
  double s = 0.5;
  double p = 2.0;
  std::string extension = "averaging";
};

struct OutputSpec {
  std::string report;
  std::string csv;
  std::string field;
};

/// Line-oriented run description: `[section]` headers, `key = value` pairs,
/// `#` comments. Expressions are double-quoted (several quoted strings form
/// a list); numbers and labels are space separated. Sections are map, box,
/// operation, and output. Unknown sections, unknown keys, and repeated keys
/// are rejected before any computation.
struct RunConfig {
  MapSpec map;
  BoxSpec box;
  OperationSpec operation;
  OutputSpec output;
  std::vector<ConfigEntry> echo;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);

}  // namespace distcurrents
