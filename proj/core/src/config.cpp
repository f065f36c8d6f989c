#include "distcurrents/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "distcurrents/grid.hpp"

namespace distcurrents {

namespace {

[[noreturn]] void fail(long line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Quoted segments, nothing but whitespace between them. The DSL never needs
// escapes, so a quote always terminates the segment.
std::vector<std::string> quoted_list(const std::string& value, long line) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < value.size()) {
    if (std::isspace(static_cast<unsigned char>(value[i]))) {
      ++i;
      continue;
    }
    if (value[i] != '"') fail(line, "expected a double-quoted expression");
    const size_t close = value.find('"', i + 1);
    if (close == std::string::npos) fail(line, "unterminated quote");
    out.push_back(value.substr(i + 1, close - i - 1));
    i = close + 1;
  }
  if (out.empty()) fail(line, "expected at least one quoted expression");
  return out;
}

std::vector<double> double_list(const std::string& value, long line) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail(line, "not a number: '" + tok + "'");
    }
    if (used != tok.size()) fail(line, "not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> int_list(const std::string& value, long line) {
  std::vector<int> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) {
    size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      fail(line, "not an integer: '" + tok + "'");
    }
    if (used != tok.size()) fail(line, "not an integer: '" + tok + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

int one_int(const std::string& value, long line) {
  std::vector<int> v = int_list(value, line);
  if (v.size() != 1) fail(line, "expected exactly one integer");
  return v[0];
}

double one_double(const std::string& value, long line) {
  std::vector<double> v = double_list(value, line);
  if (v.size() != 1) fail(line, "expected exactly one number");
  return v[0];
}

std::uint64_t one_u64(const std::string& value, long line) {
  const std::string tok = trim(value);
  if (tok.empty()) fail(line, "expected a seed value");
  size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &used);
  } catch (const std::exception&) {
    fail(line, "not an unsigned integer: '" + tok + "'");
  }
  if (used != tok.size()) fail(line, "not an unsigned integer: '" + tok + "'");
  return v;
}

std::string one_word(const std::string& value, long line) {
  const std::string tok = trim(value);
  if (tok.empty() || tok.find_first_of(" \t") != std::string::npos)
    fail(line, "expected a single word");
  return tok;
}

void check_labels(const std::vector<int>& labels, long line) {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1) fail(line, "labels are 1-based");
    if (i > 0 && labels[i] <= labels[i - 1]) fail(line, "labels must strictly increase");
  }
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::string raw;
  long line = 0;

  while (std::getline(in, raw)) {
    ++line;
    // Comments run to the end of the line; expressions never contain '#'.
    std::string text = raw;
    if (const size_t hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    text = trim(text);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text.back() != ']') fail(line, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "map" && section != "box" && section != "operation" && section != "output")
        fail(line, "unknown section [" + section + "]");
      continue;
    }

    const size_t eq = text.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) fail(line, "missing key");
    if (section.empty()) fail(line, "key '" + key + "' appears before any section");
    if (!seen.insert(section + "." + key).second)
      fail(line, "repeated key '" + key + "' in [" + section + "]");
    cfg.echo.push_back({section, key, value});

    if (section == "map") {
      if (key == "expr") {
        cfg.map.exprs = quoted_list(value, line);
      } else if (key == "file") {
        if (value.empty()) fail(line, "expected a path");
        cfg.map.file = value;
      } else {
        fail(line, "unknown key '" + key + "' in [map]");
      }
    } else if (section == "box") {
      if (key == "lower") {
        cfg.box.lower = double_list(value, line);
      } else if (key == "upper") {
        cfg.box.upper = double_list(value, line);
      } else if (key == "resolution") {
        cfg.box.resolution = int_list(value, line);
      } else {
        fail(line, "unknown key '" + key + "' in [box]");
      }
    } else if (section == "operation") {
      if (key == "kind") {
        cfg.operation.kind = one_word(value, line);
      } else if (key == "psi") {
        std::vector<std::string> q = quoted_list(value, line);
        if (q.size() != 1) fail(line, "psi takes one expression");
        cfg.operation.psi = q[0];
      } else if (key == "alpha") {
        cfg.operation.alpha = int_list(value, line);
        check_labels(cfg.operation.alpha, line);
      } else if (key == "beta") {
        cfg.operation.beta = int_list(value, line);
        cfg.operation.beta_given = true;
        check_labels(cfg.operation.beta, line);
      } else if (key == "target") {
        cfg.operation.target = quoted_list(value, line);
      } else if (key == "levels") {
        cfg.operation.levels = int_list(value, line);
      } else if (key == "series") {
        cfg.operation.series = one_word(value, line);
      } else if (key == "level") {
        cfg.operation.level = double_list(value, line);
      } else if (key == "layers") {
        cfg.operation.layers = one_int(value, line);
        if (cfg.operation.layers < 0) fail(line, "layers must be >= 0");
      } else if (key == "threads") {
        cfg.operation.threads = one_int(value, line);
        if (cfg.operation.threads < 0) fail(line, "threads must be >= 0");
      } else if (key == "seed") {
        cfg.operation.seed = one_u64(value, line);
      } else if (key == "samples") {
        cfg.operation.samples = one_int(value, line);
        if (cfg.operation.samples < 1) fail(line, "samples must be >= 1");
      } else if (key == "s") {
        cfg.operation.s = one_double(value, line);
        if (!(cfg.operation.s > 0.0 && cfg.operation.s < 1.0)) fail(line, "s must lie in (0, 1)");
      } else if (key == "p") {
        cfg.operation.p = one_double(value, line);
        if (!(cfg.operation.p >= 1.0)) fail(line, "p must be >= 1");
      } else if (key == "extension") {
        cfg.operation.extension = one_word(value, line);
        if (cfg.operation.extension != "averaging" && cfg.operation.extension != "product")
          fail(line, "extension is 'averaging' or 'product'");
      } else {
        fail(line, "unknown key '" + key + "' in [operation]");
      }
    } else {
      if (key == "report") {
        cfg.output.report = value;
      } else if (key == "csv") {
        cfg.output.csv = value;
      } else if (key == "field") {
        cfg.output.field = value;
      } else {
        fail(line, "unknown key '" + key + "' in [output]");
      }
      if (value.empty()) fail(line, "expected a path");
    }
  }

  // Cross-key structure that does not need the library yet.
  if (!cfg.map.exprs.empty() && !cfg.map.file.empty())
    throw std::invalid_argument("config: map expr and map file are exclusive");
  const size_t n = cfg.box.lower.size();
  if (cfg.box.upper.size() != n || cfg.box.resolution.size() != n)
    throw std::invalid_argument("config: box lower, upper, resolution must agree in length");
  if (n > static_cast<size_t>(kMaxGridDim))
    throw std::invalid_argument("config: box dimension exceeds the grid limit");
  for (size_t i = 0; i < n; ++i) {
    if (!(cfg.box.lower[i] < cfg.box.upper[i]))
      throw std::invalid_argument("config: box lower must be below upper");
    if (cfg.box.resolution[i] < 1)
      throw std::invalid_argument("config: resolution must be positive");
  }
  if (!cfg.map.file.empty() && n > 0)
    throw std::invalid_argument("config: a field file carries its own box");

  static const std::set<std::string> kinds = {"norm",    "minor",         "tu",
                                              "jacobian", "coarea",        "chain",
                                              "strong-coarea", "vortex-demo", "selftest",
                                              "convergence"};
  if (!cfg.operation.kind.empty() && !kinds.count(cfg.operation.kind))
    throw std::invalid_argument("config: unknown operation kind '" + cfg.operation.kind + "'");
  if (cfg.operation.series != "minor" && cfg.operation.series != "vortex")
    throw std::invalid_argument("config: series is 'minor' or 'vortex'");

  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
  return parse_config(in);
}

}  // namespace distcurrents
