#include "ope/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "ope/stats.hpp"

namespace ope {

namespace {

[[noreturn]] void fail(const std::string& path, std::int64_t line,
                       const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& field, const std::string& path,
                    std::int64_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    fail(path, line, "expected a number, got '" + field + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& field, const std::string& path,
                       std::int64_t line) {
  std::int64_t v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    fail(path, line, "expected an integer, got '" + field + "'");
  }
  return v;
}

// Reads all nonempty lines; strips a trailing '\r' so CRLF files load too.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::string context_header(int dim) {
  std::string h;
  for (int j = 1; j <= dim; ++j) {
    if (j > 1) h += ',';
    h += "x" + std::to_string(j);
  }
  return h;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void save_table_csv(const ClassificationTable& table, const std::string& path) {
  table.validate();
  auto out = open_out(path);
  out << context_header(table.dim()) << ",label\n";
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    for (double x : table.contexts[i]) out << format_double(x) << ',';
    out << table.labels[i] << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

ClassificationTable load_table_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header.back() != "label") {
    fail(path, 1, "expected header x1,...,xd,label");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  for (int j = 1; j <= dim; ++j) {
    if (header[static_cast<std::size_t>(j - 1)] != "x" + std::to_string(j)) {
      fail(path, 1, "expected column x" + std::to_string(j));
    }
  }
  ClassificationTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    const auto line = static_cast<std::int64_t>(i + 1);
    if (fields.size() != header.size()) {
      fail(path, line, "expected " + std::to_string(header.size()) + " fields");
    }
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      x[static_cast<std::size_t>(j)] =
          parse_double(fields[static_cast<std::size_t>(j)], path, line);
    }
    const std::int64_t label = parse_int(fields.back(), path, line);
    if (label < 1) fail(path, line, "labels must be positive");
    table.contexts.push_back(std::move(x));
    table.labels.push_back(static_cast<int>(label));
    table.num_arms = std::max(table.num_arms, static_cast<int>(label));
  }
  table.validate();
  return table;
}

void save_dataset(const LoggedDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  const std::int64_t n = ds.rounds();

  {
    auto out = open_out((base / "logged.csv").string());
    out << "t," << context_header(ds.dim()) << ",a,y,g_logged\n";
    for (std::int64_t t = 1; t <= n; ++t) {
      const Observation& o = ds.obs(t);
      out << t << ',';
      for (double x : o.context) out << format_double(x) << ',';
      out << o.arm << ',' << format_double(o.reward) << ','
          << format_double(ds.logged_propensity(t)) << '\n';
    }
    if (!out) throw std::runtime_error((base / "logged.csv").string() + ": write failed");
  }
  {
    auto out = open_out((base / "cross.csv").string());
    out << "t,s,g_t_at_s\n";
    for (std::int64_t t = 1; t <= n; ++t) {
      for (std::int64_t s = 1; s <= t; ++s) {
        out << t << ',' << s << ',' << format_double(ds.cross_propensity(t, s))
            << '\n';
      }
    }
    if (!out) throw std::runtime_error((base / "cross.csv").string() + ": write failed");
  }
  {
    nlohmann::ordered_json meta;
    meta["num_arms"] = ds.num_arms();
    meta["dim"] = ds.dim();
    meta["rounds"] = n;
    auto out = open_out((base / "meta.json").string());
    out << meta.dump(2) << '\n';
  }
}

LoggedDataset load_dataset(const std::string& dir) {
  const std::filesystem::path base(dir);
  const std::string meta_path = (base / "meta.json").string();
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error(meta_path + ": cannot open for reading");
  int num_arms = 0;
  int dim = 0;
  std::int64_t rounds = 0;
  try {
    nlohmann::json meta;
    meta_in >> meta;
    num_arms = meta.at("num_arms").get<int>();
    dim = meta.at("dim").get<int>();
    rounds = meta.at("rounds").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(meta_path + ": " + e.what());
  }
  if (num_arms < 1 || dim < 1 || rounds < 1) {
    throw std::runtime_error(meta_path + ": invalid shape metadata");
  }

  const std::string logged_path = (base / "logged.csv").string();
  const auto lines = read_lines(logged_path);
  if (lines.empty()) throw std::runtime_error(logged_path + ": empty file");
  const std::string want = "t," + context_header(dim) + ",a,y,g_logged";
  if (lines[0] != want) fail(logged_path, 1, "expected header " + want);
  if (static_cast<std::int64_t>(lines.size()) - 1 != rounds) {
    throw std::runtime_error(logged_path + ": expected " + std::to_string(rounds) +
                             " rows, found " + std::to_string(lines.size() - 1));
  }
  std::vector<Observation> obs;
  std::vector<double> logged;
  obs.reserve(static_cast<std::size_t>(rounds));
  logged.reserve(static_cast<std::size_t>(rounds));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    const auto line = static_cast<std::int64_t>(i + 1);
    if (fields.size() != static_cast<std::size_t>(dim) + 4) {
      fail(logged_path, line, "expected " + std::to_string(dim + 4) + " fields");
    }
    const std::int64_t t = parse_int(fields[0], logged_path, line);
    if (t != static_cast<std::int64_t>(i)) {
      fail(logged_path, line, "rounds must increase from 1 with no gaps");
    }
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      x[static_cast<std::size_t>(j)] =
          parse_double(fields[static_cast<std::size_t>(j + 1)], logged_path, line);
    }
    const std::int64_t arm = parse_int(fields[static_cast<std::size_t>(dim + 1)],
                                       logged_path, line);
    const double y =
        parse_double(fields[static_cast<std::size_t>(dim + 2)], logged_path, line);
    const double g =
        parse_double(fields[static_cast<std::size_t>(dim + 3)], logged_path, line);
    obs.push_back({t, std::move(x), static_cast<int>(arm), y});
    logged.push_back(g);
  }

  const std::string cross_path = (base / "cross.csv").string();
  const auto cross_lines = read_lines(cross_path);
  if (cross_lines.empty()) throw std::runtime_error(cross_path + ": empty file");
  if (cross_lines[0] != "t,s,g_t_at_s") {
    fail(cross_path, 1, "expected header t,s,g_t_at_s");
  }
  CrossPropensityMatrix cross(rounds);
  for (std::size_t i = 1; i < cross_lines.size(); ++i) {
    const auto fields = split_fields(cross_lines[i]);
    const auto line = static_cast<std::int64_t>(i + 1);
    if (fields.size() != 3) fail(cross_path, line, "expected 3 fields");
    const std::int64_t t = parse_int(fields[0], cross_path, line);
    const std::int64_t s = parse_int(fields[1], cross_path, line);
    const double v = parse_double(fields[2], cross_path, line);
    if (t < 1 || t > rounds || s < 1 || s > t) {
      fail(cross_path, line, "pair (t=" + std::to_string(t) + ", s=" +
                                 std::to_string(s) + ") out of range");
    }
    cross.set(t, s, v);
  }

  return LoggedDataset(num_arms, dim, std::move(obs), std::move(logged),
                       std::move(cross));
}

void save_target_csv(std::span<const double> weights, const std::string& path) {
  if (weights.empty()) throw std::invalid_argument("target needs at least one arm");
  auto out = open_out(path);
  out << "arm,weight\n";
  for (std::size_t a = 0; a < weights.size(); ++a) {
    out << (a + 1) << ',' << format_double(weights[a]) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::shared_ptr<const TargetFunctional> load_target_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  if (lines[0] != "arm,weight") fail(path, 1, "expected header arm,weight");
  std::vector<double> weights;
  NeumaierSum total;
  bool negative = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    const auto line = static_cast<std::int64_t>(i + 1);
    if (fields.size() != 2) fail(path, line, "expected 2 fields");
    const std::int64_t arm = parse_int(fields[0], path, line);
    if (arm != static_cast<std::int64_t>(i)) {
      fail(path, line, "arms must increase from 1 with no gaps");
    }
    const double w = parse_double(fields[1], path, line);
    weights.push_back(w);
    total.add(w);
    negative = negative || w < 0.0;
  }
  if (weights.empty()) throw std::runtime_error(path + ": no arm rows");
  using Kind = TargetFunctional::Kind;
  const Kind kind = negative ? Kind::kContrast
                    : std::abs(total.value() - 1.0) <= 1e-9
                        ? Kind::kPolicy
                        : Kind::kSubgroup;
  return std::make_shared<TabularTarget>(std::move(weights), kind);
}

}  // namespace ope
