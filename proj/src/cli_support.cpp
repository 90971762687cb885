#include "fixgcn/cli_support.hpp"

#include <cmath>
#include <fstream>

#include "fixgcn/filter.hpp"
#include "fixgcn/text.hpp"

namespace fixgcn {

namespace {

double round12(double v) { return std::round(v * 1e12) / 1e12; }

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<double> out;
  if (grid.find(':') != std::string::npos) {
    const auto parts = text::split(grid, ':');
    if (parts.size() != 3) throw Error("malformed grid '" + grid + "' (expected start:stop:step)");
    const double start = text::parse_double(parts[0]);
    const double stop = text::parse_double(parts[1]);
    const double step = text::parse_double(parts[2]);
    if (!(step > 0.0) || stop < start) throw Error("malformed grid '" + grid + "'");
    const long count = std::lround(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) out.push_back(round12(start + static_cast<double>(i) * step));
  } else {
    for (auto part : text::split(grid, ',')) {
      const std::string item = trim(part);
      if (item.empty()) throw Error("malformed grid '" + grid + "' (empty entry)");
      out.push_back(text::parse_double(item));
    }
  }
  if (out.empty()) throw Error("empty grid '" + grid + "'");
  return out;
}

std::vector<AttackSpec> parse_attack_specs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open attack spec file '" + path + "'");
  std::vector<AttackSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (fields.size() < 2 || fields.size() > 3) throw Error(where + "expected '<kind> <rate> [source]'");
    AttackSpec spec;
    try {
      spec.kind = parse_attack_kind(std::string(fields[0]));
      spec.rate = text::parse_double(fields[1]);
      if (fields.size() == 3) spec.source = std::string(fields[2]);
      spec.validate();
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
    if (spec.kind != AttackKind::external && !spec.source.empty())
      throw Error(where + "only external attacks take a source path");
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw Error("attack spec file '" + path + "' lists no attacks");
  return specs;
}

std::vector<std::pair<double, double>> filter_response(double s) {
  FilterParam{s};
  std::vector<std::pair<double, double>> out;
  for (int k = 1; k <= 200; ++k) {
    const double lambda = k / 100.0;
    out.emplace_back(lambda, transfer_function(s, lambda));
  }
  return out;
}

CsvTable filter_response_table(double s) {
  CsvTable t;
  t.header = {"lambda", "h"};
  for (const auto& [lambda, h] : filter_response(s))
    t.rows.push_back({text::format_double(lambda), text::format_double(h)});
  return t;
}

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t;
  t.header = {"s", "seed", "test_acc", "val_acc"};
  for (const auto& r : rows)
    t.rows.push_back(
        {text::format_double(r.s), std::to_string(r.seed), text::format_double(r.test_acc), text::format_double(r.val_acc)});
  return t;
}

CsvTable curve_summary_table(const std::vector<CurveSummary>& rows) {
  CsvTable t;
  t.header = {"attack_kind", "attack_rate", "source", "model", "mean_acc", "std_acc", "runs"};
  for (const auto& r : rows)
    t.rows.push_back({to_string(r.kind), text::format_double(r.rate), r.source, r.model, text::format_double(r.mean_acc),
                      text::format_double(r.std_acc), std::to_string(r.runs)});
  return t;
}

CsvTable scaling_table(const std::vector<ScalingRow>& rows) {
  CsvTable t;
  t.header = {"num_nodes", "num_edges", "num_features", "seconds_per_epoch"};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.num_nodes), std::to_string(r.num_edges), std::to_string(r.num_features),
                      text::format_double(r.seconds_per_epoch)});
  return t;
}

std::vector<std::string> config_file_arguments(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw Error(path + ":" + std::to_string(line_no) + ": empty key");
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

}  // namespace fixgcn
