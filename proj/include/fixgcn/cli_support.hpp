#ifndef FIXGCN_CLI_SUPPORT_HPP
#define FIXGCN_CLI_SUPPORT_HPP

#include <string>
#include <utility>
#include <vector>

#include "fixgcn/attack.hpp"
#include "fixgcn/dataset.hpp"
#include "fixgcn/harness.hpp"

namespace fixgcn {

/// "start:stop:step" (inclusive, values rounded to 12 decimals) or a comma list.
std::vector<double> parse_grid(const std::string& grid);

/// One attack per line: "<kind> <rate> [source]". Blank lines and '#' comments
/// are skipped. External specs require a source path.
std::vector<AttackSpec> parse_attack_specs(const std::string& path);

/// h_s(λ) at λ = k/100 for k = 1..200, skipping the pole at λ = 0.
std::vector<std::pair<double, double>> filter_response(double s);

CsvTable filter_response_table(double s);
CsvTable sweep_table(const std::vector<SweepRow>& rows);
CsvTable curve_summary_table(const std::vector<CurveSummary>& rows);
CsvTable scaling_table(const std::vector<ScalingRow>& rows);

/// Reads "key=value" lines (blank lines and '#' comments skipped) into
/// "--key value" arguments.
std::vector<std::string> config_file_arguments(const std::string& path);

}  // namespace fixgcn

#endif  // FIXGCN_CLI_SUPPORT_HPP
