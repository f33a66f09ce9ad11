#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ewboot/lab.hpp"
#include "json.hpp"

namespace ewboot::cli {

using Json = nlohmann::ordered_json;

Json matrix_json(const Eigen::MatrixXd& m);  // row-major list of rows
Json vector_json(const Eigen::VectorXd& v);
Json record_json(const ReportRecord& r);

// Common header of every artifact: tool name, version, command, resolved config.
Json provenance_json(std::string_view command, const std::string& config_echo);
// The same provenance as `# ` comment lines for CSV artifacts.
std::string provenance_comment(std::string_view command, const std::string& config_echo);

// Writes `<dir>/<prefix>_<statistic>.csv` for every distinct statistic.
std::vector<std::filesystem::path> write_statistic_tables(const std::filesystem::path& dir,
                                                          std::string_view prefix,
                                                          const std::vector<ReportRecord>& records,
                                                          const std::string& comment);

std::string sanitize(std::string_view name);

}  // namespace ewboot::cli
