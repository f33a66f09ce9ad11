#include "report.hpp"

#include <map>
#include <sstream>

#include "ewboot/format.hpp"
#include "ewboot/io.hpp"

#ifndef EWBOOT_VERSION
#define EWBOOT_VERSION "unknown"
#endif

namespace ewboot::cli {

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json record_json(const ReportRecord& r) {
  Json j;
  j["experiment"] = r.experiment;
  j["n"] = r.n;
  j["statistic"] = r.statistic;
  j["coordinate"] = r.coordinate;
  j["value"] = r.value;
  j["mc_se"] = r.mc_se ? Json(*r.mc_se) : Json(nullptr);
  j["target"] = r.target ? Json(*r.target) : Json(nullptr);
  j["pass"] = r.pass ? Json(*r.pass) : Json(nullptr);
  return j;
}

Json provenance_json(std::string_view command, const std::string& config_echo) {
  Json j;
  j["tool"] = "ewboot";
  j["version"] = EWBOOT_VERSION;
  j["command"] = command;
  j["config"] = config_echo;
  return j;
}

std::string provenance_comment(std::string_view command, const std::string& config_echo) {
  std::string s = "ewboot " EWBOOT_VERSION " " + std::string(command);
  std::istringstream lines(config_echo);
  std::string line;
  while (std::getline(lines, line)) s += "\n" + line;
  return s;
}

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    out += keep ? c : '_';
  }
  return out;
}

std::vector<std::filesystem::path> write_statistic_tables(const std::filesystem::path& dir,
                                                          std::string_view prefix,
                                                          const std::vector<ReportRecord>& records,
                                                          const std::string& comment) {
  std::map<std::string, std::vector<const ReportRecord*>> by_stat;
  std::vector<std::string> order;
  for (const auto& r : records) {
    auto [it, inserted] = by_stat.try_emplace(r.statistic);
    if (inserted) order.push_back(r.statistic);
    it->second.push_back(&r);
  }
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::vector<std::filesystem::path> written;
  for (const auto& stat : order) {
    std::ostringstream csv;
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) csv << "# " << line << "\n";
    csv << "experiment,n,statistic,coordinate,value,mc_se,target,pass\n";
    for (const auto* r : by_stat[stat]) {
      csv << r->experiment << "," << r->n << "," << r->statistic << "," << r->coordinate << ","
          << format_double(r->value) << "," << opt(r->mc_se) << "," << opt(r->target) << ","
          << (r->pass ? (*r->pass ? "true" : "false") : "") << "\n";
    }
    auto path = dir / (std::string(prefix) + "_" + sanitize(stat) + ".csv");
    write_text_file(path, csv.str());
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace ewboot::cli
