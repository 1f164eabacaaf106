#include "fabsim/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "fabsim/errors.hpp"

namespace fabsim {

EvalReport clustering_accuracy(const std::vector<LabeledPoint>& points,
                               const std::string& material) {
  std::map<int, int> counts;
  for (const LabeledPoint& p : points) ++counts[p.label];
  if (counts.size() < 2)
    throw InvalidInputError(
        "clustering_accuracy: need at least 2 distinct labels");
  for (const auto& [label, n] : counts)
    if (n < 2)
      throw InvalidInputError("clustering_accuracy: label " +
                              std::to_string(label) +
                              " has fewer than 2 points");

  EvalReport report;
  report.material = material;
  report.n_samples = static_cast<int>(points.size());
  std::map<int, int> row_of;
  for (const auto& [label, n] : counts) {
    row_of[label] = static_cast<int>(report.label_ids.size());
    report.label_ids.push_back(label);
  }
  const int k = static_cast<int>(report.label_ids.size());
  report.confusion = Eigen::MatrixXi::Zero(k, k);

  int correct = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    double best_d = std::numeric_limits<double>::infinity();
    int best_label = 0;
    for (size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      const double d = psd(points[i].point, points[j].point);
      if (d < best_d || (d == best_d && points[j].label < best_label)) {
        best_d = d;
        best_label = points[j].label;
      }
    }
    report.confusion(row_of[points[i].label], row_of[best_label]) += 1;
    if (best_label == points[i].label) ++correct;
  }
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(points.size());
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["material"] = report.material;
  j["n_samples"] = report.n_samples;
  j["accuracy"] = report.accuracy;
  j["labels"] = report.label_ids;
  auto rows = nlohmann::ordered_json::array();
  for (long r = 0; r < report.confusion.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (long c = 0; c < report.confusion.cols(); ++c)
      row.push_back(report.confusion(r, c));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(1);
}

std::string eval_report_table(const EvalReport& report) {
  long width = 5;
  for (int id : report.label_ids)
    width = std::max<long>(width, static_cast<long>(std::to_string(id).size()) + 2);
  const int max_count = report.confusion.size() > 0 ? report.confusion.maxCoeff() : 0;
  width = std::max<long>(width, static_cast<long>(std::to_string(max_count).size()) + 2);

  std::ostringstream os;
  os << "material: " << report.material << "\n";
  os << "samples:  " << report.n_samples << "\n";
  os << "accuracy: " << std::fixed << std::setprecision(4) << report.accuracy
     << "\n\n";
  os << std::setw(10) << "true\\pred";
  for (int id : report.label_ids) os << std::setw(width) << id;
  os << "\n";
  for (long r = 0; r < report.confusion.rows(); ++r) {
    os << std::setw(10) << report.label_ids[r];
    for (long c = 0; c < report.confusion.cols(); ++c)
      os << std::setw(width) << report.confusion(r, c);
    os << "\n";
  }
  return os.str();
}

void write_eval_report(const std::filesystem::path& path,
                       const EvalReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << eval_report_json(report) << "\n";
  if (!os) throw IoError("short write: " + path.string());
}

}  // namespace fabsim
