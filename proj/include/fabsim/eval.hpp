#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "fabsim/net.hpp"

namespace fabsim {

/// One embedded sample with its ground-truth combination id.
struct LabeledPoint {
  PSMPoint point;
  int label = 0;
};

struct EvalReport {
  std::string material;
  double accuracy = 0.0;      // trace(confusion) / n_samples
  std::vector<int> label_ids;  // ascending; indexes confusion rows/cols
  Eigen::MatrixXi confusion;   // (true, predicted) counts
  int n_samples = 0;
};

/// Leave-one-out 1-nearest-neighbor classification by squared map
/// distance. Ties go to the lower label id. Throws InvalidInputError
/// with fewer than 2 distinct labels or fewer than 2 points per label.
EvalReport clustering_accuracy(const std::vector<LabeledPoint>& points,
                               const std::string& material = {});

std::string eval_report_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path,
                       const EvalReport& report);

}  // namespace fabsim
