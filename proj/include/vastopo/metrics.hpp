#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "vastopo/volume.hpp"

namespace vastopo {

struct ClassMetrics {
  int label = 0;
  std::size_t pred_voxels = 0;
  std::size_t gt_voxels = 0;
  std::size_t overlap = 0;
  double dsc = 0.0;  // percent
  double iou = 0.0;  // percent
  // Absolute relative volume difference in percent; unset when the class is
  // predicted but absent from ground truth.
  std::optional<double> rvd;
};

struct MetricReport {
  std::vector<ClassMetrics> classes;  // labels present in pred or gt, ascending
  double macro_dsc = 0.0;             // over classes present in gt
  double miou = 0.0;
  double mean_rvd = 0.0;
  std::size_t classes_in_gt = 0;
};

// Per-class overlap metrics for labels 1..class_count. class_count = 0 takes
// the largest label found in either volume; a label above class_count is an
// error.
MetricReport evaluate(const LabelVolume& pred, const LabelVolume& gt, int class_count = 0);

// JSON with a fixed key order.
void write_report_json(std::ostream& out, const MetricReport& r);

}  // namespace vastopo
