#include "vastopo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace vastopo {

MetricReport evaluate(const LabelVolume& pred, const LabelVolume& gt, int class_count) {
  if (pred.dims() != gt.dims()) {
    throw ShapeError("evaluate: prediction dims " + to_string(pred.dims()) + " differ from ground truth dims " + to_string(gt.dims()));
  }
  int max_label = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) max_label = std::max({max_label, static_cast<int>(gt[i]), static_cast<int>(pred[i])});
  if (class_count <= 0) {
    class_count = max_label;
  } else if (max_label > class_count) {
    throw ValueError("evaluate: label " + std::to_string(max_label) + " outside 0.." + std::to_string(class_count));
  }

  const auto n = static_cast<std::size_t>(class_count) + 1;
  std::vector<std::size_t> p(n, 0), g(n, 0), both(n, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ++p[pred[i]];
    ++g[gt[i]];
    if (pred[i] == gt[i]) ++both[gt[i]];
  }

  MetricReport r;
  double rvd_sum = 0.0;
  std::size_t rvd_count = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (p[c] == 0 && g[c] == 0) continue;
    ClassMetrics m;
    m.label = static_cast<int>(c);
    m.pred_voxels = p[c];
    m.gt_voxels = g[c];
    m.overlap = both[c];
    m.dsc = 200.0 * static_cast<double>(both[c]) / static_cast<double>(p[c] + g[c]);
    m.iou = 100.0 * static_cast<double>(both[c]) / static_cast<double>(p[c] + g[c] - both[c]);
    if (g[c] > 0) {
      const double diff = std::abs(static_cast<double>(p[c]) - static_cast<double>(g[c]));
      m.rvd = 100.0 * diff / static_cast<double>(g[c]);
      r.macro_dsc += m.dsc;
      r.miou += m.iou;
      rvd_sum += *m.rvd;
      ++rvd_count;
      ++r.classes_in_gt;
    }
    r.classes.push_back(m);
  }
  if (r.classes_in_gt) {
    r.macro_dsc /= static_cast<double>(r.classes_in_gt);
    r.miou /= static_cast<double>(r.classes_in_gt);
  }
  if (rvd_count) r.mean_rvd = rvd_sum / static_cast<double>(rvd_count);
  return r;
}

namespace {
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_report_json(std::ostream& out, const MetricReport& r) {
  out << "{\"macro_dsc\":" << num(r.macro_dsc) << ",\"miou\":" << num(r.miou) << ",\"mean_rvd\":" << num(r.mean_rvd)
      << ",\"classes\":[";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& c = r.classes[i];
    out << (i ? "," : "") << "{\"label\":" << c.label << ",\"dsc\":" << num(c.dsc) << ",\"iou\":" << num(c.iou)
        << ",\"rvd\":" << (c.rvd ? num(*c.rvd) : "null") << ",\"pred_voxels\":" << c.pred_voxels
        << ",\"gt_voxels\":" << c.gt_voxels << ",\"overlap\":" << c.overlap << "}";
  }
  out << "]}\n";
}

}  // namespace vastopo
