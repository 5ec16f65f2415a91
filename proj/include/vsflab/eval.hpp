#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vsflab/boxes.hpp"

namespace vsflab {

// One evaluated image: the detections and ground truths of a single frame,
// plus the per-clip visibility attribute it inherits.
struct EvalInstance {
  std::vector<Detection> dets;
  std::vector<BoxD> gts;
  bool clear = true;
};

// Groups a clip's per-frame ground truth and detections into one instance
// per frame (frames without ground truth still contribute their detections).
std::vector<EvalInstance> make_instances(
    const std::vector<std::optional<BoxD>>& gts,
    const std::vector<Detection>& dets, bool clear);

// Single-threshold average precision: greedy per-image matching in global
// score order (each ground truth matched at most once), then 101-point
// interpolated precision-recall integration. No ground truth anywhere
// yields 0.
double average_precision(const std::vector<EvalInstance>& data, double iou_thr);

struct TideCounts {
  std::int64_t loc = 0, dupe = 0, bkgd = 0, miss = 0;
};

struct EvalReport {
  double ap50 = 0, ap75 = 0, ap = 0;
  double ap_clear = 0, ap_vague = 0;
  double ap_s = 0, ap_m = 0, ap_l = 0;
  // A bucket AP is meaningful only when some ground truth falls in it.
  bool any_gt = false;
  bool has_clear = false, has_vague = false;
  bool has_s = false, has_m = false, has_l = false;
  TideCounts errors;
};

// The full protocol: AP averaged over IoU 0.50:0.05:0.95, AP50/AP75, size
// buckets on ground-truth area with cutoffs 32^2 and 96^2, visibility
// buckets on the per-clip attribute. Out-of-bucket ground truths are
// ignored rather than counted as misses, and unmatched detections that fall
// outside the bucket are dropped rather than counted as false positives.
EvalReport coco_ap(const std::vector<EvalInstance>& data);

// Error taxonomy at a foreground/background threshold pair: every unmatched
// detection lands in exactly one of Loc (bg <= best IoU < fg), Dupe (best
// IoU >= fg but that ground truth was already matched) or Bkgd (best IoU
// < bg); Miss counts ground truths that were neither matched nor covered by
// a Loc detection.
TideCounts tide_classify(const std::vector<EvalInstance>& data,
                         double fg_thr = 0.5, double bg_thr = 0.1);

// Distribution over ground truths of the IoU between each ground truth and
// its image's highest-scoring detection (0 when the image has none).
// Normalized to sum 1; all zeros when there is no ground truth.
std::vector<double> iou_density(const std::vector<EvalInstance>& data, int bins);

// Report forms: stable-key JSON and an aligned text table with columns
// AP50, AP75, AP_clear, AP_vague, AP_s, AP_m, AP_l, AP. Absent buckets
// print as "-" (null in JSON).
std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

}  // namespace vsflab
