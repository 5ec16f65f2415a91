#include "vsflab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vsflab {

std::vector<EvalInstance> make_instances(
    const std::vector<std::optional<BoxD>>& gts,
    const std::vector<Detection>& dets, bool clear) {
  std::vector<EvalInstance> out(gts.size());
  for (std::size_t f = 0; f < gts.size(); ++f) {
    out[f].clear = clear;
    if (gts[f]) out[f].gts.push_back(*gts[f]);
  }
  for (const Detection& d : dets) {
    require(d.frame >= 0 && static_cast<std::size_t>(d.frame) < gts.size(),
            "detection frame index out of range");
    out[static_cast<std::size_t>(d.frame)].dets.push_back(d);
  }
  return out;
}

namespace {

constexpr double kSmallCut = 32.0 * 32.0;
constexpr double kLargeCut = 96.0 * 96.0;

// Predicates marking ground truths / detections outside the current bucket.
struct Bucket {
  std::function<bool(const EvalInstance&, const BoxD&)> ignore_gt;
  std::function<bool(const EvalInstance&, const Detection&)> ignore_det;
};

Bucket bucket_all() {
  return {[](const EvalInstance&, const BoxD&) { return false; },
          [](const EvalInstance&, const Detection&) { return false; }};
}

Bucket bucket_clear(bool want_clear) {
  return {[want_clear](const EvalInstance& inst, const BoxD&) {
            return inst.clear != want_clear;
          },
          [want_clear](const EvalInstance& inst, const Detection&) {
            return inst.clear != want_clear;
          }};
}

Bucket bucket_area(double lo, double hi) {
  return {[lo, hi](const EvalInstance&, const BoxD& g) {
            return g.area() < lo || g.area() > hi;
          },
          [lo, hi](const EvalInstance&, const Detection& d) {
            return d.box.area() < lo || d.box.area() > hi;
          }};
}

// Global deterministic detection order: score descending, then instance,
// then coordinates.
struct OrderedDet {
  double score;
  std::size_t inst;
  std::size_t idx;  // index within the instance
  const Detection* det;
};

bool global_order(const OrderedDet& a, const OrderedDet& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.inst != b.inst) return a.inst < b.inst;
  const BoxD& x = a.det->box;
  const BoxD& y = b.det->box;
  if (x.x1 != y.x1) return x.x1 < y.x1;
  if (x.y1 != y.y1) return x.y1 < y.y1;
  if (x.x2 != y.x2) return x.x2 < y.x2;
  if (x.y2 != y.y2) return x.y2 < y.y2;
  return a.idx < b.idx;
}

std::vector<OrderedDet> order_dets(const std::vector<EvalInstance>& data) {
  std::vector<OrderedDet> all;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < data[i].dets.size(); ++k)
      all.push_back(OrderedDet{data[i].dets[k].score, i, k, &data[i].dets[k]});
  std::sort(all.begin(), all.end(), global_order);
  return all;
}

struct MatchOutcome {
  std::vector<int> det_kind;  // per ordered det: 1 tp, 0 fp, -1 ignored
  std::vector<std::vector<int>> gt_match;  // per instance, matched det or -1
  std::int64_t n_pos = 0;                  // non-ignored ground truths
};

// Greedy matcher shared by AP and the error taxonomy. A detection takes the
// highest-IoU ground truth at or above the threshold among the unmatched
// ones of its image, preferring non-ignored ground truths; matching an
// ignored ground truth (or being unmatched while itself out of bucket)
// removes the detection from scoring instead of making it a false positive.
MatchOutcome greedy_match(const std::vector<EvalInstance>& data,
                          const std::vector<OrderedDet>& order, double iou_thr,
                          const Bucket& bucket) {
  MatchOutcome out;
  out.det_kind.assign(order.size(), 0);
  out.gt_match.resize(data.size());
  std::vector<std::vector<bool>> gt_ignored(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.gt_match[i].assign(data[i].gts.size(), -1);
    gt_ignored[i].resize(data[i].gts.size());
    for (std::size_t g = 0; g < data[i].gts.size(); ++g) {
      gt_ignored[i][g] = bucket.ignore_gt(data[i], data[i].gts[g]);
      if (!gt_ignored[i][g]) ++out.n_pos;
    }
  }
  for (std::size_t d = 0; d < order.size(); ++d) {
    const OrderedDet& od = order[d];
    const EvalInstance& inst = data[od.inst];
    int best = -1;
    double best_iou = 0.0;
    bool best_ignored = false;
    for (std::size_t g = 0; g < inst.gts.size(); ++g) {
      if (out.gt_match[od.inst][g] >= 0) continue;
      const double v = iou(od.det->box, inst.gts[g]);
      if (v < iou_thr) continue;
      const bool ign = gt_ignored[od.inst][g];
      const bool better =
          best < 0 || (best_ignored && !ign) || (best_ignored == ign && v > best_iou);
      if (better) {
        best = static_cast<int>(g);
        best_iou = v;
        best_ignored = ign;
      }
    }
    if (best >= 0) {
      out.gt_match[od.inst][static_cast<std::size_t>(best)] = static_cast<int>(d);
      out.det_kind[d] = best_ignored ? -1 : 1;
    } else {
      out.det_kind[d] = bucket.ignore_det(inst, *od.det) ? -1 : 0;
    }
  }
  return out;
}

// 101-point interpolated AP from the ordered detection outcomes.
double ap_from_outcome(const MatchOutcome& m) {
  if (m.n_pos == 0) return 0.0;
  std::vector<double> precision, recall;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t d = 0; d < m.det_kind.size(); ++d) {
    if (m.det_kind[d] < 0) continue;
    if (m.det_kind[d] == 1)
      ++tp;
    else
      ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(m.n_pos));
  }
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    double best = 0.0;
    for (std::size_t j = 0; j < precision.size(); ++j)
      if (recall[j] >= r && precision[j] > best) best = precision[j];
    sum += best;
  }
  return sum / 101.0;
}

double ap_at(const std::vector<EvalInstance>& data,
             const std::vector<OrderedDet>& order, double iou_thr,
             const Bucket& bucket) {
  return ap_from_outcome(greedy_match(data, order, iou_thr, bucket));
}

double ap_averaged(const std::vector<EvalInstance>& data,
                   const std::vector<OrderedDet>& order, const Bucket& bucket) {
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 10; ++i) {
    sum += ap_at(data, order, 0.5 + 0.05 * i, bucket);
    ++n;
  }
  return sum / n;
}

}  // namespace

double average_precision(const std::vector<EvalInstance>& data, double iou_thr) {
  require(iou_thr > 0 && iou_thr <= 1, "average_precision: bad threshold");
  return ap_at(data, order_dets(data), iou_thr, bucket_all());
}

EvalReport coco_ap(const std::vector<EvalInstance>& data) {
  EvalReport r;
  const std::vector<OrderedDet> order = order_dets(data);
  for (const EvalInstance& inst : data)
    for (const BoxD& g : inst.gts) {
      r.any_gt = true;
      if (inst.clear)
        r.has_clear = true;
      else
        r.has_vague = true;
      if (g.area() < kSmallCut)
        r.has_s = true;
      else if (g.area() > kLargeCut)
        r.has_l = true;
      else
        r.has_m = true;
    }
  r.ap50 = ap_at(data, order, 0.50, bucket_all());
  r.ap75 = ap_at(data, order, 0.75, bucket_all());
  r.ap = ap_averaged(data, order, bucket_all());
  r.ap_clear = r.has_clear ? ap_averaged(data, order, bucket_clear(true)) : 0.0;
  r.ap_vague = r.has_vague ? ap_averaged(data, order, bucket_clear(false)) : 0.0;
  r.ap_s = r.has_s ? ap_averaged(data, order, bucket_area(0.0, kSmallCut)) : 0.0;
  r.ap_m = r.has_m ? ap_averaged(data, order, bucket_area(kSmallCut, kLargeCut)) : 0.0;
  r.ap_l = r.has_l
               ? ap_averaged(data, order,
                             bucket_area(kLargeCut,
                                         std::numeric_limits<double>::infinity()))
               : 0.0;
  r.errors = tide_classify(data);
  return r;
}

TideCounts tide_classify(const std::vector<EvalInstance>& data, double fg_thr,
                         double bg_thr) {
  require(bg_thr > 0 && bg_thr < fg_thr && fg_thr < 1,
          "tide_classify: thresholds must satisfy 0 < bg < fg < 1");
  const std::vector<OrderedDet> order = order_dets(data);
  const MatchOutcome m = greedy_match(data, order, fg_thr, bucket_all());
  TideCounts counts;
  // Ground truths covered by a localization error, per instance.
  std::vector<std::vector<bool>> loc_covered(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    loc_covered[i].resize(data[i].gts.size());

  for (std::size_t d = 0; d < order.size(); ++d) {
    if (m.det_kind[d] == 1) continue;  // matched
    const OrderedDet& od = order[d];
    const EvalInstance& inst = data[od.inst];
    double best = 0.0;
    int best_g = -1;
    for (std::size_t g = 0; g < inst.gts.size(); ++g) {
      const double v = iou(od.det->box, inst.gts[g]);
      if (best_g < 0 || v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0 && best >= fg_thr) {
      ++counts.dupe;
    } else if (best_g >= 0 && best >= bg_thr) {
      ++counts.loc;
      loc_covered[od.inst][static_cast<std::size_t>(best_g)] = true;
    } else {
      ++counts.bkgd;
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t g = 0; g < data[i].gts.size(); ++g)
      if (m.gt_match[i][g] < 0 && !loc_covered[i][g]) ++counts.miss;
  return counts;
}

std::vector<double> iou_density(const std::vector<EvalInstance>& data, int bins) {
  require(bins >= 1, "iou_density: need at least one bin");
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  std::int64_t n = 0;
  for (const EvalInstance& inst : data) {
    const Detection* top = nullptr;
    for (const Detection& d : inst.dets)
      if (!top || d.score > top->score) top = &d;
    for (const BoxD& g : inst.gts) {
      const double v = top ? iou(top->box, g) : 0.0;
      const int b = std::min(bins - 1, static_cast<int>(v * bins));
      hist[static_cast<std::size_t>(b)] += 1.0;
      ++n;
    }
  }
  if (n > 0)
    for (double& h : hist) h /= static_cast<double>(n);
  return hist;
}

namespace {

nlohmann::ordered_json bucket_value(double v, bool present) {
  if (!present) return nullptr;
  return v;
}

std::string fmt_cell(double v, bool present) {
  if (!present) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["AP50"] = r.ap50;
  j["AP75"] = r.ap75;
  j["AP_clear"] = bucket_value(r.ap_clear, r.has_clear);
  j["AP_vague"] = bucket_value(r.ap_vague, r.has_vague);
  j["AP_s"] = bucket_value(r.ap_s, r.has_s);
  j["AP_m"] = bucket_value(r.ap_m, r.has_m);
  j["AP_l"] = bucket_value(r.ap_l, r.has_l);
  j["AP"] = r.ap;
  j["any_gt"] = r.any_gt;
  j["errors"] = {{"Loc", r.errors.loc},
                 {"Dupe", r.errors.dupe},
                 {"Bkgd", r.errors.bkgd},
                 {"Miss", r.errors.miss}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
  const char* names[] = {"AP50",    "AP75", "AP_clear", "AP_vague",
                         "AP_s",    "AP_m", "AP_l",     "AP"};
  const std::string cells[] = {
      fmt_cell(r.ap50, true),           fmt_cell(r.ap75, true),
      fmt_cell(r.ap_clear, r.has_clear), fmt_cell(r.ap_vague, r.has_vague),
      fmt_cell(r.ap_s, r.has_s),        fmt_cell(r.ap_m, r.has_m),
      fmt_cell(r.ap_l, r.has_l),        fmt_cell(r.ap, true)};
  std::ostringstream os;
  for (int i = 0; i < 8; ++i) {
    os << names[i];
    const int pad = 10 - static_cast<int>(std::string(names[i]).size());
    for (int p = 0; p < pad; ++p) os << ' ';
  }
  os << '\n';
  for (int i = 0; i < 8; ++i) {
    os << cells[i];
    const int pad = 10 - static_cast<int>(cells[i].size());
    for (int p = 0; p < pad; ++p) os << ' ';
  }
  os << '\n';
  return os.str();
}

}  // namespace vsflab
