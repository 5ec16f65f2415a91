#include "vsflab/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsflab/autograd.hpp"
#include "vsflab/vsf.hpp"

namespace vsflab {

namespace fs = std::filesystem;

Variant variant_from_string(const std::string& s) {
  if (s == "frame_baseline") return Variant::frame_baseline;
  if (s == "concat_baseline") return Variant::concat_baseline;
  if (s == "vsf_data") return Variant::vsf_data;
  if (s == "vsf_full") return Variant::vsf_full;
  fail("unknown model variant: " + s);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::frame_baseline: return "frame_baseline";
    case Variant::concat_baseline: return "concat_baseline";
    case Variant::vsf_data: return "vsf_data";
    case Variant::vsf_full: return "vsf_full";
  }
  fail("bad variant value");
}

bool ModelConfig::stage_has_vsf(int stage) const {
  if (variant != Variant::vsf_full) return false;
  if (vsf_stages.empty()) return true;
  return std::find(vsf_stages.begin(), vsf_stages.end(), stage) != vsf_stages.end();
}

void ModelConfig::validate() const {
  require(!stage_channels.empty(), "model: no backbone stages");
  for (int c : stage_channels) require(c >= 1, "model: bad stage width");
  require(image_w >= stride() && image_h >= stride() && image_w % stride() == 0 &&
              image_h % stride() == 0,
          "model: image extent must be a positive multiple of the stride");
  require(t_frames >= 1, "model: need at least one frame");
  require(!anchors.sizes.empty() && !anchors.ratios.empty(), "model: no anchors");
  for (double s : anchors.sizes) require(s > 0, "model: anchor size must be positive");
  for (double r : anchors.ratios)
    require(r > 0, "model: anchor ratio must be positive");
  require(anchors.negative_thr >= 0 && anchors.negative_thr < anchors.positive_thr &&
              anchors.positive_thr <= 1,
          "model: anchor thresholds must satisfy 0 <= neg < pos <= 1");
  require(reduce_channels >= 1 && rpn_channels >= 1 && roi_bins >= 1 && head_fc >= 1,
          "model: head widths must be positive");
  require(proposals_train >= 1 && proposals_infer >= 1, "model: proposal caps");
  require(rpn_nms_thr > 0 && rpn_nms_thr < 1 && final_nms_thr > 0 && final_nms_thr < 1,
          "model: suppression thresholds must lie in (0,1)");
  require(delta_clamp > 0, "model: delta clamp must be positive");
  for (int s : vsf_stages)
    require(s >= 0 && s < static_cast<int>(stage_channels.size()),
            "model: vsf stage index out of range");
  if (variant == Variant::vsf_full)
    for (std::size_t s = 0; s < stage_channels.size(); ++s)
      if (stage_has_vsf(static_cast<int>(s)))
        require(stage_channels[s] % 8 == 0,
                "model: voxel-shift stages need a channel count divisible by 8");
}

ModelConfig ModelConfig::micro(Variant v) {
  ModelConfig m;
  m.variant = v;
  m.image_w = 8;
  m.image_h = 8;
  m.t_frames = 2;
  m.stage_channels = {8, 8};
  m.reduce_channels = 8;
  m.rpn_channels = 8;
  m.anchors.sizes = {3.0, 5.0};
  m.anchors.ratios = {1.0, 2.0};
  m.roi_bins = 2;
  m.head_fc = 8;
  m.proposals_train = 3;
  m.proposals_infer = 4;
  return m;
}

void ParamSet::add(std::string name, Tensor t) {
  require(!has(name), "duplicate parameter: " + name);
  items.emplace_back(std::move(name), std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return t;
  fail("missing parameter: " + name);
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return t;
  fail("missing parameter: " + name);
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return true;
  return false;
}

std::int64_t ParamSet::total_size() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items) n += t.size();
  return n;
}

namespace {

// He-normal: standard deviation sqrt(2 / fan_in), fan_in = receptive volume.
Tensor he_normal(Shape shape, Rng& rng) {
  Tensor t{shape};
  std::int64_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

std::string stage_prefix(int s) { return "backbone/stage" + std::to_string(s); }
std::string head_prefix(int h) { return "head" + std::to_string(h); }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ParamSet build_model(const ModelConfig& cfg, Rng& init_rng) {
  cfg.validate();
  ParamSet p;
  int cin = 3;
  for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    const int c = cfg.stage_channels[s];
    const std::string pre = stage_prefix(static_cast<int>(s));
    p.add(pre + "/conv_w", he_normal({c, cin, 3, 3}, init_rng));
    p.add(pre + "/conv_b", Tensor{{c}});
    p.add(pre + "/proj_w", he_normal({c, c, 1, 1}, init_rng));
    p.add(pre + "/proj_b", Tensor{{c}});
    if (cfg.stage_has_vsf(static_cast<int>(s))) {
      p.add(pre + "/vsf/offset_w", Tensor{{3, c, 3, 3, 3}});
      p.add(pre + "/vsf/offset_b", Tensor{{3}});
      p.add(pre + "/vsf/gate_w", Tensor{{c, c}});
      p.add(pre + "/vsf/gate_b", Tensor{{c}});
    }
    cin = c;
  }
  const int a = cfg.anchors.per_cell();
  p.add("rpn/reduce_w", he_normal({cfg.reduce_channels, cfg.last_channels(), 1, 1},
                                  init_rng));
  p.add("rpn/reduce_b", Tensor{{cfg.reduce_channels}});
  p.add("rpn/conv_w",
        he_normal({cfg.rpn_channels, cfg.reduce_channels * cfg.frames_per_sample(),
                   3, 3},
                  init_rng));
  p.add("rpn/conv_b", Tensor{{cfg.rpn_channels}});
  p.add("rpn/cls_w", he_normal({a, cfg.rpn_channels, 1, 1}, init_rng));
  p.add("rpn/cls_b", Tensor{{a}});
  p.add("rpn/reg_w", he_normal({4 * a, cfg.rpn_channels, 1, 1}, init_rng));
  p.add("rpn/reg_b", Tensor{{4 * a}});
  const std::int64_t pooled = static_cast<std::int64_t>(cfg.last_channels()) *
                              cfg.roi_bins * cfg.roi_bins;
  for (int h = 0; h < cfg.head_count(); ++h) {
    const std::string pre = head_prefix(h);
    p.add(pre + "/fc_w", he_normal({cfg.head_fc, pooled}, init_rng));
    p.add(pre + "/fc_b", Tensor{{cfg.head_fc}});
    p.add(pre + "/cls_w", he_normal({1, cfg.head_fc}, init_rng));
    p.add(pre + "/cls_b", Tensor{{1}});
    p.add(pre + "/reg_w", he_normal({4, cfg.head_fc}, init_rng));
    p.add(pre + "/reg_b", Tensor{{4}});
  }
  return p;
}

void save_params(const ParamSet& params, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream idx(fs::path(dir) / "params.txt", std::ios::binary);
  require(idx.good(), "cannot write " + dir + "/params.txt");
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "t%04zu.vsft", i);
    write_tensor_file((fs::path(dir) / file).string(), params.items[i].second);
    idx << file << ' ' << params.items[i].first << '\n';
  }
  require(idx.good(), "write failed: " + dir + "/params.txt");
}

ParamSet load_params(const std::string& dir) {
  std::ifstream idx(fs::path(dir) / "params.txt", std::ios::binary);
  require(idx.good(), "cannot read " + dir + "/params.txt");
  ParamSet p;
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    const auto space = line.find(' ');
    require(space != std::string::npos && space + 1 < line.size(),
            "malformed parameter index line: " + line);
    const std::string file = line.substr(0, space);
    const std::string name = line.substr(space + 1);
    p.add(name, read_tensor_file((fs::path(dir) / file).string()));
  }
  require(!p.items.empty(), "empty parameter index: " + dir);
  return p;
}

std::vector<BoxD> make_anchors(const ModelConfig& cfg) {
  std::vector<BoxD> anchors;
  anchors.reserve(static_cast<std::size_t>(cfg.anchors_per_sample()));
  const double stride = cfg.stride();
  for (double size : cfg.anchors.sizes)
    for (double ratio : cfg.anchors.ratios) {
      const double w = size / std::sqrt(ratio);
      const double h = size * std::sqrt(ratio);
      for (int i = 0; i < cfg.feat_h(); ++i)
        for (int j = 0; j < cfg.feat_w(); ++j) {
          const double cx = (j + 0.5) * stride;
          const double cy = (i + 0.5) * stride;
          anchors.push_back(BoxD{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
        }
    }
  return anchors;
}

std::array<double, 4> encode_delta(const BoxD& ref, const BoxD& target) {
  require(ref.width() > 0 && ref.height() > 0 && target.width() > 0 &&
              target.height() > 0,
          "encode_delta: degenerate box");
  const double rcx = 0.5 * (ref.x1 + ref.x2), rcy = 0.5 * (ref.y1 + ref.y2);
  const double tcx = 0.5 * (target.x1 + target.x2), tcy = 0.5 * (target.y1 + target.y2);
  return {(tcx - rcx) / ref.width(), (tcy - rcy) / ref.height(),
          std::log(target.width() / ref.width()),
          std::log(target.height() / ref.height())};
}

BoxD decode_delta(const BoxD& ref, const std::array<double, 4>& d, double clamp) {
  require(ref.width() > 0 && ref.height() > 0, "decode_delta: degenerate box");
  const double rcx = 0.5 * (ref.x1 + ref.x2), rcy = 0.5 * (ref.y1 + ref.y2);
  const double cx = rcx + d[0] * ref.width();
  const double cy = rcy + d[1] * ref.height();
  const double w = ref.width() * std::exp(std::min(d[2], clamp));
  const double h = ref.height() * std::exp(std::min(d[3], clamp));
  return BoxD{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

RpnTargets assign_rpn_targets(const std::vector<BoxD>& anchors,
                              const std::vector<std::optional<BoxD>>& gt,
                              const AnchorConfig& cfg) {
  double sx1 = 0, sy1 = 0, sx2 = 0, sy2 = 0;
  int n = 0;
  for (const auto& b : gt)
    if (b) {
      sx1 += b->x1;
      sy1 += b->y1;
      sx2 += b->x2;
      sy2 += b->y2;
      ++n;
    }
  require(n > 0, "assign_rpn_targets: no annotated frames");
  const BoxD mean_gt{sx1 / n, sy1 / n, sx2 / n, sy2 / n};

  RpnTargets out;
  out.mean_gt = mean_gt;
  out.labels.resize(anchors.size(), -1);
  out.regression.resize(anchors.size());
  double best = -1.0;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double v = iou(anchors[i], mean_gt);
    if (v >= cfg.positive_thr)
      out.labels[i] = 1;
    else if (v < cfg.negative_thr)
      out.labels[i] = 0;
    if (v > best) {
      best = v;
      best_idx = i;
    }
  }
  out.labels[best_idx] = 1;  // the target is always reachable by some anchor
  for (std::size_t i = 0; i < anchors.size(); ++i)
    if (out.labels[i] == 1) out.regression[i] = encode_delta(anchors[i], mean_gt);
  return out;
}

namespace {

bool det_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
  if (a.box.y1 != b.box.y1) return a.box.y1 < b.box.y1;
  if (a.box.x2 != b.box.x2) return a.box.x2 < b.box.x2;
  if (a.box.y2 != b.box.y2) return a.box.y2 < b.box.y2;
  return a.frame < b.frame;
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr) {
  require(iou_thr > 0 && iou_thr < 1, "nms: threshold must lie in (0,1)");
  std::sort(dets.begin(), dets.end(), det_order);
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : kept)
      if (iou(d.box, k.box) > iou_thr) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::map<std::string, Var> lift_params(Tape& tape, const ParamSet& params,
                                       bool requires_grad) {
  std::map<std::string, Var> pv;
  for (const auto& [name, t] : params.items) pv[name] = tape.leaf(t, requires_grad);
  return pv;
}

namespace {

Var pvar(const std::map<std::string, Var>& pv, const std::string& name) {
  auto it = pv.find(name);
  require(it != pv.end(), "missing parameter: " + name);
  return it->second;
}

// Model input: frame-major (T,3,H,W); the data-level variant temporally
// de-aligns the replicated channels before any learned layer.
Tensor prep_input(const ModelConfig& cfg, const ClipSample& clip) {
  require(static_cast<int>(clip.frames.size()) == cfg.t_frames,
          "clip frame count does not match the model configuration");
  require(clip.frames[0].w == cfg.image_w && clip.frames[0].h == cfg.image_h,
          "clip frame extent does not match the model configuration");
  Tensor x = clip_to_tensor(clip);
  if (cfg.variant == Variant::vsf_data) {
    Tensor f = ops::split_frames(x, cfg.t_frames);
    f = vsf_shift_all(f, nullptr, ShiftSchedule::data);
    x = ops::merge_frames(f);
  }
  return x;
}

struct RpnForward {
  Var feat;  // (samples * frames_per_sample, C_last, fh, fw)
  Var cls;   // (samples, A, fh, fw) logits
  Var reg;   // (samples, 4A, fh, fw)
};

RpnForward forward_backbone_rpn(Tape& tp, const ModelConfig& cfg,
                                const std::map<std::string, Var>& pv,
                                const Tensor& input) {
  const int tf = cfg.frames_per_sample();
  Var x = tp.leaf(input, false);
  for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    const std::string pre = stage_prefix(static_cast<int>(s));
    x = ag::conv2d(tp, x, pvar(pv, pre + "/conv_w"), pvar(pv, pre + "/conv_b"), 2);
    x = ag::relu(tp, x);
    x = ag::conv2d(tp, x, pvar(pv, pre + "/proj_w"), pvar(pv, pre + "/proj_b"), 1);
    if (cfg.stage_has_vsf(static_cast<int>(s))) {
      ag::VsfBlockParams vp;
      vp.conv_w = pvar(pv, pre + "/vsf/offset_w");
      vp.conv_b = pvar(pv, pre + "/vsf/offset_b");
      vp.fc_w = pvar(pv, pre + "/vsf/gate_w");
      vp.fc_b = pvar(pv, pre + "/vsf/gate_b");
      x = ag::vsf_block(tp, x, tf, ShiftSchedule::feature, vp);
    }
    x = ag::relu(tp, x);
  }
  RpnForward out;
  out.feat = x;
  Var red = ag::relu(
      tp, ag::conv2d(tp, x, pvar(pv, "rpn/reduce_w"), pvar(pv, "rpn/reduce_b"), 1));
  Var cat = ag::frames_to_channels(tp, red, tf);
  Var rpn = ag::relu(
      tp, ag::conv2d(tp, cat, pvar(pv, "rpn/conv_w"), pvar(pv, "rpn/conv_b"), 1));
  out.cls = ag::conv2d(tp, rpn, pvar(pv, "rpn/cls_w"), pvar(pv, "rpn/cls_b"), 1);
  out.reg = ag::conv2d(tp, rpn, pvar(pv, "rpn/reg_w"), pvar(pv, "rpn/reg_b"), 1);
  return out;
}

// Scored boxes for one sample decoded from the current predictions; clipped
// to the image, degenerate results dropped.
std::vector<Detection> decode_proposals(const ModelConfig& cfg,
                                        const Tensor& clsv, const Tensor& regv,
                                        int sample,
                                        const std::vector<BoxD>& anchors) {
  const std::int64_t aps = cfg.anchors_per_sample();
  const std::int64_t cells = static_cast<std::int64_t>(cfg.feat_h()) * cfg.feat_w();
  const int a_cnt = cfg.anchors.per_cell();
  std::vector<Detection> dets;
  dets.reserve(static_cast<std::size_t>(aps));
  for (std::int64_t aid = 0; aid < aps; ++aid) {
    const std::int64_t a_chan = aid / cells;
    const std::int64_t cell = aid % cells;
    std::array<double, 4> d{};
    for (int k = 0; k < 4; ++k)
      d[static_cast<std::size_t>(k)] =
          regv[(sample * 4 * a_cnt + 4 * a_chan + k) * cells + cell];
    BoxD box = clip_box(
        decode_delta(anchors[static_cast<std::size_t>(aid)], d, cfg.delta_clamp),
        cfg.image_w, cfg.image_h);
    if (box.width() <= 1e-3 || box.height() <= 1e-3) continue;
    dets.push_back(Detection{0, box, sigmoid_s(clsv[sample * aps + aid])});
  }
  return dets;
}

// Per-sample resolved training structure.
struct SamplePlan {
  bool active = false;
  RpnTargets targets;
  std::vector<std::int64_t> cls_anchors;
  std::vector<BoxD> proposals;
};

// Refinement head h applied to fixed regions of the per-frame feature map.
std::pair<Var, Var> apply_head(Tape& tp, const ModelConfig& cfg,
                               const std::map<std::string, Var>& pv, Var feat,
                               int head, std::vector<ops::RoiBox> rois) {
  const std::string pre = head_prefix(head);
  Var pooled = ag::roi_avg_pool(tp, feat, std::move(rois), cfg.roi_bins);
  Var hid = ag::relu(tp, ag::fully_connected(tp, pooled, pvar(pv, pre + "/fc_w"),
                                             pvar(pv, pre + "/fc_b")));
  Var cls = ag::fully_connected(tp, hid, pvar(pv, pre + "/cls_w"),
                                pvar(pv, pre + "/cls_b"));
  Var reg = ag::fully_connected(tp, hid, pvar(pv, pre + "/reg_w"),
                                pvar(pv, pre + "/reg_b"));
  return {cls, reg};
}

std::vector<ops::RoiBox> rois_for(const ModelConfig& cfg,
                                  const std::vector<BoxD>& proposals,
                                  std::int64_t feat_row) {
  std::vector<ops::RoiBox> rois;
  rois.reserve(proposals.size());
  const double s = cfg.stride();
  for (const BoxD& p : proposals)
    rois.push_back(ops::RoiBox{feat_row, p.x1 / s, p.y1 / s, p.x2 / s, p.y2 / s});
  return rois;
}

}  // namespace

Var clip_loss(Tape& tp, const ModelConfig& cfg,
              const std::map<std::string, Var>& pv, const ClipSample& clip,
              Rng& sample_rng, const StructuralChoices* choices,
              StructuralChoices* out_choices, LossBreakdown* breakdown) {
  cfg.validate();
  const Tensor input = prep_input(cfg, clip);
  const RpnForward fwd = forward_backbone_rpn(tp, cfg, pv, input);
  const std::vector<BoxD> anchors = make_anchors(cfg);
  const std::vector<std::optional<BoxD>> gt = clip_gt_boxes(clip);
  const bool per_frame = cfg.variant == Variant::frame_baseline;
  const int samples = per_frame ? cfg.t_frames : 1;
  require(!choices || static_cast<int>(choices->samples.size()) == samples,
          "structural choices do not match the sample layout");

  const Tensor& clsv = tp.val(fwd.cls);
  const Tensor& regv = tp.val(fwd.reg);
  std::vector<SamplePlan> plans(static_cast<std::size_t>(samples));
  int active = 0;
  for (int s = 0; s < samples; ++s) {
    SamplePlan& plan = plans[static_cast<std::size_t>(s)];
    const std::vector<std::optional<BoxD>> sample_gt =
        per_frame ? std::vector<std::optional<BoxD>>{gt[static_cast<std::size_t>(s)]}
                  : gt;
    bool any = false;
    for (const auto& b : sample_gt) any = any || b.has_value();
    if (!any) continue;  // nothing to supervise on this sample
    plan.active = true;
    ++active;
    plan.targets = assign_rpn_targets(anchors, sample_gt, cfg.anchors);
    if (choices) {
      plan.cls_anchors = choices->samples[static_cast<std::size_t>(s)].cls_anchors;
      plan.proposals = choices->samples[static_cast<std::size_t>(s)].proposals;
    } else {
      std::vector<std::int64_t> pos, neg;
      for (std::size_t i = 0; i < plan.targets.labels.size(); ++i) {
        if (plan.targets.labels[i] == 1) pos.push_back(static_cast<std::int64_t>(i));
        if (plan.targets.labels[i] == 0) neg.push_back(static_cast<std::int64_t>(i));
      }
      sample_rng.shuffle(neg);
      const std::size_t want =
          std::max<std::size_t>(8, 3 * pos.size());
      if (neg.size() > want) neg.resize(want);
      plan.cls_anchors = pos;
      plan.cls_anchors.insert(plan.cls_anchors.end(), neg.begin(), neg.end());

      std::vector<Detection> props = decode_proposals(cfg, clsv, regv, s, anchors);
      props = nms(std::move(props), cfg.rpn_nms_thr);
      if (static_cast<int>(props.size()) > cfg.proposals_train)
        props.resize(static_cast<std::size_t>(cfg.proposals_train));
      for (const Detection& d : props) plan.proposals.push_back(d.box);
      plan.proposals.push_back(plan.targets.mean_gt);
    }
  }
  require(active > 0, "clip has no annotated frames");
  if (out_choices) {
    out_choices->samples.assign(static_cast<std::size_t>(samples), SampleChoices{});
    for (int s = 0; s < samples; ++s) {
      out_choices->samples[static_cast<std::size_t>(s)].cls_anchors =
          plans[static_cast<std::size_t>(s)].cls_anchors;
      out_choices->samples[static_cast<std::size_t>(s)].proposals =
          plans[static_cast<std::size_t>(s)].proposals;
    }
  }

  // Proposal-stage classification: one gather across every sampled anchor.
  const std::int64_t aps = cfg.anchors_per_sample();
  const std::int64_t cells = static_cast<std::int64_t>(cfg.feat_h()) * cfg.feat_w();
  const int a_cnt = cfg.anchors.per_cell();
  std::vector<std::int64_t> cls_idx;
  std::vector<double> cls_lab;
  std::vector<std::int64_t> reg_idx;
  std::vector<double> reg_tgt;
  for (int s = 0; s < samples; ++s) {
    const SamplePlan& plan = plans[static_cast<std::size_t>(s)];
    if (!plan.active) continue;
    for (std::int64_t aid : plan.cls_anchors) {
      cls_idx.push_back(s * aps + aid);
      cls_lab.push_back(plan.targets.labels[static_cast<std::size_t>(aid)] == 1 ? 1.0
                                                                                : 0.0);
    }
    for (std::size_t i = 0; i < plan.targets.labels.size(); ++i) {
      if (plan.targets.labels[i] != 1) continue;
      const std::int64_t a_chan = static_cast<std::int64_t>(i) / cells;
      const std::int64_t cell = static_cast<std::int64_t>(i) % cells;
      for (int k = 0; k < 4; ++k) {
        reg_idx.push_back((s * 4 * a_cnt + 4 * a_chan + k) * cells + cell);
        reg_tgt.push_back(plan.targets.regression[i][static_cast<std::size_t>(k)]);
      }
    }
  }
  require(!cls_idx.empty() && !reg_idx.empty(),
          "proposal stage produced no training anchors");

  Var cls_flat = ag::reshape(tp, fwd.cls, {clsv.size(), 1});
  Var cls_sel = ag::gather_rows(tp, cls_flat, cls_idx);
  Var cls_prob = ag::sigmoid(tp, cls_sel);
  const std::int64_t n_cls = static_cast<std::int64_t>(cls_lab.size());
  Var cls_lab_v = tp.leaf(Tensor::from_data({n_cls, 1}, std::move(cls_lab)), false);
  Var rpn_cls = ag::mean_all(tp, ag::binary_cross_entropy(tp, cls_prob, cls_lab_v));

  const std::int64_t n_pos = static_cast<std::int64_t>(reg_idx.size()) / 4;
  Var reg_flat = ag::reshape(tp, fwd.reg, {regv.size(), 1});
  Var reg_sel = ag::reshape(tp, ag::gather_rows(tp, reg_flat, reg_idx), {n_pos, 4});
  Var reg_tgt_v =
      tp.leaf(Tensor::from_data({n_pos, 4}, std::move(reg_tgt)), false);
  Var rpn_reg = ag::scale(
      tp, ag::sum_all(tp, ag::smooth_l1(tp, ag::sub(tp, reg_sel, reg_tgt_v))),
      1.0 / static_cast<double>(n_pos));

  // Refinement heads: every (sample, head) pair gets a classification term;
  // pairs whose frame shows the object also get a regression term.
  Var head_cls_sum, head_reg_sum;
  int cls_pairs = 0, reg_pairs = 0;
  for (int s = 0; s < samples; ++s) {
    const SamplePlan& plan = plans[static_cast<std::size_t>(s)];
    if (!plan.active) continue;
    for (int h = 0; h < cfg.head_count(); ++h) {
      const int frame = per_frame ? s : h;
      const std::int64_t feat_row = per_frame ? s : h;
      const std::optional<BoxD>& frame_gt = gt[static_cast<std::size_t>(frame)];
      auto [hcls, hreg] =
          apply_head(tp, cfg, pv, fwd.feat, per_frame ? 0 : h,
                     rois_for(cfg, plan.proposals, feat_row));
      const std::int64_t k = static_cast<std::int64_t>(plan.proposals.size());
      std::vector<double> labels(static_cast<std::size_t>(k), 0.0);
      std::vector<std::int64_t> pos_rows;
      std::vector<double> pos_tgt;
      if (frame_gt) {
        for (std::int64_t i = 0; i < k; ++i) {
          const BoxD& prop = plan.proposals[static_cast<std::size_t>(i)];
          if (iou(prop, *frame_gt) >= cfg.head_pos_thr) {
            labels[static_cast<std::size_t>(i)] = 1.0;
            pos_rows.push_back(i);
            const auto d = encode_delta(prop, *frame_gt);
            pos_tgt.insert(pos_tgt.end(), d.begin(), d.end());
          }
        }
      }
      Var lab_v = tp.leaf(Tensor::from_data({k, 1}, std::move(labels)), false);
      Var bce = ag::mean_all(
          tp, ag::binary_cross_entropy(tp, ag::sigmoid(tp, hcls), lab_v));
      head_cls_sum = head_cls_sum.valid() ? ag::add(tp, head_cls_sum, bce) : bce;
      ++cls_pairs;
      if (!pos_rows.empty()) {
        const std::int64_t np = static_cast<std::int64_t>(pos_rows.size());
        Var sel = ag::gather_rows(tp, hreg, pos_rows);
        Var tgt = tp.leaf(Tensor::from_data({np, 4}, std::move(pos_tgt)), false);
        Var term = ag::scale(
            tp, ag::sum_all(tp, ag::smooth_l1(tp, ag::sub(tp, sel, tgt))),
            1.0 / static_cast<double>(np));
        head_reg_sum = head_reg_sum.valid() ? ag::add(tp, head_reg_sum, term) : term;
        ++reg_pairs;
      }
    }
  }
  Var head_cls = ag::scale(tp, head_cls_sum, 1.0 / cls_pairs);
  Var total = ag::add(tp, rpn_cls, ag::scale(tp, rpn_reg, cfg.reg_lambda));
  total = ag::add(tp, total, head_cls);
  Var head_reg;
  if (reg_pairs > 0) {
    head_reg = ag::scale(tp, head_reg_sum, 1.0 / reg_pairs);
    total = ag::add(tp, total, ag::scale(tp, head_reg, cfg.reg_lambda));
  }
  if (breakdown) {
    breakdown->rpn_cls = tp.val(rpn_cls)[0];
    breakdown->rpn_reg = tp.val(rpn_reg)[0];
    breakdown->head_cls = tp.val(head_cls)[0];
    breakdown->head_reg = head_reg.valid() ? tp.val(head_reg)[0] : 0.0;
    breakdown->total = tp.val(total)[0];
  }
  return total;
}

TrainResult train_detector(const std::vector<ClipSample>& clips,
                           const ModelConfig& cfg, const TrainConfig& tcfg) {
  cfg.validate();
  require(!clips.empty(), "train: no clips");
  require(tcfg.lr > 0 && tcfg.epochs >= 1 && tcfg.batch_clips >= 1,
          "train: bad schedule");

  TrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    bool any = false;
    for (const auto& b : clips[i].boxes) any = any || b.has_value();
    if (any)
      usable.push_back(i);
    else
      ++result.skipped_clips;
  }
  require(!usable.empty(), "train: every clip is unannotated");

  Rng init_rng = Rng::substream(tcfg.seed, "init");
  result.params = build_model(cfg, init_rng);
  std::vector<Tensor> momentum, grad;
  for (const auto& [name, t] : result.params.items) {
    momentum.emplace_back(t.shape());
    grad.emplace_back(t.shape());
  }

  Rng sample_rng = Rng::substream(tcfg.seed, "sample");
  int step = 0;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const double lr =
        tcfg.lr * (epoch >= tcfg.decay_epoch ? tcfg.decay_factor : 1.0);
    Rng shuffle_rng =
        Rng::substream(tcfg.seed, "shuffle/" + std::to_string(epoch));
    std::vector<std::size_t> order = usable;
    shuffle_rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_clips) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(tcfg.batch_clips));
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (Tensor& g : grad)
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] = 0.0;
      LossBreakdown mean{};
      for (std::size_t bi = begin; bi < end; ++bi) {
        Tape tape;
        const std::map<std::string, Var> pv = lift_params(tape, result.params, true);
        LossBreakdown bd;
        Var loss = clip_loss(tape, cfg, pv, clips[order[bi]], sample_rng, nullptr,
                             nullptr, &bd);
        require(std::isfinite(bd.total),
                "training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", step " + std::to_string(step + 1));
        tape.backward(loss);
        std::size_t pi = 0;
        for (const auto& [name, t] : result.params.items) {
          const Var v = pv.at(name);
          if (tape.has_grad(v)) {
            const Tensor& g = tape.grad(v);
            for (std::int64_t i = 0; i < g.size(); ++i)
              grad[pi][i] += inv_batch * g[i];
          }
          ++pi;
        }
        mean.total += inv_batch * bd.total;
        mean.rpn_cls += inv_batch * bd.rpn_cls;
        mean.rpn_reg += inv_batch * bd.rpn_reg;
        mean.head_cls += inv_batch * bd.head_cls;
        mean.head_reg += inv_batch * bd.head_reg;
      }
      for (std::size_t pi = 0; pi < grad.size(); ++pi) {
        Tensor& v = momentum[pi];
        Tensor& th = result.params.items[pi].second;
        for (std::int64_t i = 0; i < v.size(); ++i) {
          v[i] = tcfg.momentum * v[i] + grad[pi][i];
          th[i] -= lr * v[i];
        }
      }
      ++step;
      result.curve.push_back(LossRow{epoch, step, mean});
    }
  }
  return result;
}

std::vector<Detection> infer_clip(const ModelConfig& cfg, const ParamSet& params,
                                  const ClipSample& clip) {
  cfg.validate();
  Tape tape;
  const std::map<std::string, Var> pv = lift_params(tape, params, false);
  const Tensor input = prep_input(cfg, clip);
  const RpnForward fwd = forward_backbone_rpn(tape, cfg, pv, input);
  const std::vector<BoxD> anchors = make_anchors(cfg);
  const bool per_frame = cfg.variant == Variant::frame_baseline;
  const int samples = per_frame ? cfg.t_frames : 1;
  const Tensor& clsv = tape.val(fwd.cls);
  const Tensor& regv = tape.val(fwd.reg);

  std::vector<Detection> all;
  for (int s = 0; s < samples; ++s) {
    std::vector<Detection> props = decode_proposals(cfg, clsv, regv, s, anchors);
    props = nms(std::move(props), cfg.rpn_nms_thr);
    if (static_cast<int>(props.size()) > cfg.proposals_infer)
      props.resize(static_cast<std::size_t>(cfg.proposals_infer));
    std::vector<BoxD> proposals;
    for (const Detection& d : props) proposals.push_back(d.box);
    if (proposals.empty()) continue;

    for (int h = 0; h < cfg.head_count(); ++h) {
      const int frame = per_frame ? s : h;
      const std::int64_t feat_row = per_frame ? s : h;
      auto [hcls, hreg] = apply_head(tape, cfg, pv, fwd.feat, per_frame ? 0 : h,
                                     rois_for(cfg, proposals, feat_row));
      const Tensor& cv = tape.val(hcls);
      const Tensor& rv = tape.val(hreg);
      std::vector<Detection> frame_dets;
      for (std::size_t k = 0; k < proposals.size(); ++k) {
        const double score = sigmoid_s(cv[static_cast<std::int64_t>(k)]);
        if (score < cfg.score_thr) continue;
        std::array<double, 4> d{};
        for (int c = 0; c < 4; ++c)
          d[static_cast<std::size_t>(c)] = rv[static_cast<std::int64_t>(k) * 4 + c];
        const BoxD box =
            clip_box(decode_delta(proposals[k], d, cfg.delta_clamp), cfg.image_w,
                     cfg.image_h);
        if (box.width() <= 1e-3 || box.height() <= 1e-3) continue;
        frame_dets.push_back(Detection{frame, box, score});
      }
      frame_dets = nms(std::move(frame_dets), cfg.final_nms_thr);
      if (static_cast<int>(frame_dets.size()) > cfg.max_dets_per_frame)
        frame_dets.resize(static_cast<std::size_t>(cfg.max_dets_per_frame));
      all.insert(all.end(), frame_dets.begin(), frame_dets.end());
    }
  }
  std::sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return det_order(a, b);
  });
  return all;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write " + path);
  os << "epoch,step,total,rpn_cls,rpn_reg,head_cls,head_reg\n";
  for (const LossRow& r : rows)
    os << r.epoch << ',' << r.step << ',' << fmt17(r.loss.total) << ','
       << fmt17(r.loss.rpn_cls) << ',' << fmt17(r.loss.rpn_reg) << ','
       << fmt17(r.loss.head_cls) << ',' << fmt17(r.loss.head_reg) << '\n';
  require(os.good(), "write failed: " + path);
}

void write_detections_csv(const std::string& path,
                          const std::vector<Detection>& dets) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write " + path);
  os << "frame,x1,y1,x2,y2,score\n";
  for (const Detection& d : dets)
    os << d.frame << ',' << fmt17(d.box.x1) << ',' << fmt17(d.box.y1) << ','
       << fmt17(d.box.x2) << ',' << fmt17(d.box.y2) << ',' << fmt17(d.score)
       << '\n';
  require(os.good(), "write failed: " + path);
}

}  // namespace vsflab
