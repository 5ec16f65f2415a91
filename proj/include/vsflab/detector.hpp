#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsflab/boxes.hpp"
#include "vsflab/clipio.hpp"
#include "vsflab/rng.hpp"
#include "vsflab/tape.hpp"
#include "vsflab/tensor.hpp"

namespace vsflab {

// Toy spatio-temporal detector: a strided conv backbone over the clip's
// frames, an optional per-stage voxel-shift block, one proposal stage driven
// by the concatenated per-frame features, and one refinement head per frame.
enum class Variant { frame_baseline, concat_baseline, vsf_data, vsf_full };

Variant variant_from_string(const std::string& s);
std::string variant_name(Variant v);

struct AnchorConfig {
  std::vector<double> sizes{12.0, 24.0, 48.0};   // sqrt(area), pixels
  std::vector<double> ratios{0.5, 1.0, 2.0};     // height / width
  double positive_thr = 0.5;
  double negative_thr = 0.3;

  int per_cell() const {
    return static_cast<int>(sizes.size() * ratios.size());
  }
};

struct ModelConfig {
  Variant variant = Variant::concat_baseline;
  int image_w = 64;
  int image_h = 64;
  int t_frames = 8;
  std::vector<int> stage_channels{16, 32, 64, 64};  // stride 2 per stage
  // Stages that receive a voxel-shift block when the variant is vsf_full;
  // empty means every stage.
  std::vector<int> vsf_stages;
  int reduce_channels = 16;
  int rpn_channels = 64;
  AnchorConfig anchors;
  double rpn_nms_thr = 0.7;
  int proposals_train = 16;
  int proposals_infer = 64;
  double head_pos_thr = 0.5;
  int roi_bins = 4;
  int head_fc = 64;
  double reg_lambda = 1.0;
  double delta_clamp = 4.0;     // cap on predicted log-size deltas
  double final_nms_thr = 0.5;
  double score_thr = 0.05;
  int max_dets_per_frame = 16;

  int stride() const { return 1 << static_cast<int>(stage_channels.size()); }
  int feat_w() const { return image_w / stride(); }
  int feat_h() const { return image_h / stride(); }
  int last_channels() const { return stage_channels.back(); }
  // frame_baseline treats every frame as an independent sample.
  int frames_per_sample() const {
    return variant == Variant::frame_baseline ? 1 : t_frames;
  }
  int head_count() const {
    return variant == Variant::frame_baseline ? 1 : t_frames;
  }
  int anchors_per_sample() const {
    return anchors.per_cell() * feat_h() * feat_w();
  }
  bool stage_has_vsf(int stage) const;
  void validate() const;

  // Small configuration for finite-difference checks: 8x8 frames, T=2,
  // two 8-channel stages.
  static ModelConfig micro(Variant v);
};

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  int epochs = 9;
  int decay_epoch = 8;        // 1-based epoch from which lr is decayed
  double decay_factor = 0.1;
  int batch_clips = 1;
  std::uint64_t seed = 0;
};

// Ordered named parameter store. Insertion order fixes both the
// initialization draw order and the serialized layout.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  void add(std::string name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::int64_t total_size() const;
};

// He-normal weights, zero biases; voxel-shift offset convolutions and fusion
// gates start at zero so those blocks begin as pure bias-schedule shifts.
ParamSet build_model(const ModelConfig& cfg, Rng& init_rng);

// Directory form: params.txt lines "<file> <name>" plus one tensor dump per
// parameter.
void save_params(const ParamSet& params, const std::string& dir);
ParamSet load_params(const std::string& dir);

// Anchor boxes in image pixels, ordered (size, ratio)-major then row-major
// over feature cells, matching the flattened (A, fh, fw) proposal maps.
std::vector<BoxD> make_anchors(const ModelConfig& cfg);

// Box regression parameterization: (tx, ty) are center offsets in units of
// the reference size, (tw, th) log size ratios.
std::array<double, 4> encode_delta(const BoxD& ref, const BoxD& target);
BoxD decode_delta(const BoxD& ref, const std::array<double, 4>& d, double clamp);

struct RpnTargets {
  std::vector<int> labels;  // 1 object / 0 background / -1 ignored
  std::vector<std::array<double, 4>> regression;  // valid where label == 1
  BoxD mean_gt;
};

// Labels every anchor against the mean of the annotated frames' boxes:
// positive at IoU >= positive_thr, negative below negative_thr, ignored
// between. The best-overlap anchor is always positive so no target is ever
// unreachable. Errors when no frame is annotated.
RpnTargets assign_rpn_targets(const std::vector<BoxD>& anchors,
                              const std::vector<std::optional<BoxD>>& gt,
                              const AnchorConfig& cfg);

// Greedy suppression in score order; IoU strictly above the threshold
// removes. Ties break by (score, x1, y1, x2, y2, frame) so the result is
// input-order independent.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr);

// The data-dependent discrete structure of one training step. Recording and
// replaying it keeps a finite-difference probe on the same graph the
// analytic gradient was computed on.
struct SampleChoices {
  std::vector<std::int64_t> cls_anchors;  // per-sample anchor ids in the cls loss
  std::vector<BoxD> proposals;            // image coords, heads train on these
};
struct StructuralChoices {
  std::vector<SampleChoices> samples;
};

struct LossBreakdown {
  double total = 0, rpn_cls = 0, rpn_reg = 0, head_cls = 0, head_reg = 0;
};

// Lifts every parameter onto the tape in store order.
std::map<std::string, Var> lift_params(Tape& tape, const ParamSet& params,
                                       bool requires_grad);

// Builds the full training loss for one clip. When `choices` is null the
// step derives fresh structural choices (negative-anchor sample via
// `sample_rng`, proposals from the current predictions) and reports them via
// `out_choices`; otherwise it replays `choices` exactly and `sample_rng` is
// untouched.
Var clip_loss(Tape& tape, const ModelConfig& cfg,
              const std::map<std::string, Var>& params, const ClipSample& clip,
              Rng& sample_rng, const StructuralChoices* choices,
              StructuralChoices* out_choices, LossBreakdown* breakdown);

struct LossRow {
  int epoch = 0;  // 1-based
  int step = 0;   // 1-based within the run
  LossBreakdown loss;
};

struct TrainResult {
  ParamSet params;
  std::vector<LossRow> curve;
  int skipped_clips = 0;  // clips with no annotated frame
};

// Seed-deterministic SGD with momentum over the given clips. Clips are
// reshuffled every epoch; gradients are averaged over `batch_clips`.
// Non-finite losses abort with a diagnostic.
TrainResult train_detector(const std::vector<ClipSample>& clips,
                           const ModelConfig& cfg, const TrainConfig& tcfg);

// Pure function of (params, clip): proposals, per-frame refinement, score
// filtering and per-frame suppression.
std::vector<Detection> infer_clip(const ModelConfig& cfg, const ParamSet& params,
                                  const ClipSample& clip);

// CSV forms: loss curve "epoch,step,total,rpn_cls,rpn_reg,head_cls,head_reg";
// detections "frame,x1,y1,x2,y2,score".
void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows);
void write_detections_csv(const std::string& path,
                          const std::vector<Detection>& dets);

}  // namespace vsflab
