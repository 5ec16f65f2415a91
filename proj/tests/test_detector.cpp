#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vsflab/detector.hpp"

using namespace vsflab;
namespace fs = std::filesystem;

namespace {

ClipSample tiny_clip(const ModelConfig& cfg, std::uint64_t seed,
                     bool annotate_all = true) {
  ClipSample clip;
  Rng rng(seed);
  for (int f = 0; f < cfg.t_frames; ++f) {
    GrayImage img(cfg.image_w, cfg.image_h);
    for (auto& p : img.px) p = static_cast<std::uint8_t>(rng.uniform_int(90, 160));
    clip.frames.push_back(img);
    if (annotate_all || f == 0)
      clip.boxes.emplace_back(BoxI{2, 2, 6, 6});
    else
      clip.boxes.emplace_back(std::nullopt);
  }
  return clip;
}

}  // namespace

TEST_CASE("anchor grid geometry") {
  ModelConfig cfg;  // 64x64, stride 16, sizes {12,24,48}, ratios {0.5,1,2}
  const auto anchors = make_anchors(cfg);
  REQUIRE(anchors.size() == 9u * 4 * 4);

  // (size, ratio)-major, then row-major over cells: anchor 0 is
  // size 12, ratio 0.5 at cell (0,0), centered at (8,8).
  const double w = 12.0 / std::sqrt(0.5), h = 12.0 * std::sqrt(0.5);
  CHECK(anchors[0].x1 == doctest::Approx(8 - w / 2).epsilon(1e-12));
  CHECK(anchors[0].y1 == doctest::Approx(8 - h / 2).epsilon(1e-12));
  CHECK(anchors[0].x2 == doctest::Approx(8 + w / 2).epsilon(1e-12));
  CHECK(anchors[0].y2 == doctest::Approx(8 + h / 2).epsilon(1e-12));

  // Ratio is height over width.
  CHECK(anchors[0].height() / anchors[0].width() == doctest::Approx(0.5));
  // Next cell in the same (size, ratio) block is 16 px to the right.
  CHECK(anchors[1].x1 == doctest::Approx(anchors[0].x1 + 16.0));
  CHECK(anchors[1].y1 == doctest::Approx(anchors[0].y1));
  // All blocks preserve the anchor area up to the ratio transform.
  const auto& sq = anchors[1 * 16];  // ratio 1.0 block, cell (0,0)
  CHECK(sq.width() == doctest::Approx(12.0));
  CHECK(sq.height() == doctest::Approx(12.0));
}

TEST_CASE("box deltas encode and decode inversely") {
  const BoxD anchor{10, 20, 30, 50};
  const BoxD gt{12, 18, 36, 44};
  const auto d = encode_delta(anchor, gt);
  const BoxD back = decode_delta(anchor, d, 4.0);
  CHECK(back.x1 == doctest::Approx(gt.x1).epsilon(1e-9));
  CHECK(back.y1 == doctest::Approx(gt.y1).epsilon(1e-9));
  CHECK(back.x2 == doctest::Approx(gt.x2).epsilon(1e-9));
  CHECK(back.y2 == doctest::Approx(gt.y2).epsilon(1e-9));

  const auto zero = encode_delta(anchor, anchor);
  for (double v : zero) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("proposal targets use the mean box across annotated frames") {
  AnchorConfig acfg;
  // One anchor equal to the drift mean: boxes slide +2 px/frame in x over
  // 8 frames, so the mean box sits 7 px right of the start.
  std::vector<std::optional<BoxD>> gt;
  for (int t = 0; t < 8; ++t)
    gt.emplace_back(BoxD{10.0 + 2 * t, 10, 30.0 + 2 * t, 30});
  const BoxD mean{17, 10, 37, 30};
  const std::vector<BoxD> anchors{mean, BoxD{100, 100, 140, 140}};
  const RpnTargets tgt = assign_rpn_targets(anchors, gt, acfg);
  CHECK(tgt.mean_gt.x1 == doctest::Approx(17.0));
  CHECK(tgt.mean_gt.x2 == doctest::Approx(37.0));
  CHECK(tgt.labels[0] == 1);
  for (double v : tgt.regression[0]) CHECK(v == doctest::Approx(0.0));
  CHECK(tgt.labels[1] == 0);  // far anchor is a clean negative

  // Frame order does not matter to a mean.
  auto shuffled = gt;
  std::swap(shuffled[0], shuffled[5]);
  std::swap(shuffled[2], shuffled[7]);
  const RpnTargets tgt2 = assign_rpn_targets(anchors, shuffled, acfg);
  CHECK(tgt2.mean_gt.x1 == tgt.mean_gt.x1);
  CHECK(tgt2.regression[0] == tgt.regression[0]);

  // The best-overlap anchor is positive even below the IoU threshold.
  const std::vector<BoxD> weak{BoxD{5, 5, 15, 15}, BoxD{100, 100, 140, 140}};
  const RpnTargets tgt3 = assign_rpn_targets(weak, gt, acfg);
  CHECK(tgt3.labels[0] == 1);

  CHECK_THROWS_AS(
      assign_rpn_targets(anchors, std::vector<std::optional<BoxD>>(3), acfg),
      Error);
}

TEST_CASE("suppression keeps the ends of an overlap chain") {
  const double thr = 0.3;
  std::vector<Detection> dets{
      {0, {0, 0, 10, 10}, 0.9},   // A
      {0, {4, 0, 14, 10}, 0.8},   // B overlaps A and C at ~0.43
      {0, {8, 0, 18, 10}, 0.7},   // C overlaps A at ~0.11
  };
  const auto kept = nms(dets, thr);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box.x1 == 0.0);
  CHECK(kept[1].box.x1 == 8.0);

  // Identical boxes collapse to one; disjoint boxes all survive.
  const auto dup = nms({{0, {0, 0, 5, 5}, 0.5}, {0, {0, 0, 5, 5}, 0.4}}, 0.5);
  CHECK(dup.size() == 1);
  const auto apart = nms({{0, {0, 0, 5, 5}, 0.5}, {0, {20, 20, 25, 25}, 0.4}}, 0.5);
  CHECK(apart.size() == 2);
}

TEST_CASE("variant parameter sets differ only by the shift blocks") {
  Rng rng(3);
  const ModelConfig concat = ModelConfig::micro(Variant::concat_baseline);
  const ModelConfig full = ModelConfig::micro(Variant::vsf_full);
  Rng r1(3), r2(3);
  const ParamSet pc = build_model(concat, r1);
  const ParamSet pf = build_model(full, r2);

  // Per stage: a (3, C, 3,3,3) offset conv + bias and a (C, C) gate + bias.
  std::int64_t extra = 0;
  for (int c : full.stage_channels)
    extra += 3 * c * 27 + 3 + c * c + c;
  CHECK(pf.total_size() - pc.total_size() == extra);
  CHECK(pf.has("backbone/stage0/vsf/offset_w"));
  CHECK(!pc.has("backbone/stage0/vsf/offset_w"));

  // Offset convolutions and gates start at zero.
  const Tensor& ow = pf.at("backbone/stage0/vsf/offset_w");
  for (std::int64_t i = 0; i < ow.size(); ++i) CHECK(ow[i] == 0.0);

  // vsf_data adds no parameters at all.
  Rng r3(3);
  const ParamSet pd = build_model(ModelConfig::micro(Variant::vsf_data), r3);
  CHECK(pd.total_size() == pc.total_size());
}

TEST_CASE("restricting shift blocks to a stage subset") {
  ModelConfig cfg = ModelConfig::micro(Variant::vsf_full);
  cfg.vsf_stages = {1};
  Rng rng(3);
  const ParamSet p = build_model(cfg, rng);
  CHECK(!p.has("backbone/stage0/vsf/offset_w"));
  CHECK(p.has("backbone/stage1/vsf/offset_w"));
}

TEST_CASE("parameter store round trip is stable") {
  const ModelConfig cfg = ModelConfig::micro(Variant::vsf_full);
  Rng rng(17);
  const ParamSet params = build_model(cfg, rng);

  const fs::path dir = fs::temp_directory_path() / "vsflab_params_rt";
  fs::remove_all(dir);
  save_params(params, dir.string());
  const ParamSet loaded = load_params(dir.string());
  REQUIRE(loaded.items.size() == params.items.size());
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    CHECK(loaded.items[i].first == params.items[i].first);
    CHECK(loaded.items[i].second.shape() == params.items[i].second.shape());
  }

  // The dump quantizes to 32-bit reals; a second hop changes nothing.
  const fs::path dir2 = fs::temp_directory_path() / "vsflab_params_rt2";
  fs::remove_all(dir2);
  save_params(loaded, dir2.string());
  const ParamSet twice = load_params(dir2.string());
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    const Tensor& a = twice.items[i].second;
    const Tensor& b = loaded.items[i].second;
    for (std::int64_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("training is deterministic and learns on a tiny set") {
  const ModelConfig cfg = ModelConfig::micro(Variant::vsf_full);
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.seed = 1;
  std::vector<ClipSample> clips{tiny_clip(cfg, 1), tiny_clip(cfg, 2)};

  const TrainResult a = train_detector(clips, cfg, tcfg);
  const TrainResult b = train_detector(clips, cfg, tcfg);
  REQUIRE(a.curve.size() == 6);  // 3 epochs x 2 clips
  CHECK(a.curve.back().loss.total == b.curve.back().loss.total);
  for (std::size_t i = 0; i < a.params.items.size(); ++i) {
    const Tensor& ta = a.params.items[i].second;
    const Tensor& tb = b.params.items[i].second;
    for (std::int64_t k = 0; k < ta.size(); ++k) CHECK(ta[k] == tb[k]);
  }
  CHECK(a.curve.front().epoch == 1);
  CHECK(a.curve.back().epoch == 3);
  CHECK(std::isfinite(a.curve.back().loss.total));

  TrainConfig other = tcfg;
  other.seed = 2;
  const TrainResult c = train_detector(clips, cfg, other);
  CHECK(c.curve.back().loss.total != a.curve.back().loss.total);
}

TEST_CASE("clips without annotations are skipped, not trained on") {
  const ModelConfig cfg = ModelConfig::micro(Variant::concat_baseline);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  ClipSample blank = tiny_clip(cfg, 5);
  blank.boxes.assign(blank.boxes.size(), std::nullopt);

  std::vector<ClipSample> clips{tiny_clip(cfg, 1), blank};
  const TrainResult r = train_detector(clips, cfg, tcfg);
  CHECK(r.skipped_clips == 1);
  CHECK(r.curve.size() == 1);

  std::vector<ClipSample> none{blank};
  CHECK_THROWS_AS(train_detector(none, cfg, tcfg), Error);
}

TEST_CASE("inference is pure and respects output caps") {
  const ModelConfig cfg = ModelConfig::micro(Variant::vsf_full);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  std::vector<ClipSample> clips{tiny_clip(cfg, 1)};
  const TrainResult r = train_detector(clips, cfg, tcfg);

  const auto d1 = infer_clip(cfg, r.params, clips[0]);
  const auto d2 = infer_clip(cfg, r.params, clips[0]);
  REQUIRE(d1.size() == d2.size());
  for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == d2[i]);

  int per_frame[2] = {0, 0};
  for (const auto& d : d1) {
    REQUIRE(d.frame >= 0);
    REQUIRE(d.frame < 2);
    ++per_frame[d.frame];
    CHECK(d.score >= cfg.score_thr);
    CHECK(d.box.x1 >= 0.0);
    CHECK(d.box.x2 <= cfg.image_w);
  }
  CHECK(per_frame[0] <= cfg.max_dets_per_frame);
  CHECK(per_frame[1] <= cfg.max_dets_per_frame);
}

TEST_CASE("per-frame variant treats frames as independent samples") {
  const ModelConfig cfg = ModelConfig::micro(Variant::frame_baseline);
  CHECK(cfg.frames_per_sample() == 1);
  CHECK(cfg.head_count() == 1);

  TrainConfig tcfg;
  tcfg.epochs = 1;
  // Only one frame annotated: the other sample is silently inactive.
  std::vector<ClipSample> clips{tiny_clip(cfg, 4, false)};
  const TrainResult r = train_detector(clips, cfg, tcfg);
  CHECK(r.curve.size() == 1);
  CHECK(std::isfinite(r.curve[0].loss.total));
}

TEST_CASE("loss replay reproduces the recorded step exactly") {
  const ModelConfig cfg = ModelConfig::micro(Variant::vsf_full);
  Rng init = Rng::substream(2, "init");
  ParamSet params = build_model(cfg, init);
  const ClipSample clip = tiny_clip(cfg, 3);

  Tape t1;
  Rng s1 = Rng::substream(2, "sample");
  auto pv1 = lift_params(t1, params, true);
  StructuralChoices choices;
  Var l1 = clip_loss(t1, cfg, pv1, clip, s1, nullptr, &choices, nullptr);

  Tape t2;
  Rng s2(999);  // replay must not consume randomness
  auto pv2 = lift_params(t2, params, true);
  Var l2 = clip_loss(t2, cfg, pv2, clip, s2, &choices, nullptr, nullptr);
  CHECK(t1.val(l1)[0] == t2.val(l2)[0]);
  CHECK(s2.next_u64() == Rng(999).next_u64());
}
