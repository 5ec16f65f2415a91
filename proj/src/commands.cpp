#include "vsflab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "vsflab/eval.hpp"
#include "vsflab/gradcheck.hpp"
#include "vsflab/objectness.hpp"

namespace vsflab {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write " + path);
  os << text;
  require(os.good(), "write failed: " + path);
}

void archive_config(const Config& cfg, const std::string& out_dir) {
  write_text((fs::path(out_dir) / "resolved_config.txt").string(), cfg.resolved());
}

std::string clip_dir_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%06lld", static_cast<long long>(index));
  return buf;
}

std::vector<std::string> manifest_clips(const std::string& manifest) {
  const std::vector<std::string> dirs = read_manifest(manifest);
  require(!dirs.empty(), "manifest is empty: " + manifest);
  return dirs;
}

bool clip_is_clear(const ClipSample& clip) {
  return clip.meta_has("visibility") && clip.meta_value("visibility") == "clear";
}

}  // namespace

std::string cmd_generate(const Config& cfg, const std::string& out_dir,
                         std::uint64_t seed) {
  const GenConfig gen = cfg.gen_config();
  const std::int64_t n = cfg.get_int("gen.clips");
  require(n >= 1, "gen.clips must be at least 1");
  fs::create_directories(out_dir);
  std::vector<std::string> names;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::string name = clip_dir_name(i);
    const ClipSample clip = generate_clip(seed, i, gen);
    write_clip(clip, (fs::path(out_dir) / name).string());
    names.push_back(name);
  }
  const std::string manifest = (fs::path(out_dir) / "manifest.txt").string();
  write_manifest(manifest, names);
  archive_config(cfg, out_dir);
  return manifest;
}

void cmd_train(const Config& cfg, const std::string& manifest,
               const std::string& variant, const std::string& out_dir,
               std::uint64_t seed) {
  const Variant v = variant_from_string(variant);
  const ModelConfig mcfg = cfg.model_config(v);
  const TrainConfig tcfg = cfg.train_config(seed);
  std::vector<ClipSample> clips;
  for (const std::string& dir : manifest_clips(manifest))
    clips.push_back(read_clip(dir));
  const TrainResult result = train_detector(clips, mcfg, tcfg);
  fs::create_directories(out_dir);
  save_params(result.params, (fs::path(out_dir) / "params").string());
  write_loss_csv((fs::path(out_dir) / "loss.csv").string(), result.curve);
  write_text((fs::path(out_dir) / "run.txt").string(),
             "variant=" + variant_name(v) + "\nseed=" + std::to_string(seed) +
                 "\nskipped_clips=" + std::to_string(result.skipped_clips) + "\n");
  archive_config(cfg, out_dir);
}

namespace {

std::string run_variant(const std::string& run_dir) {
  std::ifstream is(fs::path(run_dir) / "run.txt", std::ios::binary);
  require(is.good(), "cannot read " + run_dir + "/run.txt");
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("variant=", 0) == 0) return line.substr(8);
  }
  fail("no variant recorded in " + run_dir + "/run.txt");
}

}  // namespace

void cmd_eval(const Config& cfg, const std::string& run_dir,
              const std::string& manifest, const std::string& out_dir) {
  const Variant v = variant_from_string(run_variant(run_dir));
  const ModelConfig mcfg = cfg.model_config(v);
  const ParamSet params = load_params((fs::path(run_dir) / "params").string());
  fs::create_directories(fs::path(out_dir) / "detections");

  std::vector<EvalInstance> instances;
  for (const std::string& dir : manifest_clips(manifest)) {
    const ClipSample clip = read_clip(dir);
    const std::vector<Detection> dets = infer_clip(mcfg, params, clip);
    const std::vector<EvalInstance> inst =
        make_instances(clip_gt_boxes(clip), dets, clip_is_clear(clip));
    instances.insert(instances.end(), inst.begin(), inst.end());
    const std::string name = fs::path(dir).filename().string();
    write_detections_csv(
        (fs::path(out_dir) / "detections" / (name + ".csv")).string(), dets);
  }

  EvalReport report = coco_ap(instances);
  report.errors = tide_classify(instances, cfg.get_double("eval.tide_fg"),
                                cfg.get_double("eval.tide_bg"));
  write_text((fs::path(out_dir) / "report.json").string(), report_json(report));
  write_text((fs::path(out_dir) / "report.txt").string(), report_table(report));

  const int bins = static_cast<int>(cfg.get_int("eval.iou_bins"));
  const std::vector<double> density = iou_density(instances, bins);
  std::string csv = "bin_lo,bin_hi,mass\n";
  for (int b = 0; b < bins; ++b)
    csv += fmt17(static_cast<double>(b) / bins) + "," +
           fmt17(static_cast<double>(b + 1) / bins) + "," +
           fmt17(density[static_cast<std::size_t>(b)]) + "\n";
  write_text((fs::path(out_dir) / "iou_density.csv").string(), csv);
  archive_config(cfg, out_dir);
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed,
                  std::ostream& log) {
  const std::vector<GradCheckResult> results = run_gradcheck_suite(scope, seed);
  int failures = 0;
  for (const GradCheckResult& r : results) {
    log << (r.pass ? "ok   " : "FAIL ") << r.name
        << " max_rel_err=" << fmt17(r.max_rel_err) << "\n";
    if (!r.pass) ++failures;
  }
  log << results.size() - static_cast<std::size_t>(failures) << "/"
      << results.size() << " checks passed\n";
  return failures;
}

void cmd_objectness(const Config& cfg, const std::string& manifest,
                    const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::string csv = "clip,frame,x1,y1,x2,y2,ms,cc,ed,ss\n";
  for (const std::string& dir : manifest_clips(manifest)) {
    const ClipSample clip = read_clip(dir);
    const std::string name = fs::path(dir).filename().string();
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      if (!clip.boxes[f]) continue;
      const BoxI& b = *clip.boxes[f];
      const GrayImage& img = clip.frames[f];
      csv += name + "," + std::to_string(f) + "," + std::to_string(b.x1) + "," +
             std::to_string(b.y1) + "," + std::to_string(b.x2) + "," +
             std::to_string(b.y2) + "," + fmt17(ms_score(img, b)) + "," +
             fmt17(cc_score(img, b)) + "," + fmt17(ed_score(img, b)) + "," +
             fmt17(ss_score(img, b)) + "\n";
    }
  }
  write_text((fs::path(out_dir) / "objectness.csv").string(), csv);
  archive_config(cfg, out_dir);
}

void cmd_export(const std::string& input, const std::string& format,
                const std::string& out_dir) {
  require(format == "csv" || format == "pgm", "unknown export format: " + format);
  fs::create_directories(out_dir);
  if (fs::is_directory(input)) {
    const ClipSample clip = read_clip(input);
    fs::create_directories(fs::path(out_dir) / "frames");
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.pgm", f);
      write_pgm_file((fs::path(out_dir) / "frames" / name).string(),
                     clip.frames[f]);
    }
    std::string csv = "frame,x1,y1,x2,y2\n";
    for (std::size_t f = 0; f < clip.boxes.size(); ++f)
      if (clip.boxes[f])
        csv += std::to_string(f) + "," + std::to_string(clip.boxes[f]->x1) + "," +
               std::to_string(clip.boxes[f]->y1) + "," +
               std::to_string(clip.boxes[f]->x2) + "," +
               std::to_string(clip.boxes[f]->y2) + "\n";
    write_text((fs::path(out_dir) / "boxes.csv").string(), csv);
    return;
  }

  const Tensor t = read_tensor_file(input);
  if (format == "csv") {
    std::string csv;
    for (std::int64_t r = 0; r < t.rank(); ++r)
      csv += "i" + std::to_string(r) + ",";
    csv += "value\n";
    Shape idx(static_cast<std::size_t>(t.rank()), 0);
    for (std::int64_t flat = 0; flat < t.size(); ++flat) {
      for (std::int64_t v : idx) csv += std::to_string(v) + ",";
      csv += fmt17(t[flat]) + "\n";
      for (std::int64_t r = t.rank() - 1; r >= 0; --r) {
        if (++idx[static_cast<std::size_t>(r)] <
            t.dim(static_cast<std::size_t>(r)))
          break;
        idx[static_cast<std::size_t>(r)] = 0;
      }
    }
    write_text((fs::path(out_dir) / "tensor.csv").string(), csv);
    return;
  }

  require(t.rank() >= 2, "pgm export needs a tensor of rank 2 or higher");
  const std::int64_t h = t.dim(static_cast<std::size_t>(t.rank() - 2));
  const std::int64_t w = t.dim(static_cast<std::size_t>(t.rank() - 1));
  const std::int64_t slices = t.size() / (h * w);
  double lo = t[0], hi = t[0];
  for (std::int64_t i = 0; i < t.size(); ++i) {
    lo = std::min(lo, t[i]);
    hi = std::max(hi, t[i]);
  }
  const double span = hi - lo;
  for (std::int64_t s = 0; s < slices; ++s) {
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const double v = t[(s * h + y) * w + x];
        const double scaled = span > 0 ? (v - lo) / span * 255.0 : 0.0;
        img.at(static_cast<int>(y), static_cast<int>(x)) =
            static_cast<std::uint8_t>(std::lround(scaled));
      }
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04lld.pgm", static_cast<long long>(s));
    write_pgm_file((fs::path(out_dir) / name).string(), img);
  }
}

}  // namespace vsflab
