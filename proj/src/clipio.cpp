#include "vsflab/clipio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vsflab/radiometry.hpp"
#include "vsflab/rng.hpp"

namespace fs = std::filesystem;

namespace vsflab {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_frame_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d.pgm", k);
  return buf;
}

}  // namespace

const std::string& ClipSample::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  fail("clip meta: missing key '" + key + "'");
}

bool ClipSample::meta_has(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return true;
  return false;
}

void write_clip(const ClipSample& clip, const std::string& dir) {
  require(!clip.frames.empty(), "write_clip: no frames");
  require(clip.frames.size() == clip.boxes.size(),
          "write_clip: frame/box count mismatch");
  fs::create_directories(fs::path(dir) / "frames");
  {
    std::ofstream os(fs::path(dir) / "meta.txt");
    require(bool(os), "write_clip: cannot write meta.txt in " + dir);
    for (const auto& [k, v] : clip.meta) os << k << "=" << v << "\n";
  }
  for (std::size_t k = 0; k < clip.frames.size(); ++k)
    write_pgm_file((fs::path(dir) / "frames" / fmt_frame_name(static_cast<int>(k)))
                       .string(),
                   clip.frames[k]);
  {
    std::ofstream os(fs::path(dir) / "boxes.jsonl");
    require(bool(os), "write_clip: cannot write boxes.jsonl in " + dir);
    for (std::size_t k = 0; k < clip.boxes.size(); ++k) {
      nlohmann::json j;
      j["frame"] = k;
      if (clip.boxes[k]) {
        const BoxI& b = *clip.boxes[k];
        j["box"] = {b.x1, b.y1, b.x2, b.y2};
      } else {
        j["box"] = nullptr;
      }
      os << j.dump() << "\n";
    }
  }
}

ClipSample read_clip(const std::string& dir) {
  ClipSample clip;
  {
    std::ifstream is(fs::path(dir) / "meta.txt");
    require(bool(is), "read_clip: missing meta.txt in " + dir);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, "read_clip: malformed meta line: " + line);
      clip.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
  }
  for (int k = 0;; ++k) {
    const fs::path p = fs::path(dir) / "frames" / fmt_frame_name(k);
    if (!fs::exists(p)) break;
    clip.frames.push_back(read_pgm_file(p.string()));
  }
  require(!clip.frames.empty(), "read_clip: no frames in " + dir);
  clip.boxes.assign(clip.frames.size(), std::nullopt);
  {
    std::ifstream is(fs::path(dir) / "boxes.jsonl");
    require(bool(is), "read_clip: missing boxes.jsonl in " + dir);
    std::string line;
    std::size_t seen = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const std::exception& e) {
        fail("read_clip: bad boxes.jsonl line: " + std::string(e.what()));
      }
      const std::size_t frame = j.at("frame").get<std::size_t>();
      require(frame < clip.frames.size(), "read_clip: box frame out of range");
      const auto& jb = j.at("box");
      if (!jb.is_null()) {
        require(jb.is_array() && jb.size() == 4, "read_clip: box must have 4 values");
        BoxI b{jb[0].get<int>(), jb[1].get<int>(), jb[2].get<int>(),
               jb[3].get<int>()};
        require(b.x1 < b.x2 && b.y1 < b.y2, "read_clip: degenerate box");
        clip.boxes[frame] = b;
      }
      ++seen;
    }
    require(seen == clip.frames.size(), "read_clip: box line count mismatch");
  }
  return clip;
}

void write_manifest(const std::string& path, const std::vector<std::string>& dirs) {
  std::ofstream os(path);
  require(bool(os), "write_manifest: cannot open " + path);
  for (const auto& d : dirs) os << d << "\n";
  require(bool(os), "write_manifest: write failed");
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), "read_manifest: cannot open " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    fs::path p(line);
    if (p.is_relative()) p = base / p;
    out.push_back(p.string());
  }
  require(!out.empty(), "read_manifest: empty manifest " + path);
  return out;
}

namespace {

struct SizeTarget {
  const char* bucket;
  double area;  // target GT box area, px^2
};

SizeTarget sample_size_target(Rng& rng, const GenConfig& cfg) {
  const double total = cfg.frac_small + cfg.frac_medium + cfg.frac_large;
  require(total > 0.0, "generate_clip: size fractions sum to zero");
  const double r = rng.uniform() * total;
  if (r < cfg.frac_small) return {"small", rng.uniform(250.0, 850.0)};
  if (r < cfg.frac_small + cfg.frac_medium)
    return {"medium", rng.uniform(1800.0, 7200.0)};
  return {"large", rng.uniform(10500.0, 15500.0)};
}

}  // namespace

ClipSample generate_clip(std::uint64_t root_seed, std::int64_t clip_index,
                         const GenConfig& cfg) {
  require(cfg.image_w >= 16 && cfg.image_h >= 16, "generate_clip: image too small");
  require(cfg.frames >= 1 && cfg.frame_rate > 0.0, "generate_clip: bad timing");
  Rng rng = Rng::substream(root_seed, "clip/" + std::to_string(clip_index));

  // Scene draw order is fixed; adding draws at the end keeps old clips stable.
  const StabilityClass stab =
      static_cast<StabilityClass>(rng.uniform_int(0, 5));
  const double u = rng.uniform(0.8, 2.5);
  const double theta = rng.uniform(0.0, 6.283185307179586);
  const bool dynamic = rng.bernoulli(cfg.dynamic_frac);
  const int jitter_amp = dynamic ? static_cast<int>(rng.uniform_int(1, 2)) : 0;
  const bool vague = rng.bernoulli(cfg.vague_frac);
  // Bimodal peak band opacity: the gap keeps realized in-mask means away from
  // the clear/vague cutoff, so the label split tracks the drawn fractions.
  const double peak_contrast =
      vague ? rng.uniform(0.12, 0.30) : rng.uniform(0.85, 0.97);
  const SizeTarget size = sample_size_target(rng, cfg);
  const double preroll = rng.uniform(8.0, 18.0);
  const double t_bg = rng.uniform(295.0, 305.0);
  const double dt_gas = rng.uniform(8.0, 20.0);
  const double tau_atm = rng.uniform(0.80, 0.90);
  const int bg_gray = static_cast<int>(rng.uniform_int(135, 165));

  const double clip_seconds = cfg.frames / cfg.frame_rate;
  const double t_end = preroll + clip_seconds;
  const double horizon = t_end + 1.0;

  ReleaseSchedule sched;
  sched.stability = stab;
  sched.source_height = 0.0;
  sched.wind.push_back(WindSample{0.0, u, theta});
  for (double t = 0.0; t < t_end; t += cfg.puff_interval)
    sched.puffs.push_back(PuffRelease{t, 1.0});

  const GasSpectrum spec = standard_spectrum();

  SceneConfig scene;
  scene.t_background = t_bg;
  scene.t_gas = t_bg - dt_gas;
  scene.t_atm = t_bg - 18.0;
  scene.emissivity_bg = 0.95;
  scene.tau_atm = tau_atm;
  scene.eps_atm = 1.0 - tau_atm;
  scene.noise_sigma = cfg.noise_sigma;
  scene.jitter_amp = jitter_amp;
  scene.vis_threshold = cfg.vis_threshold;

  // Trial pass in plume-aligned coordinates at 1 m per cell: fixes the
  // concentration-to-path-length scale so the peak hits the target contrast,
  // then measures the visible extent to pick meters-per-pixel and placement.
  const double t_mid = preroll + 0.5 * clip_seconds;
  ReleaseSchedule trial = sched;
  trial.wind[0].theta = 0.0;
  GridSpec tgrid;
  tgrid.spacing = 1.0;
  tgrid.nx = static_cast<int>(std::ceil(u * t_end)) + 60;
  tgrid.ny = 80;
  tgrid.origin_x = -20.0;
  tgrid.origin_y = -40.0;
  const ConcentrationSlice tslice =
      superpose_field(trial, tgrid, 0.0, {t_mid}, horizon).front();
  double vmax = 0.0;
  for (double v : tslice.values) vmax = std::max(vmax, v);
  require(vmax > 0.0, "generate_clip: empty trial field");
  scene.path_depth = path_length_for_contrast(spec, peak_contrast) / vmax;

  RenderContext tctx(scene, spec);
  const auto tbox = annotate_bbox(tslice, tctx, 0, 0);
  require(tbox.has_value(), "generate_clip: trial plume below visibility");
  const double len_m = tbox->width() * tgrid.spacing;   // along wind
  const double wid_m = tbox->height() * tgrid.spacing;  // across wind
  const double area_m = len_m * wid_m;
  const double aspect = len_m / wid_m;

  // Cap the target so the box can sit inside the frame with a margin.
  const double wfit = cfg.image_w - 12.0, hfit = cfg.image_h - 12.0;
  const double fit_area =
      std::min({wfit * hfit, wfit * wfit / aspect, hfit * hfit * aspect});
  const double area_px = std::min(size.area, 0.9 * fit_area);
  const double spacing = std::sqrt(area_m / area_px);

  // Trial box center relative to the source, rotated into world coordinates.
  const double ox_m = tgrid.origin_x + (tbox->x1 + tbox->x2) * 0.5 * tgrid.spacing;
  const double oy_m = tgrid.origin_y + (tbox->y1 + tbox->y2) * 0.5 * tgrid.spacing;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double off_x = (ox_m * ct - oy_m * st) / spacing;  // px, world frame
  const double off_y = (ox_m * st + oy_m * ct) / spacing;

  const double box_w = std::abs(len_m * ct) / spacing + std::abs(wid_m * st) / spacing;
  const double box_h = std::abs(len_m * st) / spacing + std::abs(wid_m * ct) / spacing;
  const double drift_px = u * clip_seconds / spacing;
  auto center_range = [](double lo, double hi, double fallback) {
    return lo <= hi ? std::pair<double, double>{lo, hi}
                    : std::pair<double, double>{fallback, fallback};
  };
  const auto [cx_lo, cx_hi] =
      center_range(box_w / 2 + std::abs(ct) * drift_px / 2 + 3,
                   cfg.image_w - box_w / 2 - std::abs(ct) * drift_px / 2 - 3,
                   cfg.image_w / 2.0);
  const auto [cy_lo, cy_hi] =
      center_range(box_h / 2 + std::abs(st) * drift_px / 2 + 3,
                   cfg.image_h - box_h / 2 - std::abs(st) * drift_px / 2 - 3,
                   cfg.image_h / 2.0);
  const double cx = rng.uniform(cx_lo, cx_hi);
  const double cy = rng.uniform(cy_lo, cy_hi);
  const double src_x = cx - off_x, src_y = cy - off_y;

  GridSpec grid;
  grid.nx = cfg.image_w;
  grid.ny = cfg.image_h;
  grid.spacing = spacing;
  grid.origin_x = -(src_x + 0.5) * spacing;
  grid.origin_y = -(src_y + 0.5) * spacing;

  std::vector<double> times(cfg.frames);
  for (int k = 0; k < cfg.frames; ++k) times[k] = preroll + k / cfg.frame_rate;
  const auto slices = superpose_field(sched, grid, 0.0, times, horizon);

  RenderContext ctx(scene, spec);
  scene.gain = bg_gray / ctx.band_off_plume();
  RenderContext final_ctx(scene, spec);

  ClipSample clip;
  double contrast_sum = 0.0;
  int contrast_n = 0;
  for (int k = 0; k < cfg.frames; ++k) {
    int jdx = 0, jdy = 0;
    if (jitter_amp > 0) {
      jdx = static_cast<int>(rng.uniform_int(-jitter_amp, jitter_amp));
      jdy = static_cast<int>(rng.uniform_int(-jitter_amp, jitter_amp));
    }
    clip.frames.push_back(render_frame(slices[k], final_ctx, jdx, jdy, &rng));
    auto box = annotate_bbox(slices[k], final_ctx, jdx, jdy);
    if (box) {
      contrast_sum += mean_box_contrast(slices[k], final_ctx, jdx, jdy, *box);
      ++contrast_n;
    }
    clip.boxes.push_back(box);
  }
  const double mean_contrast = contrast_n ? contrast_sum / contrast_n : 0.0;
  const bool clear = mean_contrast >= cfg.clear_cutoff;

  auto& m = clip.meta;
  m.emplace_back("id", "clip_" + std::to_string(clip_index));
  m.emplace_back("seed", std::to_string(root_seed));
  m.emplace_back("clip_index", std::to_string(clip_index));
  m.emplace_back("image_w", std::to_string(cfg.image_w));
  m.emplace_back("image_h", std::to_string(cfg.image_h));
  m.emplace_back("frames", std::to_string(cfg.frames));
  m.emplace_back("frame_rate", fmt_double(cfg.frame_rate));
  m.emplace_back("stability", std::string(1, stability_to_char(stab)));
  m.emplace_back("wind_u", fmt_double(u));
  m.emplace_back("wind_theta", fmt_double(theta));
  m.emplace_back("preroll", fmt_double(preroll));
  m.emplace_back("puff_interval", fmt_double(cfg.puff_interval));
  m.emplace_back("grid_spacing", fmt_double(spacing));
  m.emplace_back("grid_origin_x", fmt_double(grid.origin_x));
  m.emplace_back("grid_origin_y", fmt_double(grid.origin_y));
  m.emplace_back("path_depth", fmt_double(scene.path_depth));
  m.emplace_back("t_background", fmt_double(scene.t_background));
  m.emplace_back("t_gas", fmt_double(scene.t_gas));
  m.emplace_back("t_atm", fmt_double(scene.t_atm));
  m.emplace_back("emissivity_bg", fmt_double(scene.emissivity_bg));
  m.emplace_back("tau_atm", fmt_double(scene.tau_atm));
  m.emplace_back("eps_atm", fmt_double(scene.eps_atm));
  m.emplace_back("gain", fmt_double(scene.gain));
  m.emplace_back("offset", fmt_double(scene.offset));
  m.emplace_back("noise_sigma", fmt_double(scene.noise_sigma));
  m.emplace_back("vis_threshold", fmt_double(scene.vis_threshold));
  m.emplace_back("camera", dynamic ? "dynamic" : "static");
  m.emplace_back("jitter_amp", std::to_string(jitter_amp));
  m.emplace_back("size_bucket_target", size.bucket);
  m.emplace_back("target_area_px", fmt_double(area_px));
  m.emplace_back("peak_contrast", fmt_double(peak_contrast));
  m.emplace_back("mean_box_contrast", fmt_double(mean_contrast));
  m.emplace_back("visibility", clear ? "clear" : "vague");
  return clip;
}

Tensor clip_to_tensor(const ClipSample& clip) {
  require(!clip.frames.empty(), "clip_to_tensor: empty clip");
  const int h = clip.frames[0].h, w = clip.frames[0].w;
  const std::int64_t t_frames = static_cast<std::int64_t>(clip.frames.size());
  Tensor out{{t_frames, 3, h, w}};
  for (std::int64_t t = 0; t < t_frames; ++t) {
    const GrayImage& img = clip.frames[static_cast<std::size_t>(t)];
    require(img.w == w && img.h == h, "clip_to_tensor: frame size mismatch");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = img.at(y, x) / 255.0 - 0.5;
        for (std::int64_t c = 0; c < 3; ++c)
          out[((t * 3 + c) * h + y) * w + x] = v;
      }
  }
  return out;
}

std::vector<std::optional<BoxD>> clip_gt_boxes(const ClipSample& clip) {
  std::vector<std::optional<BoxD>> out;
  out.reserve(clip.boxes.size());
  for (const auto& b : clip.boxes)
    out.push_back(b ? std::optional<BoxD>(to_boxd(*b)) : std::nullopt);
  return out;
}

}  // namespace vsflab
