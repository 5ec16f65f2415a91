#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsflab/boxes.hpp"
#include "vsflab/image.hpp"
#include "vsflab/tensor.hpp"

namespace vsflab {

// One labeled video clip: frames, a per-frame optional GT box, and ordered
// key=value metadata (scene + dispersion parameters + seed). Doubles in the
// metadata are written with 17 significant digits so a clip round-trips
// bit-exactly through its directory form.
struct ClipSample {
  std::vector<GrayImage> frames;
  std::vector<std::optional<BoxI>> boxes;
  std::vector<std::pair<std::string, std::string>> meta;

  const std::string& meta_value(const std::string& key) const;
  bool meta_has(const std::string& key) const;
  bool operator==(const ClipSample&) const = default;
};

// Directory layout: meta.txt (key=value per line), frames/000000.pgm ...,
// boxes.jsonl ({"frame": k, "box": [x1,y1,x2,y2] | null} per line).
void write_clip(const ClipSample& clip, const std::string& dir);
ClipSample read_clip(const std::string& dir);

// Manifest: newline-separated clip directory paths, relative entries resolved
// against the manifest's own directory.
void write_manifest(const std::string& path, const std::vector<std::string>& dirs);
std::vector<std::string> read_manifest(const std::string& path);

// Generator knobs. Size targets are realized GT box areas in pixels; the
// generator scales the camera's meters-per-pixel to hit them, so one physical
// plume can appear at any apparent size (a distance proxy).
struct GenConfig {
  int image_w = 192;
  int image_h = 144;
  int frames = 8;
  double frame_rate = 2.0;   // frames per second
  double vis_threshold = 0.05;
  double clear_cutoff = 0.3;  // mean in-box (1 - tau) for the "clear" flag
  double frac_small = 0.34;   // target area < 32^2
  double frac_medium = 0.33;  // 32^2 .. 96^2
  double frac_large = 0.33;   // > 96^2
  double vague_frac = 0.5;
  double dynamic_frac = 0.35;
  double noise_sigma = 1.5;
  double puff_interval = 0.25;  // seconds between releases
};

// Deterministic function of (root_seed, clip_index, cfg).
ClipSample generate_clip(std::uint64_t root_seed, std::int64_t clip_index,
                         const GenConfig& cfg);

// Model input: (T, 3, H, W), grayscale replicated across channels and mapped
// to [-0.5, 0.5].
Tensor clip_to_tensor(const ClipSample& clip);

// Per-frame GT boxes as doubles, in pixel coordinates.
std::vector<std::optional<BoxD>> clip_gt_boxes(const ClipSample& clip);

}  // namespace vsflab
