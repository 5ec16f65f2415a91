#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsflab/commands.hpp"
#include "vsflab/tensor.hpp"

using namespace vsflab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const {
    return (rel.empty() ? path : path / rel).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Small enough to train within a unit-test budget.
Config micro_pipeline_config() {
  Config c;
  c.set("gen.clips", "2");
  c.set("gen.image_w", "32");
  c.set("gen.image_h", "32");
  c.set("gen.frames", "2");
  c.set("model.image_w", "32");
  c.set("model.image_h", "32");
  c.set("model.t_frames", "2");
  c.set("model.stage_channels", "8,8");
  c.set("model.reduce_channels", "8");
  c.set("model.rpn_channels", "8");
  c.set("model.head_fc", "8");
  c.set("model.roi_bins", "2");
  c.set("model.proposals_train", "4");
  c.set("model.proposals_infer", "4");
  c.set("train.epochs", "1");
  return c;
}

}  // namespace

TEST_CASE("pipeline commands produce their artifacts end to end") {
  TempDir tmp("vsflab_cmd_pipeline");
  const Config cfg = micro_pipeline_config();

  const std::string manifest = cmd_generate(cfg, tmp.str("data"), 0);
  CHECK(manifest == tmp.str("data") + "/manifest.txt");
  CHECK(fs::exists(tmp.path / "data/manifest.txt"));
  CHECK(fs::exists(tmp.path / "data/resolved_config.txt"));
  CHECK(fs::exists(tmp.path / "data/clip_000000/meta.txt"));
  CHECK(fs::exists(tmp.path / "data/clip_000001/frames/000001.pgm"));

  // Regeneration is byte-identical.
  cmd_generate(cfg, tmp.str("data2"), 0);
  CHECK(slurp(tmp.str("data/clip_000000/frames/000000.pgm")) ==
        slurp(tmp.str("data2/clip_000000/frames/000000.pgm")));
  CHECK(slurp(tmp.str("data/clip_000000/boxes.jsonl")) ==
        slurp(tmp.str("data2/clip_000000/boxes.jsonl")));
  // A different seed is not.
  cmd_generate(cfg, tmp.str("data3"), 1);
  CHECK(slurp(tmp.str("data/clip_000000/frames/000000.pgm")) !=
        slurp(tmp.str("data3/clip_000000/frames/000000.pgm")));

  cmd_train(cfg, manifest, "concat_baseline", tmp.str("run"), 0);
  CHECK(fs::exists(tmp.path / "run/params/params.txt"));
  CHECK(fs::exists(tmp.path / "run/loss.csv"));
  const std::string run_txt = slurp(tmp.str("run/run.txt"));
  CHECK(run_txt.find("variant=concat_baseline") != std::string::npos);
  CHECK(run_txt.find("seed=0") != std::string::npos);

  cmd_eval(cfg, tmp.str("run"), manifest, tmp.str("eval"));
  CHECK(fs::exists(tmp.path / "eval/report.json"));
  CHECK(fs::exists(tmp.path / "eval/report.txt"));
  CHECK(fs::exists(tmp.path / "eval/iou_density.csv"));
  CHECK(fs::exists(tmp.path / "eval/detections/clip_000000.csv"));
  const std::string report = slurp(tmp.str("eval/report.json"));
  CHECK(report.find("\"AP50\"") != std::string::npos);

  // The density CSV has eval.iou_bins rows plus a header.
  std::istringstream density(slurp(tmp.str("eval/iou_density.csv")));
  std::string line;
  int rows = 0;
  std::getline(density, line);
  CHECK(line == "bin_lo,bin_hi,mass");
  while (std::getline(density, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 10);

  cmd_objectness(cfg, manifest, tmp.str("obj"));
  const std::string obj = slurp(tmp.str("obj/objectness.csv"));
  CHECK(obj.rfind("clip,frame,x1,y1,x2,y2,ms,cc,ed,ss", 0) == 0);
}

TEST_CASE("training an empty manifest is an error") {
  TempDir tmp("vsflab_cmd_empty");
  std::ofstream(tmp.str("manifest.txt")) << "";
  const Config cfg = micro_pipeline_config();
  CHECK_THROWS_AS(cmd_train(cfg, tmp.str("manifest.txt"), "vsf_data",
                            tmp.str("run"), 0),
                  Error);
  CHECK_THROWS_AS(cmd_train(cfg, tmp.str("missing.txt"), "vsf_data",
                            tmp.str("run"), 0),
                  Error);
  CHECK_THROWS_AS(cmd_train(cfg, tmp.str("manifest.txt"), "bogus_variant",
                            tmp.str("run"), 0),
                  Error);
}

TEST_CASE("evaluating requires a recorded run") {
  TempDir tmp("vsflab_cmd_norun");
  const Config cfg = micro_pipeline_config();
  const std::string manifest = cmd_generate(cfg, tmp.str("data"), 3);
  CHECK_THROWS_AS(cmd_eval(cfg, tmp.str("nonexistent_run"), manifest,
                           tmp.str("eval")),
                  Error);
}

TEST_CASE("export renders clips and tensors") {
  TempDir tmp("vsflab_cmd_export");
  const Config cfg = micro_pipeline_config();
  cmd_generate(cfg, tmp.str("data"), 5);

  cmd_export(tmp.str("data/clip_000000"), "csv", tmp.str("clip_out"));
  CHECK(fs::exists(tmp.path / "clip_out/frames/000000.pgm"));
  CHECK(fs::exists(tmp.path / "clip_out/frames/000001.pgm"));
  const std::string boxes = slurp(tmp.str("clip_out/boxes.csv"));
  CHECK(boxes.rfind("frame,x1,y1,x2,y2", 0) == 0);

  // Tensor dump -> coordinate CSV.
  Tensor t{{2, 3}};
  for (std::int64_t i = 0; i < 6; ++i) t[i] = 0.5 * static_cast<double>(i);
  write_tensor_file(tmp.str("t.vsft"), t);
  cmd_export(tmp.str("t.vsft"), "csv", tmp.str("t_csv"));
  const std::string csv = slurp(tmp.str("t_csv/tensor.csv"));
  CHECK(csv.rfind("i0,i1,value", 0) == 0);
  CHECK(csv.find("\n1,2,2.5") != std::string::npos);

  // Tensor dump -> normalized PGM slices over the trailing two axes.
  cmd_export(tmp.str("t.vsft"), "pgm", tmp.str("t_pgm"));
  CHECK(fs::exists(tmp.path / "t_pgm/slice_0000.pgm"));

  CHECK_THROWS_AS(cmd_export(tmp.str("t.vsft"), "yaml", tmp.str("bad")), Error);
  CHECK_THROWS_AS(cmd_export(tmp.str("missing_input"), "csv", tmp.str("bad2")),
                  Error);
}

TEST_CASE("gradient check command reports per-check lines") {
  std::ostringstream log;
  const int failures = cmd_gradcheck("tensorcore", 0, log);
  CHECK(failures == 0);
  const std::string out = log.str();
  CHECK(out.find("ok   ") != std::string::npos);
  CHECK(out.find("max_rel_err=") != std::string::npos);
  CHECK(out.find("checks passed") != std::string::npos);

  std::ostringstream log2;
  CHECK_THROWS_AS(cmd_gradcheck("bogus_scope", 0, log2), Error);
}
