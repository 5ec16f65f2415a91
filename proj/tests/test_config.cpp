#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vsflab/config.hpp"

using namespace vsflab;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream os(p, std::ios::binary);
  os << body;
  return p;
}

}  // namespace

TEST_CASE("defaults are registered and typed accessors parse them") {
  Config c;
  CHECK(c.get_int("gen.clips") == 100);
  CHECK(c.get_int("model.t_frames") == 8);
  CHECK(c.get_double("train.lr") == 0.01);
  CHECK(c.get_string("model.stage_channels") == "16,32,64,64");
  const auto sizes = c.get_list("model.anchor_sizes");
  REQUIRE(sizes.size() == 3);
  CHECK(sizes[1] == 24.0);
  CHECK(c.has("eval.tide_fg"));
  CHECK(!c.has("no.such.key"));
  // Empty list value parses to an empty list.
  CHECK(c.get_list("model.vsf_stages").empty());
}

TEST_CASE("unknown keys and malformed values are hard errors") {
  Config c;
  CHECK_THROWS_AS(c.set("model.typo", "3"), Error);
  CHECK_THROWS_AS(c.get_string("model.typo"), Error);
  CHECK_THROWS_AS(c.set_pair("justakey"), Error);

  c.set("train.epochs", "nine");
  CHECK_THROWS_AS(c.get_int("train.epochs"), Error);
  c.set("train.lr", "0.01x");
  CHECK_THROWS_AS(c.get_double("train.lr"), Error);
  c.set("model.anchor_sizes", "12,,48");
  CHECK_THROWS_AS(c.get_list("model.anchor_sizes"), Error);
}

TEST_CASE("file loading with comments, blanks, and later-wins") {
  const fs::path p = write_temp("vsflab_cfg_ok.txt",
                                "# run settings\n"
                                "\n"
                                "gen.clips = 7   # inline comment\n"
                                "train.lr=0.5\n"
                                "train.lr = 0.25\n");
  Config c;
  c.load_file(p.string());
  CHECK(c.get_int("gen.clips") == 7);
  CHECK(c.get_double("train.lr") == 0.25);
  fs::remove(p);

  const fs::path bad = write_temp("vsflab_cfg_bad.txt", "train.lr\n");
  Config c2;
  CHECK_THROWS_AS(c2.load_file(bad.string()), Error);
  fs::remove(bad);
  CHECK_THROWS_AS(c2.load_file("/nonexistent/config.txt"), Error);
}

TEST_CASE("command-line overrides") {
  Config c;
  c.set_pair("model.roi_bins=2");
  CHECK(c.get_int("model.roi_bins") == 2);
  c.set_pair("  model.roi_bins = 3 ");
  CHECK(c.get_int("model.roi_bins") == 3);
  CHECK_THROWS_AS(c.set_pair("=5"), Error);
}

TEST_CASE("resolved dump round-trips exactly") {
  Config c;
  c.set("gen.clips", "13");
  c.set("model.vsf_stages", "0,2");
  const std::string dump = c.resolved();

  const fs::path p = write_temp("vsflab_cfg_rt.txt", dump);
  Config c2;
  c2.load_file(p.string());
  CHECK(c2.resolved() == dump);
  fs::remove(p);

  // First line is the first registered key; every line is key=value.
  CHECK(dump.rfind("gen.clips=13\n", 0) == 0);
  CHECK(dump.find("model.vsf_stages=0,2\n") != std::string::npos);
}

TEST_CASE("typed config builders consume the registry") {
  Config c;
  c.set("model.stage_channels", "8,8");
  c.set("model.image_w", "32");
  c.set("model.image_h", "32");
  c.set("model.t_frames", "2");
  c.set("model.vsf_stages", "1");
  const ModelConfig m = c.model_config(Variant::vsf_full);
  CHECK(m.stage_channels == std::vector<int>({8, 8}));
  CHECK(m.stride() == 4);
  CHECK(m.feat_w() == 8);
  CHECK(m.variant == Variant::vsf_full);
  CHECK(m.vsf_stages == std::vector<int>{1});

  c.set("gen.frames", "4");
  const GenConfig g = c.gen_config();
  CHECK(g.frames == 4);
  CHECK(g.noise_sigma == 1.5);

  c.set("train.epochs", "3");
  const TrainConfig t = c.train_config(9);
  CHECK(t.epochs == 3);
  CHECK(t.seed == 9);
  CHECK(t.momentum == 0.9);

  // The builder validates: a stage list that does not divide the image
  // extent is rejected.
  c.set("model.image_w", "30");
  CHECK_THROWS_AS(c.model_config(Variant::vsf_full), Error);
}

TEST_CASE("variant names parse both ways") {
  CHECK(variant_from_string("vsf_full") == Variant::vsf_full);
  CHECK(variant_from_string("concat_baseline") == Variant::concat_baseline);
  CHECK(variant_name(Variant::vsf_data) == "vsf_data");
  CHECK(variant_name(Variant::frame_baseline) == "frame_baseline");
  CHECK_THROWS_AS(variant_from_string("vsf"), Error);
}
