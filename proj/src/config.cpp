#include "vsflab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vsflab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config::Config() {
  auto reg = [this](const char* key, std::string value) {
    entries_.push_back(Entry{key, std::move(value)});
  };
  // Dataset generation.
  reg("gen.clips", "100");
  reg("gen.image_w", "192");
  reg("gen.image_h", "144");
  reg("gen.frames", "8");
  reg("gen.frame_rate", "2");
  reg("gen.frac_small", "0.34");
  reg("gen.frac_medium", "0.33");
  reg("gen.frac_large", "0.33");
  reg("gen.vague_frac", "0.5");
  reg("gen.dynamic_frac", "0.35");
  reg("gen.puff_interval", "0.25");
  // Scene rendering.
  reg("scene.noise_sigma", "1.5");
  reg("scene.vis_threshold", "0.05");
  reg("scene.clear_cutoff", "0.3");
  // Detector.
  reg("model.image_w", "64");
  reg("model.image_h", "64");
  reg("model.t_frames", "8");
  reg("model.stage_channels", "16,32,64,64");
  reg("model.vsf_stages", "");
  reg("model.reduce_channels", "16");
  reg("model.rpn_channels", "64");
  reg("model.anchor_sizes", "12,24,48");
  reg("model.anchor_ratios", "0.5,1,2");
  reg("model.positive_thr", "0.5");
  reg("model.negative_thr", "0.3");
  reg("model.rpn_nms_thr", "0.7");
  reg("model.proposals_train", "16");
  reg("model.proposals_infer", "64");
  reg("model.head_pos_thr", "0.5");
  reg("model.roi_bins", "4");
  reg("model.head_fc", "64");
  reg("model.reg_lambda", "1");
  reg("model.delta_clamp", "4");
  reg("model.final_nms_thr", "0.5");
  reg("model.score_thr", "0.05");
  reg("model.max_dets_per_frame", "16");
  // Optimization.
  reg("train.lr", "0.01");
  reg("train.momentum", "0.9");
  reg("train.epochs", "9");
  reg("train.decay_epoch", "8");
  reg("train.decay_factor", "0.1");
  reg("train.batch_clips", "1");
  // Evaluation.
  reg("eval.iou_bins", "10");
  reg("eval.tide_fg", "0.5");
  reg("eval.tide_bg", "0.1");
}

const Config::Entry& Config::find(const std::string& key) const {
  for (const Entry& e : entries_)
    if (e.key == key) return e;
  fail("unknown configuration key: " + key);
}

Config::Entry& Config::find(const std::string& key) {
  for (Entry& e : entries_)
    if (e.key == key) return e;
  fail("unknown configuration key: " + key);
}

void Config::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot read config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    require(eq != std::string::npos, path + ":" + std::to_string(lineno) +
                                         ": expected key=value, got: " + body);
    set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  find(key).value = value;
}

void Config::set_pair(const std::string& pair) {
  const std::size_t eq = pair.find('=');
  require(eq != std::string::npos && eq > 0,
          "override must look like key=value, got: " + pair);
  set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
}

bool Config::has(const std::string& key) const {
  for (const Entry& e : entries_)
    if (e.key == key) return true;
  return false;
}

std::string Config::get_string(const std::string& key) const {
  return find(key).value;
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string& v = find(key).value;
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc{} && ptr == v.data() + v.size(),
          "configuration key " + key + " expects an integer, got: " + v);
  return out;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = find(key).value;
  require(!v.empty(), "configuration key " + key + " expects a number");
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail("configuration key " + key + " expects a number, got: " + v);
  }
  require(used == v.size(),
          "configuration key " + key + " expects a number, got: " + v);
  return out;
}

std::vector<double> Config::get_list(const std::string& key) const {
  const std::string& v = find(key).value;
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    require(!item.empty(), "configuration key " + key + " has an empty element");
    std::size_t used = 0;
    double d = 0;
    try {
      d = std::stod(item, &used);
    } catch (const std::exception&) {
      fail("configuration key " + key + " expects numbers, got: " + item);
    }
    require(used == item.size(),
            "configuration key " + key + " expects numbers, got: " + item);
    out.push_back(d);
  }
  return out;
}

std::string Config::resolved() const {
  std::ostringstream os;
  for (const Entry& e : entries_) os << e.key << "=" << e.value << "\n";
  return os.str();
}

GenConfig Config::gen_config() const {
  GenConfig g;
  g.image_w = static_cast<int>(get_int("gen.image_w"));
  g.image_h = static_cast<int>(get_int("gen.image_h"));
  g.frames = static_cast<int>(get_int("gen.frames"));
  g.frame_rate = get_double("gen.frame_rate");
  g.vis_threshold = get_double("scene.vis_threshold");
  g.clear_cutoff = get_double("scene.clear_cutoff");
  g.frac_small = get_double("gen.frac_small");
  g.frac_medium = get_double("gen.frac_medium");
  g.frac_large = get_double("gen.frac_large");
  g.vague_frac = get_double("gen.vague_frac");
  g.dynamic_frac = get_double("gen.dynamic_frac");
  g.noise_sigma = get_double("scene.noise_sigma");
  g.puff_interval = get_double("gen.puff_interval");
  return g;
}

ModelConfig Config::model_config(Variant variant) const {
  ModelConfig m;
  m.variant = variant;
  m.image_w = static_cast<int>(get_int("model.image_w"));
  m.image_h = static_cast<int>(get_int("model.image_h"));
  m.t_frames = static_cast<int>(get_int("model.t_frames"));
  m.stage_channels.clear();
  for (double c : get_list("model.stage_channels"))
    m.stage_channels.push_back(static_cast<int>(c));
  m.vsf_stages.clear();
  for (double s : get_list("model.vsf_stages"))
    m.vsf_stages.push_back(static_cast<int>(s));
  m.reduce_channels = static_cast<int>(get_int("model.reduce_channels"));
  m.rpn_channels = static_cast<int>(get_int("model.rpn_channels"));
  m.anchors.sizes = get_list("model.anchor_sizes");
  m.anchors.ratios = get_list("model.anchor_ratios");
  m.anchors.positive_thr = get_double("model.positive_thr");
  m.anchors.negative_thr = get_double("model.negative_thr");
  m.rpn_nms_thr = get_double("model.rpn_nms_thr");
  m.proposals_train = static_cast<int>(get_int("model.proposals_train"));
  m.proposals_infer = static_cast<int>(get_int("model.proposals_infer"));
  m.head_pos_thr = get_double("model.head_pos_thr");
  m.roi_bins = static_cast<int>(get_int("model.roi_bins"));
  m.head_fc = static_cast<int>(get_int("model.head_fc"));
  m.reg_lambda = get_double("model.reg_lambda");
  m.delta_clamp = get_double("model.delta_clamp");
  m.final_nms_thr = get_double("model.final_nms_thr");
  m.score_thr = get_double("model.score_thr");
  m.max_dets_per_frame = static_cast<int>(get_int("model.max_dets_per_frame"));
  m.validate();
  return m;
}

TrainConfig Config::train_config(std::uint64_t seed) const {
  TrainConfig t;
  t.lr = get_double("train.lr");
  t.momentum = get_double("train.momentum");
  t.epochs = static_cast<int>(get_int("train.epochs"));
  t.decay_epoch = static_cast<int>(get_int("train.decay_epoch"));
  t.decay_factor = get_double("train.decay_factor");
  t.batch_clips = static_cast<int>(get_int("train.batch_clips"));
  t.seed = seed;
  return t;
}

}  // namespace vsflab
