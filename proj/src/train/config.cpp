#include <functional>
#include <fstream>
#include <sstream>
#include <vector>

#include "tp/trainer.hpp"

namespace tp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

struct KeyDef {
  const char* name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const std::vector<KeyDef>& keys() {
  static const std::vector<KeyDef> defs = {
#define STR_KEY(k, field) \
  {k, [](TrainConfig& c, const std::string& v) { c.field = v; }, \
   [](const TrainConfig& c) { return c.field; }}
#define INT_KEY(k, field) \
  {k, [](TrainConfig& c, const std::string& v) { c.field = int(parse_int(k, v)); }, \
   [](const TrainConfig& c) { return std::to_string(c.field); }}
#define U64_KEY(k, field) \
  {k, [](TrainConfig& c, const std::string& v) { c.field = std::uint64_t(parse_int(k, v)); }, \
   [](const TrainConfig& c) { return std::to_string(c.field); }}
#define DBL_KEY(k, field) \
  {k, [](TrainConfig& c, const std::string& v) { c.field = parse_double(k, v); }, \
   [](const TrainConfig& c) { return fmt(c.field); }}
#define BOOL_KEY(k, field) \
  {k, [](TrainConfig& c, const std::string& v) { c.field = parse_bool(k, v); }, \
   [](const TrainConfig& c) { return c.field ? "1" : "0"; }}
      STR_KEY("data_root", data_root),
      STR_KEY("out_dir", out_dir),
      STR_KEY("teacher", teacher),
      INT_KEY("batch", batch),
      DBL_KEY("lr", lr),
      INT_KEY("epochs", epochs),
      INT_KEY("max_steps", max_steps),
      U64_KEY("seed", seed),
      INT_KEY("image_size", image_size),
      INT_KEY("render_res", render_res),
      INT_KEY("coarse_samples", coarse_samples),
      INT_KEY("fine_samples", fine_samples),
      DBL_KEY("lambda_rgb", lambda_rgb),
      DBL_KEY("lambda_depth", lambda_depth),
      DBL_KEY("lambda_dist", lambda_dist),
      DBL_KEY("lambda_norm", lambda_norm),
      INT_KEY("patch", patch),
      INT_KEY("enc_depth", enc_depth),
      INT_KEY("width", width),
      INT_KEY("heads", heads),
      INT_KEY("tri_r", tri_r),
      INT_KEY("tri_res", tri_res),
      INT_KEY("tri_chan", tri_chan),
      INT_KEY("tri_emb", tri_emb),
      INT_KEY("tri_heads", tri_heads),
      INT_KEY("mlp_hidden", mlp_hidden),
      BOOL_KEY("no_triplane", no_triplane),
      BOOL_KEY("no_dist", no_dist),
      BOOL_KEY("from_scratch", from_scratch),
      DBL_KEY("data_fraction", data_fraction),
      INT_KEY("checkpoint_every", checkpoint_every),
#undef STR_KEY
#undef INT_KEY
#undef U64_KEY
#undef DBL_KEY
#undef BOOL_KEY
  };
  return defs;
}

}  // namespace

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& d : keys())
    if (key == d.name) {
      d.set(cfg, value);
      return;
    }
  throw ConfigError("config: unknown key '" + key + "'");
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const auto& d : keys()) os << d.name << " = " << d.get(cfg) << "\n";
  return os.str();
}

EncoderConfig TrainConfig::encoder_config() const {
  EncoderConfig e;
  e.image_size = image_size;
  e.patch_size = patch;
  e.depth = enc_depth;
  e.width = width;
  e.heads = heads;
  return e;
}

TriplaneConfig TrainConfig::triplane_config() const {
  TriplaneConfig t;
  t.r = tri_r;
  t.R = tri_res;
  t.C = tri_chan;
  t.emb_dim = tri_emb;
  t.heads = tri_heads;
  t.in_dim = encoder_config().feat_dim();
  return t;
}

LossWeights<float> TrainConfig::loss_weights() const {
  LossWeights<float> w;
  w.rgb = float(lambda_rgb);
  w.depth = float(lambda_depth);
  w.dist = float(lambda_dist);
  w.norm = float(lambda_norm);
  w.validate();
  return w;
}

void TrainConfig::validate() const {
  encoder_config().validate();
  if (!no_triplane) triplane_config().upsample_blocks();
  loss_weights();
  if (batch < 1) throw ConfigError("config: batch must be >= 1");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (lr <= 0) throw ConfigError("config: lr must be positive");
  if (coarse_samples < 1 || fine_samples < 1)
    throw ConfigError("config: sample counts must be >= 1");
  if (data_fraction <= 0 || data_fraction > 1)
    throw ConfigError("config: data_fraction must be in (0, 1]");
  // no_dist / from_scratch force lambda_dist to 0 at trainer creation
  if (!no_dist && !from_scratch && lambda_dist > 0 && teacher.empty())
    throw ConfigError("config: teacher checkpoint required when lambda_dist > 0");
}

}  // namespace tp
