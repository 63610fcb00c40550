#include "glore/config.hpp"

#include <filesystem>
#include <fstream>
#include <istream>

namespace glore {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config key " + key + ": expected true/false, got \"" + v + "\"");
}

long long parse_ll(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config key " + key + ": expected an integer, got \"" + v + "\"");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config key " + key + ": expected a number, got \"" + v + "\"");
  }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

std::vector<int> parse_cutoffs(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& part : split(csv, ',')) {
    out.push_back(static_cast<int>(parse_ll(trim(part), "cutoffs")));
    if (out.back() <= 0) throw Error("cutoffs must be positive");
  }
  if (out.empty()) throw Error("empty cutoff list");
  return out;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& base_dir) {
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));

    if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(parse_ll(value, key));
    } else if (key == "paths.corpus") {
      cfg.corpus = resolve(base_dir, value);
    } else if (key == "paths.kb") {
      cfg.kb = resolve(base_dir, value);
    } else if (key == "paths.whitelist") {
      cfg.whitelist = resolve(base_dir, value);
    } else if (key == "paths.glove") {
      cfg.glove = resolve(base_dir, value);
    } else if (key == "paths.out_dir") {
      cfg.out_dir = resolve(base_dir, value);
    } else if (key == "paths.re_train_bags") {
      cfg.re_train_bags = resolve(base_dir, value);
    } else if (key == "paths.re_eval_bags") {
      cfg.re_eval_bags = resolve(base_dir, value);
    } else if (key == "paths.re_relations") {
      cfg.re_relations = resolve(base_dir, value);
    } else if (key == "paths.kbc_train") {
      cfg.kbc_train = resolve(base_dir, value);
    } else if (key == "paths.kbc_test") {
      cfg.kbc_test = resolve(base_dir, value);
    } else if (key == "paths.kbc_mentions") {
      cfg.kbc_mentions = resolve(base_dir, value);
    } else if (key == "filter.max_length") {
      cfg.filter.max_length = static_cast<int>(parse_ll(value, key));
    } else if (key == "filter.min_occurrences") {
      cfg.filter.min_occurrences = parse_ll(value, key);
    } else if (key == "filter.drop_symmetric") {
      cfg.filter.drop_symmetric = parse_bool(value, key);
    } else if (key == "filter.use_whitelist") {
      cfg.filter.use_whitelist = parse_bool(value, key);
    } else if (key == "encoder.kind") {
      cfg.encoder.kind = encoder_kind_from_name(value);
    } else if (key == "encoder.d_model") {
      cfg.encoder.d_model = static_cast<int>(parse_ll(value, key));
    } else if (key == "encoder.layers") {
      cfg.encoder.layer_count = static_cast<int>(parse_ll(value, key));
    } else if (key == "encoder.heads") {
      cfg.encoder.head_count = static_cast<int>(parse_ll(value, key));
    } else if (key == "encoder.ffn_dim") {
      cfg.encoder.ffn_dim = static_cast<int>(parse_ll(value, key));
    } else if (key == "encoder.z_dim") {
      cfg.encoder.z_dim = static_cast<int>(parse_ll(value, key));
    } else if (key == "encoder.max_len") {
      cfg.encoder.max_len = static_cast<int>(parse_ll(value, key));
    } else if (key == "train.max_epochs") {
      cfg.train.max_epochs = static_cast<int>(parse_ll(value, key));
    } else if (key == "train.batch_size") {
      cfg.train.batch_size = static_cast<int>(parse_ll(value, key));
    } else if (key == "train.val_fraction") {
      cfg.train.val_fraction = parse_double(value, key);
    } else if (key == "train.base_lr") {
      cfg.train.base_lr = parse_double(value, key);
    } else if (key == "train.warmup_steps") {
      cfg.train.warmup_steps = static_cast<int>(parse_ll(value, key));
    } else if (key == "re.epochs") {
      cfg.re_head.epochs = static_cast<int>(parse_ll(value, key));
    } else if (key == "re.lr") {
      cfg.re_head.lr = parse_double(value, key);
    } else if (key == "re.cutoffs") {
      cfg.re_cutoffs = parse_cutoffs(value);
    } else if (key == "re.alpha") {
      cfg.re_alpha = value;
    } else if (key == "kbc.kind") {
      cfg.kbc.kind = kbc_kind_from_name(value);
    } else if (key == "kbc.dim") {
      cfg.kbc.dim = static_cast<int>(parse_ll(value, key));
    } else if (key == "kbc.negatives") {
      cfg.kbc.negatives = static_cast<int>(parse_ll(value, key));
    } else if (key == "kbc.epochs") {
      cfg.kbc.epochs = static_cast<int>(parse_ll(value, key));
    } else if (key == "kbc.batch_size") {
      cfg.kbc.batch_size = static_cast<int>(parse_ll(value, key));
    } else if (key == "kbc.lr") {
      cfg.kbc.lr = parse_double(value, key);
    } else if (key == "analysis.min_count") {
      cfg.analysis_min_count = parse_ll(value, key);
    } else {
      throw Error("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
  }
  cfg.train.seed = cfg.seed;
  cfg.re_head.seed = cfg.seed;
  cfg.kbc.seed = cfg.seed;
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::string base = std::filesystem::path(path).parent_path().string();
  return parse(in, base);
}

}  // namespace glore
