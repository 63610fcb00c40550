#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "glore/downstream.hpp"
#include "glore/encoder.hpp"
#include "glore/relgraph.hpp"

namespace glore {

// Flat key=value run configuration with section prefixes. Relative input
// paths resolve against the config file's directory. The global seed
// propagates to every seeded component.
struct RunConfig {
  uint64_t seed = 42;

  std::string corpus;
  std::string kb;
  std::string whitelist;
  std::string glove;
  std::string out_dir = "out";
  std::string re_train_bags;
  std::string re_eval_bags;
  std::string re_relations;
  std::string kbc_train;
  std::string kbc_test;
  std::string kbc_mentions;

  FilterConfig filter;
  EncoderConfig encoder;
  TrainConfig train;
  ReHeadConfig re_head;
  std::vector<int> re_cutoffs = {10, 30, 50, 100};
  std::string re_alpha = "auto";  // "auto" or a number in [0,1]
  KbcConfig kbc;
  long long analysis_min_count = 5;

  static RunConfig parse(std::istream& in, const std::string& base_dir);
  static RunConfig load(const std::string& path);
};

std::vector<int> parse_cutoffs(const std::string& csv);

}  // namespace glore
