#pragma once

#include <string>

#include "pxc/config.hpp"

namespace pxc {

struct GenOptions {
  std::string config_path;
  std::string out_dir;
  int count_override = -1;
  bool dump_pairs = false;
};

struct TrainOptions {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  int steps_override = -1;
  bool quiet = false;
};

struct InferEvalOptions {
  std::string config_path;
  std::string ckpt_path;
  std::string data_dir;
  std::string out_dir;
  std::string mode = "ap";  // "ap" | "lane"
  bool debug_perfect = false;
  bool quiet = false;
};

struct GradCheckOptions {
  std::string config_path;
};

void cmd_gen(const GenOptions& opt);
void cmd_train(const TrainOptions& opt);
void cmd_infer_eval(const InferEvalOptions& opt);
// Returns the max relative error; prints a summary line.
double cmd_grad_check(const GradCheckOptions& opt);

}  // namespace pxc
