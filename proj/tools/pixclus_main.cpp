#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pxc/commands.hpp"
#include "pxc/error.hpp"
#include "pxc/kernels.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"pixclus: pixel-clustering instance segmentation on synthetic scenes"};
  app.require_subcommand(1);

  std::string kernel_mode = "parallel";
  app.add_option("--kernels", kernel_mode, "Kernel implementation: serial or parallel")
      ->check(CLI::IsMember({"serial", "parallel"}));

  pxc::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config_path, "Config JSON")->required();
  gen_cmd->add_option("--out", gen.out_dir, "Output dataset directory")->required();
  gen_cmd->add_option("--count", gen.count_override, "Override gen.count");
  gen_cmd->add_flag("--dump-pairs", gen.dump_pairs, "Also dump sampled pair sets as JSONL");

  pxc::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train on a generated dataset");
  train_cmd->add_option("--config", train.config_path, "Config JSON")->required();
  train_cmd->add_option("--data", train.data_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out_dir, "Output directory")->required();
  train_cmd->add_option("--steps", train.steps_override, "Override train.steps");

  pxc::InferEvalOptions infer;
  auto* infer_cmd = app.add_subcommand("infer-eval", "Run inference and score it");
  infer_cmd->add_option("--config", infer.config_path, "Config JSON")->required();
  infer_cmd->add_option("--ckpt", infer.ckpt_path, "Checkpoint file")->required();
  infer_cmd->add_option("--data", infer.data_dir, "Dataset directory")->required();
  infer_cmd->add_option("--out", infer.out_dir, "Output directory")->required();
  infer_cmd->add_option("--mode", infer.mode, "Scoring mode: ap or lane")
      ->check(CLI::IsMember({"ap", "lane"}));
  infer_cmd->add_flag("--debug-perfect", infer.debug_perfect,
                      "Score ground truth piped through as predictions");

  pxc::GradCheckOptions gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  gc_cmd->add_option("--config", gc.config_path, "Config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  pxc::kernels::set_mode(kernel_mode == "serial" ? pxc::kernels::Mode::serial
                                                 : pxc::kernels::Mode::parallel);

  if (*gen_cmd) pxc::cmd_gen(gen);
  if (*train_cmd) pxc::cmd_train(train);
  if (*infer_cmd) pxc::cmd_infer_eval(infer);
  if (*gc_cmd) return pxc::cmd_grad_check(gc) <= 1e-4 ? 0 : 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pxc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pxc::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const pxc::DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
