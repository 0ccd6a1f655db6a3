// Command-line front end: train, export-matrix, sense, reconstruct, evaluate.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcs/tcs.hpp"

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string images;
  std::string out = "model.tcsm";
  std::string log_path;
  std::uint32_t patch = 32;
  double rate = 0.25;
  double gamma = 0.05;
  std::size_t patches = 200000;
  std::uint32_t epochs = 50;
  std::uint32_t batch = 5000;
  double lr = 0.01;
  double decay = 0.6;
  std::uint32_t decay_every = 5;
  double l2 = 0.001;
  std::uint32_t hidden = 2048;
  std::uint32_t layers = 2;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainArgs& args) {
  if (!std::filesystem::is_directory(args.images))
    throw CliError("image directory not found: " + args.images);

  tcs::TrainRunOptions opts;
  opts.images_dir = args.images;
  opts.out_path = args.out;
  opts.patch_count = args.patches;
  opts.net.patch_side = args.patch;
  opts.net.sensing_rate = args.rate;
  opts.net.sparsity_ratio = args.gamma;
  opts.net.hidden_layers = args.layers;
  opts.net.hidden_units = args.hidden;
  opts.train.epochs = args.epochs;
  opts.train.batch_size = args.batch;
  opts.train.base_lr = args.lr;
  opts.train.lr_decay_factor = args.decay;
  opts.train.lr_decay_every = args.decay_every;
  opts.train.weight_decay = args.l2;
  opts.train.seed = args.seed;

  std::ofstream log_file;
  std::ostream* loss_stream = &std::cout;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path);
    if (!log_file) throw std::runtime_error("cannot write loss log: " + args.log_path);
    loss_stream = &log_file;
  }
  tcs::run_train(opts, loss_stream, &std::cerr);
  std::cerr << "wrote checkpoint: " << args.out << "\n";
  return 0;
}

int cmd_export_matrix(const std::string& model_path, const std::string& out_path) {
  tcs::Model model = tcs::load_checkpoint(model_path);
  tcs::refresh_model(model);
  tcs::save_stp(model.sensing.theta_sb, std::filesystem::path(out_path));
  std::cerr << "wrote projection: " << out_path << " (n=" << model.sensing.theta_sb.n
            << " m=" << model.sensing.theta_sb.m << " k=" << model.sensing.theta_sb.k << ")\n";
  return 0;
}

int cmd_sense(const std::string& matrix_path, const std::string& model_path, const std::string& image_path,
              std::uint32_t stride, const std::string& out_path) {
  const tcs::SparseTernaryMatrix phi = tcs::load_stp(std::filesystem::path(matrix_path));
  const tcs::Model model = tcs::load_checkpoint(model_path);
  if (phi.n != model.config.n() || phi.m != model.config.m())
    throw std::runtime_error("projection dimensions do not match the model");
  const tcs::GrayImage image = tcs::load_image(image_path);
  if (image.width < model.config.patch_side || image.height < model.config.patch_side)
    throw CliError("image is smaller than the patch size");
  const tcs::MeasurementSet set =
      tcs::sense_image(phi, model.stats, image, model.config.patch_side, stride);
  tcs::save_measurements(set, out_path);
  std::cerr << "wrote measurements: " << out_path << " (" << set.y.rows() << " vectors of length "
            << set.y.cols() << ")\n";
  return 0;
}

int cmd_reconstruct(const std::string& model_path, const std::string& measurements_path,
                    const std::string& out_path) {
  const tcs::Model model = tcs::load_checkpoint(model_path);
  const tcs::MeasurementSet set = tcs::load_measurements(measurements_path);
  const tcs::GrayImage image = tcs::reconstruct_from_measurements(model, set);
  tcs::save_pgm(image, out_path);
  std::cerr << "wrote image: " << out_path << " (" << image.width << "x" << image.height << ")\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& images_dir, std::uint32_t stride,
                 const std::string& baseline, bool identity, std::uint64_t seed,
                 const std::string& report_path) {
  if (!std::filesystem::is_directory(images_dir)) throw CliError("image directory not found: " + images_dir);
  const tcs::Model model = tcs::load_checkpoint(model_path);

  std::vector<tcs::GrayImage> images;
  std::vector<std::string> names;
  for (const auto& path : tcs::list_image_files(images_dir)) {
    images.push_back(tcs::load_image(path));
    names.push_back(path.filename().string());
  }

  tcs::EvaluateOptions opts;
  opts.stride = stride;
  opts.baseline_bp = baseline == "bp";
  opts.identity = identity;
  opts.seed = seed;
  const auto records = tcs::evaluate_images(model, images, names, opts);

  if (report_path.empty()) {
    tcs::write_eval_csv(records, std::cout);
  } else {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write report: " + report_path);
    tcs::write_eval_csv(records, out);
    std::cerr << "wrote report: " << report_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse ternary compressed sensing: train a projection/reconstructor pair, "
               "sense and reconstruct images block-wise, and evaluate against basis pursuit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model on an image directory");
  train->add_option("--images", train_args.images, "Directory of training images (.pgm/.ppm)")->required();
  train->add_option("--patch", train_args.patch, "Patch side S (default 32)");
  train->add_option("--rate", train_args.rate, "Sensing rate R in (0,1) (default 0.25)");
  train->add_option("--gamma", train_args.gamma, "Sparsity ratio in (0,1] (default 0.05)");
  train->add_option("--patches", train_args.patches, "Training patches to sample (default 200000)");
  train->add_option("--epochs", train_args.epochs, "Training epochs (default 50)");
  train->add_option("--batch", train_args.batch, "Batch size (default 5000)");
  train->add_option("--lr", train_args.lr, "Base learning rate (default 0.01)");
  train->add_option("--decay", train_args.decay, "Learning-rate decay factor (default 0.6)");
  train->add_option("--decay-every", train_args.decay_every, "Epochs between decays (default 5)");
  train->add_option("--l2", train_args.l2, "L2 weight on reconstruction weights (default 0.001)");
  train->add_option("--hidden", train_args.hidden, "Hidden units per layer (default 2048)");
  train->add_option("--layers", train_args.layers, "Nonlinear hidden layers (default 2)");
  train->add_option("--seed", train_args.seed, "RNG seed (default 1)");
  train->add_option("--out", train_args.out, "Checkpoint path (default model.tcsm)");
  train->add_option("--log", train_args.log_path, "Write epoch,step,loss,lr lines here instead of stdout");

  std::string model_path, out_path, matrix_path, image_path, measurements_path, images_dir, report_path;
  std::string baseline = "none";
  bool identity = false;
  std::uint32_t stride = 2;
  std::uint64_t seed = 1;

  CLI::App* export_cmd = app.add_subcommand("export-matrix", "Export the deployable ternary projection");
  export_cmd->add_option("--model", model_path, "Model checkpoint (.tcsm)")->required();
  export_cmd->add_option("--out", out_path, "Output projection (.stpm)")->required();

  CLI::App* sense_cmd = app.add_subcommand("sense", "Measure an image block-wise with an exported projection");
  sense_cmd->add_option("--matrix", matrix_path, "Projection file (.stpm)")->required();
  sense_cmd->add_option("--model", model_path, "Model checkpoint (for normalization statistics)")->required();
  sense_cmd->add_option("--image", image_path, "Input image (.pgm/.ppm)")->required();
  sense_cmd->add_option("--stride", stride, "Patch stride (default 2)");
  sense_cmd->add_option("--out", out_path, "Output measurements (.bin)")->required();

  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct an image from measurements");
  rec_cmd->add_option("--model", model_path, "Model checkpoint (.tcsm)")->required();
  rec_cmd->add_option("--measurements", measurements_path, "Measurement file from `sense`")->required();
  rec_cmd->add_option("--out", out_path, "Output image (.pgm)")->required();

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "PSNR report over an image directory");
  eval_cmd->add_option("--model", model_path, "Model checkpoint (.tcsm)")->required();
  eval_cmd->add_option("--images", images_dir, "Directory of test images")->required();
  eval_cmd->add_option("--stride", stride, "Patch stride (default 2)");
  eval_cmd->add_option("--baseline", baseline, "none|bp: also run ISTA basis pursuit with a random ternary projection")
      ->check(CLI::IsMember({"none", "bp"}));
  eval_cmd->add_flag("--identity", identity, "Also report the reconstructor-bypass reassembly (sanity row)");
  eval_cmd->add_option("--seed", seed, "Seed for the baseline projection (default 1)");
  eval_cmd->add_option("--report", report_path, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*export_cmd) return cmd_export_matrix(model_path, out_path);
    if (*sense_cmd) return cmd_sense(matrix_path, model_path, image_path, stride, out_path);
    if (*rec_cmd) return cmd_reconstruct(model_path, measurements_path, out_path);
    if (*eval_cmd) return cmd_evaluate(model_path, images_dir, stride, baseline, identity, seed, report_path);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
