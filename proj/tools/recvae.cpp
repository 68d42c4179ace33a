// Command-line front end: preprocess raw ratings, train, evaluate, run the
// ablation table and fit the EASE baseline, all reproducible from a seed and
// a resolved-config file.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recvae/ablation.hpp"
#include "recvae/checkpoint.hpp"
#include "recvae/dataset_io.hpp"
#include "recvae/ease.hpp"
#include "recvae/errors.hpp"
#include "recvae/interactions.hpp"
#include "recvae/metrics.hpp"
#include "recvae/split.hpp"
#include "recvae/trainer.hpp"

namespace fs = std::filesystem;
using namespace recvae;

namespace {

struct CommonOptions {
  std::string data;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t heldout_users = 0;  // 0: 10% of users per held-out set
  double fold_in_fraction = 0.8;
};

struct TrainOptions {
  CommonOptions common;
  TrainConfig cfg;
  std::vector<double> prior_weights{3.0 / 20.0, 3.0 / 4.0, 1.0 / 10.0};
  std::string init_checkpoint;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--data", o.data, "Dataset bundle path (.rvds)")->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--seed", o.seed, "Random seed (splits, initialization, sampling)")
      ->capture_default_str();
  cmd->add_option("--heldout-users", o.heldout_users,
                  "Held-out users per split (default: 10% of users)")
      ->capture_default_str();
  cmd->add_option("--fold-in", o.fold_in_fraction, "Fold-in fraction for held-out users")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  add_common(cmd, o.common);
  auto opt = [cmd](auto&&... args) {
    return cmd->add_option(std::forward<decltype(args)>(args)...)->capture_default_str();
  };
  opt("--epochs", o.cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
  opt("--batch-size", o.cfg.batch_size, "Users per batch")->check(CLI::PositiveNumber);
  opt("--lr", o.cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  opt("--gamma", o.cfg.hyper.gamma, "Per-user KL scale gamma")->check(CLI::PositiveNumber);
  opt("--noise-keep", o.cfg.hyper.noise_keep,
      "Bernoulli keep probability for input corruption")
      ->check(CLI::Range(1e-6, 1.0));
  opt("--latent-dim", o.cfg.hyper.latent_dim, "Latent dimension")
      ->check(CLI::PositiveNumber);
  opt("--hidden-dim", o.cfg.hyper.hidden_dim, "Hidden width")->check(CLI::PositiveNumber);
  opt("--hidden-layers", o.cfg.hyper.hidden_layers, "Hidden layers in the encoder")
      ->check(CLI::PositiveNumber);
  opt("--enc-dec-ratio", o.cfg.enc_dec_ratio, "Encoder steps per decoder step")
      ->check(CLI::PositiveNumber);
  opt("--prior-weights", o.prior_weights,
      "Composite prior weights: standard,old-posterior,wide")
      ->delimiter(',')
      ->expected(3);
  opt("--wide-logvar", o.cfg.hyper.wide_logvar, "Log variance of the wide prior component");
  opt("--fixed-beta", o.cfg.fixed_beta, "KL weight when rescaling is off")
      ->check(CLI::PositiveNumber);
  opt("--noise-rescale", o.cfg.noise_rescale, "Rescale kept entries by 1/keep (0 disables)");
  opt("--init-checkpoint", o.init_checkpoint,
      "Warm-start weights from a checkpoint (fine-tuning)");
}

std::size_t resolve_heldout(const CommonOptions& o, std::size_t users) {
  if (o.heldout_users) return o.heldout_users;
  return std::max<std::size_t>(1, users / 10);
}

DatasetSplit make_split(const InteractionMatrix& matrix, const CommonOptions& o) {
  DatasetSplit split = split_users(matrix, resolve_heldout(o, matrix.num_users()), o.seed);
  assign_fold_in(matrix, split, o.fold_in_fraction, o.seed);
  return split;
}

void write_resolved_config(const CLI::App* cmd, const std::string& out_dir) {
  std::ofstream out(fs::path(out_dir) / "run_config.txt");
  if (!out) throw IoError("cannot write resolved config under " + out_dir);
  out << "[" << cmd->get_name() << "]\n";
  // Unset options without a default serialize as empty strings, which do not
  // parse back; dropping them leaves the defaults in effect on replay.
  std::istringstream lines(cmd->config_to_str(true, false));
  std::string line;
  while (std::getline(lines, line))
    if (line.find("=\"\"") == std::string::npos) out << line << "\n";
}

void write_metrics(const MetricsReport& report, const std::string& out_dir) {
  std::ofstream table(fs::path(out_dir) / "metrics.txt");
  table << report.to_table();
  std::ofstream json(fs::path(out_dir) / "metrics.json");
  json << report.to_json();
  std::cout << report.to_table();
}

Scorer model_scorer(const EncoderParams<float>& enc, const DecoderParams<float>& dec) {
  return [&enc, &dec](std::span<const std::uint32_t> fold_in) {
    return predict_scores(fold_in, enc, dec);
  };
}

int cmd_preprocess(const std::string& input, const CommonOptions& o,
                   const PreprocessConfig& pre, const CLI::App* cmd) {
  const RawInteractions raw = load_ratings(input);
  std::cout << "parsed " << raw.records.size() << " records from " << input << "\n";
  const InteractionMatrix matrix = preprocess(raw, pre);
  fs::create_directories(o.out);
  write_dataset((fs::path(o.out) / "dataset.rvds").string(), matrix);

  DatasetManifest manifest;
  manifest.seed = o.seed;
  manifest.rating_threshold = pre.rating_threshold;
  manifest.min_user_interactions = pre.min_user_interactions;
  manifest.min_item_interactions = pre.min_item_interactions;
  manifest.users = matrix.num_users();
  manifest.items = matrix.num_items();
  manifest.interactions = matrix.interaction_count();
  write_manifest((fs::path(o.out) / "manifest.txt").string(), manifest);
  write_resolved_config(cmd, o.out);
  std::cout << "bundle: " << manifest.users << " users, " << manifest.items << " items, "
            << manifest.interactions << " interactions\n";
  return 0;
}

int cmd_train(TrainOptions& o, const CLI::App* cmd) {
  o.cfg.seed = o.common.seed;
  o.cfg.hyper.prior_weights = {o.prior_weights[0], o.prior_weights[1], o.prior_weights[2]};
  const InteractionMatrix matrix = read_dataset(o.common.data);
  const DatasetSplit split = make_split(matrix, o.common);
  fs::create_directories(o.common.out);
  write_resolved_config(cmd, o.common.out);

  TrainSession session(matrix, split, o.cfg);
  if (!o.init_checkpoint.empty())
    session.load_parameters(read_checkpoint(o.init_checkpoint));

  std::ofstream log(fs::path(o.common.out) / "train_log.tsv");
  const std::string ckpt_path = (fs::path(o.common.out) / "model.rvae").string();
  const TrainResult result = session.run(ckpt_path, &std::cout, &log);
  std::cout << "best NDCG@100 " << result.best_ndcg100 << " at epoch " << result.best_epoch
            << "; checkpoint: " << ckpt_path << "\n";
  return 0;
}

int cmd_ease(const CommonOptions& o, double lambda, std::size_t max_items, const CLI::App* cmd) {
  const InteractionMatrix matrix = read_dataset(o.data);
  const DatasetSplit split = make_split(matrix, o);
  const EaseModel model = ease_fit(matrix, lambda, split.train_users, max_items);
  fs::create_directories(o.out);
  write_checkpoint((fs::path(o.out) / "ease.rvae").string(), to_checkpoint(model));
  write_resolved_config(cmd, o.out);
  const auto scorer = [&model](std::span<const std::uint32_t> fold_in) {
    return ease_scores(model, fold_in);
  };
  write_metrics(evaluate(scorer, split.test), o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RecVAE collaborative filtering: preprocessing, training, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a resolved-config file");

  // preprocess
  auto* pre_cmd = app.add_subcommand("preprocess", "Build a dataset bundle from a ratings CSV");
  std::string input;
  CommonOptions pre_common;
  PreprocessConfig pre_cfg;
  pre_cmd->add_option("--input", input, "Ratings CSV (userId,itemId,rating,timestamp)")
      ->required();
  pre_cmd->add_option("--out", pre_common.out, "Output directory")->required();
  pre_cmd->add_option("--seed", pre_common.seed, "Seed recorded in the manifest")
      ->capture_default_str();
  pre_cmd->add_option("--rating-threshold", pre_cfg.rating_threshold,
                      "Minimum rating that counts as positive feedback")
      ->capture_default_str();
  pre_cmd->add_option("--min-user-interactions", pre_cfg.min_user_interactions,
                      "Drop users with fewer interactions")
      ->capture_default_str();
  pre_cmd->add_option("--min-item-interactions", pre_cfg.min_item_interactions,
                      "Drop items with fewer interactions")
      ->capture_default_str();
  pre_cmd->configurable()->fallthrough();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the model on a dataset bundle");
  TrainOptions train_opts;
  add_train_options(train_cmd, train_opts);
  train_cmd->configurable()->fallthrough();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on held-out users");
  CommonOptions eval_common;
  std::string eval_checkpoint;
  std::string eval_split = "test";
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Model checkpoint (.rvae)")
      ->required();
  eval_cmd->add_option("--split", eval_split, "Which held-out set to score")
      ->check(CLI::IsMember({"test", "validation"}))
      ->capture_default_str();
  eval_cmd->configurable()->fallthrough();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the feature-subset ablation table");
  TrainOptions ablate_opts;
  std::vector<std::size_t> ablate_rows;
  add_train_options(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--rows", ablate_rows, "1-based table rows to run (default: all 11)")
      ->delimiter(',');
  ablate_cmd->configurable()->fallthrough();

  // ease
  auto* ease_cmd = app.add_subcommand("ease", "Fit and evaluate the EASE baseline");
  CommonOptions ease_common;
  double ease_lambda = 500.0;
  std::size_t ease_max_items = 20000;
  add_common(ease_cmd, ease_common);
  ease_cmd->add_option("--lambda", ease_lambda, "Ridge regularization strength")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ease_cmd->add_option("--max-items", ease_max_items, "Dense-inversion capability limit")
      ->capture_default_str();
  ease_cmd->configurable()->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pre_cmd->parsed()) return cmd_preprocess(input, pre_common, pre_cfg, pre_cmd);
    if (train_cmd->parsed()) return cmd_train(train_opts, train_cmd);
    if (eval_cmd->parsed()) {
      const InteractionMatrix matrix = read_dataset(eval_common.data);
      const DatasetSplit split = make_split(matrix, eval_common);
      const auto& users = eval_split == "test" ? split.test : split.validation;
      const Checkpoint ckpt = read_checkpoint(eval_checkpoint);
      fs::create_directories(eval_common.out);
      write_resolved_config(eval_cmd, eval_common.out);
      if (ckpt.kind == kKindEase) {
        const EaseModel model = ease_from_checkpoint(ckpt);
        const auto scorer = [&model](std::span<const std::uint32_t> fold_in) {
          return ease_scores(model, fold_in);
        };
        write_metrics(evaluate(scorer, users), eval_common.out);
      } else {
        EncoderParams<float> enc;
        DecoderParams<float> dec;
        HyperParams hyper;
        from_checkpoint(ckpt, enc, dec, hyper);
        if (enc.input_dim != matrix.num_items())
          throw DataError("checkpoint item count does not match the dataset bundle");
        write_metrics(evaluate(model_scorer(enc, dec), users), eval_common.out);
      }
      return 0;
    }
    if (ablate_cmd->parsed()) {
      ablate_opts.cfg.seed = ablate_opts.common.seed;
      ablate_opts.cfg.hyper.prior_weights = {ablate_opts.prior_weights[0],
                                             ablate_opts.prior_weights[1],
                                             ablate_opts.prior_weights[2]};
      const InteractionMatrix matrix = read_dataset(ablate_opts.common.data);
      const DatasetSplit split = make_split(matrix, ablate_opts.common);
      fs::create_directories(ablate_opts.common.out);
      write_resolved_config(ablate_cmd, ablate_opts.common.out);

      const auto all_rows = ablation_table_rows();
      std::vector<std::size_t> selected;
      if (ablate_rows.empty()) {
        for (std::size_t i = 0; i < all_rows.size(); ++i) selected.push_back(i);
      } else {
        for (std::size_t r : ablate_rows) {
          if (r < 1 || r > all_rows.size())
            throw ShapeError("ablation row out of range: " + std::to_string(r));
          selected.push_back(r - 1);
        }
      }
      std::vector<AblationFlags> rows;
      std::vector<double> scores;
      for (std::size_t idx : selected) {
        TrainConfig cfg = ablate_opts.cfg;
        cfg.flags = all_rows[idx];
        TrainSession session(matrix, split, cfg);
        session.run("", nullptr, nullptr);
        const auto& enc = session.best_encoder();
        const auto& dec = session.best_decoder();
        const double ndcg =
            mean_metric(model_scorer(enc, dec), split.test, {MetricSpec::Kind::ndcg, 100});
        rows.push_back(all_rows[idx]);
        scores.push_back(ndcg);
        std::cout << "row " << (idx + 1) << " done: ndcg@100 " << ndcg << "\n";
      }
      const std::string table = format_ablation_table(rows, scores);
      std::ofstream out(fs::path(ablate_opts.common.out) / "ablation.tsv");
      out << table;
      std::cout << table;
      return 0;
    }
    if (ease_cmd->parsed()) return cmd_ease(ease_common, ease_lambda, ease_max_items, ease_cmd);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
