#include "aliascope/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <sstream>

#include "aliascope/adversarial.hpp"
#include "aliascope/binary_io.hpp"
#include "aliascope/cli/report.hpp"
#include "aliascope/instrumentation.hpp"
#include "aliascope/nn/checkpoint.hpp"
#include "aliascope/oscillations.hpp"

namespace aliascope::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

void write_manifest(const fs::path& path, const std::string& command, nlohmann::json config,
                    nlohmann::json inputs, nlohmann::json outputs, Clock::time_point started) {
  const double seconds = std::chrono::duration<double>(Clock::now() - started).count();
  const nlohmann::json manifest = {{"tool_version", kToolVersion}, {"command", command},
                                   {"config", std::move(config)},  {"inputs", std::move(inputs)},
                                   {"outputs", std::move(outputs)}, {"wall_clock_seconds", seconds}};
  write_file_atomic(path, manifest.dump(2) + "\n");
}

Dataset load_dataset_or_fail(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("dataset not found: " + path.string());
  return load_dataset(path);
}

nn::Checkpoint load_checkpoint_or_fail(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  return nn::load_checkpoint(path);
}

nn::ModelSpec make_spec(const std::string& arch, std::size_t width, std::optional<std::size_t> hidden, std::size_t depth,
                        std::size_t n_classes, std::size_t size) {
  nn::ModelSpec spec;
  try {
    spec.family = nn::parse_family(arch);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  spec.base_width = nn::is_resnet(spec.family) ? width : hidden.value_or(width);
  spec.depth = depth;
  spec.n_classes = n_classes;
  spec.input_size = size;
  return spec;
}

std::string history_csv(const std::vector<nn::EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,learning_rate,loss,accuracy\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_number(r.learning_rate) << ',' << format_number(r.loss) << ','
        << format_number(r.accuracy) << '\n';
  }
  return out.str();
}

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

void cmd_gen(const GenOptions& o) {
  const auto started = Clock::now();
  const DatasetSpec spec{o.n_freqs, o.size, o.count, o.noise, o.seed};
  as_usage([&] { spec.validate(); });
  const Dataset data = generate_dataset(spec);
  save_dataset(data, o.out);
  write_manifest(with_suffix(o.out, ".manifest.json"), "gen",
                 {{"n_freqs", o.n_freqs}, {"size", o.size}, {"count", o.count}, {"noise", o.noise}, {"seed", o.seed}},
                 nlohmann::json::object(), {{"dataset", o.out.string()}}, started);
  std::cout << "wrote " << data.size() << " samples (" << data.n_classes() << " classes x "
            << data.size() / data.n_classes() << ") to " << o.out.string() << "\n";
}

void cmd_train(const TrainOptions& o) {
  const auto started = Clock::now();
  const Dataset data = load_dataset_or_fail(o.data);
  if (o.n_classes && *o.n_classes != data.n_classes()) {
    throw UsageError("--n-classes " + std::to_string(*o.n_classes) + " does not match the dataset's " +
                     std::to_string(data.n_classes()) + " classes");
  }
  nn::ModelSpec spec = make_spec(o.arch, o.width, o.hidden, o.depth, data.n_classes(), data.spec().size);
  spec.stem_stride = o.stem_stride;
  spec.stem_pool = o.stem_pool;
  as_usage([&] { spec.validate(); });

  nn::TrainConfig config;
  config.epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.learning_rate = o.lr;
  config.lr_drop_epoch = o.lr_drop_epoch;
  config.lr_drop_factor = o.lr_drop_factor;
  config.weight_decay = o.weight_decay;
  config.seed = o.seed;
  as_usage([&] { config.validate(); });

  nn::FloatModel model = as_usage([&] { return nn::FloatModel(spec, o.seed); });
  const std::size_t params = model.parameter_count();
  if (!o.quiet) {
    std::cerr << nn::family_name(spec.family) << ": " << params << " parameters, "
              << model.downsample_points().size() << " downsample points\n";
  }
  nn::Checkpoint ck = nn::train(std::move(model), o.seed, data, config, [&](const nn::EpochRecord& r) {
    if (!o.quiet) {
      std::cerr << "epoch " << r.epoch << "/" << config.epochs << " lr " << r.learning_rate << " loss " << r.loss
                << " acc " << r.accuracy << "\n";
    }
  });
  nn::save_checkpoint(ck, o.out);
  const fs::path history_path = with_suffix(o.out, ".history.csv");
  write_file_atomic(history_path, history_csv(ck.history));

  nlohmann::json outputs = {{"checkpoint", o.out.string()}, {"history", history_path.string()}};
  nlohmann::json inputs = {{"train", o.data.string()}};
  if (o.test) {
    const Dataset test = load_dataset_or_fail(*o.test);
    const std::size_t k5 = std::min<std::size_t>(5, spec.n_classes);
    const std::vector<std::size_t> ks{1, k5};
    const auto acc = nn::evaluate(ck.model, test, ks);
    inputs["test"] = o.test->string();
    outputs["test_top1"] = acc[0];
    outputs["test_top5"] = acc[1];
    std::cout << "test top1 " << format_number(acc[0]) << " top" << k5 << " " << format_number(acc[1]) << "\n";
  }
  write_manifest(with_suffix(o.out, ".manifest.json"), "train",
                 {{"model", nn::to_json(spec)}, {"train_config", nn::to_json(config)}}, inputs, outputs, started);
  std::cout << "wrote " << o.out.string() << " (" << params << " parameters, " << ck.model.downsample_points().size()
            << " downsample points)\n";
}

void cmd_analyze(const AnalyzeOptions& o) {
  const auto started = Clock::now();
  const ThresholdRule rule = as_usage([&] { return ThresholdRule(o.divisor); });
  if (o.limit && *o.limit == 0) throw UsageError("--limit must be positive");
  nn::Checkpoint ck = load_checkpoint_or_fail(o.model);
  const Dataset data = load_dataset_or_fail(o.data);
  if (ck.model.spec().n_classes != data.n_classes()) throw UsageError("model and dataset class counts differ");

  const AnalysisReport report = analyze_dataset(ck.model, data, rule, o.limit);
  fs::create_directories(o.out);
  write_file_atomic(o.out / "report.json", report_to_json(report).dump(2) + "\n");
  write_file_atomic(o.out / "points.csv", points_csv(report));
  write_file_atomic(o.out / "samples.csv", samples_csv(report));
  write_manifest(o.out / "manifest.json", "analyze",
                 {{"divisor", o.divisor}, {"limit", o.limit ? nlohmann::json(*o.limit) : nlohmann::json(nullptr)}},
                 {{"model", o.model.string()}, {"dataset", o.data.string()}},
                 {{"report", (o.out / "report.json").string()},
                  {"points", (o.out / "points.csv").string()},
                  {"samples", (o.out / "samples.csv").string()}},
                 started);
  std::cout << "analyzed " << report.samples.size() << " samples, top1 " << format_number(report.top1);
  if (report.outer) {
    std::cout << ", aliased+tangled (equal weight) "
              << format_number((*report.outer)[2] + (*report.outer)[3]);
  }
  std::cout << "\n";
}

void cmd_attack(const AttackOptions& o) {
  const auto started = Clock::now();
  if (o.eps.empty()) throw UsageError("--eps must list at least one epsilon");
  const ThresholdRule rule = as_usage([&] { return ThresholdRule(o.divisor); });
  if (!o.clip.empty() && o.clip.size() != 2) throw UsageError("--clip takes lo,hi");
  if (o.limit && *o.limit == 0) throw UsageError("--limit must be positive");
  AttackConfig attack;
  attack.steps = o.steps;
  attack.step_size = o.step_size;
  attack.random_start = o.random_start;
  attack.seed = o.seed;
  if (o.clip.size() == 2) attack.clip_range = std::pair{o.clip[0], o.clip[1]};
  for (double e : o.eps) {
    AttackConfig probe = attack;
    probe.epsilon = e;
    as_usage([&] { probe.validate(); });
  }

  nn::Checkpoint ck = load_checkpoint_or_fail(o.model);
  const Dataset data = load_dataset_or_fail(o.data);
  if (ck.model.spec().n_classes != data.n_classes()) throw UsageError("model and dataset class counts differ");
  const SweepTable table = as_usage([&] { return adversarial_sweep(ck.model, data, o.eps, rule, attack, o.limit); });
  write_file_atomic(o.out, sweep_csv(table));
  write_manifest(with_suffix(o.out, ".manifest.json"), "attack",
                 {{"eps", o.eps},
                  {"steps", o.steps},
                  {"step_size", o.step_size ? nlohmann::json(*o.step_size) : nlohmann::json("2.5*eps/steps")},
                  {"divisor", o.divisor},
                  {"limit", o.limit ? nlohmann::json(*o.limit) : nlohmann::json(nullptr)},
                  {"clip", o.clip},
                  {"random_start", o.random_start},
                  {"seed", o.seed}},
                 {{"model", o.model.string()}, {"dataset", o.data.string()}}, {{"sweep", o.out.string()}}, started);
  std::cout << "wrote " << table.rows.size() << " rows to " << o.out.string() << "\n";
}

void cmd_sweep_arch(const SweepArchOptions& o) {
  const auto started = Clock::now();
  if (o.families.empty()) throw UsageError("--families must list at least one family");
  const Dataset train_set = load_dataset_or_fail(o.train);
  const Dataset test_set = load_dataset_or_fail(o.test);
  if (train_set.n_classes() != test_set.n_classes()) throw UsageError("train and test class counts differ");

  nn::TrainConfig config;
  config.epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.learning_rate = o.lr;
  config.lr_drop_epoch = o.lr_drop_epoch;
  config.weight_decay = o.weight_decay;
  config.seed = o.seed;
  as_usage([&] { config.validate(); });

  struct Row {
    nn::ModelSpec spec;
    std::size_t width, depth;
  };
  std::vector<Row> grid;
  for (const auto& name : o.families) {
    const nn::Family family = as_usage([&] { return nn::parse_family(name); });
    auto add = [&](std::size_t width, std::size_t depth) {
      nn::ModelSpec s = make_spec(name, width, std::nullopt, depth, train_set.n_classes(), train_set.spec().size);
      as_usage([&] { s.validate(); });
      grid.push_back({s, width, nn::is_resnet(family) ? depth : (family == nn::Family::Fc2h ? 2 : 1)});
    };
    switch (family) {
      case nn::Family::Fc1h:
      case nn::Family::Fc2h:
        for (std::size_t h : o.hiddens) add(h, 0);
        break;
      case nn::Family::ResnetC:
      case nn::Family::ResnetW:
        for (std::size_t w : o.widths) add(w, o.depth);
        break;
      case nn::Family::ResnetD:
        for (std::size_t d : o.depths) add(o.width, d);
        break;
    }
  }

  std::ostringstream csv;
  csv << "family,width,depth,param_count,test_accuracy\n";
  nlohmann::json results = nlohmann::json::array();
  for (const Row& row : grid) {
    nn::FloatModel model(row.spec, o.seed);
    const std::size_t params = model.parameter_count();
    if (!o.quiet) std::cerr << nn::family_name(row.spec.family) << " width " << row.width << " depth " << row.depth
                            << ": " << params << " parameters\n";
    nn::Checkpoint ck = nn::train(std::move(model), o.seed, train_set, config);
    const std::vector<std::size_t> top1{1};
    const double acc = nn::evaluate(ck.model, test_set, top1)[0];
    csv << nn::family_name(row.spec.family) << ',' << row.width << ',' << row.depth << ',' << params << ','
        << format_number(acc) << '\n';
    if (!o.quiet) std::cerr << "  test accuracy " << acc << "\n";
  }
  write_file_atomic(o.out, csv.str());
  write_manifest(with_suffix(o.out, ".manifest.json"), "sweep-arch",
                 {{"families", o.families},
                  {"widths", o.widths},
                  {"depth", o.depth},
                  {"depths", o.depths},
                  {"width", o.width},
                  {"hiddens", o.hiddens},
                  {"train_config", nn::to_json(config)}},
                 {{"train", o.train.string()}, {"test", o.test.string()}}, {{"table", o.out.string()}}, started);
  std::cout << "wrote " << grid.size() << " rows to " << o.out.string() << "\n";
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Measure aliasing inside convolutional networks trained to classify oscillations"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate an oscillation dataset");
  gen_cmd->add_option("--n-freqs", gen.n_freqs, "Frequencies per axis (N); N^2 classes")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image side length")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of samples (multiple of N^2)")->required();
  gen_cmd->add_option("--noise", gen.noise, "Noise amplitude A")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--arch", train.arch, "fc-1h, fc-2h, resnet-c, resnet-w or resnet-d")->capture_default_str();
  train_cmd->add_option("--width", train.width, "Base channel count (resnet)")->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden, "Hidden units (fc)");
  train_cmd->add_option("--depth", train.depth, "Residual blocks per stage")->capture_default_str();
  train_cmd->add_option("--stem-stride", train.stem_stride, "Stride of the stem convolution")->capture_default_str();
  train_cmd->add_flag("--stem-pool", train.stem_pool, "Add a 3x3 stride-2 max pool after the stem");
  train_cmd->add_option("--n-classes", train.n_classes, "Expected number of classes");
  train_cmd->add_option("--data", train.data, "Training dataset")->required();
  train_cmd->add_option("--test", train.test, "Optional test dataset to evaluate after training");
  train_cmd->add_option("--out", train.out, "Output checkpoint")->required();
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.lr)->capture_default_str();
  train_cmd->add_option("--lr-drop-epoch", train.lr_drop_epoch)->capture_default_str();
  train_cmd->add_option("--lr-drop-factor", train.lr_drop_factor)->capture_default_str();
  train_cmd->add_option("--weight-decay", train.weight_decay)->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->add_flag("--quiet", train.quiet, "No per-epoch progress");

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Classify aliasing at every downsample point");
  analyze_cmd->add_option("--model", analyze.model)->required();
  analyze_cmd->add_option("--data", analyze.data)->required();
  analyze_cmd->add_option("--divisor", analyze.divisor, "Threshold T = max|X'| / divisor")->capture_default_str();
  analyze_cmd->add_option("--limit", analyze.limit, "Analyze only the first samples");
  analyze_cmd->add_option("--out", analyze.out, "Output directory")->required();

  AttackOptions attack;
  auto* attack_cmd = app.add_subcommand("attack", "PGD sweep over epsilon");
  attack_cmd->add_option("--model", attack.model)->required();
  attack_cmd->add_option("--data", attack.data)->required();
  attack_cmd->add_option("--eps", attack.eps, "Comma-separated radii, including 0")->delimiter(',')->required();
  attack_cmd->add_option("--steps", attack.steps)->capture_default_str();
  attack_cmd->add_option("--step-size", attack.step_size, "Default 2.5*eps/steps");
  attack_cmd->add_option("--divisor", attack.divisor)->capture_default_str();
  attack_cmd->add_option("--limit", attack.limit);
  attack_cmd->add_option("--clip", attack.clip, "lo,hi")->delimiter(',');
  attack_cmd->add_flag("--random-start", attack.random_start);
  attack_cmd->add_option("--seed", attack.seed)->capture_default_str();
  attack_cmd->add_option("--out", attack.out, "Output CSV")->required();

  SweepArchOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-arch", "Accuracy versus parameter count across families");
  sweep_cmd->add_option("--train", sweep.train)->required();
  sweep_cmd->add_option("--test", sweep.test)->required();
  sweep_cmd->add_option("--families", sweep.families)->delimiter(',')->required();
  sweep_cmd->add_option("--widths", sweep.widths)->delimiter(',');
  sweep_cmd->add_option("--depth", sweep.depth)->capture_default_str();
  sweep_cmd->add_option("--depths", sweep.depths)->delimiter(',');
  sweep_cmd->add_option("--width", sweep.width)->capture_default_str();
  sweep_cmd->add_option("--hiddens", sweep.hiddens)->delimiter(',');
  sweep_cmd->add_option("--epochs", sweep.epochs)->capture_default_str();
  sweep_cmd->add_option("--batch-size", sweep.batch_size)->capture_default_str();
  sweep_cmd->add_option("--lr", sweep.lr)->capture_default_str();
  sweep_cmd->add_option("--lr-drop-epoch", sweep.lr_drop_epoch)->capture_default_str();
  sweep_cmd->add_option("--weight-decay", sweep.weight_decay)->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed)->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out)->required();
  sweep_cmd->add_flag("--quiet", sweep.quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) cmd_gen(gen);
    if (train_cmd->parsed()) cmd_train(train);
    if (analyze_cmd->parsed()) cmd_analyze(analyze);
    if (attack_cmd->parsed()) cmd_attack(attack);
    if (sweep_cmd->parsed()) cmd_sweep_arch(sweep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace aliascope::cli
